//! Group specification strings: `Z`, `Zd:<d>`, `heisenberg`,
//! `cyclic:<m>^<d>`, `locfin`.

use std::fmt;
use std::str::FromStr;

use ncerg_core::groups::GroupModel;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupSpec {
    Z,
    Zd(usize),
    Heisenberg,
    Cyclic { modulus: i64, d: usize },
    LocallyFinite,
}

impl GroupSpec {
    pub fn build(&self) -> Result<GroupModel, String> {
        match self {
            GroupSpec::Z => Ok(GroupModel::integers()),
            GroupSpec::Zd(d) => {
                if *d == 0 || *d > 4 {
                    return Err("Zd supports dimensions 1..=4".into());
                }
                Ok(GroupModel::grid(*d))
            }
            GroupSpec::Heisenberg => Ok(GroupModel::heisenberg()),
            GroupSpec::Cyclic { modulus, d } => {
                if *modulus < 2 || *d == 0 || *d > 4 {
                    return Err("cyclic needs modulus ≥ 2 and dimension 1..=4".into());
                }
                Ok(GroupModel::cyclic(*modulus, *d))
            }
            GroupSpec::LocallyFinite => Ok(GroupModel::locally_finite(10)),
        }
    }
}

impl FromStr for GroupSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        if lower == "z" {
            return Ok(GroupSpec::Z);
        }
        if lower == "heisenberg" {
            return Ok(GroupSpec::Heisenberg);
        }
        if lower == "locfin" {
            return Ok(GroupSpec::LocallyFinite);
        }
        if let Some(d) = lower.strip_prefix("zd:") {
            let d: usize = d.parse().map_err(|_| format!("bad dimension in {s:?}"))?;
            return Ok(GroupSpec::Zd(d));
        }
        if let Some(rest) = lower.strip_prefix("cyclic:") {
            let (m, d) = rest
                .split_once('^')
                .ok_or_else(|| format!("expected cyclic:<m>^<d>, got {s:?}"))?;
            let modulus: i64 = m.parse().map_err(|_| format!("bad modulus in {s:?}"))?;
            let d: usize = d.parse().map_err(|_| format!("bad dimension in {s:?}"))?;
            return Ok(GroupSpec::Cyclic { modulus, d });
        }
        Err(format!(
            "unknown group {s:?}; expected Z, Zd:<d>, heisenberg, cyclic:<m>^<d> or locfin"
        ))
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Z => write!(f, "Z"),
            GroupSpec::Zd(d) => write!(f, "Zd:{d}"),
            GroupSpec::Heisenberg => write!(f, "heisenberg"),
            GroupSpec::Cyclic { modulus, d } => write!(f, "cyclic:{modulus}^{d}"),
            GroupSpec::LocallyFinite => write!(f, "locfin"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!("Z".parse::<GroupSpec>().unwrap(), GroupSpec::Z);
        assert_eq!("Zd:3".parse::<GroupSpec>().unwrap(), GroupSpec::Zd(3));
        assert_eq!(
            "heisenberg".parse::<GroupSpec>().unwrap(),
            GroupSpec::Heisenberg
        );
        assert_eq!(
            "cyclic:4^2".parse::<GroupSpec>().unwrap(),
            GroupSpec::Cyclic { modulus: 4, d: 2 }
        );
        assert_eq!(
            "locfin".parse::<GroupSpec>().unwrap(),
            GroupSpec::LocallyFinite
        );
        assert!("q8".parse::<GroupSpec>().is_err());
        assert!("cyclic:4".parse::<GroupSpec>().is_err());
    }
}
