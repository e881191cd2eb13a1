//! Adjacent dyadic systems on a windowed `Z^d` and doubling diagnostics.
//!
//! The `d+1` systems indexed by `i ∈ {0..d}` use the explicit shifts
//! `α_k^{(i)} = Σ_{j<k} 2^j ξ_j^{(i)}` with `ξ^{(i)}_{(d+1)n+l} = δ_{i,l}`,
//! applied in every coordinate. Scales are indexed here by the cell size
//! `2^level` (the scale `k ≤ 0` of the nested-partition picture maps to
//! `level = -k`). Every ball inside the window is covered by a cell of
//! comparable counting measure; ratios are exact rationals.

use num_rational::Ratio;

use crate::error::{CoreError, Result};
use crate::groups::GroupModel;

/// `α_level^{(i)}`: the Mei shift, evaluated exactly.
pub fn mei_shift(d: usize, i: usize, level: u32) -> Result<u64> {
    if i > d {
        return Err(CoreError::domain(format!(
            "system index {i} out of range 0..={d}"
        )));
    }
    if level > 62 {
        return Err(CoreError::domain("shift level exceeds 62 bits"));
    }
    let mut alpha = 0u64;
    for j in 0..level as usize {
        if j % (d + 1) == i {
            alpha |= 1 << j;
        }
    }
    Ok(alpha)
}

/// One of the `d+1` shifted dyadic systems on the window `[0, 2^W)^d`.
#[derive(Clone, Debug)]
pub struct DyadicSystem {
    d: usize,
    index: usize,
    window_log2: u32,
    max_level: u32,
    periodic: bool,
}

/// Product-of-intervals cell `[lo, hi)` per coordinate, unclipped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl DyadicSystem {
    pub fn new(d: usize, index: usize, window_log2: u32, periodic: bool) -> Result<Self> {
        if index > d {
            return Err(CoreError::domain(format!(
                "system index {index} out of range 0..={d}"
            )));
        }
        if window_log2 == 0 || window_log2 + d as u32 + 1 > 40 {
            return Err(CoreError::domain("window exponent out of supported range"));
        }
        Ok(DyadicSystem {
            d,
            index,
            window_log2,
            max_level: window_log2 + d as u32 + 1,
            periodic,
        })
    }

    /// All `d+1` adjacent systems over one window.
    pub fn family(d: usize, window_log2: u32, periodic: bool) -> Result<Vec<DyadicSystem>> {
        (0..=d)
            .map(|i| DyadicSystem::new(d, i, window_log2, periodic))
            .collect()
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn window_log2(&self) -> u32 {
        self.window_log2
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn window_size(&self) -> i64 {
        1i64 << self.window_log2
    }

    fn in_window(&self, x: &[i64]) -> bool {
        let w = self.window_size();
        x.iter().all(|&c| (0..w).contains(&c))
    }

    /// The unique cell of the level-`level` partition containing `x`.
    pub fn cell_of(&self, level: u32, x: &[i64]) -> Result<CellBox> {
        if x.len() != self.d {
            return Err(CoreError::structure(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.d
            )));
        }
        if level > self.max_level {
            return Err(CoreError::domain(format!(
                "level {level} exceeds max level {}",
                self.max_level
            )));
        }
        if !self.periodic && !self.in_window(x) {
            return Err(CoreError::domain("point outside window (wraparound off)"));
        }
        let alpha = mei_shift(self.d, self.index, level)? as i64;
        let span = 1i64 << level;
        let w = self.window_size();
        let mut lo = Vec::with_capacity(self.d);
        let mut hi = Vec::with_capacity(self.d);
        for &c in x {
            let c = if self.periodic { c.rem_euclid(w) } else { c };
            let m = (c - alpha).div_euclid(span);
            lo.push(alpha + m * span);
            hi.push(alpha + (m + 1) * span);
        }
        Ok(CellBox { lo, hi })
    }

    /// Counting measure of the cell as seen by the window: clipped to
    /// `[0, 2^W)` per coordinate when non-periodic, full size (capped by
    /// the torus) when periodic.
    pub fn cell_measure(&self, cell: &CellBox) -> i128 {
        let w = self.window_size();
        let mut measure: i128 = 1;
        for (lo, hi) in cell.lo.iter().zip(cell.hi.iter()) {
            let len = if self.periodic {
                (hi - lo).min(w)
            } else {
                (hi.min(&w) - lo.max(&0)).max(0)
            };
            measure *= len as i128;
        }
        measure
    }

    /// Whether the ball with the given bounding box fits inside the cell.
    fn covers(&self, cell: &CellBox, x: &[i64], r: i64) -> bool {
        let w = self.window_size();
        for ((&c, &lo), &hi) in x.iter().zip(cell.lo.iter()).zip(cell.hi.iter()) {
            if self.periodic {
                let offset = (c - lo).rem_euclid(w);
                if offset < r || offset + r >= hi - lo {
                    return false;
                }
            } else if c - r < lo || c + r >= hi {
                return false;
            }
        }
        true
    }
}

/// Metric used for balls on `Z^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallMetric {
    Linf,
    L1,
}

/// Number of lattice points in a ball of radius `r`.
pub fn ball_count(metric: BallMetric, d: usize, r: u32) -> i128 {
    match metric {
        BallMetric::Linf => (2 * r as i128 + 1).pow(d as u32),
        BallMetric::L1 => l1_ball_count(d, r),
    }
}

/// `|{x ∈ Z^d : Σ|x_i| ≤ r}| = Σ_j 2^j C(d,j) C(r,j)`.
pub fn l1_ball_count(d: usize, r: u32) -> i128 {
    let mut total: i128 = 0;
    for j in 0..=d.min(r as usize) {
        let mut term: i128 = 1 << j;
        term *= binomial(d as i128, j as i128);
        term *= binomial(r as i128, j as i128);
        total += term;
    }
    total
}

fn binomial(n: i128, k: i128) -> i128 {
    if k < 0 || k > n {
        return 0;
    }
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Covering cell found for one ball.
#[derive(Clone, Debug)]
pub struct CoverResult {
    pub system_index: usize,
    /// Cell size is `2^level`.
    pub level: u32,
    pub cell: CellBox,
    /// Exact `μ(Q)/μ(B)`.
    pub ratio: Ratio<i128>,
}

/// Paper bound `2^{3d(d+2)}` on the covering ratio.
pub fn mei_bound_log2(d: usize) -> u32 {
    (3 * d * (d + 2)) as u32
}

/// Searches all systems and levels for the smallest-ratio cell containing
/// `B(x, r)`; ties break toward the smaller level, then the smaller system
/// index. The ball must sit inside the window (or wraparound must be on).
pub fn cover_ball(
    systems: &[DyadicSystem],
    x: &[i64],
    r: u32,
    metric: BallMetric,
) -> Result<CoverResult> {
    let first = systems
        .first()
        .ok_or_else(|| CoreError::domain("cover_ball needs at least one system"))?;
    let d = first.dimension();
    if !first.periodic {
        let w = first.window_size();
        if x.iter().any(|&c| c - (r as i64) < 0 || c + (r as i64) >= w) {
            return Err(CoreError::domain(
                "ball leaves the window; enlarge the window or enable wraparound",
            ));
        }
    }
    let ball = ball_count(metric, d, r);
    let mut best: Option<CoverResult> = None;
    let max_level = systems.iter().map(|s| s.max_level).min().unwrap();
    for level in 0..=max_level {
        for system in systems {
            let cell = system.cell_of(level, x)?;
            if !system.covers(&cell, x, r as i64) {
                continue;
            }
            let ratio = Ratio::new(system.cell_measure(&cell), ball);
            let candidate = CoverResult {
                system_index: system.index,
                level,
                cell,
                ratio,
            };
            let better = match &best {
                None => true,
                Some(b) => {
                    candidate.ratio < b.ratio
                        || (candidate.ratio == b.ratio
                            && (candidate.level, candidate.system_index) < (b.level, b.system_index))
                }
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    best.ok_or_else(|| {
        CoreError::WindowTooSmall(format!(
            "no cell of any system covers the ball at x={x:?}, r={r}; increase the window exponent"
        ))
    })
}

/// A pointed homogeneous space with computable ball sizes.
#[derive(Clone, Debug)]
pub enum HomogeneousSpace {
    /// `Z` with integer radii.
    ZLine,
    /// `Z^d` with the ℓ∞ metric.
    GridLinf { d: usize },
    /// `Z^d` with the ℓ¹ metric.
    GridL1 { d: usize },
    /// A group model with its word metric.
    Group(GroupModel),
}

impl HomogeneousSpace {
    /// `μ(B_r)` for `r = 0..=up_to` (counting measure).
    pub fn ball_sizes(&self, up_to: u32) -> Result<Vec<u128>> {
        match self {
            HomogeneousSpace::ZLine => Ok((0..=up_to).map(|r| 2 * r as u128 + 1).collect()),
            HomogeneousSpace::GridLinf { d } => Ok((0..=up_to)
                .map(|r| (2 * r as u128 + 1).pow(*d as u32))
                .collect()),
            HomogeneousSpace::GridL1 { d } => Ok((0..=up_to)
                .map(|r| l1_ball_count(*d, r) as u128)
                .collect()),
            HomogeneousSpace::Group(model) => {
                let ball = model.ball(up_to)?;
                Ok(ball.size_profile().iter().map(|&s| s as u128).collect())
            }
        }
    }
}

/// `max μ(B(2r))/μ(B(r))` over the given radii.
pub fn doubling_constant(space: &HomogeneousSpace, radii: &[u32]) -> Result<f64> {
    if radii.is_empty() {
        return Err(CoreError::domain("doubling_constant needs radii"));
    }
    let max_r = radii.iter().copied().max().unwrap();
    let sizes = space.ball_sizes(2 * max_r)?;
    let mut worst: f64 = 0.0;
    for &r in radii {
        if r == 0 {
            return Err(CoreError::domain("doubling radii must be positive"));
        }
        worst = worst.max(sizes[2 * r as usize] as f64 / sizes[r as usize] as f64);
    }
    Ok(worst)
}

/// Result of the annulus scan at one dyadic scale.
#[derive(Clone, Copy, Debug)]
pub struct AnnulusScan {
    /// Chosen radius in `[2^i, 2^{i+1})`.
    pub radius: u32,
    /// `μ(B(r+k) ∖ B(r)) / μ(B(r))` at the chosen radius.
    pub shell_ratio: f64,
    /// Realized constant `C = shell_ratio · r / k` of the annulus bound.
    pub bound_constant: f64,
}

/// Scans integer radii in `[2^i, 2^{i+1})` for the thinnest annulus of
/// width `k`: minimizes the shell mass `μ(B(r+k) ∖ B(r))`, ties broken by
/// the smaller radius (on `Z` every radius ties and `2^i` is returned).
pub fn annulus_radius(space: &HomogeneousSpace, scale_index: u32, width: u32) -> Result<AnnulusScan> {
    if width == 0 || width as u64 > 1u64 << scale_index {
        return Err(CoreError::domain(format!(
            "annulus width {width} must lie in [1, 2^{scale_index}]"
        )));
    }
    let lo = 1u32 << scale_index;
    let hi = (1u32 << (scale_index + 1)) - 1;
    let sizes = space.ball_sizes(hi + width)?;
    let mut best: Option<(u128, u32)> = None;
    for r in lo..=hi {
        let shell = sizes[(r + width) as usize] - sizes[r as usize];
        if best.map(|(mass, _)| shell < mass).unwrap_or(true) {
            best = Some((shell, r));
        }
    }
    let (mass, radius) = best.expect("nonempty scan range");
    let shell_ratio = mass as f64 / sizes[radius as usize] as f64;
    Ok(AnnulusScan {
        radius,
        shell_ratio,
        bound_constant: shell_ratio * radius as f64 / width as f64,
    })
}
