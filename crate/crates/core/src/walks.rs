//! Symmetric random walks on group models.
//!
//! Densities are finitely supported probability masses; the walk density
//! is uniform on `V ∪ {e}` (the lazy walk, which kills parity obstructions
//! while keeping `V ⊆ supp f`). Two engines coexist: a float engine with
//! compensated accumulation for large supports, and an exact engine that
//! tracks integer path counts, so `f^{⋆k}(g) = N_k(g)/|V ∪ {e}|^k` is a
//! rational number with no rounding at all.

use indexmap::IndexMap;
use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};

use crate::error::{CoreError, Result};
use crate::groups::{Elem, GroupModel};

/// Default guard on convolution support sizes.
pub const DEFAULT_SUPPORT_CAP: usize = 2_000_000;

/// Finitely supported probability density on a group model.
#[derive(Clone, Debug)]
pub struct Density {
    group: GroupModel,
    support: IndexMap<Elem, f64>,
}

impl Density {
    /// Point mass at the identity.
    pub fn point_mass(group: &GroupModel) -> Density {
        let mut support = IndexMap::new();
        support.insert(group.identity(), 1.0);
        Density {
            group: group.clone(),
            support,
        }
    }

    /// Uniform density on `V ∪ {e}` — the lazy symmetric walk.
    pub fn uniform_lazy(group: &GroupModel) -> Density {
        let mut elems: Vec<Elem> = vec![group.identity()];
        for v in group.generators() {
            if !elems.contains(v) {
                elems.push(v.clone());
            }
        }
        Self::uniform_on(group, &elems).expect("lazy walk support is symmetric")
    }

    /// Uniform density on the given support; must be symmetric.
    pub fn uniform_on(group: &GroupModel, elems: &[Elem]) -> Result<Density> {
        if elems.is_empty() {
            return Err(CoreError::domain("density support must be nonempty"));
        }
        let mass = 1.0 / elems.len() as f64;
        let mut support = IndexMap::new();
        for e in elems {
            if support.insert(e.clone(), mass).is_some() {
                return Err(CoreError::domain("duplicate element in density support"));
            }
        }
        let density = Density {
            group: group.clone(),
            support,
        };
        if !density.is_symmetric(1e-12) {
            return Err(CoreError::domain("density support is not symmetric"));
        }
        Ok(density)
    }

    pub fn group(&self) -> &GroupModel {
        &self.group
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    pub fn value(&self, g: &Elem) -> f64 {
        self.support.get(g).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Elem, f64)> {
        self.support.iter().map(|(e, &m)| (e, m))
    }

    pub fn mass(&self) -> f64 {
        let mut acc = NeumaierSum::default();
        for &m in self.support.values() {
            acc.add(m);
        }
        acc.total()
    }

    pub fn is_symmetric(&self, tolerance: f64) -> bool {
        self.support
            .iter()
            .all(|(g, &m)| (self.value(&self.group.inverse(g)) - m).abs() <= tolerance)
    }
}

/// Compensated (Neumaier) accumulator: large supports should not lose mass
/// to rounding.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// `(f ⋆ h)(g) = Σ_{ab=g} f(a) h(b)`; mass is preserved.
pub fn convolve(f: &Density, h: &Density, cap: usize) -> Result<Density> {
    let mut acc: IndexMap<Elem, NeumaierSum> = IndexMap::new();
    for (a, fa) in f.entries() {
        for (b, hb) in h.entries() {
            let g = f.group.multiply(a, b);
            let entry = acc.entry(g).or_default();
            entry.add(fa * hb);
            if acc.len() > cap {
                return Err(CoreError::CapExceeded {
                    needed: acc.len(),
                    cap,
                });
            }
        }
    }
    let support = acc.into_iter().map(|(g, s)| (g, s.total())).collect();
    Ok(Density {
        group: f.group.clone(),
        support,
    })
}

/// `f^{⋆k}` by binary exponentiation of the convolution.
pub fn convolution_power(f: &Density, k: u32, cap: usize) -> Result<Density> {
    if k < 1 {
        return Err(CoreError::domain("convolution power needs k >= 1"));
    }
    let mut result: Option<Density> = None;
    let mut base = f.clone();
    let mut remaining = k;
    loop {
        if remaining & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => convolve(&r, &base, cap)?,
            });
        }
        remaining >>= 1;
        if remaining == 0 {
            break;
        }
        base = convolve(&base, &base, cap)?;
    }
    Ok(result.expect("k >= 1"))
}

/// Exact lazy-walk distribution: integer path counts `N_k(g)` with
/// `f^{⋆k}(g) = N_k(g)/branch^k` for the uniform density on `V ∪ {e}`.
#[derive(Clone, Debug)]
pub struct LazyWalkCounts {
    group: GroupModel,
    steps_set: Vec<Elem>,
    counts: IndexMap<Elem, BigUint>,
    step: u32,
}

impl LazyWalkCounts {
    pub fn new(group: &GroupModel) -> LazyWalkCounts {
        let mut steps_set: Vec<Elem> = vec![group.identity()];
        for v in group.generators() {
            if !steps_set.contains(v) {
                steps_set.push(v.clone());
            }
        }
        let mut counts = IndexMap::new();
        counts.insert(group.identity(), BigUint::one());
        LazyWalkCounts {
            group: group.clone(),
            steps_set,
            counts,
            step: 0,
        }
    }

    /// Number of one-step moves, `|V ∪ {e}|`.
    pub fn branch(&self) -> u64 {
        self.steps_set.len() as u64
    }

    pub fn step(&self) -> u32 {
        self.step
    }

    /// Advances the walk by one step: `N_{k+1}(g) = Σ_v N_k(g v^{-1})`.
    pub fn advance(&mut self, cap: usize) -> Result<()> {
        let mut next: IndexMap<Elem, BigUint> = IndexMap::new();
        for (g, n) in &self.counts {
            for v in &self.steps_set {
                let h = self.group.multiply(g, v);
                let entry = next.entry(h).or_insert_with(BigUint::zero);
                *entry += n;
                if next.len() > cap {
                    return Err(CoreError::CapExceeded {
                        needed: next.len(),
                        cap,
                    });
                }
            }
        }
        self.counts = next;
        self.step += 1;
        Ok(())
    }

    pub fn count(&self, g: &Elem) -> BigUint {
        self.counts.get(g).cloned().unwrap_or_else(BigUint::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = &Elem> {
        self.counts.keys()
    }

    /// Exact `f^{⋆k}(g)`.
    pub fn density(&self, g: &Elem) -> BigRational {
        let denom = BigUint::from(self.branch()).pow(self.step);
        Ratio::new(
            BigInt::from(self.count(g)),
            BigInt::from(denom),
        )
    }

    /// Total count equals `branch^k`, i.e. the density has mass exactly 1.
    pub fn total(&self) -> BigUint {
        self.counts.values().sum()
    }
}

/// Empirical constant of the Gaussian lower bound: the minimum over
/// `g ∈ B_{min(k, cap)}` of `f^{⋆k}(g) · m(B_{⌊√k⌋}) · e^{d(e,g)²/k}`.
pub fn gaussian_lower_check(f: &Density, k: u32, radius_cap: u32) -> Result<f64> {
    if k < 1 {
        return Err(CoreError::domain("gaussian_lower_check needs k >= 1"));
    }
    let group = f.group.clone();
    let radius = k.min(radius_cap);
    let ball = group.ball(radius)?;
    let sqrt_ball = group.ball((k as f64).sqrt().floor() as u32)?;
    let fk = convolution_power(f, k, DEFAULT_SUPPORT_CAP)?;
    let mut c_min = f64::INFINITY;
    for (pos, g) in ball.elements().iter().enumerate() {
        let dist = ball.dist_at(pos) as f64;
        let value = fk.value(g) * sqrt_ball.len() as f64 * (dist * dist / k as f64).exp();
        c_min = c_min.min(value);
    }
    Ok(c_min)
}

/// One row of the walk-domination sweep: an element of `B_n`, the uniform
/// ball density `1/|B_n|` and the Cesàro walk mass
/// `S(g) = (1/2n²) Σ_{k=1}^{2n²} f^{⋆k}(g)`.
#[derive(Clone, Debug)]
pub struct DominationRow {
    pub element: Elem,
    pub ball_density: f64,
    pub cesaro_density: f64,
}

/// Least constant of the ball-indicator domination, float engine.
#[derive(Clone, Debug)]
pub struct DominationReport {
    pub n: u32,
    pub ball_size: usize,
    pub steps: u32,
    pub rows: Vec<DominationRow>,
    /// Least `c` with `χ_{B_n}/|B_n| ≤ c · S` pointwise on `B_n`.
    pub c: f64,
}

/// Computes `c = max_{g ∈ B_n} (1/|B_n|) / S(g)` with the lazy walk on
/// `V ∪ {e}`. The Cesàro prefix is accumulated one convolution per step so
/// partial sums are reused.
pub fn domination_constant(group: &GroupModel, n: u32, cap: usize) -> Result<DominationReport> {
    if n < 1 {
        return Err(CoreError::domain("domination_constant needs n >= 1"));
    }
    let ball = group.ball_with_cap(n, cap)?;
    let steps = 2 * n * n;
    let f = Density::uniform_lazy(group);
    let mut current = Density::point_mass(group);
    let mut cesaro: IndexMap<Elem, NeumaierSum> = IndexMap::new();
    for _ in 0..steps {
        current = convolve(&current, &f, cap)?;
        for (g, m) in current.entries() {
            cesaro.entry(g.clone()).or_default().add(m);
        }
    }
    let ball_density = 1.0 / ball.len() as f64;
    let mut c: f64 = 0.0;
    let mut rows = Vec::with_capacity(ball.len());
    for g in ball.elements() {
        let s = cesaro
            .get(g)
            .map(|acc| acc.total() / steps as f64)
            .unwrap_or(0.0);
        if s <= 0.0 {
            return Err(CoreError::domain(
                "walk failed to reach a ball element; domination constant is infinite",
            ));
        }
        c = c.max(ball_density / s);
        rows.push(DominationRow {
            element: g.clone(),
            ball_density,
            cesaro_density: s,
        });
    }
    Ok(DominationReport {
        n,
        ball_size: ball.len(),
        steps,
        rows,
        c,
    })
}

/// Exact-rational version of [`domination_constant`] via integer path
/// counts; `c` is the exact least constant.
pub fn domination_constant_exact(
    group: &GroupModel,
    n: u32,
    cap: usize,
) -> Result<(BigRational, Vec<(Elem, BigRational)>)> {
    if n < 1 {
        return Err(CoreError::domain("domination_constant needs n >= 1"));
    }
    let ball = group.ball_with_cap(n, cap)?;
    let steps = 2 * n * n;
    let mut walk = LazyWalkCounts::new(group);
    // acc(g) = Σ_{j=1}^{k} N_j(g) branch^{k-j}, updated as acc·branch + N_k
    let mut acc: IndexMap<Elem, BigUint> = IndexMap::new();
    let branch = BigUint::from(walk.branch());
    for _ in 0..steps {
        walk.advance(cap)?;
        for v in acc.values_mut() {
            *v *= &branch;
        }
        for (g, count) in walk.counts.iter() {
            let entry = acc.entry(g.clone()).or_insert_with(BigUint::zero);
            *entry += count;
        }
    }
    // S(g) = acc(g) / (steps · branch^steps); c = max (1/|B_n|)/S(g)
    let denom_pow = BigUint::from(walk.branch()).pow(steps);
    let scale = BigInt::from(steps) * BigInt::from(denom_pow);
    let mut per_element = Vec::with_capacity(ball.len());
    let mut c = BigRational::zero();
    for g in ball.elements() {
        let acc_g = acc
            .get(g)
            .cloned()
            .ok_or_else(|| CoreError::domain("walk failed to reach a ball element"))?;
        let s = Ratio::new(BigInt::from(acc_g), scale.clone());
        let ratio = Ratio::new(BigInt::one(), BigInt::from(ball.len())) / &s;
        if ratio > c {
            c = ratio.clone();
        }
        per_element.push((g.clone(), s));
    }
    Ok((c, per_element))
}
