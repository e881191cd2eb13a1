//! Noncommutative maximal norms and weak-type witnesses.
//!
//! For a positive finite sequence `(x_n)` the maximal norm
//! `‖sup⁺ x_n‖_p` is the least `‖a‖_p` over majorants `a ⪰ x_n`. It is
//! computed here by cyclic Dykstra projections onto the shifted PSD cones
//! `{a : a ⪰ x_n}` interleaved with backtracked gradient steps on
//! `a ↦ τ(a^p)`; on a fully commutative algebra the pointwise maximum is
//! returned exactly. Weak-type `(p,p)` witnesses come from the Cuculescu
//! projection recursion.

use crate::algebra::{self, AlgebraElement, Projection};
use crate::error::{CoreError, Result};
use crate::tol;

/// An ordered finite list of positive elements of one algebra.
#[derive(Clone, Debug)]
pub struct PositiveSequence {
    elements: Vec<AlgebraElement>,
}

impl PositiveSequence {
    pub fn new(elements: Vec<AlgebraElement>) -> Result<Self> {
        if elements.is_empty() {
            return Err(CoreError::domain("positive sequence must be nonempty"));
        }
        for (n, x) in elements.iter().enumerate() {
            if x.parent() != elements[0].parent() {
                return Err(CoreError::structure(format!(
                    "element {n} belongs to a different algebra"
                )));
            }
            if !x.is_positive() {
                return Err(CoreError::domain(format!(
                    "element {n} of the sequence is not positive"
                )));
            }
        }
        Ok(PositiveSequence { elements })
    }

    pub fn elements(&self) -> &[AlgebraElement] {
        &self.elements
    }
}

/// Feasible majorant certifying an upper bound on `‖sup⁺ x_n‖_p`.
#[derive(Clone, Debug)]
pub struct MaximalWitness {
    /// Positive element with `a ⪰ x_n` for every `n`.
    pub majorant: AlgebraElement,
    /// `‖a‖_p` of the majorant.
    pub value: f64,
    /// Relative objective change at the last solver sweep (0 when the
    /// value is exact).
    pub certificate_gap: f64,
}

/// Projection `e` realizing the weak-type inequality at level `lambda`.
#[derive(Clone, Debug)]
pub struct WeakTypeWitness {
    pub projection: Projection,
    pub lambda: f64,
    /// `τ(1 - e)`.
    pub defect: f64,
    /// Realized constant `C` with `τ(1-e) ≤ C^p λ^{-p} ‖x‖_p^p`.
    pub bound_constant: f64,
}

const MAX_SWEEPS: usize = 10_000;
const STALL_SWEEPS: usize = 10;
const REL_TOL: f64 = 1e-7;

/// `‖sup⁺ x_n‖_p` for `p ∈ (1, ∞)` with a feasible majorant as witness.
///
/// Positive sequences only; use [`weak_type_witness`] for the `p = 1`
/// theory. Feasibility of the returned majorant is enforced by a final
/// cyclic projection sweep.
pub fn sup_plus_norm(seq: &PositiveSequence, p: f64) -> Result<MaximalWitness> {
    if !p.is_finite() || p <= 1.0 {
        return Err(CoreError::domain(format!(
            "sup_plus_norm needs p in (1, inf), got {p}"
        )));
    }
    let xs = seq.elements();
    let alg = xs[0].parent().clone();

    if alg.is_commutative() {
        let max = pointwise_max(xs);
        let value = max.lp_norm(p)?;
        return Ok(MaximalWitness {
            majorant: max,
            value,
            certificate_gap: 0.0,
        });
    }
    if xs.len() == 1 {
        let a = xs[0].positive_part()?;
        let value = a.lp_norm(p)?;
        return Ok(MaximalWitness {
            majorant: a,
            value,
            certificate_gap: 0.0,
        });
    }
    solve_majorant(xs, p)
}

/// Exact pointwise maximum of scalar-block elements.
fn pointwise_max(xs: &[AlgebraElement]) -> AlgebraElement {
    let alg = xs[0].parent().clone();
    let sites = alg.sites();
    let values: Vec<f64> = (0..sites)
        .map(|s| {
            xs.iter()
                .map(|x| x.block(s)[(0, 0)].re)
                .fold(f64::NEG_INFINITY, f64::max)
                .max(0.0)
        })
        .collect();
    AlgebraElement::from_site_scalars(&alg, &values).expect("commutative parent")
}

fn objective(a: &AlgebraElement, p: f64) -> f64 {
    a.power(p).map(|ap| ap.trace().re).unwrap_or(f64::INFINITY)
}

/// Metric projection onto `{a : a ⪰ x}` in the tracial inner product:
/// shift, clamp the spectrum at 0, shift back.
fn project_onto_majorants(a: &AlgebraElement, x: &AlgebraElement) -> AlgebraElement {
    x.add(&a.sub(x).hermitize().positive_part().expect("hermitian"))
}

fn feasibility_defect(a: &AlgebraElement, xs: &[AlgebraElement]) -> f64 {
    xs.iter()
        .map(|x| -a.sub(x).min_eigenvalue().unwrap_or(f64::INFINITY).min(0.0))
        .fold(0.0, f64::max)
}

/// Dykstra's cyclic projection onto the intersection of the majorant cones.
/// Runs until the iterate settles; stopping at mere feasibility would yield
/// a point of the intersection that is not the metric projection.
fn dykstra(a0: &AlgebraElement, xs: &[AlgebraElement], scale: f64) -> AlgebraElement {
    let zero = algebra::zero(a0.parent());
    let mut a = a0.clone();
    let mut increments = vec![zero; xs.len()];
    let tolerance = 1e-12 * (1.0 + scale);
    for _ in 0..500 {
        let before = a.clone();
        for (n, x) in xs.iter().enumerate() {
            let shifted = a.add(&increments[n]);
            let projected = project_onto_majorants(&shifted, x);
            increments[n] = shifted.sub(&projected);
            a = projected;
        }
        if a.sub(&before).sup_norm() <= tolerance && feasibility_defect(&a, xs) <= tolerance {
            break;
        }
    }
    a
}

/// Initial majorant: `(Σ x_n^p)^{1/p} + (max_n ‖x_n‖_∞)·1`, scaled down by
/// bisection to the feasibility boundary. `(Σ x_n^p)^{1/p}` is feasible by
/// operator monotonicity of `t^{1/p}`, so the scale-1 endpoint always is.
fn initial_majorant(xs: &[AlgebraElement], p: f64) -> Result<AlgebraElement> {
    let alg = xs[0].parent().clone();
    let mut sum_p = algebra::zero(&alg);
    let mut bound: f64 = 0.0;
    for x in xs {
        sum_p = sum_p.add(&x.power(p)?);
        bound = bound.max(x.sup_norm());
    }
    let raw = sum_p.power(1.0 / p)?.add(&algebra::identity(&alg).scale(bound));
    let feasible = |t: f64| feasibility_defect(&raw.scale(t), xs) <= 0.0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if !feasible(hi) {
        // eigen-noise at the endpoint; nudge outward
        hi = 1.0 + 1e-9;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(raw.scale(hi))
}

fn solve_majorant(xs: &[AlgebraElement], p: f64) -> Result<MaximalWitness> {
    let scale = xs.iter().map(|x| x.sup_norm()).fold(0.0, f64::max);
    let mut a = initial_majorant(xs, p)?;
    let mut obj = objective(&a, p);
    let mut eta = 0.5 / p;
    let mut stall = 0;
    let mut gap = f64::INFINITY;

    for _ in 0..MAX_SWEEPS {
        let grad = a.power(p - 1.0)?.scale(p);
        let mut step = eta;
        let mut accepted = None;
        while step > 1e-14 {
            let cand = dykstra(&a.sub(&grad.scale(step)), xs, scale);
            let cand_obj = objective(&cand, p);
            if cand_obj < obj {
                accepted = Some((cand, cand_obj, step));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, cand_obj, used)) => {
                gap = (obj - cand_obj) / obj.max(f64::MIN_POSITIVE);
                a = cand;
                obj = cand_obj;
                eta = (used * 1.5).min(1.0);
                if gap < REL_TOL {
                    stall += 1;
                } else {
                    stall = 0;
                }
            }
            None => {
                gap = 0.0;
                stall = STALL_SWEEPS;
            }
        }
        if stall >= STALL_SWEEPS {
            break;
        }
    }

    // final feasibility sweep: cyclic exact projections, then shift any
    // residual defect onto the identity so the witness invariant holds
    // unconditionally
    for _ in 0..50 {
        if feasibility_defect(&a, xs) <= tol::PROJECTION * (1.0 + a.sup_norm()) * 1e-4 {
            break;
        }
        for x in xs {
            a = project_onto_majorants(&a, x);
        }
    }
    let defect = feasibility_defect(&a, xs);
    if defect > 0.0 {
        a = a.add(&algebra::identity(a.parent()).scale(defect + 1e-15 * (1.0 + a.sup_norm())));
    }
    let value = a.lp_norm(p)?;
    Ok(MaximalWitness {
        majorant: a,
        value,
        certificate_gap: gap,
    })
}

/// Cuculescu projections `q_0 = 1`, `q_n = q_{n-1}·1_{[-λ,λ]}(q_{n-1} x_n q_{n-1})`
/// and the terminal projection `e = q_N` with `‖e x_n e‖_∞ ≤ λ(1 + tol)`.
///
/// The cut interval is `[-λ, λ]` so that small negative eigen-noise on
/// positive inputs is tolerated.
pub fn cuculescu(seq: &[AlgebraElement], lambda: f64) -> Result<(Vec<Projection>, Projection)> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(CoreError::domain(format!(
            "cuculescu needs lambda > 0, got {lambda}"
        )));
    }
    if seq.is_empty() {
        return Err(CoreError::domain("cuculescu needs a nonempty sequence"));
    }
    let alg = seq[0].parent().clone();
    let mut q_prev = Projection::identity(&alg);
    let mut qs = Vec::with_capacity(seq.len());
    for x in seq {
        if x.parent() != &alg {
            return Err(CoreError::structure(
                "cuculescu sequence mixes different algebras",
            ));
        }
        if !x.is_hermitian() {
            return Err(CoreError::domain("cuculescu needs hermitian elements"));
        }
        let compressed = q_prev.compress(x).hermitize();
        let cut = compressed.spectral_projection(-lambda, lambda)?;
        // q_prev and the cut commute up to eigen-noise; symmetrize and snap
        // back to an exact projection.
        let raw = q_prev
            .element()
            .mul(cut.element())
            .mul(q_prev.element())
            .hermitize();
        let q = Projection::snap(&raw)?;
        qs.push(q.clone());
        q_prev = q;
    }
    Ok((qs, q_prev))
}

/// Weak-type witness for a martingale `E_1 f, ..., E_N f` of a positive `f`.
///
/// Runs the Cuculescu recursion at level `lambda` and reports the defect
/// `τ(1-e)` together with the realized constant `C` in
/// `τ(1-e) ≤ C^p λ^{-p} ‖f‖_p^p` (`f` is taken to be the final element).
/// For genuine martingales of positive `f` the classical bound
/// `τ(1-e) ≤ ‖f‖_1/λ` holds; non-martingale input is accepted but carries
/// no such guarantee.
pub fn weak_type_witness(
    martingale: &[AlgebraElement],
    lambda: f64,
    p: f64,
) -> Result<WeakTypeWitness> {
    if p.is_nan() || p < 1.0 {
        return Err(CoreError::domain(format!(
            "weak_type_witness needs p >= 1, got {p}"
        )));
    }
    let (_, e) = cuculescu(martingale, lambda)?;
    let defect = e.defect().max(0.0);
    let f = martingale.last().expect("nonempty by cuculescu");
    let norm = f.lp_norm(p)?;
    let bound_constant = if norm > 0.0 {
        lambda * defect.powf(1.0 / p) / norm
    } else {
        0.0
    };
    Ok(WeakTypeWitness {
        projection: e,
        lambda,
        defect,
        bound_constant,
    })
}

/// A positive map on algebra elements, e.g. an ergodic average.
pub type PositiveMap<'a> = dyn Fn(&AlgebraElement) -> AlgebraElement + 'a;

/// Empirical strong-type constant: the largest ratio
/// `‖sup⁺_i S_i x‖_p / ‖x‖_p` over the test set. A lower bound on the true
/// strong-type constant of the family.
pub fn strong_type_estimate(
    family: &[&PositiveMap],
    p: f64,
    testset: &[AlgebraElement],
) -> Result<f64> {
    if testset.is_empty() {
        return Err(CoreError::domain("strong_type_estimate needs a nonempty test set"));
    }
    if family.is_empty() {
        return Err(CoreError::domain("strong_type_estimate needs a nonempty family"));
    }
    let mut worst: f64 = 0.0;
    for x in testset {
        let images: Vec<AlgebraElement> = family.iter().map(|s| s(x)).collect();
        let seq = PositiveSequence::new(images)?;
        let witness = sup_plus_norm(&seq, p)?;
        let denom = x.lp_norm(p)?;
        if denom > 0.0 {
            worst = worst.max(witness.value / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use crate::algebra::{
        identity, martingale, random_positive, AlgebraElement, SitePartition, TracialAlgebra,
    };
    use nalgebra::DVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn m2(entries: [f64; 4]) -> AlgebraElement {
        let alg = TracialAlgebra::matrix(2);
        let block = DMatrix::from_row_slice(
            2,
            2,
            &entries.map(|v| Complex64::new(v, 0.0)),
        );
        AlgebraElement::from_blocks(alg, vec![block]).unwrap()
    }

    fn m2_pair(a: AlgebraElement, b: AlgebraElement) -> PositiveSequence {
        PositiveSequence::new(vec![a, b]).unwrap()
    }

    /// Brute-force oracle for `‖sup⁺(x_1,x_2)‖_2` on M_2 with real entries:
    /// grid over `a = c0·1 + c1·σx + c3·σz` refined around the best feasible
    /// point. The eigenvalues of `a` are `c0 ± r` with `r = √(c1²+c3²)`,
    /// so `‖a‖_p = (((c0+r)^p + (c0−r)^p)/2)^{1/p}` under the normalized
    /// trace. Independent of the Dykstra path.
    fn grid_oracle_m2_p(x1: &AlgebraElement, x2: &AlgebraElement, p: f64) -> f64 {
        let feasible = |c0: f64, c1: f64, c3: f64| {
            for x in [x1, x2] {
                let b = x.block(0);
                // a - x as a real symmetric 2x2 matrix
                let m00 = c0 + c3 - b[(0, 0)].re;
                let m11 = c0 - c3 - b[(1, 1)].re;
                let m01 = c1 - b[(0, 1)].re;
                let trace = m00 + m11;
                let det = m00 * m11 - m01 * m01;
                if trace < -1e-12 || det < -1e-12 {
                    return false;
                }
            }
            true
        };
        let norm_p = |c0: f64, c1: f64, c3: f64| {
            let r = (c1 * c1 + c3 * c3).sqrt();
            let (hi, lo) = (c0 + r, (c0 - r).max(0.0));
            ((hi.powf(p) + lo.powf(p)) / 2.0).powf(1.0 / p)
        };
        let bound = x1.sup_norm().max(x2.sup_norm()) + 1.0;
        let (mut best, mut center, mut radius) = (f64::INFINITY, (bound, 0.0, 0.0), bound);
        for _ in 0..9 {
            let steps = 20;
            let mut local_best = best;
            let mut local_center = center;
            for i in 0..=steps {
                for j in 0..=steps {
                    for k in 0..=steps {
                        let c0 = center.0 + radius * (2.0 * i as f64 / steps as f64 - 1.0);
                        let c1 = center.1 + radius * (2.0 * j as f64 / steps as f64 - 1.0);
                        let c3 = center.2 + radius * (2.0 * k as f64 / steps as f64 - 1.0);
                        if feasible(c0, c1, c3) {
                            let v = norm_p(c0, c1, c3);
                            if v < local_best {
                                local_best = v;
                                local_center = (c0, c1, c3);
                            }
                        }
                    }
                }
            }
            best = local_best;
            center = local_center;
            radius *= 0.3;
        }
        best
    }

    fn grid_oracle_m2(x1: &AlgebraElement, x2: &AlgebraElement) -> f64 {
        grid_oracle_m2_p(x1, x2, 2.0)
    }

    #[test]
    fn commutative_pair_pointwise_max() {
        let alg = TracialAlgebra::commutative(2);
        let x1 = AlgebraElement::from_site_scalars(&alg, &[1.0, 0.0]).unwrap();
        let x2 = AlgebraElement::from_site_scalars(&alg, &[0.0, 1.0]).unwrap();
        let w = sup_plus_norm(&m2_pair(x1, x2), 2.0).unwrap();
        assert!((w.value - 1.0).abs() < 1e-12);
        for s in 0..2 {
            assert!((w.majorant.block(s)[(0, 0)].re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_element_sequence_is_its_own_majorant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let alg = TracialAlgebra::matrix(3);
        let x = random_positive(&alg, &mut rng);
        let seq = PositiveSequence::new(vec![x.clone()]).unwrap();
        let w = sup_plus_norm(&seq, 2.5).unwrap();
        assert!((w.value - x.lp_norm(2.5).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn rejects_p_one_and_nonpositive_input() {
        let alg = TracialAlgebra::commutative(2);
        let x = AlgebraElement::from_site_scalars(&alg, &[1.0, 1.0]).unwrap();
        let seq = PositiveSequence::new(vec![x]).unwrap();
        assert!(sup_plus_norm(&seq, 1.0).is_err());
        let y = AlgebraElement::from_site_scalars(&alg, &[1.0, -1.0]).unwrap();
        assert!(PositiveSequence::new(vec![y]).is_err());
    }

    #[test]
    fn matrix_pair_matches_grid_oracle() {
        let x1 = m2([1.0, 0.0, 0.0, 0.0]);
        let x2 = m2([0.5, 0.5, 0.5, 0.5]);
        let w = sup_plus_norm(&m2_pair(x1.clone(), x2.clone()), 2.0).unwrap();
        let oracle = grid_oracle_m2(&x1, &x2);
        assert!(
            (w.value - oracle).abs() < 1e-3,
            "solver {} vs oracle {}",
            w.value,
            oracle
        );
    }

    #[test]
    fn majorant_dominates_every_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let alg = TracialAlgebra::matrix(3);
        let xs: Vec<_> = (0..4).map(|_| random_positive(&alg, &mut rng)).collect();
        let seq = PositiveSequence::new(xs.clone()).unwrap();
        let w = sup_plus_norm(&seq, 2.0).unwrap();
        let floor = -1e-8 * (1.0 + w.majorant.sup_norm());
        for x in &xs {
            assert!(w.majorant.sub(x).min_eigenvalue().unwrap() >= floor);
        }
        let max_norm = xs
            .iter()
            .map(|x| x.lp_norm(2.0).unwrap())
            .fold(0.0, f64::max);
        assert!(w.value >= max_norm - 1e-6);
    }

    #[test]
    fn appending_never_decreases_value() {
        // exact in the commutative case
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let alg = TracialAlgebra::commutative(6);
        let mut xs = vec![random_positive(&alg, &mut rng)];
        let mut prev = sup_plus_norm(&PositiveSequence::new(xs.clone()).unwrap(), 2.0)
            .unwrap()
            .value;
        for _ in 0..5 {
            xs.push(random_positive(&alg, &mut rng));
            let v = sup_plus_norm(&PositiveSequence::new(xs.clone()).unwrap(), 2.0)
                .unwrap()
                .value;
            assert!(v >= prev - 1e-8);
            prev = v;
        }
        // solver path: within solver accuracy
        let alg = TracialAlgebra::matrix(2);
        let mut xs = vec![random_positive(&alg, &mut rng)];
        let mut prev = sup_plus_norm(&PositiveSequence::new(xs.clone()).unwrap(), 2.0)
            .unwrap()
            .value;
        for _ in 0..3 {
            xs.push(random_positive(&alg, &mut rng));
            let v = sup_plus_norm(&PositiveSequence::new(xs.clone()).unwrap(), 2.0)
                .unwrap()
                .value;
            assert!(v >= prev - 1e-4);
            prev = v;
        }
    }

    #[test]
    fn cuculescu_no_cut_below_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let alg = TracialAlgebra::function_matrix(4, 2);
        let xs: Vec<_> = (0..3)
            .map(|_| {
                let x = random_positive(&alg, &mut rng);
                x.scale(1.0 / (1.0 + x.sup_norm()))
            })
            .collect();
        let (_, e) = cuculescu(&xs, 2.0).unwrap();
        assert!(e.defect() < 1e-12);
    }

    #[test]
    fn cuculescu_commutative_truncation() {
        let alg = TracialAlgebra::commutative(2);
        let x = AlgebraElement::from_site_scalars(&alg, &[3.0, 0.0]).unwrap();
        let (_, e) = cuculescu(std::slice::from_ref(&x), 1.0).unwrap();
        assert!((e.element().block(0)[(0, 0)].re).abs() < 1e-12);
        assert!((e.element().block(1)[(0, 0)].re - 1.0).abs() < 1e-12);
        let defect = e.defect();
        assert!((defect - 0.5).abs() < 1e-12);
        assert!(defect <= x.lp_norm(1.0).unwrap() / 1.0);
    }

    #[test]
    fn cuculescu_matrix_cut_keeps_small_eigenspace() {
        let x = m2([2.0, 1.0, 1.0, 2.0]); // eigenvalues 3 and 1
        let (_, e) = cuculescu(std::slice::from_ref(&x), 2.0).unwrap();
        let b = e.element().block(0);
        for (i, j, want) in [(0, 0, 0.5), (0, 1, -0.5), (1, 0, -0.5), (1, 1, 0.5)] {
            assert!((b[(i, j)].re - want).abs() < 1e-10);
        }
        let exe = e.compress(&x);
        assert!(exe.sub(e.element()).sup_norm() < 1e-10);
    }

    #[test]
    fn cuculescu_output_is_projection_with_bounded_compressions() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let alg = TracialAlgebra::function_matrix(4, 2);
        for lambda in [0.5, 1.0, 2.0] {
            let xs: Vec<_> = (0..4).map(|_| random_positive(&alg, &mut rng)).collect();
            let (qs, e) = cuculescu(&xs, lambda).unwrap();
            for q in &qs {
                let idem = q.element().mul(q.element()).sub(q.element()).sup_norm();
                assert!(idem < 1e-8);
            }
            for x in &xs {
                assert!(e.compress(x).sup_norm() <= lambda * (1.0 + 1e-8));
            }
        }
    }

    #[test]
    fn cuculescu_rejects_bad_lambda() {
        let alg = TracialAlgebra::commutative(2);
        let x = AlgebraElement::from_site_scalars(&alg, &[1.0, 0.0]).unwrap();
        assert!(cuculescu(&[x], 0.0).is_err());
    }

    #[test]
    fn witness_constant_martingale_keeps_everything() {
        let alg = TracialAlgebra::commutative(4);
        let f = identity(&alg);
        let filt = SitePartition::dyadic_filtration(4).unwrap();
        let mart = martingale(&f, &filt).unwrap();
        let w = weak_type_witness(&mart, 2.0, 1.0).unwrap();
        assert!(w.defect < 1e-12);
    }

    #[test]
    fn witness_point_mass_two_step_filtration() {
        let alg = TracialAlgebra::commutative(4);
        let f = AlgebraElement::from_site_scalars(&alg, &[4.0, 0.0, 0.0, 0.0]).unwrap();
        let filt = SitePartition::dyadic_filtration(4).unwrap();
        let mart = martingale(&f, &filt).unwrap();
        // by hand: E f = (1,1,1,1), then (2,2,0,0), then f itself
        let w = weak_type_witness(&mart, 1.0, 1.0).unwrap();
        assert!(w.defect <= 1.0 + 1e-12);
        assert!((w.defect - 0.5).abs() < 1e-12);
    }

    #[test]
    fn witness_defect_bounded_by_l1_over_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let alg = TracialAlgebra::function_matrix(8, 2);
        let filt = SitePartition::dyadic_filtration(8).unwrap();
        for _ in 0..40 {
            let f = random_positive(&alg, &mut rng);
            let mart = martingale(&f, &filt).unwrap();
            let l1 = f.lp_norm(1.0).unwrap();
            for lambda in [0.5, 1.0, 2.0] {
                let w = weak_type_witness(&mart, lambda, 1.0).unwrap();
                assert!(
                    w.defect <= l1 / lambda + 1e-9,
                    "defect {} exceeds {}",
                    w.defect,
                    l1 / lambda
                );
                assert!(w.bound_constant <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn witness_prefixes_have_monotone_defect() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let alg = TracialAlgebra::commutative(16);
        let filt = SitePartition::dyadic_filtration(16).unwrap();
        let f = random_positive(&alg, &mut rng).scale(4.0);
        let mart = martingale(&f, &filt).unwrap();
        let mut prev = 0.0;
        for n in 1..=mart.len() {
            let w = weak_type_witness(&mart[..n], 0.5, 1.0).unwrap();
            assert!(w.defect >= prev - 1e-12);
            prev = w.defect;
        }
    }

    #[test]
    fn strong_type_identity_family_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let alg = TracialAlgebra::function_matrix(4, 2);
        let testset: Vec<_> = (0..5).map(|_| random_positive(&alg, &mut rng)).collect();
        let id = |x: &AlgebraElement| x.clone();
        let c = strong_type_estimate(&[&id], 2.0, &testset).unwrap();
        assert!((c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn strong_type_single_conditional_expectation_is_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let alg = TracialAlgebra::commutative(8);
        let part = SitePartition::contiguous(8, 2).unwrap();
        let testset: Vec<_> = (0..10).map(|_| random_positive(&alg, &mut rng)).collect();
        let e = move |x: &AlgebraElement| x.conditional_expectation(&part).unwrap();
        let c = strong_type_estimate(&[&e], 2.0, &testset).unwrap();
        assert!(c <= 1.0 + 1e-6);
    }

    #[test]
    fn strong_type_shift_averages_stable_in_family_size() {
        // Z-shift averages A_1..A_N on C(Z_32); the reported constant should
        // stabilize as N doubles.
        let alg = TracialAlgebra::commutative(32);
        let shift_avg = |n: i64| {
            let alg = alg.clone();
            move |x: &AlgebraElement| {
                let m = alg.sites() as i64;
                let vals: Vec<f64> = (0..m)
                    .map(|s| {
                        let mut acc = 0.0;
                        for k in -n..=n {
                            let idx = (s - k).rem_euclid(m) as usize;
                            acc += x.block(idx)[(0, 0)].re;
                        }
                        acc / (2 * n + 1) as f64
                    })
                    .collect();
                AlgebraElement::from_site_scalars(&alg, &vals).unwrap()
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let testset: Vec<_> = (0..50).map(|_| random_positive(&alg, &mut rng)).collect();
        let averages: Vec<_> = (1..=8).map(shift_avg).collect();
        let small: Vec<&PositiveMap> = averages[..4]
            .iter()
            .map(|f| f as &PositiveMap)
            .collect();
        let large: Vec<&PositiveMap> = averages.iter().map(|f| f as &PositiveMap).collect();
        let c4 = strong_type_estimate(&small, 2.0, &testset).unwrap();
        let c8 = strong_type_estimate(&large, 2.0, &testset).unwrap();
        assert!(c8 >= c4 - 1e-9);
        assert!(c8 <= 1.1 * c4, "c4={c4} c8={c8}");
    }

    #[test]
    fn solver_tracks_grid_oracle_away_from_p_two() {
        let alg = TracialAlgebra::matrix(2);
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for p in [1.5, 3.0] {
            for _ in 0..3 {
                let rand_pos = |rng: &mut ChaCha8Rng| {
                    let g = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
                    let gg = &g * g.transpose();
                    let block = gg.map(|v| Complex64::new(v, 0.0));
                    AlgebraElement::from_blocks(alg.clone(), vec![block]).unwrap()
                };
                let x1 = rand_pos(&mut rng);
                let x2 = rand_pos(&mut rng);
                let w = sup_plus_norm(&m2_pair(x1.clone(), x2.clone()), p).unwrap();
                let oracle = grid_oracle_m2_p(&x1, &x2, p);
                assert!(
                    (w.value - oracle).abs() < 1e-3,
                    "p={p}: solver {} vs oracle {}",
                    w.value,
                    oracle
                );
            }
        }
    }

    #[test]
    fn sequences_and_recursions_reject_mixed_algebras() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let a = random_positive(&TracialAlgebra::commutative(4), &mut rng);
        let b = random_positive(&TracialAlgebra::commutative(5), &mut rng);
        assert!(matches!(
            PositiveSequence::new(vec![a.clone(), b.clone()]),
            Err(CoreError::Structure(_))
        ));
        assert!(matches!(
            cuculescu(&[a, b], 1.0),
            Err(CoreError::Structure(_))
        ));
    }

    #[test]
    fn strong_type_rejects_empty_testset() {
        let id = |x: &AlgebraElement| x.clone();
        assert!(strong_type_estimate(&[&id], 2.0, &[]).is_err());
    }

    #[test]
    fn random_matrix_pairs_match_grid_oracle() {
        // real symmetric positive pairs, where the 3-parameter oracle is exact
        let alg = TracialAlgebra::matrix(2);
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..5 {
            let rand_pos = |rng: &mut ChaCha8Rng| {
                let g = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
                let gg = &g * g.transpose();
                let block = gg.map(|v| Complex64::new(v, 0.0));
                AlgebraElement::from_blocks(alg.clone(), vec![block]).unwrap()
            };
            let x1 = rand_pos(&mut rng);
            let x2 = rand_pos(&mut rng);
            let w = sup_plus_norm(&m2_pair(x1.clone(), x2.clone()), 2.0).unwrap();
            let oracle = grid_oracle_m2(&x1, &x2);
            assert!(
                (w.value - oracle).abs() < 1e-3,
                "solver {} vs oracle {}",
                w.value,
                oracle
            );
        }
    }

    #[allow(dead_code)]
    fn arc_check(_: Arc<TracialAlgebra>, _: DVector<f64>) {}
}
