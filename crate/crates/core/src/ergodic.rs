//! Trace-preserving actions on tracial algebras and their ergodic averages.
//!
//! An action is given per generator (site permutation, unitary conjugation,
//! both, or nothing) and extended to arbitrary elements by composing along
//! geodesic words from the BFS parent tree of the group ball. Ball averages,
//! subgroup averages, the mean ergodic projection, transference instances,
//! iterated one-parameter averages over the Heisenberg normal form, and the
//! Markov-operator domination check live here.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;

use crate::algebra::{self, AlgebraElement, TracialAlgebra};
use crate::dyadic::HomogeneousSpace;
use crate::error::{CoreError, Result};
use crate::groups::{Ball, Elem, GroupKind, GroupModel};
use crate::maximal::{self, PositiveSequence};
use crate::walks;

/// How the generators act.
#[derive(Clone, Debug)]
pub enum ActionKind {
    /// Every generator acts as the identity.
    Trivial,
    /// Per-generator site permutation `s ↦ π[s]`.
    Permutation(Vec<Vec<usize>>),
    /// Per-generator unitary conjugation (one unitary for all sites).
    Conjugation(Vec<DMatrix<Complex64>>),
    /// Site permutation combined with unitary conjugation.
    Product {
        perms: Vec<Vec<usize>>,
        unitaries: Vec<DMatrix<Complex64>>,
    },
}

/// A trace-preserving action of a group model on a tracial algebra.
#[derive(Clone, Debug)]
pub struct ActionModel {
    group: GroupModel,
    algebra: Arc<TracialAlgebra>,
    kind: ActionKind,
}

#[derive(Clone)]
struct Rep {
    perm: Option<Vec<usize>>,
    unitary: Option<DMatrix<Complex64>>,
}

impl Rep {
    fn identity() -> Rep {
        Rep {
            perm: None,
            unitary: None,
        }
    }

    /// `self ∘ other`, matching `α_{g·h} = α_g ∘ α_h`.
    fn compose(&self, other: &Rep) -> Rep {
        let perm = match (&self.perm, &other.perm) {
            (None, None) => None,
            (Some(p), None) | (None, Some(p)) => Some(p.clone()),
            (Some(pg), Some(ph)) => Some(ph.iter().map(|&s| pg[s]).collect()),
        };
        let unitary = match (&self.unitary, &other.unitary) {
            (None, None) => None,
            (Some(u), None) | (None, Some(u)) => Some(u.clone()),
            (Some(ug), Some(uh)) => Some(ug * uh),
        };
        Rep { perm, unitary }
    }

    fn apply(&self, x: &AlgebraElement) -> AlgebraElement {
        let mut blocks: Vec<DMatrix<Complex64>> = match &self.perm {
            None => x.blocks().to_vec(),
            Some(perm) => {
                let mut out = x.blocks().to_vec();
                for (s, b) in x.blocks().iter().enumerate() {
                    out[perm[s]] = b.clone();
                }
                out
            }
        };
        if let Some(u) = &self.unitary {
            for b in blocks.iter_mut() {
                *b = u * (&*b) * u.adjoint();
            }
        }
        AlgebraElement::from_blocks_unchecked(x.parent().clone(), blocks)
    }
}

impl ActionModel {
    pub fn trivial(group: GroupModel, algebra: Arc<TracialAlgebra>) -> ActionModel {
        ActionModel {
            group,
            algebra,
            kind: ActionKind::Trivial,
        }
    }

    /// Permutation action; one site bijection per generator, required to
    /// preserve weights and block dimensions.
    pub fn permutation(
        group: GroupModel,
        algebra: Arc<TracialAlgebra>,
        perms: Vec<Vec<usize>>,
    ) -> Result<ActionModel> {
        if perms.len() != group.generators().len() {
            return Err(CoreError::structure(
                "need one permutation per generator",
            ));
        }
        for perm in &perms {
            if perm.len() != algebra.sites() {
                return Err(CoreError::structure("permutation length mismatch"));
            }
            let mut seen = vec![false; perm.len()];
            for (s, &t) in perm.iter().enumerate() {
                if t >= perm.len() || seen[t] {
                    return Err(CoreError::structure("not a site bijection"));
                }
                seen[t] = true;
                if (algebra.weights()[s] - algebra.weights()[t]).abs() > 1e-15
                    || algebra.block_dims()[s] != algebra.block_dims()[t]
                {
                    return Err(CoreError::structure(
                        "permutation does not preserve weights and dimensions",
                    ));
                }
            }
        }
        Ok(ActionModel {
            group,
            algebra,
            kind: ActionKind::Permutation(perms),
        })
    }

    /// Conjugation action; one unitary per generator. All block dimensions
    /// must agree.
    pub fn conjugation(
        group: GroupModel,
        algebra: Arc<TracialAlgebra>,
        unitaries: Vec<DMatrix<Complex64>>,
    ) -> Result<ActionModel> {
        if unitaries.len() != group.generators().len() {
            return Err(CoreError::structure("need one unitary per generator"));
        }
        let d = algebra.block_dims()[0];
        if algebra.block_dims().iter().any(|&b| b != d) {
            return Err(CoreError::structure(
                "conjugation needs equal block dimensions",
            ));
        }
        for u in &unitaries {
            if u.nrows() != d || u.ncols() != d {
                return Err(CoreError::structure("unitary dimension mismatch"));
            }
            let defect = (u * u.adjoint() - DMatrix::<Complex64>::identity(d, d))
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max);
            if defect > 1e-10 {
                return Err(CoreError::structure("generator matrix is not unitary"));
            }
        }
        Ok(ActionModel {
            group,
            algebra,
            kind: ActionKind::Conjugation(unitaries),
        })
    }

    /// Combined permutation and conjugation action.
    pub fn product(
        group: GroupModel,
        algebra: Arc<TracialAlgebra>,
        perms: Vec<Vec<usize>>,
        unitaries: Vec<DMatrix<Complex64>>,
    ) -> Result<ActionModel> {
        let perm_action = Self::permutation(group.clone(), algebra.clone(), perms)?;
        let conj_action = Self::conjugation(group, algebra, unitaries)?;
        let ActionKind::Permutation(perms) = perm_action.kind else {
            unreachable!()
        };
        let ActionKind::Conjugation(unitaries) = conj_action.kind else {
            unreachable!()
        };
        Ok(ActionModel {
            group: conj_action.group,
            algebra: conj_action.algebra,
            kind: ActionKind::Product { perms, unitaries },
        })
    }

    /// Z acting on `C(Z_m)` by the shift `e_s ↦ e_{s+1}`.
    pub fn shift_on_cycle(m: usize) -> ActionModel {
        let group = GroupModel::integers();
        let algebra = TracialAlgebra::commutative(m);
        let forward: Vec<usize> = (0..m).map(|s| (s + 1) % m).collect();
        let backward: Vec<usize> = (0..m).map(|s| (s + m - 1) % m).collect();
        Self::permutation(group, algebra, vec![forward, backward]).expect("valid shift")
    }

    /// Z acting on `M_d` by conjugation with the given unitary.
    pub fn conjugation_on_matrix(u: DMatrix<Complex64>) -> Result<ActionModel> {
        let d = u.nrows();
        let group = GroupModel::integers();
        let algebra = TracialAlgebra::matrix(d);
        let u_inv = u.adjoint();
        Self::conjugation(group, algebra, vec![u, u_inv])
    }

    /// Z acting on `C(Z_m) ⊗ M_d`: shift on sites combined with unitary
    /// conjugation in the fiber.
    pub fn shift_conjugation_product(m: usize, u: DMatrix<Complex64>) -> Result<ActionModel> {
        let d = u.nrows();
        let group = GroupModel::integers();
        let algebra = TracialAlgebra::function_matrix(m, d);
        let forward: Vec<usize> = (0..m).map(|s| (s + 1) % m).collect();
        let backward: Vec<usize> = (0..m).map(|s| (s + m - 1) % m).collect();
        let u_inv = u.adjoint();
        Self::product(group, algebra, vec![forward, backward], vec![u, u_inv])
    }

    /// Heisenberg group acting on `C(H(Z_q))` by left translation of the
    /// mod-q quotient; `use_z_generators` picks the generating set
    /// `{x^{±1}, y^{±1}, z^{±1}}` needed for the iterated averages.
    pub fn heisenberg_translation(q: usize, use_z_generators: bool) -> ActionModel {
        let group = if use_z_generators {
            GroupModel::heisenberg_with_z()
        } else {
            GroupModel::heisenberg()
        };
        let algebra = TracialAlgebra::commutative(q * q * q);
        let qi = q as i64;
        let site = |a: i64, b: i64, c: i64| -> usize {
            ((a.rem_euclid(qi) * qi + b.rem_euclid(qi)) * qi + c.rem_euclid(qi)) as usize
        };
        let perms: Vec<Vec<usize>> = group
            .generators()
            .iter()
            .map(|g| {
                (0..q * q * q)
                    .map(|s| {
                        let (a, rest) = ((s / (q * q)) as i64, s % (q * q));
                        let (b, c) = ((rest / q) as i64, (rest % q) as i64);
                        // left translation: t ↦ g·t in H(Z_q)
                        site(g[0] + a, g[1] + b, g[2] + c + g[0] * b)
                    })
                    .collect()
            })
            .collect();
        Self::permutation(group, algebra, perms).expect("left translation is a site bijection")
    }

    /// `⊕ Z/2Z` acting on `C({0,1}^levels)` by bit flips.
    pub fn locally_finite_flips(levels: u32) -> ActionModel {
        let group = GroupModel::locally_finite(levels);
        let sites = 1usize << levels;
        let algebra = TracialAlgebra::commutative(sites);
        let perms: Vec<Vec<usize>> = (0..levels)
            .map(|i| (0..sites).map(|s| s ^ (1usize << i)).collect())
            .collect();
        Self::permutation(group, algebra, perms).expect("bit flips are bijections")
    }

    pub fn group(&self) -> &GroupModel {
        &self.group
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.algebra
    }

    fn generator_reps(&self) -> Vec<Rep> {
        let n = self.group.generators().len();
        match &self.kind {
            ActionKind::Trivial => vec![Rep::identity(); n],
            ActionKind::Permutation(perms) => perms
                .iter()
                .map(|p| Rep {
                    perm: Some(p.clone()),
                    unitary: None,
                })
                .collect(),
            ActionKind::Conjugation(us) => us
                .iter()
                .map(|u| Rep {
                    perm: None,
                    unitary: Some(u.clone()),
                })
                .collect(),
            ActionKind::Product { perms, unitaries } => perms
                .iter()
                .zip(unitaries.iter())
                .map(|(p, u)| Rep {
                    perm: Some(p.clone()),
                    unitary: Some(u.clone()),
                })
                .collect(),
        }
    }

    /// Representations of every ball element, composed along the BFS
    /// parent tree (so each element is evaluated on a geodesic word).
    fn reps_for_ball(&self, ball: &Ball) -> Vec<Rep> {
        let gen_reps = self.generator_reps();
        let mut reps: Vec<Rep> = Vec::with_capacity(ball.len());
        reps.push(Rep::identity());
        for pos in 1..ball.len() {
            let (parent, gi) = ball.parent_of(pos).expect("non-root has a parent");
            reps.push(reps[parent].compose(&gen_reps[gi]));
        }
        reps
    }

    /// `α_g x` for a single element, located by expanding balls.
    pub fn apply(&self, g: &Elem, x: &AlgebraElement) -> Result<AlgebraElement> {
        let mut radius = 1u32;
        loop {
            let ball = self.group.ball(radius)?;
            if let Some(pos) = ball.position(g) {
                let gen_reps = self.generator_reps();
                let mut rep = Rep::identity();
                for gi in ball.geodesic(pos) {
                    rep = rep.compose(&gen_reps[gi]);
                }
                return Ok(rep.apply(x));
            }
            if radius > 64 {
                return Err(CoreError::domain(
                    "element not reachable within word length 64",
                ));
            }
            radius *= 2;
        }
    }

    /// Checks the action laws on samples: identity, homomorphism on pairs
    /// from `B_2`, trace preservation and positivity preservation.
    pub fn validate(&self, x: &AlgebraElement) -> Result<()> {
        let ball = self.group.ball(2)?;
        let reps = self.reps_for_ball(&ball);
        let id = reps[0].apply(x);
        if id.sub(x).sup_norm() > 1e-12 {
            return Err(CoreError::structure("identity does not act trivially"));
        }
        for (pos_g, g) in ball.elements().iter().enumerate().step_by(2) {
            for (pos_h, h) in ball.elements().iter().enumerate().step_by(3) {
                let gh = self.group.multiply(g, h);
                let via_composition = reps[pos_g].apply(&reps[pos_h].apply(x));
                let direct = self.apply(&gh, x)?;
                if via_composition.sub(&direct).sup_norm() > 1e-10 * (1.0 + x.sup_norm()) {
                    return Err(CoreError::structure("action is not a homomorphism"));
                }
            }
        }
        for rep in reps.iter().take(8) {
            let y = rep.apply(x);
            if (y.trace() - x.trace()).norm() > 1e-12 * (1.0 + x.trace().norm()) {
                return Err(CoreError::structure("action does not preserve the trace"));
            }
        }
        let positive = x.adjoint().mul(x);
        for rep in reps.iter().take(8) {
            if !rep.apply(&positive).is_positive() {
                return Err(CoreError::structure("action does not preserve positivity"));
            }
        }
        // automorphism property: multiplicative on sampled pairs
        let other = x.mul(x).add(x);
        for rep in reps.iter().take(8) {
            let of_product = rep.apply(&x.mul(&other));
            let product_of = rep.apply(x).mul(&rep.apply(&other));
            if of_product.sub(&product_of).sup_norm()
                > 1e-10 * (1.0 + x.sup_norm()) * (1.0 + other.sup_norm())
            {
                return Err(CoreError::structure("action is not multiplicative"));
            }
        }
        Ok(())
    }

    /// Ball average `A_n x = (1/|B_n|) Σ_{g ∈ B_n} α_g x`.
    pub fn ball_average(&self, n: u32, x: &AlgebraElement) -> Result<AlgebraElement> {
        let ball = self.group.ball(n)?;
        Ok(self.average_over_ball(&ball, x))
    }

    fn average_over_ball(&self, ball: &Ball, x: &AlgebraElement) -> AlgebraElement {
        let reps = self.reps_for_ball(ball);
        let mut acc = algebra::zero(&self.algebra);
        for rep in &reps {
            acc = acc.add(&rep.apply(x));
        }
        acc.scale(1.0 / reps.len() as f64)
    }

    /// Exact average over the finite subgroup `G_n` of a locally finite
    /// chain; a conditional expectation onto the fixed subalgebra.
    pub fn subgroup_average(&self, n: u32, x: &AlgebraElement) -> Result<AlgebraElement> {
        let members = crate::groups::locally_finite_chain(&self.group, n)?;
        let gen_reps = self.generator_reps();
        let mut acc = algebra::zero(&self.algebra);
        for g in &members {
            let mut rep = Rep::identity();
            let bits = g[0];
            for (i, gen_rep) in gen_reps.iter().enumerate() {
                if bits >> i & 1 == 1 {
                    rep = rep.compose(gen_rep);
                }
            }
            acc = acc.add(&rep.apply(x));
        }
        Ok(acc.scale(1.0 / members.len() as f64))
    }

    /// Lazy one-step generator average `T y = (y + Σ_v α_v y)/(|V|+1)`.
    pub fn generator_average(&self, x: &AlgebraElement) -> AlgebraElement {
        let gen_reps = self.generator_reps();
        let mut acc = x.clone();
        for rep in &gen_reps {
            acc = acc.add(&rep.apply(x));
        }
        acc.scale(1.0 / (gen_reps.len() + 1) as f64)
    }

    /// Mean ergodic projection `P x`, computed by iterating the average
    /// over the largest affordable ball until the fixed-point residual
    /// settles; the one-step residual `‖T y − y‖₂` is reported as well.
    pub fn mean_projection(&self, x: &AlgebraElement) -> Result<MeanProjection> {
        const BUDGET: usize = 2048;
        const CAP: usize = 100_000;
        let mut radius = 1u32;
        let mut ball = self.group.ball(radius)?;
        loop {
            if radius >= 512 {
                break;
            }
            let next = self.group.ball(radius * 2)?;
            if next.len() > BUDGET || next.len() == ball.len() {
                break;
            }
            radius *= 2;
            ball = next;
        }
        let reps = self.reps_for_ball(&ball);
        let scale = 1.0 + x.lp_norm(2.0)?;
        let mut y = x.clone();
        let mut iterations = 0usize;
        loop {
            let mut acc = algebra::zero(&self.algebra);
            for rep in &reps {
                acc = acc.add(&rep.apply(&y));
            }
            let next = acc.scale(1.0 / reps.len() as f64);
            let step_residual = next.sub(&y).lp_norm(2.0)?;
            y = next;
            iterations += 1;
            if step_residual <= 1e-11 * scale {
                break;
            }
            if iterations >= CAP {
                return Err(CoreError::NoConvergence {
                    residual: step_residual,
                    iterations,
                });
            }
        }
        let one_step_residual = self.generator_average(&y).sub(&y).lp_norm(2.0)?;
        if one_step_residual > 1e-10 * scale {
            return Err(CoreError::NoConvergence {
                residual: one_step_residual,
                iterations,
            });
        }
        let gen_reps = self.generator_reps();
        let generator_defect = gen_reps
            .iter()
            .map(|rep| rep.apply(&y).sub(&y).sup_norm())
            .fold(0.0, f64::max);
        Ok(MeanProjection {
            element: y,
            residual: one_step_residual,
            iterations,
            generator_defect,
        })
    }

    /// Kadison inequality margin: the minimal eigenvalue of
    /// `A_n(x²) − (A_n x)²` for hermitian `x` (our actions are unital
    /// positive with norm-one generators).
    pub fn kadison_check(&self, n: u32, x: &AlgebraElement) -> Result<f64> {
        if !x.is_hermitian() {
            return Err(CoreError::domain("kadison_check needs a hermitian element"));
        }
        let squared = self.ball_average(n, &x.mul(x))?;
        let averaged = self.ball_average(n, x)?;
        squared.sub(&averaged.mul(&averaged)).min_eigenvalue()
    }

    /// Markov-operator domination: compares `A_n x` against
    /// `(c/n²) Σ_{k=1}^{2n²} T^k x` with `c` the least walk-domination
    /// constant and `T` the lazy generator average.
    pub fn markov_domination_check(
        &self,
        n: u32,
        x: &AlgebraElement,
        cap: usize,
    ) -> Result<MarkovDominationReport> {
        if !x.is_positive() {
            return Err(CoreError::domain(
                "markov_domination_check needs a positive element",
            ));
        }
        let c = walks::domination_constant(&self.group, n, cap)?.c;
        let steps = 2 * n * n;
        let mut power = x.clone();
        let mut cesaro = algebra::zero(&self.algebra);
        for _ in 0..steps {
            power = self.generator_average(&power);
            cesaro = cesaro.add(&power);
        }
        let rhs = cesaro.scale(c / (n as f64 * n as f64));
        let lhs = self.ball_average(n, x)?;
        let margin = rhs.sub(&lhs).min_eigenvalue()?;
        Ok(MarkovDominationReport {
            lhs,
            rhs,
            margin,
            walk_constant: c,
        })
    }

    /// Iterated one-parameter Cesàro averages in normal-form order for the
    /// Heisenberg model with `z` generators: the ball average is dominated
    /// by `c″` times the composition `M_x ∘ M_y ∘ M_z`, where each `M_t`
    /// averages `α_t^l` over `|l| ≤ L_t` and the window sizes `L_t` are the
    /// realized normal-form exponent maxima over `B_n`.
    pub fn iterated_z_average(&self, n: u32, x: &AlgebraElement) -> Result<IteratedZReport> {
        if !matches!(self.group.kind(), GroupKind::Heisenberg) {
            return Err(CoreError::domain(
                "iterated_z_average needs the Heisenberg model",
            ));
        }
        if self.group.generators().len() != 6 {
            return Err(CoreError::domain(
                "iterated_z_average needs the generating set {x^{±1}, y^{±1}, z^{±1}}",
            ));
        }
        if !x.is_positive() {
            return Err(CoreError::domain(
                "iterated_z_average needs a positive element",
            ));
        }
        let ball = self.group.ball(n)?;
        let (mut l_a, mut l_b, mut l_c) = (0i64, 0i64, 0i64);
        for g in ball.elements() {
            let nf = crate::groups::heisenberg_normal_form(g);
            l_a = l_a.max(nf.x_exp.abs());
            l_b = l_b.max(nf.y_exp.abs());
            l_c = l_c.max(nf.z_exp.abs());
        }
        let gen_reps = self.generator_reps();
        // generator order in heisenberg_with_z: x, x⁻¹, y, y⁻¹, z, z⁻¹
        let one_parameter = |fwd: usize, bwd: usize, window: i64, w: &AlgebraElement| {
            let mut acc = w.clone();
            let mut forward = w.clone();
            let mut backward = w.clone();
            for _ in 0..window {
                forward = gen_reps[fwd].apply(&forward);
                backward = gen_reps[bwd].apply(&backward);
                acc = acc.add(&forward).add(&backward);
            }
            acc.scale(1.0 / (2 * window + 1) as f64)
        };
        let m_z = one_parameter(4, 5, l_c, x);
        let m_yz = one_parameter(2, 3, l_b, &m_z);
        let iterated = one_parameter(0, 1, l_a, &m_yz);
        let ball_avg = self.average_over_ball(&ball, x);
        let c_double_prime = least_domination_factor(&ball_avg, &iterated)?;
        Ok(IteratedZReport {
            ball_average: ball_avg,
            iterated,
            c_double_prime,
            windows: (l_a, l_b, l_c),
        })
    }
}

/// Output of [`ActionModel::mean_projection`].
#[derive(Clone, Debug)]
pub struct MeanProjection {
    pub element: AlgebraElement,
    /// `‖T y − y‖₂` at the accepted iterate.
    pub residual: f64,
    pub iterations: usize,
    /// `max_v ‖α_v y − y‖_∞` over the generators.
    pub generator_defect: f64,
}

/// Output of [`ActionModel::markov_domination_check`].
#[derive(Clone, Debug)]
pub struct MarkovDominationReport {
    pub lhs: AlgebraElement,
    pub rhs: AlgebraElement,
    /// Minimal eigenvalue of `rhs − lhs`; nonnegative up to eigen-noise.
    pub margin: f64,
    pub walk_constant: f64,
}

/// Output of [`ActionModel::iterated_z_average`].
#[derive(Clone, Debug)]
pub struct IteratedZReport {
    pub ball_average: AlgebraElement,
    pub iterated: AlgebraElement,
    /// Least `c″` with `A_n x ⪯ c″ ·` iterated average.
    pub c_double_prime: f64,
    /// Realized one-parameter windows `(L_x, L_y, L_z)`.
    pub windows: (i64, i64, i64),
}

/// Least `t ≥ 0` with `t·rhs − lhs ⪰ 0` for positive `lhs, rhs`; errors
/// when `lhs` is not supported within `rhs`.
pub fn least_domination_factor(lhs: &AlgebraElement, rhs: &AlgebraElement) -> Result<f64> {
    let scale = rhs.sup_norm().max(1e-300);
    let mut worst: f64 = 0.0;
    for (s, rhs_block) in rhs.blocks().iter().enumerate() {
        let lhs_block = lhs.block(s);
        let d = rhs_block.nrows();
        let (vals, vecs) = crate::algebra::hermitian_eigen(rhs_block);
        let cutoff = 1e-12 * scale;
        // pseudo-inverse square root on the support of rhs
        let inv_sqrt: Vec<f64> = vals
            .iter()
            .map(|&v| if v > cutoff { 1.0 / v.sqrt() } else { 0.0 })
            .collect();
        let rotated = vecs.adjoint() * lhs_block * &vecs;
        for i in 0..d {
            if vals[i] <= cutoff && rotated[(i, i)].re > 1e-9 * (1.0 + lhs.sup_norm()) {
                return Err(CoreError::domain(
                    "lhs is not supported within rhs; no finite domination factor",
                ));
            }
        }
        let mut compressed = DMatrix::<Complex64>::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                compressed[(i, j)] = rotated[(i, j)] * Complex64::new(inv_sqrt[i] * inv_sqrt[j], 0.0);
            }
        }
        let (cvals, _) = crate::algebra::hermitian_eigen(&compressed);
        worst = cvals.iter().fold(worst, |w, &v| w.max(v));
    }
    Ok(worst.max(0.0))
}

/// Lacunary radii `r_k ∈ [2^k, 2^{k+1})` chosen by the annulus scan; the
/// schedule is strictly increasing because the dyadic ranges are disjoint.
pub fn lacunary_schedule(
    space: &HomogeneousSpace,
    k_max: u32,
    width: u32,
) -> Result<Vec<u32>> {
    if width == 0 {
        return Err(CoreError::domain("lacunary width must be positive"));
    }
    let k_min = (0..=k_max)
        .find(|&k| width as u64 <= 1u64 << k)
        .ok_or_else(|| CoreError::domain("width exceeds every scale in range"))?;
    (k_min..=k_max)
        .map(|k| Ok(crate::dyadic::annulus_radius(space, k, width)?.radius))
        .collect()
}

/// Per-radius convergence diagnostics for `(A_n x − Px)`.
#[derive(Clone, Debug)]
pub struct AverageReport {
    pub schedule: Vec<u32>,
    pub p_values: Vec<f64>,
    /// `norms[k][j] = ‖A_{r_k} x − Px‖_{p_j}`.
    pub norms: Vec<Vec<f64>>,
    /// `tail_sup[k][j] = ‖sup⁺_{l ≥ k} |A_{r_l} x − Px|‖_{p_j}` for
    /// `p_j > 1` (`None` at `p = 1`).
    pub tail_sup: Vec<Vec<Option<f64>>>,
    /// Cuculescu defects of the deviation family at the requested levels.
    pub weak_defects: Vec<(f64, f64)>,
}

/// Norms, tail maximal norms and weak-type defects of the deviations
/// `A_{r_k} x − P x` along an increasing schedule of radii.
pub fn convergence_report(
    action: &ActionModel,
    x: &AlgebraElement,
    p_values: &[f64],
    schedule: &[u32],
    lambdas: &[f64],
) -> Result<AverageReport> {
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::domain("schedule must be strictly increasing"));
    }
    let projection = action.mean_projection(x)?.element;
    let mut deviations = Vec::with_capacity(schedule.len());
    for &r in schedule {
        let avg = action.ball_average(r, x)?;
        deviations.push(avg.sub(&projection));
    }
    let norms: Vec<Vec<f64>> = deviations
        .iter()
        .map(|d| p_values.iter().map(|&p| d.lp_norm(p).unwrap_or(f64::NAN)).collect())
        .collect();
    // |A_n x − Px| as positive elements for the maximal-norm tails
    let moduli: Vec<AlgebraElement> = deviations
        .iter()
        .map(|d| d.adjoint().mul(d).power(0.5))
        .collect::<Result<_>>()?;
    let mut tail_sup = Vec::with_capacity(schedule.len());
    for start in 0..schedule.len() {
        let mut row = Vec::with_capacity(p_values.len());
        for &p in p_values {
            if p > 1.0 && p.is_finite() {
                let seq = PositiveSequence::new(moduli[start..].to_vec())?;
                row.push(Some(maximal::sup_plus_norm(&seq, p)?.value));
            } else {
                row.push(None);
            }
        }
        tail_sup.push(row);
    }
    let weak_defects = lambdas
        .iter()
        .map(|&lambda| {
            maximal::cuculescu(&moduli, lambda).map(|(_, e)| (lambda, e.defect()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AverageReport {
        schedule: schedule.to_vec(),
        p_values: p_values.to_vec(),
        norms,
        tail_sup,
        weak_defects,
    })
}

/// One row of the almost-uniform witness table: at tail start `N` the
/// Cuculescu projection `e` keeps `τ(1-e) < ε` while compressing every
/// remaining deviation under `threshold`.
#[derive(Clone, Copy, Debug)]
pub struct AuWitnessRow {
    pub epsilon: f64,
    pub tail_start: u32,
    /// Least level (from a halving scan) whose witness has defect < ε.
    pub threshold: f64,
    /// Realized `max_n ‖e (A_n x − Px) e‖_∞` over the tail (bilateral form).
    pub bilateral_norm: f64,
    /// Realized `max_n ‖(A_n x − Px) e‖_∞` over the tail (one-sided form).
    pub one_sided_norm: f64,
}

/// Finite surrogate for almost-uniform convergence: for each `ε` and each
/// tail of the schedule, the least threshold (halving scan from `‖x‖_∞`)
/// whose Cuculescu witness has defect below `ε`. Thresholds shrinking with
/// the tail start witness the convergence; both the bilateral and the
/// one-sided compression norms are recorded.
pub fn au_witness_table(
    action: &ActionModel,
    x: &AlgebraElement,
    schedule: &[u32],
    epsilons: &[f64],
) -> Result<Vec<AuWitnessRow>> {
    let projection = action.mean_projection(x)?.element;
    let mut moduli = Vec::with_capacity(schedule.len());
    let mut deviations = Vec::with_capacity(schedule.len());
    for &r in schedule {
        let d = action.ball_average(r, x)?.sub(&projection);
        moduli.push(d.adjoint().mul(&d).power(0.5)?);
        deviations.push(d);
    }
    let mut rows = Vec::new();
    for &epsilon in epsilons {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(CoreError::domain("witness levels must be positive"));
        }
        for start in 0..schedule.len() {
            let tail = &moduli[start..];
            let mut threshold = 2.0 * (1.0 + x.sup_norm());
            let mut chosen = None;
            // halving scan: the last level whose witness stays below ε
            for _ in 0..60 {
                let half = threshold / 2.0;
                let (_, e) = maximal::cuculescu(tail, half)?;
                if e.defect() < epsilon {
                    threshold = half;
                    chosen = Some(e);
                } else {
                    break;
                }
            }
            let e = match chosen {
                Some(e) => e,
                None => maximal::cuculescu(tail, threshold)?.1,
            };
            let mut bilateral: f64 = 0.0;
            let mut one_sided: f64 = 0.0;
            for d in &deviations[start..] {
                bilateral = bilateral.max(e.compress(d).sup_norm());
                one_sided = one_sided.max(d.mul(e.element()).sup_norm());
            }
            rows.push(AuWitnessRow {
                epsilon,
                tail_start: schedule[start],
                threshold,
                bilateral_norm: bilateral,
                one_sided_norm: one_sided,
            });
        }
    }
    Ok(rows)
}

/// One row of the coboundary decay check.
#[derive(Clone, Debug)]
pub struct CoboundaryRow {
    pub radius: u32,
    /// `‖A_n (y − α_{g0} y)‖_∞`.
    pub sup_norm: f64,
    /// Exact Følner ratio `|B_n g0 △ B_n| / |B_n|`.
    pub folner_ratio: Ratio<i64>,
    /// The Følner bound `ratio · ‖y‖_∞`.
    pub bound: f64,
}

/// Decay of averages of the coboundary `x = y − α_{g0} y` against the
/// exact Følner-count bound `‖A_n x‖_∞ ≤ (|B_n g0 △ B_n|/|B_n|)·‖y‖_∞`.
pub fn coboundary_report(
    action: &ActionModel,
    y: &AlgebraElement,
    g0: &Elem,
    schedule: &[u32],
) -> Result<Vec<CoboundaryRow>> {
    let shifted = action.apply(g0, y)?;
    let x = y.sub(&shifted);
    let sup_y = y.sup_norm();
    schedule
        .iter()
        .map(|&n| {
            let avg = action.ball_average(n, &x)?;
            let ball = action.group().ball(n)?;
            let ratio = crate::groups::folner_ratio(action.group(), ball.elements(), g0);
            Ok(CoboundaryRow {
                radius: n,
                sup_norm: avg.sup_norm(),
                folner_ratio: ratio,
                bound: ratio_to_f64(ratio) * sup_y,
            })
        })
        .collect()
}

pub(crate) fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Transference comparison between the action side and the translation
/// side on group-valued functions.
#[derive(Clone, Debug)]
pub struct TransferenceReport {
    /// Realized action-side maximal constant over the test set.
    pub c_direct: f64,
    /// Realized translation-side maximal constant over the test set.
    pub c_transferred: f64,
    /// `(m(FK)/m(F))^{1/p}`.
    pub folner_factor: f64,
    /// Whether `c_direct ≤ c_transferred · factor` held (with slack) on
    /// every tested element.
    pub holds: bool,
    /// Set when `m(FK)/m(F)` exceeds the configured `1 + ε`.
    pub small_folner_warning: bool,
    pub window_size: usize,
    pub folner_size: usize,
}

/// Shared scaffolding of the transference checks: the hull ball covering
/// `F·K`, the action representations on it, the deduplicated window and
/// the function algebra `ℓ_∞(FK) ⊗ M` with normalized uniform weights.
struct TransferenceScaffold {
    hull: Ball,
    folner: Ball,
    reps: Vec<Rep>,
    /// Window positions into `hull`, deterministic order.
    window: Vec<usize>,
    window_index: std::collections::HashMap<usize, usize>,
    function_algebra: std::sync::Arc<TracialAlgebra>,
}

impl TransferenceScaffold {
    fn build(
        action: &ActionModel,
        measures: &[walks::Density],
        folner_radius: u32,
    ) -> Result<Self> {
        let group = action.group().clone();
        // K = union of the measure supports; locate every needed word in one ball
        let mut support_radius = 0u32;
        for mu in measures {
            for (g, _) in mu.entries() {
                let mut r = 0u32;
                loop {
                    if group.ball(r)?.contains(g) {
                        break;
                    }
                    r += 1;
                    if r > 64 {
                        return Err(CoreError::domain("measure support is too spread out"));
                    }
                }
                support_radius = support_radius.max(r);
            }
        }
        let hull = group.ball(folner_radius + support_radius)?;
        let folner = group.ball(folner_radius)?;
        let reps = action.reps_for_ball(&hull);

        // window FK = F·K, deduplicated, in deterministic order
        let mut window: Vec<usize> = Vec::new();
        let mut in_window = vec![false; hull.len()];
        for f_elem in folner.elements() {
            for mu in measures {
                for (k_elem, _) in mu.entries() {
                    let fk = group.multiply(f_elem, k_elem);
                    let pos = hull
                        .position(&fk)
                        .expect("F·K is inside the hull by construction");
                    if !in_window[pos] {
                        in_window[pos] = true;
                        window.push(pos);
                    }
                }
            }
        }
        let window_index: std::collections::HashMap<usize, usize> = window
            .iter()
            .enumerate()
            .map(|(w, &pos)| (pos, w))
            .collect();

        let fiber = action.algebra();
        let window_weights: Vec<f64> = window
            .iter()
            .flat_map(|_| fiber.weights().iter().map(|&w| w / window.len() as f64))
            .collect();
        let window_dims: Vec<usize> = window
            .iter()
            .flat_map(|_| fiber.block_dims().iter().copied())
            .collect();
        let function_algebra = TracialAlgebra::new(window_weights, window_dims)?;
        Ok(TransferenceScaffold {
            hull,
            folner,
            reps,
            window,
            window_index,
            function_algebra,
        })
    }

    /// Action-side averages `A_n x = Σ_h μ_n(h) α_h x`.
    fn direct_family(
        &self,
        action: &ActionModel,
        measures: &[walks::Density],
        x: &AlgebraElement,
    ) -> Vec<AlgebraElement> {
        measures
            .iter()
            .map(|mu| {
                let mut acc = algebra::zero(action.algebra());
                for (h, mass) in mu.entries() {
                    let pos = self.hull.position(h).expect("support inside hull");
                    acc = acc.add(&self.reps[pos].apply(x).scale(mass));
                }
                acc
            })
            .collect()
    }

    fn assemble(&self, fibers: Vec<AlgebraElement>) -> AlgebraElement {
        let blocks = fibers
            .into_iter()
            .flat_map(|e| e.blocks().to_vec())
            .collect();
        AlgebraElement::from_blocks_unchecked(self.function_algebra.clone(), blocks)
    }

    /// `f(h) = χ_{FK}(h) α_h x` as per-window fibers.
    fn f_blocks(&self, x: &AlgebraElement) -> Vec<AlgebraElement> {
        self.window
            .iter()
            .map(|&pos| self.reps[pos].apply(x))
            .collect()
    }

    /// Translation-side averages `A'_n f(g) = Σ_h μ_n(h) f(gh)` with zero
    /// extension outside the window.
    fn translated_family(
        &self,
        action: &ActionModel,
        measures: &[walks::Density],
        f_blocks: &[AlgebraElement],
    ) -> Vec<AlgebraElement> {
        let group = action.group();
        measures
            .iter()
            .map(|mu| {
                let fibers: Vec<AlgebraElement> = self
                    .window
                    .iter()
                    .map(|&g_pos| {
                        let g_elem = &self.hull.elements()[g_pos];
                        let mut acc = algebra::zero(action.algebra());
                        for (h, mass) in mu.entries() {
                            let gh = group.multiply(g_elem, h);
                            if let Some(&w) = self
                                .hull
                                .position(&gh)
                                .and_then(|p| self.window_index.get(&p))
                            {
                                acc = acc.add(&f_blocks[w].scale(mass));
                            }
                        }
                        acc
                    })
                    .collect();
                self.assemble(fibers)
            })
            .collect()
    }

    /// Fiber of a function-algebra element at one window slot.
    fn fiber_at(&self, action: &ActionModel, e: &AlgebraElement, slot: usize) -> AlgebraElement {
        let fiber_sites = action.algebra().sites();
        let blocks = e.blocks()[slot * fiber_sites..(slot + 1) * fiber_sites].to_vec();
        AlgebraElement::from_blocks_unchecked(action.algebra().clone(), blocks)
    }
}

/// Builds `f(h) = χ_{FK}(h) α_h x` on the function algebra over `F·K` and
/// compares the translation-side maximal constant against the action-side
/// one; the inequality `C_direct ≤ C_transferred · (m(FK)/m(F))^{1/p}`
/// must hold instance by instance.
pub fn transference_check(
    action: &ActionModel,
    measures: &[walks::Density],
    p: f64,
    folner_radius: u32,
    testset: &[AlgebraElement],
    epsilon: f64,
) -> Result<TransferenceReport> {
    if measures.is_empty() || testset.is_empty() {
        return Err(CoreError::domain(
            "transference_check needs measures and a test set",
        ));
    }
    if !p.is_finite() || p <= 1.0 {
        return Err(CoreError::domain("transference_check needs p in (1, inf)"));
    }
    let scaffold = TransferenceScaffold::build(action, measures, folner_radius)?;
    let factor = (scaffold.window.len() as f64 / scaffold.folner.len() as f64).powf(1.0 / p);
    let mut c_direct: f64 = 0.0;
    let mut c_transferred: f64 = 0.0;
    let mut holds = true;

    for x in testset {
        let direct_family = scaffold.direct_family(action, measures, x);
        let direct_value =
            maximal::sup_plus_norm(&PositiveSequence::new(direct_family)?, p)?.value;
        let direct_c = direct_value / x.lp_norm(p)?;

        let f_blocks = scaffold.f_blocks(x);
        let f_function = scaffold.assemble(f_blocks.clone());
        let translated_family = scaffold.translated_family(action, measures, &f_blocks);
        let transferred_value =
            maximal::sup_plus_norm(&PositiveSequence::new(translated_family)?, p)?.value;
        let transferred_c = transferred_value / f_function.lp_norm(p)?;

        c_direct = c_direct.max(direct_c);
        c_transferred = c_transferred.max(transferred_c);
        if direct_c > transferred_c * factor + 1e-6 {
            holds = false;
        }
    }

    Ok(TransferenceReport {
        c_direct,
        c_transferred,
        folner_factor: factor,
        holds,
        small_folner_warning: (scaffold.window.len() as f64 / scaffold.folner.len() as f64)
            > 1.0 + epsilon,
        window_size: scaffold.window.len(),
        folner_size: scaffold.folner.len(),
    })
}

/// Weak-type transference harness: the translation-side Cuculescu witness
/// restricts to window fibers, and the best fiber projection over the
/// Følner set pulls back through the action to an action-side witness.
#[derive(Clone, Debug)]
pub struct WeakTransferenceReport {
    pub lambda: f64,
    /// `τ(1 − E)` of the translation-side witness on the function algebra.
    pub translation_defect: f64,
    /// `τ(1 − ẽ)` of the pulled-back action-side witness.
    pub pulled_defect: f64,
    /// `(|FK|/|F|) · translation_defect`, the mean-over-F bound on the
    /// pulled defect.
    pub defect_bound: f64,
    /// Realized `max_n ‖ẽ (A_n x) ẽ‖_∞`, at most `λ(1 + tol)`.
    pub compression_norm: f64,
    /// Realized weak-type constant `λ · defect^{1/p} / ‖x‖_p`.
    pub realized_constant: f64,
}

/// Verifies the weak-type transference mechanism on one element: a
/// projection witnessing `‖E A'_n f E‖ ≤ λ` on the translation side is
/// carried to `ẽ = α_{g₀^{-1}}(e(g₀))` with `ẽ (A_n x) ẽ ≤ λ` and
/// `τ(1-ẽ)` controlled by the translation defect times `|FK|/|F|`.
pub fn weak_transference_check(
    action: &ActionModel,
    measures: &[walks::Density],
    p: f64,
    folner_radius: u32,
    x: &AlgebraElement,
    lambda: f64,
) -> Result<WeakTransferenceReport> {
    if measures.is_empty() {
        return Err(CoreError::domain("weak_transference_check needs measures"));
    }
    if p.is_nan() || p < 1.0 {
        return Err(CoreError::domain("weak_transference_check needs p >= 1"));
    }
    if !x.is_positive() {
        return Err(CoreError::domain(
            "weak_transference_check needs a positive element",
        ));
    }
    let scaffold = TransferenceScaffold::build(action, measures, folner_radius)?;
    let f_blocks = scaffold.f_blocks(x);
    let translated_family = scaffold.translated_family(action, measures, &f_blocks);
    let (_, big_witness) = maximal::cuculescu(&translated_family, lambda)?;
    let translation_defect = big_witness.defect();

    // best fiber over the Følner set (the proof's choice of g₀); the BFS
    // discovery order of the hull extends the Følner ball's, so Følner
    // positions index the hull directly
    let mut best: Option<(f64, usize)> = None;
    for f_pos in 0..scaffold.folner.len() {
        let Some(&slot) = scaffold.window_index.get(&f_pos) else {
            continue; // g ∉ FK (no measure charges the identity)
        };
        let fiber = scaffold.fiber_at(action, big_witness.element(), slot);
        let defect = 1.0 - fiber.trace().re;
        if best.map(|(d, _)| defect < d).unwrap_or(true) {
            best = Some((defect, f_pos));
        }
    }
    let (_, g0_pos) = best.ok_or_else(|| {
        CoreError::domain("no Følner element lies inside the window F·K")
    })?;
    let slot = scaffold.window_index[&g0_pos];
    let fiber_projection = scaffold.fiber_at(action, big_witness.element(), slot);
    // pull back through α_{g₀^{-1}}
    let g0_inv = action.group().inverse(&scaffold.hull.elements()[g0_pos]);
    let inv_pos = scaffold
        .hull
        .position(&g0_inv)
        .ok_or_else(|| CoreError::domain("inverse left the hull"))?;
    let pulled = crate::algebra::Projection::snap(
        &scaffold.reps[inv_pos].apply(&fiber_projection).hermitize(),
    )?;
    let pulled_defect = pulled.defect();

    let direct_family = scaffold.direct_family(action, measures, x);
    let compression_norm = direct_family
        .iter()
        .map(|a| pulled.compress(a).sup_norm())
        .fold(0.0, f64::max);
    let x_norm = x.lp_norm(p)?;
    let realized_constant = if x_norm > 0.0 {
        lambda * pulled_defect.max(0.0).powf(1.0 / p) / x_norm
    } else {
        0.0
    };
    Ok(WeakTransferenceReport {
        lambda,
        translation_defect,
        pulled_defect,
        defect_bound: translation_defect * scaffold.window.len() as f64
            / scaffold.folner.len() as f64,
        compression_norm,
        realized_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{identity, random_hermitian, random_positive, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use smallvec::smallvec;

    fn shift64() -> ActionModel {
        ActionModel::shift_on_cycle(64)
    }

    #[test]
    fn actions_validate_on_random_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(3, &mut rng);
        let cases = vec![
            ActionModel::trivial(GroupModel::integers(), TracialAlgebra::commutative(4)),
            shift64(),
            ActionModel::conjugation_on_matrix(u.clone()).unwrap(),
            ActionModel::shift_conjugation_product(8, u).unwrap(),
            ActionModel::heisenberg_translation(3, true),
            ActionModel::locally_finite_flips(4),
        ];
        for action in cases {
            let x = random_hermitian(action.algebra(), &mut rng);
            action.validate(&x).unwrap();
        }
    }

    #[test]
    fn trivial_action_average_is_identity_map() {
        let action = ActionModel::trivial(GroupModel::grid(2), TracialAlgebra::commutative(3));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_hermitian(action.algebra(), &mut rng);
        let avg = action.ball_average(3, &x).unwrap();
        assert!(avg.sub(&x).sup_norm() < 1e-12);
    }

    #[test]
    fn wrapped_shift_average_flattens_point_mass() {
        let action = ActionModel::shift_on_cycle(16);
        let x = AlgebraElement::site_indicator(action.algebra(), 0).unwrap();
        let n = 16u32; // window 33 wraps the 16 sites
        let avg = action.ball_average(n, &x).unwrap();
        let uniform = 1.0 / 16.0;
        for s in 0..16 {
            let v = avg.block(s)[(0, 0)].re;
            assert!((v - uniform).abs() <= 1.0 / (2.0 * n as f64 + 1.0));
        }
    }

    #[test]
    fn conjugation_average_preserves_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_unitary(2, &mut rng);
        let action = ActionModel::conjugation_on_matrix(u).unwrap();
        let x = random_positive(action.algebra(), &mut rng);
        let avg = action.ball_average(4, &x).unwrap();
        assert!((avg.trace().re - x.trace().re).abs() < 1e-12);
        assert!(avg.trace().im.abs() < 1e-12);
        assert!(avg.is_positive());
        // unitality
        let one = identity(action.algebra());
        assert!(action.ball_average(4, &one).unwrap().sub(&one).sup_norm() < 1e-12);
    }

    #[test]
    fn subgroup_average_basics() {
        let action = ActionModel::locally_finite_flips(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_positive(action.algebra(), &mut rng);
        // G_0 = {e}
        let a0 = action.subgroup_average(0, &x).unwrap();
        assert!(a0.sub(&x).sup_norm() < 1e-15);
        // single flip on a two-site pattern averages pairs
        let a1 = action.subgroup_average(1, &x).unwrap();
        for s in 0..8usize {
            let pair = (x.block(s)[(0, 0)].re + x.block(s ^ 1)[(0, 0)].re) / 2.0;
            assert!((a1.block(s)[(0, 0)].re - pair).abs() < 1e-12);
        }
        // idempotency
        let a2 = action.subgroup_average(2, &x).unwrap();
        let a2a2 = action.subgroup_average(2, &a2).unwrap();
        assert!(a2a2.sub(&a2).sup_norm() < 1e-12);
    }

    #[test]
    fn subgroup_averages_satisfy_tower_property() {
        let action = ActionModel::locally_finite_flips(4);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_positive(action.algebra(), &mut rng);
        for n in 0..3u32 {
            let coarse = action.subgroup_average(n + 1, &x).unwrap();
            let fine_then_coarse = action
                .subgroup_average(n + 1, &action.subgroup_average(n, &x).unwrap())
                .unwrap();
            assert!(fine_then_coarse.sub(&coarse).sup_norm() < 1e-12);
        }
    }

    #[test]
    fn mean_projection_trivial_and_ergodic_cases() {
        let trivial = ActionModel::trivial(GroupModel::integers(), TracialAlgebra::commutative(4));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = random_hermitian(trivial.algebra(), &mut rng);
        let p = trivial.mean_projection(&x).unwrap();
        assert!(p.element.sub(&x).sup_norm() < 1e-12);

        let shift = ActionModel::shift_on_cycle(32);
        let y = random_hermitian(shift.algebra(), &mut rng);
        let proj = shift.mean_projection(&y).unwrap();
        let mean = y.trace().re;
        for s in 0..32 {
            assert!((proj.element.block(s)[(0, 0)].re - mean).abs() < 1e-9);
        }
        assert!(proj.generator_defect < 1e-9);
    }

    #[test]
    fn mean_projection_of_conjugation_is_diagonal_part() {
        let theta = 1.0f64;
        let u = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(theta.cos(), theta.sin()),
        ]));
        let action = ActionModel::conjugation_on_matrix(u).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let x = random_hermitian(action.algebra(), &mut rng);
        let p = action.mean_projection(&x).unwrap();
        let b = p.element.block(0);
        let xb = x.block(0);
        assert!((b[(0, 0)] - xb[(0, 0)]).norm() < 1e-9);
        assert!((b[(1, 1)] - xb[(1, 1)]).norm() < 1e-9);
        assert!(b[(0, 1)].norm() < 1e-9);
        // fixed points of the generators
        assert!(p.generator_defect < 1e-9);
    }

    #[test]
    fn mean_splitting_is_orthogonal_at_p_two() {
        let action = shift64();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = random_hermitian(action.algebra(), &mut rng);
        let px = action.mean_projection(&x).unwrap().element;
        // A_n P x = P x exactly
        let apx = action.ball_average(5, &px).unwrap();
        assert!(apx.sub(&px).sup_norm() < 1e-9);
        // x − Px orthogonal to the fixed element 1
        let fixed = identity(action.algebra());
        let inner = fixed.inner(&x.sub(&px));
        assert!(inner.norm() < 1e-9);
    }

    #[test]
    fn kadison_margin_zero_at_radius_zero_and_nonnegative_later() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let u = random_unitary(4, &mut rng);
        let action = ActionModel::conjugation_on_matrix(u).unwrap();
        let x = random_positive(action.algebra(), &mut rng);
        let at_zero = action.kadison_check(0, &x).unwrap();
        assert!(at_zero.abs() < 1e-10);
        for n in [1u32, 3] {
            let margin = action.kadison_check(n, &x).unwrap();
            assert!(margin >= -1e-9 * (1.0 + x.sup_norm().powi(2)), "margin {margin}");
        }
        // two-point commutative average: margin is the variance
        let flip = ActionModel::locally_finite_flips(1);
        let y = AlgebraElement::from_site_scalars(flip.algebra(), &[3.0, 1.0]).unwrap();
        let margin = flip.kadison_check(1, &y).unwrap();
        assert!((margin - 1.0).abs() < 1e-12); // ((3²+1²)/2) − ((3+1)/2)² = 1
    }

    #[test]
    fn markov_domination_trivial_action_scalar_case() {
        let action = ActionModel::trivial(GroupModel::integers(), TracialAlgebra::commutative(2));
        let x = AlgebraElement::from_site_scalars(action.algebra(), &[1.0, 2.0]).unwrap();
        let report = action.markov_domination_check(2, &x, 100_000).unwrap();
        // rhs = 2c·x with c ≥ 1, so the margin is (2c−1)·min eigenvalue
        assert!(report.walk_constant >= 1.0);
        let expected = (2.0 * report.walk_constant - 1.0) * 1.0;
        assert!((report.margin - expected).abs() < 1e-9);
    }

    #[test]
    fn markov_domination_shift_point_mass() {
        let action = shift64();
        let x = AlgebraElement::site_indicator(action.algebra(), 0).unwrap();
        let report = action.markov_domination_check(4, &x, 100_000).unwrap();
        assert!(report.margin >= -1e-9);
    }

    #[test]
    fn markov_domination_matrix_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let u = random_unitary(4, &mut rng);
        let action = ActionModel::conjugation_on_matrix(u).unwrap();
        let x = random_positive(action.algebra(), &mut rng);
        let report = action.markov_domination_check(3, &x, 100_000).unwrap();
        assert!(report.margin >= -1e-9 * (1.0 + x.sup_norm()));
        assert!(report.rhs.is_positive());
    }

    #[test]
    fn markov_domination_rejects_nonpositive_input() {
        let action = shift64();
        let x = AlgebraElement::from_site_scalars(
            action.algebra(),
            &(0..64).map(|s| if s == 0 { -1.0 } else { 0.0 }).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(action.markov_domination_check(2, &x, 100_000).is_err());
    }

    #[test]
    fn iterated_average_dominates_on_translation_model() {
        let action = ActionModel::heisenberg_translation(5, true);
        let x = AlgebraElement::site_indicator(action.algebra(), 0).unwrap();
        let report = action.iterated_z_average(2, &x).unwrap();
        assert!(report.c_double_prime.is_finite());
        // PSD check with the reported factor
        let slack = report
            .iterated
            .scale(report.c_double_prime * (1.0 + 1e-9))
            .sub(&report.ball_average)
            .min_eigenvalue()
            .unwrap();
        assert!(slack >= -1e-9, "domination fails by {slack}");
    }

    #[test]
    fn iterated_average_trivial_action_has_unit_factor() {
        let group = GroupModel::heisenberg_with_z();
        let action = ActionModel::trivial(group, TracialAlgebra::commutative(2));
        let x = AlgebraElement::from_site_scalars(action.algebra(), &[1.0, 2.0]).unwrap();
        let report = action.iterated_z_average(2, &x).unwrap();
        assert!((report.c_double_prime - 1.0).abs() < 1e-9);
    }

    #[test]
    fn iterated_average_requires_z_generators() {
        let action = ActionModel::heisenberg_translation(3, false);
        let x = AlgebraElement::site_indicator(action.algebra(), 0).unwrap();
        assert!(action.iterated_z_average(2, &x).is_err());
    }

    #[test]
    fn lacunary_schedule_on_line_and_plane() {
        let z = lacunary_schedule(&HomogeneousSpace::ZLine, 6, 1).unwrap();
        assert_eq!(z, vec![1, 2, 4, 8, 16, 32, 64]);
        let z2 = lacunary_schedule(&HomogeneousSpace::GridLinf { d: 2 }, 4, 1).unwrap();
        for (k, &r) in z2.iter().enumerate() {
            assert!((1u32 << k) <= r && r < (2u32 << k));
        }
        assert!(z2.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn convergence_report_fixed_point_is_flat() {
        let action = shift64();
        let x = identity(action.algebra()).scale(0.7);
        let report =
            convergence_report(&action, &x, &[2.0], &[1, 2, 4, 8], &[0.5]).unwrap();
        for row in &report.norms {
            assert!(row[0] < 1e-10);
        }
        for (_, defect) in &report.weak_defects {
            assert!(*defect < 1e-10);
        }
    }

    #[test]
    fn convergence_report_deviations_decay() {
        let action = shift64();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let x = random_positive(action.algebra(), &mut rng);
        let schedule = [1u32, 2, 4, 8, 16, 32, 64];
        let report = convergence_report(&action, &x, &[1.0, 2.0], &schedule, &[1.0]).unwrap();
        let l2: Vec<f64> = report.norms.iter().map(|r| r[1]).collect();
        assert!(l2.last().unwrap() < &(0.5 * l2[0]));
        // tail maximal norms shrink along suffixes
        let tails: Vec<f64> = report.tail_sup.iter().map(|r| r[1].unwrap()).collect();
        for w in tails.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        // p = 1 entries have no tail value
        assert!(report.tail_sup[0][0].is_none());
    }

    #[test]
    fn au_witness_thresholds_shrink_along_tails() {
        let action = shift64();
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let x = random_positive(action.algebra(), &mut rng);
        let schedule = [1u32, 4, 16, 64];
        let rows = au_witness_table(&action, &x, &schedule, &[0.05]).unwrap();
        assert_eq!(rows.len(), schedule.len());
        for row in &rows {
            assert!(row.bilateral_norm <= row.threshold * (1.0 + 1e-8));
            // the one-sided norm is recorded alongside the bilateral one;
            // in this commutative model the two coincide
            assert!((row.one_sided_norm - row.bilateral_norm).abs() < 1e-10);
        }
        let first = rows.first().unwrap().threshold;
        let last = rows.last().unwrap().threshold;
        assert!(last < first, "thresholds did not shrink: {first} -> {last}");
    }

    #[test]
    fn lacunary_increments_controlled_by_shell_ratio() {
        // ‖A_{r+w} x − A_r x‖_p ≤ 2 · shell_ratio · ‖x‖_p for positive x
        // (two shell-sized boundary terms, isometric action)
        let action = ActionModel::shift_on_cycle(128);
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let x = random_positive(action.algebra(), &mut rng);
        let width = 1u32;
        let norm = x.lp_norm(2.0).unwrap();
        for k in 1..=5u32 {
            let scan =
                crate::dyadic::annulus_radius(&HomogeneousSpace::ZLine, k, width).unwrap();
            let a_r = action.ball_average(scan.radius, &x).unwrap();
            let a_rw = action.ball_average(scan.radius + width, &x).unwrap();
            let increment = a_rw.sub(&a_r).lp_norm(2.0).unwrap();
            let bound = 2.0 * scan.shell_ratio * norm;
            assert!(
                increment <= bound + 1e-12,
                "k={k}: increment {increment} exceeds {bound}"
            );
        }
    }

    #[test]
    fn coboundary_decay_obeys_folner_bound() {
        let action = shift64();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let y = random_positive(action.algebra(), &mut rng);
        let g0: Elem = smallvec![2];
        let rows = coboundary_report(&action, &y, &g0, &[2, 4, 8, 16]).unwrap();
        for row in &rows {
            assert!(
                row.sup_norm <= row.bound + 1e-12,
                "‖A_n x‖ = {} exceeds bound {}",
                row.sup_norm,
                row.bound
            );
            // the exact count on Z: |B_n g0 △ B_n| = 2|g0|
            assert_eq!(*row.folner_ratio.numer(), 4);
        }
        // decay toward zero
        assert!(rows.last().unwrap().sup_norm < rows[0].sup_norm);
    }

    #[test]
    fn transference_point_mass_measures_give_unit_constants() {
        let action = ActionModel::shift_on_cycle(8);
        let group = action.group().clone();
        let measures = vec![walks::Density::point_mass(&group)];
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let testset = vec![random_positive(action.algebra(), &mut rng)];
        let report = transference_check(&action, &measures, 2.0, 6, &testset, 0.5).unwrap();
        assert!((report.c_direct - 1.0).abs() < 1e-9);
        assert!((report.c_transferred - 1.0).abs() < 1e-9);
        assert!(report.holds);
    }

    #[test]
    fn transference_inequality_on_shift_instances() {
        let action = ActionModel::shift_on_cycle(16);
        let group = action.group().clone();
        let measures: Vec<walks::Density> = (1..=3u32)
            .map(|n| {
                let ball = group.ball(n).unwrap();
                walks::Density::uniform_on(&group, ball.elements()).unwrap()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let testset: Vec<AlgebraElement> = (0..4)
            .map(|_| random_positive(action.algebra(), &mut rng))
            .collect();
        let report = transference_check(&action, &measures, 2.0, 12, &testset, 0.5).unwrap();
        assert!(report.holds, "transference inequality violated: {report:?}");
        // exact counts: window = 2(L+N)+1, Følner set = 2L+1
        assert_eq!(report.window_size, 2 * (12 + 3) + 1);
        assert_eq!(report.folner_size, 2 * 12 + 1);
        let expected = (report.window_size as f64 / report.folner_size as f64).powf(0.5);
        assert!((report.folner_factor - expected).abs() < 1e-12);
    }

    #[test]
    fn transference_factor_approaches_one() {
        let action = ActionModel::shift_on_cycle(8);
        let group = action.group().clone();
        let n = 2u32;
        let ball = group.ball(n).unwrap();
        let measures = vec![walks::Density::uniform_on(&group, ball.elements()).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let testset = vec![random_positive(action.algebra(), &mut rng)];
        let l = 20 * n;
        let report = transference_check(&action, &measures, 2.0, l, &testset, 0.1).unwrap();
        assert!(report.folner_factor <= 1.05, "factor {}", report.folner_factor);
        assert!(!report.small_folner_warning);
        // a tight Følner set trips the warning
        let tight = transference_check(&action, &measures, 2.0, 2, &testset, 0.1).unwrap();
        assert!(tight.small_folner_warning);
        assert!(tight.holds);
    }

    #[test]
    fn weak_transference_witness_pulls_back() {
        let action = ActionModel::shift_on_cycle(16);
        let group = action.group().clone();
        let measures: Vec<walks::Density> = (1..=3u32)
            .map(|n| {
                let ball = group.ball(n).unwrap();
                walks::Density::uniform_on(&group, ball.elements()).unwrap()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let x = random_positive(action.algebra(), &mut rng);
        for lambda in [0.5, 1.0, 2.0] {
            let report =
                weak_transference_check(&action, &measures, 1.0, 12, &x, lambda).unwrap();
            assert!(
                report.compression_norm <= lambda * (1.0 + 1e-8),
                "compression {} exceeds λ = {lambda}",
                report.compression_norm
            );
            assert!(
                report.pulled_defect <= report.defect_bound + 1e-9,
                "pulled defect {} exceeds bound {}",
                report.pulled_defect,
                report.defect_bound
            );
        }
        // a level above every average keeps everything
        let tall = weak_transference_check(&action, &measures, 1.0, 12, &x, 1e6).unwrap();
        assert!(tall.pulled_defect < 1e-12);
        assert!(tall.translation_defect < 1e-12);
    }

    #[test]
    fn weak_transference_rejects_bad_input() {
        let action = ActionModel::shift_on_cycle(8);
        let group = action.group().clone();
        let measures = vec![walks::Density::point_mass(&group)];
        let bad = AlgebraElement::from_site_scalars(
            action.algebra(),
            &[-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        assert!(weak_transference_check(&action, &measures, 1.0, 4, &bad, 1.0).is_err());
    }

    #[test]
    fn least_domination_factor_recovers_scalar_ratio() {
        let alg = TracialAlgebra::commutative(3);
        let lhs = AlgebraElement::from_site_scalars(&alg, &[1.0, 2.0, 0.0]).unwrap();
        let rhs = AlgebraElement::from_site_scalars(&alg, &[2.0, 2.0, 1.0]).unwrap();
        let t = least_domination_factor(&lhs, &rhs).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        // unsupported lhs has no finite factor
        let bad = AlgebraElement::from_site_scalars(&alg, &[0.0, 0.0, 1.0]).unwrap();
        let degenerate = AlgebraElement::from_site_scalars(&alg, &[1.0, 1.0, 0.0]).unwrap();
        assert!(least_domination_factor(&bad, &degenerate).is_err());
    }
}
