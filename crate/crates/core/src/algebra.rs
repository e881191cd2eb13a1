//! Finite-dimensional tracial algebras.
//!
//! An algebra here is a direct sum of matrix blocks over a weighted finite
//! index set, `⊕_s M_{d_s}`, with the normalized trace
//! `τ(x) = Σ_s w_s · tr(x_s)/d_s`. All weights are positive and sum to 1,
//! so `τ(1) = 1` and the L_p norms `‖x‖_p = τ(|x|^p)^{1/p}` are monotone
//! in `p`. Elements are immutable after construction.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::tol;

/// Weighted direct sum of matrix blocks with a normalized trace.
#[derive(Debug, PartialEq)]
pub struct TracialAlgebra {
    weights: Vec<f64>,
    block_dims: Vec<usize>,
}

impl TracialAlgebra {
    /// Builds an algebra from per-site weights and block dimensions.
    pub fn new(weights: Vec<f64>, block_dims: Vec<usize>) -> Result<Arc<Self>> {
        if weights.is_empty() || weights.len() != block_dims.len() {
            return Err(CoreError::structure(format!(
                "need matching nonempty weights/dims, got {} and {}",
                weights.len(),
                block_dims.len()
            )));
        }
        if weights.iter().any(|&w| w.is_nan() || w <= 0.0) {
            return Err(CoreError::structure("all weights must be positive"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > tol::WEIGHT_SUM {
            return Err(CoreError::structure(format!(
                "weights sum to {sum}, expected 1 within {}",
                tol::WEIGHT_SUM
            )));
        }
        if block_dims.contains(&0) {
            return Err(CoreError::structure("block dimensions must be >= 1"));
        }
        Ok(Arc::new(TracialAlgebra { weights, block_dims }))
    }

    /// `C(X)` over `n` uniformly weighted points.
    pub fn commutative(n: usize) -> Arc<Self> {
        Self::new(vec![1.0 / n as f64; n], vec![1; n]).expect("uniform commutative algebra")
    }

    /// A single matrix block `M_d` with its normalized trace.
    pub fn matrix(d: usize) -> Arc<Self> {
        Self::new(vec![1.0], vec![d]).expect("matrix algebra")
    }

    /// `C(X) ⊗ M_d` over `n` uniformly weighted points.
    pub fn function_matrix(n: usize, d: usize) -> Arc<Self> {
        Self::new(vec![1.0 / n as f64; n], vec![d; n]).expect("function-matrix algebra")
    }

    pub fn sites(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    /// True when every block is scalar, i.e. the algebra is commutative.
    pub fn is_commutative(&self) -> bool {
        self.block_dims.iter().all(|&d| d == 1)
    }
}

/// Identity element of `alg`.
pub fn identity(alg: &Arc<TracialAlgebra>) -> AlgebraElement {
    let blocks = alg
        .block_dims()
        .iter()
        .map(|&d| DMatrix::identity(d, d))
        .collect();
    AlgebraElement::from_blocks_unchecked(alg.clone(), blocks)
}

/// Zero element of `alg`.
pub fn zero(alg: &Arc<TracialAlgebra>) -> AlgebraElement {
    let blocks = alg
        .block_dims()
        .iter()
        .map(|&d| DMatrix::zeros(d, d))
        .collect();
    AlgebraElement::from_blocks_unchecked(alg.clone(), blocks)
}

/// An element of a [`TracialAlgebra`]: one complex matrix per site.
#[derive(Clone)]
pub struct AlgebraElement {
    parent: Arc<TracialAlgebra>,
    blocks: Vec<DMatrix<Complex64>>,
    hermitian: bool,
}

impl fmt::Debug for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlgebraElement")
            .field("sites", &self.parent.sites())
            .field("hermitian", &self.hermitian)
            .finish()
    }
}

impl AlgebraElement {
    /// Builds an element, checking block shapes against the parent.
    pub fn from_blocks(parent: Arc<TracialAlgebra>, blocks: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if blocks.len() != parent.sites() {
            return Err(CoreError::structure(format!(
                "expected {} blocks, got {}",
                parent.sites(),
                blocks.len()
            )));
        }
        for (s, b) in blocks.iter().enumerate() {
            let d = parent.block_dims()[s];
            if b.nrows() != d || b.ncols() != d {
                return Err(CoreError::structure(format!(
                    "block {s} has shape {}x{}, expected {d}x{d}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(Self::from_blocks_unchecked(parent, blocks))
    }

    pub(crate) fn from_blocks_unchecked(
        parent: Arc<TracialAlgebra>,
        blocks: Vec<DMatrix<Complex64>>,
    ) -> Self {
        let hermitian = blocks.iter().all(is_hermitian_block);
        AlgebraElement {
            parent,
            blocks,
            hermitian,
        }
    }

    /// Element of a commutative algebra given by one real scalar per site.
    pub fn from_site_scalars(parent: &Arc<TracialAlgebra>, values: &[f64]) -> Result<Self> {
        if !parent.is_commutative() {
            return Err(CoreError::structure(
                "from_site_scalars requires a commutative algebra",
            ));
        }
        if values.len() != parent.sites() {
            return Err(CoreError::structure(format!(
                "expected {} values, got {}",
                parent.sites(),
                values.len()
            )));
        }
        let blocks = values
            .iter()
            .map(|&v| DMatrix::from_element(1, 1, Complex64::new(v, 0.0)))
            .collect();
        Ok(Self::from_blocks_unchecked(parent.clone(), blocks))
    }

    /// Indicator of a single site of a commutative algebra.
    pub fn site_indicator(parent: &Arc<TracialAlgebra>, site: usize) -> Result<Self> {
        let mut values = vec![0.0; parent.sites()];
        if site >= values.len() {
            return Err(CoreError::domain(format!("site {site} out of range")));
        }
        values[site] = 1.0;
        Self::from_site_scalars(parent, &values)
    }

    pub fn parent(&self) -> &Arc<TracialAlgebra> {
        &self.parent
    }

    pub fn blocks(&self) -> &[DMatrix<Complex64>] {
        &self.blocks
    }

    pub fn block(&self, s: usize) -> &DMatrix<Complex64> {
        &self.blocks[s]
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    fn same_parent(&self, other: &AlgebraElement) -> bool {
        Arc::ptr_eq(&self.parent, &other.parent) || *self.parent == *other.parent
    }

    fn zip_blocks(
        &self,
        other: &AlgebraElement,
        f: impl Fn(&DMatrix<Complex64>, &DMatrix<Complex64>) -> DMatrix<Complex64>,
    ) -> AlgebraElement {
        assert!(
            self.same_parent(other),
            "elements belong to different algebras"
        );
        let blocks = self
            .blocks
            .iter()
            .zip(other.blocks.iter())
            .map(|(a, b)| f(a, b))
            .collect();
        AlgebraElement::from_blocks_unchecked(self.parent.clone(), blocks)
    }

    pub fn add(&self, other: &AlgebraElement) -> AlgebraElement {
        self.zip_blocks(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &AlgebraElement) -> AlgebraElement {
        self.zip_blocks(other, |a, b| a - b)
    }

    /// Blockwise product.
    pub fn mul(&self, other: &AlgebraElement) -> AlgebraElement {
        self.zip_blocks(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> AlgebraElement {
        self.scale_complex(Complex64::new(c, 0.0))
    }

    pub fn scale_complex(&self, c: Complex64) -> AlgebraElement {
        let blocks = self.blocks.iter().map(|b| b.map(|v| v * c)).collect();
        AlgebraElement::from_blocks_unchecked(self.parent.clone(), blocks)
    }

    pub fn adjoint(&self) -> AlgebraElement {
        let blocks = self.blocks.iter().map(|b| b.adjoint()).collect();
        AlgebraElement::from_blocks_unchecked(self.parent.clone(), blocks)
    }

    /// Hermitian part `(x + x*)/2`.
    pub fn hermitize(&self) -> AlgebraElement {
        let blocks = self
            .blocks
            .iter()
            .map(|b| (b + b.adjoint()).map(|v| v * 0.5))
            .collect();
        AlgebraElement::from_blocks_unchecked(self.parent.clone(), blocks)
    }

    /// Normalized trace `τ(x) = Σ_s w_s tr(x_s)/d_s`; linear, `τ(1) = 1`.
    pub fn trace(&self) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (s, b) in self.blocks.iter().enumerate() {
            let d = self.parent.block_dims()[s] as f64;
            acc += b.trace() * Complex64::new(self.parent.weights()[s] / d, 0.0);
        }
        acc
    }

    /// `τ(x* y)`, the tracial inner product.
    pub fn inner(&self, other: &AlgebraElement) -> Complex64 {
        self.adjoint().mul(other).trace()
    }

    /// `‖x‖_p = τ(|x|^p)^{1/p}` for `p ≥ 1`, largest singular value for
    /// `p = ∞` (pass `f64::INFINITY`).
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_infinite() && p > 0.0 {
            return Ok(self.sup_norm());
        }
        if p.is_nan() || p < 1.0 {
            return Err(CoreError::domain(format!("lp_norm needs p >= 1, got {p}")));
        }
        let mut acc = 0.0;
        for (s, b) in self.blocks.iter().enumerate() {
            let d = self.parent.block_dims()[s] as f64;
            let sv = singular_values(b);
            let block_mean: f64 = sv.iter().map(|&sigma| sigma.powf(p)).sum::<f64>() / d;
            acc += self.parent.weights()[s] * block_mean;
        }
        Ok(acc.powf(1.0 / p))
    }

    /// Largest singular value over all sites (`‖x‖_∞`).
    pub fn sup_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| singular_values(b).into_iter().fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all sites. Requires a hermitian element.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        if !self.hermitian {
            return Err(CoreError::domain("min_eigenvalue needs a hermitian element"));
        }
        let mut min = f64::INFINITY;
        for b in &self.blocks {
            let (vals, _) = hermitian_eigen(b);
            min = vals.iter().fold(min, |m, &v| m.min(v));
        }
        Ok(min)
    }

    /// Positivity up to the crate-wide relative tolerance.
    pub fn is_positive(&self) -> bool {
        if !self.hermitian {
            return false;
        }
        let floor = tol::positivity_floor(self.sup_norm());
        self.min_eigenvalue().map(|m| m >= floor).unwrap_or(false)
    }

    /// Applies `f` to the spectrum of a hermitian element.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<AlgebraElement> {
        if !self.hermitian {
            return Err(CoreError::domain("map_spectrum needs a hermitian element"));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let (vals, vecs) = hermitian_eigen(b);
                recompose(&vecs, &vals.iter().map(|&v| f(v)).collect::<Vec<_>>())
            })
            .collect();
        Ok(AlgebraElement::from_blocks_unchecked(
            self.parent.clone(),
            blocks,
        ))
    }

    /// `|x|` for hermitian `x` (spectral absolute value).
    pub fn abs_spectral(&self) -> Result<AlgebraElement> {
        self.map_spectrum(f64::abs)
    }

    /// Positive part `x_+` of a hermitian element.
    pub fn positive_part(&self) -> Result<AlgebraElement> {
        self.map_spectrum(|v| v.max(0.0))
    }

    /// `x^p` for a positive element (negative eigen-noise is clamped to 0).
    pub fn power(&self, p: f64) -> Result<AlgebraElement> {
        self.map_spectrum(|v| v.max(0.0).powf(p))
    }

    /// Spectral projection `1_{[lo, hi]}(x)` of a hermitian element.
    ///
    /// A degenerate interval (`lo > hi`) yields the zero projection. The
    /// result commutes with `x` up to the spectral tolerance.
    pub fn spectral_projection(&self, lo: f64, hi: f64) -> Result<Projection> {
        if !self.hermitian {
            return Err(CoreError::domain(
                "spectral_projection needs a hermitian element",
            ));
        }
        let indicator = |v: f64| if v >= lo && v <= hi { 1.0 } else { 0.0 };
        let e = self.map_spectrum(indicator)?;
        Projection::new(e)
    }

    /// Conditional expectation onto the subalgebra of elements constant on
    /// each cell of `partition`; weighted block mean per cell. Idempotent,
    /// trace-preserving and positive.
    pub fn conditional_expectation(&self, partition: &SitePartition) -> Result<AlgebraElement> {
        partition.check_covers(self.parent.sites())?;
        let dims = self.parent.block_dims();
        let weights = self.parent.weights();
        let mut blocks: Vec<DMatrix<Complex64>> = self.blocks.clone();
        for cell in partition.cells() {
            let d = dims[cell[0]];
            if cell.iter().any(|&s| dims[s] != d) {
                return Err(CoreError::structure(
                    "partition cell mixes different block dimensions",
                ));
            }
            let total_w: f64 = cell.iter().map(|&s| weights[s]).sum();
            let mut mean = DMatrix::<Complex64>::zeros(d, d);
            for &s in cell {
                mean += self.blocks[s].map(|v| v * Complex64::new(weights[s] / total_w, 0.0));
            }
            for &s in cell {
                blocks[s] = mean.clone();
            }
        }
        Ok(AlgebraElement::from_blocks_unchecked(
            self.parent.clone(),
            blocks,
        ))
    }
}

/// A projection `e = e* = e²` wrapped around its element.
#[derive(Clone, Debug)]
pub struct Projection {
    element: AlgebraElement,
}

impl Projection {
    /// Validates `e = e*` and `e² = e` within the projection tolerance.
    pub fn new(element: AlgebraElement) -> Result<Self> {
        if !element.is_hermitian() {
            return Err(CoreError::domain("projection must be hermitian"));
        }
        let idem = element.mul(&element).sub(&element).sup_norm();
        if idem > tol::PROJECTION {
            return Err(CoreError::domain(format!(
                "projection defect {idem:.3e} exceeds {}",
                tol::PROJECTION
            )));
        }
        Ok(Projection { element })
    }

    /// Snaps a hermitian element close to a projection onto an exact one:
    /// eigenvalues above 1/2 go to 1, the rest to 0.
    pub fn snap(element: &AlgebraElement) -> Result<Self> {
        let snapped = element.map_spectrum(|v| if v > 0.5 { 1.0 } else { 0.0 })?;
        Ok(Projection { element: snapped })
    }

    pub fn element(&self) -> &AlgebraElement {
        &self.element
    }

    pub fn identity(alg: &Arc<TracialAlgebra>) -> Self {
        Projection {
            element: identity(alg),
        }
    }

    /// `τ(1 - e)`, the trace of the complement.
    pub fn defect(&self) -> f64 {
        1.0 - self.element.trace().re
    }

    pub fn complement(&self) -> Projection {
        Projection {
            element: identity(self.element.parent()).sub(&self.element),
        }
    }

    /// Compression `e x e`.
    pub fn compress(&self, x: &AlgebraElement) -> AlgebraElement {
        self.element.mul(x).mul(&self.element)
    }
}

/// A partition of the site set, used for conditional expectations.
#[derive(Clone, Debug)]
pub struct SitePartition {
    cells: Vec<Vec<usize>>,
}

impl SitePartition {
    pub fn new(cells: Vec<Vec<usize>>) -> Self {
        SitePartition { cells }
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    fn check_covers(&self, sites: usize) -> Result<()> {
        let mut seen = vec![false; sites];
        for cell in &self.cells {
            if cell.is_empty() {
                return Err(CoreError::structure("partition has an empty cell"));
            }
            for &s in cell {
                if s >= sites || seen[s] {
                    return Err(CoreError::structure(
                        "partition does not partition the site set",
                    ));
                }
                seen[s] = true;
            }
        }
        if seen.iter().all(|&b| b) {
            Ok(())
        } else {
            Err(CoreError::structure("partition does not cover all sites"))
        }
    }

    /// One cell per site.
    pub fn singletons(sites: usize) -> Self {
        SitePartition::new((0..sites).map(|s| vec![s]).collect())
    }

    /// A single cell holding every site.
    pub fn full(sites: usize) -> Self {
        SitePartition::new(vec![(0..sites).collect()])
    }

    /// Contiguous cells of equal size (`cell_size` must divide `sites`).
    pub fn contiguous(sites: usize, cell_size: usize) -> Result<Self> {
        if cell_size == 0 || !sites.is_multiple_of(cell_size) {
            return Err(CoreError::structure(format!(
                "cell size {cell_size} does not divide {sites} sites"
            )));
        }
        Ok(SitePartition::new(
            (0..sites / cell_size)
                .map(|c| (c * cell_size..(c + 1) * cell_size).collect())
                .collect(),
        ))
    }

    /// Dyadic filtration on `sites = 2^k` points, coarse to fine: cells of
    /// size `sites`, `sites/2`, ..., 1.
    pub fn dyadic_filtration(sites: usize) -> Result<Vec<SitePartition>> {
        if !sites.is_power_of_two() {
            return Err(CoreError::structure(
                "dyadic filtration needs a power-of-two site count",
            ));
        }
        let mut parts = Vec::new();
        let mut size = sites;
        loop {
            parts.push(SitePartition::contiguous(sites, size)?);
            if size == 1 {
                break;
            }
            size /= 2;
        }
        Ok(parts)
    }
}

/// The martingale `E_1 x, ..., E_N x` of `x` along a filtration given as
/// partitions from coarse to fine.
pub fn martingale(x: &AlgebraElement, filtration: &[SitePartition]) -> Result<Vec<AlgebraElement>> {
    filtration
        .iter()
        .map(|p| x.conditional_expectation(p))
        .collect()
}

/// Random element with independent complex Gaussian-ish entries.
pub fn random_element(alg: &Arc<TracialAlgebra>, rng: &mut impl Rng) -> AlgebraElement {
    let blocks = alg
        .block_dims()
        .iter()
        .map(|&d| {
            DMatrix::from_fn(d, d, |_, _| {
                Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
            })
        })
        .collect();
    AlgebraElement::from_blocks_unchecked(alg.clone(), blocks)
}

/// Random hermitian element.
pub fn random_hermitian(alg: &Arc<TracialAlgebra>, rng: &mut impl Rng) -> AlgebraElement {
    random_element(alg, rng).hermitize()
}

/// Random positive element `g* g` (never the zero element in practice).
pub fn random_positive(alg: &Arc<TracialAlgebra>, rng: &mut impl Rng) -> AlgebraElement {
    let g = random_element(alg, rng);
    g.adjoint().mul(&g)
}

/// Haar-ish random unitary via QR of a complex Gaussian matrix.
pub fn random_unitary(d: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
    });
    g.qr().q()
}

fn is_hermitian_block(b: &DMatrix<Complex64>) -> bool {
    let scale = 1.0 + b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let defect = (b - b.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
    defect <= tol::HERMITIAN * scale
}

/// Eigendecomposition of a hermitian block; the input is symmetrized first
/// so eigen-noise cannot leak through.
pub(crate) fn hermitian_eigen(b: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let h = (b + b.adjoint()).map(|v| v * 0.5);
    let eig = h.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub(crate) fn recompose(vecs: &DMatrix<Complex64>, vals: &[f64]) -> DMatrix<Complex64> {
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| Complex64::new(v, 0.0)),
    ));
    vecs * d * vecs.adjoint()
}

pub(crate) fn singular_values(b: &DMatrix<Complex64>) -> Vec<f64> {
    if b.nrows() == 1 {
        return vec![b[(0, 0)].norm()];
    }
    b.clone().singular_values().iter().copied().collect()
}
