//! Concrete group models and word-metric balls.
//!
//! Supported models: `Z^d`, the discrete Heisenberg group (integer
//! upper-triangular unipotent 3×3 matrices encoded as `(a, b, c)` triples),
//! finite cyclic powers `(Z/mZ)^d`, and the locally finite group `⊕ Z/2Z`
//! encoded as bit vectors. Elements are canonical integer tuples, so
//! deduplication is exact. Balls are built by breadth-first search over
//! right multiplication and always include the identity.

use std::collections::HashMap;

use num_rational::Ratio;
use smallvec::{smallvec, SmallVec};

use crate::error::{CoreError, Result};

/// Canonical encoding of a group element.
pub type Elem = SmallVec<[i64; 4]>;

/// Default guard on enumerated elements.
pub const DEFAULT_ELEMENT_CAP: usize = 5_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupKind {
    /// `Z^d` with generators `±e_i`.
    Grid { d: usize },
    /// Discrete Heisenberg group; element `(a, b, c)` is the matrix with
    /// `a` at (1,2), `b` at (2,3), `c` at (1,3).
    Heisenberg,
    /// `(Z/mZ)^d` with generators `±e_i` mod `m`.
    CyclicPower { modulus: i64, d: usize },
    /// `⊕ Z/2Z` truncated at `levels` coordinates; elements are bitmasks.
    LocallyFinite { levels: u32 },
}

/// A group given by a kind tag and a symmetric generating set.
#[derive(Clone, Debug)]
pub struct GroupModel {
    kind: GroupKind,
    generators: Vec<Elem>,
}

impl GroupModel {
    /// The integers with generators ±1.
    pub fn integers() -> Self {
        Self::grid(1)
    }

    /// `Z^d` with generators `±e_i`.
    pub fn grid(d: usize) -> Self {
        assert!(d >= 1, "grid dimension must be at least 1");
        let mut generators = Vec::new();
        for i in 0..d {
            for sign in [1i64, -1] {
                let mut e: Elem = smallvec![0; d];
                e[i] = sign;
                generators.push(e);
            }
        }
        GroupModel {
            kind: GroupKind::Grid { d },
            generators,
        }
    }

    /// Heisenberg group with the standard generators `x^{±1}, y^{±1}`.
    pub fn heisenberg() -> Self {
        let generators = vec![
            smallvec![1, 0, 0],
            smallvec![-1, 0, 0],
            smallvec![0, 1, 0],
            smallvec![0, -1, 0],
        ];
        GroupModel {
            kind: GroupKind::Heisenberg,
            generators,
        }
    }

    /// Heisenberg group with generators `x^{±1}, y^{±1}, z^{±1}` where `z`
    /// is the commutator of `x` and `y`.
    pub fn heisenberg_with_z() -> Self {
        let mut model = Self::heisenberg();
        model.generators.push(smallvec![0, 0, 1]);
        model.generators.push(smallvec![0, 0, -1]);
        model
    }

    /// `(Z/mZ)^d`.
    pub fn cyclic(modulus: i64, d: usize) -> Self {
        assert!(modulus >= 2 && d >= 1);
        let mut generators: Vec<Elem> = Vec::new();
        for i in 0..d {
            for sign in [1i64, -1] {
                let mut e: Elem = smallvec![0; d];
                e[i] = sign.rem_euclid(modulus);
                if !generators.contains(&e) {
                    generators.push(e);
                }
            }
        }
        GroupModel {
            kind: GroupKind::CyclicPower { modulus, d },
            generators,
        }
    }

    /// `⊕ Z/2Z` with one bit-flip generator per level.
    pub fn locally_finite(levels: u32) -> Self {
        assert!((1..=62).contains(&levels));
        let generators = (0..levels).map(|i| smallvec![1i64 << i]).collect();
        GroupModel {
            kind: GroupKind::LocallyFinite { levels },
            generators,
        }
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn generators(&self) -> &[Elem] {
        &self.generators
    }

    pub fn identity(&self) -> Elem {
        match &self.kind {
            GroupKind::Grid { d } => smallvec![0; *d],
            GroupKind::Heisenberg => smallvec![0, 0, 0],
            GroupKind::CyclicPower { d, .. } => smallvec![0; *d],
            GroupKind::LocallyFinite { .. } => smallvec![0],
        }
    }

    pub fn multiply(&self, a: &Elem, b: &Elem) -> Elem {
        match &self.kind {
            GroupKind::Grid { .. } => a.iter().zip(b.iter()).map(|(x, y)| x + y).collect(),
            GroupKind::Heisenberg => {
                smallvec![a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1]]
            }
            GroupKind::CyclicPower { modulus, .. } => a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x + y).rem_euclid(*modulus))
                .collect(),
            GroupKind::LocallyFinite { .. } => smallvec![a[0] ^ b[0]],
        }
    }

    pub fn inverse(&self, a: &Elem) -> Elem {
        match &self.kind {
            GroupKind::Grid { .. } => a.iter().map(|x| -x).collect(),
            GroupKind::Heisenberg => smallvec![-a[0], -a[1], a[0] * a[1] - a[2]],
            GroupKind::CyclicPower { modulus, .. } => {
                a.iter().map(|x| (-x).rem_euclid(*modulus)).collect()
            }
            GroupKind::LocallyFinite { .. } => a.clone(),
        }
    }

    /// Word-metric ball of radius `n` (with the identity adjoined), built
    /// by breadth-first search with the default element cap.
    pub fn ball(&self, n: u32) -> Result<Ball> {
        self.ball_with_cap(n, DEFAULT_ELEMENT_CAP)
    }

    pub fn ball_with_cap(&self, n: u32, cap: usize) -> Result<Ball> {
        let mut elems: Vec<Elem> = vec![self.identity()];
        let mut index: HashMap<Elem, u32> = HashMap::new();
        index.insert(self.identity(), 0);
        let mut dist: Vec<u32> = vec![0];
        let mut parent: Vec<Option<(u32, u32)>> = vec![None];
        let mut frontier: Vec<u32> = vec![0];

        for level in 1..=n {
            let mut next = Vec::new();
            for &pos in &frontier {
                let g = elems[pos as usize].clone();
                for (gi, v) in self.generators.iter().enumerate() {
                    let h = self.multiply(&g, v);
                    if !index.contains_key(&h) {
                        if elems.len() >= cap {
                            return Err(CoreError::CapExceeded {
                                needed: elems.len() + 1,
                                cap,
                            });
                        }
                        let new_pos = elems.len() as u32;
                        index.insert(h.clone(), new_pos);
                        elems.push(h);
                        dist.push(level);
                        parent.push(Some((pos, gi as u32)));
                        next.push(new_pos);
                    }
                }
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        Ok(Ball {
            radius: n,
            elems,
            index,
            dist,
            parent,
        })
    }

    /// The raw product set `V^n` (words of length exactly `n`, identity not
    /// adjoined); used for product-set experiments.
    pub fn product_set(&self, n: u32, cap: usize) -> Result<Vec<Elem>> {
        let mut current: Vec<Elem> = vec![self.identity()];
        for _ in 0..n {
            let mut seen: HashMap<Elem, ()> = HashMap::new();
            let mut next: Vec<Elem> = Vec::new();
            for g in &current {
                for v in &self.generators {
                    let h = self.multiply(g, v);
                    if seen.insert(h.clone(), ()).is_none() {
                        if next.len() >= cap {
                            return Err(CoreError::CapExceeded {
                                needed: next.len() + 1,
                                cap,
                            });
                        }
                        next.push(h);
                    }
                }
            }
            current = next;
        }
        Ok(current)
    }
}

/// Word-metric ball: deduplicated encodings with word length ≤ `radius`,
/// in breadth-first order with parent links for geodesic reconstruction.
#[derive(Clone, Debug)]
pub struct Ball {
    radius: u32,
    elems: Vec<Elem>,
    index: HashMap<Elem, u32>,
    dist: Vec<u32>,
    parent: Vec<Option<(u32, u32)>>,
}

impl Ball {
    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn elements(&self) -> &[Elem] {
        &self.elems
    }

    pub fn contains(&self, g: &Elem) -> bool {
        self.index.contains_key(g)
    }

    pub fn position(&self, g: &Elem) -> Option<usize> {
        self.index.get(g).map(|&p| p as usize)
    }

    pub fn word_length(&self, g: &Elem) -> Option<u32> {
        self.position(g).map(|p| self.dist[p])
    }

    pub fn dist_at(&self, pos: usize) -> u32 {
        self.dist[pos]
    }

    /// Parent position and generator index that reached `pos` in the BFS.
    pub fn parent_of(&self, pos: usize) -> Option<(usize, usize)> {
        self.parent[pos].map(|(p, g)| (p as usize, g as usize))
    }

    /// Elements of word length exactly `radius`.
    pub fn boundary(&self) -> impl Iterator<Item = &Elem> {
        self.elems
            .iter()
            .zip(self.dist.iter())
            .filter(move |(_, &d)| d == self.radius)
            .map(|(e, _)| e)
    }

    /// Generator indices along a geodesic from the identity to the element
    /// at `pos`.
    pub fn geodesic(&self, pos: usize) -> Vec<usize> {
        let mut word = Vec::new();
        let mut cur = pos;
        while let Some((p, g)) = self.parent_of(cur) {
            word.push(g);
            cur = p;
        }
        word.reverse();
        word
    }

    /// Ball sizes `|B_k|` for `k = 0..=radius`.
    pub fn size_profile(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.radius as usize + 1];
        for &d in &self.dist {
            sizes[d as usize] += 1;
        }
        for k in 1..sizes.len() {
            sizes[k] += sizes[k - 1];
        }
        sizes
    }
}

/// Exact Følner ratio `|Fg △ F| / |F|` on counts.
pub fn folner_ratio(group: &GroupModel, f_set: &[Elem], g: &Elem) -> Ratio<i64> {
    let members: HashMap<&Elem, ()> = f_set.iter().map(|e| (e, ())).collect();
    let escaped = f_set
        .iter()
        .filter(|f| !members.contains_key(&group.multiply(f, g)))
        .count() as i64;
    // |Fg △ F| = |Fg \ F| + |F \ Fg| and both parts have equal cardinality
    Ratio::new(2 * escaped, f_set.len() as i64)
}

/// Least-squares growth exponent fit.
#[derive(Clone, Copy, Debug)]
pub struct GrowthFit {
    /// Slope of `log |B_n|` against `log n` over `n ∈ [n_max/2, n_max]`.
    pub exponent: f64,
    /// Set when the ball sizes are constant on the fit range.
    pub degenerate: bool,
}

/// Fits the polynomial growth exponent from ball sizes.
pub fn growth_exponent(group: &GroupModel, n_max: u32) -> Result<GrowthFit> {
    if n_max < 4 {
        return Err(CoreError::domain("growth_exponent needs n_max >= 4"));
    }
    let ball = group.ball(n_max)?;
    let sizes = ball.size_profile();
    let lo = (n_max / 2).max(1) as usize;
    let pts: Vec<(f64, f64)> = (lo..=n_max as usize)
        .map(|n| ((n as f64).ln(), (sizes[n] as f64).ln()))
        .collect();
    if pts.iter().all(|&(_, y)| (y - pts[0].1).abs() < 1e-12) {
        return Ok(GrowthFit {
            exponent: 0.0,
            degenerate: true,
        });
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(GrowthFit {
        exponent: slope,
        degenerate: false,
    })
}

/// `g = x^a y^b z^c` exponents read off the matrix entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeisenbergNormalForm {
    pub x_exp: i64,
    pub y_exp: i64,
    pub z_exp: i64,
}

/// Normal form of a Heisenberg element under the fixed convention
/// `x = E12`, `y = E23`, `z = E13`; the roundtrip is exact.
pub fn heisenberg_normal_form(g: &Elem) -> HeisenbergNormalForm {
    HeisenbergNormalForm {
        x_exp: g[0],
        y_exp: g[1],
        z_exp: g[2] - g[0] * g[1],
    }
}

/// Re-evaluates `x^a y^b z^c` in the matrix model.
pub fn evaluate_normal_form(nf: &HeisenbergNormalForm) -> Elem {
    smallvec![nf.x_exp, nf.y_exp, nf.x_exp * nf.y_exp + nf.z_exp]
}

/// Realized Bass-type exponent bounds over a ball.
#[derive(Clone, Copy, Debug)]
pub struct BassBounds {
    /// `max(|a|, |b|) / n` over the ball.
    pub c_ab: f64,
    /// `max |c| / n²` over the ball.
    pub c_z: f64,
    pub max_ab: i64,
    pub max_z: i64,
}

/// Maxima of the normal-form exponents over `B_n`, normalized by the Bass
/// growth weights (`n` for the abelianized directions, `n²` for the
/// commutator direction). For `Z^d` (nilpotency class 1) the commutator
/// part is identically zero.
pub fn verify_bass_bounds(group: &GroupModel, n: u32) -> Result<BassBounds> {
    if n < 1 {
        return Err(CoreError::domain("verify_bass_bounds needs n >= 1"));
    }
    let ball = group.ball(n)?;
    let (mut max_ab, mut max_z) = (0i64, 0i64);
    match group.kind() {
        GroupKind::Heisenberg => {
            for g in ball.elements() {
                let nf = heisenberg_normal_form(g);
                max_ab = max_ab.max(nf.x_exp.abs()).max(nf.y_exp.abs());
                max_z = max_z.max(nf.z_exp.abs());
            }
        }
        GroupKind::Grid { .. } => {
            for g in ball.elements() {
                for &coord in g.iter() {
                    max_ab = max_ab.max(coord.abs());
                }
            }
        }
        _ => {
            return Err(CoreError::domain(
                "bass bounds are defined for the Heisenberg and grid models",
            ))
        }
    }
    Ok(BassBounds {
        c_ab: max_ab as f64 / n as f64,
        c_z: max_z as f64 / (n as f64 * n as f64),
        max_ab,
        max_z,
    })
}

/// The finite subgroup `G_n = (Z/2Z)^n` of the locally finite chain.
pub fn locally_finite_chain(group: &GroupModel, n: u32) -> Result<Vec<Elem>> {
    let GroupKind::LocallyFinite { levels } = group.kind() else {
        return Err(CoreError::domain(
            "locally_finite_chain needs a locally finite model",
        ));
    };
    if n > *levels {
        return Err(CoreError::domain(format!(
            "chain level {n} exceeds model depth {levels}"
        )));
    }
    if n >= 40 {
        return Err(CoreError::CapExceeded {
            needed: 1usize << n,
            cap: DEFAULT_ELEMENT_CAP,
        });
    }
    Ok((0..(1i64 << n)).map(|bits| smallvec![bits]).collect())
}
