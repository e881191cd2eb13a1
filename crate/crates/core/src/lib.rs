//! Numerical laboratory for maximal ergodic inequalities on finite tracial
//! algebras: maximal norms and weak-type witnesses, word-metric balls for
//! groups of polynomial growth, adjacent dyadic systems, random-walk
//! domination and ergodic convergence diagnostics.
//!
//! Everything runs at desk scale: algebras are finite direct sums of matrix
//! blocks, groups are concrete models (`Z^d`, discrete Heisenberg, cyclic
//! products, locally finite unions) and all asserted inequalities carry
//! explicit constants.

pub mod algebra;
pub mod dyadic;
pub mod ergodic;
pub mod error;
pub mod groups;
pub mod maximal;
pub mod tol;
pub mod walks;

pub use algebra::{
    identity, martingale, random_element, random_hermitian, random_positive, random_unitary,
    zero, AlgebraElement, Projection, SitePartition, TracialAlgebra,
};
pub use dyadic::{
    annulus_radius, cover_ball, doubling_constant, mei_shift, BallMetric, CoverResult,
    DyadicSystem, HomogeneousSpace,
};
pub use ergodic::{
    au_witness_table, convergence_report, lacunary_schedule, transference_check,
    weak_transference_check, ActionKind, ActionModel, AverageReport, TransferenceReport,
    WeakTransferenceReport,
};
pub use error::{CoreError, Result};
pub use groups::{folner_ratio, growth_exponent, Ball, Elem, GroupKind, GroupModel};
pub use maximal::{
    cuculescu, strong_type_estimate, sup_plus_norm, weak_type_witness, MaximalWitness,
    PositiveSequence, WeakTypeWitness,
};
pub use walks::{
    convolution_power, convolve, domination_constant, domination_constant_exact,
    gaussian_lower_check, Density, LazyWalkCounts,
};
