//! Affine-invariant measures on polynomial submanifolds.
//!
//! The crate computes the affine curvature tensor of a polynomial map
//! `f: ℝ^d → ℝ^n`, its SL(d)-orbit minimum (the affine density), and the
//! supporting machinery used to study the pulled-back measure: index-set
//! combinatorics, determinant-maximizing tuples for convex bodies, core
//! sets for finite function systems, tight frames that produce
//! nondegenerate embeddings, and an empirical harness for Oberlin ratios.

pub mod convex;
pub mod coreset;
pub mod error;
pub mod frames;
pub mod index;
pub mod linalg;
pub mod oberlin;
pub mod poly;
pub mod sl;
pub mod tensor;

pub use convex::{body_volume, max_det_tuple, sandwich_certify, ConvexBody, DetTuple, PointSet, SandwichReport, VolumeEstimate};
pub use coreset::{
    core_subset, derivative_core, unit_sphere_basis, CoreSetResult, DerivativeCoreResult, FunctionSystem,
    WeightedSampleSet,
};
pub use error::{Error, Result};
pub use frames::{
    admissible_collection, bombieri_inner, build_embedding, critical_check, harmonic_untf, CriticalReport, Frame,
    PolynomialCollection,
};
pub use index::{homogeneous_dimension, index_set, kappa_sequence, IndexSet};
pub use oberlin::{
    mu_of_body, oberlin_experiment, pullback_measure, sample_body, simplex_functional, supercritical_blowup, BodyFamilies,
    ExperimentReport, PullbackMeasure,
};
pub use poly::{MultiIndex, Polynomial, PolynomialMap};
pub use sl::{
    affine_density, bilinear_density_exact, detnorm_check, minimize_over_sl, minor_sum, DensityResult, Minimum,
    OptimizerConfig,
};
pub use tensor::{assemble_tensor, sl_objective, CurvatureTensor, Tensor};
