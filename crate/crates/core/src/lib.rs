//! Generalized phase retrieval at desk scale.
//!
//! Given Hermitian (or real symmetric) matrices `A_1, ..., A_N`, the measurement
//! map sends a signal `x` to `(x* A_1 x, ..., x* A_N x)`. The map can never see a
//! global unimodular factor, so the question is whether it is injective on
//! phase classes for almost every signal. This crate builds measurement
//! ensembles, decides that property exactly where a finite criterion exists,
//! estimates it elsewhere, constructs explicit collisions, and recovers signals
//! by multi-start damped least squares.

pub mod ambiguity;
pub mod certify;
pub mod ensembles;
pub mod error;
pub mod io;
pub mod linalg;
pub mod measurement;
pub mod recovery;
pub mod refine;
pub mod rng;

pub use ensembles::{
    hankel_ensemble, minimal_complex_ensemble, random_ensemble, rank_one_from_frame, validate, Ensemble,
    EnsembleKind, FieldTag, Frame, HermitianMatrix, RandomKind, ValidationReport,
};
pub use error::{Error, Result};
pub use measurement::{is_regular, jacobian, measure, phase_distance, polarization_gap, JacobianMatrix, MeasurementVector};
pub use ambiguity::{
    gram_collision_witness, kernel_collision, kernel_collision_search, psi, psi_inverse, quadruple_independence, rank2_orbit, CollisionWitness,
    OrbitParams, Rank2Signature,
};
pub use certify::{
    bilinear_kernel, full_spark, jacobian_rank_survey, monte_carlo_injectivity, polarization_kernel,
    real_rank_one_exact, tangent_dimension_probe, CertReport, Method, MonteCarloOptions, SubsetPairWitness, Verdict,
};
pub use recovery::{recover, residual_objective, sweep, RecoverOptions, RecoveryResult, SweepConfig, SweepRow};
