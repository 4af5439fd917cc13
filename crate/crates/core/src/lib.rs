//! Simulation and verification laboratory for additive SDEs driven by
//! fractional Brownian motion: kernel evaluation, exact and Volterra path
//! sampling, contractive-drift integration, concentration-bound machinery,
//! and the Monte Carlo harness primitives behind the CLI.

pub mod bounds;
pub mod cholesky;
pub mod config;
pub mod diag;
pub mod grid;
pub mod harness;
pub mod hurst;
pub mod kernel;
pub mod oracle;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod sde;
pub mod stats;
pub mod verify;

pub use bounds::{
    check_decay_integral, concentration_envelope, moment_to_expmoment_bound,
    occupation_envelope, psi_big, psi_continuous, psi_discrete, sum_psi_squared, BoundProfile,
    DecayCheck, Horizon,
};
pub use config::{ConfigError, ExperimentConfig, FKind, RScale, RawConfig, TestFunction};
pub use diag::{
    check_g_holder_bound, default_tail_constants, g_increment_second_moment,
    gtilde_increment_second_moment, sup_bm_moment, sup_bm_moments, sup_bm_tail,
    sup_bm_tail_profile, DiagError, GProcessSpec, HolderReport, SupMomentReport, SupTailReport,
};
pub use grid::{GridError, SamplePath, TimeGrid};
pub use harness::{
    check_envelope_domination, experiment_grid, fit_scaling_exponent, occupation_samples,
    occupation_samples_in, oracle_sigma, run_occupation_continuous, run_occupation_discrete,
    DominationCell, DominationReport, ExponentFit, HarnessError, MgfCell, OccupationRun,
    OccupationSamples, ScalingReport, TailRow,
};
pub use hurst::{HurstError, HurstParameter, Regime};
pub use kernel::{KernelError, KernelFamily, KernelSpec};
pub use oracle::{
    gaussian_oracle_variance, occupation_variance_continuous, occupation_variance_discrete,
    OracleError,
};
pub use rng::RngStream;
pub use sampler::{
    sample_bm, sample_fbm_cholesky, sample_fbm_volterra, SamplerError, VolterraWeights,
};
pub use sde::{integrate, validate_drift, DriftFn, DriftModel, SdeError, SdeSpec, ValidationReport};
pub use stats::McEstimate;
pub use verify::{
    run_verify, CheckOutcome, ExponentRow, NamedConfig, ReplicaBlock, VerifyError, VerifyReport,
};
