//! Experiment configuration: a TOML file with sections [kernel], [sde],
//! [sde.drift], [f], [experiment], parsed strictly (unknown keys are hard
//! errors) and validated into ready-to-run specs.
//!
//! The raw deserialized form is kept alongside the validated one so run
//! manifests can echo the input byte-for-byte-equivalently.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{KernelError, KernelFamily, KernelSpec};
use crate::hurst::{HurstError, HurstParameter};
use crate::sde::{DriftModel, SdeError, SdeSpec};

/// Euler needs lip * dt well under 1 to track the contraction; runs above
/// this threshold are refused rather than silently degraded.
pub const MAX_LIP_DT: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Hurst(#[from] HurstError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error("sigma must be a square {dim}x{dim} matrix matching the drift")]
    BadSigmaShape { dim: usize },
    #[error("{name} must be finite and positive, got {value}")]
    BadPositive { name: &'static str, value: f64 },
    #[error("delta {delta} is not an integer multiple of dt {dt}")]
    DeltaOffGrid { delta: f64, dt: f64 },
    #[error("continuous horizon {t} must be >= 1 and an integer multiple of dt {dt}")]
    BadContinuousHorizon { t: f64, dt: f64 },
    #[error("{name} entries must be finite and >= {min}; got {value}")]
    BadListEntry { name: &'static str, min: f64, value: f64 },
    #[error("n_list entries must be >= 1")]
    BadDiscreteHorizon,
    #[error("replicas must be at least 2 to report a standard error")]
    TooFewReplicas,
    #[error("identity test function needs a one-dimensional state")]
    IdentityNeedsScalarState,
    #[error("declared Lipschitz constant {got} disagrees with the closed form {want}")]
    WrongLipschitzDeclaration { got: f64, want: f64 },
    #[error("lip * dt = {0:.3} exceeds {MAX_LIP_DT}; refine dt or soften the drift")]
    StepTooCoarseForDrift(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FKind {
    Identity,
    Sin,
    ClippedAbs,
}

/// Scalar test function applied to the SDE state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    kind: FKind,
}

impl TestFunction {
    pub fn new(kind: FKind) -> Self {
        Self { kind }
    }

    pub fn kind(&self) -> FKind {
        self.kind
    }

    /// All three closed forms are 1-Lipschitz, and the config layer rejects
    /// any declaration saying otherwise.
    pub fn lip(&self) -> f64 {
        1.0
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.kind {
            FKind::Identity => x[0],
            FKind::Sin => x[0].sin(),
            FKind::ClippedAbs => x.iter().map(|v| v * v).sum::<f64>().sqrt().min(1.0),
        }
    }
}

/// How r_list is interpreted: absolute thresholds, or multiples of the
/// Gaussian-oracle standard deviation at each horizon (linear drift only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RScale {
    Absolute,
    Sigma,
}

fn default_quad_tol() -> f64 {
    1e-8
}

fn default_c_const() -> f64 {
    1.0
}

fn default_r_scale() -> RScale {
    RScale::Absolute
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    family: KernelFamily,
    hurst: f64,
    #[serde(default = "default_quad_tol")]
    quad_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawDrift {
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        offset: Option<Vec<f64>>,
    },
    PerturbedLinear {
        alpha0: f64,
        eps: f64,
        dim: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSde {
    drift: RawDrift,
    sigma: Vec<Vec<f64>>,
    x0: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawF {
    kind: FKind,
    #[serde(default)]
    lip: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    delta: f64,
    dt: f64,
    #[serde(default)]
    n_list: Vec<usize>,
    #[serde(default)]
    t_list: Vec<f64>,
    #[serde(default)]
    r_list: Vec<f64>,
    #[serde(default)]
    lambda_list: Vec<f64>,
    replicas: usize,
    seed: u64,
    #[serde(default)]
    burn_in: usize,
    #[serde(default = "default_c_const")]
    c_const: f64,
    #[serde(default = "default_r_scale")]
    r_scale: RScale,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    kernel: RawKernel,
    sde: RawSde,
    f: RawF,
    experiment: RawExperiment,
}

/// Validated experiment description. Field `steps_per_delta` is dt's
/// relation to delta made integral: delta = steps_per_delta * dt exactly as
/// the grid sees it.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub sde: SdeSpec,
    pub f: TestFunction,
    pub delta: f64,
    pub dt: f64,
    pub steps_per_delta: usize,
    pub n_list: Vec<usize>,
    pub t_list: Vec<f64>,
    pub r_list: Vec<f64>,
    pub lambda_list: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub c_const: f64,
    pub r_scale: RScale,
    raw: RawConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        Self::from_raw(raw)
    }

    /// The deserialized input, for echoing into run manifests.
    pub fn raw(&self) -> &RawConfig {
        &self.raw
    }

    pub fn hurst(&self) -> HurstParameter {
        self.sde.kernel.hurst()
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let hurst = HurstParameter::new(raw.kernel.hurst)?;
        let kernel = KernelSpec::new(raw.kernel.family, hurst, raw.kernel.quad_tol)?;

        let drift = match &raw.sde.drift {
            RawDrift::Linear { matrix, offset } => {
                let dim = matrix.len();
                let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
                if dim == 0 || flat.len() != dim * dim {
                    return Err(ConfigError::BadSigmaShape { dim });
                }
                let a = DMatrix::from_row_slice(dim, dim, &flat);
                let c = match offset {
                    Some(v) => DVector::from_column_slice(v),
                    None => DVector::zeros(dim),
                };
                DriftModel::linear(a, c)?
            }
            RawDrift::PerturbedLinear { alpha0, eps, dim } => {
                DriftModel::perturbed_linear(*alpha0, *eps, *dim)?
            }
        };

        let dim = drift.dim();
        let sig_flat: Vec<f64> = raw.sde.sigma.iter().flatten().copied().collect();
        if raw.sde.sigma.len() != dim || sig_flat.len() != dim * dim {
            return Err(ConfigError::BadSigmaShape { dim });
        }
        let sigma = DMatrix::from_row_slice(dim, dim, &sig_flat);
        let x0 = DVector::from_column_slice(&raw.sde.x0);
        let sde = SdeSpec::new(drift, sigma, x0, kernel)?;

        let f = TestFunction::new(raw.f.kind);
        if let Some(lip) = raw.f.lip {
            if lip != f.lip() {
                return Err(ConfigError::WrongLipschitzDeclaration { got: lip, want: f.lip() });
            }
        }
        if f.kind() == FKind::Identity && dim != 1 {
            return Err(ConfigError::IdentityNeedsScalarState);
        }

        let e = &raw.experiment;
        for (name, value) in [("delta", e.delta), ("dt", e.dt)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::BadPositive { name, value });
            }
        }
        let ratio = e.delta / e.dt;
        let steps_per_delta = ratio.round() as usize;
        if steps_per_delta < 1 || (steps_per_delta as f64 * e.dt - e.delta).abs() > 1e-9 * e.delta {
            return Err(ConfigError::DeltaOffGrid { delta: e.delta, dt: e.dt });
        }
        if e.n_list.iter().any(|&n| n == 0) {
            return Err(ConfigError::BadDiscreteHorizon);
        }
        for &t in &e.t_list {
            let steps = (t / e.dt).round();
            let off_grid = !t.is_finite()
                || t < 1.0
                || steps < 1.0
                || (steps * e.dt - t).abs() > 1e-9 * t;
            if off_grid {
                return Err(ConfigError::BadContinuousHorizon { t, dt: e.dt });
            }
        }
        for &r in &e.r_list {
            if !(r.is_finite() && r >= 0.0) {
                return Err(ConfigError::BadListEntry { name: "r_list", min: 0.0, value: r });
            }
        }
        for &l in &e.lambda_list {
            if !(l.is_finite() && l >= 0.0) {
                return Err(ConfigError::BadListEntry { name: "lambda_list", min: 0.0, value: l });
            }
        }
        if e.replicas < 2 {
            return Err(ConfigError::TooFewReplicas);
        }
        if !(e.c_const.is_finite() && e.c_const > 0.0) {
            return Err(ConfigError::BadPositive { name: "c_const", value: e.c_const });
        }
        let lip_dt = sde.drift.lip() * e.dt;
        if lip_dt > MAX_LIP_DT {
            return Err(ConfigError::StepTooCoarseForDrift(lip_dt));
        }

        Ok(Self {
            sde,
            f,
            delta: e.delta,
            dt: e.dt,
            steps_per_delta,
            n_list: e.n_list.clone(),
            t_list: e.t_list.clone(),
            r_list: e.r_list.clone(),
            lambda_list: e.lambda_list.clone(),
            replicas: e.replicas,
            seed: e.seed,
            burn_in: e.burn_in,
            c_const: e.c_const,
            r_scale: e.r_scale,
            raw,
        })
    }
}
