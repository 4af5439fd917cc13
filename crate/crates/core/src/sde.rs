//! Pathwise integration of Y_t = x0 + int_0^t b(Y_s) ds + sigma B_t for a
//! supplied driving path, with drift models that certify contraction and
//! Lipschitz constants.
//!
//! The noise is additive, so the scheme applies increments of the supplied
//! path exactly and discretizes only the drift (explicit Euler). For
//! contractive drifts this keeps the one-step map a contraction whenever
//! lip * dt < 1.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::grid::SamplePath;
use crate::kernel::KernelSpec;
use crate::rng::RngStream;

pub type DriftFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Error)]
pub enum SdeError {
    #[error("symmetric part of the drift matrix has least eigenvalue {alpha}, need > 0")]
    NonContractive { alpha: f64 },
    #[error("perturbation size {eps} must satisfy 0 <= eps < alpha0 = {alpha0}")]
    PerturbationTooLarge { alpha0: f64, eps: f64 },
    #[error("rate constants must satisfy 0 < alpha <= lip and be finite, got alpha={alpha} lip={lip}")]
    BadRateConstants { alpha: f64, lip: f64 },
    #[error("drift is {drift}-dimensional but {what} has dimension {got}")]
    DimensionMismatch { drift: usize, what: &'static str, got: usize },
    #[error("{what} contains non-finite entries")]
    NonFiniteInput { what: &'static str },
    #[error("state became non-finite at step {step}; drift blow-up or overflow")]
    NonFiniteState { step: usize },
}

#[derive(Clone)]
enum DriftKind {
    /// b(x) = -A x + c.
    Linear { a: DMatrix<f64>, c: DVector<f64> },
    /// b(x) = -alpha0 x + eps sin(x), coordinate-wise.
    PerturbedLinear { alpha0: f64, eps: f64 },
    /// User-supplied b with declared (not verified) constants.
    Custom { f: DriftFn },
}

/// A drift b together with constants alpha (one-sided contraction:
/// <b(x)-b(y), x-y> <= -alpha |x-y|^2) and lip (|b(x)-b(y)| <= lip |x-y|).
///
/// The built-in kinds compute their constants; `custom` records the caller's
/// claim, which `validate_drift` can spot-check.
#[derive(Clone)]
pub struct DriftModel {
    kind: DriftKind,
    dim: usize,
    alpha: f64,
    lip: f64,
}

impl fmt::Debug for DriftModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DriftKind::Linear { .. } => "Linear",
            DriftKind::PerturbedLinear { .. } => "PerturbedLinear",
            DriftKind::Custom { .. } => "Custom",
        };
        f.debug_struct("DriftModel")
            .field("kind", &kind)
            .field("dim", &self.dim)
            .field("alpha", &self.alpha)
            .field("lip", &self.lip)
            .finish()
    }
}

fn check_constants(alpha: f64, lip: f64) -> Result<(), SdeError> {
    if !(alpha.is_finite() && lip.is_finite() && alpha > 0.0 && lip >= alpha) {
        return Err(SdeError::BadRateConstants { alpha, lip });
    }
    Ok(())
}

impl DriftModel {
    /// b(x) = -A x + c. The symmetric part of A must be positive definite;
    /// alpha is its least eigenvalue and lip the operator norm of A.
    pub fn linear(a: DMatrix<f64>, c: DVector<f64>) -> Result<Self, SdeError> {
        let dim = a.nrows();
        if a.ncols() != dim {
            return Err(SdeError::DimensionMismatch { drift: dim, what: "matrix A", got: a.ncols() });
        }
        if c.len() != dim {
            return Err(SdeError::DimensionMismatch { drift: dim, what: "offset c", got: c.len() });
        }
        if a.iter().any(|v| !v.is_finite()) || c.iter().any(|v| !v.is_finite()) {
            return Err(SdeError::NonFiniteInput { what: "linear drift coefficients" });
        }
        let sym = (&a + a.transpose()) * 0.5;
        let alpha = SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(alpha > 0.0) {
            return Err(SdeError::NonContractive { alpha });
        }
        let lip = a
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(0.0f64, f64::max);
        Ok(Self { kind: DriftKind::Linear { a, c }, dim, alpha, lip })
    }

    /// b(x) = -alpha0 x + eps sin(x) coordinate-wise; alpha = alpha0 - eps,
    /// lip = alpha0 + eps, both sharp since sin is 1-Lipschitz with
    /// derivative reaching +-1.
    pub fn perturbed_linear(alpha0: f64, eps: f64, dim: usize) -> Result<Self, SdeError> {
        if !(alpha0.is_finite() && eps.is_finite() && alpha0 > 0.0 && eps >= 0.0 && eps < alpha0) {
            return Err(SdeError::PerturbationTooLarge { alpha0, eps });
        }
        if dim == 0 {
            return Err(SdeError::DimensionMismatch { drift: 0, what: "dimension", got: 0 });
        }
        Ok(Self {
            kind: DriftKind::PerturbedLinear { alpha0, eps },
            dim,
            alpha: alpha0 - eps,
            lip: alpha0 + eps,
        })
    }

    /// User-supplied drift with claimed constants. The claim is trusted by
    /// `integrate` and checked only by `validate_drift`.
    pub fn custom(f: DriftFn, dim: usize, alpha: f64, lip: f64) -> Result<Self, SdeError> {
        check_constants(alpha, lip)?;
        if dim == 0 {
            return Err(SdeError::DimensionMismatch { drift: 0, what: "dimension", got: 0 });
        }
        Ok(Self { kind: DriftKind::Custom { f }, dim, alpha, lip })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The (A, c) of b(x) = -A x + c when the drift is linear; None for the
    /// other kinds. Lets Gaussian-exact oracles refuse what they cannot do.
    pub fn linear_coefficients(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        match &self.kind {
            DriftKind::Linear { a, c } => Some((a, c)),
            _ => None,
        }
    }

    /// One-sided contraction rate.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Two-sided Lipschitz constant.
    pub fn lip(&self) -> f64 {
        self.lip
    }

    /// Evaluate b(x) into `out`.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        match &self.kind {
            DriftKind::Linear { a, c } => {
                for r in 0..self.dim {
                    let mut acc = c[r];
                    for (j, xj) in x.iter().enumerate() {
                        acc -= a[(r, j)] * xj;
                    }
                    out[r] = acc;
                }
            }
            DriftKind::PerturbedLinear { alpha0, eps } => {
                for (o, xj) in out.iter_mut().zip(x) {
                    *o = -alpha0 * xj + eps * xj.sin();
                }
            }
            DriftKind::Custom { f } => f(x, out),
        }
    }
}

/// The additive-noise equation: drift, constant diffusion matrix, initial
/// condition, and the kernel of the driving fractional noise.
#[derive(Debug, Clone)]
pub struct SdeSpec {
    pub drift: DriftModel,
    pub sigma: DMatrix<f64>,
    pub x0: DVector<f64>,
    pub kernel: KernelSpec,
    sigma_norm: f64,
}

impl SdeSpec {
    pub fn new(
        drift: DriftModel,
        sigma: DMatrix<f64>,
        x0: DVector<f64>,
        kernel: KernelSpec,
    ) -> Result<Self, SdeError> {
        let dim = drift.dim();
        if sigma.nrows() != dim || sigma.ncols() != dim {
            return Err(SdeError::DimensionMismatch { drift: dim, what: "sigma", got: sigma.nrows() });
        }
        if x0.len() != dim {
            return Err(SdeError::DimensionMismatch { drift: dim, what: "x0", got: x0.len() });
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(SdeError::NonFiniteInput { what: "sigma" });
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(SdeError::NonFiniteInput { what: "x0" });
        }
        let sigma_norm = sigma
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(0.0f64, f64::max);
        Ok(Self { drift, sigma, x0, kernel, sigma_norm })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    /// Operator norm of sigma, the |sigma| entering the bound formulas.
    pub fn sigma_norm(&self) -> f64 {
        self.sigma_norm
    }
}

/// Drift-Euler integration with exact noise increments:
/// Y_{j+1} = Y_j + b(Y_j) dt + sigma (B_{j+1} - B_j).
pub fn integrate(spec: &SdeSpec, fbm: &SamplePath) -> Result<SamplePath, SdeError> {
    let d = spec.dim();
    if fbm.dim() != d {
        return Err(SdeError::DimensionMismatch { drift: d, what: "driving path", got: fbm.dim() });
    }
    let grid = fbm.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let mut values = vec![0.0; (n + 1) * d];
    values[..d].copy_from_slice(spec.x0.as_slice());
    let mut b = vec![0.0; d];
    for j in 0..n {
        let (head, tail) = values.split_at_mut((j + 1) * d);
        let y = &head[j * d..];
        spec.drift.eval(y, &mut b);
        let b_prev = fbm.point(j);
        let b_next = fbm.point(j + 1);
        let out = &mut tail[..d];
        for r in 0..d {
            let mut noise = 0.0;
            for c in 0..d {
                noise += spec.sigma[(r, c)] * (b_next[c] - b_prev[c]);
            }
            out[r] = y[r] + b[r] * dt + noise;
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(SdeError::NonFiniteState { step: j + 1 });
        }
    }
    Ok(SamplePath::from_values(grid, d, values).expect("finite by construction"))
}

/// Empirical check of the declared drift constants over random pairs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValidationReport {
    /// max over pairs of <b(x)-b(y), x-y> / |x-y|^2; must be <= -alpha.
    pub one_sided_max: f64,
    /// max over pairs of |b(x)-b(y)| / |x-y|; must be <= lip.
    pub lipschitz_max: f64,
    pub pairs: usize,
    pub pass: bool,
}

/// Probe `probe_count` random pairs in the ball of the given radius and
/// compare the empirical one-sided and Lipschitz ratios against the model's
/// declared constants (with 1e-9 relative slack for round-off).
pub fn validate_drift(
    model: &DriftModel,
    probe_count: usize,
    radius: f64,
    stream: RngStream,
) -> ValidationReport {
    assert!(probe_count >= 1, "need at least one probe pair");
    assert!(radius > 0.0 && radius.is_finite(), "radius must be positive");
    let d = model.dim();
    let mut rng = stream.rng();
    let draw_point = |rng: &mut rand_chacha::ChaCha12Rng| -> Vec<f64> {
        // Uniform in the ball: Gaussian direction, radial CDF inversion.
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u: f64 = rng.gen_range(0.0..1.0);
        let r = radius * u.powf(1.0 / d as f64);
        if norm > 0.0 {
            for x in &mut v {
                *x *= r / norm;
            }
        }
        v
    };
    let mut one_sided_max = f64::NEG_INFINITY;
    let mut lipschitz_max: f64 = 0.0;
    let mut bx = vec![0.0; d];
    let mut by = vec![0.0; d];
    let mut accepted = 0usize;
    while accepted < probe_count {
        let x = draw_point(&mut rng);
        let y = draw_point(&mut rng);
        let dist_sq: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist_sq == 0.0 {
            // Degenerate pair: resample. Probability zero in exact
            // arithmetic, vanishingly rare in floating point.
            continue;
        }
        model.eval(&x, &mut bx);
        model.eval(&y, &mut by);
        let mut inner = 0.0;
        let mut diff_sq = 0.0;
        for r in 0..d {
            let db = bx[r] - by[r];
            inner += db * (x[r] - y[r]);
            diff_sq += db * db;
        }
        one_sided_max = one_sided_max.max(inner / dist_sq);
        lipschitz_max = lipschitz_max.max((diff_sq / dist_sq).sqrt());
        accepted += 1;
    }
    let pass = one_sided_max <= -model.alpha() * (1.0 - 1e-9)
        && lipschitz_max <= model.lip() * (1.0 + 1e-9);
    ValidationReport { one_sided_max, lipschitz_max, pairs: probe_count, pass }
}
