//! Brownian and fractional Brownian path samplers.
//!
//! Two independent fBm constructions are provided: exact Gaussian sampling
//! through a Cholesky factor of the covariance, and a Volterra
//! discretization driven by Brownian increments with cell-averaged kernel
//! weights. Where they disagree beyond tolerance the Cholesky route is
//! authoritative, since it is covariance-exact by construction.

use rayon::prelude::*;
use thiserror::Error;

use crate::cholesky::{self, CholeskyError, CholeskyFactor};
use crate::grid::{GridError, SamplePath, TimeGrid};
use crate::kernel::{KernelError, KernelFamily, KernelSpec, QUAD_DIAGONAL_GAP};
use crate::quad::{self, Endpoint};
use crate::rng::RngStream;

/// Largest grid accepted by the O(n^3) Cholesky route.
pub const MAX_CHOLESKY_STEPS: usize = 8192;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("grid has {got} steps; the Cholesky sampler accepts at most {MAX_CHOLESKY_STEPS}")]
    TooManySteps { got: usize },
    #[error("covariance factorization failed even with diagonal jitter: {0}")]
    Factorization(CholeskyError),
    #[error("dimension must be at least 1")]
    ZeroDim,
    #[error("grid step {dt} is within 10x of the diagonal quadrature gap; coarsen the grid")]
    StepBelowResolution { dt: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Standard d-dimensional Brownian motion: W_0 = 0, increments
/// sqrt(dt) N(0, I), drawn step-major then component-major.
pub fn sample_bm(grid: TimeGrid, dim: usize, stream: RngStream) -> Result<SamplePath, SamplerError> {
    if dim == 0 {
        return Err(SamplerError::ZeroDim);
    }
    let n = grid.n_steps();
    let sqrt_dt = grid.dt().sqrt();
    let draws = stream.standard_normals(n * dim);
    let mut values = vec![0.0; (n + 1) * dim];
    for j in 0..n {
        for c in 0..dim {
            values[(j + 1) * dim + c] = values[j * dim + c] + sqrt_dt * draws[j * dim + c];
        }
    }
    Ok(SamplePath::from_values(grid, dim, values)?)
}

/// Factor the fBm covariance on the grid's interior points, retrying once
/// with diagonal jitter 1e-12 * max-diagonal if the matrix is numerically
/// indefinite.
pub fn fbm_cholesky_factor(
    spec: &KernelSpec,
    grid: &TimeGrid,
) -> Result<CholeskyFactor, SamplerError> {
    let n = grid.n_steps();
    if n > MAX_CHOLESKY_STEPS {
        return Err(SamplerError::TooManySteps { got: n });
    }
    let cov = cholesky::fbm_covariance(spec.hurst(), grid);
    match cholesky::factor_spd(cov.clone(), n) {
        Ok(f) => Ok(f),
        Err(_) => {
            let max_diag = (0..n)
                .map(|i| cov[i * n + i])
                .fold(0.0f64, f64::max);
            let mut jittered = cov;
            for i in 0..n {
                jittered[i * n + i] += 1e-12 * max_diag;
            }
            cholesky::factor_spd(jittered, n).map_err(SamplerError::Factorization)
        }
    }
}

/// Draw one fBm path from a prepared factor. Noise is laid out
/// component-major: component c consumes draws [c*n, (c+1)*n).
pub fn fbm_path_from_factor(
    factor: &CholeskyFactor,
    grid: TimeGrid,
    dim: usize,
    stream: RngStream,
) -> Result<SamplePath, SamplerError> {
    if dim == 0 {
        return Err(SamplerError::ZeroDim);
    }
    let n = grid.n_steps();
    assert!(factor.n() >= n, "factor smaller than grid");
    let draws = stream.standard_normals(n * dim);
    let mut values = vec![0.0; (n + 1) * dim];
    let mut out = vec![0.0; n];
    for c in 0..dim {
        factor.apply_prefix(&draws[c * n..(c + 1) * n], &mut out);
        for j in 0..n {
            values[(j + 1) * dim + c] = out[j];
        }
    }
    Ok(SamplePath::from_values(grid, dim, values)?)
}

/// Exact Gaussian fBm sampling: Cholesky of the covariance matrix.
pub fn sample_fbm_cholesky(
    spec: &KernelSpec,
    grid: TimeGrid,
    dim: usize,
    stream: RngStream,
) -> Result<SamplePath, SamplerError> {
    let factor = fbm_cholesky_factor(spec, &grid)?;
    fbm_path_from_factor(&factor, grid, dim, stream)
}

/// Cell-averaged kernel weights for the Volterra discretization:
/// kappa(t_j, i) = (1/dt) int_{t_i}^{t_{i+1}} K(t_j, s) ds.
///
/// Cell integrals stay defined for every H, unlike point evaluation, which
/// hits the (t-s)^{H-1/2} singularity on the last cell when H < 1/2.
#[derive(Debug, Clone)]
pub struct VolterraWeights {
    n: usize,
    /// Row j-1 holds kappa(t_j, 0..j) flattened: j(j-1)/2 offset.
    w: Vec<f64>,
}

impl VolterraWeights {
    pub fn compute(spec: &KernelSpec, grid: &TimeGrid) -> Result<Self, SamplerError> {
        let n = grid.n_steps();
        let dt = grid.dt();
        let tol = spec.quad_tol();
        let d = spec.hurst().value() - 0.5;
        // The last cell's quadrature stops a gap short of the diagonal and
        // the remainder is added in closed form (see kernel_variance). The
        // step must dominate the gap for that split to make sense.
        let gap_unit = QUAD_DIAGONAL_GAP * grid.t_max().max(1.0);
        if dt <= 10.0 * gap_unit {
            return Err(SamplerError::StepBelowResolution { dt });
        }
        let rows: Vec<Vec<f64>> = (1..=n)
            .into_par_iter()
            .map(|j| -> Result<Vec<f64>, SamplerError> {
                let t_j = grid.time(j);
                let gap = QUAD_DIAGONAL_GAP * t_j.max(1.0);
                let s_cap = t_j - gap;
                let mut row = Vec::with_capacity(j);
                for i in 0..j {
                    let a = grid.time(i);
                    let left = if i == 0 {
                        // K ~ s^{-|H-1/2|} at the origin.
                        Endpoint::Power(-d.abs())
                    } else {
                        Endpoint::Smooth
                    };
                    let integrand = |s: f64| match spec.eval_kernel(t_j, s) {
                        Ok(k) => k,
                        Err(_) => f64::NAN,
                    };
                    let kappa = if i == j - 1 {
                        // Last cell touches the diagonal. Outer half up to
                        // dt/2 from it, then log gap coordinates
                        // v = t_j - s = gap * e^y in which (t-s)^{H-1/2} is
                        // a smooth exponential, then a closed-form sliver
                        // from the leading K ~ head (t-s)^{H-1/2}.
                        let m = t_j - 0.5 * dt;
                        let outer = quad::integrate_shaped(
                            &integrand,
                            a,
                            m,
                            left,
                            Endpoint::Smooth,
                            0.5 * tol * dt,
                        )
                        .map_err(KernelError::from)?;
                        let len = (0.5 * dt / gap).ln();
                        let near = quad::integrate(
                            |y: f64| {
                                let v = gap * y.exp();
                                integrand(t_j - v) * v
                            },
                            0.0,
                            len,
                            0.5 * tol * dt,
                        )
                        .map_err(KernelError::from)?;
                        let head = match spec.family() {
                            KernelFamily::Standard => {
                                spec.normalization() * (t_j / s_cap).powf(d)
                            }
                            KernelFamily::Liouville => 1.0,
                        };
                        let sliver = head * gap.powf(d + 1.0) / (d + 1.0);
                        (outer.value + near.value + sliver) / dt
                    } else {
                        let cell = quad::integrate_shaped(
                            &integrand,
                            a,
                            grid.time(i + 1),
                            left,
                            Endpoint::Smooth,
                            tol * dt,
                        )
                        .map_err(KernelError::from)?;
                        cell.value / dt
                    };
                    row.push(kappa);
                }
                Ok(row)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { n, w: rows.concat() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Weights kappa(t_j, 0..j) for row j in 1..=n.
    pub fn row(&self, j: usize) -> &[f64] {
        debug_assert!(j >= 1 && j <= self.n);
        let start = j * (j - 1) / 2;
        &self.w[start..start + j]
    }
}

/// Volterra-driven fBm from precomputed weights; returns the driving
/// Brownian path and the fBm path built from the same increments.
pub fn fbm_path_from_weights(
    weights: &VolterraWeights,
    grid: TimeGrid,
    dim: usize,
    stream: RngStream,
) -> Result<(SamplePath, SamplePath), SamplerError> {
    if dim == 0 {
        return Err(SamplerError::ZeroDim);
    }
    let n = grid.n_steps();
    assert_eq!(weights.n(), n, "weights built for a different grid");
    let w = sample_bm(grid, dim, stream)?;
    let mut values = vec![0.0; (n + 1) * dim];
    for c in 0..dim {
        // Increments of the driving BM, component c.
        let inc: Vec<f64> = (0..n)
            .map(|j| w.point(j + 1)[c] - w.point(j)[c])
            .collect();
        for j in 1..=n {
            let row = weights.row(j);
            let mut acc = 0.0;
            for (kappa, dw) in row.iter().zip(&inc) {
                acc += kappa * dw;
            }
            values[j * dim + c] = acc;
        }
    }
    let b = SamplePath::from_values(grid, dim, values)?;
    Ok((w, b))
}

/// Volterra discretization of fBm; the returned pair (w, b) is coupled
/// through shared randomness, and w alone is distributed as sample_bm.
pub fn sample_fbm_volterra(
    spec: &KernelSpec,
    grid: TimeGrid,
    dim: usize,
    stream: RngStream,
) -> Result<(SamplePath, SamplePath), SamplerError> {
    let weights = VolterraWeights::compute(spec, &grid)?;
    fbm_path_from_weights(&weights, grid, dim, stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hurst::HurstParameter;
    use crate::kernel::KernelFamily;

    fn spec(h: f64) -> KernelSpec {
        KernelSpec::new(KernelFamily::Standard, HurstParameter::new(h).unwrap(), 1e-8).unwrap()
    }

    #[test]
    fn bm_is_deterministic_per_stream() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let s = RngStream::new(7, 3);
        let a = sample_bm(grid, 2, s).unwrap();
        let b = sample_bm(grid, 2, s).unwrap();
        assert_eq!(a.values(), b.values());
        let c = sample_bm(grid, 2, RngStream::new(7, 4)).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn bm_terminal_moments_match_theory() {
        let grid = TimeGrid::new(2.0, 16).unwrap();
        let n_paths = 10_000;
        let finals: Vec<f64> = (0..n_paths)
            .map(|r| sample_bm(grid, 1, RngStream::new(11, r)).unwrap().last()[0])
            .collect();
        let n = n_paths as f64;
        let mean = finals.iter().sum::<f64>() / n;
        let var = finals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        // 4-sigma tolerances: mean se = sqrt(t/n), var se = t*sqrt(2/n).
        assert!(mean.abs() < 4.0 * (2.0f64 / n).sqrt(), "mean {mean}");
        assert!((var - 2.0).abs() < 4.0 * 2.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn cholesky_path_starts_at_zero_and_reproduces() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let k = spec(0.7);
        let s = RngStream::new(42, 0);
        let a = sample_fbm_cholesky(&k, grid, 1, s).unwrap();
        let b = sample_fbm_cholesky(&k, grid, 1, s).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.point(0), &[0.0]);
    }

    #[test]
    fn cholesky_rejects_oversized_grids() {
        let grid = TimeGrid::new(1.0, MAX_CHOLESKY_STEPS + 1).unwrap();
        let k = spec(0.5);
        assert!(matches!(
            sample_fbm_cholesky(&k, grid, 1, RngStream::new(1, 0)),
            Err(SamplerError::TooManySteps { .. })
        ));
    }

    #[test]
    fn cholesky_terminal_variance_matches_covariance() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let k = spec(0.7);
        let factor = fbm_cholesky_factor(&k, &grid).unwrap();
        let n_paths = 10_000;
        let finals: Vec<f64> = (0..n_paths)
            .map(|r| {
                fbm_path_from_factor(&factor, grid, 1, RngStream::new(5, r))
                    .unwrap()
                    .last()[0]
            })
            .collect();
        let n = n_paths as f64;
        let mean = finals.iter().sum::<f64>() / n;
        let var = finals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 4.0 * (2.0f64 / n).sqrt(), "var {var}");
    }

    #[test]
    fn volterra_collapses_to_bm_at_half() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let k = spec(0.5);
        let (w, b) = sample_fbm_volterra(&k, grid, 1, RngStream::new(3, 9)).unwrap();
        let worst = w
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-8, "max |b - w| = {worst}");
    }

    #[test]
    fn volterra_couples_driving_bm_with_standalone_sampler() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let k = spec(0.3);
        let s = RngStream::new(21, 2);
        let (w, _) = sample_fbm_volterra(&k, grid, 2, s).unwrap();
        let standalone = sample_bm(grid, 2, s).unwrap();
        assert_eq!(w.values(), standalone.values());
    }

    #[test]
    fn volterra_terminal_variance_tracks_kernel_variance() {
        // Var b_n = dt * sum kappa(t_n, .)^2 should be close to t^{2H}.
        let grid = TimeGrid::new(1.0, 64).unwrap();
        for h in [0.3, 0.7] {
            let k = spec(h);
            let weights = VolterraWeights::compute(&k, &grid).unwrap();
            let dt = grid.dt();
            let var: f64 = weights.row(64).iter().map(|k| k * k * dt).sum();
            let allowance = 2.0 * dt.powf(2.0 * h);
            assert!(
                (var - 1.0).abs() < allowance,
                "h={h}: discrete terminal variance {var}"
            );
        }
    }

    #[test]
    fn stationary_increment_variance_depends_only_on_lag() {
        // Exact property of the covariance model, evaluated through the
        // factor: Var(B_{t+u} - B_t) = u^{2H} for every t.
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let k = spec(0.3);
        let factor = fbm_cholesky_factor(&k, &grid).unwrap();
        let n = 50;
        let var_inc = |i: usize, j: usize| {
            // Var(B_j - B_i) from L rows: |L_j - L_i|^2 with L_0 = 0.
            let mut acc = 0.0;
            for m in 0..n {
                let li = if i == 0 { 0.0 } else { factor.entry(i - 1, m) };
                let lj = if j == 0 { 0.0 } else { factor.entry(j - 1, m) };
                acc += (lj - li) * (lj - li);
            }
            acc
        };
        let lag = 10;
        let base = var_inc(0, lag);
        for start in [5, 17, 33] {
            let v = var_inc(start, start + lag);
            assert!(
                (v - base).abs() < 1e-10,
                "lag {lag} from {start}: {v} vs {base}"
            );
        }
        let want = (lag as f64 * grid.dt()).powf(0.6);
        assert!((base - want).abs() < 1e-10);
    }
}
