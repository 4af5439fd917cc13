//! Built-in acceptance suite behind `verify`: ten checks, each exercising
//! one documented property of the library at a fixed desk-scale budget.
//! Every check is deterministic given the seed; the report carries the
//! tables the checks measured so the CLI can persist them.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::bounds::{check_decay_integral, moment_to_expmoment_bound, sum_psi_squared, Horizon};
use crate::cholesky::fbm_covariance;
use crate::config::{ConfigError, ExperimentConfig};
use crate::diag::{check_g_holder_bound, g_increment_second_moment, sup_bm_tail, DiagError,
    GProcessSpec};
use crate::grid::{GridError, TimeGrid};
use crate::harness::{check_envelope_domination, fit_scaling_exponent, run_occupation_discrete,
    DominationReport, HarnessError, OccupationRun, TailRow};
use crate::hurst::{HurstError, HurstParameter};
use crate::kernel::{KernelError, KernelFamily, KernelSpec};
use crate::quad::QuadError;
use crate::rng::RngStream;
use crate::sampler::{fbm_cholesky_factor, fbm_path_from_factor, fbm_path_from_weights,
    SamplerError, VolterraWeights};
use crate::stats::{ks_critical_value, ks_two_sample, ols_slope, StatsError};

/// Stream id regions per check, spaced so no two checks share replica
/// streams (the occupation runs use the harness default layout at 0).
/// Public so run manifests can record which regions a suite consumed.
pub const CROSS_VALIDATION_STREAMS: u64 = 10_000_000;
pub const REFLECTION_STREAMS: u64 = 20_000_000;
pub const DOMINATION_STREAMS: u64 = 30_000_000;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Hurst(#[from] HurstError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Diag(#[from] DiagError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("could not build the single-thread replay pool: {0}")]
    ThreadPool(String),
}

/// One acceptance check: stable id and name, verdict, and a short
/// deterministic summary of what was measured against which tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// One fitted slope for the exponents table.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentRow {
    pub h: f64,
    pub quantity: &'static str,
    pub slope: f64,
    pub slope_stderr: f64,
    pub target: f64,
}

/// Per-replica statistic values backing one tail table, persisted so every
/// estimate is regenerable and auditable.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicaBlock {
    pub h: f64,
    pub horizon: Horizon,
    pub burn_in: usize,
    /// Stream id range the values were drawn from (the tail block).
    pub block: (u64, u64),
    pub values: Vec<f64>,
}

/// A generated configuration echoed for auditability.
#[derive(Debug, Clone, Serialize)]
pub struct NamedConfig {
    pub name: String,
    pub toml: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<CheckOutcome>,
    pub tails: Vec<TailRow>,
    pub exponents: Vec<ExponentRow>,
    pub domination: Vec<DominationReport>,
    pub replica_blocks: Vec<ReplicaBlock>,
    pub configs: Vec<NamedConfig>,
}

fn hurst(v: f64) -> Result<HurstParameter, VerifyError> {
    Ok(HurstParameter::new(v)?)
}

fn standard_kernel(h: f64) -> Result<KernelSpec, VerifyError> {
    Ok(KernelSpec::new(KernelFamily::Standard, hurst(h)?, 1e-8)?)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Check 1: the normalized kernel reproduces the fBm variance t^{2H}.
fn check_kernel_normalization() -> Result<CheckOutcome, VerifyError> {
    let mut worst = 0.0f64;
    for &h in &[0.3, 0.7] {
        let spec = standard_kernel(h)?;
        for &t in &[0.5f64, 1.0, 2.0] {
            let truth = t.powf(2.0 * h);
            let got = spec.kernel_variance(t)?;
            worst = worst.max((got - truth).abs() / truth);
        }
    }
    Ok(CheckOutcome {
        id: 1,
        name: "kernel-normalization",
        pass: worst < 1e-5,
        detail: format!("max relative variance error {worst:.3e} (tolerance 1e-5)"),
    })
}

/// Check 2: the Volterra discretization matches the exact law. Empirical
/// covariance against the closed form entrywise within max(4 stderr,
/// 2 dt^{2H}); terminal marginal against Cholesky samples by two-sample
/// KS at the 1% level.
fn check_sampler_cross_validation(seed: u64) -> Result<CheckOutcome, VerifyError> {
    const N_STEPS: usize = 64;
    const N_PATHS: usize = 10_000;
    const CHUNK: usize = 250;
    let grid = TimeGrid::new(1.0, N_STEPS)?;
    let dt = grid.dt();
    let n_entries = N_STEPS * (N_STEPS + 1) / 2;

    let mut detail = String::new();
    let mut pass = true;
    for &h in &[0.3, 0.5, 0.7] {
        let spec = standard_kernel(h)?;
        let weights = VolterraWeights::compute(&spec, &grid)?;
        let volterra_base = CROSS_VALIDATION_STREAMS;
        let chunk_starts: Vec<usize> = (0..N_PATHS).step_by(CHUNK).collect();
        // Accumulate product sums chunkwise: parallel over chunks,
        // sequential within, folded in chunk order, so the totals do not
        // depend on the thread count.
        let partials: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = chunk_starts
            .par_iter()
            .map(|&start| {
                let stop = (start + CHUNK).min(N_PATHS);
                let mut sums = vec![0.0; n_entries];
                let mut sq_sums = vec![0.0; n_entries];
                let mut terminals = Vec::with_capacity(stop - start);
                for r in start..stop {
                    let stream = RngStream::new(seed, volterra_base + r as u64);
                    let (_, path) = fbm_path_from_weights(&weights, grid, 1, stream)?;
                    let mut idx = 0;
                    for i in 1..=N_STEPS {
                        let bi = path.point(i)[0];
                        for j in i..=N_STEPS {
                            let p = bi * path.point(j)[0];
                            sums[idx] += p;
                            sq_sums[idx] += p * p;
                            idx += 1;
                        }
                    }
                    terminals.push(path.last()[0]);
                }
                Ok::<_, VerifyError>((sums, sq_sums, terminals))
            })
            .collect::<Result<_, _>>()?;
        let mut sums = vec![0.0; n_entries];
        let mut sq_sums = vec![0.0; n_entries];
        let mut volterra_terminals = Vec::with_capacity(N_PATHS);
        for (s, q, t) in partials {
            for (acc, v) in sums.iter_mut().zip(&s) {
                *acc += v;
            }
            for (acc, v) in sq_sums.iter_mut().zip(&q) {
                *acc += v;
            }
            volterra_terminals.extend(t);
        }

        let truth = fbm_covariance(hurst(h)?, &grid);
        let np = N_PATHS as f64;
        let floor = 2.0 * dt.powf(2.0 * h);
        let mut worst_excess = f64::NEG_INFINITY;
        let mut worst_err = 0.0f64;
        let mut idx = 0;
        for i in 1..=N_STEPS {
            for j in i..=N_STEPS {
                let mean = sums[idx] / np;
                let var = ((sq_sums[idx] - np * mean * mean) / (np - 1.0)).max(0.0);
                let se = (var / np).sqrt();
                let err = (mean - truth[(i - 1) * N_STEPS + (j - 1)]).abs();
                let tol = (4.0 * se).max(floor);
                worst_excess = worst_excess.max(err - tol);
                worst_err = worst_err.max(err);
                idx += 1;
            }
        }
        pass &= worst_excess <= 0.0;

        let factor = fbm_cholesky_factor(&spec, &grid)?;
        let chol_base = CROSS_VALIDATION_STREAMS + N_PATHS as u64;
        let chol_terminals: Vec<f64> = (0..N_PATHS)
            .into_par_iter()
            .map(|r| {
                let stream = RngStream::new(seed, chol_base + r as u64);
                Ok::<_, VerifyError>(fbm_path_from_factor(&factor, grid, 1, stream)?.last()[0])
            })
            .collect::<Result<_, _>>()?;
        let ks = ks_two_sample(&volterra_terminals, &chol_terminals);
        let ks_crit = ks_critical_value(0.01, N_PATHS, N_PATHS);
        pass &= ks <= ks_crit;
        let _ = write!(
            detail,
            "H={h}: max |dCov| {worst_err:.3e} excess {worst_excess:.1e}; KS {ks:.4} (crit {ks_crit:.4}); "
        );
    }
    Ok(CheckOutcome { id: 2, name: "sampler-cross-validation", pass, detail })
}

/// Check 3: the first block's increment second moment is exactly the fBm
/// increment variance, and the Hoelder ratio is block-uniform.
fn check_increment_exactness() -> Result<CheckOutcome, VerifyError> {
    let v_grid = vec![0.0, 0.0625, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0];
    let mut detail = String::new();
    let mut pass = true;
    for &h in &[0.3, 0.7] {
        let kernel = standard_kernel(h)?;
        let gspec = GProcessSpec::new(kernel, 1, v_grid.clone())?;
        let mut pairs = Vec::new();
        for (i, &vp) in v_grid.iter().enumerate() {
            for &v in &v_grid[i + 1..] {
                pairs.push((v, vp));
            }
        }
        let errs: Vec<f64> = pairs
            .par_iter()
            .map(|&(v, vp)| {
                let m2 = g_increment_second_moment(&gspec, v, vp)?;
                Ok::<_, VerifyError>((m2 - (v - vp).powf(2.0 * h)).abs())
            })
            .collect::<Result<_, _>>()?;
        let worst = errs.iter().cloned().fold(0.0f64, f64::max);
        pass &= worst < 1e-6;

        let holder = check_g_holder_bound(&gspec, &[1, 2, 4, 8, 16])?;
        pass &= holder.tail_variation < 0.20;
        let _ = write!(
            detail,
            "H={h}: max second-moment error {worst:.2e} (tol 1e-6); ratio variation past block 4: {:.3} (tol 0.20); ",
            holder.tail_variation
        );
    }
    Ok(CheckOutcome { id: 3, name: "increment-exactness", pass, detail })
}

/// Check 4: running-maximum tail of Brownian motion against the reflection
/// value, and under the exponential comparator.
fn check_reflection_tail(seed: u64) -> Result<CheckOutcome, VerifyError> {
    let rep = sup_bm_tail(1.0, 1, 100_000, 1024, seed, REFLECTION_STREAMS);
    let diff = (rep.one_sided.value - rep.reflection_value).abs();
    let tol = (4.0 * rep.one_sided.stderr).max(0.01);
    let under_bound = rep.one_sided.value <= rep.exp_bound && rep.norm_sup.value <= rep.exp_bound;
    let pass = diff <= tol && under_bound;
    Ok(CheckOutcome {
        id: 4,
        name: "reflection-tail",
        pass,
        detail: format!(
            "one-sided estimate {:.5} vs reflection {:.5} (diff {diff:.4} tol {tol:.4}); estimates under comparator {:.3}: {under_bound}",
            rep.one_sided.value, rep.reflection_value, rep.exp_bound
        ),
    })
}

/// Check 5: the exponentially damped polynomial integral inherits the
/// polynomial decay: its ratio to (u-1)^{-beta} stays bounded and the
/// running sup plateaus over the last octave.
fn check_decay_plateau() -> Result<CheckOutcome, VerifyError> {
    let u_grid: Vec<f64> = (2..=1024).map(|u| u as f64).collect();
    let mut detail = String::new();
    let mut pass = true;
    for &(alpha, beta) in &[(1.0, 1.2), (0.5, 2.4)] {
        let dc = check_decay_integral(alpha, beta, &u_grid)?;
        let sup_half = dc
            .rows
            .iter()
            .filter(|r| r.u <= 512.0)
            .map(|r| r.ratio)
            .fold(0.0f64, f64::max);
        let sup_full = dc.sup_ratio;
        let change = (sup_full - sup_half) / sup_half;
        pass &= sup_full.is_finite() && change < 0.05;
        let _ = write!(
            detail,
            "alpha={alpha} beta={beta}: sup ratio {sup_full:.4} last-octave change {change:.2e} (tol 0.05); "
        );
    }
    Ok(CheckOutcome { id: 5, name: "decay-integral-plateau", pass, detail })
}

/// Check 6: growth exponents of the squared psi sums over nine octaves
/// against their asymptotic targets 2 max(H, 1/2).
///
/// The subleading corrections to both sums decay like n^{-0.2} at these H
/// values, so the fitted slopes sit well above the asymptotic targets at
/// any desk-scale horizon; the check reports the measured slopes honestly
/// and fails at the stated tolerances.
fn check_psi_sum_growth() -> Result<(CheckOutcome, Vec<ExponentRow>), VerifyError> {
    let ns: Vec<usize> = (4..=12).map(|e| 1usize << e).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let mut rows = Vec::new();
    let mut detail = String::new();
    let mut pass = true;
    for &h in &[0.3, 0.7] {
        let hp = hurst(h)?;
        let target = 2.0 * hp.max_half();
        for (quantity, tol) in [
            ("psi-squared-sum-discrete", 0.05),
            ("psi-squared-sum-continuous", 0.07),
        ] {
            let ys: Vec<f64> = ns
                .iter()
                .map(|&n| {
                    let horizon = if quantity.ends_with("discrete") {
                        Horizon::Discrete(n)
                    } else {
                        Horizon::Continuous(n as f64)
                    };
                    sum_psi_squared(hp, horizon).sum_psi_sq.ln()
                })
                .collect();
            let (slope, slope_stderr) = ols_slope(&xs, &ys)?;
            pass &= (slope - target).abs() <= tol;
            let _ = write!(detail, "H={h} {quantity}: slope {slope:.4} target {target:.2} (tol {tol}); ");
            rows.push(ExponentRow { h, quantity, slope, slope_stderr, target });
        }
    }
    Ok((CheckOutcome { id: 6, name: "psi-sum-growth", pass, detail }, rows))
}

fn occupation_toml(h: f64, a: f64, x0: f64, dt: f64, seed: u64, burn_in: usize, extra: &str) -> String {
    format!(
        r#"[kernel]
family = "standard"
hurst = {h}

[sde]
sigma = [[1.0]]
x0 = [{x0}]

[sde.drift]
kind = "linear"
matrix = [[{a}]]

[f]
kind = "identity"

[experiment]
delta = 2.0
dt = {dt}
burn_in = {burn_in}
seed = {seed}
{extra}
"#
    )
}

struct OccupationScaling {
    outcome: CheckOutcome,
    exponents: Vec<ExponentRow>,
    tails: Vec<TailRow>,
    replica_blocks: Vec<ReplicaBlock>,
    configs: Vec<NamedConfig>,
    /// The diffusive-case tail table and its config, kept for the
    /// single-thread replay in the determinism check.
    replay: (ExperimentConfig, OccupationRun),
}

/// Check 7: occupation-average scaling for the contractive linear model.
/// The exact-variance slope over seven octaves must match 2 max(H, 1/2) - 2
/// within 0.1, and the sampled tails at sigma-scaled thresholds must match
/// the exact Gaussian law within four combined standard errors.
fn check_occupation_scaling(seed: u64) -> Result<OccupationScaling, VerifyError> {
    const TAIL_REPLICAS: usize = 4096;
    let mut exponents = Vec::new();
    let mut tails = Vec::new();
    let mut replica_blocks = Vec::new();
    let mut configs = Vec::new();
    let mut replay = None;
    let mut detail = String::new();
    let mut pass = true;
    for &h in &[0.3, 0.5, 0.7] {
        let slope_toml = occupation_toml(
            h,
            1.0,
            0.0,
            0.0625,
            seed,
            0,
            "n_list = [16, 32, 64, 128, 256, 512, 1024]\nreplicas = 2",
        );
        let slope_cfg = ExperimentConfig::from_toml_str(&slope_toml)?;
        configs.push(NamedConfig { name: format!("occupation-scaling-slope-H{h}"), toml: slope_toml });
        let fit = fit_scaling_exponent(&slope_cfg)?;
        let v = fit.variance;
        pass &= (v.slope - v.target).abs() <= 0.1;
        let _ = write!(detail, "H={h}: variance slope {:.4} target {:.4} (tol 0.1); ", v.slope, v.target);
        exponents.push(ExponentRow {
            h,
            quantity: v.quantity,
            slope: v.slope,
            slope_stderr: v.slope_stderr,
            target: v.target,
        });

        let tails_toml = occupation_toml(
            h,
            1.0,
            0.0,
            0.0625,
            seed,
            0,
            &format!(
                "n_list = [64]\nr_list = [0.5, 1.0, 2.0]\nr_scale = \"sigma\"\nreplicas = {TAIL_REPLICAS}"
            ),
        );
        let tails_cfg = ExperimentConfig::from_toml_str(&tails_toml)?;
        configs.push(NamedConfig { name: format!("occupation-scaling-tails-H{h}"), toml: tails_toml });
        let run = run_occupation_discrete(&tails_cfg)?;
        for row in &run.rows {
            let k = row.r_input;
            match row.oracle_tail {
                Some(oracle) => {
                    // The split-sample estimate carries two noise sources:
                    // the indicator mean and the centering shift, which
                    // moves the standardized threshold with density ~phi(k).
                    let centering = normal_pdf(k) / (TAIL_REPLICAS as f64).sqrt();
                    let combined = (row.stderr * row.stderr + centering * centering).sqrt();
                    let err = (row.estimate - oracle).abs();
                    pass &= !row.censored && err <= 4.0 * combined;
                    let _ = write!(
                        detail,
                        "H={h} r={k}s: |est-exact| {err:.4} (4se {:.4}); ",
                        4.0 * combined
                    );
                }
                None => pass = false,
            }
        }
        for s in &run.samples {
            replica_blocks.push(ReplicaBlock {
                h,
                horizon: Horizon::Discrete(s.n_list[0]),
                burn_in: s.burn_in,
                block: s.tail_block,
                values: s.discrete[0].clone(),
            });
        }
        tails.extend(run.rows.iter().cloned());
        if h == 0.5 {
            replay = Some((tails_cfg, run));
        }
    }
    let outcome = CheckOutcome { id: 7, name: "occupation-scaling", pass, detail };
    let replay = replay.expect("H=0.5 is in the sweep");
    Ok(OccupationScaling { outcome, exponents, tails, replica_blocks, configs, replay })
}

/// Check 8: the envelope constant calibrated on the short horizon keeps
/// dominating fresh tails on the 16x longer horizon at 99% joint
/// confidence, for both regimes.
fn check_envelope_transfer(
    seed: u64,
) -> Result<(CheckOutcome, Vec<DominationReport>, Vec<NamedConfig>), VerifyError> {
    let calibration = (DOMINATION_STREAMS, DOMINATION_STREAMS + 65_536);
    let evaluation = (calibration.1, calibration.1 + 4_096);
    let mut reports = Vec::new();
    let mut configs = Vec::new();
    let mut detail = String::new();
    let mut pass = true;
    for &h in &[0.3, 0.7] {
        let toml = occupation_toml(
            h,
            0.25,
            1.0,
            0.4,
            seed,
            16,
            "n_list = [1024]\nr_list = [0.0, 0.5, 1.0, 2.0]\nr_scale = \"sigma\"\nreplicas = 2048",
        );
        let cfg = ExperimentConfig::from_toml_str(&toml)?;
        configs.push(NamedConfig { name: format!("envelope-domination-H{h}"), toml });
        let report = check_envelope_domination(&cfg, &[64], calibration, evaluation)?;
        pass &= report.pass && !report.fallback_constant;
        let failed = report.cells.iter().filter(|c| !c.pass).count();
        let _ = write!(
            detail,
            "H={h}: calibrated c {:.4}; {} of {} cells dominated; ",
            report.calibrated_c,
            report.cells.len() - failed,
            report.cells.len()
        );
        reports.push(report);
    }
    Ok((CheckOutcome { id: 8, name: "envelope-domination", pass, detail }, reports, configs))
}

/// Check 9: exact centered-Gaussian moments fit the moment hypothesis at
/// the doubled variance proxy with a small constant, and the implied
/// exponential-moment bound clears the exact Gaussian MGF (analytic).
fn check_moment_conversion() -> CheckOutcome {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut detail = String::new();
    let mut pass = true;
    for &zeta in &[0.5f64, 1.0, 2.0] {
        let proxy = 2.0 * zeta;
        // Smallest admissible constant over integer moments 2..=12:
        // E|X|^p = zeta^{p/2} 2^{p/2} Gamma((p+1)/2) / sqrt(pi) against
        // C proxy^{p/2} p Gamma(p/2).
        let mut c_min = 0.0f64;
        for p in 2..=12 {
            let pf = f64::from(p);
            let moment = zeta.powf(0.5 * pf) * 2f64.powf(0.5 * pf) * gamma(0.5 * (pf + 1.0)) / sqrt_pi;
            let cap = proxy.powf(0.5 * pf) * pf * gamma(0.5 * pf);
            c_min = c_min.max(moment / cap);
        }
        pass &= c_min <= 2.0;
        let mut min_margin = f64::INFINITY;
        for i in 0..100 {
            let lambda = 4.0 * i as f64 / 99.0;
            let mgf = (0.5 * zeta * lambda * lambda).exp();
            let bound = moment_to_expmoment_bound(c_min, proxy, lambda);
            min_margin = min_margin.min(bound / mgf);
            pass &= mgf <= bound;
        }
        let _ = write!(
            detail,
            "zeta={zeta}: moment constant {c_min:.4} (cap 2); min bound/mgf ratio {min_margin:.3}; "
        );
    }
    CheckOutcome { id: 9, name: "moment-conversion", pass, detail }
}

fn bits(x: f64) -> u64 {
    x.to_bits()
}

fn tail_rows_identical(a: &[TailRow], b: &[TailRow]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            bits(x.h) == bits(y.h)
                && x.horizon == y.horizon
                && bits(x.delta) == bits(y.delta)
                && bits(x.r_input) == bits(y.r_input)
                && bits(x.r) == bits(y.r)
                && bits(x.estimate) == bits(y.estimate)
                && bits(x.stderr) == bits(y.stderr)
                && bits(x.envelope) == bits(y.envelope)
                && x.censored == y.censored
                && bits(x.upper_bound) == bits(y.upper_bound)
                && x.oracle_sigma.map(bits) == y.oracle_sigma.map(bits)
                && x.oracle_tail.map(bits) == y.oracle_tail.map(bits)
                && x.burn_in == y.burn_in
                && x.replicas == y.replicas
        })
}

fn samples_identical(a: &OccupationRun, b: &OccupationRun) -> bool {
    a.samples.len() == b.samples.len()
        && a.samples.iter().zip(&b.samples).all(|(x, y)| {
            x.discrete.len() == y.discrete.len()
                && x.discrete.iter().zip(&y.discrete).all(|(u, v)| {
                    u.len() == v.len() && u.iter().zip(v).all(|(p, q)| bits(*p) == bits(*q))
                })
        })
}

/// Check 10: replaying the diffusive tail table on a single-thread pool
/// reproduces every row and every per-replica value bit for bit. The
/// cross-process half of the contract (byte-identical CSVs from separate
/// invocations at different --threads) lives in the CLI acceptance test.
fn check_thread_determinism(
    cfg: &ExperimentConfig,
    baseline: &OccupationRun,
) -> Result<CheckOutcome, VerifyError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| VerifyError::ThreadPool(e.to_string()))?;
    let replay = pool.install(|| run_occupation_discrete(cfg))?;
    let rows_ok = tail_rows_identical(&baseline.rows, &replay.rows);
    let values_ok = samples_identical(baseline, &replay);
    let n_values: usize = baseline.samples.iter().map(|s| s.discrete[0].len()).sum();
    Ok(CheckOutcome {
        id: 10,
        name: "thread-determinism",
        pass: rows_ok && values_ok,
        detail: format!(
            "single-thread replay: {} tail rows identical {rows_ok}; {n_values} replica values identical {values_ok}",
            baseline.rows.len()
        ),
    })
}

/// Run the full acceptance suite at one seed. Deterministic: the report is
/// a pure function of the seed, whatever the thread count.
pub fn run_verify(seed: u64) -> Result<VerifyReport, VerifyError> {
    let mut checks = Vec::with_capacity(10);
    let mut configs = Vec::new();

    checks.push(check_kernel_normalization()?);
    checks.push(check_sampler_cross_validation(seed)?);
    checks.push(check_increment_exactness()?);
    checks.push(check_reflection_tail(seed)?);
    checks.push(check_decay_plateau()?);

    let (psi_outcome, mut exponents) = check_psi_sum_growth()?;
    checks.push(psi_outcome);

    let occ = check_occupation_scaling(seed)?;
    checks.push(occ.outcome);
    exponents.extend(occ.exponents);
    configs.extend(occ.configs);

    let (dom_outcome, domination, dom_configs) = check_envelope_transfer(seed)?;
    checks.push(dom_outcome);
    configs.extend(dom_configs);

    checks.push(check_moment_conversion());
    checks.push(check_thread_determinism(&occ.replay.0, &occ.replay.1)?);

    checks.sort_by_key(|c| c.id);
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        seed,
        pass,
        checks,
        tails: occ.tails,
        exponents,
        domination,
        replica_blocks: occ.replica_blocks,
        configs,
    })
}
