//! fbm-lab: exact fBm sampling, contractive SDE integration, closed-form
//! bound tables, Gaussian diagnostics, and the built-in acceptance suite.
//!
//! Every subcommand except `report` writes a run directory holding a
//! manifest (seed, threads, config echo, stream-id regions, wall time)
//! plus result tables; `report` re-plots and summarizes an existing one.
//! Result tables never contain timing, so a rerun at the same seed
//! reproduces them byte for byte regardless of thread count.

mod output;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use fbm_lab_core::sampler::{fbm_cholesky_factor, fbm_path_from_factor};
use fbm_lab_core::verify::{CROSS_VALIDATION_STREAMS, REFLECTION_STREAMS};
use fbm_lab_core::{
    default_tail_constants, experiment_grid, g_increment_second_moment, integrate,
    occupation_envelope, oracle_sigma, run_verify, sum_psi_squared, sup_bm_moments,
    sup_bm_tail_profile, validate_drift, ConfigError, DiagError, ExperimentConfig, GProcessSpec,
    GridError, HarnessError, Horizon, KernelError, NamedConfig, RScale, RngStream, SamplePath,
    SamplerError, SdeError, VerifyError,
};
use rayon::prelude::*;

use output::{Manifest, StreamRange};

/// Paths are bulky; persist at most this many replicas per run.
const MAX_PERSISTED_PATHS: usize = 16;
/// Stream id reserved for drift-validation probes, clear of replica ids.
const DRIFT_PROBE_STREAM: u64 = 1_000_000;

#[derive(Parser)]
#[command(
    name = "fbm-lab",
    version,
    about = "Simulation and verification laboratory for SDEs driven by fractional Brownian motion"
)]
struct Cli {
    /// Experiment config (TOML). Required by sample, integrate, bounds
    /// and diagnose; verify and report run without one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed (default 42 for verify).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Falls back to FBM_LAB_THREADS, then one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run directory (default runs/<subcommand>); for report, the run
    /// directory to read.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv writes one table per file; json writes a single document.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw exact fBm paths on the experiment grid and persist them.
    Sample,
    /// Integrate the SDE along fresh fBm paths and persist trajectories.
    Integrate,
    /// Tabulate psi profiles and concentration envelopes (closed form,
    /// no sampling).
    Bounds,
    /// Gaussian diagnostics: kernel-increment second moments and
    /// running-maximum tails and moments.
    Diagnose,
    /// Run the built-in acceptance suite and persist its tables.
    Verify,
    /// Re-plot and summarize an existing run directory (no simulation).
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Integrate => "integrate",
            Command::Bounds => "bounds",
            Command::Diagnose => "diagnose",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }
}

/// Usage errors exit 2, run failures exit 1, per the CLI contract.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

macro_rules! failure_from {
    ($($ty:ty),* $(,)?) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Failure(e.to_string())
            }
        }
    )*};
}

failure_from!(
    std::io::Error,
    VerifyError,
    HarnessError,
    SamplerError,
    SdeError,
    DiagError,
    KernelError,
    GridError,
);

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// --threads wins over FBM_LAB_THREADS; absent both, the pool defaults to
/// one worker per core.
fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("FBM_LAB_THREADS") {
            Ok(text) => Some(text.trim().parse::<usize>().map_err(|_| {
                CliError::Usage(format!("FBM_LAB_THREADS must be a positive integer, got {text:?}"))
            })?),
            Err(std::env::VarError::NotPresent) => None,
            Err(e) => return Err(CliError::Usage(format!("FBM_LAB_THREADS: {e}"))),
        },
    };
    if n == Some(0) {
        return Err(CliError::Usage("thread count must be at least 1".into()));
    }
    Ok(n)
}

/// What a command produced, for the manifest.
struct Artifacts {
    pass: bool,
    seed: u64,
    outputs: Vec<String>,
    stream_ranges: Vec<StreamRange>,
    config_path: Option<String>,
    config: Option<String>,
    generated_configs: Vec<NamedConfig>,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let threads = resolve_threads(cli.threads)?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failure(format!("could not size the worker pool: {e}")))?;
    }
    let started = Instant::now();
    let name = cli.command.name();
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(name));

    if matches!(cli.command, Command::Report) {
        return cmd_report(&dir, cli.out.is_some());
    }
    fs::create_dir_all(&dir)?;

    let art = match cli.command {
        Command::Sample => cmd_sample(&cli, &dir)?,
        Command::Integrate => cmd_integrate(&cli, &dir)?,
        Command::Bounds => cmd_bounds(&cli, &dir)?,
        Command::Diagnose => cmd_diagnose(&cli, &dir)?,
        Command::Verify => cmd_verify(&cli, &dir)?,
        Command::Report => unreachable!("handled above"),
    };

    let manifest = Manifest {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: art.seed,
        threads,
        format: cli.format.name().to_string(),
        config_path: art.config_path,
        config: art.config,
        generated_configs: art.generated_configs,
        stream_ranges: art.stream_ranges,
        outputs: art.outputs,
        pass: art.pass,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    output::write_json(&dir, "manifest.json", &manifest)?;
    println!(
        "{name}: {} in {} ({:.1} s)",
        if art.pass { "ok" } else { "FAILED" },
        dir.display(),
        manifest.wall_time_seconds
    );
    Ok(art.pass)
}

fn load_config(cli: &Cli) -> Result<(ExperimentConfig, String, String), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("this subcommand needs --config <file.toml>".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_toml_str(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok((cfg, path.display().to_string(), text))
}

/// Exact fBm replicas r = 0, 1, ... on the config grid; `integrate` reuses
/// the same streams, so trajectory r is driven by sample r's path.
fn draw_paths(cfg: &ExperimentConfig) -> Result<Vec<SamplePath>, CliError> {
    let grid = experiment_grid(cfg, &cfg.n_list, &cfg.t_list, cfg.burn_in)?;
    let factor = fbm_cholesky_factor(&cfg.sde.kernel, &grid)?;
    let dim = cfg.sde.x0.len();
    let count = cfg.replicas.min(MAX_PERSISTED_PATHS);
    let paths = (0..count)
        .map(|r| fbm_path_from_factor(&factor, grid, dim, RngStream::new(cfg.seed, r as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(paths)
}

fn persist_paths(
    dir: &Path,
    format: Format,
    stem: &str,
    doc_name: &str,
    paths: &[SamplePath],
) -> Result<Vec<String>, CliError> {
    let mut outputs = Vec::new();
    match format {
        Format::Csv => {
            for (r, p) in paths.iter().enumerate() {
                let name = format!("{stem}_{r:03}.csv");
                outputs.push(output::write_text(dir, &name, &output::path_csv(p))?);
            }
        }
        Format::Json => {
            let grid = paths[0].grid();
            let doc = output::PathsDoc {
                dt: grid.dt(),
                n_steps: grid.n_steps(),
                dim: paths[0].dim(),
                paths: paths
                    .iter()
                    .enumerate()
                    .map(|(r, p)| output::PathDump { replica: r as u64, values: p.values().to_vec() })
                    .collect(),
            };
            outputs.push(output::write_json(dir, doc_name, &doc)?);
        }
    }
    Ok(outputs)
}

fn cmd_sample(cli: &Cli, dir: &Path) -> Result<Artifacts, CliError> {
    let (cfg, path, text) = load_config(cli)?;
    let paths = draw_paths(&cfg)?;
    let grid = paths[0].grid();
    let mut outputs = persist_paths(dir, cli.format, "path", "paths.json", &paths)?;
    outputs.extend(report::render_plots(dir)?);
    println!(
        "sample: persisted {} of {} fBm paths ({}d, {} steps, dt {:.6})",
        paths.len(),
        cfg.replicas,
        paths[0].dim(),
        grid.n_steps(),
        grid.dt()
    );
    Ok(Artifacts {
        pass: true,
        seed: cfg.seed,
        outputs,
        stream_ranges: vec![StreamRange::new("fbm_paths", (0, paths.len() as u64))],
        config_path: Some(path),
        config: Some(text),
        generated_configs: Vec::new(),
    })
}

fn cmd_integrate(cli: &Cli, dir: &Path) -> Result<Artifacts, CliError> {
    let (cfg, path, text) = load_config(cli)?;
    let probes = validate_drift(&cfg.sde.drift, 256, 4.0, RngStream::new(cfg.seed, DRIFT_PROBE_STREAM));
    println!(
        "integrate: drift probes one-sided {:.4}, Lipschitz {:.4} over {} pairs",
        probes.one_sided_max, probes.lipschitz_max, probes.pairs
    );
    if !probes.pass {
        return Err(CliError::Failure(
            "drift probes violate the declared contraction or Lipschitz constant".into(),
        ));
    }
    let driving = draw_paths(&cfg)?;
    let trajectories = driving
        .iter()
        .map(|p| integrate(&cfg.sde, p))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = trajectories[0].grid();
    let mut outputs = persist_paths(dir, cli.format, "trajectory", "trajectories.json", &trajectories)?;
    outputs.extend(report::render_plots(dir)?);
    println!(
        "integrate: persisted {} trajectories ({}d, {} steps, dt {:.6})",
        trajectories.len(),
        trajectories[0].dim(),
        grid.n_steps(),
        grid.dt()
    );
    Ok(Artifacts {
        pass: true,
        seed: cfg.seed,
        outputs,
        stream_ranges: vec![
            StreamRange::new("fbm_paths", (0, trajectories.len() as u64)),
            StreamRange::new("drift_probes", (DRIFT_PROBE_STREAM, DRIFT_PROBE_STREAM + 1)),
        ],
        config_path: Some(path),
        config: Some(text),
        generated_configs: Vec::new(),
    })
}

fn cmd_bounds(cli: &Cli, dir: &Path) -> Result<Artifacts, CliError> {
    let (cfg, path, text) = load_config(cli)?;
    if cfg.n_list.iter().any(|&n| n < 2) {
        return Err(CliError::Usage("bounds needs every n_list entry >= 2".into()));
    }
    let h = cfg.hurst();
    let horizons: Vec<Horizon> = cfg
        .n_list
        .iter()
        .map(|&n| Horizon::Discrete(n))
        .chain(cfg.t_list.iter().map(|&t| Horizon::Continuous(t)))
        .collect();
    if horizons.is_empty() {
        return Err(CliError::Usage("bounds needs n_list or t_list to be non-empty".into()));
    }

    let mut psi_rows = Vec::new();
    for &hor in &horizons {
        let profile = sum_psi_squared(h, hor);
        let mut cum = 0.0;
        for (i, &psi) in profile.psi_values.iter().enumerate() {
            cum += psi * psi;
            psi_rows.push(output::PsiRow {
                h: h.value(),
                horizon: hor,
                k: i + 1,
                psi,
                psi_sq_cumsum: cum,
                growth_exponent: profile.growth_exponent,
            });
        }
    }

    let mut env_rows = Vec::new();
    for &hor in &horizons {
        let scale = match cfg.r_scale {
            RScale::Absolute => 1.0,
            RScale::Sigma => oracle_sigma(&cfg, hor, cfg.burn_in)?,
        };
        for &r in &cfg.r_list {
            let abs_r = r * scale;
            env_rows.push(output::EnvelopeRow {
                h: h.value(),
                horizon: hor,
                delta: cfg.delta,
                r_input: r,
                r: abs_r,
                envelope: occupation_envelope(h, hor, cfg.f.lip(), cfg.c_const, abs_r),
            });
        }
    }

    let mut outputs = Vec::new();
    match cli.format {
        Format::Csv => {
            outputs.push(output::write_text(dir, "psi.csv", &output::psi_csv(&psi_rows))?);
            outputs.push(output::write_text(dir, "envelopes.csv", &output::envelopes_csv(&env_rows))?);
            outputs.extend(report::render_plots(dir)?);
        }
        Format::Json => {
            let doc = output::BoundsDoc { psi: psi_rows.clone(), envelopes: env_rows.clone() };
            outputs.push(output::write_json(dir, "bounds.json", &doc)?);
        }
    }
    println!(
        "bounds: {} psi terms over {} horizons, {} envelope cells (c = {})",
        psi_rows.len(),
        horizons.len(),
        env_rows.len(),
        cfg.c_const
    );
    Ok(Artifacts {
        pass: true,
        seed: cfg.seed,
        outputs,
        stream_ranges: Vec::new(),
        config_path: Some(path),
        config: Some(text),
        generated_configs: Vec::new(),
    })
}

fn cmd_diagnose(cli: &Cli, dir: &Path) -> Result<Artifacts, CliError> {
    let (cfg, path, text) = load_config(cli)?;
    let h = cfg.hurst().value();

    // Increment second moments per averaging-block size, against the
    // |v - v'|^{2a} comparator the norm machinery assumes.
    let v_grid = [0.0, 0.0625, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0];
    let blocks = [1usize, 2, 4, 8, 16];
    let alpha = if h <= 0.5 { h } else { h / 2.0 };
    let specs = blocks
        .iter()
        .map(|&k| GProcessSpec::new(cfg.sde.kernel.clone(), k, v_grid.to_vec()).map(|s| (k, s)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut jobs = Vec::new();
    for (k, spec) in &specs {
        for i in 0..v_grid.len() {
            for j in (i + 1)..v_grid.len() {
                jobs.push((*k, spec, v_grid[j], v_grid[i]));
            }
        }
    }
    let gmoment_rows = jobs
        .par_iter()
        .map(|(k, spec, v, vp)| {
            let m2 = g_increment_second_moment(spec, *v, *vp)?;
            Ok(output::GMomentRow {
                v: *v,
                v_prime: *vp,
                k: *k,
                h,
                second_moment: m2,
                bound_ratio: m2 / (v - vp).abs().powf(2.0 * alpha),
            })
        })
        .collect::<Result<Vec<_>, DiagError>>()?;

    // Running-maximum tails and moments for the driving dimension.
    let dim = cfg.sde.x0.len();
    let n_paths = cfg.replicas.max(2);
    const SUP_STEPS: usize = 512;
    let (eta, eta_prime) = default_tail_constants(dim);
    let xs = [0.5, 1.0, 1.5, 2.0];
    let ps = [2u32, 4, 6, 8];
    let tails = sup_bm_tail_profile(&xs, dim, n_paths, SUP_STEPS, cfg.seed, 0);
    let moments = sup_bm_moments(&ps, dim, n_paths, SUP_STEPS, eta, eta_prime, cfg.seed, n_paths as u64);
    let mut sup_rows: Vec<output::SupRow> = tails
        .iter()
        .map(|t| output::SupRow {
            x: t.x,
            p: 0,
            estimate: t.norm_sup.value,
            stderr: t.norm_sup.stderr,
            comparator: t.exp_bound,
        })
        .collect();
    sup_rows.extend(moments.iter().map(|m| output::SupRow {
        x: 0.0,
        p: m.p,
        estimate: m.estimate.value,
        stderr: m.estimate.stderr,
        comparator: m.comparator,
    }));

    let mut outputs = Vec::new();
    match cli.format {
        Format::Csv => {
            outputs.push(output::write_text(dir, "gmoments.csv", &output::gmoments_csv(&gmoment_rows))?);
            outputs.push(output::write_text(dir, "supbm.csv", &output::supbm_csv(&sup_rows))?);
            outputs.extend(report::render_plots(dir)?);
        }
        Format::Json => {
            let doc = output::DiagnoseDoc { increments: gmoment_rows.clone(), sup: sup_rows.clone() };
            outputs.push(output::write_json(dir, "diagnose.json", &doc)?);
        }
    }
    let worst_ratio = gmoment_rows.iter().map(|r| r.bound_ratio).fold(0.0, f64::max);
    println!(
        "diagnose: {} increment cells (worst ratio {:.4}), sup tails/moments from {} paths of {} steps",
        gmoment_rows.len(),
        worst_ratio,
        n_paths,
        SUP_STEPS
    );
    Ok(Artifacts {
        pass: true,
        seed: cfg.seed,
        outputs,
        stream_ranges: vec![
            StreamRange::new("supbm_tails", (0, n_paths as u64)),
            StreamRange::new("supbm_moments", (n_paths as u64, 2 * n_paths as u64)),
        ],
        config_path: Some(path),
        config: Some(text),
        generated_configs: Vec::new(),
    })
}

fn cmd_verify(cli: &Cli, dir: &Path) -> Result<Artifacts, CliError> {
    if cli.config.is_some() {
        return Err(CliError::Usage("verify runs a fixed suite and takes no --config".into()));
    }
    let seed = cli.seed.unwrap_or(42);
    let report = run_verify(seed)?;

    for c in &report.checks {
        println!(
            "criterion {:>2} {} {}: {}",
            c.id,
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let passed = report.checks.iter().filter(|c| c.pass).count();
    println!("verify: {passed}/{} criteria passed at seed {seed}", report.checks.len());

    let mut outputs = Vec::new();
    match cli.format {
        Format::Csv => {
            outputs.push(output::write_text(dir, "criteria.csv", &output::criteria_csv(&report.checks))?);
            outputs.push(output::write_text(dir, "tails.csv", &output::tails_csv(&report.tails))?);
            outputs.push(output::write_text(dir, "exponents.csv", &output::exponents_csv(&report.exponents))?);
            outputs.push(output::write_text(dir, "domination.csv", &output::domination_csv(&report.domination))?);
            outputs.push(output::write_text(dir, "replicas.csv", &output::replicas_csv(&report.replica_blocks))?);
            outputs.extend(report::render_plots(dir)?);
        }
        Format::Json => {
            outputs.push(output::write_json(dir, "verify.json", &report)?);
        }
    }

    let mut ranges = vec![
        StreamRange::new(
            "sampler_cross_validation",
            (CROSS_VALIDATION_STREAMS, CROSS_VALIDATION_STREAMS + 20_000),
        ),
        StreamRange::new("reflection_tail", (REFLECTION_STREAMS, REFLECTION_STREAMS + 100_000)),
    ];
    for b in &report.replica_blocks {
        ranges.push(StreamRange::new(
            format!("occupation_tails H={} burn={}", b.h, b.burn_in),
            b.block,
        ));
    }
    for d in &report.domination {
        ranges.push(StreamRange::new(format!("domination_calibration H={}", d.h), d.calibration_block));
        ranges.push(StreamRange::new(format!("domination_evaluation H={}", d.h), d.evaluation_block));
    }

    Ok(Artifacts {
        pass: report.pass,
        seed,
        outputs,
        stream_ranges: ranges,
        config_path: None,
        config: None,
        generated_configs: report.configs,
    })
}

fn cmd_report(dir: &Path, out_given: bool) -> Result<bool, CliError> {
    if !out_given {
        return Err(CliError::Usage("report needs --out pointing at a run directory".into()));
    }
    if !dir.join("manifest.json").exists() {
        return Err(CliError::Usage(format!(
            "{} is not a run directory (no manifest.json)",
            dir.display()
        )));
    }
    print!("{}", report::summarize(dir)?);
    let plots = report::render_plots(dir)?;
    for p in &plots {
        println!("report: wrote {p}");
    }
    if plots.is_empty() {
        println!("report: no plottable tables found");
    }
    Ok(true)
}
