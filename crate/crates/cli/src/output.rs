//! Run-directory persistence: CSV tables, JSON documents, the manifest.
//!
//! Floats print as `{:.16e}` so equal numbers give equal bytes; byte
//! equality of two tables then means numeric equality cell by cell.

use std::fs;
use std::io;
use std::path::Path;

use fbm_lab_core::{CheckOutcome, DominationReport, ExponentRow, Horizon, NamedConfig, ReplicaBlock, SamplePath, TailRow};
use serde::Serialize;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Horizon key for one CSV cell: n prints as a plain integer, T in full
/// precision.
pub fn fmt_horizon(h: Horizon) -> String {
    match h {
        Horizon::Discrete(n) => n.to_string(),
        Horizon::Continuous(t) => fmt_f64(t),
    }
}

/// The free-text detail column must not break the table shape.
fn sanitize(detail: &str) -> String {
    detail.replace(',', ";").replace('\n', " ")
}

pub fn write_text(dir: &Path, name: &str, content: &str) -> io::Result<String> {
    fs::write(dir.join(name), content)?;
    Ok(name.to_string())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> io::Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    write_text(dir, name, &text)
}

/// Half-open ChaCha stream-id region consumed by a run, recorded so a rerun
/// can avoid or exactly reproduce it.
#[derive(Debug, Clone, Serialize)]
pub struct StreamRange {
    pub label: String,
    pub start: u64,
    pub stop: u64,
}

impl StreamRange {
    pub fn new(label: impl Into<String>, block: (u64, u64)) -> Self {
        Self { label: label.into(), start: block.0, stop: block.1 }
    }
}

/// Everything needed to audit or reproduce a run directory. Wall time lives
/// here and only here; result tables stay timing-free so equal seeds give
/// equal bytes.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Worker threads as resolved from --threads / FBM_LAB_THREADS; absent
    /// means the library default (one per core).
    pub threads: Option<usize>,
    pub format: String,
    pub config_path: Option<String>,
    /// Verbatim text of the config the run used.
    pub config: Option<String>,
    /// Configs the run synthesized itself (the verify suite does).
    pub generated_configs: Vec<NamedConfig>,
    pub stream_ranges: Vec<StreamRange>,
    pub outputs: Vec<String>,
    pub pass: bool,
    pub wall_time_seconds: f64,
}

pub fn criteria_csv(checks: &[CheckOutcome]) -> String {
    let mut out = String::from("id,name,pass,detail\n");
    for c in checks {
        out.push_str(&format!("{},{},{},{}\n", c.id, c.name, c.pass, sanitize(&c.detail)));
    }
    out
}

pub fn tails_csv(rows: &[TailRow]) -> String {
    let mut out = String::from("H,n_or_T,delta,r,estimate,stderr,envelope,censored\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(row.h),
            fmt_horizon(row.horizon),
            fmt_f64(row.delta),
            fmt_f64(row.r),
            fmt_f64(row.estimate),
            fmt_f64(row.stderr),
            fmt_f64(row.envelope),
            row.censored,
        ));
    }
    out
}

pub fn exponents_csv(rows: &[ExponentRow]) -> String {
    let mut out = String::from("H,quantity,slope,slope_stderr,target\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(row.h),
            row.quantity,
            fmt_f64(row.slope),
            fmt_f64(row.slope_stderr),
            fmt_f64(row.target),
        ));
    }
    out
}

pub fn domination_csv(reports: &[DominationReport]) -> String {
    let mut out = String::from("H,calibrated_c,n,r,estimate,lower_bound,envelope,pass\n");
    for rep in reports {
        for cell in &rep.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                fmt_f64(rep.h),
                fmt_f64(rep.calibrated_c),
                cell.n,
                fmt_f64(cell.r),
                fmt_f64(cell.tail_estimate),
                fmt_f64(cell.lower_bound),
                fmt_f64(cell.envelope),
                cell.pass,
            ));
        }
    }
    out
}

pub fn replicas_csv(blocks: &[ReplicaBlock]) -> String {
    let mut out = String::from("H,n_or_T,burn_in,stream,value\n");
    for b in blocks {
        for (i, v) in b.values.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(b.h),
                fmt_horizon(b.horizon),
                b.burn_in,
                b.block.0 + i as u64,
                fmt_f64(*v),
            ));
        }
    }
    out
}

/// One psi term of a bound profile.
#[derive(Debug, Clone, Serialize)]
pub struct PsiRow {
    pub h: f64,
    pub horizon: Horizon,
    pub k: usize,
    pub psi: f64,
    pub psi_sq_cumsum: f64,
    pub growth_exponent: f64,
}

pub fn psi_csv(rows: &[PsiRow]) -> String {
    let mut out = String::from("H,n_or_T,k,psi,psi_sq_cumsum,growth_exponent\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(row.h),
            fmt_horizon(row.horizon),
            row.k,
            fmt_f64(row.psi),
            fmt_f64(row.psi_sq_cumsum),
            fmt_f64(row.growth_exponent),
        ));
    }
    out
}

/// One concentration-envelope evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeRow {
    pub h: f64,
    pub horizon: Horizon,
    pub delta: f64,
    pub r_input: f64,
    pub r: f64,
    pub envelope: f64,
}

pub fn envelopes_csv(rows: &[EnvelopeRow]) -> String {
    let mut out = String::from("H,n_or_T,delta,r_input,r,envelope\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(row.h),
            fmt_horizon(row.horizon),
            fmt_f64(row.delta),
            fmt_f64(row.r_input),
            fmt_f64(row.r),
            fmt_f64(row.envelope),
        ));
    }
    out
}

/// One increment second-moment cell of the Gaussian diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct GMomentRow {
    pub v: f64,
    pub v_prime: f64,
    pub k: usize,
    pub h: f64,
    pub second_moment: f64,
    pub bound_ratio: f64,
}

pub fn gmoments_csv(rows: &[GMomentRow]) -> String {
    let mut out = String::from("v,v_prime,k,H,second_moment,bound_ratio\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(row.v),
            fmt_f64(row.v_prime),
            row.k,
            fmt_f64(row.h),
            fmt_f64(row.second_moment),
            fmt_f64(row.bound_ratio),
        ));
    }
    out
}

/// One running-maximum cell: tail rows carry p = 0, moment rows x = 0.
#[derive(Debug, Clone, Serialize)]
pub struct SupRow {
    pub x: f64,
    pub p: u32,
    pub estimate: f64,
    pub stderr: f64,
    pub comparator: f64,
}

pub fn supbm_csv(rows: &[SupRow]) -> String {
    let mut out = String::from("x,p,estimate,stderr,comparator\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(row.x),
            row.p,
            fmt_f64(row.estimate),
            fmt_f64(row.stderr),
            fmt_f64(row.comparator),
        ));
    }
    out
}

/// Path export in the `t,comp_0,...` schema, one file per replica.
pub fn path_csv(path: &SamplePath) -> String {
    let mut buf = Vec::new();
    path.write_csv(&mut buf).expect("write to Vec cannot fail");
    String::from_utf8(buf).expect("path CSV is ASCII")
}

/// JSON mirror of a persisted path set.
#[derive(Debug, Serialize)]
pub struct PathsDoc {
    pub dt: f64,
    pub n_steps: usize,
    pub dim: usize,
    pub paths: Vec<PathDump>,
}

#[derive(Debug, Serialize)]
pub struct PathDump {
    pub replica: u64,
    /// Point-major flat values, (n_steps + 1) * dim of them.
    pub values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct BoundsDoc {
    pub psi: Vec<PsiRow>,
    pub envelopes: Vec<EnvelopeRow>,
}

#[derive(Debug, Serialize)]
pub struct DiagnoseDoc {
    pub increments: Vec<GMomentRow>,
    pub sup: Vec<SupRow>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detail_separators_are_rewritten() {
        assert_eq!(sanitize("a,b\nc"), "a;b c");
    }

    #[test]
    fn horizon_cells_distinguish_n_from_t() {
        assert_eq!(fmt_horizon(Horizon::Discrete(64)), "64");
        assert!(fmt_horizon(Horizon::Continuous(2.0)).starts_with("2.0000000000000000e0"));
    }
}
