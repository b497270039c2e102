//! Stable on-disk formats: `phases.csv`, `metrics.json`, `trace.csv` and
//! `summary.csv`. Every file carries a format version; a mismatch is a hard
//! error, never a silent reinterpretation.
//!
//! `phases.csv` is the canonical sequence representation: `M` rows of `N`
//! comma-separated phases in radians, printed with 17 significant digits so
//! parsing and re-serializing is bit-stable. The alphabet, when finite, is
//! declared in a `# alphabet=L` header line.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use webest_core::driver::RunTrace;
use webest_core::waveform::{PhaseConstraint, WaveformSet};

pub const FORMAT_VERSION: u32 = 1;
const PHASES_MAGIC: &str = "# webest phases v1";
const TRACE_MAGIC: &str = "# webest trace v1";
const SUMMARY_MAGIC: &str = "# webest summary v1";

/// 17-significant-digit scientific notation: round-trips f64 exactly.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_phases(path: &Path, x: &WaveformSet, alphabet: Option<u32>) -> Result<()> {
    let mut out = String::new();
    out.push_str(PHASES_MAGIC);
    out.push('\n');
    match alphabet {
        Some(l) => writeln!(out, "# alphabet={l}").unwrap(),
        None => out.push_str("# alphabet=inf\n"),
    }
    for t in 0..x.transmitters() {
        let row: Vec<String> = x.row_phases(t).iter().map(|&p| fmt_f64(p)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_phases(path: &Path) -> Result<(WaveformSet, Option<u32>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim() == PHASES_MAGIC => {}
        Some(l) if l.starts_with("# webest phases") => {
            bail!("unsupported phases format version: {l:?} (expected {PHASES_MAGIC:?})")
        }
        other => bail!("not a webest phases file: first line {other:?}"),
    }
    let mut alphabet: Option<u32> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let display_line = lineno + 2;
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(val) = rest.strip_prefix("alphabet=") {
                alphabet = match val {
                    "inf" => None,
                    v => Some(v.parse().map_err(|_| {
                        anyhow!("line {display_line}: bad alphabet value {v:?}")
                    })?),
                };
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                anyhow!("line {display_line}, column {}: unparseable value {field:?}", col + 1)
            })?;
            if !v.is_finite() {
                bail!(
                    "line {display_line}, column {}: non-finite phase (entry off the unit circle)",
                    col + 1
                );
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                bail!(
                    "line {display_line}: expected {} columns, found {}",
                    first.len(),
                    row.len()
                );
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("phases file contains no data rows");
    }
    let m = rows.len();
    let n = rows[0].len();
    let x = WaveformSet::from_phases(m, n, rows.concat())
        .map_err(|e| anyhow!("invalid waveform set: {e}"))?;
    if let Some(l) = alphabet {
        x.check_feasible(PhaseConstraint::Discrete(l))
            .map_err(|e| anyhow!("declared alphabet {l} violated: {e}"))?;
    }
    Ok((x, alphabet))
}

/// Per-stage trace rows. Wall-clock timing deliberately stays out of this
/// file so identical configs reproduce it byte-for-byte; total runtime is
/// reported in `metrics.json`.
pub fn write_trace(path: &Path, traces: &[RunTrace]) -> Result<()> {
    let mut out = String::new();
    out.push_str(TRACE_MAGIC);
    out.push('\n');
    out.push_str("stage_p,iter,surrogate_obj,true_obj,psl,islr_db,sparsity,delta_x\n");
    for tr in traces {
        for r in &tr.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                tr.p,
                r.iter,
                fmt_f64(r.surrogate_obj),
                fmt_f64(r.true_obj),
                fmt_f64(r.psl),
                fmt_f64(r.islr_db),
                fmt_f64(r.sparsity),
                fmt_f64(r.delta_x),
            )
            .unwrap();
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PslMetrics {
    pub abs: f64,
    pub abs_db: f64,
    /// PSL divided by N, the scale of the Welch bound.
    pub norm: f64,
    pub norm_db: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundMetrics {
    pub welch_psl_norm: f64,
    pub welch_psl_abs: f64,
    pub islr_lower_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsReport {
    pub format_version: u32,
    pub transmitters: usize,
    pub length: usize,
    /// `"inf"` or the alphabet size.
    pub alphabet: String,
    pub psl: PslMetrics,
    pub islr_db: f64,
    /// Fraction of correlation lags below magnitude 1.
    pub sparsity: f64,
    pub bounds: BoundMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_ms: Option<f64>,
}

pub fn write_metrics(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_metrics(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report: MetricsReport = serde_json::from_str(&text)?;
    if report.format_version != FORMAT_VERSION {
        bail!(
            "metrics format version {} unsupported (expected {FORMAT_VERSION})",
            report.format_version
        );
    }
    Ok(report)
}

/// One aggregated sweep row.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub m: usize,
    pub n: usize,
    pub alphabet: String,
    pub method: String,
    pub p_schedule: String,
    pub trials: usize,
    pub psl_abs: (f64, f64, f64),
    pub psl_norm_mean: f64,
    pub islr_db: (f64, f64, f64),
    pub sparsity: (f64, f64, f64),
    pub wall_ms: (f64, f64, f64),
    pub welch_psl_norm: f64,
    pub welch_psl_abs: f64,
    pub islr_lower_db: Option<f64>,
}

pub fn summary_header() -> String {
    format!(
        "{SUMMARY_MAGIC}\nm,n,alphabet,method,p_schedule,trials,\
         psl_abs_mean,psl_abs_min,psl_abs_max,psl_norm_mean,\
         islr_db_mean,islr_db_min,islr_db_max,\
         sparsity_mean,sparsity_min,sparsity_max,\
         wall_ms_mean,wall_ms_min,wall_ms_max,\
         welch_psl_norm,welch_psl_abs,islr_lower_db\n"
    )
}

pub fn summary_line(row: &SummaryRow) -> String {
    let islr_bound = row
        .islr_lower_db
        .map(|v| fmt_f64(v))
        .unwrap_or_else(|| "nan".to_string());
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{},{},{}\n",
        row.m,
        row.n,
        row.alphabet,
        row.method,
        row.p_schedule,
        row.trials,
        fmt_f64(row.psl_abs.0),
        fmt_f64(row.psl_abs.1),
        fmt_f64(row.psl_abs.2),
        fmt_f64(row.psl_norm_mean),
        fmt_f64(row.islr_db.0),
        fmt_f64(row.islr_db.1),
        fmt_f64(row.islr_db.2),
        fmt_f64(row.sparsity.0),
        fmt_f64(row.sparsity.1),
        fmt_f64(row.sparsity.2),
        row.wall_ms.0,
        row.wall_ms.1,
        row.wall_ms.2,
        fmt_f64(row.welch_psl_norm),
        fmt_f64(row.welch_psl_abs),
        islr_bound,
    )
}
