//! Command implementations behind the CLI front end, shared with the test
//! suites.

use crate::formats::{
    self, summary_header, summary_line, BoundMetrics, MetricsReport, PslMetrics, SummaryRow,
    FORMAT_VERSION,
};
use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use serde_json::json;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use webest_core::correlation::CorrelationSet;
use webest_core::driver::{
    make_weights, run_p_schedule, Method, SolverConfig, WeightSpec,
};
use webest_core::metrics::{
    islr_db_from, islr_lower_bound_db, psl_from, sparsity_from, welch_psl_bound,
};
use webest_core::surrogate::SmoothKind;
use webest_core::waveform::{PhaseConstraint, WaveformSet, WeightVector};

pub fn parse_alphabet(s: &str) -> Result<PhaseConstraint> {
    match s {
        "inf" => Ok(PhaseConstraint::Continuous),
        v => {
            let l: u32 = v
                .parse()
                .map_err(|_| anyhow!("alphabet must be a size >= 2 or 'inf', got {v:?}"))?;
            Ok(PhaseConstraint::Discrete(l))
        }
    }
}

pub fn parse_method(s: &str) -> Result<Method> {
    match s {
        "entry" => Ok(Method::Entry),
        "vector" => Ok(Method::Vector),
        v => bail!("method must be 'entry' or 'vector', got {v:?}"),
    }
}

/// `ones`, `band:K` (mask `|k| <= K`), or `file:PATH` with 2N-1 explicit
/// values in lag order.
pub fn parse_weight_spec(s: &str) -> Result<WeightSpec> {
    if s == "ones" {
        return Ok(WeightSpec::AllOnes);
    }
    if let Some(k) = s.strip_prefix("band:") {
        let k: isize = k.parse().map_err(|_| anyhow!("bad band width in {s:?}"))?;
        if k < 0 {
            bail!("band width must be >= 0");
        }
        return Ok(WeightSpec::Band { lo: -k, hi: k });
    }
    if let Some(path) = s.strip_prefix("file:") {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading weight file {path}"))?;
        let values: Vec<f64> = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<f64>().map_err(|_| anyhow!("bad weight value {f:?}")))
            .collect::<Result<_>>()?;
        return Ok(WeightSpec::Explicit(values));
    }
    bail!("weights must be 'ones', 'band:K' or 'file:PATH', got {s:?}")
}

fn alphabet_label(c: PhaseConstraint) -> String {
    match c {
        PhaseConstraint::Continuous => "inf".into(),
        PhaseConstraint::Discrete(l) => l.to_string(),
    }
}

/// Evaluate the full metric bundle of a waveform set.
pub fn compute_report(
    x: &WaveformSet,
    w: &WeightVector,
    alphabet: PhaseConstraint,
    config: Option<serde_json::Value>,
    total_ms: Option<f64>,
) -> Result<MetricsReport> {
    let corr = CorrelationSet::compute(x);
    let m = x.transmitters();
    let n = x.len();
    let psl_abs = psl_from(&corr, w);
    let psl_norm = psl_abs / n as f64;
    let welch_norm = welch_psl_bound(m, n).map_err(|e| anyhow!("{e}"))?;
    Ok(MetricsReport {
        format_version: FORMAT_VERSION,
        transmitters: m,
        length: n,
        alphabet: alphabet_label(alphabet),
        psl: PslMetrics {
            abs: psl_abs,
            abs_db: 20.0 * psl_abs.log10(),
            norm: psl_norm,
            norm_db: 20.0 * psl_norm.log10(),
        },
        islr_db: islr_db_from(&corr, w),
        sparsity: sparsity_from(&corr, 1.0),
        bounds: BoundMetrics {
            welch_psl_norm: welch_norm,
            welch_psl_abs: welch_norm * n as f64,
            islr_lower_db: islr_lower_bound_db(m).ok(),
        },
        config,
        total_ms,
    })
}

#[derive(Debug, Clone)]
pub struct DesignArgs {
    pub transmitters: usize,
    pub length: usize,
    pub alphabet: PhaseConstraint,
    pub method: Method,
    pub p_schedule: Vec<f64>,
    pub smooth_h: u8,
    pub epsilon: f64,
    pub zeta: f64,
    pub max_iters: usize,
    pub weights: WeightSpec,
    pub seed: u64,
    pub record_every: usize,
    pub out: PathBuf,
}

impl DesignArgs {
    pub fn to_config(&self) -> Result<SolverConfig> {
        let mut c = SolverConfig::new(self.transmitters, self.length, self.alphabet, self.method);
        c.p_schedule = self.p_schedule.clone();
        c.smooth = SmoothKind::from_index(self.smooth_h).map_err(|e| anyhow!("{e}"))?;
        c.epsilon = self.epsilon;
        c.zeta = self.zeta;
        c.max_iters = self.max_iters;
        c.weights = self.weights.clone();
        c.seed = self.seed;
        c.record_every = self.record_every;
        c.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(c)
    }

    fn config_echo(&self) -> serde_json::Value {
        json!({
            "transmitters": self.transmitters,
            "length": self.length,
            "alphabet": alphabet_label(self.alphabet),
            "method": match self.method { Method::Entry => "entry", Method::Vector => "vector" },
            "p_schedule": self.p_schedule,
            "smooth_h": self.smooth_h,
            "epsilon": self.epsilon,
            "zeta": self.zeta,
            "max_iters": self.max_iters,
            "weights": format!("{:?}", self.weights),
            "seed": self.seed,
            "record_every": self.record_every,
        })
    }
}

/// Run one design and write `phases.csv`, `metrics.json` and `trace.csv`.
pub fn run_design(args: &DesignArgs) -> Result<MetricsReport> {
    let config = args.to_config()?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    let started = Instant::now();
    let (x, traces) = run_p_schedule(&config, None).map_err(|e| anyhow!("{e}"))?;
    let total_ms = started.elapsed().as_secs_f64() * 1e3;

    let alphabet = match args.alphabet {
        PhaseConstraint::Continuous => None,
        PhaseConstraint::Discrete(l) => Some(l),
    };
    formats::write_phases(&args.out.join("phases.csv"), &x, alphabet)?;
    formats::write_trace(&args.out.join("trace.csv"), &traces)?;
    let w = make_weights(&config.weights, config.n).map_err(|e| anyhow!("{e}"))?;
    let report = compute_report(&x, &w, args.alphabet, Some(args.config_echo()), Some(total_ms))?;
    formats::write_metrics(&args.out.join("metrics.json"), &report)?;
    Ok(report)
}

/// Pure evaluation of an existing phases file; no optimization.
pub fn run_metrics(
    input: &Path,
    weights: &WeightSpec,
    out: Option<&Path>,
) -> Result<MetricsReport> {
    let (x, alphabet) = formats::read_phases(input)?;
    let constraint = match alphabet {
        Some(l) => PhaseConstraint::Discrete(l),
        None => PhaseConstraint::Continuous,
    };
    let w = make_weights(weights, x.len()).map_err(|e| anyhow!("{e}"))?;
    let report = compute_report(&x, &w, constraint, None, None)?;
    if let Some(path) = out {
        formats::write_metrics(path, &report)?;
    }
    Ok(report)
}

/// Grid specification for `webest sweep`: the Cartesian product of the
/// array-valued fields, each cell run over the trial seeds.
#[derive(Debug, Clone, Deserialize)]
pub struct SweepSpec {
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub alphabet: Vec<String>,
    #[serde(default = "default_methods")]
    pub method: Vec<String>,
    #[serde(default = "default_schedules")]
    pub p_schedule: Vec<Vec<f64>>,
    #[serde(default = "default_weights")]
    pub weights: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_smooth_h")]
    pub smooth_h: u8,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_methods() -> Vec<String> {
    vec!["entry".into()]
}
fn default_schedules() -> Vec<Vec<f64>> {
    vec![vec![2.0]]
}
fn default_weights() -> String {
    "ones".into()
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_zeta() -> f64 {
    1e-9
}
fn default_max_iters() -> usize {
    100_000
}
fn default_smooth_h() -> u8 {
    1
}

struct TrialOutcome {
    psl_abs: f64,
    islr_db: f64,
    sparsity: f64,
    wall_ms: f64,
}

fn agg(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, f64) {
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        count += 1;
        sum += v;
        min = min.min(v);
        max = max.max(v);
    }
    (sum / count as f64, min, max)
}

/// Run every cell of the grid, `trials` seeded runs per cell (parallel
/// across trials, capped by `WEBEST_THREADS`), appending one aggregated row
/// per cell to `summary.csv` as soon as the cell completes.
pub fn run_sweep(spec_path: &Path, trials: usize, out_dir: &Path) -> Result<PathBuf> {
    if trials < 1 {
        bail!("trial count must be >= 1");
    }
    let text = fs::read_to_string(spec_path)
        .with_context(|| format!("reading sweep spec {}", spec_path.display()))?;
    let spec: SweepSpec = serde_json::from_str(&text).context("parsing sweep spec")?;
    fs::create_dir_all(out_dir)?;
    let summary_path = out_dir.join("summary.csv");

    // enumerate and validate the whole grid before burning any compute
    let mut cells: Vec<DesignArgs> = Vec::new();
    for &m in &spec.m {
        for &n in &spec.n {
            for alphabet in &spec.alphabet {
                for method in &spec.method {
                    for schedule in &spec.p_schedule {
                        let args = DesignArgs {
                            transmitters: m,
                            length: n,
                            alphabet: parse_alphabet(alphabet)?,
                            method: parse_method(method)?,
                            p_schedule: schedule.clone(),
                            smooth_h: spec.smooth_h,
                            epsilon: spec.epsilon,
                            zeta: spec.zeta,
                            max_iters: spec.max_iters,
                            weights: parse_weight_spec(&spec.weights)?,
                            seed: spec.base_seed,
                            record_every: usize::MAX / 2,
                            out: out_dir.to_path_buf(),
                        };
                        args.to_config()
                            .with_context(|| format!("invalid sweep cell {args:?}"))?;
                        cells.push(args);
                    }
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep_threads())
        .build()
        .context("building sweep thread pool")?;

    let mut file = fs::File::create(&summary_path)?;
    file.write_all(summary_header().as_bytes())?;
    file.flush()?;
    for cell in &cells {
        let config = cell.to_config()?;
        let w = make_weights(&config.weights, config.n).map_err(|e| anyhow!("{e}"))?;
        let outcomes: Vec<Result<TrialOutcome>> = pool.install(|| {
            use rayon::prelude::*;
            (0..trials as u64)
                .into_par_iter()
                .map(|i| {
                    let mut c = config.clone();
                    c.seed = spec.base_seed + i;
                    let started = Instant::now();
                    let (x, _) = run_p_schedule(&c, None).map_err(|e| anyhow!("{e}"))?;
                    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
                    let corr = CorrelationSet::compute(&x);
                    Ok(TrialOutcome {
                        psl_abs: psl_from(&corr, &w),
                        islr_db: islr_db_from(&corr, &w),
                        sparsity: sparsity_from(&corr, 1.0),
                        wall_ms,
                    })
                })
                .collect()
        });
        let outcomes: Vec<TrialOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
        let welch_norm = welch_psl_bound(cell.transmitters, cell.length)
            .map_err(|e| anyhow!("{e}"))?;
        let psl_abs = agg(outcomes.iter().map(|o| o.psl_abs));
        let row = SummaryRow {
            m: cell.transmitters,
            n: cell.length,
            alphabet: alphabet_label(cell.alphabet),
            method: match cell.method {
                Method::Entry => "entry".into(),
                Method::Vector => "vector".into(),
            },
            p_schedule: cell
                .p_schedule
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            trials,
            psl_abs,
            psl_norm_mean: psl_abs.0 / cell.length as f64,
            islr_db: agg(outcomes.iter().map(|o| o.islr_db)),
            sparsity: agg(outcomes.iter().map(|o| o.sparsity)),
            wall_ms: agg(outcomes.iter().map(|o| o.wall_ms)),
            welch_psl_norm: welch_norm,
            welch_psl_abs: welch_norm * cell.length as f64,
            islr_lower_db: islr_lower_bound_db(cell.transmitters).ok(),
        };
        file.write_all(summary_line(&row).as_bytes())?;
        file.flush()?;
    }
    Ok(summary_path)
}

/// `WEBEST_THREADS` caps sweep parallelism; unset or unparsable falls back
/// to the machine's core count.
fn sweep_threads() -> usize {
    std::env::var("WEBEST_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}
