//! Full-run orchestration: cyclic block sweeps, p-schedules with warm
//! starts, stopping rules, and per-iteration trace recording.

use crate::correlation::CorrelationSet;
use crate::entry::{entry_sweep, EntryRegime};
use crate::error::{Error, Result};
use crate::init::random_mpsk_init;
use crate::metrics::{
    islr_db_from, lp_objective_from, psl_from, smooth_objective_from, sparsity_from,
};
use crate::surrogate::SmoothKind;
use crate::vector::{vector_sweep, LineSearchParams, VectorRegime};
use crate::waveform::{PhaseConstraint, WaveformSet, WeightVector};
use std::time::Instant;

/// Block update granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Entry,
    Vector,
}

/// How the lag weights are specified.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    AllOnes,
    /// Binary mask: `w_k = 1` iff `lo <= k <= hi`.
    Band { lo: isize, hi: isize },
    /// Arbitrary values in `[0, 1]`, lag order `-N+1 ..= N-1`.
    Explicit(Vec<f64>),
}

/// Materialize a weight specification for sequence length `n`.
pub fn make_weights(spec: &WeightSpec, n: usize) -> Result<WeightVector> {
    match spec {
        WeightSpec::AllOnes => Ok(WeightVector::all_ones(n)),
        WeightSpec::Band { lo, hi } => {
            let edge = n as isize - 1;
            if *lo > *hi || *lo < -edge || *hi > edge {
                return Err(Error::arg(format!(
                    "band [{lo}, {hi}] must lie within [-{edge}, {edge}]"
                )));
            }
            let w = (-edge..=edge)
                .map(|k| if (*lo..=*hi).contains(&k) { 1.0 } else { 0.0 })
                .collect();
            WeightVector::new(n, w)
        }
        WeightSpec::Explicit(values) => WeightVector::new(n, values.clone()),
    }
}

/// Full experiment description for one design run.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub m: usize,
    pub n: usize,
    pub constraint: PhaseConstraint,
    pub method: Method,
    /// Strictly monotone (either direction) or singleton.
    pub p_schedule: Vec<f64>,
    /// Smooth family used by the stages with `p <= 1`.
    pub smooth: SmoothKind,
    pub epsilon: f64,
    /// Stop a stage when the sweep-to-sweep Frobenius change drops to this.
    pub zeta: f64,
    pub max_iters: usize,
    pub weights: WeightSpec,
    pub seed: u64,
    /// Trace recording stride (first and last sweeps always recorded).
    pub record_every: usize,
    pub line_search: LineSearchParams,
}

impl SolverConfig {
    pub fn new(m: usize, n: usize, constraint: PhaseConstraint, method: Method) -> Self {
        SolverConfig {
            m,
            n,
            constraint,
            method,
            p_schedule: vec![2.0],
            smooth: SmoothKind::Power,
            epsilon: crate::surrogate::DEFAULT_EPSILON,
            zeta: 1e-9,
            max_iters: 100_000,
            weights: WeightSpec::AllOnes,
            seed: 0,
            record_every: 1,
            line_search: LineSearchParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.n < 2 {
            return Err(Error::arg("config requires M >= 1 and N >= 2"));
        }
        self.constraint.validate()?;
        if self.p_schedule.is_empty() {
            return Err(Error::arg("p schedule must not be empty"));
        }
        if self.p_schedule.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::arg("every scheduled p must be > 0"));
        }
        if self.p_schedule.len() > 1 {
            let inc = self.p_schedule.windows(2).all(|w| w[0] < w[1]);
            let dec = self.p_schedule.windows(2).all(|w| w[0] > w[1]);
            if !inc && !dec {
                return Err(Error::arg("p schedule must be strictly monotone"));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::arg("epsilon must be > 0"));
        }
        if !(self.zeta > 0.0) {
            return Err(Error::arg("zeta must be > 0"));
        }
        if self.max_iters == 0 {
            return Err(Error::arg("max_iters must be >= 1"));
        }
        if self.record_every == 0 {
            return Err(Error::arg("record_every must be >= 1"));
        }
        self.line_search.validate()?;
        for &p in &self.p_schedule {
            self.stage_kind(p)?;
        }
        Ok(())
    }

    /// Resolve the solver path for one scheduled `p`.
    fn stage_kind(&self, p: f64) -> Result<StageKind> {
        match (self.method, self.constraint) {
            (Method::Entry, PhaseConstraint::Discrete(l)) => {
                Ok(StageKind::Entry(EntryRegime::Discrete { l, p }))
            }
            (Method::Vector, PhaseConstraint::Discrete(_)) => Err(Error::arg(
                "the vector method has no discrete-phase path; use the entry method",
            )),
            (Method::Entry, PhaseConstraint::Continuous) => {
                if p >= 2.0 {
                    Ok(StageKind::Entry(EntryRegime::Pge2 { p }))
                } else if p <= 1.0 {
                    Ok(StageKind::Entry(EntryRegime::LowP {
                        p,
                        kind: self.smooth,
                        eps: self.epsilon,
                    }))
                } else {
                    Err(Error::arg(format!(
                        "continuous-phase stages support p in (0, 1] or p >= 2, got {p}"
                    )))
                }
            }
            (Method::Vector, PhaseConstraint::Continuous) => {
                if p >= 2.0 {
                    Ok(StageKind::Vector(VectorRegime::Lp { p }))
                } else if p <= 1.0 {
                    Ok(StageKind::Vector(VectorRegime::Smooth {
                        p,
                        kind: self.smooth,
                        eps: self.epsilon,
                    }))
                } else {
                    Err(Error::arg(format!(
                        "vector stages support p in (0, 1] or p >= 2, got {p}"
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum StageKind {
    Entry(EntryRegime),
    Vector(VectorRegime),
}

impl StageKind {
    /// Whether the quantity the stage drives downward is the smooth
    /// approximation rather than the lp objective itself.
    fn tracks_smooth(&self) -> Option<(f64, SmoothKind, f64)> {
        match self {
            StageKind::Entry(EntryRegime::LowP { p, kind, eps }) => Some((*p, *kind, *eps)),
            StageKind::Vector(VectorRegime::Smooth { p, kind, eps }) => Some((*p, *kind, *eps)),
            _ => None,
        }
    }
}

/// One recorded solver state. `surrogate_obj` is the stage's own objective
/// (the smooth approximation on low-p continuous stages, the lp objective
/// everywhere else); it is non-increasing within a stage. All metrics are
/// recomputed from scratch, decoupled from solver caches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub surrogate_obj: f64,
    pub true_obj: f64,
    pub psl: f64,
    pub islr_db: f64,
    pub sparsity: f64,
    pub delta_x: f64,
    pub wall_ms: f64,
}

/// Per-stage convergence record.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub p: f64,
    pub stop: StopReason,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIters,
}

/// Frobenius stopping rule, checked once per outer sweep: stop as converged
/// when `||X^{i+1} - X^{i}||_F <= zeta`, or on the iteration budget.
pub fn stopping_check(
    x_prev: &WaveformSet,
    x_next: &WaveformSet,
    iter: usize,
    config: &SolverConfig,
) -> Option<StopReason> {
    if x_next.frobenius_distance(x_prev) <= config.zeta {
        Some(StopReason::Converged)
    } else if iter >= config.max_iters {
        Some(StopReason::MaxIters)
    } else {
        None
    }
}

/// Run one p-stage to convergence from a feasible starting set.
pub fn run_stage(config: &SolverConfig, p: f64, x0: &WaveformSet) -> Result<(WaveformSet, RunTrace)> {
    config.validate()?;
    let kind = config.stage_kind(p)?;
    if x0.transmitters() != config.m || x0.len() != config.n {
        return Err(Error::arg("starting set shape does not match the config"));
    }
    x0.check_feasible(config.constraint)?;
    let w = make_weights(&config.weights, config.n)?;

    let started = Instant::now();
    let mut x = x0.clone();
    let mut corr = CorrelationSet::compute(&x);
    let mut records = Vec::new();
    let record = |records: &mut Vec<TraceRecord>,
                  x: &WaveformSet,
                  iter: usize,
                  delta_x: f64|
     -> Result<()> {
        let fresh = CorrelationSet::compute(x);
        let true_obj = lp_objective_from(&fresh, &w, p, false)?;
        let surrogate_obj = match kind.tracks_smooth() {
            Some((sp, kind, eps)) => smooth_objective_from(&fresh, &w, kind, eps, sp)?,
            None => true_obj,
        };
        records.push(TraceRecord {
            iter,
            surrogate_obj,
            true_obj,
            psl: psl_from(&fresh, &w),
            islr_db: islr_db_from(&fresh, &w),
            sparsity: sparsity_from(&fresh, 1.0),
            delta_x,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        Ok(())
    };

    record(&mut records, &x, 0, f64::NAN)?;
    let mut iter = 0usize;
    let stop = loop {
        iter += 1;
        let x_prev = x.clone();
        match kind {
            StageKind::Entry(regime) => {
                // re-sync the incremental cache once per outer sweep
                corr = CorrelationSet::compute(&x);
                entry_sweep(&mut x, &mut corr, &w, regime)?;
            }
            StageKind::Vector(regime) => {
                vector_sweep(&mut x, &mut corr, &w, regime, &config.line_search)?;
            }
        }
        let decision = stopping_check(&x_prev, &x, iter, config);
        if decision.is_some() || iter % config.record_every == 0 {
            record(&mut records, &x, iter, x.frobenius_distance(&x_prev))?;
        }
        if let Some(reason) = decision {
            break reason;
        }
    };
    Ok((x, RunTrace { p, stop, records }))
}

/// Run the whole p-schedule, warm-starting each stage from the previous
/// stage's output. Without an explicit start the seeded random initial set
/// is drawn from the config.
pub fn run_p_schedule(
    config: &SolverConfig,
    x0: Option<WaveformSet>,
) -> Result<(WaveformSet, Vec<RunTrace>)> {
    config.validate()?;
    let mut x = match x0 {
        Some(x) => x,
        None => random_mpsk_init(config.m, config.n, config.constraint, config.seed)?,
    };
    let mut traces = Vec::with_capacity(config.p_schedule.len());
    for &p in &config.p_schedule {
        let (next, trace) = run_stage(config, p, &x)?;
        x = next;
        traces.push(trace);
    }
    Ok((x, traces))
}
