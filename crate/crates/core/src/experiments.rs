//! Monte Carlo estimation over independent seeded trials.
//!
//! Trial `i` of a plan always draws from substream `(master_seed, i)` and
//! results are reduced in trial order, so every estimate is bit-identical for
//! any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{
    self, core_correct_lower_bound, core_ert_upper_bound, pacore_correct_lower_bound, pacore_ert_upper_bound,
    AnalyticsError, CorrectnessTarget,
};
use crate::kernel::{exponential_draw_pair, sample_delay, DelaySource, DelaySpec, KernelError, Rate, RngStream, StreamDomain};
use crate::protocols::{simulate, ProtocolConfig, ProtocolError, ProtocolKind};
use crate::report::{CutoffRow, ReportRow, Verdict};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Slack, in standard errors, for comparing a sample mean with a bound.
pub const BOUND_SLACK_SE: f64 = 3.0;

pub const MIN_TRIALS: u64 = 100;

/// Master seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5EED_2016;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("at least {min} trials are required, got {got}")]
    TooFewTrials { got: u64, min: u64 },
    #[error("worker count must be at least 1")]
    ZeroWorkers,
    #[error("bound comparison requires exponential delays")]
    NotExponential,
    #[error("synchronization experiment needs n >= 2, got {0}")]
    SyncTooSmall(usize),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("failed to start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub config: ProtocolConfig,
    pub trials: u64,
    pub master_seed: u64,
    pub workers: usize,
}

impl TrialPlan {
    pub fn new(config: ProtocolConfig, trials: u64, master_seed: u64) -> Self {
        TrialPlan {
            config,
            trials,
            master_seed,
            workers: default_workers(),
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        check_trials(self.trials, self.workers)?;
        self.config.validate().map_err(ProtocolError::from)?;
        Ok(())
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn check_trials(trials: u64, workers: usize) -> Result<(), ExperimentError> {
    if trials < MIN_TRIALS {
        return Err(ExperimentError::TooFewTrials {
            got: trials,
            min: MIN_TRIALS,
        });
    }
    if workers == 0 {
        return Err(ExperimentError::ZeroWorkers);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Proportion,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub kind: EstimateKind,
    pub point: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
}

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = (center - half).clamp(0.0, 1.0).min(p);
    let high = (center + half).clamp(0.0, 1.0).max(p);
    (low, high)
}

pub fn proportion_estimate(successes: u64, trials: u64) -> Estimate {
    let p = successes as f64 / trials as f64;
    let (ci_low, ci_high) = wilson_interval(successes, trials);
    Estimate {
        kind: EstimateKind::Proportion,
        point: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        ci_low,
        ci_high,
        trials,
    }
}

/// Sample mean with a normal-approximation 95% interval. Summation runs in slice order.
pub fn mean_estimate(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let stderr = (var / n).sqrt();
    Estimate {
        kind: EstimateKind::Mean,
        point: mean,
        stderr,
        ci_low: mean - Z_95 * stderr,
        ci_high: mean + Z_95 * stderr,
        trials: values.len() as u64,
    }
}

/// The parts of a run the estimators need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub correct_nonstrict: bool,
    pub correct_strict: bool,
    pub response_time: f64,
    pub messages_sent: u64,
    pub arrivals_by_cap: bool,
    pub delta_synchronized: Option<bool>,
}

/// Maps `f` over trial indices on `workers` threads; output is in index order.
pub fn map_trials<T, F>(trials: u64, workers: usize, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(u64) -> Result<T, ExperimentError> + Sync + Send,
{
    if workers == 0 {
        return Err(ExperimentError::ZeroWorkers);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    pool.install(|| (0..trials).into_par_iter().map(&f).collect())
}

pub fn run_trials(plan: &TrialPlan) -> Result<Vec<TrialSummary>, ExperimentError> {
    plan.validate()?;
    map_trials(plan.trials, plan.workers, |i| {
        let r = simulate(&plan.config, plan.master_seed, i)?;
        Ok(TrialSummary {
            correct_nonstrict: r.correct_nonstrict,
            correct_strict: r.correct_strict,
            response_time: r.response_time,
            messages_sent: r.messages_sent,
            arrivals_by_cap: r.arrivals_by_cap,
            delta_synchronized: r.delta_synchronized,
        })
    })
}

/// Both estimators over one shared set of runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEstimates {
    pub correctness: Estimate,
    pub ert: Estimate,
}

pub fn estimate_plan(plan: &TrialPlan) -> Result<PlanEstimates, ExperimentError> {
    let runs = run_trials(plan)?;
    Ok(summarize(&runs))
}

fn summarize(runs: &[TrialSummary]) -> PlanEstimates {
    let correct = runs.iter().filter(|r| r.correct_nonstrict).count() as u64;
    let rts: Vec<f64> = runs.iter().map(|r| r.response_time).collect();
    PlanEstimates {
        correctness: proportion_estimate(correct, runs.len() as u64),
        ert: mean_estimate(&rts),
    }
}

/// Fraction of (nonstrictly) correct runs, with a Wilson interval.
pub fn estimate_correctness(plan: &TrialPlan) -> Result<Estimate, ExperimentError> {
    Ok(estimate_plan(plan)?.correctness)
}

/// Mean response time, with a normal interval.
pub fn estimate_ert(plan: &TrialPlan) -> Result<Estimate, ExperimentError> {
    Ok(estimate_plan(plan)?.ert)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SyncMode {
    /// Each agent's n timestamps are fresh Erlang(2, λ) draws.
    #[default]
    Independent,
    /// n+1 workers share trigger legs, as in a real PA-CORE run.
    Correlated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncExperimentConfig {
    pub n: usize,
    pub lambda: Rate,
    pub trials: u64,
    pub mode: SyncMode,
    pub master_seed: u64,
    pub workers: usize,
    pub delays: DelaySpec,
}

impl SyncExperimentConfig {
    pub fn new(n: usize, trials: u64, master_seed: u64) -> Self {
        SyncExperimentConfig {
            n,
            lambda: Rate::default(),
            trials,
            mode: SyncMode::Independent,
            master_seed,
            workers: default_workers(),
            delays: DelaySpec::Exponential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncReport {
    /// All hypotheses within 2δ of each other.
    pub pairwise: Estimate,
    /// All hypotheses within δ of the true input time.
    pub centered: Estimate,
    pub delta: f64,
    pub psi: f64,
}

/// Erlang(2, λ) draw: one trigger leg plus one redirect leg.
fn two_leg(source: &mut DelaySource, rng: &mut RngStream) -> Result<f64, KernelError> {
    match source {
        DelaySource::Exponential(rate) => Ok(exponential_draw_pair(rng, *rate)),
        _ => Ok(sample_delay(source, rng)? + sample_delay(source, rng)?),
    }
}

fn hypotheses(cfg: &SyncExperimentConfig, rng: &mut RngStream) -> Result<Vec<f64>, KernelError> {
    let n = cfg.n;
    let bias = 2.0 / cfg.lambda.lambda();
    let mut source = cfg.delays.source(cfg.lambda);
    match cfg.mode {
        SyncMode::Independent => (0..n)
            .map(|_| {
                let mut sum = 0.0;
                for _ in 0..n {
                    sum += two_leg(&mut source, rng)?;
                }
                Ok(sum / n as f64 - bias)
            })
            .collect(),
        SyncMode::Correlated => {
            let workers = n + 1;
            let triggers = (0..workers)
                .map(|_| sample_delay(&mut source, rng))
                .collect::<Result<Vec<_>, _>>()?;
            let mut sums = vec![0.0; workers];
            for (j, &e) in triggers.iter().enumerate() {
                for (k, sum) in sums.iter_mut().enumerate() {
                    if k != j {
                        *sum += e + sample_delay(&mut source, rng)?;
                    }
                }
            }
            Ok(sums.into_iter().map(|s| s / n as f64 - bias).collect())
        }
    }
}

/// Empirical probability that the clock hypotheses are δ-synchronized.
pub fn sync_probability_experiment(cfg: &SyncExperimentConfig) -> Result<SyncReport, ExperimentError> {
    check_trials(cfg.trials, cfg.workers)?;
    if cfg.n < 2 {
        return Err(ExperimentError::SyncTooSmall(cfg.n));
    }
    cfg.delays.validate()?;
    let delta = analytics::delta_sync(cfg.n, cfg.lambda);
    let outcomes = map_trials(cfg.trials, cfg.workers, |i| {
        let mut rng = RngStream::new(cfg.master_seed, i, StreamDomain::SyncExperiment);
        let t = hypotheses(cfg, &mut rng)?;
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let abs_max = t.iter().map(|x| x.abs()).fold(0.0, f64::max);
        Ok((hi - lo <= 2.0 * delta, abs_max <= delta))
    })?;
    let pairwise = outcomes.iter().filter(|o| o.0).count() as u64;
    let centered = outcomes.iter().filter(|o| o.1).count() as u64;
    Ok(SyncReport {
        pairwise: proportion_estimate(pairwise, cfg.trials),
        centered: proportion_estimate(centered, cfg.trials),
        delta,
        psi: analytics::psi(cfg.n as u64)?,
    })
}

/// Chain/CORE cutoff per target probability.
pub fn cutoff_curve(targets: &[CorrectnessTarget]) -> Result<Vec<CutoffRow>, ExperimentError> {
    targets
        .iter()
        .map(|&t| {
            Ok(CutoffRow {
                one_minus_p: -t.ln_p().exp_m1(),
                p: t.p(),
                cutoff_n: analytics::cutoff_n(t)?,
            })
        })
        .collect()
}

/// How an estimate must relate to its analytic bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundRelation {
    /// A probability lower bound: passes when the bound is at most the CI upper end.
    ProbabilityAtLeast,
    /// A mean upper bound: passes when mean ≤ bound + 3·SE.
    MeanAtMost,
    /// A mean lower bound: passes when mean ≥ bound − 3·SE.
    MeanAtLeast,
}

impl BoundRelation {
    pub fn verdict(self, estimate: &Estimate, bound: f64) -> Verdict {
        let ok = match self {
            BoundRelation::ProbabilityAtLeast => bound <= estimate.ci_high,
            BoundRelation::MeanAtMost => estimate.point <= bound + BOUND_SLACK_SE * estimate.stderr,
            BoundRelation::MeanAtLeast => estimate.point >= bound - BOUND_SLACK_SE * estimate.stderr,
        };
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Row without a bound, for plain estimates.
pub fn estimate_row(name: String, config: &ProtocolConfig, e: &Estimate) -> ReportRow {
    ReportRow {
        name,
        n: config.n as u64,
        lambda: config.lambda.lambda(),
        delta: config.delta_cap,
        trials: e.trials,
        point: e.point,
        stderr: e.stderr,
        ci_low: e.ci_low,
        ci_high: e.ci_high,
        bound: None,
        verdict: None,
    }
}

fn bound_row(name: &str, config: &ProtocolConfig, e: &Estimate, bound: f64, rel: BoundRelation) -> ReportRow {
    ReportRow {
        bound: Some(bound),
        verdict: Some(rel.verdict(e, bound)),
        ..estimate_row(format!("{}.{}", config.kind, name), config, e)
    }
}

/// Rows for the plain correctness / response-time estimates of a plan.
pub fn estimate_rows(plan: &TrialPlan) -> Result<Vec<ReportRow>, ExperimentError> {
    let est = estimate_plan(plan)?;
    let c = &plan.config;
    Ok(vec![
        estimate_row(format!("{}.correctness", c.kind), c, &est.correctness),
        estimate_row(format!("{}.ert", c.kind), c, &est.ert),
    ])
}

/// Simulates the plan and checks every analytic bound that applies to its protocol.
pub fn compare_bounds(plan: &TrialPlan) -> Result<Vec<ReportRow>, ExperimentError> {
    if plan.config.delays != DelaySpec::Exponential || plan.config.chain_delays.is_some() {
        return Err(ExperimentError::NotExponential);
    }
    let est = estimate_plan(plan)?;
    let c = &plan.config;
    let n = c.n as u64;
    let lambda = c.lambda;
    let l = lambda.lambda();
    let delta = c.delta_cap.unwrap_or(0.0);
    use BoundRelation::*;
    let rows = match c.kind {
        ProtocolKind::MessageChain => vec![
            bound_row("correctness", c, &est.correctness, 1.0, ProbabilityAtLeast),
            bound_row("ert-lower", c, &est.ert, (n as f64 - 1.0) / l, MeanAtLeast),
        ],
        ProtocolKind::Core => vec![
            bound_row("correctness", c, &est.correctness, core_correct_lower_bound(n, lambda, delta)?, ProbabilityAtLeast),
            bound_row("ert", c, &est.ert, core_ert_upper_bound(n, lambda, delta), MeanAtMost),
        ],
        ProtocolKind::CoreHybrid => vec![
            bound_row("correctness", c, &est.correctness, core_correct_lower_bound(n, lambda, delta)?, ProbabilityAtLeast),
            bound_row(
                "ert",
                c,
                &est.ert,
                (n as f64 / l).min(core_ert_upper_bound(n, lambda, delta)),
                MeanAtMost,
            ),
        ],
        ProtocolKind::PaCore | ProtocolKind::PaCoreHybrid => {
            let psi_ok = n >= 2;
            let lower = if psi_ok { pacore_correct_lower_bound(n, lambda, delta)? } else { 0.0 };
            let mut ert = pacore_ert_upper_bound(n, lambda, delta);
            if c.kind == ProtocolKind::PaCoreHybrid {
                ert = ert.min(c.worker_count() as f64 / l);
            }
            vec![
                bound_row("correctness", c, &est.correctness, lower, ProbabilityAtLeast),
                bound_row("ert", c, &est.ert, ert, MeanAtMost),
            ]
        }
    };
    Ok(rows)
}

/// Rows for a synchronization experiment; both are checked against Ψ(n).
pub fn sync_rows(cfg: &SyncExperimentConfig, report: &SyncReport) -> Vec<ReportRow> {
    let mode = match cfg.mode {
        SyncMode::Independent => "independent",
        SyncMode::Correlated => "correlated",
    };
    [("pairwise", &report.pairwise), ("centered", &report.centered)]
        .into_iter()
        .map(|(label, e)| ReportRow {
            name: format!("sync-{mode}.{label}"),
            n: cfg.n as u64,
            lambda: cfg.lambda.lambda(),
            delta: Some(report.delta),
            trials: e.trials,
            point: e.point,
            stderr: e.stderr,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            bound: Some(report.psi),
            verdict: Some(BoundRelation::ProbabilityAtLeast.verdict(e, report.psi)),
        })
        .collect()
}
