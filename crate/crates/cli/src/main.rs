//! `ordresp`: analytic bounds and Monte Carlo estimates for Ordered-Response protocols.
//!
//! Exit status: 0 on success, 1 on usage or runtime errors, 2 when a
//! simulated estimate violates its analytic bound.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ordresp_core::analytics::{self, CorrectnessTarget};
use ordresp_core::experiments::{
    compare_bounds, cutoff_curve, default_workers, estimate_rows, sync_probability_experiment, sync_rows,
    SyncExperimentConfig, SyncMode, TrialPlan, DEFAULT_SEED,
};
use ordresp_core::kernel::{split_stream, DelaySpec, Rate};
use ordresp_core::protocols::{run_protocol_traced, ClockOffsetScheme, ProtocolConfig, ProtocolKind};
use ordresp_core::report::{any_failed, write_rows, Format, ReportRow, Row};

#[derive(Parser)]
#[command(name = "ordresp", version, about = "Ordered-Response protocol simulator and bound calculator")]
#[command(after_help = "Times are in seconds and rates in messages per second. \
Delays are exponential with mean 1/λ unless overridden.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one closed-form quantity and print it.
    Analytic(AnalyticArgs),
    /// Run a protocol; one trial prints the run record, more print estimates.
    Simulate(SimulateArgs),
    /// Simulate a protocol and check the estimates against their analytic bounds.
    Compare(CompareArgs),
    /// Smallest n above which CORE beats the message chain for each target probability.
    Cutoff(CutoffArgs),
    /// Estimate the probability that PA-CORE clock hypotheses are synchronized.
    SyncExperiment(SyncArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Formula {
    /// Exact CORE correctness probability at Δ.
    CoreProb,
    /// CORE correctness lower bound at Δ.
    CoreLower,
    /// Smallest Δ reaching the target probability with CORE.
    CoreDelta,
    /// n-th harmonic number.
    Harmonic,
    /// CORE expected response time upper bound.
    CoreErt,
    /// Probability that n clock hypotheses are synchronized.
    Psi,
    /// Synchronization tolerance δ in seconds.
    DeltaSync,
    /// PA-CORE correctness lower bound at Δ.
    PacoreLower,
    /// Smallest Δ reaching the target probability with PA-CORE.
    PacoreDelta,
    /// PA-CORE expected response time upper bound.
    PacoreErt,
    /// CORE vs message chain cutoff for the target probability.
    Cutoff,
}

#[derive(Clone, Copy, ValueEnum)]
enum Protocol {
    MessageChain,
    Core,
    CoreHybrid,
    PaCore,
    PaCoreHybrid,
}

impl From<Protocol> for ProtocolKind {
    fn from(p: Protocol) -> Self {
        match p {
            Protocol::MessageChain => ProtocolKind::MessageChain,
            Protocol::Core => ProtocolKind::Core,
            Protocol::CoreHybrid => ProtocolKind::CoreHybrid,
            Protocol::PaCore => ProtocolKind::PaCore,
            Protocol::PaCoreHybrid => ProtocolKind::PaCoreHybrid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Independent,
    Correlated,
}

#[derive(Args)]
struct TargetArgs {
    /// Timing cap Δ in seconds.
    #[arg(long, conflicts_with_all = ["p", "one_minus_p"])]
    delta: Option<f64>,
    /// Target correctness probability; Δ is derived from it.
    #[arg(long, conflicts_with = "one_minus_p")]
    p: Option<f64>,
    /// 1 - p, for targets too close to 1 to write as p.
    #[arg(long)]
    one_minus_p: Option<f64>,
}

impl TargetArgs {
    fn target(&self) -> Result<Option<CorrectnessTarget>> {
        Ok(match (self.p, self.one_minus_p) {
            (Some(p), _) => Some(CorrectnessTarget::from_p(p)?),
            (_, Some(q)) => Some(CorrectnessTarget::from_complement(q)?),
            _ => None,
        })
    }
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long, value_enum)]
    formula: Formula,
    /// Number of workers (for PA-CORE formulas, the n in its n+1 workers).
    #[arg(long)]
    n: Option<u64>,
    /// Message delay rate λ per second.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[command(flatten)]
    target: TargetArgs,
}

#[derive(Args)]
struct ProtocolArgs {
    #[arg(long, value_enum)]
    protocol: Protocol,
    /// Number of workers; PA-CORE variants run n+1.
    #[arg(long)]
    n: usize,
    /// Message delay rate λ per second.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[command(flatten)]
    target: TargetArgs,
    /// Stagger ε in seconds for strict ordering (CORE variants only).
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Replace exponential delays with this constant, in seconds.
    #[arg(long, conflicts_with = "scripted_delays")]
    constant_delay: Option<f64>,
    /// Comma-separated delays in seconds, consumed in send order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    scripted_delays: Option<Vec<f64>>,
    /// Worker clock offsets: `zero`, `uniform:W` for U[-W, W), or a comma-separated list in seconds.
    #[arg(long, default_value = "zero", allow_hyphen_values = true, value_parser = parse_offsets)]
    offsets: ClockOffsetScheme,
}

impl ProtocolArgs {
    fn config(&self) -> Result<ProtocolConfig> {
        let kind = ProtocolKind::from(self.protocol);
        let lambda = Rate::new(self.lambda)?;
        let mut cfg = ProtocolConfig::new(kind, self.n)
            .with_lambda(lambda)
            .with_epsilon(self.epsilon)
            .with_offsets(self.offsets.clone());
        if let Some(d) = self.target.delta {
            cfg = cfg.with_delta_cap(d);
        } else if let Some(t) = self.target.target()? {
            let n = self.n as u64;
            let d = if kind.is_clockless() {
                analytics::pacore_delta_for(n, lambda, t)?
            } else {
                analytics::core_delta_for(n, lambda, t)?
            };
            cfg = cfg.with_delta_cap(d);
        }
        if let Some(s) = self.constant_delay {
            cfg = cfg.with_delays(DelaySpec::Constant { seconds: s });
        }
        if let Some(s) = &self.scripted_delays {
            cfg = cfg.with_delays(DelaySpec::Scripted { seconds: s.clone() });
        }
        if kind.is_clockless() && self.n == 1 {
            eprintln!("warning: with n = 1 the synchronization tolerance is 0; bounds do not apply");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Number of independent trials [default: 1 for simulate, 10000 for compare, 1000 for sync-experiment].
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed; trial i uses stream i.
    #[arg(long, env = "ORDRESP_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl OutputArgs {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.output {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn emit<R: Row>(&self, rows: &[R]) -> Result<()> {
        let format = match self.format {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
        };
        let mut w = self.writer()?;
        write_rows(rows, format, &mut w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[command(flatten)]
    run: RunArgs,
    /// With one trial, also write the event trace (time, agent, message) as TSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct CutoffArgs {
    /// Target probabilities; may be repeated.
    #[arg(long)]
    p: Vec<f64>,
    /// Target complements 1 - p; may be repeated.
    #[arg(long)]
    one_minus_p: Vec<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SyncArgs {
    /// Number of clock hypotheses, each averaging n two-leg delays.
    #[arg(long)]
    n: usize,
    /// Message delay rate λ per second.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value = "independent")]
    mode: Mode,
    #[command(flatten)]
    run: RunArgs,
}

fn parse_offsets(s: &str) -> Result<ClockOffsetScheme, String> {
    if s == "zero" {
        return Ok(ClockOffsetScheme::Zero);
    }
    if let Some(w) = s.strip_prefix("uniform:") {
        let half_width = w.parse().map_err(|e| format!("bad half width {w:?}: {e}"))?;
        return Ok(ClockOffsetScheme::UniformRandom { half_width });
    }
    let offsets = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad offset {v:?}: {e}")))
        .collect::<Result<_, _>>()?;
    Ok(ClockOffsetScheme::Fixed { offsets })
}

fn analytic(a: &AnalyticArgs) -> Result<()> {
    let lambda = Rate::new(a.lambda)?;
    let n = || a.n.context("--n is required for this formula");
    let delta = || a.target.delta.context("--delta is required for this formula");
    let target = || a.target.target()?.context("--p or --one-minus-p is required for this formula");
    let value = match a.formula {
        Formula::CoreProb => analytics::core_correct_probability(n()?, lambda, delta()?)?,
        Formula::CoreLower => analytics::core_correct_lower_bound(n()?, lambda, delta()?)?,
        Formula::CoreDelta => analytics::core_delta_for(n()?, lambda, target()?)?,
        Formula::Harmonic => analytics::harmonic(n()?),
        Formula::CoreErt => analytics::core_ert_upper_bound(n()?, lambda, delta()?),
        Formula::Psi => analytics::psi(n()?)?,
        Formula::DeltaSync => analytics::delta_sync(n()? as usize, lambda),
        Formula::PacoreLower => analytics::pacore_correct_lower_bound(n()?, lambda, delta()?)?,
        Formula::PacoreDelta => analytics::pacore_delta_for(n()?, lambda, target()?)?,
        Formula::PacoreErt => analytics::pacore_ert_upper_bound(n()?, lambda, delta()?),
        Formula::Cutoff => {
            println!("{}", analytics::cutoff_n(target()?)?);
            return Ok(());
        }
    };
    println!("{value}");
    Ok(())
}

fn plan(cfg: ProtocolConfig, run: &RunArgs, default_trials: u64) -> TrialPlan {
    TrialPlan::new(cfg, run.trials.unwrap_or(default_trials), run.seed).with_workers(run.workers.unwrap_or_else(default_workers))
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let cfg = a.protocol.config()?;
    if a.run.trials.unwrap_or(1) == 1 {
        let (record, trace) = run_protocol_traced(&cfg, &mut split_stream(a.run.seed, 0))?;
        if let Some(p) = &a.trace {
            let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            trace.write_tsv(BufWriter::new(f))?;
        }
        let mut w = a.run.out.writer()?;
        serde_json::to_writer_pretty(&mut w, &record)?;
        writeln!(w)?;
        w.flush()?;
        return Ok(());
    }
    if a.trace.is_some() {
        bail!("--trace needs --trials 1");
    }
    a.run.out.emit(&estimate_rows(&plan(cfg, &a.run, 1))?)
}

fn verdict_rows(rows: &[ReportRow], out: &OutputArgs) -> Result<ExitCode> {
    out.emit(rows)?;
    Ok(ExitCode::from(verdict_status(rows)))
}

fn verdict_status(rows: &[ReportRow]) -> u8 {
    if any_failed(rows) {
        2
    } else {
        0
    }
}

fn compare(a: &CompareArgs) -> Result<ExitCode> {
    let cfg = a.protocol.config()?;
    verdict_rows(&compare_bounds(&plan(cfg, &a.run, 10_000))?, &a.run.out)
}

fn cutoff(a: &CutoffArgs) -> Result<()> {
    let mut targets = Vec::new();
    for &p in &a.p {
        targets.push(CorrectnessTarget::from_p(p)?);
    }
    for &q in &a.one_minus_p {
        targets.push(CorrectnessTarget::from_complement(q)?);
    }
    if targets.is_empty() {
        bail!("give at least one --p or --one-minus-p");
    }
    a.out.emit(&cutoff_curve(&targets)?)
}

fn sync(a: &SyncArgs) -> Result<ExitCode> {
    let mut cfg = SyncExperimentConfig::new(a.n, a.run.trials.unwrap_or(1000), a.run.seed);
    cfg.lambda = Rate::new(a.lambda)?;
    cfg.mode = match a.mode {
        Mode::Independent => SyncMode::Independent,
        Mode::Correlated => SyncMode::Correlated,
    };
    cfg.workers = a.run.workers.unwrap_or_else(default_workers);
    let report = sync_probability_experiment(&cfg)?;
    verdict_rows(&sync_rows(&cfg, &report), &a.run.out)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analytic(a) => analytic(&a)?,
        Command::Simulate(a) => simulate(&a)?,
        Command::Compare(a) => return compare(&a),
        Command::Cutoff(a) => cutoff(&a)?,
        Command::SyncExperiment(a) => return sync(&a),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
