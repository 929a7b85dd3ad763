//! Agent state machines for the five Ordered-Response protocols.
//!
//! Agent 0 is the supervisor; workers are numbered `1..=w` in their required
//! action order. The supervisor's response to the external input happens at
//! t = 0 and is expressed as the initial set of in-flight messages, so traces
//! contain only deliveries and timer expirations.

mod chain;
mod concurrent;
mod pacore;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{split_stream, DelaySource, DelaySpec, KernelError, Rate, RngStream, SimTime, Tagged, Trace};

pub use chain::run_message_chain;
pub use concurrent::{run_core, run_core_hybrid};
pub use pacore::{run_pacore, run_pacore_hybrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    MessageChain,
    Core,
    CoreHybrid,
    PaCore,
    PaCoreHybrid,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 5] = [
        ProtocolKind::MessageChain,
        ProtocolKind::Core,
        ProtocolKind::CoreHybrid,
        ProtocolKind::PaCore,
        ProtocolKind::PaCoreHybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::MessageChain => "message-chain",
            ProtocolKind::Core => "core",
            ProtocolKind::CoreHybrid => "core-hybrid",
            ProtocolKind::PaCore => "pa-core",
            ProtocolKind::PaCoreHybrid => "pa-core-hybrid",
        }
    }

    /// PA-CORE variants run without a global clock and use n+1 workers.
    pub fn is_clockless(self) -> bool {
        matches!(self, ProtocolKind::PaCore | ProtocolKind::PaCoreHybrid)
    }

    pub fn needs_delta_cap(self) -> bool {
        self != ProtocolKind::MessageChain
    }

    pub fn is_hybrid(self) -> bool {
        matches!(self, ProtocolKind::CoreHybrid | ProtocolKind::PaCoreHybrid)
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::UnknownProtocol(s.to_string()))
    }
}

/// Initial offsets of the workers' local clocks: `C_k(t) = t + offset_k`.
/// The supervisor's clock is always the global clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ClockOffsetScheme {
    #[default]
    Zero,
    /// One offset per worker, in worker order.
    Fixed { offsets: Vec<f64> },
    /// Offsets drawn uniformly from `[-half_width, half_width)`.
    UniformRandom { half_width: f64 },
}

impl ClockOffsetScheme {
    /// Per-worker offsets; random draws come from the trial's clock-offset stream.
    pub fn realize(&self, workers: usize, rng: &mut RngStream) -> Vec<f64> {
        match self {
            ClockOffsetScheme::Zero => vec![0.0; workers],
            ClockOffsetScheme::Fixed { offsets } => offsets.clone(),
            ClockOffsetScheme::UniformRandom { half_width } => {
                (0..workers).map(|_| rng.uniform_range(-half_width, *half_width)).collect()
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown protocol `{0}` (expected one of message-chain, core, core-hybrid, pa-core, pa-core-hybrid)")]
    UnknownProtocol(String),
    #[error("n must be at least 1")]
    ZeroAgents,
    #[error("{0} requires a positive finite delta cap")]
    MissingDeltaCap(ProtocolKind),
    #[error("epsilon must be finite and nonnegative, got {0}")]
    InvalidEpsilon(f64),
    #[error("strict-ordering epsilon applies to the CORE family only, not {0}")]
    EpsilonUnsupported(ProtocolKind),
    #[error("fixed clock offsets need one value per worker: expected {expected}, got {got}")]
    OffsetCount { expected: usize, got: usize },
    #[error("clock offsets must be finite")]
    InvalidOffset,
    #[error("invalid delay specification: {0}")]
    Delay(KernelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("configuration is for {got}, but {expected} was invoked")]
    KindMismatch { expected: ProtocolKind, got: ProtocolKind },
    #[error("run ended with worker {0} never acting")]
    Incomplete(usize),
}

/// Everything needed to reproduce a run given a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    /// Protocol size parameter. Workers: n (global-clock family) or n+1 (PA-CORE family).
    pub n: usize,
    pub lambda: Rate,
    /// Δ in seconds; required by everything except the message chain.
    pub delta_cap: Option<f64>,
    /// Strict-ordering spacing for the CORE family; 0 disables it.
    pub epsilon: f64,
    pub offsets: ClockOffsetScheme,
    pub delays: DelaySpec,
    /// Overrides `delays` for "act" and chain messages in the hybrids.
    pub chain_delays: Option<DelaySpec>,
}

impl ProtocolConfig {
    pub fn new(kind: ProtocolKind, n: usize) -> Self {
        ProtocolConfig {
            kind,
            n,
            lambda: Rate::default(),
            delta_cap: None,
            epsilon: 0.0,
            offsets: ClockOffsetScheme::Zero,
            delays: DelaySpec::Exponential,
            chain_delays: None,
        }
    }

    pub fn with_lambda(mut self, lambda: Rate) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_delta_cap(mut self, delta_cap: f64) -> Self {
        self.delta_cap = Some(delta_cap);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_offsets(mut self, offsets: ClockOffsetScheme) -> Self {
        self.offsets = offsets;
        self
    }

    pub fn with_delays(mut self, delays: DelaySpec) -> Self {
        self.delays = delays;
        self
    }

    pub fn with_chain_delays(mut self, delays: DelaySpec) -> Self {
        self.chain_delays = Some(delays);
        self
    }

    pub fn worker_count(&self) -> usize {
        if self.kind.is_clockless() {
            self.n + 1
        } else {
            self.n
        }
    }

    /// Workers plus the supervisor.
    pub fn agent_count(&self) -> usize {
        self.worker_count() + 1
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::ZeroAgents);
        }
        if self.kind.needs_delta_cap() {
            match self.delta_cap {
                Some(d) if d.is_finite() && d > 0.0 => {}
                _ => return Err(ConfigError::MissingDeltaCap(self.kind)),
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(ConfigError::InvalidEpsilon(self.epsilon));
        }
        if self.epsilon > 0.0 && !matches!(self.kind, ProtocolKind::Core | ProtocolKind::CoreHybrid) {
            return Err(ConfigError::EpsilonUnsupported(self.kind));
        }
        match &self.offsets {
            ClockOffsetScheme::Zero => {}
            ClockOffsetScheme::Fixed { offsets } => {
                if offsets.len() != self.worker_count() {
                    return Err(ConfigError::OffsetCount {
                        expected: self.worker_count(),
                        got: offsets.len(),
                    });
                }
                if offsets.iter().any(|o| !o.is_finite()) {
                    return Err(ConfigError::InvalidOffset);
                }
            }
            ClockOffsetScheme::UniformRandom { half_width } => {
                if !(half_width.is_finite() && *half_width >= 0.0) {
                    return Err(ConfigError::InvalidOffset);
                }
            }
        }
        self.delays.validate().map_err(ConfigError::Delay)?;
        if let Some(c) = &self.chain_delays {
            c.validate().map_err(ConfigError::Delay)?;
        }
        Ok(())
    }

    fn expect_kind(&self, expected: ProtocolKind) -> Result<(), ProtocolError> {
        if self.kind != expected {
            return Err(ProtocolError::KindMismatch {
                expected,
                got: self.kind,
            });
        }
        self.validate()?;
        Ok(())
    }

    pub(crate) fn delta(&self) -> f64 {
        self.delta_cap.unwrap_or(0.0)
    }
}

/// Outcome of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Global-time action instants t_1..t_w in worker order.
    pub action_times: Vec<f64>,
    pub response_time: f64,
    pub messages_sent: u64,
    pub correct_nonstrict: bool,
    pub correct_strict: bool,
    /// Workers that acted because a chain message reached them.
    pub chain_actions: usize,
    /// CORE family: every trigger arrived by Δ. PA-CORE family: every worker's
    /// last redirect arrived while its adjusted clock read at most Δ.
    pub arrivals_by_cap: bool,
    /// PA-CORE family: each worker's hypothesis T_k, in its own local-clock frame.
    pub adjustments: Option<Vec<f64>>,
    /// PA-CORE family: adjusted clocks pairwise within 2δ of each other.
    pub delta_synchronized: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Correctness {
    pub nonstrict: bool,
    pub strict: bool,
}

/// Ordered-response check on global action times.
pub fn classify_run(action_times: &[f64]) -> Correctness {
    let nonstrict = action_times.windows(2).all(|w| w[0] <= w[1]);
    let strict = action_times.windows(2).all(|w| w[0] < w[1]);
    Correctness { nonstrict, strict }
}

/// Message kinds exchanged by every protocol in this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Msg {
    Trigger,
    Redirect,
    Act,
    Chain,
    Wake,
}

impl Tagged for Msg {
    fn tag(&self) -> &'static str {
        match self {
            Msg::Trigger => "trigger",
            Msg::Redirect => "redirect",
            Msg::Act => "act",
            Msg::Chain => "chain",
            Msg::Wake => "wake",
        }
    }
}

/// Per-worker state shared by all protocols.
#[derive(Debug, Clone, Default)]
pub struct AgentState {
    pub id: usize,
    pub acted: bool,
    pub action_time: Option<f64>,
    /// Redirects received so far (PA-CORE family).
    pub redirect_count: usize,
    /// Local-clock readings at each redirect arrival.
    pub timestamps: Vec<f64>,
    /// Hypothesized input time, set once all redirects are in.
    pub adjustment: Option<f64>,
    pub terminated: bool,
    /// Pending wake-up on the global axis, if one is scheduled.
    pub(crate) wake_at: Option<f64>,
    pub(crate) trigger_at: Option<f64>,
    pub(crate) last_redirect_at: Option<f64>,
}

impl AgentState {
    fn new(id: usize) -> Self {
        AgentState {
            id,
            ..Default::default()
        }
    }

    /// Marks the single permitted action. Returns false if the agent already acted.
    fn act(&mut self, now: f64) -> bool {
        if self.acted {
            return false;
        }
        self.acted = true;
        self.action_time = Some(now);
        self.terminated = true;
        true
    }
}

/// Delay sources for one run: the general one and the optional chain override.
pub(crate) struct Delays {
    general: DelaySource,
    chain: Option<DelaySource>,
    pub(crate) rng: RngStream,
    pub(crate) sent: u64,
}

impl Delays {
    fn new(config: &ProtocolConfig, rng: RngStream) -> Self {
        Delays {
            general: config.delays.source(config.lambda),
            chain: config.chain_delays.as_ref().map(|d| d.source(config.lambda)),
            rng,
            sent: 0,
        }
    }

    /// Samples a delay for one message and counts it as sent.
    fn next(&mut self, msg: Msg) -> Result<f64, KernelError> {
        self.sent += 1;
        let source = match (&mut self.chain, msg) {
            (Some(c), Msg::Act | Msg::Chain) => c,
            _ => &mut self.general,
        };
        crate::kernel::sample_delay(source, &mut self.rng)
    }
}

fn finish(
    workers: &[AgentState],
    messages_sent: u64,
    arrivals_by_cap: bool,
    chain_actions: usize,
) -> Result<RunRecord, ProtocolError> {
    let action_times = workers
        .iter()
        .map(|w| w.action_time.ok_or(ProtocolError::Incomplete(w.id)))
        .collect::<Result<Vec<_>, _>>()?;
    let response_time = action_times.iter().copied().fold(0.0, f64::max);
    let c = classify_run(&action_times);
    Ok(RunRecord {
        action_times,
        response_time,
        messages_sent,
        correct_nonstrict: c.nonstrict,
        correct_strict: c.strict,
        chain_actions,
        arrivals_by_cap,
        adjustments: None,
        delta_synchronized: None,
    })
}

fn at(t: f64) -> Result<SimTime, KernelError> {
    SimTime::new(t)
}

/// Runs whichever protocol the configuration names, drawing delays from `rng`.
pub fn run_protocol(config: &ProtocolConfig, rng: &mut RngStream) -> Result<RunRecord, ProtocolError> {
    run_dispatch(config, rng, false).map(|(r, _)| r)
}

/// As [`run_protocol`], also returning the processed-event trace.
pub fn run_protocol_traced(config: &ProtocolConfig, rng: &mut RngStream) -> Result<(RunRecord, Trace), ProtocolError> {
    run_dispatch(config, rng, true)
}

fn run_dispatch(config: &ProtocolConfig, rng: &mut RngStream, trace: bool) -> Result<(RunRecord, Trace), ProtocolError> {
    config.validate()?;
    match config.kind {
        ProtocolKind::MessageChain => chain::simulate(config, rng, trace),
        ProtocolKind::Core | ProtocolKind::CoreHybrid => concurrent::simulate(config, rng, trace),
        ProtocolKind::PaCore | ProtocolKind::PaCoreHybrid => pacore::simulate(config, rng, trace),
    }
}

/// Run for trial `trial_index` of an experiment seeded with `master_seed`.
pub fn simulate(config: &ProtocolConfig, master_seed: u64, trial_index: u64) -> Result<RunRecord, ProtocolError> {
    run_protocol(config, &mut split_stream(master_seed, trial_index))
}
