//! PA-CORE(Δ): clockless CORE. Workers average the arrival times of n
//! "redirect" messages to hypothesize when the input arrived, shift their local
//! clocks by that hypothesis, and act at staggered adjusted times Δ + 2δ(k-1).

use crate::analytics::delta_sync;
use crate::kernel::{run_event_loop, Event, Handler, KernelError, RngStream, Scheduler, StreamDomain, Trace};

use super::{at, finish, AgentState, Delays, Msg, ProtocolConfig, ProtocolError, ProtocolKind, RunRecord};

struct PaCore {
    workers: Vec<AgentState>,
    offsets: Vec<f64>,
    delays: Delays,
    /// Redirects each worker waits for (the config's n).
    expected: usize,
    delta: f64,
    stagger: f64,
    /// Mean of an Erlang(2, λ) leg pair, 2/λ.
    two_hop_mean: f64,
    chain_actions: usize,
}

impl Handler for PaCore {
    type Payload = Msg;

    fn handle(&mut self, event: Event<Msg>, s: &mut Scheduler<Msg>) -> Result<(), KernelError> {
        let now = s.now().seconds();
        let k = event.target;
        let workers = self.workers.len();
        match event.payload {
            Msg::Trigger => {
                // Terminated workers still relay: coworkers need all n redirects.
                self.workers[k - 1].trigger_at = Some(now);
                for j in (1..=workers).filter(|&j| j != k) {
                    let d = self.delays.next(Msg::Redirect)?;
                    s.schedule_after(d, j, Msg::Redirect)?;
                }
            }
            Msg::Redirect => {
                let offset = self.offsets[k - 1];
                let w = &mut self.workers[k - 1];
                w.redirect_count += 1;
                w.timestamps.push(now + offset);
                w.last_redirect_at = Some(now);
                if w.redirect_count == self.expected {
                    let mean = w.timestamps.iter().sum::<f64>() / self.expected as f64;
                    let hypothesis = mean - self.two_hop_mean;
                    w.adjustment = Some(hypothesis);
                    if w.acted {
                        return Ok(());
                    }
                    let adjusted_now = now + offset - hypothesis;
                    let target = self.delta + 2.0 * self.stagger * (k - 1) as f64;
                    if adjusted_now >= target {
                        w.act(now);
                    } else {
                        let wake = now + (target - adjusted_now);
                        w.wake_at = Some(wake);
                        s.schedule(at(wake)?, k, Msg::Wake)?;
                    }
                }
            }
            Msg::Wake => {
                let w = &mut self.workers[k - 1];
                w.wake_at = None;
                w.act(now);
            }
            Msg::Act | Msg::Chain => {
                let w = &mut self.workers[k - 1];
                if w.terminated {
                    return Ok(());
                }
                if w.wake_at.is_some_and(|t| t <= now) {
                    w.act(now);
                    return Ok(());
                }
                w.act(now);
                self.chain_actions += 1;
                if k < workers {
                    let d = self.delays.next(Msg::Chain)?;
                    s.schedule_after(d, k + 1, Msg::Chain)?;
                }
            }
        }
        Ok(())
    }
}

pub(super) fn simulate(config: &ProtocolConfig, rng: &mut RngStream, trace: bool) -> Result<(RunRecord, Trace), ProtocolError> {
    let workers = config.worker_count();
    let offsets = config.offsets.realize(workers, &mut rng.fork(StreamDomain::ClockOffsets));
    let mut delays = Delays::new(config, rng.clone());
    let mut initial = Vec::with_capacity(workers + 1);
    for k in 1..=workers {
        initial.push((at(delays.next(Msg::Trigger)?)?, k, Msg::Trigger));
    }
    if config.kind == ProtocolKind::PaCoreHybrid {
        initial.push((at(delays.next(Msg::Act)?)?, 1, Msg::Act));
    }
    let stagger = delta_sync(config.n, config.lambda);
    let mut run = PaCore {
        workers: (1..=workers)
            .map(|k| AgentState {
                timestamps: Vec::with_capacity(config.n),
                ..AgentState::new(k)
            })
            .collect(),
        offsets,
        delays,
        expected: config.n,
        delta: config.delta(),
        stagger,
        two_hop_mean: 2.0 / config.lambda.lambda(),
        chain_actions: 0,
    };
    let t = run_event_loop(initial, &mut run, trace)?;
    *rng = run.delays.rng.clone();

    let adjustments = run
        .workers
        .iter()
        .map(|w| w.adjustment.ok_or(ProtocolError::Incomplete(w.id)))
        .collect::<Result<Vec<_>, _>>()?;
    // Hypotheses on the global axis; local offsets cancel out of the adjusted clocks.
    let errors: Vec<f64> = adjustments.iter().zip(&run.offsets).map(|(t, o)| t - o).collect();
    let spread = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max) - errors.iter().copied().fold(f64::INFINITY, f64::min);
    let on_time = run
        .workers
        .iter()
        .zip(&errors)
        .all(|(w, e)| w.last_redirect_at.is_some_and(|last| last - e <= run.delta));

    let mut record = finish(&run.workers, run.delays.sent, on_time, run.chain_actions)?;
    record.adjustments = Some(adjustments);
    record.delta_synchronized = Some(spread <= 2.0 * stagger);
    Ok((record, t))
}

/// Pure PA-CORE over n+1 workers.
pub fn run_pacore(config: &ProtocolConfig, rng: &mut RngStream) -> Result<RunRecord, ProtocolError> {
    config.expect_kind(ProtocolKind::PaCore)?;
    simulate(config, rng, false).map(|(r, _)| r)
}

/// PA-CORE running alongside an "act" chain started at worker 1.
pub fn run_pacore_hybrid(config: &ProtocolConfig, rng: &mut RngStream) -> Result<RunRecord, ProtocolError> {
    config.expect_kind(ProtocolKind::PaCoreHybrid)?;
    simulate(config, rng, false).map(|(r, _)| r)
}
