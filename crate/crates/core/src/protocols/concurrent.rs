//! CORE(Δ) under a global clock, and its hybrid with a message chain.

use crate::kernel::{run_event_loop, Event, Handler, KernelError, RngStream, Scheduler, Trace};

use super::{at, finish, AgentState, Delays, Msg, ProtocolConfig, ProtocolError, ProtocolKind, RunRecord};

struct Concurrent {
    workers: Vec<AgentState>,
    delays: Delays,
    delta: f64,
    epsilon: f64,
    hybrid: bool,
    chain_actions: usize,
}

impl Concurrent {
    /// Global time at which worker `k` may act: Δ, or Δ + (1 - 2^-k)·ε in strict mode.
    fn target(&self, k: usize) -> f64 {
        if self.epsilon > 0.0 {
            self.delta + (1.0 - 0.5f64.powi(k.min(i32::MAX as usize) as i32)) * self.epsilon
        } else {
            self.delta
        }
    }
}

impl Handler for Concurrent {
    type Payload = Msg;

    fn handle(&mut self, event: Event<Msg>, s: &mut Scheduler<Msg>) -> Result<(), KernelError> {
        let now = s.now().seconds();
        let k = event.target;
        let target = self.target(k);
        let n = self.workers.len();
        let w = &mut self.workers[k - 1];
        match event.payload {
            Msg::Trigger => {
                w.trigger_at = Some(now);
                if w.acted {
                    return Ok(());
                }
                if now >= target {
                    w.act(now);
                } else {
                    w.wake_at = Some(target);
                    s.schedule(at(target)?, k, Msg::Wake)?;
                }
            }
            Msg::Wake => {
                w.wake_at = None;
                w.act(now);
            }
            Msg::Act | Msg::Chain => {
                if w.terminated {
                    return Ok(());
                }
                // A timer due at this very instant fires first.
                if w.wake_at.is_some_and(|t| t <= now) {
                    w.act(now);
                    return Ok(());
                }
                w.act(now);
                self.chain_actions += 1;
                if k < n {
                    let d = self.delays.next(Msg::Chain)?;
                    s.schedule_after(d, k + 1, Msg::Chain)?;
                }
            }
            Msg::Redirect => unreachable!("CORE agents never receive redirects"),
        }
        Ok(())
    }
}

pub(super) fn simulate(config: &ProtocolConfig, rng: &mut RngStream, trace: bool) -> Result<(RunRecord, Trace), ProtocolError> {
    let n = config.worker_count();
    let hybrid = config.kind == ProtocolKind::CoreHybrid;
    let mut delays = Delays::new(config, rng.clone());
    let mut initial = Vec::with_capacity(n + 1);
    for k in 1..=n {
        initial.push((at(delays.next(Msg::Trigger)?)?, k, Msg::Trigger));
    }
    if hybrid {
        initial.push((at(delays.next(Msg::Act)?)?, 1, Msg::Act));
    }
    let mut run = Concurrent {
        workers: (1..=n).map(AgentState::new).collect(),
        delays,
        delta: config.delta(),
        epsilon: config.epsilon,
        hybrid,
        chain_actions: 0,
    };
    let t = run_event_loop(initial, &mut run, trace)?;
    debug_assert!(run.hybrid || run.chain_actions == 0);
    *rng = run.delays.rng.clone();
    let on_time = run.workers.iter().all(|w| w.trigger_at.is_some_and(|a| a <= run.delta));
    let record = finish(&run.workers, run.delays.sent, on_time, run.chain_actions)?;
    Ok((record, t))
}

/// Supervisor broadcasts "trigger"; each worker acts at max(Δ, arrival).
pub fn run_core(config: &ProtocolConfig, rng: &mut RngStream) -> Result<RunRecord, ProtocolError> {
    config.expect_kind(ProtocolKind::Core)?;
    simulate(config, rng, false).map(|(r, _)| r)
}

/// CORE plus an "act" chain started at worker 1; each worker acts once, at
/// whichever rule enables it first, and only chain-triggered actions forward.
pub fn run_core_hybrid(config: &ProtocolConfig, rng: &mut RngStream) -> Result<RunRecord, ProtocolError> {
    config.expect_kind(ProtocolKind::CoreHybrid)?;
    simulate(config, rng, false).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{split_stream, DelaySpec};

    fn core(n: usize, delta: f64, delays: DelaySpec) -> ProtocolConfig {
        ProtocolConfig::new(ProtocolKind::Core, n).with_delta_cap(delta).with_delays(delays)
    }

    fn scripted(v: &[f64]) -> DelaySpec {
        DelaySpec::Scripted { seconds: v.to_vec() }
    }

    #[test]
    fn all_early_act_together_at_cap() {
        let r = run_core(&core(3, 2.0, DelaySpec::Constant { seconds: 0.5 }), &mut split_stream(0, 0)).unwrap();
        assert_eq!(r.action_times, vec![2.0, 2.0, 2.0]);
        assert_eq!(r.response_time, 2.0);
        assert_eq!(r.messages_sent, 3);
        assert!(r.correct_nonstrict && !r.correct_strict);
        assert!(r.arrivals_by_cap);
    }

    #[test]
    fn late_trigger_acts_immediately_out_of_order() {
        let r = run_core(&core(2, 2.0, scripted(&[3.0, 1.0])), &mut split_stream(0, 0)).unwrap();
        assert_eq!(r.action_times, vec![3.0, 2.0]);
        assert!(!r.correct_nonstrict);
        assert_eq!(r.response_time, 3.0);
        assert!(!r.arrivals_by_cap);
    }

    #[test]
    fn strict_epsilon_schedule() {
        let cfg = core(3, 2.0, DelaySpec::Constant { seconds: 0.5 }).with_epsilon(0.1);
        let r = run_core(&cfg, &mut split_stream(0, 0)).unwrap();
        let expected = [2.05, 2.075, 2.0875];
        for (a, e) in r.action_times.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
        assert!(r.correct_strict);
        assert!(r.action_times.iter().all(|&t| t < 2.1));
    }

    #[test]
    fn hybrid_chain_wins_with_large_cap() {
        let cfg = ProtocolConfig::new(ProtocolKind::CoreHybrid, 2)
            .with_delta_cap(10.0)
            .with_delays(scripted(&[0.5, 0.5, 0.5, 0.5]));
        let r = run_core_hybrid(&cfg, &mut split_stream(0, 0)).unwrap();
        assert_eq!(r.action_times, vec![0.5, 1.0]);
        assert_eq!(r.response_time, 1.0);
        assert_eq!(r.messages_sent, 4);
        assert_eq!(r.chain_actions, 2);
        assert!(r.correct_nonstrict);
    }

    #[test]
    fn hybrid_chain_dies_at_terminated_worker() {
        let cfg = ProtocolConfig::new(ProtocolKind::CoreHybrid, 2)
            .with_delta_cap(1.0)
            .with_delays(scripted(&[0.5, 0.5, 5.0]));
        let r = run_core_hybrid(&cfg, &mut split_stream(0, 0)).unwrap();
        assert_eq!(r.action_times, vec![1.0, 1.0]);
        assert_eq!(r.response_time, 1.0);
        assert_eq!(r.messages_sent, 3);
        assert_eq!(r.chain_actions, 0);
    }

    #[test]
    fn hybrid_timer_wins_exact_tie_with_chain() {
        // Worker 2's trigger lands at 0.5 (timer for Δ = 1.0); the chain reaches
        // it at exactly 1.0. The timer wins, so worker 2 does not count as chain-driven.
        let cfg = ProtocolConfig::new(ProtocolKind::CoreHybrid, 3)
            .with_delta_cap(1.0)
            .with_delays(scripted(&[0.5, 0.5, 0.5, 0.25, 0.75]));
        let r = run_core_hybrid(&cfg, &mut split_stream(0, 0)).unwrap();
        assert_eq!(r.action_times, vec![0.25, 1.0, 1.0]);
        assert_eq!(r.chain_actions, 1);
        // act, the 1 -> 2 hop, nothing forwarded by worker 2.
        assert_eq!(r.messages_sent, 5);
    }

    #[test]
    fn hybrid_ignores_late_trigger_after_chain_action() {
        let cfg = ProtocolConfig::new(ProtocolKind::CoreHybrid, 2)
            .with_delta_cap(1.0)
            .with_delays(scripted(&[0.5, 7.0, 0.1, 0.1]));
        let r = run_core_hybrid(&cfg, &mut split_stream(0, 0)).unwrap();
        assert!((r.action_times[0] - 0.1).abs() < 1e-12);
        assert!((r.action_times[1] - 0.2).abs() < 1e-12);
        assert_eq!(r.chain_actions, 2);
        assert!(!r.arrivals_by_cap);
    }
}
