use crate::kernel::{run_event_loop, Event, KernelError, RngStream, Scheduler, Trace};

use super::{at, finish, AgentState, Delays, Msg, ProtocolConfig, ProtocolError, ProtocolKind, RunRecord};

struct MessageChain {
    workers: Vec<AgentState>,
    delays: Delays,
}

impl crate::kernel::Handler for MessageChain {
    type Payload = Msg;

    fn handle(&mut self, event: Event<Msg>, s: &mut Scheduler<Msg>) -> Result<(), KernelError> {
        let now = s.now().seconds();
        let k = event.target;
        self.workers[k - 1].act(now);
        if k < self.workers.len() {
            let d = self.delays.next(Msg::Chain)?;
            s.schedule_after(d, k + 1, Msg::Chain)?;
        }
        Ok(())
    }
}

pub(super) fn simulate(config: &ProtocolConfig, rng: &mut RngStream, trace: bool) -> Result<(RunRecord, Trace), ProtocolError> {
    let n = config.worker_count();
    let mut delays = Delays::new(config, rng.clone());
    let first = delays.next(Msg::Act)?;
    let mut run = MessageChain {
        workers: (1..=n).map(AgentState::new).collect(),
        delays,
    };
    let t = run_event_loop([(at(first)?, 1, Msg::Act)], &mut run, trace)?;
    *rng = run.delays.rng.clone();
    let record = finish(&run.workers, run.delays.sent, true, n)?;
    Ok((record, t))
}

/// Supervisor sends to worker 1 at t = 0; each worker acts on receipt and forwards.
pub fn run_message_chain(config: &ProtocolConfig, rng: &mut RngStream) -> Result<RunRecord, ProtocolError> {
    config.expect_kind(ProtocolKind::MessageChain)?;
    simulate(config, rng, false).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{split_stream, DelaySpec};
    use crate::protocols::run_protocol_traced;

    fn constant(n: usize, d: f64) -> ProtocolConfig {
        ProtocolConfig::new(ProtocolKind::MessageChain, n).with_delays(DelaySpec::Constant { seconds: d })
    }

    #[test]
    fn three_hop_hand_trace() {
        let (r, trace) = run_protocol_traced(&constant(3, 1.0), &mut split_stream(0, 0)).unwrap();
        assert_eq!(r.action_times, vec![1.0, 2.0, 3.0]);
        assert_eq!(r.response_time, 3.0);
        assert_eq!(r.messages_sent, 3);
        assert!(r.correct_nonstrict);
        let times: Vec<f64> = trace.entries.iter().map(|e| e.time.seconds()).collect();
        assert_eq!(times, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn single_worker() {
        let r = run_message_chain(&constant(1, 0.25), &mut split_stream(0, 0)).unwrap();
        assert_eq!(r.action_times, vec![0.25]);
        assert_eq!(r.response_time, 0.25);
    }

    #[test]
    fn action_times_are_prefix_sums_of_scripted_delays() {
        let cfg = ProtocolConfig::new(ProtocolKind::MessageChain, 4)
            .with_delays(DelaySpec::Scripted { seconds: vec![0.5, 2.0, 0.25, 1.0] });
        let r = run_message_chain(&cfg, &mut split_stream(0, 0)).unwrap();
        assert_eq!(r.action_times, vec![0.5, 2.5, 2.75, 3.75]);
    }

    #[test]
    fn short_script_reports_run_and_index() {
        let cfg = ProtocolConfig::new(ProtocolKind::MessageChain, 3).with_delays(DelaySpec::Scripted { seconds: vec![1.0] });
        let err = run_message_chain(&cfg, &mut split_stream(0, 9)).unwrap_err();
        assert_eq!(err, ProtocolError::Kernel(KernelError::ScriptExhausted { run: 9, index: 1 }));
    }
}
