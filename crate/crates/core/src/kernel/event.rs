use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use super::{KernelError, SimTime};

/// Agent index: 0 is the supervisor, workers are 1..=w.
pub type AgentId = usize;

/// Short label written to traces.
pub trait Tagged {
    fn tag(&self) -> &'static str;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub fire_time: SimTime,
    pub seq: u64,
    pub target: AgentId,
    pub payload: P,
}

// Min-heap ordering on (fire_time, seq); payload does not participate.
struct Pending<P>(Event<P>);

impl<P> PartialEq for Pending<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P> Eq for Pending<P> {}

impl<P> PartialOrd for Pending<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Pending<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.fire_time, other.0.seq).cmp(&(self.0.fire_time, self.0.seq))
    }
}

/// Priority queue yielding events by fire time, ties broken by insertion order.
pub struct EventQueue<P> {
    heap: BinaryHeap<Pending<P>>,
    next_seq: u64,
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
        }
    }

    pub fn push(&mut self, fire_time: SimTime, target: AgentId, payload: P) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Pending(Event {
            fire_time,
            seq,
            target,
            payload,
        }));
        seq
    }

    pub fn pop(&mut self) -> Option<Event<P>> {
        self.heap.pop().map(|p| p.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle given to event handlers for reading the clock and enqueueing future events.
pub struct Scheduler<P> {
    now: SimTime,
    queue: EventQueue<P>,
}

impl<P> Scheduler<P> {
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule(&mut self, at: SimTime, target: AgentId, payload: P) -> Result<(), KernelError> {
        if at < self.now {
            return Err(KernelError::CausalityViolation {
                now: self.now.seconds(),
                at: at.seconds(),
                target,
            });
        }
        self.queue.push(at, target, payload);
        Ok(())
    }

    pub fn schedule_after(&mut self, delay: f64, target: AgentId, payload: P) -> Result<(), KernelError> {
        let at = self.now.after(delay)?;
        self.schedule(at, target, payload)
    }
}

/// The agents of a simulation. The handler owns all mutable model state, so
/// after the loop finishes it *is* the final state.
pub trait Handler {
    type Payload: Tagged;

    fn handle(
        &mut self,
        event: Event<Self::Payload>,
        scheduler: &mut Scheduler<Self::Payload>,
    ) -> Result<(), KernelError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub time: SimTime,
    pub target: AgentId,
    pub tag: &'static str,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One line per processed event: `time<TAB>target<TAB>tag`, time with nine decimals.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.entries {
            writeln!(out, "{:.9}\t{}\t{}", e.time.seconds(), e.target, e.tag)?;
        }
        Ok(())
    }
}

/// Runs the handler until no events remain. Events are processed in
/// `(fire_time, seq)` order; the returned trace is empty unless `record_trace`.
pub fn run_event_loop<H, I>(initial: I, handler: &mut H, record_trace: bool) -> Result<Trace, KernelError>
where
    H: Handler,
    I: IntoIterator<Item = (SimTime, AgentId, H::Payload)>,
{
    let mut scheduler = Scheduler {
        now: SimTime::ZERO,
        queue: EventQueue::new(),
    };
    for (at, target, payload) in initial {
        scheduler.schedule(at, target, payload)?;
    }
    let mut trace = Trace::default();
    while let Some(event) = scheduler.queue.pop() {
        scheduler.now = event.fire_time;
        if record_trace {
            trace.entries.push(TraceEntry {
                time: event.fire_time,
                target: event.target,
                tag: event.payload.tag(),
            });
        }
        handler.handle(event, &mut scheduler)?;
    }
    Ok(trace)
}
