//! Deterministic discrete-event core: simulated time, seeded random streams,
//! per-message delay sampling and the event loop that drives agent handlers.

mod delay;
mod event;
mod rng;
mod time;

pub use delay::{exponential_draw_pair, exponential_from_uniform, sample_delay, DelaySource, DelaySpec};
pub use event::{run_event_loop, AgentId, Event, EventQueue, Handler, Scheduler, Tagged, Trace, TraceEntry};
pub use rng::{split_stream, RngStream, StreamDomain};
pub use time::{Rate, SimTime};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("time must be a finite nonnegative number of seconds, got {0}")]
    InvalidTime(f64),
    #[error("rate must be a finite positive number (1/seconds), got {0}")]
    InvalidRate(f64),
    #[error("delay must be a finite nonnegative number of seconds, got {0}")]
    InvalidDelay(f64),
    #[error("scripted delays exhausted in run {run} at message index {index}")]
    ScriptExhausted { run: u64, index: usize },
    #[error("causality violation: event for agent {target} scheduled at {at} but current time is {now}")]
    CausalityViolation { now: f64, at: f64, target: AgentId },
}
