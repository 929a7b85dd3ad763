use serde::{Deserialize, Serialize};

use super::{KernelError, Rate, RngStream};

/// Serializable description of how message delays are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
#[derive(Default)]
pub enum DelaySpec {
    /// i.i.d. Exp(λ) delays with the rate taken from the surrounding configuration.
    #[default]
    Exponential,
    Constant { seconds: f64 },
    Scripted { seconds: Vec<f64> },
}

impl DelaySpec {
    pub fn validate(&self) -> Result<(), KernelError> {
        let check = |d: f64| {
            if d.is_finite() && d >= 0.0 {
                Ok(())
            } else {
                Err(KernelError::InvalidDelay(d))
            }
        };
        match self {
            DelaySpec::Exponential => Ok(()),
            DelaySpec::Constant { seconds } => check(*seconds),
            DelaySpec::Scripted { seconds } => seconds.iter().copied().try_for_each(check),
        }
    }

    /// Builds a fresh source; scripted sources start at the head of their list.
    pub fn source(&self, rate: Rate) -> DelaySource {
        match self {
            DelaySpec::Exponential => DelaySource::Exponential(rate),
            DelaySpec::Constant { seconds } => DelaySource::Constant(*seconds),
            DelaySpec::Scripted { seconds } => DelaySource::Scripted {
                delays: seconds.clone(),
                cursor: 0,
            },
        }
    }
}


/// Per-run delay generator.
#[derive(Debug, Clone, PartialEq)]
pub enum DelaySource {
    Exponential(Rate),
    Constant(f64),
    Scripted { delays: Vec<f64>, cursor: usize },
}

impl DelaySource {
    pub fn scripted(delays: Vec<f64>) -> Self {
        DelaySource::Scripted { delays, cursor: 0 }
    }
}

/// Inverse CDF of Exp(λ): `-ln(u) / λ` for `u` in (0, 1].
pub fn exponential_from_uniform(u: f64, rate: Rate) -> f64 {
    -u.ln() / rate.lambda()
}

/// Sum of two independent Exp(λ) delays (an Erlang(2, λ) draw) from a single logarithm.
pub fn exponential_draw_pair(stream: &mut RngStream, rate: Rate) -> f64 {
    let u = stream.uniform_open_closed() * stream.uniform_open_closed();
    -u.ln() / rate.lambda()
}

/// Draws the next message delay. Scripted sources report which run and which
/// message index ran dry.
pub fn sample_delay(source: &mut DelaySource, stream: &mut RngStream) -> Result<f64, KernelError> {
    match source {
        DelaySource::Exponential(rate) => Ok(exponential_from_uniform(stream.uniform_open_closed(), *rate)),
        DelaySource::Constant(d) => Ok(*d),
        DelaySource::Scripted { delays, cursor } => {
            let d = delays.get(*cursor).copied().ok_or(KernelError::ScriptExhausted {
                run: stream.stream_index(),
                index: *cursor,
            })?;
            *cursor += 1;
            Ok(d)
        }
    }
}
