//! Closed-form correctness probabilities, response-time bounds and their
//! inverse solvers.
//!
//! Probabilities close to one are the normal operating regime here, so every
//! solver goes through [`CorrectnessTarget`], which keeps `ln p` exact whether
//! the caller supplied `p` or its complement `1 - p`.

use thiserror::Error;

use crate::kernel::Rate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("probability must lie strictly between 0 and 1, got {0}")]
    InvalidProbability(f64),
    #[error("n must be at least {min}, got {n}")]
    InvalidN { n: u64, min: u64 },
    #[error("delta cap must be finite and {constraint}, got {value}")]
    InvalidDeltaCap { value: f64, constraint: &'static str },
    #[error("probability evaluated to {0}, outside [0, 1] beyond rounding slack")]
    OutOfRange(f64),
    #[error("no cutoff found below the search ceiling {0}")]
    CutoffBeyondCeiling(u64),
}

/// Slack allowed for floating-point excursions outside [0, 1] before clamping.
pub const PROBABILITY_SLACK: f64 = 1e-12;

/// Upper end of the exhaustive cutoff search.
pub const CUTOFF_CEILING: u64 = 1_000_000;

/// Above this, harmonic numbers switch from direct summation to the
/// asymptotic series (truncation error below 1e-30).
const HARMONIC_DIRECT_LIMIT: u64 = 10_000_000;

const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// A target correctness probability, held as `ln p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectnessTarget {
    ln_p: f64,
}

impl CorrectnessTarget {
    pub fn from_p(p: f64) -> Result<Self, AnalyticsError> {
        if p > 0.0 && p < 1.0 {
            Ok(CorrectnessTarget { ln_p: p.ln() })
        } else {
            Err(AnalyticsError::InvalidProbability(p))
        }
    }

    /// From `1 - p`; exact for complements far below machine epsilon.
    pub fn from_complement(one_minus_p: f64) -> Result<Self, AnalyticsError> {
        if one_minus_p > 0.0 && one_minus_p < 1.0 {
            Ok(CorrectnessTarget {
                ln_p: (-one_minus_p).ln_1p(),
            })
        } else {
            Err(AnalyticsError::InvalidProbability(1.0 - one_minus_p))
        }
    }

    pub fn ln_p(self) -> f64 {
        self.ln_p
    }

    pub fn p(self) -> f64 {
        self.ln_p.exp()
    }

    /// `1 - p^(1/m)`, computed without cancellation.
    fn root_complement(self, m: f64) -> f64 {
        -(self.ln_p / m).exp_m1()
    }
}

fn clamp_probability(v: f64) -> Result<f64, AnalyticsError> {
    if v.is_nan() || !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&v) {
        return Err(AnalyticsError::OutOfRange(v));
    }
    Ok(v.clamp(0.0, 1.0))
}

fn require_n(n: u64, min: u64) -> Result<(), AnalyticsError> {
    if n < min {
        Err(AnalyticsError::InvalidN { n, min })
    } else {
        Ok(())
    }
}

fn require_delta(delta: f64, positive: bool) -> Result<(), AnalyticsError> {
    let ok = delta.is_finite() && if positive { delta > 0.0 } else { delta >= 0.0 };
    if ok {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidDeltaCap {
            value: delta,
            constraint: if positive { "positive" } else { "nonnegative" },
        })
    }
}

/// Exact probability that a CORE(Δ) run is correct:
/// `sum_{k=0..n} q^(n-k) (1-q)^k / k!` with `q = 1 - e^(-λΔ)`.
pub fn core_correct_probability(n: u64, lambda: Rate, delta_cap: f64) -> Result<f64, AnalyticsError> {
    require_n(n, 1)?;
    require_delta(delta_cap, true)?;
    let late = (-lambda.lambda() * delta_cap).exp();
    let q = -(-lambda.lambda() * delta_cap).exp_m1();
    let mut inv_factorial = 1.0;
    let mut sum = 0.0;
    for k in 0..=n {
        if k > 0 {
            inv_factorial /= k as f64;
        }
        if inv_factorial == 0.0 {
            break;
        }
        sum += q.powf((n - k) as f64) * late.powf(k as f64) * inv_factorial;
    }
    clamp_probability(sum)
}

/// `(1 - e^(-λΔ))^n`: the chance that every trigger arrives by Δ.
pub fn core_correct_lower_bound(n: u64, lambda: Rate, delta_cap: f64) -> Result<f64, AnalyticsError> {
    require_n(n, 1)?;
    require_delta(delta_cap, false)?;
    let ln_q = (-(-lambda.lambda() * delta_cap).exp()).ln_1p();
    clamp_probability((n as f64 * ln_q).exp())
}

/// Smallest Δ with `core_correct_lower_bound >= p`: `-ln(1 - p^(1/n)) / λ`.
pub fn core_delta_for(n: u64, lambda: Rate, target: CorrectnessTarget) -> Result<f64, AnalyticsError> {
    require_n(n, 1)?;
    Ok(-target.root_complement(n as f64).ln() / lambda.lambda())
}

pub fn core_delta_for_p(n: u64, lambda: Rate, p: f64) -> Result<f64, AnalyticsError> {
    core_delta_for(n, lambda, CorrectnessTarget::from_p(p)?)
}

/// `H_n`, summed smallest term first.
pub fn harmonic(n: u64) -> f64 {
    if n <= HARMONIC_DIRECT_LIMIT {
        (1..=n).rev().map(|m| 1.0 / m as f64).sum()
    } else {
        let x = n as f64;
        let inv2 = 1.0 / (x * x);
        x.ln() + EULER_MASCHERONI + 0.5 / x - inv2 / 12.0 + inv2 * inv2 / 120.0
    }
}

/// `Δ + H_n / λ`, an upper bound on CORE's expected response time.
pub fn core_ert_upper_bound(n: u64, lambda: Rate, delta_cap: f64) -> f64 {
    delta_cap + harmonic(n) / lambda.lambda()
}

/// Lower bound on the probability that all n hypotheses land within
/// `ln(n) / (λ√n)` of the true input time. Zero for n < 115.
pub fn psi(n: u64) -> Result<f64, AnalyticsError> {
    require_n(n, 2)?;
    let (lo, hi) = psi_terms_ln(n);
    let v = 1.0 - lo.exp() - hi.exp();
    Ok(v.clamp(0.0, 1.0))
}

/// Natural logs of the two subtracted terms of Ψ(n), in exponent-sum form.
/// The literal products overflow around n = 150.
pub fn psi_terms_ln(n: u64) -> (f64, f64) {
    let x = n as f64;
    let root = x.sqrt();
    let ln_n = x.ln();
    let a = ln_n / (2.0 * root);
    let lower = 2.0 * x * (-a).ln_1p() + (1.0 + root) * ln_n;
    let upper = 2.0 * x * a.ln_1p() + (1.0 - root) * ln_n;
    (lower, upper)
}

/// Synchronization slack δ = ln(n) / (λ√n).
pub fn delta_sync(n: usize, lambda: Rate) -> f64 {
    debug_assert!(n >= 1, "delta_sync needs n >= 1");
    let x = n as f64;
    x.ln() / (lambda.lambda() * x.sqrt())
}

/// `(1 - e^(-λΔ/2))^((n+1)^2)`: every trigger+redirect pair arrives by Δ.
pub fn pacore_delivery_probability(n: u64, lambda: Rate, delta_cap: f64) -> Result<f64, AnalyticsError> {
    require_delta(delta_cap, false)?;
    let m = (n as f64 + 1.0).powi(2);
    let ln_q = (-(-0.5 * lambda.lambda() * delta_cap).exp()).ln_1p();
    clamp_probability((m * ln_q).exp())
}

/// `Ψ(n) · (1 - e^(-λΔ/2))^((n+1)^2)`.
pub fn pacore_correct_lower_bound(n: u64, lambda: Rate, delta_cap: f64) -> Result<f64, AnalyticsError> {
    let s = psi(n)?;
    if s == 0.0 {
        require_delta(delta_cap, false)?;
        return Ok(0.0);
    }
    Ok(s * pacore_delivery_probability(n, lambda, delta_cap)?)
}

/// Smallest Δ with delivery probability ≥ p: `-2 ln(1 - p^(1/(n+1)^2)) / λ`.
/// The Ψ(n) factor is not part of the inversion.
pub fn pacore_delta_for(n: u64, lambda: Rate, target: CorrectnessTarget) -> Result<f64, AnalyticsError> {
    require_n(n, 1)?;
    let m = (n as f64 + 1.0).powi(2);
    Ok(-2.0 * target.root_complement(m).ln() / lambda.lambda())
}

pub fn pacore_delta_for_p(n: u64, lambda: Rate, p: f64) -> Result<f64, AnalyticsError> {
    pacore_delta_for(n, lambda, CorrectnessTarget::from_p(p)?)
}

/// `2 H_(n²+n) / λ + Δ + 2δn`.
pub fn pacore_ert_upper_bound(n: u64, lambda: Rate, delta_cap: f64) -> f64 {
    let pairs = n.saturating_mul(n).saturating_add(n);
    2.0 * harmonic(pairs) / lambda.lambda() + delta_cap + 2.0 * delta_sync(n as usize, lambda) * n as f64
}

/// Smallest N such that a chain of every length n ≥ N is slower than the CORE
/// cap needed for target p, i.e. `n > -ln(1 - p^(1/n))` from N on. λ cancels.
/// Searched exhaustively up to [`CUTOFF_CEILING`].
pub fn cutoff_n(target: CorrectnessTarget) -> Result<u64, AnalyticsError> {
    let mut last_linear = 0;
    for n in 1..=CUTOFF_CEILING {
        let cap = -target.root_complement(n as f64).ln();
        if n as f64 <= cap {
            last_linear = n;
        }
    }
    if last_linear == CUTOFF_CEILING {
        return Err(AnalyticsError::CutoffBeyondCeiling(CUTOFF_CEILING));
    }
    Ok(last_linear + 1)
}

pub fn cutoff_n_for_p(p: f64) -> Result<u64, AnalyticsError> {
    cutoff_n(CorrectnessTarget::from_p(p)?)
}
