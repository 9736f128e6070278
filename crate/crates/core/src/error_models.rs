//! Failure-sequence probabilities under the independent-error (IE) and
//! deterministic-error (DE) approximations, and a seeded outcome sampler for
//! system-level simulation.
//!
//! Both models predict the probability that every one of the first `k`
//! decoding attempts fails, using only the scalar PER function:
//!
//! - IE treats per-round decoding errors as independent events, multiplying
//!   the per-round error probabilities: `∏_l PER(γ_[l])`.
//! - DE treats an error at the latest round as implying all earlier errors
//!   (the earlier attempts saw strictly less accumulated SNR), giving
//!   `PER(γ_[k])` — an upper bound on the true joint probability.
//!
//! For an ideal hard threshold the two coincide; for realistic PER curves the
//! IE product can be far too optimistic.

use rand::Rng;
use thiserror::Error;

use crate::mc;
use crate::per_models::PerModel;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("schedule needs at least one round")]
    Empty,
    #[error("round {0} snr is negative or NaN: {1}")]
    InvalidSnr(usize, f64),
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("k_max must be at least 1")]
    ZeroRounds,
    #[error("schedule has {have} rounds but k_max is {want}")]
    ScheduleTooShort { have: usize, want: usize },
}

/// Per-round linear SNRs `γ_1..γ_k` with their accumulated prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSchedule {
    per_round: Vec<f64>,
    accumulated: Vec<f64>,
}

impl SnrSchedule {
    pub fn new(per_round: Vec<f64>) -> Result<Self, ScheduleError> {
        if per_round.is_empty() {
            return Err(ScheduleError::Empty);
        }
        for (i, &snr) in per_round.iter().enumerate() {
            if snr.is_nan() || snr < 0.0 {
                return Err(ScheduleError::InvalidSnr(i + 1, snr));
            }
        }
        let accumulated = per_round
            .iter()
            .scan(0.0, |acc, &snr| {
                *acc += snr;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            per_round,
            accumulated,
        })
    }

    /// Number of rounds `k`.
    pub fn rounds(&self) -> usize {
        self.per_round.len()
    }

    pub fn per_round(&self) -> &[f64] {
        &self.per_round
    }

    /// Accumulated SNRs `γ_[1]..γ_[k]`.
    pub fn accumulated(&self) -> &[f64] {
        &self.accumulated
    }

    /// Accumulated SNR after the final round, `γ_[k]`.
    pub fn total(&self) -> f64 {
        *self.accumulated.last().unwrap()
    }

    /// The first `k` rounds as a schedule.
    pub fn prefix(&self, k: usize) -> SnrSchedule {
        assert!(k >= 1 && k <= self.rounds());
        SnrSchedule {
            per_round: self.per_round[..k].to_vec(),
            accumulated: self.accumulated[..k].to_vec(),
        }
    }
}

/// Which joint-error approximation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Independent errors: failure probability is the product of per-round
    /// error probabilities.
    Ie,
    /// Deterministic errors: the latest error implies all earlier ones, so
    /// the failure probability is the latest error probability alone.
    De,
}

/// Result of sampling one HARQ delivery attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarqOutcome {
    /// Rounds actually carried out, `1..=k_max`.
    pub rounds_used: usize,
    /// Whether the message was delivered within `k_max` rounds.
    pub delivered: bool,
    /// Decoding-error flag per carried-out round. All but the last are
    /// necessarily `true` (a new round happens only after an error).
    pub error_flags: Vec<bool>,
}

impl HarqOutcome {
    /// Checks the structural invariants; used by tests and debug assertions.
    pub fn is_valid(&self) -> bool {
        self.rounds_used >= 1
            && self.error_flags.len() == self.rounds_used
            && self.error_flags[..self.rounds_used - 1].iter().all(|&e| e)
            && self.delivered == !self.error_flags[self.rounds_used - 1]
    }
}

/// Probability that all of rounds `1..=k` fail, for `k` the schedule length.
pub fn failure_prob(kind: ModelKind, per: &PerModel, sched: &SnrSchedule) -> f64 {
    let eval = |snr: f64| per.eval(snr).expect("schedule snr is nonnegative");
    match kind {
        ModelKind::Ie => sched.accumulated().iter().map(|&g| eval(g)).product(),
        ModelKind::De => eval(sched.total()),
    }
}

/// Conditional probability that round `k` fails given rounds `1..k` failed,
/// for `k` the schedule length.
///
/// For `k = 1` the condition is empty and both models return `PER(γ_[1])`.
/// Under DE a zero denominator (failure at `k−1` impossible) yields 0.
pub fn cond_error_prob(kind: ModelKind, per: &PerModel, sched: &SnrSchedule) -> f64 {
    cond_error_prob_at(kind, per, sched, sched.rounds())
}

/// [`cond_error_prob`] at round `k` of a longer schedule (1-based).
pub fn cond_error_prob_at(
    kind: ModelKind,
    per: &PerModel,
    sched: &SnrSchedule,
    k: usize,
) -> f64 {
    assert!(k >= 1 && k <= sched.rounds(), "round {k} out of range");
    let eval = |snr: f64| per.eval(snr).expect("schedule snr is nonnegative");
    let acc = sched.accumulated();
    if k == 1 {
        return eval(acc[0]);
    }
    match kind {
        ModelKind::Ie => eval(acc[k - 1]),
        ModelKind::De => {
            let denom = eval(acc[k - 2]);
            if denom == 0.0 {
                // Conditioning on an impossible event; any value is
                // consistent and 0 avoids NaN propagation.
                0.0
            } else {
                (eval(acc[k - 1]) / denom).clamp(0.0, 1.0)
            }
        }
    }
}

/// Draws one HARQ outcome: round-by-round Bernoulli errors with the model's
/// conditional probabilities, stopping at the first success or at `k_max`.
///
/// Deterministic given `rng_seed`.
pub fn sample_error_sequence(
    kind: ModelKind,
    per: &PerModel,
    sched: &SnrSchedule,
    k_max: usize,
    rng_seed: u64,
) -> Result<HarqOutcome, SampleError> {
    if k_max == 0 {
        return Err(SampleError::ZeroRounds);
    }
    if sched.rounds() < k_max {
        return Err(SampleError::ScheduleTooShort {
            have: sched.rounds(),
            want: k_max,
        });
    }
    let mut rng = mc::stream_rng(rng_seed, 0);
    let mut flags = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let p_err = cond_error_prob_at(kind, per, sched, k);
        let err = rng.gen::<f64>() < p_err;
        flags.push(err);
        if !err {
            break;
        }
    }
    let outcome = HarqOutcome {
        rounds_used: flags.len(),
        delivered: !flags.last().unwrap(),
        error_flags: flags,
    };
    debug_assert!(outcome.is_valid());
    Ok(outcome)
}
