//! Ground-truth link-level Monte Carlo: systematic recursive convolutional
//! encoding, BPSK over per-round AWGN, maximum ratio combining, and Viterbi
//! decoding, measuring the joint decoding-error statistics across rounds.
//!
//! All rounds of a trial are simulated and decoded whether or not an earlier
//! round succeeded: decoding errors are receiver events, independent of the
//! feedback protocol, and measuring them jointly on the same trials is what
//! lets joint and marginal statistics share a sample set.

mod spectrum;
mod viterbi;

pub use spectrum::{distance_spectrum, free_distance};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::error_models::SnrSchedule;
use crate::mc;
use viterbi::Trellis;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("memory must be in 1..=16, got {0}")]
    InvalidMemory(usize),
    #[error("message length must be at least 1")]
    EmptyMessage,
    #[error("generator polynomial {0:#o} does not fit constraint length {1}")]
    PolynomialTooLong(u32, usize),
    #[error("feedback polynomial must have its D^0 coefficient set")]
    FeedbackNotMonic,
    #[error("message has {got} bits, code expects {want}")]
    WrongMessageLength { got: usize, want: usize },
}

#[derive(Debug, Error)]
pub enum PhyError {
    #[error("mrc needs at least one block")]
    NoBlocks,
    #[error("block {0} has {1} samples, expected {2}")]
    LengthMismatch(usize, usize, usize),
}

/// A rate-1/2 systematic recursive convolutional code with zero-state
/// termination.
///
/// The parity branch has transfer function `feedforward / feedback` with the
/// polynomials given in octal (D^0 in the most significant used bit, e.g.
/// `0o15` is `1 + D + D^3`). Each input bit emits (systematic, parity);
/// `memory` tail steps drive the encoder back to state zero, so the codeword
/// has `2·(msg_len + memory)` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSpec {
    feedforward: u32,
    feedback: u32,
    memory: usize,
    msg_len: usize,
}

impl CodeSpec {
    pub fn new(
        feedforward: u32,
        feedback: u32,
        memory: usize,
        msg_len: usize,
    ) -> Result<Self, CodeError> {
        if memory == 0 || memory > 16 {
            return Err(CodeError::InvalidMemory(memory));
        }
        if msg_len == 0 {
            return Err(CodeError::EmptyMessage);
        }
        let k = memory + 1;
        for &poly in &[feedforward, feedback] {
            if poly >= (1 << k) {
                return Err(CodeError::PolynomialTooLong(poly, k));
            }
        }
        if (feedback >> memory) & 1 == 0 {
            return Err(CodeError::FeedbackNotMonic);
        }
        Ok(Self {
            feedforward,
            feedback,
            memory,
            msg_len,
        })
    }

    pub fn feedforward(&self) -> u32 {
        self.feedforward
    }

    pub fn feedback(&self) -> u32 {
        self.feedback
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    /// Message length `N_b` in bits.
    pub fn msg_len(&self) -> usize {
        self.msg_len
    }

    /// Codeword length `N_s = 2·(N_b + memory)`, termination tail included.
    pub fn codeword_len(&self) -> usize {
        2 * (self.msg_len + self.memory)
    }

    /// Nominal rate `R = N_b / N_s`.
    pub fn rate(&self) -> f64 {
        self.msg_len as f64 / self.codeword_len() as f64
    }
}

/// One round's received samples, one real value per BPSK symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    pub samples: Vec<f64>,
    /// Linear SNR at which the block was received (accumulated SNR for
    /// combined blocks).
    pub snr: f64,
}

/// Empirical joint and marginal decoding-error statistics over `k` rounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointErrorEstimate {
    pub trials: u64,
    /// `joint_counts[k-1]` = number of trials with errors in all rounds
    /// `1..=k`.
    pub joint_counts: Vec<u64>,
    /// `marginal_counts[k-1]` = number of trials with an error in round `k`.
    pub marginal_counts: Vec<u64>,
}

impl JointErrorEstimate {
    /// Empirical `P(ERR_1, …, ERR_k)` per `k`.
    pub fn f_hat(&self) -> Vec<f64> {
        self.joint_counts
            .iter()
            .map(|&c| c as f64 / self.trials as f64)
            .collect()
    }

    /// Empirical `P(ERR_k)` per `k`.
    pub fn marginal(&self) -> Vec<f64> {
        self.marginal_counts
            .iter()
            .map(|&c| c as f64 / self.trials as f64)
            .collect()
    }

    pub fn f_hat_stderr(&self) -> Vec<f64> {
        self.f_hat()
            .iter()
            .map(|&p| mc::binomial_stderr(p, self.trials))
            .collect()
    }

    pub fn marginal_stderr(&self) -> Vec<f64> {
        self.marginal()
            .iter()
            .map(|&p| mc::binomial_stderr(p, self.trials))
            .collect()
    }
}

/// BPSK map: bit 0 → +1, bit 1 → −1.
#[inline]
fn bpsk(bit: u8) -> f64 {
    1.0 - 2.0 * bit as f64
}

/// Encodes `msg` with zero-state termination. Output interleaves
/// (systematic, parity) per input bit, then per tail bit.
pub fn conv_encode(msg: &[u8], code: &CodeSpec) -> Result<Vec<u8>, CodeError> {
    if msg.len() != code.msg_len {
        return Err(CodeError::WrongMessageLength {
            got: msg.len(),
            want: code.msg_len,
        });
    }
    let trellis = Trellis::new(code);
    Ok(trellis.encode(msg))
}

/// Transmits a codeword over AWGN at the given linear SNR:
/// `y = sqrt(snr)·x + z` with unit-variance Gaussian `z`.
/// Deterministic given `rng_seed`.
pub fn transmit_round(codeword: &[u8], snr: f64, rng_seed: u64) -> ReceivedBlock {
    assert!(snr >= 0.0, "snr must be nonnegative");
    let amp = snr.sqrt();
    let mut rng = mc::stream_rng(rng_seed, 0);
    let samples = codeword
        .iter()
        .map(|&b| {
            let z: f64 = rng.sample(StandardNormal);
            amp * bpsk(b) + z
        })
        .collect();
    ReceivedBlock { samples, snr }
}

/// Maximum ratio combining of per-round blocks:
/// `y_[k] = Σ sqrt(γ_l)·y_l / sqrt(γ_[k])`, with `snr = γ_[k]`.
///
/// If every block has zero SNR the prefactor is undefined; the last block is
/// returned unchanged (it is pure noise either way).
pub fn mrc_combine(blocks: &[ReceivedBlock]) -> Result<ReceivedBlock, PhyError> {
    let first = blocks.first().ok_or(PhyError::NoBlocks)?;
    let len = first.samples.len();
    for (i, b) in blocks.iter().enumerate() {
        if b.samples.len() != len {
            return Err(PhyError::LengthMismatch(i, b.samples.len(), len));
        }
    }
    let total: f64 = blocks.iter().map(|b| b.snr).sum();
    if total == 0.0 {
        return Ok(ReceivedBlock {
            samples: blocks.last().unwrap().samples.clone(),
            snr: 0.0,
        });
    }
    let norm = total.sqrt();
    let mut samples = vec![0.0; len];
    for b in blocks {
        let w = b.snr.sqrt();
        if w == 0.0 {
            continue;
        }
        for (acc, &y) in samples.iter_mut().zip(&b.samples) {
            *acc += w * y;
        }
    }
    for s in &mut samples {
        *s /= norm;
    }
    Ok(ReceivedBlock { samples, snr: total })
}

/// Maximum-likelihood sequence estimate over the zero-terminated trellis
/// with Euclidean branch metrics. Ties resolve toward input bit 0.
pub fn viterbi_decode(block: &ReceivedBlock, code: &CodeSpec) -> Vec<u8> {
    assert_eq!(
        block.samples.len(),
        code.codeword_len(),
        "block length must equal the codeword length"
    );
    let trellis = Trellis::new(code);
    let mut work = viterbi::Workspace::new(&trellis);
    let mut msg = vec![0u8; code.msg_len];
    trellis.decode(&block.samples, block.snr.sqrt(), &mut work, &mut msg);
    msg
}

/// Estimates the joint error probabilities `P(ERR_1,…,ERR_k)` and marginals
/// `P(ERR_k)` by simulating `trials` transmissions over the schedule.
///
/// Per trial: draw a uniform random message, encode once, transmit every
/// round, and decode after each cumulative MRC combine. Trials use seeds
/// derived from `rng_seed` by trial index, so results are bit identical for
/// any worker count.
pub fn estimate_joint_errors(
    code: &CodeSpec,
    sched: &SnrSchedule,
    trials: u64,
    rng_seed: u64,
) -> JointErrorEstimate {
    assert!(trials >= 1);
    let k = sched.rounds();
    let trellis = Trellis::new(code);
    let n_s = code.codeword_len();
    let n_b = code.msg_len;

    let blocks = mc::run_blocks(trials, |range| {
        let mut joint = vec![0u64; k];
        let mut marginal = vec![0u64; k];
        let mut work = viterbi::Workspace::new(&trellis);
        let mut msg = vec![0u8; n_b];
        let mut decoded = vec![0u8; n_b];
        let mut weighted_sum = vec![0.0f64; n_s];
        let mut received = vec![0.0f64; n_s];
        let mut combined = vec![0.0f64; n_s];
        for trial in range {
            let mut rng = mc::stream_rng(rng_seed, trial);
            for bit in msg.iter_mut() {
                *bit = rng.gen::<bool>() as u8;
            }
            let codeword = trellis.encode(&msg);
            weighted_sum.iter_mut().for_each(|x| *x = 0.0);
            let mut snr_acc = 0.0;
            let mut all_failed = true;
            for (l, &snr) in sched.per_round().iter().enumerate() {
                let amp = snr.sqrt();
                for (i, &b) in codeword.iter().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    received[i] = amp * bpsk(b) + z;
                    weighted_sum[i] += amp * received[i];
                }
                snr_acc += snr;
                if snr_acc > 0.0 {
                    let norm = snr_acc.sqrt();
                    for (c, &w) in combined.iter_mut().zip(&weighted_sum) {
                        *c = w / norm;
                    }
                } else {
                    combined.copy_from_slice(&received);
                }
                trellis.decode(&combined, snr_acc.sqrt(), &mut work, &mut decoded);
                let err = decoded != msg;
                all_failed &= err;
                if err {
                    marginal[l] += 1;
                }
                if all_failed {
                    joint[l] += 1;
                }
            }
        }
        (joint, marginal)
    });

    let mut joint_counts = vec![0u64; k];
    let mut marginal_counts = vec![0u64; k];
    for (j, m) in blocks {
        for i in 0..k {
            joint_counts[i] += j[i];
            marginal_counts[i] += m[i];
        }
    }
    JointErrorEstimate {
        trials,
        joint_counts,
        marginal_counts,
    }
}
