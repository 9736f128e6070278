//! Probabilistic models of decoding errors in repetition-redundancy (Chase
//! combining) HARQ.
//!
//! A receiver that combines retransmissions by maximum ratio combining sees,
//! after `k` rounds, an effective channel at the accumulated SNR
//! `γ_[k] = γ_1 + … + γ_k`. The probability that *all* of the first `k`
//! decoding attempts fail is not determined by the accumulated SNR alone, and
//! the crate provides several ways to model or measure it:
//!
//! - [`per_models`] — scalar packet-error-rate functions `PER(γ)` (ideal
//!   threshold, exponential threshold, interpolated tables) and curve fitting.
//! - [`error_models`] — the independent-error (IE) and deterministic-error
//!   (DE) approximations of the failure-sequence probability, plus a seeded
//!   sampler for system-level simulation.
//! - [`phy_sim`] — ground truth: a link-level Monte Carlo simulator
//!   (convolutional encoder, BPSK over AWGN, MRC, Viterbi decoding) that
//!   measures the joint error statistics directly.
//! - [`pep`] — pairwise error probabilities of maximum-likelihood decoding
//!   across rounds, their sandwich bounds, and union bounds over a distance
//!   spectrum.
//! - [`fading`] — Rayleigh block-fading averages: closed form and quadrature
//!   for the DE model, Monte Carlo for the IE model and for the exact link
//!   simulation, and the expected round count.
//!
//! SNR is linear (a dimensionless power ratio) everywhere in this crate; dB
//! conversions belong at the input/output boundary ([`db_to_linear`],
//! [`linear_to_db`]).

pub mod error_models;
pub mod fading;
pub mod mc;
pub mod pep;
pub mod per_models;
pub mod phy_sim;

pub use error_models::{HarqOutcome, ModelKind, SnrSchedule};
pub use per_models::PerModel;
pub use phy_sim::CodeSpec;

/// Converts an SNR in dB to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear SNR to dB.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
