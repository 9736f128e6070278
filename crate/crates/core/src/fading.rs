//! Rayleigh block-fading averages.
//!
//! With i.i.d. exponential per-round SNRs of mean `γ̄`, the accumulated SNR
//! after `k` rounds is Gamma(k, γ̄)-distributed, so the DE-model average
//! failure probability is a one-dimensional integral of `PER` against that
//! density — and a closed form for the threshold-exponential PER model. The
//! IE-model average needs the full k-dimensional expectation and is done by
//! Monte Carlo, as is the exact link-level average.

use rand::Rng;
use thiserror::Error;

use crate::error_models::{failure_prob, ModelKind, SnrSchedule};
use crate::mc;
use crate::per_models::PerModel;
use crate::phy_sim::{estimate_joint_errors, CodeSpec};

#[derive(Debug, Error)]
pub enum FadingError {
    #[error("average snr must be positive and finite, got {0}")]
    InvalidAvgSnr(f64),
    #[error("round count must be at least 1")]
    ZeroRounds,
    #[error("x must be nonnegative, got {0}")]
    NegativeX(f64),
    #[error("threshold must be nonnegative and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("decay slope must be positive and finite, got {0}")]
    InvalidSlope(f64),
}

/// Rayleigh block-fading setting: average per-round SNR and round index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingSpec {
    pub avg_snr: f64,
    pub rounds: u32,
}

impl FadingSpec {
    pub fn new(avg_snr: f64, rounds: u32) -> Result<Self, FadingError> {
        if !(avg_snr > 0.0) || !avg_snr.is_finite() {
            return Err(FadingError::InvalidAvgSnr(avg_snr));
        }
        if rounds == 0 {
            return Err(FadingError::ZeroRounds);
        }
        Ok(FadingSpec { avg_snr, rounds })
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k as u64).map(|i| i as f64).product()
}

/// Regularized upper incomplete gamma `Q(k, x) = Γ(k, x)/Γ(k)` for integer
/// `k ≥ 1`, via the finite sum `e^{−x}·Σ_{j<k} x^j/j!`.
pub fn upper_gamma_regularized(k: u32, x: f64) -> f64 {
    assert!(k >= 1);
    assert!(x >= 0.0);
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for j in 1..k {
        term *= x / j as f64;
        sum += term;
    }
    ((-x).exp() * sum).clamp(0.0, 1.0)
}

/// Gamma(k, γ̄) density of the accumulated SNR after `k` Rayleigh rounds:
/// `x^{k−1}/((k−1)!·γ̄^k)·e^{−x/γ̄}`.
pub fn gamma_pdf(k: u32, avg_snr: f64, x: f64) -> Result<f64, FadingError> {
    if k == 0 {
        return Err(FadingError::ZeroRounds);
    }
    if !(avg_snr > 0.0) || !avg_snr.is_finite() {
        return Err(FadingError::InvalidAvgSnr(avg_snr));
    }
    if !(x >= 0.0) {
        return Err(FadingError::NegativeX(x));
    }
    // Log-space keeps large k and large x/γ̄ from overflowing.
    let log_pdf = (k as f64 - 1.0) * x.max(f64::MIN_POSITIVE).ln()
        - factorial(k - 1).ln()
        - k as f64 * avg_snr.ln()
        - x / avg_snr;
    Ok(if x == 0.0 {
        if k == 1 {
            1.0 / avg_snr
        } else {
            0.0
        }
    } else {
        log_pdf.exp()
    })
}

/// DE-model average failure probability `E[PER(Γ_k)]` by adaptive quadrature
/// of `PER(x)·gamma_pdf(x)`, integrating to where the Gamma tail is below
/// 1e-12 and splitting at the PER model's breakpoints.
pub fn avg_failure_de_numeric(per: &PerModel, k: u32, avg_snr: f64) -> f64 {
    assert!(k >= 1);
    assert!(avg_snr > 0.0 && avg_snr.is_finite());
    let mut upper = avg_snr * (k as f64 + 10.0);
    while upper_gamma_regularized(k, upper / avg_snr) >= 1e-12 {
        upper *= 2.0;
    }
    let f = |x: f64| {
        per.eval(x).expect("x is nonnegative") * gamma_pdf(k, avg_snr, x).expect("valid args")
    };
    // Integration nodes placed so the opening samples of every panel see the
    // integrand's support: the model's breakpoints, the Gamma bulk, and —
    // when the PER decays exponentially — its decay scale past the
    // threshold. A fast decay (g·γ̄ ≫ 1) otherwise hides the entire mass
    // inside one wide panel.
    let mut nodes = vec![0.0];
    for b in per.breakpoints() {
        nodes.push(b);
    }
    for bulk in [avg_snr * k as f64, 4.0 * avg_snr * k as f64] {
        nodes.push(bulk);
    }
    if let (Some(th), Some(g)) = (per.snr_threshold(), per.slope_g()) {
        for scale in [1.0, 5.0, 25.0] {
            nodes.push(th + scale / g);
        }
    }
    nodes.retain(|&x| x > 0.0 && x < upper);
    nodes.push(0.0);
    nodes.push(upper);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();

    let rough: f64 = nodes
        .windows(2)
        .map(|w| simpson_rough(&f, w[0], w[1]))
        .sum();
    let tol = (1e-12 * rough.abs()).max(1e-30);
    let value: f64 = nodes
        .windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], tol))
        .sum();
    value.clamp(0.0, 1.0)
}

fn simpson_rough(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        m: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        // The relative-noise-floor acceptance stops refinement once the
        // correction is below f64 resolution of the local integral, whatever
        // the absolute tolerance asks for.
        if depth == 0 || delta.abs() <= 15.0 * tol || delta.abs() <= 1e-14 * (left + right).abs() {
            return left + right + delta / 15.0;
        }
        recurse(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, m, b, fa, fm, fb, whole, tol, 48)
}

/// Closed-form DE-model average failure probability for the
/// threshold-exponential PER model:
/// `(Γ(k) − Γ(k, th/γ̄) + e^{g·th}·(gγ̄+1)^{−k}·Γ(k, (g+1/γ̄)·th)) / (k−1)!`.
///
/// Evaluated with the exponentials combined so large `g·th` cannot overflow.
pub fn avg_failure_de_closed(
    snr_threshold: f64,
    slope_g: f64,
    k: u32,
    avg_snr: f64,
) -> Result<f64, FadingError> {
    if k == 0 {
        return Err(FadingError::ZeroRounds);
    }
    if !(avg_snr > 0.0) || !avg_snr.is_finite() {
        return Err(FadingError::InvalidAvgSnr(avg_snr));
    }
    if !(snr_threshold >= 0.0) || !snr_threshold.is_finite() {
        return Err(FadingError::InvalidThreshold(snr_threshold));
    }
    if !(slope_g > 0.0) || !slope_g.is_finite() {
        return Err(FadingError::InvalidSlope(slope_g));
    }
    let outage = 1.0 - upper_gamma_regularized(k, snr_threshold / avg_snr);
    // e^{g·th}·Q(k, (g+1/γ̄)·th) = e^{−th/γ̄}·Σ_{j<k} ((g+1/γ̄)·th)^j / j!.
    let x = (slope_g + 1.0 / avg_snr) * snr_threshold;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for j in 1..k {
        term *= x / j as f64;
        sum += term;
    }
    let decay = (-snr_threshold / avg_snr).exp() * (slope_g * avg_snr + 1.0).powi(-(k as i32)) * sum;
    Ok((outage + decay).clamp(0.0, 1.0))
}

/// IE-model average failure probability by Monte Carlo over the k per-round
/// exponential SNRs. Returns `(mean, stderr)`; deterministic given the seed
/// for any worker count.
pub fn avg_failure_ie_mc(
    per: &PerModel,
    k: u32,
    avg_snr: f64,
    trials: u64,
    rng_seed: u64,
) -> (f64, f64) {
    assert!(k >= 1);
    assert!(avg_snr > 0.0 && avg_snr.is_finite());
    assert!(trials >= 1);
    let blocks = mc::run_blocks(trials, |range| {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut rounds = vec![0.0f64; k as usize];
        for trial in range {
            let mut rng = mc::stream_rng(rng_seed, trial);
            for g in rounds.iter_mut() {
                // Inverse-CDF exponential draw, deterministic per stream.
                *g = -avg_snr * rng.gen::<f64>().ln();
            }
            let sched = SnrSchedule::new(rounds.clone()).expect("positive snrs");
            let f = failure_prob(ModelKind::Ie, per, &sched);
            sum += f;
            sum_sq += f * f;
        }
        (sum, sum_sq)
    });
    mc::mean_and_stderr(&blocks, trials)
}

/// Expected round count of unlimited-round HARQ under the DE closed form:
/// `K̄ = 1 + (th + 1/g)/γ̄`.
pub fn avg_rounds(snr_threshold: f64, slope_g: f64, avg_snr: f64) -> Result<f64, FadingError> {
    if !(avg_snr > 0.0) || !avg_snr.is_finite() {
        return Err(FadingError::InvalidAvgSnr(avg_snr));
    }
    if !(snr_threshold >= 0.0) || !snr_threshold.is_finite() {
        return Err(FadingError::InvalidThreshold(snr_threshold));
    }
    if !(slope_g > 0.0) || !slope_g.is_finite() {
        return Err(FadingError::InvalidSlope(slope_g));
    }
    Ok(1.0 + (snr_threshold + 1.0 / slope_g) / avg_snr)
}

/// The same expected round count as the series `1 + Σ_k f̂_k^avg`, truncated
/// once terms drop below 1e-12. Validates the closed form term by term.
pub fn avg_rounds_series(
    snr_threshold: f64,
    slope_g: f64,
    avg_snr: f64,
) -> Result<f64, FadingError> {
    let mut total = 1.0;
    for k in 1..10_000u32 {
        let term = avg_failure_de_closed(snr_threshold, slope_g, k, avg_snr)?;
        total += term;
        if term < 1e-12 {
            break;
        }
    }
    Ok(total)
}

/// Exact average failure probability `E[f_k]` over the fading distribution:
/// outer Monte Carlo over SNR draws, inner link-level estimation of `f_k`.
/// Returns `(mean, stderr)` with the inner binomial noise included in the
/// outer sample variance.
pub fn avg_failure_exact_mc(
    code: &CodeSpec,
    k: u32,
    avg_snr: f64,
    channel_trials: u64,
    link_trials: u64,
    rng_seed: u64,
) -> (f64, f64) {
    assert!(k >= 1);
    assert!(avg_snr > 0.0 && avg_snr.is_finite());
    assert!(channel_trials >= 1 && link_trials >= 1);
    let blocks = mc::run_blocks(channel_trials, |range| {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut rounds = vec![0.0f64; k as usize];
        for trial in range {
            let mut rng = mc::stream_rng(rng_seed, trial);
            for g in rounds.iter_mut() {
                *g = -avg_snr * rng.gen::<f64>().ln();
            }
            let inner_seed: u64 = rng.gen();
            let sched = SnrSchedule::new(rounds.clone()).expect("positive snrs");
            let est = estimate_joint_errors(code, &sched, link_trials, inner_seed);
            let f = est.joint_counts[k as usize - 1] as f64 / link_trials as f64;
            sum += f;
            sum_sq += f * f;
        }
        (sum, sum_sq)
    });
    mc::mean_and_stderr(&blocks, channel_trials)
}
