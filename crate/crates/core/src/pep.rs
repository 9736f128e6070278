//! Pairwise error probabilities (PEPs) of maximum-likelihood decoding across
//! combining rounds, their sandwich bounds, and union bounds over a weight
//! spectrum.
//!
//! For two codewords at Euclidean distance `d`, the single-round PEP after
//! accumulating SNR `γ_[k]` is `Q(d/2·sqrt(γ_[k]))`. The joint PEP over
//! rounds `1..k` is an orthant probability of the correlated Gaussian walk
//! `s_l = Σ_{j≤l} sqrt(γ_j)·x_j` against the thresholds `c_l = d/2·γ_[l]`,
//! computed here by forward propagation of the truncated sub-density on a
//! quadrature grid.
//!
//! Rounds whose accumulated SNR is still zero impose no constraint: the
//! combined observation carries no signal and the pairwise comparison is
//! degenerate, which is what makes the upper bound attainable by schedules
//! with a single nonzero round. The Monte Carlo oracle instead resolves such
//! rounds as fair coin flips (the zero-SNR limit of the normalized decision
//! variable), matching the `Q(0) = 1/2` convention at `k = 1`.

use thiserror::Error;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error_models::SnrSchedule;
use crate::mc;

#[derive(Debug, Error)]
pub enum PepError {
    #[error("distance must be positive and finite, got {0}")]
    InvalidDistance(f64),
    #[error("joint pep over {rounds} rounds exceeds the configured limit {max}")]
    TooManyRounds { rounds: usize, max: usize },
    #[error("start round {0} out of range 1..={1}")]
    StartOutOfRange(usize, usize),
}

/// Standard Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard Gaussian density.
#[inline]
fn std_normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.39894228040143267794;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard Gaussian CDF.
#[inline]
fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// A joint-PEP problem: codeword-pair distance plus an SNR schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct PepProblem {
    d: f64,
    sched: SnrSchedule,
}

impl PepProblem {
    pub fn new(d: f64, sched: SnrSchedule) -> Result<Self, PepError> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(PepError::InvalidDistance(d));
        }
        Ok(Self { d, sched })
    }

    pub fn distance(&self) -> f64 {
        self.d
    }

    pub fn schedule(&self) -> &SnrSchedule {
        &self.sched
    }
}

/// Quadrature controls for [`pep_joint_with`].
#[derive(Debug, Clone, Copy)]
pub struct JointPepOptions {
    /// Grid points per propagation stage.
    pub grid_points: usize,
    /// Maximum supported round count (grid cost grows with rounds).
    pub max_rounds: usize,
}

impl Default for JointPepOptions {
    fn default() -> Self {
        JointPepOptions {
            grid_points: 2048,
            max_rounds: 8,
        }
    }
}

/// Single PEP `P_k(d) = Q(d/2·sqrt(γ_[k]))`.
pub fn pep_single(d: f64, snr_acc: f64) -> f64 {
    assert!(d > 0.0, "distance must be positive");
    assert!(snr_acc >= 0.0, "accumulated snr must be nonnegative");
    q_function(0.5 * d * snr_acc.sqrt())
}

/// Joint PEP `P_{1:k}(d)` with default quadrature options.
pub fn pep_joint(prob: &PepProblem) -> Result<f64, PepError> {
    pep_joint_with(prob, &JointPepOptions::default())
}

/// Joint PEP `P_{1:k}(d)`.
pub fn pep_joint_with(prob: &PepProblem, opts: &JointPepOptions) -> Result<f64, PepError> {
    pep_joint_from_with(prob, 1, opts)
}

/// Partial joint PEP `P_{l:k}(d)` over rounds `start..=k` (1-based), the walk
/// being unconstrained before `start`.
pub fn pep_joint_from(prob: &PepProblem, start: usize) -> Result<f64, PepError> {
    pep_joint_from_with(prob, start, &JointPepOptions::default())
}

pub fn pep_joint_from_with(
    prob: &PepProblem,
    start: usize,
    opts: &JointPepOptions,
) -> Result<f64, PepError> {
    let k = prob.sched.rounds();
    if start == 0 || start > k {
        return Err(PepError::StartOutOfRange(start, k));
    }
    if k > opts.max_rounds {
        return Err(PepError::TooManyRounds {
            rounds: k,
            max: opts.max_rounds,
        });
    }
    assert!(opts.grid_points >= 16, "grid too small");
    Ok(propagate(prob, start - 1, opts.grid_points))
}

/// Relative increment variance below which a stage is treated as adding
/// nothing (its truncation threshold moves by the same relative amount).
const SKIP_REL: f64 = 1e-8;
/// Kernel-width-to-grid-step ratio above which plain Simpson summation of the
/// sampled kernel is accurate; below it the kernel is integrated exactly
/// against a piecewise-cubic interpolant of the density.
const BROAD_KERNEL_RATIO: f64 = 3.0;
/// Bulk grids extend to this many standard deviations.
const TAIL_SIGMAS: f64 = 8.0;
/// Deep-tail grids keep this much conditional decay beyond the threshold.
const TAIL_DECAY: f64 = 45.0;
/// Gaussian kernels are truncated beyond this many standard deviations.
const KERNEL_WINDOW: f64 = 9.5;

struct Grid {
    lo: f64,
    step: f64,
    points: Vec<f64>,
}

impl Grid {
    /// Grid over the support of the sub-density of a walk with variance
    /// `var`, truncated below `c`: from `c` up to the larger of `8σ` (bulk)
    /// and the conditional-decay extent `c + 45·var/max(c, 8σ)` (deep tail).
    fn stage(c: f64, var: f64, n: usize) -> Grid {
        let sigma = var.sqrt();
        let hi = (TAIL_SIGMAS * sigma).max(c + TAIL_DECAY * var / c.max(TAIL_SIGMAS * sigma));
        let step = (hi - c) / (n - 1) as f64;
        let points = (0..n).map(|i| c + step * i as f64).collect();
        Grid {
            lo: c,
            step,
            points,
        }
    }
}

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2);
    let mut w = vec![0.0; n];
    let intervals = n - 1;
    if intervals == 1 {
        w[0] = h / 2.0;
        w[1] = h / 2.0;
        return w;
    }
    let simpson_upto = if intervals % 2 == 0 {
        intervals
    } else {
        intervals - 3
    };
    if simpson_upto > 0 {
        w[0] += h / 3.0;
        w[simpson_upto] += h / 3.0;
        let mut i = 1;
        while i < simpson_upto {
            w[i] += 4.0 * h / 3.0;
            i += 2;
        }
        let mut i = 2;
        while i < simpson_upto {
            w[i] += 2.0 * h / 3.0;
            i += 2;
        }
    }
    if intervals % 2 == 1 {
        // 3/8 rule over the last three intervals.
        let base = intervals - 3;
        w[base] += 3.0 * h / 8.0;
        w[base + 1] += 9.0 * h / 8.0;
        w[base + 2] += 9.0 * h / 8.0;
        w[base + 3] += 3.0 * h / 8.0;
    }
    w
}

/// Forward density propagation from round `start_idx` (0-based).
fn propagate(prob: &PepProblem, start_idx: usize, n: usize) -> f64 {
    let acc = prob.sched.accumulated();
    let per_round = prob.sched.per_round();
    let half_d = 0.5 * prob.d;

    // Rounds with zero accumulated SNR impose no constraint; start the walk
    // at the first constrained round.
    let Some(first) = (start_idx..acc.len()).find(|&l| acc[l] > 0.0) else {
        // Degenerate all-zero schedule: the single-round convention Q(0).
        return pep_single(prob.d, 0.0);
    };

    let mut grid = Grid::stage(half_d * acc[first], acc[first], n);
    let var0 = acc[first];
    let mut density: Vec<f64> = grid
        .points
        .iter()
        .map(|&s| std_normal_pdf(s / var0.sqrt()) / var0.sqrt())
        .collect();
    let mut stages = 0usize;

    for l in first + 1..acc.len() {
        let inc = per_round[l];
        if inc == 0.0 || inc <= SKIP_REL * acc[l - 1] {
            // Zero (or negligible) increment: the threshold is unchanged, so
            // the truncation step is a no-op on the already-truncated density.
            continue;
        }
        let next = Grid::stage(half_d * acc[l], acc[l], n);
        let sigma = inc.sqrt();
        density = if sigma >= BROAD_KERNEL_RATIO * grid.step {
            convolve_broad(&grid, &density, &next, inc)
        } else {
            convolve_narrow(&grid, &density, &next, sigma)
        };
        grid = next;
        stages += 1;
    }

    if stages == 0 {
        // Single effective constraint: exact tail value.
        return pep_single(prob.d, *acc.last().unwrap());
    }
    let w = simpson_weights(n, grid.step);
    w.iter().zip(&density).map(|(wi, gi)| wi * gi).sum()
}

/// Direct weighted summation of the sampled Gaussian kernel (Simpson weights
/// on the source grid). Valid when the kernel is well resolved.
///
/// On a uniform grid the kernel values along a row satisfy an exact
/// two-multiplication recurrence (`k_{j+1} = k_j·m_j`, `m_{j+1} = m_j·c`),
/// which replaces the per-sample `exp` with two products; the accumulated
/// relative rounding over a row is ~n·ulp, far below the quadrature error.
fn convolve_broad(src: &Grid, density: &[f64], dst: &Grid, var_inc: f64) -> Vec<f64> {
    let n = src.points.len();
    let w = simpson_weights(n, src.step);
    let weighted: Vec<f64> = w.iter().zip(density).map(|(wi, gi)| wi * gi).collect();
    let h = src.step;
    let sigma = var_inc.sqrt();
    // 38σ keeps the edge kernel value above the f64 underflow threshold so
    // the recurrence never starts from a hard zero.
    let window = 38.0 * sigma;
    let inv_norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let inv_2var = 1.0 / (2.0 * var_inc);
    let c = (-h * h / var_inc).exp();
    dst.points
        .iter()
        .map(|&t| {
            let j_lo = (((t - window) - src.lo) / h).floor().max(0.0) as usize;
            let j_hi = ((((t + window) - src.lo) / h).ceil() as usize).min(n - 1);
            if j_lo > j_hi {
                return 0.0;
            }
            let a0 = t - src.points[j_lo];
            let mut kernel = (-a0 * a0 * inv_2var).exp();
            let mut step = ((2.0 * a0 * h - h * h) * inv_2var).exp();
            let mut sum = 0.0;
            for &wg in &weighted[j_lo..=j_hi] {
                sum += wg * kernel;
                kernel *= step;
                step *= c;
            }
            sum * inv_norm
        })
        .collect()
}

/// Exact convolution of the piecewise-cubic interpolant of the density with
/// the Gaussian increment kernel, for kernels narrower than the grid step.
fn convolve_narrow(src: &Grid, density: &[f64], dst: &Grid, sigma: f64) -> Vec<f64> {
    let n = src.points.len();
    let h = src.step;
    let window = KERNEL_WINDOW * sigma;
    dst.points
        .iter()
        .map(|&t| {
            let j_lo = (((t - window) - src.lo) / h).floor().max(0.0) as usize;
            let j_hi = (((t + window) - src.lo) / h).ceil().min((n - 2) as f64) as usize;
            if j_lo > j_hi || j_lo >= n - 1 {
                return 0.0;
            }
            let mut sum = 0.0;
            // Segment endpoints share Gaussian evaluations; carry them.
            let mut a = (src.points[j_lo] - t) / sigma;
            let mut cdf_a = std_normal_cdf(a);
            let mut pdf_a = std_normal_pdf(a);
            for j in j_lo..=j_hi {
                let b = (src.points[j + 1] - t) / sigma;
                let cdf_b = std_normal_cdf(b);
                let pdf_b = std_normal_pdf(b);
                // Gaussian moments over [a, b].
                let m0 = cdf_b - cdf_a;
                let m1 = pdf_a - pdf_b;
                let m2 = m0 + a * pdf_a - b * pdf_b;
                let m3 = 2.0 * m1 + a * a * pdf_a - b * b * pdf_b;
                // Cubic through the 4-point stencil around segment j, as a
                // polynomial in ξ = (u − u_j)/h.
                let j0 = j.saturating_sub(1).min(n - 4);
                let y = [
                    density[j0],
                    density[j0 + 1],
                    density[j0 + 2],
                    density[j0 + 3],
                ];
                let c = cubic_coeffs(y, j as isize - j0 as isize);
                // Rebase onto w = (u − t)/σ: ξ = α + βw.
                let alpha = (t - src.points[j]) / h;
                let beta = sigma / h;
                let d0 = c[0] + alpha * (c[1] + alpha * (c[2] + alpha * c[3]));
                let d1 = beta * (c[1] + alpha * (2.0 * c[2] + 3.0 * alpha * c[3]));
                let d2 = beta * beta * (c[2] + 3.0 * alpha * c[3]);
                let d3 = beta * beta * beta * c[3];
                sum += d0 * m0 + d1 * m1 + d2 * m2 + d3 * m3;
                a = b;
                cdf_a = cdf_b;
                pdf_a = pdf_b;
            }
            sum.max(0.0)
        })
        .collect()
}

/// Monomial coefficients of the Lagrange cubic through `y` at nodes whose
/// positions relative to the segment origin are `{-offset, 1-offset, …}`
/// where `offset = j − j0 ∈ {0, 1, 2}`.
fn cubic_coeffs(y: [f64; 4], offset: isize) -> [f64; 4] {
    let [ya, yb, yc, yd] = y;
    match offset {
        // Nodes at ξ ∈ {0, 1, 2, 3} (left edge).
        0 => [
            ya,
            -11.0 * ya / 6.0 + 3.0 * yb - 1.5 * yc + yd / 3.0,
            ya - 2.5 * yb + 2.0 * yc - 0.5 * yd,
            (-ya + 3.0 * yb - 3.0 * yc + yd) / 6.0,
        ],
        // Nodes at ξ ∈ {−1, 0, 1, 2} (interior).
        1 => [
            yb,
            -ya / 3.0 - yb / 2.0 + yc - yd / 6.0,
            0.5 * ya - yb + 0.5 * yc,
            (-ya + 3.0 * yb - 3.0 * yc + yd) / 6.0,
        ],
        // Nodes at ξ ∈ {−2, −1, 0, 1} (right edge).
        2 => [
            yc,
            ya / 6.0 - yb + 0.5 * yc + yd / 3.0,
            0.5 * yb - yc + 0.5 * yd,
            (-ya + 3.0 * yb - 3.0 * yc + yd) / 6.0,
        ],
        _ => unreachable!("stencil offset is 0..=2"),
    }
}

/// Monte Carlo estimate of the joint PEP: i.i.d. standard-normal increments
/// form the walk, counting joint exceedance. Returns `(estimate, stderr)`;
/// deterministic given the seed for any worker count.
///
/// Rounds with zero accumulated SNR contribute the sign of the unweighted
/// increment walk (a fair coin), the limit of the normalized decision
/// variable as the SNRs vanish.
pub fn pep_joint_mc(prob: &PepProblem, samples: u64, rng_seed: u64) -> (f64, f64) {
    assert!(samples >= 1);
    let acc = prob.sched.accumulated().to_vec();
    let amps: Vec<f64> = prob.sched.per_round().iter().map(|&g| g.sqrt()).collect();
    let half_d = 0.5 * prob.d;
    let blocks = mc::run_blocks(samples, |range| {
        let mut hits = 0u64;
        for i in range {
            let mut rng = mc::stream_rng(rng_seed, i);
            let mut s = 0.0f64;
            let mut unweighted = 0.0f64;
            let mut ok = true;
            for (l, &amp) in amps.iter().enumerate() {
                let x: f64 = rng.sample(StandardNormal);
                s += amp * x;
                if acc[l] > 0.0 {
                    ok &= s > half_d * acc[l];
                } else {
                    unweighted += x;
                    ok &= unweighted > 0.0;
                }
                if !ok {
                    break;
                }
            }
            hits += ok as u64;
        }
        hits
    });
    let hits: u64 = blocks.iter().sum();
    let p = hits as f64 / samples as f64;
    (p, mc::binomial_stderr(p, samples))
}

/// Sandwich-bound check for one problem.
#[derive(Debug, Clone, Copy)]
pub struct PepBoundsReport {
    /// `P_k(d) / 2^{k−1}`.
    pub lower: f64,
    /// Quadrature `P_{1:k}(d)`.
    pub value: f64,
    /// `P_k(d)`.
    pub upper: f64,
    /// `1e-9` plus ten times the grid-doubling error estimate.
    pub epsilon: f64,
    pub holds: bool,
}

/// Evaluates the sandwich `2^{−(k−1)}·P_k(d) ≤ P_{1:k}(d) ≤ P_k(d)` within a
/// tolerance derived from the quadrature's own convergence.
pub fn check_pep_bounds(prob: &PepProblem) -> Result<PepBoundsReport, PepError> {
    let opts = JointPepOptions::default();
    let coarse = pep_joint_with(prob, &opts)?;
    let fine = pep_joint_with(
        prob,
        &JointPepOptions {
            grid_points: opts.grid_points * 2,
            ..opts
        },
    )?;
    let value = fine;
    let epsilon = 1e-9 + 10.0 * (fine - coarse).abs();
    let upper = pep_single(prob.d, prob.sched.total());
    let k = prob.sched.rounds();
    let lower = upper / 2f64.powi(k as i32 - 1);
    Ok(PepBoundsReport {
        lower,
        value,
        upper,
        epsilon,
        holds: lower - epsilon <= value && value <= upper + epsilon,
    })
}

/// One row of a geometric-ratio sweep.
#[derive(Debug, Clone, Copy)]
pub struct RatioPoint {
    /// Per-round SNR growth factor `t = γ_l / γ_{l−1}`.
    pub t: f64,
    pub p_joint: f64,
    pub p_single: f64,
    /// `P_k / 2^{k−1}`.
    pub lower_bound: f64,
    /// `p_joint / p_single`.
    pub ratio: f64,
}

/// Joint and single PEPs for schedules `γ_l = γ_{l−1}·t`, one row per `t`.
pub fn sweep_ratio(
    k: usize,
    d: f64,
    snr_1: f64,
    t_values: &[f64],
) -> Result<Vec<RatioPoint>, PepError> {
    assert!(k >= 2, "ratio sweep needs at least two rounds");
    assert!(snr_1 > 0.0);
    t_values
        .iter()
        .map(|&t| {
            assert!(t > 0.0, "snr ratios must be positive");
            let mut rounds = Vec::with_capacity(k);
            let mut g = snr_1;
            for _ in 0..k {
                rounds.push(g);
                g *= t;
            }
            let sched = SnrSchedule::new(rounds).expect("positive snrs");
            let total = sched.total();
            let prob = PepProblem::new(d, sched)?;
            let p_joint = pep_joint(&prob)?;
            let p_single = pep_single(d, total);
            Ok(RatioPoint {
                t,
                p_joint,
                p_single,
                lower_bound: p_single / 2f64.powi(k as i32 - 1),
                ratio: p_joint / p_single,
            })
        })
        .collect()
}

/// Union bound on the single-round error probability from a Hamming weight
/// spectrum: `Σ_w B_w·Q(sqrt(w·γ))`, clamped to 1. Uses the antipodal BPSK
/// mapping `d = 2·sqrt(w)`.
pub fn union_bound_per(spectrum: &[(u32, u64)], snr_acc: f64) -> f64 {
    assert!(!spectrum.is_empty(), "spectrum must be non-empty");
    assert!(snr_acc >= 0.0);
    let sum: f64 = spectrum
        .iter()
        .map(|&(w, b)| b as f64 * q_function((w as f64 * snr_acc).sqrt()))
        .sum();
    sum.min(1.0)
}

/// Union bound on the joint error probability over the schedule:
/// `Σ_w B_w·P_{1:k}(2·sqrt(w))`, clamped to 1.
pub fn union_bound_joint(spectrum: &[(u32, u64)], sched: &SnrSchedule) -> Result<f64, PepError> {
    assert!(!spectrum.is_empty(), "spectrum must be non-empty");
    let mut sum = 0.0;
    for &(w, b) in spectrum {
        let prob = PepProblem::new(2.0 * (w as f64).sqrt(), sched.clone())?;
        sum += b as f64 * pep_joint(&prob)?;
    }
    Ok(sum.min(1.0))
}
