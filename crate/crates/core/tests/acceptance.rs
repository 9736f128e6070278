//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them).
//!
//! Tolerances and operating points are fixed here; Monte Carlo checks use
//! hardcoded seeds so reruns are bit-identical.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Criteria run one at a time so each reported runtime is an honest wall
/// time, whatever `--test-threads` is.
static GATE: Mutex<()> = Mutex::new(());

fn gate() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

use harq_models::db_to_linear;
use harq_models::error_models::SnrSchedule;
use harq_models::fading::{
    avg_failure_de_closed, avg_failure_de_numeric, avg_failure_exact_mc, avg_failure_ie_mc,
    avg_rounds, avg_rounds_series,
};
use harq_models::mc;
use harq_models::pep::{
    check_pep_bounds, pep_joint, pep_joint_from, pep_joint_mc, pep_single, sweep_ratio,
    PepProblem,
};
use harq_models::per_models::PerModel;
use harq_models::phy_sim::{estimate_joint_errors, CodeSpec};

fn report(number: u32, name: &str, failures: &[String], elapsed: Duration, budget: Duration) {
    let status = if failures.is_empty() && elapsed <= budget {
        "PASS"
    } else {
        "FAIL"
    };
    println!(
        "acceptance {number} ({name}): {status} [{:.1}s / budget {:.0}s]",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    for f in failures {
        println!("  - {f}");
    }
    assert!(failures.is_empty(), "{name}: {failures:?}");
    assert!(
        elapsed <= budget,
        "{name} exceeded runtime budget: {elapsed:?} > {budget:?}"
    );
}

fn sched(rounds: &[f64]) -> SnrSchedule {
    SnrSchedule::new(rounds.to_vec()).unwrap()
}

fn random_problem(rng: &mut impl Rng, k_choices: &[usize], g_lo: f64, g_hi: f64, d_lo: f64, d_hi: f64) -> PepProblem {
    let k = k_choices[rng.gen_range(0..k_choices.len())];
    let rounds: Vec<f64> = (0..k).map(|_| rng.gen_range(g_lo..g_hi)).collect();
    let d = rng.gen_range(d_lo..d_hi);
    PepProblem::new(d, sched(&rounds)).unwrap()
}

#[test]
fn criterion_01_pep_sandwich() {
    let _serial = gate();
    let start = Instant::now();
    let mut rng = mc::stream_rng(0xACC0_0001, 0);
    let problems: Vec<PepProblem> = (0..200)
        .map(|_| random_problem(&mut rng, &[2, 3, 4], 0.01, 20.0, 0.5, 4.0))
        .collect();
    let failures: Vec<String> = problems
        .par_iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let r = check_pep_bounds(p).unwrap();
            if !r.holds {
                return Some(format!("problem {i}: sandwich violated: {r:?}"));
            }
            if r.epsilon > 1e-6 {
                return Some(format!("problem {i}: epsilon {} > 1e-6", r.epsilon));
            }
            None
        })
        .collect();
    report(1, "PEP sandwich", &failures, start.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_02_upper_bound_attainment() {
    let _serial = gate();
    let start = Instant::now();
    let mut failures = Vec::new();
    for k in 1..=4usize {
        for pos in 0..k {
            for &g in &[0.3, 2.0, 9.0] {
                let mut rounds = vec![0.0; k];
                rounds[pos] = g;
                let p = PepProblem::new(1.0, sched(&rounds)).unwrap();
                let joint = pep_joint(&p).unwrap();
                let single = pep_single(1.0, g);
                if (joint - single).abs() >= 1e-6 {
                    failures.push(format!(
                        "k={k} pos={pos} g={g}: |{joint} - {single}| >= 1e-6"
                    ));
                }
            }
        }
    }
    report(2, "upper-bound attainment", &failures, start.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_03_lower_limit_and_ratio_curve() {
    let _serial = gate();
    let start = Instant::now();
    let mut failures = Vec::new();
    let snr1 = db_to_linear(-3.0);

    let rows = sweep_ratio(2, 1.0, snr1, &[100.0]).unwrap();
    let r100 = rows[0].ratio;
    if !(0.49..=0.51).contains(&r100) {
        failures.push(format!("k=2 t=100 ratio {r100} outside [0.49, 0.51]"));
    }

    let rows = sweep_ratio(3, 1.0, snr1, &[100.0]).unwrap();
    let r3 = rows[0].ratio;
    if !(r3 > 0.25 && r3 < 0.5) {
        failures.push(format!("k=3 t=100 ratio {r3} not strictly inside (1/4, 1/2)"));
    }

    report(
        3,
        "lower limit at t=100",
        &failures,
        start.elapsed(),
        Duration::from_secs(60),
    );
}

/// The t_2 = 2 clause: the ratio is required to be within 10% of 0.5. The
/// true value of P_{1:2}/P_2 at (k=2, d=1, γ_1 = −3 dB, t = 2) is ≈ 0.6564
/// — confirmed independently by an orthant-probability reference and by
/// direct Monte Carlo (0.65639 ± 0.00095 at 2·10^7 samples) — so this check
/// fails: the 1/2 limit is approached far more slowly in t than the
/// tolerance allows. Kept as specified rather than loosened.
#[test]
fn criterion_03_lower_limit_t2_band() {
    let _serial = gate();
    let start = Instant::now();
    let mut failures = Vec::new();
    let snr1 = db_to_linear(-3.0);
    let rows = sweep_ratio(2, 1.0, snr1, &[2.0]).unwrap();
    let r2 = rows[0].ratio;
    if (r2 - 0.5).abs() > 0.05 {
        failures.push(format!(
            "k=2 t=2 ratio {r2} not within 10% of 0.5 (true value of the \
             underlying probability ratio; see test doc comment)"
        ));
    }
    report(
        3,
        "lower limit t=2 band",
        &failures,
        start.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_04_quadrature_vs_mc() {
    let _serial = gate();
    let start = Instant::now();
    let mut rng = mc::stream_rng(0xACC0_0004, 0);
    let problems: Vec<PepProblem> = (0..50)
        .map(|_| random_problem(&mut rng, &[2, 3, 4], 0.1, 3.0, 0.5, 2.0))
        .collect();
    let mut failures = Vec::new();
    for (i, p) in problems.iter().enumerate() {
        let q = pep_joint(p).unwrap();
        let (m, se) = pep_joint_mc(p, 10_000_000, 0xACC0_0004 + i as u64);
        if (q - m).abs() >= 3.0 * se {
            failures.push(format!(
                "problem {i}: |quad {q} - mc {m}| >= 3σ ({})",
                3.0 * se
            ));
        }
    }
    report(4, "quadrature vs MC", &failures, start.elapsed(), Duration::from_secs(300));
}

#[test]
fn criterion_05_appendix_lemmas() {
    let _serial = gate();
    let start = Instant::now();
    let mut failures = Vec::new();
    let n: u64 = 1_000_000;

    // Schedules exercising unequal and near-equal SNR profiles.
    let schedules: [Vec<f64>; 3] = [
        vec![0.5012, 1.0, 2.3, 4.0],
        vec![2.0, 2.0, 2.0, 2.0],
        vec![0.2, 3.1, 0.7, 1.9],
    ];
    let d = 1.0;

    for (si, rounds) in schedules.iter().enumerate() {
        let k = rounds.len();
        let amps: Vec<f64> = rounds.iter().map(|&g| g.sqrt()).collect();
        let acc: Vec<f64> = rounds
            .iter()
            .scan(0.0, |a, &g| {
                *a += g;
                Some(*a)
            })
            .collect();

        // Lemma 1: y_l = a_{l+1}·(a_l-prefix · x) − ‖a_l‖²·x_{l+1} is
        // uncorrelated with the later prefixes a_h · x, h > l.
        // Lemma 2: {a_{l+1}·x > d/2·‖a_{l+1}‖²  ∧  y_l > 0} implies
        // {a_l·x > d/2·‖a_l‖²}; count violations.
        let stats = mc::run_blocks(n, |range| {
            let mut dot = vec![vec![0.0f64; k]; k];
            let mut y_sq = vec![vec![0.0f64; k]; k];
            let mut s_sq = vec![vec![0.0f64; k]; k];
            let mut lemma2_violations = 0u64;
            let mut x = vec![0.0f64; k];
            for i in range {
                let mut rng = mc::stream_rng(0xACC0_0005 + si as u64, i);
                for xi in x.iter_mut() {
                    *xi = rng.sample(StandardNormal);
                }
                let mut prefix = vec![0.0f64; k];
                let mut s = 0.0;
                for l in 0..k {
                    s += amps[l] * x[l];
                    prefix[l] = s;
                }
                for l in 0..k - 1 {
                    let y = amps[l + 1] * prefix[l] - acc[l] * x[l + 1];
                    for h in l + 1..k {
                        dot[l][h] += y * prefix[h];
                        y_sq[l][h] += y * y;
                        s_sq[l][h] += prefix[h] * prefix[h];
                    }
                    if prefix[l + 1] > 0.5 * d * acc[l + 1]
                        && y > 0.0
                        && prefix[l] <= 0.5 * d * acc[l]
                    {
                        lemma2_violations += 1;
                    }
                }
            }
            (dot, y_sq, s_sq, lemma2_violations)
        });
        let mut dot = vec![vec![0.0f64; k]; k];
        let mut y_sq = vec![vec![0.0f64; k]; k];
        let mut s_sq = vec![vec![0.0f64; k]; k];
        let mut violations = 0u64;
        for (bd, by, bs, v) in stats {
            for l in 0..k {
                for h in 0..k {
                    dot[l][h] += bd[l][h];
                    y_sq[l][h] += by[l][h];
                    s_sq[l][h] += bs[l][h];
                }
            }
            violations += v;
        }
        for l in 0..k - 1 {
            for h in l + 1..k {
                let corr = dot[l][h] / (y_sq[l][h].sqrt() * s_sq[l][h].sqrt());
                let sigma = 1.0 / (n as f64).sqrt();
                if corr.abs() >= 3.0 * sigma {
                    failures.push(format!(
                        "lemma 1, schedule {si}: corr(y_{l}, prefix_{h}) = {corr} exceeds 3σ"
                    ));
                }
            }
        }
        if violations != 0 {
            failures.push(format!(
                "lemma 2, schedule {si}: {violations} implication counterexamples"
            ));
        }
    }

    // Lemma 3: P_{l:k} ≥ ½·P_{l+1:k} − ε on randomized problems.
    let mut rng = mc::stream_rng(0xACC0_0015, 0);
    for i in 0..20 {
        let p = random_problem(&mut rng, &[2, 3, 4], 0.05, 10.0, 0.5, 3.0);
        let k = p.schedule().rounds();
        for l in 1..k {
            let pl = pep_joint_from(&p, l).unwrap();
            let pl1 = pep_joint_from(&p, l + 1).unwrap();
            if pl < 0.5 * pl1 - 1e-6 {
                failures.push(format!(
                    "lemma 3, problem {i}: P_{{{l}:{k}}} = {pl} < ½·{pl1} − ε"
                ));
            }
        }
    }

    report(5, "appendix lemmas", &failures, start.elapsed(), Duration::from_secs(300));
}

#[test]
fn criterion_06_closed_form_and_round_count() {
    let _serial = gate();
    let start = Instant::now();
    let mut failures = Vec::new();
    for &th in &[0.0, 0.5, 2.0] {
        for &g in &[0.2, 1.0, 5.0] {
            let per = PerModel::exponential_threshold(th, g).unwrap();
            for &gbar in &[0.5, 2.0, 10.0, 50.0] {
                for k in 1..=5u32 {
                    let closed = avg_failure_de_closed(th, g, k, gbar).unwrap();
                    let numeric = avg_failure_de_numeric(&per, k, gbar);
                    let tol = 1e-9 * closed.max(numeric);
                    if (closed - numeric).abs() > tol {
                        failures.push(format!(
                            "th={th} g={g} γ̄={gbar} k={k}: closed {closed} vs numeric {numeric}"
                        ));
                    }
                }
                let kbar = avg_rounds(th, g, gbar).unwrap();
                let series = avg_rounds_series(th, g, gbar).unwrap();
                if (kbar - series).abs() > 1e-9 {
                    failures.push(format!(
                        "th={th} g={g} γ̄={gbar}: K̄ closed {kbar} vs series {series}"
                    ));
                }
            }
            let k_inf = avg_rounds(th, g, 1e12).unwrap();
            if !(1.0..1.0 + 1e-9).contains(&k_inf) {
                failures.push(format!("K̄ at γ̄→∞ is {k_inf}, expected → 1"));
            }
        }
    }
    report(6, "fading closed forms", &failures, start.elapsed(), Duration::from_secs(120));
}

const DESK_CODE: (u32, u32, usize, usize) = (0o15, 0o13, 3, 128);
const LINK_TRIALS: u64 = 100_000;

fn desk_code() -> CodeSpec {
    let (ff, fb, m, nb) = DESK_CODE;
    CodeSpec::new(ff, fb, m, nb).unwrap()
}

/// Measured single-shot PER at one accumulated SNR (a one-round estimate).
fn measure_per(code: &CodeSpec, snr: f64, seed: u64) -> (f64, f64) {
    let est = estimate_joint_errors(code, &sched(&[snr]), LINK_TRIALS, seed);
    (est.marginal()[0], est.marginal_stderr()[0])
}

#[test]
fn criterion_07_link_experiment() {
    let _serial = gate();
    let start = Instant::now();
    let mut failures = Vec::new();
    let code = desk_code();

    // k = 2: first-round SNR in the sub-0.1 PER region, final accumulated
    // SNR swept over the waterfall tail.
    let k2_points: Vec<(f64, f64)> = [(3.0, 4.5), (3.0, 5.0), (3.5, 4.0), (3.5, 4.5)]
        .iter()
        .map(|&(a, b)| (db_to_linear(a), db_to_linear(b)))
        .collect();
    for (i, &(g1, gacc)) in k2_points.iter().enumerate() {
        let schedule = sched(&[g1, gacc - g1]);
        let est = estimate_joint_errors(&code, &schedule, LINK_TRIALS, 0x0700 + i as u64);
        let f2 = est.f_hat()[1];
        let f2_se = est.f_hat_stderr()[1];
        let (per1, per1_se) = measure_per(&code, g1, 0x0710 + i as u64);
        let (per2, per2_se) = measure_per(&code, gacc, 0x0720 + i as u64);

        // (a) f_2 ≤ f̂_2 + 3σ, with f̂_2 = PER measured at γ_[2].
        let sigma_a = (f2_se * f2_se + per2_se * per2_se).sqrt();
        if f2 > per2 + 3.0 * sigma_a {
            failures.push(format!(
                "(a) point {i}: f2 {f2} exceeds DE bound {per2} + 3σ"
            ));
        }

        // (b) where single-round PERs < 0.1, the IE product underestimates
        // f_2 by at least 3σ.
        if per1 < 0.1 && per2 < 0.1 {
            let ie = per1 * per2;
            let ie_se = ((per2 * per1_se).powi(2) + (per1 * per2_se).powi(2)).sqrt();
            let sigma_b = (f2_se * f2_se + ie_se * ie_se).sqrt();
            if f2 - ie < 3.0 * sigma_b {
                failures.push(format!(
                    "(b) point {i}: f2 {f2} does not exceed IE {ie} by 3σ"
                ));
            }
        } else {
            failures.push(format!(
                "(b) point {i}: operating point drifted out of the PER<0.1 region"
            ));
        }
    }

    // k = 3: ratio f_3 / f̂_3 within the factor-2 band around 1/2.
    let first_two = [db_to_linear(0.5), db_to_linear(1.5)];
    for (i, &acc_db) in [4.5f64, 4.75, 5.0].iter().enumerate() {
        let gacc = db_to_linear(acc_db);
        let g3 = gacc - first_two[0] - first_two[1];
        assert!(g3 > 0.0);
        let schedule = sched(&[first_two[0], first_two[1], g3]);
        let est = estimate_joint_errors(&code, &schedule, LINK_TRIALS, 0x0730 + i as u64);
        let f3 = est.f_hat()[2];
        let (per3, per3_se) = measure_per(&code, gacc, 0x0740 + i as u64);
        let ratio = f3 / per3;
        let se = (est.f_hat_stderr()[2] / per3).hypot(ratio * per3_se / per3);
        if !(0.25 - 3.0 * se..=1.0 + 3.0 * se).contains(&ratio) {
            failures.push(format!(
                "(c) acc={acc_db} dB: ratio f3/f̂3 = {ratio} ± {se} outside [1/4, 1]"
            ));
        }
    }

    report(7, "link-level experiment", &failures, start.elapsed(), Duration::from_secs(900));
}

#[test]
fn criterion_08_non_independence_witness() {
    let _serial = gate();
    let start = Instant::now();
    let mut failures = Vec::new();
    let code = desk_code();
    let g = db_to_linear(1.5);
    let est = estimate_joint_errors(&code, &sched(&[g, 0.0]), LINK_TRIALS, 0x0800);
    let per1 = est.marginal()[0];
    if !(0.2..=0.8).contains(&per1) {
        failures.push(format!("operating point: PER {per1} outside [0.2, 0.8]"));
    }
    // Count-level identity: a zero-SNR second round reproduces the round-1
    // combine exactly, so ERR_2 = ERR_1 as events on every trial.
    if est.joint_counts[1] != est.marginal_counts[1] {
        failures.push(format!(
            "#(ERR1∧ERR2) = {} but #(ERR2) = {}",
            est.joint_counts[1], est.marginal_counts[1]
        ));
    }
    let joint = est.f_hat()[1];
    let sigma = (est.f_hat_stderr()[1].powi(2)
        + (2.0 * per1 * est.marginal_stderr()[0]).powi(2))
    .sqrt();
    if joint - per1 * per1 < 3.0 * sigma {
        failures.push(format!(
            "P(ERR1,ERR2) {joint} does not exceed P(ERR1)² {} by 3σ",
            per1 * per1
        ));
    }
    report(8, "non-independence witness", &failures, start.elapsed(), Duration::from_secs(300));
}

#[test]
fn criterion_09_fading_proximity() {
    let _serial = gate();
    let start = Instant::now();
    let mut failures = Vec::new();
    let code = desk_code();

    // Measured PER curve over the waterfall, then the threshold-exponential
    // fit used by both model-based averages.
    let samples: Vec<(f64, f64)> = (0..7)
        .map(|i| {
            let g = db_to_linear(2.0 + 0.5 * i as f64);
            (g, measure_per(&code, g, 0x0900 + i as u64).0)
        })
        .collect();
    let model = PerModel::fit_exponential(&samples).unwrap();
    let th = model.snr_threshold().unwrap();
    let slope = model.slope_g().unwrap();

    let channel_trials = 10_000;
    let link_trials = 128;
    for k in [2u32, 3] {
        for &gbar_db in &[4.0f64, 6.0, 8.0] {
            let gbar = db_to_linear(gbar_db);
            let de = avg_failure_de_closed(th, slope, k, gbar).unwrap();
            let (ie, ie_se) = avg_failure_ie_mc(&model, k, gbar, 200_000, 0x0910 + k as u64);
            let (exact, exact_se) = avg_failure_exact_mc(
                &code,
                k,
                gbar,
                channel_trials,
                link_trials,
                0x0920 + k as u64 * 16 + gbar_db as u64,
            );
            let band = |a: f64, b: f64, sa: f64, sb: f64| {
                (a - b).abs() <= 3.0 * (sa + sb) + 0.2 * a.abs().max(b.abs())
            };
            if !band(de, exact, 0.0, exact_se) {
                failures.push(format!(
                    "k={k} γ̄={gbar_db}dB: DE {de} vs exact {exact}±{exact_se} outside band"
                ));
            }
            if !band(ie, exact, ie_se, exact_se) {
                failures.push(format!(
                    "k={k} γ̄={gbar_db}dB: IE {ie}±{ie_se} vs exact {exact}±{exact_se} outside band"
                ));
            }
            if !band(de, ie, 0.0, ie_se) {
                failures.push(format!(
                    "k={k} γ̄={gbar_db}dB: DE {de} vs IE {ie}±{ie_se} outside band"
                ));
            }
        }
    }
    report(9, "fading proximity", &failures, start.elapsed(), Duration::from_secs(1800));
}

#[test]
fn criterion_10_determinism() {
    let _serial = gate();
    let start = Instant::now();
    let mut failures = Vec::new();
    let code = CodeSpec::new(0o15, 0o13, 3, 64).unwrap();
    let schedule = sched(&[1.0, 0.8]);
    let per = PerModel::exponential_threshold(1.0, 2.0).unwrap();
    let problem = PepProblem::new(1.0, sched(&[0.6, 1.2, 0.9])).unwrap();

    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let link = estimate_joint_errors(&code, &schedule, 30_000, 1);
            let (mc_p, mc_se) = pep_joint_mc(&problem, 500_000, 2);
            let (ie, ie_se) = avg_failure_ie_mc(&per, 3, 2.0, 200_000, 3);
            let (ex, ex_se) = avg_failure_exact_mc(&code, 2, 1.5, 500, 64, 4);
            (
                link.joint_counts,
                link.marginal_counts,
                [mc_p.to_bits(), mc_se.to_bits()],
                [ie.to_bits(), ie_se.to_bits()],
                [ex.to_bits(), ex_se.to_bits()],
            )
        })
    };
    let serial = run(1);
    for threads in [2usize, 4, 8] {
        let parallel = run(threads);
        if parallel != serial {
            failures.push(format!("{threads}-worker run differs from serial run"));
        }
    }
    report(10, "seeded determinism", &failures, start.elapsed(), Duration::from_secs(300));
}
