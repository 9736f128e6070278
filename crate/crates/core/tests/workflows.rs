//! Cross-module workflows: measured curves feeding fits, model predictions
//! checked against the link simulator, and fading averages of measured PER.

use harq_models::db_to_linear;
use harq_models::error_models::SnrSchedule;
use harq_models::fading::{avg_failure_de_numeric, avg_failure_exact_mc};
use harq_models::per_models::PerModel;
use harq_models::phy_sim::{estimate_joint_errors, CodeSpec};

fn sched(rounds: &[f64]) -> SnrSchedule {
    SnrSchedule::new(rounds.to_vec()).unwrap()
}

/// Measured single-round PER over a dB grid.
fn measure_curve(
    code: &CodeSpec,
    db_points: &[f64],
    trials: u64,
    seed: u64,
) -> Vec<(f64, f64)> {
    db_points
        .iter()
        .enumerate()
        .map(|(i, &db)| {
            let snr = db_to_linear(db);
            let est = estimate_joint_errors(code, &sched(&[snr]), trials, seed + i as u64);
            (snr, est.marginal()[0])
        })
        .collect()
}

#[test]
fn fit_tracks_simulated_per_curve_in_log_space() {
    let code = CodeSpec::new(0o15, 0o13, 3, 64).unwrap();
    let db_points: Vec<f64> = (0..7).map(|i| 2.5 + 0.5 * i as f64).collect();
    let samples = measure_curve(&code, &db_points, 20_000, 0x51);
    let model = PerModel::fit_exponential(&samples).unwrap();
    for &(snr, per) in &samples {
        if per > 0.0 && per < 1.0 {
            let fit = model.eval(snr).unwrap();
            let resid = (fit.ln() - per.ln()).abs();
            assert!(
                resid < 0.25,
                "snr {snr}: per {per} vs fit {fit} (|ln resid| {resid})"
            );
        }
    }
}

#[test]
fn measured_joint_failure_sits_between_ie_and_de_predictions() {
    // Two-round schedule at (−1, +1) dB: the joint failure frequency lies
    // between the IE product and the DE bound built from independently
    // measured single-shot PERs.
    let code = CodeSpec::new(0o15, 0o13, 3, 128).unwrap();
    let trials = 100_000;
    let g1 = db_to_linear(-1.0);
    let g2 = db_to_linear(1.0);
    let est = estimate_joint_errors(&code, &sched(&[g1, g2]), trials, 0x61);
    let f2 = est.f_hat()[1];
    let f2_se = est.f_hat_stderr()[1];

    let m1 = estimate_joint_errors(&code, &sched(&[g1]), trials, 0x62);
    let m2 = estimate_joint_errors(&code, &sched(&[g1 + g2]), trials, 0x63);
    let (p1, p1_se) = (m1.marginal()[0], m1.marginal_stderr()[0]);
    let (p2, p2_se) = (m2.marginal()[0], m2.marginal_stderr()[0]);

    let ie = p1 * p2;
    let ie_se = ((p2 * p1_se).powi(2) + (p1 * p2_se).powi(2)).sqrt();
    let lo_sigma = (f2_se * f2_se + ie_se * ie_se).sqrt();
    let hi_sigma = (f2_se * f2_se + p2_se * p2_se).sqrt();
    assert!(
        f2 >= ie - 3.0 * lo_sigma,
        "f2 {f2} below IE prediction {ie} − 3σ"
    );
    assert!(
        f2 <= p2 + 3.0 * hi_sigma,
        "f2 {f2} above DE bound {p2} + 3σ"
    );
}

#[test]
fn exact_fading_average_at_k1_matches_gamma_averaged_measured_curve() {
    // k = 1: the exact Rayleigh average must agree with integrating the
    // measured PER curve against the exponential SNR density.
    let code = CodeSpec::new(0o15, 0o13, 3, 64).unwrap();
    let gbar = db_to_linear(1.0);

    // Curve from near-certain failure down into the waterfall tail, so the
    // interpolation clamps carry negligible mass.
    let db_points: Vec<f64> = (0..12).map(|i| -8.0 + i as f64 * 1.2).collect();
    let samples = measure_curve(&code, &db_points, 20_000, 0x71);
    let table = PerModel::table(samples).expect("measured curve is monotone");
    let oracle = avg_failure_de_numeric(&table, 1, gbar);

    let (exact, se) = avg_failure_exact_mc(&code, 1, gbar, 4_000, 64, 0x72);
    // The oracle's own binomial noise is ~0.002 absolute near the waterfall;
    // fold it into the band.
    let band = 3.0 * (se + 0.003);
    assert!(
        (exact - oracle).abs() < band,
        "exact {exact}±{se} vs curve-average {oracle} (band {band})"
    );
}
