//! Temporary timing probe (deleted before finalization).
use std::time::Instant;
use harq_models::error_models::SnrSchedule;
use harq_models::pep::{check_pep_bounds, pep_joint, pep_joint_mc, PepProblem};
use harq_models::phy_sim::{estimate_joint_errors, CodeSpec};

#[test]
#[ignore]
fn timing() {
    let p3 = PepProblem::new(1.0, SnrSchedule::new(vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
    let t = Instant::now();
    for _ in 0..5 { pep_joint(&p3).unwrap(); }
    println!("pep_joint k=3 (2 stages, n=2048): {:?}/call", t.elapsed() / 5);

    let t = Instant::now();
    for _ in 0..3 { check_pep_bounds(&p3).unwrap(); }
    println!("check_pep_bounds k=3: {:?}/call", t.elapsed() / 3);

    let p4 = PepProblem::new(1.0, SnrSchedule::new(vec![1.0, 2.0, 3.0, 1.0]).unwrap()).unwrap();
    let t = Instant::now();
    check_pep_bounds(&p4).unwrap();
    println!("check_pep_bounds k=4: {:?}/call", t.elapsed());

    let t = Instant::now();
    pep_joint_mc(&p3, 1_000_000, 1);
    println!("pep_joint_mc 1e6 k=3: {:?}", t.elapsed());

    let code = CodeSpec::new(0o15, 0o13, 3, 128).unwrap();
    let sched = SnrSchedule::new(vec![1.0, 1.0]).unwrap();
    let t = Instant::now();
    estimate_joint_errors(&code, &sched, 10_000, 1);
    println!("estimate_joint_errors 1e4 trials k=2 Nb=128: {:?}", t.elapsed());
}
