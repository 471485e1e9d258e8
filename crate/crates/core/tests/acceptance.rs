//! One line per check, one test per criterion. Companion lines are printed
//! but do not decide the outcome.
//!
//! `OFFREG_LEVEL=fast` runs the reduced sweep.

use offreg::harness::verify::{criterion, Level};

fn level() -> Level {
    match std::env::var("OFFREG_LEVEL").as_deref() {
        Ok("fast") => Level::Fast,
        _ => Level::Full,
    }
}

fn run(id: usize) {
    let results = criterion(id, level());
    for r in &results {
        println!("{}", r.line());
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.companion && !r.passed).map(|r| r.name.clone()).collect();
    assert!(failed.is_empty(), "criterion {id} failed: {failed:?}");
}

#[test]
fn criterion_01_experts_regret() {
    run(1);
}

#[test]
fn criterion_02_vaw_regret() {
    run(2);
}

#[test]
fn criterion_03_admissibility() {
    run(3);
}

#[test]
fn criterion_04_finite_class_lemma() {
    run(4);
}

#[test]
fn criterion_05_minimax_sandwiches() {
    run(5);
}

#[test]
fn criterion_06_value_monotonicity() {
    run(6);
}

#[test]
fn criterion_07_cover_and_dimension_inequalities() {
    run(7);
}

#[test]
fn criterion_08_khinchine() {
    run(8);
}

#[test]
fn criterion_09_rates() {
    run(9);
}

#[test]
fn criterion_10_offset_collapse() {
    run(10);
}
