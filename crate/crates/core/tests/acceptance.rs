//! End-to-end acceptance checks with fixed seeds and tolerances.
//!
//! Runs without the libtest harness so that every criterion prints exactly
//! one PASS/FAIL line; the process fails if any criterion does.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bipartite_sandpile::harness::{self, verify, ExperimentConfig, ExperimentKind, ExperimentResult};

type Criterion = (u32, &'static str, Duration, Box<dyn Fn() -> Verdict>);

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn from_check(outcome: verify::CheckOutcome) -> Verdict {
    verdict(outcome.passed, outcome.detail)
}

fn prank(n: usize, alpha: f64, q: f64, trials: usize, seed: u64) -> ExperimentResult {
    let cfg = ExperimentConfig::new(ExperimentKind::Prank, n, alpha, q, 2, trials, seed);
    harness::run_prank_experiment(&cfg).expect("valid configuration")
}

fn cyclic_fraction(n: usize, alpha: f64, seed: u64) -> ExperimentResult {
    let cfg = ExperimentConfig::new(ExperimentKind::Cyclicity, n, alpha, 0.5, 2, 300, seed);
    harness::run_cyclicity_experiment(&cfg).expect("valid configuration")
}

fn subcritical() -> Verdict {
    let r = prank(100, 0.25, 0.5, 200, 101);
    verdict((23.0..=27.0).contains(&r.mean), format!("mean 2-rank {:.3} in [23, 27]", r.mean))
}

fn supercritical() -> Verdict {
    let r = prank(100, 0.75, 0.5, 200, 102);
    verdict(r.mean <= 1.5, format!("mean 2-rank {:.3} <= 1.5", r.mean))
}

fn critical() -> Verdict {
    let r = prank(400, 0.5, 0.5, 300, 103);
    verdict((2.0..=6.5).contains(&r.mean), format!("mean 2-rank {:.3} in [2.0, 6.5]", r.mean))
}

fn q_independence() -> Verdict {
    let cfg = ExperimentConfig::new(ExperimentKind::QSweep, 100, 0.25, 0.5, 2, 200, 104);
    let table = harness::run_qsweep(&cfg).expect("valid configuration");
    let means: Vec<String> = table.rows.iter().map(|r| format!("{}: {:.2}", r.q, r.mean)).collect();
    verdict(table.max_gap <= 2.0, format!("max gap {:.3} <= 2 ({})", table.max_gap, means.join(", ")))
}

fn cyclicity() -> Verdict {
    let low = cyclic_fraction(80, 0.25, 105);
    let high = cyclic_fraction(60, 0.75, 106);
    let half = cyclic_fraction(60, 0.5, 107);
    let passed = low.mean <= 0.02 && (0.50..=0.70).contains(&high.mean) && (0.19..=0.39).contains(&half.mean);
    verdict(
        passed,
        format!(
            "alpha=0.25: {:.3} <= 0.02, alpha=0.75: {:.3} in [0.50, 0.70], alpha=0.5: {:.3} in [0.19, 0.39]",
            low.mean, high.mean, half.mean
        ),
    )
}

fn distribution_law() -> Verdict {
    let mut passed = true;
    let mut parts = Vec::new();
    for (n, seed) in [(50, 108), (100, 109)] {
        let r = prank(n, 0.25, 0.5, 500, seed);
        let w1 = r.comparison.expect("p-rank runs carry a comparison").wasserstein1;
        passed &= w1 <= 2.0;
        parts.push(format!("n={n}: W1 {w1:.3}"));
    }
    verdict(passed, format!("{} (each <= 2)", parts.join(", ")))
}

fn pipeline() -> Verdict {
    let cfg = ExperimentConfig::new(ExperimentKind::MCorank, 40, 0.25, 0.5, 2, 2000, 110);
    let r = harness::run_mcorank_experiment(&cfg).expect("valid configuration");
    let consistent = r.pipeline_consistent == Some(true);
    let status = Command::new(env!("CARGO_BIN_EXE_bipartite-sandpile")).arg("verify").output();
    let verify_ok = matches!(&status, Ok(out) if out.status.success());
    verdict(consistent && verify_ok, format!("2000 M-instances consistent: {consistent}, verify exit 0: {verify_ok}"))
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        (1, "subcritical mean", Duration::from_secs(10), Box::new(subcritical)),
        (2, "supercritical mean", Duration::from_secs(10), Box::new(supercritical)),
        (3, "critical mean", Duration::from_secs(60), Box::new(critical)),
        (4, "q-independence", Duration::MAX, Box::new(q_independence)),
        (5, "cyclicity", Duration::from_secs(300), Box::new(cyclicity)),
        (6, "distribution law", Duration::MAX, Box::new(distribution_law)),
        (7, "Schur corank preservation", Duration::MAX, Box::new(|| from_check(verify::schur_preservation(1000, 111)))),
        (8, "conditional mean identity", Duration::MAX, Box::new(|| from_check(verify::conditional_mean_identity(40)))),
        (9, "sandpile oracles", Duration::MAX, Box::new(|| from_check(verify::snf_oracles(7)))),
        (10, "de Moivre-Laplace", Duration::MAX, Box::new(|| from_check(verify::dml_convergence()))),
        (
            11,
            "min-entropy bound",
            Duration::MAX,
            Box::new(|| {
                let exact = verify::min_entropy_dominance();
                let empirical = verify::full_rank_frequency(10_000, 112);
                verdict(exact.passed && empirical.passed, format!("{}; {}", exact.detail, empirical.detail))
            }),
        ),
        (12, "pipeline consistency", Duration::MAX, Box::new(pipeline)),
    ];

    let mut failures = 0;
    for (id, name, budget, check) in criteria {
        let started = Instant::now();
        let v = check();
        let elapsed = started.elapsed();
        let in_time = elapsed <= budget;
        let passed = v.passed && in_time;
        failures += usize::from(!passed);
        let timing = if budget == Duration::MAX {
            format!("{:.1}s", elapsed.as_secs_f64())
        } else {
            format!("{:.1}s of {}s", elapsed.as_secs_f64(), budget.as_secs())
        };
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id:>2} ({name}): {} [{timing}]", v.detail);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
