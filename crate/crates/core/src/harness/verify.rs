//! The property and oracle suite behind the `verify` subcommand.
//!
//! Every check is deterministic (fixed seeds) and reports a one-line
//! outcome.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bigraph::{sample_bipartite, split_seed, BipartiteGraph, GraphModelParams};
use crate::gfp::{corank_mod_p, rank_mod_p, schur_complement, submatrix, IndexSet, PrimeFieldMatrix};
use crate::oracle;
use crate::reduction::{build_m, corank_pipeline, diag_uniformity_stat, DiagonalBlock};
use crate::sandpile::{p_rank, p_rank_via_laplacian, sandpile_group, sandpile_group_dropping, spanning_tree_count};
use crate::theory::{
    binom_pmf_exact, conditional_mean_above_exact, dml_estimate, hoeffding_bound, min_entropy_rank_bound_exact,
    rank_pmf_theoretical,
};

use super::compare_to_theory;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        CheckOutcome { name, passed, detail: detail.into() }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, p: u64, rows: usize, cols: usize) -> PrimeFieldMatrix {
    PrimeFieldMatrix::from_fn(p, rows, cols, |_, _| rng.random_range(0..p) as i64).expect("prime modulus")
}

/// `corank(A/S) == corank(A)` on random square matrices over GF(p) for
/// p in {2, 3, 5, 7}. Half the instances are products of thin factors, so
/// that nonzero coranks occur.
pub fn schur_preservation(instances: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let primes = [2u64, 3, 5, 7];
    let mut failures = 0;
    let mut degenerate = 0;
    for t in 0..instances {
        let p = primes[t % primes.len()];
        let n = rng.random_range(2..=10usize);
        let (a, s) = loop {
            let a = if t % 2 == 0 {
                random_matrix(&mut rng, p, n, n)
            } else {
                let k = rng.random_range(1..n);
                random_matrix(&mut rng, p, n, k).mul(&random_matrix(&mut rng, p, k, n)).expect("shapes agree")
            };
            let size = rng.random_range(1..n);
            let mut picks: Vec<usize> = (0..n).collect();
            for i in 0..size {
                let j = rng.random_range(i..n);
                picks.swap(i, j);
            }
            let s = IndexSet::new(picks[..size].iter().copied(), n).expect("distinct indices");
            let block = submatrix(&a, &s, &s).expect("bounds match");
            if rank_mod_p(&block) == size {
                break (a, s);
            }
        };
        let direct = corank_mod_p(&a);
        degenerate += usize::from(direct > 0);
        let via_schur = corank_mod_p(&schur_complement(&a, &s).expect("invertible block"));
        failures += usize::from(direct != via_schur);
    }
    CheckOutcome::new(
        "schur-corank",
        failures == 0,
        format!("{instances} instances, {degenerate} singular, {failures} mismatches"),
    )
}

/// The closed form for `E(B(n, a) | B(n, a) > s)` equals direct summation
/// exactly, for all `n <= max_n`, five values of `a` and every `1 <= s < n`.
pub fn conditional_mean_identity(max_n: u64) -> CheckOutcome {
    let alphas = [(1, 5), (2, 5), (1, 2), (3, 5), (4, 5)];
    let mut cases = 0;
    let mut failures = 0;
    for (a, b) in alphas {
        let alpha = BigRational::new(a.into(), b.into());
        for n in 1..=max_n {
            let direct = oracle::conditional_means_by_summation(n, &alpha);
            for s in 1..n {
                cases += 1;
                let closed = conditional_mean_above_exact(n, &alpha, s).ok();
                if closed != direct[s as usize] {
                    failures += 1;
                }
            }
        }
    }
    CheckOutcome::new("conditional-mean", failures == 0, format!("{cases} exact comparisons, {failures} mismatches"))
}

/// Small sandpile groups against the minors oracle and spanning-tree
/// enumeration, and independence of the dropped vertex on every bipartite
/// graph with at most `max_vertices` vertices.
pub fn snf_oracles(max_vertices: usize) -> CheckOutcome {
    let mut problems = Vec::new();
    let factors =
        |g: &BipartiteGraph| -> Vec<String> { sandpile_group(g).factors.iter().map(|d| d.to_string()).collect() };
    let k23 = BipartiteGraph::complete(2, 3);
    if factors(&k23) != ["2", "6"] {
        problems.push(format!("K2,3 factors {:?}", factors(&k23)));
    }
    if oracle::spanning_trees_by_enumeration(&k23) != 12 || spanning_tree_count(&k23).ok() != Some(12.into()) {
        problems.push("K2,3 spanning trees".to_string());
    }
    let k22 = BipartiteGraph::complete(2, 2);
    if factors(&k22) != ["4"] {
        problems.push(format!("K2,2 factors {:?}", factors(&k22)));
    }
    let mut graphs = 0;
    let mut mismatches = 0;
    for g in oracle::all_small_bipartite_graphs(max_vertices) {
        graphs += 1;
        let base = sandpile_group(&g);
        for v in 0..g.vertex_count() {
            let group = sandpile_group_dropping(&g, v).expect("vertex in range");
            let (reference, free) = oracle::sandpile_factors_by_minors(&g, v);
            if group != base || group.factors != reference || group.free_rank != free {
                mismatches += 1;
            }
        }
    }
    if mismatches > 0 {
        problems.push(format!("{mismatches} drop choices disagree"));
    }
    let detail = if problems.is_empty() {
        format!("K2,3 = Z2+Z6 with 12 trees, K2,2 = Z4; {graphs} graphs on <= {max_vertices} vertices, all drops agree")
    } else {
        problems.join("; ")
    };
    CheckOutcome::new("snf-oracles", problems.is_empty(), detail)
}

/// Relative error of the Gaussian local estimate at `s = floor(n/2)` for
/// `B(n, 1/2)`: decreasing along `n = 100, 1000, 10000` and at most
/// `10 / sqrt(n)`.
pub fn dml_convergence() -> CheckOutcome {
    let half = BigRational::new(1.into(), 2.into());
    let mut errors = Vec::new();
    for n in [100u64, 1000, 10_000] {
        let s = n / 2;
        let exact = binom_pmf_exact(n, &half, s).expect("in support").to_f64().expect("finite");
        let estimate = dml_estimate(n, 0.5, s as i64).expect("centre is in range");
        errors.push((n, ((estimate - exact) / exact).abs()));
    }
    let decreasing = errors.windows(2).all(|w| w[1].1 < w[0].1);
    let bounded = errors.iter().all(|&(n, e)| e <= 10.0 / (n as f64).sqrt());
    let detail = errors.iter().map(|(n, e)| format!("n={n}: {e:.3e}")).collect::<Vec<_>>().join(", ");
    CheckOutcome::new("de-moivre-laplace", decreasing && bounded, detail)
}

/// The min-entropy bound with `beta = 1 - 1/p` lies below the exact
/// full-rank probability of uniform matrices for all `1 <= n <= m <= 20`.
pub fn min_entropy_dominance() -> CheckOutcome {
    let mut cases = 0;
    let mut failures = 0;
    for p in [2u64, 3, 5] {
        let beta = BigRational::one() - BigRational::new(1.into(), p.into());
        for m in 1..=20 {
            for n in 1..=m {
                cases += 1;
                let bound = min_entropy_rank_bound_exact(n, m, &beta).expect("m >= n");
                if bound > oracle::uniform_full_rank_probability(n, m, p) {
                    failures += 1;
                }
            }
        }
    }
    CheckOutcome::new("min-entropy-bound", failures == 0, format!("{cases} shapes, {failures} violations"))
}

/// Empirical full-rank frequency of uniform matrices within three standard
/// errors of the exact product.
pub fn full_rank_frequency(trials: usize, seed: u64) -> CheckOutcome {
    let shapes = [(5u64, 5u64, 2u64), (3, 13, 2), (4, 6, 3), (8, 10, 5)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, m, p) in shapes {
        let hits = (0..trials)
            .filter(|_| rank_mod_p(&random_matrix(&mut rng, p, n as usize, m as usize)) == n as usize)
            .count();
        let exact = oracle::uniform_full_rank_probability(n, m, p).to_f64().expect("finite");
        let freq = hits as f64 / trials as f64;
        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
        ok &= (freq - exact).abs() <= 3.0 * sigma;
        parts.push(format!("{n}x{m}/GF({p}) {freq:.4} vs {exact:.4}"));
    }
    CheckOutcome::new("full-rank-frequency", ok, parts.join(", "))
}

/// Direct and Schur-complement coranks of `M` agree on every instance.
pub fn pipeline_consistency(instances: usize, seed: u64) -> CheckOutcome {
    let mut failures = 0;
    for t in 0..instances {
        let m = build_m(40, 0.25, 0.5, 2, split_seed(seed, t as u64)).expect("valid model");
        failures += usize::from(!corank_pipeline(&m).consistent());
    }
    CheckOutcome::new(
        "pipeline-consistency",
        failures == 0,
        format!("{instances} instances of M (p=2, n=40, alpha=0.25), {failures} mismatches"),
    )
}

/// On graphs with at most 12 vertices, the p-rank read off the Smith normal
/// form equals both GF(p) routes.
pub fn p_rank_routes(trials: usize, seed: u64) -> CheckOutcome {
    let shapes = [(6usize, 1.0), (8, 0.5), (9, 1.0 / 3.0), (4, 1.0)];
    let mut failures = 0;
    for t in 0..trials {
        let (n, alpha) = shapes[t % shapes.len()];
        let g = sample_bipartite(&GraphModelParams::new(n, alpha, 0.5, split_seed(seed, t as u64))).expect("valid");
        let group = sandpile_group(&g);
        for p in [2, 3, 5, 7] {
            let gfp = p_rank(&g, p).expect("prime");
            if group.p_rank(p) != gfp || p_rank_via_laplacian(&g, p).expect("prime") != gfp {
                failures += 1;
            }
        }
    }
    CheckOutcome::new("p-rank-routes", failures == 0, format!("{trials} graphs, {failures} mismatches"))
}

/// Monte Carlo frequency of `|B(200, 1/2) - 100| > 20` stays below the
/// Hoeffding bound.
pub fn hoeffding_tail(trials: usize, seed: u64) -> CheckOutcome {
    let (n, q, eps) = (200u64, 0.5, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let far = (0..trials)
        .filter(|_| {
            let b = (0..n).filter(|_| rng.random::<f64>() < q).count() as f64;
            (b - q * n as f64).abs() > eps * n as f64
        })
        .count();
    let freq = far as f64 / trials as f64;
    let bound = hoeffding_bound(n, q, eps).expect("valid");
    CheckOutcome::new("hoeffding", freq <= bound, format!("frequency {freq:.4} <= bound {bound:.4}"))
}

/// Draws from the predicted law itself land within W1 <= 0.1 of it.
pub fn comparison_self_test(draws: usize, seed: u64) -> CheckOutcome {
    let dist = rank_pmf_theoretical(100, 0.25, 2).expect("valid law");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample: Vec<u64> = (0..draws).map(|_| dist.quantile(rng.random::<f64>())).collect();
    let stats = compare_to_theory(&sample, &dist).expect("nonempty");
    let monotone = stats.quantile_coupling_tail.windows(2).all(|w| w[1] <= w[0]);
    CheckOutcome::new(
        "comparison-self-test",
        stats.wasserstein1 <= 0.1 && monotone,
        format!("W1 = {:.4} over {draws} inverse-CDF draws", stats.wasserstein1),
    )
}

/// Chi-square uniformity of the first diagonal entry of each block of
/// `Delta_1` (p = 2, n = 60, alpha = 1/2), rejected only below 1e-3.
pub fn diagonal_uniformity(trials: u64, seed: u64) -> CheckOutcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (block, name) in [(DiagonalBlock::Left, "D11"), (DiagonalBlock::Right, "D12")] {
        let test = diag_uniformity_stat(60, 0.5, 0.5, 2, trials, seed, block).expect("valid model");
        ok &= test.p_value > 1e-3;
        parts.push(format!("{name}: chi2 = {:.3}, p-value = {:.3}", test.statistic, test.p_value));
    }
    CheckOutcome::new("diagonal-uniformity", ok, parts.join(", "))
}

/// The whole suite with its default sizes.
pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        schur_preservation(1000, 1),
        conditional_mean_identity(40),
        snf_oracles(7),
        dml_convergence(),
        min_entropy_dominance(),
        full_rank_frequency(10_000, 2),
        pipeline_consistency(2000, 3),
        p_rank_routes(400, 4),
        hoeffding_tail(10_000, 5),
        comparison_self_test(10_000, 6),
        diagonal_uniformity(10_000, 7),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_sizes_pass() {
        for outcome in [
            schur_preservation(100, 11),
            conditional_mean_identity(12),
            snf_oracles(5),
            dml_convergence(),
            pipeline_consistency(50, 12),
            p_rank_routes(40, 13),
        ] {
            assert!(outcome.passed, "{outcome}");
        }
    }

    #[test]
    fn outcome_display() {
        let o = CheckOutcome::new("x", false, "detail");
        assert_eq!(o.to_string(), "FAIL x: detail");
    }
}
