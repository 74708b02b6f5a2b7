//! The truncated Laplacian `Delta_1`, the matrix `M`, and the corank
//! pipeline through a Schur complement.
//!
//! `Delta_1` is the Laplacian mod p with the first `p` and the last `p`
//! vertices removed (vertex order: all of `L`, then all of `R`). Its blocks
//! are
//!
//! ```text
//! ( D_1   -A   )
//! ( -A^T  D_2  )
//! ```
//!
//! with `D_1`, `D_2` diagonal. `M` is `Delta_1` of a `G(n + 2p, alpha, q)`
//! sample whose diagonal is replaced by independent uniform residues drawn
//! from the same stream after the edge draws.

use rand::RngCore;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::bigraph::{
    bounded, principal_laplacian_mod_p, sample_bipartite, sample_with_stream, side_size, split_seed, BipartiteGraph,
    GraphError, GraphModelParams,
};
use crate::gfp::{
    corank_mod_p, is_prime, schur_complement, submatrix, IndexSet, LinalgError, PrimeFieldMatrix, MAX_MODULUS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("sides {n_left} and {n_right} must both exceed 2p = {}", 2 * p)]
    TooSmall { n_left: usize, n_right: usize, p: u64 },
    #[error("{0} is not a prime below 2^31")]
    NotPrime(u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl From<LinalgError> for ReductionError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NotPrime(p) => ReductionError::NotPrime(p),
            other => unreachable!("unexpected linear algebra failure: {other}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Construction {
    #[serde(rename = "delta1")]
    Delta1,
    #[serde(rename = "M")]
    M,
}

/// A symmetric matrix over GF(p) split into a `D_1` block (rows
/// `0..split`) and a `D_2` block (rows `split..`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModelMatrix {
    pub matrix: PrimeFieldMatrix,
    pub split: usize,
    pub construction: Construction,
    /// Parameters of the sampled graph, when the matrix came from the model.
    pub source: Option<GraphModelParams>,
    /// `floor(alpha n)` for the model size `n`, used to tag the pipeline
    /// regime.
    pub cut: Option<usize>,
}

impl ReducedModelMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn diagonal(&self) -> Vec<u32> {
        (0..self.dim()).map(|i| self.matrix.get(i, i)).collect()
    }
}

fn check_prime(p: u64) -> Result<(), ReductionError> {
    if p >= MAX_MODULUS || !is_prime(p) {
        return Err(ReductionError::NotPrime(p));
    }
    Ok(())
}

/// `Delta_1(g)` over GF(p). Needs `n_left > 2p` and `n_right > 2p`.
pub fn build_delta1(g: &BipartiteGraph, p: u64) -> Result<ReducedModelMatrix, ReductionError> {
    check_prime(p)?;
    let pp = p as usize;
    if g.n_left() <= 2 * pp || g.n_right() <= 2 * pp {
        return Err(ReductionError::TooSmall { n_left: g.n_left(), n_right: g.n_right(), p });
    }
    let kept: Vec<usize> = (pp..g.vertex_count() - pp).collect();
    let matrix = principal_laplacian_mod_p(g, &kept, p)?;
    Ok(ReducedModelMatrix {
        matrix,
        split: g.n_left() - pp,
        construction: Construction::Delta1,
        source: None,
        cut: None,
    })
}

/// `M` for model size `n`: `Delta_1` of `G(n + 2p, alpha, q)` with a
/// uniform diagonal.
pub fn build_m(n: usize, alpha: f64, q: f64, p: u64, seed: u64) -> Result<ReducedModelMatrix, ReductionError> {
    check_prime(p)?;
    let params = GraphModelParams::new(n + 2 * p as usize, alpha, q, seed);
    let (g, mut rng) = sample_with_stream(&params)?;
    let mut m = build_delta1(&g, p)?;
    for i in 0..m.dim() {
        m.matrix.set(i, i, bounded(rng.next_u64(), p));
    }
    m.construction = Construction::M;
    m.source = Some(params);
    m.cut = Some(side_size(n, alpha));
    Ok(m)
}

/// Where the number of zero `D_1` diagonal entries falls relative to the
/// cut `floor(alpha n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PipelineRegime {
    #[serde(rename = "r >= floor(alpha n)")]
    AtLeastCut,
    #[serde(rename = "r < floor(alpha n)")]
    BelowCut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineReport {
    pub corank_direct: usize,
    /// Corank of `M / D_1'`; `None` if `D_1'` could not be inverted.
    pub corank_schur: Option<usize>,
    /// Zero diagonal entries in the `D_1` block.
    pub r: usize,
    pub regime: Option<PipelineRegime>,
}

impl PipelineReport {
    /// True when both coranks were computed and agree.
    pub fn consistent(&self) -> bool {
        self.corank_schur == Some(self.corank_direct)
    }
}

/// Corank of `m` computed directly and through the Schur complement with
/// respect to `D_1'`, the nonzero-diagonal part of `D_1`.
pub fn corank_pipeline(m: &ReducedModelMatrix) -> PipelineReport {
    let corank_direct = corank_mod_p(&m.matrix);
    let nonzero: Vec<usize> = (0..m.split).filter(|&i| m.matrix.get(i, i) != 0).collect();
    let r = m.split - nonzero.len();
    let s = IndexSet::new(nonzero, m.dim()).expect("sorted distinct indices in range");
    let corank_schur = schur_complement(&m.matrix, &s).ok().map(|c| corank_mod_p(&c));
    let regime = m.cut.map(|cut| if r >= cut { PipelineRegime::AtLeastCut } else { PipelineRegime::BelowCut });
    PipelineReport { corank_direct, corank_schur, r, regime }
}

/// Which diagonal block a uniformity test samples from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagonalBlock {
    /// The first entry of `D_1`.
    Left,
    /// The first entry of `D_2`.
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityTest {
    pub counts: Vec<u64>,
    pub statistic: f64,
    pub degrees_of_freedom: u64,
    pub p_value: f64,
}

/// Chi-square goodness of fit of one `Delta_1` diagonal entry against the
/// uniform law on `Z/pZ`, one independent `G(n, alpha, q)` graph per trial.
pub fn diag_uniformity_stat(
    n: usize,
    alpha: f64,
    q: f64,
    p: u64,
    trials: u64,
    seed: u64,
    block: DiagonalBlock,
) -> Result<UniformityTest, ReductionError> {
    check_prime(p)?;
    if trials < 100 {
        return Err(ReductionError::InvalidParameter(format!("need at least 100 trials, got {trials}")));
    }
    let mut counts = vec![0u64; p as usize];
    for t in 0..trials {
        let g = sample_bipartite(&GraphModelParams::new(n, alpha, q, split_seed(seed, t)))?;
        let m = build_delta1(&g, p)?;
        let i = match block {
            DiagonalBlock::Left => 0,
            DiagonalBlock::Right => m.split,
        };
        counts[m.matrix.get(i, i) as usize] += 1;
    }
    let expected = trials as f64 / p as f64;
    let statistic = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let df = p - 1;
    let p_value = ChiSquared::new(df as f64).expect("positive degrees of freedom").sf(statistic);
    Ok(UniformityTest { counts, statistic, degrees_of_freedom: df, p_value })
}

/// A coupled pair `(Delta_1(n), Delta_1(n + 2p))`. The larger matrix comes
/// from a `G(n + 2p, alpha, q)` sample; the smaller one deletes its outer
/// vertices (the first and last `p` of the `D_1` block, and the outer
/// `floor(alpha (n + 2p)) - floor(alpha n)` of the `D_2` block), so it is a
/// principal submatrix with the shape of `Delta_1(n)`. The diagonal keeps
/// the degrees of the larger graph.
pub fn coupled_delta1_pair(
    n: usize,
    alpha: f64,
    q: f64,
    p: u64,
    seed: u64,
) -> Result<(ReducedModelMatrix, ReducedModelMatrix), ReductionError> {
    check_prime(p)?;
    let pp = p as usize;
    let params = GraphModelParams::new(n + 2 * pp, alpha, q, seed);
    let mut big = build_delta1(&sample_bipartite(&params)?, p)?;
    big.source = Some(params);
    let small_right = side_size(n, alpha);
    if n <= 2 * pp || small_right <= 2 * pp {
        return Err(ReductionError::TooSmall { n_left: n, n_right: small_right, p });
    }
    let extra = (big.dim() - big.split) - (small_right - pp);
    let right_start = big.split + extra / 2;
    let keep: Vec<usize> = (pp..big.split - pp).chain(right_start..right_start + small_right - pp).collect();
    let set = IndexSet::new(keep, big.dim()).expect("sorted distinct indices in range");
    let small = ReducedModelMatrix {
        matrix: submatrix(&big.matrix, &set, &set).expect("bounds match"),
        split: big.split - 2 * pp,
        construction: Construction::Delta1,
        source: None,
        cut: None,
    };
    Ok((small, big))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bigraph::laplacian_mod_p;

    #[test]
    fn delta1_dimensions() {
        let g = BipartiteGraph::complete(24, 12);
        let d = build_delta1(&g, 2).unwrap();
        assert_eq!((d.dim(), d.split), (32, 22));
        assert!(matches!(build_delta1(&BipartiteGraph::complete(24, 4), 2), Err(ReductionError::TooSmall { .. })));
        assert_eq!(build_delta1(&g, 4), Err(ReductionError::NotPrime(4)));
    }

    #[test]
    fn delta1_replays_definition() {
        let g = sample_bipartite(&GraphModelParams::new(8, 1.0, 0.5, 11)).unwrap();
        let p = 3;
        let full = laplacian_mod_p(&g, p).unwrap();
        let d = build_delta1(&g, p).unwrap();
        assert_eq!(d.dim(), 10);
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(d.matrix.get(i, j), full.get(i + 3, j + 3));
            }
        }
        // off-diagonal block is the negated biadjacency
        for i in 0..d.split {
            for j in d.split..d.dim() {
                let edge = g.has_edge(i + 3, j - d.split);
                assert_eq!(d.matrix.get(i, j), if edge { 2 } else { 0 });
            }
        }
    }

    #[test]
    fn delta1_is_symmetric() {
        for seed in 0..500 {
            let g = sample_bipartite(&GraphModelParams::new(12, 0.75, 0.5, seed)).unwrap();
            assert!(build_delta1(&g, 2).unwrap().matrix.is_symmetric());
        }
    }

    #[test]
    fn m_shares_edges_with_delta1() {
        let m = build_m(20, 0.5, 0.5, 2, 99).unwrap();
        assert_eq!(m.dim(), 32);
        assert_eq!(m.cut, Some(10));
        let g = sample_bipartite(&m.source.unwrap()).unwrap();
        let d = build_delta1(&g, 2).unwrap();
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                if i != j {
                    assert_eq!(m.matrix.get(i, j), d.matrix.get(i, j));
                }
            }
        }
        assert!(m.matrix.is_symmetric());
    }

    #[test]
    fn m_diagonal_is_uniform() {
        let trials = 10_000u64;
        let p = 3u64;
        let mut counts = [0u64; 3];
        for t in 0..trials {
            let m = build_m(6, 1.0, 0.5, p, split_seed(5, t)).unwrap();
            counts[m.matrix.get(0, 0) as usize] += 1;
        }
        let expected = trials as f64 / p as f64;
        let sigma = (trials as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn pipeline_on_nonzero_diagonal() {
        let g = sample_bipartite(&GraphModelParams::new(12, 0.75, 0.5, 3)).unwrap();
        let mut m = build_delta1(&g, 2).unwrap();
        for i in 0..m.split {
            m.matrix.set(i, i, 1);
        }
        let report = corank_pipeline(&m);
        assert_eq!(report.r, 0);
        assert!(report.consistent());
        assert_eq!(report.regime, None);
    }

    #[test]
    fn pipeline_counts_zero_diagonal() {
        let m = build_m(40, 0.25, 0.5, 2, 17).unwrap();
        let zeros = (0..m.split).filter(|&i| m.matrix.get(i, i) == 0).count();
        let report = corank_pipeline(&m);
        assert_eq!(report.r, zeros);
        assert!(report.consistent());
        let expected = if zeros >= 10 { PipelineRegime::AtLeastCut } else { PipelineRegime::BelowCut };
        assert_eq!(report.regime, Some(expected));
    }

    #[test]
    fn pipeline_with_empty_d1_prime() {
        let g = sample_bipartite(&GraphModelParams::new(12, 0.75, 0.5, 8)).unwrap();
        let mut m = build_delta1(&g, 2).unwrap();
        for i in 0..m.split {
            m.matrix.set(i, i, 0);
        }
        let report = corank_pipeline(&m);
        assert_eq!(report.r, m.split);
        assert!(report.consistent());
    }

    #[test]
    fn uniformity_rejects_few_trials() {
        assert!(diag_uniformity_stat(60, 0.5, 0.5, 2, 0, 1, DiagonalBlock::Left).is_err());
        let small = diag_uniformity_stat(9, 1.0, 0.5, 3, 200, 1, DiagonalBlock::Left).unwrap();
        assert_eq!(small.counts.iter().sum::<u64>(), 200);
    }

    #[test]
    fn coupled_pair_shapes() {
        let (small, big) = coupled_delta1_pair(30, 0.5, 0.5, 2, 4).unwrap();
        assert_eq!((small.dim(), small.split), (30 + 15 - 4, 28));
        assert_eq!((big.dim(), big.split), (34 + 17 - 4, 32));
        assert!(small.matrix.is_symmetric());
        // the small D_1 block sits at offset p inside the large one
        assert_eq!(small.matrix.get(0, 1), big.matrix.get(2, 3));
    }

    #[test]
    fn coupled_coranks_differ_by_at_most_4p() {
        for (n, alpha, p) in [(40, 0.25, 2), (30, 0.75, 3), (60, 0.5, 2)] {
            for seed in 0..100 {
                let (small, big) = coupled_delta1_pair(n, alpha, 0.5, p, seed).unwrap();
                let gap = corank_mod_p(&small.matrix).abs_diff(corank_mod_p(&big.matrix));
                assert!(gap <= 4 * p as usize, "n={n} seed={seed}: gap {gap}");
            }
        }
    }
}
