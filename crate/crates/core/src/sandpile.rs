//! Sandpile groups of bipartite graphs.
//!
//! For a connected graph the sandpile group is the cokernel of a reduced
//! Laplacian. A disconnected graph gets the direct sum over its components,
//! each reduced at its own dropped vertex (the last vertex of the component
//! unless told otherwise).
//!
//! The p-rank has two routes: through the Smith normal form, and through the
//! rank of the reduced Laplacians over GF(p). Only the second scales to the
//! larger graphs used in experiments.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bigraph::{
    connected_components, laplacian_mod_p, principal_laplacian, principal_laplacian_mod_p, BipartiteGraph,
};
use crate::gfp::{corank_mod_p, is_prime, rank_mod_p, LinalgError, MAX_MODULUS};
pub use crate::integer::IntegerMatrix;
pub use crate::snf::{normalize_diagonal, smith_normal_form};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SandpileError {
    #[error("{0} is not a prime below 2^31")]
    NotPrime(u64),
    #[error("graph has {0} connected components; a spanning tree needs 1")]
    Disconnected(usize),
    #[error("vertex {index} out of range for {count} vertices")]
    IndexOutOfRange { index: usize, count: usize },
}

impl From<LinalgError> for SandpileError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NotPrime(p) => SandpileError::NotPrime(p),
            other => unreachable!("unexpected linear algebra failure: {other}"),
        }
    }
}

/// A finitely generated abelian group `Z^free_rank + sum Z/d_i` with
/// `d_1 | d_2 | ...`, every `d_i >= 2`. The trivial group has no factors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupInvariants {
    pub factors: Vec<BigInt>,
    /// Product of the finite factors.
    pub order: BigInt,
    pub free_rank: usize,
}

impl GroupInvariants {
    /// Builds the invariants of `sum Z/d` for arbitrary non-negative `d`
    /// (zeros are free summands, ones vanish).
    pub fn from_diagonal(diagonal: impl IntoIterator<Item = BigInt>) -> Self {
        let chain = normalize_diagonal(diagonal.into_iter().collect());
        let free_rank = chain.iter().filter(|d| d.is_zero()).count();
        let factors: Vec<BigInt> = chain.into_iter().filter(|d| !d.is_zero() && !d.is_one()).collect();
        let order = factors.iter().fold(BigInt::one(), |acc, d| acc * d);
        GroupInvariants { factors, order, free_rank }
    }

    pub fn trivial() -> Self {
        GroupInvariants { factors: Vec::new(), order: BigInt::one(), free_rank: 0 }
    }

    /// Number of cyclic summands of order divisible by `p`, counting free
    /// summands.
    pub fn p_rank(&self, p: u64) -> usize {
        let p = BigInt::from(p);
        self.free_rank + self.factors.iter().filter(|d| (*d % &p).is_zero()).count()
    }

    pub fn is_cyclic(&self) -> bool {
        self.free_rank + self.factors.len() <= 1
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
struct GroupJson {
    schema: u32,
    factors: Vec<String>,
    order: String,
    free_rank: usize,
}

impl Serialize for GroupInvariants {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GroupJson {
            schema: 1,
            factors: self.factors.iter().map(BigInt::to_string).collect(),
            order: self.order.to_string(),
            free_rank: self.free_rank,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupInvariants {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = GroupJson::deserialize(d)?;
        let parse = |s: &str| s.parse::<BigInt>().map_err(D::Error::custom);
        let factors = raw.factors.iter().map(|f| parse(f)).collect::<Result<Vec<_>, _>>()?;
        let mut diag = factors.clone();
        diag.extend(std::iter::repeat_n(BigInt::zero(), raw.free_rank));
        let g = GroupInvariants::from_diagonal(diag);
        if g.factors != factors || g.order != parse(&raw.order)? {
            return Err(D::Error::custom("factors are not a valid invariant factor chain"));
        }
        Ok(g)
    }
}

fn check_prime(p: u64) -> Result<(), SandpileError> {
    if p >= MAX_MODULUS || !is_prime(p) {
        return Err(SandpileError::NotPrime(p));
    }
    Ok(())
}

/// Each component with the vertex dropped from its reduced Laplacian.
fn reduced_components(g: &BipartiteGraph, drop: Option<usize>) -> Vec<Vec<usize>> {
    connected_components(g)
        .into_iter()
        .map(|mut comp| {
            let removed = match drop {
                Some(d) if comp.contains(&d) => d,
                _ => *comp.last().expect("components are nonempty"),
            };
            comp.retain(|&v| v != removed);
            comp
        })
        .collect()
}

fn group_from_reduced(g: &BipartiteGraph, reduced: &[Vec<usize>]) -> GroupInvariants {
    let diagonal = reduced
        .iter()
        .filter(|kept| !kept.is_empty())
        .flat_map(|kept| smith_normal_form(&principal_laplacian(g, kept)));
    GroupInvariants::from_diagonal(diagonal)
}

pub fn sandpile_group(g: &BipartiteGraph) -> GroupInvariants {
    group_from_reduced(g, &reduced_components(g, None))
}

/// Same group computed with `drop` as the removed vertex of its component.
pub fn sandpile_group_dropping(g: &BipartiteGraph, drop: usize) -> Result<GroupInvariants, SandpileError> {
    if drop >= g.vertex_count() {
        return Err(SandpileError::IndexOutOfRange { index: drop, count: g.vertex_count() });
    }
    Ok(group_from_reduced(g, &reduced_components(g, Some(drop))))
}

/// `sum over components of (|V_c| - 1) - rank_p(reduced Laplacian of c)`.
pub fn p_rank(g: &BipartiteGraph, p: u64) -> Result<usize, SandpileError> {
    check_prime(p)?;
    let mut total = 0;
    for kept in reduced_components(g, None) {
        if kept.is_empty() {
            continue;
        }
        let m = principal_laplacian_mod_p(g, &kept, p)?;
        total += kept.len() - rank_mod_p(&m);
    }
    Ok(total)
}

/// p-rank read off the invariant factors.
pub fn p_rank_via_snf(g: &BipartiteGraph, p: u64) -> Result<usize, SandpileError> {
    check_prime(p)?;
    Ok(sandpile_group(g).p_rank(p))
}

/// p-rank as `corank(Laplacian mod p) - #components`.
pub fn p_rank_via_laplacian(g: &BipartiteGraph, p: u64) -> Result<usize, SandpileError> {
    check_prime(p)?;
    let corank = corank_mod_p(&laplacian_mod_p(g, p)?);
    Ok(corank - connected_components(g).len())
}

pub fn is_cyclic(g: &BipartiteGraph) -> bool {
    sandpile_group(g).is_cyclic()
}

/// Number of spanning trees, as the determinant of a reduced Laplacian.
pub fn spanning_tree_count(g: &BipartiteGraph) -> Result<BigInt, SandpileError> {
    let comps = connected_components(g).len();
    if comps > 1 {
        return Err(SandpileError::Disconnected(comps));
    }
    let n = g.vertex_count();
    if n == 0 {
        return Ok(BigInt::one());
    }
    let keep: Vec<usize> = (0..n - 1).collect();
    Ok(principal_laplacian(g, &keep).determinant())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bigraph::{is_connected, sample_bipartite, GraphModelParams};
    use proptest::prelude::*;

    fn factors(g: &GroupInvariants) -> Vec<i64> {
        g.factors.iter().map(|d| i64::try_from(d).unwrap()).collect()
    }

    #[test]
    fn small_groups() {
        let k11 = BipartiteGraph::complete(1, 1);
        assert_eq!(sandpile_group(&k11), GroupInvariants::trivial());
        let k23 = sandpile_group(&BipartiteGraph::complete(2, 3));
        assert_eq!(factors(&k23), vec![2, 6]);
        assert_eq!(k23.order, 12.into());
        let k22 = sandpile_group(&BipartiteGraph::complete(2, 2));
        assert_eq!(factors(&k22), vec![4]);
        assert_eq!(k22.order, 4.into());
    }

    #[test]
    fn p_rank_examples() {
        let k11 = BipartiteGraph::complete(1, 1);
        let k23 = BipartiteGraph::complete(2, 3);
        let k22 = BipartiteGraph::complete(2, 2);
        for p in [2, 3, 5, 7] {
            assert_eq!(p_rank(&k11, p).unwrap(), 0);
        }
        assert_eq!(p_rank(&k23, 2).unwrap(), 2);
        assert_eq!(p_rank(&k23, 3).unwrap(), 1);
        assert_eq!(p_rank(&k23, 5).unwrap(), 0);
        assert_eq!(p_rank(&k22, 2).unwrap(), 1);
        assert_eq!(p_rank(&k22, 4), Err(SandpileError::NotPrime(4)));
    }

    #[test]
    fn cyclicity_examples() {
        assert!(is_cyclic(&BipartiteGraph::complete(1, 1)));
        assert!(is_cyclic(&BipartiteGraph::complete(2, 2)));
        assert!(!is_cyclic(&BipartiteGraph::complete(2, 3)));
    }

    #[test]
    fn spanning_tree_examples() {
        assert_eq!(spanning_tree_count(&BipartiteGraph::complete(1, 1)).unwrap(), 1.into());
        assert_eq!(spanning_tree_count(&BipartiteGraph::complete(1, 3)).unwrap(), 1.into());
        assert_eq!(spanning_tree_count(&BipartiteGraph::complete(2, 3)).unwrap(), 12.into());
        assert_eq!(spanning_tree_count(&BipartiteGraph::empty(1, 2)), Err(SandpileError::Disconnected(3)));
    }

    #[test]
    fn disconnected_graph_is_direct_sum() {
        // K_{2,2} on {L0, L1, R0, R1} plus K_{2,2} on {L2, L3, R2, R3}
        let edges = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2), (2, 3), (3, 2), (3, 3)];
        let g = BipartiteGraph::from_edges(4, 5, edges).unwrap();
        let group = sandpile_group(&g);
        assert_eq!(factors(&group), vec![4, 4]);
        assert_eq!(group.free_rank, 0);
        assert_eq!(p_rank(&g, 2).unwrap(), 2);
        assert_eq!(p_rank_via_laplacian(&g, 2).unwrap(), 2);
        assert!(!group.is_cyclic());
    }

    #[test]
    fn json_shape() {
        let g = sandpile_group(&BipartiteGraph::complete(2, 3));
        let s = g.to_json_string();
        assert_eq!(s, r#"{"schema":1,"factors":["2","6"],"order":"12","free_rank":0}"#);
        let back: GroupInvariants = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<GroupInvariants>(
            r#"{"schema":1,"factors":["6","2"],"order":"12","free_rank":0}"#
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn p_rank_routes_agree(n in 4usize..24, alpha in 0.25f64..=1.0, q in 0.1f64..0.9, seed in any::<u64>()) {
            let g = sample_bipartite(&GraphModelParams::new(n, alpha, q, seed)).unwrap();
            let group = sandpile_group(&g);
            prop_assert_eq!(group.free_rank, 0);
            for p in [2, 3, 5, 7] {
                let via_gfp = p_rank(&g, p).unwrap();
                prop_assert_eq!(group.p_rank(p), via_gfp);
                prop_assert_eq!(p_rank_via_laplacian(&g, p).unwrap(), via_gfp);
            }
            if is_connected(&g) {
                prop_assert_eq!(&group.order, &spanning_tree_count(&g).unwrap());
            }
        }

        #[test]
        fn group_ignores_dropped_vertex(n in 2usize..6, alpha in 0.5f64..=1.0, seed in any::<u64>()) {
            let g = sample_bipartite(&GraphModelParams::new(n, alpha, 0.5, seed)).unwrap();
            prop_assume!(g.vertex_count() <= 8);
            let base = sandpile_group(&g);
            for v in 0..g.vertex_count() {
                prop_assert_eq!(&sandpile_group_dropping(&g, v).unwrap(), &base);
            }
        }
    }

    #[test]
    fn small_trees_match_enumeration() {
        for g in crate::oracle::all_small_bipartite_graphs(6) {
            if is_connected(&g) {
                let count = crate::oracle::spanning_trees_by_enumeration(&g);
                assert_eq!(spanning_tree_count(&g).unwrap(), count.into());
            }
        }
    }

    #[test]
    fn drop_out_of_range() {
        let g = BipartiteGraph::complete(1, 1);
        assert!(sandpile_group_dropping(&g, 2).is_err());
        assert_eq!(sandpile_group_dropping(&g, 0).unwrap(), GroupInvariants::trivial());
    }
}
