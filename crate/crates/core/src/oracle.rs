//! Brute-force reference computations.
//!
//! Each function here recomputes something the main modules compute, by a
//! deliberately different and slower method: convolution instead of closed
//! forms, minors instead of elimination, enumeration instead of determinants.
//! They back the unit tests and the `verify` suite.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::bigraph::{connected_components, laplacian, BipartiteGraph};
use crate::integer::IntegerMatrix;

/// `P(B(n, q) = k)` for all `k`, by convolving `n` Bernoulli laws.
pub fn binomial_by_convolution(n: u64, q: &BigRational) -> Vec<BigRational> {
    let miss = BigRational::one() - q;
    let mut row = vec![BigRational::one()];
    for _ in 0..n {
        let mut next = vec![BigRational::zero(); row.len() + 1];
        for (k, mass) in row.iter().enumerate() {
            next[k] += mass * &miss;
            next[k + 1] += mass * q;
        }
        row = next;
    }
    row
}

/// `E(B(n, q) | B(n, q) > s)` by direct summation; `None` when the event is
/// empty.
pub fn conditional_mean_by_summation(n: u64, q: &BigRational, s: u64) -> Option<BigRational> {
    let row = binomial_by_convolution(n, q);
    let mut tail = BigRational::zero();
    let mut weighted = BigRational::zero();
    for (k, mass) in row.iter().enumerate().skip(s as usize + 1) {
        tail += mass;
        weighted += BigRational::from_integer(k.into()) * mass;
    }
    (!tail.is_zero()).then(|| weighted / tail)
}

/// [`conditional_mean_by_summation`] for every `s` in `0..n` at once.
pub fn conditional_means_by_summation(n: u64, q: &BigRational) -> Vec<Option<BigRational>> {
    let row = binomial_by_convolution(n, q);
    let mut tail = BigRational::zero();
    let mut weighted = BigRational::zero();
    let mut out = vec![None; n as usize];
    for s in (0..n as usize).rev() {
        tail += &row[s + 1];
        weighted += BigRational::from_integer((s + 1).into()) * &row[s + 1];
        if !tail.is_zero() {
            out[s] = Some(&weighted / &tail);
        }
    }
    out
}

/// Number of spanning trees, by testing every `(V-1)`-edge subset.
/// Only for small graphs.
pub fn spanning_trees_by_enumeration(g: &BipartiteGraph) -> u64 {
    let v = g.vertex_count();
    if v <= 1 {
        return 1;
    }
    let edges: Vec<(usize, usize)> = g.edges().map(|(i, j)| (i, g.n_left() + j)).collect();
    assert!(edges.len() <= 24, "enumeration is exponential in the edge count");
    let mut count = 0;
    for mask in 0u32..(1 << edges.len()) {
        if mask.count_ones() as usize != v - 1 {
            continue;
        }
        let mut parent: Vec<usize> = (0..v).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut acyclic = true;
        for (e, &(a, b)) in edges.iter().enumerate() {
            if mask >> e & 1 == 0 {
                continue;
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                acyclic = false;
                break;
            }
            parent[ra] = rb;
        }
        if acyclic {
            count += 1;
        }
    }
    count
}

/// Determinant of a small matrix by fraction-free elimination in `i128`.
fn det_small(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    let mut a = [[0i128; 8]; 8];
    for (i, row) in m.iter().enumerate() {
        a[i][..n].copy_from_slice(row);
    }
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            let Some(r) = (k + 1..n).find(|&r| a[r][k] != 0) else {
                return 0;
            };
            a.swap(k, r);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
            a[i][k] = 0;
        }
        prev = a[k][k];
    }
    if n == 0 {
        1
    } else {
        sign * a[n - 1][n - 1]
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Smith normal form diagonal from determinantal divisors: `D_k` is the gcd
/// of all `k x k` minors and `d_k = D_k / D_(k-1)`. Entries must be small
/// and neither side may exceed 8.
pub fn snf_by_minors(m: &IntegerMatrix) -> Vec<BigInt> {
    assert!(m.rows().min(m.cols()) <= 8, "minors oracle is limited to 8 x 8");
    let a: Vec<Vec<i128>> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| i128::try_from(m.get(i, j)).expect("small entries")).collect())
        .collect();
    let r = m.rows().min(m.cols());
    let mut divisors = vec![1i128];
    for k in 1..=r {
        let mut g = 0i128;
        'outer: for rows in subsets(m.rows(), k) {
            for cols in subsets(m.cols(), k) {
                let sub: Vec<Vec<i128>> = rows.iter().map(|&i| cols.iter().map(|&j| a[i][j]).collect()).collect();
                g = g.gcd(&det_small(&sub));
                if g == 1 {
                    break 'outer;
                }
            }
        }
        divisors.push(g);
    }
    (1..=r)
        .map(|k| if divisors[k] == 0 { BigInt::zero() } else { BigInt::from(divisors[k] / divisors[k - 1]) })
        .collect()
}

/// Sandpile group invariants (factors `>= 2`, free rank) of `g` with
/// `drop` removed from its component, via [`snf_by_minors`] on the
/// block-diagonal reduced Laplacian.
pub fn sandpile_factors_by_minors(g: &BipartiteGraph, drop: usize) -> (Vec<BigInt>, usize) {
    let mut keep = Vec::new();
    for comp in connected_components(g) {
        let removed = if comp.contains(&drop) { drop } else { *comp.last().expect("nonempty") };
        keep.extend(comp.into_iter().filter(|&v| v != removed));
    }
    keep.sort_unstable();
    let reduced = laplacian(g).principal(&keep);
    let diag = snf_by_minors(&reduced);
    let free = diag.iter().filter(|d| d.is_zero()).count();
    let factors = diag.into_iter().filter(|d| !d.is_zero() && !d.is_one()).collect();
    (factors, free)
}

/// Rank over the rationals by Gaussian elimination in [`BigRational`].
pub fn rational_rank(m: &IntegerMatrix) -> usize {
    let mut a: Vec<Vec<BigRational>> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| BigRational::from_integer(m.get(i, j).clone())).collect())
        .collect();
    let mut rank = 0;
    for c in 0..m.cols() {
        let Some(p) = (rank..a.len()).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for i in rank + 1..a.len() {
            if a[i][c].is_zero() {
                continue;
            }
            let f = &a[i][c] / &a[rank][c];
            let (top, bottom) = a.split_at_mut(i);
            for (x, pivot) in bottom[0][c..].iter_mut().zip(&top[rank][c..]) {
                *x -= &f * pivot;
            }
        }
        rank += 1;
    }
    rank
}

/// Probability that a uniform `n x m` matrix over GF(p), `n <= m`, has rank
/// `n`: `prod_{i=m-n+1}^{m} (1 - p^-i)`.
pub fn uniform_full_rank_probability(n: u64, m: u64, p: u64) -> BigRational {
    assert!(n <= m, "need n <= m");
    (m - n + 1..=m).fold(BigRational::one(), |acc, i| {
        let pi = num_traits::pow(BigInt::from(p), i as usize);
        acc * (BigRational::one() - BigRational::new(BigInt::one(), pi))
    })
}

/// Every bipartite graph with `n_left + n_right <= max_vertices` and both
/// sides nonempty.
pub fn all_small_bipartite_graphs(max_vertices: usize) -> impl Iterator<Item = BipartiteGraph> {
    (1..max_vertices).flat_map(move |nl| {
        (1..=max_vertices - nl).flat_map(move |nr| {
            let slots = nl * nr;
            (0u64..1 << slots).map(move |mask| {
                let edges = (0..slots).filter(|&s| mask >> s & 1 == 1).map(|s| (s / nr, s % nr));
                BipartiteGraph::from_edges(nl, nr, edges).expect("edges in range")
            })
        })
    })
}

/// Checks `d_1 | d_2 | ...` with zeros last.
pub fn is_divisibility_chain(d: &[BigInt]) -> bool {
    d.windows(2).all(|w| if w[0].is_zero() { w[1].is_zero() } else { (&w[1] % &w[0]).is_zero() && !w[0].is_negative() })
}
