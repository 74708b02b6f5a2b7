//! Dense linear algebra over a prime field `Z/pZ`.
//!
//! Matrices are stored row-major as residues in `[0, p)` with `p < 2^31`, so
//! every product of two residues plus a residue fits in a `u64`. All
//! elimination goes through [`eliminate`]: partial pivoting on the first
//! nonzero entry of each column, columns scanned left to right. Results are
//! therefore reproducible bit for bit.
//!
//! For `p = 2` the rank is computed on bit-packed rows with word-wide XOR.
//! [`rank_generic`] always takes the residue path so the two can be checked
//! against each other.

use std::fmt;

use thiserror::Error;

/// Largest modulus accepted (exclusive).
pub const MAX_MODULUS: u64 = 1 << 31;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("modulus {0} is not a prime below 2^31")]
    NotPrime(u64),
    #[error("a {rows}x{cols} matrix needs {} entries, got {got}", rows * cols)]
    ShapeMismatch { rows: usize, cols: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index {index} out of range for bound {bound}")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("index {0} appears twice in an index set")]
    DuplicateIndex(usize),
    #[error("the block selected by S is singular mod {0}")]
    SingularBlock(u32),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Deterministic primality test by trial division; adequate below `2^31`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

fn checked_modulus(p: u64) -> Result<u32> {
    if p >= MAX_MODULUS || !is_prime(p) {
        return Err(LinalgError::NotPrime(p));
    }
    Ok(p as u32)
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

/// Multiplicative inverse of a nonzero residue.
pub fn inv_mod(a: u32, p: u32) -> u32 {
    debug_assert!(!a.is_multiple_of(p));
    pow_mod(a as u64, p as u64 - 2, p as u64) as u32
}

/// A strictly increasing list of row or column positions below `bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSet {
    indices: Vec<usize>,
    bound: usize,
}

impl IndexSet {
    /// Builds an index set from positions in any order. Duplicates and
    /// out-of-range positions are rejected.
    pub fn new(indices: impl IntoIterator<Item = usize>, bound: usize) -> Result<Self> {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(LinalgError::DuplicateIndex(w[0]));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= bound {
                return Err(LinalgError::IndexOutOfRange { index: last, bound });
            }
        }
        Ok(IndexSet { indices, bound })
    }

    pub fn full(bound: usize) -> Self {
        IndexSet { indices: (0..bound).collect(), bound }
    }

    pub fn empty(bound: usize) -> Self {
        IndexSet { indices: Vec::new(), bound }
    }

    /// The positions below `bound` not in `self`.
    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.bound - self.indices.len());
        let mut it = self.indices.iter().peekable();
        for i in 0..self.bound {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        IndexSet { indices: out, bound: self.bound }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

/// Dense matrix over `Z/pZ`. Immutable once built.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PrimeFieldMatrix {
    p: u32,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl PrimeFieldMatrix {
    pub fn zeros(p: u64, rows: usize, cols: usize) -> Result<Self> {
        let p = checked_modulus(p)?;
        Ok(PrimeFieldMatrix { p, rows, cols, data: vec![0; rows * cols] })
    }

    pub fn identity(p: u64, n: usize) -> Result<Self> {
        let mut m = Self::zeros(p, n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        Ok(m)
    }

    /// Row-major entries, reduced mod `p`.
    pub fn from_entries(p: u64, rows: usize, cols: usize, entries: &[i64]) -> Result<Self> {
        let pm = checked_modulus(p)?;
        if entries.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch { rows, cols, got: entries.len() });
        }
        let data = entries.iter().map(|&e| e.rem_euclid(pm as i64) as u32).collect();
        Ok(PrimeFieldMatrix { p: pm, rows, cols, data })
    }

    pub fn from_rows(p: u64, rows: &[Vec<i64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(LinalgError::ShapeMismatch { rows: rows.len(), cols, got: bad.len() });
        }
        let flat: Vec<i64> = rows.iter().flatten().copied().collect();
        Self::from_entries(p, rows.len(), cols, &flat)
    }

    pub fn from_fn(p: u64, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> i64) -> Result<Self> {
        let pm = checked_modulus(p)?;
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j).rem_euclid(pm as i64) as u32);
            }
        }
        Ok(PrimeFieldMatrix { p: pm, rows, cols, data })
    }

    pub fn modulus(&self) -> u32 {
        self.p
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[u32] {
        &self.data
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, value: u64) {
        self.data[i * self.cols + j] = (value % self.p as u64) as u32;
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        PrimeFieldMatrix { p: self.p, rows: self.cols, cols: self.rows, data }
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn rank(&self) -> usize {
        rank_mod_p(self)
    }

    pub fn corank(&self) -> usize {
        corank_mod_p(self)
    }

    fn same_field(&self, other: &Self) -> Result<()> {
        if self.p != other.p {
            return Err(LinalgError::DimensionMismatch(format!("moduli differ: {} vs {}", self.p, other.p)));
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_field(other)?;
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let p = self.p as u64;
        let mut data = vec![0u32; self.rows * other.cols];
        let mut acc = vec![0u64; other.cols];
        for i in 0..self.rows {
            acc.iter_mut().for_each(|a| *a = 0);
            for k in 0..self.cols {
                let a = self.get(i, k) as u64;
                if a == 0 {
                    continue;
                }
                for (slot, &b) in acc.iter_mut().zip(other.row(k)) {
                    *slot = (*slot + a * b as u64) % p;
                }
            }
            for (d, a) in data[i * other.cols..(i + 1) * other.cols].iter_mut().zip(&acc) {
                *d = *a as u32;
            }
        }
        Ok(PrimeFieldMatrix { p: self.p, rows: self.rows, cols: other.cols, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_field(other)?;
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot subtract {}x{} from {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        let p = self.p;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| if a >= b { a - b } else { a + p - b }).collect();
        Ok(PrimeFieldMatrix { p, rows: self.rows, cols: self.cols, data })
    }

    /// Reduced row echelon form and its pivot columns.
    pub fn row_echelon(&self) -> (Self, Vec<usize>) {
        let mut m = self.clone();
        let pivots = eliminate(m.p, &mut m.data, m.rows, m.cols, m.cols, true);
        (m, pivots)
    }

    /// Inverse by Gauss-Jordan on `[A | I]`.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(LinalgError::DimensionMismatch(format!("cannot invert a {}x{} matrix", self.rows, self.cols)));
        }
        let n = self.rows;
        let width = 2 * n;
        let mut aug = vec![0u32; n * width];
        for i in 0..n {
            aug[i * width..i * width + n].copy_from_slice(self.row(i));
            aug[i * width + n + i] = 1;
        }
        let pivots = eliminate(self.p, &mut aug, n, width, n, true);
        if pivots.len() < n {
            return Err(LinalgError::SingularBlock(self.p));
        }
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            data.extend_from_slice(&aug[i * width + n..(i + 1) * width]);
        }
        Ok(PrimeFieldMatrix { p: self.p, rows: n, cols: n, data })
    }
}

/// Row-reduces `data` (`rows` x `cols`, row-major) in place and returns the
/// pivot columns. Pivots are only sought among the first `pivot_cols`
/// columns; remaining columns ride along (augmented systems). Each pivot row
/// is scaled to a leading 1. With `jordan`, entries above pivots are cleared
/// too, giving the reduced form.
fn eliminate(p: u32, data: &mut [u32], rows: usize, cols: usize, pivot_cols: usize, jordan: bool) -> Vec<usize> {
    let pw = p as u64;
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..pivot_cols {
        if r == rows {
            break;
        }
        let Some(found) = (r..rows).find(|&i| data[i * cols + c] != 0) else {
            continue;
        };
        if found != r {
            for j in c..cols {
                data.swap(found * cols + j, r * cols + j);
            }
        }
        let inv = inv_mod(data[r * cols + c], p) as u64;
        for j in c..cols {
            let e = &mut data[r * cols + j];
            *e = (*e as u64 * inv % pw) as u32;
        }
        let (head, tail) = data.split_at_mut(r * cols);
        let (pivot_row, below) = tail.split_at_mut(cols);
        let clear = |row: &mut [u32]| {
            let f = row[c] as u64;
            if f == 0 {
                return;
            }
            let neg = pw - f;
            for j in c..cols {
                row[j] = ((row[j] as u64 + neg * pivot_row[j] as u64) % pw) as u32;
            }
        };
        for row in below.chunks_exact_mut(cols) {
            clear(row);
        }
        if jordan {
            for row in head.chunks_exact_mut(cols) {
                clear(row);
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Rank through the residue elimination path, for any `p`.
pub fn rank_generic(m: &PrimeFieldMatrix) -> usize {
    let mut data = m.data.clone();
    eliminate(m.p, &mut data, m.rows, m.cols, m.cols, false).len()
}

/// Rank over GF(2) with rows packed 64 columns per word.
pub fn rank_gf2_packed(m: &PrimeFieldMatrix) -> usize {
    assert_eq!(m.p, 2, "packed elimination is only valid over GF(2)");
    let words = m.cols.div_ceil(64);
    let mut rows: Vec<Vec<u64>> = (0..m.rows)
        .map(|i| {
            let mut w = vec![0u64; words];
            for (j, &e) in m.row(i).iter().enumerate() {
                if e != 0 {
                    w[j / 64] |= 1 << (j % 64);
                }
            }
            w
        })
        .collect();
    let mut r = 0;
    for c in 0..m.cols {
        if r == rows.len() {
            break;
        }
        let (word, bit) = (c / 64, 1u64 << (c % 64));
        let Some(found) = (r..rows.len()).find(|&i| rows[i][word] & bit != 0) else {
            continue;
        };
        rows.swap(found, r);
        let (head, tail) = rows.split_at_mut(r + 1);
        let pivot = &head[r];
        for row in tail.iter_mut() {
            if row[word] & bit != 0 {
                for (a, b) in row[word..].iter_mut().zip(&pivot[word..]) {
                    *a ^= *b;
                }
            }
        }
        r += 1;
    }
    r
}

/// Dimension of the row space over `Z/pZ`.
pub fn rank_mod_p(m: &PrimeFieldMatrix) -> usize {
    if m.p == 2 {
        rank_gf2_packed(m)
    } else {
        rank_generic(m)
    }
}

/// `min(rows, cols) - rank`.
pub fn corank_mod_p(m: &PrimeFieldMatrix) -> usize {
    m.rows.min(m.cols) - rank_mod_p(m)
}

/// Entry `(i, j)` of the result is `m[rows[i]][cols[j]]`.
pub fn submatrix(m: &PrimeFieldMatrix, rows: &IndexSet, cols: &IndexSet) -> Result<PrimeFieldMatrix> {
    if rows.bound() != m.rows || cols.bound() != m.cols {
        return Err(LinalgError::DimensionMismatch(format!(
            "index sets bound {}x{} but matrix is {}x{}",
            rows.bound(),
            cols.bound(),
            m.rows,
            m.cols
        )));
    }
    let mut data = Vec::with_capacity(rows.len() * cols.len());
    for &i in rows.as_slice() {
        let row = m.row(i);
        data.extend(cols.as_slice().iter().map(|&j| row[j]));
    }
    Ok(PrimeFieldMatrix { p: m.p, rows: rows.len(), cols: cols.len(), data })
}

/// `A/S = A[T,T] - A[T,S] * A[S,S]^-1 * A[S,T]` where `T` is the complement
/// of `S`. The result has the same corank as `A`.
pub fn schur_complement(m: &PrimeFieldMatrix, s: &IndexSet) -> Result<PrimeFieldMatrix> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "Schur complement needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    if s.bound() != m.rows {
        return Err(LinalgError::DimensionMismatch(format!(
            "index set bound {} does not match dimension {}",
            s.bound(),
            m.rows
        )));
    }
    let t = s.complement();
    let a_tt = submatrix(m, &t, &t)?;
    if s.is_empty() {
        return Ok(a_tt);
    }
    let a_ss_inv = submatrix(m, s, s)?.inverse()?;
    let a_ts = submatrix(m, &t, s)?;
    let a_st = submatrix(m, s, &t)?;
    a_tt.sub(&a_ts.mul(&a_ss_inv)?.mul(&a_st)?)
}

impl fmt::Display for PrimeFieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(u32::to_string).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

impl fmt::Debug for PrimeFieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PrimeFieldMatrix {}x{} mod {}", self.rows, self.cols, self.p)?;
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(p: u64, rows: &[&[i64]]) -> PrimeFieldMatrix {
        let rows: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
        PrimeFieldMatrix::from_rows(p, &rows).unwrap()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_mod_p(&PrimeFieldMatrix::identity(2, 3).unwrap()), 3);
        assert_eq!(rank_mod_p(&PrimeFieldMatrix::zeros(5, 4, 7).unwrap()), 0);
        assert_eq!(rank_mod_p(&mat(2, &[&[1, 1], &[1, 1]])), 1);
    }

    #[test]
    fn corank_examples() {
        assert_eq!(corank_mod_p(&PrimeFieldMatrix::identity(3, 3).unwrap()), 0);
        assert_eq!(corank_mod_p(&PrimeFieldMatrix::zeros(2, 2, 5).unwrap()), 2);
        assert_eq!(corank_mod_p(&mat(2, &[&[1, 1], &[1, 1]])), 1);
    }

    #[test]
    fn rejects_composite_and_large_moduli() {
        assert_eq!(PrimeFieldMatrix::zeros(4, 1, 1), Err(LinalgError::NotPrime(4)));
        assert_eq!(PrimeFieldMatrix::zeros(1, 1, 1), Err(LinalgError::NotPrime(1)));
        assert!(PrimeFieldMatrix::zeros(2147483647, 1, 1).is_ok());
        assert!(PrimeFieldMatrix::zeros(MAX_MODULUS + 11, 1, 1).is_err());
    }

    #[test]
    fn entries_are_reduced() {
        let m = mat(5, &[&[-1, 7], &[10, 4]]);
        assert_eq!(m.entries(), &[4, 2, 0, 4]);
    }

    #[test]
    fn schur_examples() {
        let id = PrimeFieldMatrix::identity(3, 2).unwrap();
        let s = IndexSet::new([0], 2).unwrap();
        assert_eq!(schur_complement(&id, &s).unwrap(), mat(3, &[&[1]]));

        // 4 - 3 * inv(2) * 1 = 4 - 3*3 = 0 mod 5
        let a = mat(5, &[&[2, 1], &[3, 4]]);
        let sc = schur_complement(&a, &s).unwrap();
        assert_eq!(sc, mat(5, &[&[0]]));
        assert_eq!(corank_mod_p(&a), 1);
        assert_eq!(corank_mod_p(&sc), 1);
    }

    #[test]
    fn schur_errors() {
        let a = mat(3, &[&[0, 1], &[1, 0]]);
        let s = IndexSet::new([0], 2).unwrap();
        assert_eq!(schur_complement(&a, &s), Err(LinalgError::SingularBlock(3)));
        let wrong = IndexSet::new([0], 3).unwrap();
        assert!(matches!(schur_complement(&a, &wrong), Err(LinalgError::DimensionMismatch(_))));
        let rect = PrimeFieldMatrix::zeros(3, 2, 3).unwrap();
        assert!(schur_complement(&rect, &s).is_err());
    }

    #[test]
    fn schur_with_empty_and_full_sets() {
        let a = mat(7, &[&[1, 2], &[3, 4]]);
        assert_eq!(schur_complement(&a, &IndexSet::empty(2)).unwrap(), a);
        let full = schur_complement(&a, &IndexSet::full(2)).unwrap();
        assert_eq!((full.rows(), full.cols()), (0, 0));
    }

    #[test]
    fn submatrix_examples() {
        let m = mat(7, &[&[1, 2, 3], &[4, 5, 6], &[0, 1, 2]]);
        assert_eq!(submatrix(&m, &IndexSet::full(3), &IndexSet::full(3)).unwrap(), m);
        let empty = submatrix(&m, &IndexSet::empty(3), &IndexSet::full(3)).unwrap();
        assert_eq!((empty.rows(), empty.cols()), (0, 3));
        let picked = submatrix(&m, &IndexSet::new([0, 2], 3).unwrap(), &IndexSet::new([1], 3).unwrap()).unwrap();
        assert_eq!(picked, mat(7, &[&[2], &[1]]));
        assert!(submatrix(&m, &IndexSet::full(4), &IndexSet::full(3)).is_err());
    }

    #[test]
    fn index_set_validation() {
        assert_eq!(IndexSet::new([2, 0], 3).unwrap().as_slice(), &[0, 2]);
        assert_eq!(IndexSet::new([1, 1], 3), Err(LinalgError::DuplicateIndex(1)));
        assert_eq!(IndexSet::new([3], 3), Err(LinalgError::IndexOutOfRange { index: 3, bound: 3 }));
        assert_eq!(IndexSet::new([0, 2], 4).unwrap().complement().as_slice(), &[1, 3]);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = mat(11, &[&[2, 3, 1], &[0, 5, 7], &[1, 0, 4]]);
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv).unwrap(), PrimeFieldMatrix::identity(11, 3).unwrap());
        assert!(mat(2, &[&[1, 1], &[1, 1]]).inverse().is_err());
    }

    #[test]
    fn display_rows() {
        let m = mat(3, &[&[1, 2], &[0, 1]]);
        assert_eq!(m.to_string(), "1 2\n0 1\n");
    }

    fn arb_matrix(p: u64) -> impl Strategy<Value = PrimeFieldMatrix> {
        (0usize..9, 0usize..9).prop_flat_map(move |(r, c)| {
            prop::collection::vec(0..p as i64, r * c)
                .prop_map(move |e| PrimeFieldMatrix::from_entries(p, r, c, &e).unwrap())
        })
    }

    fn arb_any() -> impl Strategy<Value = PrimeFieldMatrix> {
        prop_oneof![arb_matrix(2), arb_matrix(3), arb_matrix(5), arb_matrix(7)]
    }

    proptest! {
        #[test]
        fn rank_equals_transpose_rank(m in arb_any()) {
            prop_assert_eq!(rank_mod_p(&m), rank_mod_p(&m.transpose()));
        }

        #[test]
        fn packed_path_matches_generic(m in arb_matrix(2)) {
            prop_assert_eq!(rank_gf2_packed(&m), rank_generic(&m));
        }

        #[test]
        fn rank_invariant_under_row_ops(m in arb_any(), seed in any::<u64>()) {
            prop_assume!(m.rows() > 1);
            let p = m.modulus() as u64;
            let a = (seed % m.rows() as u64) as usize;
            let b = ((seed >> 20) % m.rows() as u64) as usize;
            let scale = 1 + (seed >> 40) % (p - 1);
            let permuted = PrimeFieldMatrix::from_fn(p, m.rows(), m.cols(), |i, j| {
                let src = if i == a { b } else if i == b { a } else { i };
                m.get(src, j) as i64
            }).unwrap();
            let scaled = PrimeFieldMatrix::from_fn(p, m.rows(), m.cols(), |i, j| {
                let e = m.get(i, j) as i64;
                if i == a { e * scale as i64 } else { e }
            }).unwrap();
            prop_assert_eq!(rank_mod_p(&permuted), rank_mod_p(&m));
            prop_assert_eq!(rank_mod_p(&scaled), rank_mod_p(&m));
        }

        #[test]
        fn rank_bounded_by_shape(m in arb_any()) {
            prop_assert!(rank_mod_p(&m) <= m.rows().min(m.cols()));
        }
    }
}
