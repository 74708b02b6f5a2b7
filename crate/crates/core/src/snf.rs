//! Smith normal form over the integers.
//!
//! Classical elimination: at each step the smallest nonzero entry (by
//! absolute value, ties broken by row then column) of the trailing block is
//! moved to the pivot position, its row and column are reduced by division
//! with remainder, and the step repeats until the pivot row and column are
//! clear. The diagonal is then normalized into a divisibility chain with
//! pairwise gcd/lcm.
//!
//! Work starts on `i64` entries with checked arithmetic. When an operation
//! would overflow, the current state is promoted to `BigInt` and elimination
//! resumes at the same step. Row and column operations are applied entry by
//! entry only after the whole operation has been checked, so a promotion
//! never sees a half-applied operation.
//!
//! Entries of the trailing block grow quickly once unit pivots run out. For
//! a square input with `D = |det| != 0`, the trailing block `B` has
//! determinant dividing `D`, so its column lattice contains `D * Z^r`. Its
//! cokernel therefore equals that of `[B | D*I]`, and every entry may be
//! reduced mod `D` along the way. A final diagonal entry `a` then
//! contributes `gcd(a, D)`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::integer::IntegerMatrix;

/// Entry type the elimination runs over.
trait Entry: Clone + PartialEq {
    fn is_nil(&self) -> bool;
    fn abs_cmp_lt(&self, other: &Self) -> bool;
    /// Floor-style quotient `a div b`.
    fn quotient(a: &Self, b: &Self) -> Self;
    /// `a - q * b`, or `None` on overflow.
    fn sub_mul(a: &Self, q: &Self, b: &Self) -> Option<Self>;
    /// Symmetric residue of `a` mod `m`.
    fn reduce(a: Self, m: &Self) -> Self;
    fn to_big(&self) -> BigInt;
}

impl Entry for i64 {
    fn is_nil(&self) -> bool {
        *self == 0
    }
    fn abs_cmp_lt(&self, other: &Self) -> bool {
        self.unsigned_abs() < other.unsigned_abs()
    }
    fn quotient(a: &Self, b: &Self) -> Self {
        a.div_euclid(*b)
    }
    fn sub_mul(a: &Self, q: &Self, b: &Self) -> Option<Self> {
        // i64::MIN is excluded so that abs and quotients never overflow
        q.checked_mul(*b).and_then(|qb| a.checked_sub(qb)).filter(|&v| v != i64::MIN)
    }
    fn reduce(a: Self, m: &Self) -> Self {
        let r = a.rem_euclid(*m);
        if r > m / 2 {
            r - m
        } else {
            r
        }
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Entry for BigInt {
    fn is_nil(&self) -> bool {
        Zero::is_zero(self)
    }
    fn abs_cmp_lt(&self, other: &Self) -> bool {
        self.magnitude() < other.magnitude()
    }
    fn quotient(a: &Self, b: &Self) -> Self {
        a.div_floor(b)
    }
    fn sub_mul(a: &Self, q: &Self, b: &Self) -> Option<Self> {
        Some(a - q * b)
    }
    fn reduce(a: Self, m: &Self) -> Self {
        let r = a.mod_floor(m);
        if &r + &r > *m {
            r - m
        } else {
            r
        }
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
}

struct Overflow;

struct Work<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
    /// Next pivot position; everything above and left of it is diagonal.
    step: usize,
    /// When set, entries of the trailing block are kept reduced mod this.
    modulus: Option<T>,
}

impl<T: Entry> Work<T> {
    fn at(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.rows {
                self.data.swap(i * self.cols + a, i * self.cols + b);
            }
        }
    }

    fn min_entry(&self, k: usize) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for i in k..self.rows {
            for j in k..self.cols {
                let e = self.at(i, j);
                if e.is_nil() {
                    continue;
                }
                match best {
                    Some((bi, bj)) if !e.abs_cmp_lt(self.at(bi, bj)) => {}
                    _ => best = Some((i, j)),
                }
            }
        }
        best
    }

    /// `row[target] -= q * row[k]` over columns `k..`.
    fn row_op(&mut self, target: usize, k: usize, q: &T) -> Result<(), Overflow> {
        let mut updated = Vec::with_capacity(self.cols - k);
        for j in k..self.cols {
            let pivot_entry = self.at(k, j);
            let v = if pivot_entry.is_nil() {
                self.at(target, j).clone()
            } else {
                T::sub_mul(self.at(target, j), q, pivot_entry).ok_or(Overflow)?
            };
            updated.push(match &self.modulus {
                Some(m) => T::reduce(v, m),
                None => v,
            });
        }
        for (j, v) in (k..self.cols).zip(updated) {
            self.data[target * self.cols + j] = v;
        }
        Ok(())
    }

    /// `col[target] -= q * col[k]` over rows `k..`.
    fn col_op(&mut self, target: usize, k: usize, q: &T) -> Result<(), Overflow> {
        let mut updated = Vec::with_capacity(self.rows - k);
        for i in k..self.rows {
            let pivot_entry = self.at(i, k);
            let v = if pivot_entry.is_nil() {
                self.at(i, target).clone()
            } else {
                T::sub_mul(self.at(i, target), q, pivot_entry).ok_or(Overflow)?
            };
            updated.push(match &self.modulus {
                Some(m) => T::reduce(v, m),
                None => v,
            });
        }
        for (i, v) in (k..self.rows).zip(updated) {
            self.data[i * self.cols + target] = v;
        }
        Ok(())
    }

    /// Diagonalizes from `self.step` onward.
    fn diagonalize(&mut self) -> Result<(), Overflow> {
        let limit = self.rows.min(self.cols);
        while self.step < limit {
            let k = self.step;
            let Some((pi, pj)) = self.min_entry(k) else {
                break;
            };
            self.swap_rows(k, pi);
            self.swap_cols(k, pj);
            loop {
                let pivot = self.at(k, k).clone();
                let mut dirty = false;
                for i in k + 1..self.rows {
                    if self.at(i, k).is_nil() {
                        continue;
                    }
                    let q = T::quotient(self.at(i, k), &pivot);
                    self.row_op(i, k, &q)?;
                    dirty |= !self.at(i, k).is_nil();
                }
                for j in k + 1..self.cols {
                    if self.at(k, j).is_nil() {
                        continue;
                    }
                    let q = T::quotient(self.at(k, j), &pivot);
                    self.col_op(j, k, &q)?;
                    dirty |= !self.at(k, j).is_nil();
                }
                if !dirty {
                    break;
                }
                // A nonzero remainder is smaller than the pivot; bring the
                // smallest one in the pivot row or column forward.
                let mut best = (k, k);
                for i in k + 1..self.rows {
                    let e = self.at(i, k);
                    if !e.is_nil() && e.abs_cmp_lt(self.at(best.0, best.1)) {
                        best = (i, k);
                    }
                }
                for j in k + 1..self.cols {
                    let e = self.at(k, j);
                    if !e.is_nil() && e.abs_cmp_lt(self.at(best.0, best.1)) {
                        best = (k, j);
                    }
                }
                self.swap_rows(k, best.0);
                self.swap_cols(k, best.1);
            }
            self.step += 1;
        }
        Ok(())
    }

    fn promote(&self) -> Work<BigInt> {
        Work {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(Entry::to_big).collect(),
            step: self.step,
            modulus: None,
        }
    }

    fn diagonal(&self) -> Vec<BigInt> {
        (0..self.rows.min(self.cols)).map(|i| self.at(i, i).to_big().abs()).collect()
    }
}

impl Work<BigInt> {
    /// `(row_k, row_i) <- (s row_k + t row_i, u row_k + v row_i)` over
    /// columns `k..`, reduced mod the working modulus.
    fn combine_rows(&mut self, k: usize, i: usize, [s, t, u, v]: &[BigInt; 4]) {
        let m = self.modulus.clone().expect("modular phase");
        for j in k..self.cols {
            let (a, b) = (&self.data[k * self.cols + j], &self.data[i * self.cols + j]);
            let top = BigInt::reduce(s * a + t * b, &m);
            let bottom = BigInt::reduce(u * a + v * b, &m);
            self.data[k * self.cols + j] = top;
            self.data[i * self.cols + j] = bottom;
        }
    }

    fn combine_cols(&mut self, k: usize, j: usize, [s, t, u, v]: &[BigInt; 4]) {
        let m = self.modulus.clone().expect("modular phase");
        for i in k..self.rows {
            let (a, b) = (&self.data[i * self.cols + k], &self.data[i * self.cols + j]);
            let left = BigInt::reduce(s * a + t * b, &m);
            let right = BigInt::reduce(u * a + v * b, &m);
            self.data[i * self.cols + k] = left;
            self.data[i * self.cols + j] = right;
        }
    }

    /// Unimodular 2x2 transform sending `(a, b)` to `(gcd(a, b), 0)`.
    fn bezout(a: &BigInt, b: &BigInt) -> [BigInt; 4] {
        let e = a.extended_gcd(b);
        [e.x, e.y, -(b / &e.gcd), a / &e.gcd]
    }

    /// Diagonalizes the trailing block modulo `self.modulus` using gcd
    /// pivots: each pivot row and column is cleared in one pass of Bezout
    /// combinations, repeated until neither has a nonzero entry left.
    fn diagonalize_modular(&mut self) {
        let limit = self.rows.min(self.cols);
        while self.step < limit {
            let k = self.step;
            let Some((pi, pj)) = self.min_entry(k) else {
                break;
            };
            self.swap_rows(k, pi);
            self.swap_cols(k, pj);
            loop {
                for i in k + 1..self.rows {
                    if self.at(i, k).is_nil() {
                        continue;
                    }
                    if self.at(i, k).is_multiple_of(self.at(k, k)) {
                        let q = self.at(i, k) / self.at(k, k);
                        self.row_op(i, k, &q).unwrap_or_else(|_| unreachable!());
                    } else {
                        let t = Self::bezout(self.at(k, k), self.at(i, k));
                        self.combine_rows(k, i, &t);
                    }
                }
                let mut dirty = false;
                for j in k + 1..self.cols {
                    if self.at(k, j).is_nil() {
                        continue;
                    }
                    if self.at(k, j).is_multiple_of(self.at(k, k)) {
                        // Zeroing the entry alone is only valid while column k
                        // is clear below the pivot; a Bezout step may have
                        // refilled it.
                        if dirty {
                            let q = self.at(k, j) / self.at(k, k);
                            self.col_op(j, k, &q).unwrap_or_else(|_| unreachable!());
                        } else {
                            self.data[k * self.cols + j] = BigInt::zero();
                        }
                    } else {
                        let t = Self::bezout(self.at(k, k), self.at(k, j));
                        self.combine_cols(k, j, &t);
                        dirty = true;
                    }
                }
                if !dirty || (k + 1..self.rows).all(|i| self.at(i, k).is_nil()) {
                    break;
                }
            }
            self.step += 1;
        }
    }

    /// Finishes a promoted elimination. `det` is the absolute determinant
    /// of the original matrix when it is square and nonsingular.
    fn finish(mut self, det: Option<BigInt>) -> Vec<BigInt> {
        let k = self.step;
        let Some(det) = det.filter(|d| !d.is_zero()) else {
            self.diagonalize().unwrap_or_else(|_| unreachable!());
            return self.diagonal();
        };
        for i in k..self.rows {
            for j in k..self.cols {
                let e = std::mem::take(&mut self.data[i * self.cols + j]);
                self.data[i * self.cols + j] = BigInt::reduce(e, &det);
            }
        }
        self.modulus = Some(det.clone());
        self.diagonalize_modular();
        let mut diag = self.diagonal();
        for d in &mut diag[k..] {
            *d = d.gcd(&det);
        }
        diag
    }
}

/// Turns any list of non-negative diagonal entries into the equivalent
/// divisibility chain `d1 | d2 | ...` (zeros last).
pub fn normalize_diagonal(mut d: Vec<BigInt>) -> Vec<BigInt> {
    let n = d.len();
    for i in 0..n {
        for j in i + 1..n {
            if d[i].is_zero() && d[j].is_zero() {
                continue;
            }
            let g = d[i].gcd(&d[j]);
            let l = if g.is_zero() { BigInt::zero() } else { d[i].lcm(&d[j]) };
            d[i] = g;
            d[j] = l;
        }
    }
    d
}

fn square_det(m: &IntegerMatrix) -> Option<BigInt> {
    (m.rows() == m.cols()).then(|| m.determinant().abs())
}

/// Diagonal `d1, ..., d_min(r,c)` of the Smith normal form, non-negative and
/// with `d_i | d_(i+1)`.
pub fn smith_normal_form(m: &IntegerMatrix) -> Vec<BigInt> {
    let small: Option<Vec<i64>> =
        m.entries().iter().map(|e| i64::try_from(e).ok().filter(|&v| v != i64::MIN)).collect();
    let diag = match small {
        Some(data) => {
            let mut work = Work { rows: m.rows(), cols: m.cols(), data, step: 0, modulus: None };
            match work.diagonalize() {
                Ok(()) => work.diagonal(),
                Err(Overflow) => work.promote().finish(square_det(m)),
            }
        }
        None => Work { rows: m.rows(), cols: m.cols(), data: m.entries().to_vec(), step: 0, modulus: None }
            .finish(square_det(m)),
    };
    normalize_diagonal(diag)
}
