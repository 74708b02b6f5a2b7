//! Closed forms for the p-rank law.
//!
//! Probabilities with rational parameters are computed exactly with
//! [`BigRational`] and rounded to `f64` only when reported. A probability
//! given as an `f64` is itself a dyadic rational, so the exact routines accept
//! it too; the binary64 path exists for speed on large `n`.
//!
//! The predicted law of the p-rank is `max(B(n, 1/p) - floor(alpha n), 0)`.
//! Its expectation has three regimes according to the sign of `alpha - 1/p`.

use std::f64::consts::PI;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bigraph::side_size;
use crate::gfp::{is_prime, MAX_MODULUS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("k = {k} lies outside the support 0..={n}")]
    OutOfSupport { k: u64, n: u64 },
    #[error("P(B({n}, alpha) > {s}) is zero")]
    EmptyConditioningEvent { n: u64, s: u64 },
    #[error("|alpha n - s| = {gap} is not below sqrt(n) = {bound}")]
    OutOfRange { gap: f64, bound: f64 },
    #[error("an {n}x{m} matrix cannot have rank {n}: need m >= n")]
    InvalidShape { n: u64, m: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0} is not a prime below 2^31")]
    NotPrime(u64),
}

/// A success probability in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Probability {
    Exact(BigRational),
    Approx(f64),
}

impl Probability {
    pub fn ratio(num: u64, den: u64) -> Self {
        Probability::Exact(BigRational::new(num.into(), den.into()))
    }

    /// `1/p`.
    pub fn reciprocal(p: u64) -> Self {
        Self::ratio(1, p)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Probability::Exact(r) => r.to_f64().expect("probabilities are finite"),
            Probability::Approx(x) => *x,
        }
    }

    /// The exact value of the probability (an `f64` converts without loss).
    pub fn to_rational(&self) -> BigRational {
        match self {
            Probability::Exact(r) => r.clone(),
            Probability::Approx(x) => exact_f64(*x),
        }
    }

    fn validate(&self) -> Result<(), TheoryError> {
        let ok = match self {
            Probability::Exact(r) => !r.is_negative() && *r <= BigRational::one(),
            Probability::Approx(x) => (0.0..=1.0).contains(x),
        };
        if ok {
            Ok(())
        } else {
            Err(TheoryError::InvalidParameter(format!("probability {self} outside [0, 1]")))
        }
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Probability::Exact(r) => write!(f, "{r}"),
            Probability::Approx(x) => write!(f, "{x}"),
        }
    }
}

/// `B(n, prob)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialSpec {
    pub n: u64,
    pub prob: Probability,
}

impl BinomialSpec {
    pub fn new(n: u64, prob: Probability) -> Result<Self, TheoryError> {
        prob.validate()?;
        Ok(BinomialSpec { n, prob })
    }
}

fn exact_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("ratio of finite size")
}

fn check_prime(p: u64) -> Result<(), TheoryError> {
    if p >= MAX_MODULUS || !is_prime(p) {
        return Err(TheoryError::NotPrime(p));
    }
    Ok(())
}

fn check_unit(name: &str, x: f64) -> Result<(), TheoryError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(TheoryError::InvalidParameter(format!("{name} = {x} outside [0, 1]")))
    }
}

/// The whole row `P(B(n, q) = k)` for `k = 0..=n`.
pub fn binom_pmf_row_exact(n: u64, q: &BigRational) -> Vec<BigRational> {
    // with q = a/b: C(n,k) a^k (b-a)^(n-k) / b^n
    let (a, b) = (q.numer().clone(), q.denom().clone());
    let c = &b - &a;
    let denom = num_traits::pow(b, n as usize);
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut binom = BigInt::one();
    let mut a_pow = BigInt::one();
    let c_pows: Vec<BigInt> =
        std::iter::successors(Some(BigInt::one()), |x| Some(x * &c)).take(n as usize + 1).collect();
    for k in 0..=n {
        let num = &binom * &a_pow * &c_pows[(n - k) as usize];
        out.push(BigRational::new(num, denom.clone()));
        binom = binom * (n - k) / (k + 1);
        a_pow *= &a;
    }
    out
}

/// `P(B(n, q) = k)` exactly.
pub fn binom_pmf_exact(n: u64, q: &BigRational, k: u64) -> Result<BigRational, TheoryError> {
    if k > n {
        return Err(TheoryError::OutOfSupport { k, n });
    }
    let (a, b) = (q.numer().clone(), q.denom().clone());
    let c = &b - &a;
    let mut binom = BigInt::one();
    for i in 0..k {
        binom = binom * (n - i) / (i + 1);
    }
    let num = binom * num_traits::pow(a, k as usize) * num_traits::pow(c, (n - k) as usize);
    Ok(BigRational::new(num, num_traits::pow(b, n as usize)))
}

/// `P(B(n, q) = k)` as an `f64`. Exact probabilities are evaluated in
/// rational arithmetic; approximate ones with the saddle-point form.
pub fn binom_pmf(spec: &BinomialSpec, k: u64) -> Result<f64, TheoryError> {
    spec.prob.validate()?;
    if k > spec.n {
        return Err(TheoryError::OutOfSupport { k, n: spec.n });
    }
    Ok(match &spec.prob {
        Probability::Exact(q) => to_f64(&binom_pmf_exact(spec.n, q, k)?),
        Probability::Approx(q) => binom_pmf_saddle(spec.n, *q, k),
    })
}

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)`.
fn stirling_error(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        let ln_fact: f64 = (2..=n as u64).map(|i| (i as f64).ln()).sum();
        return ln_fact - (n + 0.5) * n.ln() + n - 0.5 * (2.0 * PI).ln();
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// `x ln(x / np) + np - x`, without cancellation when `x` is near `np`.
fn deviance(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1.. {
            ej *= v2;
            let next = s + ej / f64::from(2 * j + 1);
            if next == s {
                break;
            }
            s = next;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

fn binom_pmf_saddle(n: u64, q: f64, k: u64) -> f64 {
    let nf = n as f64;
    if q == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (nf * (-q).ln_1p()).exp();
    }
    if k == n {
        return (nf * q.ln()).exp();
    }
    let (x, y) = (k as f64, (n - k) as f64);
    let lc =
        stirling_error(nf) - stirling_error(x) - stirling_error(y) - deviance(x, nf * q) - deviance(y, nf * (1.0 - q));
    let lf = (2.0 * PI).ln() + x.ln() + (-x / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// `P(B(n, q) > s)` exactly; `s < 0` gives 1.
pub fn binom_tail_gt_exact(n: u64, q: &BigRational, s: i64) -> BigRational {
    if s < 0 {
        return BigRational::one();
    }
    let row = binom_pmf_row_exact(n, q);
    row.into_iter().skip(s as usize + 1).fold(BigRational::zero(), |acc, x| acc + x)
}

pub fn binom_tail_gt(spec: &BinomialSpec, s: i64) -> Result<f64, TheoryError> {
    spec.prob.validate()?;
    if s < 0 {
        return Ok(1.0);
    }
    if s as u64 >= spec.n {
        return Ok(0.0);
    }
    Ok(match &spec.prob {
        Probability::Exact(q) => to_f64(&binom_tail_gt_exact(spec.n, q, s)),
        Probability::Approx(q) => (s as u64 + 1..=spec.n).map(|k| binom_pmf_saddle(spec.n, *q, k)).sum(),
    })
}

/// `E(B(n, alpha) | B(n, alpha) > s)` through the closed form
/// `alpha n + alpha (1 - alpha) n P(B(n-1, alpha) = s) / P(B(n, alpha) > s)`.
pub fn conditional_mean_above_exact(n: u64, alpha: &BigRational, s: u64) -> Result<BigRational, TheoryError> {
    if s >= n {
        return Err(TheoryError::EmptyConditioningEvent { n, s });
    }
    let tail = binom_tail_gt_exact(n, alpha, s as i64);
    if tail.is_zero() {
        return Err(TheoryError::EmptyConditioningEvent { n, s });
    }
    let nr = BigRational::from_integer(n.into());
    let point = binom_pmf_exact(n - 1, alpha, s)?;
    let one_minus = BigRational::one() - alpha;
    Ok(alpha * &nr + alpha * one_minus * nr * point / tail)
}

pub fn conditional_mean_above(n: u64, alpha: f64, s: u64) -> Result<f64, TheoryError> {
    check_unit("alpha", alpha)?;
    conditional_mean_above_exact(n, &exact_f64(alpha), s).map(|r| to_f64(&r))
}

/// `E(max(B(n, 1/p) - cut, 0))` exactly.
pub fn expected_excess_rational(n: u64, cut: &BigRational, p: u64) -> Result<BigRational, TheoryError> {
    check_prime(p)?;
    let row = binom_pmf_row_exact(n, &BigRational::new(1.into(), p.into()));
    let mut total = BigRational::zero();
    for (k, mass) in row.into_iter().enumerate() {
        let gap = BigRational::from_integer(k.into()) - cut;
        if gap.is_positive() {
            total += gap * mass;
        }
    }
    Ok(total)
}

/// `E(max(B(n, 1/p) - alpha_cut n, 0))` with the cut taken exactly from the
/// `f64` value of `alpha_cut`.
pub fn expected_excess_exact(n: u64, alpha_cut: f64, p: u64) -> Result<f64, TheoryError> {
    if !alpha_cut.is_finite() {
        return Err(TheoryError::InvalidParameter(format!("cut ratio {alpha_cut} is not finite")));
    }
    let cut = exact_f64(alpha_cut) * BigRational::from_integer(n.into());
    expected_excess_rational(n, &cut, p).map(|r| to_f64(&r))
}

/// Which side of `1/p` the side ratio falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `alpha < 1/p`: the p-rank grows linearly.
    Subcritical,
    /// `alpha > 1/p`: the p-rank stays bounded.
    Supercritical,
    /// `alpha = 1/p`: the p-rank grows like `sqrt(n)`.
    Critical,
}

impl Regime {
    /// `|alpha p - 1| <= 1e-9` counts as critical.
    pub fn classify(alpha: f64, p: u64) -> Self {
        let t = alpha * p as f64 - 1.0;
        if t.abs() <= 1e-9 {
            Regime::Critical
        } else if t < 0.0 {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Subcritical => "subcritical",
            Regime::Supercritical => "supercritical",
            Regime::Critical => "critical",
        })
    }
}

/// Leading term of the expected p-rank: `(1/p - alpha) n`, `0`, or
/// `sqrt((1/p)(1 - 1/p) n / (2 pi))`. Bounded corrections are not included.
pub fn expected_rank_asymptotic(n: u64, alpha: f64, p: u64) -> Result<(f64, Regime), TheoryError> {
    check_prime(p)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(TheoryError::InvalidParameter(format!("alpha = {alpha} outside (0, 1]")));
    }
    let inv = 1.0 / p as f64;
    let nf = n as f64;
    let regime = Regime::classify(alpha, p);
    let value = match regime {
        Regime::Subcritical => (inv - alpha) * nf,
        Regime::Supercritical => 0.0,
        Regime::Critical => (inv * (1.0 - inv) * nf / (2.0 * PI)).sqrt(),
    };
    Ok((value, regime))
}

/// The law of `max(B(n, 1/p) - offset, 0)` with `offset = floor(alpha n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDistribution {
    pub n: u64,
    pub alpha: f64,
    pub p: u64,
    pub offset: u64,
    exact: Vec<BigRational>,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

pub fn rank_pmf_theoretical(n: u64, alpha: f64, p: u64) -> Result<RankDistribution, TheoryError> {
    check_prime(p)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(TheoryError::InvalidParameter(format!("alpha = {alpha} outside (0, 1]")));
    }
    let offset = side_size(n as usize, alpha) as u64;
    let row = binom_pmf_row_exact(n, &BigRational::new(1.into(), p.into()));
    let mut exact = Vec::new();
    let mut head = BigRational::zero();
    for (k, mass) in row.into_iter().enumerate() {
        if (k as u64) <= offset {
            head += mass;
        } else {
            if exact.is_empty() {
                exact.push(std::mem::take(&mut head));
            }
            exact.push(mass);
        }
    }
    if exact.is_empty() {
        exact.push(head);
    }
    // cumulative sums in exact arithmetic so the cdf ends at exactly 1
    let mut running = BigRational::zero();
    let mut cdf = Vec::with_capacity(exact.len());
    for mass in &exact {
        running += mass;
        cdf.push(to_f64(&running));
    }
    let pmf = exact.iter().map(to_f64).collect();
    Ok(RankDistribution { n, alpha, p, offset, exact, pmf, cdf })
}

impl RankDistribution {
    /// Probabilities of ranks `0, 1, ...`; the support ends at the last entry.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn pmf_exact(&self) -> &[BigRational] {
        &self.exact
    }

    pub fn prob(&self, rank: u64) -> f64 {
        self.pmf.get(rank as usize).copied().unwrap_or(0.0)
    }

    /// `P(rank <= x)`.
    pub fn cdf(&self, x: u64) -> f64 {
        self.cdf.get(x as usize).copied().unwrap_or(1.0)
    }

    pub fn max_rank(&self) -> u64 {
        self.pmf.len() as u64 - 1
    }

    pub fn mean_exact(&self) -> BigRational {
        self.exact
            .iter()
            .enumerate()
            .fold(BigRational::zero(), |acc, (j, m)| acc + BigRational::from_integer(j.into()) * m)
    }

    pub fn mean(&self) -> f64 {
        to_f64(&self.mean_exact())
    }

    /// Smallest rank `r` with `P(rank <= r) >= u`.
    pub fn quantile(&self, u: f64) -> u64 {
        self.cdf.iter().position(|&c| c >= u).unwrap_or(self.cdf.len() - 1) as u64
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("serialization cannot fail")
    }
}

#[derive(Serialize)]
struct DistributionParams {
    n: u64,
    alpha: f64,
    p: u64,
    offset: u64,
}

impl Serialize for RankDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("RankDistribution", 3)?;
        st.serialize_field("schema", &1)?;
        st.serialize_field(
            "params",
            &DistributionParams { n: self.n, alpha: self.alpha, p: self.p, offset: self.offset },
        )?;
        let pairs: Vec<(u64, f64)> = self.pmf.iter().enumerate().map(|(r, &m)| (r as u64, m)).collect();
        st.serialize_field("pmf", &pairs)?;
        st.end()
    }
}

/// Gaussian local estimate of `P(B(n, alpha) = s)`, valid for
/// `|alpha n - s| < sqrt(n)`.
pub fn dml_estimate(n: u64, alpha: f64, s: i64) -> Result<f64, TheoryError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(TheoryError::InvalidParameter(format!("alpha = {alpha} outside (0, 1)")));
    }
    let nf = n as f64;
    let gap = (alpha * nf - s as f64).abs();
    let bound = nf.sqrt();
    if gap >= bound {
        return Err(TheoryError::OutOfRange { gap, bound });
    }
    let var = alpha * (1.0 - alpha) * nf;
    Ok((-(gap * gap) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt())
}

/// `2 exp(-2 eps^2 n)`, an upper bound on `P(|B(n, q) - qn| > eps n)`.
/// For small `n` the value exceeds 1; callers reporting a probability clamp
/// it.
pub fn hoeffding_bound(n: u64, q: f64, eps: f64) -> Result<f64, TheoryError> {
    check_unit("q", q)?;
    if eps <= 0.0 || !eps.is_finite() {
        return Err(TheoryError::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    Ok(2.0 * (-2.0 * eps * eps * n as f64).exp())
}

/// `max(0, 1 - beta^-2 (1 - beta)^(m + 1 - n))`, a lower bound on the
/// probability that an `n x m` matrix with entry min-entropy `beta` has
/// full row rank.
pub fn min_entropy_rank_bound(n: u64, m: u64, beta: f64) -> Result<f64, TheoryError> {
    if m < n {
        return Err(TheoryError::InvalidShape { n, m });
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(TheoryError::InvalidParameter(format!("beta = {beta} outside (0, 1)")));
    }
    let exponent = i32::try_from(m + 1 - n).unwrap_or(i32::MAX);
    Ok((1.0 - (1.0 - beta).powi(exponent) / (beta * beta)).max(0.0))
}

/// Exact version of [`min_entropy_rank_bound`] for rational `beta`, without
/// the clamp.
pub fn min_entropy_rank_bound_exact(n: u64, m: u64, beta: &BigRational) -> Result<BigRational, TheoryError> {
    if m < n {
        return Err(TheoryError::InvalidShape { n, m });
    }
    let gamma = BigRational::one() - beta;
    Ok(BigRational::one() - num_traits::pow(gamma, (m + 1 - n) as usize) / (beta * beta))
}
