//! Truncated power series on a rational exponent grid.
//!
//! A series stores complex coefficients for exponents `num/denom` with
//! `num` in a contiguous range, together with a truncation order: every
//! exponent at or above it is unknown. Binary operations refine to the
//! least common denominator and propagate the truncation pessimistically.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exponents and truncation orders.
pub type Exponent = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("exponent denominator must be positive, got {0}")]
    BadDenominator(i64),
    #[error("coefficient at exponent {num}/{denom} lies at or beyond the truncation order {trunc}")]
    BeyondTruncation { num: i64, denom: i64, trunc: Exponent },
    #[error("division by a series with no known nonzero coefficient")]
    ZeroDivisor,
    #[error("exp needs nonnegative exponents, found leading exponent {0}")]
    ExpOfSingular(Exponent),
    #[error("log of a series with zero leading coefficient")]
    LogOfZero,
    #[error("log needs leading exponent 0, found {0}; use log_split")]
    LogLeadingExponent(Exponent),
    #[error("power of the zero series with non-positive exponent {0}")]
    ZeroPower(Exponent),
    #[error("order fit needs at least 3 samples, got {0}")]
    FitTooFewSamples(usize),
    #[error("order fit needs positive parameters and errors, got ({0}, {1})")]
    FitNonPositive(f64, f64),
    #[error("order fit needs strictly decreasing parameters")]
    FitNotDecreasing,
}

/// Finitely many complex coefficients on the grid `num/denom`, known below `trunc`.
#[derive(Clone, PartialEq)]
pub struct TruncatedSeries {
    denom: i64,
    min_num: i64,
    coeffs: Vec<Complex64>,
    trunc: Exponent,
}

fn ceil_num(trunc: Exponent, denom: i64) -> i64 {
    // smallest num with num/denom >= trunc
    (trunc * denom).ceil().to_integer()
}

impl TruncatedSeries {
    /// Builds a series from the coefficients of `min_num/denom, (min_num+1)/denom, ...`.
    pub fn new(
        denom: i64,
        min_num: i64,
        coeffs: Vec<Complex64>,
        trunc: Exponent,
    ) -> Result<Self, SeriesError> {
        if denom <= 0 {
            return Err(SeriesError::BadDenominator(denom));
        }
        let top = ceil_num(trunc, denom);
        let mut coeffs = coeffs;
        // trailing entries at or beyond the truncation order are rejected unless zero
        while min_num + coeffs.len() as i64 > top {
            let last = *coeffs.last().unwrap();
            if last != Complex64::zero() {
                return Err(SeriesError::BeyondTruncation {
                    num: min_num + coeffs.len() as i64 - 1,
                    denom,
                    trunc,
                });
            }
            coeffs.pop();
        }
        let mut s = TruncatedSeries { denom, min_num, coeffs, trunc };
        s.normalize();
        Ok(s)
    }

    /// Real coefficients, convenience for integer-coefficient series.
    pub fn from_real(
        denom: i64,
        min_num: i64,
        coeffs: &[f64],
        trunc: Exponent,
    ) -> Result<Self, SeriesError> {
        Self::new(denom, min_num, coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(), trunc)
    }

    pub fn zero(denom: i64, trunc: Exponent) -> Self {
        TruncatedSeries { denom: denom.max(1), min_num: ceil_num(trunc, denom.max(1)), coeffs: vec![], trunc }
    }

    pub fn constant(c: Complex64, trunc: Exponent) -> Self {
        Self::monomial(c, Exponent::zero(), trunc)
    }

    pub fn one(trunc: Exponent) -> Self {
        Self::constant(Complex64::new(1.0, 0.0), trunc)
    }

    /// `c q^exp`; the zero series if `exp >= trunc`.
    pub fn monomial(c: Complex64, exp: Exponent, trunc: Exponent) -> Self {
        let denom = *exp.denom();
        if exp >= trunc {
            return Self::zero(denom, trunc);
        }
        let mut s = TruncatedSeries { denom, min_num: *exp.numer(), coeffs: vec![c], trunc };
        s.normalize();
        s
    }

    fn normalize(&mut self) {
        let lead = self.coeffs.iter().position(|c| *c != Complex64::zero());
        match lead {
            None => {
                self.coeffs.clear();
                self.min_num = ceil_num(self.trunc, self.denom);
            }
            Some(k) => {
                if k > 0 {
                    self.coeffs.drain(..k);
                    self.min_num += k as i64;
                }
            }
        }
    }

    pub fn denom(&self) -> i64 {
        self.denom
    }

    pub fn min_num(&self) -> i64 {
        self.min_num
    }

    /// Largest stored numerator; `None` for the zero series.
    pub fn max_num(&self) -> Option<i64> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.min_num + self.coeffs.len() as i64 - 1)
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn truncation_order(&self) -> Exponent {
        self.trunc
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Exponent of the first stored (nonzero) coefficient.
    pub fn leading_exponent(&self) -> Option<Exponent> {
        if self.is_zero() {
            None
        } else {
            Some(Exponent::new(self.min_num, self.denom))
        }
    }

    pub fn leading_coefficient(&self) -> Option<Complex64> {
        self.coeffs.first().copied()
    }

    /// Coefficient of `q^exp`; `None` when the exponent is not known.
    pub fn coefficient(&self, exp: Exponent) -> Option<Complex64> {
        if exp >= self.trunc {
            return None;
        }
        let scaled = exp * self.denom;
        if !scaled.is_integer() {
            return Some(Complex64::zero());
        }
        Some(self.coeff_num(scaled.to_integer()))
    }

    /// Coefficient at grid numerator `num` (zero outside the stored range).
    pub fn coeff_num(&self, num: i64) -> Complex64 {
        let k = num - self.min_num;
        if k < 0 || k as usize >= self.coeffs.len() {
            Complex64::zero()
        } else {
            self.coeffs[k as usize]
        }
    }

    /// Largest coefficient modulus (0 for the zero series).
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Same series on a finer grid `new_denom`, which must be a multiple of the current one.
    pub fn refine(&self, new_denom: i64) -> Self {
        assert!(new_denom > 0 && new_denom % self.denom == 0, "grid refinement must be a multiple");
        let f = new_denom / self.denom;
        if f == 1 {
            return self.clone();
        }
        if self.is_zero() {
            return Self::zero(new_denom, self.trunc);
        }
        let mut coeffs = vec![Complex64::zero(); (self.coeffs.len() - 1) * f as usize + 1];
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs[k * f as usize] = *c;
        }
        TruncatedSeries { denom: new_denom, min_num: self.min_num * f, coeffs, trunc: self.trunc }
    }

    /// Lowers the truncation order to `min(trunc, current)`.
    pub fn truncate(&self, trunc: Exponent) -> Self {
        let trunc = trunc.min(self.trunc);
        let top = ceil_num(trunc, self.denom);
        let keep: Vec<Complex64> = (self.min_num..top.max(self.min_num))
            .map(|n| self.coeff_num(n))
            .collect();
        let mut s = TruncatedSeries { denom: self.denom, min_num: self.min_num, coeffs: keep, trunc };
        s.normalize();
        s
    }

    fn on_grid(a: &Self, b: &Self) -> (Self, Self) {
        let d = a.denom.lcm(&b.denom);
        (a.refine(d), b.refine(d))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut s = self.clone();
        for x in s.coeffs.iter_mut() {
            *x *= c;
        }
        s.normalize();
        s
    }

    /// Multiplication by `q^exp`.
    pub fn shift(&self, exp: Exponent) -> Self {
        let d = self.denom.lcm(exp.denom());
        let s = self.refine(d);
        let dn = (exp * d).to_integer();
        TruncatedSeries { denom: d, min_num: s.min_num + dn, coeffs: s.coeffs, trunc: s.trunc + exp }
    }

    fn add_impl(&self, other: &Self, sign: f64) -> Self {
        let (a, b) = Self::on_grid(self, other);
        let trunc = a.trunc.min(b.trunc);
        let top = ceil_num(trunc, a.denom);
        let lo = match (a.is_zero(), b.is_zero()) {
            (true, true) => top,
            (true, false) => b.min_num,
            (false, true) => a.min_num,
            (false, false) => a.min_num.min(b.min_num),
        };
        let coeffs = (lo..top.max(lo)).map(|n| a.coeff_num(n) + b.coeff_num(n) * sign).collect();
        let mut s = TruncatedSeries { denom: a.denom, min_num: lo, coeffs, trunc };
        s.normalize();
        s
    }

    fn lead_or_trunc(&self) -> Exponent {
        self.leading_exponent().unwrap_or(self.trunc)
    }

    fn mul_impl(&self, other: &Self) -> Self {
        let (a, b) = Self::on_grid(self, other);
        let trunc = (a.trunc + b.lead_or_trunc()).min(b.trunc + a.lead_or_trunc());
        if a.is_zero() || b.is_zero() {
            return Self::zero(a.denom, trunc);
        }
        let top = ceil_num(trunc, a.denom);
        let lo = a.min_num + b.min_num;
        let len = (top - lo).max(0) as usize;
        let mut coeffs = vec![Complex64::zero(); len];
        for (i, x) in a.coeffs.iter().enumerate() {
            if *x == Complex64::zero() {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                let k = i + j;
                if k >= len {
                    break;
                }
                coeffs[k] += x * y;
            }
        }
        let mut s = TruncatedSeries { denom: a.denom, min_num: lo, coeffs, trunc };
        s.normalize();
        s
    }

    /// Relative coefficients `1 + h` after factoring the leading monomial, with the count of known terms.
    fn relative_parts(&self) -> (Complex64, Exponent, Vec<Complex64>) {
        let c0 = self.coeffs[0];
        let v = Exponent::new(self.min_num, self.denom);
        let rel_top = ceil_num(self.trunc - v, self.denom).max(0) as usize;
        let rel = (0..rel_top).map(|k| self.coeff_num(self.min_num + k as i64) / c0).collect();
        (c0, v, rel)
    }

    /// `1/self`.
    pub fn recip(&self) -> Result<Self, SeriesError> {
        if self.is_zero() {
            return Err(SeriesError::ZeroDivisor);
        }
        self.powr(Exponent::from_integer(-1))
    }

    pub fn div(&self, other: &Self) -> Result<Self, SeriesError> {
        Ok(self.mul_impl(&other.recip()?))
    }

    /// `self^r` with the principal branch for the leading coefficient.
    pub fn powr(&self, r: Exponent) -> Result<Self, SeriesError> {
        if self.is_zero() {
            if r > Exponent::zero() {
                return Ok(Self::zero(self.denom, self.trunc * r));
            }
            return Err(SeriesError::ZeroPower(r));
        }
        let (c0, v, b) = self.relative_parts();
        let alpha = r.to_f64().unwrap();
        let n = b.len();
        let mut w = vec![Complex64::zero(); n];
        if n > 0 {
            w[0] = Complex64::new(1.0, 0.0);
        }
        for m in 1..n {
            let mut acc = Complex64::zero();
            for k in 1..=m {
                if b[k] == Complex64::zero() {
                    continue;
                }
                acc += b[k] * w[m - k] * ((alpha + 1.0) * k as f64 - m as f64);
            }
            w[m] = acc / m as f64;
        }
        let lead = if r.is_integer() {
            c0.powi(r.to_integer() as i32)
        } else {
            c0.powf(alpha)
        };
        let rel_trunc = self.trunc - v;
        let new_v = v * r;
        let denom = self.denom.lcm(new_v.denom());
        // relative numerators live on the old grid; map them to the refined one
        let f = denom / self.denom;
        let base = (new_v * denom).to_integer();
        let mut coeffs = vec![Complex64::zero(); if n == 0 { 0 } else { (n - 1) * f as usize + 1 }];
        for (k, x) in w.iter().enumerate() {
            coeffs[k * f as usize] = x * lead;
        }
        Self::new(denom, base, coeffs, new_v + rel_trunc)
    }

    pub fn powi(&self, n: i64) -> Result<Self, SeriesError> {
        if n == 0 {
            return Ok(Self::one(self.trunc - self.lead_or_trunc()));
        }
        if (1..=8).contains(&n) {
            // repeated products keep integer coefficients exact
            let mut out = self.clone();
            for _ in 1..n {
                out = out.mul_impl(self);
            }
            return Ok(out);
        }
        self.powr(Exponent::from_integer(n))
    }

    /// Applies `q d/dq`: the coefficient of `q^e` is multiplied by `e`.
    pub fn q_derivative(&self) -> Self {
        let mut s = self.clone();
        for (k, c) in s.coeffs.iter_mut().enumerate() {
            *c *= (s.min_num + k as i64) as f64 / s.denom as f64;
        }
        s.normalize();
        s
    }

    /// `exp(self)`; exponents must be nonnegative.
    pub fn exp(&self) -> Result<Self, SeriesError> {
        if self.is_zero() {
            return Ok(Self::one(self.trunc));
        }
        if self.min_num < 0 {
            return Err(SeriesError::ExpOfSingular(Exponent::new(self.min_num, self.denom)));
        }
        let top = ceil_num(self.trunc, self.denom).max(0) as usize;
        let g: Vec<Complex64> = (0..top).map(|n| self.coeff_num(n as i64)).collect();
        let mut e = vec![Complex64::zero(); top];
        if top > 0 {
            e[0] = Complex64::new(1.0, 0.0);
        }
        for n in 1..top {
            let mut acc = Complex64::zero();
            for k in 1..=n {
                if g[k] == Complex64::zero() {
                    continue;
                }
                acc += g[k] * e[n - k] * k as f64;
            }
            e[n] = acc / n as f64;
        }
        let scale = if top > 0 { g[0].exp() } else { Complex64::new(1.0, 0.0) };
        let coeffs = e.into_iter().map(|x| x * scale).collect();
        Self::new(self.denom, 0, coeffs, self.trunc)
    }

    /// Splits `self = c q^v (1 + h)` into `(v, ln c, ln(1 + h))`.
    pub fn log_split(&self) -> Result<(Exponent, Complex64, Self), SeriesError> {
        if self.is_zero() {
            return Err(SeriesError::LogOfZero);
        }
        let (c0, v, b) = self.relative_parts();
        let n = b.len();
        let mut l = vec![Complex64::zero(); n];
        for m in 1..n {
            let mut acc = b[m] * m as f64;
            for k in 1..m {
                acc -= l[k] * b[m - k] * k as f64;
            }
            l[m] = acc / m as f64;
        }
        let rel = Self::new(self.denom, 0, l, self.trunc - v)?;
        Ok((v, c0.ln(), rel))
    }

    /// `ln(self)`; the leading exponent must be 0.
    pub fn log(&self) -> Result<Self, SeriesError> {
        let (v, lc, rel) = self.log_split()?;
        if v != Exponent::zero() {
            return Err(SeriesError::LogLeadingExponent(v));
        }
        Ok(&rel + &Self::constant(lc, rel.trunc))
    }

    /// Partial sum at `q = exp(2 pi i tau)` using `q^(num/denom) = exp(2 pi i tau num/denom)`.
    pub fn eval_tau(&self, tau: Complex64) -> Complex64 {
        let step = (Complex64::i() * 2.0 * std::f64::consts::PI * tau / self.denom as f64).exp();
        let mut acc = Complex64::zero();
        let mut pw = (Complex64::i() * 2.0 * std::f64::consts::PI * tau * self.min_num as f64
            / self.denom as f64)
            .exp();
        for c in &self.coeffs {
            acc += c * pw;
            pw *= step;
        }
        acc
    }

    /// Coefficients on the integer grid after factoring `q^lead`, for printing integer sequences.
    pub fn integer_grid_coeffs(&self) -> Vec<Complex64> {
        if self.is_zero() {
            return vec![];
        }
        let d = self.denom;
        self.coeffs.iter().step_by(d as usize).copied().collect()
    }
}

impl fmt::Debug for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TruncatedSeries(denom={}, ", self.denom)?;
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c != Complex64::zero() {
                write!(f, "[{}: {}] ", self.min_num + k as i64, c)?;
            }
        }
        write!(f, "+ O(q^{}))", self.trunc)
    }
}

impl Add for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn add(self, rhs: &TruncatedSeries) -> TruncatedSeries {
        self.add_impl(rhs, 1.0)
    }
}

impl Sub for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn sub(self, rhs: &TruncatedSeries) -> TruncatedSeries {
        self.add_impl(rhs, -1.0)
    }
}

impl Mul for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, rhs: &TruncatedSeries) -> TruncatedSeries {
        self.mul_impl(rhs)
    }
}

impl Mul<Complex64> for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, rhs: Complex64) -> TruncatedSeries {
        self.scale(rhs)
    }
}

impl Mul<f64> for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, rhs: f64) -> TruncatedSeries {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

impl Neg for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn neg(self) -> TruncatedSeries {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    denom: i64,
    terms: Vec<(i64, f64, f64)>,
    trunc: String,
}

impl Serialize for TruncatedSeries {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let terms = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != Complex64::zero())
            .map(|(k, c)| (self.min_num + k as i64, c.re, c.im))
            .collect();
        SeriesJson {
            denom: self.denom,
            terms,
            trunc: format!("{}/{}", self.trunc.numer(), self.trunc.denom()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TruncatedSeries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = SeriesJson::deserialize(deserializer)?;
        let trunc = parse_ratio(&raw.trunc).map_err(de::Error::custom)?;
        if raw.denom <= 0 {
            return Err(de::Error::custom(SeriesError::BadDenominator(raw.denom)));
        }
        if raw.terms.is_empty() {
            return Ok(TruncatedSeries::zero(raw.denom, trunc));
        }
        let lo = raw.terms.iter().map(|t| t.0).min().unwrap();
        let hi = raw.terms.iter().map(|t| t.0).max().unwrap();
        let mut coeffs = vec![Complex64::zero(); (hi - lo + 1) as usize];
        for (n, re, im) in raw.terms {
            coeffs[(n - lo) as usize] += Complex64::new(re, im);
        }
        TruncatedSeries::new(raw.denom, lo, coeffs, trunc).map_err(de::Error::custom)
    }
}

/// Parses `"a/b"` or `"a"`.
pub fn parse_ratio(s: &str) -> Result<Exponent, String> {
    let mut parts = s.trim().splitn(2, '/');
    let num: i64 = parts.next().unwrap_or("").trim().parse().map_err(|e| format!("bad numerator in {s:?}: {e}"))?;
    let den: i64 = match parts.next() {
        Some(d) => d.trim().parse().map_err(|e| format!("bad denominator in {s:?}: {e}"))?,
        None => 1,
    };
    if den == 0 {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(Exponent::new(num, den))
}

/// Least-squares line through `(ln parameter, ln error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// root-mean-square deviation of the log errors from the fitted line
    pub residual: f64,
}

/// Fits `error ~ exp(intercept) * parameter^slope`.
pub fn order_fit(samples: &[(f64, f64)]) -> Result<OrderFit, SeriesError> {
    if samples.len() < 3 {
        return Err(SeriesError::FitTooFewSamples(samples.len()));
    }
    for &(p, e) in samples {
        if !(p > 0.0 && e > 0.0) {
            return Err(SeriesError::FitNonPositive(p, e));
        }
    }
    if samples.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(SeriesError::FitNotDecreasing);
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(OrderFit { slope, intercept, residual: (ss / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Exponent {
        Exponent::new(n, d)
    }

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn difference_of_squares() {
        let a = TruncatedSeries::from_real(1, 0, &[1.0, 1.0], r(10, 1)).unwrap();
        let b = TruncatedSeries::from_real(1, 0, &[1.0, -1.0], r(10, 1)).unwrap();
        let p = &a * &b;
        assert_eq!(p.coeff_num(0), c(1.0));
        assert_eq!(p.coeff_num(1), c(0.0));
        assert_eq!(p.coeff_num(2), c(-1.0));
        assert!(p.truncation_order() >= r(3, 1));
    }

    #[test]
    fn geometric_series() {
        let a = TruncatedSeries::from_real(1, 0, &[1.0, -1.0], r(12, 1)).unwrap();
        let g = a.recip().unwrap();
        for n in 0..12 {
            assert!((g.coeff_num(n) - c(1.0)).norm() < 1e-15);
        }
        assert_eq!(g.truncation_order(), r(12, 1));
    }

    #[test]
    fn fractional_exponents_lift_grid() {
        let a = TruncatedSeries::monomial(c(1.0), r(1, 8), r(5, 1));
        let b = TruncatedSeries::monomial(c(1.0), r(1, 2), r(5, 1));
        let p = &a * &b;
        assert_eq!(p.denom(), 8);
        assert_eq!(p.leading_exponent(), Some(r(5, 8)));
        assert_eq!(p.coefficient(r(5, 8)), Some(c(1.0)));
    }

    #[test]
    fn log_of_one_plus_q() {
        let a = TruncatedSeries::from_real(1, 0, &[1.0, 1.0], r(8, 1)).unwrap();
        let l = a.log().unwrap();
        for n in 1..8 {
            let expect = if n % 2 == 1 { 1.0 } else { -1.0 } / n as f64;
            assert!((l.coeff_num(n) - c(expect)).norm() < 1e-15);
        }
    }

    #[test]
    fn exp_log_round_trip() {
        let a = TruncatedSeries::from_real(1, 0, &[1.0, 1.0, 1.0], r(20, 1)).unwrap();
        let b = a.log().unwrap().exp().unwrap();
        assert!((&b - &a).max_abs_coeff() < 1e-13);
    }

    #[test]
    fn truncation_min_rule() {
        let a = TruncatedSeries::from_real(1, 1, &[1.0], r(5, 1)).unwrap();
        let b = TruncatedSeries::from_real(1, 0, &[1.0, 2.0], r(9, 1)).unwrap();
        // a = q + O(q^5), b = 1 + 2q + O(q^9): product known below min(5+0, 9+1)
        assert_eq!((&a * &b).truncation_order(), r(5, 1));
        assert_eq!((&a + &b).truncation_order(), r(5, 1));
    }

    #[test]
    fn rational_power_of_monomial_series() {
        let a = TruncatedSeries::from_real(1, 1, &[1.0, 1.0], r(10, 1)).unwrap();
        let s = a.powr(r(1, 2)).unwrap();
        let back = &s * &s;
        assert!((&back - &a.truncate(back.truncation_order())).max_abs_coeff() < 1e-14);
        assert_eq!(s.leading_exponent(), Some(r(1, 2)));
    }

    #[test]
    fn errors_are_reported() {
        let z = TruncatedSeries::zero(1, r(5, 1));
        assert_eq!(z.recip().unwrap_err(), SeriesError::ZeroDivisor);
        assert_eq!(z.log().unwrap_err(), SeriesError::LogOfZero);
        let q = TruncatedSeries::monomial(c(1.0), r(-1, 1), r(5, 1));
        assert!(matches!(q.exp(), Err(SeriesError::ExpOfSingular(_))));
        assert!(matches!(q.log(), Err(SeriesError::LogLeadingExponent(_))));
        assert!(TruncatedSeries::new(0, 0, vec![], r(1, 1)).is_err());
        assert!(TruncatedSeries::new(1, 0, vec![c(1.0), c(1.0)], r(1, 1)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let a = TruncatedSeries::new(8, 1, vec![c(2.0), Complex64::new(0.0, -1.0)], r(3, 1)).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert!(s.contains("\"trunc\":\"3/1\""));
        let b: TruncatedSeries = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn order_fit_recovers_powers() {
        let s: Vec<(f64, f64)> = [1e-2, 3e-3, 1e-3].iter().map(|&x| (x, 5.0 * x * x)).collect();
        assert!((order_fit(&s).unwrap().slope - 2.0).abs() < 1e-6);
        let s: Vec<(f64, f64)> = [1e-2f64, 3e-3, 1e-3].iter().map(|&x| (x, x.powi(8))).collect();
        assert!((order_fit(&s).unwrap().slope - 8.0).abs() < 1e-3);
        assert_eq!(order_fit(&s[..2]).unwrap_err(), SeriesError::FitTooFewSamples(2));
        assert!(order_fit(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
        assert!(order_fit(&[(1.0, 0.0), (0.5, 1.0), (0.1, 1.0)]).is_err());
    }
}
