//! Hyperelliptic curves y^2 = p(x) and the correlator models of the (2,5) theory on them.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("curve degree {0} is outside 3..=8")]
    BadDegree(usize),
    #[error("leading coefficient must be nonzero")]
    ZeroLeading,
    #[error("roots {0} and {1} are closer than 1e-8")]
    CoincidentRoots(usize, usize),
    #[error("root index {0} out of range")]
    BadRootIndex(usize),
    #[error("the two points coincide")]
    CoincidentPoints,
    #[error("first derivative vanishes at {0}")]
    VanishingDerivative(Complex64),
    #[error("operation needs a degree-5 curve, got degree {0}")]
    NotQuintic(usize),
    #[error("correlator parameters: {0}")]
    BadParams(String),
    #[error("graph enumeration is limited to N <= 4, got {0}")]
    TooManyVertices(usize),
}

/// Dense polynomial, coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly(pub Vec<Complex64>);

impl Poly {
    pub fn constant(c: Complex64) -> Self {
        Poly(vec![c])
    }

    /// x - r
    pub fn linear_root(r: Complex64) -> Self {
        Poly(vec![-r, Complex64::new(1.0, 0.0)])
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.0.iter().rev().fold(Complex64::zero(), |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![]);
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect())
    }

    pub fn nth_derivative(&self, k: usize) -> Poly {
        (0..k).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly(vec![]);
        }
        let mut out = vec![Complex64::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.0.get(k).copied().unwrap_or_else(Complex64::zero)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Sheet of the square root y = +-sqrt(p(x)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sheet {
    Plus,
    Minus,
}

impl Sheet {
    pub fn sign(self) -> f64 {
        match self {
            Sheet::Plus => 1.0,
            Sheet::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sheet {
        match self {
            Sheet::Plus => Sheet::Minus,
            Sheet::Minus => Sheet::Plus,
        }
    }
}

/// y^2 = a0 prod (x - X_i).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCurve {
    a0: Complex64,
    roots: Vec<Complex64>,
    poly: Poly,
}

#[derive(Serialize, Deserialize)]
struct CurveJson {
    a0: [f64; 2],
    roots: Vec<[f64; 2]>,
}

impl Serialize for HyperCurve {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CurveJson { a0: [self.a0.re, self.a0.im], roots: self.roots.iter().map(|r| [r.re, r.im]).collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HyperCurve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = CurveJson::deserialize(d)?;
        HyperCurve::new(
            Complex64::new(raw.a0[0], raw.a0[1]),
            raw.roots.iter().map(|r| Complex64::new(r[0], r[1])).collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}

impl HyperCurve {
    pub fn new(a0: Complex64, roots: Vec<Complex64>) -> Result<Self, CurveError> {
        if !(3..=8).contains(&roots.len()) {
            return Err(CurveError::BadDegree(roots.len()));
        }
        if a0 == Complex64::zero() {
            return Err(CurveError::ZeroLeading);
        }
        for i in 0..roots.len() {
            for j in i + 1..roots.len() {
                if (roots[i] - roots[j]).norm() <= 1e-8 {
                    return Err(CurveError::CoincidentRoots(i, j));
                }
            }
        }
        let poly = roots.iter().fold(Poly::constant(a0), |p, r| p.mul(&Poly::linear_root(*r)));
        Ok(HyperCurve { a0, roots, poly })
    }

    /// Random quintic with roots in the unit disk, pairwise at least 0.3 apart.
    pub fn random_quintic<R: Rng>(rng: &mut R) -> Self {
        loop {
            let roots: Vec<Complex64> = (0..5)
                .map(|_| Complex64::from_polar(rng.gen_range(0.0..1.0f64).sqrt(), rng.gen_range(0.0..std::f64::consts::TAU)))
                .collect();
            let spread = (0..5)
                .flat_map(|i| (i + 1..5).map(move |j| (i, j)))
                .map(|(i, j)| (roots[i] - roots[j]).norm())
                .fold(f64::INFINITY, f64::min);
            if spread >= 0.3 {
                let a0 = Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..std::f64::consts::TAU));
                return HyperCurve::new(a0, roots).expect("separated roots");
            }
        }
    }

    pub fn degree(&self) -> usize {
        self.roots.len()
    }

    pub fn a0(&self) -> Complex64 {
        self.a0
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn root(&self, s: usize) -> Result<Complex64, CurveError> {
        self.roots.get(s).copied().ok_or(CurveError::BadRootIndex(s))
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    /// Same curve with root `s` moved to `x`.
    pub fn with_root(&self, s: usize, x: Complex64) -> Result<Self, CurveError> {
        let mut roots = self.roots.clone();
        *roots.get_mut(s).ok_or(CurveError::BadRootIndex(s))? = x;
        HyperCurve::new(self.a0, roots)
    }

    /// p(x) by the product form, so p vanishes exactly at the roots.
    pub fn p(&self, x: Complex64) -> Complex64 {
        self.roots.iter().fold(self.a0, |acc, r| acc * (x - r))
    }

    /// k-th derivative of p at x (zero above the degree).
    pub fn derivative(&self, x: Complex64, k: usize) -> Complex64 {
        if k == 0 {
            return self.p(x);
        }
        if k > self.degree() {
            return Complex64::zero();
        }
        self.poly.nth_derivative(k).eval(x)
    }

    /// p^(k)(X_s) = k! a0 e_{n-k}(X_s - X_i, i != s).
    pub fn derivative_at_root(&self, s: usize, k: usize) -> Result<Complex64, CurveError> {
        let xs = self.root(s)?;
        let n = self.degree();
        if k == 0 || k > n {
            return Ok(Complex64::zero());
        }
        let diffs: Vec<Complex64> = self.roots.iter().enumerate().filter(|(i, _)| *i != s).map(|(_, r)| xs - r).collect();
        // elementary symmetric polynomials of the differences
        let mut e = vec![Complex64::zero(); diffs.len() + 1];
        e[0] = Complex64::new(1.0, 0.0);
        for d in &diffs {
            for j in (1..e.len()).rev() {
                let prev = e[j - 1];
                e[j] += prev * d;
            }
        }
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        Ok(e[n - k] * self.a0 * fact)
    }

    /// p, p', ..., p^(n) at a root.
    pub fn root_jet(&self, s: usize) -> Result<Vec<Complex64>, CurveError> {
        (0..=self.degree()).map(|k| self.derivative_at_root(s, k)).collect()
    }

    pub fn y(&self, x: Complex64, sheet: Sheet) -> Complex64 {
        self.p(x).sqrt() * sheet.sign()
    }

    /// f_12 = ((y1 + y2)/(x1 - x2))^2.
    pub fn f_pair(&self, x1: Complex64, x2: Complex64, s1: Sheet, s2: Sheet) -> Result<Complex64, CurveError> {
        if x1 == x2 {
            return Err(CurveError::CoincidentPoints);
        }
        let w = (self.y(x1, s1) + self.y(x2, s2)) / (x1 - x2);
        Ok(w * w)
    }

    /// Schwarzian derivative of p.
    pub fn schwarzian(&self, x: Complex64) -> Result<Complex64, CurveError> {
        schwarzian_from_jet(self.derivative(x, 1), self.derivative(x, 2), self.derivative(x, 3))
            .ok_or(CurveError::VanishingDerivative(x))
    }

    /// omega_s = sum_{t != s} xi / (X_s - X_t).
    pub fn omega(&self, s: usize, xi: Complex64) -> Result<Complex64, CurveError> {
        let xs = self.root(s)?;
        Ok(self.roots.iter().enumerate().filter(|(t, _)| *t != s).map(|(_, r)| xi / (xs - r)).sum())
    }
}

/// f'''/f' - (3/2)(f''/f')^2; `None` when f' = 0.
pub fn schwarzian_from_jet(d1: Complex64, d2: Complex64, d3: Complex64) -> Option<Complex64> {
    if d1 == Complex64::zero() {
        return None;
    }
    let r = d2 / d1;
    Some(d3 / d1 - r * r * 1.5)
}

/// Schwarzian of an arbitrary function by central differences with the given step.
pub fn schwarzian_numeric(f: impl Fn(Complex64) -> Complex64, x: Complex64, step: f64) -> Result<Complex64, CurveError> {
    let h = step;
    let fm2 = f(x - 2.0 * h);
    let fm1 = f(x - h);
    let f0 = f(x);
    let fp1 = f(x + h);
    let fp2 = f(x + 2.0 * h);
    let d1 = (fp1 - fm1) / (2.0 * h);
    let d2 = (fp1 - f0 * 2.0 + fm1) / (h * h);
    let d3 = (fp2 - fp1 * 2.0 + fm1 * 2.0 - fm2) / (2.0 * h * h * h);
    schwarzian_from_jet(d1, d2, d3).ok_or(CurveError::VanishingDerivative(x))
}

/// Sum over s of omega_s for weights xi_s, in the antisymmetrized form sum_{s<t} (xi_s - xi_t)/(X_s - X_t).
pub fn omega_total(curve: &HyperCurve, xi: &[Complex64]) -> Complex64 {
    let r = curve.roots();
    let mut acc = Complex64::zero();
    for s in 0..r.len() {
        for t in s + 1..r.len() {
            acc += (xi[s] - xi[t]) / (r[s] - r[t]);
        }
    }
    acc
}

/// Default central charge of the (2,5) model.
pub const C_MINIMAL: f64 = -22.0 / 5.0;

/// Free data of the one- and two-point models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorParams {
    /// <1>
    pub z: Complex64,
    /// <vartheta>(x) = sum_k theta_coeffs[k] x^k, degree n-2
    pub theta_coeffs: Vec<Complex64>,
    pub b11: Complex64,
    pub c: Complex64,
}

/// Leading coefficient -(c/32)(n^2-1) a0 Z forced on <vartheta>.
pub fn vartheta_leading(curve: &HyperCurve, z: Complex64, c: Complex64) -> Complex64 {
    let n = curve.degree() as f64;
    -c / 32.0 * (n * n - 1.0) * curve.a0() * z
}

impl CorrelatorParams {
    pub fn new(curve: &HyperCurve, z: Complex64, theta_coeffs: Vec<Complex64>, b11: Complex64, c: Complex64) -> Result<Self, CurveError> {
        let n = curve.degree();
        if theta_coeffs.len() != n - 1 {
            return Err(CurveError::BadParams(format!("theta_coeffs needs {} entries, got {}", n - 1, theta_coeffs.len())));
        }
        let lead = vartheta_leading(curve, z, c);
        if (theta_coeffs[n - 2] - lead).norm() > 1e-12 * lead.norm().max(1.0) {
            return Err(CurveError::BadParams(format!("theta_coeffs[{}] must equal {lead}", n - 2)));
        }
        Ok(CorrelatorParams { z, theta_coeffs, b11, c })
    }

    /// Builds the parameters from the free lower coefficients; the leading one is forced.
    pub fn from_lower(curve: &HyperCurve, z: Complex64, lower: &[Complex64], b11: Complex64, c: Complex64) -> Result<Self, CurveError> {
        let mut coeffs = lower.to_vec();
        coeffs.push(vartheta_leading(curve, z, c));
        Self::new(curve, z, coeffs, b11, c)
    }

    pub fn random<R: Rng>(curve: &HyperCurve, rng: &mut R, c: Complex64) -> Self {
        let mut draw = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let z = draw();
        let lower: Vec<Complex64> = (0..curve.degree() - 2).map(|_| draw()).collect();
        let b11 = draw();
        Self::from_lower(curve, z, &lower, b11, c).expect("consistent by construction")
    }

    pub fn vartheta_poly(&self) -> Poly {
        Poly(self.theta_coeffs.clone())
    }

    /// Multiplies all correlator data by `s` (c unchanged).
    pub fn scaled(&self, s: Complex64) -> Self {
        CorrelatorParams {
            z: self.z * s,
            theta_coeffs: self.theta_coeffs.iter().map(|t| t * s).collect(),
            b11: self.b11 * s,
            c: self.c,
        }
    }
}

/// <vartheta>(x).
pub fn vartheta(params: &CorrelatorParams, x: Complex64) -> Complex64 {
    params.vartheta_poly().eval(x)
}

/// <psi>(x) = -(c/480)(p' p''' - 3/2 p''^2) Z + (1/5)(p'' th - 1/2 p' th' - p th'').
pub fn psi_value(curve: &HyperCurve, params: &CorrelatorParams, x: Complex64) -> Complex64 {
    let d = |k| curve.derivative(x, k);
    let th = params.vartheta_poly();
    let (t0, t1, t2) = (th.eval(x), th.derivative().eval(x), th.nth_derivative(2).eval(x));
    let c = params.c;
    -c / 480.0 * (d(1) * d(3) - d(2) * d(2) * 1.5) * params.z + (d(2) * t0 - d(1) * t1 * 0.5 - d(0) * t2) / 5.0
}

/// Closed form of <psi>'(X_s).
pub fn psi_prime_at_root(curve: &HyperCurve, params: &CorrelatorParams, s: usize) -> Result<Complex64, CurveError> {
    let j = curve.root_jet(s)?;
    let x = curve.root(s)?;
    let th = params.vartheta_poly();
    let (t0, t1, t2) = (th.eval(x), th.derivative().eval(x), th.nth_derivative(2).eval(x));
    let c = params.c;
    Ok(-c / 480.0 * (j[1] * j[4] - j[2] * j[3] * 2.0) * params.z + j[3] * t0 / 5.0 + j[2] * t1 / 10.0 - j[1] * t2 * 0.3)
}

fn require_quintic(curve: &HyperCurve) -> Result<(), CurveError> {
    if curve.degree() != 5 {
        Err(CurveError::NotQuintic(curve.degree()))
    } else {
        Ok(())
    }
}

/// beta as a polynomial, assembled from the printed constants.
pub fn beta_poly(curve: &HyperCurve, params: &CorrelatorParams) -> Result<Poly, CurveError> {
    require_quintic(curve)?;
    let p = curve.poly();
    let d = |k| p.nth_derivative(k);
    let th = params.vartheta_poly();
    let c = params.c;
    let zpart = d(1)
        .mul(&d(3))
        .scale(-c * 7.0 / 960.0)
        .add(&d(2).mul(&d(2)).scale(c * 91.0 / 16000.0))
        .add(&d(0).mul(&d(4)).scale(c / 8.0 / 24.0))
        .scale(params.z);
    let tpart = d(0)
        .mul(&th.nth_derivative(2))
        .scale(Complex64::new(1.0 / 20.0, 0.0))
        .add(&d(1).mul(&th.derivative()).scale(Complex64::new(3.0 / 20.0, 0.0)))
        .add(&d(2).mul(&th).scale(Complex64::new(-2.0 / 25.0, 0.0)));
    Ok(zpart.add(&tpart))
}

// beta' as weighted products d(i) d(j) of derivatives of p (times Z) and of p with vartheta
fn beta_prime_terms(c: Complex64) -> ([(usize, usize, Complex64); 3], [(usize, usize, f64); 4]) {
    (
        [(1, 4, c * (1.0 / 192.0 - 7.0 / 960.0)), (2, 3, c * (91.0 / 8000.0 - 7.0 / 960.0)), (0, 5, c / 192.0)],
        [(0, 3, 1.0 / 20.0), (1, 2, 1.0 / 5.0), (2, 1, 3.0 / 20.0 - 2.0 / 25.0), (3, 0, -2.0 / 25.0)],
    )
}

/// k-th derivative of beta (k >= 1) in closed form, by Leibniz on the terms of beta'.
pub fn beta_derivative_closed(curve: &HyperCurve, params: &CorrelatorParams, x: Complex64, k: usize) -> Result<Complex64, CurveError> {
    require_quintic(curve)?;
    if k == 0 {
        return Ok(beta_poly(curve, params)?.eval(x));
    }
    let m = k - 1;
    let d = |i| curve.derivative(x, i);
    let th = params.vartheta_poly();
    let t = |i| th.nth_derivative(i).eval(x);
    let binom = |r: usize| -> f64 { (0..r).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64) };
    let (zterms, tterms) = beta_prime_terms(params.c);
    let mut z = Complex64::zero();
    let mut rest = Complex64::zero();
    for r in 0..=m {
        for (i, j, w) in zterms {
            z += w * d(i + r) * d(j + m - r) * binom(r);
        }
        for (i, j, w) in tterms {
            rest += d(i + r) * t(j + m - r) * (w * binom(r));
        }
    }
    Ok(z * params.z + rest)
}

/// The symmetric polynomial B in the basis {1, e1, e2, e1^2, e1 e2, e2^2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricB {
    pub coeffs: [Complex64; 6],
}

impl SymmetricB {
    /// B with B(x, x) = beta(x) and coefficient b11 on x1 x2.
    pub fn from_diagonal(beta: &Poly, b11: Complex64) -> Self {
        let b = |k| beta.coeff(k);
        SymmetricB { coeffs: [b(0), b(1) / 2.0, b11 * 2.0 - b(2), (b(2) - b11) / 2.0, b(3) / 2.0, b(4)] }
    }

    pub fn eval(&self, x1: Complex64, x2: Complex64) -> Complex64 {
        let (e1, e2) = (x1 + x2, x1 * x2);
        let k = &self.coeffs;
        k[0] + k[1] * e1 + k[2] * e2 + k[3] * e1 * e1 + k[4] * e1 * e2 + k[5] * e2 * e2
    }
}

/// Galois-even part and y1 y2 coefficient of the two-point function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointValue {
    pub even: Complex64,
    pub odd_coeff: Complex64,
}

impl TwoPointValue {
    pub fn total(&self, y1: Complex64, y2: Complex64) -> Complex64 {
        self.even + y1 * y2 * self.odd_coeff
    }
}

/// Prepared data for repeated two-point evaluations on one quintic.
#[derive(Debug, Clone)]
pub struct TwoPointModel {
    p: Poly,
    dp: [Poly; 5],
    th: [Poly; 3],
    b: SymmetricB,
    z: Complex64,
    c: Complex64,
}

impl TwoPointModel {
    pub fn new(curve: &HyperCurve, params: &CorrelatorParams) -> Result<Self, CurveError> {
        require_quintic(curve)?;
        let p = curve.poly().clone();
        let th = params.vartheta_poly();
        let beta = beta_poly(curve, params)?;
        Ok(TwoPointModel {
            dp: [p.derivative(), p.nth_derivative(2), p.nth_derivative(3), p.nth_derivative(4), p.nth_derivative(5)],
            p,
            th: [th.clone(), th.derivative(), th.nth_derivative(2)],
            b: SymmetricB::from_diagonal(&beta, params.b11),
            z: params.z,
            c: params.c,
        })
    }

    pub fn b(&self) -> &SymmetricB {
        &self.b
    }

    /// Even part only; the integrand of the contour checks.
    pub fn even(&self, x1: Complex64, x2: Complex64) -> Complex64 {
        let (p1, p2) = (self.p.eval(x1), self.p.eval(x2));
        let (d1, d2) = (self.dp[0].eval(x1), self.dp[0].eval(x2));
        let (s1, s2) = (self.dp[1].eval(x1), self.dp[1].eval(x2));
        let (t1, t2) = (self.th[0].eval(x1), self.th[0].eval(x2));
        let (c, z) = (self.c, self.z);
        let r = x1 - x2;
        let r2 = r * r;
        c / 4.0 * p1 * p2 / (r2 * r2) * z
            + c / 32.0 * d1 * d2 / r2 * z
            + (p1 * t2 + p2 * t1) * 0.5 / r2
            + (s1 * t2 + s2 * t1) * (7.0 / 50.0)
            + c * (21.0 / 4000.0) * s1 * s2 * z
            + self.b.eval(x1, x2)
    }

    pub fn odd_coeff(&self, x1: Complex64, x2: Complex64) -> Complex64 {
        let (p1, p2) = (self.p.eval(x1), self.p.eval(x2));
        let (t1, t2) = (self.th[0].eval(x1), self.th[0].eval(x2));
        let (u1, u2) = (self.th[2].eval(x1), self.th[2].eval(x2));
        let (q1, q2) = (self.dp[3].eval(x1), self.dp[3].eval(x2));
        let (c, z) = (self.c, self.z);
        let r = x1 - x2;
        let r2 = r * r;
        c / 8.0 * (p1 + p2) / (r2 * r2) * z + (t1 + t2) * 0.5 / r2 - (c / 16.0 * (q1 + q2) / 24.0 * z + (u1 + u2) / 8.0)
    }

    pub fn eval(&self, x1: Complex64, x2: Complex64) -> Result<TwoPointValue, CurveError> {
        if x1 == x2 {
            return Err(CurveError::CoincidentPoints);
        }
        Ok(TwoPointValue { even: self.even(x1, x2), odd_coeff: self.odd_coeff(x1, x2) })
    }
}

/// Two-point function of vartheta on a quintic.
pub fn two_point(curve: &HyperCurve, params: &CorrelatorParams, x1: Complex64, x2: Complex64) -> Result<TwoPointValue, CurveError> {
    TwoPointModel::new(curve, params)?.eval(x1, x2)
}

/// Directed graph on vertices 0..n with in- and out-degree at most one and no self-loops.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct VertexGraph {
    pub n: usize,
    /// edges (from, to), sorted
    pub edges: Vec<(usize, usize)>,
}

impl VertexGraph {
    /// Number of directed cycles.
    pub fn loops(&self) -> usize {
        let mut next = vec![None; self.n];
        for &(a, b) in &self.edges {
            next[a] = Some(b);
        }
        // count each cycle once, at its smallest vertex
        (0..self.n)
            .filter(|&v| {
                let mut w = next[v];
                for _ in 0..self.n {
                    match w {
                        Some(u) if u == v => return true,
                        Some(u) if u < v => return false,
                        Some(u) => w = next[u],
                        None => return false,
                    }
                }
                false
            })
            .count()
    }

    /// Vertices with no incoming edge.
    pub fn sources(&self) -> Vec<usize> {
        (0..self.n).filter(|v| !self.edges.iter().any(|&(_, b)| b == *v)).collect()
    }
}

/// Admissible graphs from partial injections without fixed points.
pub fn admissible_graphs(n: usize) -> Result<Vec<VertexGraph>, CurveError> {
    if n > 4 {
        return Err(CurveError::TooManyVertices(n));
    }
    let mut out = vec![];
    let mut image: Vec<Option<usize>> = vec![None; n];
    fn rec(v: usize, n: usize, image: &mut Vec<Option<usize>>, used: &mut Vec<bool>, out: &mut Vec<VertexGraph>) {
        if v == n {
            let mut edges: Vec<(usize, usize)> = image.iter().enumerate().filter_map(|(a, b)| b.map(|b| (a, b))).collect();
            edges.sort();
            out.push(VertexGraph { n, edges });
            return;
        }
        image[v] = None;
        rec(v + 1, n, image, used, out);
        for w in 0..n {
            if w != v && !used[w] {
                used[w] = true;
                image[v] = Some(w);
                rec(v + 1, n, image, used, out);
                used[w] = false;
                image[v] = None;
            }
        }
    }
    rec(0, n, &mut image, &mut vec![false; n], &mut out);
    out.sort();
    Ok(out)
}

/// Exact monomial of the graph assembly: c^c_power prod f_ij^k <prod_{v in regular} vartheta_v>_r.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraphMonomial {
    pub c_power: usize,
    /// unordered pairs (i < j) with multiplicity
    pub f_factors: Vec<(usize, usize)>,
    pub regular: Vec<usize>,
}

/// Weighted sum over admissible graphs, collected by monomial with exact rational coefficients.
pub fn graph_assembly(n: usize) -> Result<BTreeMap<GraphMonomial, Ratio<i64>>, CurveError> {
    let mut out: BTreeMap<GraphMonomial, Ratio<i64>> = BTreeMap::new();
    for g in admissible_graphs(n)? {
        let loops = g.loops();
        let mut f: Vec<(usize, usize)> = g.edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        f.sort();
        let weight = Ratio::new(1, 2i64.pow(loops as u32)) * Ratio::new(1, 4i64.pow(g.edges.len() as u32));
        let key = GraphMonomial { c_power: loops, f_factors: f, regular: g.sources() };
        *out.entry(key).or_insert_with(|| Ratio::from_integer(0)) += weight;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn curve() -> HyperCurve {
        HyperCurve::new(c(1.3, -0.2), vec![c(0.0, 0.0), c(1.0, 0.2), c(-0.7, 0.5), c(0.3, -0.9), c(-0.4, -0.3)]).unwrap()
    }

    #[test]
    fn root_derivatives() {
        let cv = curve();
        for s in 0..5 {
            let x = cv.roots()[s];
            assert_eq!(cv.p(x), Complex64::zero());
            let prod: Complex64 = cv.roots().iter().enumerate().filter(|(i, _)| *i != s).map(|(_, r)| x - r).product();
            assert!((cv.derivative_at_root(s, 1).unwrap() - prod * cv.a0()).norm() < 1e-13);
            for k in 1..=5 {
                let a = cv.derivative_at_root(s, k).unwrap();
                let b = cv.derivative(x, k);
                assert!((a - b).norm() < 1e-12 * b.norm().max(1.0), "s={s} k={k}");
            }
        }
        assert_eq!(cv.derivative(c(0.3, 0.3), 6), Complex64::zero());
    }

    #[test]
    fn derivatives_against_finite_differences() {
        let cv = curve();
        let x = c(0.2, 0.4);
        let h = 1e-4;
        for k in 1..=3 {
            let f = |t: Complex64| cv.derivative(t, k - 1);
            let fd = (f(x + h) - f(x - h)) / (2.0 * h);
            assert!((fd - cv.derivative(x, k)).norm() < 1e-6 * cv.derivative(x, k).norm());
        }
    }

    #[test]
    fn f_pair_identities() {
        let cv = curve();
        let (x1, x2) = (c(0.5, 0.5), c(-0.2, 0.9));
        let s = cv.roots()[1];
        let f = cv.f_pair(x1, s, Sheet::Plus, Sheet::Plus).unwrap();
        assert!((f - cv.p(x1) / ((x1 - s) * (x1 - s))).norm() < 1e-12);
        let a = cv.f_pair(x1, x2, Sheet::Plus, Sheet::Minus).unwrap();
        let b = cv.f_pair(x2, x1, Sheet::Minus, Sheet::Plus).unwrap();
        assert!((a - b).norm() < 1e-12);
        let (y1, y2) = (cv.y(x1, Sheet::Plus), cv.y(x2, Sheet::Plus));
        let (p1, p2) = (cv.p(x1), cv.p(x2));
        let lhs = (y1 + y2).powi(4);
        let rhs = (y1 + y2).powi(2) * (p1 + p2) * 2.0 - (p1 - p2).powi(2);
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm());
        assert!(cv.f_pair(x1, x1, Sheet::Plus, Sheet::Plus).is_err());
    }

    #[test]
    fn schwarzian_cases() {
        let mob = |x: Complex64| (x * 2.0 + 1.0) / (x - 3.0);
        assert!(schwarzian_numeric(mob, c(0.5, 0.1), 1e-3).unwrap().norm() < 1e-5);
        let cv = curve();
        let x = c(0.1, 0.6);
        let exact = cv.schwarzian(x).unwrap();
        let fd = schwarzian_numeric(|t| cv.p(t), x, 1e-3).unwrap();
        assert!((exact - fd).norm() < 1e-5 * exact.norm().max(1.0));
    }

    #[test]
    fn schwarzian_expansion_order() {
        // (p1-p2)^2/(p1' p2' r^2) - [1 - r^2 (S1+S2)/12] = O(r^4)
        let cv = curve();
        let x = c(0.2, 0.3);
        let mut samples = vec![];
        for h in [1e-1, 5e-2, 2.5e-2] {
            let (x1, x2) = (x + h / 2.0, x - h / 2.0);
            let r = x1 - x2;
            let lhs = (cv.p(x1) - cv.p(x2)).powi(2) / (cv.derivative(x1, 1) * cv.derivative(x2, 1) * r * r);
            let s = cv.schwarzian(x1).unwrap() + cv.schwarzian(x2).unwrap();
            let rhs = Complex64::new(1.0, 0.0) - r * r * s / 12.0;
            samples.push((h, (lhs - rhs).norm()));
        }
        let fit = crate::series::order_fit(&samples).unwrap();
        assert!((fit.slope - 4.0).abs() < 0.3, "{fit:?}");
    }

    #[test]
    fn omega_values() {
        let cv = HyperCurve::new(c(1.0, 0.0), vec![c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        assert!((cv.omega(0, c(1.0, 0.0)).unwrap() - c(-1.5, 0.0)).norm() < 1e-15);
        let ones = vec![c(1.0, 0.0); 3];
        let total: Complex64 = (0..3).map(|s| cv.omega(s, ones[s]).unwrap()).sum();
        assert!(total.norm() < 1e-15);
        assert!(omega_total(&cv, &ones).norm() < 1e-15);
        let q = curve();
        let xi: Vec<Complex64> = (0..5).map(|k| c(k as f64, 1.0 - k as f64)).collect();
        let direct: Complex64 = (0..5).map(|s| q.omega(s, xi[s]).unwrap()).sum();
        assert!((direct - omega_total(&q, &xi)).norm() < 1e-12);
    }

    #[test]
    fn vartheta_law() {
        let cv = curve();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pr = CorrelatorParams::random(&cv, &mut rng, c(C_MINIMAL, 0.0));
        let lead = pr.theta_coeffs[3];
        assert!((lead - (-3.0 * pr.c / 4.0) * cv.a0() * pr.z).norm() < 1e-14);
        let third = pr.vartheta_poly().nth_derivative(3).eval(c(0.0, 0.0));
        let law = -3.0 * pr.c / 80.0 * cv.derivative(c(0.0, 0.0), 5) * pr.z;
        assert!((third - law).norm() < 1e-13);
        assert!(pr.vartheta_poly().coeff(4) == Complex64::zero());
        assert!(CorrelatorParams::new(&cv, pr.z, vec![c(1.0, 0.0); 4], pr.b11, pr.c).is_err());
    }

    #[test]
    fn psi_derivative_at_roots() {
        let cv = curve();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pr = CorrelatorParams::random(&cv, &mut rng, c(C_MINIMAL, 0.0));
        for s in 0..5 {
            let x = cv.roots()[s];
            let h = 1e-4;
            let fd = (psi_value(&cv, &pr, x + h) - psi_value(&cv, &pr, x - h)) / (2.0 * h);
            let cf = psi_prime_at_root(&cv, &pr, s).unwrap();
            assert!((fd - cf).norm() < 1e-7 * cf.norm().max(1.0), "{fd} {cf}");
        }
    }

    #[test]
    fn beta_is_diagonal_of_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let cv = HyperCurve::random_quintic(&mut rng);
            let pr = CorrelatorParams::random(&cv, &mut rng, c(C_MINIMAL, 0.0));
            let beta = beta_poly(&cv, &pr).unwrap();
            // degree 4: the x^5 and x^6 coefficients cancel
            assert!(beta.coeff(5).norm() + beta.coeff(6).norm() < 1e-12 * beta.max_abs());
            let m = TwoPointModel::new(&cv, &pr).unwrap();
            let x = c(0.3, -0.2);
            assert!((m.b().eval(x, x) - beta.eval(x)).norm() < 1e-12 * beta.max_abs());
            let h = 1e-3;
            let bd = |t: Complex64| m.b().eval(t, t);
            let d1 = (bd(x + h) - bd(x - h)) / (2.0 * h);
            let d3 = (bd(x + 2.0 * h) - bd(x + h) * 2.0 + bd(x - h) * 2.0 - bd(x - 2.0 * h)) / (2.0 * h * h * h);
            let b1 = beta_derivative_closed(&cv, &pr, x, 1).unwrap();
            let b3 = beta_derivative_closed(&cv, &pr, x, 3).unwrap();
            assert!((d1 - b1).norm() < 1e-4 * b1.norm().max(1.0));
            assert!((d3 - b3).norm() < 1e-4 * b3.norm().max(1.0));
            for k in 1..=5 {
                let exact = beta.nth_derivative(k).eval(x);
                let closed = beta_derivative_closed(&cv, &pr, x, k).unwrap();
                assert!((exact - closed).norm() < 1e-11 * beta.max_abs(), "k={k}");
            }
        }
    }

    #[test]
    fn two_point_symmetry_and_pole() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cv = HyperCurve::random_quintic(&mut rng);
        let pr = CorrelatorParams::random(&cv, &mut rng, c(C_MINIMAL, 0.0));
        let (x1, x2) = (c(0.4, 0.1), c(-0.3, 0.35));
        let a = two_point(&cv, &pr, x1, x2).unwrap();
        let b = two_point(&cv, &pr, x2, x1).unwrap();
        assert!((a.even - b.even).norm() < 1e-12 * a.even.norm());
        assert!((a.odd_coeff - b.odd_coeff).norm() < 1e-12 * a.odd_coeff.norm());
        let (y1, y2) = (cv.y(x1, Sheet::Plus), cv.y(x2, Sheet::Minus));
        assert!((a.total(y1, y2) - a.total(-y1, -y2)).norm() < 1e-12 * a.total(y1, y2).norm());
        // fourth-order pole coefficient (c/4) p^2 Z, from a contour in x2 around x1
        let m = TwoPointModel::new(&cv, &pr).unwrap();
        let n = 256;
        let rad = 0.05;
        let mut acc = Complex64::zero();
        for k in 0..n {
            let w = Complex64::from_polar(rad, std::f64::consts::TAU * k as f64 / n as f64);
            acc += m.even(x1, x1 + w) * w.powi(4);
        }
        acc /= n as f64;
        let want = pr.c / 4.0 * cv.p(x1).powi(2) * pr.z;
        assert!((acc - want).norm() < 1e-6 * want.norm());
    }

    #[test]
    fn graph_counts_match_brute_force() {
        fn brute(n: usize) -> usize {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect();
            (0u32..1 << pairs.len())
                .filter(|mask| {
                    let es: Vec<_> = pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, e)| *e).collect();
                    (0..n).all(|v| es.iter().filter(|e| e.0 == v).count() <= 1 && es.iter().filter(|e| e.1 == v).count() <= 1)
                })
                .count()
        }
        for (n, fixture) in [(1, 1), (2, 4), (3, 18)] {
            assert_eq!(brute(n), fixture);
            assert_eq!(admissible_graphs(n).unwrap().len(), fixture);
        }
        assert!(admissible_graphs(5).is_err());
    }

    #[test]
    fn two_vertex_assembly() {
        let a = graph_assembly(2).unwrap();
        let mut want = BTreeMap::new();
        want.insert(GraphMonomial { c_power: 1, f_factors: vec![(0, 1), (0, 1)], regular: vec![] }, Ratio::new(1, 32));
        want.insert(GraphMonomial { c_power: 0, f_factors: vec![(0, 1)], regular: vec![0] }, Ratio::new(1, 4));
        want.insert(GraphMonomial { c_power: 0, f_factors: vec![(0, 1)], regular: vec![1] }, Ratio::new(1, 4));
        want.insert(GraphMonomial { c_power: 0, f_factors: vec![], regular: vec![0, 1] }, Ratio::new(1, 1));
        assert_eq!(a, want);
    }

    #[test]
    fn curve_json_round_trip() {
        let cv = curve();
        let s = serde_json::to_string(&cv).unwrap();
        let back: HyperCurve = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cv);
        assert!(serde_json::from_str::<HyperCurve>(r#"{"a0":[1,0],"roots":[[0,0],[0,0],[1,0]]}"#).is_err());
    }
}
