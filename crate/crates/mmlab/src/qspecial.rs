//! Modular and elliptic special functions as q-series and as numbers.
//!
//! Series constructors take an `order` N and return results exact through
//! q^N (truncation order N+1). Numeric evaluators work at a [`ModularPoint`]
//! and sum until the newest term is negligible against the partial sum.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{Exponent, SeriesError, TruncatedSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QSpecialError {
    #[error("tau must lie in the upper half plane, got {0}")]
    NotInUpperHalfPlane(Complex64),
    #[error("Im tau = {0} is below the convergence guard {1}")]
    ConvergenceGuard(f64, f64),
    #[error("Eisenstein weight {0} is not supported (use 2, 4 or 6)")]
    UnsupportedWeight(u32),
    #[error("order must be at least {min}, got {got}")]
    OrderTooSmall { min: usize, got: usize },
    #[error("z = {0} is outside the strip where the Fourier form of the Weierstrass function converges")]
    OutsideStrip(Complex64),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Minimum Im tau for numeric evaluation of half-period data.
pub const TAU_GUARD: f64 = 0.8;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn int(n: i64) -> Exponent {
    Exponent::from_integer(n)
}

/// A point tau in the upper half plane together with q = exp(2 pi i tau).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularPoint {
    tau: Complex64,
}

impl ModularPoint {
    pub fn new(tau: Complex64) -> Result<Self, QSpecialError> {
        if !(tau.im > 0.0) {
            return Err(QSpecialError::NotInUpperHalfPlane(tau));
        }
        Ok(ModularPoint { tau })
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    pub fn q(&self) -> Complex64 {
        self.q_pow(1.0)
    }

    /// q^r = exp(2 pi i tau r).
    pub fn q_pow(&self, r: f64) -> Complex64 {
        (Complex64::i() * 2.0 * PI * self.tau * r).exp()
    }

    fn guarded(&self) -> Result<(), QSpecialError> {
        if self.tau.im < TAU_GUARD {
            Err(QSpecialError::ConvergenceGuard(self.tau.im, TAU_GUARD))
        } else {
            Ok(())
        }
    }
}

/// Sums `term(n)` for n = start, start+1, ... until two consecutive terms are negligible.
fn adaptive_sum(start: i64, term: impl Fn(i64) -> Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut small = 0;
    for n in start..start + 100_000 {
        let t = term(n);
        acc += t;
        if t.norm() <= 1e-16 * acc.norm().max(1e-300) {
            small += 1;
            if small >= 2 {
                break;
            }
        } else {
            small = 0;
        }
    }
    acc
}

/// (q)_n = (1-q)(1-q^2)...(1-q^n), exact through q^order.
pub fn pochhammer_finite(n: usize, order: usize) -> TruncatedSeries {
    let trunc = int(order as i64 + 1);
    let mut acc = TruncatedSeries::one(trunc);
    for k in 1..=n.min(order) {
        let factor = TruncatedSeries::from_real(1, 0, &one_minus_qk(k), trunc).expect("valid factor");
        acc = &acc * &factor;
    }
    acc
}

fn one_minus_qk(k: usize) -> Vec<f64> {
    let mut v = vec![0.0; k + 1];
    v[0] = 1.0;
    v[k] = -1.0;
    v
}

/// (q)_infinity exact through q^order.
pub fn pochhammer(order: usize) -> Result<TruncatedSeries, QSpecialError> {
    if order < 1 {
        return Err(QSpecialError::OrderTooSmall { min: 1, got: order });
    }
    Ok(pochhammer_finite(order, order))
}

/// eta = q^(1/24) (q)_infinity on the 1/24 grid.
pub fn eta(order: usize) -> Result<TruncatedSeries, QSpecialError> {
    Ok(pochhammer(order)?.shift(Exponent::new(1, 24)))
}

/// The three theta constants, each exact through q^order.
#[derive(Debug, Clone)]
pub struct ThetaConstants {
    pub theta2: TruncatedSeries,
    pub theta3: TruncatedSeries,
    pub theta4: TruncatedSeries,
}

pub fn theta_constants(order: usize) -> Result<ThetaConstants, QSpecialError> {
    if order < 1 {
        return Err(QSpecialError::OrderTooSmall { min: 1, got: order });
    }
    let trunc = int(order as i64 + 1);
    // theta3, theta4 on the 1/2 grid: q^(n^2/2)
    let top = 2 * (order + 1);
    let mut t3 = vec![0.0; top];
    let mut t4 = vec![0.0; top];
    t3[0] = 1.0;
    t4[0] = 1.0;
    let mut n = 1usize;
    while n * n < top {
        t3[n * n] += 2.0;
        t4[n * n] += if n % 2 == 0 { 2.0 } else { -2.0 };
        n += 1;
    }
    // theta2 on the 1/8 grid: 2 q^((2n+1)^2/8)
    let top8 = 8 * (order + 1);
    let mut t2 = vec![0.0; top8];
    let mut m = 0usize;
    while (2 * m + 1) * (2 * m + 1) < top8 {
        t2[(2 * m + 1) * (2 * m + 1)] += 2.0;
        m += 1;
    }
    Ok(ThetaConstants {
        theta2: TruncatedSeries::from_real(8, 0, &t2, trunc)?,
        theta3: TruncatedSeries::from_real(2, 0, &t3, trunc)?,
        theta4: TruncatedSeries::from_real(2, 0, &t4, trunc)?,
    })
}

fn sigma(k: u32, n: u64) -> f64 {
    (1..=n).filter(|d| n % d == 0).map(|d| (d as f64).powi(k as i32)).sum()
}

fn eisenstein_prefactor(k: u32) -> Result<f64, QSpecialError> {
    // -2k / B_k
    match k {
        2 => Ok(-24.0),
        4 => Ok(240.0),
        6 => Ok(-504.0),
        _ => Err(QSpecialError::UnsupportedWeight(k)),
    }
}

fn zeta_even(k: u32) -> Result<f64, QSpecialError> {
    match k {
        2 => Ok(PI.powi(2) / 6.0),
        4 => Ok(PI.powi(4) / 90.0),
        6 => Ok(PI.powi(6) / 945.0),
        _ => Err(QSpecialError::UnsupportedWeight(k)),
    }
}

/// Normalized E_k = 1 + (-2k/B_k) sum sigma_{k-1}(n) q^n.
pub fn eisenstein(k: u32, order: usize) -> Result<TruncatedSeries, QSpecialError> {
    let pre = eisenstein_prefactor(k)?;
    let mut v = vec![0.0; order + 1];
    v[0] = 1.0;
    for (n, slot) in v.iter_mut().enumerate().skip(1) {
        *slot = pre * sigma(k - 1, n as u64);
    }
    Ok(TruncatedSeries::from_real(1, 0, &v, int(order as i64 + 1))?)
}

/// G_k = zeta(k) E_k.
pub fn eisenstein_g(k: u32, order: usize) -> Result<TruncatedSeries, QSpecialError> {
    Ok(eisenstein(k, order)?.scale(c(zeta_even(k)?)))
}

/// Serre derivative q f' - (weight/12) E2 f.
pub fn serre_derivative(f: &TruncatedSeries, weight: f64) -> TruncatedSeries {
    let order = f.truncation_order().ceil().to_integer().max(1) as usize;
    let e2 = eisenstein(2, order).expect("weight 2 supported");
    &f.q_derivative() - &(&e2 * f).scale(c(weight / 12.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Character {
    H0,
    G0,
}

impl Character {
    /// Leading exponent of the normalized character.
    pub fn lead(self) -> Exponent {
        match self {
            Character::H0 => Exponent::new(11, 60),
            Character::G0 => Exponent::new(-1, 60),
        }
    }

    fn sum_offset(self) -> usize {
        match self {
            Character::H0 => 1,
            Character::G0 => 0,
        }
    }

    /// Residues n mod 5 appearing in the product form.
    fn residues(self) -> [usize; 2] {
        match self {
            Character::H0 => [2, 3],
            Character::G0 => [1, 4],
        }
    }
}

/// A Rogers-Ramanujan character on the 1/60 grid.
#[derive(Debug, Clone)]
pub struct CharacterSeries {
    pub variant: Character,
    pub series: TruncatedSeries,
}

/// Sum form q^lead sum q^(n^2 + a n)/(q)_n, exact through q^(lead + order).
pub fn rogers_ramanujan(variant: Character, order: usize) -> Result<CharacterSeries, QSpecialError> {
    if order < 1 {
        return Err(QSpecialError::OrderTooSmall { min: 1, got: order });
    }
    let trunc = int(order as i64 + 1);
    let a = variant.sum_offset();
    let mut acc = TruncatedSeries::zero(1, trunc);
    let mut n = 0usize;
    while n * n + a * n <= order {
        let den = pochhammer_finite(n, order).recip()?;
        let term = den.shift(int((n * n + a * n) as i64)).truncate(trunc);
        acc = &acc + &term;
        n += 1;
    }
    Ok(CharacterSeries { variant, series: acc.shift(variant.lead()) })
}

/// Product form q^lead prod_{n = +-r mod 5} (1 - q^n)^(-1).
pub fn rogers_ramanujan_product(variant: Character, order: usize) -> Result<CharacterSeries, QSpecialError> {
    let trunc = int(order as i64 + 1);
    let mut acc = TruncatedSeries::one(trunc);
    for n in 1..=order {
        if variant.residues().contains(&(n % 5)) {
            let f = TruncatedSeries::from_real(1, 0, &one_minus_qk(n), trunc)?;
            acc = &acc * &f.recip()?;
        }
    }
    Ok(CharacterSeries { variant, series: acc.shift(variant.lead()) })
}

/// D_2(D_0 f) - (11/3600) E4 f.
pub fn character_ode_residual(f: &TruncatedSeries) -> TruncatedSeries {
    let order = f.truncation_order().ceil().to_integer().max(1) as usize;
    let e4 = eisenstein(4, order).expect("weight 4 supported");
    let lhs = serre_derivative(&serre_derivative(f, 0.0), 2.0);
    &lhs - &(&e4 * f).scale(c(11.0 / 3600.0))
}

/// theta2^4/theta3^4 minus the four-term expansion 16 q^(1/2)(1 - 8 q^(1/2) + 44 q - 64 q^(3/2)).
pub fn b0_expansion_residual(order: usize) -> Result<TruncatedSeries, QSpecialError> {
    let th = theta_constants(order.max(2))?;
    let ratio = th.theta2.powi(4)?.div(&th.theta3.powi(4)?)?;
    let printed = TruncatedSeries::from_real(2, 1, &[16.0, -128.0, 704.0, -1024.0], int(order as i64 + 1))?;
    Ok(&ratio - &printed)
}

/// Theta constants and their q-derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaValues {
    pub theta2: Complex64,
    pub theta3: Complex64,
    pub theta4: Complex64,
    /// q d/dq of each theta constant
    pub dtheta2: Complex64,
    pub dtheta3: Complex64,
    pub dtheta4: Complex64,
}

pub fn theta_values(point: ModularPoint) -> ThetaValues {
    let tau = point.tau();
    let e = |x: f64| (Complex64::i() * PI * tau * x).exp();
    // theta3 = sum_n q^(n^2/2), theta2 = sum_n q^((n+1/2)^2/2)
    let t3 = c(1.0) + adaptive_sum(1, |n| e((n * n) as f64) * 2.0);
    let t4 = c(1.0) + adaptive_sum(1, |n| e((n * n) as f64) * if n % 2 == 0 { 2.0 } else { -2.0 });
    let t2 = adaptive_sum(0, |n| e((n as f64 + 0.5).powi(2)) * 2.0);
    let d3 = adaptive_sum(1, |n| e((n * n) as f64) * (n * n) as f64);
    let d4 = adaptive_sum(1, |n| e((n * n) as f64) * (n * n) as f64 * if n % 2 == 0 { 1.0 } else { -1.0 });
    let d2 = adaptive_sum(0, |n| e((n as f64 + 0.5).powi(2)) * (n as f64 + 0.5).powi(2));
    ThetaValues { theta2: t2, theta3: t3, theta4: t4, dtheta2: d2, dtheta3: d3, dtheta4: d4 }
}

/// E_k(tau) by its Lambert series.
pub fn eisenstein_value(k: u32, point: ModularPoint) -> Result<Complex64, QSpecialError> {
    let pre = eisenstein_prefactor(k)?;
    let q = point.q();
    let s = adaptive_sum(1, |n| {
        let qn = q.powi(n as i32);
        qn * (n as f64).powi(k as i32 - 1) / (c(1.0) - qn)
    });
    Ok(c(1.0) + s * pre)
}

/// The three half-period values of the Weierstrass function on the lattice 2 pi i (Z + tau Z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPeriods {
    pub xi0: Complex64,
    pub xi1: Complex64,
    pub xi2: Complex64,
}

impl HalfPeriods {
    pub fn as_array(&self) -> [Complex64; 3] {
        [self.xi0, self.xi1, self.xi2]
    }
}

pub fn weierstrass_e_values(point: ModularPoint) -> Result<HalfPeriods, QSpecialError> {
    point.guarded()?;
    let t = theta_values(point);
    let (a, b, d) = (t.theta2.powi(4), t.theta3.powi(4), t.theta4.powi(4));
    Ok(HalfPeriods { xi0: (d - a) / 12.0, xi1: (a + b) / 12.0, xi2: -(b + d) / 12.0 })
}

/// -2 D_{1/2} theta_k / theta_k for k = 3, 4, 2, which should reproduce (xi0, xi1, xi2).
pub fn serre_e_values(point: ModularPoint) -> Result<HalfPeriods, QSpecialError> {
    point.guarded()?;
    let t = theta_values(point);
    let e2 = eisenstein_value(2, point)?;
    let log_serre = |th: Complex64, dth: Complex64| -(dth / th - e2 / 24.0) * 2.0;
    Ok(HalfPeriods {
        xi0: log_serre(t.theta3, t.dtheta3),
        xi1: log_serre(t.theta4, t.dtheta4),
        xi2: log_serre(t.theta2, t.dtheta2),
    })
}

/// Weierstrass invariants on the lattice 2 pi i (Z + tau Z): g2 = E4/12, g3 = -E6/216.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeierstrassData {
    pub g2: Complex64,
    pub g3: Complex64,
}

pub fn weierstrass_invariants(point: ModularPoint) -> Result<WeierstrassData, QSpecialError> {
    Ok(WeierstrassData {
        g2: eisenstein_value(4, point)? / 12.0,
        g3: -eisenstein_value(6, point)? / 216.0,
    })
}

/// Residuals of the cubic for each half-period value, in two normalizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicResiduals {
    /// xi^3 - 30 G4 xi - 70 G6, G_k = zeta(k) E_k taken literally
    pub literal: [f64; 3],
    /// the same cubic with G4, G6 rescaled by (2 pi i)^-4, (2 pi i)^-6
    pub rescaled: [f64; 3],
}

pub fn cubic_residuals(point: ModularPoint) -> Result<CubicResiduals, QSpecialError> {
    let xs = weierstrass_e_values(point)?.as_array();
    let g4 = eisenstein_value(4, point)? * zeta_even(4)?;
    let g6 = eisenstein_value(6, point)? * zeta_even(6)?;
    let tpi = Complex64::new(0.0, 2.0 * PI);
    let cubic = |x: Complex64, a: Complex64, b: Complex64| (x * x * x - a * 30.0 * x - b * 70.0).norm();
    let mut literal = [0.0; 3];
    let mut rescaled = [0.0; 3];
    for (k, x) in xs.iter().enumerate() {
        literal[k] = cubic(*x, g4, g6);
        rescaled[k] = cubic(*x, g4 / tpi.powi(4), g6 / tpi.powi(6));
    }
    Ok(CubicResiduals { literal, rescaled })
}

/// Weierstrass function on the lattice 2 pi i (Z + tau Z) by its Fourier expansion in x = e^z.
pub fn weierstrass_p(z: Complex64, point: ModularPoint) -> Result<Complex64, QSpecialError> {
    let tau = point.tau();
    if z.re.abs() >= 2.0 * PI * tau.im * 0.9 {
        return Err(QSpecialError::OutsideStrip(z));
    }
    let q = point.q();
    let x = z.exp();
    let one = c(1.0);
    let head = x / (one - x).powi(2);
    let konst = adaptive_sum(1, |n| {
        let qn = q.powi(n as i32);
        qn / (one - qn).powi(2)
    });
    let tail = adaptive_sum(1, |n| {
        let qn = q.powi(n as i32);
        qn * x / (one - qn * x).powi(2) + qn / x / (one - qn / x).powi(2)
    });
    Ok(c(1.0 / 12.0) - konst * 2.0 + head + tail)
}

/// Laurent data of the Weierstrass function: coefficients c_1..c_kmax of z^(2k).
pub fn weierstrass_laurent(point: ModularPoint, kmax: usize) -> Result<Vec<Complex64>, QSpecialError> {
    let w = weierstrass_invariants(point)?;
    let mut cs = vec![Complex64::new(0.0, 0.0); kmax + 1];
    if kmax >= 1 {
        cs[1] = w.g2 / 20.0;
    }
    if kmax >= 2 {
        cs[2] = w.g3 / 28.0;
    }
    for k in 3..=kmax {
        let mut s = Complex64::new(0.0, 0.0);
        for m in 1..=k - 2 {
            s += cs[m] * cs[k - 1 - m];
        }
        cs[k] = s * 3.0 / (((2 * k + 3) * (k - 2)) as f64);
    }
    cs.remove(0);
    Ok(cs)
}
