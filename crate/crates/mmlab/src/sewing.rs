//! Genus-two data from sewing two tori.
//!
//! Siegel theta constants are computed both by direct double lattice sums
//! and by the expansion in the off-diagonal period `nu`. All theta work is
//! done in 192-bit arithmetic: the expansion residuals sit near 1e-27 and
//! the ramification-point differences cancel to order nu^2.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hp::{Hc, HpCtx};
use crate::qspecial::{self, ModularPoint, QSpecialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SewingError {
    #[error("Im of {name} must be positive, got {value}")]
    NotInUpperHalfPlane { name: &'static str, value: Complex64 },
    #[error("|nu| = {0} exceeds 0.1, outside the range of the nu-expansion")]
    NuTooLarge(f64),
    #[error("cutoff {0} is below the minimum of 10")]
    CutoffBelowMinimum(i64),
    #[error("cutoff {cutoff} too small: last shell contributes {shell:e}")]
    CutoffTooSmall { cutoff: i64, shell: f64 },
    #[error("theta label {0} is not one of 2, 3, 4")]
    UnsupportedLabel(u8),
    #[error("characteristic entries must be 0 or 1/2 with a.b = 0")]
    BadCharacteristic,
    #[error("expansion order {0} must be even and at most 6")]
    BadOrder(u32),
    #[error("epsilon {0} must be real in (0, 0.2]")]
    EpsOutOfRange(f64),
    #[error("|z| = {abs} lies outside the sewing annulus [{lo}, {hi}]")]
    OutsideAnnulus { abs: f64, lo: f64, hi: f64 },
    #[error("the three marked points of the Moebius map are not distinct")]
    CoincidentPoints,
    #[error(transparent)]
    QSpecial(#[from] QSpecialError),
}

/// Two tori and the off-diagonal period; the diagonal periods are taken equal to tau1, tau2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SewInput {
    tau1: Complex64,
    tau2: Complex64,
    nu: Complex64,
}

impl SewInput {
    pub fn new(tau1: Complex64, tau2: Complex64, nu: Complex64) -> Result<Self, SewingError> {
        for (name, value) in [("tau1", tau1), ("tau2", tau2)] {
            if !(value.im > 0.0) {
                return Err(SewingError::NotInUpperHalfPlane { name, value });
            }
        }
        Ok(SewInput { tau1, tau2, nu })
    }

    pub fn tau1(&self) -> Complex64 {
        self.tau1
    }

    pub fn tau2(&self) -> Complex64 {
        self.tau2
    }

    pub fn nu(&self) -> Complex64 {
        self.nu
    }

    pub fn with_nu(&self, nu: Complex64) -> Self {
        SewInput { nu, ..*self }
    }

    /// Exchanges the two tori.
    pub fn swapped(&self) -> Self {
        SewInput { tau1: self.tau2, tau2: self.tau1, nu: self.nu }
    }
}

/// Genus-one theta constant label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThetaLabel {
    Two,
    Three,
    Four,
}

impl ThetaLabel {
    pub fn from_index(i: u8) -> Result<Self, SewingError> {
        match i {
            2 => Ok(ThetaLabel::Two),
            3 => Ok(ThetaLabel::Three),
            4 => Ok(ThetaLabel::Four),
            _ => Err(SewingError::UnsupportedLabel(i)),
        }
    }

    /// (a, b) numerators over 2.
    fn halves(self) -> (u8, u8) {
        match self {
            ThetaLabel::Two => (1, 0),
            ThetaLabel::Three => (0, 0),
            ThetaLabel::Four => (0, 1),
        }
    }
}

/// Characteristic [a; b] with entries in {0, 1/2}, stored as numerators over 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Characteristic {
    a: [u8; 2],
    b: [u8; 2],
}

impl Characteristic {
    pub fn new(a: [u8; 2], b: [u8; 2]) -> Result<Self, SewingError> {
        if a.iter().chain(b.iter()).any(|&x| x > 1) || a[0] * b[0] + a[1] * b[1] != 0 {
            return Err(SewingError::BadCharacteristic);
        }
        Ok(Characteristic { a, b })
    }

    pub fn from_pair(pair: ThetaPair) -> Self {
        let (a1, b1) = pair.0.halves();
        let (a2, b2) = pair.1.halves();
        Characteristic { a: [a1, a2], b: [b1, b2] }
    }

    pub fn a(&self) -> [u8; 2] {
        self.a
    }

    pub fn b(&self) -> [u8; 2] {
        self.b
    }
}

/// Theta_{i,j}: label i on the first torus, j on the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaPair(pub ThetaLabel, pub ThetaLabel);

impl ThetaPair {
    pub fn new(i: u8, j: u8) -> Result<Self, SewingError> {
        Ok(ThetaPair(ThetaLabel::from_index(i)?, ThetaLabel::from_index(j)?))
    }
}

/// A theta constant with its characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharTheta {
    pub characteristic: Characteristic,
    pub value: Complex64,
}

/// log of 1e-65: terms below this relative size are skipped.
const SKIP_LOG: f64 = -150.0;

fn phase(n: i64, b: u8) -> f64 {
    if b == 1 && n.rem_euclid(2) == 1 {
        -1.0
    } else {
        1.0
    }
}

/// sum_m (pi i m^2)^k exp(pi i m^2 tau) times the b-phase, m = n + a/2.
fn theta_derivative_hp(h: &mut HpCtx, label: ThetaLabel, tau: Complex64, k: u32) -> Hc {
    let (a, b) = label.halves();
    let pi = h.pi();
    let ipi = Hc { re: h.real(0.0), im: pi };
    let tau_h = h.c(tau);
    let mut acc = h.zero();
    let bound = ((-SKIP_LOG + 40.0) / (PI * tau.im)).sqrt().ceil() as i64 + 2;
    for n in -bound..=bound {
        let m = n as f64 + a as f64 / 2.0;
        let m2 = m * m;
        let logmag = -PI * tau.im * m2 + if m2 > 0.0 { k as f64 * (PI * m2).ln() } else { 0.0 };
        if logmag < SKIP_LOG || (k > 0 && m2 == 0.0) {
            continue;
        }
        let arg = h.scale(&h.mul(&ipi, &tau_h), m2);
        let mut term = h.exp(&arg);
        let fac = h.scale(&ipi, m2);
        term = h.mul(&term, &h.powi(&fac, k));
        acc = h.add(&acc, &h.scale(&term, phase(n, b)));
    }
    acc
}

fn siegel_direct_hp(
    h: &mut HpCtx,
    input: &SewInput,
    ch: Characteristic,
    cutoff: i64,
) -> Result<Hc, SewingError> {
    if cutoff < 10 {
        return Err(SewingError::CutoffBelowMinimum(cutoff));
    }
    let pi = h.pi();
    let ipi = Hc { re: h.real(0.0), im: pi };
    let (t1, t2, nu) = (h.c(input.tau1), h.c(input.tau2), h.c(input.nu));
    let mut acc = h.zero();
    let mut shell: f64 = 0.0;
    for n1 in -cutoff..=cutoff {
        for n2 in -cutoff..=cutoff {
            let m1 = n1 as f64 + ch.a[0] as f64 / 2.0;
            let m2 = n2 as f64 + ch.a[1] as f64 / 2.0;
            let logmag = -PI
                * (input.tau1.im * m1 * m1 + input.tau2.im * m2 * m2 + 2.0 * input.nu.im * m1 * m2);
            if n1.abs() == cutoff || n2.abs() == cutoff {
                shell += logmag.exp();
            }
            if logmag < SKIP_LOG {
                continue;
            }
            let quad = h.add(
                &h.add(&h.scale(&t1, m1 * m1), &h.scale(&t2, m2 * m2)),
                &h.scale(&nu, 2.0 * m1 * m2),
            );
            let term = h.exp(&h.mul(&ipi, &quad));
            let sign = phase(n1, ch.b[0]) * phase(n2, ch.b[1]);
            acc = h.add(&acc, &h.scale(&term, sign));
        }
    }
    if shell > 1e-12 {
        return Err(SewingError::CutoffTooSmall { cutoff, shell });
    }
    Ok(acc)
}

fn siegel_expansion_hp(h: &mut HpCtx, input: &SewInput, pair: ThetaPair, order: u32) -> Hc {
    let two_nu = h.c(input.nu * 2.0);
    let mut acc = h.zero();
    let mut fact = 1.0;
    for k in 0..=order / 2 {
        if k > 0 {
            fact *= ((2 * k - 1) * (2 * k)) as f64;
        }
        let a = theta_derivative_hp(h, pair.0, input.tau1, k);
        let b = theta_derivative_hp(h, pair.1, input.tau2, k);
        let w = h.scale(&h.powi(&two_nu, 2 * k), 1.0 / fact);
        acc = h.add(&acc, &h.mul(&w, &h.mul(&a, &b)));
    }
    acc
}

/// theta[a;b](0, Omega) by the double lattice sum over [-cutoff, cutoff]^2.
pub fn siegel_theta_direct(input: &SewInput, ch: Characteristic, cutoff: i64) -> Result<CharTheta, SewingError> {
    let mut h = HpCtx::new();
    let v = siegel_direct_hp(&mut h, input, ch, cutoff)?;
    Ok(CharTheta { characteristic: ch, value: h.to_c64(&v) })
}

/// Theta_{i,j} from the nu-expansion through (2 nu)^order.
pub fn siegel_theta_expansion(input: &SewInput, pair: ThetaPair, order: u32) -> Result<Complex64, SewingError> {
    if order % 2 == 1 || order > 6 {
        return Err(SewingError::BadOrder(order));
    }
    if input.nu.norm() > 0.1 {
        return Err(SewingError::NuTooLarge(input.nu.norm()));
    }
    let mut h = HpCtx::new();
    let v = siegel_expansion_hp(&mut h, input, pair, order);
    Ok(h.to_c64(&v))
}

/// |direct - expansion| for Theta_{i,j} with the difference taken in extended precision.
pub fn theta_mode_residual(input: &SewInput, pair: ThetaPair, order: u32) -> Result<f64, SewingError> {
    if order % 2 == 1 || order > 6 {
        return Err(SewingError::BadOrder(order));
    }
    let mut h = HpCtx::new();
    let d = siegel_direct_hp(&mut h, input, Characteristic::from_pair(pair), DEFAULT_CUTOFF)?;
    let e = siegel_expansion_hp(&mut h, input, pair, order);
    Ok(h.to_c64(&h.sub(&d, &e)).norm())
}

pub const DEFAULT_CUTOFF: i64 = 12;

/// The six pairs entering the ramification points.
pub const RAMIFICATION_PAIRS: [(u8, u8); 6] = [(3, 3), (2, 3), (3, 2), (2, 4), (3, 4), (2, 2)];

/// Finite ramification points after normalizing X0 = 0, X1 = 1, X2 = b0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamificationSet {
    pub x3: Complex64,
    pub x4: Complex64,
    pub x5: Complex64,
    pub b0: Complex64,
    /// nu = 0: X3 = X4 = X5 = b0
    pub degenerate: bool,
}

impl RamificationSet {
    pub fn points(&self) -> [Complex64; 6] {
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), self.b0, self.x3, self.x4, self.x5]
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Direct,
    Expansion,
}

struct HpRamification {
    x3: Hc,
    x4: Hc,
    x5: Hc,
    b0: Hc,
}

fn ramification_hp(h: &mut HpCtx, input: &SewInput, mode: Mode) -> Result<HpRamification, SewingError> {
    let mut th = Vec::with_capacity(6);
    for (i, j) in RAMIFICATION_PAIRS {
        let pair = ThetaPair::new(i, j)?;
        let v = match mode {
            Mode::Direct => siegel_direct_hp(h, input, Characteristic::from_pair(pair), DEFAULT_CUTOFF)?,
            Mode::Expansion => siegel_expansion_hp(h, input, pair, 6),
        };
        th.push(h.sqr(&v));
    }
    let [t33, t23, t32, t24, t34, t22]: [Hc; 6] = th.try_into().expect("six pairs");
    let quot = |h: &HpCtx, a: &Hc, b: &Hc, c: &Hc, d: &Hc| h.div(&h.mul(a, b), &h.mul(c, d));
    let x3 = quot(h, &t33, &t32, &t23, &t22);
    let x4 = quot(h, &t32, &t34, &t22, &t24);
    let x5 = quot(h, &t33, &t34, &t23, &t24);
    let th3 = theta_derivative_hp(h, ThetaLabel::Three, input.tau1, 0);
    let th2 = theta_derivative_hp(h, ThetaLabel::Two, input.tau1, 0);
    let b0 = h.div(&h.powi(&th3, 4), &h.powi(&th2, 4));
    Ok(HpRamification { x3, x4, x5, b0 })
}

fn to_set(h: &HpCtx, r: &HpRamification, nu: Complex64) -> RamificationSet {
    RamificationSet {
        x3: h.to_c64(&r.x3),
        x4: h.to_c64(&r.x4),
        x5: h.to_c64(&r.x5),
        b0: h.to_c64(&r.b0),
        degenerate: nu == Complex64::new(0.0, 0.0),
    }
}

/// Ramification points from direct theta sums.
pub fn ramification_points(input: &SewInput) -> Result<RamificationSet, SewingError> {
    let mut h = HpCtx::new();
    let r = ramification_hp(&mut h, input, Mode::Direct)?;
    Ok(to_set(&h, &r, input.nu))
}

/// Ramification points from the order-6 nu-expansion.
pub fn ramification_points_expansion(input: &SewInput) -> Result<RamificationSet, SewingError> {
    if input.nu.norm() > 0.1 {
        return Err(SewingError::NuTooLarge(input.nu.norm()));
    }
    let mut h = HpCtx::new();
    let r = ramification_hp(&mut h, input, Mode::Expansion)?;
    Ok(to_set(&h, &r, input.nu))
}

/// Largest |X_direct - X_expansion| over X3, X4, X5, differences taken in extended precision.
pub fn mode_agreement(input: &SewInput) -> Result<f64, SewingError> {
    let mut h = HpCtx::new();
    let d = ramification_hp(&mut h, input, Mode::Direct)?;
    let e = ramification_hp(&mut h, input, Mode::Expansion)?;
    Ok([(&d.x3, &e.x3), (&d.x4, &e.x4), (&d.x5, &e.x5)]
        .iter()
        .map(|(a, b)| h.to_c64(&h.sub(a, b)).norm())
        .fold(0.0, f64::max))
}

/// Predicted leading value b0 nu^2 (pi^2/4) theta4^4(tau1) theta2^4(tau2) of X3 - X4.
pub fn x3_minus_x4_leading(input: &SewInput) -> Complex64 {
    let t1 = qspecial::theta_values(point(input.tau1));
    let t2 = qspecial::theta_values(point(input.tau2));
    let b0 = t1.theta3.powi(4) / t1.theta2.powi(4);
    b0 * input.nu * input.nu * (PI * PI / 4.0) * t1.theta4.powi(4) * t2.theta2.powi(4)
}

fn point(tau: Complex64) -> ModularPoint {
    ModularPoint::new(tau).expect("validated by SewInput")
}

/// Deviations of the small-nu claims at one value of nu, each evaluated in extended precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SewingClaims {
    pub nu: f64,
    /// |X_k - b0| for k = 3, 4, 5
    pub x_minus_b0: [f64; 3],
    /// |(X5-X3)/(X4-X3) / (theta3^4/theta2^4)(tau2) - 1|
    pub quotient_dev: f64,
    /// |(X4-X5)/(X3-X5) / (1 - theta2^4/theta3^4)(tau2) - 1|
    pub difference_quotient_dev: f64,
    /// |(X3-X4) / leading prediction - 1|
    pub x3_minus_x4_dev: f64,
    /// (X3-X5)/X5 against (pi^2/4) nu^2 theta3^4(tau2) theta2^4(tau1)
    pub x3x5_printed_dev: f64,
    /// (X3-X5)/X5 against (pi^2/4) nu^2 theta3^4(tau2) theta4^4(tau1)
    pub x3x5_derived_dev: f64,
}

pub fn sewing_claims(input: &SewInput) -> Result<SewingClaims, SewingError> {
    let mut h = HpCtx::new();
    let r = ramification_hp(&mut h, input, Mode::Direct)?;
    let th = |h: &mut HpCtx, l: ThetaLabel, tau| {
        let t = theta_derivative_hp(h, l, tau, 0);
        h.powi(&t, 4)
    };
    let (a2, a3, a4) = (
        th(&mut h, ThetaLabel::Two, input.tau1),
        th(&mut h, ThetaLabel::Three, input.tau1),
        th(&mut h, ThetaLabel::Four, input.tau1),
    );
    let (b2, b3) = (th(&mut h, ThetaLabel::Two, input.tau2), th(&mut h, ThetaLabel::Three, input.tau2));
    let pi = h.pi();
    let pi2_4 = h.scale(&Hc { re: pi.clone(), im: h.real(0.0) }, 1.0);
    let pi2_4 = h.scale(&h.sqr(&pi2_4), 0.25);
    let nu = h.c(input.nu);
    let nu2 = h.sqr(&nu);
    let one = h.one();
    let dev = |h: &HpCtx, x: &Hc, y: &Hc| h.to_c64(&h.sub(&h.div(x, y), &one)).norm();

    let x_minus_b0 = [&r.x3, &r.x4, &r.x5].map(|x| h.to_c64(&h.sub(x, &r.b0)).norm());
    let q = h.div(&h.sub(&r.x5, &r.x3), &h.sub(&r.x4, &r.x3));
    let quotient_dev = dev(&h, &q, &h.div(&b3, &b2));
    let dq = h.div(&h.sub(&r.x4, &r.x5), &h.sub(&r.x3, &r.x5));
    let difference_quotient_dev = dev(&h, &dq, &h.sub(&one, &h.div(&b2, &b3)));
    let lead = h.mul(&h.mul(&r.b0, &nu2), &h.mul(&pi2_4, &h.mul(&a4, &b2)));
    let x3_minus_x4_dev = dev(&h, &h.sub(&r.x3, &r.x4), &lead);
    let rel35 = h.div(&h.sub(&r.x3, &r.x5), &r.x5);
    let pref = h.mul(&pi2_4, &nu2);
    let x3x5_printed_dev = dev(&h, &rel35, &h.mul(&pref, &h.mul(&b3, &a2)));
    let x3x5_derived_dev = dev(&h, &rel35, &h.mul(&pref, &h.mul(&b3, &a4)));
    let _ = a3;
    Ok(SewingClaims {
        nu: input.nu.norm(),
        x_minus_b0,
        quotient_dev,
        difference_quotient_dev,
        x3_minus_x4_dev,
        x3x5_printed_dev,
        x3x5_derived_dev,
    })
}

/// Sewing parameters for the almost-global coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgcInput {
    pub tau1: Complex64,
    pub tau2: Complex64,
    pub eps: f64,
}

impl AgcInput {
    pub fn new(tau1: Complex64, tau2: Complex64, eps: f64) -> Result<Self, SewingError> {
        SewInput::new(tau1, tau2, Complex64::new(0.0, 0.0))?;
        if !(eps > 0.0 && eps <= 0.2) {
            return Err(SewingError::EpsOutOfRange(eps));
        }
        Ok(AgcInput { tau1, tau2, eps })
    }

    pub fn annulus(&self) -> (f64, f64) {
        (0.5 * self.eps.sqrt(), 2.0 * self.eps.sqrt())
    }
}

/// X as a function of the Weierstrass value `wp` on one torus, corrected by the Laurent data of the other.
/// `own` are the Laurent coefficients of this torus, `other` those of the opposite one.
fn corrected(wp: Complex64, eps: f64, own: &[Complex64], other: &[Complex64]) -> Complex64 {
    let e4 = eps.powi(4);
    let e6 = eps.powi(6);
    let den = Complex64::new(1.0, 0.0)
        + other[0] * e4 * (wp * wp - own[0] * 2.0)
        + other[1] * e6 * (wp * wp * wp - own[0] * wp * 5.0 - own[1] * 3.0);
    wp / den
}

struct Laurent {
    first: Vec<Complex64>,
    second: Vec<Complex64>,
}

fn laurent_pair(inp: &AgcInput) -> Result<Laurent, SewingError> {
    Ok(Laurent {
        first: qspecial::weierstrass_laurent(point(inp.tau1), 2)?,
        second: qspecial::weierstrass_laurent(point(inp.tau2), 2)?,
    })
}

/// The pair (X, X-hat) at a point z of the sewing annulus.
pub fn almost_global_coords(inp: &AgcInput, z: Complex64) -> Result<(Complex64, Complex64), SewingError> {
    let (lo, hi) = inp.annulus();
    let abs = z.norm();
    if abs < lo || abs > hi {
        return Err(SewingError::OutsideAnnulus { abs, lo, hi });
    }
    let l = laurent_pair(inp)?;
    let wp = qspecial::weierstrass_p(z, point(inp.tau1))?;
    let wph = qspecial::weierstrass_p(Complex64::new(inp.eps, 0.0) / z, point(inp.tau2))?;
    Ok((corrected(wp, inp.eps, &l.first, &l.second), corrected(wph, inp.eps, &l.second, &l.first)))
}

/// max |eps^2 X X-hat - 1| over eight points on |z| = sqrt(eps).
pub fn agc_residual(inp: &AgcInput) -> Result<f64, SewingError> {
    let r = inp.eps.sqrt();
    let mut worst: f64 = 0.0;
    for k in 0..8 {
        let z = Complex64::from_polar(r, 0.3 + k as f64 * PI / 4.0);
        let (x, xh) = almost_global_coords(inp, z)?;
        worst = worst.max((x * xh * inp.eps * inp.eps - 1.0).norm());
    }
    Ok(worst)
}

/// Moebius map sending p0, p1, p2 to 0, 1, infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moebius {
    p0: Complex64,
    p2: Complex64,
    scale: Complex64,
}

impl Moebius {
    pub fn new(p0: Complex64, p1: Complex64, p2: Complex64) -> Result<Self, SewingError> {
        let tiny = 1e-300;
        if (p0 - p1).norm() < tiny || (p1 - p2).norm() < tiny || (p0 - p2).norm() < tiny {
            return Err(SewingError::CoincidentPoints);
        }
        Ok(Moebius { p0, p2, scale: (p1 - p2) / (p1 - p0) })
    }

    pub fn apply(&self, x: Complex64) -> Complex64 {
        self.scale * (x - self.p0) / (x - self.p2)
    }
}

/// Image of 1/(eps^2 X-hat_k) under the normalizing Moebius map, against its small-eps expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LftReport {
    pub eps: f64,
    /// exact images for k = 0, 1, 2
    pub images: [Complex64; 3],
    /// |image - expansion| for k = 0, 1, 2
    pub deviations: [f64; 3],
    /// X-hat_k, the values at the half periods of the second torus
    pub xhat: [Complex64; 3],
}

pub fn lft_image_check(inp: &AgcInput) -> Result<LftReport, SewingError> {
    if !(1e-3..=0.1).contains(&inp.eps) {
        return Err(SewingError::EpsOutOfRange(inp.eps));
    }
    let l = laurent_pair(inp)?;
    let xi = qspecial::weierstrass_e_values(point(inp.tau1))?.as_array();
    let xih = qspecial::weierstrass_e_values(point(inp.tau2))?.as_array();
    let xs = xi.map(|w| corrected(w, inp.eps, &l.first, &l.second));
    let mobius = Moebius::new(xs[0], xs[1], xs[2])?;
    let t = qspecial::theta_values(point(inp.tau1));
    let ratio = t.theta3.powi(4) / t.theta2.powi(4);
    let q4 = t.theta4.powi(4) / 4.0;
    let e2 = inp.eps * inp.eps;
    let mut images = [Complex64::new(0.0, 0.0); 3];
    let mut deviations = [0.0; 3];
    let mut xhat = [Complex64::new(0.0, 0.0); 3];
    for k in 0..3 {
        let xh = corrected(xih[k], inp.eps, &l.second, &l.first);
        let w = xh * e2;
        let img = mobius.apply(Complex64::new(1.0, 0.0) / w);
        let expansion = ratio * (Complex64::new(1.0, 0.0) - q4 * w - q4 * xi[2] * w * w);
        images[k] = img;
        deviations[k] = (img - expansion).norm();
        xhat[k] = xh;
    }
    Ok(LftReport { eps: inp.eps, images, deviations, xhat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::order_fit;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn base(nu: f64) -> SewInput {
        SewInput::new(c(0.0, 1.5), c(0.0, 1.5), c(nu, 0.0)).unwrap()
    }

    #[test]
    fn factorizes_at_zero_nu() {
        let inp = SewInput::new(c(0.1, 1.3), c(-0.2, 1.6), c(0.0, 0.0)).unwrap();
        let t1 = qspecial::theta_values(point(inp.tau1));
        let t2 = qspecial::theta_values(point(inp.tau2));
        let th = |l: ThetaLabel, t: &qspecial::ThetaValues| match l {
            ThetaLabel::Two => t.theta2,
            ThetaLabel::Three => t.theta3,
            ThetaLabel::Four => t.theta4,
        };
        for (i, j) in RAMIFICATION_PAIRS {
            let pair = ThetaPair::new(i, j).unwrap();
            let want = th(pair.0, &t1) * th(pair.1, &t2);
            let d = siegel_theta_direct(&inp, Characteristic::from_pair(pair), 12).unwrap().value;
            let e = siegel_theta_expansion(&inp, pair, 6).unwrap();
            assert!((d - want).norm() < 1e-13, "{i}{j}");
            assert!((e - want).norm() < 1e-13, "{i}{j}");
        }
    }

    #[test]
    fn nu_squared_coefficient() {
        let inp = base(5e-2);
        let pair = ThetaPair::new(3, 3).unwrap();
        let t = qspecial::theta_values(point(inp.tau1));
        // d/dtau = 2 pi i q d/dq
        let dl = t.dtheta3 / t.theta3 * c(0.0, 2.0 * PI);
        let e2 = siegel_theta_expansion(&inp, pair, 2).unwrap();
        let e0 = siegel_theta_expansion(&inp, pair, 0).unwrap();
        let coeff = (e2 / e0 - 1.0) / (inp.nu * inp.nu);
        assert!((coeff - dl * dl * 2.0).norm() < 1e-9 * coeff.norm());
    }

    #[test]
    fn direct_and_expansion_agree_to_eighth_order() {
        let pair = ThetaPair::new(2, 4).unwrap();
        let samples: Vec<(f64, f64)> = [1e-2, 3e-3, 1e-3]
            .iter()
            .map(|&nu| (nu, theta_mode_residual(&base(nu), pair, 6).unwrap()))
            .collect();
        assert!(order_fit(&samples).unwrap().slope >= 7.0, "{samples:?}");
    }

    #[test]
    fn cutoff_guards() {
        let inp = base(1e-3);
        let ch = Characteristic::new([0, 0], [0, 0]).unwrap();
        assert_eq!(siegel_theta_direct(&inp, ch, 5).unwrap_err(), SewingError::CutoffBelowMinimum(5));
        let slow = SewInput::new(c(0.0, 0.02), c(0.0, 0.02), c(0.0, 0.0)).unwrap();
        assert!(matches!(siegel_theta_direct(&slow, ch, 10), Err(SewingError::CutoffTooSmall { .. })));
        assert!(Characteristic::new([1, 0], [1, 0]).is_err());
        assert!(ThetaPair::new(1, 3).is_err());
    }

    #[test]
    fn swap_symmetry() {
        let inp = SewInput::new(c(0.1, 1.2), c(0.0, 1.7), c(2e-3, 1e-3)).unwrap();
        for (i, j) in RAMIFICATION_PAIRS {
            let a = siegel_theta_direct(&inp, Characteristic::from_pair(ThetaPair::new(i, j).unwrap()), 12).unwrap();
            let b = siegel_theta_direct(&inp.swapped(), Characteristic::from_pair(ThetaPair::new(j, i).unwrap()), 12)
                .unwrap();
            assert!((a.value - b.value).norm() < 1e-14);
        }
    }

    #[test]
    fn degenerate_limit() {
        let r = ramification_points(&base(0.0)).unwrap();
        assert!(r.degenerate);
        for x in [r.x3, r.x4, r.x5] {
            assert!((x - r.b0).norm() < 1e-12 * r.b0.norm());
        }
        let r = ramification_points(&base(1e-3)).unwrap();
        assert!(!r.degenerate);
        assert!((r.x3 - r.x4).norm() > 0.0 && (r.x3 - r.x5).norm() > 0.0 && (r.x4 - r.x5).norm() > 0.0);
    }

    #[test]
    fn modes_agree() {
        assert!(mode_agreement(&base(1e-3)).unwrap() < 1e-10);
    }

    #[test]
    fn agc_reduces_to_weierstrass() {
        let inp = AgcInput::new(c(0.0, 1.5), c(0.0, 1.5), 1e-6).unwrap();
        let z = c(1e-3, 0.0);
        let (x, _) = almost_global_coords(&inp, z).unwrap();
        let wp = qspecial::weierstrass_p(z, point(inp.tau1)).unwrap();
        // the eps^4 wp^2 correction is ~1e-15 here
        assert!((x / wp - 1.0).norm() < 1e-12);
        assert!(almost_global_coords(&inp, c(1.0, 0.0)).is_err());
        assert!(AgcInput::new(c(0.0, 1.5), c(0.0, 1.5), 0.3).is_err());
    }

    #[test]
    fn moebius_fixes_marked_points() {
        let m = Moebius::new(c(0.3, 0.1), c(-1.0, 2.0), c(4.0, -1.0)).unwrap();
        assert!(m.apply(c(0.3, 0.1)).norm() < 1e-15);
        assert!((m.apply(c(-1.0, 2.0)) - 1.0).norm() < 1e-15);
        assert!(Moebius::new(c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)).is_err());
    }

    #[test]
    fn lft_eps2_coefficient() {
        let inp = AgcInput::new(c(0.0, 1.5), c(0.1, 1.4), 1e-3).unwrap();
        let r = lft_image_check(&inp).unwrap();
        let t = qspecial::theta_values(point(inp.tau1));
        let ratio = t.theta3.powi(4) / t.theta2.powi(4);
        for k in 0..3 {
            let coeff = (r.images[k] - ratio) / (inp.eps * inp.eps);
            let want = -ratio * t.theta4.powi(4) / 4.0 * r.xhat[k];
            assert!((coeff / want - 1.0).norm() < 1e-4);
        }
    }
}
