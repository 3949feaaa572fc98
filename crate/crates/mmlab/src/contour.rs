//! Trapezoid-rule contour integrals around ramification points, the Laurent-coefficient
//! integrals of the two-point model, the auxiliary coefficient B~_s and the metric integrals.

use std::f64::consts::{PI, TAU};

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::curve::{CorrelatorParams, CurveError, HyperCurve, TwoPointModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContourError {
    #[error("contour needs at least 64 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("radius {radius} must be positive and below {limit}")]
    BadRadius { radius: f64, limit: f64 },
    #[error("rho0^2 = {0} exceeds 0.01")]
    RhoTooLarge(f64),
    #[error("closed form only known for k in {{0, 1, 3}}, got {0}")]
    NoClosedForm(i32),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

pub const DEFAULT_NODES: usize = 512;
/// Largest change allowed when the node count is doubled.
pub const DOUBLING_GATE: f64 = 1e-11;

/// Circle |x - center| = radius sampled at `nodes` equally spaced angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourSpec {
    center: Complex64,
    radius: f64,
    nodes: usize,
}

impl ContourSpec {
    /// Checks the radius against the marked points the circle must avoid.
    pub fn new(center: Complex64, radius: f64, nodes: usize, avoid: &[Complex64]) -> Result<Self, ContourError> {
        if nodes < 64 {
            return Err(ContourError::TooFewNodes(nodes));
        }
        let limit = avoid
            .iter()
            .map(|p| (p - center).norm())
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min)
            / 2.0;
        if !(radius > 0.0 && radius < limit) {
            return Err(ContourError::BadRadius { radius, limit });
        }
        Ok(ContourSpec { center, radius, nodes })
    }

    /// Default circle around X_s: a quarter of the distance to the nearest other root.
    pub fn around_root(curve: &HyperCurve, s: usize) -> Result<Self, ContourError> {
        let xs = curve.root(s)?;
        let dmin = curve
            .roots()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != s)
            .map(|(_, r)| (r - xs).norm())
            .fold(f64::INFINITY, f64::min);
        ContourSpec::new(xs, 0.25 * dmin, DEFAULT_NODES, curve.roots())
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn doubled(&self) -> Self {
        ContourSpec { nodes: self.nodes * 2, ..*self }
    }
}

/// oint f(x) / (x - center)^(k+1) dx / 2 pi i by the trapezoid rule.
pub fn cauchy_coefficient(f: impl Fn(Complex64) -> Complex64, spec: &ContourSpec, k: i32) -> Complex64 {
    let n = spec.nodes;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let w = Complex64::from_polar(spec.radius, TAU * j as f64 / n as f64);
        acc += f(spec.center + w) * w.powi(-k);
    }
    acc / n as f64
}

/// A quadrature value together with its change under node doubling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gated {
    #[serde(serialize_with = "ser_c")]
    pub value: Complex64,
    pub doubling_delta: f64,
}

impl Gated {
    pub fn passes_gate(&self) -> bool {
        self.doubling_delta < DOUBLING_GATE
    }
}

pub fn cauchy_gated(f: impl Fn(Complex64) -> Complex64, spec: &ContourSpec, k: i32) -> Gated {
    let value = cauchy_coefficient(&f, spec, k);
    let fine = cauchy_coefficient(&f, &spec.doubled(), k);
    Gated { value: fine, doubling_delta: (fine - value).norm() }
}

pub(crate) fn ser_c<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// Laurent coefficient Theta_k of <vartheta> at X_s.
pub fn theta_laurent(curve: &HyperCurve, params: &CorrelatorParams, s: usize, k: i32) -> Result<Complex64, ContourError> {
    let spec = ContourSpec::around_root(curve, s)?;
    let th = params.vartheta_poly();
    Ok(cauchy_coefficient(|x| th.eval(x), &spec, k))
}

/// Numeric against closed form for one Laurent integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KIntegral {
    pub k: i32,
    #[serde(serialize_with = "ser_c")]
    pub numeric: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub closed_form: Complex64,
    pub rel_err: f64,
}

/// Local data at X_s used by all closed forms.
struct RootData {
    d: Vec<Complex64>,
    th: [Complex64; 4],
    z: Complex64,
    c: Complex64,
}

impl RootData {
    fn new(curve: &HyperCurve, params: &CorrelatorParams, s: usize) -> Result<Self, ContourError> {
        let d = curve.root_jet(s)?;
        let x = curve.root(s)?;
        let poly = params.vartheta_poly();
        let th = [0, 1, 2, 3].map(|k| poly.nth_derivative(k).eval(x));
        Ok(RootData { d, th, z: params.z, c: params.c })
    }
}

/// (2/p') oint <vartheta_{X_s} vartheta_x> / (x - X_s)^(k+1) dx / 2 pi i, Galois-even part.
pub fn k_integral_numeric(curve: &HyperCurve, params: &CorrelatorParams, s: usize, k: i32) -> Result<Gated, ContourError> {
    let model = TwoPointModel::new(curve, params)?;
    let spec = ContourSpec::around_root(curve, s)?;
    let xs = curve.root(s)?;
    let p1 = curve.derivative_at_root(s, 1)?;
    let g = cauchy_gated(|x| model.even(xs, x), &spec, k);
    Ok(Gated { value: g.value * 2.0 / p1, doubling_delta: g.doubling_delta * 2.0 / p1.norm() })
}

/// Closed forms of the k = 0, 1, 3 integrals.
pub fn k_integral_closed(curve: &HyperCurve, params: &CorrelatorParams, s: usize, k: i32) -> Result<Complex64, ContourError> {
    let RootData { d, th, z, c } = RootData::new(curve, params, s)?;
    let p1 = d[1];
    match k {
        0 => Ok(c / 20.0 * (d[3] / 3.0 + d[2] * d[2] / p1 * (7.0 / 16.0)) * z + d[2] / p1 * th[0] * 0.9 + th[1] * 0.3),
        1 => Ok(c / 120.0 * (d[2] * d[3] / p1 * 1.75 + d[4]) * z
            + d[3] / p1 * th[0] * (11.0 / 30.0)
            + d[2] / p1 * th[1] * 0.35
            + th[2] * 0.2),
        3 => Ok(d[5] / p1 * th[0] * (11.0 / 200.0)),
        other => Err(ContourError::NoClosedForm(other)),
    }
}

pub fn verify_k_integrals(curve: &HyperCurve, params: &CorrelatorParams, s: usize) -> Result<Vec<KIntegral>, ContourError> {
    [0, 1, 3]
        .into_iter()
        .map(|k| {
            let numeric = k_integral_numeric(curve, params, s, k)?.value;
            let closed_form = k_integral_closed(curve, params, s, k)?;
            let rel_err = (numeric - closed_form).norm() / closed_form.norm().max(f64::MIN_POSITIVE);
            Ok(KIntegral { k, numeric, closed_form, rel_err })
        })
        .collect()
}

/// B~_s and the two closed-form displays of (2/p') B~_s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BtildeReport {
    pub numeric: Gated,
    /// (2/p') B~_s from the quadrature
    #[serde(serialize_with = "ser_c")]
    pub scaled: Complex64,
    /// display with the printed constants
    #[serde(serialize_with = "ser_c")]
    pub printed_display: Complex64,
    /// display re-derived from the expansion of f_{x X_s}
    #[serde(serialize_with = "ser_c")]
    pub derived_display: Complex64,
    /// d^2/dx^2 of the regular part at X_s
    #[serde(serialize_with = "ser_c")]
    pub regular_second: Complex64,
}

/// B~_s = oint <vartheta_x vartheta_{X_s}> / (x - X_s)^3 dx / 2 pi i.
pub fn btilde(curve: &HyperCurve, params: &CorrelatorParams, s: usize) -> Result<BtildeReport, ContourError> {
    let model = TwoPointModel::new(curve, params)?;
    let spec = ContourSpec::around_root(curve, s)?;
    let xs = curve.root(s)?;
    let numeric = cauchy_gated(|x| model.even(xs, x), &spec, 2);
    let RootData { d, th, z, c } = RootData::new(curve, params, s)?;
    let p1 = d[1];
    // regular part: subtract the f^2 and f (vartheta + vartheta) terms of the graph expansion
    let regular = |x: Complex64| {
        let f = curve.p(x) / ((x - xs) * (x - xs));
        model.even(xs, x) - c / 32.0 * f * f * z - f * (th[0] + params.vartheta_poly().eval(x)) / 4.0
    };
    let regular_second = cauchy_coefficient(regular, &spec, 2) * 2.0;
    let printed_display = c / 192.0 * (d[3] * d[3] / p1 / 3.0 + d[2] * d[4] / p1 / 2.0 + d[5] / 60.0) * z
        + (d[4] / p1 * th[0] / 24.0 + (d[3] / p1 * 3.0 + d[2] * d[2] / (p1 * p1)) * th[1] / 20.0 + d[2] / p1 * th[2] * (3.0 / 40.0) + th[3] / 60.0)
        + regular_second / p1;
    let derived_display = c / 192.0 * (d[3] * d[3] / p1 / 3.0 + d[2] * d[4] / p1 / 2.0 + d[5] / 5.0) * z
        + (d[4] / p1 * th[0] / 24.0 + d[3] / p1 * th[1] / 12.0 + d[2] / p1 * th[2] / 8.0 + th[3] / 12.0)
        + regular_second / p1;
    Ok(BtildeReport { numeric, scaled: numeric.value * 2.0 / p1, printed_display, derived_display, regular_second })
}

/// Radial integrals of the epsilon-metric on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylReport {
    pub rho0_sq: f64,
    /// int_{rho^2 > rho0^2} rho^2 d(rho^2) / (1 + rho^2)^3 by Gauss-Legendre
    pub outer_quadrature: f64,
    pub outer_doubling_delta: f64,
    /// (1 + 2 rho0^2) / (2 (1 + rho0^2)^2)
    pub outer_oracle: f64,
    /// dI_{|z|<theta} per unit d(eps)
    pub d_inner: f64,
    /// dI_{|z|>theta} per unit d(log eps), compared with -c/24
    pub d_outer: f64,
    /// d_outer / (-c/24) - 1, which is O(rho0^4)
    pub outer_correction: f64,
    /// int K dvol over |z| > theta, with K = 4 eps
    pub curvature_outer: f64,
    /// 4 pi / (1 + rho0^2)
    pub curvature_outer_oracle: f64,
    /// int K dvol over the whole plane, 2 pi chi for the sphere
    pub curvature_total: f64,
}

fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, deg: usize) -> f64 {
    GaussLegendre::new(deg.try_into().expect("degree >= 2")).expect("valid degree").integrate(a, b, f)
}

pub fn weyl_integrals(eps: f64, theta_radius: f64, c: f64) -> Result<WeylReport, ContourError> {
    let rho0_sq = eps * theta_radius * theta_radius;
    if !(0.0..=0.01).contains(&rho0_sq) {
        return Err(ContourError::RhoTooLarge(rho0_sq));
    }
    // rho = tan(phi) turns the integrand into 2 sin^3 cos on [atan rho0, pi/2]
    let lo = rho0_sq.sqrt().atan();
    let radial = |phi: f64| 2.0 * phi.sin().powi(3) * phi.cos();
    let coarse = gauss_legendre(radial, lo, PI / 2.0, 16);
    let outer = gauss_legendre(radial, lo, PI / 2.0, 32);
    let outer_oracle = (1.0 + 2.0 * rho0_sq) / (2.0 * (1.0 + rho0_sq).powi(2));
    let d_inner = -c * theta_radius * theta_radius / 12.0 * rho0_sq / (1.0 + rho0_sq).powi(3);
    let d_outer = -c / 12.0 * outer;
    // metric |dz|^2 / (1 + eps r^2)^2 has K = 4 eps; in t = eps r^2 the area is pi dt / (eps (1+t)^2)
    let area_density = |t: f64| PI / (eps * (1.0 + t).powi(2));
    // t = tan^2(phi) again
    let curv = |lo_phi: f64| {
        gauss_legendre(|phi: f64| 4.0 * eps * area_density(phi.tan().powi(2)) * 2.0 * phi.tan() / phi.cos().powi(2), lo_phi, PI / 2.0, 32)
    };
    Ok(WeylReport {
        rho0_sq,
        outer_quadrature: outer,
        outer_doubling_delta: (outer - coarse).abs(),
        outer_oracle,
        d_inner,
        d_outer,
        outer_correction: d_outer / (-c / 24.0) - 1.0,
        curvature_outer: curv(lo),
        curvature_outer_oracle: 4.0 * PI / (1.0 + rho0_sq),
        curvature_total: curv(0.0),
    })
}
