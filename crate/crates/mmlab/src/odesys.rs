//! ODE systems in the ramification points for the (2,5) model: the exact genus-two system,
//! its leading-order (Frobenius) analysis, path integration and collision monodromy.

use std::cell::RefCell;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use ode_solvers::{Dopri5, OutputType, System};
use serde::Serialize;
use thiserror::Error;

use crate::contour::{cauchy_coefficient, ser_c, ContourError, ContourSpec};
use crate::curve::{schwarzian_from_jet, CurveError, HyperCurve};
use crate::qspecial::{eta, rogers_ramanujan, Character, QSpecialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("ramification points {0} and {1} collide (distance {2:e})")]
    RootCollision(usize, usize, f64),
    #[error("path segment {segment} passes within {distance:e} of a singular point")]
    PathTooClose { segment: usize, distance: f64 },
    #[error("state has {got} entries, system needs {want}")]
    BadDimension { want: usize, got: usize },
    #[error("path needs at least two waypoints")]
    ShortPath,
    #[error("integrator failed: {0}")]
    Integrator(String),
    #[error("collision radius {0} must lie in (0, 0.5)")]
    BadRadius(f64),
    #[error("indicial analysis: {0}")]
    Eigen(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    QSpecial(#[from] QSpecialError),
}

fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// (<1>, <vartheta>, <vartheta'>, <vartheta''>, B~_s) at X_s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactState5 {
    #[serde(serialize_with = "ser_c")]
    pub z: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub th: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub th1: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub th2: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub bt: Complex64,
}

impl ExactState5 {
    pub fn from_array(a: [Complex64; 5]) -> Self {
        ExactState5 { z: a[0], th: a[1], th1: a[2], th2: a[3], bt: a[4] }
    }

    pub fn to_array(self) -> [Complex64; 5] {
        [self.z, self.th, self.th1, self.th2, self.bt]
    }
}

fn check_collisions(curve: &HyperCurve) -> Result<(), OdeError> {
    let r = curve.roots();
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            let d = (r[i] - r[j]).norm();
            if d < 1e-6 {
                return Err(OdeError::RootCollision(i, j, d));
            }
        }
    }
    Ok(())
}

/// Pieces of the exact system that multiply the state, without the -(c/8) omega_s shift.
#[derive(Debug, Clone, Copy)]
pub struct ExactRows {
    /// partial derivatives at fixed x, as printed
    pub partial: ExactState5,
    /// the added total-derivative terms vartheta^(k+1)(X_s)
    pub transport: ExactState5,
    #[allow(dead_code)]
    omega: Complex64,
}

/// Right-hand side d(state)/dX_s with the other roots fixed (xi_s = 1).
///
/// The printed rows give d_{X_s} <vartheta^(k)_x> at fixed x; moving the evaluation
/// point along with X_s adds <vartheta^(k+1)_{X_s}>, where the n = 5 law supplies
/// <vartheta'''> = -(3c/80) p^(5) <1>.
pub fn exact_rhs(curve: &HyperCurve, s: usize, state: &ExactState5, c: Complex64) -> Result<ExactState5, OdeError> {
    Ok(exact_parts(curve, s, state, c)?.total())
}

impl ExactRows {
    pub fn total(&self) -> ExactState5 {
        let (p, t) = (self.partial, self.transport);
        ExactState5 { z: p.z + t.z, th: p.th + t.th, th1: p.th1 + t.th1, th2: p.th2 + t.th2, bt: p.bt + t.bt }
    }
}

pub fn exact_parts(curve: &HyperCurve, s: usize, st: &ExactState5, c: Complex64) -> Result<ExactRows, OdeError> {
    if curve.degree() != 5 {
        return Err(CurveError::NotQuintic(curve.degree()).into());
    }
    check_collisions(curve)?;
    let d = curve.root_jet(s)?;
    let p1 = d[1];
    let schw = schwarzian_from_jet(d[1], d[2], d[3]).ok_or(CurveError::VanishingDerivative(curve.root(s)?))?;
    let omega = curve.omega(s, cx(1.0))?;
    let shift = c / 8.0 * omega;
    let th3 = -3.0 * c / 80.0 * d[5] * st.z;
    let partial = ExactState5 {
        z: shift * st.z + st.th * 2.0 / p1,
        th: shift * st.th - 7.0 * c / 480.0 * p1 * schw * st.z + d[2] / p1 * st.th * 0.9 - st.th1 * 0.7,
        th1: shift * st.th1
            + c / 480.0 * (d[2] * d[3] / p1 * 7.0 - d[4]) * st.z
            + d[3] / p1 * st.th * (11.0 / 30.0)
            + d[2] / p1 * st.th1 * 0.35
            - st.th2 * 0.3,
        th2: shift * st.th2 + st.bt * 2.0 / p1 + 7.0 * c / 1920.0 * d[5] * st.z,
        bt: shift * st.bt
            + (c / 32000.0 * d[2] * d[5] + c / 960.0 * d[3] * d[4]) * st.z
            + d[5] * st.th * (1607.0 / 24000.0)
            + d[4] * st.th1 / 40.0
            + (d[3] * (143.0 / 2400.0) + 7.0 * c / 640.0 * d[2] * d[2] / p1) * st.th2
            + d[2] / p1 * st.bt * 0.9,
    };
    let zero = Complex64::new(0.0, 0.0);
    let transport = ExactState5 { z: zero, th: st.th1, th1: st.th2, th2: th3, bt: zero };
    Ok(ExactRows { partial, transport, omega })
}

/// The exact system as a 5x5 matrix K with d(state)/dX_s = K state.
pub fn exact_matrix(curve: &HyperCurve, s: usize, c: Complex64) -> Result<DMatrix<Complex64>, OdeError> {
    let mut k = DMatrix::zeros(5, 5);
    for j in 0..5 {
        let mut e = [cx(0.0); 5];
        e[j] = cx(1.0);
        let col = exact_rhs(curve, s, &ExactState5::from_array(e), c)?.to_array();
        for i in 0..5 {
            k[(i, j)] = col[i];
        }
    }
    Ok(k)
}

/// Roots of u(u - 9/5) = 7c/40, larger real part first.
pub fn indicial_quadratic(c: Complex64) -> [Complex64; 2] {
    quadratic_roots(cx(-9.0 / 5.0), -7.0 * c / 40.0)
}

/// Roots of x^2 + b x + q, larger real part first.
fn quadratic_roots(b: Complex64, q: Complex64) -> [Complex64; 2] {
    let disc = (b * b - q * 4.0).sqrt();
    let (r1, r2) = ((-b + disc) / 2.0, (-b - disc) / 2.0);
    if r1.re >= r2.re {
        [r1, r2]
    } else {
        [r2, r1]
    }
}

/// Roots of the first determinant factor (u - 13/10)(u - 1/2) + 3/25.
pub fn determinant_factor_roots() -> [Complex64; 2] {
    quadratic_roots(cx(-1.8), cx(0.65 + 0.12))
}

/// The statement this factor is compared against.
pub const STATED_FACTOR_ROOTS: [f64; 2] = [0.9, 0.7];

/// Twist-field exponent u = 2(h - c/8).
pub fn twist_exponent(h: Complex64, c: Complex64) -> Complex64 {
    (h - c / 8.0) * 2.0
}

/// Coefficients of X^-1 in p'''/p', p''''/p' and (p'''/p')^2 at X_s = X_2 + X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionCoefficients {
    #[serde(serialize_with = "ser_c")]
    pub p3: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub p4: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub p33: Complex64,
}

impl CollisionCoefficients {
    /// Laurent coefficients in X by a contour around X = 0.
    pub fn from_configuration(a0: Complex64, x2: Complex64, spectators: &[Complex64; 3]) -> Result<Self, OdeError> {
        let dmin = spectators.iter().map(|r| (r - x2).norm()).fold(f64::INFINITY, f64::min);
        let spec = ContourSpec::new(Complex64::new(0.0, 0.0), 0.25 * dmin, 512, &[])?;
        let jet = |x: Complex64| -> [Complex64; 3] {
            let roots = vec![x2 + x, x2, spectators[0], spectators[1], spectators[2]];
            let cv = HyperCurve::new(a0, roots).expect("contour keeps roots apart");
            let d = |k| cv.derivative_at_root(0, k).expect("root 0 exists");
            let (r3, r4) = (d(3) / d(1), d(4) / d(1));
            [r3, r4, r3 * r3]
        };
        Ok(CollisionCoefficients {
            p3: cauchy_coefficient(|x| jet(x)[0], &spec, -1),
            p4: cauchy_coefficient(|x| jet(x)[1], &spec, -1),
            p33: cauchy_coefficient(|x| jet(x)[2], &spec, -1),
        })
    }

    /// [p'''/p']_{-1} = 6 sum 1/(X_2 - X_i) over spectators.
    pub fn p3_closed(x2: Complex64, spectators: &[Complex64; 3]) -> Complex64 {
        spectators.iter().map(|r| (x2 - r).inv()).sum::<Complex64>() * 6.0
    }
}

/// Leading-order 5x5 matrix A with u v = A v, in the variables
/// (<1>, <vartheta>/p', <vartheta'>/p', <vartheta''>/p', <vartheta vartheta''>_r/p'^2).
pub fn leading_matrix_5(k: &CollisionCoefficients, c: Complex64) -> DMatrix<Complex64> {
    let z = cx(0.0);
    let (p3, p4, p33) = (k.p3, k.p4, k.p33);
    #[rustfmt::skip]
    let rows = [
        [z, cx(2.0), z, z, z],
        [7.0 * c / 80.0, cx(1.8), z, z, z],
        [7.0 * c / 240.0 * p3, p3 * (11.0 / 30.0), cx(0.7), z, z],
        [-(c / 96.0 * p4 + c / 288.0 * p33), -p4 / 12.0, -p3 / 6.0, cx(0.5), cx(2.0)],
        [-c / 40.0 * (p4 / 32.0 - p33 / 144.0), -(p33 * (-11.0 / 9.0) + p4 * 2.0) / 80.0, -p3 / 20.0, cx(-0.06), cx(1.3)],
    ];
    DMatrix::from_fn(5, 5, |i, j| rows[i][j])
}

/// One eigenvalue cluster of an indicial matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenCluster {
    #[serde(serialize_with = "ser_c")]
    pub value: Complex64,
    pub algebraic: usize,
    pub geometric: usize,
    /// orthonormal basis of the eigenspace; largest entry of each made real positive
    #[serde(serialize_with = "ser_cvecs")]
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub max_residual: f64,
}

fn ser_cvecs<S: serde::Serializer>(v: &[Vec<Complex64>], s: S) -> Result<S::Ok, S::Error> {
    v.iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).collect::<Vec<_>>().serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicialData {
    #[serde(serialize_with = "ser_cvecs")]
    pub matrix: Vec<Vec<Complex64>>,
    pub clusters: Vec<EigenCluster>,
}

impl IndicialData {
    pub fn cluster_near(&self, v: f64, tol: f64) -> Option<&EigenCluster> {
        self.clusters.iter().find(|c| (c.value - v).norm() < tol)
    }
}

const CLUSTER_TOL: f64 = 1e-5;

fn fix_phase(v: &mut [Complex64]) {
    if let Some(big) = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
        if big.norm() > 0.0 {
            let ph = big.conj() / big.norm();
            v.iter_mut().for_each(|x| *x *= ph);
        }
    }
}

/// Eigenvalues (clustered), multiplicities and eigenspaces of a square matrix.
pub fn indicial_analysis(a: &DMatrix<Complex64>) -> Result<IndicialData, OdeError> {
    let n = a.nrows();
    let mut eig: Vec<Complex64> = nalgebra::Schur::new(a.clone())
        .eigenvalues()
        .ok_or_else(|| OdeError::Eigen("Schur form did not converge".into()))?
        .iter()
        .copied()
        .collect();
    eig.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let mut groups: Vec<Vec<Complex64>> = vec![];
    for e in eig {
        match groups.iter_mut().find(|g| (g[0] - e).norm() < CLUSTER_TOL) {
            Some(g) => g.push(e),
            None => groups.push(vec![e]),
        }
    }
    let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let clusters = groups
        .into_iter()
        .map(|g| {
            let value = g.iter().sum::<Complex64>() / g.len() as f64;
            let shifted = a - DMatrix::identity(n, n) * value;
            let svd = shifted.clone().svd(false, true);
            let v_t = svd.v_t.as_ref().expect("requested V");
            let mut eigenvectors = vec![];
            for (i, sv) in svd.singular_values.iter().enumerate() {
                if *sv < 1e-8 * scale {
                    let mut v: Vec<Complex64> = v_t.row(i).iter().map(|z| z.conj()).collect();
                    fix_phase(&mut v);
                    eigenvectors.push(v);
                }
            }
            let max_residual = eigenvectors
                .iter()
                .map(|v| (&shifted * DVector::from_vec(v.clone())).norm() / DVector::from_vec(v.clone()).norm())
                .fold(0.0, f64::max);
            EigenCluster { value, algebraic: g.len(), geometric: eigenvectors.len(), eigenvectors, max_residual }
        })
        .collect();
    let matrix = (0..n).map(|i| a.row(i).iter().copied().collect()).collect();
    Ok(IndicialData { matrix, clusters })
}

/// Smallest relative residual ||(A - lambda) v|| / ||v|| over v = (head, w) with w free.
pub fn eigenvector_lift_residual(a: &DMatrix<Complex64>, lambda: Complex64, head: &[Complex64]) -> f64 {
    let n = a.nrows();
    let m = head.len();
    let shifted = a - DMatrix::identity(n, n) * lambda;
    let h = DVector::from_column_slice(head);
    let r = shifted.columns(0, m) * &h;
    if m == n {
        return r.norm() / h.norm();
    }
    let tail = shifted.columns(m, n - m).into_owned();
    let svd = tail.svd(true, true);
    let w = svd.solve(&(-&r), 1e-12).expect("SVD with U and V");
    let res = &r + shifted.columns(m, n - m) * &w;
    let full = h.norm().hypot(w.norm());
    res.norm() / full
}

/// det of the 3x3 block minus (u - 7/10)(u(u - 9/5) - 7c/40).
pub fn third_value_factor_residual(c: Complex64, p3: Complex64, u: Complex64) -> Complex64 {
    let z = cx(0.0);
    let m = DMatrix::from_row_slice(
        3,
        3,
        &[u, cx(-2.0), z, -7.0 * c / 80.0, u - 1.8, z, -7.0 * c / 240.0 * p3, -p3 * (11.0 / 30.0), u - 0.7],
    );
    m.determinant() - (u - 0.7) * (u * (u - 1.8) - 7.0 * c / 40.0)
}

/// Third root of the 3x3 block: its last diagonal entry is u - 7/10 for every curve and c.
pub fn third_value() -> f64 {
    0.7
}

/// Comparison of one row of the printed leading matrix with the limit of the exact system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowComparison {
    pub row: usize,
    #[serde(serialize_with = "ser_cvec")]
    pub printed: Vec<Complex64>,
    #[serde(serialize_with = "ser_cvec")]
    pub from_exact: Vec<Complex64>,
    pub max_diff: f64,
}

fn ser_cvec<S: serde::Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
    v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
}

/// Map from the exact state to the leading-order variables at the current curve.
fn frobenius_map(curve: &HyperCurve, s: usize, c: Complex64) -> Result<DMatrix<Complex64>, OdeError> {
    let d = curve.root_jet(s)?;
    let p1 = d[1];
    let th3_per_z = -3.0 * c / 80.0 * d[5];
    // <vartheta vartheta''>_r = 2 B~ - p' * (non-regular part of the (2/p') B~ display)
    let disp_z = c / 192.0 * (d[3] * d[3] / p1 / 3.0 + d[2] * d[4] / p1 / 2.0 + d[5] / 5.0) + th3_per_z / 12.0;
    let disp = [disp_z, d[4] / p1 / 24.0, d[3] / p1 / 12.0, d[2] / p1 / 8.0];
    let z = cx(0.0);
    let p2 = p1 * p1;
    #[rustfmt::skip]
    let rows = [
        [cx(1.0), z, z, z, z],
        [z, p1.inv(), z, z, z],
        [z, z, p1.inv(), z, z],
        [z, z, z, p1.inv(), z],
        [-p1 * disp[0] / p2, -p1 * disp[1] / p2, -p1 * disp[2] / p2, -p1 * disp[3] / p2, cx(2.0) / p2],
    ];
    Ok(DMatrix::from_fn(5, 5, |i, j| rows[i][j]))
}

/// Leading-order matrix obtained by taking X -> 0 in the exact system at a collision configuration.
pub fn leading_matrix_from_exact(a0: Complex64, x2: Complex64, spectators: &[Complex64; 3], c: Complex64) -> Result<DMatrix<Complex64>, OdeError> {
    let powers = [0i32, 1, 1, 1, 2];
    let at = |x: f64| -> Result<DMatrix<Complex64>, OdeError> {
        let xs = x2 + x;
        let curve_at = |pos: Complex64| HyperCurve::new(a0, vec![pos, x2, spectators[0], spectators[1], spectators[2]]);
        let cv = curve_at(xs)?;
        let t = frobenius_map(&cv, 0, c)?;
        let h = x * 1e-4;
        let dt = (frobenius_map(&curve_at(xs + h)?, 0, c)? - frobenius_map(&curve_at(xs - h)?, 0, c)?) / cx(2.0 * h);
        let t_inv = t.clone().try_inverse().ok_or_else(|| OdeError::Eigen("singular variable map".into()))?;
        let kv = (&dt + &t * exact_matrix(&cv, 0, c)?) * &t_inv;
        Ok(DMatrix::from_fn(5, 5, |i, j| {
            let e = 1 + powers[i] - powers[j];
            let diag = if i == j { cx(powers[i] as f64) - c / 8.0 } else { cx(0.0) };
            kv[(i, j)] * x.powi(e) + diag
        }))
    };
    let h = 1e-3;
    Ok(at(h / 2.0)? * cx(2.0) - at(h)?)
}

/// Row-by-row comparison of the printed leading matrix with the limit of the exact system.
pub fn compare_leading_rows(a0: Complex64, x2: Complex64, spectators: &[Complex64; 3], c: Complex64) -> Result<Vec<RowComparison>, OdeError> {
    let coeffs = CollisionCoefficients::from_configuration(a0, x2, spectators)?;
    let printed = leading_matrix_5(&coeffs, c);
    let derived = leading_matrix_from_exact(a0, x2, spectators, c)?;
    Ok((0..5)
        .map(|i| {
            let a: Vec<Complex64> = printed.row(i).iter().copied().collect();
            let b: Vec<Complex64> = derived.row(i).iter().copied().collect();
            let max_diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            RowComparison { row: i + 1, printed: a, from_exact: b, max_diff }
        })
        .collect())
}

/// Linear systems that can be followed along a path of the moving point.
#[derive(Debug, Clone)]
pub enum PathSystem {
    /// exact genus-two system with root `s` moving
    Exact { curve: HyperCurve, s: usize, c: Complex64 },
    /// dy/dx = A y / (x - center)
    Euler { matrix: DMatrix<Complex64>, center: Complex64 },
}

impl PathSystem {
    pub fn dim(&self) -> usize {
        match self {
            PathSystem::Exact { .. } => 5,
            PathSystem::Euler { matrix, .. } => matrix.nrows(),
        }
    }

    fn singular_points(&self) -> Vec<Complex64> {
        match self {
            PathSystem::Exact { curve, s, .. } => {
                curve.roots().iter().enumerate().filter(|(i, _)| i != s).map(|(_, r)| *r).collect()
            }
            PathSystem::Euler { center, .. } => vec![*center],
        }
    }

    pub fn rhs(&self, x: Complex64, y: &[Complex64]) -> Result<Vec<Complex64>, OdeError> {
        match self {
            PathSystem::Exact { curve, s, c } => {
                let moved = curve.with_root(*s, x)?;
                let st = ExactState5::from_array(y.try_into().map_err(|_| OdeError::BadDimension { want: 5, got: y.len() })?);
                Ok(exact_rhs(&moved, *s, &st, *c)?.to_array().to_vec())
            }
            PathSystem::Euler { matrix, center } => {
                let v = matrix * DVector::from_column_slice(y) / (x - center);
                Ok(v.iter().copied().collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// the path must stay 2 * margin away from singular points
    pub margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-12, margin: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    #[serde(serialize_with = "ser_c")]
    pub x: Complex64,
    #[serde(serialize_with = "ser_cvec")]
    pub state: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub accepted_steps: u32,
}

impl Trajectory {
    pub fn end_state(&self) -> &[Complex64] {
        &self.points.last().expect("at least the start point").state
    }
}

struct Segment<'a> {
    system: &'a PathSystem,
    a: Complex64,
    b: Complex64,
    failure: &'a RefCell<Option<OdeError>>,
}

fn pack(y: &[Complex64]) -> DVector<f64> {
    DVector::from_iterator(2 * y.len(), y.iter().flat_map(|z| [z.re, z.im]))
}

fn unpack(v: &DVector<f64>) -> Vec<Complex64> {
    v.as_slice().chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

impl System<f64, DVector<f64>> for Segment<'_> {
    fn system(&self, t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let x = self.a + (self.b - self.a) * t;
        match self.system.rhs(x, &unpack(y)) {
            Ok(f) => {
                let scaled: Vec<Complex64> = f.iter().map(|v| v * (self.b - self.a)).collect();
                dy.copy_from(&pack(&scaled));
            }
            Err(e) => {
                dy.fill(0.0);
                self.failure.borrow_mut().get_or_insert(e);
            }
        }
    }
}

fn segment_distance(a: Complex64, b: Complex64, p: Complex64) -> f64 {
    let ab = b - a;
    let t = if ab.norm_sqr() == 0.0 { 0.0 } else { (((p - a) * ab.conj()).re / ab.norm_sqr()).clamp(0.0, 1.0) };
    (a + ab * t - p).norm()
}

/// Follows the state along straight segments between waypoints with an embedded RK 5(4) pair.
pub fn integrate_path(system: &PathSystem, init: &[Complex64], path: &[Complex64], tol: Tolerances) -> Result<Trajectory, OdeError> {
    if init.len() != system.dim() {
        return Err(OdeError::BadDimension { want: system.dim(), got: init.len() });
    }
    if path.len() < 2 {
        return Err(OdeError::ShortPath);
    }
    let sing = system.singular_points();
    for (k, w) in path.windows(2).enumerate() {
        let distance = sing.iter().map(|p| segment_distance(w[0], w[1], *p)).fold(f64::INFINITY, f64::min);
        if distance <= 2.0 * tol.margin {
            return Err(OdeError::PathTooClose { segment: k, distance });
        }
    }
    let mut state = init.to_vec();
    let mut points = vec![TrajectoryPoint { step: 0, x: path[0], state: state.clone() }];
    let mut accepted = 0;
    for (k, w) in path.windows(2).enumerate() {
        let failure = RefCell::new(None);
        let seg = Segment { system, a: w[0], b: w[1], failure: &failure };
        let mut solver = Dopri5::new(seg, 0.0, 1.0, 1.0, pack(&state), tol.rtol, tol.atol);
        solver.set_output(OutputType::Sparse);
        let stats = solver.integrate().map_err(|e| OdeError::Integrator(format!("{e:?}")))?;
        accepted += stats.accepted_steps;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        state = unpack(solver.y_out().last().expect("solver output"));
        points.push(TrajectoryPoint { step: k + 1, x: w[1], state: state.clone() });
    }
    Ok(Trajectory { points, accepted_steps: accepted })
}

/// Matrix obtained by continuing every basis vector along the path.
pub fn transport_matrix(system: &PathSystem, path: &[Complex64], tol: Tolerances) -> Result<DMatrix<Complex64>, OdeError> {
    let n = system.dim();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![cx(0.0); n];
        e[j] = cx(1.0);
        let tr = integrate_path(system, &e, path, tol)?;
        for (i, v) in tr.end_state().iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

/// Closed polygon with `sides` vertices on the circle |x - center| = radius.
pub fn circle_path(center: Complex64, radius: f64, sides: usize) -> Vec<Complex64> {
    (0..=sides).map(|k| center + Complex64::from_polar(radius, TAU * k as f64 / sides as f64)).collect()
}

/// Euler form X d/dX (<1>, X <vartheta>/p') = E (...) of the leading two-dimensional system.
pub fn collision_euler_matrix(c: Complex64) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c / 8.0, cx(2.0), 7.0 * c / 80.0, c / 8.0 + 1.8])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonodromyReport {
    pub radius: f64,
    /// arg(eigenvalue) / 2 pi mod 1, ascending
    pub phases: Vec<f64>,
    pub moduli: Vec<f64>,
    /// max entry difference against exp(2 pi i E)
    pub oracle_diff: f64,
    #[serde(serialize_with = "ser_cvecs")]
    pub matrix: Vec<Vec<Complex64>>,
}

fn eigenvalues_2x2(m: &DMatrix<Complex64>) -> [Complex64; 2] {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    quadratic_roots(-tr, det)
}

/// Monodromy of the leading system as X_1 - X_2 circles zero; the third root sits at distance 1.
pub fn monodromy_collision(c: Complex64, radius: f64) -> Result<MonodromyReport, OdeError> {
    if !(radius > 0.0 && radius < 0.5) {
        return Err(OdeError::BadRadius(radius));
    }
    let e = collision_euler_matrix(c);
    let sys = PathSystem::Euler { matrix: e.clone(), center: cx(0.0) };
    let m = transport_matrix(&sys, &circle_path(cx(0.0), radius, 64), Tolerances { margin: radius / 4.0, ..Tolerances::default() })?;
    let oracle = (e * Complex64::new(0.0, TAU)).exp();
    let oracle_diff = (&m - oracle).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ev = eigenvalues_2x2(&m);
    let mut phases: Vec<f64> = ev.iter().map(|z| (z.arg() / TAU).rem_euclid(1.0)).collect();
    phases.sort_by(f64::total_cmp);
    let moduli = ev.iter().map(|z| z.norm()).collect();
    let matrix = (0..2).map(|i| m.row(i).iter().copied().collect()).collect();
    Ok(MonodromyReport { radius, phases, moduli, oracle_diff, matrix })
}

/// Ascending chains in [0, n-3] with consecutive gaps of at least 2, the empty chain included.
pub fn fibonacci_chains(n: usize) -> Vec<Vec<usize>> {
    fn grow(next: usize, top: i64, chain: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(chain.clone());
        for v in next..=top.max(-1) as usize {
            if (v as i64) > top {
                break;
            }
            chain.push(v);
            grow(v + 2, top, chain, out);
            chain.pop();
        }
    }
    let mut out = vec![];
    let top = n as i64 - 3;
    if top < 0 {
        return vec![vec![]];
    }
    grow(0, top, &mut vec![], &mut out);
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

pub fn fibonacci_equation_count(n: usize) -> usize {
    fibonacci_chains(n).len()
}

/// Degeneration-limit constants at given tori and sewing parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegenerationConstants {
    #[serde(serialize_with = "ser_c")]
    pub h0h0: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub g0g0: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub h0g0: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub g0h0: Complex64,
    /// eps^(-1/5) eta(tau1)^(-2/5) eta(tau2)^(-2/5)
    #[serde(serialize_with = "ser_c")]
    pub eta_factor: Complex64,
}

pub fn degeneration_constants(tau1: Complex64, tau2: Complex64, eps: Complex64, order: usize) -> Result<DegenerationConstants, OdeError> {
    let h0 = rogers_ramanujan(Character::H0, order)?.series;
    let g0 = rogers_ramanujan(Character::G0, order)?.series;
    let e = eta(order)?;
    let (h1, h2, g1, g2) = (h0.eval_tau(tau1), h0.eval_tau(tau2), g0.eval_tau(tau1), g0.eval_tau(tau2));
    let eta_factor = eps.powf(-0.2) * e.eval_tau(tau1).powf(-0.4) * e.eval_tau(tau2).powf(-0.4);
    Ok(DegenerationConstants { h0h0: h1 * h2, g0g0: g1 * g2, h0g0: h1 * g2, g0h0: g1 * h2, eta_factor })
}
