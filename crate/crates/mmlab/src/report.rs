//! Verification suites: deterministic case lists with pass/fail/flagged status.
//!
//! "flagged" marks a case where the computation disagrees with a printed
//! value that is known to be off; it is shown but does not fail the run.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::contour::{btilde, k_integral_numeric, verify_k_integrals, weyl_integrals};
use crate::curve::{admissible_graphs, graph_assembly, CorrelatorParams, GraphMonomial, HyperCurve, C_MINIMAL};
use crate::odesys::{
    self, compare_leading_rows, determinant_factor_roots, eigenvector_lift_residual, indicial_analysis, indicial_quadratic,
    integrate_path, leading_matrix_5, monodromy_collision, third_value, third_value_factor_residual, CollisionCoefficients,
    PathSystem, Tolerances, STATED_FACTOR_ROOTS,
};
use crate::qspecial::{self, Character, ModularPoint};
use crate::series::{order_fit, Exponent, TruncatedSeries};
use crate::sewing::{self, AgcInput, SewInput, ThetaPair, RAMIFICATION_PAIRS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReportError {
    #[error("unknown suite {0:?}; expected one of qseries, sewing, contour, odesys, all")]
    UnknownSuite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Qseries,
    Sewing,
    Contour,
    Odesys,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Qseries => "qseries",
            Suite::Sewing => "sewing",
            Suite::Contour => "contour",
            Suite::Odesys => "odesys",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qseries" => Ok(Suite::Qseries),
            "sewing" => Ok(Suite::Sewing),
            "contour" => Ok(Suite::Contour),
            "odesys" => Ok(Suite::Odesys),
            "all" => Ok(Suite::All),
            other => Err(ReportError::UnknownSuite(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Flagged,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Flagged => "flagged",
        })
    }
}

/// How `measured` is compared with `expected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// |measured - expected| <= tolerance, entrywise for lists
    Within,
    /// measured <= expected
    AtMost,
    /// measured >= expected
    AtLeast,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub status: Status,
    pub measured: Value,
    pub expected: Value,
    pub relation: Relation,
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

impl Case {
    fn new(id: impl Into<String>, status: Status, measured: Value, expected: Value, relation: Relation, tolerance: Option<f64>) -> Self {
        Case { id: id.into(), status, measured, expected, relation, tolerance, seed: None, note: None }
    }

    pub fn at_most(id: impl Into<String>, measured: f64, bound: f64) -> Self {
        Case::new(id, status(measured <= bound), json!(measured), json!(bound), Relation::AtMost, None)
    }

    pub fn at_least(id: impl Into<String>, measured: f64, bound: f64) -> Self {
        Case::new(id, status(measured >= bound), json!(measured), json!(bound), Relation::AtLeast, None)
    }

    pub fn within(id: impl Into<String>, measured: &[f64], expected: &[f64], tol: f64) -> Self {
        let ok = measured.len() == expected.len() && measured.iter().zip(expected).all(|(m, e)| (m - e).abs() <= tol);
        Case::new(id, status(ok), json!(measured), json!(expected), Relation::Within, Some(tol))
    }

    pub fn equal<T: Serialize + PartialEq>(id: impl Into<String>, measured: T, expected: T) -> Self {
        let ok = measured == expected;
        Case::new(id, status(ok), json!(measured), json!(expected), Relation::Equal, None)
    }

    /// Marks a known disagreement with a printed value; the comparison is kept in the record.
    pub fn flag(mut self, note: &str) -> Self {
        self.status = Status::Flagged;
        self.note = Some(note.to_string());
        self
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn error(id: impl Into<String>, err: impl fmt::Display) -> Self {
        let mut c = Case::new(id, Status::Fail, Value::Null, Value::Null, Relation::Equal, None);
        c.note = Some(err.to_string());
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: Vec<Case>,
    /// seconds; left out of JSON so that reports are reproducible byte for byte
    #[serde(skip)]
    pub wall_time: f64,
}

impl SuiteReport {
    pub fn any_fail(&self) -> bool {
        self.cases.iter().any(|c| c.status == Status::Fail)
    }

    pub fn count(&self, s: Status) -> usize {
        self.cases.iter().filter(|c| c.status == s).count()
    }

    pub fn case(&self, id: &str) -> Option<&Case> {
        self.cases.iter().find(|c| c.id == id)
    }

    pub fn table(&self) -> String {
        let w = self.cases.iter().map(|c| c.id.len()).max().unwrap_or(0);
        let mut out = format!("suite {}  ({:.2} s)\n", self.suite, self.wall_time);
        for c in &self.cases {
            out += &format!("{:<w$}  {:<7}  measured {}  expected {}", c.id, c.status.to_string(), c.measured, c.expected);
            if let Some(t) = c.tolerance {
                out += &format!("  tol {t:e}");
            }
            if let Some(n) = &c.note {
                out += &format!("  [{n}]");
            }
            out.push('\n');
        }
        out += &format!(
            "{} pass, {} flagged, {} fail\n",
            self.count(Status::Pass),
            self.count(Status::Flagged),
            self.count(Status::Fail)
        );
        out
    }
}

type Job = Box<dyn Fn() -> Vec<Case> + Send + Sync>;

fn job(prefix: &'static str, f: impl Fn() -> Result<Vec<Case>, String> + Send + Sync + 'static) -> Job {
    Box::new(move || f().unwrap_or_else(|e| vec![Case::error(format!("{prefix}.error"), e)]))
}

fn jobs_for(suite: Suite, seed: u64) -> Vec<Job> {
    match suite {
        Suite::Qseries => qseries_jobs(),
        Suite::Sewing => sewing_jobs(),
        Suite::Contour => contour_jobs(seed),
        Suite::Odesys => odesys_jobs(seed),
        Suite::All => [Suite::Qseries, Suite::Sewing, Suite::Contour, Suite::Odesys]
            .into_iter()
            .flat_map(|s| jobs_for(s, seed))
            .collect(),
    }
}

/// Runs every case of a suite (concurrently) and sorts the result by id.
pub fn run_suite(suite: Suite, seed: u64) -> SuiteReport {
    let start = Instant::now();
    let mut cases: Vec<Case> = jobs_for(suite, seed).par_iter().flat_map_iter(|j| j()).collect();
    cases.sort_by(|a, b| a.id.cmp(&b.id));
    SuiteReport { suite: suite.name().to_string(), cases, wall_time: start.elapsed().as_secs_f64() }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cj(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn e<T: fmt::Display>(err: T) -> String {
    err.to_string()
}

fn pt(tau: Complex64) -> Result<ModularPoint, String> {
    ModularPoint::new(tau).map_err(e)
}

// ---------------------------------------------------------------- qseries

fn qseries_jobs() -> Vec<Job> {
    vec![
        job("qseries.jacobi", || {
            let t = qspecial::theta_constants(40).map_err(e)?;
            let r = &(&t.theta2.powi(4).map_err(e)? + &t.theta4.powi(4).map_err(e)?) - &t.theta3.powi(4).map_err(e)?;
            Ok(vec![Case::at_most("qseries.jacobi_identity", r.max_abs_coeff(), 1e-9)])
        }),
        job("qseries.rr", || {
            let mut out = vec![];
            for (v, name) in [(Character::H0, "h0"), (Character::G0, "g0")] {
                let a = qspecial::rogers_ramanujan(v, 30).map_err(e)?.series;
                let b = qspecial::rogers_ramanujan_product(v, 30).map_err(e)?.series;
                out.push(Case::at_most(format!("qseries.rr_sum_product.{name}"), (&a - &b).max_abs_coeff(), 1e-9));
                out.push(Case::at_most(format!("qseries.character_ode.{name}"), qspecial::character_ode_residual(&a).max_abs_coeff(), 1e-9));
            }
            let h = qspecial::rogers_ramanujan(Character::H0, 10).map_err(e)?.series.shift(-Character::H0.lead());
            let first: Vec<f64> = (0..7).map(|n| h.coefficient(Exponent::from_integer(n)).map_or(f64::NAN, |z| z.re)).collect();
            out.push(Case::within("qseries.rr_h0_first_terms", &first, &[1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0], 1e-12));
            Ok(out)
        }),
        job("qseries.half_periods", || {
            let mut out = vec![];
            for tau in [c(0.0, 1.5), c(0.3, 1.2)] {
                let tag = format!("{},{}", tau.re, tau.im);
                let p = pt(tau)?;
                let x = qspecial::weierstrass_e_values(p).map_err(e)?;
                let t = qspecial::theta_values(p);
                let id = [
                    (x.xi0 + x.xi1 + x.xi2).norm(),
                    (x.xi1 - x.xi0 - t.theta2.powi(4) / 4.0).norm(),
                    (x.xi0 - x.xi2 - t.theta4.powi(4) / 4.0).norm(),
                ];
                out.push(Case::at_most(format!("qseries.half_periods.identities.tau={tag}"), id.iter().copied().fold(0.0, f64::max), 1e-12));
                let s = qspecial::serre_e_values(p).map_err(e)?;
                let d = s.as_array().iter().zip(x.as_array()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                out.push(Case::at_most(format!("qseries.half_periods.serre.tau={tag}"), d, 1e-8));
                let r = qspecial::cubic_residuals(p).map_err(e)?;
                out.push(Case::at_most(format!("qseries.half_periods.cubic.tau={tag}"), r.rescaled.iter().copied().fold(0.0, f64::max), 1e-8));
                out.push(
                    Case::at_most(format!("qseries.half_periods.cubic_unit_periods.tau={tag}"), r.literal.iter().copied().fold(0.0, f64::max), 1e-8)
                        .flag("cubic constants belong to periods (1, tau), not 2 pi i (1, tau)"),
                );
            }
            Ok(out)
        }),
        job("qseries.b0", || {
            let th = qspecial::theta_constants(4).map_err(e)?;
            let ratio = th.theta2.powi(4).map_err(e)?.div(&th.theta3.powi(4).map_err(e)?).map_err(e)?;
            let got: Vec<f64> = (1..=4).map(|n| ratio.coefficient(Exponent::new(n, 2)).map_or(f64::NAN, |z| z.re)).collect();
            Ok(vec![Case::within("qseries.b0_expansion", &got, &[16.0, -128.0, 704.0, -1024.0], 1e-9)
                .flag("fourth printed coefficient; series division gives -3072")])
        }),
        job("qseries.pochhammer", || {
            let p = qspecial::pochhammer(8).map_err(e)?;
            let got: Vec<f64> = (0..8).map(|n| p.coeff_num(n).re).collect();
            Ok(vec![Case::within("qseries.pochhammer_display", &got, &[1.0, -1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0], 1e-12)
                .flag("printed signs; the product gives 1 - q - q^2 + q^5 + q^7")])
        }),
        job("qseries.eta", || {
            let f = qspecial::eta(20).map_err(e)?.powr(Exponent::new(-2, 5)).map_err(e)?;
            let lhs = f.q_derivative().div(&f).map_err(e)?;
            let rhs = qspecial::eisenstein(2, 20).map_err(e)?.scale(c(-1.0 / 60.0, 0.0));
            Ok(vec![Case::at_most("qseries.eta_log_derivative", (&lhs - &rhs).max_abs_coeff(), 1e-10)])
        }),
    ]
}

// ---------------------------------------------------------------- sewing

fn slope(samples: &[(f64, f64)]) -> Result<f64, String> {
    Ok(order_fit(samples).map_err(e)?.slope)
}

fn sewing_jobs() -> Vec<Job> {
    let equal = |nu: f64| SewInput::new(c(0.0, 1.5), c(0.0, 1.5), c(nu, 0.0)).map_err(e);
    vec![
        job("sewing.modes", move || {
            let inp = equal(1e-3)?;
            Ok(vec![Case::at_most("sewing.mode_agreement", sewing::mode_agreement(&inp).map_err(e)?, 1e-10)])
        }),
        job("sewing.theta_order", move || {
            let mut samples = vec![];
            for nu in [1e-2, 3e-3, 1e-3] {
                let inp = equal(nu)?;
                let mut worst: f64 = 0.0;
                for (i, j) in RAMIFICATION_PAIRS {
                    let pair = ThetaPair::new(i, j).map_err(e)?;
                    worst = worst.max(sewing::theta_mode_residual(&inp, pair, 6).map_err(e)?);
                }
                samples.push((nu, worst));
            }
            Ok(vec![Case::at_least("sewing.direct_vs_expansion_slope", slope(&samples)?, 7.0)])
        }),
        job("sewing.degenerate", move || {
            let r = sewing::ramification_points(&equal(0.0)?).map_err(e)?;
            let spread = [r.x3, r.x4, r.x5].iter().map(|x| (x - r.b0).norm()).fold(0.0, f64::max);
            Ok(vec![Case::equal("sewing.degenerate_flag", r.degenerate, true), Case::at_most("sewing.degenerate_spread", spread, 1e-12)])
        }),
        job("sewing.claims", || {
            let nus = [2e-2, 1e-2, 5e-3];
            let mut claims = vec![];
            for nu in nus {
                let inp = SewInput::new(c(0.0, 1.5), c(0.1, 1.3), c(nu, 0.0)).map_err(e)?;
                claims.push(sewing::sewing_claims(&inp).map_err(e)?);
            }
            let fit = |f: &dyn Fn(&sewing::SewingClaims) -> f64| -> Result<f64, String> {
                slope(&claims.iter().map(|cl| (cl.nu, f(cl))).collect::<Vec<_>>())
            };
            let mut out = vec![];
            for k in 0..3 {
                out.push(Case::within(format!("sewing.x{}_minus_b0_slope", k + 3), &[fit(&|cl| cl.x_minus_b0[k])?], &[2.0], 0.2));
            }
            out.push(Case::within("sewing.quotient_slope", &[fit(&|cl| cl.quotient_dev)?], &[2.0], 0.2));
            out.push(Case::within("sewing.difference_quotient_slope", &[fit(&|cl| cl.difference_quotient_dev)?], &[2.0], 0.2));
            out.push(Case::within("sewing.x3_minus_x4_leading_slope", &[fit(&|cl| cl.x3_minus_x4_dev)?], &[2.0], 0.2));
            out.push(Case::within("sewing.x3_x5_relative_slope", &[fit(&|cl| cl.x3x5_derived_dev)?], &[2.0], 0.2));
            let last = claims.last().expect("three samples");
            out.push(
                Case::at_most("sewing.x3_x5_relative_printed", last.x3x5_printed_dev, 1e-3)
                    .flag("printed leading term uses theta2^4(tau1); the expansion gives theta4^4(tau1)"),
            );
            Ok(out)
        }),
        job("sewing.agc", || {
            let mut samples = vec![];
            for eps in [0.1, 0.05, 0.025] {
                samples.push((eps, sewing::agc_residual(&AgcInput::new(c(0.0, 1.5), c(0.1, 1.4), eps).map_err(e)?).map_err(e)?));
            }
            Ok(vec![Case::at_least("sewing.agc_residual_slope", slope(&samples)?, 6.0)
                .flag("first correction is eps^4 P(z)^2, not cancelled by the stated coordinates")])
        }),
        job("sewing.lft", || {
            let mut samples = vec![];
            for eps in [0.1, 0.05, 0.025] {
                let r = sewing::lft_image_check(&AgcInput::new(c(0.0, 1.5), c(0.1, 1.4), eps).map_err(e)?).map_err(e)?;
                samples.push((eps, r.deviations.iter().copied().fold(0.0, f64::max)));
            }
            Ok(vec![Case::at_least("sewing.lft_deviation_slope", slope(&samples)?, 5.0)])
        }),
    ]
}

// ---------------------------------------------------------------- contour

/// Seed of the i-th random curve of a run.
pub fn curve_seed(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(1000).wrapping_add(i)
}

fn random_setup(case_seed: u64) -> (HyperCurve, CorrelatorParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
    let cv = HyperCurve::random_quintic(&mut rng);
    let pr = CorrelatorParams::random(&cv, &mut rng, c(C_MINIMAL, 0.0));
    (cv, pr)
}

fn contour_curve_cases(i: u64, cs: u64) -> Result<Vec<Case>, String> {
    let (cv, pr) = random_setup(cs);
    let mut rel: f64 = 0.0;
    let mut gate: f64 = 0.0;
    let mut shift: f64 = 0.0;
    let mut moved = f64::INFINITY;
    let mut derived: f64 = 0.0;
    let mut printed: f64 = 0.0;
    let mut shifted = pr.clone();
    shifted.b11 += 1.0;
    for s in 0..cv.degree() {
        for r in verify_k_integrals(&cv, &pr, s).map_err(e)? {
            rel = rel.max(r.rel_err);
            let g = k_integral_numeric(&cv, &pr, s, r.k).map_err(e)?;
            gate = gate.max(g.doubling_delta);
            shift = shift.max((k_integral_numeric(&cv, &shifted, s, r.k).map_err(e)?.value - g.value).norm());
        }
        let b = btilde(&cv, &pr, s).map_err(e)?;
        let b2 = btilde(&cv, &shifted, s).map_err(e)?;
        moved = moved.min((b2.numeric.value - b.numeric.value).norm());
        derived = derived.max((b.derived_display - b.scaled).norm() / b.scaled.norm());
        printed = printed.max((b.printed_display - b.scaled).norm() / b.scaled.norm());
    }
    let tag = format!("curve{i}");
    Ok(vec![
        Case::at_most(format!("contour.k_integrals.{tag}"), rel, 1e-8).seeded(cs),
        Case::at_most(format!("contour.doubling_gate.{tag}"), gate, 1e-11).seeded(cs),
        Case::at_most(format!("contour.b11_invariance.{tag}"), shift, 1e-10).seeded(cs),
        Case::at_least(format!("contour.k2_moves_with_b11.{tag}"), moved, 1e-3).seeded(cs),
        Case::at_most(format!("contour.btilde_display.{tag}"), derived, 1e-9).seeded(cs),
        Case::at_most(format!("contour.btilde_printed_display.{tag}"), printed, 1e-9)
            .seeded(cs)
            .flag("printed constants 1/60, 1/20, 3/40, 1/60 against re-derived 1/5, 1/12, 1/8, 1/12"),
    ])
}

fn contour_jobs(seed: u64) -> Vec<Job> {
    let mut jobs: Vec<Job> = (0..5u64)
        .map(|i| {
            let cs = curve_seed(seed, i);
            job("contour.curve", move || contour_curve_cases(i, cs))
        })
        .collect();
    jobs.push(job("contour.homogeneity", move || {
        let cs = curve_seed(seed, 0);
        let (cv, pr) = random_setup(cs);
        let scale = c(0.6, 1.7);
        let a = verify_k_integrals(&cv, &pr, 2).map_err(e)?;
        let b = verify_k_integrals(&cv, &pr.scaled(scale), 2).map_err(e)?;
        let d = a.iter().zip(&b).map(|(x, y)| (y.numeric - x.numeric * scale).norm() / y.numeric.norm()).fold(0.0, f64::max);
        Ok(vec![Case::at_most("contour.homogeneity", d, 1e-10).seeded(cs)])
    }));
    jobs.push(job("contour.weyl", || {
        let mut out = vec![];
        for (rho0, rho0_sq) in [("0.1", 0.01), ("0.05", 0.0025), ("0.01", 1e-4)] {
            let w = weyl_integrals(rho0_sq, 1.0, C_MINIMAL).map_err(e)?;
            out.push(Case::within(format!("contour.weyl_outer.rho0={rho0}"), &[w.outer_quadrature], &[w.outer_oracle], 1e-10));
        }
        let g = weyl_integrals(1e-3, 2.0, C_MINIMAL).map_err(e)?;
        out.push(Case::within("contour.weyl_curvature_total", &[g.curvature_total], &[4.0 * PI], 1e-9));
        Ok(out)
    }));
    jobs.push(job("contour.graphs", || {
        let counts: Vec<usize> = (1..=3).map(|n| admissible_graphs(n).map(|g| g.len())).collect::<Result<_, _>>().map_err(e)?;
        let got: BTreeMap<String, String> = graph_assembly(2).map_err(e)?.into_iter().map(|(k, v)| (monomial_key(&k), v.to_string())).collect();
        let mut want = BTreeMap::new();
        for (c_power, f, r, w) in [(1, vec![(0, 1), (0, 1)], vec![], Ratio::new(1, 32)), (0, vec![(0, 1)], vec![0], Ratio::new(1, 4)), (0, vec![(0, 1)], vec![1], Ratio::new(1, 4)), (0, vec![], vec![0, 1], Ratio::from_integer(1))] {
            want.insert(monomial_key(&GraphMonomial { c_power, f_factors: f, regular: r }), w.to_string());
        }
        Ok(vec![Case::equal("contour.graph_counts", counts, vec![1, 4, 18]), Case::equal("contour.graph_assembly_n2", got, want)])
    }));
    jobs
}

fn monomial_key(m: &GraphMonomial) -> String {
    let f: Vec<String> = m.f_factors.iter().map(|(i, j)| format!("f{i}{j}")).collect();
    let r: Vec<String> = m.regular.iter().map(|v| format!("t{v}")).collect();
    format!("c^{} {} <{}>", m.c_power, f.join(" "), r.join(" "))
}

// ---------------------------------------------------------------- odesys

/// Collision configuration X_2 = 0 with three spectators drawn from the seed.
pub fn spectators(case_seed: u64) -> [Complex64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
    loop {
        let s = [(); 3].map(|_| Complex64::from_polar(rng.gen_range(0.6..1.4), rng.gen_range(0.0..std::f64::consts::TAU)));
        let sep = (0..3).flat_map(|i| (i + 1..3).map(move |j| (i, j))).map(|(i, j)| (s[i] - s[j]).norm()).fold(f64::INFINITY, f64::min);
        if sep > 0.3 {
            return s;
        }
    }
}

fn odesys_jobs(seed: u64) -> Vec<Job> {
    let cm = c(C_MINIMAL, 0.0);
    let cs = seed.wrapping_mul(1000).wrapping_add(500);
    vec![
        job("odesys.quadratic", move || {
            let r = indicial_quadratic(cm);
            let u = determinant_factor_roots();
            Ok(vec![
                Case::within("odesys.indicial.quadratic_roots", &[r[0].re, r[0].im, r[1].re, r[1].im], &[1.1, 0.0, 0.7, 0.0], 1e-14),
                Case::within("odesys.determinant_factor_roots", &[u[1].re, u[0].re], &[STATED_FACTOR_ROOTS[1], STATED_FACTOR_ROOTS[0]], 1e-14)
                    .flag("stated roots 7/10 and 9/10; the factor vanishes at 7/10 and 11/10"),
            ])
        }),
        job("odesys.third", move || {
            let mut rng = ChaCha8Rng::seed_from_u64(cs);
            let mut worst: f64 = 0.0;
            for _ in 0..5 {
                let p3 = c(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
                let u = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                worst = worst.max(third_value_factor_residual(cm, p3, u).norm());
            }
            Ok(vec![
                Case::within("odesys.indicial.third_value", &[third_value()], &[0.7], 1e-14),
                Case::at_most("odesys.indicial.third_value_factorization", worst, 1e-12).seeded(cs),
            ])
        }),
        job("odesys.matrix", move || {
            let sp = spectators(cs);
            let k = CollisionCoefficients::from_configuration(c(1.0, 0.0), c(0.0, 0.0), &sp).map_err(e)?;
            let closed = CollisionCoefficients::p3_closed(c(0.0, 0.0), &sp);
            let a = leading_matrix_5(&k, cm);
            let data = indicial_analysis(&a).map_err(e)?;
            let seven = data.cluster_near(0.7, 1e-8).ok_or("no eigenvalue near 7/10")?;
            let eleven = data.cluster_near(1.1, 1e-8).ok_or("no eigenvalue near 11/10")?;
            let block = a.view((0, 0), (3, 3)).into_owned();
            let r = |m: &DMatrix<Complex64>, l: f64, v: &[Complex64]| eigenvector_lift_residual(m, c(l, 0.0), v);
            let v20 = [c(20.0, 0.0), c(7.0, 0.0), c(0.0, 0.0)];
            Ok(vec![
                Case::at_most("odesys.collision_p3", (k.p3 - closed).norm() / closed.norm(), 1e-10).seeded(cs),
                Case::equal("odesys.indicial.geometric_7_10", seven.geometric, 2).seeded(cs),
                Case::equal("odesys.indicial.algebraic_7_10", seven.algebraic, 3).seeded(cs),
                Case::equal("odesys.indicial.algebraic_11_10", eleven.algebraic, 2).seeded(cs),
                Case::at_most("odesys.indicial.eigen_residual", data.clusters.iter().map(|c| c.max_residual).fold(0.0, f64::max), 1e-10).seeded(cs),
                Case::at_most("odesys.indicial.eigenvector_0_0_1", r(&a, 0.7, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]), 1e-10).seeded(cs),
                Case::at_most("odesys.indicial.block_eigenvector_20_7_0", r(&block, 0.7, &v20), 1e-10).seeded(cs),
                Case::at_most("odesys.indicial.eigenvector_20_7_0", r(&a, 0.7, &v20), 1e-10)
                    .seeded(cs)
                    .flag("(20, 7, 0) does not lift: the lower block is singular at 7/10"),
                Case::at_most("odesys.indicial.block_eigenvector_11_10", r(&block, 1.1, &[c(1.0, 0.0), c(0.55, 0.0), k.p3 * (11.0 / 60.0)]), 1e-10)
                    .seeded(cs),
                Case::at_most("odesys.indicial.block_eigenvector_11_10_printed", r(&block, 1.1, &[c(1.0, 0.0), c(1.1, 0.0), k.p3 * (11.0 / 60.0)]), 1e-10)
                    .seeded(cs)
                    .flag("second entry printed as 11/10; the block gives 11/20"),
            ])
        }),
        job("odesys.rows", move || {
            let sp = spectators(cs);
            let rows = compare_leading_rows(c(1.0, 0.0), c(0.0, 0.0), &sp, cm).map_err(e)?;
            Ok(rows
                .iter()
                .map(|r| {
                    let case = Case::at_most(format!("odesys.leading_row_{}", r.row), r.max_diff, 1e-4).seeded(cs);
                    if r.row >= 4 && case.status == Status::Fail {
                        case.flag("rows 4 and 5 of the printed matrix differ from the limit of the exact system")
                    } else {
                        case
                    }
                })
                .collect())
        }),
        job("odesys.monodromy", move || {
            let m = monodromy_collision(cm, 0.1).map_err(e)?;
            Ok(vec![
                Case::within("odesys.monodromy_phases", &m.phases, &[0.15, 0.55], 1e-6),
                Case::at_most("odesys.monodromy_oracle", m.oracle_diff, 1e-8),
            ])
        }),
        job("odesys.fibonacci", || {
            let counts: Vec<usize> = (3..=7).map(odesys::fibonacci_equation_count).collect();
            Ok(vec![Case::equal("odesys.fibonacci_counts", counts, vec![2, 3, 5, 8, 13])])
        }),
        job("odesys.zero", || {
            let sys = PathSystem::Euler { matrix: DMatrix::zeros(5, 5), center: c(5.0, 0.0) };
            let init = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0), c(0.1, 0.1), c(2.0, -1.0)];
            let tr = integrate_path(&sys, &init, &[c(0.0, 0.0), c(1.0, 1.0), c(2.0, 0.0)], Tolerances::default()).map_err(e)?;
            let drift = tr.points.iter().flat_map(|p| p.state.iter().zip(&init).map(|(a, b)| (a - b).norm())).fold(0.0, f64::max);
            Ok(vec![Case::at_most("odesys.zero_system_constant", drift, 0.0)])
        }),
        job("odesys.degeneration", || {
            let t = c(0.0, 1.5);
            let d = odesys::degeneration_constants(t, t, c(1e-3, 0.0), 30).map_err(e)?;
            let mismatch = (d.h0h0 * d.g0g0 - d.h0g0 * d.g0h0).norm();
            let mut case = Case::at_most("odesys.degeneration_constants", mismatch, 1e-12);
            case.measured = json!({
                "h0h0": cj(d.h0h0), "g0g0": cj(d.g0g0), "h0g0": cj(d.h0g0), "g0h0": cj(d.g0h0),
                "eta_factor": cj(d.eta_factor), "product_mismatch": mismatch,
            });
            Ok(vec![case])
        }),
    ]
}

/// Series used by `qseries --what`; exposed for the command line.
pub fn named_series(what: &str, order: usize) -> Result<Vec<(String, TruncatedSeries)>, String> {
    Ok(match what {
        "eta" => vec![("eta".into(), qspecial::eta(order).map_err(e)?)],
        "theta" => {
            let t = qspecial::theta_constants(order).map_err(e)?;
            vec![("theta2".into(), t.theta2), ("theta3".into(), t.theta3), ("theta4".into(), t.theta4)]
        }
        "eisenstein" => {
            let mut v = vec![];
            for k in [2, 4, 6] {
                v.push((format!("E{k}"), qspecial::eisenstein(k, order).map_err(e)?));
            }
            v
        }
        "rr" => vec![
            ("h0".into(), qspecial::rogers_ramanujan(Character::H0, order).map_err(e)?.series),
            ("g0".into(), qspecial::rogers_ramanujan(Character::G0, order).map_err(e)?.series),
        ],
        other => return Err(format!("unknown series {other:?}; expected eta, theta, eisenstein or rr")),
    })
}
