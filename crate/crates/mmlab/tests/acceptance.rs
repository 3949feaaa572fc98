//! Thirteen acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria 6, 7 and 9 are expected to fail: the stated scaling, the stated
//! fourth coefficient and the stated eigenvector do not hold numerically.
//! The test passes when exactly that set fails.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};
use std::time::Instant;

use mmlab::contour::{btilde, k_integral_numeric, verify_k_integrals, weyl_integrals};
use mmlab::curve::{admissible_graphs, graph_assembly, CorrelatorParams, GraphMonomial, HyperCurve, C_MINIMAL};
use mmlab::odesys::{
    degeneration_constants, determinant_factor_roots, eigenvector_lift_residual, fibonacci_equation_count, indicial_analysis,
    indicial_quadratic, leading_matrix_5, monodromy_collision, third_value, third_value_factor_residual, CollisionCoefficients,
};
use mmlab::qspecial::{self, Character, ModularPoint};
use mmlab::series::{order_fit, Exponent};
use mmlab::sewing::{self, AgcInput, SewInput, ThetaPair, RAMIFICATION_PAIRS};
use num_complex::Complex64;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// tolerances
const SERIES_TOL: f64 = 1e-9;
const HALF_PERIOD_TOL: f64 = 1e-12;
const SERRE_TOL: f64 = 1e-8;
const LATTICE_TOL: f64 = 1e-6;
const THETA_SLOPE_MIN: f64 = 7.0;
const CLAIM_SLOPE: f64 = 2.0;
const CLAIM_SLOPE_TOL: f64 = 0.2;
const AGC_SLOPE_MIN: f64 = 6.0;
const LFT_SLOPE_MIN: f64 = 5.0;
const B0_TOL: f64 = 1e-9;
const K_REL_TOL: f64 = 1e-8;
const B11_SHIFT_TOL: f64 = 1e-10;
const K2_MOVE_MIN: f64 = 1e-3;
const ROOT_TOL: f64 = 1e-14;
const EIGVEC_TOL: f64 = 1e-10;
const PHASE_TOL: f64 = 1e-6;
const EXPM_TOL: f64 = 1e-8;
const WEYL_TOL: f64 = 1e-10;

const CURVE_SEED: u64 = 2024;
const EXPECTED_FAILURES: [usize; 3] = [6, 7, 9];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pt(re: f64, im: f64) -> ModularPoint {
    ModularPoint::new(c(re, im)).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn slope(samples: &[(f64, f64)]) -> f64 {
    order_fit(samples).unwrap().slope
}

/// Sum of four squares representation counts r4(m), m < len.
fn r4(len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let b = (len as f64).sqrt() as i64 + 1;
    for a in -b..=b {
        for bb in -b..=b {
            for cc in -b..=b {
                for d in -b..=b {
                    let m = (a * a + bb * bb + cc * cc + d * d) as usize;
                    if m < len {
                        out[m] += 1.0;
                    }
                }
            }
        }
    }
    out
}

fn jacobi() -> Outcome {
    let t = qspecial::theta_constants(40).unwrap();
    let t3_4 = t.theta3.powi(4).unwrap();
    let r = &(&t.theta2.powi(4).unwrap() + &t.theta4.powi(4).unwrap()) - &t3_4;
    let residual = r.max_abs_coeff();
    let through = r.truncation_order() >= Exponent::from_integer(41);
    // theta3 = sum q^(n^2/2), so theta3^4 at q^(m/2) counts four-square representations of m
    let counts = r4(81);
    let oracle = (0..81).map(|m| (t3_4.coefficient(Exponent::new(m as i64, 2)).unwrap().re - counts[m]).abs()).fold(0.0, f64::max);
    outcome(
        residual < SERIES_TOL && through && oracle < SERIES_TOL,
        format!("theta2^4 + theta4^4 - theta3^4 max coeff {residual:.1e} through q^40; r4 oracle {oracle:.1e}"),
    )
}

/// Partitions of n into parts congruent to +-2 mod 5, n <= max.
fn partitions_2_3_mod_5(max: usize) -> Vec<f64> {
    let mut p = vec![0.0; max + 1];
    p[0] = 1.0;
    for part in (1..=max).filter(|k| k % 5 == 2 || k % 5 == 3) {
        for n in part..=max {
            p[n] += p[n - part];
        }
    }
    p
}

fn rogers_ramanujan() -> Outcome {
    let mut worst: f64 = 0.0;
    for v in [Character::H0, Character::G0] {
        let a = qspecial::rogers_ramanujan(v, 30).unwrap().series;
        let b = qspecial::rogers_ramanujan_product(v, 30).unwrap().series;
        worst = worst.max((&a - &b).max_abs_coeff());
    }
    let h = qspecial::rogers_ramanujan(Character::H0, 30).unwrap().series.shift(-Character::H0.lead());
    let got: Vec<f64> = (0..=30).map(|n| h.coefficient(Exponent::from_integer(n)).unwrap().re).collect();
    let oracle = partitions_2_3_mod_5(30);
    let count_err = got.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let head_ok = got[..7] == [1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0];
    outcome(
        worst < SERIES_TOL && count_err < SERIES_TOL && head_ok,
        format!("sum - product {worst:.1e}; h0 vs partition count {count_err:.1e}; h0 head {:?}", &got[..7]),
    )
}

fn character_ode() -> Outcome {
    let mut worst: f64 = 0.0;
    for v in [Character::H0, Character::G0] {
        let f = qspecial::rogers_ramanujan(v, 30).unwrap().series;
        worst = worst.max(qspecial::character_ode_residual(&f).max_abs_coeff());
    }
    outcome(worst < SERIES_TOL, format!("max residual coefficient {worst:.1e} through q^30"))
}

/// Weierstrass function on 2 pi i (Z + tau Z) by a square lattice sum with Richardson in the radius.
fn wp_lattice(z: Complex64, tau: Complex64, radius: i64) -> Complex64 {
    let partial = |r: i64| {
        let mut s = 1.0 / (z * z);
        for m in -r..=r {
            for n in -r..=r {
                if m == 0 && n == 0 {
                    continue;
                }
                let w = c(0.0, TAU) * (c(m as f64, 0.0) + tau * n as f64);
                s += 1.0 / ((z - w) * (z - w)) - 1.0 / (w * w);
            }
        }
        s
    };
    (partial(2 * radius) * 4.0 - partial(radius)) / 3.0
}

fn half_periods() -> Outcome {
    let mut ident: f64 = 0.0;
    let mut serre: f64 = 0.0;
    let mut cubic: f64 = 0.0;
    let mut lattice: f64 = 0.0;
    for p in [pt(0.0, 1.5), pt(0.3, 1.2)] {
        let x = qspecial::weierstrass_e_values(p).unwrap();
        let t = qspecial::theta_values(p);
        ident = ident
            .max((x.xi0 + x.xi1 + x.xi2).norm())
            .max((x.xi1 - x.xi0 - t.theta2.powi(4) / 4.0).norm())
            .max((x.xi0 - x.xi2 - t.theta4.powi(4) / 4.0).norm());
        let s = qspecial::serre_e_values(p).unwrap();
        serre = s.as_array().iter().zip(x.as_array()).map(|(a, b)| (a - b).norm()).fold(serre, f64::max);
        cubic = qspecial::cubic_residuals(p).unwrap().rescaled.iter().copied().fold(cubic, f64::max);
        let ipi = c(0.0, PI);
        let tau = p.tau();
        for (z, xi) in [(ipi, x.xi2), (ipi * tau, x.xi1), (ipi * (1.0 + tau), x.xi0)] {
            lattice = lattice.max((wp_lattice(z, tau, 30) - xi).norm());
        }
    }
    outcome(
        ident < HALF_PERIOD_TOL && serre < SERRE_TOL && cubic < SERRE_TOL && lattice < LATTICE_TOL,
        format!("identities {ident:.1e}; Serre {serre:.1e}; cubic {cubic:.1e}; lattice-sum oracle {lattice:.1e}"),
    )
}

fn sewing_slopes() -> Outcome {
    let equal = |nu: f64| SewInput::new(c(0.0, 1.5), c(0.0, 1.5), c(nu, 0.0)).unwrap();
    let theta: Vec<(f64, f64)> = [1e-2, 3e-3, 1e-3]
        .iter()
        .map(|&nu| {
            let worst = RAMIFICATION_PAIRS
                .iter()
                .map(|&(i, j)| sewing::theta_mode_residual(&equal(nu), ThetaPair::new(i, j).unwrap(), 6).unwrap())
                .fold(0.0, f64::max);
            (nu, worst)
        })
        .collect();
    let direct = slope(&theta);
    let claims: Vec<sewing::SewingClaims> = [2e-2, 1e-2, 5e-3]
        .iter()
        .map(|&nu| sewing::sewing_claims(&SewInput::new(c(0.0, 1.5), c(0.1, 1.3), c(nu, 0.0)).unwrap()).unwrap())
        .collect();
    let fit = |f: &dyn Fn(&sewing::SewingClaims) -> f64| slope(&claims.iter().map(|cl| (cl.nu, f(cl))).collect::<Vec<_>>());
    let xk = [0, 1, 2].map(|k| fit(&|cl| cl.x_minus_b0[k]));
    let quot = [fit(&|cl| cl.quotient_dev), fit(&|cl| cl.difference_quotient_dev), fit(&|cl| cl.x3x5_derived_dev)];
    let lead = fit(&|cl| cl.x3_minus_x4_dev);
    let near = |s: f64| (s - CLAIM_SLOPE).abs() <= CLAIM_SLOPE_TOL;
    outcome(
        direct >= THETA_SLOPE_MIN && xk.iter().all(|s| near(*s)) && quot.iter().all(|s| near(*s)) && near(lead),
        format!("direct/expansion slope {direct:.2}; X_k - b0 slopes {xk:.2?}; quotient slopes {quot:.2?}; X3 - X4 leading {lead:.2}"),
    )
}

fn agc_and_lft() -> Outcome {
    let eps = [0.1, 0.05, 0.025];
    let inp = |e: f64| AgcInput::new(c(0.0, 1.5), c(0.1, 1.4), e).unwrap();
    let agc = slope(&eps.iter().map(|&e| (e, sewing::agc_residual(&inp(e)).unwrap())).collect::<Vec<_>>());
    let lft = slope(
        &eps.iter()
            .map(|&e| (e, sewing::lft_image_check(&inp(e)).unwrap().deviations.iter().copied().fold(0.0, f64::max)))
            .collect::<Vec<_>>(),
    );
    outcome(
        agc >= AGC_SLOPE_MIN && lft >= LFT_SLOPE_MIN,
        format!("coordinate residual slope {agc:.2} (need >= {AGC_SLOPE_MIN}); image deviation slope {lft:.2} (need >= {LFT_SLOPE_MIN})"),
    )
}

/// theta2^4/theta3^4 in powers of s = q^(1/2), by plain power-series arithmetic on counts.
fn b0_oracle(terms: usize) -> Vec<f64> {
    // theta3 = sum s^(n^2), theta2 = 2 s^(1/4) sum_{n>=0} s^(n(n+1)); the s^1 prefactor of theta2^4 is split off
    let mut t3 = vec![0.0; terms + 1];
    let mut t2 = vec![0.0; terms + 1];
    for n in -10i64..=10 {
        let k = (n * n) as usize;
        if k <= terms {
            t3[k] += 1.0;
        }
        if n >= 0 && ((n * (n + 1)) as usize) <= terms {
            t2[(n * (n + 1)) as usize] += 2.0;
        }
    }
    let mul = |a: &[f64], b: &[f64]| {
        let mut out = vec![0.0; terms + 1];
        for i in 0..=terms {
            for j in 0..=terms - i {
                out[i + j] += a[i] * b[j];
            }
        }
        out
    };
    let p4 = |a: &[f64]| mul(&mul(a, a), &mul(a, a));
    let (num, den) = (p4(&t2), p4(&t3));
    let mut q = vec![0.0; terms + 1];
    for n in 0..=terms {
        let acc: f64 = (1..=n).map(|k| den[k] * q[n - k]).sum();
        q[n] = (num[n] - acc) / den[0];
    }
    q
}

fn b0_coefficients() -> Outcome {
    let th = qspecial::theta_constants(4).unwrap();
    let ratio = th.theta2.powi(4).unwrap().div(&th.theta3.powi(4).unwrap()).unwrap();
    let got: Vec<f64> = (1..=4).map(|n| ratio.coefficient(Exponent::new(n, 2)).unwrap().re).collect();
    let oracle = b0_oracle(3);
    let agree = got.iter().zip(&oracle).all(|(a, b)| (a - b).abs() < B0_TOL);
    let printed = [16.0, -128.0, 704.0, -1024.0];
    let matches = got.iter().zip(&printed).all(|(a, b)| (a - b).abs() < B0_TOL);
    outcome(
        agree && matches,
        format!("computed {got:?} (independent oracle {oracle:?}) against printed {printed:?}"),
    )
}

fn contour_integrals() -> Outcome {
    let mut rel: f64 = 0.0;
    let mut shift: f64 = 0.0;
    let mut moved = f64::INFINITY;
    for i in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(CURVE_SEED + i);
        let cv = HyperCurve::random_quintic(&mut rng);
        let pr = CorrelatorParams::random(&cv, &mut rng, c(C_MINIMAL, 0.0));
        let mut shifted = pr.clone();
        shifted.b11 += 1.0;
        for s in 0..5 {
            for r in verify_k_integrals(&cv, &pr, s).unwrap() {
                rel = rel.max(r.rel_err);
                let a = k_integral_numeric(&cv, &shifted, s, r.k).unwrap().value;
                shift = shift.max((a - r.numeric).norm());
            }
            let b0 = btilde(&cv, &pr, s).unwrap().numeric.value;
            let b1 = btilde(&cv, &shifted, s).unwrap().numeric.value;
            moved = moved.min((b1 - b0).norm());
        }
    }
    outcome(
        rel < K_REL_TOL && shift < B11_SHIFT_TOL && moved > K2_MOVE_MIN,
        format!("k = 0, 1, 3 max rel err {rel:.1e} on 5 curves; B11 shift moves them by {shift:.1e}; k = 2 moves by >= {moved:.3}"),
    )
}

fn indicial() -> Outcome {
    let cm = c(C_MINIMAL, 0.0);
    let [u1, u2] = indicial_quadratic(cm);
    let roots_ok = (u1 - 1.1).norm() < ROOT_TOL && (u2 - 0.7).norm() < ROOT_TOL;
    // quadratic formula in the test, independent of the library
    let disc: f64 = 1.8f64 * 1.8 + 4.0 * 7.0 * C_MINIMAL / 40.0;
    let oracle = [(1.8 + disc.sqrt()) / 2.0, (1.8 - disc.sqrt()) / 2.0];
    let oracle_ok = (u1.re - oracle[0]).abs() < ROOT_TOL && (u2.re - oracle[1]).abs() < ROOT_TOL;
    let mut rng = ChaCha8Rng::seed_from_u64(CURVE_SEED);
    let factor = (0..5)
        .map(|_| {
            let p3 = c(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let u = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            third_value_factor_residual(cm, p3, u).norm()
        })
        .fold(0.0, f64::max);
    let third_ok = third_value() == 0.7 && factor < 1e-12;
    let spectators = [c(1.0, 0.5), c(-1.2, 0.3), c(0.4, -1.1)];
    let k = CollisionCoefficients::from_configuration(c(1.0, 0.0), c(0.0, 0.0), &spectators).unwrap();
    let a = leading_matrix_5(&k, cm);
    let data = indicial_analysis(&a).unwrap();
    let geometric = data.cluster_near(0.7, 1e-8).map_or(0, |cl| cl.geometric);
    let lift = eigenvector_lift_residual(&a, c(0.7, 0.0), &[c(20.0, 0.0), c(7.0, 0.0), c(0.0, 0.0)]);
    let [f1, f2] = determinant_factor_roots();
    let factor_roots = [f2.re, f1.re];
    let factor_ok = (factor_roots[0] - 0.7).abs() < ROOT_TOL && (factor_roots[1] - 1.1).abs() < ROOT_TOL;
    outcome(
        roots_ok && oracle_ok && third_ok && geometric == 2 && lift < EIGVEC_TOL && factor_ok,
        format!(
            "roots {:.15}, {:.15}; third value {}; 7/10 geometric multiplicity {geometric}; (20,7,0,.,.) residual {lift:.2e}; factor roots {factor_roots:?} (flagged: stated 7/10, 9/10)",
            u1.re, u2.re, third_value()
        ),
    )
}

fn monodromy() -> Outcome {
    let cm = c(C_MINIMAL, 0.0);
    let rep = monodromy_collision(cm, 0.1).unwrap();
    // exponents u = ubar + c/8 from the quadratic, computed here
    let disc: f64 = 1.8f64 * 1.8 + 4.0 * 7.0 * C_MINIMAL / 40.0;
    let mut want: Vec<f64> =
        [(1.8 + disc.sqrt()) / 2.0, (1.8 - disc.sqrt()) / 2.0].iter().map(|u| (u + C_MINIMAL / 8.0).rem_euclid(1.0)).collect();
    want.sort_by(f64::total_cmp);
    let phase_err = rep.phases.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let stated_err = rep.phases.iter().zip(&[0.15, 0.55]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(
        phase_err < PHASE_TOL && stated_err < PHASE_TOL && rep.oracle_diff < EXPM_TOL,
        format!("phases {:?}, off by {stated_err:.1e}; distance to exp(2 pi i E) {:.1e}", rep.phases, rep.oracle_diff),
    )
}

fn fibonacci() -> Outcome {
    let counts: Vec<usize> = (3..=7).map(fibonacci_equation_count).collect();
    let mut fib = vec![1usize, 2];
    while fib.len() < 6 {
        fib.push(fib[fib.len() - 1] + fib[fib.len() - 2]);
    }
    outcome(counts == vec![2, 3, 5, 8, 13] && counts == fib[1..], format!("counts for n = 3..7: {counts:?}"))
}

fn weyl() -> Outcome {
    let mut worst: f64 = 0.0;
    for rho0 in [0.1f64, 0.07, 0.03, 0.01] {
        let rho0_sq = rho0 * rho0;
        let w = weyl_integrals(rho0_sq.min(0.01), 1.0, C_MINIMAL).unwrap();
        let r2 = w.rho0_sq;
        let oracle = (1.0 + 2.0 * r2) / (2.0 * (1.0 + r2).powi(2));
        worst = worst.max((w.outer_quadrature - oracle).abs());
    }
    outcome(worst < WEYL_TOL, format!("max |quadrature - (1+2r^2)/(2(1+r^2)^2)| = {worst:.1e} for rho0 <= 0.1"))
}

fn brute_force_count(n: usize) -> usize {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    (0u32..1 << pairs.len())
        .filter(|mask| {
            let es: Vec<_> = pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, e)| *e).collect();
            (0..n).all(|v| es.iter().filter(|e| e.0 == v).count() <= 1 && es.iter().filter(|e| e.1 == v).count() <= 1)
        })
        .count()
}

fn graphs() -> Outcome {
    let counts: Vec<usize> = (1..=3).map(|n| admissible_graphs(n).unwrap().len()).collect();
    let brute: Vec<usize> = (1..=3).map(brute_force_count).collect();
    let mut want = BTreeMap::new();
    want.insert(GraphMonomial { c_power: 1, f_factors: vec![(0, 1), (0, 1)], regular: vec![] }, Ratio::new(1, 32));
    want.insert(GraphMonomial { c_power: 0, f_factors: vec![(0, 1)], regular: vec![0] }, Ratio::new(1, 4));
    want.insert(GraphMonomial { c_power: 0, f_factors: vec![(0, 1)], regular: vec![1] }, Ratio::new(1, 4));
    want.insert(GraphMonomial { c_power: 0, f_factors: vec![], regular: vec![0, 1] }, Ratio::from_integer(1));
    let assembly_ok = graph_assembly(2).unwrap() == want;
    outcome(
        counts == vec![1, 4, 18] && counts == brute && assembly_ok,
        format!("counts {counts:?}, brute force {brute:?}; N = 2 assembly exact: {assembly_ok}"),
    )
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let criteria: [(usize, &str, fn() -> Outcome); 13] = [
        (1, "Jacobi identity", jacobi),
        (2, "Rogers-Ramanujan sum = product", rogers_ramanujan),
        (3, "character ODE", character_ode),
        (4, "half-period identities", half_periods),
        (5, "sewing slopes", sewing_slopes),
        (6, "almost-global coordinates", agc_and_lft),
        (7, "b0 expansion coefficients", b0_coefficients),
        (8, "contour integrals", contour_integrals),
        (9, "indicial analysis", indicial),
        (10, "collision monodromy", monodromy),
        (11, "Fibonacci equation counts", fibonacci),
        (12, "Weyl quadrature", weyl),
        (13, "graph assembly", graphs),
    ];
    let mut failed = BTreeSet::new();
    for (n, name, run) in criteria {
        let o = run();
        println!("criterion {n:>2} {}  {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.insert(n);
        }
    }
    let t = c(0.0, 1.5);
    let d = degeneration_constants(t, t, c(1e-3, 0.0), 30).unwrap();
    println!(
        "degeneration constants at tau1 = tau2 = 1.5i, eps = 1e-3: h0h0 {:.12} g0g0 {:.12} h0g0 {:.12} g0h0 {:.12} eps^(-1/5) eta^(-2/5) eta^(-2/5) {:.12}",
        d.h0h0.re, d.g0g0.re, d.h0g0.re, d.g0h0.re, d.eta_factor.re
    );
    let elapsed = start.elapsed().as_secs_f64();
    println!("{} of 13 criteria pass in {elapsed:.1} s; failing {failed:?}, expected failing {EXPECTED_FAILURES:?}", 13 - failed.len());
    assert_eq!(failed, BTreeSet::from(EXPECTED_FAILURES));
}
