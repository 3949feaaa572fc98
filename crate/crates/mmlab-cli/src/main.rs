use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mmlab::curve::{CurveError, HyperCurve, C_MINIMAL};
use mmlab::odesys::{
    self, determinant_factor_roots, eigenvector_lift_residual, indicial_analysis, indicial_quadratic, integrate_path,
    leading_matrix_5, monodromy_collision, CollisionCoefficients, PathSystem, Tolerances, STATED_FACTOR_ROOTS,
};
use mmlab::report::{self, Suite};
use mmlab::sewing::{self, SewInput};
use num_complex::Complex64;
use serde_json::{json, Value};

/// Numerical checks for the (2,5) minimal model on genus-one and genus-two surfaces.
#[derive(Parser)]
#[command(name = "mmlab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Qseries,
    Sewing,
    Contour,
    Odesys,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Qseries => Suite::Qseries,
            SuiteArg::Sewing => Suite::Sewing,
            SuiteArg::Contour => Suite::Contour,
            SuiteArg::Odesys => Suite::Odesys,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SeriesArg {
    Eta,
    Theta,
    Eisenstein,
    Rr,
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    /// the exact five-component system with one root moving
    Exact,
    /// the leading-order Euler system at the nearest collision
    Leading,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a verification suite
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Ramification points of the sewn genus-two surface
    Sew {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        tau1: Complex64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        tau2: Complex64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        nu: Complex64,
        #[arg(long)]
        json: bool,
    },
    /// q-expansions of the special functions
    Qseries {
        #[arg(long, value_enum)]
        what: SeriesArg,
        #[arg(long, default_value_t = 10)]
        order: usize,
        /// also evaluate at this point of the upper half plane
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        tau: Option<Complex64>,
        #[arg(long)]
        json: bool,
    },
    /// Indicial matrix at the collision of root s with its nearest neighbour
    Indicial {
        /// curve JSON: {"a0": [re, im], "roots": [[re, im], ...]}
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        json: bool,
    },
    /// Integrate a system along a polygonal path and write the trajectory as CSV
    Integrate {
        #[arg(long, value_enum)]
        system: SystemArg,
        /// path JSON: {"curve": ..., "s": 0, "c": [re, im], "init": [5 x [re, im]], "waypoints": [[re, im], ...]}
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Monodromy of the leading system around a collision
    Monodromy {
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        json: bool,
    },
}

/// Exit 2 for bad input, 1 for a computation that did not go through.
enum CliError {
    Usage(String),
    Failed(String),
}

type CliResult = Result<ExitCode, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected re,im, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok(Complex64::new(p(re)?, p(im)?))
}

fn cj(z: Complex64) -> Value {
    json!([z.re, z.im])
}

/// One JSON document per line; a closed pipe downstream is not an error.
fn print_json(v: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string(v).map_err(failed)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(failed(e)),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Verify { suite, seed, json } => verify(suite.into(), seed, json),
        Cmd::Sew { tau1, tau2, nu, json } => sew(tau1, tau2, nu, json),
        Cmd::Qseries { what, order, tau, json } => qseries(what, order, tau, json),
        Cmd::Indicial { config, s, json } => indicial(&config, s, json),
        Cmd::Integrate { system, path, out, json } => integrate(system, &path, &out, json),
        Cmd::Monodromy { radius, json } => monodromy(radius, json),
    };
    match res {
        Ok(code) => code,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn verify(suite: Suite, seed: u64, json: bool) -> CliResult {
    let rep = report::run_suite(suite, seed);
    if json {
        print_json(&rep)?;
    } else {
        print!("{}", rep.table());
    }
    Ok(if rep.any_fail() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn sew(tau1: Complex64, tau2: Complex64, nu: Complex64, json: bool) -> CliResult {
    let inp = SewInput::new(tau1, tau2, nu).map_err(|e| usage(e.to_string()))?;
    if nu.norm() > 0.1 {
        return Err(usage(format!("nu: |nu| = {} exceeds 0.1", nu.norm())));
    }
    let r = sewing::ramification_points(&inp).map_err(failed)?;
    let agreement = sewing::mode_agreement(&inp).map_err(failed)?;
    if json {
        print_json(&json!({
            "X3": cj(r.x3), "X4": cj(r.x4), "X5": cj(r.x5), "b0": cj(r.b0),
            "degenerate": r.degenerate, "mode_agreement": agreement,
        }))?;
    } else {
        for (name, z) in [("X3", r.x3), ("X4", r.x4), ("X5", r.x5), ("b0", r.b0)] {
            println!("{name:<3} {:+.15e} {:+.15e}i", z.re, z.im);
        }
        println!("mode agreement {agreement:e}{}", if r.degenerate { "  (degenerate: nu = 0)" } else { "" });
    }
    Ok(ExitCode::SUCCESS)
}

fn qseries(what: SeriesArg, order: usize, tau: Option<Complex64>, json: bool) -> CliResult {
    let name = match what {
        SeriesArg::Eta => "eta",
        SeriesArg::Theta => "theta",
        SeriesArg::Eisenstein => "eisenstein",
        SeriesArg::Rr => "rr",
    };
    if order == 0 {
        return Err(usage("order: must be at least 1"));
    }
    if let Some(t) = tau {
        if t.im < mmlab::qspecial::TAU_GUARD {
            return Err(usage(format!("tau: Im tau = {} is below {}", t.im, mmlab::qspecial::TAU_GUARD)));
        }
    }
    let list = report::named_series(name, order).map_err(failed)?;
    let mut out = vec![];
    for (label, s) in &list {
        let denom = s.denom();
        let terms: Vec<(i64, Complex64)> =
            s.coeffs().iter().enumerate().map(|(i, z)| (s.min_num() + i as i64, *z)).filter(|(_, z)| z.norm() > 0.0).collect();
        let lead = terms.first().map_or(0, |t| t.0);
        // finest spacing actually used, relative to the leading exponent
        let step = terms.iter().fold(0i64, |g, t| num_integer::gcd(g, t.0 - lead)).max(1);
        let top = (s.truncation_order() * denom).ceil().to_integer();
        let relative: Vec<Value> = (0..)
            .map(|k| lead + k * step)
            .take_while(|n| *n < top)
            .map(|n| cj(s.coeff_num(n)))
            .collect();
        let mut entry = json!({
            "name": label,
            "lead": mmlab::series::Exponent::new(lead, denom).to_string(),
            "step": mmlab::series::Exponent::new(step, denom).to_string(),
            "coefficients": relative,
            "truncation": s.truncation_order().to_string(),
        });
        if let Some(t) = tau {
            entry["value"] = cj(s.eval_tau(t));
        }
        out.push(entry);
    }
    if json {
        print_json(&json!({ "what": name, "order": order, "series": out }))?;
    } else {
        for e in &out {
            let coeffs: Vec<String> = e["coefficients"].as_array().into_iter().flatten().map(|z| format!("{}", z[0])).collect();
            println!("{}: q^{} * ({}) in steps of q^{}", e["name"].as_str().unwrap_or(""), e["lead"].as_str().unwrap_or(""), coeffs.join(", "), e["step"].as_str().unwrap_or(""));
            if let Some(v) = e.get("value") {
                println!("  value {v}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn complex_field(v: &Value, field: &str) -> Result<Complex64, CliError> {
    let pair = v.get(field).ok_or_else(|| usage(format!("{field}: missing")))?;
    complex_value(pair).ok_or_else(|| usage(format!("{field}: expected [re, im]")))
}

fn complex_value(v: &Value) -> Option<Complex64> {
    match v.as_array()?.as_slice() {
        [re, im] => Some(Complex64::new(re.as_f64()?, im.as_f64()?)),
        _ => None,
    }
}

fn complex_list(v: &Value, field: &str) -> Result<Vec<Complex64>, CliError> {
    let arr = v.get(field).and_then(Value::as_array).ok_or_else(|| usage(format!("{field}: missing or not a list")))?;
    arr.iter()
        .enumerate()
        .map(|(i, z)| complex_value(z).ok_or_else(|| usage(format!("{field}[{i}]: expected [re, im]"))))
        .collect()
}

fn curve_from(v: &Value, prefix: &str) -> Result<HyperCurve, CliError> {
    let named = |f: &str| if prefix.is_empty() { f.to_string() } else { format!("{prefix}.{f}") };
    let obj = if prefix.is_empty() { v } else { v.get(prefix).ok_or_else(|| usage(format!("{prefix}: missing")))? };
    let a0 = complex_field(obj, "a0").map_err(|e| rename(e, &named("a0")))?;
    let roots = complex_list(obj, "roots").map_err(|e| rename(e, &named("roots")))?;
    if roots.len() != 5 {
        return Err(usage(format!("{}: need 5 roots for a quintic, got {}", named("roots"), roots.len())));
    }
    HyperCurve::new(a0, roots).map_err(|e| match e {
        CurveError::ZeroLeading => usage(format!("{}: {e}", named("a0"))),
        other => usage(format!("{}: {other}", named("roots"))),
    })
}

fn rename(e: CliError, full: &str) -> CliError {
    match e {
        CliError::Usage(m) => match m.split_once(':') {
            Some((_, rest)) => usage(format!("{full}:{rest}")),
            None => usage(m),
        },
        other => other,
    }
}

/// Index of the root nearest to root s, and the remaining three.
fn collision_partner(curve: &HyperCurve, s: usize) -> (usize, [Complex64; 3]) {
    let roots = curve.roots();
    let partner = (0..roots.len())
        .filter(|&i| i != s)
        .min_by(|&i, &j| (roots[i] - roots[s]).norm().total_cmp(&(roots[j] - roots[s]).norm()))
        .expect("quintic has other roots");
    let rest: Vec<Complex64> = (0..roots.len()).filter(|&i| i != s && i != partner).map(|i| roots[i]).collect();
    (partner, [rest[0], rest[1], rest[2]])
}

fn indicial(config: &Path, s: usize, json: bool) -> CliResult {
    let v = read_json(config)?;
    let curve = curve_from(&v, "")?;
    if s >= 5 {
        return Err(usage(format!("s: root index {s} out of range 0..5")));
    }
    let c = Complex64::new(C_MINIMAL, 0.0);
    let (partner, spectators) = collision_partner(&curve, s);
    let k = CollisionCoefficients::from_configuration(curve.a0(), curve.roots()[partner], &spectators).map_err(failed)?;
    let a = leading_matrix_5(&k, c);
    let data = indicial_analysis(&a).map_err(failed)?;
    let q = indicial_quadratic(c);
    let f = determinant_factor_roots();
    let lift = eigenvector_lift_residual(&a, Complex64::new(0.7, 0.0), &[Complex64::new(20.0, 0.0), Complex64::new(7.0, 0.0), Complex64::new(0.0, 0.0)]);
    let out = json!({
        "s": s,
        "partner": partner,
        "collision_coefficients": k,
        "quadratic_roots": [cj(q[0]), cj(q[1])],
        "third_value": odesys::third_value(),
        "determinant_factor_roots": [cj(f[0]), cj(f[1])],
        "stated_factor_roots": STATED_FACTOR_ROOTS,
        "factor_roots_flagged": (f[0].re - STATED_FACTOR_ROOTS[0]).abs() > 1e-12,
        "lift_residual_20_7_0": lift,
        "indicial": data,
    });
    if json {
        print_json(&out)?;
    } else {
        println!("collision of root {s} with root {partner}");
        for cl in &data.clusters {
            println!("  eigenvalue {:+.12} {:+.3e}i  algebraic {}  geometric {}", cl.value.re, cl.value.im, cl.algebraic, cl.geometric);
        }
        println!("  determinant factor roots {:.12}, {:.12} (stated {:?})", f[0].re, f[1].re, STATED_FACTOR_ROOTS);
        println!("  lift residual of (20, 7, 0) {lift:e}");
    }
    Ok(ExitCode::SUCCESS)
}

fn integrate(system: SystemArg, path: &Path, out: &Path, json: bool) -> CliResult {
    let v = read_json(path)?;
    let curve = curve_from(&v, "curve")?;
    let s = v.get("s").and_then(Value::as_u64).ok_or_else(|| usage("s: missing or not a nonnegative integer"))? as usize;
    if s >= 5 {
        return Err(usage(format!("s: root index {s} out of range 0..5")));
    }
    let c = match v.get("c") {
        Some(_) => complex_field(&v, "c")?,
        None => Complex64::new(C_MINIMAL, 0.0),
    };
    let init = complex_list(&v, "init")?;
    if init.len() != 5 {
        return Err(usage(format!("init: need 5 entries, got {}", init.len())));
    }
    let waypoints = complex_list(&v, "waypoints")?;
    if waypoints.len() < 2 {
        return Err(usage("waypoints: need at least two"));
    }
    let mut tol = Tolerances::default();
    for (field, slot) in [("rtol", &mut tol.rtol), ("atol", &mut tol.atol)] {
        if let Some(x) = v.get(field) {
            *slot = x.as_f64().filter(|t| *t > 0.0).ok_or_else(|| usage(format!("{field}: expected a positive number")))?;
        }
    }
    let sys = match system {
        SystemArg::Exact => PathSystem::Exact { curve: curve.clone(), s, c },
        SystemArg::Leading => {
            let (partner, spectators) = collision_partner(&curve, s);
            let center = curve.roots()[partner];
            let k = CollisionCoefficients::from_configuration(curve.a0(), center, &spectators).map_err(failed)?;
            PathSystem::Euler { matrix: leading_matrix_5(&k, c), center }
        }
    };
    let tr = integrate_path(&sys, &init, &waypoints, tol).map_err(|e| match e {
        odesys::OdeError::PathTooClose { .. } => usage(format!("waypoints: {e}")),
        other => failed(other),
    })?;
    let mut w = csv::Writer::from_path(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    let mut header = vec!["step".to_string(), "re_X".into(), "im_X".into()];
    for i in 0..5 {
        header.push(format!("re_y{i}"));
        header.push(format!("im_y{i}"));
    }
    w.write_record(&header).map_err(failed)?;
    for p in &tr.points {
        let mut row = vec![p.step.to_string(), p.x.re.to_string(), p.x.im.to_string()];
        for z in &p.state {
            row.push(z.re.to_string());
            row.push(z.im.to_string());
        }
        w.write_record(&row).map_err(failed)?;
    }
    w.flush().map_err(failed)?;
    if json {
        print_json(&json!({
            "out": out.display().to_string(),
            "rows": tr.points.len(),
            "accepted_steps": tr.accepted_steps,
            "end_state": tr.end_state().iter().map(|z| cj(*z)).collect::<Vec<_>>(),
        }))?;
    } else {
        println!("wrote {} rows to {} ({} accepted steps)", tr.points.len(), out.display(), tr.accepted_steps);
    }
    Ok(ExitCode::SUCCESS)
}

fn monodromy(radius: f64, json: bool) -> CliResult {
    if !(radius > 0.0 && radius < 0.5) {
        return Err(usage(format!("radius: {radius} must lie in (0, 0.5)")));
    }
    let rep = monodromy_collision(Complex64::new(C_MINIMAL, 0.0), radius).map_err(failed)?;
    if json {
        print_json(&rep)?;
    } else {
        println!("phases {:?}", rep.phases);
        println!("moduli {:?}", rep.moduli);
        println!("distance to exp(2 pi i E) {:e}", rep.oracle_diff);
    }
    Ok(ExitCode::SUCCESS)
}
