//! Command-line front end: seeded verification sweeps, parameterisation
//! diagnostics, operator dumps and machine-readable reports.
//!
//! Exit codes: 0 all runs pass, 1 verification failure, 2 usage error,
//! 3 internal numeric error (the offending configuration is serialized).

use std::collections::BTreeMap;
use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use zamo_core::elliptic::{complete_k, EllipticContext};
use zamo_core::geometry::{random_prism, random_tetrahedron, SphericalTriangle};
use zamo_core::param::{invert_angles, modulus_from_vertex, round_trip_residual, WeightFactors};
use zamo_core::verify::{
    check_te, check_te2, check_te3, check_tza, ConfigEcho, VerificationReport,
};
use zamo_core::weights::{build_r, build_s};

#[derive(Parser)]
#[command(
    name = "zamo",
    about = "Verification sweeps for the Zamolodchikov model tetrahedron identities",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct SweepArgs {
    /// Base seed; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of runs.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    /// Pass tolerance on the max-abs residual.
    #[arg(long, default_value_t = 1e-10, value_parser = parse_positive)]
    tol: f64,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct ParamArgs {
    /// Elliptic modulus; without it runs cycle through 0, 0.3, 0.6, 0.9.
    #[arg(long)]
    k: Option<f64>,
    /// Override u1 as "re,im".
    #[arg(long, value_parser = parse_complex)]
    u1: Option<Complex64>,
    #[arg(long, value_parser = parse_complex)]
    u2: Option<Complex64>,
    #[arg(long, value_parser = parse_complex)]
    u3: Option<Complex64>,
    #[arg(long, value_parser = parse_complex)]
    u4: Option<Complex64>,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the general tetrahedron identity on seeded random tetrahedra.
    VerifyTe(SweepArgs),
    /// Verify the prismatic identity on seeded random prisms.
    VerifyPrism(SweepArgs),
    /// Verify the static-elliptic identity on sampled or given parameters.
    VerifyStaticElliptic {
        #[command(flatten)]
        sweep: SweepArgs,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Verify the tetrahedral algebra relations.
    VerifyTza {
        #[command(flatten)]
        sweep: SweepArgs,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Run the elliptic kernel self-test battery.
    SelftestElliptic {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Print the vertex operator of a triangle as JSON.
    DumpWeights {
        /// Three angles in radians.
        #[arg(long, num_args = 3, required = true)]
        theta: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Invert the angle-parameter map for one vertex and print diagnostics.
    Invert {
        /// Three angles in radians.
        #[arg(long, num_args = 3, required = true)]
        theta: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .parse()
        .map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("tolerance must be positive".to_string())
    }
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [re] => re
            .trim()
            .parse::<f64>()
            .map(|x| Complex64::new(x, 0.0))
            .map_err(|e| e.to_string()),
        [re, im] => {
            let re = re.trim().parse::<f64>().map_err(|e| e.to_string())?;
            let im = im.trim().parse::<f64>().map_err(|e| e.to_string())?;
            Ok(Complex64::new(re, im))
        }
        _ => Err("expected \"re\" or \"re,im\"".to_string()),
    }
}

#[derive(Serialize)]
struct Summary {
    total: usize,
    pass_count: usize,
    worst_residual: f64,
    worst_seed: Option<u64>,
}

#[derive(Serialize)]
struct RunEntry {
    seed: Option<u64>,
    #[serde(flatten)]
    report: VerificationReport,
}

#[derive(Serialize)]
struct ReportBundle {
    command: String,
    seed: u64,
    count: u64,
    tol: f64,
    runs: Vec<RunEntry>,
    summary: Summary,
}

fn bundle(command: &str, args: &SweepArgs, runs: Vec<RunEntry>) -> ReportBundle {
    let pass_count = runs.iter().filter(|r| r.report.pass).count();
    let (mut worst, mut worst_seed) = (0.0f64, None);
    for r in &runs {
        if r.report.residual_max >= worst {
            worst = r.report.residual_max;
            worst_seed = r.seed;
        }
    }
    let total = runs.len();
    ReportBundle {
        command: command.to_string(),
        seed: args.seed,
        count: args.count,
        tol: args.tol,
        runs,
        summary: Summary {
            total,
            pass_count,
            worst_residual: worst,
            worst_seed,
        },
    }
}

fn write_output(text: String, out: &Option<std::path::PathBuf>) -> Result<(), std::io::Error> {
    match out {
        Some(path) => std::fs::write(path, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.write_all(b"\n")
        }
    }
}

fn emit_bundle(args: &SweepArgs, bundle: &ReportBundle) -> ExitCode {
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(bundle).expect("serialize"),
        Format::Text => {
            let mut s = String::new();
            for run in &bundle.runs {
                let verdict = if run.report.pass { "PASS" } else { "FAIL" };
                let seed = run.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
                s.push_str(&format!(
                    "{} seed={} residual_max={:.3e} tol={:.1e} {}\n",
                    run.report.identity_name,
                    seed,
                    run.report.residual_max,
                    run.report.tol,
                    verdict
                ));
            }
            let worst_seed = bundle
                .summary
                .worst_seed
                .map_or_else(|| "-".to_string(), |s| s.to_string());
            s.push_str(&format!(
                "summary: {}/{} pass, worst residual {:.3e} (seed {})",
                bundle.summary.pass_count,
                bundle.summary.total,
                bundle.summary.worst_residual,
                worst_seed
            ));
            s
        }
    };
    if write_output(text, &args.out).is_err() {
        return ExitCode::from(3);
    }
    if bundle.summary.pass_count == bundle.summary.total {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Exit 3 with the offending configuration serialized for replay.
fn numeric_failure(context: &str, err: &zamo_core::Error, config: serde_json::Value) -> ExitCode {
    let payload = json!({
        "error": err.to_string(),
        "context": context,
        "replay": config,
    });
    eprintln!(
        "{}",
        serde_json::to_string_pretty(&payload).expect("serialize")
    );
    ExitCode::from(3)
}

/// Sampled parameters keep a pairwise separation of 0.04 K: the identities
/// hold up to the degenerate strata u_i = u_j, but the residual floor grows
/// like the inverse square of the separation there.  Explicit overrides are
/// taken verbatim.
fn sampled_u<const N: usize>(
    params: &ParamArgs,
    big_k: f64,
    rng: &mut ChaCha8Rng,
) -> [Complex64; N] {
    let overrides = [params.u1, params.u2, params.u3, params.u4];
    let mut out = [Complex64::new(0.0, 0.0); N];
    for i in 0..N {
        out[i] = overrides[i].unwrap_or_else(|| loop {
            let cand = Complex64::new(rng.gen_range(0.05..0.45) * big_k, 0.0);
            if (0..i).all(|j| (cand - out[j]).norm() >= 0.04 * big_k) {
                break cand;
            }
        });
    }
    out
}

fn modulus_for_run(params: &ParamArgs, i: usize) -> f64 {
    params.k.unwrap_or([0.0, 0.3, 0.6, 0.9][i % 4])
}

/// Independent runs dispatched concurrently, reports gathered in seed
/// order; the first numeric failure (if any) wins.
fn parallel_sweep<F>(args: &SweepArgs, run_one: F) -> Result<Vec<RunEntry>, Box<Failure>>
where
    F: Fn(usize, u64) -> Result<RunEntry, Box<Failure>> + Sync,
{
    let results: Vec<Result<RunEntry, Box<Failure>>> = (0..args.count as usize)
        .into_par_iter()
        .map(|i| run_one(i, args.seed + i as u64))
        .collect();
    results.into_iter().collect()
}

struct Failure {
    context: &'static str,
    error: zamo_core::Error,
    replay: serde_json::Value,
}

impl Failure {
    fn boxed(
        context: &'static str,
        error: zamo_core::Error,
        replay: serde_json::Value,
    ) -> Box<Self> {
        Box::new(Self {
            context,
            error,
            replay,
        })
    }

    fn exit(&self) -> ExitCode {
        numeric_failure(self.context, &self.error, self.replay.clone())
    }
}

fn run_verify_te(args: &SweepArgs) -> ExitCode {
    let runs = parallel_sweep(args, |_, seed| {
        let cfg = random_tetrahedron(seed)
            .map_err(|e| Failure::boxed("random_tetrahedron", e, json!({"seed": seed})))?;
        let report = check_te(&cfg, args.tol).map_err(|e| {
            Failure::boxed("check_te", e, json!({"seed": seed, "theta6": cfg.theta6}))
        })?;
        Ok(RunEntry {
            seed: Some(seed),
            report,
        })
    });
    match runs {
        Ok(runs) => emit_bundle(args, &bundle("verify-te", args, runs)),
        Err(f) => f.exit(),
    }
}

fn run_verify_prism(args: &SweepArgs) -> ExitCode {
    let runs = parallel_sweep(args, |_, seed| {
        let cfg = random_prism(seed)
            .map_err(|e| Failure::boxed("random_prism", e, json!({"seed": seed})))?;
        let report = check_te2(&cfg, args.tol).map_err(|e| {
            Failure::boxed(
                "check_te2",
                e,
                json!({"seed": seed, "theta6": cfg.theta6, "k": cfg.k}),
            )
        })?;
        Ok(RunEntry {
            seed: Some(seed),
            report,
        })
    });
    match runs {
        Ok(runs) => emit_bundle(args, &bundle("verify-prism", args, runs)),
        Err(f) => f.exit(),
    }
}

fn run_verify_te3(args: &SweepArgs, params: &ParamArgs) -> ExitCode {
    let runs = parallel_sweep(args, |i, seed| {
        let k = modulus_for_run(params, i);
        let big_k = complete_k(k).map_err(|e| Failure::boxed("complete_k", e, json!({"k": k})))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: [Complex64; 4] = sampled_u(params, big_k, &mut rng);
        let echo = json!({"seed": seed, "k": k,
            "u": u.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()});
        let report = check_te3(k, u, args.tol).map_err(|e| Failure::boxed("check_te3", e, echo))?;
        Ok(RunEntry {
            seed: Some(seed),
            report,
        })
    });
    match runs {
        Ok(runs) => emit_bundle(args, &bundle("verify-static-elliptic", args, runs)),
        Err(f) => f.exit(),
    }
}

fn run_verify_tza(args: &SweepArgs, params: &ParamArgs) -> ExitCode {
    let runs = parallel_sweep(args, |i, seed| {
        let k = modulus_for_run(params, i);
        let big_k = complete_k(k).map_err(|e| Failure::boxed("complete_k", e, json!({"k": k})))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: [Complex64; 3] = sampled_u(params, big_k, &mut rng);
        let echo = json!({"seed": seed, "k": k,
            "u": u.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()});
        let report = check_tza(k, u, args.tol).map_err(|e| Failure::boxed("check_tza", e, echo))?;
        Ok(RunEntry {
            seed: Some(seed),
            report,
        })
    });
    match runs {
        Ok(runs) => emit_bundle(args, &bundle("verify-tza", args, runs)),
        Err(f) => f.exit(),
    }
}

/// Composite Simpson quadrature of the defining integral of K.
fn quadrature_k(k: f64, n: usize) -> f64 {
    let m = k * k;
    let f = |t: f64| 1.0 / (1.0 - m * t.sin() * t.sin()).sqrt();
    let h = std::f64::consts::FRAC_PI_2 / n as f64;
    let mut acc = f(0.0) + f(std::f64::consts::FRAC_PI_2);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0
}

fn selftest_report(
    name: &str,
    k: f64,
    residual: f64,
    tol: f64,
    n: usize,
    extras: BTreeMap<String, f64>,
) -> VerificationReport {
    VerificationReport {
        identity_name: name.to_string(),
        config: ConfigEcho::Elliptic { k },
        residual_max: residual,
        residual_fro: residual,
        tol,
        pass: residual < tol,
        n_components_checked: n,
        n_identically_zero: 0,
        elapsed_ms: 0.0,
        extras,
    }
}

fn run_selftest(args: &SweepArgs) -> ExitCode {
    let mut runs = Vec::new();
    // Pythagorean identities on a complex grid, four moduli.
    for k in [0.0, 0.3, 0.6, 0.9] {
        let ctx = match EllipticContext::new(k) {
            Ok(c) => c,
            Err(e) => return numeric_failure("EllipticContext", &e, json!({"k": k})),
        };
        let kp = if ctx.big_k_prime.is_finite() {
            ctx.big_k_prime
        } else {
            3.0
        };
        let mut worst = 0.0f64;
        let mut n = 0;
        for i in 0..20 {
            for j in 0..20 {
                let w = Complex64::new(
                    (i as f64 + 0.5) / 20.0 * 2.0 * ctx.big_k,
                    j as f64 / 20.0 * 0.5 * kp,
                );
                match ctx.jacobi(w) {
                    Ok(jj) => {
                        worst = worst
                            .max((jj.sn * jj.sn + jj.cn * jj.cn - 1.0).norm())
                            .max((jj.dn * jj.dn + k * k * jj.sn * jj.sn - 1.0).norm());
                        n += 1;
                    }
                    Err(e) => {
                        return numeric_failure("jacobi", &e, json!({"k": k, "w": [w.re, w.im]}))
                    }
                }
            }
        }
        runs.push(RunEntry {
            seed: None,
            report: selftest_report("jacobi_identities", k, worst, 1e-11, n, BTreeMap::new()),
        });
    }
    // AGM against direct quadrature.
    let mut worst = 0.0f64;
    for i in 0..19 {
        let k = i as f64 * 0.05;
        let agm = match complete_k(k) {
            Ok(v) => v,
            Err(e) => return numeric_failure("complete_k", &e, json!({"k": k})),
        };
        worst = worst.max((agm - quadrature_k(k, 20_000)).abs() / agm);
    }
    runs.push(RunEntry {
        seed: None,
        report: selftest_report("agm_vs_quadrature", 0.0, worst, 1e-12, 19, BTreeMap::new()),
    });
    // Trigonometric degeneration at k = 0.
    let ctx0 = EllipticContext::new(0.0).expect("k = 0");
    let mut worst = 0.0f64;
    for i in 0..20 {
        for j in 0..20 {
            let w = Complex64::new(i as f64 * 0.15 - 1.5, j as f64 * 0.1);
            let jj = ctx0.jacobi(w).expect("no poles at k = 0");
            worst = worst
                .max((jj.sn - w.sin()).norm())
                .max((jj.cn - w.cos()).norm())
                .max((jj.dn - 1.0).norm());
        }
    }
    runs.push(RunEntry {
        seed: None,
        report: selftest_report(
            "trigonometric_limit",
            0.0,
            worst,
            1e-12,
            400,
            BTreeMap::new(),
        ),
    });
    // Complementary modulus: K'(0.6) = K(0.8).
    let ctx = EllipticContext::new(0.6).expect("k = 0.6");
    let resid = (ctx.big_k_prime - complete_k(0.8).expect("k = 0.8")).abs();
    runs.push(RunEntry {
        seed: None,
        report: selftest_report(
            "complementary_modulus",
            0.6,
            resid,
            1e-13,
            1,
            BTreeMap::new(),
        ),
    });

    emit_bundle(args, &bundle("selftest-elliptic", args, runs))
}

fn complex_json(z: Complex64) -> serde_json::Value {
    json!([z.re, z.im])
}

fn matrix_json(m: &zamo_core::mat::CMat) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = (0..m.nrows())
        .map(|r| {
            let row: Vec<serde_json::Value> =
                (0..m.ncols()).map(|c| complex_json(m[[r, c]])).collect();
            json!(row)
        })
        .collect();
    json!(rows)
}

fn run_dump_weights(theta: &[f64], format: Format, out: &Option<std::path::PathBuf>) -> ExitCode {
    let th = [theta[0], theta[1], theta[2]];
    let sum = th.iter().sum::<f64>();
    let static_case = (sum - std::f64::consts::PI).abs() < 1e-10;
    let (op, t, kind) = if static_case {
        match build_s(th) {
            Ok(op) => {
                let t = [
                    0.0,
                    (th[0] / 2.0).tan().sqrt(),
                    (th[1] / 2.0).tan().sqrt(),
                    (th[2] / 2.0).tan().sqrt(),
                ];
                (op, t, "static")
            }
            Err(e) => return numeric_failure("build_s", &e, json!({"theta": th})),
        }
    } else {
        match SphericalTriangle::from_angles(th) {
            Ok(tri) => (build_r(&tri), tri.t, "general"),
            Err(e) => return numeric_failure("solve_triangle", &e, json!({"theta": th})),
        }
    };
    let payload = json!({
        "kind": kind,
        "theta": th,
        "t": t,
        "nonzero_entries": op.nonzero_count(),
        "matrix": matrix_json(&op.mat),
    });
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&payload).expect("serialize"),
        Format::Text => format!(
            "{} vertex operator at theta = ({}, {}, {}), {} nonzero entries",
            kind,
            th[0],
            th[1],
            th[2],
            op.nonzero_count()
        ),
    };
    if write_output(text, out).is_err() {
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}

fn run_invert(theta: &[f64], format: Format, out: &Option<std::path::PathBuf>) -> ExitCode {
    let th = [theta[0], theta[1], theta[2]];
    let tri = match SphericalTriangle::from_angles(th) {
        Ok(t) => t,
        Err(e) => return numeric_failure("solve_triangle", &e, json!({"theta": th})),
    };
    let modulus = match modulus_from_vertex(&tri) {
        Ok(m) => m,
        Err(e) => return numeric_failure("modulus_from_vertex", &e, json!({"theta": th})),
    };
    if modulus.k == 0.0 {
        // trigonometric point: the rectangle degenerates, report k only
        let payload = json!({
            "theta": th,
            "k": 0.0,
            "phi": modulus.phi,
            "note": "k = 0 (right-angle inclination); no elliptic inversion required",
        });
        let text = match format {
            Format::Json => serde_json::to_string_pretty(&payload).expect("serialize"),
            Format::Text => format!("k = 0, phi = {} (trigonometric point)", modulus.phi),
        };
        if write_output(text, out).is_err() {
            return ExitCode::from(3);
        }
        return ExitCode::SUCCESS;
    }
    let pair = match invert_angles(&tri, &modulus) {
        Ok(p) => p,
        Err(e) => {
            return numeric_failure("invert_angles", &e, json!({"theta": th, "k": modulus.k}))
        }
    };
    let rt = match round_trip_residual(&tri, &pair, &modulus.ctx) {
        Ok(r) => r,
        Err(e) => return numeric_failure("round_trip", &e, json!({"theta": th})),
    };
    let wf = match WeightFactors::from_pair(&pair, &modulus.ctx) {
        Ok(w) => w,
        Err(e) => return numeric_failure("weight_factors", &e, json!({"theta": th})),
    };
    let candidates_theta1: Vec<serde_json::Value> = pair
        .candidates
        .iter()
        .map(|e| json!({"exp_i_theta1": [e.re, e.im], "theta1": e.im.atan2(e.re)}))
        .collect();
    let payload = json!({
        "theta": th,
        "k": modulus.k,
        "phi": modulus.phi,
        "w1": complex_json(pair.w1),
        "w2": complex_json(pair.w2),
        "w_minus": complex_json(pair.w_minus),
        "w_plus": complex_json(pair.w_plus),
        "branch": {"w2_shifted_by_minus_2K": pair.shifted, "xi_h_sign": wf.h_sign},
        "theta1_candidates": candidates_theta1,
        "round_trip_residual": rt,
        "xi": complex_json(wf.xi),
        "rho_minus": complex_json(wf.rho_minus),
        "rho_plus": complex_json(wf.rho_plus),
    });
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&payload).expect("serialize"),
        Format::Text => format!(
            "k = {:.12}, phi = {:.12}, w1 = {:.12} + {:.12}i, w2 = {:.12} + {:.12}i, round trip {:.3e}",
            modulus.k, modulus.phi, pair.w1.re, pair.w1.im, pair.w2.re, pair.w2.im, rt
        ),
    };
    if write_output(text, out).is_err() {
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::VerifyTe(args) => run_verify_te(args),
        Command::VerifyPrism(args) => run_verify_prism(args),
        Command::VerifyStaticElliptic { sweep, params } => run_verify_te3(sweep, params),
        Command::VerifyTza { sweep, params } => run_verify_tza(sweep, params),
        Command::SelftestElliptic { sweep } => run_selftest(sweep),
        Command::DumpWeights { theta, format, out } => run_dump_weights(theta, *format, out),
        Command::Invert { theta, format, out } => run_invert(theta, *format, out),
    }
}
