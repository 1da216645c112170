//! Scenario runner for the John/Löwner position solvers.
//!
//! `logpos solve <scenario.json>... [--out DIR] [--seed N] [--validate-only]`
//!
//! Exit codes: 0 converged and certified, 2 converged but a separating
//! direction was found (solver/certificate disagreement), 3 solver
//! failure, 4 input error.

mod output;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;

use logpos_core::certificate::{certify_solution, VerifyOutcome};
use logpos_core::contact::{flat_zero_check, FlatZero};
use logpos_core::envelope::{log_concave_envelope, InnerBody};
use logpos_core::error::Error as CoreError;
use logpos_core::model::{FnKind, LogConcaveFn, Profile1D};
use logpos_core::search;
use logpos_core::solver::{solve_john, solve_lowner, SolveStatus};

use output::{write_json, write_profile, CertificateOut, ResultOut};
use scenario::{dim_check, Scenario};

#[derive(Parser)]
#[command(
    name = "logpos",
    version,
    about = "Extremal positions of log-concave functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one or more scenario files (sequentially in batch mode).
    Solve {
        /// Scenario JSON paths.
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Output directory (default: $LOGPOS_OUT or the scenario's directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Run the structural checks only; no solve.
        #[arg(long)]
        validate_only: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve {
            scenarios,
            out,
            seed,
            validate_only,
        } => {
            let mut worst = 0u8;
            for path in &scenarios {
                let code = run_one(path, out.as_deref(), seed, validate_only);
                eprintln!("{}: exit {}", path.display(), code);
                worst = worst.max(code);
            }
            ExitCode::from(worst)
        }
    }
}

fn out_dir(scenario_path: &Path, cli_out: Option<&Path>) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("LOGPOS_OUT") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    scenario_path
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn stem_name(path: &Path, chosen: &Option<String>, default_suffix: &str) -> String {
    match chosen {
        Some(name) => name.clone(),
        None => {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("scenario");
            format!("{stem}.{default_suffix}")
        }
    }
}

fn run_one(path: &Path, cli_out: Option<&Path>, seed: Option<u64>, validate_only: bool) -> u8 {
    let sc = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("input error: {e:#}");
            return 4;
        }
    };
    let (f, g) = match build_functions(&sc) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("input error: {e:#}");
            return 4;
        }
    };
    let dir = out_dir(path, cli_out);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("input error: cannot create output directory: {e}");
        return 4;
    }

    let opts = sc.solve_options(seed);
    let validation = validate_report(&sc, &f, &g);
    let validation_path = dir.join(stem_name(path, &sc.outputs.validation, "validation.json"));
    if validate_only {
        if write_json(&validation_path, &validation).is_err() {
            return 4;
        }
        eprintln!("validation written to {}", validation_path.display());
        return 0;
    }

    // structural gate mirroring the solver preconditions
    if sc.problem == "john" {
        match log_concave_envelope(&g) {
            Ok(env) => {
                let origin = DVector::zeros(env.dim);
                if !env.has_bounded_support() || env.psi(&origin).is_infinite() {
                    let _ = write_json(&validation_path, &validation);
                    eprintln!(
                        "input error: inner function fails the structural checks (see validation report)"
                    );
                    return 4;
                }
                if let Some(body) = env.support_body() {
                    if !body.origin_interior(1e-12) {
                        let _ = write_json(&validation_path, &validation);
                        eprintln!("input error: origin is not interior to supp g");
                        return 4;
                    }
                }
            }
            Err(e) => {
                eprintln!("input error: {e}");
                return 4;
            }
        }
    }

    let solved = match sc.problem.as_str() {
        "john" => solve_john(&f, &g, &opts),
        _ => {
            let gf = match &g {
                InnerBody::Function(gf) => gf.clone(),
                InnerBody::Atoms { .. } => {
                    eprintln!("input error: the Löwner problem needs a function for g");
                    return 4;
                }
            };
            solve_lowner(&f, &gf, &opts)
        }
    };
    let res = match solved {
        Ok(r) => r,
        Err(CoreError::InvalidInput(msg)) => {
            eprintln!("input error: {msg}");
            return 4;
        }
        Err(e) => {
            eprintln!("solver failure: {e}");
            return 3;
        }
    };

    let result_path = dir.join(stem_name(path, &sc.outputs.result, "result.json"));
    let result_out = ResultOut::new(&sc.problem, sc.s, sc.fixed_center, &res);
    if write_json(&result_path, &result_out).is_err() {
        return 4;
    }
    if let Some(profile) = &sc.outputs.profile {
        if f.dim <= 2 {
            let _ = write_profile(
                &dir.join(profile),
                &f,
                &res.position,
                opts.margin.tol_contact,
            );
        }
    }
    if res.status != SolveStatus::Converged {
        eprintln!("solver did not converge (status {:?})", res.status);
        return 3;
    }

    let cert_tol = sc.cert_tol(&f);
    let outcome = certify_solution(
        &f,
        Some(&g),
        &res.position,
        sc.s,
        sc.fixed_center,
        &opts.margin,
        cert_tol,
    );
    let cert_path = dir.join(stem_name(path, &sc.outputs.certificate, "certificate.json"));
    match outcome {
        Ok(out) => {
            let _ = write_json(&cert_path, &CertificateOut::from_outcome(&out));
            match out {
                VerifyOutcome::Certificate(_) => 0,
                VerifyOutcome::Separator(_) => {
                    eprintln!("converged position failed certification (separator found)");
                    2
                }
            }
        }
        Err(e) => {
            eprintln!("certification failed: {e}");
            2
        }
    }
}

fn build_functions(sc: &Scenario) -> anyhow::Result<(LogConcaveFn, InnerBody)> {
    let f = sc.f.to_function()?;
    let g = sc.g.to_inner()?;
    dim_check(&f, &g)?;
    Ok((f, g))
}

// ----------------------------------------------------------------------
// validation report
// ----------------------------------------------------------------------

#[derive(Serialize)]
struct FunctionReport {
    proper: bool,
    bounded_support: bool,
    origin_interior: bool,
    max_at_origin: bool,
    smooth: bool,
    witnesses: Vec<(String, Vec<f64>)>,
    decay_envelope: Option<(f64, f64)>,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct FlatZeroReport {
    u: Vec<f64>,
    status: String,
}

#[derive(Serialize)]
struct StarReport {
    star_like: bool,
    worst_margin: f64,
    sufficient_condition: bool,
}

#[derive(Serialize)]
struct PowerHint {
    q: f64,
    target_scalar: f64,
    note: String,
}

#[derive(Serialize)]
struct ValidationOut {
    schema: u32,
    f: FunctionReport,
    g: Option<FunctionReport>,
    g_star_like: Option<StarReport>,
    g_flat_zeros: Vec<FlatZeroReport>,
    power_hint: Option<PowerHint>,
}

fn function_report(f: &LogConcaveFn, quad: &logpos_core::quad::QuadCfg) -> FunctionReport {
    let rep = f.check_assumptions(quad);
    let mut notes = Vec::new();
    let decay = f.decay_envelope().ok();
    if !rep.bounded_support {
        notes.push(match decay {
            Some((theta, nu)) => {
                format!("unbounded support; decay envelope f(x) <= {theta:.6} exp(-{nu} |x|)")
            }
            None => "unbounded support and no decay envelope found".to_string(),
        });
    }
    FunctionReport {
        proper: rep.proper,
        bounded_support: rep.bounded_support,
        origin_interior: rep.origin_interior,
        max_at_origin: rep.max_at_origin,
        smooth: rep.smooth,
        witnesses: rep.witnesses,
        decay_envelope: decay,
        notes,
    }
}

fn validate_report(sc: &Scenario, f: &LogConcaveFn, g: &InnerBody) -> ValidationOut {
    let quad = logpos_core::quad::QuadCfg::default();
    let f_rep = function_report(f, &quad);
    let g_env = log_concave_envelope(g).ok();
    let g_rep = g_env.as_ref().map(|ge| function_report(ge, &quad));

    let mut flat = Vec::new();
    let mut star = None;
    let mut hint = None;
    if let Some(ge) = &g_env {
        let sample = boundary_sample(ge);
        let srep = ge.star_like_check(&sample);
        star = Some(StarReport {
            star_like: srep.star_like,
            worst_margin: srep.worst_margin,
            sufficient_condition: srep.sufficient_condition,
        });
        let anchor = DVector::zeros(ge.dim);
        for u in boundary_points(ge) {
            if ge.value(&u) > 1e-9 {
                continue;
            }
            let status = match flat_zero_check(ge, &u, &anchor) {
                Ok(FlatZero::Flat) => "flat",
                Ok(FlatZero::NotFlat) => "not_flat",
                Err(_) => "inconclusive",
            };
            flat.push(FlatZeroReport {
                u: u.iter().copied().collect(),
                status: status.into(),
            });
        }
        if flat.iter().any(|r| r.status == "flat") {
            // vertical normals at these zeros are dropped by the reduced
            // contact set
            flat.push(FlatZeroReport {
                u: vec![],
                status: "reduced-contact-set rule applies".into(),
            });
        }
        hint = power_hint(ge, sc.s);
    }
    ValidationOut {
        schema: 1,
        f: f_rep,
        g: g_rep,
        g_star_like: star,
        g_flat_zeros: flat,
        power_hint: hint,
    }
}

fn boundary_points(g: &LogConcaveFn) -> Vec<DVector<f64>> {
    let Some(body) = g.support_body() else {
        return vec![];
    };
    match body {
        logpos_core::geom::ConvexBody::Ball(b) => search::sphere_directions(g.dim, 8)
            .into_iter()
            .map(|d| &b.center + &d * b.radius)
            .collect(),
        logpos_core::geom::ConvexBody::Polytope(p) => p.vertices(),
    }
}

fn boundary_sample(g: &LogConcaveFn) -> Vec<DVector<f64>> {
    let mut pts = boundary_points(g);
    for scale in [0.25, 0.5, 0.75, 0.95] {
        let extra: Vec<DVector<f64>> = boundary_points(g).iter().map(|p| p * scale).collect();
        pts.extend(extra);
    }
    pts.push(DVector::zeros(g.dim));
    pts
}

fn power_hint(g: &LogConcaveFn, s: f64) -> Option<PowerHint> {
    let t = match &g.kind {
        FnKind::QConcavePower { exponent } => *exponent,
        FnKind::Radial(Profile1D::NegLogGap { scale }) => *scale,
        _ => return None,
    };
    if t <= 1.0 {
        return None;
    }
    let q = (1.0 / t).min(1.0);
    Some(PowerHint {
        q,
        target_scalar: s / q,
        note: format!(
            "g^q is concave for q = {q}; a power-domain solve targets scalar s/q = {}",
            s / q
        ),
    })
}
