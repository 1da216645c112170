//! Result, certificate and profile emission.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use nalgebra::DVector;
use serde::Serialize;

use logpos_core::certificate::{Certificate, SeparatingDirection, VerifyOutcome};
use logpos_core::model::LogConcaveFn;
use logpos_core::oracle::PsiOracle;
use logpos_core::positions::{Mode, Position};
use logpos_core::solver::{SolveResult, SolveStatus};

use crate::scenario::MatrixSpec;

#[derive(Serialize)]
pub struct PositionOut {
    pub mode: String,
    pub dim: usize,
    pub a_matrix: MatrixSpec,
    pub alpha: f64,
    pub a_vector: Vec<f64>,
}

impl PositionOut {
    pub fn from_position(p: &Position) -> Self {
        PositionOut {
            mode: match p.mode {
                Mode::John => "john".into(),
                Mode::Lowner => "lowner".into(),
            },
            dim: p.dim(),
            a_matrix: MatrixSpec::from_matrix(&p.elem.mat),
            alpha: p.elem.alpha,
            a_vector: p.elem.vec.iter().copied().collect(),
        }
    }
}

#[derive(Serialize)]
pub struct TraceOut {
    pub objective: f64,
    pub violation: f64,
    pub cuts: usize,
}

#[derive(Serialize)]
pub struct ResultOut {
    pub schema: u32,
    pub problem: String,
    pub s: f64,
    pub fixed_center: bool,
    pub status: String,
    pub objective: f64,
    pub base_integral: f64,
    pub final_violation: f64,
    pub position: PositionOut,
    pub trace: Vec<TraceOut>,
    pub notes: Vec<String>,
}

impl ResultOut {
    pub fn new(problem: &str, s: f64, fixed_center: bool, res: &SolveResult) -> Self {
        ResultOut {
            schema: 1,
            problem: problem.into(),
            s,
            fixed_center,
            status: match res.status {
                SolveStatus::Converged => "converged".into(),
                SolveStatus::IterLimit => "iter_limit".into(),
                SolveStatus::Infeasible => "infeasible".into(),
            },
            objective: res.objective,
            base_integral: res.base_integral,
            final_violation: res.final_violation,
            position: PositionOut::from_position(&res.position),
            trace: res
                .trace
                .iter()
                .map(|t| TraceOut {
                    objective: t.objective,
                    violation: t.violation,
                    cuts: t.cuts,
                })
                .collect(),
            notes: res.notes.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct PairOut {
    pub u: Vec<f64>,
    pub mu: f64,
    pub v: Vec<f64>,
    pub nu: f64,
    pub horizontal: bool,
    pub weight: f64,
}

#[derive(Serialize)]
pub struct ResidualsOut {
    pub matrix: f64,
    pub scalar: f64,
    pub translation: f64,
}

#[derive(Serialize)]
pub struct SeparatorOut {
    pub h_matrix: MatrixSpec,
    pub gamma: f64,
    pub h_vector: Vec<f64>,
    pub margin_on_point: f64,
    pub worst_margin_on_operators: f64,
}

#[derive(Serialize)]
pub struct CertificateOut {
    pub schema: u32,
    pub kind: String,
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualsOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum_weights: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_scalar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separator: Option<SeparatorOut>,
}

impl CertificateOut {
    pub fn from_outcome(outcome: &VerifyOutcome) -> Self {
        match outcome {
            VerifyOutcome::Certificate(c) => Self::from_certificate(c),
            VerifyOutcome::Separator(s) => Self::from_separator(s),
        }
    }

    pub fn from_certificate(c: &Certificate) -> Self {
        CertificateOut {
            schema: 1,
            kind: kind_name(c),
            valid: true,
            pairs: Some(
                c.pairs
                    .iter()
                    .zip(&c.weights)
                    .map(|(p, &w)| PairOut {
                        u: p.u.iter().copied().collect(),
                        mu: p.mu,
                        v: p.v.iter().copied().collect(),
                        nu: p.nu,
                        horizontal: p.horizontal,
                        weight: w,
                    })
                    .collect(),
            ),
            residuals: Some(ResidualsOut {
                matrix: c.residuals.matrix,
                scalar: c.residuals.scalar,
                translation: c.residuals.translation,
            }),
            sum_weights: Some(c.sum_weights),
            target_scalar: Some(c.target_scalar),
            separator: None,
        }
    }

    pub fn from_separator(s: &SeparatingDirection) -> Self {
        CertificateOut {
            schema: 1,
            kind: "separator".into(),
            valid: false,
            pairs: None,
            residuals: None,
            sum_weights: None,
            target_scalar: None,
            separator: Some(SeparatorOut {
                h_matrix: MatrixSpec::from_matrix(&s.dir.mat),
                gamma: s.dir.alpha,
                h_vector: s.dir.vec.iter().copied().collect(),
                margin_on_point: s.margin_on_point,
                worst_margin_on_operators: s.worst_margin_on_operators,
            }),
        }
    }
}

fn kind_name(c: &Certificate) -> String {
    use logpos_core::certificate::CertKind::*;
    match c.kind {
        John => "john",
        Lowner => "lowner",
        FixedCenterJohn => "fixed_center_john",
        FixedCenterLowner => "fixed_center_lowner",
        Glmp => "glmp",
    }
    .into()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(value).context("serializing output")?;
    buf.push(b'\n');
    std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

/// Sampled profile of `f`, the position `h` and the tight set, for
/// `d <= 2` (columns `x[,y],f,h,tight`).
pub fn write_profile(
    path: &Path,
    f: &LogConcaveFn,
    pos: &Position,
    tol_contact: f64,
) -> Result<()> {
    let d = f.dim;
    anyhow::ensure!(d <= 2, "profile export supports d <= 2");
    let oracle = pos.as_oracle().map_err(|e| anyhow::anyhow!("{e}"))?;
    let (mut lo, mut hi) = f.support_box();
    let (plo, phi) = oracle.support_box();
    for i in 0..d {
        if !lo[i].is_finite() || !hi[i].is_finite() {
            lo[i] = lo[i].max((-8.0f64).min(plo[i] - 1.0));
            hi[i] = hi[i].min(8.0f64.max(phi[i] + 1.0));
        }
        if plo[i].is_finite() {
            lo[i] = lo[i].min(plo[i]);
            hi[i] = hi[i].max(phi[i]);
        }
    }
    let mut out = std::fs::File::create(path)?;
    if d == 1 {
        writeln!(out, "x,f,h,tight")?;
    } else {
        writeln!(out, "x,y,f,h,tight")?;
    }
    let n = 65usize;
    let idx_max = if d == 1 { n } else { n * n };
    for k in 0..idx_max {
        let x = if d == 1 {
            DVector::from_vec(vec![lo[0] + (hi[0] - lo[0]) * k as f64 / (n - 1) as f64])
        } else {
            let i = k / n;
            let j = k % n;
            DVector::from_vec(vec![
                lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64,
            ])
        };
        let fv = f.value(&x);
        let hv = pos.apply(&x);
        let tight = if fv > 0.0 && hv > 0.0 && (fv.ln() - hv.ln()).abs() <= tol_contact {
            1
        } else {
            0
        };
        if d == 1 {
            writeln!(out, "{},{},{},{}", x[0], fv, hv, tight)?;
        } else {
            writeln!(out, "{},{},{},{},{}", x[0], x[1], fv, hv, tight)?;
        }
    }
    Ok(())
}
