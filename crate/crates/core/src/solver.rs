//! Cutting-plane exchange solvers for the John and Löwner problems.
//!
//! Both problems are convex semi-infinite programs over `(A, a, t)` with
//! `A` symmetric positive definite:
//!
//! * John: maximize `s t + ln det A` subject to
//!   `t + psi_f(A y + a) - psi_g(y) <= 0` for all `y`;
//! * Löwner (with `t = -ln beta`, `h = beta g(B x + b)`): maximize
//!   `s t + ln det B` subject to `t + psi_g(B x + b) - psi_f(x) <= 0`
//!   for all `x`.
//!
//! The exchange loop alternates a finite subproblem over the accumulated
//! cuts with a global margin search that returns the worst violators as
//! new cuts. Indicator data is decomposed into exact facet/vertex/ball
//! cuts, which makes the classical instances one-shot.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::contact::ExtOp;
use crate::envelope::{log_concave_envelope, InnerBody};
use crate::error::Error;
use crate::extreal::ExtReal;
use crate::geom::ConvexBody;
use crate::model::{FnKind, LogConcaveFn};
use crate::oracle::PsiOracle;
use crate::positions::{
    john_margin, lowner_margin, polish_john_witness, polish_lowner_witness, search_box, MarginCfg,
    MarginReport, Mode, Position, WitnessKind,
};
use crate::quad::QuadCfg;
use crate::search;
use crate::subproblem::{finite_subproblem, Cut, Layout, SubCfg, Theta};
use crate::Result;

/// Solver options.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub s: f64,
    pub max_outer_iters: usize,
    pub tol_feas: f64,
    pub tol_obj: f64,
    pub pd_floor: f64,
    pub seed: u64,
    pub fixed_center: bool,
    pub margin: MarginCfg,
    pub quad: QuadCfg,
    /// Kept data cuts per dimension.
    pub cut_budget_per_dim: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            s: 1.0,
            max_outer_iters: 60,
            tol_feas: 1e-7,
            tol_obj: 1e-9,
            pd_floor: 1e-8,
            seed: 0,
            fixed_center: false,
            margin: MarginCfg::default(),
            quad: QuadCfg::default(),
            cut_budget_per_dim: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    IterLimit,
    Infeasible,
}

/// One outer iteration of the trace.
#[derive(Debug, Clone)]
pub struct IterRecord {
    pub objective: f64,
    pub violation: f64,
    pub cuts: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub position: Position,
    /// `\int h^s` at the returned position.
    pub objective: f64,
    pub status: SolveStatus,
    pub trace: Vec<IterRecord>,
    pub base_integral: f64,
    /// Violation of a fresh margin search with doubled budget.
    pub final_violation: f64,
    pub notes: Vec<String>,
}

// ----------------------------------------------------------------------
// cut generation
// ----------------------------------------------------------------------

/// Cuts enforcing `t + psi_out(A y + a) <= rhs` for the composed function
/// `psi_out`, decomposed exactly for polyhedral/indicator kinds.
fn cuts_for_point(out_fn: &Arc<LogConcaveFn>, y: &DVector<f64>, rhs: f64) -> Vec<Cut> {
    let mut cuts = Vec::new();
    match &out_fn.kind {
        FnKind::Indicator(body) => {
            push_body_cuts(&mut cuts, body, y);
            // height: t - ln_scale(out) <= rhs on the body
            cuts.push(Cut::Affine {
                y: y.clone(),
                n: DVector::zeros(y.len()),
                konst: -rhs - out_fn.ln_scale,
                t_coef: 1.0,
            });
        }
        FnKind::PiecewisePsi { pieces, domain } => {
            for p in pieces {
                cuts.push(Cut::Affine {
                    y: y.clone(),
                    n: p.grad.clone(),
                    konst: p.offset - out_fn.ln_scale - rhs,
                    t_coef: 1.0,
                });
            }
            if let Some(dp) = domain {
                push_body_cuts(&mut cuts, &ConvexBody::Polytope(dp.clone()), y);
            }
        }
        FnKind::Restricted { domain, .. } => {
            push_body_cuts(&mut cuts, domain, y);
            cuts.push(Cut::Smooth {
                y: y.clone(),
                rhs,
                func: out_fn.clone(),
            });
        }
        _ => {
            if let Some(body) = out_fn.support_body() {
                push_body_cuts(&mut cuts, &body, y);
            }
            cuts.push(Cut::Smooth {
                y: y.clone(),
                rhs,
                func: out_fn.clone(),
            });
        }
    }
    cuts
}

fn push_support_cuts(cuts: &mut Vec<Cut>, body: &ConvexBody, y: &DVector<f64>) {
    push_body_cuts(cuts, body, y);
}

fn push_body_cuts(cuts: &mut Vec<Cut>, body: &ConvexBody, y: &DVector<f64>) {
    match body {
        ConvexBody::Polytope(p) => {
            for h in &p.halfspaces {
                let nn = h.normal.norm();
                cuts.push(Cut::Affine {
                    y: y.clone(),
                    n: &h.normal / nn,
                    konst: -h.offset / nn,
                    t_coef: 0.0,
                });
            }
        }
        ConvexBody::Ball(b) => {
            cuts.push(Cut::InBall {
                y: y.clone(),
                center: b.center.clone(),
                radius: b.radius,
            });
        }
    }
}

/// Exact one-shot structural cuts when the inner support is a body and the
/// outer support is a polytope or ball.
fn structural_cuts(out_fn: &LogConcaveFn, inner_support: Option<&ConvexBody>) -> Vec<Cut> {
    let mut cuts = Vec::new();
    let Some(inner) = inner_support else {
        return cuts;
    };
    match (&out_fn.kind, inner) {
        (FnKind::Indicator(ConvexBody::Polytope(p)), ConvexBody::Ball(b)) => {
            for h in &p.halfspaces {
                let nn = h.normal.norm();
                cuts.push(Cut::BallSupport {
                    n: &h.normal / nn,
                    b: h.offset / nn,
                    center: b.center.clone(),
                    radius: b.radius,
                });
            }
        }
        (FnKind::Indicator(ConvexBody::Polytope(_)), ConvexBody::Polytope(q)) => {
            for v in q.vertices() {
                if let FnKind::Indicator(body) = &out_fn.kind {
                    push_body_cuts(&mut cuts, body, &v);
                }
            }
        }
        (FnKind::Indicator(ConvexBody::Ball(_)), ConvexBody::Polytope(q)) => {
            for v in q.vertices() {
                if let FnKind::Indicator(body) = &out_fn.kind {
                    push_body_cuts(&mut cuts, body, &v);
                }
            }
        }
        _ => {}
    }
    cuts
}

// ----------------------------------------------------------------------
// guards
// ----------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Guards {
    frob: f64,
    rho: f64,
    t_lo: f64,
    widenings: usize,
}

impl Guards {
    fn to_cuts(&self, lay: &Layout) -> Vec<Cut> {
        let d = lay.d;
        let mut v = vec![Cut::FrobCap { bound: self.frob }];
        if !lay.fixed_center {
            v.push(Cut::VecCap { rho: self.rho });
        }
        v.push(Cut::Affine {
            y: DVector::zeros(d),
            n: DVector::zeros(d),
            konst: self.t_lo,
            t_coef: -1.0,
        });
        v
    }

    /// Widen any guard the solution is leaning on; true if something moved.
    fn widen_if_active(&mut self, th: &Theta) -> bool {
        let mut moved = false;
        if th.a_mat.norm() >= self.frob * (1.0 - 1e-6) {
            self.frob *= 4.0;
            moved = true;
        }
        if th.a_vec.norm() >= self.rho * (1.0 - 1e-6) {
            self.rho *= 4.0;
            moved = true;
        }
        if th.t <= self.t_lo + 1e-6 {
            self.t_lo -= 20.0;
            moved = true;
        }
        if moved {
            self.widenings += 1;
        }
        moved
    }
}

// ----------------------------------------------------------------------
// the exchange loop
// ----------------------------------------------------------------------

struct ExchangeSetup {
    out_fn: Arc<LogConcaveFn>,
    base: LogConcaveFn,
    mode: Mode,
    anchor: Theta,
    guards: Guards,
    data_cuts: Vec<Cut>,
    height_cut: Option<Cut>,
    notes: Vec<String>,
}

fn run_exchange(
    f: &LogConcaveFn,
    setup: ExchangeSetup,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let d = f.dim;
    let lay = Layout::new(d, opts.fixed_center);
    let cfg = SubCfg {
        s_pow: opts.s,
        pd_floor: opts.pd_floor,
        gap_tol: 1e-11,
    };
    let ExchangeSetup {
        out_fn,
        base,
        mode,
        anchor,
        mut guards,
        mut data_cuts,
        height_cut,
        mut notes,
    } = setup;
    let (base_integral, _) = base.s_integral(opts.s, &opts.quad)?;

    let mut warm: Vec<DVector<f64>> = Vec::new();
    let mut prev: Option<Theta> = None;
    let mut trace: Vec<IterRecord> = Vec::new();
    let mut status = SolveStatus::IterLimit;
    let mut margin_cfg = opts.margin.clone();
    margin_cfg.tol_contact = opts.margin.tol_contact;
    let mut budget_bumped = false;
    let mut stable_steps = 0usize;

    let budget = opts.cut_budget_per_dim * d.max(1) * 6;

    let mut best: Option<Theta> = None;
    for _outer in 0..opts.max_outer_iters {
        let mut all: Vec<Cut> = guards.to_cuts(&lay);
        if let Some(h) = &height_cut {
            all.push(h.clone());
        }
        all.extend(data_cuts.iter().cloned());
        let mut th = finite_subproblem(&lay, &cfg, &all, &anchor, prev.as_ref())?;
        // re-solve inline while the iterate leans on a guard bound
        while guards.widen_if_active(&th) {
            if guards.widenings > 8 {
                notes.push("guard box widened past budget".into());
                break;
            }
            let mut all: Vec<Cut> = guards.to_cuts(&lay);
            if let Some(h) = &height_cut {
                all.push(h.clone());
            }
            all.extend(data_cuts.iter().cloned());
            th = finite_subproblem(&lay, &cfg, &all, &anchor, Some(&th))?;
        }
        let pos = theta_to_position(&base, &th, mode);
        margin_cfg.warm = warm.clone();
        let rep = run_margin(f, &pos, mode, &margin_cfg);
        let objective = pos.s_integral_of(opts.s, base_integral)?;
        trace.push(IterRecord {
            objective,
            violation: rep.violation,
            cuts: data_cuts.len(),
        });

        let obj_settled = trace.len() >= 3 && {
            let k = trace.len();
            (1..3).all(|i| {
                let a = trace[k - i].objective;
                let b = trace[k - i - 1].objective;
                (a - b).abs() <= opts.tol_obj * (1.0 + a.abs())
            })
        };
        // the iterate itself must settle: the objective is flat to second
        // order around the optimum, so an objective test alone leaves the
        // operator accurate only to the square root of tol_obj
        let theta_settled = prev
            .as_ref()
            .map(|p| {
                (&th.a_mat - &p.a_mat).norm() + (&th.a_vec - &p.a_vec).norm() + (th.t - p.t).abs()
                    <= 1e-8 * (1.0 + th.a_mat.norm())
            })
            .unwrap_or(false);
        if rep.violation <= opts.tol_feas {
            stable_steps += 1;
            if (obj_settled && theta_settled) || stable_steps >= 8 {
                best = Some(th);
                status = SolveStatus::Converged;
                break;
            }
        } else {
            stable_steps = 0;
        }
        best = Some(th.clone());

        // new cuts from the worst witnesses, polished to tangency where
        // the margin is smooth (feasibility search alone locates a flat
        // minimum only to the square root of its tolerance)
        let mut added = 0usize;
        for w in rep.witnesses.iter().take(8) {
            if w.margin > margin_cfg.tol_contact {
                continue;
            }
            if w.kind == WitnessKind::SupportTouch {
                // containment constraints only; the heights stay apart
                if warm.iter().any(|q| (q - &w.y).norm() < 1e-9) {
                    continue;
                }
                if let Some(body) = out_fn.support_body() {
                    let mut cuts = Vec::new();
                    push_support_cuts(&mut cuts, &body, &w.y);
                    data_cuts.extend(cuts);
                    warm.push(w.y.clone());
                    added += 1;
                }
                continue;
            }
            let y = match mode {
                Mode::John => polish_john_witness(f, &pos, &w.y),
                Mode::Lowner => polish_lowner_witness(f, &pos, &w.y),
            }
            .unwrap_or_else(|| w.y.clone());
            if warm.iter().any(|q| (q - &y).norm() < 1e-9) {
                continue;
            }
            let rhs = match base_rhs(&base, f, mode, &y) {
                Some(r) => r,
                None => continue,
            };
            data_cuts.extend(cuts_for_point(&out_fn, &y, rhs));
            warm.push(y);
            added += 1;
        }
        if added == 0 && rep.violation > opts.tol_feas {
            if !budget_bumped {
                budget_bumped = true;
                margin_cfg.grid_n = (margin_cfg.grid_n * 2 - 1).min(129);
                continue;
            }
            notes.push("exchange stalled with residual violation".into());
            break;
        }
        // prune slack cuts over budget: drop the slackest, never one that
        // is active within 10x the feasibility tolerance
        if data_cuts.len() > budget {
            let mut scored: Vec<(usize, f64)> = data_cuts
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let v = match c.value(&lay, &th) {
                        ExtReal::Finite(v) => v,
                        ExtReal::PosInf => 0.0,
                    };
                    (i, v)
                })
                .collect();
            // tightest (largest value) first
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            let mut keep = std::collections::BTreeSet::new();
            for (i, v) in &scored {
                if *v >= -10.0 * opts.tol_feas || keep.len() < budget {
                    keep.insert(*i);
                }
            }
            data_cuts = data_cuts
                .into_iter()
                .enumerate()
                .filter(|(i, _)| keep.contains(i))
                .map(|(_, c)| c)
                .collect();
        }
        prev = Some(th);
    }

    let th = best.ok_or(Error::NumericalFailure {
        context: "solver",
        detail: "no iterate produced".into(),
    })?;
    let pos = theta_to_position(&base, &th, mode);
    // re-verify with a doubled search budget
    let mut final_cfg = opts.margin.clone();
    final_cfg.grid_n = (final_cfg.grid_n * 2 - 1).min(129);
    final_cfg.warm = warm;
    let rep = run_margin(f, &pos, mode, &final_cfg);
    if status == SolveStatus::Converged && rep.violation > opts.tol_feas {
        status = SolveStatus::IterLimit;
        notes.push("re-verification found residual violation".into());
    }
    let objective = pos.s_integral_of(opts.s, base_integral)?;
    Ok(SolveResult {
        position: pos,
        objective,
        status,
        trace,
        base_integral,
        final_violation: rep.violation,
        notes,
    })
}

fn run_margin(f: &LogConcaveFn, pos: &Position, mode: Mode, cfg: &MarginCfg) -> MarginReport {
    match mode {
        Mode::John => john_margin(f, pos, cfg),
        Mode::Lowner => lowner_margin(f, pos, cfg),
    }
}

/// Right-hand side of the point cut: `psi_g(y)` for John, `psi_f(x)` for
/// Löwner. `None` when the point carries no constraint.
fn base_rhs(base: &LogConcaveFn, f: &LogConcaveFn, mode: Mode, y: &DVector<f64>) -> Option<f64> {
    match mode {
        Mode::John => base.psi(y).finite(),
        Mode::Lowner => f.psi(y).finite(),
    }
}

fn theta_to_position(base: &LogConcaveFn, th: &Theta, mode: Mode) -> Position {
    match mode {
        Mode::John => Position::new(
            base.clone(),
            ExtOp::new(th.a_mat.clone(), th.t.exp(), th.a_vec.clone()),
            Mode::John,
        ),
        Mode::Lowner => Position::new(
            base.clone(),
            // h = beta g(Bx + b) with beta = e^{-t}; stored as
            // h = (1/alpha) g(A' x + a) with alpha = e^{t}, A = B'
            ExtOp::new(th.a_mat.transpose(), th.t.exp(), th.a_vec.clone()),
            Mode::Lowner,
        ),
    }
}

// ----------------------------------------------------------------------
// John solver
// ----------------------------------------------------------------------

/// Solve the John problem: the largest `\int h^s` over positions `h` of
/// `g` (or of its log-concave envelope) subject to `h <= f`.
pub fn solve_john(f: &LogConcaveFn, g: &InnerBody, opts: &SolveOptions) -> Result<SolveResult> {
    let g_env = log_concave_envelope(g)?;
    if !g_env.has_bounded_support() {
        return Err(Error::InvalidInput(
            "inner function must have bounded support".into(),
        ));
    }
    let origin = DVector::zeros(g_env.dim);
    if g_env.psi(&origin).is_infinite()
        || !g_env
            .support_body()
            .map(|b| b.origin_interior(1e-12))
            .unwrap_or(false)
    {
        return Err(Error::InvalidInput(
            "inner function must contain the origin in the interior of its support".into(),
        ));
    }
    if f.dim != g_env.dim {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let d = f.dim;
    let anchor = john_anchor(f, &g_env, opts)?;
    let sup_f = f.sup_norm();
    let sup_g = g_env.sup_norm();

    // guard box from the admissible-set bounds, generously widened
    let mut notes = Vec::new();
    let guards = match search_box(f, &g_env, anchor_mass(&g_env, &anchor) * 0.5, &opts.quad) {
        Ok(sb) => Guards {
            frob: (sb.op_norm_hi * (d as f64).sqrt() * 4.0).max(anchor.a_mat.norm() * 8.0),
            rho: (sb.rho * 4.0).max(1.0),
            t_lo: (sb.theta / sup_g).ln().min(anchor.t) - 10.0,
            widenings: 0,
        },
        Err(_) => {
            notes.push("admissible-set bounds unavailable; using fallback guards".into());
            Guards {
                frob: 64.0,
                rho: 16.0,
                t_lo: anchor.t - 40.0,
                widenings: 0,
            }
        }
    };
    // sup h <= sup f always
    let height_cut = Some(Cut::Affine {
        y: DVector::zeros(d),
        n: DVector::zeros(d),
        konst: sup_g.ln() - sup_f.ln(),
        t_coef: 1.0,
    });

    let out_fn = Arc::new(f.clone());
    let mut data_cuts = structural_cuts(f, g_env.support_body().as_ref());
    // seed point cuts at the structured support points of g
    for y in seed_points(&g_env) {
        if let Some(rhs) = g_env.psi(&y).finite() {
            data_cuts.extend(cuts_for_point(&out_fn, &y, rhs));
        }
    }
    notes.push("optimum taken over positive definite operator parts".into());
    let setup = ExchangeSetup {
        out_fn,
        base: g_env,
        mode: Mode::John,
        anchor,
        guards,
        data_cuts,
        height_cut,
        notes,
    };
    run_exchange(f, setup, opts)
}

fn anchor_mass(g: &LogConcaveFn, th: &Theta) -> f64 {
    // 1-integral of the anchor position (closed form in the base integral)
    let det = th.a_mat.clone().lu().determinant().abs();
    let base = g
        .s_integral(1.0, &QuadCfg::default())
        .map(|(v, _)| v)
        .unwrap_or(1.0);
    th.t.exp() * det * base
}

fn seed_points(g: &LogConcaveFn) -> Vec<DVector<f64>> {
    let mut pts = vec![g.max_point().0];
    if let Some(body) = g.support_body() {
        match &body {
            ConvexBody::Polytope(p) => pts.extend(p.vertices()),
            ConvexBody::Ball(b) => {
                for i in 0..g.dim {
                    let mut e = DVector::zeros(g.dim);
                    e[i] = b.radius;
                    pts.push(&b.center + &e);
                    pts.push(&b.center - &e);
                }
            }
        }
    }
    pts
}

/// A strictly feasible tiny position of `g` below `f`: shrink `g` into a
/// ball inside the half-height superlevel set of `f`, at a safely reduced
/// height.
fn john_anchor(f: &LogConcaveFn, g: &LogConcaveFn, opts: &SolveOptions) -> Result<Theta> {
    let d = f.dim;
    let (mut center, sup_f) = f.max_point();
    let sup_g = g.sup_norm();
    let level = sup_f / 2.0;
    let dirs = search::sphere_directions(d, 26);
    // one recentering round in case the max point sits on the level-set rim
    for _ in 0..2 {
        let mut shift = DVector::zeros(d);
        for dir in &dirs {
            shift += dir * (level_radius(f, &center, dir, level) / dirs.len() as f64 * 0.5);
        }
        center += shift;
    }
    let r_lev = dirs
        .iter()
        .map(|dir| level_radius(f, &center, dir, level))
        .fold(f64::INFINITY, f64::min);
    let (lo, hi) = g.support_box();
    let r_g = lo.amax().max(hi.amax()).max(1e-9);
    let mut eps = 0.45 * r_lev / r_g;
    let mut alpha = sup_f / (4.0 * sup_g);
    for _ in 0..50 {
        let th = Theta {
            a_mat: DMatrix::identity(d, d) * eps,
            a_vec: if opts.fixed_center {
                DVector::zeros(d)
            } else {
                center.clone()
            },
            t: alpha.ln(),
        };
        let pos = theta_to_position(g, &th, Mode::John);
        let rep = john_margin(
            f,
            &pos,
            &MarginCfg {
                tol_contact: -1.0,
                ..opts.margin.clone()
            },
        );
        if rep.violation == 0.0 {
            return Ok(th);
        }
        eps *= 0.5;
        alpha *= 0.5;
        if opts.fixed_center && f.value(&DVector::zeros(d)) <= 0.0 {
            break;
        }
    }
    Err(Error::Infeasible(
        "no feasible initial position found".into(),
    ))
}

fn level_radius(f: &LogConcaveFn, center: &DVector<f64>, dir: &DVector<f64>, level: f64) -> f64 {
    if f.value(center) < level {
        return 0.0;
    }
    let mut hi = 1e-3;
    while f.value(&(center + dir * hi)) >= level && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if f.value(&(center + dir * mid)) >= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

// ----------------------------------------------------------------------
// Löwner solver
// ----------------------------------------------------------------------

/// Solve the Löwner problem: the smallest `\int h^s` over positions of `g`
/// subject to `f <= h`.
pub fn solve_lowner(
    f: &LogConcaveFn,
    g: &LogConcaveFn,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    if f.dim != g.dim {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let d = f.dim;
    let mut notes = Vec::new();
    // universal feasibility requires the polar of g to have bounded
    // support; warn when that cannot be confirmed
    let polar_g = crate::polar::log_conjugate(g);
    let (plo, phi) = polar_g.support_box();
    if !(plo.iter().all(|v| v.is_finite()) && phi.iter().all(|v| v.is_finite())) {
        notes.push("polar of g may have unbounded support; feasibility not guaranteed".into());
    }

    let anchor = lowner_anchor(f, g, opts)?;
    let sup_f = f.sup_norm();
    let sup_g = g.sup_norm();
    let guards = Guards {
        frob: anchor.a_mat.norm().max(1.0) * 16.0,
        rho: (anchor.a_vec.norm() + 8.0) * 4.0,
        t_lo: anchor.t - 30.0,
        widenings: 0,
    };
    // beta >= sup f / sup g, i.e. t <= ln(sup g / sup f)
    let height_cut = Some(Cut::Affine {
        y: DVector::zeros(d),
        n: DVector::zeros(d),
        konst: (sup_f / sup_g).ln(),
        t_coef: 1.0,
    });

    let out_fn = Arc::new(g.clone());
    let mut data_cuts = Vec::new();
    // exact vertex preload for indicator f (vertices maximize the excess)
    if let FnKind::Indicator(ConvexBody::Polytope(p)) = &f.kind {
        for v in p.vertices() {
            if let Some(rhs) = f.psi(&v).finite() {
                data_cuts.extend(cuts_for_point(&out_fn, &v, rhs));
            }
        }
    }
    for y in seed_points(f) {
        if let Some(rhs) = f.psi(&y).finite() {
            data_cuts.extend(cuts_for_point(&out_fn, &y, rhs));
        }
    }
    notes.push("optimum taken over positive definite operator parts".into());
    let setup = ExchangeSetup {
        out_fn,
        base: g.clone(),
        mode: Mode::Lowner,
        anchor,
        guards,
        data_cuts,
        height_cut,
        notes,
    };
    run_exchange(f, setup, opts)
}

/// A strictly feasible inflated position: `beta g(eps x)` with `eps` small
/// and `beta` pushed above the measured excess.
fn lowner_anchor(f: &LogConcaveFn, g: &LogConcaveFn, opts: &SolveOptions) -> Result<Theta> {
    let d = f.dim;
    for k in 0..36 {
        let eps = 0.75f64.powi(k);
        let probe = Theta {
            a_mat: DMatrix::identity(d, d) * eps,
            a_vec: DVector::zeros(d),
            t: 0.0,
        };
        let pos = theta_to_position(g, &probe, Mode::Lowner);
        let rep = lowner_margin(
            f,
            &pos,
            &MarginCfg {
                tol_contact: -1.0,
                ..opts.margin.clone()
            },
        );
        if !rep.violation.is_finite() {
            continue;
        }
        let t = -(rep.violation + 1.0);
        let th = Theta {
            a_mat: probe.a_mat.clone(),
            a_vec: probe.a_vec.clone(),
            t,
        };
        let pos = theta_to_position(g, &th, Mode::Lowner);
        let rep = lowner_margin(
            f,
            &pos,
            &MarginCfg {
                tol_contact: -1.0,
                ..opts.margin.clone()
            },
        );
        if rep.violation == 0.0 {
            return Ok(th);
        }
    }
    Err(Error::Infeasible(
        "no dominating initial position found".into(),
    ))
}
