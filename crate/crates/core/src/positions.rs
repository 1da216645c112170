//! Positions of a function and their feasibility margins.
//!
//! John-mode positions are `h(x) = alpha g(A^-1 (x - a))`; Löwner-mode
//! positions are `h(x) = (1/alpha) g(A' x + a)` (`A'` the transpose).
//! Both are parametrized by an element `(A ⊕ alpha, a)` of the operator
//! space. The `s`-integral of a position is a closed form in the base
//! integral, feasibility against a second function reduces to the sign of
//! a log-domain margin, and straight-line blends of feasible positions
//! stay feasible with at least the geometric mean of the integrals
//! (Minkowski's determinant inequality).

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use crate::contact::ExtOp;
use crate::error::Error;
use crate::extreal::ExtReal;
use crate::geom::ConvexBody;
use crate::model::{FnKind, LogConcaveFn};
use crate::oracle::TransformedFn;
use crate::quad::{adaptive_1d, integrate_box, QuadCfg};
use crate::search;
use crate::Result;

/// A tangent direction `(H ⊕ gamma, h)` at the identity.
pub type Direction = ExtOp;

/// Which group parametrization a position uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    John,
    Lowner,
}

/// A base function moved by a group element.
#[derive(Debug, Clone)]
pub struct Position {
    pub base: LogConcaveFn,
    pub elem: ExtOp,
    pub mode: Mode,
}

impl Position {
    pub fn new(base: LogConcaveFn, elem: ExtOp, mode: Mode) -> Self {
        Position { base, elem, mode }
    }

    pub fn identity(base: LogConcaveFn, mode: Mode) -> Self {
        let d = base.dim;
        Position::new(
            base,
            ExtOp::new(DMatrix::identity(d, d), 1.0, DVector::zeros(d)),
            mode,
        )
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }

    /// `psi` of the position at `x`.
    pub fn psi_at(&self, x: &DVector<f64>) -> ExtReal {
        let a = &self.elem.mat;
        let alpha = self.elem.alpha;
        match self.mode {
            Mode::John => {
                let ainv = match a.clone().try_inverse() {
                    Some(m) => m,
                    None => return ExtReal::PosInf,
                };
                let y = &ainv * (x - &self.elem.vec);
                self.base.psi(&y).add_finite(-alpha.ln())
            }
            Mode::Lowner => {
                let y = a.transpose() * x + &self.elem.vec;
                self.base.psi(&y).add_finite(alpha.ln())
            }
        }
    }

    /// Evaluate the position.
    pub fn apply(&self, x: &DVector<f64>) -> f64 {
        self.psi_at(x).neg_exp()
    }

    /// The position as a `psi` oracle (for contact extraction and
    /// re-based solves).
    pub fn as_oracle(&self) -> Result<TransformedFn> {
        let alpha = self.elem.alpha;
        match self.mode {
            Mode::John => {
                let ainv = self
                    .elem
                    .mat
                    .clone()
                    .try_inverse()
                    .ok_or_else(Error::singular)?;
                let shift = -(&ainv * &self.elem.vec);
                Ok(TransformedFn::position_like(
                    Arc::new(self.base.clone()),
                    ainv,
                    shift,
                    -alpha.ln(),
                ))
            }
            Mode::Lowner => Ok(TransformedFn::position_like(
                Arc::new(self.base.clone()),
                self.elem.mat.transpose(),
                self.elem.vec.clone(),
                alpha.ln(),
            )),
        }
    }

    /// `\int h^s` from the base integral: `alpha^s |det A|` times it in
    /// John mode, `alpha^{-s} |det A|^{-1}` times it in Löwner mode.
    pub fn s_integral_of(&self, s: f64, base_integral: f64) -> Result<f64> {
        let det = self.elem.mat.clone().lu().determinant();
        if det.abs() < 1e-300 {
            return Err(Error::singular());
        }
        let alpha = self.elem.alpha;
        Ok(match self.mode {
            Mode::John => alpha.powf(s) * det.abs() * base_integral,
            Mode::Lowner => base_integral / (alpha.powf(s) * det.abs()),
        })
    }

    /// `ln` of the `s`-integral up to the base-integral constant
    /// (the solver objective).
    pub fn log_objective(&self, s: f64) -> f64 {
        let det = self.elem.mat.clone().lu().determinant().abs().max(1e-300);
        match self.mode {
            Mode::John => s * self.elem.alpha.ln() + det.ln(),
            Mode::Lowner => -(s * self.elem.alpha.ln() + det.ln()),
        }
    }

    /// Compose with a perturbation step of size `t` along `dir`,
    /// keeping the mode's parametrization.
    pub fn compose_perturbation(&self, dir: &Direction, t: f64) -> Result<Position> {
        let d = self.dim();
        let id = DMatrix::identity(d, d);
        let scale = 1.0 + t * dir.alpha;
        if scale <= 0.0 {
            return Err(Error::SingularMatrix {
                critical_t: Some(-1.0 / dir.alpha),
            });
        }
        match self.mode {
            Mode::John => {
                let step = &id + &dir.mat * t;
                if step.clone().lu().determinant().abs() < 1e-14 {
                    return Err(Error::SingularMatrix {
                        critical_t: Some(t),
                    });
                }
                let mat = &step * &self.elem.mat;
                let vec = &dir.vec * t + &step * &self.elem.vec;
                Ok(Position::new(
                    self.base.clone(),
                    ExtOp::new(mat, scale * self.elem.alpha, vec),
                    Mode::John,
                ))
            }
            Mode::Lowner => {
                let step = &id - &dir.mat * t;
                let step_inv = step.try_inverse().ok_or(Error::SingularMatrix {
                    critical_t: Some(t),
                })?;
                let mat = &step_inv * &self.elem.mat;
                let vec = self.elem.mat.transpose() * &dir.vec * t + &self.elem.vec;
                Ok(Position::new(
                    self.base.clone(),
                    ExtOp::new(mat, scale * self.elem.alpha, vec),
                    Mode::Lowner,
                ))
            }
        }
    }
}

/// First-order perturbation of the identity position: John
/// `(Id + tH, 1 + t gamma, t h)`, Löwner `((Id - tH)^-1, 1 + t gamma, t h)`.
/// The derivative at `t = 0` equals `dir` componentwise.
pub fn perturb(base: &LogConcaveFn, mode: Mode, dir: &Direction, t: f64) -> Result<Position> {
    Position::identity(base.clone(), mode).compose_perturbation(dir, t)
}

// ----------------------------------------------------------------------
// interpolation
// ----------------------------------------------------------------------

/// Blend two same-base John positions: heights geometrically, operator and
/// translation linearly. If both are below some log-concave `f`, the blend
/// stays below `f`; for positive definite operator parts the `s`-integral
/// is at least the geometric mean of the two.
pub fn interpolate_inner(p1: &Position, p2: &Position, beta: f64) -> Result<Position> {
    assert!(p1.mode == Mode::John && p2.mode == Mode::John);
    blend(p1, p2, beta)
}

/// Dual blend of two same-base Löwner positions; if both dominate `f`, the
/// blend dominates `f`, with `s`-integral at most the geometric mean.
pub fn interpolate_outer(p1: &Position, p2: &Position, beta: f64) -> Result<Position> {
    assert!(p1.mode == Mode::Lowner && p2.mode == Mode::Lowner);
    blend(p1, p2, beta)
}

fn blend(p1: &Position, p2: &Position, beta: f64) -> Result<Position> {
    assert!((0.0..=1.0).contains(&beta));
    let mat = &p1.elem.mat * beta + &p2.elem.mat * (1.0 - beta);
    if mat.clone().lu().determinant().abs() < 1e-14 {
        return Err(Error::singular());
    }
    let alpha = p1.elem.alpha.powf(beta) * p2.elem.alpha.powf(1.0 - beta);
    let vec = &p1.elem.vec * beta + &p2.elem.vec * (1.0 - beta);
    Ok(Position::new(
        p1.base.clone(),
        ExtOp::new(mat, alpha, vec),
        p1.mode,
    ))
}

// ----------------------------------------------------------------------
// feasibility margins
// ----------------------------------------------------------------------

/// Margin search configuration.
#[derive(Debug, Clone)]
pub struct MarginCfg {
    /// Grid nodes per axis (33 up to two dimensions, coarser in three).
    pub grid_n: usize,
    pub nm_iters: usize,
    /// Contact threshold in log units.
    pub tol_contact: f64,
    /// Warm-start points from earlier searches (in the search space).
    pub warm: Vec<DVector<f64>>,
}

impl Default for MarginCfg {
    fn default() -> Self {
        MarginCfg {
            grid_n: 33,
            nm_iters: 220,
            tol_contact: 1e-6,
            warm: vec![],
        }
    }
}

impl MarginCfg {
    pub fn grid_for_dim(&self, d: usize) -> usize {
        if d >= 3 {
            self.grid_n.min(13)
        } else {
            self.grid_n
        }
    }
}

/// How a witness became a contact candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    /// The log-domain margin is tight (the graphs touch).
    Margin,
    /// The support of the position presses against the support boundary
    /// of the outer function, possibly below its graph; such points only
    /// carry horizontal normals.
    SupportTouch,
}

/// A near-tight or violated point found by the margin search.
#[derive(Debug, Clone)]
pub struct MarginWitness {
    /// Point in the search space (base coordinates for John, ambient for
    /// Löwner).
    pub y: DVector<f64>,
    /// The corresponding contact candidate in ambient coordinates.
    pub u: DVector<f64>,
    pub margin: f64,
    pub kind: WitnessKind,
}

/// Result of a margin search: `violation = max(0, -inf margin)` (John) or
/// `max(0, sup excess)` (Löwner). `f64::INFINITY` marks support escape.
#[derive(Debug, Clone)]
pub struct MarginReport {
    pub violation: f64,
    pub witnesses: Vec<MarginWitness>,
    pub evaluations: usize,
}

/// Feasibility margin of a John-mode position against `f`:
/// `m(y) = psi_g(y) - psi_f(Ay + a) - ln alpha >= 0` iff `h <= f`.
/// Exact support-function arithmetic for indicator/indicator instances,
/// deterministic grid plus local refinement otherwise.
pub fn john_margin(f: &LogConcaveFn, pos: &Position, cfg: &MarginCfg) -> MarginReport {
    if let (FnKind::Indicator(fb), FnKind::Indicator(gb)) = (&f.kind, &pos.base.kind) {
        if let Some(rep) = exact_indicator_margin(f, fb, pos, gb, cfg) {
            return rep;
        }
    }
    let g = &pos.base;
    let a_mat = &pos.elem.mat;
    let a_vec = &pos.elem.vec;
    let ln_alpha = pos.elem.alpha.ln();
    let m = |y: &DVector<f64>| -> f64 {
        let pg = match g.psi(y) {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => return search::BIG,
        };
        let x = a_mat * y + a_vec;
        match f.psi(&x) {
            ExtReal::Finite(pf) => (pg - pf - ln_alpha).clamp(-search::BIG, search::BIG),
            ExtReal::PosInf => -search::BIG,
        }
    };
    let (lo, hi) = bounded_box(g);
    let mut starts = structured_starts(g);
    starts.extend(cfg.warm.iter().cloned());
    let rep = minimize_margin(&m, &lo, &hi, cfg, starts, g.dim);
    let mut report = finish_report(rep, |y| a_mat * y + a_vec);
    append_support_touches(f, pos, &mut report);
    report
}

/// Scan for support pressing: the image of `supp g` touching the boundary
/// of `supp f`. Such points constrain the position through horizontal
/// normals even when the graphs stay apart there, and escaping the
/// support is an infinite violation.
fn append_support_touches(f: &LogConcaveFn, pos: &Position, report: &mut MarginReport) {
    let Some(f_body) = f.support_body() else {
        return;
    };
    let Some(g_body) = pos.base.support_body() else {
        return;
    };
    let a_mat = &pos.elem.mat;
    let a_vec = &pos.elem.vec;
    // support point of the image A (supp g) + a in direction n
    let image_support = |n: &DVector<f64>| -> (f64, DVector<f64>) {
        let an = a_mat.transpose() * n;
        match &g_body {
            ConvexBody::Polytope(p) => {
                let mut best = f64::NEG_INFINITY;
                let mut arg = DVector::zeros(pos.dim());
                for v in p.vertices() {
                    let s = an.dot(&v);
                    if s > best {
                        best = s;
                        arg = v;
                    }
                }
                (best + n.dot(a_vec), arg)
            }
            ConvexBody::Ball(b) => {
                let nn = an.norm();
                let dir = if nn > 0.0 { &an / nn } else { an.clone() };
                (
                    an.dot(&b.center) + b.radius * nn + n.dot(a_vec),
                    &b.center + &dir * b.radius,
                )
            }
        }
    };
    let dirs: Vec<(DVector<f64>, f64)> = match &f_body {
        ConvexBody::Polytope(p) => p
            .halfspaces
            .iter()
            .map(|h| {
                let nn = h.normal.norm();
                (&h.normal / nn, h.offset / nn)
            })
            .collect(),
        ConvexBody::Ball(b) => search::sphere_directions(f.dim, 64)
            .into_iter()
            .map(|n| {
                let off = n.dot(&b.center) + b.radius;
                (n, off)
            })
            .collect(),
    };
    for (n, b) in dirs {
        let (support, y) = image_support(&n);
        let excess = support - b;
        let scale = 1.0 + b.abs();
        if excess > 1e-9 * scale {
            report.violation = f64::INFINITY;
            report.witnesses.insert(
                0,
                MarginWitness {
                    u: a_mat * &y + a_vec,
                    y,
                    margin: -f64::INFINITY,
                    kind: WitnessKind::SupportTouch,
                },
            );
        } else if excess >= -1e-7 * scale {
            let u = a_mat * &y + a_vec;
            if !report
                .witnesses
                .iter()
                .any(|w| w.kind == WitnessKind::SupportTouch && (&w.u - &u).norm() < 1e-7)
            {
                report.witnesses.push(MarginWitness {
                    u,
                    y,
                    margin: excess,
                    kind: WitnessKind::SupportTouch,
                });
            }
        }
    }
}

/// Feasibility margin of a Löwner-mode position against `f`: the position
/// dominates `f` iff `sup_x psi_g(A' x + a) + ln alpha - psi_f(x) <= 0`.
pub fn lowner_margin(f: &LogConcaveFn, pos: &Position, cfg: &MarginCfg) -> MarginReport {
    let g = &pos.base;
    let bt = pos.elem.mat.transpose();
    let b_vec = &pos.elem.vec;
    let ln_alpha = pos.elem.alpha.ln();
    // minimize the negated excess; margin convention matches the John side
    // (negative margin = violation)
    let m = |x: &DVector<f64>| -> f64 {
        let pf = match f.psi(x) {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => return search::BIG, // outside supp f: no constraint
        };
        let y = &bt * x + b_vec;
        match g.psi(&y) {
            ExtReal::Finite(pg) => (pf - pg - ln_alpha).clamp(-search::BIG, search::BIG),
            ExtReal::PosInf => -search::BIG, // h = 0 < f: infinite violation
        }
    };
    // exact path: a convex excess over a polytope is maximized at a vertex
    if let FnKind::Indicator(ConvexBody::Polytope(p)) = &f.kind {
        let mut witnesses = Vec::new();
        let mut worst = f64::INFINITY;
        for vx in p.vertices() {
            let val = m(&vx);
            worst = worst.min(val);
            witnesses.push(MarginWitness {
                y: vx.clone(),
                u: vx,
                margin: val,
                kind: WitnessKind::Margin,
            });
        }
        // interior points can be tight only when the excess is constant;
        // keep the vertex list and the max-point candidate
        let (mp, _) = f.max_point();
        let val = m(&mp);
        worst = worst.min(val);
        witnesses.push(MarginWitness {
            y: mp.clone(),
            u: mp,
            margin: val,
            kind: WitnessKind::Margin,
        });
        let violation = if worst <= -search::BIG {
            f64::INFINITY
        } else {
            (-worst).max(0.0)
        };
        let mut witnesses: Vec<MarginWitness> = witnesses
            .into_iter()
            .filter(|w| w.margin <= cfg.tol_contact)
            .collect();
        sort_witnesses(&mut witnesses);
        return MarginReport {
            violation,
            witnesses,
            evaluations: 0,
        };
    }
    let (lo, hi) = bounded_box(f);
    let mut starts = structured_starts(f);
    starts.extend(cfg.warm.iter().cloned());
    let rep = minimize_margin(&m, &lo, &hi, cfg, starts, f.dim);
    finish_report(rep, |y| y.clone())
}

fn bounded_box(g: &LogConcaveFn) -> (DVector<f64>, DVector<f64>) {
    let (mut lo, mut hi) = g.support_box();
    let (c, _) = g.max_point();
    let r = match g.decay_envelope() {
        Ok((theta, nu)) => (theta.ln().abs() + 30.0) / nu,
        Err(_) => 30.0,
    };
    for i in 0..g.dim {
        if !lo[i].is_finite() {
            lo[i] = c[i] - r;
        }
        if !hi[i].is_finite() {
            hi[i] = c[i] + r;
        }
    }
    (lo, hi)
}

fn structured_starts(g: &LogConcaveFn) -> Vec<DVector<f64>> {
    let mut starts = vec![g.max_point().0];
    if let Some(ConvexBody::Polytope(p)) = g.support_body() {
        starts.extend(p.vertices());
    }
    if let Some(ConvexBody::Ball(b)) = g.support_body() {
        for i in 0..g.dim {
            let mut e = DVector::zeros(g.dim);
            e[i] = b.radius;
            starts.push(&b.center + &e);
            starts.push(&b.center - &e);
        }
    }
    starts
}

struct RawReport {
    min_val: f64,
    tight: Vec<(DVector<f64>, f64)>,
    evals: usize,
}

fn minimize_margin(
    m: &dyn Fn(&DVector<f64>) -> f64,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    cfg: &MarginCfg,
    starts: Vec<DVector<f64>>,
    dim: usize,
) -> RawReport {
    let n = cfg.grid_for_dim(dim);
    // confine the local refinement to a slightly inflated box so descent
    // directions that are unbounded outside the truncation radius cannot
    // drag witnesses to absurd coordinates
    let slack: Vec<f64> = (0..dim).map(|i| 0.25 * (hi[i] - lo[i]).max(1e-6)).collect();
    let boxed = move |y: &DVector<f64>| -> f64 {
        for i in 0..dim {
            if y[i] < lo[i] - slack[i] || y[i] > hi[i] + slack[i] {
                return search::BIG;
            }
        }
        m(y)
    };
    let m = &boxed;
    let mut evals = 0usize;
    let mut pool: Vec<(DVector<f64>, f64)> = Vec::new();
    for y in search::grid_points(lo, hi, n).into_iter().chain(starts) {
        let val = m(&y);
        evals += 1;
        pool.push((y, val));
    }
    pool.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap()
            .then_with(|| lex_cmp(&a.0, &b.0))
    });
    let cell = (0..lo.len())
        .map(|i| (hi[i] - lo[i]) / (n - 1) as f64)
        .fold(0.0f64, f64::max);
    let mut refined: Vec<(DVector<f64>, f64)> = Vec::new();
    for (y, _) in pool.iter().take(8) {
        let (yr, vr) = search::nelder_mead(m, y, cell.max(1e-7), cfg.nm_iters);
        evals += cfg.nm_iters;
        refined.push((yr, vr));
    }
    let mut all = pool;
    all.extend(refined);
    let min_val = all.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let mut tight: Vec<(DVector<f64>, f64)> = all
        .into_iter()
        .filter(|(_, v)| *v <= cfg.tol_contact)
        .collect();
    // dedupe by rounded location
    tight.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap()
            .then_with(|| lex_cmp(&a.0, &b.0))
    });
    let mut uniq: Vec<(DVector<f64>, f64)> = Vec::new();
    for (y, v) in tight {
        if !uniq.iter().any(|(q, _)| (q - &y).norm() < 1e-6) {
            uniq.push((y, v));
        }
    }
    uniq.truncate(40);
    RawReport {
        min_val,
        tight: uniq,
        evals,
    }
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for i in 0..a.len() {
        match a[i].partial_cmp(&b[i]) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn finish_report(raw: RawReport, to_u: impl Fn(&DVector<f64>) -> DVector<f64>) -> MarginReport {
    let violation = if raw.min_val <= -search::BIG {
        f64::INFINITY
    } else {
        (-raw.min_val).max(0.0)
    };
    let mut witnesses: Vec<MarginWitness> = raw
        .tight
        .into_iter()
        .map(|(y, v)| MarginWitness {
            u: to_u(&y),
            y,
            margin: v,
            kind: WitnessKind::Margin,
        })
        .collect();
    sort_witnesses(&mut witnesses);
    MarginReport {
        violation,
        witnesses,
        evaluations: raw.evals,
    }
}

fn sort_witnesses(ws: &mut [MarginWitness]) {
    ws.sort_by(|a, b| {
        a.margin
            .partial_cmp(&b.margin)
            .unwrap()
            .then_with(|| lex_cmp(&a.y, &b.y))
    });
}

/// Exact margin for indicator-vs-indicator (support-function arithmetic).
fn exact_indicator_margin(
    _f: &LogConcaveFn,
    f_body: &ConvexBody,
    pos: &Position,
    g_body: &ConvexBody,
    cfg: &MarginCfg,
) -> Option<MarginReport> {
    let facets: Vec<(DVector<f64>, f64)> = match f_body {
        ConvexBody::Polytope(p) => p
            .halfspaces
            .iter()
            .map(|h| {
                let n = h.normal.norm();
                (&h.normal / n, h.offset / n)
            })
            .collect(),
        ConvexBody::Ball(_) => return None, // handled by the generic search
    };
    let a_mat = &pos.elem.mat;
    let a_vec = &pos.elem.vec;
    // psi is constant on each body, so the margin is the height gap
    // -ln(alpha) - c_g + c_f wherever the image stays inside supp f
    let ln_alpha = pos.elem.alpha.ln() + pos.base.ln_scale - _f.ln_scale;
    let mut escape = false;
    let mut tight: Vec<MarginWitness> = Vec::new();
    for (n, b) in &facets {
        let an = a_mat.transpose() * n;
        let (support, toucher) = match g_body {
            ConvexBody::Polytope(p) => {
                let mut best = f64::NEG_INFINITY;
                let mut arg = DVector::zeros(pos.dim());
                for v in p.vertices() {
                    let s = an.dot(&v);
                    if s > best {
                        best = s;
                        arg = v;
                    }
                }
                (best, arg)
            }
            ConvexBody::Ball(bl) => {
                let nn = an.norm();
                let dir = if nn > 0.0 { &an / nn } else { an.clone() };
                (
                    an.dot(&bl.center) + bl.radius * nn,
                    &bl.center + &dir * bl.radius,
                )
            }
        };
        let excess = support + n.dot(a_vec) - b;
        if excess > 1e-9 * (1.0 + b.abs()) {
            escape = true;
            tight.push(MarginWitness {
                u: a_mat * &toucher + a_vec,
                y: toucher,
                margin: -f64::INFINITY,
                kind: WitnessKind::Margin,
            });
        } else if excess >= -1e-7 * (1.0 + b.abs()) && -ln_alpha <= cfg.tol_contact {
            tight.push(MarginWitness {
                u: a_mat * &toucher + a_vec,
                y: toucher,
                margin: -ln_alpha,
                kind: WitnessKind::Margin,
            });
        }
    }
    if escape {
        let witnesses = tight
            .into_iter()
            .filter(|w| w.margin.is_infinite())
            .collect();
        return Some(MarginReport {
            violation: f64::INFINITY,
            witnesses,
            evaluations: 0,
        });
    }
    // interior (top-face) witness at the image of the base max point
    if -ln_alpha <= cfg.tol_contact {
        let (c, _) = pos.base.max_point();
        tight.push(MarginWitness {
            u: a_mat * &c + a_vec,
            y: c,
            margin: -ln_alpha,
            kind: WitnessKind::Margin,
        });
    }
    let mut witnesses = tight;
    sort_witnesses(&mut witnesses);
    Some(MarginReport {
        violation: ln_alpha.max(0.0),
        witnesses,
        evaluations: 0,
    })
}

// ----------------------------------------------------------------------
// tangency polish
// ----------------------------------------------------------------------

/// Newton refinement of a smooth John tangency: drive the margin gradient
/// `grad psi_g(y) - A' grad psi_f(Ay + a)` to zero. `None` when either
/// side lacks derivatives at the point (kinks, boundaries) or the step
/// leaves the locality of the start.
pub fn polish_john_witness(
    f: &LogConcaveFn,
    pos: &Position,
    y0: &DVector<f64>,
) -> Option<DVector<f64>> {
    let g = &pos.base;
    let a_mat = &pos.elem.mat;
    let mut y = y0.clone();
    for _ in 0..30 {
        let gg = singleton_grad(g, &y)?;
        let z = a_mat * &y + &pos.elem.vec;
        let gf = singleton_grad(f, &z)?;
        let grad = &gg - a_mat.transpose() * &gf;
        if grad.norm() <= 1e-12 * (1.0 + gg.norm()) {
            return Some(y);
        }
        let hg = g.hessian_psi(&y)?;
        let hf = f.hessian_psi(&z)?;
        let h = hg - a_mat.transpose() * hf * a_mat;
        let step = h.lu().solve(&(-&grad))?;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..20 {
            let yn = &y + &step * t;
            let zn = a_mat * &yn + &pos.elem.vec;
            if g.psi(&yn).is_finite() && f.psi(&zn).is_finite() {
                y = yn;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || (&y - y0).norm() > 0.2 * (1.0 + y0.norm()) {
            return None;
        }
    }
    Some(y)
}

/// Newton refinement of a smooth Löwner tangency: stationarity of the
/// excess `psi_g(A' x + a) + ln alpha - psi_f(x)`.
pub fn polish_lowner_witness(
    f: &LogConcaveFn,
    pos: &Position,
    x0: &DVector<f64>,
) -> Option<DVector<f64>> {
    let g = &pos.base;
    let bt = pos.elem.mat.transpose();
    let mut x = x0.clone();
    for _ in 0..30 {
        let z = &bt * &x + &pos.elem.vec;
        let ggl = singleton_grad(g, &z)?;
        let gf = singleton_grad(f, &x)?;
        let grad = bt.transpose() * &ggl - &gf;
        if grad.norm() <= 1e-12 * (1.0 + gf.norm()) {
            return Some(x);
        }
        let hg = g.hessian_psi(&z)?;
        let hf = f.hessian_psi(&x)?;
        let h = bt.transpose() * hg * &bt - hf;
        let step = h.lu().solve(&(-&grad))?;
        let mut moved = false;
        let mut t = 1.0;
        for _ in 0..20 {
            let xn = &x + &step * t;
            let zn = &bt * &xn + &pos.elem.vec;
            if g.psi(&zn).is_finite() && f.psi(&xn).is_finite() {
                x = xn;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || (&x - x0).norm() > 0.2 * (1.0 + x0.norm()) {
            return None;
        }
    }
    Some(x)
}

fn singleton_grad(f: &LogConcaveFn, x: &DVector<f64>) -> Option<DVector<f64>> {
    match f.subgradients(x) {
        Ok(ps) if ps.len() == 1 => Some(ps[0].clone()),
        _ => None,
    }
}

// ----------------------------------------------------------------------
// search box
// ----------------------------------------------------------------------

/// Constructive bounds on the admissible set of the John problem (used to
/// confine the finite subproblems): any position of `g` below `f` with
/// integral at least `delta` has normalized height in
/// `[theta, sup f]`, translation norm at most `rho`, and operator norm
/// within `[op_norm_lo, op_norm_hi]`.
#[derive(Debug, Clone)]
pub struct SearchBox {
    pub theta: f64,
    pub rho: f64,
    pub op_norm_hi: f64,
    pub op_norm_lo: f64,
    pub sup_f: f64,
    /// Line-integral constants entering the operator bounds.
    pub c_f: f64,
    pub c_g: f64,
}

pub fn search_box(
    f: &LogConcaveFn,
    g: &LogConcaveFn,
    delta: f64,
    quad: &QuadCfg,
) -> Result<SearchBox> {
    if f.dim > 3 {
        return Err(Error::NumericalFailure {
            context: "search_box",
            detail: "quadrature-backed bounds are limited to d <= 3".into(),
        });
    }
    let sup_f = f.sup_norm();
    let sup_g = g.sup_norm();
    if sup_f <= 0.0 || sup_g <= 0.0 {
        return Err(Error::Infeasible("degenerate heights".into()));
    }
    // theta: solve \int min(f, theta) = delta by bisection
    let trunc = |theta: f64| -> f64 {
        let probe = |x: &DVector<f64>| f.value(x).min(theta);
        let (lo, hi) = bounded_box(f);
        integrate_box(&probe, &lo, &hi, quad).0
    };
    let mut lo_t = 0.0;
    let mut hi_t = sup_f;
    for _ in 0..60 {
        let mid = 0.5 * (lo_t + hi_t);
        if trunc(mid) < delta {
            lo_t = mid;
        } else {
            hi_t = mid;
        }
    }
    let theta = 0.5 * (lo_t + hi_t);

    // rho: circumradius of the superlevel set [f >= theta]
    let (c, _) = f.max_point();
    let mut rho = 0.0f64;
    for dir in search::sphere_directions(f.dim, 64) {
        let mut lo_r = 0.0;
        let mut hi_r = 1.0;
        while f.value(&(&c + &dir * hi_r)) >= theta && hi_r < 1e6 {
            hi_r *= 2.0;
        }
        for _ in 0..50 {
            let mid = 0.5 * (lo_r + hi_r);
            if f.value(&(&c + &dir * mid)) >= theta {
                lo_r = mid;
            } else {
                hi_r = mid;
            }
        }
        rho = rho.max((&c + &dir * lo_r).norm());
    }

    // maximal line integrals along axis lines through the max points
    let c_f = max_axis_line_integral(f, quad);
    let g_norm = g.clone().scaled(-sup_g.ln());
    let c_g = max_axis_line_integral(&g_norm, quad);
    let op_norm_hi = c_f / (theta * c_g);
    let (int_g, _) = g_norm.s_integral(1.0, quad)?;
    let op_norm_lo = delta / (sup_f * int_g) * (theta * c_g / c_f).powi(f.dim as i32 - 1);
    Ok(SearchBox {
        theta,
        rho,
        op_norm_hi,
        op_norm_lo,
        sup_f,
        c_f,
        c_g,
    })
}

fn max_axis_line_integral(f: &LogConcaveFn, quad: &QuadCfg) -> f64 {
    let (c, _) = f.max_point();
    let (lo, hi) = bounded_box(f);
    let mut best = 0.0f64;
    for i in 0..f.dim {
        let probe = |t: f64| {
            let mut x = c.clone();
            x[i] = t;
            f.value(&x)
        };
        let (v, _) = adaptive_1d(&probe, lo[i], hi[i], quad);
        best = best.max(v);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Polytope;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    fn interval_fn(a: f64, b: f64) -> LogConcaveFn {
        LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::interval(a, b)))
    }

    #[test]
    fn apply_examples() {
        let g = interval_fn(-1.0, 1.0);
        let id = Position::identity(g.clone(), Mode::John);
        assert_eq!(id.apply(&v(&[0.3])), 1.0);

        // John, A = 2, alpha = 3, a = 1: h(2) = 3 since (2-1)/2 in [-1,1]
        let pos = Position::new(
            g,
            ExtOp::new(DMatrix::from_vec(1, 1, vec![2.0]), 3.0, v(&[1.0])),
            Mode::John,
        );
        assert!((pos.apply(&v(&[2.0])) - 3.0).abs() < 1e-12);

        // Löwner, A = 2, alpha = e, a = 0, g = e^{-|x|}: h(1) = e^{-3}
        let e = LogConcaveFn::exp_neg_norm(1);
        let pos = Position::new(
            e,
            ExtOp::new(
                DMatrix::from_vec(1, 1, vec![2.0]),
                std::f64::consts::E,
                v(&[0.0]),
            ),
            Mode::Lowner,
        );
        assert!((pos.apply(&v(&[1.0])) - (-3.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn s_integral_of_examples() {
        let g = interval_fn(-1.0, 1.0);
        let id = Position::identity(g.clone(), Mode::John);
        assert_eq!(id.s_integral_of(1.0, 4.0).unwrap(), 4.0);

        let pos = Position::new(
            LogConcaveFn::indicator(ConvexBody::unit_ball(2)),
            ExtOp::new(DMatrix::from_diagonal(&v(&[1.0, 3.0])), 2.0, v(&[0.0, 0.0])),
            Mode::John,
        );
        assert!((pos.s_integral_of(1.0, 4.0).unwrap() - 24.0).abs() < 1e-12);

        let pos = Position::new(
            g,
            ExtOp::new(DMatrix::identity(1, 1), 0.5f64.exp(), v(&[0.0])),
            Mode::John,
        );
        assert!((pos.s_integral_of(2.0, 2.0).unwrap() - 2.0 * std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn john_margin_examples() {
        let cfg = MarginCfg::default();

        // identity, f = g: zero violation, everything tight
        let f = interval_fn(-1.0, 1.0);
        let pos = Position::identity(f.clone(), Mode::John);
        let rep = john_margin(&f, &pos, &cfg);
        assert_eq!(rep.violation, 0.0);
        assert!(!rep.witnesses.is_empty());

        // disk at double height inside the square: violation ln 2
        let sq = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::cube(2, 1.0)));
        let disk = LogConcaveFn::indicator(ConvexBody::unit_ball(2));
        let pos = Position::new(
            disk,
            ExtOp::new(DMatrix::identity(2, 2), 2.0, v(&[0.0, 0.0])),
            Mode::John,
        );
        let rep = john_margin(&sq, &pos, &cfg);
        assert!((rep.violation - 2.0f64.ln()).abs() < 1e-12);

        // unit interval position against the Gaussian: violation 1/2 at ±1
        let gauss = LogConcaveFn::std_gaussian(1);
        let pos = Position::identity(interval_fn(-1.0, 1.0), Mode::John);
        let rep = john_margin(&gauss, &pos, &cfg);
        assert!((rep.violation - 0.5).abs() < 1e-9);

        // escape of the support is an infinite violation
        let pos = Position::new(
            interval_fn(-1.0, 1.0),
            ExtOp::new(DMatrix::identity(1, 1), 1.0, v(&[0.0])),
            Mode::John,
        );
        let small = interval_fn(-0.5, 0.5);
        let rep = john_margin(&small, &pos, &cfg);
        assert!(rep.violation.is_infinite());
    }

    #[test]
    fn lowner_margin_examples() {
        let cfg = MarginCfg::default();
        let f = interval_fn(-1.0, 1.0);
        let g = LogConcaveFn::exp_neg_norm(1);

        // h = e * g dominates chi_[-1,1], tight at ±1
        let pos = Position::new(
            g.clone(),
            ExtOp::new(
                DMatrix::identity(1, 1),
                1.0 / std::f64::consts::E,
                v(&[0.0]),
            ),
            Mode::Lowner,
        );
        let rep = lowner_margin(&f, &pos, &cfg);
        assert!(rep.violation.abs() < 1e-12);
        assert!(rep.witnesses.iter().any(|w| (w.u[0] - 1.0).abs() < 1e-9));
        assert!(rep.witnesses.iter().any(|w| (w.u[0] + 1.0).abs() < 1e-9));

        // h = g alone fails by exactly 1 at ±1
        let pos = Position::identity(g.clone(), Mode::Lowner);
        let rep = lowner_margin(&f, &pos, &cfg);
        assert!((rep.violation - 1.0).abs() < 1e-12);

        // identity with f = g is tight
        let pos = Position::identity(g.clone(), Mode::Lowner);
        let rep = lowner_margin(&g, &pos, &cfg);
        assert!(rep.violation.abs() < 1e-9);
    }

    #[test]
    fn interpolation_examples() {
        let ball = LogConcaveFn::indicator(ConvexBody::unit_ball(2));
        let p1 = Position::new(
            ball.clone(),
            ExtOp::new(DMatrix::identity(2, 2), 1.0, v(&[0.0, 0.0])),
            Mode::John,
        );
        let p2 = Position::new(
            ball.clone(),
            ExtOp::new(DMatrix::identity(2, 2) * 3.0, 1.0, v(&[0.0, 0.0])),
            Mode::John,
        );
        let b = interpolate_inner(&p1, &p2, 0.5).unwrap();
        assert!((b.elem.mat[(0, 0)] - 2.0).abs() < 1e-14);
        let det = b.elem.mat.clone().lu().determinant();
        assert!(det >= 3.0); // Minkowski: det(blend) >= geometric mean = 3

        let same = interpolate_inner(&p1, &p1, 0.5).unwrap();
        assert!((&same.elem.mat - &p1.elem.mat).norm() < 1e-14);

        let p4 = Position::new(
            ball,
            ExtOp::new(DMatrix::identity(2, 2), 4.0, v(&[0.0, 0.0])),
            Mode::John,
        );
        let b = interpolate_inner(&p1, &p4, 0.5).unwrap();
        assert!((b.elem.alpha - 2.0).abs() < 1e-14);
    }

    #[test]
    fn perturb_examples() {
        let g = interval_fn(-1.0, 1.0);
        let dir = ExtOp::new(DMatrix::zeros(1, 1), 1.0, v(&[0.0]));
        let p = perturb(&g, Mode::John, &dir, 0.0).unwrap();
        assert_eq!(p.elem.alpha, 1.0);
        let p = perturb(&g, Mode::John, &dir, 0.1).unwrap();
        assert!((p.elem.alpha - 1.1).abs() < 1e-15);
        assert_eq!(p.elem.mat[(0, 0)], 1.0);

        let dir = ExtOp::new(DMatrix::identity(1, 1), 0.0, v(&[0.0]));
        let p = perturb(&g, Mode::John, &dir, 0.5).unwrap();
        assert!((p.elem.mat[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((p.s_integral_of(1.0, 2.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn perturb_derivative_first_order() {
        let g = LogConcaveFn::exp_neg_norm(2);
        let dir = ExtOp::new(
            DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 0.1, 0.4]),
            0.7,
            v(&[0.5, -0.1]),
        );
        // John components are linear in t: finite differences are exact
        for t in [1e-2, 1e-3] {
            let p = perturb(&g, Mode::John, &dir, t).unwrap();
            let dmat = (&p.elem.mat - DMatrix::identity(2, 2)) / t;
            assert!((dmat - &dir.mat).norm() < 1e-10);
            assert!(((p.elem.alpha - 1.0) / t - dir.alpha).abs() < 1e-10);
            assert!((&p.elem.vec / t - &dir.vec).norm() < 1e-10);
        }
        // Löwner operator part is (Id - tH)^{-1}: first-order convergence
        let mut errs = Vec::new();
        for t in [1e-2, 1e-3, 1e-4] {
            let p = perturb(&g, Mode::Lowner, &dir, t).unwrap();
            let dmat = (&p.elem.mat - DMatrix::identity(2, 2)) / t;
            errs.push((dmat - &dir.mat).norm());
        }
        assert!(errs[1] < 0.15 * errs[0]);
        assert!(errs[2] < 0.15 * errs[1]);
    }

    #[test]
    fn search_box_examples() {
        let quad = QuadCfg::default();
        let f = interval_fn(-1.0, 1.0);
        let g = interval_fn(-1.0, 1.0);
        let sb = search_box(&f, &g, 0.1, &quad).unwrap();
        // \int min(1, theta) over [-1,1] = 2 theta = 0.1 at theta = 0.05
        assert!((sb.theta - 0.05).abs() < 1e-6);
        assert!((sb.rho - 1.0).abs() < 1e-6);
        assert_eq!(sb.sup_f, 1.0);

        let gauss = LogConcaveFn::std_gaussian(1);
        let sb = search_box(&gauss, &g, 0.1, &quad).unwrap();
        // the bisection target: \int min(f, theta) = 0.1
        let probe = |x: &DVector<f64>| gauss.value(x).min(sb.theta);
        let lo = v(&[-40.0]);
        let hi = v(&[40.0]);
        let (mass, _) = integrate_box(&probe, &lo, &hi, &quad);
        assert!((mass - 0.1).abs() < 1e-4);
    }

    #[test]
    fn compose_matches_pointwise() {
        // composing a perturbation must match evaluating the perturbed map
        let g = LogConcaveFn::std_gaussian(2);
        let base = Position::new(
            g,
            ExtOp::new(
                DMatrix::from_row_slice(2, 2, &[1.2, 0.1, 0.1, 0.9]),
                1.3,
                v(&[0.2, -0.1]),
            ),
            Mode::John,
        );
        let dir = ExtOp::new(
            DMatrix::from_row_slice(2, 2, &[0.2, -0.1, 0.05, 0.3]),
            0.4,
            v(&[0.1, 0.2]),
        );
        let t = 0.17;
        let stepped = base.compose_perturbation(&dir, t).unwrap();
        // the composed position is h_t(x) = (1+t gamma) h((Id+tH)^{-1}(x - t h))
        let id = DMatrix::identity(2, 2);
        let step = &id + &dir.mat * t;
        let step_inv = step.try_inverse().unwrap();
        for x in [v(&[0.3, 0.4]), v(&[-0.5, 0.8]), v(&[1.0, -1.0])] {
            let direct = (1.0 + t * dir.alpha) * base.apply(&(&step_inv * (&x - &dir.vec * t)));
            assert!((stepped.apply(&x) - direct).abs() < 1e-12);
        }
    }
}
