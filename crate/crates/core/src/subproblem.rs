//! Finite convex subproblem of the cutting-plane exchange loop.
//!
//! Maximize `s t + ln det A` over symmetric positive definite `A`, a
//! translation `a` (dropped in fixed-center mode) and a height `t`,
//! subject to finitely many convex cuts. Solved as a log-barrier central
//! path with damped Newton steps, then polished to machine precision by a
//! Newton solve of the active-set KKT system. A strictly feasible anchor
//! point must be supplied; infeasible warm starts are pulled onto the
//! segment toward the anchor (the cuts are jointly convex, so the segment
//! re-enters the feasible region).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::extreal::ExtReal;
use crate::model::LogConcaveFn;
use crate::Result;

/// Decoded subproblem variables.
#[derive(Debug, Clone)]
pub struct Theta {
    pub a_mat: DMatrix<f64>,
    pub a_vec: DVector<f64>,
    pub t: f64,
}

/// Variable layout: symmetric upper triangle of `A`, then the translation
/// (unless fixed-center), then `t`.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub d: usize,
    pub fixed_center: bool,
}

impl Layout {
    pub fn new(d: usize, fixed_center: bool) -> Self {
        Layout { d, fixed_center }
    }

    pub fn n_sym(&self) -> usize {
        self.d * (self.d + 1) / 2
    }

    pub fn n(&self) -> usize {
        self.n_sym() + if self.fixed_center { 0 } else { self.d } + 1
    }

    pub fn t_index(&self) -> usize {
        self.n() - 1
    }

    /// Index pairs `(i, j)`, `i <= j`, in layout order.
    pub fn sym_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_sym());
        for i in 0..self.d {
            for j in i..self.d {
                out.push((i, j));
            }
        }
        out
    }

    pub fn decode(&self, x: &DVector<f64>) -> Theta {
        let d = self.d;
        let mut a = DMatrix::zeros(d, d);
        for (k, (i, j)) in self.sym_pairs().iter().enumerate() {
            a[(*i, *j)] = x[k];
            a[(*j, *i)] = x[k];
        }
        let mut v = DVector::zeros(d);
        if !self.fixed_center {
            for i in 0..d {
                v[i] = x[self.n_sym() + i];
            }
        }
        Theta {
            a_mat: a,
            a_vec: v,
            t: x[self.t_index()],
        }
    }

    pub fn encode(&self, th: &Theta) -> DVector<f64> {
        let mut x = DVector::zeros(self.n());
        for (k, (i, j)) in self.sym_pairs().iter().enumerate() {
            x[k] = th.a_mat[(*i, *j)];
        }
        if !self.fixed_center {
            for i in 0..self.d {
                x[self.n_sym() + i] = th.a_vec[i];
            }
        }
        x[self.t_index()] = th.t;
        x
    }

    /// `d x n` Jacobian of `z = A y + a` with respect to the layout.
    fn map_jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut j = self.map_jacobian_linear(y);
        if !self.fixed_center {
            for i in 0..self.d {
                j[(i, self.n_sym() + i)] = 1.0;
            }
        }
        j
    }

    /// `d x n` Jacobian of `w = A y` (no translation block).
    fn map_jacobian_linear(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let d = self.d;
        let mut j = DMatrix::zeros(d, self.n());
        for (k, (i, jj)) in self.sym_pairs().iter().enumerate() {
            if i == jj {
                j[(*i, k)] = y[*jj];
            } else {
                j[(*i, k)] = y[*jj];
                j[(*jj, k)] = y[*i];
            }
        }
        j
    }
}

/// One convex constraint `c(theta) <= 0`.
#[derive(Clone)]
pub enum Cut {
    /// `t_coef * t + <n, A y + a> + konst <= 0`.
    Affine {
        y: DVector<f64>,
        n: DVector<f64>,
        konst: f64,
        t_coef: f64,
    },
    /// `t + psi(A y + a) - rhs <= 0` for a smooth `psi` oracle.
    Smooth {
        y: DVector<f64>,
        rhs: f64,
        func: Arc<LogConcaveFn>,
    },
    /// `|A y + a - center|^2 - radius^2 <= 0`.
    InBall {
        y: DVector<f64>,
        center: DVector<f64>,
        radius: f64,
    },
    /// `radius |A n| + <n, A center + a> - b <= 0` (image of a ball kept
    /// inside a facet).
    BallSupport {
        n: DVector<f64>,
        b: f64,
        center: DVector<f64>,
        radius: f64,
    },
    /// `|A|_F^2 - bound^2 <= 0`.
    FrobCap { bound: f64 },
    /// `|a|^2 - rho^2 <= 0`.
    VecCap { rho: f64 },
}

impl Cut {
    /// Guard cut (bound box), as opposed to a data cut.
    pub fn is_guard(&self) -> bool {
        matches!(self, Cut::FrobCap { .. } | Cut::VecCap { .. })
    }

    /// Value; `PosInf` where the composed `psi` is infinite.
    pub fn value(&self, _lay: &Layout, th: &Theta) -> ExtReal {
        match self {
            Cut::Affine {
                y,
                n,
                konst,
                t_coef,
            } => {
                let z = &th.a_mat * y + &th.a_vec;
                ExtReal::Finite(t_coef * th.t + n.dot(&z) + konst)
            }
            Cut::Smooth { y, rhs, func } => {
                let z = &th.a_mat * y + &th.a_vec;
                func.psi(&z).add_finite(th.t - rhs)
            }
            Cut::InBall { y, center, radius } => {
                let z = &th.a_mat * y + &th.a_vec;
                ExtReal::Finite((z - center).norm_squared() - radius * radius)
            }
            Cut::BallSupport {
                n,
                b,
                center,
                radius,
            } => {
                let w = &th.a_mat * n;
                let z = &th.a_mat * center + &th.a_vec;
                ExtReal::Finite(radius * w.norm() + n.dot(&z) - b)
            }
            Cut::FrobCap { bound } => ExtReal::Finite(th.a_mat.norm_squared() - bound * bound),
            Cut::VecCap { rho } => ExtReal::Finite(th.a_vec.norm_squared() - rho * rho),
        }
    }

    /// Gradient and (PSD) Hessian in layout coordinates. Only called where
    /// the value is finite.
    fn grad_hess(&self, lay: &Layout, th: &Theta) -> (DVector<f64>, DMatrix<f64>) {
        let n_var = lay.n();
        match self {
            Cut::Affine { y, n, t_coef, .. } => {
                let j = lay.map_jacobian(y);
                let mut g = j.transpose() * n;
                g[lay.t_index()] += t_coef;
                (g, DMatrix::zeros(n_var, n_var))
            }
            Cut::Smooth { y, func, .. } => {
                let z = &th.a_mat * y + &th.a_vec;
                let j = lay.map_jacobian(y);
                let grad_psi = func
                    .subgradients(&z)
                    .ok()
                    .and_then(|ps| ps.into_iter().next())
                    .unwrap_or_else(|| DVector::zeros(lay.d));
                let mut g = j.transpose() * grad_psi;
                g[lay.t_index()] += 1.0;
                let h = match func.hessian_psi(&z) {
                    Some(hp) => j.transpose() * hp * &j,
                    None => DMatrix::zeros(n_var, n_var),
                };
                (g, h)
            }
            Cut::InBall { y, center, .. } => {
                let z = &th.a_mat * y + &th.a_vec;
                let j = lay.map_jacobian(y);
                let g = j.transpose() * (z - center) * 2.0;
                let h = j.transpose() * &j * 2.0;
                (g, h)
            }
            Cut::BallSupport {
                n, center, radius, ..
            } => {
                let w = &th.a_mat * n;
                let wn = w.norm().max(1e-12);
                let jw = lay.map_jacobian_linear(n);
                let jc = lay.map_jacobian(center);
                let g = jw.transpose() * (&w / wn) * *radius + jc.transpose() * n;
                let wh = &w / wn;
                let proj = DMatrix::identity(lay.d, lay.d) - &wh * wh.transpose();
                let h = jw.transpose() * proj * &jw * (*radius / wn);
                (g, h)
            }
            Cut::FrobCap { .. } => {
                let mut g = DVector::zeros(n_var);
                let mut h = DMatrix::zeros(n_var, n_var);
                for (k, (i, j)) in lay.sym_pairs().iter().enumerate() {
                    let mult = if i == j { 2.0 } else { 4.0 };
                    g[k] = mult * th.a_mat[(*i, *j)];
                    h[(k, k)] = mult;
                }
                (g, h)
            }
            Cut::VecCap { .. } => {
                let mut g = DVector::zeros(n_var);
                let mut h = DMatrix::zeros(n_var, n_var);
                for i in 0..lay.d {
                    if !lay.fixed_center {
                        g[lay.n_sym() + i] = 2.0 * th.a_vec[i];
                        h[(lay.n_sym() + i, lay.n_sym() + i)] = 2.0;
                    }
                }
                (g, h)
            }
        }
    }
}

/// Subproblem configuration.
#[derive(Debug, Clone)]
pub struct SubCfg {
    pub s_pow: f64,
    pub pd_floor: f64,
    /// Relative duality-gap target of the barrier stage.
    pub gap_tol: f64,
}

impl Default for SubCfg {
    fn default() -> Self {
        SubCfg {
            s_pow: 1.0,
            pd_floor: 1e-8,
            gap_tol: 1e-11,
        }
    }
}

/// Objective `s t + ln det A` (to maximize); returns `None` when `A` is
/// not positive definite.
fn objective(lay: &Layout, cfg: &SubCfg, th: &Theta) -> Option<f64> {
    let chol = th.a_mat.clone().cholesky()?;
    let mut ld = 0.0;
    for i in 0..lay.d {
        let l = chol.l_dirty()[(i, i)];
        if l <= 0.0 {
            return None;
        }
        ld += l.ln();
    }
    Some(cfg.s_pow * th.t + 2.0 * ld)
}

fn min_eig(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn grad_hess_logdet(lay: &Layout, th: &Theta) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let inv = th.a_mat.clone().try_inverse()?;
    let pairs = lay.sym_pairs();
    let n = lay.n();
    let mut g = DVector::zeros(n);
    for (k, (i, j)) in pairs.iter().enumerate() {
        g[k] = if i == j {
            inv[(*i, *i)]
        } else {
            2.0 * inv[(*i, *j)]
        };
    }
    // Hessian of -ln det: H[p][q] = tr(A^-1 E_p A^-1 E_q)
    let mut h = DMatrix::zeros(n, n);
    let basis: Vec<DMatrix<f64>> = pairs
        .iter()
        .map(|(i, j)| {
            let mut e = DMatrix::zeros(lay.d, lay.d);
            e[(*i, *j)] = 1.0;
            e[(*j, *i)] = 1.0;
            e
        })
        .collect();
    let pre: Vec<DMatrix<f64>> = basis.iter().map(|e| &inv * e).collect();
    for p in 0..pairs.len() {
        for q in p..pairs.len() {
            let tr = (&pre[p] * &pre[q]).trace();
            h[(p, q)] = tr;
            h[(q, p)] = tr;
        }
    }
    Some((g, h))
}

/// Strict feasibility (all cuts negative, `A` comfortably PD).
fn strictly_feasible(lay: &Layout, cfg: &SubCfg, cuts: &[Cut], th: &Theta, slack: f64) -> bool {
    if min_eig(&th.a_mat) < cfg.pd_floor {
        return false;
    }
    cuts.iter().all(|c| match c.value(lay, th) {
        ExtReal::Finite(v) => v < -slack,
        ExtReal::PosInf => false,
    })
}

/// Pull a (possibly infeasible) start onto the segment toward the anchor.
fn feasible_start(
    lay: &Layout,
    cfg: &SubCfg,
    cuts: &[Cut],
    anchor: &Theta,
    warm: Option<&Theta>,
) -> Result<Theta> {
    if let Some(w) = warm {
        let xa = lay.encode(anchor);
        let xw = lay.encode(w);
        let mut lam = 0.97;
        for _ in 0..60 {
            let x = &xa * (1.0 - lam) + &xw * lam;
            let th = lay.decode(&x);
            if strictly_feasible(lay, cfg, cuts, &th, 1e-12) {
                return Ok(th);
            }
            lam *= 0.7;
        }
    }
    if strictly_feasible(lay, cfg, cuts, anchor, 0.0) {
        Ok(anchor.clone())
    } else {
        let offending = cuts
            .iter()
            .enumerate()
            .filter(|(_, c)| !matches!(c.value(lay, anchor), ExtReal::Finite(v) if v < 0.0))
            .map(|(i, _)| i.to_string())
            .collect::<Vec<_>>()
            .join(",");
        Err(Error::NumericalFailure {
            context: "finite_subproblem",
            detail: format!("anchor violates cuts [{offending}]"),
        })
    }
}

/// Solve the finite subproblem. `anchor` must be strictly feasible for all
/// cuts; `warm` is the previous outer iterate.
pub fn finite_subproblem(
    lay: &Layout,
    cfg: &SubCfg,
    cuts: &[Cut],
    anchor: &Theta,
    warm: Option<&Theta>,
) -> Result<Theta> {
    let mut th = feasible_start(lay, cfg, cuts, anchor, warm)?;
    let m = cuts.len().max(1) as f64;
    let obj0 = objective(lay, cfg, &th).unwrap_or(0.0);
    let mut tau = (1.0 + m / (1.0 + obj0.abs())).max(1.0);
    let target = |obj: f64| cfg.gap_tol * (1.0 + obj.abs());

    for _outer in 0..48 {
        let exit = newton_on_barrier(lay, cfg, cuts, tau, &mut th)?;
        let obj = objective(lay, cfg, &th).unwrap_or(f64::NEG_INFINITY);
        if std::env::var("LOGPOS_DEBUG_SUBPROBLEM").is_ok() {
            eprintln!("tau={tau:.3e} obj={obj:.12} exit={exit}");
        }
        if m / tau <= target(obj) {
            break;
        }
        tau *= 18.0;
    }
    polish(lay, cfg, cuts, &mut th);
    Ok(th)
}

/// Damped Newton on `tau * (-obj) + barrier`.
fn newton_on_barrier(
    lay: &Layout,
    cfg: &SubCfg,
    cuts: &[Cut],
    tau: f64,
    th: &mut Theta,
) -> Result<&'static str> {
    let n = lay.n();
    for _iter in 0..80 {
        let x = lay.encode(th);
        let (gd, hd) = grad_hess_logdet(lay, th).ok_or(Error::NumericalFailure {
            context: "finite_subproblem",
            detail: "operator block left the PD cone".into(),
        })?;
        // phi = tau(-s t - ln det A) + sum -ln(-c_j)
        let mut grad = -&gd * tau;
        grad[lay.t_index()] -= tau * cfg.s_pow;
        let mut hess = hd * tau;
        let mut value = match objective(lay, cfg, th) {
            Some(o) => -tau * o,
            None => return Err(Error::singular()),
        };
        for c in cuts {
            let v = match c.value(lay, th) {
                ExtReal::Finite(v) if v < 0.0 => v,
                _ => {
                    return Err(Error::NumericalFailure {
                        context: "finite_subproblem",
                        detail: "iterate left the feasible region".into(),
                    })
                }
            };
            let (cg, ch) = c.grad_hess(lay, th);
            value += -(-v).ln();
            grad += &cg / (-v);
            hess += &ch / (-v) + (&cg / v) * (cg.transpose() / v);
        }
        for i in 0..n {
            hess[(i, i)] += 1e-12 * (1.0 + hess[(i, i)].abs());
        }
        let step = hess
            .clone()
            .lu()
            .solve(&(-&grad))
            .ok_or_else(Error::singular)?;
        let decrement = grad.dot(&(-&step)).max(0.0);
        if decrement * 0.5 <= 1e-13 * (1.0 + value.abs()) {
            return Ok("decrement");
        }
        // backtracking line search with feasibility guard
        let mut stept = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let xn = &x + &step * stept;
            let thn = lay.decode(&xn);
            if strictly_feasible(lay, cfg, cuts, &thn, 0.0) {
                let mut vn = match objective(lay, cfg, &thn) {
                    Some(o) => -tau * o,
                    None => {
                        stept *= 0.5;
                        continue;
                    }
                };
                let mut ok = true;
                for c in cuts {
                    match c.value(lay, &thn) {
                        ExtReal::Finite(v) if v < 0.0 => vn += -(-v).ln(),
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok && vn <= value - 0.25 * stept * decrement {
                    *th = thn;
                    accepted = true;
                    break;
                }
            }
            stept *= 0.5;
        }
        if !accepted {
            return Ok("linesearch"); // line search exhausted: accept current point
        }
    }
    Ok("iterlimit")
}

/// Newton polish of the active-set KKT system, run from the barrier
/// solution; silently keeps the barrier answer when it does not converge.
fn polish(lay: &Layout, cfg: &SubCfg, cuts: &[Cut], th: &mut Theta) {
    let n = lay.n();
    // active set from the barrier point
    let mut active: Vec<usize> = Vec::new();
    for (j, c) in cuts.iter().enumerate() {
        if let ExtReal::Finite(v) = c.value(lay, th) {
            if v > -1e-5 * (1.0 + th.t.abs()) {
                active.push(j);
            }
        }
    }
    if active.is_empty() {
        return;
    }
    for _round in 0..4 {
        let k = active.len();
        let mut x = lay.encode(th);
        let mut lam = DVector::from_element(k, 1.0);
        let mut best: Option<(DVector<f64>, DVector<f64>, f64)> = None;
        for _it in 0..60 {
            let thx = lay.decode(&x);
            let (gd, hd) = match grad_hess_logdet(lay, &thx) {
                Some(v) => v,
                None => break,
            };
            let mut grad_obj = gd;
            grad_obj[lay.t_index()] += cfg.s_pow;
            // residual: grad_obj - sum lam_j grad c_j ; c_act
            let mut r1 = grad_obj.clone();
            let mut jac = DMatrix::zeros(k, n);
            let mut r2 = DVector::zeros(k);
            let mut hess = -hd; // Hessian of obj is -H_logdet
            let mut bad = false;
            for (row, &j) in active.iter().enumerate() {
                let v = match cuts[j].value(lay, &thx) {
                    ExtReal::Finite(v) => v,
                    ExtReal::PosInf => {
                        bad = true;
                        break;
                    }
                };
                let (cg, ch) = cuts[j].grad_hess(lay, &thx);
                r1 -= &cg * lam[row];
                jac.row_mut(row).copy_from(&cg.transpose());
                r2[row] = v;
                hess -= ch * lam[row];
            }
            if bad {
                break;
            }
            let res = (r1.norm_squared() + r2.norm_squared()).sqrt();
            if best.as_ref().map(|(_, _, b)| res < *b).unwrap_or(true) {
                best = Some((x.clone(), lam.clone(), res));
            }
            if res < 1e-12 * (1.0 + th.t.abs()) {
                break;
            }
            // assemble [[ -hess, J^T ], [ J, 0 ]] (Newton on stationarity)
            let mut kkt = DMatrix::zeros(n + k, n + k);
            for i in 0..n {
                for jj in 0..n {
                    kkt[(i, jj)] = -hess[(i, jj)];
                }
                kkt[(i, i)] += 1e-13;
            }
            for row in 0..k {
                for jj in 0..n {
                    kkt[(n + row, jj)] = jac[(row, jj)];
                    kkt[(jj, n + row)] = jac[(row, jj)];
                }
            }
            let mut rhs = DVector::zeros(n + k);
            for i in 0..n {
                rhs[i] = r1[i];
            }
            for row in 0..k {
                rhs[n + row] = -r2[row];
            }
            let step = match kkt.lu().solve(&rhs) {
                Some(s) => s,
                None => break,
            };
            let mut stept = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let xn = &x + step.rows(0, n) * stept;
                let thn = lay.decode(&xn);
                if min_eig(&thn.a_mat) >= cfg.pd_floor * 0.5 {
                    let lamn = &lam + step.rows(n, k) * stept;
                    x = xn;
                    lam = lamn;
                    moved = true;
                    break;
                }
                stept *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let Some((xb, lamb, res)) = best else { return };
        if res > 1e-9 * (1.0 + th.t.abs()) {
            return; // polish failed: keep the barrier answer
        }
        // drop negative multipliers and re-run if needed
        let negatives: Vec<usize> = (0..active.len()).filter(|&r| lamb[r] < -1e-10).collect();
        let candidate = lay.decode(&xb);
        let feasible = cuts.iter().all(|c| match c.value(lay, &candidate) {
            ExtReal::Finite(v) => v <= 1e-9,
            ExtReal::PosInf => false,
        });
        if negatives.is_empty() && feasible {
            if objective(lay, cfg, &candidate) >= objective(lay, cfg, th) {
                *th = candidate;
            }
            return;
        }
        if negatives.is_empty() {
            return;
        }
        for &r in negatives.iter().rev() {
            active.remove(r);
        }
        if active.is_empty() {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchor(lay: &Layout, eps: f64, t: f64) -> Theta {
        Theta {
            a_mat: DMatrix::identity(lay.d, lay.d) * eps,
            a_vec: DVector::zeros(lay.d),
            t,
        }
    }

    fn guards(lay: &Layout) -> Vec<Cut> {
        let mut v = vec![Cut::FrobCap { bound: 50.0 }];
        if !lay.fixed_center {
            v.push(Cut::VecCap { rho: 50.0 });
        }
        // keep t within a generous box
        v.push(Cut::Affine {
            y: DVector::zeros(lay.d),
            n: DVector::zeros(lay.d),
            konst: -40.0,
            t_coef: 1.0,
        });
        v.push(Cut::Affine {
            y: DVector::zeros(lay.d),
            n: DVector::zeros(lay.d),
            konst: -40.0,
            t_coef: -1.0,
        });
        v
    }

    #[test]
    fn height_only_cut() {
        // max t + ln A  s.t. t <= 0 and A bounded by the Frobenius cap
        let lay = Layout::new(1, true);
        let cfg = SubCfg {
            s_pow: 1.0,
            ..Default::default()
        };
        let mut cuts = guards(&lay);
        cuts.push(Cut::Affine {
            y: DVector::zeros(1),
            n: DVector::zeros(1),
            konst: 0.0,
            t_coef: 1.0,
        });
        let th = finite_subproblem(&lay, &cfg, &cuts, &anchor(&lay, 0.1, -1.0), None).unwrap();
        assert!(th.t.abs() < 1e-7, "t = {}", th.t);
        assert!((th.a_mat[(0, 0)] - 50.0).abs() < 1e-4); // rides the cap
    }

    #[test]
    fn gaussian_two_cut_stationarity() {
        // cuts t + (A*1)^2/2 <= 0 at y = ±1: optimum A = 1, t = -1/2
        let lay = Layout::new(1, true);
        let cfg = SubCfg {
            s_pow: 1.0,
            ..Default::default()
        };
        let g = Arc::new(LogConcaveFn::std_gaussian(1));
        let mut cuts = guards(&lay);
        for y in [1.0, -1.0] {
            cuts.push(Cut::Smooth {
                y: DVector::from_vec(vec![y]),
                rhs: 0.0,
                func: g.clone(),
            });
        }
        let th = finite_subproblem(&lay, &cfg, &cuts, &anchor(&lay, 0.05, -4.0), None).unwrap();
        assert!(
            (th.a_mat[(0, 0)] - 1.0).abs() < 1e-7,
            "A = {}",
            th.a_mat[(0, 0)]
        );
        assert!((th.t + 0.5).abs() < 1e-7, "t = {}", th.t);
    }

    #[test]
    fn disk_in_square_exact_socp() {
        // exact ball-support cuts for the unit disk in the square, s = 1:
        // A = Id, a = 0, t = 0
        let lay = Layout::new(2, false);
        let cfg = SubCfg {
            s_pow: 1.0,
            ..Default::default()
        };
        let mut cuts = guards(&lay);
        for (nx, ny) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            cuts.push(Cut::BallSupport {
                n: DVector::from_vec(vec![nx, ny]),
                b: 1.0,
                center: DVector::zeros(2),
                radius: 1.0,
            });
        }
        cuts.push(Cut::Affine {
            y: DVector::zeros(2),
            n: DVector::zeros(2),
            konst: 0.0,
            t_coef: 1.0,
        });
        let th = finite_subproblem(&lay, &cfg, &cuts, &anchor(&lay, 0.05, -2.0), None).unwrap();
        assert!((th.a_mat.clone() - DMatrix::identity(2, 2)).norm() < 1e-6);
        assert!(th.a_vec.norm() < 1e-7);
        assert!(th.t.abs() < 1e-7);
    }

    #[test]
    fn warm_start_after_new_cut() {
        let lay = Layout::new(1, true);
        let cfg = SubCfg {
            s_pow: 1.0,
            ..Default::default()
        };
        let mut cuts = guards(&lay);
        cuts.push(Cut::Affine {
            y: DVector::zeros(1),
            n: DVector::zeros(1),
            konst: 0.0,
            t_coef: 1.0,
        });
        let th1 = finite_subproblem(&lay, &cfg, &cuts, &anchor(&lay, 0.1, -1.0), None).unwrap();
        // new cut t <= -1 makes th1 infeasible; warm start must recover
        cuts.push(Cut::Affine {
            y: DVector::zeros(1),
            n: DVector::zeros(1),
            konst: 1.0,
            t_coef: 1.0,
        });
        let th2 =
            finite_subproblem(&lay, &cfg, &cuts, &anchor(&lay, 0.1, -2.0), Some(&th1)).unwrap();
        assert!((th2.t + 1.0).abs() < 1e-7);
    }
}
