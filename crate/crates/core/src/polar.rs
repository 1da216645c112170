//! Log-conjugate (polar) machinery.
//!
//! The polar of `f = e^{-psi}` is `f° = e^{-psi*}` with
//! `psi*(y) = sup_x <x, y> - psi(x)`. Closed forms are used for the
//! kinds that admit them (indicators, Gaussians, power-law radial
//! profiles, polyhedral `psi`); everything else goes through a numeric
//! per-query concave maximization with memoization.
//!
//! Two algebraic identities let the Löwner pipeline avoid re-conjugation:
//! for `f~(x) = alpha f(Ax + a)`,
//! `f~°(y) = f°(A^-T y) / alpha * e^{<A^-T y, a>}`, and for powers,
//! `(f^q)°(y) = (f°(y/q))^q`.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::extreal::ExtReal;
use crate::geom::{ConvexBody, Polytope};
use crate::model::{AffinePiece, FnKind, LogConcaveFn, Profile1D};
use crate::oracle::{PsiOracle, TransformedFn};
use crate::search;
use crate::Result;

/// How a polar is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarMethod {
    ClosedForm,
    Numeric,
}

/// The polar `f°` of a primal function, usable as a `psi` oracle.
#[derive(Clone)]
pub struct PolarFn {
    oracle: Arc<dyn PsiOracle>,
    pub method: PolarMethod,
    pub dim: usize,
}

impl PolarFn {
    pub fn oracle(&self) -> Arc<dyn PsiOracle> {
        self.oracle.clone()
    }
}

impl PsiOracle for PolarFn {
    fn dim(&self) -> usize {
        self.dim
    }
    fn psi(&self, x: &DVector<f64>) -> ExtReal {
        self.oracle.psi(x)
    }
    fn subgradients(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        self.oracle.subgradients(x)
    }
    fn hessian_psi(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.oracle.hessian_psi(x)
    }
    fn support_normals(&self, u: &DVector<f64>, tol: f64) -> Vec<DVector<f64>> {
        self.oracle.support_normals(u, tol)
    }
    fn on_support_boundary(&self, u: &DVector<f64>, tol: f64) -> bool {
        self.oracle.on_support_boundary(u, tol)
    }
    fn support_box(&self) -> (DVector<f64>, DVector<f64>) {
        self.oracle.support_box()
    }
    fn max_point(&self) -> (DVector<f64>, f64) {
        self.oracle.max_point()
    }
}

// ----------------------------------------------------------------------
// numeric conjugation
// ----------------------------------------------------------------------

/// Configuration of the per-query conjugation.
#[derive(Debug, Clone)]
pub struct ConjCfg {
    /// Nodes of the bracketing scan per axis.
    pub scan_n: usize,
    /// Golden-section tolerance (absolute, per unit of box width).
    pub golden_tol: f64,
    /// Enable the memo cache (disable for concurrent hammering).
    pub cache: bool,
}

impl Default for ConjCfg {
    fn default() -> Self {
        ConjCfg {
            scan_n: 33,
            golden_tol: 1e-12,
            cache: true,
        }
    }
}

/// `psi*(y)` and a maximizer, by bracketed nested golden-section over the
/// (truncated) support box, then a Newton polish where `psi` is smooth.
/// `PosInf` when the supremum diverges (`y` outside `dom psi*`).
pub fn conjugate_at(
    oracle: &dyn PsiOracle,
    y: &DVector<f64>,
    cfg: &ConjCfg,
) -> (ExtReal, Option<DVector<f64>>) {
    let d = oracle.dim();
    let (slo, shi) = oracle.support_box();
    let mut radius = 4.0;
    for _ in 0..24 {
        let mut lo = DVector::zeros(d);
        let mut hi = DVector::zeros(d);
        let mut clipped = vec![false; d];
        for i in 0..d {
            lo[i] = if slo[i].is_finite() { slo[i] } else { -radius };
            hi[i] = if shi[i].is_finite() { shi[i] } else { radius };
            clipped[i] = !slo[i].is_finite() || !shi[i].is_finite();
        }
        let neg_phi = |x: &DVector<f64>| match oracle.psi(x) {
            ExtReal::Finite(p) => (p - y.dot(x)).clamp(-search::BIG, search::BIG),
            ExtReal::PosInf => search::BIG,
        };
        let (mut xstar, mut val) = max_over_box(&neg_phi, &lo, &hi, cfg);
        if val >= search::BIG {
            return (ExtReal::PosInf, None); // empty effective domain slice
        }
        // expand truncated directions until the maximizer is interior
        let hugging = (0..d).any(|i| {
            clipped[i]
                && ((xstar[i] - lo[i]).abs() < 0.02 * (hi[i] - lo[i])
                    || (hi[i] - xstar[i]).abs() < 0.02 * (hi[i] - lo[i]))
        });
        if hugging && radius < 1e7 {
            radius *= 4.0;
            continue;
        }
        if hugging {
            // keeps growing: sup is infinite
            return (ExtReal::PosInf, None);
        }
        newton_polish(oracle, y, &mut xstar, &mut val);
        return (ExtReal::Finite(-val), Some(xstar));
    }
    (ExtReal::PosInf, None)
}

/// Minimize a clamped objective by bracketed golden-section nested over
/// the axes (valid for convex objectives).
fn max_over_box(
    f: &dyn Fn(&DVector<f64>) -> f64,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    cfg: &ConjCfg,
) -> (DVector<f64>, f64) {
    let d = lo.len();
    if d == 1 {
        let g = |t: f64| f(&DVector::from_vec(vec![t]));
        let (t, v) = scan_golden(&g, lo[0], hi[0], cfg);
        return (DVector::from_vec(vec![t]), v);
    }
    let tail_lo = DVector::from_fn(d - 1, |i, _| lo[i + 1]);
    let tail_hi = DVector::from_fn(d - 1, |i, _| hi[i + 1]);
    let inner_val = |t: f64| {
        let g = |rest: &DVector<f64>| {
            let mut x = DVector::zeros(d);
            x[0] = t;
            for i in 1..d {
                x[i] = rest[i - 1];
            }
            f(&x)
        };
        max_over_box(&g, &tail_lo, &tail_hi, cfg).1
    };
    let (t, _) = scan_golden(&inner_val, lo[0], hi[0], cfg);
    let g = |rest: &DVector<f64>| {
        let mut x = DVector::zeros(d);
        x[0] = t;
        for i in 1..d {
            x[i] = rest[i - 1];
        }
        f(&x)
    };
    let (rest, v) = max_over_box(&g, &tail_lo, &tail_hi, cfg);
    let mut x = DVector::zeros(d);
    x[0] = t;
    for i in 1..d {
        x[i] = rest[i - 1];
    }
    (x, v)
}

/// Coarse scan to bracket the minimum, then golden-section.
fn scan_golden(f: &dyn Fn(f64) -> f64, a: f64, b: f64, cfg: &ConjCfg) -> (f64, f64) {
    let n = cfg.scan_n.max(5);
    let mut best_i = 0usize;
    let mut best_v = f64::INFINITY;
    for i in 0..n {
        let t = a + (b - a) * i as f64 / (n - 1) as f64;
        let v = f(t);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let step = (b - a) / (n - 1) as f64;
    let mut l = (a + step * best_i as f64 - step).max(a);
    let mut r = (a + step * best_i as f64 + step).min(b);
    let inv_phi: f64 = (5f64.sqrt() - 1.0) / 2.0;
    let tol = cfg.golden_tol * (b - a).max(1.0);
    let mut x1 = r - inv_phi * (r - l);
    let mut x2 = l + inv_phi * (r - l);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while r - l > tol {
        if f1 <= f2 {
            r = x2;
            x2 = x1;
            f2 = f1;
            x1 = r - inv_phi * (r - l);
            f1 = f(x1);
        } else {
            l = x1;
            x1 = x2;
            f1 = f2;
            x2 = l + inv_phi * (r - l);
            f2 = f(x2);
        }
    }
    let m = 0.5 * (l + r);
    let fm = f(m);
    if fm <= best_v {
        (m, fm)
    } else {
        (a + step * best_i as f64, best_v)
    }
}

/// A few Newton steps on `grad psi(x) = y` where the Hessian exists.
fn newton_polish(oracle: &dyn PsiOracle, y: &DVector<f64>, x: &mut DVector<f64>, val: &mut f64) {
    for _ in 0..40 {
        let h = match oracle.hessian_psi(x) {
            Some(h) => h,
            None => return,
        };
        let ps = match oracle.subgradients(x) {
            Ok(ps) if ps.len() == 1 => ps,
            _ => return,
        };
        let grad = y - &ps[0]; // gradient of phi
        if grad.norm() <= 1e-10 {
            break;
        }
        let step = match h.clone().lu().solve(&grad) {
            Some(s) => s,
            None => return,
        };
        let mut t = 1.0;
        let phi_old = -*val;
        loop {
            let xn = &*x + &step * t;
            if let ExtReal::Finite(p) = oracle.psi(&xn) {
                let phi_new = y.dot(&xn) - p;
                if phi_new >= phi_old - 1e-15 {
                    *x = xn;
                    *val = -phi_new;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                return;
            }
        }
    }
}

type ConjCacheEntry = (f64, Option<Vec<f64>>);

/// Memoizing numeric conjugate of an arbitrary oracle.
pub struct NumericConjugate {
    primal: Arc<dyn PsiOracle>,
    cfg: ConjCfg,
    cache: Mutex<BTreeMap<Vec<i64>, ConjCacheEntry>>,
}

impl NumericConjugate {
    pub fn new(primal: Arc<dyn PsiOracle>, cfg: ConjCfg) -> Self {
        NumericConjugate {
            primal,
            cfg,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    fn key(y: &DVector<f64>) -> Vec<i64> {
        y.iter()
            .map(|v| (v / 1e-12).round().clamp(-9e17, 9e17) as i64)
            .collect()
    }

    fn compute(&self, y: &DVector<f64>) -> (f64, Option<Vec<f64>>) {
        if self.cfg.cache {
            let key = Self::key(y);
            if let Some(hit) = self.cache.lock().unwrap().get(&key) {
                return hit.clone();
            }
            let (v, arg) = conjugate_at(self.primal.as_ref(), y, &self.cfg);
            let stored = (
                v.finite().unwrap_or(f64::INFINITY),
                arg.map(|a| a.iter().copied().collect()),
            );
            self.cache.lock().unwrap().insert(key, stored.clone());
            stored
        } else {
            let (v, arg) = conjugate_at(self.primal.as_ref(), y, &self.cfg);
            (
                v.finite().unwrap_or(f64::INFINITY),
                arg.map(|a| a.iter().copied().collect()),
            )
        }
    }
}

impl PsiOracle for NumericConjugate {
    fn dim(&self) -> usize {
        self.primal.dim()
    }

    fn psi(&self, y: &DVector<f64>) -> ExtReal {
        let (v, _) = self.compute(y);
        if v.is_finite() {
            ExtReal::Finite(v)
        } else {
            ExtReal::PosInf
        }
    }

    /// A maximizer of `<x, y> - psi(x)` is a subgradient of `psi*` at `y`.
    fn subgradients(&self, y: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        match self.compute(y).1 {
            Some(a) => Ok(vec![DVector::from_vec(a)]),
            None => Err(Error::EmptySubdifferential {
                point: y.iter().copied().collect(),
            }),
        }
    }

    fn support_normals(&self, _u: &DVector<f64>, _tol: f64) -> Vec<DVector<f64>> {
        vec![] // dom psi* boundary is not materialized for numeric polars
    }

    fn on_support_boundary(&self, _u: &DVector<f64>, _tol: f64) -> bool {
        false
    }

    fn support_box(&self) -> (DVector<f64>, DVector<f64>) {
        let d = self.dim();
        (
            DVector::from_element(d, f64::NEG_INFINITY),
            DVector::from_element(d, f64::INFINITY),
        )
    }
}

// ----------------------------------------------------------------------
// log-conjugate with closed forms
// ----------------------------------------------------------------------

/// The log-conjugate `f°`. Closed forms where the kind admits one,
/// numeric conjugation otherwise.
pub fn log_conjugate(f: &LogConcaveFn) -> PolarFn {
    let d = f.dim;
    match closed_form_conjugate(f) {
        Some(oracle) => PolarFn {
            oracle,
            method: PolarMethod::ClosedForm,
            dim: d,
        },
        None => PolarFn {
            oracle: Arc::new(NumericConjugate::new(
                Arc::new(f.clone()),
                ConjCfg::default(),
            )),
            method: PolarMethod::Numeric,
            dim: d,
        },
    }
}

fn closed_form_conjugate(f: &LogConcaveFn) -> Option<Arc<dyn PsiOracle>> {
    let d = f.dim;
    let c = f.ln_scale;
    match &f.kind {
        FnKind::Indicator(ConvexBody::Polytope(p)) => {
            let pieces: Vec<AffinePiece> = p
                .vertices()
                .into_iter()
                .map(|v| AffinePiece {
                    grad: v,
                    offset: 0.0,
                })
                .collect();
            if pieces.is_empty() {
                None
            } else {
                Some(Arc::new(
                    LogConcaveFn::piecewise(d, pieces, None).scaled(-c),
                ))
            }
        }
        FnKind::Indicator(ConvexBody::Ball(b)) => {
            if b.center.norm() < 1e-14 {
                Some(Arc::new(
                    LogConcaveFn::radial(d, Profile1D::Linear { slope: b.radius }).scaled(-c),
                ))
            } else {
                Some(Arc::new(TransformedFn {
                    base: Arc::new(LogConcaveFn::radial(
                        d,
                        Profile1D::Linear { slope: b.radius },
                    )),
                    lin: DMatrix::identity(d, d),
                    shift: DVector::zeros(d),
                    tilt: b.center.clone(),
                    offset: c,
                    outer: 1.0,
                }))
            }
        }
        FnKind::Gaussian { center, precision } => {
            let pinv = precision.clone().try_inverse()?;
            let quad = 0.5 * center.dot(&(precision * center));
            Some(Arc::new(
                LogConcaveFn::gaussian(-(precision * center), pinv).scaled(quad - c),
            ))
        }
        FnKind::Radial(Profile1D::Linear { slope }) => Some(Arc::new(
            LogConcaveFn::indicator(ConvexBody::ball(DVector::zeros(d), *slope)).scaled(-c),
        )),
        FnKind::Radial(Profile1D::PowerLaw { coeff, exponent }) if *exponent > 1.0 => {
            // (k r^p)* = k' s^{p'} with 1/p + 1/p' = 1 and
            // k' = ((p-1)/p) (k p)^{-1/(p-1)}
            let p = *exponent;
            let pd = p / (p - 1.0);
            let kprime = (p - 1.0) / p * (coeff * p).powf(-1.0 / (p - 1.0));
            Some(Arc::new(
                LogConcaveFn::radial(
                    d,
                    Profile1D::PowerLaw {
                        coeff: kprime,
                        exponent: pd,
                    },
                )
                .scaled(-c),
            ))
        }
        FnKind::ExponentialNorm { norm } => {
            let s = norm[(0, 0)];
            let is_scalar = norm.iter().enumerate().all(|(k, v)| {
                let (i, j) = (k % d, k / d);
                if i == j {
                    (v - s).abs() < 1e-14
                } else {
                    v.abs() < 1e-14
                }
            });
            if is_scalar && s > 0.0 {
                Some(Arc::new(
                    LogConcaveFn::indicator(ConvexBody::ball(DVector::zeros(d), s)).scaled(-c),
                ))
            } else {
                None
            }
        }
        FnKind::PiecewisePsi { pieces, domain } => polyhedral_conjugate(d, pieces, domain.as_ref())
            .map(|g| Arc::new(g.scaled(-c)) as Arc<dyn PsiOracle>),
        _ => None,
    }
}

/// Exact conjugate of a polyhedral `psi`: the supremum is attained at a
/// vertex of the epigraph, so the conjugate is the maximum of affine forms
/// indexed by those vertices. `None` when the epigraph has no vertices or
/// the conjugate domain is not representable.
fn polyhedral_conjugate(
    d: usize,
    pieces: &[AffinePiece],
    domain: Option<&Polytope>,
) -> Option<LogConcaveFn> {
    if let Some(p) = domain {
        let (lo, hi) = p.extents();
        if !(lo.iter().all(|v| v.is_finite()) && hi.iter().all(|v| v.is_finite())) {
            return None;
        }
    }
    // constraints in (x, tau): <g_k, x> - tau <= -b_k ; <n_j, x> <= c_j
    let mut normals: Vec<DVector<f64>> = Vec::new();
    let mut offsets: Vec<f64> = Vec::new();
    for p in pieces {
        let mut n = DVector::zeros(d + 1);
        for i in 0..d {
            n[i] = p.grad[i];
        }
        n[d] = -1.0;
        normals.push(n);
        offsets.push(-p.offset);
    }
    if let Some(p) = domain {
        for h in &p.halfspaces {
            let mut n = DVector::zeros(d + 1);
            for i in 0..d {
                n[i] = h.normal[i];
            }
            normals.push(n);
            offsets.push(h.offset);
        }
    }
    let epi = Polytope::new(
        d + 1,
        normals
            .iter()
            .zip(&offsets)
            .map(|(n, &o)| crate::geom::Halfspace {
                normal: n.clone(),
                offset: o,
            })
            .collect(),
    );
    // vertices of the epigraph (tau is bounded below on the domain)
    let verts = epi.vertices();
    if verts.is_empty() {
        return None;
    }
    let conj_pieces: Vec<AffinePiece> = {
        let mut out: Vec<AffinePiece> = Vec::new();
        for v in &verts {
            let x = DVector::from_fn(d, |i, _| v[i]);
            let tau = v[d];
            if !out
                .iter()
                .any(|p| (&p.grad - &x).norm() < 1e-9 && (p.offset + tau).abs() < 1e-9)
            {
                out.push(AffinePiece {
                    grad: x,
                    offset: -tau,
                });
            }
        }
        out
    };
    let conj_domain = if domain.is_some() {
        None // bounded primal domain: conjugate finite everywhere
    } else {
        let grads: Vec<DVector<f64>> = pieces.iter().map(|p| p.grad.clone()).collect();
        match Polytope::from_points(d, &grads) {
            Ok(p) => Some(p),
            Err(_) => return None,
        }
    };
    Some(LogConcaveFn::piecewise(d, conj_pieces, conj_domain))
}

// ----------------------------------------------------------------------
// algebraic images of polars
// ----------------------------------------------------------------------

/// Polar of `x -> alpha f(Ax + a)` from the polar of `f`, by formula.
pub fn polar_of_affine_image(
    fpolar: &PolarFn,
    a_mat: &DMatrix<f64>,
    alpha: f64,
    a_vec: &DVector<f64>,
) -> Result<PolarFn> {
    let d = fpolar.dim;
    let a_inv = a_mat.clone().try_inverse().ok_or_else(Error::singular)?;
    // psi~*(y) = psi*(A^-T y) + ln(alpha) - <A^-1 a, y>
    let t = TransformedFn {
        base: fpolar.oracle(),
        lin: a_inv.transpose(),
        shift: DVector::zeros(d),
        tilt: -(&a_inv * a_vec),
        offset: alpha.ln(),
        outer: 1.0,
    };
    Ok(PolarFn {
        oracle: Arc::new(t),
        method: fpolar.method,
        dim: d,
    })
}

/// Polar of `f^q` from the polar of `f`: `(f^q)°(y) = (f°(y/q))^q`.
pub fn power_polar(fpolar: &PolarFn, q: f64) -> PolarFn {
    assert!(q > 0.0);
    let d = fpolar.dim;
    if (q - 1.0).abs() < 1e-15 {
        return fpolar.clone();
    }
    let t = TransformedFn {
        base: fpolar.oracle(),
        lin: DMatrix::identity(d, d) / q,
        shift: DVector::zeros(d),
        tilt: DVector::zeros(d),
        offset: 0.0,
        outer: q,
    };
    PolarFn {
        oracle: Arc::new(t),
        method: fpolar.method,
        dim: d,
    }
}

/// Max deviation of `(f°)°` from `f` over the grid points interior to
/// `supp f` (double conjugation is the identity on proper log-concave
/// usc functions).
pub fn involution_check(f: &LogConcaveFn, grid: &[DVector<f64>]) -> f64 {
    let polar = log_conjugate(f);
    let cfg = ConjCfg::default();
    let mut worst = 0.0f64;
    for x in grid {
        if f.psi(x).is_infinite() {
            continue;
        }
        if f.on_support_boundary(x, 1e-7) {
            continue;
        }
        let (v, _) = conjugate_at(&polar, x, &cfg);
        let ff = v.neg_exp();
        worst = worst.max((ff - f.value(x)).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn cube_polar_is_sum_of_abs() {
        let f = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::cube(2, 1.0)));
        let p = log_conjugate(&f);
        assert_eq!(p.method, PolarMethod::ClosedForm);
        let y = v(&[0.7, -1.3]);
        assert!((p.psi(&y).unwrap_finite() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_self_conjugate() {
        let f = LogConcaveFn::std_gaussian(2);
        let p = log_conjugate(&f);
        assert_eq!(p.method, PolarMethod::ClosedForm);
        let y = v(&[0.4, 0.9]);
        assert!((p.psi(&y).unwrap_finite() - f.psi(&y).unwrap_finite()).abs() < 1e-12);
    }

    #[test]
    fn exp_norm_polar_is_interval() {
        let f = LogConcaveFn::exp_neg_norm(1);
        let p = log_conjugate(&f);
        assert_eq!(p.method, PolarMethod::ClosedForm);
        assert_eq!(p.psi(&v(&[0.5])), ExtReal::Finite(0.0));
        assert!(p.psi(&v(&[1.5])).is_infinite());
    }

    #[test]
    fn numeric_conjugate_matches_closed_gaussian() {
        let f = LogConcaveFn::std_gaussian(2);
        let cfg = ConjCfg::default();
        for y in [v(&[0.0, 0.0]), v(&[1.0, -0.5]), v(&[2.0, 2.0])] {
            let (val, arg) = conjugate_at(&f, &y, &cfg);
            let expect = 0.5 * y.norm_squared();
            assert!((val.unwrap_finite() - expect).abs() < 1e-9, "y={y:?}");
            let a = arg.unwrap();
            assert!((a - &y).norm() < 1e-6);
        }
    }

    #[test]
    fn polar_definition_inequality() {
        // f°(y) <= e^{-<x,y>} / f(x) for all x in supp f
        let fns = vec![
            LogConcaveFn::std_gaussian(1),
            LogConcaveFn::exp_neg_norm(1),
            LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::interval(-1.0, 1.0))),
        ];
        for f in &fns {
            let p = log_conjugate(f);
            for yv in [-1.5, -0.3, 0.0, 0.8, 2.0] {
                let y = v(&[yv]);
                let pv = p.psi(&y).neg_exp();
                for xv in [-0.9, -0.2, 0.1, 0.7] {
                    let x = v(&[xv]);
                    let fx = f.value(&x);
                    if fx > 0.0 {
                        assert!(pv <= (-(x.dot(&y))).exp() / fx + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn affine_image_identity_cases() {
        let f = LogConcaveFn::std_gaussian(1);
        let p = log_conjugate(&f);
        // f~(x) = f(x/2): A = 1/2, alpha = 1, a = 0 -> f~°(y) = f°(2y) = e^{-2y^2}
        let p2 = polar_of_affine_image(&p, &DMatrix::from_vec(1, 1, vec![0.5]), 1.0, &v(&[0.0]))
            .unwrap();
        let y = v(&[0.7]);
        assert!((p2.psi(&y).unwrap_finite() - 2.0 * 0.49).abs() < 1e-12);

        // identity transform
        let pid = polar_of_affine_image(&p, &DMatrix::identity(1, 1), 1.0, &v(&[0.0])).unwrap();
        assert!((pid.psi(&y).unwrap_finite() - p.psi(&y).unwrap_finite()).abs() < 1e-14);

        // alpha = e divides the polar by e
        let chi = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::interval(-1.0, 1.0)));
        let pc = log_conjugate(&chi);
        let pe = polar_of_affine_image(
            &pc,
            &DMatrix::identity(1, 1),
            std::f64::consts::E,
            &v(&[0.0]),
        )
        .unwrap();
        assert!((pe.psi(&y).unwrap_finite() - (y[0].abs() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn power_polar_identities() {
        let chi = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::interval(-1.0, 1.0)));
        let pc = log_conjugate(&chi); // e^{-|y|}
        let p2 = power_polar(&pc, 2.0); // e^{-2|y/2|} = e^{-|y|}
        let y = v(&[1.3]);
        assert!((p2.psi(&y).unwrap_finite() - 1.3).abs() < 1e-12);

        let g = LogConcaveFn::std_gaussian(1);
        let pg = log_conjugate(&g);
        let pg2 = power_polar(&pg, 2.0); // 2 * (y/2)^2 / 2 = y^2/4
        assert!((pg2.psi(&y).unwrap_finite() - 1.3f64.powi(2) / 4.0).abs() < 1e-12);

        let p1 = power_polar(&pc, 1.0);
        assert!((p1.psi(&y).unwrap_finite() - pc.psi(&y).unwrap_finite()).abs() < 1e-15);
    }

    #[test]
    fn involution_examples() {
        let g = LogConcaveFn::std_gaussian(1);
        let grid: Vec<DVector<f64>> = (0..31).map(|i| v(&[-3.0 + 0.2 * i as f64])).collect();
        assert!(involution_check(&g, &grid) < 1e-6);

        let chi = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::interval(-1.0, 1.0)));
        let grid: Vec<DVector<f64>> = (0..19).map(|i| v(&[-0.9 + 0.1 * i as f64])).collect();
        assert!(involution_check(&chi, &grid) < 1e-6);

        // tent restricted to [-1, 1]
        let tent = LogConcaveFn::piecewise(
            1,
            vec![
                AffinePiece {
                    grad: v(&[1.0]),
                    offset: 0.0,
                },
                AffinePiece {
                    grad: v(&[-1.0]),
                    offset: 0.0,
                },
            ],
            Some(Polytope::interval(-1.0, 1.0)),
        );
        let grid: Vec<DVector<f64>> = (0..19).map(|i| v(&[-0.9 + 0.1 * i as f64])).collect();
        assert!(involution_check(&tent, &grid) < 1e-4);
    }

    #[test]
    fn order_reversal_on_samples() {
        // g <= f pointwise  ==>  f° <= g°
        let f = LogConcaveFn::std_gaussian(1);
        let g = LogConcaveFn::gaussian(v(&[0.0]), DMatrix::from_vec(1, 1, vec![2.0]));
        let (pf, pg) = (log_conjugate(&f), log_conjugate(&g));
        for yv in [-2.0, -1.0, 0.0, 0.5, 1.5] {
            let y = v(&[yv]);
            assert!(g.value(&y) <= f.value(&y) + 1e-12);
            assert!(pf.psi(&y).neg_exp() <= pg.psi(&y).neg_exp() + 1e-12);
        }
    }

    #[test]
    fn powerlaw_radial_conjugate() {
        // psi = r^2 (coeff 1, p = 2): psi* = s^2 / 4
        let f = LogConcaveFn::radial(
            1,
            Profile1D::PowerLaw {
                coeff: 1.0,
                exponent: 2.0,
            },
        );
        let p = log_conjugate(&f);
        assert_eq!(p.method, PolarMethod::ClosedForm);
        let y = v(&[1.2]);
        assert!((p.psi(&y).unwrap_finite() - 1.2f64.powi(2) / 4.0).abs() < 1e-12);
    }
}

#[cfg(test)]
mod logconcavity_tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conjugate_outputs_are_log_concave() {
        // chord test on psi* for a closed-form and a numeric polar
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let polars = vec![
            log_conjugate(&LogConcaveFn::indicator(ConvexBody::Polytope(
                Polytope::cube(2, 1.0),
            ))),
            log_conjugate(&LogConcaveFn::std_gaussian(2)),
            log_conjugate(&LogConcaveFn::qconcave_power(2, 1.0)), // numeric route
        ];
        for p in &polars {
            for _ in 0..200 {
                let x = DVector::from_vec(vec![rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]);
                let y = DVector::from_vec(vec![rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]);
                let lam: f64 = rng.gen_range(0.1..0.9);
                let z = &x * lam + &y * (1.0 - lam);
                if let (ExtReal::Finite(px), ExtReal::Finite(py), ExtReal::Finite(pz)) =
                    (p.psi(&x), p.psi(&y), p.psi(&z))
                {
                    let tol = if p.method == PolarMethod::ClosedForm {
                        1e-9
                    } else {
                        1e-6
                    };
                    assert!(pz <= lam * px + (1.0 - lam) * py + tol);
                }
            }
        }
    }
}
