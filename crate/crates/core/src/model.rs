//! Representations and numeric oracles for proper log-concave functions.
//!
//! A function is stored as `f = e^{ln_scale} * e^{-psi_kind}`, i.e.
//! `psi(x) = psi_kind(x) - ln_scale`, where `psi_kind` is determined by one
//! of the enumerated classes. All oracles are pure and cheap; everything
//! downstream (margins, conjugates, solvers) is built on `psi`,
//! subgradients, support geometry and the decay envelope.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::extreal::ExtReal;
use crate::geom::{ConvexBody, Polytope};
use crate::quad::{adaptive_1d, integrate_box, QuadCfg};
use crate::search;
use crate::Result;

/// One affine piece `<grad, x> + offset` of a polyhedral `psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub grad: DVector<f64>,
    pub offset: f64,
}

/// Radial convex profiles `psi_0 : [0, inf) -> R ∪ {+inf}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile1D {
    /// `psi_0(r) = slope * r`; support is all of `R^d`.
    Linear { slope: f64 },
    /// `psi_0(r) = coeff * r^exponent`, `exponent > 1`.
    PowerLaw { coeff: f64, exponent: f64 },
    /// `psi_0(r) = scale / (1 - r) - scale` for `r < 1`, `+inf` beyond;
    /// decays to zero at the unit sphere faster than any power.
    InverseGap { scale: f64 },
    /// `psi_0(r) = -scale * ln(1 - r)`, i.e. `f = (1 - |x|)^scale` on the
    /// closed unit ball.
    NegLogGap { scale: f64 },
}

impl Profile1D {
    pub fn value(&self, r: f64) -> ExtReal {
        match self {
            Profile1D::Linear { slope } => ExtReal::Finite(slope * r),
            Profile1D::PowerLaw { coeff, exponent } => ExtReal::Finite(coeff * r.powf(*exponent)),
            Profile1D::InverseGap { scale } => {
                if r < 1.0 {
                    ExtReal::Finite(scale / (1.0 - r) - scale)
                } else {
                    ExtReal::PosInf
                }
            }
            Profile1D::NegLogGap { scale } => {
                if r < 1.0 {
                    ExtReal::Finite(-scale * (1.0 - r).ln())
                } else {
                    ExtReal::PosInf
                }
            }
        }
    }

    /// Derivative where finite (right derivative at 0).
    pub fn deriv(&self, r: f64) -> Option<f64> {
        match self {
            Profile1D::Linear { slope } => Some(*slope),
            Profile1D::PowerLaw { coeff, exponent } => {
                Some(coeff * exponent * r.powf(exponent - 1.0))
            }
            Profile1D::InverseGap { scale } => (r < 1.0).then(|| scale / ((1.0 - r) * (1.0 - r))),
            Profile1D::NegLogGap { scale } => (r < 1.0).then(|| scale / (1.0 - r)),
        }
    }

    pub fn second_deriv(&self, r: f64) -> Option<f64> {
        match self {
            Profile1D::Linear { .. } => Some(0.0),
            Profile1D::PowerLaw { coeff, exponent } => {
                Some(coeff * exponent * (exponent - 1.0) * r.powf(exponent - 2.0))
            }
            Profile1D::InverseGap { scale } => (r < 1.0).then(|| 2.0 * scale / (1.0 - r).powi(3)),
            Profile1D::NegLogGap { scale } => (r < 1.0).then(|| scale / ((1.0 - r) * (1.0 - r))),
        }
    }

    /// Supremum of the support radius (`None` = unbounded).
    pub fn radius_limit(&self) -> Option<f64> {
        match self {
            Profile1D::InverseGap { .. } | Profile1D::NegLogGap { .. } => Some(1.0),
            _ => None,
        }
    }

    fn scaled(&self, q: f64) -> Profile1D {
        match self {
            Profile1D::Linear { slope } => Profile1D::Linear { slope: q * slope },
            Profile1D::PowerLaw { coeff, exponent } => Profile1D::PowerLaw {
                coeff: q * coeff,
                exponent: *exponent,
            },
            Profile1D::InverseGap { scale } => Profile1D::InverseGap { scale: q * scale },
            Profile1D::NegLogGap { scale } => Profile1D::NegLogGap { scale: q * scale },
        }
    }
}

/// The enumerated function classes.
#[derive(Debug, Clone, PartialEq)]
pub enum FnKind {
    /// `chi_K` of a convex body.
    Indicator(ConvexBody),
    /// `psi = (x - center)' precision (x - center) / 2`.
    Gaussian {
        center: DVector<f64>,
        precision: DMatrix<f64>,
    },
    /// `psi = psi_0(|x|)`.
    Radial(Profile1D),
    /// `f = (1 - |x|^2)^exponent` on the closed unit ball.
    QConcavePower { exponent: f64 },
    /// `psi = |M x|`.
    ExponentialNorm { norm: DMatrix<f64> },
    /// `psi = max_k (<g_k, x> + b_k)` restricted to a polytope
    /// (`domain = None` means all of `R^d`).
    PiecewisePsi {
        pieces: Vec<AffinePiece>,
        domain: Option<Polytope>,
    },
    /// A smooth base truncated to a convex body.
    Restricted {
        base: Box<FnKind>,
        domain: ConvexBody,
    },
}

/// A proper log-concave function `f = e^{ln_scale - psi_kind}` with its
/// numeric oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct LogConcaveFn {
    pub kind: FnKind,
    pub dim: usize,
    /// Global height factor: `f = e^{ln_scale} e^{-psi_kind}`.
    pub ln_scale: f64,
    max_hint: Option<DVector<f64>>,
}

/// Report of the structural checks used as solver preconditions.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub proper: bool,
    pub bounded_support: bool,
    pub origin_interior: bool,
    pub max_at_origin: bool,
    pub smooth: bool,
    /// Witness of the first failed check, when any.
    pub witnesses: Vec<(String, Vec<f64>)>,
}

impl AssumptionReport {
    pub fn all_basic(&self) -> bool {
        self.proper && self.bounded_support && self.origin_interior
    }
}

/// Result of the star-shape test.
#[derive(Debug, Clone)]
pub struct StarLikeReport {
    pub star_like: bool,
    /// Worst value of `<p, u>` over the sample (must stay `> -1`).
    pub worst_margin: f64,
    /// `psi(0) < min psi + 1` (sufficient condition for the star shape).
    pub sufficient_condition: bool,
    pub witness: Option<Vec<f64>>,
}

impl LogConcaveFn {
    pub fn new(dim: usize, kind: FnKind) -> Self {
        LogConcaveFn {
            kind,
            dim,
            ln_scale: 0.0,
            max_hint: None,
        }
    }

    pub fn indicator(body: ConvexBody) -> Self {
        let dim = body.dim();
        LogConcaveFn::new(dim, FnKind::Indicator(body))
    }

    pub fn gaussian(center: DVector<f64>, precision: DMatrix<f64>) -> Self {
        let dim = center.len();
        LogConcaveFn::new(dim, FnKind::Gaussian { center, precision })
    }

    pub fn std_gaussian(dim: usize) -> Self {
        LogConcaveFn::gaussian(DVector::zeros(dim), DMatrix::identity(dim, dim))
    }

    pub fn radial(dim: usize, profile: Profile1D) -> Self {
        LogConcaveFn::new(dim, FnKind::Radial(profile))
    }

    /// `e^{-|x|}` on `R^d`.
    pub fn exp_neg_norm(dim: usize) -> Self {
        LogConcaveFn::radial(dim, Profile1D::Linear { slope: 1.0 })
    }

    pub fn qconcave_power(dim: usize, exponent: f64) -> Self {
        LogConcaveFn::new(dim, FnKind::QConcavePower { exponent })
    }

    pub fn exponential_norm(norm: DMatrix<f64>) -> Self {
        let dim = norm.ncols();
        LogConcaveFn::new(dim, FnKind::ExponentialNorm { norm })
    }

    pub fn piecewise(dim: usize, pieces: Vec<AffinePiece>, domain: Option<Polytope>) -> Self {
        LogConcaveFn::new(dim, FnKind::PiecewisePsi { pieces, domain })
    }

    pub fn restricted(base: LogConcaveFn, domain: ConvexBody) -> Self {
        let dim = base.dim;
        let mut f = LogConcaveFn::new(
            dim,
            FnKind::Restricted {
                base: Box::new(base.kind),
                domain,
            },
        );
        f.ln_scale = base.ln_scale;
        f
    }

    /// Multiply the function by `e^{delta}`.
    pub fn scaled(mut self, delta: f64) -> Self {
        self.ln_scale += delta;
        self
    }

    pub fn with_max_hint(mut self, hint: DVector<f64>) -> Self {
        self.max_hint = Some(hint);
        self
    }

    // ------------------------------------------------------------------
    // psi and derivatives
    // ------------------------------------------------------------------

    /// `psi(x) = -ln f(x)`, `+inf` outside the support.
    pub fn psi(&self, x: &DVector<f64>) -> ExtReal {
        kind_psi(&self.kind, x).add_finite(-self.ln_scale)
    }

    /// `f(x) = e^{-psi(x)}`.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.psi(x).neg_exp()
    }

    /// Extreme subgradients of `psi` at `x` (finite vertex set; the full
    /// subdifferential is their convex hull plus, on the support boundary,
    /// the normal-cone recession rays reported by [`Self::support_normals`]).
    /// For kinks of radial kinds at the origin the set is an axis sample of
    /// the extreme sphere.
    pub fn subgradients(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        if self.psi(x).is_infinite() {
            return Err(Error::EmptySubdifferential {
                point: x.iter().copied().collect(),
            });
        }
        Ok(kind_subgradients(&self.kind, x, self.dim))
    }

    /// Hessian of `psi` where twice differentiable; `None` for the
    /// polyhedral kinds (their cuts decompose into linear pieces instead).
    pub fn hessian_psi(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        kind_hessian(&self.kind, x, self.dim)
    }

    // ------------------------------------------------------------------
    // support geometry
    // ------------------------------------------------------------------

    /// Support as a convex body when it is bounded and exactly
    /// representable.
    pub fn support_body(&self) -> Option<ConvexBody> {
        kind_support_body(&self.kind, self.dim)
    }

    /// Axis-aligned bounding box of the support; infinite extents for
    /// unbounded directions.
    pub fn support_box(&self) -> (DVector<f64>, DVector<f64>) {
        match self.support_body() {
            Some(b) => b.extents(),
            None => (
                DVector::from_element(self.dim, f64::NEG_INFINITY),
                DVector::from_element(self.dim, f64::INFINITY),
            ),
        }
    }

    pub fn has_bounded_support(&self) -> bool {
        let (lo, hi) = self.support_box();
        lo.iter().all(|v| v.is_finite()) && hi.iter().all(|v| v.is_finite())
    }

    /// `u` lies on the boundary of `cl supp f`.
    pub fn on_support_boundary(&self, u: &DVector<f64>, tol: f64) -> bool {
        match self.support_body() {
            Some(b) => b.on_boundary(u, tol),
            None => false,
        }
    }

    /// Extreme rays (unit) of the normal cone of `supp f` at `u`; empty
    /// if `u` is interior or the support is all of `R^d`.
    pub fn support_normals(&self, u: &DVector<f64>, tol: f64) -> Vec<DVector<f64>> {
        match self.support_body() {
            Some(b) => b.normals_at(u, tol),
            None => vec![],
        }
    }

    // ------------------------------------------------------------------
    // max point / norms
    // ------------------------------------------------------------------

    /// A maximizer of `f` together with `max f`.
    pub fn max_point(&self) -> (DVector<f64>, f64) {
        if let Some(h) = &self.max_hint {
            return (h.clone(), self.value(h));
        }
        let p = kind_max_point(&self.kind, self.dim);
        let v = self.value(&p);
        (p, v)
    }

    pub fn sup_norm(&self) -> f64 {
        self.max_point().1
    }

    /// `f^q`, exact per kind.
    pub fn power(&self, q: f64) -> LogConcaveFn {
        assert!(q > 0.0);
        let kind = kind_power(&self.kind, q);
        LogConcaveFn {
            kind,
            dim: self.dim,
            ln_scale: q * self.ln_scale,
            max_hint: self.max_hint.clone(),
        }
    }

    // ------------------------------------------------------------------
    // integrals
    // ------------------------------------------------------------------

    /// `\int f^s`, closed form when available, else deterministic
    /// quadrature. Returns `(value, error estimate)`.
    pub fn s_integral(&self, s: f64, cfg: &QuadCfg) -> Result<(f64, f64)> {
        assert!(s > 0.0);
        if let Some(v) = self.closed_form_integral(s, cfg) {
            return Ok((v, v.abs() * 1e-14));
        }
        self.s_integral_numeric(s, cfg)
    }

    /// Quadrature-only route (the independent oracle for the closed forms).
    pub fn s_integral_numeric(&self, s: f64, cfg: &QuadCfg) -> Result<(f64, f64)> {
        let (lo, hi) = self.integration_box(s)?;
        let f = |x: &DVector<f64>| self.psi(x).scale_neg_exp(s);
        Ok(integrate_box(&f, &lo, &hi, cfg))
    }

    fn closed_form_integral(&self, s: f64, cfg: &QuadCfg) -> Option<f64> {
        let height = (s * self.ln_scale).exp();
        match &self.kind {
            FnKind::Indicator(body) => Some(height * body.volume()),
            FnKind::Gaussian { precision, .. } => {
                let det = precision.clone().lu().determinant();
                if det <= 0.0 {
                    return None;
                }
                let d = self.dim as f64;
                Some(height * (2.0 * std::f64::consts::PI / s).powf(d / 2.0) / det.sqrt())
            }
            FnKind::Radial(profile) => Some(height * radial_integral(self.dim, profile, s, cfg)),
            FnKind::QConcavePower { exponent } => {
                let g = |r: f64| {
                    (1.0 - r * r).max(0.0).powf(exponent * s) * r.powi(self.dim as i32 - 1)
                };
                let (v, _) = adaptive_1d(&g, 0.0, 1.0, cfg);
                Some(height * sphere_area(self.dim) * v)
            }
            FnKind::ExponentialNorm { norm } => {
                let det = norm.clone().lu().determinant().abs();
                if det == 0.0 {
                    return None;
                }
                Some(
                    height * radial_integral(self.dim, &Profile1D::Linear { slope: 1.0 }, s, cfg)
                        / det,
                )
            }
            _ => None,
        }
    }

    fn integration_box(&self, s: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let (lo, hi) = self.support_box();
        if lo.iter().all(|v| v.is_finite()) && hi.iter().all(|v| v.is_finite()) {
            return Ok((lo, hi));
        }
        // truncate unbounded directions with the decay envelope
        let (theta, nu) = self.decay_envelope().map_err(|_| Error::IntegralDiverges)?;
        let (c, _) = self.max_point();
        let mut r = (1.0 + theta.ln().abs()) / (s * nu).min(1.0);
        loop {
            let tail = theta.powf(s)
                * sphere_area(self.dim)
                * (r + 1.0 / (s * nu)).powi(self.dim as i32 - 1)
                * (-s * nu * r).exp()
                / (s * nu);
            if tail < 1e-11 * (1.0 + self.sup_norm().powf(s)) || r > 1e6 {
                break;
            }
            r *= 1.5;
        }
        let mut lo2 = lo;
        let mut hi2 = hi;
        for i in 0..self.dim {
            if !lo2[i].is_finite() {
                lo2[i] = c[i] - r;
            }
            if !hi2[i].is_finite() {
                hi2[i] = c[i] + r;
            }
        }
        Ok((lo2, hi2))
    }

    // ------------------------------------------------------------------
    // decay envelope
    // ------------------------------------------------------------------

    /// Constants `(theta, nu)` with `f(x) <= theta e^{-nu |x|}` everywhere.
    /// `nu` is halved from 1 until a finite `theta` is confirmed on a grid
    /// whose supremum has stabilized.
    pub fn decay_envelope(&self) -> Result<(f64, f64)> {
        let sup = self.sup_norm();
        if sup <= 0.0 || !sup.is_finite() {
            return Err(Error::EnvelopeNotFound);
        }
        if let Some(body) = self.support_body() {
            let rad = body.circumradius();
            let nu = 1.0;
            return Ok((sup * (nu * rad).exp(), nu));
        }
        let mut nu = 1.0;
        for _ in 0..12 {
            if let Some(theta) = self.envelope_theta(nu) {
                return Ok((theta, nu));
            }
            nu *= 0.5;
        }
        Err(Error::EnvelopeNotFound)
    }

    fn envelope_theta(&self, nu: f64) -> Option<f64> {
        let (c, _) = self.max_point();
        let mut best = f64::NEG_INFINITY; // sup of ln f + nu |x|
        let mut radius = 1.0 + c.norm();
        let mut prev = f64::NEG_INFINITY;
        for stage in 0..8 {
            let n = 24;
            for dir in search::sphere_directions(self.dim, 26) {
                for k in 1..=n {
                    let x = &c + &dir * (radius * k as f64 / n as f64);
                    if let ExtReal::Finite(p) = self.psi(&x) {
                        best = best.max(-p + nu * x.norm());
                    }
                }
            }
            if stage > 1 && best <= prev + 1e-9 {
                return Some(best.exp().max(self.sup_norm()));
            }
            prev = best;
            radius *= 2.0;
        }
        None
    }

    // ------------------------------------------------------------------
    // structural checks
    // ------------------------------------------------------------------

    /// Report-only check of the structural assumptions used by the solver.
    pub fn check_assumptions(&self, cfg: &QuadCfg) -> AssumptionReport {
        let mut witnesses = Vec::new();
        let proper = match self.s_integral(1.0, cfg) {
            Ok((v, _)) => v.is_finite() && v > 0.0,
            Err(_) => false,
        };
        if !proper {
            witnesses.push(("proper".to_string(), vec![]));
        }
        let bounded_support = self.has_bounded_support();
        if !bounded_support {
            witnesses.push(("bounded_support".to_string(), vec![]));
        }
        let origin = DVector::zeros(self.dim);
        let origin_interior = self.origin_interior_check();
        if !origin_interior {
            witnesses.push((
                "origin_interior".to_string(),
                origin.iter().copied().collect(),
            ));
        }
        let (mp, mv) = self.max_point();
        let f0 = self.value(&origin);
        let max_at_origin = f0 >= mv * (1.0 - 1e-9);
        if !max_at_origin {
            witnesses.push(("max_at_origin".to_string(), mp.iter().copied().collect()));
        }
        let (smooth, wit) = self.smoothness();
        if !smooth {
            if let Some(w) = wit {
                witnesses.push(("smooth".to_string(), w.iter().copied().collect()));
            }
        }
        AssumptionReport {
            proper,
            bounded_support,
            origin_interior,
            max_at_origin,
            smooth,
            witnesses,
        }
    }

    fn origin_interior_check(&self) -> bool {
        let origin = DVector::zeros(self.dim);
        if self.psi(&origin).is_infinite() {
            return false;
        }
        match self.support_body() {
            Some(b) => b.origin_interior(1e-9),
            // unbounded supports of the enumerated kinds are all of R^d
            None => true,
        }
    }

    /// Differentiability of `psi` on `supp f` (kind-based, with witness).
    fn smoothness(&self) -> (bool, Option<DVector<f64>>) {
        match &self.kind {
            FnKind::Gaussian { .. } => (true, None),
            FnKind::QConcavePower { .. } => (true, None),
            FnKind::Indicator(body) => {
                let w = boundary_witness(body);
                (false, Some(w))
            }
            FnKind::Radial(profile) => {
                let kink = profile.deriv(0.0).map(|d| d.abs() > 1e-12).unwrap_or(false);
                if kink {
                    (false, Some(DVector::zeros(self.dim)))
                } else {
                    (true, None)
                }
            }
            FnKind::ExponentialNorm { .. } => (false, Some(DVector::zeros(self.dim))),
            FnKind::PiecewisePsi { pieces, domain } => {
                if pieces.len() > 1 {
                    (false, None)
                } else if let Some(p) = domain {
                    (false, p.vertices().into_iter().next())
                } else {
                    (true, None)
                }
            }
            FnKind::Restricted { domain, .. } => (false, Some(boundary_witness(domain))),
        }
    }

    /// Star-shape test: `<p, u> > -1` for all sampled `u` in the support
    /// and all extreme subgradients `p`, plus the sufficient condition
    /// `psi(0) < min psi + 1`.
    pub fn star_like_check(&self, sample: &[DVector<f64>]) -> StarLikeReport {
        let mut worst = f64::INFINITY;
        let mut star_like = true;
        let mut witness = None;
        for u in sample {
            if self.psi(u).is_infinite() {
                continue;
            }
            if let Ok(ps) = self.subgradients(u) {
                for p in ps {
                    let ip = p.dot(u);
                    if ip < worst {
                        worst = ip;
                        if ip <= -1.0 {
                            star_like = false;
                            witness = Some(u.iter().copied().collect());
                        }
                    }
                }
            }
        }
        let origin = DVector::zeros(self.dim);
        let psi0 = self.psi(&origin);
        let (_, mv) = self.max_point();
        let min_psi = -mv.ln();
        let sufficient = match psi0 {
            ExtReal::Finite(v) => v < min_psi + 1.0,
            ExtReal::PosInf => false,
        };
        StarLikeReport {
            star_like,
            worst_margin: worst,
            sufficient_condition: sufficient,
            witness,
        }
    }
}

impl ExtReal {
    /// `e^{-s * psi}` (zero at infinity); helper for integrands.
    pub fn scale_neg_exp(self, s: f64) -> f64 {
        match self {
            ExtReal::Finite(v) => (-s * v).exp(),
            ExtReal::PosInf => 0.0,
        }
    }
}

fn boundary_witness(body: &ConvexBody) -> DVector<f64> {
    match body {
        ConvexBody::Ball(b) => {
            let mut e = DVector::zeros(b.center.len());
            e[0] = 1.0;
            &b.center + &e * b.radius
        }
        ConvexBody::Polytope(p) => p
            .vertices()
            .into_iter()
            .next()
            .unwrap_or_else(|| DVector::zeros(p.dim)),
    }
}

/// Surface area of the unit sphere in `R^d` for `d <= 3`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("sphere_area: unsupported dimension {d}"),
    }
}

fn radial_integral(d: usize, profile: &Profile1D, s: f64, cfg: &QuadCfg) -> f64 {
    let rmax = match profile.radius_limit() {
        Some(r) => r,
        None => {
            // truncate where s * psi_0(r) is far past the useful range
            let mut r = 1.0;
            while profile
                .value(r)
                .finite()
                .map(|v| s * v < 60.0)
                .unwrap_or(false)
                && r < 1e6
            {
                r *= 2.0;
            }
            r
        }
    };
    let g = |r: f64| profile.value(r).scale_neg_exp(s) * r.powi(d as i32 - 1);
    let (v, _) = adaptive_1d(&g, 0.0, rmax, cfg);
    sphere_area(d) * v
}

// ----------------------------------------------------------------------
// kind-level oracles
// ----------------------------------------------------------------------

fn kind_psi(kind: &FnKind, x: &DVector<f64>) -> ExtReal {
    match kind {
        FnKind::Indicator(body) => {
            if body.contains(x, 1e-12 * (1.0 + x.norm())) {
                ExtReal::Finite(0.0)
            } else {
                ExtReal::PosInf
            }
        }
        FnKind::Gaussian { center, precision } => {
            let d = x - center;
            ExtReal::Finite(0.5 * d.dot(&(precision * &d)))
        }
        FnKind::Radial(profile) => profile.value(x.norm()),
        FnKind::QConcavePower { exponent } => {
            let t = 1.0 - x.norm_squared();
            if t > 0.0 {
                ExtReal::Finite(-exponent * t.ln())
            } else {
                ExtReal::PosInf
            }
        }
        FnKind::ExponentialNorm { norm } => ExtReal::Finite((norm * x).norm()),
        FnKind::PiecewisePsi { pieces, domain } => {
            if let Some(p) = domain {
                if !p.contains(x, 1e-12 * (1.0 + x.norm())) {
                    return ExtReal::PosInf;
                }
            }
            let m = pieces
                .iter()
                .map(|p| p.grad.dot(x) + p.offset)
                .fold(f64::NEG_INFINITY, f64::max);
            ExtReal::Finite(m)
        }
        FnKind::Restricted { base, domain } => {
            if domain.contains(x, 1e-12 * (1.0 + x.norm())) {
                kind_psi(base, x)
            } else {
                ExtReal::PosInf
            }
        }
    }
}

fn kind_subgradients(kind: &FnKind, x: &DVector<f64>, dim: usize) -> Vec<DVector<f64>> {
    match kind {
        FnKind::Indicator(_) => vec![DVector::zeros(dim)],
        FnKind::Gaussian { center, precision } => vec![precision * (x - center)],
        FnKind::Radial(profile) => {
            let r = x.norm();
            if r > 1e-12 {
                match profile.deriv(r) {
                    Some(d) => vec![x * (d / r)],
                    None => vec![],
                }
            } else {
                let d0 = profile.deriv(0.0).unwrap_or(0.0);
                if d0.abs() < 1e-12 {
                    vec![DVector::zeros(dim)]
                } else {
                    // axis sample of the extreme sphere of radius d0
                    let mut out = vec![DVector::zeros(dim)];
                    for i in 0..dim {
                        let mut e = DVector::zeros(dim);
                        e[i] = d0;
                        out.push(e.clone());
                        out.push(-e);
                    }
                    out
                }
            }
        }
        FnKind::QConcavePower { exponent } => {
            let t = 1.0 - x.norm_squared();
            if t > 0.0 {
                vec![x * (2.0 * exponent / t)]
            } else {
                vec![]
            }
        }
        FnKind::ExponentialNorm { norm } => {
            let w = norm * x;
            let n = w.norm();
            if n > 1e-12 {
                vec![norm.transpose() * w / n]
            } else {
                let mut out = vec![DVector::zeros(dim)];
                for i in 0..dim {
                    let mut e = DVector::zeros(dim);
                    e[i] = 1.0;
                    let p = norm.transpose() * e;
                    out.push(p.clone());
                    out.push(-p);
                }
                out
            }
        }
        FnKind::PiecewisePsi { pieces, domain } => {
            if let Some(p) = domain {
                if !p.contains(x, 1e-9 * (1.0 + x.norm())) {
                    return vec![];
                }
            }
            let vals: Vec<f64> = pieces.iter().map(|p| p.grad.dot(x) + p.offset).collect();
            let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut out: Vec<DVector<f64>> = Vec::new();
            for (i, v) in vals.iter().enumerate() {
                if m - v <= 1e-9 * (1.0 + m.abs()) {
                    let g = pieces[i].grad.clone();
                    if !out.iter().any(|q| (q - &g).norm() < 1e-12) {
                        out.push(g);
                    }
                }
            }
            out
        }
        FnKind::Restricted { base, .. } => kind_subgradients(base, x, dim),
    }
}

fn kind_hessian(kind: &FnKind, x: &DVector<f64>, dim: usize) -> Option<DMatrix<f64>> {
    match kind {
        FnKind::Gaussian { precision, .. } => Some(precision.clone()),
        FnKind::Radial(profile) => {
            let r = x.norm();
            if r <= 1e-10 {
                return match profile {
                    Profile1D::PowerLaw { coeff, exponent } if *exponent == 2.0 => {
                        Some(DMatrix::identity(dim, dim) * (2.0 * coeff))
                    }
                    _ => None,
                };
            }
            let d1 = profile.deriv(r)?;
            let d2 = profile.second_deriv(r)?;
            let xh = x / r;
            let p = &xh * xh.transpose();
            Some(&p * d2 + (DMatrix::identity(dim, dim) - &p) * (d1 / r))
        }
        FnKind::QConcavePower { exponent } => {
            let t = 1.0 - x.norm_squared();
            if t <= 0.0 {
                return None;
            }
            let outer = x * x.transpose();
            Some(
                DMatrix::identity(dim, dim) * (2.0 * exponent / t)
                    + outer * (4.0 * exponent / (t * t)),
            )
        }
        FnKind::ExponentialNorm { norm } => {
            let w = norm * x;
            let n = w.norm();
            if n <= 1e-10 {
                return None;
            }
            let mtm = norm.transpose() * norm;
            let g = norm.transpose() * &w / n;
            Some(&mtm / n - (&g * g.transpose()) / n)
        }
        FnKind::Restricted { base, .. } => kind_hessian(base, x, dim),
        _ => None,
    }
}

fn kind_support_body(kind: &FnKind, dim: usize) -> Option<ConvexBody> {
    match kind {
        FnKind::Indicator(body) => Some(body.clone()),
        FnKind::Radial(profile) => profile
            .radius_limit()
            .map(|r| ConvexBody::ball(DVector::zeros(dim), r)),
        FnKind::QConcavePower { .. } => Some(ConvexBody::unit_ball(dim)),
        FnKind::PiecewisePsi { domain, .. } => {
            domain.as_ref().map(|p| ConvexBody::Polytope(p.clone()))
        }
        FnKind::Restricted { base, domain } => {
            // the supported Restricted bases have full support
            debug_assert!(kind_support_body(base, dim).is_none());
            Some(domain.clone())
        }
        _ => None,
    }
}

fn kind_max_point(kind: &FnKind, dim: usize) -> DVector<f64> {
    match kind {
        FnKind::Indicator(ConvexBody::Ball(b)) => b.center.clone(),
        FnKind::Indicator(ConvexBody::Polytope(p)) => vertex_centroid(p),
        FnKind::Gaussian { center, .. } => center.clone(),
        FnKind::Radial(_) | FnKind::QConcavePower { .. } | FnKind::ExponentialNorm { .. } => {
            DVector::zeros(dim)
        }
        FnKind::PiecewisePsi { pieces, domain } => {
            let probe = |x: &DVector<f64>| {
                kind_psi(
                    &FnKind::PiecewisePsi {
                        pieces: pieces.clone(),
                        domain: domain.clone(),
                    },
                    x,
                )
            };
            let (lo, hi) = match domain {
                Some(p) => p.extents(),
                None => (
                    DVector::from_element(dim, -8.0),
                    DVector::from_element(dim, 8.0),
                ),
            };
            search::minimize_ext(&probe, &lo, &hi, 17, 400).0
        }
        FnKind::Restricted { base, domain } => {
            let probe = |x: &DVector<f64>| {
                kind_psi(
                    &FnKind::Restricted {
                        base: base.clone(),
                        domain: domain.clone(),
                    },
                    x,
                )
            };
            let (lo, hi) = domain.extents();
            search::minimize_ext(&probe, &lo, &hi, 17, 400).0
        }
    }
}

fn vertex_centroid(p: &Polytope) -> DVector<f64> {
    let vs = p.vertices();
    let mut c = DVector::zeros(p.dim);
    for v in &vs {
        c += v;
    }
    if vs.is_empty() {
        c
    } else {
        c / vs.len() as f64
    }
}

fn kind_power(kind: &FnKind, q: f64) -> FnKind {
    match kind {
        FnKind::Indicator(b) => FnKind::Indicator(b.clone()),
        FnKind::Gaussian { center, precision } => FnKind::Gaussian {
            center: center.clone(),
            precision: precision * q,
        },
        FnKind::Radial(profile) => FnKind::Radial(profile.scaled(q)),
        FnKind::QConcavePower { exponent } => FnKind::QConcavePower {
            exponent: exponent * q,
        },
        FnKind::ExponentialNorm { norm } => FnKind::ExponentialNorm { norm: norm * q },
        FnKind::PiecewisePsi { pieces, domain } => FnKind::PiecewisePsi {
            pieces: pieces
                .iter()
                .map(|p| AffinePiece {
                    grad: &p.grad * q,
                    offset: p.offset * q,
                })
                .collect(),
            domain: domain.clone(),
        },
        FnKind::Restricted { base, domain } => FnKind::Restricted {
            base: Box::new(kind_power(base, q)),
            domain: domain.clone(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn eval_psi_examples() {
        let g = LogConcaveFn::std_gaussian(1);
        assert_eq!(g.psi(&v(&[0.0])), ExtReal::Finite(0.0));

        let sq = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::cube(2, 1.0)));
        assert!(sq.psi(&v(&[2.0, 0.0])).is_infinite());

        let e = LogConcaveFn::exp_neg_norm(2);
        assert_eq!(e.psi(&v(&[3.0, 4.0])), ExtReal::Finite(5.0));
    }

    #[test]
    fn subgradient_examples() {
        let g = LogConcaveFn::std_gaussian(1);
        let ps = g.subgradients(&v(&[2.0])).unwrap();
        assert_eq!(ps.len(), 1);
        assert!((ps[0][0] - 2.0).abs() < 1e-14);

        // psi = max(x, -x) = |x|, kink at 0
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
            None,
        );
        let mut ps: Vec<f64> = tent
            .subgradients(&v(&[0.0]))
            .unwrap()
            .iter()
            .map(|p| p[0])
            .collect();
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(ps, vec![-1.0, 1.0]);

        // e^{-1/(1-|x|)} scaled so f = e^{-1/(1-|x|)} exactly
        let flat = LogConcaveFn::radial(1, Profile1D::InverseGap { scale: 1.0 }).scaled(-1.0);
        assert!(matches!(
            flat.subgradients(&v(&[1.0])),
            Err(Error::EmptySubdifferential { .. })
        ));
    }

    #[test]
    fn subgradient_inequality_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let fns = vec![
            LogConcaveFn::std_gaussian(2),
            LogConcaveFn::exp_neg_norm(2),
            LogConcaveFn::qconcave_power(2, 2.0),
        ];
        for f in &fns {
            for _ in 0..200 {
                let x = v(&[rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)]);
                let y = v(&[rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)]);
                let (px, py) = (f.psi(&x).unwrap_finite(), f.psi(&y).unwrap_finite());
                for p in f.subgradients(&x).unwrap() {
                    assert!(py + 1e-9 >= px + p.dot(&(&y - &x)));
                }
            }
        }
    }

    #[test]
    fn psi_convexity_chords() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fns = vec![
            LogConcaveFn::std_gaussian(2),
            LogConcaveFn::exp_neg_norm(2),
            LogConcaveFn::qconcave_power(2, 0.5),
            LogConcaveFn::radial(2, Profile1D::InverseGap { scale: 1.0 }),
        ];
        for f in &fns {
            for _ in 0..1000 {
                let x = v(&[rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)]);
                let y = v(&[rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)]);
                let lam: f64 = rng.gen_range(0.05..0.95);
                let z = &x * lam + &y * (1.0 - lam);
                if let (ExtReal::Finite(px), ExtReal::Finite(py), ExtReal::Finite(pz)) =
                    (f.psi(&x), f.psi(&y), f.psi(&z))
                {
                    assert!(pz <= lam * px + (1.0 - lam) * py + 1e-9);
                }
            }
        }
    }

    #[test]
    fn s_integral_examples() {
        let cfg = QuadCfg::default();
        let sq = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::cube(2, 1.0)));
        let (v1, _) = sq.s_integral(1.0, &cfg).unwrap();
        assert!((v1 - 4.0).abs() < 1e-9);

        let g2 = LogConcaveFn::std_gaussian(2);
        let (v2, _) = g2.s_integral(1.0, &cfg).unwrap();
        assert!((v2 - 2.0 * std::f64::consts::PI).abs() < 1e-6);

        let tent = LogConcaveFn::exp_neg_norm(1);
        let (v3, _) = tent.s_integral(2.0, &cfg).unwrap();
        assert!((v3 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn s_integral_scaling_invariant() {
        let cfg = QuadCfg::default();
        let f = LogConcaveFn::exp_neg_norm(1);
        let alpha: f64 = 2.5;
        let fs = f.clone().scaled(alpha.ln());
        for s in [0.5, 1.0, 2.0] {
            let (a, ea) = fs.s_integral(s, &cfg).unwrap();
            let (b, eb) = f.s_integral(s, &cfg).unwrap();
            assert!((a - alpha.powf(s) * b).abs() <= 1e-9 + ea + eb * alpha.powf(s));
        }
    }

    #[test]
    fn numeric_matches_closed_form() {
        let cfg = QuadCfg::default();
        let g = LogConcaveFn::std_gaussian(1);
        let (c, _) = g.s_integral(1.0, &cfg).unwrap();
        let (n, _) = g.s_integral_numeric(1.0, &cfg).unwrap();
        assert!((c - n).abs() < 1e-6 * c);
    }

    #[test]
    fn decay_envelope_examples() {
        let g = LogConcaveFn::std_gaussian(1);
        let (theta, nu) = g.decay_envelope().unwrap();
        assert_eq!(nu, 1.0);
        // theta must be a valid constant; the sharp one is e^{1/2}
        assert!(theta >= (0.5f64).exp() - 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let x = v(&[rng.gen_range(-30.0..30.0)]);
            assert!(g.value(&x) <= theta * (-nu * x.norm()).exp() + 1e-12);
        }

        let ball = LogConcaveFn::indicator(ConvexBody::unit_ball(1));
        let (theta, nu) = ball.decay_envelope().unwrap();
        for xv in [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
            let x = v(&[xv]);
            assert!(ball.value(&x) <= theta * (-nu * x.norm()).exp() + 1e-12);
        }

        let tent = LogConcaveFn::exp_neg_norm(1);
        let (theta, nu) = tent.decay_envelope().unwrap();
        assert_eq!(nu, 1.0);
        assert!((1.0 - 1e-9..=1.0 + 1e-6).contains(&theta));
    }

    #[test]
    fn check_assumptions_examples() {
        let cfg = QuadCfg::default();
        let ball = LogConcaveFn::indicator(ConvexBody::unit_ball(2));
        let r = ball.check_assumptions(&cfg);
        assert!(r.proper && r.bounded_support && r.origin_interior && r.max_at_origin);
        assert!(!r.smooth);

        let off = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::interval(0.0, 2.0)));
        let r = off.check_assumptions(&cfg);
        assert!(!r.origin_interior);

        let g = LogConcaveFn::std_gaussian(1);
        let r = g.check_assumptions(&cfg);
        assert!(!r.bounded_support);
        assert!(r.proper && r.smooth);
    }

    #[test]
    fn star_like_examples() {
        let g = LogConcaveFn::std_gaussian(1);
        let rep = g.star_like_check(&[v(&[0.5]), v(&[-1.0]), v(&[2.0])]);
        assert!(rep.star_like && rep.sufficient_condition);

        // e^{-(x-0.9)^2/2} restricted to [-1,1], sampled at u = -1
        let base = LogConcaveFn::gaussian(v(&[0.9]), DMatrix::identity(1, 1));
        let f = LogConcaveFn::restricted(base, ConvexBody::Polytope(Polytope::interval(-1.0, 1.0)));
        let rep = f.star_like_check(&[v(&[-1.0])]);
        assert!(rep.star_like);
        assert!((rep.worst_margin - 1.9).abs() < 1e-12);

        // sharp Gaussian far off-center: sufficient condition fails
        let base = LogConcaveFn::gaussian(v(&[0.99]), DMatrix::identity(1, 1) * 20.0);
        let f = LogConcaveFn::restricted(base, ConvexBody::Polytope(Polytope::interval(-1.0, 1.0)));
        let rep = f.star_like_check(&[v(&[-1.0])]);
        assert!(!rep.sufficient_condition);
        let psi0 = f.psi(&v(&[0.0])).unwrap_finite();
        assert!((psi0 - 10.0 * 0.9801).abs() < 1e-9);
    }

    #[test]
    fn power_transform_kinds() {
        let g = LogConcaveFn::std_gaussian(2);
        let gq = g.power(0.5);
        let x = v(&[0.7, -0.3]);
        assert!((gq.psi(&x).unwrap_finite() - 0.5 * g.psi(&x).unwrap_finite()).abs() < 1e-14);
        let q = LogConcaveFn::qconcave_power(1, 2.0);
        let qq = q.power(0.25);
        let x = v(&[0.5]);
        assert!((qq.psi(&x).unwrap_finite() - 0.25 * q.psi(&x).unwrap_finite()).abs() < 1e-14);
    }

    #[test]
    fn max_point_piecewise() {
        // tent |x| on [-1, 1]: max of f at 0
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
        let (p, val) = tent.max_point();
        assert!(p[0].abs() < 1e-6);
        assert!((val - 1.0).abs() < 1e-6);
    }
}
