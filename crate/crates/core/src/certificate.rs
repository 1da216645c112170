//! Optimality certificates from contact pairs.
//!
//! At a feasible position, near-tight witnesses are expanded into contact
//! pairs. Nonnegative weights are then recovered so that the weighted
//! extended contact operators reproduce `(Id ⊕ s, 0)`:
//!
//! * matrix equation: `sum c_i u_i ⊗ v_i = Id` (John) or with the factors
//!   swapped (Löwner);
//! * scalar equation: `sum c_i mu_i nu_i = s`;
//! * translation equation: `sum c_i v_i = 0` (John) or
//!   `sum c_i mu_i nu_i u_i = 0` (Löwner).
//!
//! Fixed-center certificates drop the translation equation. When the
//! weight recovery leaves a residual, its projection onto the trace-one
//! hyperplane is a strict separating direction, which doubles as an
//! improving perturbation of the position.

use nalgebra::{DMatrix, DVector};

use crate::contact::{
    john_operator, lowner_operator, normal_pairs_at, ContactPair, ExtOp, NormalCfg,
};
use crate::envelope::InnerBody;
use crate::error::Error;
use crate::extreal::ExtReal;
use crate::model::LogConcaveFn;
use crate::nnls::nnls;
use crate::oracle::PsiOracle;
use crate::polar::{log_conjugate, polar_of_affine_image, PolarFn};
use crate::positions::{
    john_margin, lowner_margin, polish_john_witness, MarginCfg, MarginWitness, Mode, Position,
    WitnessKind,
};
use crate::search;
use crate::Result;

/// Residual norms of the three optimality equations.
#[derive(Debug, Clone, Copy)]
pub struct Residuals {
    pub matrix: f64,
    pub scalar: f64,
    pub translation: f64,
}

impl Residuals {
    pub fn total(&self) -> f64 {
        (self.matrix.powi(2) + self.scalar.powi(2) + self.translation.powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertKind {
    John,
    Lowner,
    FixedCenterJohn,
    FixedCenterLowner,
    Glmp,
}

impl CertKind {
    pub fn fixed_center(&self) -> bool {
        matches!(
            self,
            CertKind::FixedCenterJohn | CertKind::FixedCenterLowner
        )
    }

    fn lowner_like(&self) -> bool {
        matches!(self, CertKind::Lowner | CertKind::FixedCenterLowner)
    }
}

/// A verified certificate: pairs, positive weights, equation residuals.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub pairs: Vec<ContactPair>,
    pub weights: Vec<f64>,
    pub residuals: Residuals,
    pub sum_weights: f64,
    pub kind: CertKind,
    /// Scalar target of the second equation (`s`, or `s/q` after a power
    /// transform).
    pub target_scalar: f64,
}

/// A strict separator between `(Id ⊕ s, 0)` and the contact operators.
#[derive(Debug, Clone)]
pub struct SeparatingDirection {
    pub dir: ExtOp,
    pub margin_on_point: f64,
    pub worst_margin_on_operators: f64,
}

/// Outcome of weight recovery.
#[derive(Debug, Clone)]
pub enum VerifyOutcome {
    Certificate(Certificate),
    Separator(SeparatingDirection),
}

impl VerifyOutcome {
    pub fn certificate(self) -> Option<Certificate> {
        match self {
            VerifyOutcome::Certificate(c) => Some(c),
            _ => None,
        }
    }

    pub fn separator(self) -> Option<SeparatingDirection> {
        match self {
            VerifyOutcome::Separator(s) => Some(s),
            _ => None,
        }
    }
}

// ----------------------------------------------------------------------
// pair extraction
// ----------------------------------------------------------------------

/// Expand near-tight John witnesses into contact pairs (normals of the
/// outer function `f`). For a finite inner body only witnesses at atom
/// images are kept. Smooth tangency points are polished to stationarity
/// of the margin before the normals are formed (feasibility search alone
/// locates a flat minimum only to the square root of its tolerance).
/// Pairs generating the same extended operator are deduplicated.
pub fn extract_pairs_john(
    f: &LogConcaveFn,
    g_b: Option<&InnerBody>,
    pos: &Position,
    witnesses: &[MarginWitness],
    tol_contact: f64,
    ncfg: &NormalCfg,
) -> Result<Vec<ContactPair>> {
    let atoms: Option<Vec<DVector<f64>>> = match g_b {
        Some(InnerBody::Atoms { atoms, .. }) => Some(
            atoms
                .iter()
                .map(|(x, _)| &pos.elem.mat * x + &pos.elem.vec)
                .collect(),
        ),
        _ => None,
    };
    let mut pairs: Vec<ContactPair> = Vec::new();
    let mut seen: Vec<DVector<f64>> = Vec::new();
    let mut push = |pairs: &mut Vec<ContactPair>, p: ContactPair| {
        let key = john_operator(&p).to_vec();
        if !seen.iter().any(|k| (k - &key).norm() < 1e-8) {
            seen.push(key);
            pairs.push(p);
        }
    };
    for w in witnesses {
        if !w.margin.is_finite() || w.margin.abs() > tol_contact {
            continue;
        }
        if w.kind == WitnessKind::SupportTouch {
            // the lifting of the position touches the support wall of f,
            // possibly below the graph of f: only horizontal normals act
            let hu = pos.apply(&w.u);
            for n in f.support_normals(&w.u, ncfg.boundary_tol) {
                let denom = n.dot(&w.u);
                if denom <= 1e-12 {
                    return Err(Error::StarLikeViolation {
                        point: w.u.iter().copied().collect(),
                        value: denom,
                    });
                }
                push(
                    &mut pairs,
                    ContactPair {
                        u: w.u.clone(),
                        mu: hu,
                        v: &n / denom,
                        nu: 0.0,
                        horizontal: true,
                        subgradient: None,
                    },
                );
            }
            continue;
        }
        let y = polish_john_witness(f, pos, &w.y).unwrap_or_else(|| w.y.clone());
        let u = &pos.elem.mat * &y + &pos.elem.vec;
        if let Some(images) = &atoms {
            if !images.iter().any(|im| (im - &u).norm() < 1e-6) {
                continue;
            }
        }
        for p in normal_pairs_at(f, &u, ncfg)? {
            push(&mut pairs, p);
        }
        if pairs.len() > 96 {
            break;
        }
    }
    Ok(pairs)
}

/// Newton refinement of a polar-domain tangency of `psi_H - psi_F`.
fn polish_gap(
    h_polar: &dyn PsiOracle,
    f_polar: &dyn PsiOracle,
    u0: &DVector<f64>,
) -> Option<DVector<f64>> {
    let grad_of = |o: &dyn PsiOracle, u: &DVector<f64>| -> Option<DVector<f64>> {
        match o.subgradients(u) {
            Ok(ps) if ps.len() == 1 => Some(ps[0].clone()),
            _ => None,
        }
    };
    let mut u = u0.clone();
    for _ in 0..30 {
        let gh = grad_of(h_polar, &u)?;
        let gf = grad_of(f_polar, &u)?;
        let grad = &gh - &gf;
        if grad.norm() <= 1e-12 * (1.0 + gh.norm()) {
            return Some(u);
        }
        let h = h_polar.hessian_psi(&u)? - f_polar.hessian_psi(&u)?;
        let step = h.lu().solve(&(-&grad))?;
        let mut moved = false;
        let mut t = 1.0;
        for _ in 0..20 {
            let un = &u + &step * t;
            if h_polar.psi(&un).is_finite() && f_polar.psi(&un).is_finite() {
                u = un;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || (&u - u0).norm() > 0.2 * (1.0 + u0.norm()) {
            return None;
        }
    }
    Some(u)
}

/// Polar-domain contact pairs for a solved Löwner position: contacts of
/// `f°` with the polar of the position, with normals taken from `f°`.
/// Returns the pairs and the polar of the position (whose values enter
/// the Löwner equations).
pub fn extract_pairs_lowner(
    f: &LogConcaveFn,
    pos: &Position,
    tol_contact: f64,
    ncfg: &NormalCfg,
) -> Result<(Vec<ContactPair>, PolarFn)> {
    let f_polar = log_conjugate(f);
    // h = beta g(Bx + b) with beta = 1/alpha, B = A'
    let b_mat = pos.elem.mat.transpose();
    let beta = 1.0 / pos.elem.alpha;
    let g_polar = log_conjugate(&pos.base);
    let h_polar = polar_of_affine_image(&g_polar, &b_mat, beta, &pos.elem.vec)?;

    // tight points of psi_H - psi_F >= 0 over supp H
    let (mut lo, mut hi) = h_polar.support_box();
    for i in 0..f.dim {
        if !lo[i].is_finite() {
            lo[i] = -20.0;
        }
        if !hi[i].is_finite() {
            hi[i] = 20.0;
        }
    }
    let gap = |u: &DVector<f64>| -> f64 {
        match (h_polar.psi(u), f_polar.psi(u)) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).clamp(-search::BIG, search::BIG),
            (ExtReal::Finite(_), ExtReal::PosInf) => -search::BIG,
            _ => search::BIG,
        }
    };
    let n = if f.dim >= 3 { 13 } else { 33 };
    let slack: Vec<f64> = (0..f.dim)
        .map(|i| 0.25 * (hi[i] - lo[i]).max(1e-6))
        .collect();
    let gap = {
        let lo = lo.clone();
        let hi = hi.clone();
        move |u: &DVector<f64>| -> f64 {
            for i in 0..u.len() {
                if u[i] < lo[i] - slack[i] || u[i] > hi[i] + slack[i] {
                    return search::BIG;
                }
            }
            gap(u)
        }
    };
    let mut cands: Vec<(DVector<f64>, f64)> = search::grid_points(&lo, &hi, n)
        .into_iter()
        .map(|u| {
            let v = gap(&u);
            (u, v)
        })
        .collect();
    cands.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let cell = (0..f.dim)
        .map(|i| (hi[i] - lo[i]) / (n - 1) as f64)
        .fold(0.0f64, f64::max);
    // spread the refinement starts: take near-tight candidates that are
    // pairwise separated, so distinct tight components are all visited
    let sep_dist = 2.0 * cell.max(1e-6);
    let mut starts: Vec<DVector<f64>> = Vec::new();
    for (u0, val) in &cands {
        if starts.len() >= 24 {
            break;
        }
        if *val > 1.0 {
            break;
        }
        if !starts.iter().any(|q| (q - u0).norm() < sep_dist) {
            starts.push(u0.clone());
        }
    }
    let mut tight: Vec<DVector<f64>> = Vec::new();
    for u0 in starts.iter() {
        let (u, v) = search::nelder_mead(&gap, u0, cell.max(1e-7), 260);
        if v.abs() <= tol_contact {
            let u = polish_gap(&h_polar, &f_polar, &u).unwrap_or(u);
            if !tight.iter().any(|q| (q - &u).norm() < 1e-6) {
                tight.push(u);
            }
        }
    }
    // tight sets of indicator-type data are rays: the gap is positively
    // homogeneous along them, but the equations need pairs at several
    // radii to close; walk a geometric ladder along each tight direction
    // while the values stay numerically meaningful
    let mut ray_samples: Vec<DVector<f64>> = Vec::new();
    for u in &tight {
        let nrm = u.norm();
        if nrm < 1e-9 {
            continue;
        }
        let dir = u / nrm;
        let mut r = 0.0625;
        for _ in 0..14 {
            let cand = &dir * r;
            match f_polar.psi(&cand) {
                ExtReal::Finite(pv) if pv <= 40.0 => {
                    if gap(&cand).abs() <= tol_contact {
                        ray_samples.push(cand);
                    }
                }
                _ => break,
            }
            r *= 2.0;
        }
    }
    for u in ray_samples {
        if !tight.iter().any(|q| (q - &u).norm() < 1e-6) {
            tight.push(u);
        }
    }
    let mut pairs: Vec<ContactPair> = Vec::new();
    let mut seen: Vec<DVector<f64>> = Vec::new();
    for u in &tight {
        for p in normal_pairs_at(&f_polar, u, ncfg)? {
            let key = lowner_operator(&p).to_vec();
            if !seen.iter().any(|k| (k - &key).norm() < 1e-8) {
                seen.push(key);
                pairs.push(p);
            }
        }
    }
    Ok((pairs, h_polar))
}

// ----------------------------------------------------------------------
// weight recovery
// ----------------------------------------------------------------------

/// Recover nonnegative weights for the John equations, or produce a
/// separating direction. The empty pair list yields the trivial dilation
/// separator (a strictly interior position can always grow).
pub fn verify_john(pairs: &[ContactPair], s: f64, d: usize, cert_tol: f64) -> VerifyOutcome {
    verify_pairs(pairs, s, d, cert_tol, CertKind::John)
}

/// Löwner-side weight recovery (polar-domain pairs and operators).
pub fn verify_lowner(pairs: &[ContactPair], s: f64, d: usize, cert_tol: f64) -> VerifyOutcome {
    verify_pairs(pairs, s, d, cert_tol, CertKind::Lowner)
}

/// Shared weight recovery. Fixed-center kinds drop the translation rows.
pub fn verify_pairs(
    pairs: &[ContactPair],
    s: f64,
    d: usize,
    cert_tol: f64,
    kind: CertKind,
) -> VerifyOutcome {
    if pairs.is_empty() {
        return VerifyOutcome::Separator(SeparatingDirection {
            dir: ExtOp::dilation(d),
            margin_on_point: s,
            worst_margin_on_operators: -s,
        });
    }
    let op = |p: &ContactPair| -> ExtOp {
        if kind.lowner_like() {
            lowner_operator(p)
        } else {
            john_operator(p)
        }
    };
    let rows_full = d * d + 1 + d;
    let rows = if kind.fixed_center() {
        d * d + 1
    } else {
        rows_full
    };
    let cols: Vec<DVector<f64>> = pairs
        .iter()
        .map(|p| op(p).to_vec().rows(0, rows).into_owned())
        .collect();
    let target_full = ExtOp::target(d, s).to_vec();
    let b = target_full.rows(0, rows).into_owned();
    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.column_mut(j).copy_from(c);
    }
    let sol = nnls(&m, &b);
    if sol.residual_norm <= cert_tol {
        let mut weights: Vec<f64> = sol.coeffs.iter().copied().collect();
        caratheodory_prune(&cols, &mut weights, d * d + d + 1);
        let mut kept_pairs = Vec::new();
        let mut kept_weights = Vec::new();
        for (p, &w) in pairs.iter().zip(&weights) {
            if w > 1e-12 {
                kept_pairs.push(p.clone());
                kept_weights.push(w);
            }
        }
        let residuals = split_residuals(&b, d, kind, pairs, &weights);
        let sum = kept_weights.iter().sum();
        VerifyOutcome::Certificate(Certificate {
            pairs: kept_pairs,
            weights: kept_weights,
            residuals,
            sum_weights: sum,
            kind,
            target_scalar: s,
        })
    } else {
        // residual of the cone projection separates weakly; shifting by
        // the trace functional makes it strict on both sides
        let mut w = ExtOp::zeros(d);
        let mut full_res = DVector::zeros(rows_full);
        for i in 0..rows {
            full_res[i] = sol.residual[i];
        }
        w = w.add(&ext_from_vec(d, &full_res));
        let shift = sol.residual_norm.powi(2) / (2.0 * (d as f64 + s));
        let trace_fn = ExtOp::new(DMatrix::identity(d, d), 1.0, DVector::zeros(d));
        let dir = w.sub(&trace_fn.scale(shift));
        let nrm = dir.norm().max(1e-300);
        let dir = dir.scale(1.0 / nrm);
        let target = ExtOp::target(d, s);
        let margin_on_point = dir.dot(&target);
        let worst = pairs
            .iter()
            .map(|p| dir.dot(&op(p)))
            .fold(f64::NEG_INFINITY, f64::max);
        VerifyOutcome::Separator(SeparatingDirection {
            dir,
            margin_on_point,
            worst_margin_on_operators: worst,
        })
    }
}

fn split_residuals(
    b: &DVector<f64>,
    d: usize,
    kind: CertKind,
    pairs: &[ContactPair],
    weights: &[f64],
) -> Residuals {
    // recompute the full residual from the (pruned) weights
    let rows = b.len();
    let mut acc = DVector::zeros(rows);
    for (p, &w) in pairs.iter().zip(weights) {
        if w <= 0.0 {
            continue;
        }
        let op = if kind.lowner_like() {
            lowner_operator(p)
        } else {
            john_operator(p)
        };
        acc += op.to_vec().rows(0, rows) * w;
    }
    let res = b - acc;
    let matrix = res.rows(0, d * d).norm();
    let scalar = res[d * d].abs();
    let translation = if rows > d * d + 1 {
        res.rows(d * d + 1, d).norm()
    } else {
        0.0
    };
    Residuals {
        matrix,
        scalar,
        translation,
    }
}

fn ext_from_vec(d: usize, v: &DVector<f64>) -> ExtOp {
    let mut mat = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            mat[(i, j)] = v[i * d + j];
        }
    }
    let alpha = v[d * d];
    let mut vec = DVector::zeros(d);
    for i in 0..d {
        vec[i] = v[d * d + 1 + i];
    }
    ExtOp::new(mat, alpha, vec)
}

/// Reduce the support of a conic combination without changing its value
/// (classical dimension-count pruning).
fn caratheodory_prune(cols: &[DVector<f64>], weights: &mut [f64], bound: usize) {
    loop {
        let active: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 1e-12).collect();
        if active.len() <= bound {
            return;
        }
        let rows = cols[0].len();
        let mut m = DMatrix::zeros(rows, active.len());
        for (j, &i) in active.iter().enumerate() {
            m.column_mut(j).copy_from(&cols[i]);
        }
        let svd = m.svd(true, true);
        let smin = svd.singular_values[svd.singular_values.len() - 1];
        if smin > 1e-10 * svd.singular_values[0].max(1e-300) {
            return; // linearly independent: nothing to prune
        }
        let vt = svd.v_t.unwrap();
        let null = vt.row(vt.nrows() - 1).transpose();
        // step until the first active weight hits zero
        let mut t_best = f64::INFINITY;
        for (j, &i) in active.iter().enumerate() {
            if null[j] > 1e-14 {
                t_best = t_best.min(weights[i] / null[j]);
            }
        }
        if !t_best.is_finite() {
            // flip the direction
            let mut t = f64::INFINITY;
            for (j, &i) in active.iter().enumerate() {
                if null[j] < -1e-14 {
                    t = t.min(-weights[i] / null[j]);
                }
            }
            if !t.is_finite() {
                return;
            }
            for (j, &i) in active.iter().enumerate() {
                weights[i] = (weights[i] + t * null[j]).max(0.0);
            }
        } else {
            for (j, &i) in active.iter().enumerate() {
                weights[i] = (weights[i] - t_best * null[j]).max(0.0);
            }
        }
    }
}

// ----------------------------------------------------------------------
// ascent along a separator
// ----------------------------------------------------------------------

/// Line-search an improving perturbation along a separating direction.
/// Returns a feasible position with a strictly better objective, or
/// `LineSearchFailed` when every step either loses feasibility at a new
/// contact or fails to improve (the contact set was incomplete).
#[allow(clippy::too_many_arguments)]
pub fn ascent_step(
    f: &LogConcaveFn,
    pos: &Position,
    sep: &SeparatingDirection,
    s: f64,
    base_integral: f64,
    margin_cfg: &MarginCfg,
    tol_feas: f64,
) -> Result<Position> {
    let matrix_norm = sep.dir.mat.norm().max(sep.dir.alpha.abs()).max(1e-12);
    let t_max = 0.45 / matrix_norm;
    let current = pos.s_integral_of(s, base_integral)?;
    let improving = |obj: f64| match pos.mode {
        Mode::John => obj > current * (1.0 + 1e-12),
        Mode::Lowner => obj < current * (1.0 - 1e-12),
    };
    for k in 0..36 {
        let t = t_max * 0.5f64.powi(k);
        let cand = match pos.compose_perturbation(&sep.dir, t) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let rep = match pos.mode {
            Mode::John => john_margin(f, &cand, margin_cfg),
            Mode::Lowner => lowner_margin(f, &cand, margin_cfg),
        };
        if rep.violation > tol_feas {
            continue;
        }
        let obj = cand.s_integral_of(s, base_integral)?;
        if improving(obj) {
            return Ok(cand);
        }
    }
    Err(Error::LineSearchFailed(
        "no feasible improving step; contact set may be incomplete".into(),
    ))
}

// ----------------------------------------------------------------------
// power transform
// ----------------------------------------------------------------------

/// Transport a certificate for `(f, g)` to one for `(f^q, g^q)`:
/// horizontal pairs are unchanged, non-horizontal normals are rebuilt from
/// their generating subgradients, and the weights are rescaled so the
/// equations hold with scalar target `s/q`.
pub fn power_transform_certificate(cert: &Certificate, q: f64) -> Result<Certificate> {
    assert!(q > 0.0 && q <= 1.0);
    let mut pairs = Vec::with_capacity(cert.pairs.len());
    let mut weights = Vec::with_capacity(cert.weights.len());
    for (p, &c) in cert.pairs.iter().zip(&cert.weights) {
        if p.horizontal {
            let mut np = p.clone();
            np.mu = p.mu.powf(q);
            pairs.push(np);
            weights.push(c);
        } else {
            let sub = p.subgradient.as_ref().ok_or(Error::MissingSubgradient {
                point: p.u.iter().copied().collect(),
            })?;
            let ip = sub.dot(&p.u);
            let denom = 1.0 + q * ip;
            if denom <= 0.0 {
                return Err(Error::StarLikeViolation {
                    point: p.u.iter().copied().collect(),
                    value: denom,
                });
            }
            let mu_q = p.mu.powf(q);
            pairs.push(ContactPair {
                u: p.u.clone(),
                mu: mu_q,
                v: sub * (q / denom),
                nu: 1.0 / (mu_q * denom),
                horizontal: false,
                subgradient: Some(sub * q),
            });
            weights.push(c / q * denom / (1.0 + ip));
        }
    }
    let d = pairs[0].dim();
    let s_new = cert.target_scalar / q;
    let rows = if cert.kind.fixed_center() {
        d * d + 1
    } else {
        d * d + 1 + d
    };
    let b = ExtOp::target(d, s_new).to_vec().rows(0, rows).into_owned();
    let residuals = split_residuals(&b, d, cert.kind, &pairs, &weights);
    let sum = weights.iter().sum();
    Ok(Certificate {
        pairs,
        weights,
        residuals,
        sum_weights: sum,
        kind: cert.kind,
        target_scalar: s_new,
    })
}

// ----------------------------------------------------------------------
// classical reduction
// ----------------------------------------------------------------------

/// Classical certificate of an indicator/indicator instance: drop the
/// vertical (top-face) pairs and verify the two remaining equations
/// `sum c_i u_i ⊗ v_i = Id`, `sum c_i v_i = 0`, with support size at most
/// `d^2 + d`.
pub fn glmp_reduce(cert: &Certificate) -> Result<Certificate> {
    // indicator instances only produce horizontal or purely vertical pairs
    let ok = cert.pairs.iter().all(|p| p.horizontal || p.v.norm() < 1e-9);
    if !ok {
        return Err(Error::NotIndicatorInstance);
    }
    let kept: Vec<(ContactPair, f64)> = cert
        .pairs
        .iter()
        .zip(&cert.weights)
        .filter(|(p, _)| p.horizontal)
        .map(|(p, &w)| (p.clone(), w))
        .collect();
    if kept.is_empty() {
        return Err(Error::NoPairs);
    }
    let d = kept[0].0.dim();
    // columns in the (matrix, translation) block
    let cols: Vec<DVector<f64>> = kept
        .iter()
        .map(|(p, _)| {
            let op = john_operator(p);
            let full = op.to_vec();
            let mut v = DVector::zeros(d * d + d);
            for i in 0..d * d {
                v[i] = full[i];
            }
            for i in 0..d {
                v[d * d + i] = full[d * d + 1 + i];
            }
            v
        })
        .collect();
    let mut weights: Vec<f64> = kept.iter().map(|(_, w)| *w).collect();
    caratheodory_prune(&cols, &mut weights, d * d + d);
    let mut pairs = Vec::new();
    let mut kept_weights = Vec::new();
    let mut acc = DVector::zeros(d * d + d);
    for ((p, _), (&w, col)) in kept.iter().zip(weights.iter().zip(&cols)) {
        if w > 1e-12 {
            pairs.push(p.clone());
            kept_weights.push(w);
            acc += col * w;
        }
    }
    let mut b = DVector::zeros(d * d + d);
    for i in 0..d {
        b[i * d + i] = 1.0;
    }
    let res = &b - &acc;
    let residuals = Residuals {
        matrix: res.rows(0, d * d).norm(),
        scalar: 0.0,
        translation: res.rows(d * d, d).norm(),
    };
    let sum = kept_weights.iter().sum();
    Ok(Certificate {
        pairs,
        weights: kept_weights,
        residuals,
        sum_weights: sum,
        kind: CertKind::Glmp,
        target_scalar: 0.0,
    })
}

// ----------------------------------------------------------------------
// end-to-end certification of a solved position
// ----------------------------------------------------------------------

/// Re-search the margin at a solved position, extract contact pairs and
/// run weight recovery. The returned kind reflects the mode and the
/// fixed-center flag.
pub fn certify_solution(
    f: &LogConcaveFn,
    g_b: Option<&InnerBody>,
    pos: &Position,
    s: f64,
    fixed_center: bool,
    margin_cfg: &MarginCfg,
    cert_tol: f64,
) -> Result<VerifyOutcome> {
    let d = f.dim;
    let ncfg = NormalCfg::default();
    let kind = match (pos.mode, fixed_center) {
        (Mode::John, false) => CertKind::John,
        (Mode::John, true) => CertKind::FixedCenterJohn,
        (Mode::Lowner, false) => CertKind::Lowner,
        (Mode::Lowner, true) => CertKind::FixedCenterLowner,
    };
    let pairs = match pos.mode {
        Mode::John => {
            let mut cfg = margin_cfg.clone();
            cfg.grid_n = (cfg.grid_n * 2 - 1).min(129);
            let rep = john_margin(f, pos, &cfg);
            extract_pairs_john(f, g_b, pos, &rep.witnesses, cfg.tol_contact, &ncfg)?
        }
        Mode::Lowner => {
            let (pairs, _) = extract_pairs_lowner(f, pos, margin_cfg.tol_contact, &ncfg)?;
            pairs
        }
    };
    Ok(verify_pairs(&pairs, s, d, cert_tol, kind))
}

// ----------------------------------------------------------------------
// John <-> Löwner pair map
// ----------------------------------------------------------------------

/// Subdifferential swap between John pairs of `(f, g)` and Löwner-type
/// polar pairs: a pair generated by `p` at `u` maps to the pair at `p` on
/// the polar graph generated by `u`, and the John operator of the former
/// equals the Löwner operator of the latter.
pub fn polar_swap_pair(pair: &ContactPair, polar_value_at_p: f64) -> Result<ContactPair> {
    let p = pair.subgradient.as_ref().ok_or(Error::MissingSubgradient {
        point: pair.u.iter().copied().collect(),
    })?;
    let denom = 1.0 + p.dot(&pair.u);
    Ok(ContactPair {
        u: p.clone(),
        mu: polar_value_at_p,
        v: &pair.u / denom,
        nu: 1.0 / (polar_value_at_p * denom),
        horizontal: false,
        subgradient: Some(pair.u.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{ConvexBody, Polytope};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    fn gaussian_pairs() -> Vec<ContactPair> {
        // contact pairs of the Gaussian/interval optimum at s = 1
        let mu = (-0.5f64).exp();
        [1.0f64, -1.0]
            .iter()
            .map(|&sgn| ContactPair {
                u: v(&[sgn]),
                mu,
                v: v(&[sgn / 2.0]),
                nu: 0.5f64.exp() / 2.0,
                horizontal: false,
                subgradient: Some(v(&[sgn])),
            })
            .collect()
    }

    #[test]
    fn gaussian_certificate_weights() {
        let pairs = gaussian_pairs();
        let out = verify_john(&pairs, 1.0, 1, 1e-7);
        let cert = out.certificate().expect("certificate");
        assert_eq!(cert.weights.len(), 2);
        for w in &cert.weights {
            assert!((w - 1.0).abs() < 1e-9);
        }
        assert!(cert.residuals.total() < 1e-10);
        assert!((cert.sum_weights - 2.0).abs() < 1e-9); // d + s = 2
    }

    fn square_disk_pairs() -> Vec<ContactPair> {
        let mut pairs: Vec<ContactPair> = Vec::new();
        for (x, y) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            pairs.push(ContactPair {
                u: v(&[x, y]),
                mu: 1.0,
                v: v(&[x, y]),
                nu: 0.0,
                horizontal: true,
                subgradient: None,
            });
        }
        pairs.push(ContactPair {
            u: v(&[0.0, 0.0]),
            mu: 1.0,
            v: v(&[0.0, 0.0]),
            nu: 1.0,
            horizontal: false,
            subgradient: Some(v(&[0.0, 0.0])),
        });
        pairs
    }

    #[test]
    fn square_disk_certificate() {
        for s in [0.5, 1.0, 2.0] {
            let pairs = square_disk_pairs();
            let cert = verify_john(&pairs, s, 2, 1e-7).certificate().unwrap();
            assert!(cert.residuals.total() < 1e-10);
            assert!((cert.sum_weights - (2.0 + s)).abs() < 1e-9);
            for (p, w) in cert.pairs.iter().zip(&cert.weights) {
                if p.horizontal {
                    assert!((w - 0.5).abs() < 1e-9);
                } else {
                    assert!((w - s).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn suboptimal_rectangle_gives_separator() {
        // unit disk in [-2,2]x[-1,1]: contacts only at (0, ±1)
        let pairs: Vec<ContactPair> = [(0.0, 1.0), (0.0, -1.0)]
            .iter()
            .map(|&(x, y)| ContactPair {
                u: v(&[x, y]),
                mu: 1.0,
                v: v(&[x, y]),
                nu: 0.0,
                horizontal: true,
                subgradient: None,
            })
            .collect();
        let out = verify_john(&pairs, 1.0, 2, 1e-7);
        let sep = out.separator().expect("separator");
        assert!(sep.margin_on_point > 0.0);
        assert!(sep.worst_margin_on_operators < 0.0);
    }

    #[test]
    fn empty_pairs_trivial_dilation() {
        let out = verify_john(&[], 1.0, 2, 1e-7);
        let sep = out.separator().unwrap();
        assert_eq!(sep.dir.alpha, 1.0);
        assert!(sep.dir.mat.norm() < 1e-15);
        assert!(sep.margin_on_point > 0.0);
    }

    #[test]
    fn lowner_exp_interval_certificate() {
        // polar-domain pairs of the exponential/indicator optimum
        let mu = (-1.0f64).exp();
        let pairs: Vec<ContactPair> = [1.0f64, -1.0]
            .iter()
            .map(|&sgn| ContactPair {
                u: v(&[sgn]),
                mu,
                v: v(&[sgn / 2.0]),
                nu: 1.0f64.exp() / 2.0,
                horizontal: false,
                subgradient: Some(v(&[sgn])),
            })
            .collect();
        let cert = verify_lowner(&pairs, 1.0, 1, 1e-8).certificate().unwrap();
        assert!(cert.residuals.total() < 1e-10);
        assert!((cert.sum_weights - 2.0).abs() < 1e-9);
        for w in &cert.weights {
            assert!((w - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn power_transform_gaussian_example() {
        let pairs = gaussian_pairs();
        let cert = verify_john(&pairs, 1.0, 1, 1e-7).certificate().unwrap();
        let tq = power_transform_certificate(&cert, 0.5).unwrap();
        // c~ = 2c (1 + u^2/2) / (1 + u^2) = 3/2 at u = ±1
        for w in &tq.weights {
            assert!((w - 1.5).abs() < 1e-9, "w = {w}");
        }
        assert!(tq.residuals.total() < 1e-9);
        assert!((tq.target_scalar - 2.0).abs() < 1e-15);

        // q = 1 is the identity
        let t1 = power_transform_certificate(&cert, 1.0).unwrap();
        for (a, b) in t1.weights.iter().zip(&cert.weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn power_transform_horizontal_invariance() {
        let pairs = square_disk_pairs();
        let cert = verify_john(&pairs, 1.0, 2, 1e-7).certificate().unwrap();
        let tq = power_transform_certificate(&cert, 0.5).unwrap();
        // horizontal weights unchanged; only the vertical pair rescales
        for (p, (wq, w)) in tq.pairs.iter().zip(tq.weights.iter().zip(&cert.weights)) {
            if p.horizontal {
                assert!((wq - w).abs() < 1e-12);
            }
        }
        assert!(tq.residuals.matrix < 1e-9 && tq.residuals.translation < 1e-9);
        assert!((tq.target_scalar - 2.0).abs() < 1e-15);
        assert!(tq.residuals.scalar < 1e-9);
    }

    #[test]
    fn glmp_square_disk() {
        let pairs = square_disk_pairs();
        let cert = verify_john(&pairs, 1.0, 2, 1e-7).certificate().unwrap();
        let glmp = glmp_reduce(&cert).unwrap();
        assert_eq!(glmp.pairs.len(), 4);
        assert!(glmp.residuals.matrix < 1e-10);
        assert!(glmp.residuals.translation < 1e-10);
        for w in &glmp.weights {
            assert!((w - 0.5).abs() < 1e-9);
        }
        assert!(glmp.pairs.len() <= 6); // d^2 + d = 6
    }

    #[test]
    fn glmp_simplex_weights() {
        // regular triangle circumscribing the unit disk: contacts at the
        // edge midpoints, weights 2/3
        let angles = [
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::FRAC_PI_3,
            std::f64::consts::FRAC_PI_2 + 4.0 * std::f64::consts::FRAC_PI_3,
        ];
        let mut pairs: Vec<ContactPair> = angles
            .iter()
            .map(|t| {
                let u = v(&[t.cos(), t.sin()]);
                ContactPair {
                    u: u.clone(),
                    mu: 1.0,
                    v: u,
                    nu: 0.0,
                    horizontal: true,
                    subgradient: None,
                }
            })
            .collect();
        pairs.push(ContactPair {
            u: v(&[0.0, 0.0]),
            mu: 1.0,
            v: v(&[0.0, 0.0]),
            nu: 1.0,
            horizontal: false,
            subgradient: Some(v(&[0.0, 0.0])),
        });
        let cert = verify_john(&pairs, 1.0, 2, 1e-7).certificate().unwrap();
        let glmp = glmp_reduce(&cert).unwrap();
        assert_eq!(glmp.pairs.len(), 3);
        for w in &glmp.weights {
            assert!((w - 2.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn glmp_rejects_smooth_instance() {
        let pairs = gaussian_pairs();
        let cert = verify_john(&pairs, 1.0, 1, 1e-7).certificate().unwrap();
        assert!(matches!(
            glmp_reduce(&cert),
            Err(Error::NotIndicatorInstance)
        ));
    }

    #[test]
    fn fixed_center_certificate_drops_translation_equation() {
        // asymmetric horizontal pairs satisfy the first two equations but
        // not the translation equation; only the fixed-center kind accepts
        let mk = |u: f64, v: f64| ContactPair {
            u: DVector::from_vec(vec![u]),
            mu: 1.0,
            v: DVector::from_vec(vec![v]),
            nu: 0.0,
            horizontal: true,
            subgradient: None,
        };
        // f = chi_[-1,2], g = chi_[-1,1] with fixed center: contacts at
        // u = ±1 with normals ±1, so u v = 1 on both but sum c v != 0
        let pairs = vec![
            mk(1.0, 1.0),
            mk(-1.0, -1.0),
            ContactPair {
                u: DVector::from_vec(vec![0.0]),
                mu: 1.0,
                v: DVector::from_vec(vec![0.0]),
                nu: 1.0,
                horizontal: false,
                subgradient: Some(DVector::from_vec(vec![0.0])),
            },
        ];
        let fixed = verify_pairs(&pairs, 1.0, 1, 1e-7, CertKind::FixedCenterJohn)
            .certificate()
            .expect("fixed-center certificate");
        assert!(fixed.residuals.matrix < 1e-10 && fixed.residuals.scalar < 1e-10);
        assert_eq!(fixed.residuals.translation, 0.0);
    }

    #[test]
    fn octagon_certificate_prunes_to_caratheodory_bound() {
        // disk inscribed in the regular octagon: eight horizontal pairs
        // plus the vertical one; the classical reduction must keep at most
        // d^2 + d = 6 of them with zero residual
        let mut pairs: Vec<ContactPair> = (0..8)
            .map(|k| {
                let t = k as f64 * std::f64::consts::FRAC_PI_4;
                let u = v(&[t.cos(), t.sin()]);
                ContactPair {
                    u: u.clone(),
                    mu: 1.0,
                    v: u,
                    nu: 0.0,
                    horizontal: true,
                    subgradient: None,
                }
            })
            .collect();
        pairs.push(ContactPair {
            u: v(&[0.0, 0.0]),
            mu: 1.0,
            v: v(&[0.0, 0.0]),
            nu: 1.0,
            horizontal: false,
            subgradient: Some(v(&[0.0, 0.0])),
        });
        let cert = verify_john(&pairs, 1.0, 2, 1e-7).certificate().unwrap();
        assert!(cert.residuals.total() < 1e-9);
        assert!((cert.sum_weights - 3.0).abs() < 1e-9);
        let glmp = glmp_reduce(&cert).unwrap();
        assert!(glmp.pairs.len() <= 6, "m = {}", glmp.pairs.len());
        assert!(glmp.residuals.matrix < 1e-9);
        assert!(glmp.residuals.translation < 1e-9);
    }

    #[test]
    fn ascent_fails_cleanly_at_certified_optimum() {
        // at the true optimum no direction improves: feeding an artificial
        // dilation direction must report a failed line search
        let f = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::cube(2, 1.0)));
        let disk = LogConcaveFn::indicator(ConvexBody::unit_ball(2));
        let pos = Position::identity(disk, Mode::John);
        let sep = SeparatingDirection {
            dir: ExtOp::dilation(2),
            margin_on_point: 1.0,
            worst_margin_on_operators: -1.0,
        };
        // a zero feasibility tolerance closes the wiggle room inside the
        // tolerance band; the exact indicator margin supports it
        let out = ascent_step(
            &f,
            &pos,
            &sep,
            1.0,
            std::f64::consts::PI,
            &MarginCfg::default(),
            0.0,
        );
        assert!(matches!(out, Err(Error::LineSearchFailed(_))));
    }

    #[test]
    fn polar_swap_preserves_operator() {
        // Gaussian self-polar worked instance: T_J(pair) = T_L(swapped)
        let pair = &gaussian_pairs()[0];
        // polar value at p = 1: f°(1) = e^{-1/2}
        let swapped = polar_swap_pair(pair, (-0.5f64).exp()).unwrap();
        let tj = john_operator(pair);
        let tl = lowner_operator(&swapped);
        assert!((tj.mat.clone() - tl.mat.clone()).norm() < 1e-12);
        assert!((tj.alpha - tl.alpha).abs() < 1e-12);
        assert!((tj.vec.clone() - tl.vec.clone()).norm() < 1e-12);
    }

    #[test]
    fn separator_from_extracted_pairs_improves_square_disk() {
        // a shrunken disk inside the square: the trivial dilation separator
        // must produce an improving feasible step
        let f = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::cube(2, 1.0)));
        let disk = LogConcaveFn::indicator(ConvexBody::unit_ball(2));
        let pos = Position::new(
            disk,
            ExtOp::new(DMatrix::identity(2, 2) * 0.7, 0.9, DVector::zeros(2)),
            Mode::John,
        );
        let mcfg = MarginCfg::default();
        let rep = john_margin(&f, &pos, &mcfg);
        assert_eq!(rep.violation, 0.0);
        let pairs = extract_pairs_john(&f, None, &pos, &rep.witnesses, 1e-6, &NormalCfg::default())
            .unwrap();
        let out = verify_john(&pairs, 1.0, 2, 1e-7);
        let sep = out.separator().expect("suboptimal position must separate");
        let improved = ascent_step(&f, &pos, &sep, 1.0, std::f64::consts::PI, &mcfg, 1e-7).unwrap();
        let before = pos.s_integral_of(1.0, std::f64::consts::PI).unwrap();
        let after = improved.s_integral_of(1.0, std::f64::consts::PI).unwrap();
        assert!(after > before);
        assert_eq!(john_margin(&f, &improved, &mcfg).violation, 0.0);
    }
}
