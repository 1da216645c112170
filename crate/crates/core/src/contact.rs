//! Contact pairs and extended contact operators.
//!
//! A contact pair couples a point `u^ = (u, f(u))` of the essential graph
//! with a normal `v^ = (v, nu)` of the lifting `{(x, y) : |y| <= f(x)}`,
//! normalized so that `<u^, v^> = 1`. Normals come in two families:
//!
//! * non-horizontal, `v^ = (p, 1/f(u)) / (1 + <p, u>)` for a subgradient
//!   `p` of `psi` at `u` with `1 + <p, u> > 0`;
//! * horizontal, `v^ = (n, 0) / <n, u>` for an outer normal `n` of the
//!   support at a boundary point.
//!
//! Pairs are mapped into the operator space `W` of blocks `(A ⊕ alpha, a)`
//! either John-style, `((u ⊗ v) ⊕ mu nu, v)`, or Löwner-style,
//! `((v ⊗ u) ⊕ mu nu, mu nu u)`; weighted sums of these must reproduce
//! `(Id ⊕ s, 0)` at an optimum.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::oracle::PsiOracle;
use crate::Result;

/// A point `(u, mu)` of the essential graph (`mu = f(u)`).
#[derive(Debug, Clone)]
pub struct LiftedPoint {
    pub u: DVector<f64>,
    pub mu: f64,
}

/// A normalized contact pair.
#[derive(Debug, Clone)]
pub struct ContactPair {
    pub u: DVector<f64>,
    pub mu: f64,
    pub v: DVector<f64>,
    pub nu: f64,
    /// `nu == 0`.
    pub horizontal: bool,
    /// The subgradient that generated a non-horizontal normal (needed by
    /// the power transform).
    pub subgradient: Option<DVector<f64>>,
}

impl ContactPair {
    /// `<u^, v^> = <u, v> + mu nu`; equals 1 for a valid pair.
    pub fn pairing(&self) -> f64 {
        self.u.dot(&self.v) + self.mu * self.nu
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }
}

/// An element `(A ⊕ alpha, a)` of the operator space `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtOp {
    pub mat: DMatrix<f64>,
    pub alpha: f64,
    pub vec: DVector<f64>,
}

impl ExtOp {
    pub fn new(mat: DMatrix<f64>, alpha: f64, vec: DVector<f64>) -> Self {
        ExtOp { mat, alpha, vec }
    }

    pub fn zeros(d: usize) -> Self {
        ExtOp::new(DMatrix::zeros(d, d), 0.0, DVector::zeros(d))
    }

    /// The reference point `(Id ⊕ s, 0)` of the optimality equations.
    pub fn target(d: usize, s: f64) -> Self {
        ExtOp::new(DMatrix::identity(d, d), s, DVector::zeros(d))
    }

    /// Pure dilation direction `(0 ⊕ 1, 0)`.
    pub fn dilation(d: usize) -> Self {
        ExtOp::new(DMatrix::zeros(d, d), 1.0, DVector::zeros(d))
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    /// Frobenius-style inner product on `W`.
    pub fn dot(&self, rhs: &ExtOp) -> f64 {
        self.mat.dot(&rhs.mat) + self.alpha * rhs.alpha + self.vec.dot(&rhs.vec)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, c: f64) -> ExtOp {
        ExtOp::new(&self.mat * c, self.alpha * c, &self.vec * c)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(&self, rhs: &ExtOp) -> ExtOp {
        ExtOp::new(
            &self.mat + &rhs.mat,
            self.alpha + rhs.alpha,
            &self.vec + &rhs.vec,
        )
    }

    pub fn sub(&self, rhs: &ExtOp) -> ExtOp {
        ExtOp::new(
            &self.mat - &rhs.mat,
            self.alpha - rhs.alpha,
            &self.vec - &rhs.vec,
        )
    }

    /// Flatten to a column (row-major matrix part, then alpha, then the
    /// translation part); the layout used for weight recovery.
    pub fn to_vec(&self) -> DVector<f64> {
        let d = self.dim();
        let mut out = DVector::zeros(d * d + 1 + d);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = self.mat[(i, j)];
            }
        }
        out[d * d] = self.alpha;
        for i in 0..d {
            out[d * d + 1 + i] = self.vec[i];
        }
        out
    }

    /// Membership in `M`: invertible operator block and positive height.
    pub fn in_m(&self) -> bool {
        self.alpha > 0.0 && self.mat.clone().lu().determinant().abs() > 1e-14
    }

    /// Membership in `M+`: symmetric positive definite operator block.
    pub fn in_m_plus(&self) -> bool {
        if self.alpha <= 0.0 {
            return false;
        }
        let d = self.dim();
        for i in 0..d {
            for j in (i + 1)..d {
                if (self.mat[(i, j)] - self.mat[(j, i)]).abs() > 1e-10 {
                    return false;
                }
            }
        }
        let sym = (&self.mat + self.mat.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().all(|&l| l > 0.0)
    }
}

/// Configuration of the normal extraction.
#[derive(Debug, Clone)]
pub struct NormalCfg {
    /// Subgradients with norm above this are treated as flat-zero suspects
    /// and dropped in favor of horizontal normals.
    pub subgrad_cap: f64,
    /// Boundary detection tolerance.
    pub boundary_tol: f64,
}

impl Default for NormalCfg {
    fn default() -> Self {
        NormalCfg {
            subgrad_cap: 1e6,
            boundary_tol: 1e-7,
        }
    }
}

/// All normalized lifting normals at `u`: one per extreme subgradient with
/// `1 + <p, u> > 0`, plus horizontal normals at support boundary points.
/// Requires the origin in the interior of the support (so horizontal
/// normals can be normalized).
pub fn normal_pairs_at(
    f: &dyn PsiOracle,
    u: &DVector<f64>,
    cfg: &NormalCfg,
) -> Result<Vec<ContactPair>> {
    let mu = f.value(u);
    let mut pairs: Vec<ContactPair> = Vec::new();
    if mu > 0.0 {
        match f.subgradients(u) {
            Ok(ps) => {
                for p in ps {
                    if p.norm() > cfg.subgrad_cap {
                        continue; // flat-zero suspect: horizontal only
                    }
                    let denom = 1.0 + p.dot(u);
                    if denom <= 1e-12 {
                        return Err(Error::StarLikeViolation {
                            point: u.iter().copied().collect(),
                            value: denom,
                        });
                    }
                    let v = &p / denom;
                    let nu = 1.0 / (mu * denom);
                    push_unique(
                        &mut pairs,
                        ContactPair {
                            u: u.clone(),
                            mu,
                            v,
                            nu,
                            horizontal: false,
                            subgradient: Some(p),
                        },
                    );
                }
            }
            Err(Error::EmptySubdifferential { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    for n in f.support_normals(u, cfg.boundary_tol) {
        let denom = n.dot(u);
        if denom <= 1e-12 {
            return Err(Error::StarLikeViolation {
                point: u.iter().copied().collect(),
                value: denom,
            });
        }
        push_unique(
            &mut pairs,
            ContactPair {
                u: u.clone(),
                mu,
                v: &n / denom,
                nu: 0.0,
                horizontal: true,
                subgradient: None,
            },
        );
    }
    Ok(pairs)
}

fn push_unique(pairs: &mut Vec<ContactPair>, p: ContactPair) {
    let dupe = pairs
        .iter()
        .any(|q| (&q.v - &p.v).norm() < 1e-9 && (q.nu - p.nu).abs() < 1e-9);
    if !dupe {
        pairs.push(p);
    }
}

/// John-type extended contact operator `((u ⊗ v) ⊕ mu nu, v)`.
pub fn john_operator(pair: &ContactPair) -> ExtOp {
    ExtOp::new(
        &pair.u * pair.v.transpose(),
        pair.mu * pair.nu,
        pair.v.clone(),
    )
}

/// Löwner-type extended contact operator `((v ⊗ u) ⊕ mu nu, mu nu u)`.
pub fn lowner_operator(pair: &ContactPair) -> ExtOp {
    let mn = pair.mu * pair.nu;
    ExtOp::new(&pair.v * pair.u.transpose(), mn, &pair.u * mn)
}

/// Sign/scale bijection between epigraph normals `(v, nu_epi)` at
/// `(u, psi(u))` and lifting normals `(v, -nu_epi / f(u))` at `(u, f(u))`.
pub fn epi_lifting_normal_map(
    f: &dyn PsiOracle,
    u: &DVector<f64>,
    v: &DVector<f64>,
    nu_epi: f64,
) -> Result<(DVector<f64>, f64)> {
    let fu = f.value(u);
    if fu <= 0.0 {
        return Err(Error::ZeroValue {
            point: u.iter().copied().collect(),
        });
    }
    Ok((v.clone(), -nu_epi / fu))
}

/// Outcome of the flat-zero sequence test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlatZero {
    Flat,
    NotFlat,
}

/// Numeric test for a flat zero at `u`: approach `u` from an interior
/// anchor and watch `f(x_k) |grad psi(x_k)|`. The vertical direction is a
/// lifting normal at `(u, 0)` exactly when that product vanishes while
/// the subgradients blow up. `Inconclusive` when the trend does not
/// resolve within budget.
pub fn flat_zero_check(
    g: &dyn PsiOracle,
    u: &DVector<f64>,
    anchor: &DVector<f64>,
) -> Result<FlatZero> {
    if g.value(u) > 1e-12 {
        return Ok(FlatZero::NotFlat);
    }
    let mut products: Vec<f64> = Vec::new();
    let mut last_pnorm = 0.0;
    for k in 2..=40 {
        let delta = 0.5f64.powi(k);
        let x = u * (1.0 - delta) + anchor * delta;
        let fv = g.value(&x);
        if fv <= 0.0 {
            continue;
        }
        if let Ok(ps) = g.subgradients(&x) {
            if let Some(pn) = ps
                .iter()
                .map(|p| p.norm())
                .fold(None, |acc: Option<f64>, n| {
                    Some(acc.map_or(n, |a| a.max(n)))
                })
            {
                products.push(fv * pn);
                last_pnorm = pn;
            }
        }
    }
    if products.len() < 6 {
        return Err(Error::Inconclusive {
            point: u.iter().copied().collect(),
        });
    }
    let first = products[products.len() / 2];
    let last = *products.last().unwrap();
    if last_pnorm > 1e3 && last < 1e-4 && last < 0.1 * first.max(1e-300) {
        Ok(FlatZero::Flat)
    } else if last > 1e-2 && last > 0.5 * first {
        Ok(FlatZero::NotFlat)
    } else {
        Err(Error::Inconclusive {
            point: u.iter().copied().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{ConvexBody, Polytope};
    use crate::model::{LogConcaveFn, Profile1D};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn gaussian_pair_formula() {
        let f = LogConcaveFn::std_gaussian(1);
        let pairs = normal_pairs_at(&f, &v(&[1.0]), &NormalCfg::default()).unwrap();
        assert_eq!(pairs.len(), 1);
        let p = &pairs[0];
        assert!((p.v[0] - 0.5).abs() < 1e-12);
        assert!((p.nu - 0.5f64.exp() / 2.0).abs() < 1e-12);
        assert!((p.pairing() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interval_boundary_pair() {
        let f = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::interval(-1.0, 1.0)));
        let pairs = normal_pairs_at(&f, &v(&[1.0]), &NormalCfg::default()).unwrap();
        // horizontal boundary normal and the vertical top-face normal
        assert!(pairs
            .iter()
            .any(|p| p.horizontal && (p.v[0] - 1.0).abs() < 1e-12));
        assert!(pairs
            .iter()
            .any(|p| !p.horizontal && p.v.norm() < 1e-12 && (p.nu - 1.0).abs() < 1e-12));
        for p in &pairs {
            assert!((p.pairing() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tent_kink_pairs() {
        let f = LogConcaveFn::exp_neg_norm(1);
        let pairs = normal_pairs_at(&f, &v(&[0.0]), &NormalCfg::default()).unwrap();
        // kink subdifferential [-1, 1]: extremes give (±1, 1)
        for sign in [-1.0, 1.0] {
            assert!(pairs
                .iter()
                .any(|p| (p.v[0] - sign).abs() < 1e-12 && (p.nu - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn john_lowner_operator_examples() {
        let pair = ContactPair {
            u: v(&[1.0]),
            mu: (-0.5f64).exp(),
            v: v(&[0.5]),
            nu: 0.5f64.exp() / 2.0,
            horizontal: false,
            subgradient: Some(v(&[1.0])),
        };
        let tj = john_operator(&pair);
        assert!((tj.mat[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((tj.alpha - 0.5).abs() < 1e-12);
        assert!((tj.vec[0] - 0.5).abs() < 1e-12);
        // trace identity tr(u ⊗ v) + mu nu = 1
        assert!((tj.mat.trace() + tj.alpha - 1.0).abs() < 1e-12);

        let tl = lowner_operator(&pair);
        assert!((tl.mat[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((tl.alpha - 0.5).abs() < 1e-12);
        assert!((tl.vec[0] - 0.5).abs() < 1e-12);

        // horizontal pair in d = 2: translation part of the Löwner operator
        // vanishes
        let hpair = ContactPair {
            u: v(&[1.0, 0.0]),
            mu: 1.0,
            v: v(&[1.0, 0.0]),
            nu: 0.0,
            horizontal: true,
            subgradient: None,
        };
        let tj = john_operator(&hpair);
        assert_eq!(tj.alpha, 0.0);
        assert!((tj.mat[(0, 0)] - 1.0).abs() < 1e-15);
        let tl = lowner_operator(&hpair);
        assert!(tl.vec.norm() < 1e-15);

        // vertical pair at the top face
        let vpair = ContactPair {
            u: v(&[0.0]),
            mu: 1.0,
            v: v(&[0.0]),
            nu: 1.0,
            horizontal: false,
            subgradient: Some(v(&[0.0])),
        };
        let tj = john_operator(&vpair);
        assert_eq!(tj.mat[(0, 0)], 0.0);
        assert_eq!(tj.alpha, 1.0);
        let tl = lowner_operator(&vpair);
        assert_eq!(tl.alpha, 1.0);
        assert!(tl.vec.norm() < 1e-15);
    }

    #[test]
    fn epi_map_examples() {
        let f = LogConcaveFn::std_gaussian(1);
        // f(0) = 1: (p, -1) -> (p, 1)
        let (vv, nu) = epi_lifting_normal_map(&f, &v(&[0.0]), &v(&[0.7]), -1.0).unwrap();
        assert_eq!(vv[0], 0.7);
        assert!((nu - 1.0).abs() < 1e-15);
        // f(1) = e^{-1/2}: (1, -1) -> (1, e^{1/2})
        let (_, nu) = epi_lifting_normal_map(&f, &v(&[1.0]), &v(&[1.0]), -1.0).unwrap();
        assert!((nu - 0.5f64.exp()).abs() < 1e-12);
        // horizontal fixed point
        let (_, nu) = epi_lifting_normal_map(&f, &v(&[1.0]), &v(&[1.0]), 0.0).unwrap();
        assert_eq!(nu, 0.0);
    }

    #[test]
    fn flat_zero_examples() {
        let anchor = v(&[0.0]);
        // (1 - x^2)^2: every unit vector is a flat zero
        let g1 = LogConcaveFn::qconcave_power(1, 2.0);
        assert_eq!(
            flat_zero_check(&g1, &v(&[1.0]), &anchor).unwrap(),
            FlatZero::Flat
        );

        // e^{-1/(1-|x|)}: flat zero as well
        let g2 = LogConcaveFn::radial(1, Profile1D::InverseGap { scale: 1.0 });
        assert_eq!(
            flat_zero_check(&g2, &v(&[1.0]), &anchor).unwrap(),
            FlatZero::Flat
        );

        // indicator: value 1 at the boundary, not a zero at all
        let g3 = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::interval(-1.0, 1.0)));
        assert_eq!(
            flat_zero_check(&g3, &v(&[1.0]), &anchor).unwrap(),
            FlatZero::NotFlat
        );

        // f = (1 - |x|): cone-like zero, the vertical is not normal
        let g4 = LogConcaveFn::radial(1, Profile1D::NegLogGap { scale: 1.0 });
        assert_eq!(
            flat_zero_check(&g4, &v(&[1.0]), &anchor).unwrap(),
            FlatZero::NotFlat
        );

        // f = (1 - |x|)^2: flat again
        let g5 = LogConcaveFn::radial(1, Profile1D::NegLogGap { scale: 2.0 });
        assert_eq!(
            flat_zero_check(&g5, &v(&[1.0]), &anchor).unwrap(),
            FlatZero::Flat
        );
    }

    #[test]
    fn qpower_pair_covariance() {
        // pairs of f^q at u relate to pairs of f by
        // v^_q = (q p, 1/f^q(u)) / (1 + q <p, u>)
        let f = LogConcaveFn::std_gaussian(1);
        let u = v(&[1.0]);
        let base = normal_pairs_at(&f, &u, &NormalCfg::default()).unwrap();
        for q in [0.25, 0.5, 1.0] {
            let fq = f.power(q);
            let got = normal_pairs_at(&fq, &u, &NormalCfg::default()).unwrap();
            assert_eq!(got.len(), base.len());
            for (bp, gp) in base.iter().zip(&got) {
                let p = bp.subgradient.as_ref().unwrap();
                let denom = 1.0 + q * p.dot(&u);
                let expect_v = p * (q / denom);
                let expect_nu = 1.0 / (bp.mu.powf(q) * denom);
                assert!((&gp.v - &expect_v).norm() < 1e-10);
                assert!((gp.nu - expect_nu).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zeroing_nu_at_zero_value_leaves_operators_unchanged() {
        // at a joint zero (mu = 0) the vertical component of the normal
        // does not enter either operator
        let with_nu = ContactPair {
            u: v(&[1.0, 0.5]),
            mu: 0.0,
            v: v(&[0.8, 0.4]),
            nu: 3.7,
            horizontal: false,
            subgradient: None,
        };
        let mut zeroed = with_nu.clone();
        zeroed.nu = 0.0;
        assert!(john_operator(&with_nu).sub(&john_operator(&zeroed)).norm() < 1e-15);
        assert!(
            lowner_operator(&with_nu)
                .sub(&lowner_operator(&zeroed))
                .norm()
                < 1e-15
        );
    }

    #[test]
    fn ext_op_membership() {
        let d = 2;
        let pd = ExtOp::new(DMatrix::identity(d, d) * 2.0, 1.0, DVector::zeros(d));
        assert!(pd.in_m() && pd.in_m_plus());
        let rot = ExtOp::new(
            DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
            1.0,
            DVector::zeros(d),
        );
        assert!(rot.in_m() && !rot.in_m_plus());
        let sing = ExtOp::new(DMatrix::zeros(d, d), 1.0, DVector::zeros(d));
        assert!(!sing.in_m());
    }
}
