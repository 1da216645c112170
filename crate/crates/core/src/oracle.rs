//! A common oracle interface over `psi = -ln f`.
//!
//! Margin searches, contact extraction and numeric conjugation only need
//! evaluation, subgradients and support geometry, so they are written
//! against this trait. It is implemented by [`LogConcaveFn`], by affine
//! re-parametrizations ([`TransformedFn`]) and by numeric conjugates,
//! which lets positions of functions and polars of positions flow through
//! the same code paths.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::extreal::ExtReal;
use crate::geom::Polytope;
use crate::model::LogConcaveFn;
use crate::search;
use crate::Result;

/// Numeric oracle bundle for an upper semi-continuous log-concave function.
pub trait PsiOracle: Send + Sync {
    fn dim(&self) -> usize;

    /// `psi(x) = -ln f(x)`, `+inf` outside the support.
    fn psi(&self, x: &DVector<f64>) -> ExtReal;

    /// Extreme subgradients of `psi` at `x`.
    fn subgradients(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>>;

    /// Hessian where twice differentiable.
    fn hessian_psi(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// Extreme rays (unit) of the support normal cone at a boundary point.
    fn support_normals(&self, u: &DVector<f64>, tol: f64) -> Vec<DVector<f64>>;

    fn on_support_boundary(&self, u: &DVector<f64>, tol: f64) -> bool;

    /// Axis box containing the support (infinite extents allowed).
    fn support_box(&self) -> (DVector<f64>, DVector<f64>);

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.psi(x).neg_exp()
    }

    /// A maximizer of `f` and the maximum value. The default searches the
    /// (truncated) support box.
    fn max_point(&self) -> (DVector<f64>, f64) {
        let (mut lo, mut hi) = self.support_box();
        for i in 0..self.dim() {
            if !lo[i].is_finite() {
                lo[i] = -8.0;
            }
            if !hi[i].is_finite() {
                hi[i] = 8.0;
            }
        }
        let f = |x: &DVector<f64>| self.psi(x);
        let (x, v) = search::minimize_ext(&f, &lo, &hi, 17, 400);
        (x, v.neg_exp())
    }
}

impl PsiOracle for LogConcaveFn {
    fn dim(&self) -> usize {
        self.dim
    }

    fn psi(&self, x: &DVector<f64>) -> ExtReal {
        LogConcaveFn::psi(self, x)
    }

    fn subgradients(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        LogConcaveFn::subgradients(self, x)
    }

    fn hessian_psi(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        LogConcaveFn::hessian_psi(self, x)
    }

    fn support_normals(&self, u: &DVector<f64>, tol: f64) -> Vec<DVector<f64>> {
        LogConcaveFn::support_normals(self, u, tol)
    }

    fn on_support_boundary(&self, u: &DVector<f64>, tol: f64) -> bool {
        LogConcaveFn::on_support_boundary(self, u, tol)
    }

    fn support_box(&self) -> (DVector<f64>, DVector<f64>) {
        LogConcaveFn::support_box(self)
    }

    fn max_point(&self) -> (DVector<f64>, f64) {
        LogConcaveFn::max_point(self)
    }
}

/// `psi(x) = outer * psi_base(lin x + shift) + <tilt, x> + offset`.
///
/// Covers positions (`outer = 1`, no tilt), polars of affine images
/// (tilted), and `q`-th powers of polars (`outer = q` with `lin = Id/q`).
#[derive(Clone)]
pub struct TransformedFn {
    pub base: Arc<dyn PsiOracle>,
    pub lin: DMatrix<f64>,
    pub shift: DVector<f64>,
    pub tilt: DVector<f64>,
    pub offset: f64,
    pub outer: f64,
}

impl TransformedFn {
    pub fn position_like(
        base: Arc<dyn PsiOracle>,
        lin: DMatrix<f64>,
        shift: DVector<f64>,
        offset: f64,
    ) -> Self {
        let d = lin.nrows();
        TransformedFn {
            base,
            lin,
            shift,
            tilt: DVector::zeros(d),
            offset,
            outer: 1.0,
        }
    }

    fn inner_point(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.lin * x + &self.shift
    }
}

impl PsiOracle for TransformedFn {
    fn dim(&self) -> usize {
        self.lin.ncols()
    }

    fn psi(&self, x: &DVector<f64>) -> ExtReal {
        let z = self.inner_point(x);
        self.base
            .psi(&z)
            .scale(self.outer)
            .add_finite(self.tilt.dot(x) + self.offset)
    }

    fn subgradients(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        let z = self.inner_point(x);
        let ps = self.base.subgradients(&z)?;
        Ok(ps
            .into_iter()
            .map(|p| self.lin.transpose() * p * self.outer + &self.tilt)
            .collect())
    }

    fn hessian_psi(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let z = self.inner_point(x);
        let h = self.base.hessian_psi(&z)?;
        Some(self.lin.transpose() * h * &self.lin * self.outer)
    }

    fn support_normals(&self, u: &DVector<f64>, tol: f64) -> Vec<DVector<f64>> {
        let z = self.inner_point(u);
        self.base
            .support_normals(&z, tol)
            .into_iter()
            .map(|n| {
                let m = self.lin.transpose() * n;
                let s = m.norm();
                if s > 0.0 {
                    m / s
                } else {
                    m
                }
            })
            .collect()
    }

    fn on_support_boundary(&self, u: &DVector<f64>, tol: f64) -> bool {
        self.base.on_support_boundary(&self.inner_point(u), tol)
    }

    fn support_box(&self) -> (DVector<f64>, DVector<f64>) {
        let d = self.dim();
        let (lo, hi) = self.base.support_box();
        let bounded = lo.iter().all(|v| v.is_finite()) && hi.iter().all(|v| v.is_finite());
        if !bounded {
            return (
                DVector::from_element(d, f64::NEG_INFINITY),
                DVector::from_element(d, f64::INFINITY),
            );
        }
        // preimage of the base box under x -> lin x + shift
        let mut hs = Vec::with_capacity(2 * d);
        for i in 0..d {
            let row = self.lin.row(i).transpose();
            hs.push(crate::geom::Halfspace {
                normal: row.clone(),
                offset: hi[i] - self.shift[i],
            });
            hs.push(crate::geom::Halfspace {
                normal: -row,
                offset: -(lo[i] - self.shift[i]),
            });
        }
        Polytope::new(d, hs).extents()
    }
}
