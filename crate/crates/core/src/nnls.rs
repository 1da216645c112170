//! Nonnegative least squares by the Lawson-Hanson active-set method.
//!
//! Solves `min_{c >= 0} |M c - b|` for small dense systems. Deterministic:
//! ties in the dual vector are broken by the lowest column index.

use nalgebra::{DMatrix, DVector};

/// Solution of a nonnegative least-squares problem.
#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub coeffs: DVector<f64>,
    pub residual: DVector<f64>,
    pub residual_norm: f64,
}

/// Lawson-Hanson NNLS. `m` is `rows x cols`; the result has `cols`
/// coefficients.
pub fn nnls(m: &DMatrix<f64>, b: &DVector<f64>) -> NnlsSolution {
    let n = m.ncols();
    let mut passive = vec![false; n];
    let mut x = DVector::zeros(n);
    let scale = m.amax().max(b.amax()).max(1.0);
    let tol = 1e-12 * scale;
    let max_iter = 6 * n.max(8);

    for _ in 0..max_iter {
        let w = m.transpose() * (b - m * &x);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol && best.map(|(_, bw)| w[j] > bw).unwrap_or(true) {
                best = Some((j, w[j]));
            }
        }
        let Some((j, _)) = best else { break };
        passive[j] = true;

        // inner loop: least squares on the passive set, stepping back when
        // coefficients cross zero
        loop {
            let cols: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = m.select_columns(cols.iter());
            let z = lstsq(&sub, b);
            if z.iter().all(|&v| v > tol) {
                x.fill(0.0);
                for (idx, &k) in cols.iter().enumerate() {
                    x[k] = z[idx];
                }
                break;
            }
            // step from x toward z, stopping at the first zero crossing
            let mut alpha = f64::INFINITY;
            for (idx, &k) in cols.iter().enumerate() {
                if z[idx] <= tol {
                    let xi = x[k];
                    let denom = xi - z[idx];
                    if denom > 0.0 {
                        alpha = alpha.min(xi / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (idx, &k) in cols.iter().enumerate() {
                x[k] += alpha * (z[idx] - x[k]);
                if x[k] <= tol {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
            if cols.iter().all(|&k| !passive[k]) {
                break;
            }
        }
    }
    let residual = b - m * &x;
    let residual_norm = residual.norm();
    NnlsSolution {
        coeffs: x,
        residual,
        residual_norm,
    }
}

/// Dense least squares via SVD.
fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-13)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_nonnegative_system() {
        // columns e1, e2, e1+e2; b = (2, 1)
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 1.0]);
        let sol = nnls(&m, &b);
        assert!(sol.residual_norm < 1e-12);
        let reconstructed = &m * &sol.coeffs;
        assert!((reconstructed - &b).norm() < 1e-12);
        assert!(sol.coeffs.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn clamps_negative_solution() {
        // unconstrained solution would need a negative coefficient
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![0.0, 1.0]);
        // unconstrained: c = (-1, 1); NNLS must keep c >= 0
        let sol = nnls(&m, &b);
        assert!(sol.coeffs.iter().all(|&c| c >= 0.0));
        // optimal nonnegative: c = (0, 1/2)? check optimality via dual
        let w = m.transpose() * &sol.residual;
        for j in 0..2 {
            if sol.coeffs[j] > 0.0 {
                assert!(w[j].abs() < 1e-10);
            } else {
                assert!(w[j] <= 1e-10);
            }
        }
    }

    #[test]
    fn zero_when_b_in_negative_cone() {
        let m = DMatrix::from_row_slice(1, 1, &[1.0]);
        let b = DVector::from_vec(vec![-3.0]);
        let sol = nnls(&m, &b);
        assert_eq!(sol.coeffs[0], 0.0);
        assert!((sol.residual_norm - 3.0).abs() < 1e-14);
    }

    #[test]
    fn overdetermined_consistent() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let truth = DVector::from_vec(vec![0.5, 2.0]);
        let b = &m * &truth;
        let sol = nnls(&m, &b);
        assert!((sol.coeffs - truth).norm() < 1e-10);
    }
}
