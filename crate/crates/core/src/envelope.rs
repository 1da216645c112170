//! Inner bodies and their log-concave envelopes.
//!
//! A finite inner body is a list of weighted atoms `(x_i, v_i)` with
//! `v_i > 0`. Its log-concave envelope is the minimal upper semi-continuous
//! log-concave function above it; the epigraph of its `psi` is the closed
//! convex hull of the points `(x_i, -ln v_i)` together with the vertical
//! recession ray, which makes the envelope a polyhedral `psi` on the
//! convex hull of the atom locations.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::geom::Polytope;
use crate::model::{AffinePiece, LogConcaveFn};
use crate::Result;

/// Either a finite atom list or an already log-concave function.
#[derive(Debug, Clone)]
pub enum InnerBody {
    Atoms {
        dim: usize,
        atoms: Vec<(DVector<f64>, f64)>,
    },
    Function(LogConcaveFn),
}

impl InnerBody {
    pub fn dim(&self) -> usize {
        match self {
            InnerBody::Atoms { dim, .. } => *dim,
            InnerBody::Function(f) => f.dim,
        }
    }
}

/// Log-concave envelope of an inner body. Finite atom lists must have
/// positive values and affinely spanning locations; `d <= 3`.
pub fn log_concave_envelope(gb: &InnerBody) -> Result<LogConcaveFn> {
    match gb {
        InnerBody::Function(f) => Ok(f.clone()),
        InnerBody::Atoms { dim, atoms } => envelope_of_atoms(*dim, atoms),
    }
}

fn envelope_of_atoms(dim: usize, atoms: &[(DVector<f64>, f64)]) -> Result<LogConcaveFn> {
    if atoms.iter().any(|(_, v)| *v <= 0.0) {
        return Err(Error::InvalidInput("atom values must be positive".into()));
    }
    let xs: Vec<DVector<f64>> = atoms.iter().map(|(x, _)| x.clone()).collect();
    let domain = Polytope::from_points(dim, &xs)?;
    let heights: Vec<f64> = atoms.iter().map(|(_, v)| -v.ln()).collect();

    // lower (non-vertical) facets of the epigraph point set
    let mut pieces: Vec<AffinePiece> = Vec::new();
    let m = atoms.len();
    let mut idx = vec![0usize; dim + 1];
    visit_subsets(m, dim + 1, &mut idx, 0, 0, &mut |sel| {
        // solve <g, x_i> + b = t_i for the selected points
        let mut a = DMatrix::zeros(dim + 1, dim + 1);
        let mut rhs = DVector::zeros(dim + 1);
        for (r, &k) in sel.iter().enumerate() {
            for c in 0..dim {
                a[(r, c)] = xs[k][c];
            }
            a[(r, dim)] = 1.0;
            rhs[r] = heights[k];
        }
        let lu = a.clone().lu();
        if lu.determinant().abs() < 1e-10 {
            return;
        }
        let sol = match lu.solve(&rhs) {
            Some(s) => s,
            None => return,
        };
        let g = DVector::from_fn(dim, |i, _| sol[i]);
        let b = sol[dim];
        let scale = 1.0 + heights.iter().fold(0.0f64, |acc, h| acc.max(h.abs()));
        let lower = (0..m).all(|j| heights[j] >= g.dot(&xs[j]) + b - 1e-9 * scale);
        if lower
            && !pieces
                .iter()
                .any(|p| (&p.grad - &g).norm() < 1e-8 && (p.offset - b).abs() < 1e-8 * scale)
        {
            pieces.push(AffinePiece { grad: g, offset: b });
        }
    });
    if pieces.is_empty() {
        return Err(Error::DegenerateSpan { dim });
    }
    let best = (0..m)
        .min_by(|&i, &j| heights[i].partial_cmp(&heights[j]).unwrap())
        .unwrap();
    Ok(LogConcaveFn::piecewise(dim, pieces, Some(domain)).with_max_hint(xs[best].clone()))
}

fn visit_subsets(
    n: usize,
    k: usize,
    idx: &mut Vec<usize>,
    pos: usize,
    start: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if pos == k {
        f(idx);
        return;
    }
    for i in start..n {
        idx[pos] = i;
        visit_subsets(n, k, idx, pos + 1, i + 1, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extreal::ExtReal;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn tent_from_three_atoms() {
        let e = std::f64::consts::E;
        let gb = InnerBody::Atoms {
            dim: 1,
            atoms: vec![
                (v(&[-1.0]), 1.0 / e),
                (v(&[0.0]), 1.0),
                (v(&[1.0]), 1.0 / e),
            ],
        };
        let env = log_concave_envelope(&gb).unwrap();
        // e^{-|x|} on [-1, 1]
        for x in [-1.0f64, -0.5, 0.0, 0.3, 1.0] {
            let want = (-x.abs()).exp();
            assert!((env.value(&v(&[x])) - want).abs() < 1e-12, "x={x}");
        }
        assert!(env.psi(&v(&[1.5])).is_infinite());
    }

    #[test]
    fn square_atoms_give_indicator() {
        let gb = InnerBody::Atoms {
            dim: 2,
            atoms: vec![
                (v(&[1.0, 1.0]), 1.0),
                (v(&[1.0, -1.0]), 1.0),
                (v(&[-1.0, 1.0]), 1.0),
                (v(&[-1.0, -1.0]), 1.0),
            ],
        };
        let env = log_concave_envelope(&gb).unwrap();
        assert_eq!(env.psi(&v(&[0.2, -0.4])), ExtReal::Finite(0.0));
        assert_eq!(env.psi(&v(&[1.0, 1.0])), ExtReal::Finite(0.0));
        assert!(env.psi(&v(&[1.2, 0.0])).is_infinite());
    }

    #[test]
    fn dominated_atom_absorbed() {
        let e = std::f64::consts::E;
        let gb = InnerBody::Atoms {
            dim: 1,
            atoms: vec![(v(&[0.0]), 1.0), (v(&[1.0]), 1.0), (v(&[0.5]), 1.0 / e)],
        };
        let env = log_concave_envelope(&gb).unwrap();
        for x in [0.0, 0.25, 0.5, 1.0] {
            assert!((env.value(&v(&[x])) - 1.0).abs() < 1e-12);
        }
        assert!(env.psi(&v(&[-0.1])).is_infinite());
    }

    #[test]
    fn envelope_dominates_atoms() {
        let gb = InnerBody::Atoms {
            dim: 2,
            atoms: vec![
                (v(&[1.0, 0.0]), 0.5),
                (v(&[0.0, 1.0]), 0.7),
                (v(&[-1.0, 0.0]), 0.5),
                (v(&[0.0, -1.0]), 0.9),
                (v(&[0.1, 0.1]), 1.0),
            ],
        };
        let env = log_concave_envelope(&gb).unwrap();
        if let InnerBody::Atoms { atoms, .. } = &gb {
            for (x, val) in atoms {
                assert!(env.value(x) >= val - 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_atoms_rejected() {
        let gb = InnerBody::Atoms {
            dim: 2,
            atoms: vec![
                (v(&[0.0, 0.0]), 1.0),
                (v(&[1.0, 0.0]), 1.0),
                (v(&[2.0, 0.0]), 1.0),
            ],
        };
        assert!(matches!(
            log_concave_envelope(&gb),
            Err(Error::DegenerateSpan { .. })
        ));
    }
}
