//! Randomized property tests for the core invariants.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use logpos_core::contact::{john_operator, normal_pairs_at, ExtOp, NormalCfg};
use logpos_core::geom::{ConvexBody, Polytope};
use logpos_core::model::{LogConcaveFn, Profile1D};
use logpos_core::oracle::PsiOracle;
use logpos_core::polar::log_conjugate;
use logpos_core::positions::{interpolate_inner, john_margin, MarginCfg, Mode, Position};

fn pd_matrix(d: usize, entries: &[f64]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in 0..=i {
            l[(i, j)] = entries[k];
            k += 1;
        }
        l[(i, i)] = l[(i, i)].abs() + 0.3;
    }
    &l * l.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    /// det(lam A + (1-lam) B)^{1/d} >= lam det(A)^{1/d} + (1-lam) det(B)^{1/d}
    #[test]
    fn minkowski_determinant_inequality(
        ea in proptest::collection::vec(-1.0f64..1.0, 6),
        eb in proptest::collection::vec(-1.0f64..1.0, 6),
        lam in 0.05f64..0.95,
    ) {
        for d in [2usize, 3] {
            let a = pd_matrix(d, &ea);
            let b = pd_matrix(d, &eb);
            let blend = &a * lam + &b * (1.0 - lam);
            let lhs = blend.determinant().powf(1.0 / d as f64);
            let rhs = lam * a.determinant().powf(1.0 / d as f64)
                + (1.0 - lam) * b.determinant().powf(1.0 / d as f64);
            prop_assert!(lhs >= rhs - 1e-9 * (1.0 + rhs.abs()));
        }
    }

    /// Pointwise domination reverses under the log-conjugate.
    #[test]
    fn polar_order_reversal(p1 in 0.4f64..3.0, p2 in 0.4f64..3.0, y in -2.0f64..2.0) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        // f = e^{-lo x^2/2} >= g = e^{-hi x^2/2}
        let f = LogConcaveFn::gaussian(DVector::zeros(1), DMatrix::from_vec(1, 1, vec![lo]));
        let g = LogConcaveFn::gaussian(DVector::zeros(1), DMatrix::from_vec(1, 1, vec![hi]));
        let (pf, pg) = (log_conjugate(&f), log_conjugate(&g));
        let yv = DVector::from_vec(vec![y]);
        prop_assert!(g.value(&yv) <= f.value(&yv) + 1e-12);
        prop_assert!(pf.psi(&yv).neg_exp() <= pg.psi(&yv).neg_exp() + 1e-12);
    }

    /// Every emitted contact pair is normalized: <u^, v^> = 1.
    #[test]
    fn contact_pairs_are_normalized(x in -0.95f64..0.95, slope in 0.5f64..2.0, prec in 0.5f64..3.0) {
        let cfg = NormalCfg::default();
        let fns = vec![
            LogConcaveFn::gaussian(DVector::zeros(1), DMatrix::from_vec(1, 1, vec![prec])),
            LogConcaveFn::radial(1, Profile1D::Linear { slope }),
            LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::interval(-1.0, 1.0))),
        ];
        for f in &fns {
            let u = DVector::from_vec(vec![x]);
            let pairs = normal_pairs_at(f, &u, &cfg).unwrap();
            for p in &pairs {
                prop_assert!((p.pairing() - 1.0).abs() < 1e-9);
                // trace identity of the John operator
                let op = john_operator(p);
                prop_assert!((op.mat.trace() + op.alpha - 1.0).abs() < 1e-9);
            }
        }
    }

    /// Inner blends of feasible positions stay feasible and their
    /// integrals dominate the geometric mean.
    #[test]
    fn inner_interpolation_feasible(
        s1 in 0.3f64..0.9,
        s2 in 0.3f64..0.9,
        a1 in 0.3f64..1.0,
        a2 in 0.3f64..1.0,
        beta in 0.1f64..0.9,
    ) {
        let f = LogConcaveFn::indicator(ConvexBody::Polytope(Polytope::cube(2, 1.0)));
        let ball = LogConcaveFn::indicator(ConvexBody::unit_ball(2));
        let mk = |scale: f64, alpha: f64| Position::new(
            ball.clone(),
            ExtOp::new(DMatrix::identity(2, 2) * scale, alpha, DVector::zeros(2)),
            Mode::John,
        );
        let (p1, p2) = (mk(s1, a1), mk(s2, a2));
        let cfg = MarginCfg::default();
        prop_assert_eq!(john_margin(&f, &p1, &cfg).violation, 0.0);
        let blend = interpolate_inner(&p1, &p2, beta).unwrap();
        prop_assert_eq!(john_margin(&f, &blend, &cfg).violation, 0.0);
        let base = std::f64::consts::PI;
        let ib = blend.s_integral_of(1.0, base).unwrap();
        let i1 = p1.s_integral_of(1.0, base).unwrap();
        let i2 = p2.s_integral_of(1.0, base).unwrap();
        prop_assert!(ib >= i1.powf(beta) * i2.powf(1.0 - beta) - 1e-12);
    }

    /// Closed-form s-integrals scale like alpha^s under height scaling.
    #[test]
    fn s_integral_height_scaling(alpha in 0.2f64..4.0, s in prop::sample::select(vec![0.5f64, 1.0, 2.0])) {
        let quad = logpos_core::quad::QuadCfg::default();
        let f = LogConcaveFn::exp_neg_norm(1);
        let fs = f.clone().scaled(alpha.ln());
        let (a, _) = fs.s_integral(s, &quad).unwrap();
        let (b, _) = f.s_integral(s, &quad).unwrap();
        prop_assert!((a - alpha.powf(s) * b).abs() <= 1e-8 * (1.0 + a.abs()));
    }
}
