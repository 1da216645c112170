//! Deterministic search primitives: coarse grids, direction sets and a
//! small Nelder-Mead refiner. Used by the margin searches and by the
//! numeric conjugation fallback.

use nalgebra::DVector;

use crate::extreal::ExtReal;

/// Large finite stand-in for `+inf` inside simplex arithmetic.
pub const BIG: f64 = 1e30;

pub fn ext_to_big(v: ExtReal) -> f64 {
    match v {
        ExtReal::Finite(x) => x.clamp(-BIG, BIG),
        ExtReal::PosInf => BIG,
    }
}

/// A deterministic set of (approximately) evenly spread unit directions.
/// Exact constructions up to three dimensions, a fixed-seed normalized
/// Gaussian sample above (the classical indicator mode reaches d = 6).
pub fn sphere_directions(dim: usize, n: usize) -> Vec<DVector<f64>> {
    match dim {
        1 => vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![-1.0])],
        2 => (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            // Fibonacci sphere
            let phi = (1.0 + 5f64.sqrt()) / 2.0;
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = 2.0 * std::f64::consts::PI * k as f64 / phi;
                    DVector::from_vec(vec![r * t.cos(), r * t.sin(), z])
                })
                .collect()
        }
        d => {
            use rand::{Rng, SeedableRng};
            let mut dirs: Vec<DVector<f64>> = Vec::with_capacity(2 * d + n);
            for i in 0..d {
                let mut e = DVector::zeros(d);
                e[i] = 1.0;
                dirs.push(e.clone());
                dirs.push(-e);
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xd17);
            while dirs.len() < 2 * d + n {
                let v = DVector::from_fn(d, |_, _| {
                    let u1: f64 = rng.gen_range(1e-12..1.0);
                    let u2: f64 = rng.gen();
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                });
                let nv = v.norm();
                if nv > 1e-9 {
                    dirs.push(v / nv);
                }
            }
            dirs
        }
    }
}

/// All points of the axis grid with `n` nodes per axis (n >= 2), endpoints
/// included. Dimension taken from `lo`.
pub fn grid_points(lo: &DVector<f64>, hi: &DVector<f64>, n: usize) -> Vec<DVector<f64>> {
    let d = lo.len();
    let mut pts = Vec::with_capacity(n.pow(d as u32));
    let mut idx = vec![0usize; d];
    loop {
        let x = DVector::from_fn(d, |i, _| {
            lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (n - 1) as f64
        });
        pts.push(x);
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                return pts;
            }
        }
    }
}

/// Nelder-Mead minimization of a clamped objective. Deterministic; returns
/// the best vertex after `iters` iterations or early convergence.
pub fn nelder_mead(
    f: &dyn Fn(&DVector<f64>) -> f64,
    x0: &DVector<f64>,
    scale: f64,
    iters: usize,
) -> (DVector<f64>, f64) {
    let d = x0.len();
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.clone(), f(x0)));
    for i in 0..d {
        let mut x = x0.clone();
        x[i] += scale;
        let v = f(&x);
        simplex.push((x, v));
    }
    for _ in 0..iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[d].1;
        if (worst - best).abs() <= 1e-13 * (1.0 + best.abs()) {
            break;
        }
        let mut centroid = DVector::zeros(d);
        for p in simplex.iter().take(d) {
            centroid += &p.0;
        }
        centroid /= d as f64;
        let xr = &centroid * 2.0 - &simplex[d].0;
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = &centroid * 3.0 - &simplex[d].0 * 2.0;
            let fe = f(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let xc = (&centroid + &simplex[d].0) * 0.5;
            let fc = f(&xc);
            if fc < simplex[d].1 {
                simplex[d] = (xc, fc);
            } else {
                let x0c = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    p.0 = (&p.0 + &x0c) * 0.5;
                    p.1 = f(&p.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    simplex.swap_remove(0)
}

/// Coarse grid plus Nelder-Mead refinement of an extended-real objective
/// over a box. Returns the best point and its value.
pub fn minimize_ext(
    f: &dyn Fn(&DVector<f64>) -> ExtReal,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    grid_n: usize,
    nm_iters: usize,
) -> (DVector<f64>, ExtReal) {
    let wrapped = |x: &DVector<f64>| ext_to_big(f(x));
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut ranked: Vec<(DVector<f64>, f64)> = grid_points(lo, hi, grid_n)
        .into_iter()
        .map(|x| {
            let v = wrapped(&x);
            (x, v)
        })
        .collect();
    ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let cell = (0..lo.len())
        .map(|i| (hi[i] - lo[i]) / (grid_n - 1) as f64)
        .fold(0.0f64, f64::max);
    for (x, _) in ranked.into_iter().take(8) {
        let (xr, vr) = nelder_mead(&wrapped, &x, cell.max(1e-6), nm_iters);
        if best.as_ref().map(|(_, bv)| vr < *bv).unwrap_or(true) {
            best = Some((xr, vr));
        }
    }
    let (x, v) = best.unwrap();
    let val = if v >= BIG {
        ExtReal::PosInf
    } else {
        ExtReal::Finite(v)
    };
    (x, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nm_finds_quadratic_min() {
        let f = |x: &DVector<f64>| (x[0] - 1.5).powi(2) + (x[1] + 0.5).powi(2);
        let (x, v) = nelder_mead(&f, &DVector::from_vec(vec![0.0, 0.0]), 0.5, 400);
        assert!(v < 1e-12);
        assert!((x[0] - 1.5).abs() < 1e-6 && (x[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn grid_counts() {
        let lo = DVector::from_vec(vec![0.0, 0.0]);
        let hi = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(grid_points(&lo, &hi, 5).len(), 25);
    }

    #[test]
    fn directions_are_unit() {
        for d in 1..=3usize {
            for v in sphere_directions(d, 20) {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
