//! Deterministic numeric integration.
//!
//! Tensor-product adaptive Simpson quadrature for one and two dimensions,
//! quasi-Monte Carlo (randomly shifted Halton with a fixed seed) for three.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Integration configuration. The defaults match the library-wide targets:
/// relative error 1e-6 for the adaptive rules, 1e-4 for QMC.
#[derive(Debug, Clone)]
pub struct QuadCfg {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    /// Levels that always subdivide before the error test may accept
    /// (guards against coincidental agreement across discontinuities).
    pub min_levels: u32,
    pub qmc_points: usize,
    pub seed: u64,
}

impl Default for QuadCfg {
    fn default() -> Self {
        QuadCfg {
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            max_depth: 44,
            min_levels: 7,
            qmc_points: 1 << 15,
            seed: 0x5eed,
        }
    }
}

/// Adaptive Simpson on `[a, b]`. Returns `(value, error estimate)`.
pub fn adaptive_1d(f: &dyn Fn(f64) -> f64, a: f64, b: f64, cfg: &QuadCfg) -> (f64, f64) {
    if a >= b {
        return (0.0, 0.0);
    }
    // pilot composite-Simpson pass to set the tolerance scale
    let n = 64;
    let h = (b - a) / n as f64;
    let mut pilot = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        pilot += w * f(a + h * i as f64);
    }
    pilot *= h / 3.0;
    let tol = (pilot.abs() * cfg.rel_tol * 0.1).max(cfg.abs_tol);
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adapt(
        f,
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol,
        cfg.max_depth,
        cfg.min_levels,
    )
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    force: u32,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || (force == 0 && delta.abs() <= 15.0 * tol) {
        return (left + right + delta / 15.0, delta.abs() / 15.0);
    }
    let fnext = force.saturating_sub(1);
    let (lv, le) = adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, fnext);
    let (rv, re) = adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, fnext);
    (lv + rv, le + re)
}

/// Integral of `f` over the axis box `[lo, hi]`, dimension from `lo.len()`.
pub fn integrate_box(
    f: &dyn Fn(&DVector<f64>) -> f64,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    cfg: &QuadCfg,
) -> (f64, f64) {
    match lo.len() {
        1 => {
            let g = |x: f64| f(&DVector::from_vec(vec![x]));
            adaptive_1d(&g, lo[0], hi[0], cfg)
        }
        2 => {
            let mut inner_cfg = cfg.clone();
            inner_cfg.rel_tol = cfg.rel_tol * 0.2;
            inner_cfg.max_depth = cfg.max_depth.saturating_sub(14);
            let err_acc = std::cell::Cell::new(0.0f64);
            let g = |x: f64| {
                let h = |y: f64| f(&DVector::from_vec(vec![x, y]));
                let (v, e) = adaptive_1d(&h, lo[1], hi[1], &inner_cfg);
                err_acc.set(err_acc.get() + e);
                v
            };
            let mut outer_cfg = cfg.clone();
            outer_cfg.max_depth = cfg.max_depth.saturating_sub(20);
            let (v, e) = adaptive_1d(&g, lo[0], hi[0], &outer_cfg);
            (v, e + err_acc.get() * (hi[0] - lo[0]).abs() * 1e-2)
        }
        3 => qmc_box(f, lo, hi, cfg),
        d => panic!("integrate_box: unsupported dimension {d}"),
    }
}

/// Digitally shifted Sobol rule over a box; the shift set is fixed by the
/// seed, so results are reproducible. Error estimate from the spread of
/// four independent shifts.
fn qmc_box(
    f: &dyn Fn(&DVector<f64>) -> f64,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    cfg: &QuadCfg,
) -> (f64, f64) {
    let d = lo.len();
    let vol: f64 = (0..d).map(|i| hi[i] - lo[i]).product();
    if vol <= 0.0 {
        return (0.0, 0.0);
    }
    let dirs = sobol_directions(d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shifts: Vec<Vec<u32>> = (0..4)
        .map(|_| (0..d).map(|_| rng.gen::<u32>()).collect())
        .collect();
    let n = cfg.qmc_points;
    let scale = 1.0 / (u32::MAX as f64 + 1.0);
    let mut means = Vec::with_capacity(shifts.len());
    let mut x = DVector::zeros(d);
    for shift in &shifts {
        let mut state = vec![0u32; d];
        let mut acc = 0.0;
        for k in 0..n {
            for i in 0..d {
                let u = ((state[i] ^ shift[i]) as f64 + 0.5) * scale;
                x[i] = lo[i] + (hi[i] - lo[i]) * u;
            }
            acc += f(&x);
            // Gray-code advance
            let c = (k + 1).trailing_zeros() as usize;
            for i in 0..d {
                state[i] ^= dirs[i][c];
            }
        }
        means.push(acc / n as f64 * vol);
    }
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    (
        mean,
        (var / means.len() as f64).sqrt().max(mean.abs() * 1e-12),
    )
}

/// Direction numbers (32-bit) of the first three Sobol dimensions:
/// van der Corput, then the primitive polynomials `x + 1` and
/// `x^2 + x + 1` with the standard initial values.
fn sobol_directions(d: usize) -> Vec<[u32; 32]> {
    assert!(d <= 3, "sobol_directions: unsupported dimension {d}");
    let mut out = Vec::with_capacity(d);
    // dimension 1: m_k = 1
    let mut v = [0u32; 32];
    for (k, slot) in v.iter_mut().enumerate() {
        *slot = 1u32 << (31 - k);
    }
    out.push(v);
    if d >= 2 {
        // x + 1: m_k = 2 m_{k-1} xor m_{k-1}
        let mut m = [0u64; 32];
        m[0] = 1;
        for k in 1..32 {
            m[k] = (2 * m[k - 1]) ^ m[k - 1];
        }
        out.push(pack_directions(&m));
    }
    if d >= 3 {
        // x^2 + x + 1 (a1 = 1), m_1 = 1, m_2 = 3:
        // m_k = 2 m_{k-1} xor 4 m_{k-2} xor m_{k-2}
        let mut m = [0u64; 32];
        m[0] = 1;
        m[1] = 3;
        for k in 2..32 {
            m[k] = (2 * m[k - 1]) ^ (4 * m[k - 2]) ^ m[k - 2];
        }
        out.push(pack_directions(&m));
    }
    out
}

fn pack_directions(m: &[u64; 32]) -> [u32; 32] {
    let mut v = [0u32; 32];
    for k in 0..32 {
        v[k] = (m[k] as u32) << (31 - k);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_exact() {
        let cfg = QuadCfg::default();
        let (v, _) = adaptive_1d(&|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, &cfg);
        assert!((v - (4.0 - 4.0 + 2.0)).abs() < 1e-10);
    }

    #[test]
    fn gaussian_1d() {
        let cfg = QuadCfg::default();
        let (v, e) = adaptive_1d(&|x: f64| (-x * x / 2.0).exp(), -10.0, 10.0, &cfg);
        let exact = (2.0 * std::f64::consts::PI).sqrt();
        assert!((v - exact).abs() < 1e-6 * exact, "v={v} err={e}");
    }

    #[test]
    fn gaussian_2d() {
        let cfg = QuadCfg::default();
        let lo = DVector::from_vec(vec![-8.0, -8.0]);
        let hi = DVector::from_vec(vec![8.0, 8.0]);
        let (v, _) = integrate_box(
            &|x: &DVector<f64>| (-x.norm_squared() / 2.0).exp(),
            &lo,
            &hi,
            &cfg,
        );
        assert!((v - 2.0 * std::f64::consts::PI).abs() < 1e-6 * 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn qmc_ball_volume_3d() {
        let cfg = QuadCfg::default();
        let lo = DVector::from_vec(vec![-1.0, -1.0, -1.0]);
        let hi = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let (v, _) = integrate_box(
            &|x: &DVector<f64>| if x.norm() <= 1.0 { 1.0 } else { 0.0 },
            &lo,
            &hi,
            &cfg,
        );
        let exact = 4.0 * std::f64::consts::PI / 3.0;
        assert!((v - exact).abs() < 3e-3 * exact, "v={v}");
    }

    #[test]
    fn qmc_deterministic() {
        let cfg = QuadCfg::default();
        let lo = DVector::from_vec(vec![0.0, 0.0, 0.0]);
        let hi = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let f = |x: &DVector<f64>| x[0] * x[1] + x[2];
        let (v1, _) = integrate_box(&f, &lo, &hi, &cfg);
        let (v2, _) = integrate_box(&f, &lo, &hi, &cfg);
        assert_eq!(v1, v2);
    }
}
