//! Convex bodies: H-polytopes and Euclidean balls.
//!
//! Everything here is desk-scale (`d <= 3` for the generic routines, a few
//! more dimensions for boxes), so vertex and facet enumeration go through
//! exhaustive subset tests with tolerance-based predicates rather than an
//! output-sensitive hull algorithm.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

const GEOM_TOL: f64 = 1e-9;

/// A halfspace `<normal, x> <= offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

/// Bounded polytope in H-representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub dim: usize,
    pub halfspaces: Vec<Halfspace>,
}

impl Polytope {
    pub fn new(dim: usize, halfspaces: Vec<Halfspace>) -> Self {
        Polytope { dim, halfspaces }
    }

    /// Axis-aligned box `[lo_i, hi_i]`.
    pub fn bounding_box(lo: &[f64], hi: &[f64]) -> Self {
        let d = lo.len();
        let mut hs = Vec::with_capacity(2 * d);
        for i in 0..d {
            let mut n = DVector::zeros(d);
            n[i] = 1.0;
            hs.push(Halfspace {
                normal: n.clone(),
                offset: hi[i],
            });
            n[i] = -1.0;
            hs.push(Halfspace {
                normal: n,
                offset: -lo[i],
            });
        }
        Polytope::new(d, hs)
    }

    /// Cube `[-r, r]^d`.
    pub fn cube(dim: usize, r: f64) -> Self {
        Polytope::bounding_box(&vec![-r; dim], &vec![r; dim])
    }

    /// Interval `[a, b]` in one dimension.
    pub fn interval(a: f64, b: f64) -> Self {
        Polytope::bounding_box(&[a], &[b])
    }

    /// Convex hull of a point set, as halfspaces. Points must affinely
    /// span `R^d`.
    pub fn from_points(dim: usize, points: &[DVector<f64>]) -> Result<Self> {
        if points.len() < dim + 1 {
            return Err(Error::DegenerateSpan { dim });
        }
        let mut facets: Vec<Halfspace> = Vec::new();
        let mut idx = vec![0usize; dim];
        subsets(points.len(), dim, &mut idx, 0, 0, &mut |sel| {
            if let Some((n, c)) = hyperplane_through(dim, points, sel) {
                for (normal, offset) in [(n.clone(), c), (-n, -c)] {
                    let scale = 1.0 + offset.abs();
                    let mut ok = true;
                    for p in points {
                        if normal.dot(p) > offset + GEOM_TOL * scale {
                            ok = false;
                            break;
                        }
                    }
                    if ok
                        && !facets.iter().any(|h| {
                            (&h.normal - &normal).norm() < 1e-7
                                && (h.offset - offset).abs() < 1e-7 * scale
                        })
                    {
                        facets.push(Halfspace { normal, offset });
                    }
                }
            }
        });
        if facets.len() <= dim {
            return Err(Error::DegenerateSpan { dim });
        }
        Ok(Polytope::new(dim, facets))
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.halfspaces
            .iter()
            .all(|h| h.normal.dot(x) <= h.offset + tol)
    }

    /// Signed distance-like slack: `max_k <n_k, x> - b_k` with unit-scaled
    /// normals. Negative strictly inside.
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| (h.normal.dot(x) - h.offset) / h.normal.norm().max(1e-300))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Vertex enumeration through basic solutions of `dim`-subsets.
    pub fn vertices(&self) -> Vec<DVector<f64>> {
        let d = self.dim;
        let m = self.halfspaces.len();
        let mut verts: Vec<DVector<f64>> = Vec::new();
        let mut idx = vec![0usize; d];
        subsets(m, d, &mut idx, 0, 0, &mut |sel| {
            let mut a = DMatrix::zeros(d, d);
            let mut b = DVector::zeros(d);
            for (r, &k) in sel.iter().enumerate() {
                a.row_mut(r)
                    .copy_from(&self.halfspaces[k].normal.transpose());
                b[r] = self.halfspaces[k].offset;
            }
            let lu = a.clone().lu();
            if lu.determinant().abs() < 1e-12 {
                return;
            }
            if let Some(x) = lu.solve(&b) {
                if self.contains(&x, 1e-7 * (1.0 + x.norm()))
                    && !verts.iter().any(|v| (v - &x).norm() < 1e-7)
                {
                    verts.push(x);
                }
            }
        });
        verts
    }

    /// Support function `h(y) = max_{x in P} <y, x>`, exact via vertices.
    pub fn support(&self, y: &DVector<f64>) -> f64 {
        self.vertices()
            .iter()
            .map(|v| y.dot(v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Normals of facets active at `u` (within tolerance), normalized.
    pub fn active_normals(&self, u: &DVector<f64>, tol: f64) -> Vec<DVector<f64>> {
        self.halfspaces
            .iter()
            .filter(|h| {
                let s = h.normal.norm();
                (h.normal.dot(u) - h.offset).abs() <= tol * s.max(1.0)
            })
            .map(|h| &h.normal / h.normal.norm())
            .collect()
    }

    pub fn on_boundary(&self, u: &DVector<f64>, tol: f64) -> bool {
        self.contains(u, tol) && !self.active_normals(u, tol).is_empty()
    }

    /// Volume for `dim <= 3`, by fanning simplices from the vertex centroid.
    pub fn volume(&self) -> f64 {
        let verts = self.vertices();
        if verts.is_empty() {
            return 0.0;
        }
        match self.dim {
            1 => {
                let lo = verts.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
                let hi = verts.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
                (hi - lo).max(0.0)
            }
            2 => {
                let c = centroid(&verts);
                let mut pts = verts.clone();
                pts.sort_by(|a, b| {
                    let ta = (a[1] - c[1]).atan2(a[0] - c[0]);
                    let tb = (b[1] - c[1]).atan2(b[0] - c[0]);
                    ta.partial_cmp(&tb).unwrap()
                });
                let mut area = 0.0;
                for i in 0..pts.len() {
                    let p = &pts[i];
                    let q = &pts[(i + 1) % pts.len()];
                    area += p[0] * q[1] - q[0] * p[1];
                }
                area.abs() / 2.0
            }
            3 => {
                let c = centroid(&verts);
                let mut vol = 0.0;
                for h in &self.halfspaces {
                    let nn = h.normal.norm();
                    let face: Vec<&DVector<f64>> = verts
                        .iter()
                        .filter(|v| (h.normal.dot(v) - h.offset).abs() <= 1e-7 * nn.max(1.0))
                        .collect();
                    if face.len() < 3 {
                        continue;
                    }
                    // order face vertices around their centroid in the facet plane
                    let fc = centroid_ref(&face);
                    let n = &h.normal / nn;
                    let e1 = orthonormal_to(&n);
                    let e2 = cross3(&n, &e1);
                    let mut ordered: Vec<&DVector<f64>> = face.clone();
                    ordered.sort_by(|a, b| {
                        let da = *a - &fc;
                        let db = *b - &fc;
                        let ta = da.dot(&e2).atan2(da.dot(&e1));
                        let tb = db.dot(&e2).atan2(db.dot(&e1));
                        ta.partial_cmp(&tb).unwrap()
                    });
                    for i in 1..ordered.len() - 1 {
                        let a = ordered[0] - &c;
                        let b = ordered[i] - &c;
                        let d = ordered[i + 1] - &c;
                        vol += a.dot(&cross3(&b, &d)).abs() / 6.0;
                    }
                }
                vol
            }
            _ => f64::NAN,
        }
    }

    /// Radius of the smallest origin-centered ball containing the polytope.
    pub fn circumradius(&self) -> f64 {
        self.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Componentwise bounds of the vertex set.
    pub fn extents(&self) -> (DVector<f64>, DVector<f64>) {
        let verts = self.vertices();
        let d = self.dim;
        let mut lo = DVector::from_element(d, f64::INFINITY);
        let mut hi = DVector::from_element(d, f64::NEG_INFINITY);
        for v in &verts {
            for i in 0..d {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        (lo, hi)
    }
}

/// Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: DVector<f64>,
    pub radius: f64,
}

/// Supported convex body representations.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexBody {
    Polytope(Polytope),
    Ball(Ball),
}

impl ConvexBody {
    pub fn ball(center: DVector<f64>, radius: f64) -> Self {
        ConvexBody::Ball(Ball { center, radius })
    }

    pub fn unit_ball(dim: usize) -> Self {
        ConvexBody::ball(DVector::zeros(dim), 1.0)
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Polytope(p) => p.dim,
            ConvexBody::Ball(b) => b.center.len(),
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        match self {
            ConvexBody::Polytope(p) => p.contains(x, tol),
            ConvexBody::Ball(b) => (x - &b.center).norm() <= b.radius + tol,
        }
    }

    pub fn support(&self, y: &DVector<f64>) -> f64 {
        match self {
            ConvexBody::Polytope(p) => p.support(y),
            ConvexBody::Ball(b) => b.center.dot(y) + b.radius * y.norm(),
        }
    }

    /// Outer unit normals at a boundary point (extreme rays of the normal
    /// cone). Empty when `u` is interior.
    pub fn normals_at(&self, u: &DVector<f64>, tol: f64) -> Vec<DVector<f64>> {
        match self {
            ConvexBody::Polytope(p) => p.active_normals(u, tol),
            ConvexBody::Ball(b) => {
                let r = u - &b.center;
                if (r.norm() - b.radius).abs() <= tol * b.radius.max(1.0) && r.norm() > 0.0 {
                    vec![&r / r.norm()]
                } else {
                    vec![]
                }
            }
        }
    }

    pub fn on_boundary(&self, u: &DVector<f64>, tol: f64) -> bool {
        !self.normals_at(u, tol).is_empty()
    }

    pub fn volume(&self) -> f64 {
        match self {
            ConvexBody::Polytope(p) => p.volume(),
            ConvexBody::Ball(b) => {
                let d = b.center.len();
                unit_ball_volume(d) * b.radius.powi(d as i32)
            }
        }
    }

    pub fn extents(&self) -> (DVector<f64>, DVector<f64>) {
        match self {
            ConvexBody::Polytope(p) => p.extents(),
            ConvexBody::Ball(b) => {
                let d = b.center.len();
                let r = DVector::from_element(d, b.radius);
                (&b.center - &r, &b.center + &r)
            }
        }
    }

    pub fn circumradius(&self) -> f64 {
        match self {
            ConvexBody::Polytope(p) => p.circumradius(),
            ConvexBody::Ball(b) => b.center.norm() + b.radius,
        }
    }

    /// Strict interior test for the origin.
    pub fn origin_interior(&self, margin: f64) -> bool {
        match self {
            ConvexBody::Polytope(p) => p
                .halfspaces
                .iter()
                .all(|h| h.offset > margin * h.normal.norm()),
            ConvexBody::Ball(b) => b.center.norm() < b.radius - margin,
        }
    }
}

/// Volume of the unit ball in `R^d` (d <= 6 is all we ever need).
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => {
            // V_d = V_{d-2} * 2 pi / d
            unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64
        }
    }
}

fn centroid(pts: &[DVector<f64>]) -> DVector<f64> {
    let mut c = DVector::zeros(pts[0].len());
    for p in pts {
        c += p;
    }
    c / pts.len() as f64
}

fn centroid_ref(pts: &[&DVector<f64>]) -> DVector<f64> {
    let mut c = DVector::zeros(pts[0].len());
    for p in pts {
        c += *p;
    }
    c / pts.len() as f64
}

fn cross3(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

fn orthonormal_to(n: &DVector<f64>) -> DVector<f64> {
    let mut e = DVector::zeros(3);
    let k = (0..3)
        .min_by(|&i, &j| n[i].abs().partial_cmp(&n[j].abs()).unwrap())
        .unwrap();
    e[k] = 1.0;
    let proj = n * n.dot(&e);
    let v = e - proj;
    &v / v.norm()
}

/// Visit all `k`-subsets of `0..n`.
fn subsets(
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
        subsets(n, k, idx, pos + 1, i + 1, f);
    }
}

/// Hyperplane through `dim` points (in `R^dim`), or `None` if they are
/// affinely dependent. Returns `(n, c)` with `<n, x> = c` and `|n| = 1`.
fn hyperplane_through(
    dim: usize,
    points: &[DVector<f64>],
    sel: &[usize],
) -> Option<(DVector<f64>, f64)> {
    if dim == 1 {
        let n = DVector::from_vec(vec![1.0]);
        let c = points[sel[0]][0];
        return Some((n, c));
    }
    let base = &points[sel[0]];
    let edges: Vec<DVector<f64>> = (1..dim).map(|r| &points[sel[r]] - base).collect();
    let scale = edges.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
    let n = match dim {
        2 => DVector::from_vec(vec![-edges[0][1], edges[0][0]]),
        3 => cross3(&edges[0], &edges[1]),
        _ => return None,
    };
    let nn = n.norm();
    if nn < 1e-9 * scale.max(1e-12) * scale.max(1e-12) {
        return None;
    }
    let n = n / nn;
    let c = n.dot(base);
    Some((n, c))
}
