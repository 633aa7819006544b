//! Minimal enclosing sphere of a point set (incremental Welzl-style with up
//! to four support points). Accurate to floating-point roundoff, far inside
//! the documented 0.1% tolerance.

use rand::seq::SliceRandom;

use crate::geometry::Vec3;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl Sphere {
    fn contains(&self, p: Vec3, slack: f64) -> bool {
        self.center.dist_sq(p) <= self.radius * self.radius + slack
    }
}

const SLACK: f64 = 1e-12;

/// Diameter of a minimal enclosing sphere of the mesh vertices.
pub fn bounding_sphere_diameter(points: &[Vec3]) -> f64 {
    2.0 * min_sphere(points).radius
}

pub fn min_sphere(points: &[Vec3]) -> Sphere {
    assert!(!points.is_empty(), "min_sphere needs >= 1 point");
    let mut pts = points.to_vec();
    // Deterministic shuffle: expected-linear behavior, reproducible output.
    pts.shuffle(&mut rng_from_seed(0x5EED_BA11));
    let mut sphere = Sphere {
        center: pts[0],
        radius: 0.0,
    };
    for i in 1..pts.len() {
        if !sphere.contains(pts[i], SLACK) {
            sphere = sphere_with_one(&pts[..i], pts[i]);
        }
    }
    sphere
}

fn sphere_with_one(points: &[Vec3], q: Vec3) -> Sphere {
    let mut sphere = Sphere {
        center: q,
        radius: 0.0,
    };
    for i in 0..points.len() {
        if !sphere.contains(points[i], SLACK) {
            sphere = sphere_with_two(&points[..i], points[i], q);
        }
    }
    sphere
}

fn sphere_with_two(points: &[Vec3], q1: Vec3, q2: Vec3) -> Sphere {
    let mut sphere = diameter_sphere(q1, q2);
    for i in 0..points.len() {
        if !sphere.contains(points[i], SLACK) {
            sphere = sphere_with_three(&points[..i], points[i], q1, q2);
        }
    }
    sphere
}

fn sphere_with_three(points: &[Vec3], q1: Vec3, q2: Vec3, q3: Vec3) -> Sphere {
    let mut sphere = circumsphere_three(q1, q2, q3);
    for (i, &p) in points.iter().enumerate() {
        if !sphere.contains(p, SLACK) {
            sphere = circumsphere_four(points[..i].to_vec(), p, q1, q2, q3);
        }
    }
    sphere
}

fn circumsphere_four(points: Vec<Vec3>, q1: Vec3, q2: Vec3, q3: Vec3, q4: Vec3) -> Sphere {
    // With four support points the sphere is determined; points already
    // processed are inside by construction, so no further recursion is
    // needed beyond numerical guarding.
    let sphere = circumsphere(&[q1, q2, q3, q4]);
    debug_assert!(points.iter().all(|&p| sphere.contains(p, 1e-9)));
    sphere
}

fn diameter_sphere(a: Vec3, b: Vec3) -> Sphere {
    let center = (a + b) * 0.5;
    Sphere {
        center,
        radius: center.dist(a),
    }
}

/// Circumsphere of three points (in their plane), guarded for collinearity.
fn circumsphere_three(a: Vec3, b: Vec3, c: Vec3) -> Sphere {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(ac);
    let n2 = n.norm_sq();
    if n2 < 1e-24 {
        // Collinear: fall back to the widest diameter sphere.
        let candidates = [diameter_sphere(a, b), diameter_sphere(a, c), diameter_sphere(b, c)];
        return candidates
            .into_iter()
            .max_by(|x, y| x.radius.partial_cmp(&y.radius).unwrap())
            .unwrap();
    }
    let to_center = (n.cross(ab) * ac.norm_sq() + ac.cross(n) * ab.norm_sq()) / (2.0 * n2);
    let center = a + to_center;
    Sphere {
        center,
        radius: to_center.norm(),
    }
}

/// Circumsphere through up to four points via the linear system
/// |x - c|^2 = r^2.
fn circumsphere(pts: &[Vec3; 4]) -> Sphere {
    // Subtract pts[0]: 2 (p_i - p_0) . c' = |p_i - p_0|^2, c = p_0 + c'.
    let d1 = pts[1] - pts[0];
    let d2 = pts[2] - pts[0];
    let d3 = pts[3] - pts[0];
    let rhs = [d1.norm_sq() * 0.5, d2.norm_sq() * 0.5, d3.norm_sq() * 0.5];
    let det = d1.dot(d2.cross(d3));
    if det.abs() < 1e-18 {
        // Degenerate (coplanar) support: use the best three-point sphere.
        let mut best = circumsphere_three(pts[0], pts[1], pts[2]);
        for (a, b, c) in [
            (pts[0], pts[1], pts[3]),
            (pts[0], pts[2], pts[3]),
            (pts[1], pts[2], pts[3]),
        ] {
            let s = circumsphere_three(a, b, c);
            if s.radius > best.radius {
                best = s;
            }
        }
        return best;
    }
    // Cramer's rule.
    let cx = Vec3::new(rhs[0], rhs[1], rhs[2]);
    let col = |i: usize| Vec3::new(d1.component(i), d2.component(i), d3.component(i));
    let (c0, c1, c2) = (col(0), col(1), col(2));
    let inv_det = 1.0 / det;
    let sol = Vec3::new(
        cx.dot(c1.cross(c2)) * inv_det,
        c0.dot(cx.cross(c2)) * inv_det,
        c0.dot(c1.cross(cx)) * inv_det,
    );
    let center = pts[0] + sol;
    Sphere {
        center,
        radius: center.dist(pts[0]),
    }
}
