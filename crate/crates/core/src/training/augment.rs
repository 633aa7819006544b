//! Shape augmentation by a smooth radial-basis displacement field: a few
//! Gaussian-kernel anchors with random displacement vectors, capped so no
//! point moves more than the anchor magnitude bound, then re-normalized.

use rand::Rng;

use crate::geometry::Vec3;

pub const ANCHOR_COUNT: usize = 4;
pub const MAX_DISPLACEMENT: f64 = 0.1;
pub const BANDWIDTH: f64 = 0.5;

/// Applies the displacement field without re-normalizing. Every point moves
/// by at most [`MAX_DISPLACEMENT`].
pub fn displace_points(points: &[Vec3], rng: &mut impl Rng) -> Vec<Vec3> {
    if points.is_empty() {
        return Vec::new();
    }
    let anchors: Vec<(Vec3, Vec3)> = (0..ANCHOR_COUNT)
        .map(|_| {
            let anchor = points[rng.gen_range(0..points.len())];
            let dir = loop {
                let v = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                if v.norm() > 1e-3 {
                    break v.normalized();
                }
            };
            let magnitude = rng.gen_range(0.0..=MAX_DISPLACEMENT);
            (anchor, dir * magnitude)
        })
        .collect();
    let inv_two_sigma_sq = 1.0 / (2.0 * BANDWIDTH * BANDWIDTH);
    let fields: Vec<Vec3> = points
        .iter()
        .map(|&p| {
            let mut d = Vec3::default();
            for &(a, delta) in &anchors {
                d += delta * (-p.dist_sq(a) * inv_two_sigma_sq).exp();
            }
            d
        })
        .collect();
    // Overlapping kernels can sum past the bound; rescale the whole field so
    // the deformation stays smooth.
    let max_norm = fields.iter().map(|d| d.norm()).fold(0.0_f64, f64::max);
    let scale = if max_norm > MAX_DISPLACEMENT {
        MAX_DISPLACEMENT / max_norm
    } else {
        1.0
    };
    points
        .iter()
        .zip(&fields)
        .map(|(&p, &d)| p + d * scale)
        .collect()
}

/// Zero-mean, unit-max-norm normalization of a point set.
pub fn normalize_points(points: &[Vec3]) -> Vec<Vec3> {
    if points.is_empty() {
        return Vec::new();
    }
    let mut centroid = Vec3::default();
    for &p in points {
        centroid += p;
    }
    centroid = centroid / points.len() as f64;
    let max_norm = points
        .iter()
        .map(|&p| (p - centroid).norm())
        .fold(0.0_f64, f64::max);
    if max_norm <= 0.0 {
        return points.to_vec();
    }
    points.iter().map(|&p| (p - centroid) / max_norm).collect()
}

/// Smooth non-rigid augmentation of a normalized point set.
pub fn augment_shape(points: &[Vec3], rng: &mut impl Rng) -> Vec<Vec3> {
    normalize_points(&displace_points(points, rng))
}
