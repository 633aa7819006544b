use super::mesh::TriMesh;
use super::vec3::{Vec3, ZERO};
use crate::{Error, Result};

const FOUR_SQRT3: f64 = 6.928203230275509; // 4 * sqrt(3)

/// Per-facet regularity term: 4*sqrt(3) * A / (a^2 + b^2 + c^2).
///
/// Equals 1 for an equilateral triangle and 0 for a degenerate one.
pub fn facet_regularity(u: Vec3, v: Vec3, w: Vec3) -> f64 {
    let area = 0.5 * (v - u).cross(w - u).norm();
    let s = (v - u).norm_sq() + (w - v).norm_sq() + (u - w).norm_sq();
    if s <= 0.0 {
        return 0.0;
    }
    FOUR_SQRT3 * area / s
}

/// Mesh regularity penalty: 1 - (4*sqrt(3)/|F|) * sum_f A_f/(a^2+b^2+c^2).
///
/// 0 iff every facet is equilateral; a zero-area facet contributes its
/// maximum (per-facet loss 1). Scale- and rigid-motion-invariant.
pub fn triangle_quality_loss(mesh: &TriMesh) -> Result<f64> {
    if mesh.faces.is_empty() {
        return Err(Error::EmptyPointSet("triangle_quality_loss needs >= 1 face"));
    }
    let sum: f64 = mesh
        .faces
        .iter()
        .map(|f| {
            facet_regularity(
                mesh.vertices[f[0]],
                mesh.vertices[f[1]],
                mesh.vertices[f[2]],
            )
        })
        .sum();
    Ok(1.0 - sum / mesh.face_count() as f64)
}

/// Gradient of [`triangle_quality_loss`] with respect to every vertex.
///
/// Degenerate facets (zero area or zero edge-length sum) contribute a zero
/// subgradient.
pub fn triangle_quality_loss_grad(vertices: &[Vec3], faces: &[[usize; 3]]) -> Vec<Vec3> {
    let mut grad = vec![ZERO; vertices.len()];
    if faces.is_empty() {
        return grad;
    }
    let coeff = -FOUR_SQRT3 / faces.len() as f64;
    for f in faces {
        let (u, v, w) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        let e1 = v - u;
        let e2 = w - u;
        let n = e1.cross(e2);
        let n_norm = n.norm();
        let s = e1.norm_sq() + (w - v).norm_sq() + (u - w).norm_sq();
        if n_norm <= 0.0 || s <= 0.0 {
            continue;
        }
        let area = 0.5 * n_norm;
        let n_hat = n / n_norm;
        // dA/de1 = 0.5 * (e2 x n_hat), dA/de2 = 0.5 * (n_hat x e1)
        let da_de1 = e2.cross(n_hat) * 0.5;
        let da_de2 = n_hat.cross(e1) * 0.5;
        let da_du = -(da_de1 + da_de2);
        let da_dv = da_de1;
        let da_dw = da_de2;
        // ds/du = 2(2u - v - w), cyclic in v, w.
        let ds_du = (u * 2.0 - v - w) * 2.0;
        let ds_dv = (v * 2.0 - w - u) * 2.0;
        let ds_dw = (w * 2.0 - u - v) * 2.0;
        // d(A/s) = (dA * s - A * ds) / s^2
        let inv_s2 = 1.0 / (s * s);
        grad[f[0]] += (da_du * s - ds_du * area) * (coeff * inv_s2);
        grad[f[1]] += (da_dv * s - ds_dv * area) * (coeff * inv_s2);
        grad[f[2]] += (da_dw * s - ds_dw * area) * (coeff * inv_s2);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;
    use crate::geometry::vec3::Rotation;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn single_triangle(u: Vec3, v: Vec3, w: Vec3) -> TriMesh {
        TriMesh {
            vertices: vec![u, v, w],
            faces: vec![[0, 1, 2]],
        }
    }

    #[test]
    fn equilateral_triangle_has_zero_loss() {
        let m = single_triangle(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, 3.0_f64.sqrt() / 2.0, 0.0),
        );
        assert!(triangle_quality_loss(&m).unwrap().abs() < 1e-12);
    }

    #[test]
    fn collinear_triangle_has_loss_one() {
        let m = single_triangle(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        );
        assert!((triangle_quality_loss(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn right_isoceles_matches_hand_value() {
        // Legs of length 1: A = 1/2, sum of squared edges = 1 + 1 + 2 = 4,
        // loss = 1 - 4*sqrt(3)*(1/2)/4 = 1 - sqrt(3)/2.
        let m = single_triangle(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        );
        let expected = 1.0 - 3.0_f64.sqrt() / 2.0;
        assert!((triangle_quality_loss(&m).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn scale_invariance() {
        let mesh = icosphere(2).unwrap();
        let base = triangle_quality_loss(&mesh).unwrap();
        for s in [0.037, 5.0, 811.0] {
            let scaled = mesh.scaled(s);
            assert!((triangle_quality_loss(&scaled).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn rigid_motion_invariance() {
        let mesh = icosphere(1).unwrap();
        let base = triangle_quality_loss(&mesh).unwrap();
        let mut rng = rng_from_seed(5);
        let r = Rotation::random(&mut rng);
        let moved = mesh.rotated(&r).translated(Vec3::new(0.3, -9.0, 2.0));
        assert!((triangle_quality_loss(&moved).unwrap() - base).abs() < 1e-10);
    }

    #[test]
    fn creased_equilateral_mesh_stays_at_optimum() {
        // Two equilateral facets sharing an edge, folded to a sharp dihedral:
        // regularity only sees edge lengths and areas, not dihedral angles.
        let h = 3.0_f64.sqrt() / 2.0;
        let fold = 0.2_f64; // sharp crease
        let m = TriMesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.5, h * fold.cos(), h * fold.sin()),
                Vec3::new(0.5, -h * fold.cos(), h * fold.sin()),
            ],
            faces: vec![[0, 1, 2], [1, 0, 3]],
        };
        assert!(triangle_quality_loss(&m).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(17);
        let mut mesh = icosphere(0).unwrap();
        for v in &mut mesh.vertices {
            *v += Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                * 0.2;
        }
        let grad = triangle_quality_loss_grad(&mesh.vertices, &mesh.faces);
        let h = 1e-6;
        for vi in [0usize, 3, 7, 11] {
            for axis in 0..3 {
                let mut plus = mesh.clone();
                let mut minus = mesh.clone();
                match axis {
                    0 => {
                        plus.vertices[vi].x += h;
                        minus.vertices[vi].x -= h;
                    }
                    1 => {
                        plus.vertices[vi].y += h;
                        minus.vertices[vi].y -= h;
                    }
                    _ => {
                        plus.vertices[vi].z += h;
                        minus.vertices[vi].z -= h;
                    }
                }
                let fd = (triangle_quality_loss(&plus).unwrap()
                    - triangle_quality_loss(&minus).unwrap())
                    / (2.0 * h);
                let an = grad[vi].component(axis);
                let denom = fd.abs().max(an.abs()).max(1e-8);
                assert!(
                    (fd - an).abs() / denom < 1e-5,
                    "vertex {vi} axis {axis}: fd {fd} vs analytic {an}"
                );
            }
        }
    }
}
