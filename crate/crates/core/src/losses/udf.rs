//! Fitting loss against an unsigned distance field: the value is the mean
//! trilinear lookup of U at the mesh vertices, and the backward pass injects
//! the precomputed Sobel gradient image instead of differentiating the
//! interpolant. Vertices outside the grid are clamped to it, with a linear
//! penalty on the clamped distance so strays are pulled back inside.

use std::rc::Rc;

use crate::diffcore::{CustomGrad, Tape, Tensor, VarId};
use crate::geometry::Vec3;
use crate::volume::{trilinear, GradientGrid, VoxelGrid};
use crate::{Error, Result};

/// Distance field plus its gradient image, shared across fitting steps.
pub struct UdfField {
    pub potential: VoxelGrid,
    pub gradient: GradientGrid,
}

impl UdfField {
    pub fn new(potential: VoxelGrid, gradient: GradientGrid) -> Result<Rc<UdfField>> {
        if potential.dims.iter().any(|&d| d < 2) {
            return Err(Error::Grid(format!(
                "udf grid needs dims >= 2 on every axis, got {:?}",
                potential.dims
            )));
        }
        if !gradient.same_geometry(&potential) {
            return Err(Error::Grid(
                "gradient grids must share the potential's geometry".into(),
            ));
        }
        Ok(Rc::new(UdfField {
            potential,
            gradient,
        }))
    }

    /// Per-vertex potential and its injected gradient.
    fn sample(&self, p: Vec3) -> (f64, Vec3) {
        let clamped = self.potential.clamp_to_centers(p);
        let base = trilinear(&self.potential, clamped);
        let overshoot = p - clamped;
        let pen = overshoot.norm();
        let grad_inside = self.gradient.trilinear(clamped);
        let grad = if pen > 0.0 {
            grad_inside + overshoot / pen
        } else {
            grad_inside
        };
        (base + pen, grad)
    }

    /// Mean potential over a set of points (untaped evaluation).
    pub fn mean_potential(&self, points: &[Vec3]) -> f64 {
        if points.is_empty() {
            return 0.0;
        }
        points.iter().map(|&p| self.sample(p).0).sum::<f64>() / points.len() as f64
    }
}

struct UdfOp {
    field: Rc<UdfField>,
    grads: Vec<Vec3>,
}

impl CustomGrad for UdfOp {
    fn backward(&self, inputs: &[&Tensor], output_grad: &Tensor) -> Vec<Tensor> {
        let verts = inputs[0];
        let scale = output_grad.item() / verts.rows() as f64;
        let mut out = Tensor::zeros(verts.rows(), 3);
        for (i, g) in self.grads.iter().enumerate() {
            let row = &mut out.data_mut()[i * 3..(i + 1) * 3];
            row[0] = scale * g.x;
            row[1] = scale * g.y;
            row[2] = scale * g.z;
        }
        let _ = &self.field;
        vec![out]
    }
}

/// Records mean_v U(x_v) on the tape with the Sobel-gradient backward rule.
pub fn udf_loss_on_tape(tape: &mut Tape, vertex_rows: VarId, field: Rc<UdfField>) -> Result<VarId> {
    let verts = tape.value(vertex_rows);
    if verts.cols() != 3 || verts.rows() == 0 {
        return Err(Error::shape_mismatch(
            "udf_loss_on_tape",
            "V x 3 vertices (V >= 1)",
            verts.shape_string(),
        ));
    }
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(verts.rows());
    for r in 0..verts.rows() {
        let row = verts.row(r);
        let (value, grad) = field.sample(Vec3::new(row[0], row[1], row[2]));
        total += value;
        grads.push(grad);
    }
    let value = total / verts.rows() as f64;
    Ok(tape.custom(vec![vertex_rows], Tensor::scalar(value), Rc::new(UdfOp { field, grads })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{sobel_gradient, unsigned_distance_transform};

    fn ball_field() -> Rc<UdfField> {
        let mut mask = VoxelGrid::zeros([12, 12, 12], [0.25; 3], Vec3::new(-1.5, -1.5, -1.5)).unwrap();
        for k in 0..12 {
            for j in 0..12 {
                for i in 0..12 {
                    if mask.voxel_center(i, j, k).norm() < 0.8 {
                        mask.set(i, j, k, 1.0);
                    }
                }
            }
        }
        let potential = unsigned_distance_transform(&mask).unwrap();
        let gradient = sobel_gradient(&potential).unwrap();
        UdfField::new(potential, gradient).unwrap()
    }

    #[test]
    fn vertices_on_zero_voxels_give_zero_loss() {
        let field = ball_field();
        // Find a few zero-distance voxel centers.
        let mut pts = Vec::new();
        let g = &field.potential;
        'outer: for k in 0..12 {
            for j in 0..12 {
                for i in 0..12 {
                    if g.get(i, j, k) == 0.0 {
                        pts.push(g.voxel_center(i, j, k));
                        if pts.len() >= 4 {
                            break 'outer;
                        }
                    }
                }
            }
        }
        assert!(!pts.is_empty());
        let flat: Vec<f64> = pts.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        let mut tape = Tape::new();
        let v = tape.param(Tensor::from_vec(pts.len(), 3, flat));
        let loss = udf_loss_on_tape(&mut tape, v, field).unwrap();
        assert_eq!(tape.value(loss).item(), 0.0);
    }

    #[test]
    fn vertex_at_voxel_center_contributes_that_value() {
        let field = ball_field();
        let p = field.potential.voxel_center(2, 5, 7);
        let mut tape = Tape::new();
        let v = tape.param(Tensor::from_vec(1, 3, vec![p.x, p.y, p.z]));
        let loss = udf_loss_on_tape(&mut tape, v, field.clone()).unwrap();
        assert_eq!(tape.value(loss).item(), field.potential.get(2, 5, 7));
    }

    #[test]
    fn injected_gradient_equals_trilinear_gradient_image() {
        let field = ball_field();
        let pts = [
            Vec3::new(0.3, -0.2, 0.5),
            Vec3::new(-0.6, 0.1, 0.2),
            Vec3::new(0.05, 0.85, -0.3),
        ];
        let flat: Vec<f64> = pts.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        let mut tape = Tape::new();
        let v = tape.param(Tensor::from_vec(pts.len(), 3, flat));
        let loss = udf_loss_on_tape(&mut tape, v, field.clone()).unwrap();
        let grads = tape.backward(loss).unwrap();
        let g = grads.get(v).unwrap();
        for (i, &p) in pts.iter().enumerate() {
            let expect = field.gradient.trilinear(p) / pts.len() as f64;
            let row = g.row(i);
            assert!((row[0] - expect.x).abs() < 1e-12);
            assert!((row[1] - expect.y).abs() < 1e-12);
            assert!((row[2] - expect.z).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_grid_vertex_is_pulled_back() {
        let field = ball_field();
        let outside = Vec3::new(5.0, 0.0, 0.0);
        let mut tape = Tape::new();
        let v = tape.param(Tensor::from_vec(1, 3, vec![outside.x, outside.y, outside.z]));
        let loss = udf_loss_on_tape(&mut tape, v, field.clone()).unwrap();
        // Larger than any in-grid distance thanks to the linear penalty.
        let max_ingrid = field.potential.values.iter().cloned().fold(0.0, f64::max);
        assert!(tape.value(loss).item() > max_ingrid);
        let grads = tape.backward(loss).unwrap();
        // Gradient points outward along +x, so descent pulls the vertex back.
        assert!(grads.get(v).unwrap().row(0)[0] > 0.0);
    }

    #[test]
    fn degenerate_grid_is_rejected() {
        let potential = VoxelGrid::zeros([1, 4, 4], [1.0; 3], Vec3::default()).unwrap();
        let gradient = GradientGrid {
            gx: potential.clone(),
            gy: potential.clone(),
            gz: potential.clone(),
        };
        assert!(UdfField::new(potential, gradient).is_err());
    }
}
