//! Taped mesh operations: the triangle regularity penalty as a custom op, and
//! the sparse blending weights that turn surface/slice samples into
//! differentiable point rows.

use std::rc::Rc;

use crate::diffcore::{CustomGrad, Tape, Tensor, VarId};
use crate::geometry::quality::{facet_regularity, triangle_quality_loss_grad};
use crate::geometry::{SliceSample, SurfaceSample, Vec3};
use crate::{Error, Result};

struct QualityOp {
    faces: Rc<Vec<[usize; 3]>>,
}

impl CustomGrad for QualityOp {
    fn backward(&self, inputs: &[&Tensor], output_grad: &Tensor) -> Vec<Tensor> {
        let verts = rows_to_points(inputs[0]);
        let grad = triangle_quality_loss_grad(&verts, &self.faces);
        let scale = output_grad.item();
        let mut out = Tensor::zeros(inputs[0].rows(), 3);
        for (i, g) in grad.iter().enumerate() {
            let row = &mut out.data_mut()[i * 3..(i + 1) * 3];
            row[0] = scale * g.x;
            row[1] = scale * g.y;
            row[2] = scale * g.z;
        }
        vec![out]
    }
}

fn rows_to_points(t: &Tensor) -> Vec<Vec3> {
    (0..t.rows())
        .map(|r| {
            let row = t.row(r);
            Vec3::new(row[0], row[1], row[2])
        })
        .collect()
}

/// Records the triangle regularity penalty of the mesh spanned by
/// `vertex_rows` and `faces` on the tape.
pub fn quality_loss_on_tape(
    tape: &mut Tape,
    vertex_rows: VarId,
    faces: Rc<Vec<[usize; 3]>>,
) -> Result<VarId> {
    if faces.is_empty() {
        return Err(Error::EmptyPointSet("quality loss needs >= 1 face"));
    }
    let verts = tape.value(vertex_rows);
    let points = rows_to_points(verts);
    let sum: f64 = faces
        .iter()
        .map(|f| facet_regularity(points[f[0]], points[f[1]], points[f[2]]))
        .sum();
    let value = 1.0 - sum / faces.len() as f64;
    Ok(tape.custom(vec![vertex_rows], Tensor::scalar(value), Rc::new(QualityOp { faces })))
}

/// Blend weights routing each surface sample to its three face vertices.
pub fn surface_sample_weights(
    samples: &[SurfaceSample],
    faces: &[[usize; 3]],
) -> Rc<Vec<Vec<(usize, f64)>>> {
    Rc::new(
        samples
            .iter()
            .map(|s| {
                let f = faces[s.face];
                vec![(f[0], s.bary[0]), (f[1], s.bary[1]), (f[2], s.bary[2])]
            })
            .collect(),
    )
}

/// Blend weights for slice samples: r * bary1 + (1 - r) * bary2 per vertex.
pub fn slice_sample_weights(
    samples: &[SliceSample],
    faces: &[[usize; 3]],
) -> Rc<Vec<Vec<(usize, f64)>>> {
    Rc::new(
        samples
            .iter()
            .map(|s| {
                let f = faces[s.face];
                let w = s.weights();
                vec![(f[0], w[0]), (f[1], w[1]), (f[2], w[2])]
            })
            .collect(),
    )
}
