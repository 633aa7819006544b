//! Synthetic shape generator: superellipsoids with smooth bumps and dents,
//! normalized into the unit sphere. A desk-scale stand-in corpus with the
//! organic character of the target shapes.

use rand::Rng;

use crate::geometry::{icosphere, normalize_shape, TriMesh, Vec3};
use crate::Result;

pub const AXIS_RANGE: (f64, f64) = (0.5, 1.0);
pub const EXPONENT_RANGE: (f64, f64) = (0.8, 1.4);
pub const BUMP_DEPTH_MAX: f64 = 0.3;
pub const BUMP_WIDTH_RANGE: (f64, f64) = (0.25, 0.5);

/// One smooth radial bump (positive depth) or dent (negative depth).
#[derive(Debug, Clone, Copy)]
pub struct Bump {
    pub direction: Vec3,
    /// Relative radial depth, |depth| <= 0.3.
    pub depth: f64,
    /// Angular Gaussian width in radians.
    pub width: f64,
}

/// Generation parameters for one synthetic shape.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub axes: [f64; 3],
    pub exponent: f64,
    pub bumps: Vec<Bump>,
}

pub fn synth_specs(n_shapes: usize, rng: &mut impl Rng) -> Vec<SynthSpec> {
    (0..n_shapes)
        .map(|_| {
            let axes = [
                rng.gen_range(AXIS_RANGE.0..=AXIS_RANGE.1),
                rng.gen_range(AXIS_RANGE.0..=AXIS_RANGE.1),
                rng.gen_range(AXIS_RANGE.0..=AXIS_RANGE.1),
            ];
            let exponent = rng.gen_range(EXPONENT_RANGE.0..=EXPONENT_RANGE.1);
            let n_bumps = rng.gen_range(1..=3);
            let bumps = (0..n_bumps)
                .map(|_| {
                    let dir = random_unit(rng);
                    let depth_mag = rng.gen_range(0.05..=BUMP_DEPTH_MAX);
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    Bump {
                        direction: dir,
                        depth: sign * depth_mag,
                        width: rng.gen_range(BUMP_WIDTH_RANGE.0..=BUMP_WIDTH_RANGE.1),
                    }
                })
                .collect();
            SynthSpec {
                axes,
                exponent,
                bumps,
            }
        })
        .collect()
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Builds the (normalized) mesh for a spec on an icosphere of the given
/// subdivision. The radial construction keeps the surface star-shaped, hence
/// watertight genus-0.
pub fn synth_mesh(spec: &SynthSpec, subdivision: u32) -> Result<TriMesh> {
    let mut mesh = icosphere(subdivision)?;
    for v in &mut mesh.vertices {
        let u = *v; // unit direction
        let base = Vec3::new(
            spec.axes[0] * u.x.signum() * u.x.abs().powf(spec.exponent),
            spec.axes[1] * u.y.signum() * u.y.abs().powf(spec.exponent),
            spec.axes[2] * u.z.signum() * u.z.abs().powf(spec.exponent),
        );
        let mut factor = 1.0;
        for b in &spec.bumps {
            let angle = u.dot(b.direction).clamp(-1.0, 1.0).acos();
            factor += b.depth * (-angle * angle / (2.0 * b.width * b.width)).exp();
        }
        *v = base * factor;
    }
    let (normalized, _, _) = normalize_shape(&mesh)?;
    Ok(normalized)
}
