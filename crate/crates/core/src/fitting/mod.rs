//! Inference-time fitting: optimize a per-vertex latent field against a task
//! loss with the decoder frozen, regularized by Laplacian smoothing of the
//! latents. Global mode constrains every vertex to one shared latent vector
//! by optimizing that single vector directly (the exact infinite-smoothing
//! limit); local mode lets rows differ and applies the smoothing update after
//! every optimizer step.

pub mod annotations;

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::decoder::{
    deform_mesh, deform_on_tape, tensor_rows_to_points, vertices_tensor, Checkpoint, DecoderVars,
    LatentField,
};
use crate::diffcore::{AdamConfig, AdamState, Tape, Tensor};
use crate::geometry::{
    icosphere, isotropic_remesh, self_intersection_fraction, triangle_quality_loss,
    uniform_laplacian, LaplacianFlavor, Plane, TriMesh, Vec3,
};
use crate::geometry::sample_surface_points;
use crate::losses::{
    chamfer, chamfer_on_tape, laplacian_smooth_step, quality_loss_on_tape, slice_chamfer,
    slice_chamfer_on_tape, surface_sample_weights, ChamferNorm, KdTree, PlaneAnnotations,
    UdfField,
};
#[cfg(debug_assertions)]
use crate::losses::dirichlet_energy;
use crate::rng::{derive_rng, derive_rng_indexed, stream};
use crate::volume::{
    robust_center_scale_from_mask, sobel_gradient, unsigned_distance_transform, voxelize,
    VoxelGrid,
};
use crate::{Error, Result};

pub use annotations::{read_plane_annotations, write_plane_annotations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMode {
    Local,
    Global,
}

/// Fitting hyperparameters. `lambda_dir = inf` is equivalent to global mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub mode: FitMode,
    pub lambda_reg: f64,
    pub lambda_dir: f64,
    /// Laplacian power of the Dirichlet update.
    pub p: usize,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub remesh: bool,
    pub remesh_iterations: usize,
    /// Template subdivision; None means one level above the training
    /// template recorded in the checkpoint.
    pub template_subdivision: Option<u32>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            mode: FitMode::Local,
            lambda_reg: 0.001,
            lambda_dir: 0.2,
            p: 2,
            steps: 800,
            lr: 0.002,
            seed: 0,
            remesh: true,
            remesh_iterations: 5,
            template_subdivision: None,
        }
    }
}

impl FitConfig {
    /// Point-cloud fitting defaults.
    pub fn for_points() -> FitConfig {
        FitConfig {
            lambda_reg: 0.001,
            lambda_dir: 0.2,
            ..FitConfig::default()
        }
    }

    /// Planar-curve-annotation fitting defaults: lean on the prior.
    pub fn for_planes() -> FitConfig {
        FitConfig {
            lambda_reg: 0.01,
            lambda_dir: 100.0,
            ..FitConfig::default()
        }
    }

    /// Segmentation-refinement defaults: fully constrained latent field.
    pub fn for_segmentation() -> FitConfig {
        FitConfig {
            mode: FitMode::Global,
            lambda_reg: 0.0,
            lambda_dir: f64::INFINITY,
            ..FitConfig::default()
        }
    }

    pub fn effective_mode(&self) -> FitMode {
        if self.mode == FitMode::Global || self.lambda_dir.is_infinite() {
            FitMode::Global
        } else {
            FitMode::Local
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_reg < 0.0 || self.lambda_dir < 0.0 {
            return Err(Error::InvalidArgument("lambda weights must be >= 0".into()));
        }
        if self.steps == 0 || self.p == 0 {
            return Err(Error::InvalidArgument("steps and p must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// What to fit against.
pub enum TaskSpec {
    Points {
        targets: Vec<Vec3>,
        pred_samples: usize,
    },
    Planes {
        annotations: Vec<PlaneAnnotations>,
        samples_per_plane: usize,
    },
    Volume {
        field: Rc<UdfField>,
        init_center: Vec3,
        init_scale: f64,
    },
}

pub const DEFAULT_POINT_SAMPLES: usize = 2500;
pub const DEFAULT_SLICE_SAMPLES: usize = 5000;

impl TaskSpec {
    pub fn points(targets: Vec<Vec3>) -> TaskSpec {
        TaskSpec::Points {
            targets,
            pred_samples: DEFAULT_POINT_SAMPLES,
        }
    }

    pub fn planes(planes: Vec<(Plane, Vec<Vec3>)>) -> Result<TaskSpec> {
        let annotations = planes
            .into_iter()
            .map(|(plane, points)| PlaneAnnotations::new(plane, points))
            .collect::<Result<Vec<_>>>()?;
        Ok(TaskSpec::Planes {
            annotations,
            samples_per_plane: DEFAULT_SLICE_SAMPLES,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepStats {
    pub step: usize,
    pub task_loss: f64,
    pub quality: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub task_loss: f64,
    pub quality: f64,
    pub self_intersection_pct: f64,
    pub steps: usize,
}

pub struct FitResult {
    /// Final surface, remeshed when the config asks for it.
    pub mesh: TriMesh,
    /// Final latent field (V rows; identical rows in global mode).
    pub latents: LatentField,
    pub trace: Vec<StepStats>,
    pub summary: FitSummary,
}

struct PreparedTask<'a> {
    spec: &'a TaskSpec,
    point_tree: Option<Rc<Vec<Vec3>>>,
    point_tree_index: Option<KdTree>,
}

impl<'a> PreparedTask<'a> {
    fn new(spec: &'a TaskSpec) -> Result<PreparedTask<'a>> {
        match spec {
            TaskSpec::Points { targets, .. } => {
                if targets.is_empty() {
                    return Err(Error::EmptyPointSet("point task needs targets"));
                }
                Ok(PreparedTask {
                    spec,
                    point_tree: Some(Rc::new(targets.clone())),
                    point_tree_index: Some(KdTree::build(targets)),
                })
            }
            TaskSpec::Planes { annotations, .. } => {
                if annotations.is_empty() {
                    return Err(Error::EmptyPointSet("plane task needs >= 1 plane"));
                }
                Ok(PreparedTask {
                    spec,
                    point_tree: None,
                    point_tree_index: None,
                })
            }
            TaskSpec::Volume { .. } => Ok(PreparedTask {
                spec,
                point_tree: None,
                point_tree_index: None,
            }),
        }
    }

    /// Affine map from decoder space to task space (volume tasks only).
    fn affine(&self) -> Option<(f64, Vec3)> {
        match self.spec {
            TaskSpec::Volume {
                init_scale,
                init_center,
                ..
            } => Some((*init_scale, *init_center)),
            _ => None,
        }
    }

    /// Untaped task loss of a decoder-space mesh (used for init candidates).
    fn eval(&self, mesh: &TriMesh, seed: u64) -> Result<f64> {
        let mut rng = derive_rng(seed, stream::FIT_INIT);
        match self.spec {
            TaskSpec::Points {
                targets,
                pred_samples,
            } => {
                let pred = sample_surface_points(mesh, *pred_samples, &mut rng)?;
                chamfer(&pred, targets)
            }
            TaskSpec::Planes {
                annotations,
                samples_per_plane,
            } => slice_chamfer(mesh, annotations, *samples_per_plane, &mut rng),
            TaskSpec::Volume {
                field,
                init_scale,
                init_center,
            } => {
                let world: Vec<Vec3> = mesh
                    .vertices
                    .iter()
                    .map(|&v| v * *init_scale + *init_center)
                    .collect();
                Ok(field.mean_potential(&world))
            }
        }
    }
}

/// Number of training latents probed (plus the mean latent) when picking the
/// starting vector.
pub const INIT_CANDIDATES: usize = 8;

/// Chooses the starting latent: the training latent (or mean latent) whose
/// deformed template scores the lowest task loss, broadcast to every row.
pub fn init_latents(
    checkpoint: &Checkpoint,
    task: &TaskSpec,
    template: &TriMesh,
    seed: u64,
) -> Result<LatentField> {
    if checkpoint.latents.rows() == 0 {
        return Err(Error::EmptyPointSet("checkpoint holds no training latents"));
    }
    let prepared = PreparedTask::new(task)?;
    let n = checkpoint.latents.rows();
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let k = INIT_CANDIDATES.min(n);
    for j in 0..k {
        let idx = j * n / k;
        candidates.push(checkpoint.latents.row(idx).to_vec());
    }
    let mean_field = LatentField::from_tensor(checkpoint.latents.clone());
    candidates.push(mean_field.mean_row());

    let mut best: Option<(f64, usize)> = None;
    for (ci, z) in candidates.iter().enumerate() {
        let field = LatentField::broadcast(z, template.vertex_count());
        let mesh = deform_mesh(&checkpoint.params, &field, template)?;
        let loss = prepared.eval(&mesh, seed)?;
        if best.map_or(true, |(b, _)| loss < b) {
            best = Some((loss, ci));
        }
    }
    let (_, winner) = best.expect("at least one candidate");
    Ok(LatentField::broadcast(&candidates[winner], template.vertex_count()))
}

/// Runs the fit. The decoder stays frozen; only the latent field moves.
pub fn fit(checkpoint: &Checkpoint, task: &TaskSpec, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let prepared = PreparedTask::new(task)?;
    let subdivision = config
        .template_subdivision
        .unwrap_or(checkpoint.template_subdivision + 1);
    let template = icosphere(subdivision)?;
    let faces = Rc::new(template.faces.clone());
    let v_count = template.vertex_count();
    let mode = config.effective_mode();

    let init = init_latents(checkpoint, task, &template, config.seed)?;
    // Global mode optimizes the single shared row directly: the exact
    // infinite-smoothing limit, bitwise-equal to projecting rows onto their
    // mean after every step because rows never diverge in the first place.
    let mut latent_state: Tensor = match mode {
        FitMode::Global => Tensor::from_vec(1, init.dim(), init.row(0).to_vec()),
        FitMode::Local => init.tensor().clone(),
    };

    let lap = match mode {
        FitMode::Local => Some(uniform_laplacian(&template, LaplacianFlavor::RowNormalized)?),
        FitMode::Global => None,
    };
    #[cfg(debug_assertions)]
    let lap_sym = match mode {
        FitMode::Local => Some(uniform_laplacian(&template, LaplacianFlavor::Combinatorial)?),
        FitMode::Global => None,
    };

    let adam_config = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(adam_config, &[&latent_state]);
    let template_tensor = vertices_tensor(&template);
    let mut trace = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let mut step_rng = derive_rng_indexed(config.seed, stream::FIT_STEP, step as u64);
        let mut tape = Tape::new();
        let vars = DecoderVars::register(&mut tape, &checkpoint.params, false);
        let z = tape.param(latent_state.clone());
        let latent_rows = match mode {
            FitMode::Global => tape.repeat_rows(z, v_count)?,
            FitMode::Local => z,
        };
        let template_verts = tape.constant(template_tensor.clone());
        let deformed = deform_on_tape(&mut tape, &vars, template_verts, latent_rows)?;

        let task_loss = match prepared.spec {
            TaskSpec::Points { pred_samples, .. } => {
                let mesh = TriMesh {
                    vertices: tensor_rows_to_points(tape.value(deformed)),
                    faces: faces.as_ref().clone(),
                };
                let samples = crate::geometry::sample_surface(&mesh, *pred_samples, &mut step_rng)?;
                let weights = surface_sample_weights(&samples, &faces);
                let pred = tape.blend_rows(deformed, weights);
                chamfer_on_tape(
                    &mut tape,
                    pred,
                    prepared.point_tree.clone().unwrap(),
                    prepared.point_tree_index.as_ref().unwrap(),
                    ChamferNorm::MeanPerDirection,
                )?
            }
            TaskSpec::Planes {
                annotations,
                samples_per_plane,
            } => slice_chamfer_on_tape(
                &mut tape,
                deformed,
                &faces,
                annotations,
                *samples_per_plane,
                &mut step_rng,
            )?,
            TaskSpec::Volume { field, .. } => {
                let (s, c) = prepared.affine().unwrap();
                let scaled = tape.scale(deformed, s);
                let center_rows = tape.constant(Tensor::from_vec(
                    v_count,
                    3,
                    (0..v_count).flat_map(|_| [c.x, c.y, c.z]).collect(),
                ));
                let world = tape.add(scaled, center_rows)?;
                crate::losses::udf_loss_on_tape(&mut tape, world, field.clone())?
            }
        };

        let (total, quality_value) = if config.lambda_reg > 0.0 {
            let quality = quality_loss_on_tape(&mut tape, deformed, faces.clone())?;
            let scaled = tape.scale(quality, config.lambda_reg);
            (tape.add(task_loss, scaled)?, tape.value(quality).item())
        } else {
            (task_loss, f64::NAN)
        };

        let total_value = tape.value(total).item();
        let task_value = tape.value(task_loss).item();
        if !total_value.is_finite() {
            return Err(Error::NonFinite(format!(
                "fitting loss at step {step} (task {task_value}, trace length {})",
                trace.len()
            )));
        }

        let grads = tape.backward(total)?;
        let z_grad = grads.get(z).expect("latent gradient");
        adam.step(&mut [&mut latent_state], &[z_grad])?;

        // Dirichlet update: p-fold Laplacian smoothing scaled by
        // lambda_dir * lr, applied after the optimizer step.
        if let (FitMode::Local, Some(lap)) = (mode, lap.as_ref()) {
            let strength = config.lambda_dir * config.lr;
            if strength > 0.0 {
                let field = LatentField::from_tensor(latent_state.clone());
                #[cfg(debug_assertions)]
                let energy_before = dirichlet_energy(&field, lap_sym.as_ref().unwrap(), config.p)?;
                let smoothed = laplacian_smooth_step(&field, lap, config.p, strength)?;
                #[cfg(debug_assertions)]
                {
                    let energy_after =
                        dirichlet_energy(&smoothed, lap_sym.as_ref().unwrap(), config.p)?;
                    debug_assert!(
                        energy_after <= energy_before * (1.0 + 1e-12) + 1e-18,
                        "smoothing must not increase Dirichlet energy: {energy_before} -> {energy_after}"
                    );
                }
                latent_state = smoothed.tensor().clone();
            }
        }

        trace.push(StepStats {
            step,
            task_loss: task_value,
            quality: quality_value,
            total: total_value,
        });
    }

    let final_field = match mode {
        FitMode::Global => LatentField::broadcast(latent_state.row(0), v_count),
        FitMode::Local => LatentField::from_tensor(latent_state),
    };
    let decoder_mesh = deform_mesh(&checkpoint.params, &final_field, &template)?;
    // Pre-remesh output has exactly one vertex per template vertex.
    debug_assert_eq!(decoder_mesh.vertex_count(), v_count);
    let world_mesh = match prepared.affine() {
        Some((s, c)) => TriMesh {
            vertices: decoder_mesh.vertices.iter().map(|&v| v * s + c).collect(),
            faces: decoder_mesh.faces.clone(),
        },
        None => decoder_mesh,
    };
    let final_mesh = if config.remesh && config.remesh_iterations > 0 {
        let target = world_mesh.mean_edge_length();
        isotropic_remesh(&world_mesh, target, config.remesh_iterations)?
    } else {
        world_mesh
    };

    let summary = FitSummary {
        task_loss: trace.last().map(|s| s.task_loss).unwrap_or(f64::NAN),
        quality: 1.0 - triangle_quality_loss(&final_mesh)?,
        self_intersection_pct: 100.0 * self_intersection_fraction(&final_mesh),
        steps: config.steps,
    };
    Ok(FitResult {
        mesh: final_mesh,
        latents: final_field,
        trace,
        summary,
    })
}

/// Point-cloud fitting with the per-task defaults (lambda_reg 0.001,
/// lambda_dir 0.2) unless a config is supplied.
pub fn fit_to_points(
    checkpoint: &Checkpoint,
    targets: Vec<Vec3>,
    config: Option<FitConfig>,
) -> Result<FitResult> {
    let config = config.unwrap_or_else(FitConfig::for_points);
    fit(checkpoint, &TaskSpec::points(targets), &config)
}

/// Planar-curve fitting with the per-task defaults (lambda_reg 0.01,
/// lambda_dir 100).
pub fn fit_to_planes(
    checkpoint: &Checkpoint,
    planes: Vec<(Plane, Vec<Vec3>)>,
    config: Option<FitConfig>,
) -> Result<FitResult> {
    let config = config.unwrap_or_else(FitConfig::for_planes);
    fit(checkpoint, &TaskSpec::planes(planes)?, &config)
}

/// Quantile and margin of the robust scale estimate used to place the
/// template inside a raw segmentation.
pub const SEG_INIT_QUANTILE: f64 = 0.95;
pub const SEG_INIT_MARGIN: f64 = 1.1;

/// Segmentation refinement: builds the unsigned distance field and its Sobel
/// gradients from the binary mask, initializes position and scale from the
/// mask (quantile radius, so spurious blobs cannot inflate it), fits in
/// global mode (lambda_reg 0, lambda_dir inf), and re-voxelizes the refined
/// surface on the mask's grid.
pub fn refine_segmentation(
    checkpoint: &Checkpoint,
    mask: &VoxelGrid,
    config: Option<FitConfig>,
) -> Result<(FitResult, VoxelGrid)> {
    let config = config.unwrap_or_else(FitConfig::for_segmentation);
    let potential = unsigned_distance_transform(mask)?;
    let gradient = sobel_gradient(&potential)?;
    let field = UdfField::new(potential, gradient)?;
    let (center, scale) = robust_center_scale_from_mask(mask, SEG_INIT_QUANTILE, SEG_INIT_MARGIN)?;
    let task = TaskSpec::Volume {
        field,
        init_center: center,
        init_scale: scale,
    };
    let result = fit(checkpoint, &task, &config)?;
    let refined_mask = voxelize(&result.mesh, mask.dims, mask.spacing, mask.origin)?;
    Ok((result, refined_mask))
}
