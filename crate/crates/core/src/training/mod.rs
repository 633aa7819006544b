//! Auto-decoder training: joint optimization of decoder weights and one
//! latent vector per training shape. Each step rotates the template, deforms
//! it with the shape's broadcast latent, samples the deformed surface, and
//! descends Chamfer + triangle-regularity + latent-norm losses with ADAM
//! under a plateau learning-rate schedule.

pub mod augment;
pub mod synth;

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::decoder::{
    deform_on_tape, vertices_tensor, Checkpoint, DecoderParams, DecoderVars, LatentField,
};
use crate::diffcore::{AdamConfig, AdamState, Tape, Tensor};
use crate::geometry::{icosphere, normalize_shape, sample_surface, Rotation, TriMesh, Vec3};
use crate::losses::{chamfer_on_tape, quality_loss_on_tape, surface_sample_weights, ChamferNorm, KdTree};
use crate::rng::{derive_rng, derive_rng_indexed, stream};
use crate::{Error, Result};

pub use augment::{augment_shape, displace_points, normalize_points};
pub use synth::{synth_mesh, synth_specs, Bump, SynthSpec};

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Triangle-regularity weight.
    pub lambda_reg: f64,
    /// Latent-norm weight.
    pub lambda_norm: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Epochs without improvement before the learning rate halves.
    pub plateau_patience: usize,
    pub lr_floor: f64,
    pub epochs: usize,
    /// Surface samples per shape per step, predictions and targets alike.
    pub points_per_step: usize,
    pub latent_dim: usize,
    pub template_subdivision: u32,
    pub seed: u64,
    /// Extra augmented copies per training shape.
    pub augmentations_per_shape: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_reg: 1e-4,
            lambda_norm: 1e-3,
            lr: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            plateau_patience: 100,
            lr_floor: 1e-5,
            epochs: 500,
            points_per_step: 2500,
            latent_dim: 128,
            template_subdivision: 3,
            seed: 0,
            augmentations_per_shape: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr_floor > 0.0 && self.beta1 > 0.0 && self.beta2 > 0.0) {
            return Err(Error::InvalidArgument("rates must be positive".into()));
        }
        if self.plateau_patience == 0 {
            return Err(Error::InvalidArgument("plateau patience must be >= 1".into()));
        }
        if self.latent_dim == 0 || self.points_per_step == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument(
                "latent dim, sample count and epochs must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// One training shape: an id and target points sampled from the normalized
/// ground-truth surface, plus the transform that undoes the normalization.
#[derive(Debug, Clone)]
pub struct CorpusShape {
    pub id: String,
    pub targets: Vec<Vec3>,
    pub centroid: Vec3,
    pub scale: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ShapeCorpus {
    pub shapes: Vec<CorpusShape>,
}

impl ShapeCorpus {
    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(Error::EmptyPointSet("corpus must contain >= 1 shape"));
        }
        for s in &self.shapes {
            if s.targets.is_empty() {
                return Err(Error::EmptyPointSet("corpus shape without target points"));
            }
            let max = s.targets.iter().map(|p| p.norm()).fold(0.0_f64, f64::max);
            if max > 1.0 + 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "shape {:?} has targets outside the unit sphere (max norm {max})",
                    s.id
                )));
            }
        }
        Ok(())
    }
}

/// Builds a corpus from meshes: normalize, then sample target points.
pub fn corpus_from_meshes(
    entries: &[(String, TriMesh)],
    targets_per_shape: usize,
    seed: u64,
) -> Result<ShapeCorpus> {
    let mut shapes = Vec::with_capacity(entries.len());
    for (i, (id, mesh)) in entries.iter().enumerate() {
        let (normalized, centroid, scale) = normalize_shape(mesh)?;
        let mut rng = derive_rng_indexed(seed, stream::TARGET_SAMPLES, i as u64);
        let targets = sample_surface(&normalized, targets_per_shape, &mut rng)?
            .iter()
            .map(|s| s.point)
            .collect();
        shapes.push(CorpusShape {
            id: id.clone(),
            targets,
            centroid,
            scale,
        });
    }
    let corpus = ShapeCorpus { shapes };
    corpus.validate()?;
    Ok(corpus)
}

/// Synthetic corpus: superellipsoid-with-bumps meshes sampled into target
/// point sets. Deterministic per seed.
pub fn synth_corpus(
    n_shapes: usize,
    targets_per_shape: usize,
    mesh_subdivision: u32,
    seed: u64,
) -> Result<ShapeCorpus> {
    let meshes = synth_corpus_meshes(n_shapes, mesh_subdivision, seed)?;
    corpus_from_meshes(&meshes, targets_per_shape, seed)
}

/// The ground-truth meshes behind [`synth_corpus`] (also used by gen-data and
/// by evaluation against held-out shapes).
pub fn synth_corpus_meshes(
    n_shapes: usize,
    mesh_subdivision: u32,
    seed: u64,
) -> Result<Vec<(String, TriMesh)>> {
    if n_shapes == 0 {
        return Err(Error::InvalidArgument("need >= 1 synthetic shape".into()));
    }
    let mut rng = derive_rng(seed, stream::SYNTH);
    let specs = synth_specs(n_shapes, &mut rng);
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| Ok((format!("synth_{i:03}"), synth_mesh(spec, mesh_subdivision)?)))
        .collect()
}

/// Per-epoch loss decomposition. The recorded total is exactly
/// chamfer + lambda_reg * quality + lambda_norm * latent_penalty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub chamfer: f64,
    pub quality: f64,
    pub latent_penalty: f64,
    pub total: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }
}

/// Halve-on-plateau learning-rate schedule with a floor.
#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    best: f64,
    since_improvement: usize,
    patience: usize,
    floor: f64,
}

impl PlateauSchedule {
    pub fn new(patience: usize, floor: f64) -> PlateauSchedule {
        PlateauSchedule {
            best: f64::INFINITY,
            since_improvement: 0,
            patience,
            floor,
        }
    }

    /// Feeds one epoch loss; halves `lr` (down to the floor) after `patience`
    /// epochs without improvement. Returns true when this epoch improved.
    pub fn observe(&mut self, loss: f64, lr: &mut f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.since_improvement = 0;
            return true;
        }
        self.since_improvement += 1;
        if self.since_improvement >= self.patience {
            *lr = (*lr / 2.0).max(self.floor);
            self.since_improvement = 0;
        }
        false
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

struct TrainState {
    params: DecoderParams,
    latents: Vec<Tensor>, // one 1 x d row per shape
}

/// Per-shape training step: returns (chamfer, quality, latent_penalty) and
/// applies ADAM updates to the decoder and the shape's latent.
#[allow(clippy::too_many_arguments)]
fn train_step(
    state: &mut TrainState,
    decoder_adam: &mut AdamState,
    latent_adam: &mut AdamState,
    shape_idx: usize,
    targets: &Rc<Vec<Vec3>>,
    target_tree: &KdTree,
    template: &TriMesh,
    faces: &Rc<Vec<[usize; 3]>>,
    config: &TrainConfig,
    step_rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(f64, f64, f64)> {
    let rotation = Rotation::random(step_rng);
    let rotated = template.rotated(&rotation);

    let mut tape = Tape::new();
    let vars = DecoderVars::register(&mut tape, &state.params, true);
    let z = tape.param(state.latents[shape_idx].clone());
    let template_verts = tape.constant(vertices_tensor(&rotated));
    let z_rows = tape.repeat_rows(z, rotated.vertex_count())?;
    let deformed = deform_on_tape(&mut tape, &vars, template_verts, z_rows)?;

    // Sample the deformed surface; gradients route through the barycentric
    // blend to the three vertices of each sampled face.
    let deformed_mesh = TriMesh {
        vertices: crate::decoder::tensor_rows_to_points(tape.value(deformed)),
        faces: faces.as_ref().clone(),
    };
    let samples = sample_surface(&deformed_mesh, config.points_per_step, step_rng)?;
    let weights = surface_sample_weights(&samples, faces);
    let pred_points = tape.blend_rows(deformed, weights);

    let cf = chamfer_on_tape(
        &mut tape,
        pred_points,
        targets.clone(),
        target_tree,
        ChamferNorm::MeanPerDirection,
    )?;
    let quality = quality_loss_on_tape(&mut tape, deformed, faces.clone())?;
    let z_norm = tape.squared_norm(z);
    let reg_term = tape.scale(quality, config.lambda_reg);
    let norm_term = tape.scale(z_norm, config.lambda_norm);
    let partial = tape.add(cf, reg_term)?;
    let total = tape.add(partial, norm_term)?;

    let total_value = tape.value(total).item();
    if !total_value.is_finite() {
        return Err(Error::NonFinite(format!(
            "training loss at shape index {shape_idx}"
        )));
    }

    let grads = tape.backward(total)?;
    let param_ids = vars.ids();
    let param_grads: Vec<&Tensor> = param_ids
        .iter()
        .map(|&id| grads.get(id).expect("decoder parameter gradient"))
        .collect();
    {
        let mut tensors = state.params.tensors_mut();
        let mut refs: Vec<&mut Tensor> = tensors.iter_mut().map(|(_, t)| &mut **t).collect();
        decoder_adam.step(&mut refs, &param_grads)?;
    }
    let z_grad = grads.get(z).expect("latent gradient");
    latent_adam.step(&mut [&mut state.latents[shape_idx]], &[z_grad])?;

    Ok((
        tape.value(cf).item(),
        tape.value(quality).item(),
        tape.value(z_norm).item(),
    ))
}

/// Trains the auto-decoder on a corpus. Returns the checkpoint holding the
/// best-loss state and the per-epoch log.
pub fn train(corpus: &ShapeCorpus, config: &TrainConfig) -> Result<(Checkpoint, TrainLog)> {
    config.validate()?;
    corpus.validate()?;

    // Expand the corpus with augmented copies, each its own training shape.
    let mut shapes: Vec<(String, Rc<Vec<Vec3>>)> = Vec::new();
    for (i, s) in corpus.shapes.iter().enumerate() {
        shapes.push((s.id.clone(), Rc::new(s.targets.clone())));
        for a in 0..config.augmentations_per_shape {
            let mut rng = derive_rng_indexed(
                config.seed,
                stream::AUGMENT,
                (i as u64) << 16 | a as u64,
            );
            let augmented = augment_shape(&s.targets, &mut rng);
            shapes.push((format!("{}_aug{a:02}", s.id), Rc::new(augmented)));
        }
    }
    let n = shapes.len();
    let trees: Vec<KdTree> = shapes.iter().map(|(_, t)| KdTree::build(t)).collect();

    let template = icosphere(config.template_subdivision)?;
    let faces = Rc::new(template.faces.clone());

    let mut init_rng = derive_rng(config.seed, stream::TRAIN_INIT);
    let mut state = TrainState {
        params: DecoderParams::init(config.latent_dim, &mut init_rng),
        latents: (0..n)
            .map(|_| {
                let data: Vec<f64> = (0..config.latent_dim)
                    .map(|_| rand::Rng::gen_range(&mut init_rng, -0.01..0.01))
                    .collect();
                Tensor::from_vec(1, config.latent_dim, data)
            })
            .collect(),
    };

    let adam_config = AdamConfig {
        lr: config.lr,
        beta1: config.beta1,
        beta2: config.beta2,
        eps: 1e-8,
    };
    let param_refs: Vec<&Tensor> = state.params.tensors().iter().map(|(_, t)| *t).collect();
    let mut decoder_adam = AdamState::new(adam_config, &param_refs);
    let mut latent_adams: Vec<AdamState> = state
        .latents
        .iter()
        .map(|z| AdamState::new(adam_config, &[z]))
        .collect();

    let mut schedule = PlateauSchedule::new(config.plateau_patience, config.lr_floor);
    let mut lr = config.lr;
    let mut log = TrainLog::default();
    let mut best_snapshot: Option<(DecoderParams, Vec<Tensor>, f64)> = None;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        {
            use rand::seq::SliceRandom;
            let mut epoch_rng = derive_rng_indexed(config.seed, stream::TRAIN_EPOCH, epoch as u64);
            order.shuffle(&mut epoch_rng);
        }
        let mut sums = (0.0, 0.0, 0.0);
        for &i in &order {
            let mut step_rng = derive_rng_indexed(
                config.seed,
                stream::TRAIN_EPOCH,
                ((epoch as u64) << 24) | (i as u64 + 1),
            );
            decoder_adam.config.lr = lr;
            latent_adams[i].config.lr = lr;
            let (cf, q, zn) = train_step(
                &mut state,
                &mut decoder_adam,
                &mut latent_adams[i],
                i,
                &shapes[i].1,
                &trees[i],
                &template,
                &faces,
                config,
                &mut step_rng,
            )
            .map_err(|e| match e {
                Error::NonFinite(_) => Error::NonFinite(format!(
                    "training loss at epoch {epoch}, shape {:?}",
                    shapes[i].0
                )),
                other => other,
            })?;
            sums.0 += cf;
            sums.1 += q;
            sums.2 += zn;
        }
        let inv = 1.0 / n as f64;
        let chamfer = sums.0 * inv;
        let quality = sums.1 * inv;
        let latent_penalty = sums.2 * inv;
        let total = chamfer + config.lambda_reg * quality + config.lambda_norm * latent_penalty;
        let improved = schedule.observe(total, &mut lr);
        if improved {
            best_snapshot = Some((state.params.clone(), state.latents.clone(), total));
        }
        log.epochs.push(EpochStats {
            epoch,
            chamfer,
            quality,
            latent_penalty,
            total,
            lr,
        });
    }

    let (params, latents, best_loss) = best_snapshot.expect("at least one epoch ran");
    let mut latent_table = Tensor::zeros(n, config.latent_dim);
    for (i, z) in latents.iter().enumerate() {
        latent_table.data_mut()[i * config.latent_dim..(i + 1) * config.latent_dim]
            .copy_from_slice(z.data());
    }
    let checkpoint = Checkpoint {
        latent_dim: config.latent_dim,
        template_subdivision: config.template_subdivision,
        params,
        shape_ids: shapes.iter().map(|(id, _)| id.clone()).collect(),
        latents: latent_table,
        best_loss,
    };
    Ok((checkpoint, log))
}

/// Deterministic corpus loss for a fixed parameter/latent state: identity
/// template orientation, surface samples drawn from a seed-derived stream.
/// Used for checkpoint round-trip verification.
pub fn evaluate_corpus_loss(
    checkpoint: &Checkpoint,
    corpus: &ShapeCorpus,
    config: &TrainConfig,
    eval_seed: u64,
) -> Result<f64> {
    let template = icosphere(checkpoint.template_subdivision)?;
    let mut total = 0.0;
    let n = corpus.shapes.len().min(checkpoint.latents.rows());
    for (i, shape) in corpus.shapes.iter().take(n).enumerate() {
        let z = checkpoint.latents.row(i);
        let field = LatentField::broadcast(z, template.vertex_count());
        let deformed = crate::decoder::deform_mesh(&checkpoint.params, &field, &template)?;
        let mut rng = derive_rng_indexed(eval_seed, stream::EVAL, i as u64);
        let samples = sample_surface(&deformed, config.points_per_step, &mut rng)?;
        let pred: Vec<Vec3> = samples.iter().map(|s| s.point).collect();
        let cf = crate::losses::chamfer(&pred, &shape.targets)?;
        let q = crate::geometry::triangle_quality_loss(&deformed)?;
        let zn = crate::losses::latent_norm_penalty(z);
        total += cf + config.lambda_reg * q + config.lambda_norm * zn;
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            epochs: 30,
            points_per_step: 200,
            latent_dim: 8,
            template_subdivision: 1,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    fn ellipsoid_corpus(n: usize, seed: u64) -> ShapeCorpus {
        let mut entries = Vec::new();
        for i in 0..n {
            let mut mesh = icosphere(3).unwrap();
            let (a, b, c) = (
                0.6 + 0.1 * i as f64,
                1.0 - 0.1 * i as f64,
                0.8,
            );
            for v in &mut mesh.vertices {
                v.x *= a;
                v.y *= b;
                v.z *= c;
            }
            entries.push((format!("ellipsoid_{i}"), mesh));
        }
        corpus_from_meshes(&entries, 200, seed).unwrap()
    }

    #[test]
    fn plateau_schedule_halves_on_frozen_loss() {
        let mut schedule = PlateauSchedule::new(3, 1e-5);
        let mut lr = 0.002;
        schedule.observe(1.0, &mut lr); // initial improvement
        let mut halvings = Vec::new();
        for _ in 0..40 {
            schedule.observe(1.0, &mut lr);
            halvings.push(lr);
        }
        // Halves exactly every `patience` epochs: epochs 3, 6, 9, ...
        assert_eq!(halvings[1], 0.002);
        assert_eq!(halvings[2], 0.001);
        assert_eq!(halvings[5], 0.0005);
        assert_eq!(halvings[8], 0.00025);
        // And bottoms out at the floor.
        assert_eq!(*halvings.last().unwrap(), 1e-5);
    }

    #[test]
    fn training_reduces_chamfer_on_tiny_corpus() {
        let corpus = ellipsoid_corpus(3, 21);
        let config = tiny_config();
        let (ckpt, log) = train(&corpus, &config).unwrap();
        let first = log.epochs.first().unwrap().chamfer;
        let last_best = log
            .epochs
            .iter()
            .map(|e| e.chamfer)
            .fold(f64::INFINITY, f64::min);
        assert!(
            last_best < first,
            "chamfer should improve: first {first}, best {last_best}"
        );
        assert_eq!(ckpt.shape_count(), 3);
        assert!(ckpt.best_loss.is_finite());
    }

    #[test]
    fn loss_decomposition_sums_to_total() {
        let corpus = ellipsoid_corpus(2, 22);
        let mut config = tiny_config();
        config.epochs = 3;
        let (_, log) = train(&corpus, &config).unwrap();
        for e in &log.epochs {
            let recomposed =
                e.chamfer + config.lambda_reg * e.quality + config.lambda_norm * e.latent_penalty;
            assert!((recomposed - e.total).abs() < 1e-10);
        }
    }

    #[test]
    fn one_latent_per_shape_and_training_is_deterministic() {
        let corpus = ellipsoid_corpus(2, 23);
        let mut config = tiny_config();
        config.epochs = 4;
        let (a, log_a) = train(&corpus, &config).unwrap();
        let (b, log_b) = train(&corpus, &config).unwrap();
        assert_eq!(a.latents.rows(), 2);
        assert_eq!(a, b);
        for (ea, eb) in log_a.epochs.iter().zip(&log_b.epochs) {
            assert_eq!(ea.total.to_bits(), eb.total.to_bits());
        }
    }

    #[test]
    fn latent_norm_weight_bounds_latent_growth() {
        let corpus = ellipsoid_corpus(2, 24);
        let mut with = tiny_config();
        with.epochs = 25;
        with.lambda_norm = 0.1;
        let mut without = with.clone();
        without.lambda_norm = 0.0;
        let (ck_with, _) = train(&corpus, &with).unwrap();
        let (ck_without, _) = train(&corpus, &without).unwrap();
        let max_norm = |ck: &Checkpoint| {
            (0..ck.latents.rows())
                .map(|i| ck.latents.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0_f64, f64::max)
        };
        assert!(
            max_norm(&ck_with) < max_norm(&ck_without),
            "penalized run should keep latents smaller"
        );
    }

    #[test]
    fn augmentations_add_training_shapes() {
        let corpus = ellipsoid_corpus(2, 25);
        let mut config = tiny_config();
        config.epochs = 2;
        config.augmentations_per_shape = 2;
        let (ckpt, _) = train(&corpus, &config).unwrap();
        assert_eq!(ckpt.shape_count(), 6);
        assert!(ckpt.shape_ids.iter().any(|id| id.ends_with("_aug01")));
    }

    #[test]
    fn checkpoint_round_trip_reproduces_evaluation_bitwise() {
        let corpus = ellipsoid_corpus(2, 26);
        let mut config = tiny_config();
        config.epochs = 3;
        let (ckpt, _) = train(&corpus, &config).unwrap();
        let before = evaluate_corpus_loss(&ckpt, &corpus, &config, 99).unwrap();
        let dir = std::env::temp_dir().join("latsurf_train_ckpt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.ckpt");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        let after = evaluate_corpus_loss(&loaded, &corpus, &config, 99).unwrap();
        assert_eq!(before.to_bits(), after.to_bits());
        assert_eq!(ckpt.best_loss.to_bits(), loaded.best_loss.to_bits());
    }

    #[test]
    fn synthetic_corpus_is_seed_deterministic() {
        let a = synth_corpus(3, 100, 2, 7).unwrap();
        let b = synth_corpus(3, 100, 2, 7).unwrap();
        for (x, y) in a.shapes.iter().zip(&b.shapes) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.targets, y.targets);
        }
        a.validate().unwrap();
    }
}
