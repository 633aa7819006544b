//! Minimal end-to-end run at toy scale: synthesize a corpus, train a small
//! decoder, fit one held-out shape from sampled points, and print metrics.
//!
//!     cargo run --release -p latsurf --example quickstart

use latsurf::fitting::{fit, FitConfig, TaskSpec};
use latsurf::metrics::eval_pair;
use latsurf::training::{corpus_from_meshes, synth_corpus_meshes, train, TrainConfig};

fn main() -> latsurf::Result<()> {
    let seed = 7;
    let train_meshes = synth_corpus_meshes(6, 3, seed)?;
    let corpus = corpus_from_meshes(&train_meshes, 1500, seed)?;
    let config = TrainConfig {
        epochs: 60,
        points_per_step: 500,
        latent_dim: 16,
        template_subdivision: 2,
        plateau_patience: 20,
        seed,
        ..TrainConfig::default()
    };
    println!("training {} shapes for {} epochs...", corpus.len(), config.epochs);
    let (checkpoint, log) = train(&corpus, &config)?;
    println!(
        "  chamfer: first epoch {:.3e}, best {:.3e}",
        log.epochs.first().unwrap().chamfer,
        log.epochs.iter().map(|e| e.chamfer).fold(f64::INFINITY, f64::min)
    );

    let held_out = synth_corpus_meshes(1, 3, seed + 1)?;
    let held_corpus = corpus_from_meshes(&held_out, 2500, seed + 1)?;
    let task = TaskSpec::Points {
        targets: held_corpus.shapes[0].targets.clone(),
        pred_samples: 1000,
    };
    let fit_config = FitConfig {
        steps: 200,
        seed,
        template_subdivision: Some(2),
        ..FitConfig::for_points()
    };
    println!("fitting a held-out shape from 2500 points...");
    let result = fit(&checkpoint, &task, &fit_config)?;
    let row = eval_pair("held_out", &result.mesh, &held_out[0].1, 20_000, seed)?;
    println!(
        "  chamfer (x1e4) {:.2}, hausdorff {:.4}, F@1 {:.1}, F@2 {:.1}, quality {:.3}, self-intersections {:.2}%",
        row.chamfer * 1e4,
        row.hausdorff,
        row.f_at_1,
        row.f_at_2,
        row.quality,
        row.self_int_pct
    );
    Ok(())
}
