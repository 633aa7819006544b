//! Evaluation suite: Chamfer, Hausdorff, F-scores at bounding-sphere-diameter
//! thresholds, facet quality, self-intersecting-face percentage, optional
//! Dice, aggregated into mean +/- population-std reports with JSON and CSV
//! emitters. The Chamfer column is scaled by 1e4 at emission only.

pub mod bounding_sphere;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    sample_surface_points, self_intersection_fraction, triangle_quality_loss, TriMesh, Vec3,
};
use crate::losses::{nearest_all, KdTree};
use crate::rng::{derive_rng_indexed, stream};
use crate::{Error, Result};

pub use bounding_sphere::{bounding_sphere_diameter, min_sphere};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const DEFAULT_EVAL_SAMPLES: usize = 100_000;

/// One evaluated shape. Chamfer and Hausdorff are stored raw (model units);
/// F-scores are percentages in [0, 100]; quality is 1 - triangle quality
/// loss; self_int_pct is the percentage of self-intersecting faces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub chamfer: f64,
    pub hausdorff: f64,
    pub f_at_1: f64,
    pub f_at_2: f64,
    pub quality: f64,
    pub self_int_pct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dice: Option<f64>,
}

/// Samples both surfaces and computes the metric row.
///
/// Each direction measures uniformly drawn surface samples against the exact
/// opposite surface (closest triangle point through a BVH), so identical
/// meshes score exactly zero and the F-score thresholds act on true
/// deviations rather than sampling gaps.
pub fn eval_pair(
    id: &str,
    pred: &TriMesh,
    gt: &TriMesh,
    n_samples: usize,
    seed: u64,
) -> Result<EvalRow> {
    if pred.face_count() == 0 || gt.face_count() == 0 {
        return Err(Error::EmptyPointSet("eval_pair needs non-empty meshes"));
    }
    let mut rng_pred = derive_rng_indexed(seed, stream::EVAL, 0);
    let mut rng_gt = derive_rng_indexed(seed, stream::EVAL, 1);
    let pred_pts = sample_surface_points(pred, n_samples, &mut rng_pred)?;
    let gt_pts = sample_surface_points(gt, n_samples, &mut rng_gt)?;
    let pred_to_gt = surface_distances_sq(&pred_pts, gt);
    let gt_to_pred = surface_distances_sq(&gt_pts, pred);
    let (chamfer, hausdorff, f1, f2) = metrics_from_distances(
        &pred_to_gt,
        &gt_to_pred,
        bounding_sphere_diameter(&gt.vertices),
    );
    Ok(EvalRow {
        id: id.to_string(),
        chamfer,
        hausdorff,
        f_at_1: f1,
        f_at_2: f2,
        quality: 1.0 - triangle_quality_loss(pred)?,
        self_int_pct: 100.0 * self_intersection_fraction(pred),
        dice: None,
    })
}

/// Squared distance from each point to the closest point on the mesh.
pub fn surface_distances_sq(points: &[Vec3], mesh: &TriMesh) -> Vec<f64> {
    let bvh = crate::geometry::FaceBvh::build(mesh);
    let query = |&p: &Vec3| {
        let (q, _) = bvh.closest_point(mesh, p);
        p.dist_sq(q)
    };
    #[cfg(feature = "parallel")]
    {
        points.par_iter().map(query).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().map(query).collect()
    }
}

fn metrics_from_distances(
    pred_to_gt: &[f64],
    gt_to_pred: &[f64],
    gt_diameter: f64,
) -> (f64, f64, f64, f64) {
    let chamfer = pred_to_gt.iter().sum::<f64>() / pred_to_gt.len() as f64
        + gt_to_pred.iter().sum::<f64>() / gt_to_pred.len() as f64;
    let max_sq = |d: &[f64]| d.iter().cloned().fold(0.0_f64, f64::max);
    let hausdorff = max_sq(pred_to_gt).max(max_sq(gt_to_pred)).sqrt();
    let f_at = |tau: f64| {
        let tau_sq = tau * tau;
        let precision =
            pred_to_gt.iter().filter(|&&d| d <= tau_sq).count() as f64 / pred_to_gt.len() as f64;
        let recall =
            gt_to_pred.iter().filter(|&&d| d <= tau_sq).count() as f64 / gt_to_pred.len() as f64;
        if precision + recall == 0.0 {
            0.0
        } else {
            100.0 * 2.0 * precision * recall / (precision + recall)
        }
    };
    (
        chamfer,
        hausdorff,
        f_at(0.01 * gt_diameter),
        f_at(0.02 * gt_diameter),
    )
}

/// Chamfer (mean squared, both directions), Hausdorff (max-min, true
/// distance), and F-scores at 1% and 2% of the ground-truth bounding-sphere
/// diameter, over constant point sets.
pub fn point_metrics(pred: &[Vec3], gt: &[Vec3], gt_diameter: f64) -> (f64, f64, f64, f64) {
    let gt_tree = KdTree::build(gt);
    let pred_tree = KdTree::build(pred);
    let pred_nn = nearest_all(&gt_tree, pred);
    let gt_nn = nearest_all(&pred_tree, gt);
    let chamfer = pred_nn.iter().map(|&(_, d)| d).sum::<f64>() / pred.len() as f64
        + gt_nn.iter().map(|&(_, d)| d).sum::<f64>() / gt.len() as f64;
    let max_sq = |pairs: &[(usize, f64)]| pairs.iter().map(|&(_, d)| d).fold(0.0_f64, f64::max);
    let hausdorff = max_sq(&pred_nn).max(max_sq(&gt_nn)).sqrt();
    let f_at = |tau: f64| {
        let tau_sq = tau * tau;
        let precision =
            pred_nn.iter().filter(|&&(_, d)| d <= tau_sq).count() as f64 / pred.len() as f64;
        let recall = gt_nn.iter().filter(|&&(_, d)| d <= tau_sq).count() as f64 / gt.len() as f64;
        if precision + recall == 0.0 {
            0.0
        } else {
            100.0 * 2.0 * precision * recall / (precision + recall)
        }
    };
    (
        chamfer,
        hausdorff,
        f_at(0.01 * gt_diameter),
        f_at(0.02 * gt_diameter),
    )
}

/// Brute-force twin of [`point_metrics`] for oracle comparisons.
pub fn point_metrics_bruteforce(pred: &[Vec3], gt: &[Vec3], gt_diameter: f64) -> (f64, f64, f64, f64) {
    let min_d = |p: Vec3, set: &[Vec3]| set.iter().map(|&q| p.dist_sq(q)).fold(f64::INFINITY, f64::min);
    let pred_nn: Vec<f64> = pred.iter().map(|&p| min_d(p, gt)).collect();
    let gt_nn: Vec<f64> = gt.iter().map(|&q| min_d(q, pred)).collect();
    let chamfer = pred_nn.iter().sum::<f64>() / pred.len() as f64
        + gt_nn.iter().sum::<f64>() / gt.len() as f64;
    let hausdorff = pred_nn
        .iter()
        .chain(&gt_nn)
        .cloned()
        .fold(0.0_f64, f64::max)
        .sqrt();
    let f_at = |tau: f64| {
        let tau_sq = tau * tau;
        let precision = pred_nn.iter().filter(|&&d| d <= tau_sq).count() as f64 / pred.len() as f64;
        let recall = gt_nn.iter().filter(|&&d| d <= tau_sq).count() as f64 / gt.len() as f64;
        if precision + recall == 0.0 {
            0.0
        } else {
            100.0 * 2.0 * precision * recall / (precision + recall)
        }
    };
    (
        chamfer,
        hausdorff,
        f_at(0.01 * gt_diameter),
        f_at(0.02 * gt_diameter),
    )
}

/// Cohort report: per-row values plus mean and population std per column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// Population standard deviation (N divisor), not the sample estimate.
    pub std_convention: String,
    /// The emitted chamfer column is the raw value multiplied by this.
    pub chamfer_scale: f64,
    pub rows: Vec<EvalRow>,
    pub mean: ReportLine,
    pub std: ReportLine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportLine {
    pub chamfer: f64,
    pub hausdorff: f64,
    pub f_at_1: f64,
    pub f_at_2: f64,
    pub quality: f64,
    pub self_int_pct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dice: Option<f64>,
}

pub const CHAMFER_REPORT_SCALE: f64 = 1e4;

/// Aggregates rows; the chamfer column is scaled by 1e4 here, at emission,
/// while every other column is reported raw.
pub fn report(rows: Vec<EvalRow>) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::EmptyPointSet("report needs >= 1 row"));
    }
    let n = rows.len() as f64;
    let columns = |f: &dyn Fn(&EvalRow) -> f64| -> (f64, f64) {
        let mean = rows.iter().map(|r| f(r)).sum::<f64>() / n;
        let var = rows.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let (cf_mean, cf_std) = columns(&|r| r.chamfer * CHAMFER_REPORT_SCALE);
    let (h_mean, h_std) = columns(&|r| r.hausdorff);
    let (f1_mean, f1_std) = columns(&|r| r.f_at_1);
    let (f2_mean, f2_std) = columns(&|r| r.f_at_2);
    let (q_mean, q_std) = columns(&|r| r.quality);
    let (s_mean, s_std) = columns(&|r| r.self_int_pct);
    let dice_values: Vec<f64> = rows.iter().filter_map(|r| r.dice).collect();
    let (dice_mean, dice_std) = if dice_values.len() == rows.len() {
        let m = dice_values.iter().sum::<f64>() / n;
        let v = dice_values.iter().map(|d| (d - m).powi(2)).sum::<f64>() / n;
        (Some(m), Some(v.sqrt()))
    } else {
        (None, None)
    };
    let scaled_rows: Vec<EvalRow> = rows
        .iter()
        .map(|r| EvalRow {
            chamfer: r.chamfer * CHAMFER_REPORT_SCALE,
            ..r.clone()
        })
        .collect();
    Ok(EvalReport {
        std_convention: "population".into(),
        chamfer_scale: CHAMFER_REPORT_SCALE,
        rows: scaled_rows,
        mean: ReportLine {
            chamfer: cf_mean,
            hausdorff: h_mean,
            f_at_1: f1_mean,
            f_at_2: f2_mean,
            quality: q_mean,
            self_int_pct: s_mean,
            dice: dice_mean,
        },
        std: ReportLine {
            chamfer: cf_std,
            hausdorff: h_std,
            f_at_1: f1_std,
            f_at_2: f2_std,
            quality: q_std,
            self_int_pct: s_std,
            dice: dice_std,
        },
    })
}

impl EvalReport {
    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,chamfer_x1e4,hausdorff,f_at_1,f_at_2,quality,self_int_pct,dice\n");
        let fmt = |row: &EvalRow| {
            format!(
                "{},{},{},{},{},{},{},{}\n",
                row.id,
                row.chamfer,
                row.hausdorff,
                row.f_at_1,
                row.f_at_2,
                row.quality,
                row.self_int_pct,
                row.dice.map_or(String::new(), |d| d.to_string()),
            )
        };
        for row in &self.rows {
            out.push_str(&fmt(row));
        }
        let line = |name: &str, l: &ReportLine| {
            format!(
                "{name},{},{},{},{},{},{},{}\n",
                l.chamfer,
                l.hausdorff,
                l.f_at_1,
                l.f_at_2,
                l.quality,
                l.self_int_pct,
                l.dice.map_or(String::new(), |d| d.to_string()),
            )
        };
        out.push_str(&line("mean", &self.mean));
        out.push_str(&line("std", &self.std));
        out
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Evaluates a cohort of (pred, gt) pairs, rows computed in parallel.
pub fn eval_cohort(
    pairs: &[(String, TriMesh, TriMesh)],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<EvalRow>> {
    let run = |(i, (id, pred, gt)): (usize, &(String, TriMesh, TriMesh))| {
        eval_pair(id, pred, gt, n_samples, crate::rng::derive_seed_indexed(seed, stream::EVAL, i as u64))
    };
    #[cfg(feature = "parallel")]
    {
        pairs.par_iter().enumerate().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        pairs.iter().enumerate().map(run).collect()
    }
}
