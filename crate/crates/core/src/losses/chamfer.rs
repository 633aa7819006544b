//! Chamfer distance between point sets, as a plain value and as a taped
//! operation whose gradient flows to the predicted points only.

use std::rc::Rc;

use super::nn::{nearest_all, KdTree};
use crate::diffcore::{CustomGrad, Tape, Tensor, VarId};
use crate::geometry::Vec3;
use crate::{Error, Result};

/// Sum over both directions of per-point minimum squared distances, each
/// direction scaled by its own weight. The symmetric mean convention uses
/// weights (1/|pred|, 1/|target|); the slice-annotation convention divides
/// both directions by the predicted sample count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChamferNorm {
    /// mean_pred(min d^2) + mean_target(min d^2)
    MeanPerDirection,
    /// (1/M) sum_target(min d^2) + (1/M) sum_pred(min d^2), M = |pred|
    PredCountBoth,
}

fn weights(norm: ChamferNorm, n_pred: usize, n_target: usize) -> (f64, f64) {
    match norm {
        ChamferNorm::MeanPerDirection => (1.0 / n_pred as f64, 1.0 / n_target as f64),
        ChamferNorm::PredCountBoth => (1.0 / n_pred as f64, 1.0 / n_pred as f64),
    }
}

/// Chamfer distance between constant point sets (symmetric mean convention).
pub fn chamfer(pred: &[Vec3], target: &[Vec3]) -> Result<f64> {
    chamfer_with_norm(pred, target, ChamferNorm::MeanPerDirection)
}

pub fn chamfer_with_norm(pred: &[Vec3], target: &[Vec3], norm: ChamferNorm) -> Result<f64> {
    if pred.is_empty() || target.is_empty() {
        return Err(Error::EmptyPointSet("chamfer needs non-empty point sets"));
    }
    let target_tree = KdTree::build(target);
    let pred_tree = KdTree::build(pred);
    let pred_nn = nearest_all(&target_tree, pred);
    let target_nn = nearest_all(&pred_tree, target);
    let (w_pred, w_target) = weights(norm, pred.len(), target.len());
    let forward: f64 = pred_nn.iter().map(|&(_, d)| d).sum::<f64>() * w_pred;
    let backward: f64 = target_nn.iter().map(|&(_, d)| d).sum::<f64>() * w_target;
    Ok(forward + backward)
}

/// O(nm) reference implementation.
pub fn chamfer_bruteforce(pred: &[Vec3], target: &[Vec3], norm: ChamferNorm) -> Result<f64> {
    if pred.is_empty() || target.is_empty() {
        return Err(Error::EmptyPointSet("chamfer needs non-empty point sets"));
    }
    let min_to = |p: Vec3, set: &[Vec3]| {
        set.iter().map(|&q| p.dist_sq(q)).fold(f64::INFINITY, f64::min)
    };
    let (w_pred, w_target) = weights(norm, pred.len(), target.len());
    let a: f64 = pred.iter().map(|&p| min_to(p, target)).sum::<f64>() * w_pred;
    let b: f64 = target.iter().map(|&q| min_to(q, pred)).sum::<f64>() * w_target;
    Ok(a + b)
}

/// Taped Chamfer against a fixed target set. The predicted points are rows of
/// a V-gradient-carrying (M x 3) tensor; nearest-neighbor assignments are
/// frozen at forward time, which yields the standard subgradient.
struct ChamferOp {
    target: Rc<Vec<Vec3>>,
    pred_nn: Vec<usize>,
    target_nn: Vec<usize>,
    w_pred: f64,
    w_target: f64,
}

impl CustomGrad for ChamferOp {
    fn backward(&self, inputs: &[&Tensor], output_grad: &Tensor) -> Vec<Tensor> {
        let pred = inputs[0];
        let g = output_grad.item();
        let mut grad = Tensor::zeros(pred.rows(), pred.cols());
        // d/dp of sum_pred min ||p - q*||^2 = 2 (p - q*).
        for (i, &qi) in self.pred_nn.iter().enumerate() {
            let p = pred.row(i);
            let q = self.target[qi];
            let coeff = 2.0 * self.w_pred * g;
            let row = &mut grad.data_mut()[i * 3..(i + 1) * 3];
            row[0] += coeff * (p[0] - q.x);
            row[1] += coeff * (p[1] - q.y);
            row[2] += coeff * (p[2] - q.z);
        }
        // d/dp of sum_target min ||q - p*||^2 routes to each target's nearest
        // predicted point.
        for (qi, &pi) in self.target_nn.iter().enumerate() {
            let p = pred.row(pi);
            let q = self.target[qi];
            let coeff = 2.0 * self.w_target * g;
            let row = &mut grad.data_mut()[pi * 3..(pi + 1) * 3];
            row[0] += coeff * (p[0] - q.x);
            row[1] += coeff * (p[1] - q.y);
            row[2] += coeff * (p[2] - q.z);
        }
        vec![grad]
    }
}

/// Records chamfer(pred_rows, target) on the tape and returns the scalar.
pub fn chamfer_on_tape(
    tape: &mut Tape,
    pred_rows: VarId,
    target: Rc<Vec<Vec3>>,
    target_tree: &KdTree,
    norm: ChamferNorm,
) -> Result<VarId> {
    let n_pred = tape.value(pred_rows).rows().max(1);
    let (w_pred, w_target) = weights(norm, n_pred, target.len().max(1));
    chamfer_on_tape_weighted(tape, pred_rows, target, target_tree, w_pred, w_target)
}

/// General form with explicit per-direction weights. A zero weight drops that
/// direction entirely (used for the one-directional empty-slice fallback).
pub fn chamfer_on_tape_weighted(
    tape: &mut Tape,
    pred_rows: VarId,
    target: Rc<Vec<Vec3>>,
    target_tree: &KdTree,
    w_pred: f64,
    w_target: f64,
) -> Result<VarId> {
    let pred_tensor = tape.value(pred_rows);
    if pred_tensor.cols() != 3 {
        return Err(Error::shape_mismatch(
            "chamfer_on_tape",
            "M x 3 predictions",
            pred_tensor.shape_string(),
        ));
    }
    if pred_tensor.rows() == 0 || target.is_empty() {
        return Err(Error::EmptyPointSet("chamfer needs non-empty point sets"));
    }
    let pred_points: Vec<Vec3> = (0..pred_tensor.rows())
        .map(|r| {
            let row = pred_tensor.row(r);
            Vec3::new(row[0], row[1], row[2])
        })
        .collect();
    let mut value = 0.0;
    let pred_nn_pairs = if w_pred != 0.0 {
        let pairs = nearest_all(target_tree, &pred_points);
        value += pairs.iter().map(|&(_, d)| d).sum::<f64>() * w_pred;
        pairs
    } else {
        Vec::new()
    };
    let target_nn_pairs = if w_target != 0.0 {
        let pred_tree = KdTree::build(&pred_points);
        let pairs = nearest_all(&pred_tree, &target);
        value += pairs.iter().map(|&(_, d)| d).sum::<f64>() * w_target;
        pairs
    } else {
        Vec::new()
    };
    let op = ChamferOp {
        target,
        pred_nn: pred_nn_pairs.into_iter().map(|(i, _)| i).collect(),
        target_nn: target_nn_pairs.into_iter().map(|(i, _)| i).collect(),
        w_pred,
        w_target,
    };
    Ok(tape.custom(vec![pred_rows], Tensor::scalar(value), Rc::new(op)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn identical_sets_have_zero_chamfer() {
        let pts = random_points(50, 1);
        assert_eq!(chamfer(&pts, &pts).unwrap(), 0.0);
    }

    #[test]
    fn two_singletons_hand_value() {
        let pred = vec![Vec3::new(0.0, 0.0, 0.0)];
        let target = vec![Vec3::new(1.0, 0.0, 0.0)];
        assert_eq!(chamfer(&pred, &target).unwrap(), 2.0);
    }

    #[test]
    fn accelerated_matches_bruteforce_exactly() {
        for trial in 0..5 {
            let pred = random_points(37 + trial, 10 + trial as u64);
            let target = random_points(64 - trial, 20 + trial as u64);
            for norm in [ChamferNorm::MeanPerDirection, ChamferNorm::PredCountBoth] {
                let fast = chamfer_with_norm(&pred, &target, norm).unwrap();
                let brute = chamfer_bruteforce(&pred, &target, norm).unwrap();
                assert_eq!(fast, brute);
            }
        }
    }

    #[test]
    fn chamfer_is_symmetric_in_mean_convention() {
        let a = random_points(40, 30);
        let b = random_points(55, 31);
        let ab = chamfer(&a, &b).unwrap();
        let ba = chamfer(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-15);
    }

    #[test]
    fn empty_sets_error() {
        assert!(chamfer(&[], &[Vec3::default()]).is_err());
        assert!(chamfer(&[Vec3::default()], &[]).is_err());
    }

    #[test]
    fn rigid_motion_of_both_sets_preserves_chamfer() {
        use crate::geometry::Rotation;
        let a = random_points(45, 60);
        let b = random_points(60, 61);
        let base = chamfer(&a, &b).unwrap();
        let mut rng = rng_from_seed(62);
        let r = Rotation::random(&mut rng);
        let t = Vec3::new(2.0, -0.7, 5.5);
        let move_all = |pts: &[Vec3]| -> Vec<Vec3> {
            pts.iter().map(|&p| r.apply(p) + t).collect()
        };
        let moved = chamfer(&move_all(&a), &move_all(&b)).unwrap();
        assert!((moved - base).abs() < 1e-10, "{moved} vs {base}");
    }

    #[test]
    fn tape_gradient_matches_finite_differences() {
        let target = Rc::new(random_points(25, 40));
        let target_tree = KdTree::build(&target);
        let pred0 = random_points(18, 41);
        let flat: Vec<f64> = pred0.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        let base = Tensor::from_vec(18, 3, flat);

        let eval = |t: &Tensor| {
            let mut tape = Tape::new();
            let pred = tape.param(t.clone());
            let loss =
                chamfer_on_tape(&mut tape, pred, target.clone(), &target_tree, ChamferNorm::MeanPerDirection)
                    .unwrap();
            tape.value(loss).item()
        };

        let mut tape = Tape::new();
        let pred = tape.param(base.clone());
        let loss =
            chamfer_on_tape(&mut tape, pred, target.clone(), &target_tree, ChamferNorm::MeanPerDirection)
                .unwrap();
        let grads = tape.backward(loss).unwrap();
        let analytic = grads.get(pred).unwrap();

        let h = 1e-6;
        for i in 0..base.len() {
            let mut plus = base.clone();
            plus.data_mut()[i] += h;
            let mut minus = base.clone();
            minus.data_mut()[i] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let an = analytic.data()[i];
            let denom = fd.abs().max(an.abs()).max(1e-4);
            assert!((fd - an).abs() / denom < 1e-5, "component {i}: {fd} vs {an}");
        }
    }

    #[test]
    fn proptest_chamfer_nonneg_and_identity() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::default();
        let strat = (
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..40),
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..40),
        );
        runner
            .run(&strat, |(a, b)| {
                let pa: Vec<Vec3> = a.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
                let pb: Vec<Vec3> = b.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
                let d = chamfer(&pa, &pb).unwrap();
                prop_assert!(d >= 0.0);
                // Zero iff each set is contained in the other.
                let contained = |xs: &[Vec3], ys: &[Vec3]| {
                    xs.iter().all(|x| ys.iter().any(|y| x.dist_sq(*y) == 0.0))
                };
                prop_assert_eq!(d == 0.0, contained(&pa, &pb) && contained(&pb, &pa));
                Ok(())
            })
            .unwrap();
    }
}
