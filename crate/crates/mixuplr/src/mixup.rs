//! Mixup interpolation, MixMatch-style joint batch mixing, label guessing,
//! and sharpening.
//!
//! The mixing rule keeps every virtual point closer to its first parent
//! (`lambda' = max(lambda, 1 - lambda) >= 1/2`), so each mixed row inherits
//! the loss treatment of the batch its first parent came from.

use crate::datasets::{augment, AugmentSpec};
use crate::error::{Error, Result};
use crate::net::{forward, MlpSpec, ParamVector};
use crate::numeric::softmax_unchecked;
use crate::rng::{sample_beta, RngState};
use crate::tensor::Tensor;

/// Which side a mixed row's dominant parent came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    LabeledNear,
    UnlabeledNear,
}

/// A mixed batch: virtual features, soft targets, per-row origin tags, and
/// the mixing bookkeeping (dominant weight and partner row in the joint
/// pool) that makes the closer-to-first-parent contract checkable.
#[derive(Debug, Clone)]
pub struct MixedBatch {
    pub x_tilde: Tensor,
    pub y_tilde: Tensor,
    pub origin: Vec<Origin>,
    pub lambda_prime: Vec<f64>,
    pub partner_idx: Vec<usize>,
}

/// Convex combination of one feature-target pair.
pub fn mix_pair(
    x1: &[f64],
    y1: &[f64],
    x2: &[f64],
    y2: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if x1.len() != x2.len() {
        return Err(Error::ShapeMismatch { expected: vec![x1.len()], got: vec![x2.len()] });
    }
    if y1.len() != y2.len() {
        return Err(Error::ShapeMismatch { expected: vec![y1.len()], got: vec![y2.len()] });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda must be in [0,1], got {lambda}")));
    }
    let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(&u, &v)| lambda * u + (1.0 - lambda) * v).collect()
    };
    Ok((mix(x1, x2), mix(y1, y2)))
}

/// MixMatch mixing of a labeled batch with an unlabeled batch carrying
/// guessed labels. Partner points come from a joint shuffle of both batches;
/// each row draws its own `lambda ~ Beta(alpha, alpha)`.
#[allow(clippy::needless_range_loop)] // i indexes the pool, the permutation, and the tag split
pub fn mixmatch_mix(
    labeled_x: &Tensor,
    labeled_y: &Tensor,
    unlabeled_x: &Tensor,
    unlabeled_y: &Tensor,
    alpha: f64,
    rng: &mut RngState,
) -> Result<MixedBatch> {
    if labeled_x.n_rows() == 0 || unlabeled_x.n_rows() == 0 {
        return Err(Error::EmptyInput("mixmatch batch"));
    }
    if labeled_x.n_cols() != unlabeled_x.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: labeled_x.n_cols(),
            got: unlabeled_x.n_cols(),
        });
    }
    if labeled_y.n_cols() != unlabeled_y.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: labeled_y.n_cols(),
            got: unlabeled_y.n_cols(),
        });
    }
    if labeled_x.n_rows() != labeled_y.n_rows() || unlabeled_x.n_rows() != unlabeled_y.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: labeled_x.n_rows(),
            got: labeled_y.n_rows(),
        });
    }
    let pool_x = labeled_x.vstack(unlabeled_x)?;
    let pool_y = labeled_y.vstack(unlabeled_y)?;
    let total = pool_x.n_rows();
    let n_labeled = labeled_x.n_rows();
    let perm = rng.permutation(total);

    let mut xt = Vec::with_capacity(total);
    let mut yt = Vec::with_capacity(total);
    let mut origin = Vec::with_capacity(total);
    let mut lambda_prime = Vec::with_capacity(total);
    for i in 0..total {
        let lambda = sample_beta(alpha, rng)?;
        let lambda = lambda.max(1.0 - lambda);
        let j = perm[i];
        let (x, y) = mix_pair(pool_x.row(i), pool_y.row(i), pool_x.row(j), pool_y.row(j), lambda)?;
        xt.push(x);
        yt.push(y);
        origin.push(if i < n_labeled { Origin::LabeledNear } else { Origin::UnlabeledNear });
        lambda_prime.push(lambda);
    }
    Ok(MixedBatch {
        x_tilde: Tensor::from_rows(&xt)?,
        y_tilde: Tensor::from_rows(&yt)?,
        origin,
        lambda_prime,
        partner_idx: perm,
    })
}

/// Average of the model's softmax predictions over P augmented copies of an
/// unlabeled batch. The result is a constant target: no gradient flows back.
pub fn guess_labels(
    spec: &MlpSpec,
    params: &ParamVector,
    u_batch: &Tensor,
    p_copies: usize,
    aug: &AugmentSpec,
    rng: &mut RngState,
) -> Result<Tensor> {
    if p_copies == 0 {
        return Err(Error::InvalidArgument("guess_labels needs P >= 1".into()));
    }
    let b = u_batch.n_rows();
    let s = spec.output_dim();
    let mut acc = vec![0.0; b * s];
    for _ in 0..p_copies {
        let view = augment(u_batch, aug, rng)?;
        let logits = forward(spec, params, &view)?;
        for r in 0..b {
            let p = softmax_unchecked(logits.row(r));
            for (dst, v) in acc[r * s..(r + 1) * s].iter_mut().zip(p) {
                *dst += v;
            }
        }
    }
    let scale = 1.0 / p_copies as f64;
    for v in &mut acc {
        *v *= scale;
    }
    Tensor::new(vec![b, s], acc)
}

/// Temperature sharpening of categorical rows: `q^(1/tau)` renormalized.
pub fn sharpen(q: &Tensor, tau: f64) -> Result<Tensor> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be > 0, got {tau}")));
    }
    let (b, s) = (q.n_rows(), q.n_cols());
    let inv_tau = 1.0 / tau;
    let mut out = Vec::with_capacity(b * s);
    for r in 0..b {
        let row = q.row(r);
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&v| v < 0.0) {
            return Err(Error::NotAProbability(format!("sharpen input row {r}")));
        }
        // Normalize by the row maximum before powering so extreme 1/tau
        // exponents cannot underflow the whole row to zero.
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let powed: Vec<f64> = row.iter().map(|&v| (v / max).powf(inv_tau)).collect();
        let z: f64 = powed.iter().sum();
        out.extend(powed.into_iter().map(|v| v / z));
    }
    Tensor::new(vec![b, s], out)
}
