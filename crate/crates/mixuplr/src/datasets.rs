//! Synthetic 2-D datasets, SSL splits, and stochastic augmentation.

use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{sample_gaussian_vector, RngState};
use crate::tensor::Tensor;

/// Points plus one-hot labels. Labels exist for every point; the SSL split
/// decides which ones training may see.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Tensor,
    pub labels: Tensor,
}

impl Dataset {
    pub fn new(features: Tensor, labels: Tensor) -> Result<Self> {
        if features.n_rows() != labels.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: features.n_rows(),
                got: labels.n_rows(),
            });
        }
        if features.n_rows() == 0 {
            return Err(Error::EmptyInput("dataset"));
        }
        for r in 0..labels.n_rows() {
            let row = labels.row(r);
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::InvalidArgument(format!("label row {r} is not one-hot")));
            }
        }
        Ok(Self { features, labels })
    }

    pub fn n_points(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.n_cols()
    }

    pub fn class_of(&self, i: usize) -> usize {
        self.labels
            .row(i)
            .iter()
            .position(|&v| v == 1.0)
            .expect("one-hot invariant")
    }
}

fn one_hot(class: usize, n_classes: usize) -> Vec<f64> {
    let mut row = vec![0.0; n_classes];
    row[class] = 1.0;
    row
}

/// Two interleaving half-circles: the upper moon traces the unit upper
/// half-circle and the lower moon is its point mirror shifted to pass
/// through the upper moon's concavity. Gaussian noise is added per
/// coordinate.
pub fn make_two_moons(n: usize, noise: f64, rng: &mut RngState) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("two moons needs n >= 2, got {n}")));
    }
    let n_upper = n.div_ceil(2);
    let n_lower = n / 2;
    let mut feats = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n_upper {
        let t = std::f64::consts::PI * i as f64 / (n_upper.max(2) - 1) as f64;
        feats.push(vec![t.cos(), t.sin()]);
        labels.push(one_hot(0, 2));
    }
    for i in 0..n_lower {
        let t = std::f64::consts::PI * i as f64 / (n_lower.max(2) - 1) as f64;
        feats.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(one_hot(1, 2));
    }
    for row in &mut feats {
        let jitter = sample_gaussian_vector(2, noise, rng)?;
        row[0] += jitter[0];
        row[1] += jitter[1];
    }
    Dataset::new(Tensor::from_rows(&feats)?, Tensor::from_rows(&labels)?)
}

/// Concentric circles; the inner radius is `factor` times the outer.
pub fn make_circles(n: usize, noise: f64, factor: f64, rng: &mut RngState) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("circles needs n >= 2, got {n}")));
    }
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::InvalidArgument(format!("factor must be in (0,1), got {factor}")));
    }
    let n_outer = n.div_ceil(2);
    let n_inner = n / 2;
    let mut feats = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n_outer {
        let t = std::f64::consts::TAU * i as f64 / n_outer as f64;
        feats.push(vec![t.cos(), t.sin()]);
        labels.push(one_hot(0, 2));
    }
    for i in 0..n_inner {
        let t = std::f64::consts::TAU * i as f64 / n_inner as f64;
        feats.push(vec![factor * t.cos(), factor * t.sin()]);
        labels.push(one_hot(1, 2));
    }
    for row in &mut feats {
        let jitter = sample_gaussian_vector(2, noise, rng)?;
        row[0] += jitter[0];
        row[1] += jitter[1];
    }
    Dataset::new(Tensor::from_rows(&feats)?, Tensor::from_rows(&labels)?)
}

/// Isotropic Gaussian blobs, one class per center, points dealt round-robin.
pub fn make_blobs(
    n: usize,
    centers: &[(f64, f64)],
    sigma: f64,
    rng: &mut RngState,
) -> Result<Dataset> {
    if centers.is_empty() {
        return Err(Error::EmptyInput("blob centers"));
    }
    if n < centers.len() {
        return Err(Error::InvalidArgument(format!(
            "need at least one point per center: n={n}, centers={}",
            centers.len()
        )));
    }
    let k = centers.len();
    let mut feats = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        let jitter = sample_gaussian_vector(2, sigma, rng)?;
        feats.push(vec![centers[c].0 + jitter[0], centers[c].1 + jitter[1]]);
        labels.push(one_hot(c, k));
    }
    Dataset::new(Tensor::from_rows(&feats)?, Tensor::from_rows(&labels)?)
}

/// Index view of an SSL problem: which points are labeled, which form the
/// unlabeled pool, and which are held out for evaluation only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SslSplit {
    pub labeled_idx: Vec<usize>,
    pub unlabeled_idx: Vec<usize>,
    pub holdout_idx: Vec<usize>,
}

impl SslSplit {
    /// Checks the partition: pairwise disjoint and within bounds.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self
            .labeled_idx
            .iter()
            .chain(&self.unlabeled_idx)
            .chain(&self.holdout_idx)
        {
            if i >= n {
                return Err(Error::InvalidArgument(format!("split index {i} out of range {n}")));
            }
            if seen[i] {
                return Err(Error::InvalidArgument(format!("split index {i} repeated")));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// Splits a dataset into m labeled points, a holdout set, and the unlabeled
/// rest. With `balanced`, labeled counts per class differ by at most one.
pub fn split_ssl(
    dataset: &Dataset,
    m: usize,
    balanced: bool,
    rng: &mut RngState,
    holdout_fraction: f64,
) -> Result<SslSplit> {
    let n = dataset.n_points();
    let s = dataset.n_classes();
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::InvalidArgument(format!(
            "holdout_fraction must be in [0,1), got {holdout_fraction}"
        )));
    }
    let n_holdout = (holdout_fraction * n as f64).round() as usize;
    if m + n_holdout > n {
        return Err(Error::InvalidArgument(format!(
            "m ({m}) + holdout ({n_holdout}) exceeds n ({n})"
        )));
    }
    if balanced && m < s {
        return Err(Error::InvalidArgument(format!(
            "balanced split needs m >= {s} (one label per class), got {m}"
        )));
    }
    let perm = rng.permutation(n);
    let mut holdout_idx: Vec<usize> = perm[..n_holdout].to_vec();
    let pool = &perm[n_holdout..];

    let mut labeled_idx: Vec<usize>;
    if balanced {
        let base = m / s;
        let rem = m % s;
        let mut quota: Vec<usize> = (0..s).map(|c| base + usize::from(c < rem)).collect();
        labeled_idx = Vec::with_capacity(m);
        for &i in pool {
            let c = dataset.class_of(i);
            if quota[c] > 0 {
                quota[c] -= 1;
                labeled_idx.push(i);
                if labeled_idx.len() == m {
                    break;
                }
            }
        }
        if labeled_idx.len() < m {
            return Err(Error::InvalidArgument(
                "not enough points of every class for a balanced labeled set".into(),
            ));
        }
    } else {
        labeled_idx = pool[..m].to_vec();
    }

    let mut taken = vec![false; n];
    for &i in holdout_idx.iter().chain(&labeled_idx) {
        taken[i] = true;
    }
    let mut unlabeled_idx: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
    labeled_idx.sort_unstable();
    holdout_idx.sort_unstable();
    unlabeled_idx.sort_unstable();
    let split = SslSplit { labeled_idx, unlabeled_idx, holdout_idx };
    split.validate(n)?;
    Ok(split)
}

/// Stochastic augmentation: Gaussian jitter, then a rigid rotation about the
/// batch centroid (2-D only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    pub jitter_sigma: f64,
    pub rotate_max_radians: f64,
}

impl AugmentSpec {
    pub fn new(jitter_sigma: f64, rotate_max_radians: f64) -> Result<Self> {
        if !(jitter_sigma >= 0.0) || !(rotate_max_radians >= 0.0) {
            return Err(Error::InvalidArgument(
                "augmentation parameters must be nonnegative".into(),
            ));
        }
        Ok(Self { jitter_sigma, rotate_max_radians })
    }

    pub fn none() -> Self {
        Self { jitter_sigma: 0.0, rotate_max_radians: 0.0 }
    }
}

/// Applies the augmentation to a batch. Labels are untouched by design: the
/// caller keeps them separate.
pub fn augment(x: &Tensor, spec: &AugmentSpec, rng: &mut RngState) -> Result<Tensor> {
    let (b, d) = (x.n_rows(), x.n_cols());
    let mut out = x.clone();
    // Jitter always draws so the stream layout does not depend on sigma;
    // sigma = 0 contributes exact zeros.
    for v in out.data_mut() {
        *v += spec.jitter_sigma * rng.next_gaussian();
    }
    if spec.rotate_max_radians > 0.0 {
        if d != 2 {
            return Err(Error::InvalidArgument(format!(
                "rotation augmentation needs 2-D data, got d={d}"
            )));
        }
        let theta = rng.uniform(-spec.rotate_max_radians, spec.rotate_max_radians);
        let (sin, cos) = theta.sin_cos();
        let (mut cx, mut cy) = (0.0, 0.0);
        for r in 0..b {
            cx += out.row(r)[0];
            cy += out.row(r)[1];
        }
        cx /= b as f64;
        cy /= b as f64;
        for r in 0..b {
            let row = out.row_mut(r);
            let (px, py) = (row[0] - cx, row[1] - cy);
            row[0] = cos * px - sin * py + cx;
            row[1] = sin * px + cos * py + cy;
        }
    }
    out.debug_assert_finite("augment");
    Ok(out)
}

// --- CSV and index-file persistence -------------------------------------

/// Writes `x0,x1,...,label` rows. Coordinates keep full round-trip precision.
pub fn save_dataset_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let d = dataset.n_features();
    let mut out = String::new();
    for j in 0..d {
        out.push_str(&format!("x{j},"));
    }
    out.push_str("label\n");
    for i in 0..dataset.n_points() {
        for &v in dataset.features.row(i) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", dataset.class_of(i)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or(Error::EmptyInput("dataset csv"))?;
    let d = header.split(',').count() - 1;
    let mut feats: Vec<Vec<f64>> = Vec::new();
    let mut classes: Vec<usize> = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::Config(format!("dataset csv line {}: bad field count", ln + 2)));
        }
        let row = fields[..d]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Config(format!("dataset csv line {}: {e}", ln + 2)))?;
        let class = fields[d]
            .parse::<usize>()
            .map_err(|e| Error::Config(format!("dataset csv line {}: {e}", ln + 2)))?;
        feats.push(row);
        classes.push(class);
    }
    let n_classes = classes.iter().copied().max().map_or(0, |c| c + 1);
    let labels: Vec<Vec<f64>> = classes.iter().map(|&c| one_hot(c, n_classes)).collect();
    Dataset::new(Tensor::from_rows(&feats)?, Tensor::from_rows(&labels)?)
}

/// One index per line.
pub fn save_indices(path: &Path, idx: &[usize]) -> Result<()> {
    let mut out = String::new();
    for &i in idx {
        out.push_str(&format!("{i}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_indices(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<usize>()
                .map_err(|e| Error::Config(format!("bad index line `{l}`: {e}")))
        })
        .collect()
}
