//! The full training loop: supervised, mixup-consistency, and Lipschitz
//! penalty terms with a linear ramp on the unsupervised weight.
//!
//! Randomness is organized as independent child streams keyed by purpose and
//! step, so skipping a term (for example the penalty at zeta = 0) never
//! shifts the draws of any other term. That makes "mixup-only" and
//! "mixup-lr with zeta = 0" bit-identical, and makes the zeta sweep affine
//! in the penalty gradient.

use std::time::Instant;

use crate::datasets::{AugmentSpec, Dataset, SslSplit};
use crate::error::{Error, Result};
use crate::lipschitz::{
    adv_perturbation, alp_loss_and_grads, estimate_function_lipschitz,
    gradient_penalty_and_grads, AlpConfig, DomainSampler, MlpFunction,
};
use crate::mixup::{guess_labels, mixmatch_mix, sharpen, Origin};
use crate::net::{
    backward_from_dlogits, ce_soft_row, forward, forward_cached, init_params, msep_row,
    Activation, MlpSpec, ParamVector,
};
use crate::numeric::softmax_unchecked;
use crate::optim::{sgd_adam_step, OptimizerConfig, OptimizerState};
use crate::rng::RngState;
use crate::tensor::Tensor;

// Child-stream ids off the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE_LABELED: u64 = 1;
const STREAM_SHUFFLE_UNLABELED: u64 = 2;
const STREAM_STEP: u64 = 3;
const STREAM_KHAT: u64 = 4;
// Per-step sub-streams.
const SUB_GUESS: u64 = 0;
const SUB_MIX: u64 = 1;
const SUB_ALP: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    SupervisedOnly,
    MixupOnly,
    MixupLr,
    MixupGp,
}

impl TrainMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainMode::SupervisedOnly => "supervised-only",
            TrainMode::MixupOnly => "mixup-only",
            TrainMode::MixupLr => "mixup-lr",
            TrainMode::MixupGp => "mixup-gp",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "supervised-only" => Ok(TrainMode::SupervisedOnly),
            "mixup-only" => Ok(TrainMode::MixupOnly),
            "mixup-lr" => Ok(TrainMode::MixupLr),
            "mixup-gp" => Ok(TrainMode::MixupGp),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }

    /// Modes that carry an explicit regularizer weighted by zeta.
    pub fn uses_zeta(self) -> bool {
        matches!(self, TrainMode::MixupLr | TrainMode::MixupGp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTarget {
    UnlabeledPool,
    Holdout,
}

impl EvalTarget {
    pub fn name(self) -> &'static str {
        match self {
            EvalTarget::UnlabeledPool => "unlabeled-pool",
            EvalTarget::Holdout => "holdout",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "unlabeled-pool" => Ok(EvalTarget::UnlabeledPool),
            "holdout" => Ok(EvalTarget::Holdout),
            other => Err(Error::InvalidArgument(format!("unknown eval target `{other}`"))),
        }
    }
}

/// Every hyperparameter of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Beta(alpha, alpha) mixing concentration.
    pub alpha: f64,
    /// Sharpening temperature.
    pub tau: f64,
    /// Augmented copies for label guessing.
    pub p_augment: usize,
    pub lambda_u_max: f64,
    pub ramp_steps: usize,
    /// Weight of the explicit Lipschitz term.
    pub zeta: f64,
    pub alp: AlpConfig,
    /// Apply the penalty to mixed points instead of the raw batch.
    pub alp_on_mixed: bool,
    pub augment: AugmentSpec,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub total_steps: usize,
    pub eval_every: usize,
    /// Pairs for the periodic Lipschitz estimate in the metrics; 0 disables.
    pub khat_pairs: usize,
    pub seed: u64,
    pub eval_target: EvalTarget,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::MixupLr,
            hidden: vec![64, 64],
            activation: Activation::Relu,
            alpha: 0.75,
            tau: 0.5,
            p_augment: 2,
            lambda_u_max: 10.0,
            ramp_steps: 1000,
            zeta: 2.0,
            alp: AlpConfig::default(),
            alp_on_mixed: false,
            augment: AugmentSpec { jitter_sigma: 0.05, rotate_max_radians: 10f64.to_radians() },
            optimizer: OptimizerConfig::default(),
            batch_size: 32,
            total_steps: 4000,
            eval_every: 50,
            khat_pairs: 0,
            seed: 0,
            eval_target: EvalTarget::Holdout,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.total_steps == 0 || self.eval_every == 0 {
            return Err(Error::InvalidArgument(
                "batch_size, total_steps, eval_every must be positive".into(),
            ));
        }
        if !(self.alpha > 0.0) || !(self.tau > 0.0) {
            return Err(Error::InvalidArgument("alpha and tau must be > 0".into()));
        }
        if self.p_augment == 0 {
            return Err(Error::InvalidArgument("p_augment must be >= 1".into()));
        }
        if !(self.lambda_u_max >= 0.0) || !(self.zeta >= 0.0) {
            return Err(Error::InvalidArgument("lambda_u_max and zeta must be >= 0".into()));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be > 0".into()));
        }
        self.alp.validate()
    }

    /// Applies mode consistency: zeta is forced to 0 outside the penalized
    /// modes.
    pub fn normalized(&self) -> TrainConfig {
        let mut cfg = self.clone();
        if !cfg.mode.uses_zeta() {
            cfg.zeta = 0.0;
        }
        cfg
    }

    /// Network architecture for a problem with the given dimensions.
    pub fn mlp_spec(&self, input_dim: usize, n_classes: usize) -> Result<MlpSpec> {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(&self.hidden);
        widths.push(n_classes);
        MlpSpec::new(widths, self.activation)
    }
}

/// What the training loop is allowed to see: labeled features with labels,
/// unlabeled features without, and an evaluation set whose labels are only
/// ever read by `evaluate`.
#[derive(Debug, Clone)]
pub struct TrainView {
    pub labeled_x: Tensor,
    pub labeled_y: Tensor,
    pub unlabeled_x: Tensor,
    pub eval_x: Tensor,
    pub eval_y: Tensor,
}

impl TrainView {
    pub fn new(dataset: &Dataset, split: &SslSplit, eval_target: EvalTarget) -> Result<Self> {
        split.validate(dataset.n_points())?;
        if split.labeled_idx.is_empty() {
            return Err(Error::EmptyInput("labeled split"));
        }
        let eval_idx = match eval_target {
            EvalTarget::UnlabeledPool => &split.unlabeled_idx,
            EvalTarget::Holdout => &split.holdout_idx,
        };
        if eval_idx.is_empty() {
            return Err(Error::EmptyInput("evaluation split"));
        }
        Ok(Self {
            labeled_x: dataset.features.select_rows(&split.labeled_idx),
            labeled_y: dataset.labels.select_rows(&split.labeled_idx),
            unlabeled_x: dataset.features.select_rows(&split.unlabeled_idx),
            eval_x: dataset.features.select_rows(eval_idx),
            eval_y: dataset.labels.select_rows(eval_idx),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.labeled_x.n_cols()
    }

    pub fn n_classes(&self) -> usize {
        self.labeled_y.n_cols()
    }
}

/// Scalar metrics logged at each evaluation point.
#[derive(Debug, Clone)]
pub struct MetricsRecord {
    pub step: usize,
    pub loss_x: f64,
    pub loss_u: f64,
    pub loss_alp: f64,
    pub total_loss: f64,
    pub lambda_u: f64,
    pub error_rate: f64,
    pub k_hat: Option<f64>,
    pub wall_ms: u64,
}

/// Linear ramp: `lambda_u_max * min(1, step / ramp_steps)`.
pub fn ramp_lambda(step: usize, ramp_steps: usize, lambda_u_max: f64) -> f64 {
    if ramp_steps == 0 {
        return lambda_u_max;
    }
    lambda_u_max * (step as f64 / ramp_steps as f64).min(1.0)
}

/// Cross-entropy with soft targets, averaged over labeled-near rows.
/// An empty subset contributes zero with a warning.
pub fn supervised_loss(pred_logits: &Tensor, y_tilde: &Tensor, origin: &[Origin]) -> Result<f64> {
    masked_mean_loss(pred_logits, y_tilde, origin, Origin::LabeledNear, ce_soft_row)
}

/// Squared L2 between predicted distribution and target, averaged over
/// unlabeled-near rows. An empty subset contributes zero with a warning.
pub fn unsupervised_loss(
    pred_logits: &Tensor,
    y_tilde: &Tensor,
    origin: &[Origin],
) -> Result<f64> {
    masked_mean_loss(pred_logits, y_tilde, origin, Origin::UnlabeledNear, msep_row)
}

type RowLoss = fn(&[f64], &[f64]) -> (f64, Vec<f64>);

fn masked_mean_loss(
    pred_logits: &Tensor,
    y_tilde: &Tensor,
    origin: &[Origin],
    wanted: Origin,
    row_fn: RowLoss,
) -> Result<f64> {
    if pred_logits.n_rows() != y_tilde.n_rows() || pred_logits.n_rows() != origin.len() {
        return Err(Error::DimensionMismatch {
            expected: pred_logits.n_rows(),
            got: y_tilde.n_rows().min(origin.len()),
        });
    }
    let rows: Vec<usize> = (0..origin.len()).filter(|&i| origin[i] == wanted).collect();
    if rows.is_empty() {
        eprintln!("warning: no {wanted:?} rows in batch; loss term contributes 0");
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for &i in &rows {
        sum += row_fn(pred_logits.row(i), y_tilde.row(i)).0;
    }
    Ok(sum / rows.len() as f64)
}

/// Loss terms and the full parameter gradient of one optimization step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub grads: Vec<f64>,
    pub loss_x: f64,
    pub loss_u: f64,
    pub loss_alp: f64,
    pub lambda_u: f64,
    pub total_loss: f64,
}

/// Positions `step*B .. step*B+B` of an endlessly reshuffled pool.
fn batch_indices(
    pool_size: usize,
    batch_size: usize,
    step: usize,
    shuffle_stream: &RngState,
) -> Vec<usize> {
    let mut out = Vec::with_capacity(batch_size);
    let mut epoch_cache: Option<(u64, Vec<usize>)> = None;
    for i in 0..batch_size {
        let pos = step * batch_size + i;
        let epoch = (pos / pool_size) as u64;
        let within = pos % pool_size;
        if epoch_cache.as_ref().map(|(e, _)| *e) != Some(epoch) {
            epoch_cache = Some((epoch, shuffle_stream.child(epoch).permutation(pool_size)));
        }
        out.push(epoch_cache.as_ref().unwrap().1[within]);
    }
    out
}

/// One training step as a pure function of (config, view, params, step):
/// batch selection, label guessing, mixing, losses, and the combined
/// gradient. Guessed labels are constants; the penalty gradient flows
/// through both of its forward passes.
pub fn compute_step(
    cfg: &TrainConfig,
    view: &TrainView,
    spec: &MlpSpec,
    params: &ParamVector,
    step: usize,
) -> Result<StepOutput> {
    let root = RngState::new(cfg.seed);
    let step_rng = root.child(STREAM_STEP).child(step as u64);
    let lambda_u = ramp_lambda(step, cfg.ramp_steps, cfg.lambda_u_max);

    let lab_idx = batch_indices(
        view.labeled_x.n_rows(),
        cfg.batch_size,
        step,
        &root.child(STREAM_SHUFFLE_LABELED),
    );
    let xb = view.labeled_x.select_rows(&lab_idx);
    let yb = view.labeled_y.select_rows(&lab_idx);

    if cfg.mode == TrainMode::SupervisedOnly {
        let cache = forward_cached(spec, params, &xb)?;
        let s = spec.output_dim();
        let b = xb.n_rows();
        let mut loss_x = 0.0;
        let mut d_logits = vec![0.0; b * s];
        for r in 0..b {
            let (l, g) = ce_soft_row(&cache.logits()[r * s..(r + 1) * s], yb.row(r));
            loss_x += l / b as f64;
            for (dst, gi) in d_logits[r * s..(r + 1) * s].iter_mut().zip(g) {
                *dst = gi / b as f64;
            }
        }
        let (grads, _) = backward_from_dlogits(spec, params, &cache, &d_logits, true);
        return Ok(StepOutput {
            grads,
            loss_x,
            loss_u: 0.0,
            loss_alp: 0.0,
            lambda_u,
            total_loss: loss_x,
        });
    }

    if view.unlabeled_x.n_rows() == 0 {
        return Err(Error::EmptyInput("unlabeled pool required by mixup modes"));
    }
    let unl_idx = batch_indices(
        view.unlabeled_x.n_rows(),
        cfg.batch_size,
        step,
        &root.child(STREAM_SHUFFLE_UNLABELED),
    );
    let ub = view.unlabeled_x.select_rows(&unl_idx);

    let mut guess_rng = step_rng.child(SUB_GUESS);
    let q = guess_labels(spec, params, &ub, cfg.p_augment, &cfg.augment, &mut guess_rng)?;
    let q = sharpen(&q, cfg.tau)?;

    let mut mix_rng = step_rng.child(SUB_MIX);
    let mixed = mixmatch_mix(&xb, &yb, &ub, &q, cfg.alpha, &mut mix_rng)?;

    let cache = forward_cached(spec, params, &mixed.x_tilde)?;
    let s = spec.output_dim();
    let total_rows = mixed.x_tilde.n_rows();
    let n_lab = mixed.origin.iter().filter(|o| **o == Origin::LabeledNear).count();
    let n_unl = total_rows - n_lab;
    let mut loss_x = 0.0;
    let mut loss_u = 0.0;
    let mut d_logits = vec![0.0; total_rows * s];
    for r in 0..total_rows {
        let z = &cache.logits()[r * s..(r + 1) * s];
        match mixed.origin[r] {
            Origin::LabeledNear => {
                let (l, g) = ce_soft_row(z, mixed.y_tilde.row(r));
                loss_x += l / n_lab as f64;
                for (dst, gi) in d_logits[r * s..(r + 1) * s].iter_mut().zip(g) {
                    *dst = gi / n_lab as f64;
                }
            }
            Origin::UnlabeledNear => {
                let (l, g) = msep_row(z, mixed.y_tilde.row(r));
                loss_u += l / n_unl as f64;
                for (dst, gi) in d_logits[r * s..(r + 1) * s].iter_mut().zip(g) {
                    *dst = gi * lambda_u / n_unl as f64;
                }
            }
        }
    }
    let (mut grads, _) = backward_from_dlogits(spec, params, &cache, &d_logits, true);

    let mut loss_alp = 0.0;
    if cfg.zeta > 0.0 {
        let penalty_batch =
            if cfg.alp_on_mixed { mixed.x_tilde.clone() } else { xb.vstack(&ub)? };
        let (value, g_reg): (f64, Vec<f64>) = match cfg.mode {
            TrainMode::MixupLr => {
                let mut alp_rng = step_rng.child(SUB_ALP);
                match adv_perturbation(spec, params, &penalty_batch, &cfg.alp, &mut alp_rng) {
                    Ok(r_adv) => {
                        alp_loss_and_grads(spec, params, &penalty_batch, &r_adv, &cfg.alp)?
                    }
                    // Rows inside a locally constant region (all relu units
                    // dead) have no adversarial direction; penalize only the
                    // rows that do.
                    Err(Error::DegenerateGradient) => {
                        alp_over_live_rows(spec, params, &penalty_batch, cfg, &step_rng)?
                    }
                    Err(e) => return Err(e),
                }
            }
            TrainMode::MixupGp => {
                gradient_penalty_and_grads(spec, params, &penalty_batch, cfg.alp.gamma)?
            }
            _ => unreachable!("zeta forced to 0 outside penalized modes"),
        };
        loss_alp = value;
        for (g, r) in grads.iter_mut().zip(g_reg) {
            *g += cfg.zeta * r;
        }
    }

    let total_loss = loss_x + lambda_u * loss_u + cfg.zeta * loss_alp;
    Ok(StepOutput { grads, loss_x, loss_u, loss_alp, lambda_u, total_loss })
}

/// Per-row retry of the penalty when the batched perturbation hit a row
/// with a vanishing probe gradient. Surviving rows carry the penalty; a
/// fully degenerate batch contributes zero.
fn alp_over_live_rows(
    spec: &MlpSpec,
    params: &ParamVector,
    penalty_batch: &Tensor,
    cfg: &TrainConfig,
    step_rng: &RngState,
) -> Result<(f64, Vec<f64>)> {
    let d = penalty_batch.n_cols();
    let mut live_x: Vec<Vec<f64>> = Vec::new();
    let mut live_r: Vec<Vec<f64>> = Vec::new();
    for row in 0..penalty_batch.n_rows() {
        let x_row = Tensor::new(vec![1, d], penalty_batch.row(row).to_vec())?;
        let mut row_rng = step_rng.child(SUB_ALP).child(1 + row as u64);
        match adv_perturbation(spec, params, &x_row, &cfg.alp, &mut row_rng) {
            Ok(r) => {
                live_x.push(penalty_batch.row(row).to_vec());
                live_r.push(r.row(0).to_vec());
            }
            Err(Error::DegenerateGradient) => continue,
            Err(e) => return Err(e),
        }
    }
    if live_x.is_empty() {
        return Ok((0.0, vec![0.0; spec.param_count()]));
    }
    alp_loss_and_grads(
        spec,
        params,
        &Tensor::from_rows(&live_x)?,
        &Tensor::from_rows(&live_r)?,
        &cfg.alp,
    )
}

/// Classification metrics on a labeled set.
#[derive(Debug, Clone, Copy)]
pub struct EvalMetrics {
    pub error_rate: f64,
    pub accuracy: f64,
    pub mean_ce: f64,
}

pub fn evaluate(
    spec: &MlpSpec,
    params: &ParamVector,
    features: &Tensor,
    labels: &Tensor,
) -> Result<EvalMetrics> {
    if features.n_rows() == 0 {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let logits = forward(spec, params, features)?;
    let mut wrong = 0usize;
    let mut ce_sum = 0.0;
    for r in 0..features.n_rows() {
        let z = logits.row(r);
        let pred = argmax(z);
        let truth = argmax(labels.row(r));
        if pred != truth {
            wrong += 1;
        }
        let p = softmax_unchecked(z);
        ce_sum += -(p[truth].max(1e-300)).ln();
    }
    let n = features.n_rows() as f64;
    let error_rate = wrong as f64 / n;
    Ok(EvalMetrics { error_rate, accuracy: 1.0 - error_rate, mean_ce: ce_sum / n })
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

/// Median of the last `k` entries; the even-count median averages the two
/// middle values.
pub fn median_of_last_k(series: &[f64], k: usize) -> Result<f64> {
    if series.is_empty() || k == 0 {
        return Err(Error::EmptyInput("median series"));
    }
    let tail = &series[series.len().saturating_sub(k)..];
    let mut sorted = tail.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    Ok(if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 })
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub spec: MlpSpec,
    pub params: ParamVector,
    pub metrics: Vec<MetricsRecord>,
}

impl TrainOutcome {
    /// Median error rate over the last `k` logged records.
    pub fn median_error_last(&self, k: usize) -> Result<f64> {
        let errs: Vec<f64> = self.metrics.iter().map(|m| m.error_rate).collect();
        median_of_last_k(&errs, k)
    }
}

/// Runs the configured number of steps and logs metrics every `eval_every`
/// steps (plus the final step). Aborts with a diagnostic error if the loss
/// leaves the finite range.
pub fn train(cfg: &TrainConfig, view: &TrainView) -> Result<TrainOutcome> {
    cfg.validate()?;
    let cfg = cfg.normalized();
    let spec = cfg.mlp_spec(view.input_dim(), view.n_classes())?;
    let root = RngState::new(cfg.seed);
    let mut init_rng = root.child(STREAM_INIT);
    let mut params = init_params(&spec, &mut init_rng);
    let mut opt_state = OptimizerState::new(params.len());
    let mut metrics = Vec::new();
    let khat_sampler = if cfg.khat_pairs > 0 {
        Some(DomainSampler::from_data(&view.labeled_x.vstack(&view.unlabeled_x)?)?)
    } else {
        None
    };
    let started = Instant::now();

    for step in 0..cfg.total_steps {
        let out = compute_step(&cfg, view, &spec, &params, step)?;
        if !out.total_loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        sgd_adam_step(params.as_mut_slice(), &out.grads, &mut opt_state, &cfg.optimizer)?;

        let done = step + 1;
        if done % cfg.eval_every == 0 || done == cfg.total_steps {
            let eval = evaluate(&spec, &params, &view.eval_x, &view.eval_y)?;
            let k_hat = match &khat_sampler {
                Some(sampler) => {
                    let f = MlpFunction { spec: &spec, params: &params };
                    let mut khat_rng = root.child(STREAM_KHAT).child(step as u64);
                    Some(
                        estimate_function_lipschitz(
                            &f,
                            sampler,
                            cfg.alp.d_y_kind,
                            cfg.khat_pairs,
                            &mut khat_rng,
                        )?
                        .k_hat,
                    )
                }
                None => None,
            };
            metrics.push(MetricsRecord {
                step: done,
                loss_x: out.loss_x,
                loss_u: out.loss_u,
                loss_alp: out.loss_alp,
                total_loss: out.total_loss,
                lambda_u: out.lambda_u,
                error_rate: eval.error_rate,
                k_hat,
                wall_ms: started.elapsed().as_millis() as u64,
            });
        }
    }
    Ok(TrainOutcome { spec, params, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{make_blobs, make_two_moons, split_ssl};

    fn small_problem(seed: u64) -> (Dataset, SslSplit) {
        let mut rng = RngState::new(seed);
        let ds = make_two_moons(80, 0.1, &mut rng).unwrap();
        let split = split_ssl(&ds, 6, true, &mut rng, 0.25).unwrap();
        (ds, split)
    }

    fn quick_config(mode: TrainMode) -> TrainConfig {
        TrainConfig {
            mode,
            hidden: vec![16],
            total_steps: 40,
            eval_every: 10,
            batch_size: 8,
            ramp_steps: 20,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn ramp_shape() {
        assert_eq!(ramp_lambda(0, 100, 10.0), 0.0);
        assert_eq!(ramp_lambda(50, 100, 10.0), 5.0);
        assert_eq!(ramp_lambda(100, 100, 10.0), 10.0);
        assert_eq!(ramp_lambda(500, 100, 10.0), 10.0);
        assert_eq!(ramp_lambda(7, 0, 10.0), 10.0);
        let mut last = -1.0;
        for t in 0..200 {
            let v = ramp_lambda(t, 123, 4.0);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn supervised_loss_analytic_values() {
        // prediction equals the one-hot target at a huge margin -> ~0
        let logits = Tensor::from_rows(&[vec![50.0, -50.0]]).unwrap();
        let y = Tensor::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let l = supervised_loss(&logits, &y, &[Origin::LabeledNear]).unwrap();
        assert!(l <= 1e-9);

        // uniform prediction over S classes -> log S for any simplex target
        let logits = Tensor::from_rows(&[vec![0.3, 0.3, 0.3]]).unwrap();
        let y = Tensor::from_rows(&[vec![0.2, 0.5, 0.3]]).unwrap();
        let l = supervised_loss(&logits, &y, &[Origin::LabeledNear]).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-12);

        // empty subset contributes zero
        let l = supervised_loss(&logits, &y, &[Origin::UnlabeledNear]).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn unsupervised_loss_analytic_values() {
        let logits = Tensor::from_rows(&[vec![60.0, -60.0]]).unwrap();
        let y_match = Tensor::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let l = unsupervised_loss(&logits, &y_match, &[Origin::UnlabeledNear]).unwrap();
        assert!(l < 1e-12);
        let y_opposite = Tensor::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let l = unsupervised_loss(&logits, &y_opposite, &[Origin::UnlabeledNear]).unwrap();
        assert!((l - 2.0).abs() < 1e-9);
    }

    #[test]
    fn median_of_last_k_cases() {
        assert_eq!(median_of_last_k(&[4.0], 20).unwrap(), 4.0);
        assert_eq!(median_of_last_k(&[1.0, 2.0, 3.0, 4.0], 4).unwrap(), 2.5);
        assert_eq!(median_of_last_k(&[9.0, 1.0, 2.0, 3.0], 3).unwrap(), 2.0);
        assert!(median_of_last_k(&[], 5).is_err());
        // random series against a sort-based oracle (even-count tail)
        let mut rng = RngState::new(30);
        let series: Vec<f64> = (0..31).map(|_| rng.next_f64()).collect();
        let got = median_of_last_k(&series, 20).unwrap();
        let mut tail: Vec<f64> = series[11..].to_vec();
        tail.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, (tail[9] + tail[10]) / 2.0);
    }

    #[test]
    fn evaluate_analytic_cases() {
        // perfect predictor: identity single-layer on one-hot-friendly data
        let spec = MlpSpec::new(vec![2, 2], Activation::Relu).unwrap();
        let mut values = vec![0.0; spec.param_count()];
        values[0] = 1.0;
        values[3] = 1.0;
        let params = ParamVector::new(&spec, values).unwrap();
        let x = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let y = x.clone();
        let m = evaluate(&spec, &params, &x, &y).unwrap();
        assert_eq!(m.error_rate, 0.0);
        assert_eq!(m.accuracy, 1.0);

        // constant predictor on a balanced two-class set: error 0.5
        let zero = ParamVector::zeros(&spec);
        let m = evaluate(&spec, &zero, &x, &y).unwrap();
        assert_eq!(m.error_rate, 0.5);
    }

    #[test]
    fn loss_decomposition_holds_at_every_logged_step() {
        let (ds, split) = small_problem(1);
        let view = TrainView::new(&ds, &split, EvalTarget::Holdout).unwrap();
        let out = train(&quick_config(TrainMode::MixupLr), &view).unwrap();
        assert!(!out.metrics.is_empty());
        for m in &out.metrics {
            let recomposed = m.loss_x + m.lambda_u * m.loss_u + 2.0 * m.loss_alp;
            assert!((m.total_loss - recomposed).abs() <= 1e-12);
        }
    }

    #[test]
    fn fixed_seed_runs_are_bit_identical() {
        let (ds, split) = small_problem(2);
        let view = TrainView::new(&ds, &split, EvalTarget::Holdout).unwrap();
        let cfg = quick_config(TrainMode::MixupLr);
        let a = train(&cfg, &view).unwrap();
        let b = train(&cfg, &view).unwrap();
        assert_eq!(a.params.as_slice(), b.params.as_slice());
        for (x, y) in a.metrics.iter().zip(&b.metrics) {
            assert_eq!(x.total_loss.to_bits(), y.total_loss.to_bits());
            assert_eq!(x.error_rate.to_bits(), y.error_rate.to_bits());
        }
    }

    #[test]
    fn mixup_only_equals_mixup_lr_with_zero_zeta() {
        let (ds, split) = small_problem(3);
        let view = TrainView::new(&ds, &split, EvalTarget::Holdout).unwrap();
        let a_cfg = quick_config(TrainMode::MixupOnly);
        let mut b_cfg = quick_config(TrainMode::MixupLr);
        b_cfg.zeta = 0.0;
        let a = train(&a_cfg, &view).unwrap();
        let b = train(&b_cfg, &view).unwrap();
        assert_eq!(a.params.as_slice(), b.params.as_slice());
        for (x, y) in a.metrics.iter().zip(&b.metrics) {
            assert_eq!(x.total_loss.to_bits(), y.total_loss.to_bits());
        }
    }

    #[test]
    fn zeta_sensitivity_is_affine_in_penalty_gradient() {
        // step-1 gradients for zeta in {0, 1, 2} under identical streams:
        // g2 - g0 = 2 (g1 - g0).
        let (ds, split) = small_problem(4);
        let view = TrainView::new(&ds, &split, EvalTarget::Holdout).unwrap();
        let base = quick_config(TrainMode::MixupLr);
        let spec = base.mlp_spec(view.input_dim(), view.n_classes()).unwrap();
        let mut rng = RngState::new(base.seed).child(STREAM_INIT);
        let params = init_params(&spec, &mut rng);
        let grad_for = |zeta: f64| {
            let cfg = TrainConfig { zeta, ..base.clone() };
            compute_step(&cfg, &view, &spec, &params, 1).unwrap().grads
        };
        let g0 = grad_for(0.0);
        let g1 = grad_for(1.0);
        let g2 = grad_for(2.0);
        for i in 0..g0.len() {
            let lhs = g2[i] - g0[i];
            let rhs = 2.0 * (g1[i] - g0[i]);
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
                "param {i}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn combined_gradient_matches_finite_differences() {
        // Guessed labels and the adversarial perturbation are detached
        // constants, so the differentiable objective freezes them at the
        // base parameters before probing with finite differences.
        let (ds, split) = small_problem(6);
        let view = TrainView::new(&ds, &split, EvalTarget::Holdout).unwrap();
        let mut cfg = quick_config(TrainMode::MixupLr);
        cfg.hidden = vec![6];
        cfg.batch_size = 4;
        cfg.activation = Activation::Tanh; // no relu kinks near the FD probes
        let spec = cfg.mlp_spec(view.input_dim(), view.n_classes()).unwrap();
        let mut rng = RngState::new(cfg.seed).child(STREAM_INIT);
        let params = init_params(&spec, &mut rng);
        let step = 3; // past the ramp start so lambda_u > 0
        let out = compute_step(&cfg, &view, &spec, &params, step).unwrap();

        // rebuild the step's frozen pieces from the same streams
        let root = RngState::new(cfg.seed);
        let step_rng = root.child(STREAM_STEP).child(step as u64);
        let lab_idx = batch_indices(
            view.labeled_x.n_rows(),
            cfg.batch_size,
            step,
            &root.child(STREAM_SHUFFLE_LABELED),
        );
        let unl_idx = batch_indices(
            view.unlabeled_x.n_rows(),
            cfg.batch_size,
            step,
            &root.child(STREAM_SHUFFLE_UNLABELED),
        );
        let xb = view.labeled_x.select_rows(&lab_idx);
        let yb = view.labeled_y.select_rows(&lab_idx);
        let ub = view.unlabeled_x.select_rows(&unl_idx);
        let mut guess_rng = step_rng.child(SUB_GUESS);
        let q =
            guess_labels(&spec, &params, &ub, cfg.p_augment, &cfg.augment, &mut guess_rng)
                .unwrap();
        let q = sharpen(&q, cfg.tau).unwrap();
        let mut mix_rng = step_rng.child(SUB_MIX);
        let mixed = mixmatch_mix(&xb, &yb, &ub, &q, cfg.alpha, &mut mix_rng).unwrap();
        let penalty_batch = xb.vstack(&ub).unwrap();
        let mut alp_rng = step_rng.child(SUB_ALP);
        let r_adv =
            adv_perturbation(&spec, &params, &penalty_batch, &cfg.alp, &mut alp_rng).unwrap();
        let lambda_u = ramp_lambda(step, cfg.ramp_steps, cfg.lambda_u_max);
        let frozen_loss = |p: &ParamVector| {
            let logits = forward(&spec, p, &mixed.x_tilde).unwrap();
            let lx = supervised_loss(&logits, &mixed.y_tilde, &mixed.origin).unwrap();
            let lu = unsupervised_loss(&logits, &mixed.y_tilde, &mixed.origin).unwrap();
            let la = crate::lipschitz::alp_loss(&spec, p, &penalty_batch, &r_adv, &cfg.alp)
                .unwrap();
            lx + lambda_u * lu + cfg.zeta * la
        };
        // the frozen objective reproduces the step's reported loss
        assert!((frozen_loss(&params) - out.total_loss).abs() <= 1e-12);

        let h = 1e-5;
        for i in (0..params.len()).step_by(7) {
            let mut plus = params.as_slice().to_vec();
            plus[i] += h;
            let mut minus = params.as_slice().to_vec();
            minus[i] -= h;
            let lp = frozen_loss(&ParamVector::new(&spec, plus).unwrap());
            let lm = frozen_loss(&ParamVector::new(&spec, minus).unwrap());
            let fd = (lp - lm) / (2.0 * h);
            let rel = (out.grads[i] - fd).abs() / out.grads[i].abs().max(fd.abs()).max(1e-4);
            assert!(rel <= 1e-6, "param {i}: {} vs {fd} (rel {rel})", out.grads[i]);
        }
    }

    #[test]
    fn supervised_training_fits_fully_labeled_blobs() {
        let mut rng = RngState::new(7);
        let ds = make_blobs(60, &[(-2.0, 0.0), (2.0, 0.0)], 0.3, &mut rng).unwrap();
        let split = split_ssl(&ds, 50, false, &mut rng, 0.1).unwrap();
        let view = TrainView::new(&ds, &split, EvalTarget::Holdout).unwrap();
        let cfg = TrainConfig {
            mode: TrainMode::SupervisedOnly,
            hidden: vec![16],
            total_steps: 600,
            eval_every: 100,
            batch_size: 16,
            seed: 0,
            ..Default::default()
        };
        let out = train(&cfg, &view).unwrap();
        let m = evaluate(&out.spec, &out.params, &view.labeled_x, &view.labeled_y).unwrap();
        assert!(m.accuracy >= 0.99, "train accuracy {}", m.accuracy);
    }

    #[test]
    fn fully_dead_relu_batch_contributes_zero_penalty() {
        // hidden biases at -10 kill every relu unit on unit-scale data, so
        // the probe gradient vanishes everywhere and the penalty backs off
        let (ds, split) = small_problem(10);
        let view = TrainView::new(&ds, &split, EvalTarget::Holdout).unwrap();
        let cfg = quick_config(TrainMode::MixupLr);
        let spec = cfg.mlp_spec(2, 2).unwrap();
        let mut values = init_params(&spec, &mut RngState::new(0)).into_vec();
        let hidden_w = 2 * 16;
        for v in &mut values[hidden_w..hidden_w + 16] {
            *v = -10.0;
        }
        let params = ParamVector::new(&spec, values).unwrap();
        let out = compute_step(&cfg, &view, &spec, &params, 0).unwrap();
        assert_eq!(out.loss_alp, 0.0);
        assert!(out.total_loss.is_finite());
    }

    #[test]
    fn train_rejects_invalid_config() {
        let (ds, split) = small_problem(8);
        let view = TrainView::new(&ds, &split, EvalTarget::Holdout).unwrap();
        let mut cfg = quick_config(TrainMode::MixupLr);
        cfg.batch_size = 0;
        assert!(train(&cfg, &view).is_err());
        let mut cfg = quick_config(TrainMode::MixupLr);
        cfg.tau = 0.0;
        assert!(train(&cfg, &view).is_err());
    }

    #[test]
    fn view_construction_errors() {
        let (ds, split) = small_problem(9);
        let empty_holdout = SslSplit {
            labeled_idx: split.labeled_idx.clone(),
            unlabeled_idx: split
                .unlabeled_idx
                .iter()
                .chain(&split.holdout_idx)
                .copied()
                .collect(),
            holdout_idx: vec![],
        };
        assert!(TrainView::new(&ds, &empty_holdout, EvalTarget::Holdout).is_err());
        assert!(TrainView::new(&ds, &empty_holdout, EvalTarget::UnlabeledPool).is_ok());
    }
}
