//! Lipschitz machinery: ratio computation, adversarial perturbation by power
//! iteration, the ALP penalty, the gradient-penalty alternative, sampled
//! Lipschitz-constant estimators, and the convexity-gap audit that checks the
//! mixup smoothness bound on trained networks.

use crate::error::{Error, Result};
use crate::net::{
    backward_from_dlogits, forward_cached, kl_ref_row, MlpSpec, ParamVector,
};
use crate::numeric::{kl_divergence, l2_distance, softmax_unchecked, KL_FLOOR};
use crate::rng::RngState;
use crate::tensor::Tensor;

/// Output-space metric for the Lipschitz ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DyKind {
    /// KL divergence between softmax outputs (classifier default).
    KlSoftmax,
    /// Euclidean distance between raw logits (linear-model oracle metric).
    L2Logits,
}

impl DyKind {
    pub fn name(self) -> &'static str {
        match self {
            DyKind::KlSoftmax => "kl-softmax",
            DyKind::L2Logits => "l2-logits",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "kl-softmax" => Ok(DyKind::KlSoftmax),
            "l2-logits" => Ok(DyKind::L2Logits),
            other => Err(Error::InvalidArgument(format!("unknown d_y kind `{other}`"))),
        }
    }
}

/// Adversarial Lipschitz penalty settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlpConfig {
    /// Perturbation radius in input-space units.
    pub eps_r: f64,
    /// Probe scale for the power-iteration gradient.
    pub xi: f64,
    /// Power-iteration count.
    pub k_iters: usize,
    /// Target Lipschitz constant; 0 because no 1-Lipschitz constraint is
    /// needed outside the critic setting.
    pub gamma: f64,
    pub d_y_kind: DyKind,
    /// Penalize (ratio - gamma)^2 instead of the plain difference.
    pub squared: bool,
}

impl Default for AlpConfig {
    fn default() -> Self {
        Self {
            // Matches the per-coordinate noise scale of the bundled 2-D
            // datasets; larger radii reach across the class gap and smooth
            // the decision boundary away (error doubles by eps_r = 0.5).
            eps_r: 0.15,
            xi: 1e-6,
            k_iters: 1,
            gamma: 0.0,
            d_y_kind: DyKind::KlSoftmax,
            squared: false,
        }
    }
}

impl AlpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_r > 0.0) {
            return Err(Error::InvalidArgument(format!("eps_r must be > 0, got {}", self.eps_r)));
        }
        if !(self.xi > 0.0) {
            return Err(Error::InvalidArgument(format!("xi must be > 0, got {}", self.xi)));
        }
        if self.k_iters == 0 {
            return Err(Error::InvalidArgument("k_iters must be >= 1".into()));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidArgument("gamma must be finite".into()));
        }
        Ok(())
    }
}

/// Anything that can be evaluated and differentiated with respect to its
/// input. Implemented by MLPs and by closed-form test functions.
pub trait DifferentiableMap {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    /// Gradient of `sum_j d_out[j] * f_j(x)` with respect to `x`.
    fn vjp(&self, x: &[f64], d_out: &[f64]) -> Vec<f64>;

    /// Gradient of one output coordinate.
    fn input_gradient_coord(&self, x: &[f64], coord: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.output_dim()];
        e[coord] = 1.0;
        self.vjp(x, &e)
    }
}

/// An MLP viewed as a differentiable map.
pub struct MlpFunction<'a> {
    pub spec: &'a MlpSpec,
    pub params: &'a ParamVector,
}

impl DifferentiableMap for MlpFunction<'_> {
    fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let t = Tensor::new(vec![1, x.len()], x.to_vec()).expect("finite input point");
        let cache = forward_cached(self.spec, self.params, &t).expect("matching input width");
        cache.logits().to_vec()
    }

    fn vjp(&self, x: &[f64], d_out: &[f64]) -> Vec<f64> {
        let t = Tensor::new(vec![1, x.len()], x.to_vec()).expect("finite input point");
        let cache = forward_cached(self.spec, self.params, &t).expect("matching input width");
        let (_, d_input) = backward_from_dlogits(self.spec, self.params, &cache, d_out, false);
        d_input
    }
}

fn dy_value(kind: DyKind, out1: &[f64], out2: &[f64]) -> Result<f64> {
    match kind {
        DyKind::KlSoftmax => {
            kl_divergence(&softmax_unchecked(out1), &softmax_unchecked(out2))
        }
        DyKind::L2Logits => l2_distance(out1, out2),
    }
}

/// d_Y(f(x1), f(x2)) / d_X(x1, x2) under the configured metrics.
pub fn lipschitz_ratio(
    map: &dyn DifferentiableMap,
    x1: &[f64],
    x2: &[f64],
    kind: DyKind,
) -> Result<f64> {
    let dx = l2_distance(x1, x2)?;
    if dx < 1e-12 {
        return Err(Error::CoincidentPoints);
    }
    Ok(dy_value(kind, &map.eval(x1), &map.eval(x2))? / dx)
}

/// Per-row gradient of d_Y(reference, model output at z2) with respect to
/// z2, for the power-iteration objective. The reference side is constant.
fn dy_grad_wrt_second(kind: DyKind, reference: &[f64], z2: &[f64]) -> Vec<f64> {
    match kind {
        // reference = softmax(f(x)); objective KL(p_ref || softmax(z2))
        DyKind::KlSoftmax => kl_ref_row(z2, reference).1,
        // reference = f(x); the gradient of 0.5 * |z2 - ref|^2 shares the
        // direction of the gradient of |z2 - ref| and never divides by zero
        DyKind::L2Logits => z2.iter().zip(reference).map(|(&a, &b)| a - b).collect(),
    }
}

/// Adversarial perturbation by power iteration: per batch row, the direction
/// that (approximately) maximizes the Lipschitz ratio at that point, scaled
/// to length `eps_r`.
///
/// A row whose objective gradient vanishes is re-randomized once; a second
/// zero gradient (a constant model, in practice) is an error.
pub fn adv_perturbation(
    spec: &MlpSpec,
    params: &ParamVector,
    x_batch: &Tensor,
    cfg: &AlpConfig,
    rng: &mut RngState,
) -> Result<Tensor> {
    cfg.validate()?;
    let b = x_batch.n_rows();
    let d = x_batch.n_cols();
    let s = spec.output_dim();

    let mut directions = vec![0.0; b * d];
    for r in 0..b {
        random_unit_row(&mut directions[r * d..(r + 1) * d], rng);
    }

    // Constant reference side, computed once.
    let base = forward_cached(spec, params, x_batch)?;
    let references: Vec<Vec<f64>> = (0..b)
        .map(|r| {
            let z = &base.logits()[r * s..(r + 1) * s];
            match cfg.d_y_kind {
                DyKind::KlSoftmax => softmax_unchecked(z),
                DyKind::L2Logits => z.to_vec(),
            }
        })
        .collect();

    let mut retried = vec![false; b];
    let mut iters_done = 0;
    while iters_done < cfg.k_iters {
        let mut probe = x_batch.clone();
        for (i, v) in probe.data_mut().iter_mut().enumerate() {
            *v += cfg.xi * directions[i];
        }
        let cache = forward_cached(spec, params, &probe)?;
        let mut d_logits = vec![0.0; b * s];
        for r in 0..b {
            let z2 = &cache.logits()[r * s..(r + 1) * s];
            let g = dy_grad_wrt_second(cfg.d_y_kind, &references[r], z2);
            d_logits[r * s..(r + 1) * s].copy_from_slice(&g);
        }
        let (_, grad) = backward_from_dlogits(spec, params, &cache, &d_logits, false);

        let mut rerun = false;
        for r in 0..b {
            let row = &grad[r * d..(r + 1) * d];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-150 {
                if retried[r] {
                    return Err(Error::DegenerateGradient);
                }
                random_unit_row(&mut directions[r * d..(r + 1) * d], rng);
                retried[r] = true;
                rerun = true;
            } else {
                for (dst, &v) in directions[r * d..(r + 1) * d].iter_mut().zip(row) {
                    *dst = v / norm;
                }
            }
        }
        if !rerun {
            iters_done += 1;
        }
    }

    for v in &mut directions {
        *v *= cfg.eps_r;
    }
    Tensor::new(vec![b, d], directions)
}

fn random_unit_row(row: &mut [f64], rng: &mut RngState) {
    loop {
        for v in row.iter_mut() {
            *v = rng.next_gaussian();
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-150 {
            for v in row.iter_mut() {
                *v /= norm;
            }
            return;
        }
    }
}

/// KL(p || q~) from logits z1 (p side) and z2 (floored q side), together
/// with its gradients with respect to both logit rows.
fn kl_softmax_value_and_grads(z1: &[f64], z2: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let p = softmax_unchecked(z1);
    let q = softmax_unchecked(z2);
    let mut value = 0.0;
    let mut a = vec![0.0; p.len()]; // log p_i - log q~_i where p_i > 0
    for i in 0..p.len() {
        if p[i] > 0.0 {
            a[i] = p[i].ln() - q[i].max(KL_FLOOR).ln();
            value += p[i] * a[i];
        }
    }
    let g1: Vec<f64> = p.iter().zip(&a).map(|(&pi, &ai)| pi * (ai - value)).collect();
    let p_live: f64 = p.iter().zip(&q).filter(|(_, &qi)| qi > KL_FLOOR).map(|(&pi, _)| pi).sum();
    let g2: Vec<f64> = q
        .iter()
        .zip(&p)
        .map(|(&qi, &pi)| qi * p_live - if qi > KL_FLOOR { pi } else { 0.0 })
        .collect();
    (value, g1, g2)
}

fn l2_logits_value_and_grads(z1: &[f64], z2: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let diff: Vec<f64> = z1.iter().zip(z2).map(|(&a, &b)| a - b).collect();
    let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (0.0, vec![0.0; z1.len()], vec![0.0; z1.len()]);
    }
    let g1: Vec<f64> = diff.iter().map(|&v| v / norm).collect();
    let g2: Vec<f64> = g1.iter().map(|&v| -v).collect();
    (norm, g1, g2)
}

/// Mean over rows of (d_Y(f(x), f(x + r)) / d_X(x, x + r) - gamma); the
/// printed penalty, unsquared unless `cfg.squared`.
pub fn alp_loss(
    spec: &MlpSpec,
    params: &ParamVector,
    x_batch: &Tensor,
    r_adv: &Tensor,
    cfg: &AlpConfig,
) -> Result<f64> {
    Ok(alp_loss_impl(spec, params, x_batch, r_adv, cfg, false)?.0)
}

/// [`alp_loss`] plus its gradient with respect to the parameters; gradient
/// flows through both forward passes while `r_adv` stays constant.
pub fn alp_loss_and_grads(
    spec: &MlpSpec,
    params: &ParamVector,
    x_batch: &Tensor,
    r_adv: &Tensor,
    cfg: &AlpConfig,
) -> Result<(f64, Vec<f64>)> {
    let (loss, grads) = alp_loss_impl(spec, params, x_batch, r_adv, cfg, true)?;
    Ok((loss, grads.expect("requested gradients")))
}

fn alp_loss_impl(
    spec: &MlpSpec,
    params: &ParamVector,
    x_batch: &Tensor,
    r_adv: &Tensor,
    cfg: &AlpConfig,
    want_grads: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if x_batch.shape() != r_adv.shape() {
        return Err(Error::ShapeMismatch {
            expected: x_batch.shape().to_vec(),
            got: r_adv.shape().to_vec(),
        });
    }
    let b = x_batch.n_rows();
    let s = spec.output_dim();
    let mut perturbed = x_batch.clone();
    for (v, &r) in perturbed.data_mut().iter_mut().zip(r_adv.data()) {
        *v += r;
    }
    let cache1 = forward_cached(spec, params, x_batch)?;
    let cache2 = forward_cached(spec, params, &perturbed)?;

    let mut loss = 0.0;
    let mut d_logits1 = vec![0.0; b * s];
    let mut d_logits2 = vec![0.0; b * s];
    for r in 0..b {
        let dx = r_adv.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
        if dx < 1e-12 {
            return Err(Error::InvalidArgument(format!("r_adv row {r} is (nearly) zero")));
        }
        let z1 = &cache1.logits()[r * s..(r + 1) * s];
        let z2 = &cache2.logits()[r * s..(r + 1) * s];
        let (dy, g1, g2) = match cfg.d_y_kind {
            DyKind::KlSoftmax => kl_softmax_value_and_grads(z1, z2),
            DyKind::L2Logits => l2_logits_value_and_grads(z1, z2),
        };
        let ratio = dy / dx;
        let (term, chain) = if cfg.squared {
            let t = ratio - cfg.gamma;
            (t * t, 2.0 * t / dx)
        } else {
            (ratio - cfg.gamma, 1.0 / dx)
        };
        loss += term / b as f64;
        if want_grads {
            let scale = chain / b as f64;
            for j in 0..s {
                d_logits1[r * s + j] = g1[j] * scale;
                d_logits2[r * s + j] = g2[j] * scale;
            }
        }
    }

    if !want_grads {
        return Ok((loss, None));
    }
    let (mut d_params, _) = backward_from_dlogits(spec, params, &cache1, &d_logits1, true);
    let (d_params2, _) = backward_from_dlogits(spec, params, &cache2, &d_logits2, true);
    for (a, b) in d_params.iter_mut().zip(d_params2) {
        *a += b;
    }
    Ok((loss, Some(d_params)))
}

/// Mean over rows of (|grad_x s(x)|_2 - target)^2, where s is the max-logit
/// scalar head.
pub fn gradient_penalty(
    spec: &MlpSpec,
    params: &ParamVector,
    x_batch: &Tensor,
    target_norm: f64,
) -> Result<f64> {
    Ok(gradient_penalty_parts(spec, params, x_batch)?
        .iter()
        .map(|(norm, _)| {
            let t = norm - target_norm;
            t * t
        })
        .sum::<f64>()
        / x_batch.n_rows() as f64)
}

/// Per-row (gradient norm, gradient) of the max-logit head.
fn gradient_penalty_parts(
    spec: &MlpSpec,
    params: &ParamVector,
    x_batch: &Tensor,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let b = x_batch.n_rows();
    let d = x_batch.n_cols();
    let s = spec.output_dim();
    let cache = forward_cached(spec, params, x_batch)?;
    let mut d_logits = vec![0.0; b * s];
    for r in 0..b {
        let z = &cache.logits()[r * s..(r + 1) * s];
        let argmax = z
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        d_logits[r * s + argmax] = 1.0;
    }
    let (_, grad) = backward_from_dlogits(spec, params, &cache, &d_logits, false);
    Ok((0..b)
        .map(|r| {
            let row = grad[r * d..(r + 1) * d].to_vec();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm, row)
        })
        .collect())
}

/// Gradient penalty value plus its parameter gradient.
///
/// The parameter gradient needs the mixed second derivative
/// d/dtheta (grad_x s . v); it is evaluated as a directional derivative of
/// the parameter gradient by central differences over a shifted batch (the
/// finite-difference Hessian-vector product), costing two extra backward
/// passes.
pub fn gradient_penalty_and_grads(
    spec: &MlpSpec,
    params: &ParamVector,
    x_batch: &Tensor,
    target_norm: f64,
) -> Result<(f64, Vec<f64>)> {
    let b = x_batch.n_rows();
    let d = x_batch.n_cols();
    let s = spec.output_dim();
    let parts = gradient_penalty_parts(spec, params, x_batch)?;
    let loss = parts
        .iter()
        .map(|(norm, _)| {
            let t = norm - target_norm;
            t * t
        })
        .sum::<f64>()
        / b as f64;

    // v_b = 2 (|g_b| - target) g_b / |g_b|; rows with zero gradient take the
    // zero subgradient and drop out.
    let mut v = vec![0.0; b * d];
    let mut vmax = 0.0f64;
    for (r, (norm, g)) in parts.iter().enumerate() {
        if *norm > 0.0 {
            let coef = 2.0 * (norm - target_norm) / norm;
            for (dst, &gi) in v[r * d..(r + 1) * d].iter_mut().zip(g) {
                *dst = coef * gi;
                vmax = vmax.max(dst.abs());
            }
        }
    }
    if vmax == 0.0 {
        return Ok((loss, vec![0.0; spec.param_count()]));
    }

    // Fixed argmax selection from the base point keeps the shifted
    // evaluations on the same smooth branch.
    let cache = forward_cached(spec, params, x_batch)?;
    let mut d_logits = vec![0.0; b * s];
    for r in 0..b {
        let z = &cache.logits()[r * s..(r + 1) * s];
        let argmax = z
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        d_logits[r * s + argmax] = 1.0;
    }

    let h = 1e-4 / (1.0 + vmax);
    let mut shifted = x_batch.clone();
    for (dst, &vi) in shifted.data_mut().iter_mut().zip(&v) {
        *dst += h * vi;
    }
    let cache_plus = forward_cached(spec, params, &shifted)?;
    let (g_plus, _) = backward_from_dlogits(spec, params, &cache_plus, &d_logits, true);
    for (dst, (&xi, &vi)) in shifted.data_mut().iter_mut().zip(x_batch.data().iter().zip(&v)) {
        *dst = xi - h * vi;
    }
    let cache_minus = forward_cached(spec, params, &shifted)?;
    let (g_minus, _) = backward_from_dlogits(spec, params, &cache_minus, &d_logits, true);

    let scale = 1.0 / (2.0 * h * b as f64);
    let grads = g_plus
        .iter()
        .zip(&g_minus)
        .map(|(&p, &m)| (p - m) * scale)
        .collect();
    Ok((loss, grads))
}

/// Pair generator over the data domain: the data bounding box inflated 20%,
/// actual data points, and epsilon-close pairs at distance 1e-3.
#[derive(Debug, Clone)]
pub struct DomainSampler {
    points: Tensor,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DomainSampler {
    pub fn from_data(points: &Tensor) -> Result<Self> {
        if points.n_rows() == 0 {
            return Err(Error::EmptyInput("domain sampler data"));
        }
        let d = points.n_cols();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for r in 0..points.n_rows() {
            for (j, &v) in points.row(r).iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        for j in 0..d {
            let range = hi[j] - lo[j];
            let pad = if range > 0.0 { 0.2 * range } else { 0.2 };
            lo[j] -= pad;
            hi[j] += pad;
        }
        Ok(Self { points: points.clone(), lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.points.n_cols()
    }

    pub fn box_point(&self, rng: &mut RngState) -> Vec<f64> {
        (0..self.dim()).map(|j| rng.uniform(self.lo[j], self.hi[j])).collect()
    }

    pub fn data_point(&self, rng: &mut RngState) -> Vec<f64> {
        self.points.row(rng.index(self.points.n_rows())).to_vec()
    }

    /// The i-th pair rotates through box-box, data-data, and close pairs
    /// (x, x + delta) with |delta| = 1e-3.
    pub fn sample_pair(&self, i: usize, rng: &mut RngState) -> (Vec<f64>, Vec<f64>) {
        match i % 3 {
            0 => (self.box_point(rng), self.box_point(rng)),
            1 => (self.data_point(rng), self.data_point(rng)),
            _ => {
                let x = if i.is_multiple_of(2) { self.box_point(rng) } else { self.data_point(rng) };
                let mut delta = vec![0.0; self.dim()];
                random_unit_row(&mut delta, rng);
                let close: Vec<f64> =
                    x.iter().zip(&delta).map(|(&xi, &di)| xi + 1e-3 * di).collect();
                (x, close)
            }
        }
    }
}

/// Monte-Carlo lower estimate of the function Lipschitz constant: the max
/// ratio over sampled pairs.
#[derive(Debug, Clone)]
pub struct FunctionLipschitzEstimate {
    pub k_hat: f64,
    pub n_pairs: usize,
    pub max_ratio_pair: (Vec<f64>, Vec<f64>),
}

pub fn estimate_function_lipschitz(
    map: &dyn DifferentiableMap,
    sampler: &DomainSampler,
    kind: DyKind,
    n_pairs: usize,
    rng: &mut RngState,
) -> Result<FunctionLipschitzEstimate> {
    if n_pairs == 0 {
        return Err(Error::InvalidArgument("n_pairs must be >= 1".into()));
    }
    let mut k_hat = 0.0;
    let mut max_pair = (vec![0.0; sampler.dim()], vec![0.0; sampler.dim()]);
    for i in 0..n_pairs {
        let (x1, x2) = sampler.sample_pair(i, rng);
        match lipschitz_ratio(map, &x1, &x2, kind) {
            Ok(ratio) => {
                if ratio > k_hat {
                    k_hat = ratio;
                    max_pair = (x1, x2);
                }
            }
            Err(Error::CoincidentPoints) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(FunctionLipschitzEstimate { k_hat, n_pairs, max_ratio_pair: max_pair })
}

/// Monte-Carlo lower estimate of the Lipschitz constant of the gradient
/// function: max over sampled pairs and output coordinates of
/// |grad f_j(x1) - grad f_j(x2)| / |x1 - x2|.
pub fn estimate_gradient_lipschitz(
    map: &dyn DifferentiableMap,
    sampler: &DomainSampler,
    n_pairs: usize,
    rng: &mut RngState,
) -> Result<f64> {
    if n_pairs == 0 {
        return Err(Error::InvalidArgument("n_pairs must be >= 1".into()));
    }
    let mut l_hat = 0.0f64;
    for i in 0..n_pairs {
        let (x1, x2) = sampler.sample_pair(i, rng);
        let dx = l2_distance(&x1, &x2)?;
        if dx < 1e-12 {
            continue;
        }
        for j in 0..map.output_dim() {
            let g1 = map.input_gradient_coord(&x1, j);
            let g2 = map.input_gradient_coord(&x2, j);
            let dg = l2_distance(&g1, &g2)?;
            l_hat = l_hat.max(dg / dx);
        }
    }
    Ok(l_hat)
}

/// Summary of the sampled Lipschitz estimates.
#[derive(Debug, Clone)]
pub struct LipschitzReport {
    pub k_hat: f64,
    pub l_hat: f64,
    pub n_pairs: usize,
    pub max_ratio_pair: (Vec<f64>, Vec<f64>),
}

/// Per-coordinate signed margins LHS - RHS of the smoothness bound
/// f(a x1 + (1-a) x2) - (a f(x1) + (1-a) f(x2)) <= a(1-a)/2 * L |x1-x2|^2.
pub fn prop1_margins(
    map: &dyn DifferentiableMap,
    x1: &[f64],
    x2: &[f64],
    alpha: f64,
    l_hat: f64,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must be in [0,1], got {alpha}")));
    }
    let mixed: Vec<f64> =
        x1.iter().zip(x2).map(|(&a, &b)| alpha * a + (1.0 - alpha) * b).collect();
    let fm = map.eval(&mixed);
    let f1 = map.eval(x1);
    let f2 = map.eval(x2);
    let dx2 = l2_distance(x1, x2)?.powi(2);
    let rhs = alpha * (1.0 - alpha) * l_hat / 2.0 * dx2;
    Ok(fm
        .iter()
        .zip(f1.iter().zip(&f2))
        .map(|(&m, (&a, &b))| (m - (alpha * a + (1.0 - alpha) * b)) - rhs)
        .collect())
}

/// Result of the smoothness-bound audit over sampled triples.
#[derive(Debug, Clone)]
pub struct Prop1Report {
    pub n_triples: usize,
    /// Triples times output coordinates.
    pub n_checks: usize,
    pub violation_rate: f64,
    pub worst_margin: f64,
}

/// Samples (x1, x2, alpha) triples and reports how often the smoothness
/// bound is violated beyond a 1e-9 tolerance, per output coordinate.
pub fn prop1_audit(
    map: &dyn DifferentiableMap,
    sampler: &DomainSampler,
    l_hat: f64,
    n_triples: usize,
    rng: &mut RngState,
) -> Result<Prop1Report> {
    if n_triples == 0 {
        return Err(Error::InvalidArgument("n_triples must be >= 1".into()));
    }
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    let mut checks = 0usize;
    for i in 0..n_triples {
        let (x1, x2) = sampler.sample_pair(i, rng);
        let alpha = rng.next_f64();
        for margin in prop1_margins(map, &x1, &x2, alpha, l_hat)? {
            checks += 1;
            worst = worst.max(margin);
            if margin > 1e-9 {
                violations += 1;
            }
        }
    }
    Ok(Prop1Report {
        n_triples,
        n_checks: checks,
        violation_rate: violations as f64 / checks as f64,
        worst_margin: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, Activation};
    use crate::rng::sample_gaussian_vector;

    fn linear_model(w: &[f64], outputs: usize, inputs: usize) -> (MlpSpec, ParamVector) {
        let spec = MlpSpec::new(vec![inputs, outputs], Activation::Relu).unwrap();
        let mut values = w.to_vec();
        values.extend(vec![0.0; outputs]);
        let params = ParamVector::new(&spec, values).unwrap();
        (spec, params)
    }

    #[test]
    fn ratio_zero_for_constant_model() {
        let spec = MlpSpec::new(vec![2, 3, 2], Activation::Relu).unwrap();
        let params = ParamVector::zeros(&spec);
        let f = MlpFunction { spec: &spec, params: &params };
        for kind in [DyKind::KlSoftmax, DyKind::L2Logits] {
            let r = lipschitz_ratio(&f, &[0.0, 0.0], &[1.0, 2.0], kind).unwrap();
            assert_eq!(r, 0.0);
        }
        assert!(matches!(
            lipschitz_ratio(&f, &[1.0, 2.0], &[1.0, 2.0], DyKind::L2Logits),
            Err(Error::CoincidentPoints)
        ));
    }

    #[test]
    fn linear_scalar_ratio_bounded_by_weight_norm() {
        let w = [0.6, -0.8];
        let (spec, params) = linear_model(&w, 1, 2);
        let f = MlpFunction { spec: &spec, params: &params };
        let wnorm = (w[0] * w[0] + w[1] * w[1]).sqrt();
        let mut rng = RngState::new(1);
        for _ in 0..100 {
            let x1: Vec<f64> = sample_gaussian_vector(2, 1.0, &mut rng).unwrap();
            let x2: Vec<f64> = sample_gaussian_vector(2, 1.0, &mut rng).unwrap();
            if l2_distance(&x1, &x2).unwrap() < 1e-9 {
                continue;
            }
            let r = lipschitz_ratio(&f, &x1, &x2, DyKind::L2Logits).unwrap();
            assert!(r <= wnorm + 1e-12);
        }
        // equality when the difference is parallel to w
        let x1 = [0.0, 0.0];
        let x2 = [w[0], w[1]];
        let r = lipschitz_ratio(&f, &x1, &x2, DyKind::L2Logits).unwrap();
        assert!((r - wnorm).abs() < 1e-12);
    }

    #[test]
    fn ratio_matches_independent_metric_evaluation() {
        let spec = MlpSpec::new(vec![2, 5, 3], Activation::Tanh).unwrap();
        let params = init_params(&spec, &mut RngState::new(2));
        let f = MlpFunction { spec: &spec, params: &params };
        let x1 = [0.3, -0.7];
        let x2 = [-1.1, 0.4];
        let out1 = f.eval(&x1);
        let out2 = f.eval(&x2);
        let expected_kl = kl_divergence(
            &crate::numeric::softmax(&out1).unwrap(),
            &crate::numeric::softmax(&out2).unwrap(),
        )
        .unwrap()
            / l2_distance(&x1, &x2).unwrap();
        let got = lipschitz_ratio(&f, &x1, &x2, DyKind::KlSoftmax).unwrap();
        assert!((got - expected_kl).abs() < 1e-14);
    }

    #[test]
    fn scale_equivariance_of_logits_ratio() {
        // scaling the last layer by c scales the l2-logits ratio by c
        let spec = MlpSpec::new(vec![2, 4, 2], Activation::Relu).unwrap();
        let params = init_params(&spec, &mut RngState::new(3));
        let f = MlpFunction { spec: &spec, params: &params };
        let x1 = [0.2, 0.9];
        let x2 = [-0.4, 0.1];
        let base = lipschitz_ratio(&f, &x1, &x2, DyKind::L2Logits).unwrap();

        let c = 3.5;
        let mut scaled_values = params.as_slice().to_vec();
        let last_layer_len = 4 * 2 + 2;
        let off = scaled_values.len() - last_layer_len;
        for v in &mut scaled_values[off..] {
            *v *= c;
        }
        let scaled = ParamVector::new(&spec, scaled_values).unwrap();
        let fs = MlpFunction { spec: &spec, params: &scaled };
        let got = lipschitz_ratio(&fs, &x1, &x2, DyKind::L2Logits).unwrap();
        assert!((got - c * base).abs() <= 1e-12 * got.abs().max(1.0));
    }

    /// Random matrix with orthonormal columns via Gram-Schmidt.
    fn random_orthonormal(n: usize, rng: &mut RngState) -> Vec<Vec<f64>> {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        while cols.len() < n {
            let mut v = sample_gaussian_vector(n, 1.0, rng).unwrap();
            for c in &cols {
                let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= dot * ci;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                v.iter_mut().for_each(|x| *x /= norm);
                cols.push(v);
            }
        }
        cols
    }

    /// W = sum_k s_k u_k v_k^T with a known singular structure; returns
    /// (row-major W, sigma_max, top right-singular vector). The spectrum is
    /// built with a firm gap (sigma_2 <= 0.67 sigma_max) so 25 power
    /// iterations converge far past the 0.999 cosine requirement.
    fn constructed_map(
        outputs: usize,
        inputs: usize,
        rng: &mut RngState,
    ) -> (Vec<f64>, f64, Vec<f64>) {
        let k = outputs.min(inputs);
        let u = random_orthonormal(outputs, rng);
        let v = random_orthonormal(inputs, rng);
        let mut s = vec![0.0; k];
        s[0] = 1.0 + rng.next_f64(); // sigma_max in [1, 2)
        for i in 1..k {
            s[i] = s[0] / 1.5f64.powi(i as i32) * (0.8 + 0.2 * rng.next_f64());
        }
        let mut w = vec![0.0; outputs * inputs];
        for kk in 0..k {
            for o in 0..outputs {
                for i in 0..inputs {
                    w[o * inputs + i] += s[kk] * u[kk][o] * v[kk][i];
                }
            }
        }
        (w, s[0], v[0].clone())
    }

    #[test]
    fn power_iteration_recovers_top_singular_direction() {
        let mut rng = RngState::new(40);
        for case in 0..10 {
            let outputs = 2 + rng.index(7);
            let inputs = 2 + rng.index(7);
            let (w, sigma_max, v1) = constructed_map(outputs, inputs, &mut rng);
            let (spec, params) = linear_model(&w, outputs, inputs);
            let x = Tensor::from_rows(&[sample_gaussian_vector(inputs, 1.0, &mut rng).unwrap()])
                .unwrap();
            let cfg = AlpConfig {
                eps_r: 0.25,
                k_iters: 25,
                d_y_kind: DyKind::L2Logits,
                ..Default::default()
            };
            let r = adv_perturbation(&spec, &params, &x, &cfg, &mut rng).unwrap();
            let row = r.row(0);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - cfg.eps_r).abs() <= 1e-12, "case {case}: |r| = {norm}");
            let cos: f64 = row.iter().zip(&v1).map(|(a, b)| a * b).sum::<f64>() / cfg.eps_r;
            assert!(cos.abs() >= 0.999, "case {case}: cos {cos}");

            let f = MlpFunction { spec: &spec, params: &params };
            let x_adv: Vec<f64> = x.row(0).iter().zip(row).map(|(a, b)| a + b).collect();
            let ratio = lipschitz_ratio(&f, x.row(0), &x_adv, DyKind::L2Logits).unwrap();
            assert!(
                (ratio - sigma_max).abs() <= 1e-3 * sigma_max,
                "case {case}: ratio {ratio} vs {sigma_max}"
            );
        }
    }

    #[test]
    fn power_iteration_single_step_not_better_than_converged() {
        // Rayleigh-quotient growth: k=1 never beats k=25 on a linear map.
        // Bootstrap the mean difference over 100 seeds at the 99% level.
        let mut seed_rng = RngState::new(41);
        let (w, _, _) = constructed_map(4, 4, &mut seed_rng);
        let (spec, params) = linear_model(&w, 4, 4);
        let f = MlpFunction { spec: &spec, params: &params };
        let mut diffs = Vec::with_capacity(100);
        for seed in 0..100u64 {
            let mut rng = RngState::new(seed);
            let x =
                Tensor::from_rows(&[sample_gaussian_vector(4, 1.0, &mut rng).unwrap()]).unwrap();
            let ratio_for = |k: usize| {
                let cfg = AlpConfig {
                    eps_r: 0.3,
                    k_iters: k,
                    d_y_kind: DyKind::L2Logits,
                    ..Default::default()
                };
                let mut prng = RngState::new(seed ^ 0xABCD);
                let r = adv_perturbation(&spec, &params, &x, &cfg, &mut prng).unwrap();
                let x_adv: Vec<f64> =
                    x.row(0).iter().zip(r.row(0)).map(|(a, b)| a + b).collect();
                lipschitz_ratio(&f, x.row(0), &x_adv, DyKind::L2Logits).unwrap()
            };
            diffs.push(ratio_for(1) - ratio_for(25));
        }
        let mut boot_rng = RngState::new(99);
        let mut means: Vec<f64> = (0..1000)
            .map(|_| {
                (0..diffs.len()).map(|_| diffs[boot_rng.index(diffs.len())]).sum::<f64>()
                    / diffs.len() as f64
            })
            .collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q99 = means[989];
        assert!(q99 <= 1e-12, "k=1 beat k=25 at the 99% level: {q99}");
    }

    #[test]
    fn perturbation_errors_for_constant_model() {
        let spec = MlpSpec::new(vec![2, 2], Activation::Relu).unwrap();
        let params = ParamVector::zeros(&spec);
        let x = Tensor::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let cfg = AlpConfig::default();
        let err = adv_perturbation(&spec, &params, &x, &cfg, &mut RngState::new(0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateGradient));
    }

    #[test]
    fn alp_loss_zero_for_constant_model() {
        let spec = MlpSpec::new(vec![2, 3, 2], Activation::Tanh).unwrap();
        let params = ParamVector::zeros(&spec);
        let x = Tensor::from_rows(&[vec![0.1, 0.2], vec![1.0, -1.0]]).unwrap();
        let r = Tensor::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let loss = alp_loss(&spec, &params, &x, &r, &AlpConfig::default()).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn alp_loss_scale_free_for_linear_model() {
        // For linear maps the ratio is homogeneous in eps_r.
        let mut rng = RngState::new(42);
        let (w, _, _) = constructed_map(3, 2, &mut rng);
        let (spec, params) = linear_model(&w, 3, 2);
        let x = Tensor::from_rows(&[vec![0.4, -0.2]]).unwrap();
        let mut losses = Vec::new();
        for eps_r in [0.1, 0.5, 2.0] {
            let cfg = AlpConfig { eps_r, d_y_kind: DyKind::L2Logits, ..Default::default() };
            let mut dir_rng = RngState::new(7);
            let mut dir = vec![0.0; 2];
            super::random_unit_row(&mut dir, &mut dir_rng);
            let r = Tensor::from_rows(&[dir.iter().map(|v| v * eps_r).collect::<Vec<f64>>()])
                .unwrap();
            losses.push(alp_loss(&spec, &params, &x, &r, &cfg).unwrap());
        }
        assert!((losses[0] - losses[1]).abs() < 1e-12);
        assert!((losses[1] - losses[2]).abs() < 1e-12);
    }

    #[test]
    fn alp_loss_matches_two_forward_evaluation() {
        let spec = MlpSpec::new(vec![2, 6, 3], Activation::Relu).unwrap();
        let params = init_params(&spec, &mut RngState::new(43));
        let x = Tensor::from_rows(&[vec![0.3, 0.3], vec![-0.8, 1.2]]).unwrap();
        let cfg = AlpConfig::default();
        let r = adv_perturbation(&spec, &params, &x, &cfg, &mut RngState::new(5)).unwrap();
        let loss = alp_loss(&spec, &params, &x, &r, &cfg).unwrap();

        // independent: two forwards plus the numeric metrics
        let f = MlpFunction { spec: &spec, params: &params };
        let mut expected = 0.0;
        for b in 0..2 {
            let x1 = x.row(b);
            let x2: Vec<f64> = x1.iter().zip(r.row(b)).map(|(a, c)| a + c).collect();
            let p = crate::numeric::softmax(&f.eval(x1)).unwrap();
            let q = crate::numeric::softmax(&f.eval(&x2)).unwrap();
            let dy = kl_divergence(&p, &q).unwrap();
            let dx = l2_distance(x1, &x2).unwrap();
            expected += (dy / dx - cfg.gamma) / 2.0;
        }
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
        assert!(loss >= 0.0);
    }

    #[test]
    fn alp_gradient_matches_finite_differences() {
        let spec = MlpSpec::new(vec![2, 5, 2], Activation::Tanh).unwrap();
        let params = init_params(&spec, &mut RngState::new(44));
        let x = Tensor::from_rows(&[vec![0.2, -0.4], vec![0.9, 0.6]]).unwrap();
        for kind in [DyKind::KlSoftmax, DyKind::L2Logits] {
            for squared in [false, true] {
                let cfg = AlpConfig { d_y_kind: kind, squared, ..Default::default() };
                let r =
                    adv_perturbation(&spec, &params, &x, &cfg, &mut RngState::new(6)).unwrap();
                let (_, grads) = alp_loss_and_grads(&spec, &params, &x, &r, &cfg).unwrap();
                let h = 1e-6;
                for i in (0..params.len()).step_by(3) {
                    let mut plus = params.as_slice().to_vec();
                    plus[i] += h;
                    let mut minus = params.as_slice().to_vec();
                    minus[i] -= h;
                    let lp =
                        alp_loss(&spec, &ParamVector::new(&spec, plus).unwrap(), &x, &r, &cfg)
                            .unwrap();
                    let lm =
                        alp_loss(&spec, &ParamVector::new(&spec, minus).unwrap(), &x, &r, &cfg)
                            .unwrap();
                    let fd = (lp - lm) / (2.0 * h);
                    assert!(
                        (grads[i] - fd).abs() <= 1e-6 * grads[i].abs().max(fd.abs()).max(1e-4),
                        "kind {kind:?} squared {squared} param {i}: {} vs {fd}",
                        grads[i]
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_penalty_analytic_cases() {
        // constant model, target 0 -> 0
        let spec = MlpSpec::new(vec![2, 2], Activation::Relu).unwrap();
        let params = ParamVector::zeros(&spec);
        let x = Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert_eq!(gradient_penalty(&spec, &params, &x, 0.0).unwrap(), 0.0);

        // linear scalar model: penalty(target 0) = |w|^2
        let w = [1.2, -0.5];
        let (spec, params) = linear_model(&w, 1, 2);
        let got = gradient_penalty(&spec, &params, &x, 0.0).unwrap();
        let wnorm2 = w[0] * w[0] + w[1] * w[1];
        assert!((got - wnorm2).abs() < 1e-12);
    }

    #[test]
    fn gradient_penalty_input_grad_matches_finite_differences() {
        let spec = MlpSpec::new(vec![2, 6, 3], Activation::Tanh).unwrap();
        let params = init_params(&spec, &mut RngState::new(45));
        let x0 = [0.37, -0.81];
        let f = MlpFunction { spec: &spec, params: &params };
        let argmax = {
            let out = f.eval(&x0);
            out.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0
        };
        let h = 1e-5;
        let mut fd = [0.0; 2];
        for (i, slot) in fd.iter_mut().enumerate() {
            let mut p = x0;
            p[i] += h;
            let mut m = x0;
            m[i] -= h;
            *slot = (f.eval(&p)[argmax] - f.eval(&m)[argmax]) / (2.0 * h);
        }
        let parts =
            gradient_penalty_parts(&spec, &params, &Tensor::from_rows(&[x0.to_vec()]).unwrap())
                .unwrap();
        for (i, &fdi) in fd.iter().enumerate() {
            let rel = (parts[0].1[i] - fdi).abs() / fdi.abs().max(1e-4);
            assert!(rel <= 1e-6, "coord {i}: {} vs {}", parts[0].1[i], fdi);
        }
    }

    #[test]
    fn gradient_penalty_param_grads_match_finite_differences() {
        let spec = MlpSpec::new(vec![2, 4, 2], Activation::Tanh).unwrap();
        let params = init_params(&spec, &mut RngState::new(46));
        let x = Tensor::from_rows(&[vec![0.5, 0.1], vec![-0.3, 0.7]]).unwrap();
        let (_, grads) = gradient_penalty_and_grads(&spec, &params, &x, 0.0).unwrap();
        let h = 1e-5;
        for i in (0..params.len()).step_by(2) {
            let mut plus = params.as_slice().to_vec();
            plus[i] += h;
            let mut minus = params.as_slice().to_vec();
            minus[i] -= h;
            let lp = gradient_penalty(&spec, &ParamVector::new(&spec, plus).unwrap(), &x, 0.0)
                .unwrap();
            let lm = gradient_penalty(&spec, &ParamVector::new(&spec, minus).unwrap(), &x, 0.0)
                .unwrap();
            let fd = (lp - lm) / (2.0 * h);
            // the parameter gradient itself is a finite-difference HVP; allow
            // its O(h^2) truncation on top of the outer FD noise
            assert!(
                (grads[i] - fd).abs() <= 1e-4 * grads[i].abs().max(fd.abs()).max(1e-2),
                "param {i}: {} vs {fd}",
                grads[i]
            );
        }
    }

    #[test]
    fn function_lipschitz_estimator_on_linear_model() {
        let w = [0.9, -1.1];
        let (spec, params) = linear_model(&w, 1, 2);
        let f = MlpFunction { spec: &spec, params: &params };
        let wnorm = (w[0] * w[0] + w[1] * w[1]).sqrt();
        let data = Tensor::from_rows(&[vec![-1.0, -1.0], vec![1.0, 1.0]]).unwrap();
        let sampler = DomainSampler::from_data(&data).unwrap();
        let est = estimate_function_lipschitz(
            &f,
            &sampler,
            DyKind::L2Logits,
            100_000,
            &mut RngState::new(47),
        )
        .unwrap();
        assert!(est.k_hat <= wnorm + 1e-12);
        assert!(est.k_hat >= 0.98 * wnorm, "k_hat {} vs |w| {wnorm}", est.k_hat);
    }

    #[test]
    fn function_lipschitz_monotone_in_pairs() {
        let spec = MlpSpec::new(vec![2, 5, 2], Activation::Relu).unwrap();
        let params = init_params(&spec, &mut RngState::new(48));
        let f = MlpFunction { spec: &spec, params: &params };
        let data = Tensor::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![-1.0, 0.5]]).unwrap();
        let sampler = DomainSampler::from_data(&data).unwrap();
        let mut last = 0.0;
        for n in [10, 100, 1000] {
            let est =
                estimate_function_lipschitz(&f, &sampler, DyKind::KlSoftmax, n, &mut RngState::new(3))
                    .unwrap();
            assert!(est.k_hat >= last);
            last = est.k_hat;
        }
        // constant model estimates zero
        let zero = ParamVector::zeros(&spec);
        let fz = MlpFunction { spec: &spec, params: &zero };
        let est =
            estimate_function_lipschitz(&fz, &sampler, DyKind::KlSoftmax, 100, &mut RngState::new(4))
                .unwrap();
        assert_eq!(est.k_hat, 0.0);
    }

    /// Quadratic scalar test head f(x) = 0.5 x^T A x with symmetric A.
    struct Quadratic {
        a: Vec<Vec<f64>>,
    }

    impl DifferentiableMap for Quadratic {
        fn input_dim(&self) -> usize {
            self.a.len()
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &[f64]) -> Vec<f64> {
            let mut v = 0.0;
            for (i, row) in self.a.iter().enumerate() {
                for (j, &aij) in row.iter().enumerate() {
                    v += 0.5 * x[i] * aij * x[j];
                }
            }
            vec![v]
        }
        fn vjp(&self, x: &[f64], d_out: &[f64]) -> Vec<f64> {
            // symmetric A: gradient = A x
            self.a
                .iter()
                .map(|row| d_out[0] * row.iter().zip(x).map(|(&a, &xi)| a * xi).sum::<f64>())
                .collect()
        }
    }

    #[test]
    fn gradient_lipschitz_estimator_oracles() {
        // linear model: gradient constant, l_hat = 0
        let (spec, params) = linear_model(&[1.0, 2.0], 1, 2);
        let f = MlpFunction { spec: &spec, params: &params };
        let data = Tensor::from_rows(&[vec![-1.0, -1.0], vec![1.0, 1.0]]).unwrap();
        let sampler = DomainSampler::from_data(&data).unwrap();
        let l = estimate_gradient_lipschitz(&f, &sampler, 500, &mut RngState::new(50)).unwrap();
        assert_eq!(l, 0.0);

        // quadratic with eigenvalues {3, 1} rotated 30 degrees: sigma_max = 3
        let th: f64 = std::f64::consts::FRAC_PI_6;
        let (s, c) = th.sin_cos();
        let a = vec![
            vec![3.0 * c * c + s * s, 2.0 * c * s],
            vec![2.0 * c * s, 3.0 * s * s + c * c],
        ];
        let q = Quadratic { a };
        let l =
            estimate_gradient_lipschitz(&q, &sampler, 20_000, &mut RngState::new(51)).unwrap();
        assert!(l <= 3.0 + 1e-9, "l_hat {l}");
        assert!(l >= 0.99 * 3.0, "l_hat {l}");

        // determinism under seed
        let l2 = estimate_gradient_lipschitz(&q, &sampler, 1000, &mut RngState::new(52)).unwrap();
        let l3 = estimate_gradient_lipschitz(&q, &sampler, 1000, &mut RngState::new(52)).unwrap();
        assert_eq!(l2.to_bits(), l3.to_bits());
    }

    #[test]
    fn prop1_linear_model_never_violates() {
        let (spec, params) = linear_model(&[0.5, -2.0, 1.0, 0.0, 0.25, -0.75], 3, 2);
        let f = MlpFunction { spec: &spec, params: &params };
        let data = Tensor::from_rows(&[vec![-2.0, -2.0], vec![2.0, 2.0]]).unwrap();
        let sampler = DomainSampler::from_data(&data).unwrap();
        let report = prop1_audit(&f, &sampler, 0.0, 2000, &mut RngState::new(53)).unwrap();
        assert_eq!(report.violation_rate, 0.0);
        assert!(report.worst_margin <= 1e-9);
        assert_eq!(report.n_checks, 2000 * 3);
    }

    #[test]
    fn prop1_endpoints_have_zero_margin() {
        let spec = MlpSpec::new(vec![2, 4, 2], Activation::Tanh).unwrap();
        let params = init_params(&spec, &mut RngState::new(54));
        let f = MlpFunction { spec: &spec, params: &params };
        for alpha in [0.0, 1.0] {
            let margins = prop1_margins(&f, &[0.3, 0.4], &[-0.5, 0.9], alpha, 5.0).unwrap();
            for m in margins {
                assert_eq!(m, 0.0);
            }
        }
    }
}
