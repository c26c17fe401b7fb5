//! Multilayer perceptron with reverse-mode differentiation.
//!
//! The network is a chain of affine layers with an activation on hidden
//! layers only; the last layer emits raw logits. Backpropagation produces
//! exact gradients with respect to both the parameters and the inputs; the
//! input gradient drives the adversarial-perturbation power iteration and
//! the FGSM attack.

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, softmax_unchecked, KL_FLOOR};
use crate::rng::RngState;
use crate::tensor::Tensor;

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            // Subgradient 0 at the kink: apply(0) pairs with derivative(0) = 0.
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    #[inline]
    fn derivative_from(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Architecture of an MLP: layer widths from input to output, plus the
/// hidden activation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    layer_widths: Vec<usize>,
    activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "layer_widths needs at least input and output entries".into(),
            ));
        }
        if layer_widths.contains(&0) {
            return Err(Error::InvalidArgument("all layer widths must be >= 1".into()));
        }
        Ok(Self { layer_widths, activation })
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.layer_widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    /// Total parameter count: per layer, `out*in` weights then `out` biases.
    pub fn param_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    /// Offset of layer `l`'s weight block in the flat parameter vector.
    fn layer_offset(&self, l: usize) -> usize {
        (0..l)
            .map(|k| self.layer_widths[k + 1] * self.layer_widths[k] + self.layer_widths[k + 1])
            .sum()
    }
}

/// Flat parameter vector in layer-major order (weights row-major, then bias).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    /// Wraps a flat vector, validating length against the spec and finiteness.
    pub fn new(spec: &MlpSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.param_count() {
            return Err(Error::DimensionMismatch {
                expected: spec.param_count(),
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self { values })
    }

    pub fn zeros(spec: &MlpSpec) -> Self {
        Self { values: vec![0.0; spec.param_count()] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// He-style initialization for relu, Glorot for tanh; biases zero.
pub fn init_params(spec: &MlpSpec, rng: &mut RngState) -> ParamVector {
    let mut values = vec![0.0; spec.param_count()];
    let mut off = 0;
    for w in spec.layer_widths.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let std = match spec.activation {
            Activation::Relu => (2.0 / fan_in as f64).sqrt(),
            Activation::Tanh => (2.0 / (fan_in + fan_out) as f64).sqrt(),
        };
        for v in &mut values[off..off + fan_out * fan_in] {
            *v = std * rng.next_gaussian();
        }
        off += fan_out * fan_in + fan_out; // biases stay zero
    }
    ParamVector { values }
}

/// Stored forward pass: inputs plus per-layer pre-activations and
/// activations, enough to backpropagate any d(logits).
pub(crate) struct ForwardCache {
    input: Vec<f64>,
    n_rows: usize,
    /// Pre-activations per layer, each `n_rows * width`.
    preacts: Vec<Vec<f64>>,
    /// Activations per layer (last layer's equals its pre-activation).
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub(crate) fn logits(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

fn check_input(spec: &MlpSpec, x: &Tensor) -> Result<()> {
    if x.shape().len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "forward expects a 2-D batch, got rank {}",
            x.shape().len()
        )));
    }
    if x.n_cols() != spec.input_dim() {
        return Err(Error::DimensionMismatch { expected: spec.input_dim(), got: x.n_cols() });
    }
    if x.n_rows() == 0 {
        return Err(Error::EmptyInput("forward batch"));
    }
    Ok(())
}

pub(crate) fn forward_cached(spec: &MlpSpec, params: &ParamVector, x: &Tensor) -> Result<ForwardCache> {
    check_input(spec, x)?;
    debug_assert_eq!(params.len(), spec.param_count());
    let b = x.n_rows();
    let n_layers = spec.n_layers();
    let mut preacts = Vec::with_capacity(n_layers);
    let mut acts = Vec::with_capacity(n_layers);
    let mut prev: &[f64] = x.data();
    let mut prev_w = spec.input_dim();
    let mut off = 0;
    for l in 0..n_layers {
        let out_w = spec.layer_widths[l + 1];
        let weights = &params.as_slice()[off..off + out_w * prev_w];
        let bias = &params.as_slice()[off + out_w * prev_w..off + out_w * prev_w + out_w];
        let mut z = vec![0.0; b * out_w];
        for r in 0..b {
            let xr = &prev[r * prev_w..(r + 1) * prev_w];
            let zr = &mut z[r * out_w..(r + 1) * out_w];
            zr.copy_from_slice(bias);
            for (i, &xi) in xr.iter().enumerate() {
                if xi != 0.0 {
                    for (o, zo) in zr.iter_mut().enumerate() {
                        *zo += weights[o * prev_w + i] * xi;
                    }
                }
            }
        }
        let a = if l + 1 < n_layers {
            z.iter().map(|&v| spec.activation.apply(v)).collect()
        } else {
            z.clone()
        };
        preacts.push(z);
        acts.push(a);
        off += out_w * prev_w + out_w;
        prev_w = out_w;
        prev = acts.last().unwrap();
    }
    Ok(ForwardCache { input: x.data().to_vec(), n_rows: b, preacts, acts })
}

/// Forward pass: `B x d` inputs to `B x S` logits.
pub fn forward(spec: &MlpSpec, params: &ParamVector, x: &Tensor) -> Result<Tensor> {
    let cache = forward_cached(spec, params, x)?;
    let out = Tensor::new(vec![cache.n_rows, spec.output_dim()], cache.logits().to_vec())?;
    out.debug_assert_finite("forward");
    Ok(out)
}

/// Gradients together with the loss value they belong to.
#[derive(Debug, Clone)]
pub struct GradBundle {
    pub d_params: ParamVector,
    pub d_input: Tensor,
    pub loss_value: f64,
}

/// Backpropagates `d_logits` (`B x S`, flat) through a cached forward pass.
///
/// Returns `(d_params, d_input)`; parameter gradients are skipped when
/// `want_params` is false.
pub(crate) fn backward_from_dlogits(
    spec: &MlpSpec,
    params: &ParamVector,
    cache: &ForwardCache,
    d_logits: &[f64],
    want_params: bool,
) -> (Vec<f64>, Vec<f64>) {
    let b = cache.n_rows;
    let n_layers = spec.n_layers();
    debug_assert_eq!(d_logits.len(), b * spec.output_dim());
    let mut d_params = vec![0.0; if want_params { spec.param_count() } else { 0 }];
    let mut delta = d_logits.to_vec();
    for l in (0..n_layers).rev() {
        let in_w = spec.layer_widths[l];
        let out_w = spec.layer_widths[l + 1];
        let off = spec.layer_offset(l);
        let weights = &params.as_slice()[off..off + out_w * in_w];
        let below: &[f64] = if l == 0 { &cache.input } else { &cache.acts[l - 1] };

        if want_params {
            let (dw, rest) = d_params[off..off + out_w * in_w + out_w].split_at_mut(out_w * in_w);
            for r in 0..b {
                let dr = &delta[r * out_w..(r + 1) * out_w];
                let ar = &below[r * in_w..(r + 1) * in_w];
                for (o, &d) in dr.iter().enumerate() {
                    if d != 0.0 {
                        rest[o] += d;
                        let wrow = &mut dw[o * in_w..(o + 1) * in_w];
                        for (i, &a) in ar.iter().enumerate() {
                            wrow[i] += d * a;
                        }
                    }
                }
            }
        }

        // Gradient w.r.t. the layer input, needed below layer 0 as d_input.
        let mut d_below = vec![0.0; b * in_w];
        for r in 0..b {
            let dr = &delta[r * out_w..(r + 1) * out_w];
            let dbr = &mut d_below[r * in_w..(r + 1) * in_w];
            for (o, &d) in dr.iter().enumerate() {
                if d != 0.0 {
                    let wrow = &weights[o * in_w..(o + 1) * in_w];
                    for (i, &w) in wrow.iter().enumerate() {
                        dbr[i] += d * w;
                    }
                }
            }
        }
        if l > 0 {
            let z = &cache.preacts[l - 1];
            let a = &cache.acts[l - 1];
            for (i, v) in d_below.iter_mut().enumerate() {
                *v *= spec.activation.derivative_from(z[i], a[i]);
            }
        }
        delta = d_below;
    }
    (d_params, delta)
}

/// Differentiable scalar objectives over the logits.
///
/// The three probability heads average over batch rows; `LogitSum` is a plain
/// sum (so a linear scalar model's input gradient is exactly its weights).
#[derive(Debug, Clone)]
pub enum LossHead<'a> {
    /// -mean_b sum_j t_bj log softmax(z_b)_j, soft targets on the simplex.
    CrossEntropySoft(&'a Tensor),
    /// mean_b |softmax(z_b) - t_b|^2.
    MeanSquaredProb(&'a Tensor),
    /// mean_b KL(r_b || softmax(z_b)) against a fixed reference.
    KlFromReference(&'a Tensor),
    /// sum_b sum_j z_bj.
    LogitSum,
}

impl LossHead<'_> {
    fn targets(&self) -> Option<&Tensor> {
        match self {
            LossHead::CrossEntropySoft(t)
            | LossHead::MeanSquaredProb(t)
            | LossHead::KlFromReference(t) => Some(t),
            LossHead::LogitSum => None,
        }
    }
}

/// Cross-entropy with soft targets on one row: value and d(value)/d(logits).
pub(crate) fn ce_soft_row(z: &[f64], t: &[f64]) -> (f64, Vec<f64>) {
    let lse = log_sum_exp(z);
    let p = softmax_unchecked(z);
    let t_sum: f64 = t.iter().sum();
    let loss = t.iter().zip(z).map(|(&ti, &zi)| ti * (lse - zi)).sum();
    let grad = p.iter().zip(t).map(|(&pi, &ti)| pi * t_sum - ti).collect();
    (loss, grad)
}

/// Squared L2 between softmax(z) and a target row: value and gradient.
pub(crate) fn msep_row(z: &[f64], t: &[f64]) -> (f64, Vec<f64>) {
    let p = softmax_unchecked(z);
    let diff: Vec<f64> = p.iter().zip(t).map(|(&pi, &ti)| pi - ti).collect();
    let loss = diff.iter().map(|d| d * d).sum();
    let s: f64 = diff.iter().zip(&p).map(|(&d, &pi)| d * pi).sum();
    let grad = p.iter().zip(&diff).map(|(&pi, &di)| 2.0 * pi * (di - s)).collect();
    (loss, grad)
}

/// KL(r || softmax(z)) with the same floor as [`crate::numeric::kl_divergence`].
///
/// The gradient accounts for the floor: floored coordinates stop receiving
/// the -r_j pull but still feel the normalization term.
pub(crate) fn kl_ref_row(z: &[f64], r: &[f64]) -> (f64, Vec<f64>) {
    let p = softmax_unchecked(z);
    let mut loss = 0.0;
    for (&ri, &pi) in r.iter().zip(&p) {
        if ri > 0.0 {
            loss += ri * (ri.ln() - pi.max(KL_FLOOR).ln());
        }
    }
    let r_live: f64 = r.iter().zip(&p).filter(|(_, &pi)| pi > KL_FLOOR).map(|(&ri, _)| ri).sum();
    let grad = p
        .iter()
        .zip(r)
        .map(|(&pi, &ri)| pi * r_live - if pi > KL_FLOOR { ri } else { 0.0 })
        .collect();
    (loss, grad)
}

/// Loss value plus exact reverse-mode gradients for parameters and inputs.
pub fn loss_and_grads(
    spec: &MlpSpec,
    params: &ParamVector,
    x: &Tensor,
    head: &LossHead,
) -> Result<GradBundle> {
    let cache = forward_cached(spec, params, x)?;
    let b = cache.n_rows;
    let s = spec.output_dim();
    if let Some(t) = head.targets() {
        if t.n_rows() != b || t.n_cols() != s {
            return Err(Error::ShapeMismatch {
                expected: vec![b, s],
                got: t.shape().to_vec(),
            });
        }
    }
    let logits = cache.logits();
    let mut loss = 0.0;
    let mut d_logits = vec![0.0; b * s];
    for r in 0..b {
        let z = &logits[r * s..(r + 1) * s];
        let (row_loss, row_grad, scale) = match head {
            LossHead::CrossEntropySoft(t) => {
                let (l, g) = ce_soft_row(z, t.row(r));
                (l, g, 1.0 / b as f64)
            }
            LossHead::MeanSquaredProb(t) => {
                let (l, g) = msep_row(z, t.row(r));
                (l, g, 1.0 / b as f64)
            }
            LossHead::KlFromReference(t) => {
                let (l, g) = kl_ref_row(z, t.row(r));
                (l, g, 1.0 / b as f64)
            }
            LossHead::LogitSum => (z.iter().sum(), vec![1.0; s], 1.0),
        };
        loss += row_loss * scale;
        for (dst, g) in d_logits[r * s..(r + 1) * s].iter_mut().zip(row_grad) {
            *dst = g * scale;
        }
    }
    let (d_params, d_input) = backward_from_dlogits(spec, params, &cache, &d_logits, true);
    let d_input = Tensor::new(x.shape().to_vec(), d_input)?;
    d_input.debug_assert_finite("loss_and_grads d_input");
    Ok(GradBundle {
        d_params: ParamVector { values: d_params },
        d_input,
        loss_value: loss,
    })
}

/// The input-gradient slice of [`loss_and_grads`], skipping parameter work.
pub fn input_gradient(
    spec: &MlpSpec,
    params: &ParamVector,
    x: &Tensor,
    head: &LossHead,
) -> Result<Tensor> {
    let cache = forward_cached(spec, params, x)?;
    let b = cache.n_rows;
    let s = spec.output_dim();
    if let Some(t) = head.targets() {
        if t.n_rows() != b || t.n_cols() != s {
            return Err(Error::ShapeMismatch { expected: vec![b, s], got: t.shape().to_vec() });
        }
    }
    let logits = cache.logits();
    let mut d_logits = vec![0.0; b * s];
    for r in 0..b {
        let z = &logits[r * s..(r + 1) * s];
        let (row_grad, scale): (Vec<f64>, f64) = match head {
            LossHead::CrossEntropySoft(t) => (ce_soft_row(z, t.row(r)).1, 1.0 / b as f64),
            LossHead::MeanSquaredProb(t) => (msep_row(z, t.row(r)).1, 1.0 / b as f64),
            LossHead::KlFromReference(t) => (kl_ref_row(z, t.row(r)).1, 1.0 / b as f64),
            LossHead::LogitSum => (vec![1.0; s], 1.0),
        };
        for (dst, g) in d_logits[r * s..(r + 1) * s].iter_mut().zip(row_grad) {
            *dst = g * scale;
        }
    }
    let (_, d_input) = backward_from_dlogits(spec, params, &cache, &d_logits, false);
    Tensor::new(x.shape().to_vec(), d_input)
}
