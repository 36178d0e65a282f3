//! Small fully connected networks with hand-written reverse mode: a ReLU MLP,
//! DeLU (pattern-generated output bias) and DNL (pattern-generated upper
//! layers via a hypernetwork).
//!
//! Parameters live in one flat `Vec<f64>` whose layout is derived from the
//! [`Architecture`]; gradients share that layout, which keeps optimizers and
//! checkpoints architecture-agnostic. Activation bits are treated as constants
//! when differentiating. A pre-activation of exactly zero counts as active.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "persuade-network/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Architecture {
    Relu {
        input: usize,
        hidden: Vec<usize>,
        output: usize,
    },
    /// The output-layer bias comes from an auxiliary ReLU net fed with the
    /// full activation pattern.
    Delu {
        input: usize,
        hidden: Vec<usize>,
        output: usize,
        aux_hidden: Vec<usize>,
    },
    /// The first `lower` hidden layers form an ordinary ReLU net; a
    /// hypernetwork maps their activation pattern to the weights and biases of
    /// all later layers.
    Dnl {
        input: usize,
        hidden: Vec<usize>,
        output: usize,
        lower: usize,
        hyper_hidden: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchKind {
    Relu,
    Delu,
    Dnl,
}

impl std::str::FromStr for ArchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(ArchKind::Relu),
            "delu" => Ok(ArchKind::Delu),
            "dnl" => Ok(ArchKind::Dnl),
            other => Err(Error::arg(format!(
                "unknown architecture '{other}' (relu|delu|dnl)"
            ))),
        }
    }
}

impl std::fmt::Display for ArchKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ArchKind::Relu => "relu",
            ArchKind::Delu => "delu",
            ArchKind::Dnl => "dnl",
        })
    }
}

impl Architecture {
    /// Three hidden layers of 64 units and a scalar output; DNL splits after
    /// the first layer with a 2×32 hypernetwork, DeLU uses a 2×32 auxiliary net.
    pub fn standard(kind: ArchKind, input: usize) -> Self {
        let hidden = vec![64, 64, 64];
        match kind {
            ArchKind::Relu => Architecture::Relu {
                input,
                hidden,
                output: 1,
            },
            ArchKind::Delu => Architecture::Delu {
                input,
                hidden,
                output: 1,
                aux_hidden: vec![32, 32],
            },
            ArchKind::Dnl => Architecture::Dnl {
                input,
                hidden,
                output: 1,
                lower: 1,
                hyper_hidden: vec![32, 32],
            },
        }
    }

    pub fn kind(&self) -> ArchKind {
        match self {
            Architecture::Relu { .. } => ArchKind::Relu,
            Architecture::Delu { .. } => ArchKind::Delu,
            Architecture::Dnl { .. } => ArchKind::Dnl,
        }
    }

    pub fn input(&self) -> usize {
        match self {
            Architecture::Relu { input, .. }
            | Architecture::Delu { input, .. }
            | Architecture::Dnl { input, .. } => *input,
        }
    }

    pub fn output(&self) -> usize {
        match self {
            Architecture::Relu { output, .. }
            | Architecture::Delu { output, .. }
            | Architecture::Dnl { output, .. } => *output,
        }
    }

    fn validate(&self) -> Result<()> {
        let (input, hidden, output) = match self {
            Architecture::Relu {
                input,
                hidden,
                output,
            }
            | Architecture::Delu {
                input,
                hidden,
                output,
                ..
            }
            | Architecture::Dnl {
                input,
                hidden,
                output,
                ..
            } => (*input, hidden, *output),
        };
        if input == 0 || output == 0 || hidden.contains(&0) {
            return Err(Error::arg("layer widths must be positive"));
        }
        match self {
            Architecture::Delu {
                hidden, aux_hidden, ..
            } => {
                if hidden.is_empty() {
                    return Err(Error::arg("DeLU needs at least one hidden layer"));
                }
                if aux_hidden.contains(&0) {
                    return Err(Error::arg("auxiliary widths must be positive"));
                }
            }
            Architecture::Dnl {
                hidden,
                lower,
                hyper_hidden,
                ..
            } => {
                if *lower == 0 || *lower >= hidden.len() {
                    return Err(Error::arg(format!(
                        "DNL needs 1 ≤ K < L (K = {lower}, L = {})",
                        hidden.len()
                    )));
                }
                if hyper_hidden.contains(&0) {
                    return Err(Error::arg("hypernetwork widths must be positive"));
                }
            }
            Architecture::Relu { .. } => {}
        }
        Ok(())
    }
}

/// One affine layer `h = W x + b` located in a flat buffer; `W` is
/// `n_out × n_in` row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dense {
    w: usize,
    b: Option<usize>,
    n_in: usize,
    n_out: usize,
}

/// Lays out a chain of dense layers starting at `offset`.
fn chain(sizes: &[usize], offset: &mut usize, final_bias: bool) -> Vec<Dense> {
    let mut out = Vec::with_capacity(sizes.len().saturating_sub(1));
    for k in 1..sizes.len() {
        let last = k + 1 == sizes.len();
        let w = *offset;
        *offset += sizes[k] * sizes[k - 1];
        let b = if !last || final_bias {
            let b = *offset;
            *offset += sizes[k];
            Some(b)
        } else {
            None
        };
        out.push(Dense {
            w,
            b,
            n_in: sizes[k - 1],
            n_out: sizes[k],
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    /// Pattern-producing layers applied to the input (all ReLU except the
    /// last one for ReLU/DeLU, all ReLU for the DNL lower part).
    backbone: Vec<Dense>,
    /// DeLU auxiliary net, pattern → output bias.
    aux: Vec<Dense>,
    /// DNL hypernetwork, lower pattern → generated parameters.
    hyper: Vec<Dense>,
    /// DNL upper layers, offsets inside one generated parameter vector.
    higher: Vec<Dense>,
    higher_size: usize,
    pattern_len: usize,
    total: usize,
}

impl Layout {
    fn new(arch: &Architecture) -> Layout {
        let mut off = 0;
        match arch {
            Architecture::Relu {
                input,
                hidden,
                output,
            } => {
                let sizes: Vec<usize> = std::iter::once(*input)
                    .chain(hidden.iter().copied())
                    .chain([*output])
                    .collect();
                let backbone = chain(&sizes, &mut off, true);
                Layout {
                    backbone,
                    aux: vec![],
                    hyper: vec![],
                    higher: vec![],
                    higher_size: 0,
                    pattern_len: hidden.iter().sum(),
                    total: off,
                }
            }
            Architecture::Delu {
                input,
                hidden,
                output,
                aux_hidden,
            } => {
                let sizes: Vec<usize> = std::iter::once(*input)
                    .chain(hidden.iter().copied())
                    .chain([*output])
                    .collect();
                let backbone = chain(&sizes, &mut off, false);
                let pattern_len: usize = hidden.iter().sum();
                let aux_sizes: Vec<usize> = std::iter::once(pattern_len)
                    .chain(aux_hidden.iter().copied())
                    .chain([*output])
                    .collect();
                let aux = chain(&aux_sizes, &mut off, true);
                Layout {
                    backbone,
                    aux,
                    hyper: vec![],
                    higher: vec![],
                    higher_size: 0,
                    pattern_len,
                    total: off,
                }
            }
            Architecture::Dnl {
                input,
                hidden,
                output,
                lower,
                hyper_hidden,
            } => {
                let lower_sizes: Vec<usize> = std::iter::once(*input)
                    .chain(hidden[..*lower].iter().copied())
                    .collect();
                let backbone = chain(&lower_sizes, &mut off, true);
                let pattern_len: usize = hidden[..*lower].iter().sum();
                let higher_sizes: Vec<usize> = hidden[*lower - 1..]
                    .iter()
                    .copied()
                    .chain([*output])
                    .collect();
                let mut hoff = 0;
                let higher = chain(&higher_sizes, &mut hoff, true);
                let hyper_sizes: Vec<usize> = std::iter::once(pattern_len)
                    .chain(hyper_hidden.iter().copied())
                    .chain([hoff])
                    .collect();
                let hyper = chain(&hyper_sizes, &mut off, true);
                Layout {
                    backbone,
                    aux: vec![],
                    hyper,
                    higher,
                    higher_size: hoff,
                    pattern_len,
                    total: off,
                }
            }
        }
    }
}

fn weight_view<'a>(params: &'a [f64], d: &Dense) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((d.n_out, d.n_in), &params[d.w..d.w + d.n_out * d.n_in])
        .expect("layout is consistent")
}

/// Activations cached by a batched pass through a chain of shared layers.
struct ChainCache {
    /// Input of each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
}

/// Batched forward through `layers`; ReLU after every layer except the last
/// unless `relu_last`. Returns the final activation and the cache.
fn chain_forward(
    params: &[f64],
    layers: &[Dense],
    x: Array2<f64>,
    relu_last: bool,
) -> (Array2<f64>, ChainCache) {
    let mut cache = ChainCache {
        inputs: Vec::with_capacity(layers.len()),
        pre: Vec::with_capacity(layers.len()),
    };
    let mut cur = x;
    for (k, d) in layers.iter().enumerate() {
        let mut h = cur.dot(&weight_view(params, d).t());
        if let Some(b) = d.b {
            h += &ArrayView1::from(&params[b..b + d.n_out]);
        }
        cache.inputs.push(cur);
        if k + 1 < layers.len() || relu_last {
            cur = h.mapv(|v| if v >= 0.0 { v } else { 0.0 });
            cache.pre.push(h);
        } else {
            // a linear layer needs no mask in the backward pass
            cache.pre.push(Array2::zeros((0, 0)));
            cur = h;
        }
    }
    (cur, cache)
}

/// Backward through a chain. `d_out` is the gradient w.r.t. the chain's final
/// activation. Accumulates parameter gradients into `grad` and returns the
/// gradient w.r.t. the chain input when `want_input`.
fn chain_backward(
    params: &[f64],
    layers: &[Dense],
    cache: &ChainCache,
    mut d: Array2<f64>,
    relu_last: bool,
    grad: &mut [f64],
    want_input: bool,
) -> Option<Array2<f64>> {
    for k in (0..layers.len()).rev() {
        let layer = &layers[k];
        if k + 1 < layers.len() || relu_last {
            d.zip_mut_with(&cache.pre[k], |g, &h| {
                if h < 0.0 {
                    *g = 0.0
                }
            });
        }
        {
            let gw = &mut grad[layer.w..layer.w + layer.n_out * layer.n_in];
            let mut gw = ArrayViewMut2::from_shape((layer.n_out, layer.n_in), gw)
                .expect("layout is consistent");
            general_mat_mul(1.0, &d.t(), &cache.inputs[k], 1.0, &mut gw);
        }
        if let Some(b) = layer.b {
            let sums = d.sum_axis(Axis(0));
            for (g, s) in grad[b..b + layer.n_out].iter_mut().zip(sums.iter()) {
                *g += s;
            }
        }
        if k > 0 || want_input {
            d = d.dot(&weight_view(params, layer));
        }
    }
    if want_input {
        Some(d)
    } else {
        None
    }
}

fn pattern_of(pre: &[Array2<f64>], batch: usize) -> Array2<f64> {
    let width: usize = pre.iter().map(|h| h.ncols()).sum();
    let mut r = Array2::zeros((batch, width));
    let mut col = 0;
    for h in pre {
        for (i, row) in h.outer_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                r[[i, col + j]] = if v >= 0.0 { 1.0 } else { 0.0 };
            }
        }
        col += h.ncols();
    }
    r
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four independent accumulators so the loop vectorizes
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// Per-sample upper part of a DNL: layers read their weights from `theta`.
/// `acts` receives each layer's input followed by the final output; `pre`
/// the hidden pre-activations.
fn higher_forward(
    layers: &[Dense],
    theta: &[f64],
    x: &[f64],
    acts: &mut Vec<Vec<f64>>,
    pre: &mut Vec<Vec<f64>>,
) {
    acts.clear();
    pre.clear();
    acts.push(x.to_vec());
    for (k, d) in layers.iter().enumerate() {
        let input = &acts[k];
        let w = &theta[d.w..d.w + d.n_out * d.n_in];
        let mut h: Vec<f64> = w.chunks_exact(d.n_in).map(|row| dot(row, input)).collect();
        if let Some(b) = d.b {
            axpy(1.0, &theta[b..b + d.n_out], &mut h);
        }
        if k + 1 < layers.len() {
            let o = h.iter().map(|&v| if v >= 0.0 { v } else { 0.0 }).collect();
            pre.push(h);
            acts.push(o);
        } else {
            acts.push(h);
        }
    }
}

/// Backward of [`higher_forward`]; accumulates into `d_theta` and returns the
/// gradient w.r.t. the input.
fn higher_backward(
    layers: &[Dense],
    theta: &[f64],
    acts: &[Vec<f64>],
    pre: &[Vec<f64>],
    d_out: &[f64],
    d_theta: &mut [f64],
) -> Vec<f64> {
    let mut d = d_out.to_vec();
    for k in (0..layers.len()).rev() {
        let layer = &layers[k];
        if k + 1 < layers.len() {
            for (g, &h) in d.iter_mut().zip(&pre[k]) {
                if h < 0.0 {
                    *g = 0.0;
                }
            }
        }
        let input = &acts[k];
        let mut d_in = vec![0.0; layer.n_in];
        let w = &theta[layer.w..layer.w + layer.n_out * layer.n_in];
        let (dw, rest) = d_theta[layer.w..].split_at_mut(layer.n_out * layer.n_in);
        for (o, &g) in d.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let span = o * layer.n_in..(o + 1) * layer.n_in;
            axpy(g, input, &mut dw[span.clone()]);
            axpy(g, &w[span], &mut d_in);
        }
        if let Some(b) = layer.b {
            // the bias directly follows the weights in the layout
            debug_assert_eq!(b, layer.w + layer.n_out * layer.n_in);
            axpy(1.0, &d, &mut rest[..layer.n_out]);
        }
        d = d_in;
    }
    d
}

/// Binary activation pattern over the pattern-producing hidden units.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationPattern(pub Vec<bool>);

impl ActivationPattern {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Gradients in the parameter layout of the network plus the input gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

/// Everything the backward pass needs from a batched forward pass.
pub struct Tape {
    batch: usize,
    backbone: ChainCache,
    aux: Option<ChainCache>,
    hyper: Option<(ChainCache, Array2<f64>)>,
    /// DNL: lower output and per-sample upper activations and pre-activations.
    higher: Option<(Array2<f64>, Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)>)>,
    pattern: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Architecture,
    params: Vec<f64>,
    layout: Layout,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    architecture: Architecture,
    params: Vec<f64>,
}

impl Network {
    /// Fresh network with every layer initialized uniformly in
    /// `±sqrt(1/fan_in)`.
    pub fn init(arch: Architecture, rng: &mut impl Rng) -> Result<Self> {
        arch.validate()?;
        let layout = Layout::new(&arch);
        let mut params = vec![0.0; layout.total];
        let all = layout
            .backbone
            .iter()
            .chain(&layout.aux)
            .chain(&layout.hyper);
        for d in all {
            let bound = (1.0 / d.n_in as f64).sqrt();
            for v in &mut params[d.w..d.w + d.n_in * d.n_out] {
                *v = rng.random_range(-bound..=bound);
            }
            if let Some(b) = d.b {
                for v in &mut params[b..b + d.n_out] {
                    *v = rng.random_range(-bound..=bound);
                }
            }
        }
        Ok(Network {
            arch,
            params,
            layout,
        })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let layout = Layout::new(&arch);
        if params.len() != layout.total {
            return Err(Error::arg(format!(
                "architecture needs {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite network parameter".into()));
        }
        Ok(Network {
            arch,
            params,
            layout,
        })
    }

    /// Network with all parameters zero.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        let n = {
            arch.validate()?;
            Layout::new(&arch).total
        };
        Network::from_params(arch, vec![0.0; n])
    }

    fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Parameters generated per pattern by the DNL hypernetwork (0 otherwise).
    pub fn generated_count(&self) -> usize {
        self.layout().higher_size
    }

    pub fn to_checkpoint(&self) -> Result<String> {
        serde_json::to_string(&Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            architecture: self.arch.clone(),
            params: self.params.clone(),
        })
        .map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<checkpoint>".into(),
            message: e.to_string(),
        })?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse {
                path: "<checkpoint>".into(),
                message: format!("unsupported format '{}'", c.format),
            });
        }
        Network::from_params(c.architecture, c.params)
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Tape)> {
        if x.ncols() != self.arch.input() {
            return Err(Error::arg(format!(
                "input has {} features, network expects {}",
                x.ncols(),
                self.arch.input()
            )));
        }
        let layout = self.layout();
        let p = &self.params;
        let batch = x.nrows();
        match self.arch {
            Architecture::Relu { .. } => {
                let (out, cache) = chain_forward(p, &layout.backbone, x.to_owned(), false);
                let n = cache.pre.len() - 1;
                let pattern = pattern_of(&cache.pre[..n], batch);
                Ok((
                    out,
                    Tape {
                        batch,
                        backbone: cache,
                        aux: None,
                        hyper: None,
                        higher: None,
                        pattern,
                    },
                ))
            }
            Architecture::Delu { .. } => {
                let (mut out, cache) = chain_forward(p, &layout.backbone, x.to_owned(), false);
                let n = cache.pre.len() - 1;
                let pattern = pattern_of(&cache.pre[..n], batch);
                let (bias, aux_cache) = chain_forward(p, &layout.aux, pattern.clone(), false);
                out += &bias;
                Ok((
                    out,
                    Tape {
                        batch,
                        backbone: cache,
                        aux: Some(aux_cache),
                        hyper: None,
                        higher: None,
                        pattern,
                    },
                ))
            }
            Architecture::Dnl { output, .. } => {
                let (lower_out, cache) = chain_forward(p, &layout.backbone, x.to_owned(), true);
                let pattern = pattern_of(&cache.pre, batch);
                let (theta, hyper_cache) = chain_forward(p, &layout.hyper, pattern.clone(), false);
                let mut out = Array2::zeros((batch, output));
                let mut per_sample = Vec::with_capacity(batch);
                let theta_slice = theta.as_slice().expect("standard layout");
                let lower_slice = lower_out.as_slice().expect("standard layout");
                let (hs, width) = (layout.higher_size, lower_out.ncols());
                for b in 0..batch {
                    let (mut acts, mut pre) = (Vec::new(), Vec::new());
                    higher_forward(
                        &layout.higher,
                        &theta_slice[b * hs..(b + 1) * hs],
                        &lower_slice[b * width..(b + 1) * width],
                        &mut acts,
                        &mut pre,
                    );
                    out.row_mut(b)
                        .assign(&ArrayView1::from(acts.last().expect("at least one layer")));
                    per_sample.push((acts, pre));
                }
                Ok((
                    out,
                    Tape {
                        batch,
                        backbone: cache,
                        aux: None,
                        hyper: Some((hyper_cache, theta)),
                        higher: Some((lower_out, per_sample)),
                        pattern,
                    },
                ))
            }
        }
    }

    /// Backward pass for `d_out` (gradient of the loss w.r.t. each output).
    /// Returns parameter gradients and, if requested, input gradients.
    pub fn backward_batch(
        &self,
        tape: &Tape,
        d_out: Array2<f64>,
        want_input: bool,
    ) -> (Vec<f64>, Option<Array2<f64>>) {
        let layout = self.layout();
        let p = &self.params;
        let mut grad = vec![0.0; p.len()];
        match self.arch {
            Architecture::Relu { .. } => {
                let dx = chain_backward(
                    p,
                    &layout.backbone,
                    &tape.backbone,
                    d_out,
                    false,
                    &mut grad,
                    want_input,
                );
                (grad, dx)
            }
            Architecture::Delu { .. } => {
                let aux = tape.aux.as_ref().expect("DeLU tape has aux cache");
                chain_backward(p, &layout.aux, aux, d_out.clone(), false, &mut grad, false);
                let dx = chain_backward(
                    p,
                    &layout.backbone,
                    &tape.backbone,
                    d_out,
                    false,
                    &mut grad,
                    want_input,
                );
                (grad, dx)
            }
            Architecture::Dnl { .. } => {
                let (hyper_cache, theta) = tape.hyper.as_ref().expect("DNL tape has hyper cache");
                let (lower_out, per_sample) =
                    tape.higher.as_ref().expect("DNL tape has upper cache");
                let hs = layout.higher_size;
                let theta_slice = theta.as_slice().expect("standard layout");
                let mut d_theta = Array2::<f64>::zeros((tape.batch, hs));
                let mut d_lower = Array2::<f64>::zeros(lower_out.raw_dim());
                {
                    let dts = d_theta.as_slice_mut().expect("standard layout");
                    for b in 0..tape.batch {
                        let dout: Vec<f64> = d_out.row(b).to_vec();
                        let (acts, pre) = &per_sample[b];
                        let dx = higher_backward(
                            &layout.higher,
                            &theta_slice[b * hs..(b + 1) * hs],
                            acts,
                            pre,
                            &dout,
                            &mut dts[b * hs..(b + 1) * hs],
                        );
                        d_lower.row_mut(b).assign(&Array1::from(dx));
                    }
                }
                chain_backward(
                    p,
                    &layout.hyper,
                    hyper_cache,
                    d_theta,
                    false,
                    &mut grad,
                    false,
                );
                let dx = chain_backward(
                    p,
                    &layout.backbone,
                    &tape.backbone,
                    d_lower,
                    true,
                    &mut grad,
                    want_input,
                );
                (grad, dx)
            }
        }
    }

    /// Single-sample forward; returns the output and the activation pattern
    /// (full for ReLU/DeLU, lower part for DNL).
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ActivationPattern)> {
        let xb = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::arg(e.to_string()))?;
        let (out, tape) = self.forward_batch(xb)?;
        let pattern = ActivationPattern(tape.pattern.row(0).iter().map(|&v| v > 0.5).collect());
        Ok((out.row(0).to_vec(), pattern))
    }

    /// Gradients of `upstream · f(x)` w.r.t. parameters and input.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Gradients> {
        if upstream.len() != self.arch.output() {
            return Err(Error::arg(format!(
                "upstream gradient has {} entries, network has {} outputs",
                upstream.len(),
                self.arch.output()
            )));
        }
        let xb = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::arg(e.to_string()))?;
        let (_, tape) = self.forward_batch(xb)?;
        let d =
            Array2::from_shape_vec((1, upstream.len()), upstream.to_vec()).expect("shape matches");
        let (params, dx) = self.backward_batch(&tape, d, true);
        Ok(Gradients {
            params,
            input: dx.expect("input gradient requested").row(0).to_vec(),
        })
    }

    /// Scalar output and its input gradient (first output coordinate).
    pub fn value_and_input_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (out, _) = self.forward(x)?;
        let mut up = vec![0.0; self.arch.output()];
        up[0] = 1.0;
        let g = self.backward(x, &up)?;
        Ok((out[0], g.input))
    }

    /// Smallest |pre-activation| over pattern-producing units at `x`.
    pub fn pattern_margin(&self, x: &[f64]) -> Result<f64> {
        let xb = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::arg(e.to_string()))?;
        let (_, tape) = self.forward_batch(xb)?;
        let pre = match self.arch {
            Architecture::Dnl { .. } => &tape.backbone.pre[..],
            _ => &tape.backbone.pre[..tape.backbone.pre.len() - 1],
        };
        Ok(pre
            .iter()
            .flat_map(|h| h.iter().map(|v| v.abs()))
            .fold(f64::INFINITY, f64::min))
    }

    /// Sign of every ReLU pre-activation evaluated at `x`, including the
    /// auxiliary net, the hypernetwork and DNL's generated layers. The output
    /// is smooth in both `x` and the parameters wherever this stays fixed.
    pub fn relu_signs(&self, x: &[f64]) -> Result<Vec<bool>> {
        let xb = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::arg(e.to_string()))?;
        let (_, tape) = self.forward_batch(xb)?;
        let mut caches = vec![&tape.backbone];
        caches.extend(&tape.aux);
        caches.extend(tape.hyper.as_ref().map(|(c, _)| c));
        let mut signs: Vec<bool> = caches
            .iter()
            .flat_map(|c| c.pre.iter().flat_map(|h| h.iter().map(|&v| v >= 0.0)))
            .collect();
        if let Some((_, per_sample)) = &tape.higher {
            signs.extend(
                per_sample[0]
                    .1
                    .iter()
                    .flat_map(|h| h.iter().map(|&v| v >= 0.0)),
            );
        }
        Ok(signs)
    }

    /// DNL only: the upper-part parameters generated for a lower pattern.
    pub fn generated_params(&self, pattern: &ActivationPattern) -> Result<Vec<f64>> {
        let layout = self.layout();
        if !matches!(self.arch, Architecture::Dnl { .. }) {
            return Err(Error::arg("only DNL networks generate parameters"));
        }
        if pattern.len() != layout.pattern_len {
            return Err(Error::arg("pattern length does not match the lower part"));
        }
        let r = Array2::from_shape_vec(
            (1, pattern.len()),
            pattern
                .0
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        )
        .expect("shape matches");
        let (theta, _) = chain_forward(&self.params, &layout.hyper, r, false);
        Ok(theta.row(0).to_vec())
    }
}

/// Plain ReLU forward for a network given in layer form, used to cross-check
/// the flat layouts: `layers[k] = (W, b)` with `W` as `n_out × n_in` rows.
pub fn forward_layers(layers: &[(Vec<Vec<f64>>, Vec<f64>)], x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for (k, (w, b)) in layers.iter().enumerate() {
        let mut h: Vec<f64> = w
            .iter()
            .zip(b)
            .map(|(row, bias)| row.iter().zip(&cur).map(|(a, c)| a * c).sum::<f64>() + bias)
            .collect();
        if k + 1 < layers.len() {
            h.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        cur = h;
    }
    cur
}
