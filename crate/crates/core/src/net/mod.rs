//! Compact mask network.
//!
//! A per-frame MLP reads the log power spectrum of the frame and `context`
//! neighbours on each side (edge frames are replicated), passes it through
//! leaky-ReLU hidden layers and a linear output layer that emits, per
//! frequency bin and component, a mask logit, a variance logit and a
//! mixture-weight logit:
//!
//! ```text
//! W_l = sigmoid(mask_logit)
//! λ_l = ε + exp(clamp(var_logit, -14, 14))
//! Ω   = softmax_l(weight_logit)
//! ```
//!
//! Parameters live in one flat vector. Each layer stores its weight matrix
//! `(out, in)` row-major followed by its bias. The output layer's rows are
//! three blocks of `F * L` rows (masks, variances, weights), row `f * L + l`
//! within a block.

mod checkpoint;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::ComplexSpectrogram;
use crate::error::{Error, Result};
use crate::losses::LossGrad;
use crate::posterior::PosteriorParams;
use crate::EPS_VAR;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};

pub const VAR_LOGIT_LIMIT: f64 = 14.0;

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub num_freqs: usize,
    /// Frames of context on each side.
    pub context: usize,
    pub hidden_dims: Vec<usize>,
    pub num_components: usize,
    pub leaky_slope: f64,
}

impl NetConfig {
    pub fn new(num_freqs: usize, num_components: usize) -> Self {
        Self {
            num_freqs,
            context: 3,
            hidden_dims: vec![128, 128],
            num_components,
            leaky_slope: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_components == 0 {
            return Err(Error::InvalidInput("network needs at least one component".into()));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidInput("hidden layer widths must be non-empty and positive".into()));
        }
        if self.num_freqs == 0 {
            return Err(Error::InvalidInput("network needs at least one frequency bin".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.num_freqs * (2 * self.context + 1)
    }

    /// Rows of one head block, `F * L`.
    pub fn head_dim(&self) -> usize {
        self.num_freqs * self.num_components
    }

    pub fn layout(&self) -> Layout {
        let mut dims = vec![self.input_dim()];
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(3 * self.head_dim());
        let mut offset = 0;
        let layers = dims
            .windows(2)
            .map(|io| {
                let layer = LayerSlice {
                    weight: offset,
                    bias: offset + io[0] * io[1],
                    rows: io[1],
                    cols: io[0],
                };
                offset = layer.bias + io[1];
                layer
            })
            .collect();
        Layout {
            layers,
            num_params: offset,
        }
    }
}

/// Where one dense layer's weights and bias sit in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlice {
    pub weight: usize,
    pub bias: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub layers: Vec<LayerSlice>,
    pub num_params: usize,
}

/// Which output heads a parameter operation touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Mask,
    Variance,
    Weight,
}

impl Head {
    fn block(self) -> usize {
        match self {
            Head::Mask => 0,
            Head::Variance => 1,
            Head::Weight => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub theta: Vec<f64>,
    pub layout: Layout,
}

impl NetParams {
    pub fn zeros(cfg: &NetConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = cfg.layout();
        Ok(Self {
            theta: vec![0.0; layout.num_params],
            layout,
        })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    fn check(&self, cfg: &NetConfig) -> Result<()> {
        cfg.validate()?;
        let layout = cfg.layout();
        if layout != self.layout || self.theta.len() != layout.num_params {
            return Err(Error::shape(
                format!("{} parameters", layout.num_params),
                self.theta.len(),
            ));
        }
        Ok(())
    }

    fn weight(&self, layer: &LayerSlice) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape(
            (layer.rows, layer.cols),
            &self.theta[layer.weight..layer.bias],
        )
        .expect("layout matches parameter vector")
    }

    fn bias(&self, layer: &LayerSlice) -> &[f64] {
        &self.theta[layer.bias..layer.bias + layer.rows]
    }

    /// Index ranges in `theta` holding the weights and biases of one head.
    pub fn head_ranges(&self, cfg: &NetConfig, head: Head) -> [std::ops::Range<usize>; 2] {
        let out = self.layout.layers.last().expect("at least one layer");
        let hd = cfg.head_dim();
        let r0 = head.block() * hd;
        [
            out.weight + r0 * out.cols..out.weight + (r0 + hd) * out.cols,
            out.bias + r0..out.bias + r0 + hd,
        ]
    }

    /// Redraws the given heads as `init_params` would for `seed`.
    pub fn reinit_heads(&mut self, cfg: &NetConfig, heads: &[Head], seed: u64) -> Result<()> {
        self.check(cfg)?;
        let fresh = init_params(cfg, seed)?;
        for &h in heads {
            for r in self.head_ranges(cfg, h) {
                self.theta[r.clone()].copy_from_slice(&fresh.theta[r]);
            }
        }
        Ok(())
    }
}

/// Deterministic fan-in scaled uniform initialisation.
///
/// Hidden layers use the leaky-ReLU gain. The variance head starts at zero so
/// every initial `λ` is `1 + ε`.
pub fn init_params(cfg: &NetConfig, seed: u64) -> Result<NetParams> {
    let mut p = NetParams::zeros(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_layers = p.layout.layers.len();
    let gain = 6.0 / (1.0 + cfg.leaky_slope * cfg.leaky_slope);
    for (i, layer) in p.layout.layers.clone().iter().enumerate() {
        let fan_in = layer.cols as f64;
        let bound = if i + 1 < n_layers {
            (gain / fan_in).sqrt()
        } else {
            (1.0 / fan_in).sqrt()
        };
        for v in &mut p.theta[layer.weight..layer.bias] {
            *v = rng.random_range(-bound..bound);
        }
    }
    for r in p.head_ranges(cfg, Head::Variance) {
        p.theta[r].fill(0.0);
    }
    Ok(p)
}

/// Raw head outputs, bin-major like [`PosteriorParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutput {
    pub mask_logits: Vec<f64>,
    pub var_logits: Vec<f64>,
    pub weight_logits: Vec<f64>,
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `acts[0]` is the input feature matrix; `acts[i]` the output of hidden layer `i`.
    acts: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    pub heads: HeadOutput,
    masks: Vec<f64>,
    var_scale: Vec<f64>,
    masks_only: bool,
    num_params: usize,
    num_bins: usize,
    num_components: usize,
}

impl Tape {
    pub fn masks_only(&self) -> bool {
        self.masks_only
    }
}

/// Log-power features with `context` frames each side, one row per frame.
pub fn features(cfg: &NetConfig, x: &ComplexSpectrogram) -> Array2<f64> {
    let (nf, nt, c) = (x.num_freqs, x.num_frames, cfg.context as isize);
    let width = 2 * cfg.context + 1;
    let logp: Vec<f64> = x
        .coefficients
        .iter()
        .map(|v| (v.norm_sqr() + EPS_VAR).ln())
        .collect();
    let mut out = Array2::zeros((nt, nf * width));
    for t in 0..nt {
        let mut row = out.row_mut(t);
        for d in -c..=c {
            let src = (t as isize + d).clamp(0, nt as isize - 1) as usize;
            let block = (d + c) as usize * nf;
            for f in 0..nf {
                row[block + f] = logp[src * nf + f];
            }
        }
    }
    out
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn forward(
    params: &NetParams,
    cfg: &NetConfig,
    x: &ComplexSpectrogram,
) -> Result<(PosteriorParams, Tape)> {
    forward_impl(params, cfg, x, false)
}

/// Forward pass evaluating only the mask head. Variances are reported as 1
/// and weights as uniform.
pub fn forward_masks(
    params: &NetParams,
    cfg: &NetConfig,
    x: &ComplexSpectrogram,
) -> Result<(PosteriorParams, Tape)> {
    forward_impl(params, cfg, x, true)
}

fn forward_impl(
    params: &NetParams,
    cfg: &NetConfig,
    x: &ComplexSpectrogram,
    masks_only: bool,
) -> Result<(PosteriorParams, Tape)> {
    params.check(cfg)?;
    if x.num_freqs != cfg.num_freqs {
        return Err(Error::shape(
            format!("{} frequency bins", cfg.num_freqs),
            x.num_freqs,
        ));
    }
    let layers = &params.layout.layers;
    let (hidden, out_layer) = layers.split_at(layers.len() - 1);
    let out_layer = out_layer[0];

    let mut acts = vec![features(cfg, x)];
    let mut pre = Vec::with_capacity(hidden.len());
    for layer in hidden {
        let z = affine(acts.last().unwrap(), params.weight(layer), params.bias(layer));
        let slope = cfg.leaky_slope;
        acts.push(z.mapv(|v| if v > 0.0 { v } else { slope * v }));
        pre.push(z);
    }

    let hd = cfg.head_dim();
    let rows = if masks_only { hd } else { 3 * hd };
    let w_out = params.weight(&out_layer);
    let b_out = params.bias(&out_layer);
    let head = affine(
        acts.last().unwrap(),
        w_out.slice(s![..rows, ..]),
        &b_out[..rows],
    );

    // head rows are (f, l) within each block, so a frame's block slice is
    // already in bin-major parameter order
    let nl = cfg.num_components;
    let n = x.num_bins() * nl;
    let take = |block: usize| -> Vec<f64> {
        let mut v = Vec::with_capacity(n);
        for row in head.rows() {
            v.extend(row.slice(s![block * hd..(block + 1) * hd]).iter());
        }
        v
    };
    let mask_logits = take(0);
    let masks: Vec<f64> = mask_logits.iter().map(|&v| sigmoid(v)).collect();
    let (var_logits, weight_logits, var_scale, variances, weights) = if masks_only {
        (
            Vec::new(),
            Vec::new(),
            Vec::new(),
            vec![1.0; n],
            vec![1.0 / nl as f64; n],
        )
    } else {
        let var_logits = take(1);
        let weight_logits = take(2);
        let var_scale: Vec<f64> = var_logits
            .iter()
            .map(|&v| v.clamp(-VAR_LOGIT_LIMIT, VAR_LOGIT_LIMIT).exp())
            .collect();
        let variances = var_scale.iter().map(|e| EPS_VAR + e).collect();
        let mut weights = weight_logits.clone();
        for chunk in weights.chunks_exact_mut(nl) {
            crate::posterior::softmax_in_place(chunk);
        }
        (var_logits, weight_logits, var_scale, variances, weights)
    };

    let post = PosteriorParams {
        num_components: nl,
        num_bins: x.num_bins(),
        masks: masks.clone(),
        variances,
        weights,
    };
    let tape = Tape {
        acts,
        pre,
        heads: HeadOutput {
            mask_logits,
            var_logits,
            weight_logits,
        },
        masks,
        var_scale,
        masks_only,
        num_params: params.len(),
        num_bins: x.num_bins(),
        num_components: nl,
    };
    Ok((post, tape))
}

fn affine(a: &Array2<f64>, w: ArrayView2<'_, f64>, b: &[f64]) -> Array2<f64> {
    let mut z = a.dot(&w.t());
    z += &ArrayView2::from_shape((1, b.len()), b).unwrap();
    z
}

/// Reverse-mode gradient of the loss w.r.t. every parameter.
pub fn backward(
    params: &NetParams,
    cfg: &NetConfig,
    tape: &Tape,
    upstream: &LossGrad,
) -> Result<Vec<f64>> {
    params.check(cfg)?;
    if tape.num_params != params.len() || tape.num_components != cfg.num_components {
        return Err(Error::InvalidInput(
            "tape was recorded with a different network".into(),
        ));
    }
    let n = tape.num_bins * tape.num_components;
    if upstream.len() != n {
        return Err(Error::shape(n, upstream.len()));
    }
    let hd = cfg.head_dim();
    let nt = tape.acts[0].nrows();
    let rows = if tape.masks_only { hd } else { 3 * hd };

    let mut d_head = Array2::<f64>::zeros((nt, rows));
    for t in 0..nt {
        let mut row = d_head.row_mut(t);
        for j in 0..hd {
            let k = t * hd + j;
            let w = tape.masks[k];
            row[j] = upstream.d_mask[k] * w * (1.0 - w);
            if !tape.masks_only {
                let v = tape.heads.var_logits[k];
                row[hd + j] = if v.abs() <= VAR_LOGIT_LIMIT {
                    upstream.d_var[k] * tape.var_scale[k]
                } else {
                    0.0
                };
                row[2 * hd + j] = upstream.d_logit[k];
            }
        }
    }

    let mut grad = vec![0.0; params.len()];
    let layers = &params.layout.layers;
    let mut delta = d_head;
    for (i, layer) in layers.iter().enumerate().rev() {
        let a = &tape.acts[i];
        let used = delta.ncols();
        {
            let (gw, gb) = grad[layer.weight..layer.bias + layer.rows].split_at_mut(layer.rows * layer.cols);
            let mut gw = ArrayViewMut2::from_shape((layer.rows, layer.cols), gw).unwrap();
            general_mat_mul(1.0, &delta.t(), a, 0.0, &mut gw.slice_mut(s![..used, ..]));
            let sums: Array1<f64> = delta.sum_axis(Axis(0));
            gb[..used].copy_from_slice(sums.as_slice().unwrap());
        }
        if i == 0 {
            break;
        }
        let w = params.weight(layer);
        let mut d_act = delta.dot(&w.slice(s![..used, ..]));
        let slope = cfg.leaky_slope;
        ndarray::Zip::from(&mut d_act)
            .and(&tape.pre[i - 1])
            .for_each(|d, &z| {
                if z <= 0.0 {
                    *d *= slope;
                }
            });
        delta = d_act;
    }
    Ok(grad)
}
