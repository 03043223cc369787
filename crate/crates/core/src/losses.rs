//! Training losses over posterior parameters, each with its analytic gradient.
//!
//! All losses average over the `FT` bins of one utterance. Gradients are taken
//! with respect to the masks `W_l`, the variances `λ_l` and the mixture-weight
//! logits `z_l` (with `Ω = softmax(z)` per bin), and are laid out exactly like
//! the corresponding [`PosteriorParams`] arrays.
//!
//! The per-component log score is
//!
//! ```text
//! Θ_l = log Ω_l - log λ_l - |S - W_l X|² / λ_l
//! ```
//!
//! without the `-log π` constant, so the mixture NLL differs from the exact
//! `-log p(S|X)` by `log π` per bin.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::posterior::PosteriorParams;

/// Loss value and gradients w.r.t. masks, variances and weight logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub d_mask: Vec<f64>,
    pub d_var: Vec<f64>,
    pub d_logit: Vec<f64>,
}

impl LossGrad {
    pub fn zeros(len: usize) -> Self {
        Self {
            value: 0.0,
            d_mask: vec![0.0; len],
            d_var: vec![0.0; len],
            d_logit: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.d_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_mask.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self
                .d_mask
                .iter()
                .chain(&self.d_var)
                .chain(&self.d_logit)
                .all(|g| g.is_finite())
    }

    /// `a * self + b * other`, value included.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::shape(self.len(), other.len()));
        }
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect();
        Ok(Self {
            value: a * self.value + b * other.value,
            d_mask: mix(&self.d_mask, &other.d_mask),
            d_var: mix(&self.d_var, &other.d_var),
            d_logit: mix(&self.d_logit, &other.d_logit),
        })
    }
}

/// Per-component variance exponents `β_l` of the stop-gradient weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct GradModConfig {
    betas: Vec<f64>,
}

impl GradModConfig {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if let Some(b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::InvalidInput(format!("beta {b} outside [0, 1]")));
        }
        Ok(Self { betas })
    }

    pub fn uniform(beta: f64, num_components: usize) -> Result<Self> {
        Self::new(vec![beta; num_components])
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
}

fn check_inputs(p: &PosteriorParams, s: &[Complex64], x: &[Complex64]) -> Result<()> {
    if s.len() != p.num_bins || x.len() != p.num_bins {
        return Err(Error::shape(
            format!("{} bins", p.num_bins),
            format!("S: {}, X: {}", s.len(), x.len()),
        ));
    }
    if p.num_bins == 0 {
        return Err(Error::InvalidInput("empty spectrogram".into()));
    }
    p.validate()
}

fn require_single(p: &PosteriorParams, what: &str) -> Result<()> {
    if p.num_components != 1 {
        return Err(Error::InvalidInput(format!(
            "{what} needs exactly one component, got {}",
            p.num_components
        )));
    }
    Ok(())
}

/// `2 Re{-S X̄ + W |X|²}`, the derivative of `|S - W X|²` in a real gain `W`.
#[inline]
fn residual_slope(s: Complex64, x: Complex64, w: f64) -> f64 {
    2.0 * (w * x.norm_sqr() - (s * x.conj()).re)
}

pub fn mse_loss(p: &PosteriorParams, s: &[Complex64], x: &[Complex64]) -> Result<LossGrad> {
    check_inputs(p, s, x)?;
    require_single(p, "mse_loss")?;
    let scale = 1.0 / p.num_bins as f64;
    let mut out = LossGrad::zeros(p.num_bins);
    for b in 0..p.num_bins {
        let w = p.masks[b];
        out.value += (s[b] - w * x[b]).norm_sqr();
        out.d_mask[b] = scale * residual_slope(s[b], x[b], w);
    }
    out.value *= scale;
    Ok(out)
}

/// Uni-modal complex Gaussian NLL, `(1/FT) Σ [log λ + |S - W X|² / λ]`.
pub fn cg_nll(p: &PosteriorParams, s: &[Complex64], x: &[Complex64]) -> Result<LossGrad> {
    check_inputs(p, s, x)?;
    require_single(p, "cg_nll")?;
    let scale = 1.0 / p.num_bins as f64;
    let mut out = LossGrad::zeros(p.num_bins);
    for b in 0..p.num_bins {
        let (w, lam) = (p.masks[b], p.variances[b]);
        let r2 = (s[b] - w * x[b]).norm_sqr();
        out.value += lam.ln() + r2 / lam;
        out.d_mask[b] = scale * residual_slope(s[b], x[b], w) / lam;
        out.d_var[b] = scale * (lam - r2) / (lam * lam);
    }
    out.value *= scale;
    Ok(out)
}

/// `Θ_{l}` for every bin and component, laid out like the parameters.
pub fn component_log_scores(
    p: &PosteriorParams,
    s: &[Complex64],
    x: &[Complex64],
) -> Result<Vec<f64>> {
    check_inputs(p, s, x)?;
    let mut theta = Vec::with_capacity(p.masks.len());
    for b in 0..p.num_bins {
        for k in p.range(b) {
            let lam = p.variances[k];
            let r2 = (s[b] - p.masks[k] * x[b]).norm_sqr();
            theta.push(p.weights[k].ln() - lam.ln() - r2 / lam);
        }
    }
    Ok(theta)
}

/// Mixture NLL `-(1/FT) Σ log Σ_l exp(Θ_l)`.
pub fn cgmm_nll(p: &PosteriorParams, s: &[Complex64], x: &[Complex64]) -> Result<LossGrad> {
    let zeros = vec![0.0; p.num_components];
    weighted_mixture_nll(p, s, x, &zeros)
}

/// Mixture NLL with each score scaled by `c_l = λ_l^{β_l}`, where `c_l` is
/// held constant when differentiating. Responsibilities are the softmax of
/// the scaled scores, so each component's gradient is its responsibility times
/// `c_l ∇Θ_l`.
pub fn cgmm_nll_beta(
    p: &PosteriorParams,
    s: &[Complex64],
    x: &[Complex64],
    g: &GradModConfig,
) -> Result<LossGrad> {
    if g.betas.len() != p.num_components {
        return Err(Error::shape(
            format!("{} betas", p.num_components),
            g.betas.len(),
        ));
    }
    weighted_mixture_nll(p, s, x, &g.betas)
}

fn weighted_mixture_nll(
    p: &PosteriorParams,
    s: &[Complex64],
    x: &[Complex64],
    betas: &[f64],
) -> Result<LossGrad> {
    check_inputs(p, s, x)?;
    let nl = p.num_components;
    let scale = 1.0 / p.num_bins as f64;
    let mut out = LossGrad::zeros(p.masks.len());
    let mut z = vec![0.0; nl];
    let mut c = vec![0.0; nl];
    let mut r2 = vec![0.0; nl];
    for b in 0..p.num_bins {
        let base = b * nl;
        let (sb, xb) = (s[b], x[b]);
        for l in 0..nl {
            let k = base + l;
            let lam = p.variances[k];
            let ln_lam = lam.ln();
            r2[l] = (sb - p.masks[k] * xb).norm_sqr();
            c[l] = if betas[l] == 0.0 { 1.0 } else { (betas[l] * ln_lam).exp() };
            z[l] = c[l] * (p.weights[k].ln() - ln_lam - r2[l] / lam);
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Err(Error::InvalidInput(format!("bin {b}: every component has zero weight")));
        }
        // z becomes the unnormalised responsibilities
        let mut total = 0.0;
        for v in z.iter_mut() {
            *v = (*v - m).exp();
            total += *v;
        }
        out.value -= m + total.ln();

        let mut resp_c_sum = 0.0;
        for l in 0..nl {
            let k = base + l;
            let lam = p.variances[k];
            let w = p.masks[k];
            let rc = z[l] / total * c[l];
            resp_c_sum += rc;
            let r2 = r2[l];
            out.d_mask[k] = scale * rc * residual_slope(sb, xb, w) / lam;
            out.d_var[k] = scale * rc * (lam - r2) / (lam * lam);
            out.d_logit[k] = -scale * rc;
        }
        for l in 0..nl {
            let k = base + l;
            out.d_logit[k] += scale * p.weights[k] * resp_c_sum;
        }
    }
    out.value *= scale;
    if !out.value.is_finite() {
        return Err(Error::InvalidInput("mixture NLL is not finite".into()));
    }
    Ok(out)
}

/// Winner-takes-all MSE over `L` hypotheses.
///
/// Hypotheses are ranked by their utterance-level MSE (ties by index) and the
/// loss is the mean MSE of the `k` best. Only winners receive gradient.
/// Variances and weights of `p` are ignored. Returns the winner indices in
/// rank order.
pub fn wta_loss(
    p: &PosteriorParams,
    s: &[Complex64],
    x: &[Complex64],
    k: usize,
) -> Result<(LossGrad, Vec<usize>)> {
    let nl = p.num_components;
    if k == 0 || k > nl {
        return Err(Error::InvalidInput(format!(
            "winner count {k} outside 1..={nl}"
        )));
    }
    if s.len() != p.num_bins || x.len() != p.num_bins || p.masks.len() != nl * p.num_bins {
        return Err(Error::shape(p.num_bins, format!("S: {}, X: {}", s.len(), x.len())));
    }
    let scale = 1.0 / p.num_bins as f64;
    let mut mse = vec![0.0; nl];
    for b in 0..p.num_bins {
        for l in 0..nl {
            mse[l] += (s[b] - p.masks[b * nl + l] * x[b]).norm_sqr();
        }
    }
    mse.iter_mut().for_each(|m| *m *= scale);

    let mut order: Vec<usize> = (0..nl).collect();
    order.sort_by(|&a, &b| mse[a].total_cmp(&mse[b]).then(a.cmp(&b)));
    let winners = order[..k].to_vec();

    let mut out = LossGrad::zeros(p.masks.len());
    out.value = winners.iter().map(|&l| mse[l]).sum::<f64>() / k as f64;
    let g = scale / k as f64;
    for b in 0..p.num_bins {
        for &l in &winners {
            let i = b * nl + l;
            out.d_mask[i] = g * residual_slope(s[b], x[b], p.masks[i]);
        }
    }
    Ok((out, winners))
}
