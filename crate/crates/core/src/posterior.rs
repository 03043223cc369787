//! Closed-form posterior of clean speech under complex Gaussian mixture priors.
//!
//! Speech and noise coefficients are modelled per TF bin as zero-mean complex
//! Gaussian mixtures with `I` and `J` components. The posterior of `S` given
//! `X = S + N` is again a mixture with `L = I * J` components, one per pair
//! `(i, j)`, flattened as `l = i * J + j`. Each pair contributes a Wiener
//! estimate `W_l X` with variance `λ_l`, weighted by the pair's evidence
//! `Ω(i) Ω(j) N_C(X; 0, σ²_i + σ²_j)`.
//!
//! Per-bin parameter arrays are bin-major: component `l` of bin `b` is at
//! `b * L + l`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::EPS_VAR;

/// Speech and noise mixture priors for a set of TF bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorCgmm {
    /// `σ²_i` per bin, index `b * I + i`.
    pub speech_vars: Vec<f64>,
    /// `σ²_j` per bin, index `b * J + j`.
    pub noise_vars: Vec<f64>,
    pub speech_weights: Vec<f64>,
    pub noise_weights: Vec<f64>,
}

impl PriorCgmm {
    pub fn num_speech(&self) -> usize {
        self.speech_weights.len()
    }

    pub fn num_noise(&self) -> usize {
        self.noise_weights.len()
    }

    pub fn validate(&self, num_bins: usize) -> Result<()> {
        let (ni, nj) = (self.num_speech(), self.num_noise());
        if ni == 0 || nj == 0 {
            return Err(Error::InvalidInput("prior needs at least one component".into()));
        }
        for (name, w) in [("speech", &self.speech_weights), ("noise", &self.noise_weights)] {
            if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} weights must be non-negative")));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "{name} weights sum to {sum}, expected 1"
                )));
            }
        }
        if self.speech_vars.len() != num_bins * ni {
            return Err(Error::shape(num_bins * ni, self.speech_vars.len()));
        }
        if self.noise_vars.len() != num_bins * nj {
            return Err(Error::shape(num_bins * nj, self.noise_vars.len()));
        }
        if let Some(v) = self
            .speech_vars
            .iter()
            .chain(&self.noise_vars)
            .find(|&&v| !(v >= EPS_VAR) || !v.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "prior variance {v} below floor {EPS_VAR}"
            )));
        }
        Ok(())
    }
}

/// Per-bin mixture parameters of the clean-speech posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorParams {
    pub num_components: usize,
    pub num_bins: usize,
    pub masks: Vec<f64>,
    pub variances: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PosteriorParams {
    pub fn new(
        num_components: usize,
        masks: Vec<f64>,
        variances: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if num_components == 0 || masks.len() % num_components != 0 {
            return Err(Error::InvalidInput(format!(
                "{} mask values do not split into {num_components} components",
                masks.len()
            )));
        }
        let p = Self {
            num_components,
            num_bins: masks.len() / num_components,
            masks,
            variances,
            weights,
        };
        p.validate()?;
        Ok(p)
    }

    /// A single-component posterior with unit weights.
    pub fn single(masks: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let n = masks.len();
        Self::new(1, masks, variances, vec![1.0; n])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_bins * self.num_components;
        for (name, v) in [
            ("masks", &self.masks),
            ("variances", &self.variances),
            ("weights", &self.weights),
        ] {
            if v.len() != n {
                return Err(Error::shape(format!("{n} {name}"), v.len()));
            }
        }
        if self.masks.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("non-finite mask".into()));
        }
        if let Some(v) = self.variances.iter().find(|&&v| !(v >= EPS_VAR) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "variance {v} below floor {EPS_VAR}"
            )));
        }
        for (b, w) in self.weights.chunks_exact(self.num_components).enumerate() {
            let sum: f64 = w.iter().sum();
            if w.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "weights of bin {b} sum to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn range(&self, bin: usize) -> std::ops::Range<usize> {
        bin * self.num_components..(bin + 1) * self.num_components
    }

    /// Posterior density `p(S = s | X = x)` at one bin.
    pub fn density(&self, bin: usize, x: Complex64, s: Complex64) -> f64 {
        self.range(bin)
            .map(|k| {
                let lam = self.variances[k];
                self.weights[k] / (PI * lam) * (-(s - self.masks[k] * x).norm_sqr() / lam).exp()
            })
            .sum()
    }
}

/// Wiener gain and posterior variance of one speech/noise Gaussian pair.
pub fn wiener_pair(speech_var: f64, noise_var: f64) -> Result<(f64, f64)> {
    if !(speech_var >= EPS_VAR && noise_var >= EPS_VAR)
        || !speech_var.is_finite()
        || !noise_var.is_finite()
    {
        return Err(Error::InvalidInput(format!(
            "variances ({speech_var}, {noise_var}) must be at least {EPS_VAR}"
        )));
    }
    let total = speech_var + noise_var;
    Ok((speech_var / total, speech_var * noise_var / total))
}

/// `log N_C(x; 0, var)`.
fn log_cgauss(x: Complex64, var: f64) -> f64 {
    -(PI * var).ln() - x.norm_sqr() / var
}

/// In-place softmax of log-weights with max subtraction.
pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Posterior variances are floored at [`EPS_VAR`].
pub fn posterior_from_priors(prior: &PriorCgmm, x: &[Complex64]) -> Result<PosteriorParams> {
    prior.validate(x.len())?;
    let (ni, nj) = (prior.num_speech(), prior.num_noise());
    let l = ni * nj;
    let n = x.len() * l;
    let (mut masks, mut variances, mut weights) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut logw = vec![0.0; l];
    for (b, &xb) in x.iter().enumerate() {
        for i in 0..ni {
            let vs = prior.speech_vars[b * ni + i];
            for j in 0..nj {
                let vn = prior.noise_vars[b * nj + j];
                let (w, lam) = wiener_pair(vs, vn)?;
                masks.push(w);
                variances.push(lam.max(EPS_VAR));
                logw[i * nj + j] = prior.speech_weights[i].ln()
                    + prior.noise_weights[j].ln()
                    + log_cgauss(xb, vs + vn);
            }
        }
        if logw.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(Error::InvalidInput(format!("bin {b} has zero evidence")));
        }
        softmax_in_place(&mut logw);
        weights.extend_from_slice(&logw);
    }
    Ok(PosteriorParams {
        num_components: l,
        num_bins: x.len(),
        masks,
        variances,
        weights,
    })
}

/// Posterior mean `Σ_l Ω_l W_l X` at one bin.
pub fn posterior_mean(p: &PosteriorParams, bin: usize, x: Complex64) -> Complex64 {
    let gain: f64 = p
        .range(bin)
        .map(|k| p.weights[k] * p.masks[k])
        .sum();
    gain * x
}

/// Posterior mean with its variance split into aleatoric and epistemic parts.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMaps {
    pub mean: Vec<Complex64>,
    /// `Σ_l Ω_l λ_l`
    pub aleatoric: Vec<f64>,
    /// `Σ_l Ω_l |W_l X - E(S|X)|²`
    pub epistemic: Vec<f64>,
    pub total: Vec<f64>,
}

pub fn decompose_uncertainty(p: &PosteriorParams, x: &[Complex64]) -> Result<UncertaintyMaps> {
    if x.len() != p.num_bins {
        return Err(Error::shape(p.num_bins, x.len()));
    }
    let n = p.num_bins;
    let mut maps = UncertaintyMaps {
        mean: Vec::with_capacity(n),
        aleatoric: Vec::with_capacity(n),
        epistemic: Vec::with_capacity(n),
        total: Vec::with_capacity(n),
    };
    for (b, &xb) in x.iter().enumerate() {
        let mean = posterior_mean(p, b, xb);
        let (mut ale, mut epi) = (0.0, 0.0);
        for k in p.range(b) {
            ale += p.weights[k] * p.variances[k];
            epi += p.weights[k] * (p.masks[k] * xb - mean).norm_sqr();
        }
        maps.mean.push(mean);
        maps.aleatoric.push(ale);
        maps.epistemic.push(epi);
        maps.total.push(ale + epi);
    }
    Ok(maps)
}

/// Writes `f,t,re,im,aleatoric,epistemic` rows for frame-major maps.
pub fn write_uncertainty_csv(
    path: impl AsRef<Path>,
    maps: &UncertaintyMaps,
    num_freqs: usize,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("f,t,re,im,aleatoric,epistemic\n");
    for (b, m) in maps.mean.iter().enumerate() {
        let (f, t) = (b % num_freqs, b / num_freqs);
        out.push_str(&format!(
            "{f},{t},{:e},{:e},{:e},{:e}\n",
            m.re, m.im, maps.aleatoric[b], maps.epistemic[b]
        ));
    }
    std::fs::File::create(path)
        .and_then(|mut fh| fh.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
