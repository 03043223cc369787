//! Oracles shared by the integration and acceptance tests. Nothing here calls
//! the loss or posterior code paths it is used to check.
#![allow(dead_code)]

use std::f64::consts::PI;

use cgmmse::dsp::ComplexSpectrogram;
use cgmmse::posterior::PosteriorParams;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_c(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Raw loss inputs with weights carried as logits.
#[derive(Debug, Clone)]
pub struct Instance {
    pub num_components: usize,
    pub masks: Vec<f64>,
    pub variances: Vec<f64>,
    pub logits: Vec<f64>,
    pub s: Vec<Complex64>,
    pub x: Vec<Complex64>,
}

impl Instance {
    pub fn random(rng: &mut ChaCha8Rng, num_bins: usize, num_components: usize) -> Self {
        let n = num_bins * num_components;
        let x: Vec<Complex64> = (0..num_bins).map(|_| rand_c(rng, 2.0)).collect();
        let s = x
            .iter()
            .map(|&xb| rng.random_range(0.0..1.0) * xb + rand_c(rng, 0.5))
            .collect();
        Self {
            num_components,
            masks: (0..n).map(|_| rng.random_range(-0.2..1.2)).collect(),
            variances: (0..n).map(|_| rng.random_range(0.05..4.0)).collect(),
            logits: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            s,
            x,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        self.logits
            .chunks(self.num_components)
            .flat_map(softmax)
            .collect()
    }

    pub fn params(&self) -> PosteriorParams {
        PosteriorParams::new(
            self.num_components,
            self.masks.clone(),
            self.variances.clone(),
            self.weights(),
        )
        .unwrap()
    }
}

/// Direct mixture NLL with per-component score factors, no log-sum-exp
/// shifting: `-(1/FT) Σ_b log Σ_l exp(c_l Θ_l)`.
pub fn naive_mixture_nll(
    nl: usize,
    masks: &[f64],
    vars: &[f64],
    weights: &[f64],
    factors: &[f64],
    s: &[Complex64],
    x: &[Complex64],
) -> f64 {
    let mut total = 0.0;
    for b in 0..s.len() {
        let mut acc = 0.0;
        for l in 0..nl {
            let k = b * nl + l;
            let theta = weights[k].ln() - vars[k].ln() - (s[b] - masks[k] * x[b]).norm_sqr() / vars[k];
            acc += (factors[k] * theta).exp();
        }
        total -= acc.ln();
    }
    total / s.len() as f64
}

pub fn naive_mse(masks: &[f64], s: &[Complex64], x: &[Complex64]) -> f64 {
    s.iter()
        .zip(x)
        .zip(masks)
        .map(|((sb, xb), w)| (sb - w * xb).norm_sqr())
        .sum::<f64>()
        / s.len() as f64
}

pub fn naive_cg(masks: &[f64], vars: &[f64], s: &[Complex64], x: &[Complex64]) -> f64 {
    (0..s.len())
        .map(|b| vars[b].ln() + (s[b] - masks[b] * x[b]).norm_sqr() / vars[b])
        .sum::<f64>()
        / s.len() as f64
}

/// Mean MSE of a fixed set of hypotheses.
pub fn naive_wta(nl: usize, masks: &[f64], winners: &[usize], s: &[Complex64], x: &[Complex64]) -> f64 {
    winners
        .iter()
        .map(|&l| {
            (0..s.len())
                .map(|b| (s[b] - masks[b * nl + l] * x[b]).norm_sqr())
                .sum::<f64>()
                / s.len() as f64
        })
        .sum::<f64>()
        / winners.len() as f64
}

/// Central-difference gradient with a step scaled to each coordinate.
pub fn central_diff(theta: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut work = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let h = 1e-6 * theta[i].abs().max(1.0);
            work[i] = theta[i] + h;
            let up = f(&work);
            work[i] = theta[i] - h;
            let down = f(&work);
            work[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖₂ / max(‖a‖₂, ‖b‖₂)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|u| u * u).sum::<f64>().sqrt();
    let nb = b.iter().map(|u| u * u).sum::<f64>().sqrt();
    let den = na.max(nb);
    if den == 0.0 {
        0.0
    } else {
        diff / den
    }
}

/// A spectrogram container with arbitrary coefficients (metadata only needs
/// to be consistent for the network, which reads `num_freqs`/`num_frames`).
pub fn raw_spectrogram(num_freqs: usize, num_frames: usize, coefficients: Vec<Complex64>) -> ComplexSpectrogram {
    assert_eq!(coefficients.len(), num_freqs * num_frames);
    let frame_len = 2 * (num_freqs - 1);
    ComplexSpectrogram {
        coefficients,
        num_freqs,
        num_frames,
        frame_len,
        hop_len: frame_len / 2,
        sample_rate: 16_000,
        num_samples: num_frames * frame_len / 2,
    }
}

/// Density of a zero-mean complex Gaussian.
pub fn cgauss(z: Complex64, var: f64) -> f64 {
    (-z.norm_sqr() / var).exp() / (PI * var)
}

/// Unnormalised posterior `p(S) p(X | S)` for scalar priors of one bin.
pub fn joint_density(s: Complex64, x: Complex64, sv: &[f64], sw: &[f64], nv: &[f64], nw: &[f64]) -> f64 {
    let prior: f64 = sv.iter().zip(sw).map(|(v, w)| w * cgauss(s, *v)).sum();
    let lik: f64 = nv.iter().zip(nw).map(|(v, w)| w * cgauss(x - s, *v)).sum();
    prior * lik
}

/// Outcome of checking the closed-form posterior against grid-integrated Bayes.
pub struct GridCheck {
    pub max_rel_err: f64,
}

/// Normalises `p(S) p(X|S)` on an `n × n` grid and compares it pointwise with
/// `density` wherever the grid density is above `1e-12` of its peak.
pub fn grid_bayes_check(
    x: Complex64,
    sv: &[f64],
    sw: &[f64],
    nv: &[f64],
    nw: &[f64],
    n: usize,
    density: impl Fn(Complex64) -> f64,
) -> GridCheck {
    // the posterior lives within a few std of gains in [0,1] applied to x
    let spread = sv.iter().chain(nv).copied().fold(0.0f64, f64::max).sqrt();
    let half = 0.5 * x.norm() + 7.0 * spread;
    let centre = 0.5 * x;
    let step = 2.0 * half / n as f64;
    let mut vals = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let s = centre + Complex64::new(-half + (i as f64 + 0.5) * step, -half + (j as f64 + 0.5) * step);
            vals.push((s, joint_density(s, x, sv, sw, nv, nw)));
        }
    }
    let evidence: f64 = vals.iter().map(|(_, v)| v).sum::<f64>() * step * step;
    let peak = vals.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let mut max_rel_err = 0.0f64;
    for (s, v) in &vals {
        if *v > 1e-12 * peak {
            let grid = v / evidence;
            let closed = density(*s);
            max_rel_err = max_rel_err.max((closed - grid).abs() / grid);
        }
    }
    GridCheck { max_rel_err }
}

/// Draws `n` samples from the posterior mixture of one bin and returns the
/// sample mean, sample total variance `E|S - mean|²` and the standard errors
/// of the mean's real and imaginary parts.
pub fn monte_carlo_moments(p: &PosteriorParams, bin: usize, x: Complex64, n: usize, seed: u64) -> (Complex64, f64, f64, f64) {
    use rand_distr::{weighted::WeightedIndex, Distribution, StandardNormal};
    let mut rng = rng(seed);
    let idx: Vec<usize> = p.range(bin).collect();
    let pick = WeightedIndex::new(idx.iter().map(|&k| p.weights[k])).unwrap();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let k = idx[pick.sample(&mut rng)];
        let sd = (p.variances[k] / 2.0).sqrt();
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        samples.push(p.masks[k] * x + Complex64::new(sd * re, sd * im));
    }
    let mean = samples.iter().sum::<Complex64>() / n as f64;
    let var_re = samples.iter().map(|s| (s.re - mean.re).powi(2)).sum::<f64>() / (n - 1) as f64;
    let var_im = samples.iter().map(|s| (s.im - mean.im).powi(2)).sum::<f64>() / (n - 1) as f64;
    let total = samples.iter().map(|s| (s - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
    (mean, total, (var_re / n as f64).sqrt(), (var_im / n as f64).sqrt())
}

/// Two-mode regression: the clean target is `g X` with `g` drawn from
/// `modes` independently of `X`, so no input feature predicts which mode
/// applies. Spectrograms use a 16-sample frame (9 bins).
pub fn bimodal_utterances(n: usize, modes: [f64; 2], seed: u64) -> Vec<cgmmse::data::Utterance> {
    use cgmmse::dsp::{stft, Waveform};
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let w = Waveform::new((0..256).map(|_| r.random_range(-1.0..1.0)).collect(), 16_000).unwrap();
            let noisy = stft(&w, 16, 8).unwrap();
            let g = modes[r.random_range(0..2)];
            let clean = ComplexSpectrogram {
                coefficients: noisy.coefficients.iter().map(|c| g * c).collect(),
                ..noisy.clone()
            };
            cgmmse::data::Utterance {
                id: format!("toy_{i:03}"),
                snr_db: 0.0,
                noisy,
                clean,
            }
        })
        .collect()
}

pub fn toy_framing() -> cgmmse::data::Framing {
    cgmmse::data::Framing {
        sample_rate: 16_000,
        frame_len: 16,
        hop_len: 8,
    }
}

/// Mean mask of each hypothesis over all bins of `utts`.
pub fn mean_masks(ck: &cgmmse::net::Checkpoint, utts: &[cgmmse::data::Utterance]) -> Vec<f64> {
    let nl = ck.net.num_components;
    let mut sums = vec![0.0; nl];
    let mut count = 0usize;
    for u in utts {
        let (p, _) = cgmmse::net::forward_masks(&ck.params, &ck.net, &u.noisy).unwrap();
        for (k, w) in p.masks.iter().enumerate() {
            sums[k % nl] += w;
        }
        count += p.num_bins;
    }
    sums.iter().map(|s| s / count as f64).collect()
}

/// Mean absolute deviation of hypothesis `l`'s masks from `target`.
pub fn mask_deviation(ck: &cgmmse::net::Checkpoint, utts: &[cgmmse::data::Utterance], l: usize, target: f64) -> f64 {
    let nl = ck.net.num_components;
    let mut total = 0.0;
    let mut count = 0usize;
    for u in utts {
        let (p, _) = cgmmse::net::forward_masks(&ck.params, &ck.net, &u.noisy).unwrap();
        for b in 0..p.num_bins {
            total += (p.masks[b * nl + l] - target).abs();
        }
        count += p.num_bins;
    }
    total / count as f64
}

/// Mean over bins of the mean pairwise distance between hypothesis masks.
pub fn pairwise_mask_distance(ck: &cgmmse::net::Checkpoint, utts: &[cgmmse::data::Utterance]) -> f64 {
    let nl = ck.net.num_components;
    let mut total = 0.0;
    let mut count = 0usize;
    for u in utts {
        let (p, _) = cgmmse::net::forward_masks(&ck.params, &ck.net, &u.noisy).unwrap();
        for b in 0..p.num_bins {
            for i in 0..nl {
                for j in i + 1..nl {
                    total += (p.masks[b * nl + i] - p.masks[b * nl + j]).abs();
                    count += 1;
                }
            }
        }
    }
    total / count as f64
}

/// Which loss drives the end-to-end check.
#[derive(Clone, Copy, Debug)]
pub enum FdObjective {
    Mse,
    Cg,
    Mixture(f64),
    Wta(usize),
}

/// Relative error of the network gradient for one random tiny problem.
pub fn network_fd_error(seed: u64, obj: FdObjective) -> f64 {
    let mut r = rng(seed);
    let nl = match obj {
        FdObjective::Mse | FdObjective::Cg => 1,
        _ => 4,
    };
    let cfg = cgmmse::net::NetConfig {
        num_freqs: 4,
        context: 1,
        hidden_dims: vec![2],
        num_components: nl,
        leaky_slope: 0.2,
    };
    let mut params = cgmmse::net::init_params(&cfg, seed).unwrap();
    // spread weights so the variance head is exercised away from zero
    for v in params.theta.iter_mut() {
        *v += r.random_range(-0.3..0.3);
    }
    let x = raw_spectrogram(4, 1, (0..4).map(|_| rand_c(&mut r, 3.0)).collect());
    let s: Vec<_> = x.coefficients.iter().map(|&v| r.random_range(0.2..0.9) * v + rand_c(&mut r, 0.3)).collect();

    let (post, tape) = cgmmse::net::forward(&params, &cfg, &x).unwrap();
    let betas = vec![if let FdObjective::Mixture(b) = obj { b } else { 0.0 }; nl];
    let factors: Vec<f64> = post.variances.iter().enumerate().map(|(k, v)| v.powf(betas[k % nl])).collect();
    let (upstream, winners) = match obj {
        FdObjective::Mse => (cgmmse::losses::mse_loss(&post, &s, &x.coefficients).unwrap(), vec![]),
        FdObjective::Cg => (cgmmse::losses::cg_nll(&post, &s, &x.coefficients).unwrap(), vec![]),
        FdObjective::Mixture(_) => (
            cgmmse::losses::cgmm_nll_beta(&post, &s, &x.coefficients, &cgmmse::losses::GradModConfig::new(betas.clone()).unwrap()).unwrap(),
            vec![],
        ),
        FdObjective::Wta(k) => cgmmse::losses::wta_loss(&post, &s, &x.coefficients, k).unwrap(),
    };
    let grad = cgmmse::net::backward(&params, &cfg, &tape, &upstream).unwrap();

    let loss_of = |theta: &[f64]| {
        let mut p = params.clone();
        p.theta.copy_from_slice(theta);
        let (q, _) = cgmmse::net::forward(&p, &cfg, &x).unwrap();
        match obj {
            FdObjective::Mse => naive_mse(&q.masks, &s, &x.coefficients),
            FdObjective::Cg => naive_cg(&q.masks, &q.variances, &s, &x.coefficients),
            FdObjective::Mixture(_) => naive_mixture_nll(nl, &q.masks, &q.variances, &q.weights, &factors, &s, &x.coefficients),
            FdObjective::Wta(_) => naive_wta(nl, &q.masks, &winners, &s, &x.coefficients),
        }
    };
    let fd = central_diff(&params.theta.clone(), loss_of);
    params.theta.clear();
    rel_err(&grad, &fd)
}
