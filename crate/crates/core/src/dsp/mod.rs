//! Time-frequency analysis and synthesis.
//!
//! The analysis uses a periodic Hann window. Every waveform is zero-padded by
//! `frame_len - hop_len` samples in front and as far as needed at the back, so
//! each original sample is covered by exactly `frame_len / hop_len` frames.
//! Synthesis is weighted overlap-add normalized by the summed squared window,
//! which makes `istft(stft(w))` reproduce `w` on every original sample.
//!
//! Spectrogram coefficients are stored frame-major: bin `(f, t)` lives at
//! index `t * num_freqs + f`.

mod dump;
mod wav;

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub use dump::{read_spectrogram, write_spectrogram, SpectrogramHeader};
pub use wav::{read_wav, read_wav_expect_rate, write_wav, WavEncoding};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_FRAME_LEN: usize = 512;
pub const DEFAULT_HOP_LEN: usize = 256;

/// A mono real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Errors unless the waveform is sampled at `rate`. There is no resampling.
    pub fn require_rate(&self, rate: u32) -> Result<()> {
        if self.sample_rate != rate {
            return Err(Error::UnsupportedAudio(format!(
                "sample rate {} Hz, expected {} Hz (resampling is not supported)",
                self.sample_rate, rate
            )));
        }
        Ok(())
    }
}

/// One-sided complex STFT coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub coefficients: Vec<Complex64>,
    pub num_freqs: usize,
    pub num_frames: usize,
    pub frame_len: usize,
    pub hop_len: usize,
    pub sample_rate: u32,
    /// Length of the waveform the spectrogram was computed from.
    pub num_samples: usize,
}

impl ComplexSpectrogram {
    pub fn zeros_like(other: &Self) -> Self {
        Self {
            coefficients: vec![Complex64::new(0.0, 0.0); other.coefficients.len()],
            ..other.clone()
        }
    }

    /// Copies the metadata of `template` and takes new coefficients.
    pub fn with_coefficients(template: &Self, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != template.coefficients.len() {
            return Err(Error::shape(
                template.coefficients.len(),
                coefficients.len(),
            ));
        }
        Ok(Self {
            coefficients,
            ..template.clone()
        })
    }

    pub fn num_bins(&self) -> usize {
        self.coefficients.len()
    }

    #[inline]
    pub fn index(&self, f: usize, t: usize) -> usize {
        t * self.num_freqs + f
    }

    #[inline]
    pub fn get(&self, f: usize, t: usize) -> Complex64 {
        self.coefficients[self.index(f, t)]
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.coefficients[t * self.num_freqs..(t + 1) * self.num_freqs]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.num_freqs == other.num_freqs && self.num_frames == other.num_frames
    }

    fn validate(&self) -> Result<()> {
        check_framing(self.frame_len, self.hop_len)?;
        if self.num_freqs != self.frame_len / 2 + 1 {
            return Err(Error::InvalidInput(format!(
                "{} frequency bins inconsistent with frame length {}",
                self.num_freqs, self.frame_len
            )));
        }
        if self.coefficients.len() != self.num_freqs * self.num_frames {
            return Err(Error::shape(
                self.num_freqs * self.num_frames,
                self.coefficients.len(),
            ));
        }
        if self.num_frames != num_frames(self.num_samples, self.frame_len, self.hop_len) {
            return Err(Error::InvalidInput(format!(
                "{} frames inconsistent with {} samples at hop {}",
                self.num_frames, self.num_samples, self.hop_len
            )));
        }
        Ok(())
    }
}

fn check_framing(frame_len: usize, hop_len: usize) -> Result<()> {
    if frame_len < 2 || frame_len % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "frame length {frame_len} must be even and at least 2"
        )));
    }
    if hop_len == 0 || frame_len % hop_len != 0 || frame_len / hop_len < 2 {
        return Err(Error::InvalidInput(format!(
            "hop {hop_len} must divide frame length {frame_len} with at least 50% overlap"
        )));
    }
    Ok(())
}

/// Periodic (DFT-even) Hann window.
pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Zero samples prepended before framing.
pub fn front_padding(frame_len: usize, hop_len: usize) -> usize {
    frame_len - hop_len
}

/// Number of frames `stft` produces for a waveform of `num_samples`.
pub fn num_frames(num_samples: usize, frame_len: usize, hop_len: usize) -> usize {
    (num_samples + front_padding(frame_len, hop_len)).div_ceil(hop_len)
}

pub fn stft(w: &Waveform, frame_len: usize, hop_len: usize) -> Result<ComplexSpectrogram> {
    check_framing(frame_len, hop_len)?;
    if w.len() < frame_len {
        return Err(Error::InvalidInput(format!(
            "waveform of {} samples is shorter than one frame ({frame_len})",
            w.len()
        )));
    }
    let pad = front_padding(frame_len, hop_len);
    let frames = num_frames(w.len(), frame_len, hop_len);
    let num_freqs = frame_len / 2 + 1;
    let window = hann_periodic(frame_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(frame_len);

    let mut coefficients = Vec::with_capacity(frames * num_freqs);
    let mut buf = vec![Complex64::new(0.0, 0.0); frame_len];
    for t in 0..frames {
        let start = t * hop_len;
        for (n, slot) in buf.iter_mut().enumerate() {
            let x = (start + n)
                .checked_sub(pad)
                .and_then(|i| w.samples.get(i))
                .copied()
                .unwrap_or(0.0);
            *slot = Complex64::new(x * window[n], 0.0);
        }
        fft.process(&mut buf);
        coefficients.extend_from_slice(&buf[..num_freqs]);
    }
    Ok(ComplexSpectrogram {
        coefficients,
        num_freqs,
        num_frames: frames,
        frame_len,
        hop_len,
        sample_rate: w.sample_rate,
        num_samples: w.len(),
    })
}

pub fn istft(spec: &ComplexSpectrogram) -> Result<Waveform> {
    spec.validate()?;
    let n = spec.frame_len;
    let hop = spec.hop_len;
    let pad = front_padding(n, hop);
    let window = hann_periodic(n);
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let padded_len = (spec.num_frames - 1) * hop + n;

    let mut acc = vec![0.0; padded_len];
    let mut norm = vec![0.0; padded_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..spec.num_frames {
        let frame = spec.frame(t);
        buf[..spec.num_freqs].copy_from_slice(frame);
        // restore the conjugate-symmetric half; DC and Nyquist must be real
        buf[0].im = 0.0;
        buf[n / 2].im = 0.0;
        for k in 1..n / 2 {
            buf[n - k] = frame[k].conj();
        }
        fft.process(&mut buf);
        let start = t * hop;
        for (i, (c, w)) in buf.iter().zip(&window).enumerate() {
            acc[start + i] += c.re / n as f64 * w;
            norm[start + i] += w * w;
        }
    }
    let samples = (pad..pad + spec.num_samples)
        .map(|i| if norm[i] > 1e-12 { acc[i] / norm[i] } else { 0.0 })
        .collect();
    Waveform::new(samples, spec.sample_rate)
}
