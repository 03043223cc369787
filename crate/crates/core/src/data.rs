//! Synthetic speech/noise corpus.
//!
//! "Speech" is a harmonic complex with a piecewise-constant fundamental, one
//! value per syllable, shaped by a raised-sine syllable envelope and separated
//! into words by silent gaps. Noise is white, pink or pink with a slow random
//! gain. Mixtures are scaled to a target SNR measured on active-speech samples
//! and written as float32 WAVs with a JSON-lines manifest.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::{read_wav_expect_rate, stft, write_wav, ComplexSpectrogram, WavEncoding, Waveform};
use crate::error::{Error, Result};

/// Blocks whose mean power is within this many dB of the loudest block count
/// as active speech.
pub const ACTIVITY_THRESHOLD_DB: f64 = -40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Pink,
    Modulated,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Modulated];
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::Modulated => "modulated",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(NoiseKind::White),
            "pink" => Ok(NoiseKind::Pink),
            "modulated" => Ok(NoiseKind::Modulated),
            other => Err(Error::InvalidInput(format!("unknown noise kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub snr_db: f64,
    pub speech_seed: u64,
    pub noise_seed: u64,
    pub duration_s: f64,
    pub noise_kind: NoiseKind,
}

/// One voiced syllable of a synthetic utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Syllable {
    pub start: usize,
    pub len: usize,
    pub f0: f64,
}

/// Syllable layout and harmonic count of one synthetic utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeechPlan {
    pub syllables: Vec<Syllable>,
    pub num_harmonics: usize,
    pub phases: Vec<f64>,
}

fn check_duration(duration_s: f64, sample_rate: u32) -> Result<usize> {
    if !(duration_s >= 1.0) || !duration_s.is_finite() {
        return Err(Error::InvalidInput(format!(
            "duration {duration_s} s is below the 1 s minimum"
        )));
    }
    if sample_rate == 0 {
        return Err(Error::InvalidInput("sample rate must be positive".into()));
    }
    Ok((duration_s * sample_rate as f64).round() as usize)
}

pub fn speech_plan(seed: u64, duration_s: f64, sample_rate: u32) -> Result<SpeechPlan> {
    let n = check_duration(duration_s, sample_rate)?;
    let sr = sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let syllable_rate = rng.random_range(3.0..6.0);
    let syl_len = (sr / syllable_rate).round() as usize;
    let num_harmonics = rng.random_range(5..=12);
    let phases = (0..num_harmonics).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let tail = (0.05 * sr) as usize;

    let mut syllables = Vec::new();
    let mut t = 0usize;
    'words: loop {
        t += (rng.random_range(0.2..0.4) * sr) as usize;
        let word = rng.random_range(1..=3);
        for _ in 0..word {
            if t + syl_len + tail > n {
                break 'words;
            }
            syllables.push(Syllable {
                start: t,
                len: syl_len,
                f0: rng.random_range(80.0..300.0),
            });
            t += syl_len;
        }
    }
    Ok(SpeechPlan {
        syllables,
        num_harmonics,
        phases,
    })
}

/// Harmonic pseudo-speech, peak-normalised to 0.5.
pub fn synth_speech(seed: u64, duration_s: f64, sample_rate: u32) -> Result<Waveform> {
    let n = check_duration(duration_s, sample_rate)?;
    let plan = speech_plan(seed, duration_s, sample_rate)?;
    let sr = sample_rate as f64;
    let mut samples = vec![0.0; n];
    for syl in &plan.syllables {
        for i in 0..syl.len {
            let env = (PI * i as f64 / syl.len as f64).sin().powi(2);
            let tt = (syl.start + i) as f64 / sr;
            let v: f64 = (1..=plan.num_harmonics)
                .map(|k| (2.0 * PI * k as f64 * syl.f0 * tt + plan.phases[k - 1]).sin() / k as f64)
                .sum();
            samples[syl.start + i] = env * v;
        }
    }
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        samples.iter_mut().for_each(|x| *x *= 0.5 / peak);
    }
    Waveform::new(samples, sample_rate)
}

pub fn synth_noise(kind: NoiseKind, seed: u64, duration_s: f64, sample_rate: u32) -> Result<Waveform> {
    let n = check_duration(duration_s, sample_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let samples = match kind {
        NoiseKind::White => white,
        NoiseKind::Pink => pink_from_white(&white),
        NoiseKind::Modulated => {
            let pink = pink_from_white(&white);
            let rate = rng.random_range(0.2..1.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            let depth_db = rng.random_range(3.0..9.0);
            let sr = sample_rate as f64;
            pink.iter()
                .enumerate()
                .map(|(i, x)| {
                    let db = depth_db * (2.0 * PI * rate * i as f64 / sr + phase).sin();
                    x * 10f64.powf(db / 20.0)
                })
                .collect()
        }
    };
    let rms = (samples.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    Waveform::new(samples.iter().map(|x| 0.1 * x / rms).collect(), sample_rate)
}

/// Shapes white noise to a 1/f power spectrum in the frequency domain.
fn pink_from_white(white: &[f64]) -> Vec<f64> {
    let n = white.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = white.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for (k, v) in buf.iter_mut().enumerate().skip(1) {
        let kk = k.min(n - k) as f64;
        *v /= kk.sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Indices of samples in active-speech blocks (10 ms).
pub fn active_samples(clean: &Waveform) -> Vec<usize> {
    let block = (clean.sample_rate as usize / 100).max(1);
    let energies: Vec<f64> = clean
        .samples
        .chunks(block)
        .map(|c| c.iter().map(|x| x * x).sum::<f64>() / c.len() as f64)
        .collect();
    let max = energies.iter().copied().fold(0.0, f64::max);
    let floor = max * 10f64.powf(ACTIVITY_THRESHOLD_DB / 10.0);
    energies
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0.0 && e >= floor)
        .flat_map(|(b, _)| b * block..((b + 1) * block).min(clean.len()))
        .collect()
}

/// SNR in dB over the active-speech samples of `clean`.
pub fn active_snr_db(clean: &Waveform, noise: &Waveform) -> f64 {
    let idx = active_samples(clean);
    let ec: f64 = idx.iter().map(|&i| clean.samples[i].powi(2)).sum();
    let en: f64 = idx.iter().map(|&i| noise.samples[i].powi(2)).sum();
    10.0 * (ec / en).log10()
}

/// Scales `noise` so that the active-speech SNR equals `snr_db` and returns
/// `(clean + scaled_noise, scaled_noise)`. Noise is looped or truncated to the
/// clean length.
pub fn mix_at_snr(clean: &Waveform, noise: &Waveform, snr_db: f64) -> Result<(Waveform, Waveform)> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidInput(format!("SNR must be finite, got {snr_db}")));
    }
    if clean.sample_rate != noise.sample_rate {
        return Err(Error::InvalidInput("clean and noise sample rates differ".into()));
    }
    if clean.energy() == 0.0 {
        return Err(Error::InvalidInput("clean signal has zero energy".into()));
    }
    if noise.is_empty() {
        return Err(Error::InvalidInput("noise is empty".into()));
    }
    let looped: Vec<f64> = (0..clean.len()).map(|i| noise.samples[i % noise.len()]).collect();
    let idx = active_samples(clean);
    let ec: f64 = idx.iter().map(|&i| clean.samples[i].powi(2)).sum();
    let en: f64 = idx.iter().map(|&i| looped[i].powi(2)).sum();
    if en == 0.0 {
        return Err(Error::InvalidInput("noise is silent where speech is active".into()));
    }
    let gain = (ec / (en * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled: Vec<f64> = looped.iter().map(|x| gain * x).collect();
    let mixture = clean.samples.iter().zip(&scaled).map(|(c, n)| c + n).collect();
    Ok((
        Waveform::new(mixture, clean.sample_rate)?,
        Waveform::new(scaled, clean.sample_rate)?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub train_snr_min: f64,
    pub train_snr_max: f64,
    pub test_snr_grid: Vec<f64>,
    pub master_seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_train: 200,
            n_val: 40,
            n_test: 40,
            duration_s: 2.0,
            sample_rate: 16_000,
            train_snr_min: -5.0,
            train_snr_max: 20.0,
            test_snr_grid: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    fn index(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidInput(format!("unknown split `{other}`"))),
        }
    }
}

/// One manifest line. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub split: Split,
    pub clean: PathBuf,
    pub noise: PathBuf,
    pub mixture: PathBuf,
    #[serde(flatten)]
    pub spec: MixSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub rows: Vec<ManifestRow>,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Seeds of different splits live in disjoint ranges of this width.
const SEED_STRIDE: u64 = 1_000_000;

impl Manifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// SHA-256 of the manifest text, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_text()?.as_bytes()))
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = self.root.join(MANIFEST_FILE);
        let text = self.to_text()?;
        std::fs::File::create(&path)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Reads `manifest.jsonl` from a directory, or the given file.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l).map_err(|e| Error::Format {
                    what: "manifest",
                    detail: e.to_string(),
                })
            })
            .collect::<Result<Vec<ManifestRow>>>()?;
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { root, rows })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds the mixing plan without touching the filesystem.
pub fn plan_corpus(cfg: &CorpusConfig) -> Result<Vec<ManifestRow>> {
    check_duration(cfg.duration_s, cfg.sample_rate)?;
    if !(cfg.train_snr_min <= cfg.train_snr_max) || cfg.test_snr_grid.is_empty() {
        return Err(Error::InvalidInput("empty SNR range".into()));
    }
    if [cfg.n_train, cfg.n_val, cfg.n_test].iter().any(|&n| n as u64 >= SEED_STRIDE / 2) {
        return Err(Error::InvalidInput("too many utterances per split".into()));
    }
    let mut rows = Vec::new();
    for split in Split::ALL {
        let count = match split {
            Split::Train => cfg.n_train,
            Split::Val => cfg.n_val,
            Split::Test => cfg.n_test,
        };
        let base = cfg
            .master_seed
            .wrapping_mul(4 * SEED_STRIDE)
            .wrapping_add(split.index() * SEED_STRIDE);
        for i in 0..count {
            let speech_seed = base + i as u64;
            let noise_seed = speech_seed + SEED_STRIDE / 2;
            let snr_db = match split {
                Split::Test => cfg.test_snr_grid[i % cfg.test_snr_grid.len()],
                _ => ChaCha8Rng::seed_from_u64(speech_seed ^ 0x9e37_79b9_7f4a_7c15)
                    .random_range(cfg.train_snr_min..=cfg.train_snr_max),
            };
            let id = format!("{split}_{i:04}");
            rows.push(ManifestRow {
                clean: PathBuf::from(format!("{split}/{id}_clean.wav")),
                noise: PathBuf::from(format!("{split}/{id}_noise.wav")),
                mixture: PathBuf::from(format!("{split}/{id}_mix.wav")),
                id,
                split,
                spec: MixSpec {
                    snr_db,
                    speech_seed,
                    noise_seed,
                    duration_s: cfg.duration_s,
                    noise_kind: NoiseKind::ALL[i % 3],
                },
            });
        }
    }
    Ok(rows)
}

/// Renders one manifest row to `(clean, scaled_noise, mixture)`.
pub fn render_row(row: &ManifestRow, sample_rate: u32) -> Result<(Waveform, Waveform, Waveform)> {
    let s = &row.spec;
    let clean = synth_speech(s.speech_seed, s.duration_s, sample_rate)?;
    let noise = synth_noise(s.noise_kind, s.noise_seed, s.duration_s, sample_rate)?;
    let (mix, scaled) = mix_at_snr(&clean, &noise, s.snr_db)?;
    Ok((clean, scaled, mix))
}

pub fn build_corpus(cfg: &CorpusConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let root = out_dir.as_ref().to_path_buf();
    let rows = plan_corpus(cfg)?;
    for split in Split::ALL {
        let dir = root.join(split.to_string());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    for row in &rows {
        let (clean, noise, mix) = render_row(row, cfg.sample_rate)?;
        write_wav(root.join(&row.clean), &clean, WavEncoding::Float32)?;
        write_wav(root.join(&row.noise), &noise, WavEncoding::Float32)?;
        write_wav(root.join(&row.mixture), &mix, WavEncoding::Float32)?;
    }
    let manifest = Manifest { root, rows };
    manifest.write()?;
    Ok(manifest)
}

/// Noisy and clean spectrograms of one utterance.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub id: String,
    pub snr_db: f64,
    pub noisy: ComplexSpectrogram,
    pub clean: ComplexSpectrogram,
}

/// STFT framing shared by loading, training and enhancement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Framing {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop_len: usize,
}

pub fn load_split(manifest: &Manifest, split: Split, framing: Framing) -> Result<Vec<Utterance>> {
    manifest
        .split(split)
        .map(|row| {
            let clean = read_wav_expect_rate(manifest.root.join(&row.clean), framing.sample_rate)?;
            let mix = read_wav_expect_rate(manifest.root.join(&row.mixture), framing.sample_rate)?;
            Ok(Utterance {
                id: row.id.clone(),
                snr_db: row.spec.snr_db,
                noisy: stft(&mix, framing.frame_len, framing.hop_len)?,
                clean: stft(&clean, framing.frame_len, framing.hop_len)?,
            })
        })
        .collect()
}
