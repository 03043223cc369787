//! Flat `key = value` configuration with a fixed key registry.
//!
//! `#` starts a comment. Keys not in [`KEYS`] are rejected. Every key has a
//! default, so an empty file is a valid configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{CorpusConfig, Framing, Split};
use crate::error::{Error, Result};
use crate::eval::EvalOptions;
use crate::train::{ModelKind, TrainConfig, WtaConfig};

/// `(key, default, description)` for every accepted key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "training seed; also the corpus master seed for synth-data"),
    ("data_dir", "data", "corpus directory holding manifest.jsonl"),
    ("n_train", "200", "training utterances"),
    ("n_val", "40", "validation utterances"),
    ("n_test", "40", "test utterances"),
    ("duration_s", "2.0", "utterance length in seconds (at least 1)"),
    ("sample_rate", "16000", "sample rate in Hz"),
    ("train_snr_min", "-5", "lower bound of the training SNR range, dB"),
    ("train_snr_max", "20", "upper bound of the training SNR range, dB"),
    ("test_snr_grid", "-10,-5,0,5,10", "test SNRs, cycled over test utterances"),
    ("frame_len", "512", "STFT frame length"),
    ("hop_len", "256", "STFT hop"),
    ("model", "cgmm4", "wf | cgmm1 | cgmm4 | cgmm4-cons | cgmm4-pre"),
    ("lr_init", "1e-3", "initial learning rate"),
    ("plateau_patience", "3", "epochs without improvement before halving the learning rate"),
    ("plateau_factor", "0.5", "learning-rate factor on plateau"),
    ("early_stop_patience", "10", "epochs without improvement before stopping"),
    ("max_epochs", "40", "epoch budget per training stage"),
    ("batch_size", "8", "utterances per step"),
    ("weight_decay", "5e-4", "decoupled weight decay"),
    ("beta", "0.5", "stop-gradient variance exponent"),
    ("finetune_lr", "1e-5", "initial learning rate after pre-training"),
    ("improve_tol", "1e-6", "minimum validation decrease that counts as improvement"),
    ("clip_norm", "5.0", "global gradient-norm clip for learned-variance models"),
    ("lr_floor", "1e-6", "lowest learning rate reached by plateau halving"),
    ("wta_total_epochs", "24", "winner-takes-all epochs under the K schedule"),
    ("wta_halve_every", "6", "epochs between halvings of K"),
    ("wta_lr_halve_every", "1", "epochs between learning-rate halvings after the K schedule"),
    ("wta_lr_floor", "1e-6", "learning rate that ends pre-training"),
    ("context", "3", "context frames on each side of the input"),
    ("hidden_dims", "128,128", "hidden layer widths"),
    ("checkpoint", "", "checkpoint for enhance and evaluate"),
    ("input", "", "noisy WAV for enhance"),
    ("split", "test", "manifest split for evaluate"),
    ("heatmaps", "4", "utterances that get heatmap CSVs in evaluate"),
    ("heatmap", "", "heatmap CSV for sparsify"),
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
}

fn registered(key: &str) -> Result<&'static str> {
    KEYS.iter()
        .map(|(k, _, _)| *k)
        .find(|k| *k == key)
        .ok_or_else(|| Error::UnknownKey(key.to_string()))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{raw}`", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = registered(key)?;
        self.values.insert(k, value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        let k = registered(key)?;
        Ok(self
            .values
            .get(k)
            .map(String::as_str)
            .unwrap_or_else(|| KEYS.iter().find(|e| e.0 == k).expect("registered").1))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("bad value `{raw}` for `{key}`")))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad list value `{raw}` for `{key}`")))
            })
            .collect()
    }

    /// A path-valued key that must be set.
    pub fn path(&self, key: &str) -> Result<PathBuf> {
        let raw = self.raw(key)?;
        if raw.is_empty() {
            return Err(Error::Config(format!("`{key}` must be set")));
        }
        Ok(PathBuf::from(raw))
    }

    /// Every key with its effective value, in registry order.
    pub fn resolved(&self) -> Vec<(&'static str, String)> {
        KEYS.iter()
            .map(|(k, _, _)| (*k, self.raw(k).expect("registered").to_string()))
            .collect()
    }

    /// The resolved configuration in file syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.resolved() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn corpus(&self) -> Result<CorpusConfig> {
        Ok(CorpusConfig {
            n_train: self.get("n_train")?,
            n_val: self.get("n_val")?,
            n_test: self.get("n_test")?,
            duration_s: self.get("duration_s")?,
            sample_rate: self.get("sample_rate")?,
            train_snr_min: self.get("train_snr_min")?,
            train_snr_max: self.get("train_snr_max")?,
            test_snr_grid: self.get_list("test_snr_grid")?,
            master_seed: self.get("seed")?,
        })
    }

    pub fn framing(&self) -> Result<Framing> {
        Ok(Framing {
            sample_rate: self.get("sample_rate")?,
            frame_len: self.get("frame_len")?,
            hop_len: self.get("hop_len")?,
        })
    }

    pub fn model(&self) -> Result<ModelKind> {
        self.raw("model")?.parse()
    }

    pub fn split(&self) -> Result<Split> {
        self.raw("split")?.parse().map_err(|_| Error::Config(format!("bad split `{}`", self.raw("split").unwrap_or(""))))
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            lr_init: self.get("lr_init")?,
            plateau_patience: self.get("plateau_patience")?,
            plateau_factor: self.get("plateau_factor")?,
            early_stop_patience: self.get("early_stop_patience")?,
            max_epochs: self.get("max_epochs")?,
            batch_size: self.get("batch_size")?,
            weight_decay: self.get("weight_decay")?,
            beta: self.get("beta")?,
            finetune_lr: self.get("finetune_lr")?,
            improve_tol: self.get("improve_tol")?,
            clip_norm: self.get("clip_norm")?,
            lr_floor: self.get("lr_floor")?,
            wta: WtaConfig {
                total_epochs: self.get("wta_total_epochs")?,
                halve_every: self.get("wta_halve_every")?,
                lr_halve_every: self.get("wta_lr_halve_every")?,
                lr_floor: self.get("wta_lr_floor")?,
            },
            context: self.get("context")?,
            hidden_dims: self.get_list("hidden_dims")?,
            seed: self.get("seed")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn eval_options(&self) -> Result<EvalOptions> {
        Ok(EvalOptions {
            heatmaps: self.get("heatmaps")?,
            random_seed: self.get("seed")?,
        })
    }
}
