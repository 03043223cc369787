//! The `cgmmse` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical abort.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::Config;
use crate::data::{build_corpus, load_split, Manifest, Split};
use crate::dsp::{istft, read_wav_expect_rate, stft, write_wav, ComplexSpectrogram, WavEncoding};
use crate::error::{Error, Result};
use crate::eval::{evaluate, sparsify_heatmap, UncertaintyKey};
use crate::net::read_checkpoint;
use crate::posterior::{decompose_uncertainty, write_uncertainty_csv};
use crate::train::{train_model, RunManifest, RunOutput, TrainData};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const RUN_MANIFEST: &str = "run_manifest.jsonl";

#[derive(Debug, Parser)]
#[command(name = "cgmmse", version, about = "Speech enhancement with mixture posteriors and uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic corpus and its manifest.
    SynthData(Common),
    /// Train the model named by the `model` key.
    Train(Common),
    /// Enhance the WAV named by `input` with `checkpoint`.
    Enhance(Common),
    /// Score `checkpoint` on a manifest split.
    Evaluate(Common),
    /// Sparsification curves for the heatmap CSV named by `heatmap`.
    Sparsify(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Shorthand for `--set seed=N`.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        for pair in &self.set {
            cfg.set_pair(pair)?;
        }
        if let Some(s) = self.seed {
            cfg.set("seed", &s.to_string())?;
        }
        Ok(cfg)
    }

    fn out(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownKey(_) => EXIT_USAGE,
        Error::NumericalAbort { .. } => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("cgmmse: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::SynthData(c) => synth_data(&c.config()?, &c.out_default_data()?),
        Command::Train(c) => {
            let cfg = c.config()?;
            let out = c.out(&format!("runs/{}", cfg.model()?));
            train(&cfg, &out)
        }
        Command::Enhance(c) => enhance(&c.config()?, &c.out("enhanced")),
        Command::Evaluate(c) => evaluate_cmd(&c.config()?, &c.out("eval")),
        Command::Sparsify(c) => sparsify_cmd(&c.config()?, &c.out("sparsify")),
    }
}

impl Common {
    fn out_default_data(&self) -> Result<PathBuf> {
        match &self.out {
            Some(p) => Ok(p.clone()),
            None => self.config()?.path("data_dir"),
        }
    }
}

/// Writes the resolved configuration and starts the run manifest.
fn begin(cfg: &Config, out: &Path, command: &str) -> Result<RunManifest> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let cfg_path = out.join("config.cfg");
    std::fs::write(&cfg_path, cfg.to_text()).map_err(|e| Error::io(&cfg_path, e))?;
    let mut m = RunManifest::create(out, RUN_MANIFEST)?;
    let resolved: serde_json::Map<String, serde_json::Value> =
        cfg.resolved().into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    m.record(json!({"kind": "command", "command": command, "config": resolved}))?;
    Ok(m)
}

pub fn synth_data(cfg: &Config, out: &Path) -> Result<()> {
    let mut m = begin(cfg, out, "synth-data")?;
    let manifest = build_corpus(&cfg.corpus()?, out)?;
    let hash = manifest.hash()?;
    m.record(json!({"kind": "output", "manifest": out.join(crate::data::MANIFEST_FILE), "rows": manifest.rows.len(), "dataset_hash": hash}))?;
    println!("wrote {} utterances to {} (hash {hash})", manifest.rows.len(), out.display());
    Ok(())
}

pub fn train(cfg: &Config, out: &Path) -> Result<()> {
    let model = cfg.model()?;
    let tcfg = cfg.train()?;
    let framing = cfg.framing()?;
    let manifest = Manifest::read(cfg.path("data_dir")?)?;
    let data = TrainData {
        train: load_split(&manifest, Split::Train, framing)?,
        val: load_split(&manifest, Split::Val, framing)?,
        framing,
        dataset_hash: manifest.hash()?,
    };
    let mut m = begin(cfg, out, "train")?;
    let outcome = train_model(model, &tcfg, &data, &RunOutput::dir(out), &mut m)?;
    println!(
        "{model}: best validation loss {:.6} at epoch {}, checkpoint {}",
        outcome.best_val,
        outcome.checkpoint.epoch,
        outcome.checkpoint_path.as_deref().unwrap_or(Path::new("<memory>")).display()
    );
    Ok(())
}

pub fn enhance(cfg: &Config, out: &Path) -> Result<()> {
    let ck = read_checkpoint(cfg.path("checkpoint")?)?;
    let input = cfg.path("input")?;
    let noisy = read_wav_expect_rate(&input, ck.sample_rate)?;
    let mut m = begin(cfg, out, "enhance")?;
    let x = stft(&noisy, ck.frame_len, ck.hop_len)?;
    let post = ck.posterior(&x)?;
    let maps = decompose_uncertainty(&post, &x.coefficients)?;
    let est = istft(&ComplexSpectrogram::with_coefficients(&x, maps.mean.clone())?)?;
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into());
    let wav = out.join(format!("{stem}_enhanced.wav"));
    let csv = out.join(format!("{stem}_uncertainty.csv"));
    write_wav(&wav, &est, WavEncoding::Float32)?;
    write_uncertainty_csv(&csv, &maps, x.num_freqs)?;
    m.record(json!({"kind": "output", "wav": wav, "uncertainty": csv}))?;
    println!("wrote {}", wav.display());
    Ok(())
}

pub fn evaluate_cmd(cfg: &Config, out: &Path) -> Result<()> {
    let ck = read_checkpoint(cfg.path("checkpoint")?)?;
    let manifest = Manifest::read(cfg.path("data_dir")?)?;
    let split = cfg.split()?;
    let framing = crate::data::Framing {
        sample_rate: ck.sample_rate,
        frame_len: ck.frame_len,
        hop_len: ck.hop_len,
    };
    let utts = load_split(&manifest, split, framing)?;
    let mut m = begin(cfg, out, "evaluate")?;
    let report = evaluate(&utts, |u| ck.posterior(&u.noisy), &cfg.eval_options()?, Some(out))?;
    let gain = report.metrics.column(|r| r.si_sdr_out - r.si_sdr_in);
    println!(
        "{} utterances, SI-SDR gain {:.2} dB [{:.2}, {:.2}]",
        report.metrics.rows.len(),
        gain.mean,
        gain.ci_low,
        gain.ci_high
    );
    for key in UncertaintyKey::ALL {
        let (p, r) = report.mean_ause(key);
        println!("AUSE {key}: {p:.5} (random {r:.5})");
    }
    m.record(json!({"kind": "output", "dir": out, "utterances": report.metrics.rows.len()}))?;
    Ok(())
}

pub fn sparsify_cmd(cfg: &Config, out: &Path) -> Result<()> {
    let heatmap = cfg.path("heatmap")?;
    let mut m = begin(cfg, out, "sparsify")?;
    let csv = out.join("sparsification.csv");
    let scores = sparsify_heatmap(&heatmap, &csv, cfg.get("seed")?)?;
    for (key, a) in &scores {
        println!("AUSE {key}: {a:.5}");
    }
    m.record(json!({"kind": "output", "curves": csv}))?;
    Ok(())
}
