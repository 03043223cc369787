//! Optimisation: Adam, the validation-plateau schedule, early stopping,
//! winner-takes-all pre-training and mixture training.
//!
//! All randomness comes from the run seed. Utterances are visited in a
//! seeded order and per-utterance gradients are summed in that order, so two
//! runs with the same config, seed and data produce identical parameters.

use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::data::{Framing, Utterance};
use crate::error::{Error, Result};
use crate::losses::{cgmm_nll, cgmm_nll_beta, mse_loss, wta_loss, GradModConfig, LossGrad};
use crate::net::{
    backward, forward, forward_masks, init_params, write_checkpoint, Checkpoint, Head, NetConfig, NetParams,
};
use crate::posterior::PosteriorParams;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One Adam update with decoupled weight decay, in place.
///
/// Non-finite gradients are rejected before anything is modified.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64, weight_decay: f64) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::shape(params.len(), format!("grads {}, state {}", grads.len(), state.m.len())));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite gradient at index {i}: {}", grads[i])));
    }
    state.step += 1;
    let c1 = 1.0 - ADAM_BETA1.powi(state.step as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * (m_hat / (v_hat.sqrt() + ADAM_EPS) + weight_decay * params[i]);
    }
    Ok(())
}

/// Rescales `grads` so its Euclidean norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Winner-takes-all stage settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WtaConfig {
    /// Epochs under the halving winner schedule.
    pub total_epochs: usize,
    /// `K` halves after this many epochs.
    pub halve_every: usize,
    /// After the schedule, the learning rate halves every this many epochs
    /// until it would drop below `lr_floor`.
    pub lr_halve_every: usize,
    pub lr_floor: f64,
}

impl Default for WtaConfig {
    fn default() -> Self {
        Self {
            total_epochs: 24,
            halve_every: 6,
            lr_halve_every: 1,
            lr_floor: 1e-6,
        }
    }
}

impl WtaConfig {
    /// Number of winners in a 1-based epoch: `L` halved every `halve_every`
    /// epochs, floored at 1. Epochs after the schedule use 1.
    pub fn winners(&self, num_components: usize, epoch: usize) -> usize {
        let halvings = (epoch.saturating_sub(1) / self.halve_every.max(1)) as u32;
        (num_components >> halvings.min(63)).max(1)
    }

    pub fn k_schedule(&self, num_components: usize) -> Vec<usize> {
        (1..=self.total_epochs).map(|e| self.winners(num_components, e)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    /// Stop-gradient exponent applied to every component's variance.
    pub beta: f64,
    pub finetune_lr: f64,
    pub improve_tol: f64,
    /// Global gradient-norm clip for models with learned variances.
    pub clip_norm: f64,
    pub lr_floor: f64,
    pub wta: WtaConfig,
    pub context: usize,
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_init: 1e-3,
            plateau_patience: 3,
            plateau_factor: 0.5,
            early_stop_patience: 10,
            max_epochs: 40,
            batch_size: 8,
            weight_decay: 5e-4,
            beta: 0.5,
            finetune_lr: 1e-5,
            improve_tol: 1e-6,
            clip_norm: 5.0,
            lr_floor: 1e-6,
            wta: WtaConfig::default(),
            context: 3,
            hidden_dims: vec![128, 128],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("lr_init", self.lr_init),
            ("plateau_factor", self.plateau_factor),
            ("finetune_lr", self.finetune_lr),
            ("lr_floor", self.lr_floor),
            ("clip_norm", self.clip_norm),
            ("wta_lr_floor", self.wta.lr_floor),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.plateau_factor >= 1.0 {
            return Err(Error::Config("plateau_factor must be below 1".into()));
        }
        if !(self.weight_decay >= 0.0) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config("weight_decay must be ≥ 0 and beta in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return Err(Error::Config("batch size, epoch budget and patiences must be positive".into()));
        }
        if self.wta.halve_every == 0 || self.wta.lr_halve_every == 0 || self.wta.total_epochs == 0 {
            return Err(Error::Config("WTA epoch counts must be positive".into()));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden_dims must be non-empty and positive".into()));
        }
        Ok(())
    }

    fn net(&self, num_freqs: usize, num_components: usize) -> NetConfig {
        NetConfig {
            context: self.context,
            hidden_dims: self.hidden_dims.clone(),
            ..NetConfig::new(num_freqs, num_components)
        }
    }
}

/// The model variants that can be trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Single Wiener mask trained with MSE.
    Wf,
    Cgmm1,
    Cgmm4,
    /// `L = 4` with every variance fixed at 1.
    Cgmm4Cons,
    /// `L = 4` initialised from winner-takes-all pre-training.
    Cgmm4Pre,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Wf,
        ModelKind::Cgmm1,
        ModelKind::Cgmm4,
        ModelKind::Cgmm4Cons,
        ModelKind::Cgmm4Pre,
    ];

    pub fn num_components(self) -> usize {
        match self {
            ModelKind::Wf | ModelKind::Cgmm1 => 1,
            _ => 4,
        }
    }

    pub fn constant_variance(self) -> bool {
        self == ModelKind::Cgmm4Cons
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Wf => "wf",
            ModelKind::Cgmm1 => "cgmm1",
            ModelKind::Cgmm4 => "cgmm4",
            ModelKind::Cgmm4Cons => "cgmm4-cons",
            ModelKind::Cgmm4Pre => "cgmm4-pre",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown model `{s}` (expected wf, cgmm1, cgmm4, cgmm4-cons or cgmm4-pre)")))
    }
}

/// Training and validation spectrograms plus provenance.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub train: Vec<Utterance>,
    pub val: Vec<Utterance>,
    pub framing: Framing,
    pub dataset_hash: String,
}

impl TrainData {
    fn num_freqs(&self) -> Result<usize> {
        let f = self
            .train
            .first()
            .ok_or_else(|| Error::InvalidInput("empty training split".into()))?
            .noisy
            .num_freqs;
        if self.val.is_empty() {
            return Err(Error::InvalidInput("empty validation split".into()));
        }
        for u in self.train.iter().chain(&self.val) {
            if u.noisy.num_freqs != f || !u.noisy.same_shape(&u.clean) {
                return Err(Error::shape(format!("{f} bins, matching clean/noisy"), &u.id));
            }
        }
        Ok(f)
    }
}

/// Append-only JSON-lines record of a run. Lines tagged `wall_clock` are the
/// only ones that vary between identical runs.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub path: Option<PathBuf>,
    pub lines: Vec<Value>,
}

impl RunManifest {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Starts a manifest file in `dir`, truncating any previous one.
    pub fn create(dir: impl AsRef<Path>, name: &str) -> Result<Self> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(name);
        std::fs::write(&path, b"").map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path: Some(path),
            lines: Vec::new(),
        })
    }

    pub fn record(&mut self, line: Value) -> Result<()> {
        if let Some(path) = &self.path {
            let mut text = serde_json::to_string(&line)?;
            text.push('\n');
            OpenOptions::new()
                .append(true)
                .open(path)
                .and_then(|mut f| f.write_all(text.as_bytes()))
                .map_err(|e| Error::io(path, e))?;
        }
        self.lines.push(line);
        Ok(())
    }

    /// Lines excluding wall-clock entries.
    pub fn reproducible_lines(&self) -> Vec<&Value> {
        self.lines.iter().filter(|l| l["kind"] != "wall_clock").collect()
    }

    pub fn path_string(&self) -> String {
        self.path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<memory>".into())
    }
}

/// Where a run writes checkpoints; `None` keeps everything in memory.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub dir: Option<PathBuf>,
}

impl RunOutput {
    pub fn in_memory() -> Self {
        Self { dir: None }
    }

    pub fn dir(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    fn checkpoint_path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{name}.ckpt")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub phase: &'static str,
    pub epoch: usize,
    pub lr: f64,
    pub winners: Option<usize>,
    pub train_loss: f64,
    pub val_loss: f64,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub checkpoint_path: Option<PathBuf>,
    pub history: Vec<EpochRecord>,
    pub best_val: f64,
}

/// Tracks the best validation loss and drives learning-rate halving and
/// early stopping.
#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    pub lr: f64,
    pub best: f64,
    pub best_epoch: usize,
    factor: f64,
    floor: f64,
    tol: f64,
    plateau_patience: usize,
    stop_patience: usize,
    since_halving: usize,
    since_best: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlateauEvent {
    pub improved: bool,
    pub halved: bool,
    pub stop: bool,
}

impl PlateauSchedule {
    pub fn new(cfg: &TrainConfig, lr: f64) -> Self {
        Self {
            lr,
            best: f64::INFINITY,
            best_epoch: 0,
            factor: cfg.plateau_factor,
            floor: cfg.lr_floor,
            tol: cfg.improve_tol,
            plateau_patience: cfg.plateau_patience,
            stop_patience: cfg.early_stop_patience,
            since_halving: 0,
            since_best: 0,
        }
    }

    /// An epoch improves only if it beats the best loss by more than the
    /// tolerance.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> PlateauEvent {
        let improved = val_loss < self.best - self.tol;
        let mut halved = false;
        if improved {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            self.since_halving = 0;
        } else {
            self.since_best += 1;
            self.since_halving += 1;
            if self.since_halving >= self.plateau_patience {
                self.lr = (self.lr * self.factor).max(self.floor);
                self.since_halving = 0;
                halved = true;
            }
        }
        PlateauEvent {
            improved,
            halved,
            stop: self.since_best >= self.stop_patience,
        }
    }
}

#[derive(Debug, Clone)]
enum Objective {
    Mse,
    Mixture(GradModConfig),
    Wta(usize),
}

/// How a network's outputs are turned into a posterior and a loss.
#[derive(Debug, Clone)]
struct Setup {
    net: NetConfig,
    constant_variance: bool,
    clip: Option<f64>,
}

impl Setup {
    fn posterior(&self, params: &NetParams, x: &crate::dsp::ComplexSpectrogram, masks_only: bool) -> Result<(PosteriorParams, crate::net::Tape)> {
        let (mut post, tape) = if masks_only {
            forward_masks(params, &self.net, x)?
        } else {
            forward(params, &self.net, x)?
        };
        if self.constant_variance {
            post.variances.fill(1.0);
        }
        Ok((post, tape))
    }

    fn loss(&self, obj: &Objective, post: &PosteriorParams, u: &Utterance) -> Result<LossGrad> {
        let (s, x) = (&u.clean.coefficients, &u.noisy.coefficients);
        let mut g = match obj {
            Objective::Mse => mse_loss(post, s, x)?,
            Objective::Mixture(b) => cgmm_nll_beta(post, s, x, b)?,
            Objective::Wta(k) => wta_loss(post, s, x, *k)?.0,
        };
        if self.constant_variance {
            g.d_var.fill(0.0);
        }
        Ok(g)
    }

    /// Loss used for model selection: the unmodified objective.
    fn val_loss(&self, obj: &Objective, params: &NetParams, u: &Utterance) -> Result<f64> {
        let masks_only = matches!(obj, Objective::Wta(_));
        let (post, _) = self.posterior(params, &u.noisy, masks_only)?;
        let (s, x) = (&u.clean.coefficients, &u.noisy.coefficients);
        Ok(match obj {
            Objective::Mse => mse_loss(&post, s, x)?.value,
            Objective::Mixture(_) => cgmm_nll(&post, s, x)?.value,
            Objective::Wta(k) => wta_loss(&post, s, x, *k)?.0.value,
        })
    }
}

/// Mutable state of one training run.
struct Run<'a> {
    cfg: &'a TrainConfig,
    data: &'a TrainData,
    setup: Setup,
    params: NetParams,
    adam: AdamState,
    rng: ChaCha8Rng,
    manifest: &'a mut RunManifest,
    history: Vec<EpochRecord>,
    last_good: String,
}

impl Run<'_> {
    fn abort(&self, reason: String) -> Error {
        Error::NumericalAbort {
            reason,
            manifest: self.manifest.path_string(),
            checkpoint: self.last_good.clone(),
        }
    }

    /// One pass over the shuffled training set. Returns the mean training loss.
    fn epoch(&mut self, obj: &Objective, lr: f64) -> Result<f64> {
        let masks_only = matches!(obj, Objective::Wta(_));
        let mut order: Vec<usize> = (0..self.data.train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut grad = vec![0.0; self.params.len()];
        for batch in order.chunks(self.cfg.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                let u = &self.data.train[i];
                let (post, tape) = self
                    .setup
                    .posterior(&self.params, &u.noisy, masks_only)
                    .map_err(|e| self.abort(format!("forward pass on {}: {e}", u.id)))?;
                let g = self.setup.loss(obj, &post, u)?;
                if !g.value.is_finite() {
                    return Err(self.abort(format!("non-finite loss on {}", u.id)));
                }
                total += g.value;
                let d = backward(&self.params, &self.setup.net, &tape, &g)?;
                grad.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
            }
            let n = batch.len() as f64;
            grad.iter_mut().for_each(|g| *g /= n);
            if let Some(c) = self.setup.clip {
                clip_global_norm(&mut grad, c);
            }
            adam_step(&mut self.params.theta, &grad, &mut self.adam, lr, self.cfg.weight_decay)
                .map_err(|e| self.abort(e.to_string()))?;
        }
        Ok(total / self.data.train.len() as f64)
    }

    fn validate(&self, obj: &Objective) -> Result<f64> {
        let mut total = 0.0;
        for u in &self.data.val {
            total += self
                .setup
                .val_loss(obj, &self.params, u)
                .map_err(|e| self.abort(format!("validation on {}: {e}", u.id)))?;
        }
        let v = total / self.data.val.len() as f64;
        if !v.is_finite() {
            return Err(self.abort("non-finite validation loss".into()));
        }
        Ok(v)
    }

    fn log_epoch(&mut self, rec: EpochRecord) -> Result<()> {
        let mut line = serde_json::to_value(&rec)?;
        line["kind"] = json!("epoch");
        self.manifest.record(line)?;
        self.history.push(rec);
        Ok(())
    }

    fn checkpoint(&self, model: &str, epoch: usize, loss: f64) -> Checkpoint {
        Checkpoint {
            model: model.to_string(),
            net: self.setup.net.clone(),
            constant_variance: self.setup.constant_variance,
            frame_len: self.data.framing.frame_len,
            hop_len: self.data.framing.hop_len,
            sample_rate: self.data.framing.sample_rate,
            seed: self.cfg.seed,
            epoch,
            loss,
            params: self.params.clone(),
        }
    }

    fn save(&mut self, out: &RunOutput, name: &str, ckpt: &Checkpoint) -> Result<Option<PathBuf>> {
        let path = out.checkpoint_path(name);
        if let Some(p) = &path {
            write_checkpoint(p, ckpt)?;
            self.last_good = p.display().to_string();
        }
        Ok(path)
    }

    /// Plateau-scheduled training with early stopping; keeps the best
    /// validation parameters.
    fn fit(&mut self, model: &str, obj: &Objective, lr: f64, out: &RunOutput) -> Result<TrainOutcome> {
        let mut sched = PlateauSchedule::new(self.cfg, lr);
        let mut best: Option<Checkpoint> = None;
        let mut best_path = None;
        for epoch in 1..=self.cfg.max_epochs {
            let lr = sched.lr;
            let train_loss = self.epoch(obj, lr)?;
            let val_loss = self.validate(obj)?;
            let ev = sched.observe(epoch, val_loss);
            if ev.improved {
                let ck = self.checkpoint(model, epoch, val_loss);
                best_path = self.save(out, model, &ck)?;
                best = Some(ck);
            }
            self.log_epoch(EpochRecord {
                phase: "train",
                epoch,
                lr,
                winners: None,
                train_loss,
                val_loss,
                improved: ev.improved,
            })?;
            if ev.stop {
                break;
            }
        }
        let checkpoint = best.ok_or_else(|| self.abort("no epoch improved on an infinite loss".into()))?;
        self.manifest.record(json!({
            "kind": "checkpoint",
            "model": model,
            "epoch": checkpoint.epoch,
            "val_loss": checkpoint.loss,
            "path": best_path.as_ref().map(|p| p.display().to_string()),
        }))?;
        Ok(TrainOutcome {
            best_val: checkpoint.loss,
            checkpoint,
            checkpoint_path: best_path,
            history: std::mem::take(&mut self.history),
        })
    }
}

fn start_run<'a>(
    cfg: &'a TrainConfig,
    data: &'a TrainData,
    model: &str,
    num_components: usize,
    constant_variance: bool,
    clip: bool,
    manifest: &'a mut RunManifest,
) -> Result<Run<'a>> {
    cfg.validate()?;
    let net = cfg.net(data.num_freqs()?, num_components);
    net.validate()?;
    let params = init_params(&net, cfg.seed)?;
    manifest.record(json!({
        "kind": "config",
        "model": model,
        "seed": cfg.seed,
        "dataset_hash": data.dataset_hash,
        "num_components": num_components,
        "constant_variance": constant_variance,
        "train": cfg,
        "num_train": data.train.len(),
        "num_val": data.val.len(),
    }))?;
    Ok(Run {
        cfg,
        data,
        adam: AdamState::new(params.len()),
        params,
        setup: Setup {
            net,
            constant_variance,
            clip: clip.then_some(cfg.clip_norm),
        },
        rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_da7a),
        manifest,
        history: Vec::new(),
        last_good: "<none>".into(),
    })
}

/// Single-mask Wiener-filter baseline trained with MSE.
pub fn train_baseline(cfg: &TrainConfig, data: &TrainData, out: &RunOutput, manifest: &mut RunManifest) -> Result<TrainOutcome> {
    let mut run = start_run(cfg, data, "wf", 1, false, false, manifest)?;
    run.fit("wf", &Objective::Mse, cfg.lr_init, out)
}

/// Mixture model trained with the stop-gradient weighted NLL.
///
/// With `init`, body and mask-head parameters come from that checkpoint and
/// the variance and weight heads are drawn fresh; training then starts at
/// `finetune_lr`. Clipping is active whenever variances are learned.
pub fn train_cgmm(
    cfg: &TrainConfig,
    data: &TrainData,
    num_components: usize,
    constant_variance: bool,
    init: Option<&Checkpoint>,
    out: &RunOutput,
    manifest: &mut RunManifest,
) -> Result<TrainOutcome> {
    let model = match (num_components, constant_variance, init.is_some()) {
        (_, _, true) => format!("cgmm{num_components}-pre"),
        (_, true, _) => format!("cgmm{num_components}-cons"),
        _ => format!("cgmm{num_components}"),
    };
    let mut run = start_run(cfg, data, &model, num_components, constant_variance, !constant_variance, manifest)?;
    let mut lr = cfg.lr_init;
    if let Some(ck) = init {
        if ck.net != run.setup.net {
            return Err(Error::Config(format!(
                "init checkpoint `{}` has a different network shape",
                ck.model
            )));
        }
        run.params = ck.params.clone();
        run.params.reinit_heads(&run.setup.net, &[Head::Variance, Head::Weight], cfg.seed)?;
        lr = cfg.finetune_lr;
        run.manifest.record(json!({"kind": "init", "from": ck.model, "epoch": ck.epoch}))?;
    }
    let obj = Objective::Mixture(GradModConfig::uniform(cfg.beta, num_components)?);
    run.fit(&model, &obj, lr, out)
}

/// Mask-only winner-takes-all pre-training.
///
/// `K` starts at `L` and halves every `wta.halve_every` epochs for
/// `wta.total_epochs`; training then continues with `K = 1` while the
/// learning rate halves every `wta.lr_halve_every` epochs down to
/// `wta.lr_floor`. The final parameters are returned.
pub fn pretrain_wta(
    cfg: &TrainConfig,
    data: &TrainData,
    num_components: usize,
    out: &RunOutput,
    manifest: &mut RunManifest,
) -> Result<TrainOutcome> {
    if num_components < 2 {
        return Err(Error::Config("winner-takes-all needs at least two components".into()));
    }
    let model = format!("cgmm{num_components}-wta");
    let mut run = start_run(cfg, data, &model, num_components, false, false, manifest)?;
    let mut lr = cfg.lr_init;
    let mut epoch = 0;
    let mut val_loss = f64::INFINITY;
    let mut decay_epochs = 0;
    loop {
        epoch += 1;
        let in_schedule = epoch <= cfg.wta.total_epochs;
        if !in_schedule {
            decay_epochs += 1;
            if decay_epochs % cfg.wta.lr_halve_every == 0 {
                if lr * 0.5 < cfg.wta.lr_floor {
                    break;
                }
                lr *= 0.5;
            }
        }
        let k = cfg.wta.winners(num_components, epoch);
        let obj = Objective::Wta(k);
        let train_loss = run.epoch(&obj, lr)?;
        val_loss = run.validate(&obj)?;
        run.log_epoch(EpochRecord {
            phase: if in_schedule { "wta" } else { "wta_decay" },
            epoch,
            lr,
            winners: Some(k),
            train_loss,
            val_loss,
            improved: false,
        })?;
    }
    let ck = run.checkpoint(&model, epoch - 1, val_loss);
    let path = run.save(out, &model, &ck)?;
    run.manifest.record(json!({
        "kind": "checkpoint",
        "model": model,
        "epoch": ck.epoch,
        "val_loss": val_loss,
        "path": path.as_ref().map(|p| p.display().to_string()),
    }))?;
    Ok(TrainOutcome {
        best_val: val_loss,
        checkpoint: ck,
        checkpoint_path: path,
        history: std::mem::take(&mut run.history),
    })
}

/// Trains one named model variant, running pre-training first for
/// `cgmm4-pre`. Wall-clock time is appended to the manifest.
pub fn train_model(
    kind: ModelKind,
    cfg: &TrainConfig,
    data: &TrainData,
    out: &RunOutput,
    manifest: &mut RunManifest,
) -> Result<TrainOutcome> {
    let started = Instant::now();
    let l = kind.num_components();
    let outcome = match kind {
        ModelKind::Wf => train_baseline(cfg, data, out, manifest)?,
        ModelKind::Cgmm1 | ModelKind::Cgmm4 | ModelKind::Cgmm4Cons => {
            train_cgmm(cfg, data, l, kind.constant_variance(), None, out, manifest)?
        }
        ModelKind::Cgmm4Pre => {
            let pre = pretrain_wta(cfg, data, l, out, manifest)?;
            train_cgmm(cfg, data, l, false, Some(&pre.checkpoint), out, manifest)?
        }
    };
    manifest.record(json!({"kind": "wall_clock", "seconds": started.elapsed().as_secs_f64()}))?;
    Ok(outcome)
}
