//! Checkpoint files: a `key = value` text header closed by `end_header`,
//! followed by the parameter vector as little-endian `f64`.

use std::io::Write;
use std::path::Path;

use super::{forward, NetConfig, NetParams};
use crate::dsp::ComplexSpectrogram;
use crate::posterior::PosteriorParams;
use crate::error::{Error, Result};

const MAGIC: &str = "cgmmse-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: String,
    pub net: NetConfig,
    pub constant_variance: bool,
    pub frame_len: usize,
    pub hop_len: usize,
    pub sample_rate: u32,
    pub seed: u64,
    pub epoch: usize,
    pub loss: f64,
    pub params: NetParams,
}

impl Checkpoint {
    /// Posterior for a noisy spectrogram, with variances pinned to 1 for
    /// constant-variance models.
    pub fn posterior(&self, x: &ComplexSpectrogram) -> Result<PosteriorParams> {
        if x.frame_len != self.frame_len || x.hop_len != self.hop_len || x.sample_rate != self.sample_rate {
            return Err(Error::shape(
                format!("{}/{} framing at {} Hz", self.frame_len, self.hop_len, self.sample_rate),
                format!("{}/{} framing at {} Hz", x.frame_len, x.hop_len, x.sample_rate),
            ));
        }
        let (mut post, _) = forward(&self.params, &self.net, x)?;
        if self.constant_variance {
            post.variances.fill(1.0);
        }
        Ok(post)
    }
}

fn header_text(c: &Checkpoint) -> String {
    let hidden: Vec<String> = c.net.hidden_dims.iter().map(|h| h.to_string()).collect();
    format!(
        "{MAGIC}\nmodel = {}\nnum_freqs = {}\ncontext = {}\nhidden_dims = {}\n\
         num_components = {}\nleaky_slope = {:?}\nconstant_variance = {}\n\
         frame_len = {}\nhop_len = {}\nsample_rate = {}\nseed = {}\nepoch = {}\n\
         loss = {:?}\nnum_params = {}\nend_header\n",
        c.model,
        c.net.num_freqs,
        c.net.context,
        hidden.join(","),
        c.net.num_components,
        c.net.leaky_slope,
        c.constant_variance,
        c.frame_len,
        c.hop_len,
        c.sample_rate,
        c.seed,
        c.epoch,
        c.loss,
        c.params.len(),
    )
}

/// Writes to a temporary sibling and renames it into place.
pub fn write_checkpoint(path: impl AsRef<Path>, c: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = header_text(c).into_bytes();
    bytes.reserve(c.params.len() * 8);
    for v in &c.params.theta {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let tmp = path.with_extension("tmp");
    std::fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(&bytes)?;
            f.sync_all()
        })
        .map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn bad(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        detail: detail.into(),
    }
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let marker = b"end_header\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| bad("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("unrecognised magic line"));
    }
    let mut kv = std::collections::HashMap::new();
    for line in lines {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("header line `{line}`")))?;
        kv.insert(k.trim(), v.trim());
    }
    fn get<T: std::str::FromStr>(
        kv: &std::collections::HashMap<&str, &str>,
        key: &str,
    ) -> Result<T> {
        kv.get(key)
            .ok_or_else(|| bad(format!("missing `{key}`")))?
            .parse()
            .map_err(|_| bad(format!("bad value for `{key}`")))
    }
    let hidden_dims = kv
        .get("hidden_dims")
        .ok_or_else(|| bad("missing `hidden_dims`"))?
        .split(',')
        .map(|h| h.trim().parse().map_err(|_| bad("bad hidden_dims")))
        .collect::<Result<Vec<usize>>>()?;
    let net = NetConfig {
        num_freqs: get(&kv, "num_freqs")?,
        context: get(&kv, "context")?,
        hidden_dims,
        num_components: get(&kv, "num_components")?,
        leaky_slope: get(&kv, "leaky_slope")?,
    };
    net.validate()?;
    let num_params: usize = get(&kv, "num_params")?;
    let layout = net.layout();
    if layout.num_params != num_params {
        return Err(bad(format!(
            "header declares {num_params} parameters, config implies {}",
            layout.num_params
        )));
    }
    let body = &bytes[end + marker.len()..];
    if body.len() != num_params * 8 {
        return Err(bad(format!(
            "expected {} parameter bytes, found {}",
            num_params * 8,
            body.len()
        )));
    }
    let theta = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Checkpoint {
        model: get(&kv, "model")?,
        constant_variance: get(&kv, "constant_variance")?,
        frame_len: get(&kv, "frame_len")?,
        hop_len: get(&kv, "hop_len")?,
        sample_rate: get(&kv, "sample_rate")?,
        seed: get(&kv, "seed")?,
        epoch: get(&kv, "epoch")?,
        loss: get(&kv, "loss")?,
        net,
        params: NetParams { theta, layout },
    })
}
