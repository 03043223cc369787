//! Binary spectrogram dump.
//!
//! Layout: one line of JSON (`{"F":..,"T":..,"frame_len":..,"hop_len":..,
//! "sample_rate":..,"num_samples":..}`) terminated by `\n`, followed by
//! `F * T` complex values as little-endian `f64` pairs `(re, im)` in
//! frame-major order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ComplexSpectrogram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrogramHeader {
    #[serde(rename = "F")]
    pub num_freqs: usize,
    #[serde(rename = "T")]
    pub num_frames: usize,
    pub frame_len: usize,
    pub hop_len: usize,
    pub sample_rate: u32,
    pub num_samples: usize,
}

pub fn write_spectrogram(path: impl AsRef<Path>, spec: &ComplexSpectrogram) -> Result<()> {
    let path = path.as_ref();
    let header = SpectrogramHeader {
        num_freqs: spec.num_freqs,
        num_frames: spec.num_frames,
        frame_len: spec.frame_len,
        hop_len: spec.hop_len,
        sample_rate: spec.sample_rate,
        num_samples: spec.num_samples,
    };
    let mut bytes = serde_json::to_vec(&header)?;
    bytes.push(b'\n');
    bytes.reserve(spec.coefficients.len() * 16);
    for c in &spec.coefficients {
        bytes.extend_from_slice(&c.re.to_le_bytes());
        bytes.extend_from_slice(&c.im.to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

pub fn read_spectrogram(path: impl AsRef<Path>) -> Result<ComplexSpectrogram> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    reader
        .read_line(&mut line)
        .map_err(|e| Error::io(path, e))?;
    let header: SpectrogramHeader = serde_json::from_str(line.trim_end()).map_err(|e| {
        Error::Format {
            what: "spectrogram header",
            detail: e.to_string(),
        }
    })?;
    let n = header.num_freqs * header.num_frames;
    let mut raw = Vec::new();
    reader
        .read_to_end(&mut raw)
        .map_err(|e| Error::io(path, e))?;
    if raw.len() != n * 16 {
        return Err(Error::Format {
            what: "spectrogram body",
            detail: format!("expected {} bytes, found {}", n * 16, raw.len()),
        });
    }
    let coefficients = raw
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(ComplexSpectrogram {
        coefficients,
        num_freqs: header.num_freqs,
        num_frames: header.num_frames,
        frame_len: header.frame_len,
        hop_len: header.hop_len,
        sample_rate: header.sample_rate,
        num_samples: header.num_samples,
    })
}
