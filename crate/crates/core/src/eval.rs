//! Enhancement metrics and sparsification analysis of uncertainty maps.
//!
//! CSV outputs of [`evaluate`]:
//!
//! - `metrics.csv`: `id,snr_db,si_sdr_in,si_sdr_out,seg_snr,spec_rmse`
//! - `sparsification.csv`: `fraction,rmse_predicted,rmse_oracle,rmse_random,key`,
//!   curves averaged over utterances, one block per ranking key
//! - `curves/<id>.csv`: the same schema for a single utterance
//! - `ause.csv`: `id,key,ause_predicted,ause_random`
//! - `summary.csv`: `metric,mean,ci_low,ci_high,n`
//! - `heatmaps/<id>.csv`: `f,t,error,aleatoric,epistemic` for the first few
//!   utterances

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::Utterance;
use crate::dsp::{istft, ComplexSpectrogram, Waveform};
use crate::error::{Error, Result};
use crate::posterior::{decompose_uncertainty, PosteriorParams, UncertaintyMaps};

/// Number of points on the removed-fraction grid `0, 0.01, …, 0.99`.
pub const NUM_FRACTIONS: usize = 100;
pub const SI_SDR_CAP_DB: f64 = 60.0;
pub const SEG_SNR_RANGE_DB: (f64, f64) = (-10.0, 35.0);
pub const SEG_FRAME: usize = 512;

/// A real value per TF bin, frame-major like [`ComplexSpectrogram`].
#[derive(Debug, Clone, PartialEq)]
pub struct BinMap {
    pub values: Vec<f64>,
    pub num_freqs: usize,
    pub num_frames: usize,
}

impl BinMap {
    pub fn new(values: Vec<f64>, num_freqs: usize, num_frames: usize) -> Result<Self> {
        if values.len() != num_freqs * num_frames || num_freqs == 0 {
            return Err(Error::shape(format!("{num_freqs} x {num_frames}"), values.len()));
        }
        Ok(Self {
            values,
            num_freqs,
            num_frames,
        })
    }

    /// Concatenates maps along time, for curves over pooled bins instead of
    /// per-utterance averages.
    pub fn pool(maps: &[BinMap]) -> Result<Self> {
        let first = maps.first().ok_or_else(|| Error::InvalidInput("nothing to pool".into()))?;
        if let Some(m) = maps.iter().find(|m| m.num_freqs != first.num_freqs) {
            return Err(Error::shape(first.num_freqs, m.num_freqs));
        }
        let values = maps.iter().flat_map(|m| m.values.iter().copied()).collect();
        Self::new(values, first.num_freqs, maps.iter().map(|m| m.num_frames).sum())
    }

    fn like(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.num_freqs, self.num_frames)
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.num_freqs == other.num_freqs && self.num_frames == other.num_frames
    }
}

/// `|S_ref − S_est|` per bin.
pub fn spectral_error(est: &ComplexSpectrogram, reference: &ComplexSpectrogram) -> Result<BinMap> {
    if !est.same_shape(reference) {
        return Err(Error::shape(
            format!("{} x {}", reference.num_freqs, reference.num_frames),
            format!("{} x {}", est.num_freqs, est.num_frames),
        ));
    }
    BinMap::new(
        reference.coefficients.iter().zip(&est.coefficients).map(|(r, e)| (r - e).norm()).collect(),
        reference.num_freqs,
        reference.num_frames,
    )
}

/// Ranking key of a sparsification curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankingKind {
    /// The supplied uncertainty.
    Predicted,
    /// The true error itself.
    Oracle,
    /// A seeded random permutation.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsificationCurve {
    pub fractions: Vec<f64>,
    pub rmse: Vec<f64>,
    pub kind: RankingKind,
}

pub fn fraction_grid() -> Vec<f64> {
    (0..NUM_FRACTIONS).map(|i| i as f64 / NUM_FRACTIONS as f64).collect()
}

/// Residual RMSE after removing the highest-ranked bins.
///
/// Bins are ranked by key, largest first, ties broken by `(f, t)`. At
/// fraction `i/100`, `⌊i·n/100⌋` bins are removed.
pub fn sparsify(errors: &BinMap, uncertainty: &BinMap, kind: RankingKind) -> Result<SparsificationCurve> {
    if !errors.same_shape(uncertainty) {
        return Err(Error::shape(
            format!("{} x {}", errors.num_freqs, errors.num_frames),
            format!("{} x {}", uncertainty.num_freqs, uncertainty.num_frames),
        ));
    }
    let n = errors.values.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty error map".into()));
    }
    let key: Vec<f64> = match kind {
        RankingKind::Predicted => uncertainty.values.clone(),
        RankingKind::Oracle => errors.values.clone(),
        RankingKind::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.random::<f64>()).collect()
        }
    };
    if key.iter().any(|k| k.is_nan()) {
        return Err(Error::InvalidInput("NaN in ranking key".into()));
    }
    let nf = errors.num_freqs;
    let ft = |b: usize| (b % nf, b / nf);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then_with(|| ft(a).cmp(&ft(b))));

    // kept[m] = sum of squared errors of the m lowest-ranked bins
    let mut kept = vec![0.0; n + 1];
    for (m, &b) in order.iter().rev().enumerate() {
        kept[m + 1] = kept[m] + errors.values[b] * errors.values[b];
    }
    let fractions = fraction_grid();
    let rmse = (0..NUM_FRACTIONS)
        .map(|i| {
            let remaining = n - i * n / NUM_FRACTIONS;
            (kept[remaining] / remaining as f64).sqrt()
        })
        .collect();
    Ok(SparsificationCurve { fractions, rmse, kind })
}

/// Trapezoidal area of `predicted − oracle` over the fraction grid.
pub fn ause(predicted: &SparsificationCurve, oracle: &SparsificationCurve) -> Result<f64> {
    if predicted.fractions != oracle.fractions {
        return Err(Error::InvalidInput("curves use different fraction grids".into()));
    }
    let d: Vec<f64> = predicted.rmse.iter().zip(&oracle.rmse).map(|(p, o)| p - o).collect();
    Ok(predicted
        .fractions
        .windows(2)
        .zip(d.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum())
}

fn check_pair(est: &Waveform, reference: &Waveform) -> Result<()> {
    if est.len() != reference.len() {
        return Err(Error::shape(reference.len(), est.len()));
    }
    if reference.energy() == 0.0 {
        return Err(Error::InvalidInput("reference signal has zero energy".into()));
    }
    Ok(())
}

/// Scale-invariant SDR in dB, bounded to `±60`.
pub fn si_sdr(est: &Waveform, reference: &Waveform) -> Result<f64> {
    check_pair(est, reference)?;
    let dot: f64 = est.samples.iter().zip(&reference.samples).map(|(e, r)| e * r).sum();
    let alpha = dot / reference.energy();
    let target = alpha * alpha * reference.energy();
    let residual: f64 = est
        .samples
        .iter()
        .zip(&reference.samples)
        .map(|(e, r)| (e - alpha * r).powi(2))
        .sum();
    if residual == 0.0 {
        return Ok(SI_SDR_CAP_DB);
    }
    if target == 0.0 {
        return Ok(-SI_SDR_CAP_DB);
    }
    Ok((10.0 * (target / residual).log10()).clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB))
}

/// Segmental SNR over 512-sample frames, each clamped to `[−10, 35]` dB.
/// Frames whose reference energy is more than 40 dB below the loudest frame
/// are skipped.
pub fn seg_snr(est: &Waveform, reference: &Waveform) -> Result<f64> {
    check_pair(est, reference)?;
    let frames: Vec<(f64, f64)> = reference
        .samples
        .chunks(SEG_FRAME)
        .zip(est.samples.chunks(SEG_FRAME))
        .map(|(r, e)| {
            let sig: f64 = r.iter().map(|v| v * v).sum();
            let err: f64 = r.iter().zip(e).map(|(a, b)| (a - b).powi(2)).sum();
            (sig, err)
        })
        .collect();
    let max = frames.iter().map(|f| f.0).fold(0.0, f64::max);
    let (lo, hi) = SEG_SNR_RANGE_DB;
    let vals: Vec<f64> = frames
        .iter()
        .filter(|(sig, _)| *sig > 0.0 && *sig >= max * 1e-4)
        .map(|(sig, err)| {
            if *err == 0.0 {
                hi
            } else {
                (10.0 * (sig / err).log10()).clamp(lo, hi)
            }
        })
        .collect();
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// `sqrt(mean |S_ref − S_est|²)` over all bins.
pub fn spec_rmse(est: &ComplexSpectrogram, reference: &ComplexSpectrogram) -> Result<f64> {
    let e = spectral_error(est, reference)?;
    Ok((e.values.iter().map(|v| v * v).sum::<f64>() / e.values.len() as f64).sqrt())
}

/// Mean with a two-sided 95% Student-t interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

pub fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Aggregate {
            mean,
            ci_low: mean,
            ci_high: mean,
            n,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let half = t * (var / n as f64).sqrt();
    Aggregate {
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
        n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub id: String,
    pub snr_db: f64,
    pub si_sdr_in: f64,
    pub si_sdr_out: f64,
    pub seg_snr: f64,
    pub spec_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn column(&self, f: impl Fn(&MetricRow) -> f64) -> Aggregate {
        aggregate(&self.rows.iter().map(f).collect::<Vec<_>>())
    }

    /// Mean SI-SDR improvement over rows with the given input SNR.
    pub fn si_sdr_gain_at(&self, snr_db: f64) -> Option<f64> {
        let gains: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.snr_db == snr_db)
            .map(|r| r.si_sdr_out - r.si_sdr_in)
            .collect();
        (!gains.is_empty()).then(|| gains.iter().sum::<f64>() / gains.len() as f64)
    }
}

/// Uncertainty map used as a ranking key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintyKey {
    Aleatoric,
    Epistemic,
    Total,
}

impl UncertaintyKey {
    pub const ALL: [UncertaintyKey; 3] = [UncertaintyKey::Aleatoric, UncertaintyKey::Epistemic, UncertaintyKey::Total];

    fn select(self, maps: &UncertaintyMaps) -> &[f64] {
        match self {
            UncertaintyKey::Aleatoric => &maps.aleatoric,
            UncertaintyKey::Epistemic => &maps.epistemic,
            UncertaintyKey::Total => &maps.total,
        }
    }
}

impl fmt::Display for UncertaintyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UncertaintyKey::Aleatoric => "aleatoric",
            UncertaintyKey::Epistemic => "epistemic",
            UncertaintyKey::Total => "total",
        })
    }
}

impl FromStr for UncertaintyKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        UncertaintyKey::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown uncertainty key `{s}`")))
    }
}

/// Predicted, oracle and random curves for one ranking key.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub key: UncertaintyKey,
    pub predicted: Vec<f64>,
    pub oracle: Vec<f64>,
    pub random: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CurveRow {
    fraction: f64,
    rmse_predicted: f64,
    rmse_oracle: f64,
    rmse_random: f64,
    key: UncertaintyKey,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuseRow {
    pub id: String,
    pub key: UncertaintyKey,
    pub ause_predicted: f64,
    pub ause_random: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub f: usize,
    pub t: usize,
    pub error: f64,
    pub aleatoric: f64,
    pub epistemic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Heatmaps are written for this many leading utterances.
    pub heatmaps: usize,
    pub random_seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            heatmaps: 4,
            random_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metrics: MetricReport,
    /// Curves averaged over utterances, per key.
    pub curves: Vec<CurveSet>,
    pub ause: Vec<AuseRow>,
}

impl EvalReport {
    /// Mean per-utterance AUSE of the predicted and random rankings.
    pub fn mean_ause(&self, key: UncertaintyKey) -> (f64, f64) {
        let rows: Vec<&AuseRow> = self.ause.iter().filter(|r| r.key == key).collect();
        let n = rows.len() as f64;
        (
            rows.iter().map(|r| r.ause_predicted).sum::<f64>() / n,
            rows.iter().map(|r| r.ause_random).sum::<f64>() / n,
        )
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        what: "csv",
        detail: format!("{}: {e}", path.display()),
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn curve_rows(sets: &[CurveSet]) -> Vec<CurveRow> {
    let grid = fraction_grid();
    sets.iter()
        .flat_map(|c| {
            grid.iter().enumerate().map(move |(i, &fraction)| CurveRow {
                fraction,
                rmse_predicted: c.predicted[i],
                rmse_oracle: c.oracle[i],
                rmse_random: c.random[i],
                key: c.key,
            })
        })
        .collect()
}

/// Runs `posterior` on every utterance and scores the posterior mean and its
/// uncertainty maps. With `out_dir`, all CSVs are written there.
pub fn evaluate(
    utterances: &[Utterance],
    mut posterior: impl FnMut(&Utterance) -> Result<PosteriorParams>,
    opts: &EvalOptions,
    out_dir: Option<&Path>,
) -> Result<EvalReport> {
    if utterances.is_empty() {
        return Err(Error::InvalidInput("no utterances to evaluate".into()));
    }
    if let Some(dir) = out_dir {
        for sub in [dir.to_path_buf(), dir.join("curves"), dir.join("heatmaps")] {
            std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        }
    }
    let mut rows = Vec::new();
    let mut ause_rows = Vec::new();
    let mut sums: Vec<CurveSet> = UncertaintyKey::ALL
        .iter()
        .map(|&key| CurveSet {
            key,
            predicted: vec![0.0; NUM_FRACTIONS],
            oracle: vec![0.0; NUM_FRACTIONS],
            random: vec![0.0; NUM_FRACTIONS],
        })
        .collect();

    for (i, u) in utterances.iter().enumerate() {
        let post = posterior(u)?;
        let maps = decompose_uncertainty(&post, &u.noisy.coefficients)?;
        let est = ComplexSpectrogram::with_coefficients(&u.noisy, maps.mean.clone())?;
        let reference = istft(&u.clean)?;
        let noisy = istft(&u.noisy)?;
        let enhanced = istft(&est)?;
        rows.push(MetricRow {
            id: u.id.clone(),
            snr_db: u.snr_db,
            si_sdr_in: si_sdr(&noisy, &reference)?,
            si_sdr_out: si_sdr(&enhanced, &reference)?,
            seg_snr: seg_snr(&enhanced, &reference)?,
            spec_rmse: spec_rmse(&est, &u.clean)?,
        });

        let err = spectral_error(&est, &u.clean)?;
        let oracle = sparsify(&err, &err, RankingKind::Oracle)?;
        let random = sparsify(&err, &err, RankingKind::Random(opts.random_seed.wrapping_add(i as u64)))?;
        let random_ause = ause(&random, &oracle)?;
        let mut mine = Vec::new();
        for (k, key) in UncertaintyKey::ALL.into_iter().enumerate() {
            let unc = err.like(key.select(&maps).to_vec())?;
            let pred = sparsify(&err, &unc, RankingKind::Predicted)?;
            ause_rows.push(AuseRow {
                id: u.id.clone(),
                key,
                ause_predicted: ause(&pred, &oracle)?,
                ause_random: random_ause,
            });
            let set = CurveSet {
                key,
                predicted: pred.rmse,
                oracle: oracle.rmse.clone(),
                random: random.rmse.clone(),
            };
            for j in 0..NUM_FRACTIONS {
                sums[k].predicted[j] += set.predicted[j];
                sums[k].oracle[j] += set.oracle[j];
                sums[k].random[j] += set.random[j];
            }
            mine.push(set);
        }
        if let Some(dir) = out_dir {
            write_rows(&dir.join("curves").join(format!("{}.csv", u.id)), curve_rows(&mine))?;
            if i < opts.heatmaps {
                let nf = err.num_freqs;
                write_rows(
                    &dir.join("heatmaps").join(format!("{}.csv", u.id)),
                    (0..err.values.len()).map(|b| HeatmapRow {
                        f: b % nf,
                        t: b / nf,
                        error: err.values[b],
                        aleatoric: maps.aleatoric[b],
                        epistemic: maps.epistemic[b],
                    }),
                )?;
            }
        }
    }

    let n = utterances.len() as f64;
    for s in &mut sums {
        for v in s.predicted.iter_mut().chain(&mut s.oracle).chain(&mut s.random) {
            *v /= n;
        }
    }
    let report = EvalReport {
        metrics: MetricReport { rows },
        curves: sums,
        ause: ause_rows,
    };
    if let Some(dir) = out_dir {
        write_report(dir, &report)?;
    }
    Ok(report)
}

fn write_report(dir: &Path, report: &EvalReport) -> Result<()> {
    write_rows(&dir.join("metrics.csv"), &report.metrics.rows)?;
    write_rows(&dir.join("sparsification.csv"), curve_rows(&report.curves))?;
    write_rows(&dir.join("ause.csv"), &report.ause)?;

    #[derive(Serialize)]
    struct SummaryRow {
        metric: String,
        mean: f64,
        ci_low: f64,
        ci_high: f64,
        n: usize,
    }
    let m = &report.metrics;
    let mut summary = vec![
        ("si_sdr_in".to_string(), m.column(|r| r.si_sdr_in)),
        ("si_sdr_out".to_string(), m.column(|r| r.si_sdr_out)),
        ("si_sdr_gain".to_string(), m.column(|r| r.si_sdr_out - r.si_sdr_in)),
        ("seg_snr".to_string(), m.column(|r| r.seg_snr)),
        ("spec_rmse".to_string(), m.column(|r| r.spec_rmse)),
    ];
    for key in UncertaintyKey::ALL {
        let pick = |f: fn(&AuseRow) -> f64| {
            aggregate(&report.ause.iter().filter(|r| r.key == key).map(f).collect::<Vec<_>>())
        };
        summary.push((format!("ause_{key}"), pick(|r| r.ause_predicted)));
    }
    summary.push((
        "ause_random".to_string(),
        aggregate(
            &report
                .ause
                .iter()
                .filter(|r| r.key == UncertaintyKey::Total)
                .map(|r| r.ause_random)
                .collect::<Vec<_>>(),
        ),
    ));
    write_rows(
        &dir.join("summary.csv"),
        summary.into_iter().map(|(metric, a)| SummaryRow {
            metric,
            mean: a.mean,
            ci_low: a.ci_low,
            ci_high: a.ci_high,
            n: a.n,
        }),
    )
}

/// Reads a heatmap CSV back into error and uncertainty maps.
pub fn read_heatmap(path: impl AsRef<Path>) -> Result<(BinMap, UncertaintyMaps)> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<HeatmapRow>, _>>()
        .map_err(|e| csv_error(path, e))?;
    let nf = rows.iter().map(|r| r.f + 1).max().unwrap_or(0);
    let nt = rows.iter().map(|r| r.t + 1).max().unwrap_or(0);
    if rows.len() != nf * nt {
        return Err(Error::Format {
            what: "heatmap",
            detail: format!("{} rows for a {nf} x {nt} grid", rows.len()),
        });
    }
    let mut err = vec![f64::NAN; nf * nt];
    let mut al = vec![0.0; nf * nt];
    let mut ep = vec![0.0; nf * nt];
    for row in &rows {
        let b = row.t * nf + row.f;
        err[b] = row.error;
        al[b] = row.aleatoric;
        ep[b] = row.epistemic;
    }
    if err.iter().any(|v| v.is_nan()) {
        return Err(Error::Format {
            what: "heatmap",
            detail: "duplicate or missing bins".into(),
        });
    }
    let total = al.iter().zip(&ep).map(|(a, e)| a + e).collect();
    Ok((
        BinMap::new(err, nf, nt)?,
        UncertaintyMaps {
            mean: vec![Complex64::new(0.0, 0.0); nf * nt],
            aleatoric: al,
            epistemic: ep,
            total,
        },
    ))
}

/// Sparsification curves and AUSE for one heatmap, written as
/// `fraction,rmse_predicted,rmse_oracle,rmse_random,key` rows.
pub fn sparsify_heatmap(heatmap: impl AsRef<Path>, out: impl AsRef<Path>, seed: u64) -> Result<Vec<(UncertaintyKey, f64)>> {
    let (err, maps) = read_heatmap(heatmap)?;
    let oracle = sparsify(&err, &err, RankingKind::Oracle)?;
    let random = sparsify(&err, &err, RankingKind::Random(seed))?;
    let mut sets = Vec::new();
    let mut scores = Vec::new();
    for key in UncertaintyKey::ALL {
        let pred = sparsify(&err, &err.like(key.select(&maps).to_vec())?, RankingKind::Predicted)?;
        scores.push((key, ause(&pred, &oracle)?));
        sets.push(CurveSet {
            key,
            predicted: pred.rmse,
            oracle: oracle.rmse.clone(),
            random: random.rmse.clone(),
        });
    }
    write_rows(out.as_ref(), curve_rows(&sets))?;
    Ok(scores)
}

/// Orders curves by value; used by the pointwise-dominance checks.
pub fn dominates(lower: &SparsificationCurve, upper: &SparsificationCurve, tol: f64) -> bool {
    lower
        .rmse
        .iter()
        .zip(&upper.rmse)
        .all(|(a, b)| a.partial_cmp(&(b + tol)) != Some(Ordering::Greater))
}
