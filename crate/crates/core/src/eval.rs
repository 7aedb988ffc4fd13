//! Overlap and noise sweeps over a generated corpus, scored with PSNR/SSIM
//! of the reconstructed amplitude against the ground truth.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ap::{ap_reconstruct, ApConfig, Association, Ordering};
use crate::corpus::{load_row, prediction_path, Manifest, ManifestRow};
use crate::dataset::IntensityCube;
use crate::error::{FpmError, Result};
use crate::fpc::read_cube;
use crate::frame::Frame;
use crate::metrics::{psnr, ssim};
use crate::resample::resize_bicubic;
use crate::shuffle::mix64;

pub const DEFAULT_OVERLAPS: [f64; 4] = [0.0, 0.18, 0.40, 0.65];
pub const DEFAULT_NOISE_STDS: [f64; 4] = [0.0, 1e-4, 2e-4, 3e-4];
pub const NOISE_SWEEP_OVERLAP: f64 = 0.65;

/// Settings read from the manifest are matched with this slack, since
/// they pass through a decimal text representation.
const SETTING_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Ap,
    /// AP fed a randomly disrupted image sequence.
    ApR,
    /// Network predictions for canonically ordered cubes.
    Fpnet,
    /// Network predictions for shuffled cubes.
    FpnetR,
    /// Bicubic upsampling of the on-axis amplitude.
    BaselineBicubic,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ap,
        Method::ApR,
        Method::Fpnet,
        Method::FpnetR,
        Method::BaselineBicubic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Ap => "AP",
            Method::ApR => "AP-R",
            Method::Fpnet => "FPNET",
            Method::FpnetR => "FPNET-R",
            Method::BaselineBicubic => "baseline-bicubic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = FpmError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| FpmError::Invalid(format!("unknown method {s:?}")))
    }
}

/// What "random sequence" means for AP-R.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomSequence {
    /// Images are paired with the wrong illumination angles (and visited
    /// in a random order).
    #[default]
    Misassociated,
    /// Only the visitation order is randomized; pairing stays correct.
    OrderOnly,
}

impl RandomSequence {
    fn label(self) -> &'static str {
        match self {
            RandomSequence::Misassociated => "misassociated",
            RandomSequence::OrderOnly => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub methods: Vec<Method>,
    /// Base AP settings; AP-R overrides ordering and association.
    pub ap: ApConfig,
    pub random_sequence: RandomSequence,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Ap, Method::ApR, Method::Fpnet, Method::FpnetR],
            ap: ApConfig::default(),
            random_sequence: RandomSequence::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub source: String,
    pub method: String,
    pub overlap: f64,
    pub noise_std: f64,
    pub ordering: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub runtime_s: f64,
}

fn ordering_label(o: Ordering) -> &'static str {
    match o {
        Ordering::Spiral => "spiral",
        Ordering::Raster => "raster",
        Ordering::Random { .. } => "random",
    }
}

fn clamp_unit(f: &Frame) -> Frame {
    f.map(|v| v.clamp(0.0, 1.0))
}

/// Amplitude estimate from the on-axis image alone.
pub fn bicubic_baseline(cube: &IntensityCube) -> Result<Frame> {
    let stack = cube.canonical_stack();
    let center = stack
        .first()
        .ok_or_else(|| FpmError::Shape("cube has no channels".into()))?;
    let high = if cube.meta.high_res_side > 0 {
        cube.meta.high_res_side
    } else {
        cube.side * 4
    };
    resize_bicubic(&center.map(|v| v.max(0.0).sqrt()), high, high)
}

fn ap_config_for(method: Method, cfg: &EvalConfig, seed: u64) -> ApConfig {
    let mut ap = cfg.ap;
    if method == Method::ApR {
        let s = mix64(seed ^ 0x4150_2d52);
        ap.ordering = Ordering::Random { seed: s };
        if cfg.random_sequence == RandomSequence::Misassociated {
            ap.association = Association::Misassociated { seed: mix64(s) };
        }
    }
    ap
}

/// Scores one method on one manifest row. `Ok(None)` means the method has
/// nothing to score for this row (no prediction file, or a prediction for
/// the other ordering).
pub fn evaluate_row(
    dir: &Path,
    row: &ManifestRow,
    method: Method,
    cfg: &EvalConfig,
) -> Result<Option<EvalRecord>> {
    let (cube, truth) = load_row(dir, row)?;
    let record = |estimate: &Frame, ordering: &str, runtime_s: f64| -> Result<EvalRecord> {
        let estimate = clamp_unit(estimate);
        Ok(EvalRecord {
            source: row.source.clone(),
            method: method.label().to_string(),
            overlap: row.overlap,
            noise_std: row.noise_std,
            ordering: ordering.to_string(),
            psnr_db: psnr(&truth, &estimate)?,
            ssim: ssim(&truth, &estimate)?,
            runtime_s,
        })
    };
    match method {
        Method::Ap | Method::ApR => {
            let ap = ap_config_for(method, cfg, row.seed);
            let grid = cube.grid()?;
            let pupil = cube.pupil()?;
            let stack = cube.canonical_stack();
            let start = Instant::now();
            let result = ap_reconstruct(&stack, &grid, &pupil, &ap)?;
            let runtime = start.elapsed().as_secs_f64();
            let amp = Frame::new(
                result.field.width(),
                result.field.height(),
                result.field.amplitude(),
            )?;
            let ordering = if method == Method::ApR {
                cfg.random_sequence.label()
            } else {
                ordering_label(ap.ordering)
            };
            record(&amp, ordering, runtime).map(Some)
        }
        Method::Fpnet | Method::FpnetR => {
            let path = dir.join(prediction_path(&row.cube_path));
            if !path.exists() {
                return Ok(None);
            }
            let shuffled = cube.meta.shuffle_seed != 0;
            if shuffled != (method == Method::FpnetR) {
                return Ok(None);
            }
            let pred = read_cube(&path)?;
            if pred.channels != 1 {
                return Err(FpmError::Shape(format!(
                    "prediction {} has {} channels",
                    path.display(),
                    pred.channels
                )));
            }
            let ordering = if shuffled { "shuffled" } else { "canonical" };
            record(&pred.channel_frame(0), ordering, 0.0).map(Some)
        }
        Method::BaselineBicubic => {
            let start = Instant::now();
            let est = bicubic_baseline(&cube)?;
            record(&est, "none", start.elapsed().as_secs_f64()).map(Some)
        }
    }
}

fn in_list(v: f64, list: &[f64]) -> bool {
    list.iter().any(|x| (x - v).abs() <= SETTING_TOL)
}

fn sort_key(r: &EvalRecord) -> (String, u64, u64, usize) {
    let idx = Method::from_str(&r.method)
        .map(|m| m as usize)
        .unwrap_or(usize::MAX);
    (
        r.source.clone(),
        r.overlap.to_bits(),
        r.noise_std.to_bits(),
        idx,
    )
}

/// Evaluates every selected row with every configured method, in
/// parallel, and returns records in a deterministic order.
fn run_rows(dir: &Path, rows: Vec<&ManifestRow>, cfg: &EvalConfig) -> Result<Vec<EvalRecord>> {
    let jobs: Vec<(&ManifestRow, Method)> = rows
        .into_iter()
        .flat_map(|r| cfg.methods.iter().map(move |&m| (r, m)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(row, method)| match evaluate_row(dir, row, method, cfg) {
            Err(FpmError::Io { path, source }) => {
                warn!(
                    "skipping {} for {method}: {}: {source}",
                    row.cube_path,
                    path.display()
                );
                Ok(None)
            }
            other => other,
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<EvalRecord> = results.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        let (ka, kb) = (sort_key(a), sort_key(b));
        ka.0.cmp(&kb.0)
            .then(a.overlap.total_cmp(&b.overlap))
            .then(a.noise_std.total_cmp(&b.noise_std))
            .then(ka.3.cmp(&kb.3))
    });
    Ok(records)
}

/// Noiseless rows at each requested overlap.
pub fn run_overlap_sweep(
    dir: &Path,
    manifest: &Manifest,
    overlaps: &[f64],
    cfg: &EvalConfig,
) -> Result<Vec<EvalRecord>> {
    let rows = manifest
        .rows
        .iter()
        .filter(|r| r.noise_std == 0.0 && in_list(r.overlap, overlaps))
        .collect();
    run_rows(dir, rows, cfg)
}

/// Rows at [`NOISE_SWEEP_OVERLAP`] for each requested noise level.
pub fn run_noise_sweep(
    dir: &Path,
    manifest: &Manifest,
    stds: &[f64],
    cfg: &EvalConfig,
) -> Result<Vec<EvalRecord>> {
    let rows = manifest
        .rows
        .iter()
        .filter(|r| {
            (r.overlap - NOISE_SWEEP_OVERLAP).abs() <= SETTING_TOL && in_list(r.noise_std, stds)
        })
        .collect();
    run_rows(dir, rows, cfg)
}

pub fn write_records(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if records.is_empty() {
        w.write_record([
            "source",
            "method",
            "overlap",
            "noise_std",
            "ordering",
            "psnr_db",
            "ssim",
            "runtime_s",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| FpmError::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>> {
    Ok(csv::Reader::from_path(path)?
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Mean and population standard deviation for one (method, overlap, noise,
/// ordering) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub overlap: f64,
    pub noise_std: f64,
    pub ordering: String,
    pub n: usize,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(records: &[EvalRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(usize, String, u64, u64, String), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        let idx = Method::from_str(&r.method)
            .map(|m| m as usize)
            .unwrap_or(usize::MAX);
        // non-negative floats order the same as their bit patterns
        cells
            .entry((
                idx,
                r.method.clone(),
                r.overlap.to_bits(),
                r.noise_std.to_bits(),
                r.ordering.clone(),
            ))
            .or_default()
            .push(r);
    }
    cells
        .into_values()
        .map(|group| {
            let psnrs: Vec<f64> = group.iter().map(|r| r.psnr_db).collect();
            let ssims: Vec<f64> = group.iter().map(|r| r.ssim).collect();
            let (psnr_mean, psnr_std) = mean_std(&psnrs);
            let (ssim_mean, ssim_std) = mean_std(&ssims);
            let first = group[0];
            SummaryRow {
                method: first.method.clone(),
                overlap: first.overlap,
                noise_std: first.noise_std,
                ordering: first.ordering.clone(),
                n: group.len(),
                psnr_mean,
                psnr_std,
                ssim_mean,
                ssim_std,
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in summary {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| FpmError::io(path, e))
}

/// Mean PSNR of one method at one (overlap, noise) cell, if present.
pub fn mean_psnr(
    records: &[EvalRecord],
    method: Method,
    overlap: f64,
    noise_std: f64,
) -> Option<f64> {
    let v: Vec<f64> = records
        .iter()
        .filter(|r| {
            r.method == method.label()
                && (r.overlap - overlap).abs() <= SETTING_TOL
                && (r.noise_std - noise_std).abs() <= SETTING_TOL
        })
        .map(|r| r.psnr_db)
        .collect();
    (!v.is_empty()).then(|| mean_std(&v).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(method: &str, overlap: f64, psnr_db: f64) -> EvalRecord {
        EvalRecord {
            source: "a".into(),
            method: method.into(),
            overlap,
            noise_std: 0.0,
            ordering: "spiral".into(),
            psnr_db,
            ssim: 0.5,
            runtime_s: 0.1,
        }
    }

    #[test]
    fn method_labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn summary_statistics() {
        let records = vec![
            rec("AP", 0.65, 20.0),
            rec("AP", 0.65, 30.0),
            rec("AP-R", 0.65, 10.0),
        ];
        let s = summarize(&records);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].method, "AP");
        assert_eq!(s[0].n, 2);
        assert_eq!(s[0].psnr_mean, 25.0);
        assert_eq!(s[0].psnr_std, 5.0);
        assert_eq!(s[1].psnr_std, 0.0);
        assert_eq!(mean_psnr(&records, Method::Ap, 0.65, 0.0), Some(25.0));
        assert_eq!(mean_psnr(&records, Method::Ap, 0.4, 0.0), None);
    }

    #[test]
    fn ap_r_changes_order_and_pairing() {
        let cfg = EvalConfig::default();
        let ap = ap_config_for(Method::Ap, &cfg, 7);
        assert_eq!(ap, cfg.ap);
        let r = ap_config_for(Method::ApR, &cfg, 7);
        assert!(matches!(r.ordering, Ordering::Random { .. }));
        assert!(matches!(r.association, Association::Misassociated { .. }));
        let cfg = EvalConfig {
            random_sequence: RandomSequence::OrderOnly,
            ..cfg
        };
        let r = ap_config_for(Method::ApR, &cfg, 7);
        assert_eq!(r.association, Association::Correct);
    }
}
