//! Corpus generation: one cube per (image tile, overlap/noise setting),
//! ground-truth files, and a CSV manifest tying them together.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.csv        cube_path,source,overlap,noise_std,seed,checksum
//! skipped.csv         source,reason   (images that could not be used)
//! corpus.json         the CorpusConfig that produced the corpus
//! gt/<source>.fpc     single-channel 128×128 ground truth
//! cubes/<source>__sNN.fpc        raw 32×32×25 cube for setting NN
//! cubes/<source>__sNN.up.fpc     bicubic-upsampled copy (optional)
//! ```
//!
//! Paths in the manifest are relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    build_cube, prepare_ground_truth, upsample_cube, CubeMeta, IntensityCube, GROUND_TRUTH_SIDE,
};
use crate::error::{FpmError, Result};
use crate::field::{Pupil, PupilEdge};
use crate::forward::{
    NoiseSpec, OverlapGeometry, DEFAULT_HIGH_RES_SIDE, DEFAULT_LOW_RES_SIDE, DEFAULT_N_SIDE,
};
use crate::fpc::{payload_checksum, read_cube, write_cube};
use crate::frame::Frame;
use crate::imageio::load_gray;
use crate::shuffle::mix64;

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const SKIPPED_FILE: &str = "skipped.csv";
pub const CONFIG_FILE: &str = "corpus.json";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub overlap: f64,
    pub noise_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub settings: Vec<Setting>,
    pub geometry: OverlapGeometry,
    pub n_side: usize,
    pub low_res_side: usize,
    pub pupil_edge: PupilEdge,
    pub seed: u64,
    /// Distance between tile origins; equal to the tile side for
    /// non-overlapping tiles.
    pub crop_stride: usize,
    /// Use only the central tile of each image.
    pub center_only: bool,
    pub shuffle: bool,
    /// Also write a bicubic-upsampled `.up.fpc` next to every cube.
    pub upsample: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            settings: [0.0, 0.18, 0.40, 0.65]
                .iter()
                .map(|&overlap| Setting {
                    overlap,
                    noise_std: 0.0,
                })
                .collect(),
            geometry: OverlapGeometry::default(),
            n_side: DEFAULT_N_SIDE,
            low_res_side: DEFAULT_LOW_RES_SIDE,
            pupil_edge: PupilEdge::Antialiased,
            seed: 2019,
            crop_stride: GROUND_TRUTH_SIDE,
            center_only: false,
            shuffle: true,
            upsample: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub cube_path: String,
    pub source: String,
    pub overlap: f64,
    pub noise_std: f64,
    pub seed: u64,
    /// CRC-64 of the cube payload, 16 hex digits.
    pub checksum: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedImage {
    pub source: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
    pub skipped: Vec<SkippedImage>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut w = csv::Writer::from_path(&path)?;
        // header even when empty
        if self.rows.is_empty() {
            w.write_record([
                "cube_path",
                "source",
                "overlap",
                "noise_std",
                "seed",
                "checksum",
            ])?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| FpmError::io(&path, e))?;

        let path = dir.join(SKIPPED_FILE);
        let mut w = csv::Writer::from_path(&path)?;
        if self.skipped.is_empty() {
            w.write_record(["source", "reason"])?;
        }
        for s in &self.skipped {
            w.serialize(s)?;
        }
        w.flush().map_err(|e| FpmError::io(&path, e))
    }

    /// Reads `manifest.csv` (and `skipped.csv` when present) from `dir`.
    pub fn read(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(FpmError::io(
                &path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "manifest not found"),
            ));
        }
        let rows = csv::Reader::from_path(&path)?
            .deserialize()
            .collect::<std::result::Result<Vec<ManifestRow>, _>>()?;
        let skipped_path = dir.join(SKIPPED_FILE);
        let skipped = if skipped_path.exists() {
            csv::Reader::from_path(&skipped_path)?
                .deserialize()
                .collect::<std::result::Result<Vec<SkippedImage>, _>>()?
        } else {
            Vec::new()
        };
        Ok(Manifest { rows, skipped })
    }
}

/// Tile origins covering an image of the given size.
fn tile_origins(
    width: usize,
    height: usize,
    stride: usize,
    center_only: bool,
) -> Vec<(usize, usize)> {
    let side = GROUND_TRUTH_SIDE;
    if center_only {
        return vec![((width - side) / 2, (height - side) / 2)];
    }
    let axis = |len: usize| -> Vec<usize> { (0..=len - side).step_by(stride).collect() };
    let xs = axis(width);
    axis(height)
        .into_iter()
        .flat_map(|y| xs.iter().map(move |&x| (x, y)))
        .collect()
}

fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed for one cube, derived from the corpus seed, the tile id and the
/// setting index.
pub fn cube_seed(base: u64, source: &str, setting: usize) -> u64 {
    let s = mix64(base ^ mix64(hash_str(source)) ^ mix64(setting as u64 + 1));
    s.max(1)
}

fn shuffle_seed_for(cube_seed: u64) -> u64 {
    mix64(cube_seed ^ 0x5348_5546_464c_4531).max(1)
}

fn sanitize(stem: &str) -> String {
    stem.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

struct Job {
    source: String,
    tile: Frame,
    setting_index: usize,
    setting: Setting,
}

/// Lists `.png`/`.pgm` files in `dir`, sorted by name, paired with their
/// decoded contents.
pub fn load_image_dir(dir: &Path) -> Result<Vec<(String, Result<Frame>)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| FpmError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension()
                    .and_then(|e| e.to_str())
                    .map(str::to_ascii_lowercase)
                    .as_deref(),
                Some("png" | "pgm")
            )
        })
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|p| {
            let name = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("image")
                .to_string();
            (name, load_gray(&p))
        })
        .collect())
}

/// Generates cubes for every image tile and setting, writes them with the
/// manifest into `out_dir`, and returns the manifest.
pub fn build_corpus<I>(images: I, cfg: &CorpusConfig, out_dir: &Path) -> Result<Manifest>
where
    I: IntoIterator<Item = (String, Result<Frame>)>,
{
    if cfg.crop_stride == 0 {
        return Err(FpmError::Invalid("crop stride must be positive".into()));
    }
    if cfg.settings.is_empty() {
        return Err(FpmError::Invalid("no overlap/noise settings given".into()));
    }
    // resolve all geometries before touching the disk
    for s in &cfg.settings {
        cfg.geometry.grid(
            s.overlap,
            cfg.n_side,
            DEFAULT_HIGH_RES_SIDE,
            cfg.low_res_side,
        )?;
        NoiseSpec::new(s.noise_std, 0)?;
    }

    let mut skipped = Vec::new();
    let mut jobs = Vec::new();
    let mut ground_truth = Vec::new();
    let mut seen = 0usize;
    for (name, image) in images {
        seen += 1;
        let frame = match image {
            Ok(f) if f.width() >= GROUND_TRUTH_SIDE && f.height() >= GROUND_TRUTH_SIDE => f,
            Ok(f) => {
                let reason = format!(
                    "image {}x{} is smaller than {GROUND_TRUTH_SIDE}x{GROUND_TRUTH_SIDE}",
                    f.width(),
                    f.height()
                );
                warn!("skipping {name}: {reason}");
                skipped.push(SkippedImage {
                    source: name,
                    reason,
                });
                continue;
            }
            Err(e) => {
                warn!("skipping {name}: {e}");
                skipped.push(SkippedImage {
                    source: name,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let stem = sanitize(&name);
        let origins = tile_origins(
            frame.width(),
            frame.height(),
            cfg.crop_stride,
            cfg.center_only,
        );
        let single = origins.len() == 1;
        for (x, y) in origins {
            let source = if single {
                stem.clone()
            } else {
                format!("{stem}_{y}_{x}")
            };
            let tile = frame.crop(x, y, GROUND_TRUTH_SIDE, GROUND_TRUTH_SIDE)?;
            ground_truth.push((source.clone(), tile.clone()));
            for (setting_index, &setting) in cfg.settings.iter().enumerate() {
                jobs.push(Job {
                    source: source.clone(),
                    tile: tile.clone(),
                    setting_index,
                    setting,
                });
            }
        }
    }
    if seen == 0 {
        return Err(FpmError::Invalid("no input images".into()));
    }

    let gt_dir = out_dir.join("gt");
    let cube_dir = out_dir.join("cubes");
    for d in [out_dir, &gt_dir, &cube_dir] {
        fs::create_dir_all(d).map_err(|e| FpmError::io(d, e))?;
    }
    ground_truth.par_iter().try_for_each(|(source, tile)| {
        let object = prepare_ground_truth(tile)?;
        let amp = Frame::new(GROUND_TRUTH_SIDE, GROUND_TRUTH_SIDE, object.amplitude())?;
        let meta = CubeMeta {
            source_id: source.clone(),
            norm_constants: vec![1.0],
            ..CubeMeta::default()
        };
        write_cube(
            &IntensityCube::from_frame(&amp, meta)?,
            &gt_dir.join(format!("{source}.fpc")),
        )
    })?;

    let rows = jobs
        .par_iter()
        .map(|job| generate(job, cfg, out_dir))
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest { rows, skipped };
    manifest.write(out_dir)?;
    let config_path = out_dir.join(CONFIG_FILE);
    fs::write(&config_path, serde_json::to_vec_pretty(cfg)?)
        .map_err(|e| FpmError::io(&config_path, e))?;
    Ok(manifest)
}

fn generate(job: &Job, cfg: &CorpusConfig, out_dir: &Path) -> Result<ManifestRow> {
    let grid = cfg.geometry.grid(
        job.setting.overlap,
        cfg.n_side,
        DEFAULT_HIGH_RES_SIDE,
        cfg.low_res_side,
    )?;
    let pupil = Pupil::new(cfg.low_res_side, grid.pupil_radius(), cfg.pupil_edge)?;
    let seed = cube_seed(cfg.seed, &job.source, job.setting_index);
    let noise = NoiseSpec::new(job.setting.noise_std, seed)?;
    let shuffle = if cfg.shuffle {
        shuffle_seed_for(seed)
    } else {
        0
    };

    let object = prepare_ground_truth(&job.tile)?;
    let mut cube = build_cube(&object, &grid, &pupil, &noise, shuffle)?;
    cube.meta.source_id = job.source.clone();
    cube.meta.ground_truth = format!("gt/{}.fpc", job.source);
    cube.meta.overlap_target = job.setting.overlap;

    let rel = format!("cubes/{}__s{:02}.fpc", job.source, job.setting_index);
    write_cube(&cube, &out_dir.join(&rel))?;
    if cfg.upsample {
        let up = upsample_cube(&cube)?;
        write_cube(&up, &out_dir.join(upsampled_path(&rel)))?;
    }
    Ok(ManifestRow {
        cube_path: rel,
        source: job.source.clone(),
        overlap: job.setting.overlap,
        noise_std: job.setting.noise_std,
        seed,
        checksum: format!("{:016x}", payload_checksum(&cube)),
    })
}

/// `cubes/x.fpc` → `cubes/x.up.fpc`.
pub fn upsampled_path(cube_path: &str) -> String {
    sibling(cube_path, "up")
}

/// `cubes/x.fpc` → `cubes/x.pred.fpc`, where prediction files are expected.
pub fn prediction_path(cube_path: &str) -> String {
    sibling(cube_path, "pred")
}

fn sibling(cube_path: &str, tag: &str) -> String {
    match cube_path.strip_suffix(".fpc") {
        Some(stem) => format!("{stem}.{tag}.fpc"),
        None => format!("{cube_path}.{tag}.fpc"),
    }
}

/// Loads the cube and its ground truth for a manifest row.
pub fn load_row(dir: &Path, row: &ManifestRow) -> Result<(IntensityCube, Frame)> {
    let cube = read_cube(&dir.join(&row.cube_path))?;
    let gt = read_cube(&dir.join(&cube.meta.ground_truth))?;
    if gt.channels != 1 {
        return Err(FpmError::Shape(format!(
            "ground truth {} has {} channels",
            cube.meta.ground_truth, gt.channels
        )));
    }
    Ok((cube, gt.channel_frame(0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiles() {
        assert_eq!(tile_origins(128, 128, 128, false), vec![(0, 0)]);
        assert_eq!(tile_origins(300, 200, 128, false), vec![(0, 0), (128, 0)]);
        assert_eq!(tile_origins(256, 256, 64, false).len(), 9);
        assert_eq!(tile_origins(300, 200, 128, true), vec![(86, 36)]);
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(upsampled_path("cubes/a__s00.fpc"), "cubes/a__s00.up.fpc");
        assert_eq!(prediction_path("cubes/a__s00.fpc"), "cubes/a__s00.pred.fpc");
    }

    #[test]
    fn seeds_are_distinct_and_nonzero() {
        let a = cube_seed(1, "camera", 0);
        assert_ne!(a, cube_seed(1, "camera", 1));
        assert_ne!(a, cube_seed(1, "coins", 0));
        assert_ne!(a, cube_seed(2, "camera", 0));
        assert_eq!(a, cube_seed(1, "camera", 0));
        assert_ne!(shuffle_seed_for(a), 0);
    }
}
