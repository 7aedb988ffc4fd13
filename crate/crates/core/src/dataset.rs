//! Intensity cubes: the stacked, normalized and shuffled low-resolution
//! images that form one training or evaluation sample.

use serde::{Deserialize, Serialize};

use crate::error::{FpmError, Result};
use crate::field::{ComplexField, Pupil, PupilEdge};
use crate::forward::{simulate_stack, IlluminationGrid, NoiseSpec, DEFAULT_HIGH_RES_SIDE};
use crate::frame::Frame;
use crate::resample::resize_bicubic;
use crate::shuffle::{invert, is_permutation, seeded_permutation};

/// Side of the ground-truth crop.
pub const GROUND_TRUTH_SIDE: usize = DEFAULT_HIGH_RES_SIDE;

/// Provenance and normalization record stored alongside every cube.
///
/// Unknown keys are ignored and missing ones take their defaults, so files
/// written by other tools (single-channel predictions, ground truth) load
/// through the same path.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CubeMeta {
    pub spacing: f64,
    pub pupil_radius: f64,
    pub overlap_achieved: f64,
    pub noise_std: f64,
    pub shuffle_seed: u64,
    /// `permutation[slot]` is the canonical LED index stored in that slot.
    pub permutation: Vec<usize>,
    /// Per-slot scale: stored value × constant = simulated intensity.
    pub norm_constants: Vec<f64>,
    pub source_id: String,
    pub ground_truth: String,
    pub n_side: usize,
    pub high_res_side: usize,
    pub overlap_target: f64,
    pub noise_seed: u64,
    pub pupil_edge: PupilEdge,
}

/// A `side`×`side`×`channels` stack of `[0, 1]` values, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityCube {
    pub side: usize,
    pub channels: usize,
    pub upsampled: bool,
    pub data: Vec<f32>,
    pub meta: CubeMeta,
}

impl IntensityCube {
    pub fn new(side: usize, channels: usize, data: Vec<f32>, meta: CubeMeta) -> Result<Self> {
        if data.len() != side * side * channels {
            return Err(FpmError::Shape(format!(
                "cube {side}x{side}x{channels} needs {} values, got {}",
                side * side * channels,
                data.len()
            )));
        }
        if !meta.permutation.is_empty()
            && (meta.permutation.len() != channels || !is_permutation(&meta.permutation))
        {
            return Err(FpmError::Invalid(format!(
                "permutation {:?} is not a permutation of 0..{channels}",
                meta.permutation
            )));
        }
        Ok(Self {
            side,
            channels,
            upsampled: false,
            data,
            meta,
        })
    }

    /// A single-channel cube holding an image, used for ground truth and
    /// reconstructions.
    pub fn from_frame(frame: &Frame, meta: CubeMeta) -> Result<Self> {
        if frame.width() != frame.height() {
            return Err(FpmError::Shape(format!(
                "cube channels must be square, got {}x{}",
                frame.width(),
                frame.height()
            )));
        }
        let data = frame.data().iter().map(|&v| v as f32).collect();
        Self::new(frame.width(), 1, data, meta)
    }

    pub fn channel(&self, slot: usize) -> &[f32] {
        let n = self.side * self.side;
        &self.data[slot * n..(slot + 1) * n]
    }

    pub fn channel_frame(&self, slot: usize) -> Frame {
        Frame::from_raw(
            self.side,
            self.side,
            self.channel(slot).iter().map(|&v| v as f64).collect(),
        )
    }

    fn norm_constant(&self, slot: usize) -> f64 {
        self.meta.norm_constants.get(slot).copied().unwrap_or(1.0)
    }

    /// Channel `slot` scaled back to simulated intensity.
    pub fn denormalized(&self, slot: usize) -> Frame {
        let c = self.norm_constant(slot);
        self.channel_frame(slot).map(|v| v * c)
    }

    /// Canonical LED index held in `slot`.
    pub fn led_of_slot(&self, slot: usize) -> usize {
        self.meta.permutation.get(slot).copied().unwrap_or(slot)
    }

    /// Denormalized intensities in canonical LED order, ready for
    /// reconstruction.
    pub fn canonical_stack(&self) -> Vec<Frame> {
        let mut out = vec![None; self.channels];
        for slot in 0..self.channels {
            out[self.led_of_slot(slot)] = Some(self.denormalized(slot));
        }
        out.into_iter()
            .map(|f| f.expect("permutation covers every LED"))
            .collect()
    }

    /// The same samples relabelled into canonical order.
    pub fn unshuffled(&self) -> IntensityCube {
        let n = self.side * self.side;
        let mut data = vec![0.0f32; self.data.len()];
        let mut norms = vec![1.0; self.channels];
        for slot in 0..self.channels {
            let led = self.led_of_slot(slot);
            data[led * n..(led + 1) * n].copy_from_slice(self.channel(slot));
            norms[led] = self.norm_constant(slot);
        }
        let mut meta = self.meta.clone();
        meta.permutation = (0..self.channels).collect();
        meta.norm_constants = norms;
        meta.shuffle_seed = 0;
        IntensityCube {
            data,
            meta,
            ..self.clone()
        }
    }

    /// Rebuilds the illumination grid this cube was simulated with.
    pub fn grid(&self) -> Result<IlluminationGrid> {
        if self.upsampled {
            return Err(FpmError::Invalid(
                "upsampled cubes no longer match the sensor sampling".into(),
            ));
        }
        let n_side = if self.meta.n_side > 0 {
            self.meta.n_side
        } else {
            (self.channels as f64).sqrt().round() as usize
        };
        if n_side * n_side != self.channels {
            return Err(FpmError::Shape(format!(
                "{} channels do not form a square LED grid",
                self.channels
            )));
        }
        let high = if self.meta.high_res_side > 0 {
            self.meta.high_res_side
        } else {
            self.side * 4
        };
        IlluminationGrid::new(
            n_side,
            self.meta.spacing,
            self.meta.pupil_radius,
            high,
            self.side,
        )
    }

    pub fn pupil(&self) -> Result<Pupil> {
        Pupil::new(self.side, self.meta.pupil_radius, self.meta.pupil_edge)
    }
}

/// Centre-crops to 128×128 and rescales to `[0, 1]` as a zero-phase
/// amplitude object.
///
/// Inputs already within `[0, 1]` are kept as they are; larger maxima are
/// taken to be 8-bit (≤ 255) or 16-bit counts.
pub fn prepare_ground_truth(image: &Frame) -> Result<ComplexField> {
    let side = GROUND_TRUTH_SIDE;
    if image.width() < side || image.height() < side {
        return Err(FpmError::Shape(format!(
            "image {}x{} is smaller than {side}x{side}",
            image.width(),
            image.height()
        )));
    }
    if image.min() < 0.0 {
        return Err(FpmError::Invalid("image has negative values".into()));
    }
    let crop = image.center_crop(side, side)?;
    let peak = crop.max().max(image.max());
    let scale = if peak <= 1.0 {
        1.0
    } else if peak <= 255.0 {
        1.0 / 255.0
    } else {
        1.0 / 65535.0
    };
    let amp: Vec<f64> = crop.data().iter().map(|v| (v * scale).min(1.0)).collect();
    ComplexField::from_amplitude(side, side, &amp)
}

/// Simulates, normalizes per channel and shuffles one cube. A shuffle seed
/// of 0 keeps canonical order.
pub fn build_cube(
    object: &ComplexField,
    grid: &IlluminationGrid,
    pupil: &Pupil,
    noise: &NoiseSpec,
    shuffle_seed: u64,
) -> Result<IntensityCube> {
    let stack = simulate_stack(object, grid, pupil, noise)?;
    let channels = stack.len();
    let side = grid.low_res_side();
    let permutation: Vec<usize> = if shuffle_seed == 0 {
        (0..channels).collect()
    } else {
        seeded_permutation(channels, shuffle_seed)
    };

    let mut data = Vec::with_capacity(side * side * channels);
    let mut norm_constants = Vec::with_capacity(channels);
    for &led in &permutation {
        let frame = &stack[led];
        let peak = frame.max();
        let inv = if peak > 0.0 { 1.0 / peak } else { 1.0 };
        data.extend(
            frame
                .data()
                .iter()
                .map(|&v| (v * inv).clamp(0.0, 1.0) as f32),
        );
        norm_constants.push(peak);
    }

    let meta = CubeMeta {
        spacing: grid.spacing(),
        pupil_radius: grid.pupil_radius(),
        overlap_achieved: grid.achieved_overlap(),
        noise_std: noise.std,
        shuffle_seed,
        permutation,
        norm_constants,
        n_side: grid.n_side(),
        high_res_side: grid.high_res_side(),
        noise_seed: noise.seed,
        pupil_edge: pupil.edge(),
        ..CubeMeta::default()
    };
    IntensityCube::new(side, channels, data, meta)
}

/// Undoes a permutation produced by [`build_cube`]: `slot_of_led[led]`.
pub fn slots_by_led(cube: &IntensityCube) -> Vec<usize> {
    if cube.meta.permutation.is_empty() {
        (0..cube.channels).collect()
    } else {
        invert(&cube.meta.permutation)
    }
}

/// Bicubic-resamples every channel to the high-resolution side and clamps
/// to `[0, 1]`.
pub fn upsample_cube(cube: &IntensityCube) -> Result<IntensityCube> {
    if cube.upsampled {
        return Err(FpmError::AlreadyUpsampled);
    }
    let target = if cube.meta.high_res_side > 0 {
        cube.meta.high_res_side
    } else {
        cube.side * 4
    };
    let mut data = Vec::with_capacity(target * target * cube.channels);
    for slot in 0..cube.channels {
        let up = resize_bicubic(&cube.channel_frame(slot), target, target)?;
        data.extend(up.data().iter().map(|&v| v.clamp(0.0, 1.0) as f32));
    }
    Ok(IntensityCube {
        side: target,
        channels: cube.channels,
        upsampled: true,
        data,
        meta: cube.meta.clone(),
    })
}
