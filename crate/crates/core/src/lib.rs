//! Fourier ptychographic microscopy toolkit: a coherent forward model, the
//! alternating-projection reconstruction loop, dataset cube generation with a
//! portable binary format, and PSNR/SSIM evaluation sweeps.

pub mod ap;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod field;
pub mod forward;
pub mod fpc;
pub mod frame;
pub mod imageio;
pub mod metrics;
pub mod resample;
pub mod shuffle;

pub use dataset::{CubeMeta, IntensityCube};
pub use error::{ErrorClass, FpmError, Result};
pub use field::{
    crop_spectrum, embed_spectrum, forward_dft, inverse_dft, BinOffset, ComplexField, Pupil,
    PupilEdge, Spectrum,
};
pub use forward::{
    angle_to_wavevector, overlap_ratio, radius_for_overlap, simulate_intensity, simulate_stack,
    spacing_for_overlap, IlluminationGrid, NoiseSpec, OverlapGeometry, PhysicalConfig,
};
pub use frame::Frame;
