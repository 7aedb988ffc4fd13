//! Simulates one image at several overlaps and reports AP reconstruction
//! quality.
//!
//! cargo run --release -p fpm-core --example overlap_sweep -- [image.pgm]

use std::path::PathBuf;

use fpm_core::ap::{ap_reconstruct, ApConfig};
use fpm_core::dataset::prepare_ground_truth;
use fpm_core::imageio::load_gray;
use fpm_core::metrics::{psnr, ssim};
use fpm_core::{simulate_stack, Frame, NoiseSpec, OverlapGeometry, Pupil, PupilEdge};

fn main() -> fpm_core::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/camera.pgm"));
    let object = prepare_ground_truth(&load_gray(&path)?)?;
    let truth = Frame::new(128, 128, object.amplitude())?;

    println!("overlap  achieved  radius  sweeps  psnr_db  ssim");
    for overlap in [0.0, 0.18, 0.40, 0.65] {
        let grid = OverlapGeometry::default().grid(overlap, 5, 128, 32)?;
        let pupil = Pupil::new(32, grid.pupil_radius(), PupilEdge::Antialiased)?;
        let stack = simulate_stack(&object, &grid, &pupil, &NoiseSpec::none())?;
        let result = ap_reconstruct(&stack, &grid, &pupil, &ApConfig::default())?;
        let estimate = Frame::new(128, 128, result.field.amplitude())?.map(|v| v.clamp(0.0, 1.0));
        println!(
            "{overlap:7.2}  {:8.3}  {:6.2}  {:6}  {:7.2}  {:.3}",
            grid.achieved_overlap(),
            grid.pupil_radius(),
            result.iterations_run,
            psnr(&truth, &estimate)?,
            ssim(&truth, &estimate)?
        );
    }
    Ok(())
}
