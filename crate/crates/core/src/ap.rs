//! Alternating-projection phase retrieval.
//!
//! Each sweep visits every LED once. For LED `n` the current spectrum
//! estimate is windowed at `k_n` and passed through the pupil, the resulting
//! low-resolution field has its modulus replaced by the measured amplitude,
//! and the correction is written back into the spectrum on the pupil support.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FpmError, Result};
use crate::field::{
    forward_dft_unchecked, inverse_dft_unchecked, ComplexField, Pupil, Spectrum, Window,
};
use crate::forward::{sensor_field, IlluminationGrid};
use crate::frame::Frame;
use crate::resample::resize_bicubic;
use crate::shuffle::seeded_permutation;

/// LED visitation order within a sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Ordering {
    /// Canonical order: centre LED first, then outward.
    #[default]
    Spiral,
    Raster,
    /// A seeded permutation, fixed for all sweeps.
    Random {
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Init {
    /// Bicubic-upsampled amplitude of the on-axis image with zero phase.
    #[default]
    UpsampledCenter,
    /// Random amplitude and phase.
    Random { seed: u64 },
}

/// How stack images are paired with illumination centres.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Association {
    #[default]
    Correct,
    /// Images are paired with a seeded permutation of the LEDs, as happens
    /// when a shuffled acquisition is fed in without its permutation.
    Misassociated { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApConfig {
    pub max_iterations: usize,
    pub ordering: Ordering,
    pub init: Init,
    /// Stop once the relative spectrum change over a sweep drops below this.
    pub tolerance: f64,
    /// Floor on `|g|` in the modulus-replacement denominator.
    pub epsilon: f64,
    pub association: Association,
}

impl Default for ApConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            ordering: Ordering::Spiral,
            init: Init::UpsampledCenter,
            tolerance: 1e-6,
            epsilon: 1e-12,
            association: Association::Correct,
        }
    }
}

impl ApConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(FpmError::Invalid(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.tolerance >= 0.0) {
            return Err(FpmError::Invalid(format!(
                "tolerance must be non-negative, got {}",
                self.tolerance
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(FpmError::Invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApResult {
    pub field: ComplexField,
    pub spectrum: Spectrum,
    pub iterations_run: usize,
    /// [`data_residual`] after each sweep.
    pub residual_history: Vec<f64>,
}

/// Visitation order for one sweep, as canonical LED indices.
pub fn visit_order(grid: &IlluminationGrid, ordering: Ordering) -> Vec<usize> {
    match ordering {
        Ordering::Spiral => (0..grid.n_led()).collect(),
        Ordering::Raster => grid.raster_order(),
        Ordering::Random { seed } => seeded_permutation(grid.n_led(), seed),
    }
}

fn check_stack(stack: &[Frame], grid: &IlluminationGrid, pupil: &Pupil) -> Result<()> {
    if stack.len() != grid.n_led() {
        return Err(FpmError::Shape(format!(
            "stack has {} images, grid has {} LEDs",
            stack.len(),
            grid.n_led()
        )));
    }
    let side = grid.low_res_side();
    if pupil.size() != side {
        return Err(FpmError::Shape(format!(
            "pupil size {} differs from low-res side {side}",
            pupil.size()
        )));
    }
    if let Some((i, f)) = stack
        .iter()
        .enumerate()
        .find(|(_, f)| f.dims() != (side, side))
    {
        return Err(FpmError::Shape(format!(
            "image {i} is {}x{}, expected {side}x{side}",
            f.width(),
            f.height()
        )));
    }
    Ok(())
}

fn amplitudes(stack: &[Frame]) -> Vec<Vec<f64>> {
    stack
        .iter()
        .map(|f| f.data().iter().map(|&v| v.max(0.0).sqrt()).collect())
        .collect()
}

/// Starting object estimate for `cfg.init`. `stack` is already associated
/// with canonical LED order.
pub fn initial_estimate(
    stack: &[Frame],
    grid: &IlluminationGrid,
    init: Init,
) -> Result<ComplexField> {
    let side = grid.high_res_side();
    match init {
        Init::UpsampledCenter => match stack.first() {
            None => Ok(ComplexField::zeros(side, side)),
            Some(center) => {
                let amp = center.map(|v| v.max(0.0).sqrt());
                let up = resize_bicubic(&amp, side, side)?;
                ComplexField::from_amplitude(side, side, up.data())
            }
        },
        Init::Random { seed } => {
            let level = stack
                .first()
                .map(|f| {
                    f.data().iter().map(|v| v.max(0.0).sqrt()).sum::<f64>() / f.data().len() as f64
                })
                .unwrap_or(1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = (0..side * side)
                .map(|_| {
                    let a = rng.random_range(0.0..2.0) * level;
                    let phi = rng.random_range(0.0..std::f64::consts::TAU);
                    Complex64::from_polar(a, phi)
                })
                .collect();
            ComplexField::new(side, side, data)
        }
    }
}

/// Relative amplitude mismatch `Σ(√I − |g|)² / ΣI` of a spectrum estimate
/// against a canonical-order stack.
pub fn data_residual(
    stack: &[Frame],
    grid: &IlluminationGrid,
    pupil: &Pupil,
    spectrum: &Spectrum,
) -> Result<f64> {
    check_stack(stack, grid, pupil)?;
    residual_of(&amplitudes(stack), grid, pupil, spectrum)
}

fn residual_of(
    amps: &[Vec<f64>],
    grid: &IlluminationGrid,
    pupil: &Pupil,
    spectrum: &Spectrum,
) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (led, amp) in amps.iter().enumerate() {
        let g = sensor_field(spectrum, grid.center(led), pupil)?;
        for (a, v) in amp.iter().zip(g.data()) {
            let d = a - v.norm();
            num += d * d;
            den += a * a;
        }
    }
    Ok(if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    })
}

/// Runs alternating projections on a canonical-order intensity stack.
pub fn ap_reconstruct(
    stack: &[Frame],
    grid: &IlluminationGrid,
    pupil: &Pupil,
    cfg: &ApConfig,
) -> Result<ApResult> {
    cfg.validate()?;
    check_stack(stack, grid, pupil)?;

    let associated: Vec<Frame> = match cfg.association {
        Association::Correct => stack.to_vec(),
        Association::Misassociated { seed } => seeded_permutation(stack.len(), seed)
            .into_iter()
            .map(|i| stack[i].clone())
            .collect(),
    };
    let amps = amplitudes(&associated);
    let init = initial_estimate(&associated, grid, cfg.init)?;
    let mut spectrum = forward_dft_unchecked(&init);

    let n = grid.low_res_side();
    let windows = grid
        .centers()
        .iter()
        .map(|&c| Window::locate(&spectrum, c, n))
        .collect::<Result<Vec<_>>>()?;
    let order = visit_order(grid, cfg.ordering);
    let mask = pupil.mask();

    let mut patch = vec![Complex64::new(0.0, 0.0); n * n];
    let mut history = Vec::with_capacity(cfg.max_iterations);
    for sweep in 0..cfg.max_iterations {
        let previous = spectrum.clone();
        for &led in &order {
            let window = &windows[led];
            window.read(&spectrum, &mut patch);
            let filtered: Vec<Complex64> = patch.iter().zip(mask).map(|(p, m)| p * m).collect();
            let g = inverse_dft_unchecked(&Spectrum::from_raw(n, n, filtered.clone()));
            let replaced: Vec<Complex64> = g
                .data()
                .iter()
                .zip(&amps[led])
                .map(|(v, a)| v * (a / v.norm().max(cfg.epsilon)))
                .collect();
            let updated = forward_dft_unchecked(&ComplexField::from_raw(n, n, replaced));
            for ((p, new), old) in patch.iter_mut().zip(updated.data()).zip(&filtered) {
                *p += new - old;
            }
            window.write(&mut spectrum, &patch, mask);
        }
        if spectrum.validate().is_err() {
            return Err(FpmError::Diverged { sweep });
        }
        history.push(residual_of(&amps, grid, pupil, &spectrum)?);

        let change: f64 = spectrum
            .data()
            .iter()
            .zip(previous.data())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let reference = previous.energy().sqrt();
        let relative = if reference > 0.0 {
            change / reference
        } else if change == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if relative < cfg.tolerance {
            break;
        }
    }

    Ok(ApResult {
        field: inverse_dft_unchecked(&spectrum),
        spectrum,
        iterations_run: history.len(),
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{forward_dft, PupilEdge};
    use crate::forward::{simulate_stack, NoiseSpec};

    fn smooth_object(seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms: Vec<(f64, f64, f64, f64)> = (0..12)
            .map(|_| {
                (
                    rng.random_range(-6.0..6.0),
                    rng.random_range(-6.0..6.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.02..0.06),
                )
            })
            .collect();
        let amp: Vec<f64> = (0..128 * 128)
            .map(|i| {
                let (x, y) = ((i % 128) as f64, (i / 128) as f64);
                0.5 + terms
                    .iter()
                    .map(|(fx, fy, ph, a)| {
                        a * (std::f64::consts::TAU * (fx * x + fy * y) / 128.0 + ph).cos()
                    })
                    .sum::<f64>()
            })
            .collect();
        ComplexField::from_amplitude(128, 128, &amp).unwrap()
    }

    fn pupil() -> Pupil {
        Pupil::new(32, 12.0, PupilEdge::Antialiased).unwrap()
    }

    #[test]
    fn empty_grid_returns_initialisation() {
        let grid = IlluminationGrid::new(0, 7.0, 12.0, 128, 32).unwrap();
        let cfg = ApConfig {
            max_iterations: 1,
            tolerance: 0.0,
            ..ApConfig::default()
        };
        let r = ap_reconstruct(&[], &grid, &pupil(), &cfg).unwrap();
        let init = initial_estimate(&[], &grid, cfg.init).unwrap();
        assert_eq!(r.field, init);
        assert_eq!(r.iterations_run, 1);
        assert_eq!(r.residual_history, vec![0.0]);
    }

    #[test]
    fn residual_zero_for_truth_and_one_for_zero() {
        let grid = IlluminationGrid::default_with_overlap(0.65).unwrap();
        let obj = smooth_object(1);
        let stack = simulate_stack(&obj, &grid, &pupil(), &NoiseSpec::none()).unwrap();
        let truth = forward_dft(&obj).unwrap();
        assert!(data_residual(&stack, &grid, &pupil(), &truth).unwrap() < 1e-9);
        let zero = Spectrum::zeros(128, 128);
        assert!((data_residual(&stack, &grid, &pupil(), &zero).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_ignores_global_phase() {
        let grid = IlluminationGrid::default_with_overlap(0.40).unwrap();
        let obj = smooth_object(2);
        let stack = simulate_stack(&obj, &grid, &pupil(), &NoiseSpec::none()).unwrap();
        let guess = forward_dft(&smooth_object(3)).unwrap();
        let phase = Complex64::from_polar(1.0, 1.1);
        let rotated =
            Spectrum::new(128, 128, guess.data().iter().map(|v| v * phase).collect()).unwrap();
        let a = data_residual(&stack, &grid, &pupil(), &guess).unwrap();
        let b = data_residual(&stack, &grid, &pupil(), &rotated).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn orderings_are_permutations() {
        let grid = IlluminationGrid::default_with_overlap(0.65).unwrap();
        for o in [
            Ordering::Spiral,
            Ordering::Raster,
            Ordering::Random { seed: 9 },
        ] {
            let mut v = visit_order(&grid, o);
            v.sort_unstable();
            assert_eq!(v, (0..25).collect::<Vec<_>>());
        }
        assert_ne!(
            visit_order(&grid, Ordering::Random { seed: 1 }),
            visit_order(&grid, Ordering::Random { seed: 2 })
        );
    }

    #[test]
    fn converges_on_smooth_object() {
        let grid = IlluminationGrid::default_with_overlap(0.65).unwrap();
        let obj = smooth_object(4);
        let stack = simulate_stack(&obj, &grid, &pupil(), &NoiseSpec::none()).unwrap();
        let r = ap_reconstruct(&stack, &grid, &pupil(), &ApConfig::default()).unwrap();
        assert_eq!(r.residual_history.len(), r.iterations_run);
        let last = *r.residual_history.last().unwrap();
        assert!(last < r.residual_history[0]);
        assert!(last < 1e-3, "{last}");
    }

    #[test]
    fn zero_init_stays_finite() {
        let grid = IlluminationGrid::default_with_overlap(0.65).unwrap();
        let stack = vec![Frame::filled(32, 32, 0.25); 25];
        let black = vec![Frame::filled(32, 32, 0.0); 25];
        let cfg = ApConfig {
            max_iterations: 3,
            ..ApConfig::default()
        };
        // all-zero measurements give an all-zero upsampled start
        let r = ap_reconstruct(&black, &grid, &pupil(), &cfg).unwrap();
        assert!(r.field.data().iter().all(|v| v.norm() == 0.0));
        let r = ap_reconstruct(&stack, &grid, &pupil(), &cfg).unwrap();
        assert!(r
            .field
            .data()
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite()));
    }

    #[test]
    fn deterministic() {
        let grid = IlluminationGrid::default_with_overlap(0.40).unwrap();
        let obj = smooth_object(5);
        let stack =
            simulate_stack(&obj, &grid, &pupil(), &NoiseSpec::new(1e-4, 3).unwrap()).unwrap();
        let cfg = ApConfig {
            max_iterations: 5,
            ordering: Ordering::Random { seed: 4 },
            init: Init::Random { seed: 5 },
            association: Association::Misassociated { seed: 6 },
            ..ApConfig::default()
        };
        let a = ap_reconstruct(&stack, &grid, &pupil(), &cfg).unwrap();
        let b = ap_reconstruct(&stack, &grid, &pupil(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let grid = IlluminationGrid::default_with_overlap(0.65).unwrap();
        let stack = vec![Frame::filled(32, 32, 1.0); 24];
        assert!(matches!(
            ap_reconstruct(&stack, &grid, &pupil(), &ApConfig::default()),
            Err(FpmError::Shape(_))
        ));
        let stack = vec![Frame::filled(16, 16, 1.0); 25];
        assert!(ap_reconstruct(&stack, &grid, &pupil(), &ApConfig::default()).is_err());
        let stack = vec![Frame::filled(32, 32, 1.0); 25];
        for cfg in [
            ApConfig {
                max_iterations: 0,
                ..ApConfig::default()
            },
            ApConfig {
                epsilon: 0.0,
                ..ApConfig::default()
            },
            ApConfig {
                tolerance: -1.0,
                ..ApConfig::default()
            },
        ] {
            assert!(matches!(
                ap_reconstruct(&stack, &grid, &pupil(), &cfg),
                Err(FpmError::Invalid(_))
            ));
        }
    }
}
