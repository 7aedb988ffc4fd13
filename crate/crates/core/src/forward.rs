//! Illumination geometry and the coherent forward model.
//!
//! An LED at wave vector `k_n` shifts the object spectrum so that the band
//! around `k_n` passes the objective pupil; the camera records the squared
//! modulus of what gets through. With a centred spectrum that shift is just a
//! window extraction at `k_n`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FpmError, Result};
use crate::field::{
    forward_dft, inverse_dft_unchecked, BinOffset, ComplexField, Pupil, Spectrum, Window,
};
use crate::frame::Frame;

pub const DEFAULT_HIGH_RES_SIDE: usize = 128;
pub const DEFAULT_LOW_RES_SIDE: usize = 32;
pub const DEFAULT_N_SIDE: usize = 5;
pub const DEFAULT_PUPIL_RADIUS: f64 = 12.0;

/// Physical illumination description: wavelength, per-LED incidence angles
/// and the side length of the imaged region (same length unit throughout).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConfig {
    pub wavelength: f64,
    /// `(theta_x, theta_y)` in radians, one pair per LED.
    pub angles: Vec<(f64, f64)>,
    pub field_of_view: f64,
}

/// Spatial frequency `(sin θx / λ, sin θy / λ)` of LED `led`, in cycles per
/// length unit.
pub fn angle_to_wavevector(cfg: &PhysicalConfig, led: usize) -> Result<(f64, f64)> {
    if !(cfg.wavelength > 0.0) {
        return Err(FpmError::Invalid(format!(
            "wavelength must be positive, got {}",
            cfg.wavelength
        )));
    }
    let &(tx, ty) = cfg.angles.get(led).ok_or_else(|| {
        FpmError::Invalid(format!(
            "LED index {led} out of range for {} angles",
            cfg.angles.len()
        ))
    })?;
    let (sx, sy) = (tx.sin(), ty.sin());
    // sin of a real angle is always within [-1, 1]; this only trips on NaN.
    if !(sx.abs() <= 1.0 && sy.abs() <= 1.0) {
        return Err(FpmError::Invalid(format!(
            "illumination angle ({tx}, {ty}) has no valid sine"
        )));
    }
    Ok((sx / cfg.wavelength, sy / cfg.wavelength))
}

/// Converts a continuous spatial frequency to the nearest centred bin. The
/// frequency resolution of a field of view `fov` is `1 / fov`.
pub fn wavevector_to_bins(k: (f64, f64), field_of_view: f64) -> BinOffset {
    BinOffset::new(
        (k.0 * field_of_view).round() as i64,
        (k.1 * field_of_view).round() as i64,
    )
}

/// Fraction of a pupil disk's area shared with a neighbour at centre distance
/// `spacing`.
pub fn overlap_ratio(spacing: f64, pupil_radius: f64) -> Result<f64> {
    if !(pupil_radius > 0.0) {
        return Err(FpmError::Invalid(format!(
            "pupil radius must be positive, got {pupil_radius}"
        )));
    }
    if !(spacing >= 0.0) {
        return Err(FpmError::Invalid(format!(
            "spacing must be non-negative, got {spacing}"
        )));
    }
    Ok(lens_fraction(spacing / (2.0 * pupil_radius)))
}

fn lens_fraction(u: f64) -> f64 {
    if u >= 1.0 {
        return 0.0;
    }
    (2.0 / PI) * (u.acos() - u * (1.0 - u * u).sqrt())
}

fn check_target(target: f64) -> Result<()> {
    if !(0.0..1.0).contains(&target) {
        return Err(FpmError::Invalid(format!(
            "overlap target must lie in [0, 1), got {target}"
        )));
    }
    Ok(())
}

/// Normalized distance `d / 2r` at which the lens fraction equals `target`,
/// by bisection to within 1e-12 in ratio.
fn lens_distance_for(target: f64) -> f64 {
    if target == 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = lens_fraction(mid);
        if (r - target).abs() <= 1e-12 {
            return mid;
        }
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Centre spacing that yields the requested overlap ratio for a given pupil.
pub fn spacing_for_overlap(target: f64, pupil_radius: f64) -> Result<f64> {
    if !(pupil_radius > 0.0) {
        return Err(FpmError::Invalid(format!(
            "pupil radius must be positive, got {pupil_radius}"
        )));
    }
    check_target(target)?;
    Ok(lens_distance_for(target) * 2.0 * pupil_radius)
}

/// Pupil radius that yields the requested overlap ratio for a given spacing.
pub fn radius_for_overlap(target: f64, spacing: f64) -> Result<f64> {
    if !(spacing > 0.0) {
        return Err(FpmError::Invalid(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    check_target(target)?;
    Ok(spacing / (2.0 * lens_distance_for(target)))
}

/// How an overlap target is turned into grid geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OverlapGeometry {
    /// Keep the pupil and move the LEDs: spacing follows the target.
    FixedRadius { pupil_radius: f64 },
    /// Keep the LEDs and change the objective: radius follows the target.
    /// Lower overlap then means a smaller pupil and a blurrier image.
    FixedSpacing { spacing: f64 },
}

impl OverlapGeometry {
    /// LED spacing at which a 12-bin pupil overlaps its neighbours by 65%.
    pub fn default_spacing() -> f64 {
        spacing_for_overlap(0.65, DEFAULT_PUPIL_RADIUS).expect("constant arguments are valid")
    }

    /// `(spacing, pupil_radius)` for an overlap target.
    pub fn resolve(&self, overlap: f64) -> Result<(f64, f64)> {
        match *self {
            OverlapGeometry::FixedRadius { pupil_radius } => {
                Ok((spacing_for_overlap(overlap, pupil_radius)?, pupil_radius))
            }
            OverlapGeometry::FixedSpacing { spacing } => {
                Ok((spacing, radius_for_overlap(overlap, spacing)?))
            }
        }
    }

    pub fn grid(
        &self,
        overlap: f64,
        n_side: usize,
        high_res_side: usize,
        low_res_side: usize,
    ) -> Result<IlluminationGrid> {
        let (spacing, radius) = self.resolve(overlap)?;
        IlluminationGrid::new(n_side, spacing, radius, high_res_side, low_res_side)
    }
}

impl Default for OverlapGeometry {
    fn default() -> Self {
        OverlapGeometry::FixedSpacing {
            spacing: Self::default_spacing(),
        }
    }
}

/// The `n_side`×`n_side` LED grid expressed as pupil centres in the high
/// resolution spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct IlluminationGrid {
    n_side: usize,
    spacing: f64,
    pupil_radius: f64,
    high_res_side: usize,
    low_res_side: usize,
    /// Canonical (spiral) order; index 0 is the on-axis LED.
    centers: Vec<BinOffset>,
}

impl IlluminationGrid {
    pub fn new(
        n_side: usize,
        spacing: f64,
        pupil_radius: f64,
        high_res_side: usize,
        low_res_side: usize,
    ) -> Result<Self> {
        if !(spacing >= 0.0 && spacing.is_finite()) {
            return Err(FpmError::Geometry(format!("invalid spacing {spacing}")));
        }
        if low_res_side == 0 || low_res_side > high_res_side {
            return Err(FpmError::Geometry(format!(
                "low-res side {low_res_side} must lie in 1..={high_res_side}"
            )));
        }
        if !high_res_side.is_multiple_of(low_res_side) {
            return Err(FpmError::Geometry(format!(
                "high-res side {high_res_side} is not a multiple of low-res side {low_res_side}"
            )));
        }
        if !(pupil_radius > 0.0 && pupil_radius <= low_res_side as f64 / 2.0) {
            return Err(FpmError::Geometry(format!(
                "pupil radius {pupil_radius} outside (0, {}]",
                low_res_side as f64 / 2.0
            )));
        }

        let centers = spiral_centers(n_side, spacing);
        let half = (high_res_side / 2) as f64;
        let extent = centers
            .iter()
            .map(|c| c.x.abs().max(c.y.abs()))
            .max()
            .unwrap_or(0) as f64
            + pupil_radius;
        if extent > half {
            return Err(FpmError::Geometry(format!(
                "pupil extent {extent} exceeds spectrum half-width {half} \
                 (spacing {spacing:.3}, radius {pupil_radius})"
            )));
        }
        let probe = Spectrum::zeros(high_res_side, high_res_side);
        for c in &centers {
            Window::locate(&probe, *c, low_res_side)?;
        }

        Ok(Self {
            n_side,
            spacing,
            pupil_radius,
            high_res_side,
            low_res_side,
            centers,
        })
    }

    /// Grid whose nominal neighbour overlap equals `overlap`.
    pub fn with_overlap(
        n_side: usize,
        overlap: f64,
        pupil_radius: f64,
        high_res_side: usize,
        low_res_side: usize,
    ) -> Result<Self> {
        let spacing = spacing_for_overlap(overlap, pupil_radius)?;
        Self::new(n_side, spacing, pupil_radius, high_res_side, low_res_side)
    }

    /// 5×5 grid on a 128 → 32 system with a 12-bin pupil.
    pub fn default_with_overlap(overlap: f64) -> Result<Self> {
        Self::with_overlap(
            DEFAULT_N_SIDE,
            overlap,
            DEFAULT_PUPIL_RADIUS,
            DEFAULT_HIGH_RES_SIDE,
            DEFAULT_LOW_RES_SIDE,
        )
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    pub fn n_led(&self) -> usize {
        self.centers.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn pupil_radius(&self) -> f64 {
        self.pupil_radius
    }

    pub fn high_res_side(&self) -> usize {
        self.high_res_side
    }

    pub fn low_res_side(&self) -> usize {
        self.low_res_side
    }

    pub fn centers(&self) -> &[BinOffset] {
        &self.centers
    }

    pub fn center(&self, led: usize) -> BinOffset {
        self.centers[led]
    }

    /// Canonical indices sorted row by row (top to bottom, left to right).
    pub fn raster_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.centers.len()).collect();
        order.sort_by_key(|&i| (self.centers[i].y, self.centers[i].x));
        order
    }

    /// Mean overlap ratio over horizontally and vertically adjacent LEDs,
    /// measured on the integer-rounded centres. Zero when there are no
    /// neighbours.
    pub fn achieved_overlap(&self) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0usize;
        for (i, a) in self.centers.iter().enumerate() {
            for b in &self.centers[i + 1..] {
                if is_neighbour(*a, *b, &self.centers) {
                    let d = ((a.x - b.x) as f64).hypot((a.y - b.y) as f64);
                    total += lens_fraction(d / (2.0 * self.pupil_radius));
                    pairs += 1;
                }
            }
        }
        if pairs == 0 {
            0.0
        } else {
            total / pairs as f64
        }
    }
}

// Grid neighbours share one coordinate and no other centre lies between them
// on that line.
fn is_neighbour(a: BinOffset, b: BinOffset, all: &[BinOffset]) -> bool {
    let between = |p: i64, q: i64, v: i64| (p.min(q) < v) && (v < p.max(q));
    if a.y == b.y && a.x != b.x {
        !all.iter().any(|c| c.y == a.y && between(a.x, b.x, c.x))
    } else if a.x == b.x && a.y != b.y {
        !all.iter().any(|c| c.x == a.x && between(a.y, b.y, c.y))
    } else {
        false
    }
}

fn spiral_centers(n_side: usize, spacing: f64) -> Vec<BinOffset> {
    // Doubled integer grid coordinates keep the ordering exact for even and
    // odd sides alike.
    let mut cells: Vec<(i64, i64)> = Vec::with_capacity(n_side * n_side);
    for j in 0..n_side as i64 {
        for i in 0..n_side as i64 {
            cells.push((2 * i - (n_side as i64 - 1), 2 * j - (n_side as i64 - 1)));
        }
    }
    let angle = |&(x, y): &(i64, i64)| {
        let a = (y as f64).atan2(x as f64);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    };
    cells.sort_by(|a, b| {
        let da = a.0 * a.0 + a.1 * a.1;
        let db = b.0 * b.0 + b.1 * b.1;
        da.cmp(&db).then(angle(a).total_cmp(&angle(b)))
    });
    cells
        .into_iter()
        .map(|(x, y)| {
            BinOffset::new(
                (x as f64 * 0.5 * spacing).round() as i64,
                (y as f64 * 0.5 * spacing).round() as i64,
            )
        })
        .collect()
}

/// Additive Gaussian sensor noise. `std` is relative to the brightest clean
/// pixel in the stack.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub std: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(std: f64, seed: u64) -> Result<Self> {
        if !(std >= 0.0 && std.is_finite()) {
            return Err(FpmError::Invalid(format!(
                "noise std must be finite and non-negative, got {std}"
            )));
        }
        Ok(Self { std, seed })
    }
}

fn check_compatible(object: &ComplexField, grid: &IlluminationGrid, pupil: &Pupil) -> Result<()> {
    if !object.is_square() || object.width() != grid.high_res_side {
        return Err(FpmError::Shape(format!(
            "object is {}x{}, grid expects {}x{}",
            object.width(),
            object.height(),
            grid.high_res_side,
            grid.high_res_side
        )));
    }
    if pupil.size() != grid.low_res_side {
        return Err(FpmError::Shape(format!(
            "pupil size {} differs from low-res side {}",
            pupil.size(),
            grid.low_res_side
        )));
    }
    Ok(())
}

/// Low-resolution sensor field for one LED given the object spectrum.
pub(crate) fn sensor_field(
    spectrum: &Spectrum,
    center: BinOffset,
    pupil: &Pupil,
) -> Result<ComplexField> {
    let window = Window::locate(spectrum, center, pupil.size())?;
    let mut patch = vec![Complex64::new(0.0, 0.0); pupil.size() * pupil.size()];
    window.read(spectrum, &mut patch);
    for (p, m) in patch.iter_mut().zip(pupil.mask()) {
        *p *= m;
    }
    Ok(inverse_dft_unchecked(&Spectrum::from_raw(
        pupil.size(),
        pupil.size(),
        patch,
    )))
}

fn intensity_from_spectrum(spectrum: &Spectrum, center: BinOffset, pupil: &Pupil) -> Result<Frame> {
    let g = sensor_field(spectrum, center, pupil)?;
    Ok(Frame::from_raw(g.width(), g.height(), g.intensity()))
}

/// Intensity recorded under LED `led` (canonical index).
pub fn simulate_intensity(
    object: &ComplexField,
    grid: &IlluminationGrid,
    led: usize,
    pupil: &Pupil,
) -> Result<Frame> {
    check_compatible(object, grid, pupil)?;
    if led >= grid.n_led() {
        return Err(FpmError::Invalid(format!(
            "LED {led} out of range for {} LEDs",
            grid.n_led()
        )));
    }
    let spectrum = forward_dft(object)?;
    intensity_from_spectrum(&spectrum, grid.center(led), pupil)
}

/// Full canonical-order stack with optional additive Gaussian noise.
///
/// Noise for LED `n` comes from a ChaCha stream keyed by `(seed, n)`, so each
/// image is reproducible on its own regardless of evaluation order. Noisy
/// values below zero are clamped.
pub fn simulate_stack(
    object: &ComplexField,
    grid: &IlluminationGrid,
    pupil: &Pupil,
    noise: &NoiseSpec,
) -> Result<Vec<Frame>> {
    check_compatible(object, grid, pupil)?;
    NoiseSpec::new(noise.std, noise.seed)?;
    let spectrum = forward_dft(object)?;
    let clean = grid
        .centers()
        .par_iter()
        .map(|&c| intensity_from_spectrum(&spectrum, c, pupil))
        .collect::<Result<Vec<_>>>()?;
    if noise.std == 0.0 {
        return Ok(clean);
    }
    let peak = clean.iter().map(Frame::max).fold(0.0, f64::max);
    let sigma = noise.std * peak;
    Ok(clean
        .into_par_iter()
        .enumerate()
        .map(|(led, frame)| add_noise(frame, sigma, noise.seed, led as u64))
        .collect())
}

fn add_noise(frame: Frame, sigma: f64, seed: u64, stream: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let (w, h) = frame.dims();
    let data = frame
        .into_data()
        .into_iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (v + sigma * z).max(0.0)
        })
        .collect();
    Frame::from_raw(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PupilEdge;

    fn default_pupil() -> Pupil {
        Pupil::new(32, 12.0, PupilEdge::Antialiased).unwrap()
    }

    #[test]
    fn wavevector_examples() {
        let cfg = PhysicalConfig {
            wavelength: 0.5,
            angles: vec![(0.0, 0.0), (30f64.to_radians(), 0.0)],
            field_of_view: 16.0,
        };
        assert_eq!(angle_to_wavevector(&cfg, 0).unwrap(), (0.0, 0.0));
        let k = angle_to_wavevector(&cfg, 1).unwrap();
        assert!((k.0 - 1.0).abs() < 1e-12 && k.1 == 0.0);
        assert_eq!(
            wavevector_to_bins(k, cfg.field_of_view),
            BinOffset::new(16, 0)
        );
        assert!(angle_to_wavevector(&cfg, 2).is_err());
        let bad = PhysicalConfig {
            wavelength: 0.0,
            ..cfg.clone()
        };
        assert!(angle_to_wavevector(&bad, 0).is_err());
        let nan = PhysicalConfig {
            angles: vec![(f64::NAN, 0.0)],
            ..cfg
        };
        assert!(angle_to_wavevector(&nan, 0).is_err());
    }

    #[test]
    fn overlap_closed_form_endpoints() {
        assert_eq!(overlap_ratio(24.0, 12.0).unwrap(), 0.0);
        assert_eq!(overlap_ratio(30.0, 12.0).unwrap(), 0.0);
        assert!((overlap_ratio(0.0, 12.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((overlap_ratio(12.0, 12.0).unwrap() - 0.391).abs() < 5e-4);
        assert!(overlap_ratio(1.0, 0.0).is_err());
        assert!(overlap_ratio(-1.0, 1.0).is_err());
    }

    #[test]
    fn overlap_decreasing() {
        let mut prev = overlap_ratio(0.0, 5.0).unwrap();
        for i in 1..1000 {
            let cur = overlap_ratio(i as f64 * 0.01, 5.0).unwrap();
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn spacing_inversion() {
        assert_eq!(spacing_for_overlap(0.0, 12.0).unwrap(), 24.0);
        let s = spacing_for_overlap(0.65, 12.0).unwrap();
        assert!((s - 6.69).abs() < 0.01, "{s}");
        for x in [0.18, 0.40, 0.65] {
            let s = spacing_for_overlap(x, 12.0).unwrap();
            assert!((overlap_ratio(s, 12.0).unwrap() - x).abs() <= 1e-9);
        }
        assert!(spacing_for_overlap(1.0, 12.0).is_err());
        assert!(spacing_for_overlap(-0.1, 12.0).is_err());
    }

    #[test]
    fn radius_inversion() {
        let sp = OverlapGeometry::default_spacing();
        assert_eq!(radius_for_overlap(0.0, sp).unwrap(), sp / 2.0);
        assert!((radius_for_overlap(0.65, sp).unwrap() - 12.0).abs() < 1e-9);
        for x in [0.18, 0.40, 0.65, 0.9] {
            let r = radius_for_overlap(x, 10.0).unwrap();
            assert!((overlap_ratio(10.0, r).unwrap() - x).abs() <= 1e-9);
        }
        assert!(radius_for_overlap(0.5, 0.0).is_err());
        assert!(radius_for_overlap(1.0, 5.0).is_err());
    }

    #[test]
    fn fixed_spacing_geometry_grows_pupil_with_overlap() {
        let geo = OverlapGeometry::default();
        let mut prev = 0.0;
        for ov in [0.0, 0.18, 0.40, 0.65] {
            let g = geo.grid(ov, 5, 128, 32).unwrap();
            assert!(g.pupil_radius() > prev);
            prev = g.pupil_radius();
            assert!(
                (g.achieved_overlap() - ov).abs() < 0.03,
                "{ov}: {}",
                g.achieved_overlap()
            );
        }
        let at65 = geo.grid(0.65, 5, 128, 32).unwrap();
        let reference = IlluminationGrid::default_with_overlap(0.65).unwrap();
        assert_eq!(at65.centers(), reference.centers());
        assert!((at65.pupil_radius() - 12.0).abs() < 1e-9);
    }

    #[test]
    fn spiral_order_and_symmetry() {
        let g = IlluminationGrid::default_with_overlap(0.65).unwrap();
        assert_eq!(g.n_led(), 25);
        assert_eq!(g.center(0), BinOffset::ZERO);
        let d: Vec<f64> = g.centers().iter().map(BinOffset::norm).collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
        for c in g.centers() {
            assert!(g.centers().contains(&BinOffset::new(-c.x, -c.y)));
        }
        let mut raster = g.raster_order();
        raster.sort_unstable();
        assert_eq!(raster, (0..25).collect::<Vec<_>>());
    }

    #[test]
    fn default_geometry_bounds() {
        for ov in [0.0, 0.18, 0.40, 0.65] {
            IlluminationGrid::default_with_overlap(ov).unwrap();
        }
        let err = IlluminationGrid::with_overlap(5, 0.0, 16.0, 128, 32).unwrap_err();
        assert!(err.to_string().contains("80"), "{err}");
        assert!(IlluminationGrid::new(5, 25.0, 12.0, 128, 32).is_err());
        assert!(IlluminationGrid::new(5, 7.0, 17.0, 128, 32).is_err());
        assert!(IlluminationGrid::new(5, 7.0, 12.0, 128, 48).is_err());
    }

    #[test]
    fn achieved_overlap_close_to_nominal() {
        for ov in [0.0, 0.18, 0.40, 0.65] {
            let g = IlluminationGrid::default_with_overlap(ov).unwrap();
            assert!(
                (g.achieved_overlap() - ov).abs() < 0.02,
                "{ov}: {}",
                g.achieved_overlap()
            );
        }
    }

    #[test]
    fn constant_object_gives_unit_image() {
        let g = IlluminationGrid::default_with_overlap(0.65).unwrap();
        let obj = ComplexField::from_amplitude(128, 128, &vec![1.0; 128 * 128]).unwrap();
        let img = simulate_intensity(&obj, &g, 0, &default_pupil()).unwrap();
        for v in img.data() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let zero = ComplexField::zeros(128, 128);
        let img = simulate_intensity(&zero, &g, 3, &default_pupil()).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tilted_plane_wave_is_demodulated() {
        let g = IlluminationGrid::default_with_overlap(0.40).unwrap();
        let pupil = default_pupil();
        for led in [1, 7, 24] {
            let k = g.center(led);
            let data = (0..128 * 128)
                .map(|i| {
                    let (x, y) = ((i % 128) as f64, (i / 128) as f64);
                    Complex64::from_polar(1.0, 2.0 * PI * (k.x as f64 * x + k.y as f64 * y) / 128.0)
                })
                .collect();
            let obj = ComplexField::new(128, 128, data).unwrap();
            let img = simulate_intensity(&obj, &g, led, &pupil).unwrap();
            for v in img.data() {
                assert!((v - 1.0).abs() < 1e-9, "led {led}: {v}");
            }
        }
    }

    #[test]
    fn shape_checks() {
        let g = IlluminationGrid::default_with_overlap(0.65).unwrap();
        let obj = ComplexField::zeros(64, 64);
        assert!(simulate_intensity(&obj, &g, 0, &default_pupil()).is_err());
        let obj = ComplexField::zeros(128, 128);
        let small = Pupil::new(16, 6.0, PupilEdge::Hard).unwrap();
        assert!(simulate_intensity(&obj, &g, 0, &small).is_err());
        assert!(simulate_intensity(&obj, &g, 25, &default_pupil()).is_err());
    }
}
