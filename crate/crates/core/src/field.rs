//! Complex-field containers, the centered orthonormal DFT pair, spectral
//! windowing and the circular pupil.
//!
//! Spatial fields and spectra are separate types so a centered spectrum can
//! never be fed back into an operation that expects a spatial field. Both are
//! row-major; a spectrum keeps zero frequency at bin `(width / 2, height / 2)`.

use std::cell::RefCell;
use std::fmt;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{FpmError, Result};

macro_rules! plane_common {
    ($ty:ident) => {
        impl $ty {
            /// Builds a plane from row-major data, rejecting empty shapes,
            /// length mismatches and non-finite samples.
            pub fn new(width: usize, height: usize, data: Vec<Complex64>) -> Result<Self> {
                if width == 0 || height == 0 {
                    return Err(FpmError::Shape(format!(
                        "{} must be at least 1x1, got {width}x{height}",
                        stringify!($ty)
                    )));
                }
                if data.len() != width * height {
                    return Err(FpmError::Shape(format!(
                        "{} of {width}x{height} needs {} samples, got {}",
                        stringify!($ty),
                        width * height,
                        data.len()
                    )));
                }
                check_finite(&data, width)?;
                Ok(Self {
                    width,
                    height,
                    data,
                })
            }

            pub fn zeros(width: usize, height: usize) -> Self {
                assert!(width > 0 && height > 0, "empty plane");
                Self {
                    width,
                    height,
                    data: vec![Complex64::new(0.0, 0.0); width * height],
                }
            }

            pub(crate) fn from_raw(width: usize, height: usize, data: Vec<Complex64>) -> Self {
                debug_assert_eq!(data.len(), width * height);
                Self {
                    width,
                    height,
                    data,
                }
            }

            pub fn width(&self) -> usize {
                self.width
            }

            pub fn height(&self) -> usize {
                self.height
            }

            pub fn is_square(&self) -> bool {
                self.width == self.height
            }

            pub fn data(&self) -> &[Complex64] {
                &self.data
            }

            pub fn into_data(self) -> Vec<Complex64> {
                self.data
            }

            pub fn get(&self, x: usize, y: usize) -> Complex64 {
                self.data[y * self.width + x]
            }

            /// Sum of squared moduli.
            pub fn energy(&self) -> f64 {
                self.data.iter().map(|c| c.norm_sqr()).sum()
            }

            pub(crate) fn validate(&self) -> Result<()> {
                check_finite(&self.data, self.width)
            }
        }
    };
}

/// A spatial-domain complex field such as an object transmission or the
/// field arriving at the sensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    width: usize,
    height: usize,
    data: Vec<Complex64>,
}

/// A centered frequency-domain plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    width: usize,
    height: usize,
    data: Vec<Complex64>,
}

plane_common!(ComplexField);
plane_common!(Spectrum);

impl ComplexField {
    /// Pure-amplitude field with zero phase.
    pub fn from_amplitude(width: usize, height: usize, amplitude: &[f64]) -> Result<Self> {
        let data = amplitude.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        Self::new(width, height, data)
    }

    pub fn amplitude(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm()).collect()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }
}

impl Spectrum {
    /// Index of the zero-frequency bin.
    pub fn center(&self) -> (usize, usize) {
        (self.width / 2, self.height / 2)
    }

    /// Value at a centered-bin offset, `None` outside the plane.
    pub fn at_offset(&self, offset: BinOffset) -> Option<Complex64> {
        let (cx, cy) = self.center();
        let x = cx as i64 + offset.x;
        let y = cy as i64 + offset.y;
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        Some(self.get(x as usize, y as usize))
    }
}

fn check_finite(data: &[Complex64], width: usize) -> Result<()> {
    match data
        .iter()
        .position(|c| !(c.re.is_finite() && c.im.is_finite()))
    {
        Some(i) => Err(FpmError::NonFinite {
            x: i % width,
            y: i / width,
        }),
        None => Ok(()),
    }
}

/// Integer frequency-bin offset from the zero-frequency bin.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize,
)]
pub struct BinOffset {
    pub x: i64,
    pub y: i64,
}

impl BinOffset {
    pub const ZERO: BinOffset = BinOffset { x: 0, y: 0 };

    pub fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        ((self.x * self.x + self.y * self.y) as f64).sqrt()
    }
}

impl fmt::Display for BinOffset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

// ---------------------------------------------------------------------------
// DFT

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_rows(data: &mut [Complex64], len: usize, direction: FftDirection) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction));
    fft.process(data);
}

fn transpose(src: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = src[y * width + x];
        }
    }
    out
}

/// Unnormalized 2D transform in place, natural (uncentered) ordering.
fn fft2(data: &mut Vec<Complex64>, width: usize, height: usize, direction: FftDirection) {
    fft_rows(data, width, direction);
    let mut t = transpose(data, width, height);
    fft_rows(&mut t, height, direction);
    *data = transpose(&t, height, width);
}

/// Moves zero frequency from index 0 to the centre (`fftshift`).
fn shift_to_center(src: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let (sx, sy) = (width / 2, height / 2);
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for y in 0..height {
        let ty = (y + sy) % height;
        for x in 0..width {
            out[ty * width + (x + sx) % width] = src[y * width + x];
        }
    }
    out
}

/// Inverse of [`shift_to_center`] (`ifftshift`).
fn shift_to_origin(src: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let (sx, sy) = (width / 2, height / 2);
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for y in 0..height {
        let sy_ = (y + sy) % height;
        for x in 0..width {
            out[y * width + x] = src[sy_ * width + (x + sx) % width];
        }
    }
    out
}

pub(crate) fn forward_dft_unchecked(field: &ComplexField) -> Spectrum {
    let (w, h) = (field.width, field.height);
    let mut buf = field.data.clone();
    fft2(&mut buf, w, h, FftDirection::Forward);
    let scale = 1.0 / ((w * h) as f64).sqrt();
    buf.iter_mut().for_each(|c| *c *= scale);
    Spectrum::from_raw(w, h, shift_to_center(&buf, w, h))
}

pub(crate) fn inverse_dft_unchecked(spectrum: &Spectrum) -> ComplexField {
    let (w, h) = (spectrum.width, spectrum.height);
    let mut buf = shift_to_origin(&spectrum.data, w, h);
    fft2(&mut buf, w, h, FftDirection::Inverse);
    let scale = 1.0 / ((w * h) as f64).sqrt();
    buf.iter_mut().for_each(|c| *c *= scale);
    ComplexField::from_raw(w, h, buf)
}

/// Orthonormal 2D DFT with the output recentred on zero frequency.
pub fn forward_dft(field: &ComplexField) -> Result<Spectrum> {
    field.validate()?;
    Ok(forward_dft_unchecked(field))
}

/// Exact inverse of [`forward_dft`].
pub fn inverse_dft(spectrum: &Spectrum) -> Result<ComplexField> {
    spectrum.validate()?;
    Ok(inverse_dft_unchecked(spectrum))
}

// ---------------------------------------------------------------------------
// Spectral windows

/// A square sub-window of a spectrum, resolved to absolute bin indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Window {
    pub origin_x: usize,
    pub origin_y: usize,
    pub size: usize,
    /// Amplitude factor applied when cropping; embedding divides by it.
    pub scale: f64,
}

impl Window {
    pub fn locate(spectrum: &Spectrum, center: BinOffset, size: usize) -> Result<Window> {
        let (w, h) = (spectrum.width as i64, spectrum.height as i64);
        let half = (size / 2) as i64;
        let ox = w / 2 + center.x - half;
        let oy = h / 2 + center.y - half;
        if size == 0 || ox < 0 || oy < 0 || ox + size as i64 > w || oy + size as i64 > h {
            return Err(FpmError::Geometry(format!(
                "{size}x{size} window centred at {center} leaves the {w}x{h} spectrum"
            )));
        }
        Ok(Window {
            origin_x: ox as usize,
            origin_y: oy as usize,
            size,
            scale: ((size * size) as f64 / (w * h) as f64).sqrt(),
        })
    }

    pub fn read(&self, spectrum: &Spectrum, out: &mut [Complex64]) {
        let n = self.size;
        for row in 0..n {
            let src = (self.origin_y + row) * spectrum.width + self.origin_x;
            for (o, s) in out[row * n..(row + 1) * n]
                .iter_mut()
                .zip(&spectrum.data[src..src + n])
            {
                *o = s * self.scale;
            }
        }
    }

    /// `target += mask * (patch / scale - target)` over the window.
    pub fn write(&self, target: &mut Spectrum, patch: &[Complex64], mask: &[f64]) {
        let n = self.size;
        let inv = 1.0 / self.scale;
        let width = target.width;
        for row in 0..n {
            let dst = (self.origin_y + row) * width + self.origin_x;
            for col in 0..n {
                let m = mask[row * n + col];
                if m == 0.0 {
                    continue;
                }
                let t = &mut target.data[dst + col];
                if m == 1.0 {
                    *t = patch[row * n + col] * inv;
                } else {
                    *t += (patch[row * n + col] * inv - *t) * m;
                }
            }
        }
    }
}

/// Extracts the `size`×`size` window centred at `center`.
///
/// The window is scaled by the linear size ratio, so a constant object keeps
/// its amplitude when the cropped spectrum is inverse-transformed at the
/// smaller size.
pub fn crop_spectrum(spectrum: &Spectrum, center: BinOffset, size: usize) -> Result<Spectrum> {
    let window = Window::locate(spectrum, center, size)?;
    let mut out = vec![Complex64::new(0.0, 0.0); size * size];
    window.read(spectrum, &mut out);
    Ok(Spectrum::from_raw(size, size, out))
}

/// Writes `patch` back into `target` at `center`, undoing the crop scale.
///
/// Bins where the mask is 1 are replaced, bins where it is 0 are left alone
/// and the antialiased rim blends linearly between the two.
pub fn embed_spectrum(
    patch: &Spectrum,
    target: &Spectrum,
    center: BinOffset,
    mask: &Pupil,
) -> Result<Spectrum> {
    if !patch.is_square() || patch.width != mask.size() {
        return Err(FpmError::Shape(format!(
            "patch {}x{} does not match {}x{} pupil",
            patch.width,
            patch.height,
            mask.size(),
            mask.size()
        )));
    }
    patch.validate()?;
    let window = Window::locate(target, center, patch.width)?;
    let mut out = target.clone();
    window.write(&mut out, &patch.data, mask.mask());
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pupil

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PupilEdge {
    /// One-bin linear ramp across the rim.
    #[default]
    Antialiased,
    /// Binary disk, `distance <= radius`.
    Hard,
}

/// Circular coherent transfer function sampled on a square grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Pupil {
    size: usize,
    radius: f64,
    edge: PupilEdge,
    mask: Vec<f64>,
}

impl Pupil {
    pub fn new(size: usize, radius: f64, edge: PupilEdge) -> Result<Self> {
        if size == 0 {
            return Err(FpmError::Geometry("pupil size must be positive".into()));
        }
        if !(radius > 0.0 && radius <= size as f64 / 2.0) {
            return Err(FpmError::Geometry(format!(
                "pupil radius {radius} outside (0, {}]",
                size as f64 / 2.0
            )));
        }
        let c = (size / 2) as f64;
        let mut mask = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                let d = (x as f64 - c).hypot(y as f64 - c);
                mask.push(edge_value(d, radius, edge));
            }
        }
        Ok(Self {
            size,
            radius,
            edge,
            mask,
        })
    }

    /// Pupil that passes every bin of the patch.
    pub fn all_pass(size: usize) -> Self {
        Self {
            size,
            radius: size as f64 / 2.0,
            edge: PupilEdge::Hard,
            mask: vec![1.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn edge(&self) -> PupilEdge {
        self.edge
    }

    pub fn mask(&self) -> &[f64] {
        &self.mask
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.mask[y * self.size + x]
    }

    /// Mask value at a centered offset; zero outside the patch.
    pub fn value_at_offset(&self, offset: BinOffset) -> f64 {
        let c = (self.size / 2) as i64;
        let (x, y) = (c + offset.x, c + offset.y);
        if x < 0 || y < 0 || x >= self.size as i64 || y >= self.size as i64 {
            return 0.0;
        }
        self.value(x as usize, y as usize)
    }

    /// Multiplies a patch-sized spectrum by the mask.
    pub fn apply(&self, spectrum: &Spectrum) -> Result<Spectrum> {
        if spectrum.width != self.size || spectrum.height != self.size {
            return Err(FpmError::Shape(format!(
                "spectrum {}x{} does not match {}x{} pupil",
                spectrum.width, spectrum.height, self.size, self.size
            )));
        }
        let data = spectrum
            .data
            .iter()
            .zip(&self.mask)
            .map(|(s, m)| s * m)
            .collect();
        Ok(Spectrum::from_raw(self.size, self.size, data))
    }
}

fn edge_value(distance: f64, radius: f64, edge: PupilEdge) -> f64 {
    match edge {
        PupilEdge::Hard => {
            if distance <= radius {
                1.0
            } else {
                0.0
            }
        }
        PupilEdge::Antialiased => (radius + 0.5 - distance).clamp(0.0, 1.0),
    }
}
