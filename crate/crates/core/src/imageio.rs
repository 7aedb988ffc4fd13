//! Grayscale image loading (PNG, PGM) and 16-bit PGM output.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::DynamicImage;

use crate::error::{FpmError, Result};
use crate::frame::Frame;

/// Loads an image as grayscale with values in `[0, 1]`. Eight-bit data is
/// divided by 255 and sixteen-bit data by 65535; colour images go through
/// the standard luma conversion.
pub fn load_gray(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| FpmError::io(path, e))?;
    let img = image::load_from_memory(&bytes).map_err(|e| FpmError::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        DynamicImage::ImageLuma16(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        other => other
            .to_luma16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
    };
    Frame::new(w, h, data)
}

/// Writes a binary 16-bit PGM, clamping to `[0, 1]` first.
pub fn write_pgm16(frame: &Frame, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(frame.data().len() * 2 + 32);
    write!(out, "P5\n{} {}\n65535\n", frame.width(), frame.height())
        .expect("writing to a Vec cannot fail");
    for &v in frame.data() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, out).map_err(|e| FpmError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm16_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let f = Frame::new(3, 2, vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.5]).unwrap();
        write_pgm16(&f, &path).unwrap();
        let back = load_gray(&path).unwrap();
        assert_eq!(back.dims(), (3, 2));
        for (a, b) in back.data().iter().zip(f.data()) {
            assert!((a - b.min(1.0)).abs() < 1e-4);
        }
    }

    #[test]
    fn eight_bit_scaled_by_255() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        fs::write(&path, b"P5\n2 1\n255\n\x00\xff").unwrap();
        let f = load_gray(&path).unwrap();
        assert_eq!(f.data(), &[0.0, 1.0]);
    }

    #[test]
    fn garbage_is_a_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        fs::write(&path, b"definitely not an image").unwrap();
        assert!(matches!(load_gray(&path), Err(FpmError::Decode { .. })));
        assert!(matches!(
            load_gray(&dir.path().join("missing.png")),
            Err(FpmError::Io { .. })
        ));
    }
}
