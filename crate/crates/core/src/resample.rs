//! Separable bicubic resampling (Keys kernel, `a = -0.5`).
//!
//! Pixel centres sit at half-integer positions, so output pixel `i` samples
//! the input at `(i + 0.5) * in / out - 0.5`. Taps that fall outside the
//! image repeat the nearest edge pixel.

use crate::error::{FpmError, Result};
use crate::frame::Frame;

pub const KEYS_A: f64 = -0.5;

/// Cubic convolution kernel weight at distance `x`.
pub fn keys_weight(x: f64) -> f64 {
    let a = KEYS_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Four-tap `(index, weight)` table for every output position along one axis.
fn taps(input: usize, output: usize) -> Vec<[(usize, f64); 4]> {
    let ratio = input as f64 / output as f64;
    let last = input as i64 - 1;
    (0..output)
        .map(|i| {
            let src = (i as f64 + 0.5) * ratio - 0.5;
            let base = src.floor();
            let t = src - base;
            let base = base as i64;
            let mut row = [(0usize, 0.0); 4];
            for (k, slot) in row.iter_mut().enumerate() {
                let offset = k as i64 - 1;
                let idx = (base + offset).clamp(0, last) as usize;
                *slot = (idx, keys_weight(t - offset as f64));
            }
            row
        })
        .collect()
}

/// Bicubic resize to `width`×`height`. Values are not clamped.
pub fn resize_bicubic(frame: &Frame, width: usize, height: usize) -> Result<Frame> {
    if width == 0 || height == 0 {
        return Err(FpmError::Shape(format!(
            "cannot resize to {width}x{height}"
        )));
    }
    let (in_w, in_h) = frame.dims();
    let src = frame.data();
    let xt = taps(in_w, width);
    let yt = taps(in_h, height);

    let mut horizontal = vec![0.0; width * in_h];
    for y in 0..in_h {
        let row = &src[y * in_w..(y + 1) * in_w];
        for (x, tap) in xt.iter().enumerate() {
            horizontal[y * width + x] = tap.iter().map(|&(i, w)| row[i] * w).sum();
        }
    }
    let mut out = vec![0.0; width * height];
    for (y, tap) in yt.iter().enumerate() {
        for x in 0..width {
            out[y * width + x] = tap
                .iter()
                .map(|&(i, w)| horizontal[i * width + x] * w)
                .sum();
        }
    }
    Ok(Frame::from_raw(width, height, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_partition_of_unity() {
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let s: f64 = (-1..=2).map(|k| keys_weight(t - k as f64)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(keys_weight(0.0), 1.0);
        assert_eq!(keys_weight(1.0), 0.0);
        assert_eq!(keys_weight(2.0), 0.0);
    }

    #[test]
    fn constant_stays_constant() {
        let f = Frame::filled(32, 32, 0.37);
        let up = resize_bicubic(&f, 128, 128).unwrap();
        assert!(up.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn interior_ramp_reproduced() {
        let f = Frame::new(
            32,
            32,
            (0..1024)
                .map(|i| 0.01 * (i % 32) as f64 + 0.02 * (i / 32) as f64)
                .collect(),
        )
        .unwrap();
        let up = resize_bicubic(&f, 128, 128).unwrap();
        // output pixels whose four taps stay inside the input
        for y in 8..120 {
            for x in 8..120 {
                let sx = (x as f64 + 0.5) / 4.0 - 0.5;
                let sy = (y as f64 + 0.5) / 4.0 - 0.5;
                let expect = 0.01 * sx + 0.02 * sy;
                assert!((up.get(x, y) - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identity_at_same_size() {
        let f = Frame::new(5, 3, (0..15).map(|v| v as f64).collect()).unwrap();
        let same = resize_bicubic(&f, 5, 3).unwrap();
        for (a, b) in same.data().iter().zip(f.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
