//! Separable bicubic resampling with the Catmull-Rom kernel (a = -0.5) and
//! clamp-to-edge extension.

use super::{ImageBuffer, ImageError, CHANNELS};

/// Catmull-Rom cubic weight at offset `x`. Weights for the four taps of any
/// sample phase sum to exactly 1.
pub fn cubic_kernel(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        (((x - 5.0) * x + 8.0) * x - 4.0) * A
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleFactor {
    /// Scale both extents by 4.
    Up4,
    /// Scale both extents by 1/4; source extents must be divisible by 4.
    Down4,
}

impl ResampleFactor {
    fn scale(self) -> f64 {
        match self {
            ResampleFactor::Up4 => 4.0,
            ResampleFactor::Down4 => 0.25,
        }
    }
}

/// Four source taps (clamped to the edge) and weights for one output index.
fn axis_taps(dst_len: usize, src_len: usize, scale: f64) -> Vec<([usize; 4], [f32; 4])> {
    (0..dst_len)
        .map(|j| {
            let pos = (j as f64 + 0.5) / scale - 0.5;
            let base = pos.floor();
            let frac = pos - base;
            let mut idx = [0usize; 4];
            let mut wgt = [0f32; 4];
            for t in 0..4 {
                let src = base as isize + t as isize - 1;
                idx[t] = src.clamp(0, src_len as isize - 1) as usize;
                wgt[t] = cubic_kernel(frac + 1.0 - t as f64) as f32;
            }
            (idx, wgt)
        })
        .collect()
}

/// Scales both extents by the given factor with a separable cubic kernel and
/// clamps the result back into the declared range.
pub fn bicubic_resample(
    img: &ImageBuffer,
    factor: ResampleFactor,
) -> Result<ImageBuffer, ImageError> {
    if factor == ResampleFactor::Down4 && (img.height % 4 != 0 || img.width % 4 != 0) {
        return Err(ImageError::NotDivisible {
            width: img.width,
            height: img.height,
            factor: 4,
        });
    }
    let scale = factor.scale();
    let (h_out, w_out) = match factor {
        ResampleFactor::Up4 => (img.height * 4, img.width * 4),
        ResampleFactor::Down4 => (img.height / 4, img.width / 4),
    };

    // Horizontal pass: height x w_out.
    let h_taps = axis_taps(w_out, img.width, scale);
    let mut mid = vec![0f32; img.height * w_out * CHANNELS];
    for y in 0..img.height {
        let src_row = &img.data[y * img.width * CHANNELS..(y + 1) * img.width * CHANNELS];
        let dst_row = &mut mid[y * w_out * CHANNELS..(y + 1) * w_out * CHANNELS];
        for (x, (idx, wgt)) in h_taps.iter().enumerate() {
            for c in 0..CHANNELS {
                let mut acc = 0f32;
                for t in 0..4 {
                    acc += wgt[t] * src_row[idx[t] * CHANNELS + c];
                }
                dst_row[x * CHANNELS + c] = acc;
            }
        }
    }

    // Vertical pass: h_out x w_out.
    let v_taps = axis_taps(h_out, img.height, scale);
    let mut out = ImageBuffer::new(h_out, w_out, img.range);
    let row_len = w_out * CHANNELS;
    for (y, (idx, wgt)) in v_taps.iter().enumerate() {
        let dst_row = &mut out.data[y * row_len..(y + 1) * row_len];
        for t in 0..4 {
            let src_row = &mid[idx[t] * row_len..(idx[t] + 1) * row_len];
            let w = wgt[t];
            if t == 0 {
                for (d, &s) in dst_row.iter_mut().zip(src_row) {
                    *d = w * s;
                }
            } else {
                for (d, &s) in dst_row.iter_mut().zip(src_row) {
                    *d += w * s;
                }
            }
        }
    }
    out.clamp_to_range();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::RangeTag;

    #[test]
    fn kernel_weights_partition_unity() {
        // At any sample phase t, the four taps W(t+1), W(t), W(1-t), W(2-t)
        // must sum to 1.
        for k in 0..=1000 {
            let t = k as f64 / 1000.0;
            let sum = cubic_kernel(t + 1.0) + cubic_kernel(t) + cubic_kernel(1.0 - t)
                + cubic_kernel(2.0 - t);
            assert!((sum - 1.0).abs() < 1e-9, "phase {t}: {sum}");
        }
    }

    #[test]
    fn constant_image_survives_downsampling() {
        let mut img = ImageBuffer::new(8, 8, RangeTag::Unit);
        img.data.fill(0.5);
        let out = bicubic_resample(&img, ResampleFactor::Down4).unwrap();
        assert_eq!((out.height, out.width), (2, 2));
        for &v in &out.data {
            assert!((v - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn ramp_downsamples_to_interpolated_samples() {
        // Horizontal ramp v(x) = x/16; the cubic kernel reproduces linear
        // data exactly, so output j samples the ramp at x = 4j + 1.5.
        let mut img = ImageBuffer::new(8, 8, RangeTag::Unit);
        for y in 0..8 {
            for x in 0..8 {
                for c in 0..CHANNELS {
                    img.data[(y * 8 + x) * CHANNELS + c] = x as f32 / 16.0;
                }
            }
        }
        let out = bicubic_resample(&img, ResampleFactor::Down4).unwrap();
        // Independent oracle: evaluate the kernel directly at the two phases.
        let expect = |j: usize| -> f32 {
            let pos = (j as f64 + 0.5) * 4.0 - 0.5;
            let base = pos.floor();
            let frac = pos - base;
            let mut acc = 0.0;
            for t in 0..4 {
                let src = (base as isize + t as isize - 1).clamp(0, 7) as usize;
                acc += cubic_kernel(frac + 1.0 - t as f64) * (src as f64 / 16.0);
            }
            acc as f32
        };
        for y in 0..2 {
            for j in 0..2 {
                let got = out.pixel(y, j)[0];
                assert!((got - expect(j)).abs() < 1e-3, "{got} vs {}", expect(j));
            }
        }
        // Endpoint-interpolated slope: samples at x = 1.5 and 5.5.
        assert!((out.pixel(0, 0)[0] - 1.5 / 16.0).abs() < 1e-3);
        assert!((out.pixel(0, 1)[0] - 5.5 / 16.0).abs() < 1e-3);
    }

    #[test]
    fn divisibility_is_enforced() {
        let img = ImageBuffer::new(7, 8, RangeTag::Unit);
        let err = bicubic_resample(&img, ResampleFactor::Down4).unwrap_err();
        assert!(err.to_string().contains("divisible"));
    }

    #[test]
    fn upsample_scales_extents_by_four() {
        let img = ImageBuffer::new(3, 5, RangeTag::Unit);
        let out = bicubic_resample(&img, ResampleFactor::Up4).unwrap();
        assert_eq!((out.height, out.width), (12, 20));
    }

    #[test]
    fn bicubic_round_trip_beats_nearest_neighbor() {
        // Natural-ish test image: mixed-frequency sinusoids.
        let n = 32;
        let mut img = ImageBuffer::new(n, n, RangeTag::Unit);
        for y in 0..n {
            for x in 0..n {
                let v = 0.5
                    + 0.25 * ((x as f32) * 0.4).sin()
                    + 0.2 * ((y as f32) * 0.3 + (x as f32) * 0.13).cos();
                for c in 0..CHANNELS {
                    img.data[(y * n + x) * CHANNELS + c] = v.clamp(0.0, 1.0);
                }
            }
        }
        let down = bicubic_resample(&img, ResampleFactor::Down4).unwrap();
        let up = bicubic_resample(&down, ResampleFactor::Up4).unwrap();

        // Nearest-neighbor round trip oracle.
        let mut nn = ImageBuffer::new(n, n, RangeTag::Unit);
        for y in 0..n {
            for x in 0..n {
                let sy = (y / 4).min(down.height - 1);
                let sx = (x / 4).min(down.width - 1);
                let nearest_down = |yy: usize, xx: usize| {
                    // NN downsample picks the sample whose center is closest,
                    // i.e. source index floor((j + 0.5) * 4).
                    let p = ((yy as f64 + 0.5) * 4.0) as usize;
                    let q = ((xx as f64 + 0.5) * 4.0) as usize;
                    (p.min(n - 1), q.min(n - 1))
                };
                let (py, px) = nearest_down(sy, sx);
                for c in 0..CHANNELS {
                    nn.data[(y * n + x) * CHANNELS + c] = img.data[(py * n + px) * CHANNELS + c];
                }
            }
        }
        let mse = |a: &ImageBuffer, b: &ImageBuffer| -> f64 {
            a.data
                .iter()
                .zip(&b.data)
                .map(|(&x, &y)| ((x - y) as f64).powi(2))
                .sum::<f64>()
                / a.data.len() as f64
        };
        let psnr_bicubic = -10.0 * mse(&up, &img).log10();
        let psnr_nn = -10.0 * mse(&nn, &img).log10();
        assert!(
            psnr_bicubic > psnr_nn,
            "bicubic {psnr_bicubic:.2} dB vs nearest {psnr_nn:.2} dB"
        );
    }
}
