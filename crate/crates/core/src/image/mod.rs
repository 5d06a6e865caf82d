//! Image ingestion and degradation: bicubic rescaling, synthetic noise,
//! patch cropping, flipping and intensity-range handling.

mod degrade;
mod io;
mod resample;

pub use degrade::DegradationSpec;
pub use io::{load_png, save_png};
pub use resample::{bicubic_resample, cubic_kernel, ResampleFactor};

use rand::Rng;
use thiserror::Error;

use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image extents {width}x{height} not divisible by {factor}; crop first")]
    NotDivisible {
        width: usize,
        height: usize,
        factor: usize,
    },
    #[error("image {width}x{height} smaller than requested {need}")]
    TooSmall {
        width: usize,
        height: usize,
        need: usize,
    },
    #[error("invalid degradation spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Decode {
        path: String,
        source: ::image::ImageError,
    },
}

/// Declared intensity range of an [`ImageBuffer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeTag {
    /// (0, 1)
    Unit,
    /// (-1, 1)
    Symmetric,
    /// (0, 255)
    Byte,
}

impl RangeTag {
    pub fn bounds(self) -> (f32, f32) {
        match self {
            RangeTag::Unit => (0.0, 1.0),
            RangeTag::Symmetric => (-1.0, 1.0),
            RangeTag::Byte => (0.0, 255.0),
        }
    }
}

/// HxWx3 interleaved floating-point image with a declared intensity range.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
    pub range: RangeTag,
}

pub const CHANNELS: usize = 3;

impl ImageBuffer {
    pub fn new(height: usize, width: usize, range: RangeTag) -> ImageBuffer {
        ImageBuffer {
            height,
            width,
            data: vec![0.0; height * width * CHANNELS],
            range,
        }
    }

    pub fn from_data(height: usize, width: usize, range: RangeTag, data: Vec<f32>) -> ImageBuffer {
        assert_eq!(data.len(), height * width * CHANNELS);
        ImageBuffer {
            height,
            width,
            data,
            range,
        }
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        let base = (y * self.width + x) * CHANNELS;
        &self.data[base..base + CHANNELS]
    }

    pub fn clamp_to_range(&mut self) {
        let (lo, hi) = self.range.bounds();
        for v in &mut self.data {
            *v = v.clamp(lo, hi);
        }
    }

    /// Affine remap into another declared range; midpoints map to midpoints
    /// and a round trip is the identity up to rounding.
    pub fn rescale_range(&self, target: RangeTag) -> ImageBuffer {
        if target == self.range {
            return self.clone();
        }
        let (slo, shi) = self.range.bounds();
        let (tlo, thi) = target.bounds();
        let scale = (thi - tlo) / (shi - slo);
        let data = self
            .data
            .iter()
            .map(|&v| ((v - slo) * scale + tlo).clamp(tlo, thi))
            .collect();
        ImageBuffer::from_data(self.height, self.width, target, data)
    }

    /// Reverse column order.
    pub fn hflip(&self) -> ImageBuffer {
        let mut out = ImageBuffer::new(self.height, self.width, self.range);
        for y in 0..self.height {
            for x in 0..self.width {
                let src = (y * self.width + self.width - 1 - x) * CHANNELS;
                let dst = (y * self.width + x) * CHANNELS;
                out.data[dst..dst + CHANNELS].copy_from_slice(&self.data[src..src + CHANNELS]);
            }
        }
        out
    }

    /// Copy the `size x size` window with top-left corner (y0, x0).
    pub fn crop_at(&self, y0: usize, x0: usize, size: usize) -> Result<ImageBuffer, ImageError> {
        if y0 + size > self.height || x0 + size > self.width {
            return Err(ImageError::TooSmall {
                width: self.width,
                height: self.height,
                need: size,
            });
        }
        let mut out = ImageBuffer::new(size, size, self.range);
        for y in 0..size {
            let src = ((y0 + y) * self.width + x0) * CHANNELS;
            let dst = y * size * CHANNELS;
            out.data[dst..dst + size * CHANNELS]
                .copy_from_slice(&self.data[src..src + size * CHANNELS]);
        }
        Ok(out)
    }

    /// Uniformly random valid offset for a `size x size` crop.
    pub fn random_crop_offset<R: Rng>(
        &self,
        size: usize,
        rng: &mut R,
    ) -> Result<(usize, usize), ImageError> {
        if size > self.height || size > self.width {
            return Err(ImageError::TooSmall {
                width: self.width,
                height: self.height,
                need: size,
            });
        }
        let y0 = rng.gen_range(0..=self.height - size);
        let x0 = rng.gen_range(0..=self.width - size);
        Ok((y0, x0))
    }

    /// Random `size x size` patch; deterministic given the rng state.
    pub fn crop_patch<R: Rng>(&self, size: usize, rng: &mut R) -> Result<ImageBuffer, ImageError> {
        let (y0, x0) = self.random_crop_offset(size, rng)?;
        self.crop_at(y0, x0, size)
    }

    /// 1x3xHxW tensor view of this image.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        images_to_tensor::<T>(std::slice::from_ref(self))
    }

    /// Image `index` of an Nx3xHxW tensor, tagged with `range`.
    pub fn from_tensor<T: Scalar>(t: &Tensor<T>, index: usize, range: RangeTag) -> ImageBuffer {
        let (n, c, h, w) = t
            .dims4("from_tensor")
            .expect("from_tensor requires an NCHW tensor");
        assert_eq!(c, CHANNELS);
        assert!(index < n);
        let data = t.data();
        let mut out = ImageBuffer::new(h, w, range);
        for ci in 0..c {
            let plane = &data[((index * c) + ci) * h * w..][..h * w];
            for y in 0..h {
                for x in 0..w {
                    out.data[(y * w + x) * CHANNELS + ci] = plane[y * w + x].to_f64() as f32;
                }
            }
        }
        out.clamp_to_range();
        out
    }
}

/// Pack same-extent images into an Nx3xHxW tensor (planar layout).
pub fn images_to_tensor<T: Scalar>(images: &[ImageBuffer]) -> Tensor<T> {
    let n = images.len();
    assert!(n > 0);
    let (h, w) = (images[0].height, images[0].width);
    let mut data = vec![T::zero(); n * CHANNELS * h * w];
    for (ni, img) in images.iter().enumerate() {
        assert_eq!((img.height, img.width), (h, w), "batch extents differ");
        for ci in 0..CHANNELS {
            let plane = &mut data[((ni * CHANNELS) + ci) * h * w..][..h * w];
            for y in 0..h {
                for x in 0..w {
                    plane[y * w + x] = T::from_f64(img.data[(y * w + x) * CHANNELS + ci] as f64);
                }
            }
        }
    }
    Tensor::from_vec(&[n, CHANNELS, h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp_image(h: usize, w: usize) -> ImageBuffer {
        let mut img = ImageBuffer::new(h, w, RangeTag::Unit);
        for y in 0..h {
            for x in 0..w {
                for c in 0..CHANNELS {
                    img.data[(y * w + x) * CHANNELS + c] = x as f32 / w as f32;
                }
            }
        }
        img
    }

    #[test]
    fn hflip_is_an_involution() {
        let img = ramp_image(4, 6);
        assert_eq!(img.hflip().hflip(), img);
    }

    #[test]
    fn hflip_reverses_a_row() {
        let mut img = ImageBuffer::new(1, 2, RangeTag::Unit);
        img.data[..3].copy_from_slice(&[0.1, 0.1, 0.1]);
        img.data[3..].copy_from_slice(&[0.9, 0.9, 0.9]);
        let f = img.hflip();
        assert_eq!(f.pixel(0, 0), &[0.9, 0.9, 0.9]);
        assert_eq!(f.pixel(0, 1), &[0.1, 0.1, 0.1]);
    }

    #[test]
    fn hflip_fixes_symmetric_images() {
        let mut img = ImageBuffer::new(2, 3, RangeTag::Unit);
        for y in 0..2 {
            img.data[(y * 3) * CHANNELS..(y * 3 + 1) * CHANNELS].fill(0.3);
            img.data[(y * 3 + 1) * CHANNELS..(y * 3 + 2) * CHANNELS].fill(0.7);
            img.data[(y * 3 + 2) * CHANNELS..(y * 3 + 3) * CHANNELS].fill(0.3);
        }
        assert_eq!(img.hflip(), img);
    }

    #[test]
    fn rescale_midpoint_maps_to_midpoint() {
        let mut img = ImageBuffer::new(1, 1, RangeTag::Unit);
        img.data.fill(0.5);
        let out = img.rescale_range(RangeTag::Symmetric);
        assert!(out.data.iter().all(|&v| v.abs() < 1e-7));
    }

    #[test]
    fn rescale_byte_zero_is_unit_zero() {
        let img = ImageBuffer::new(1, 1, RangeTag::Byte);
        let out = img.rescale_range(RangeTag::Unit);
        assert!(out.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rescale_round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut img = ImageBuffer::new(8, 8, RangeTag::Unit);
        for v in &mut img.data {
            *v = rand::Rng::gen_range(&mut rng, 0.0..1.0);
        }
        let back = img
            .rescale_range(RangeTag::Symmetric)
            .rescale_range(RangeTag::Unit);
        for (a, b) in back.data.iter().zip(&img.data) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn full_extent_crop_returns_whole_image() {
        let img = ramp_image(5, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(img.crop_patch(5, &mut rng).unwrap(), img);
    }

    #[test]
    fn crops_with_equal_seeds_are_identical() {
        let img = ramp_image(16, 16);
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        assert_eq!(
            img.crop_patch(8, &mut a).unwrap(),
            img.crop_patch(8, &mut b).unwrap()
        );
    }

    #[test]
    fn crop_offsets_cover_the_valid_rectangle_uniformly() {
        // chi-square over the 9 valid offsets of a 2x2 crop in a 4x4 image.
        let img = ramp_image(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [[0usize; 3]; 3];
        let draws = 10_000;
        for _ in 0..draws {
            let (y, x) = img.random_crop_offset(2, &mut rng).unwrap();
            counts[y][x] += 1;
        }
        let expected = draws as f64 / 9.0;
        let chi2: f64 = counts
            .iter()
            .flatten()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 8 degrees of freedom: chi2 < 20.09 accepts uniformity at p > 0.01.
        assert!(chi2 < 20.09, "chi2 = {chi2}");
    }

    #[test]
    fn tensor_round_trip_preserves_values() {
        let img = ramp_image(6, 4);
        let t = img.to_tensor::<f32>();
        assert_eq!(t.shape(), &[1, 3, 6, 4]);
        let back = ImageBuffer::from_tensor(&t, 0, RangeTag::Unit);
        assert_eq!(back, img);
    }
}
