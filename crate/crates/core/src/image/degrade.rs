//! Synthetic degradation: Gaussian, Poisson and salt-&-pepper noise applied
//! in that order, each from its own seed-derived stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::{ImageBuffer, ImageError, RangeTag, CHANNELS};

/// Noise configuration for [`degrade`](DegradationSpec::degrade). The default
/// magnitudes are artifact configuration, not reported values.
#[derive(Debug, Clone)]
pub struct DegradationSpec {
    pub gaussian_enabled: bool,
    /// Standard deviation in (0,1) intensity units.
    pub gaussian_sigma: f64,
    pub poisson_enabled: bool,
    /// Photon-count scale: values are multiplied by this, sampled, divided back.
    pub poisson_scale: f64,
    pub sp_enabled: bool,
    /// Fraction of pixels replaced by salt or pepper.
    pub sp_density: f64,
    pub rng_seed: u64,
}

impl Default for DegradationSpec {
    fn default() -> Self {
        DegradationSpec {
            gaussian_enabled: true,
            gaussian_sigma: 0.05,
            poisson_enabled: true,
            poisson_scale: 255.0,
            sp_enabled: true,
            sp_density: 0.01,
            rng_seed: 0,
        }
    }
}

fn stage_rng(seed: u64, stage: u64) -> ChaCha8Rng {
    // splitmix64 over (seed, stage) so toggling one stage never shifts the
    // draws of another.
    let mut z = seed ^ stage.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<(), ImageError> {
        if !(0.0..=1.0).contains(&self.sp_density) {
            return Err(ImageError::InvalidSpec(format!(
                "sp_density {} outside [0, 1]",
                self.sp_density
            )));
        }
        if self.gaussian_sigma < 0.0 {
            return Err(ImageError::InvalidSpec(format!(
                "gaussian_sigma {} negative",
                self.gaussian_sigma
            )));
        }
        if self.poisson_scale <= 0.0 {
            return Err(ImageError::InvalidSpec(format!(
                "poisson_scale {} must be positive",
                self.poisson_scale
            )));
        }
        Ok(())
    }

    /// Applies the enabled noises in order Gaussian -> Poisson -> salt-&-pepper,
    /// clamping to (0,1) after each stage. Pure given (image, spec).
    pub fn degrade(&self, img: &ImageBuffer) -> Result<ImageBuffer, ImageError> {
        self.validate()?;
        assert_eq!(img.range, RangeTag::Unit, "degrade expects (0,1) input");
        let mut out = img.clone();

        if self.gaussian_enabled && self.gaussian_sigma > 0.0 {
            let mut rng = stage_rng(self.rng_seed, 1);
            let normal = Normal::new(0.0, self.gaussian_sigma).expect("sigma validated");
            for v in &mut out.data {
                *v = (*v as f64 + normal.sample(&mut rng)).clamp(0.0, 1.0) as f32;
            }
        }

        if self.poisson_enabled {
            let mut rng = stage_rng(self.rng_seed, 2);
            let scale = self.poisson_scale;
            for v in &mut out.data {
                let lambda = (*v as f64) * scale;
                let counts = if lambda > 0.0 {
                    Poisson::new(lambda).expect("lambda > 0").sample(&mut rng)
                } else {
                    0.0
                };
                *v = (counts / scale).clamp(0.0, 1.0) as f32;
            }
        }

        if self.sp_enabled && self.sp_density > 0.0 {
            let mut rng = stage_rng(self.rng_seed, 3);
            for p in 0..out.height * out.width {
                if rng.gen_range(0.0..1.0f64) >= self.sp_density {
                    continue;
                }
                let value = if rng.gen_range(0.0..1.0f64) >= 0.5 {
                    1.0
                } else {
                    0.0
                };
                out.data[p * CHANNELS..(p + 1) * CHANNELS].fill(value);
            }
        }

        Ok(out)
    }
}
