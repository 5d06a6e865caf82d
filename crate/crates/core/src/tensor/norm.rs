//! Batch normalization over the channel axis of NCHW tensors.

use super::{shape_err, Scalar, Tensor, TensorError};

// Small enough that a unit-variance channel passes through within 1e-6.
const BN_EPS: f64 = 1e-6;

/// Running statistics owned by a batch-norm layer. The tensors are plain
/// leaves (never differentiated); train-mode forward rewrites them in place.
#[derive(Clone)]
pub struct BatchNormState<T: Scalar> {
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    /// Fraction of the old running statistic kept per update.
    pub momentum: T,
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(channels: usize) -> BatchNormState<T> {
        BatchNormState {
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            momentum: T::from_f64(0.9),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Eval,
}

impl<T: Scalar> Tensor<T> {
    /// Normalizes each channel, then applies the learned per-channel affine.
    ///
    /// Train mode uses biased batch statistics and folds them into `state`;
    /// eval mode reads `state` and is valid for a single image.
    pub fn batch_norm(
        &self,
        scale: &Tensor<T>,
        shift: &Tensor<T>,
        mode: BnMode,
        state: &BatchNormState<T>,
    ) -> Result<Tensor<T>, TensorError> {
        let (n, c, h, w) = self.dims4("batch_norm")?;
        if scale.shape() != [c] || shift.shape() != [c] {
            return Err(shape_err(
                "batch_norm",
                "channels",
                format!(
                    "input has {c}, scale {:?}, shift {:?}",
                    scale.shape(),
                    shift.shape()
                ),
            ));
        }
        if mode == BnMode::Train && n < 2 {
            return Err(TensorError::BatchTooSmall { batch: n });
        }
        let eps = T::from_f64(BN_EPS);
        let hw = h * w;
        let m = n * hw;
        let inv_m = T::one() / T::from_f64(m as f64);

        let (mean, var) = match mode {
            BnMode::Train => {
                let x = self.data();
                let mut mean = vec![T::zero(); c];
                let mut var = vec![T::zero(); c];
                for ci in 0..c {
                    let mut acc = T::zero();
                    for ni in 0..n {
                        acc += x[(ni * c + ci) * hw..][..hw].iter().copied().sum::<T>();
                    }
                    let mu = acc * inv_m;
                    let mut vacc = T::zero();
                    for ni in 0..n {
                        for &v in &x[(ni * c + ci) * hw..][..hw] {
                            let d = v - mu;
                            vacc += d * d;
                        }
                    }
                    mean[ci] = mu;
                    var[ci] = vacc * inv_m;
                }
                drop(x);
                // Fold batch statistics into the running ones.
                {
                    let mom = state.momentum;
                    let one_minus = T::one() - mom;
                    let mut rm = state.running_mean.data_mut();
                    let mut rv = state.running_var.data_mut();
                    for ci in 0..c {
                        rm[ci] = mom * rm[ci] + one_minus * mean[ci];
                        rv[ci] = mom * rv[ci] + one_minus * var[ci];
                    }
                }
                (mean, var)
            }
            BnMode::Eval => (state.running_mean.to_vec(), state.running_var.to_vec()),
        };

        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let x = self.data();
        let gamma = scale.data();
        let beta = shift.data();
        let mut out = vec![T::zero(); n * c * hw];
        for ni in 0..n {
            for ci in 0..c {
                let a = gamma[ci] * inv_std[ci];
                let b = beta[ci] - a * mean[ci];
                let seg = (ni * c + ci) * hw;
                for (o, &v) in out[seg..seg + hw].iter_mut().zip(&x[seg..seg + hw]) {
                    *o = a * v + b;
                }
            }
        }
        drop(x);
        drop(gamma);
        drop(beta);

        let input = self.clone();
        let scale_c = scale.clone();
        let need_input = self.is_tracked();
        let need_scale = scale.is_tracked();
        let need_shift = shift.is_tracked();
        let train = mode == BnMode::Train;
        Ok(Tensor::from_op(
            vec![n, c, h, w],
            out,
            "batch_norm",
            vec![self.clone(), scale.clone(), shift.clone()],
            Box::new(move |g| {
                let x = input.data();
                let gamma = scale_c.data();
                // Per-channel reductions shared by all three gradients.
                let mut sum_g = vec![T::zero(); c];
                let mut sum_g_xhat = vec![T::zero(); c];
                for ni in 0..n {
                    for ci in 0..c {
                        let seg = (ni * c + ci) * hw;
                        let (mu, istd) = (mean[ci], inv_std[ci]);
                        let mut sg = T::zero();
                        let mut sgx = T::zero();
                        for (&gv, &xv) in g[seg..seg + hw].iter().zip(&x[seg..seg + hw]) {
                            sg += gv;
                            sgx += gv * (xv - mu) * istd;
                        }
                        sum_g[ci] += sg;
                        sum_g_xhat[ci] += sgx;
                    }
                }
                let gx = need_input.then(|| {
                    let mut gx = vec![T::zero(); n * c * hw];
                    for ni in 0..n {
                        for ci in 0..c {
                            let seg = (ni * c + ci) * hw;
                            let (mu, istd) = (mean[ci], inv_std[ci]);
                            let a = gamma[ci] * istd;
                            if train {
                                let mean_g = sum_g[ci] * inv_m;
                                let mean_g_xhat = sum_g_xhat[ci] * inv_m;
                                for ((o, &gv), &xv) in gx[seg..seg + hw]
                                    .iter_mut()
                                    .zip(&g[seg..seg + hw])
                                    .zip(&x[seg..seg + hw])
                                {
                                    let xhat = (xv - mu) * istd;
                                    *o = a * (gv - mean_g - xhat * mean_g_xhat);
                                }
                            } else {
                                for (o, &gv) in
                                    gx[seg..seg + hw].iter_mut().zip(&g[seg..seg + hw])
                                {
                                    *o = a * gv;
                                }
                            }
                        }
                    }
                    gx
                });
                let gs = need_scale.then(|| sum_g_xhat.clone());
                let gb = need_shift.then(|| sum_g.clone());
                vec![gx, gs, gb]
            }),
        ))
    }
}
