//! Reductions, pooling and finite-difference ops.

use super::{Scalar, Tensor, TensorError};

impl<T: Scalar> Tensor<T> {
    pub fn sum_all(&self) -> Tensor<T> {
        let total: T = self.data().iter().copied().sum();
        let numel = self.numel();
        Tensor::from_op(
            vec![1],
            vec![total],
            "sum_all",
            vec![self.clone()],
            Box::new(move |g| vec![Some(vec![g[0]; numel])]),
        )
    }

    pub fn mean_all(&self) -> Tensor<T> {
        let numel = self.numel();
        let inv = T::one() / T::from_f64(numel as f64);
        let total: T = self.data().iter().copied().sum();
        Tensor::from_op(
            vec![1],
            vec![total * inv],
            "mean_all",
            vec![self.clone()],
            Box::new(move |g| vec![Some(vec![g[0] * inv; numel])]),
        )
    }

    /// Sum over the channel axis of an NCHW tensor, keeping a singleton
    /// channel: NCHW -> N1HW.
    pub fn sum_channels(&self) -> Result<Tensor<T>, TensorError> {
        let (n, c, h, w) = self.dims4("sum_channels")?;
        let hw = h * w;
        let x = self.data();
        let mut out = vec![T::zero(); n * hw];
        for ni in 0..n {
            let dst = &mut out[ni * hw..(ni + 1) * hw];
            for ci in 0..c {
                let src = &x[(ni * c + ci) * hw..(ni * c + ci + 1) * hw];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        drop(x);
        Ok(Tensor::from_op(
            vec![n, 1, h, w],
            out,
            "sum_channels",
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![T::zero(); n * c * hw];
                for ni in 0..n {
                    let gsrc = &g[ni * hw..(ni + 1) * hw];
                    for ci in 0..c {
                        gx[(ni * c + ci) * hw..(ni * c + ci + 1) * hw].copy_from_slice(gsrc);
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Spatial mean per channel: NCHW -> NC11.
    pub fn global_avg_pool(&self) -> Result<Tensor<T>, TensorError> {
        let (n, c, h, w) = self.dims4("global_avg_pool")?;
        let hw = h * w;
        let inv = T::one() / T::from_f64(hw as f64);
        let x = self.data();
        let out: Vec<T> = (0..n * c)
            .map(|p| x[p * hw..(p + 1) * hw].iter().copied().sum::<T>() * inv)
            .collect();
        drop(x);
        Ok(Tensor::from_op(
            vec![n, c, 1, 1],
            out,
            "global_avg_pool",
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![T::zero(); n * c * hw];
                for p in 0..n * c {
                    let gv = g[p] * inv;
                    for v in &mut gx[p * hw..(p + 1) * hw] {
                        *v = gv;
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// 2x2 average pooling with stride 2; trailing odd row/column dropped.
    pub fn avg_pool2(&self) -> Result<Tensor<T>, TensorError> {
        let (n, c, h, w) = self.dims4("avg_pool2")?;
        let (ho, wo) = (h / 2, w / 2);
        if ho == 0 || wo == 0 {
            return Err(TensorError::Invalid {
                op: "avg_pool2",
                msg: format!("input {h}x{w} too small to pool"),
            });
        }
        let quarter = T::from_f64(0.25);
        let x = self.data();
        let mut out = vec![T::zero(); n * c * ho * wo];
        for p in 0..n * c {
            let src = &x[p * h * w..(p + 1) * h * w];
            let dst = &mut out[p * ho * wo..(p + 1) * ho * wo];
            for i in 0..ho {
                for j in 0..wo {
                    let base = 2 * i * w + 2 * j;
                    dst[i * wo + j] =
                        (src[base] + src[base + 1] + src[base + w] + src[base + w + 1]) * quarter;
                }
            }
        }
        drop(x);
        Ok(Tensor::from_op(
            vec![n, c, ho, wo],
            out,
            "avg_pool2",
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![T::zero(); n * c * h * w];
                for p in 0..n * c {
                    let gsrc = &g[p * ho * wo..(p + 1) * ho * wo];
                    let gdst = &mut gx[p * h * w..(p + 1) * h * w];
                    for i in 0..ho {
                        for j in 0..wo {
                            let gv = gsrc[i * wo + j] * quarter;
                            let base = 2 * i * w + 2 * j;
                            gdst[base] += gv;
                            gdst[base + 1] += gv;
                            gdst[base + w] += gv;
                            gdst[base + w + 1] += gv;
                        }
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Forward differences along the width axis: out[..., j] = x[..., j+1] - x[..., j].
    pub fn diff_x(&self) -> Result<Tensor<T>, TensorError> {
        let (n, c, h, w) = self.dims4("diff_x")?;
        if w < 2 {
            return Err(TensorError::Invalid {
                op: "diff_x",
                msg: format!("width {w} < 2"),
            });
        }
        let wo = w - 1;
        let x = self.data();
        let mut out = vec![T::zero(); n * c * h * wo];
        for p in 0..n * c * h {
            let src = &x[p * w..(p + 1) * w];
            let dst = &mut out[p * wo..(p + 1) * wo];
            for j in 0..wo {
                dst[j] = src[j + 1] - src[j];
            }
        }
        drop(x);
        Ok(Tensor::from_op(
            vec![n, c, h, wo],
            out,
            "diff_x",
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![T::zero(); n * c * h * w];
                for p in 0..n * c * h {
                    let gsrc = &g[p * wo..(p + 1) * wo];
                    let gdst = &mut gx[p * w..(p + 1) * w];
                    for j in 0..wo {
                        gdst[j + 1] += gsrc[j];
                        gdst[j] -= gsrc[j];
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Forward differences along the height axis.
    pub fn diff_y(&self) -> Result<Tensor<T>, TensorError> {
        let (n, c, h, w) = self.dims4("diff_y")?;
        if h < 2 {
            return Err(TensorError::Invalid {
                op: "diff_y",
                msg: format!("height {h} < 2"),
            });
        }
        let ho = h - 1;
        let x = self.data();
        let mut out = vec![T::zero(); n * c * ho * w];
        for p in 0..n * c {
            let src = &x[p * h * w..(p + 1) * h * w];
            let dst = &mut out[p * ho * w..(p + 1) * ho * w];
            for i in 0..ho {
                for j in 0..w {
                    dst[i * w + j] = src[(i + 1) * w + j] - src[i * w + j];
                }
            }
        }
        drop(x);
        Ok(Tensor::from_op(
            vec![n, c, ho, w],
            out,
            "diff_y",
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![T::zero(); n * c * h * w];
                for p in 0..n * c {
                    let gsrc = &g[p * ho * w..(p + 1) * ho * w];
                    let gdst = &mut gx[p * h * w..(p + 1) * h * w];
                    for i in 0..ho {
                        for j in 0..w {
                            gdst[(i + 1) * w + j] += gsrc[i * w + j];
                            gdst[i * w + j] -= gsrc[i * w + j];
                        }
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use crate::tensor::{backward, Tensor};

    #[test]
    fn global_avg_pool_of_constant_channel() {
        let x = Tensor::<f64>::full(&[1, 2, 3, 3], 0.7);
        let y = x.global_avg_pool().unwrap();
        assert_eq!(y.shape(), &[1, 2, 1, 1]);
        assert!((y.to_vec()[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn global_avg_pool_direct_mean() {
        let x = Tensor::<f64>::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(x.global_avg_pool().unwrap().item(), 2.5);
    }

    #[test]
    fn global_avg_pool_is_linear() {
        let data: Vec<f64> = (0..16).map(|i| (i as f64) * 0.31 - 1.7).collect();
        let x = Tensor::<f64>::from_vec(&[1, 1, 4, 4], data.clone());
        let scaled = Tensor::<f64>::from_vec(&[1, 1, 4, 4], data.iter().map(|v| 3.0 * v).collect());
        let a = x.global_avg_pool().unwrap().item();
        let b = scaled.global_avg_pool().unwrap().item();
        assert!((b - 3.0 * a).abs() < 1e-12);
    }

    #[test]
    fn diff_x_of_row() {
        let x = Tensor::<f64>::from_vec(&[1, 1, 1, 3], vec![1.0, 4.0, 9.0]);
        assert_eq!(x.diff_x().unwrap().to_vec(), vec![3.0, 5.0]);
    }

    #[test]
    fn avg_pool2_halves_extents_and_averages() {
        let x = Tensor::<f64>::from_vec(&[1, 1, 2, 4], vec![1.0, 3.0, 5.0, 7.0, 1.0, 3.0, 5.0, 7.0]);
        let y = x.avg_pool2().unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 2]);
        assert_eq!(y.to_vec(), vec![2.0, 6.0]);
    }

    #[test]
    fn mean_all_backward_distributes() {
        let x = Tensor::<f64>::param(&[4], vec![1.0, 2.0, 3.0, 4.0]);
        let loss = x.mean_all();
        backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.25; 4]);
    }
}
