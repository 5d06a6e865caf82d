//! Shape-rearranging ops: reshape, channel concatenation, channel scaling.

use super::{shape_err, Scalar, Tensor, TensorError};

impl<T: Scalar> Tensor<T> {
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>, TensorError> {
        let new_numel: usize = shape.iter().product();
        if new_numel != self.numel() {
            return Err(shape_err(
                "reshape",
                "numel",
                format!("{:?} ({}) -> {:?} ({})", self.shape(), self.numel(), shape, new_numel),
            ));
        }
        Ok(Tensor::from_op(
            shape.to_vec(),
            self.to_vec(),
            "reshape",
            vec![self.clone()],
            Box::new(move |g| vec![Some(g.to_vec())]),
        ))
    }

    /// Concatenate two NCHW tensors along the channel axis; `self` channels
    /// come first. Backward splits the upstream gradient at the seam.
    pub fn concat_channels(&self, rhs: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        let (n, ca, h, w) = self.dims4("concat_channels")?;
        let (nb, cb, hb, wb) = rhs.dims4("concat_channels")?;
        if n != nb {
            return Err(shape_err("concat_channels", "batch", format!("{n} vs {nb}")));
        }
        if h != hb || w != wb {
            return Err(shape_err(
                "concat_channels",
                "spatial",
                format!("{h}x{w} vs {hb}x{wb}"),
            ));
        }
        let hw = h * w;
        let (la, lb) = (ca * hw, cb * hw);
        let a = self.data();
        let b = rhs.data();
        let mut out = Vec::with_capacity(n * (la + lb));
        for ni in 0..n {
            out.extend_from_slice(&a[ni * la..(ni + 1) * la]);
            out.extend_from_slice(&b[ni * lb..(ni + 1) * lb]);
        }
        drop(a);
        drop(b);
        Ok(Tensor::from_op(
            vec![n, ca + cb, h, w],
            out,
            "concat_channels",
            vec![self.clone(), rhs.clone()],
            Box::new(move |g| {
                let mut ga = Vec::with_capacity(n * la);
                let mut gb = Vec::with_capacity(n * lb);
                for ni in 0..n {
                    let base = ni * (la + lb);
                    ga.extend_from_slice(&g[base..base + la]);
                    gb.extend_from_slice(&g[base + la..base + la + lb]);
                }
                vec![Some(ga), Some(gb)]
            }),
        ))
    }

    /// Multiply each channel of an NCHW tensor by a per-channel factor of
    /// shape NC11, broadcast over the spatial axes.
    pub fn scale_channels(&self, factors: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        let (n, c, h, w) = self.dims4("scale_channels")?;
        if factors.shape() != [n, c, 1, 1] {
            return Err(shape_err(
                "scale_channels",
                "factors",
                format!("expected [{n}, {c}, 1, 1], got {:?}", factors.shape()),
            ));
        }
        let hw = h * w;
        let x = self.data();
        let s = factors.data();
        let mut out = vec![T::zero(); n * c * hw];
        for p in 0..n * c {
            let sv = s[p];
            for (o, &v) in out[p * hw..(p + 1) * hw].iter_mut().zip(&x[p * hw..(p + 1) * hw]) {
                *o = v * sv;
            }
        }
        drop(x);
        drop(s);
        let input = self.clone();
        let fac = factors.clone();
        Ok(Tensor::from_op(
            vec![n, c, h, w],
            out,
            "scale_channels",
            vec![self.clone(), factors.clone()],
            Box::new(move |g| {
                let x = input.data();
                let s = fac.data();
                let mut gx = vec![T::zero(); n * c * hw];
                let mut gs = vec![T::zero(); n * c];
                for p in 0..n * c {
                    let sv = s[p];
                    let gseg = &g[p * hw..(p + 1) * hw];
                    let xseg = &x[p * hw..(p + 1) * hw];
                    let gxseg = &mut gx[p * hw..(p + 1) * hw];
                    let mut acc = T::zero();
                    for ((gx_i, &g_i), &x_i) in gxseg.iter_mut().zip(gseg).zip(xseg) {
                        *gx_i = g_i * sv;
                        acc += g_i * x_i;
                    }
                    gs[p] = acc;
                }
                vec![Some(gx), Some(gs)]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use crate::tensor::{backward, Tensor};

    #[test]
    fn concat_orders_lhs_channels_first() {
        let a = Tensor::<f64>::from_vec(&[1, 1, 1, 1], vec![1.0]);
        let b = Tensor::<f64>::from_vec(&[1, 1, 1, 1], vec![2.0]);
        let c = a.concat_channels(&b).unwrap();
        assert_eq!(c.shape(), &[1, 2, 1, 1]);
        assert_eq!(c.to_vec(), vec![1.0, 2.0]);
    }

    #[test]
    fn concat_rejects_spatial_mismatch() {
        let a = Tensor::<f64>::zeros(&[1, 1, 2, 2]);
        let b = Tensor::<f64>::zeros(&[1, 1, 3, 2]);
        assert!(a.concat_channels(&b).is_err());
    }

    #[test]
    fn concat_backward_splits_gradient() {
        let a = Tensor::<f64>::param(&[1, 1, 1, 2], vec![1.0, 2.0]);
        let b = Tensor::<f64>::param(&[1, 2, 1, 2], vec![3.0, 4.0, 5.0, 6.0]);
        let c = a.concat_channels(&b).unwrap();
        // Weight each output element distinctly so the split is observable.
        let w = Tensor::<f64>::from_vec(&[1, 3, 1, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let loss = c.mul(&w).unwrap().sum_all();
        backward(&loss).unwrap();
        assert_eq!(a.grad().unwrap(), vec![1.0, 2.0]);
        assert_eq!(b.grad().unwrap(), vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn scale_channels_broadcasts() {
        let x = Tensor::<f64>::from_vec(&[1, 2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let s = Tensor::<f64>::from_vec(&[1, 2, 1, 1], vec![0.5, 2.0]);
        let y = x.scale_channels(&s).unwrap();
        assert_eq!(y.to_vec(), vec![0.5, 1.0, 6.0, 8.0]);
    }
}
