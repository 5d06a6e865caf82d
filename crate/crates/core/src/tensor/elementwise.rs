//! Elementwise tensor ops and their backward rules.

use super::{shape_err, Scalar, Tensor, TensorError};

fn check_same_shape<T: Scalar>(
    op: &'static str,
    a: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(), TensorError> {
    if a.shape() != b.shape() {
        return Err(shape_err(
            op,
            "shape",
            format!("lhs {:?} vs rhs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

impl<T: Scalar> Tensor<T> {
    pub fn add(&self, rhs: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        check_same_shape("add", self, rhs)?;
        let data = self
            .data()
            .iter()
            .zip(rhs.data().iter())
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            "add",
            vec![self.clone(), rhs.clone()],
            Box::new(|g| vec![Some(g.to_vec()), Some(g.to_vec())]),
        ))
    }

    pub fn sub(&self, rhs: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        check_same_shape("sub", self, rhs)?;
        let data = self
            .data()
            .iter()
            .zip(rhs.data().iter())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            "sub",
            vec![self.clone(), rhs.clone()],
            Box::new(|g| {
                vec![
                    Some(g.to_vec()),
                    Some(g.iter().map(|&v| -v).collect()),
                ]
            }),
        ))
    }

    pub fn mul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        check_same_shape("mul", self, rhs)?;
        let data = self
            .data()
            .iter()
            .zip(rhs.data().iter())
            .map(|(&a, &b)| a * b)
            .collect();
        let lhs = self.clone();
        let rhs_c = rhs.clone();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            "mul",
            vec![self.clone(), rhs.clone()],
            Box::new(move |g| {
                let ga = g
                    .iter()
                    .zip(rhs_c.data().iter())
                    .map(|(&g, &b)| g * b)
                    .collect();
                let gb = g
                    .iter()
                    .zip(lhs.data().iter())
                    .map(|(&g, &a)| g * a)
                    .collect();
                vec![Some(ga), Some(gb)]
            }),
        ))
    }

    pub fn div(&self, rhs: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        check_same_shape("div", self, rhs)?;
        let data = self
            .data()
            .iter()
            .zip(rhs.data().iter())
            .map(|(&a, &b)| a / b)
            .collect();
        let lhs = self.clone();
        let rhs_c = rhs.clone();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            "div",
            vec![self.clone(), rhs.clone()],
            Box::new(move |g| {
                let num = lhs.data();
                let den = rhs_c.data();
                let ga = g.iter().zip(den.iter()).map(|(&g, &b)| g / b).collect();
                let gb = g
                    .iter()
                    .zip(num.iter().zip(den.iter()))
                    .map(|(&g, (&a, &b))| -g * a / (b * b))
                    .collect();
                vec![Some(ga), Some(gb)]
            }),
        ))
    }

    /// `scale * x + shift`, elementwise with scalar coefficients.
    pub fn affine(&self, scale: T, shift: T) -> Tensor<T> {
        let data = self.data().iter().map(|&v| scale * v + shift).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            "affine",
            vec![self.clone()],
            Box::new(move |g| vec![Some(g.iter().map(|&v| v * scale).collect())]),
        )
    }

    pub fn neg(&self) -> Tensor<T> {
        self.affine(-T::one(), T::zero())
    }

    pub fn relu(&self) -> Tensor<T> {
        self.leaky_relu(T::zero())
    }

    /// Negative side scaled by `slope`; the subgradient at 0 uses the
    /// negative-side slope as well.
    pub fn leaky_relu(&self, slope: T) -> Tensor<T> {
        let data = self
            .data()
            .iter()
            .map(|&v| if v > T::zero() { v } else { slope * v })
            .collect();
        let input = self.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            "leaky_relu",
            vec![self.clone()],
            Box::new(move |g| {
                let x = input.data();
                vec![Some(
                    g.iter()
                        .zip(x.iter())
                        .map(|(&g, &v)| if v > T::zero() { g } else { g * slope })
                        .collect(),
                )]
            }),
        )
    }

    /// Output is kept strictly inside (0, 1) even where the exponential
    /// saturates in floating point.
    pub fn sigmoid(&self) -> Tensor<T> {
        let hi = T::one() - T::epsilon();
        let lo = T::min_positive_value();
        let data: Vec<T> = self
            .data()
            .iter()
            .map(|&v| (T::one() / (T::one() + (-v).exp())).min(hi).max(lo))
            .collect();
        let out = data.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            "sigmoid",
            vec![self.clone()],
            Box::new(move |g| {
                vec![Some(
                    g.iter()
                        .zip(out.iter())
                        .map(|(&g, &s)| g * s * (T::one() - s))
                        .collect(),
                )]
            }),
        )
    }

    pub fn tanh_act(&self) -> Tensor<T> {
        let data: Vec<T> = self.data().iter().map(|&v| v.tanh()).collect();
        let out = data.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            "tanh",
            vec![self.clone()],
            Box::new(move |g| {
                vec![Some(
                    g.iter()
                        .zip(out.iter())
                        .map(|(&g, &t)| g * (T::one() - t * t))
                        .collect(),
                )]
            }),
        )
    }

    /// Subgradient at 0 is 0.
    pub fn abs_t(&self) -> Tensor<T> {
        let data = self.data().iter().map(|&v| v.abs()).collect();
        let input = self.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            "abs",
            vec![self.clone()],
            Box::new(move |g| {
                let x = input.data();
                vec![Some(
                    g.iter()
                        .zip(x.iter())
                        .map(|(&g, &v)| {
                            if v > T::zero() {
                                g
                            } else if v < T::zero() {
                                -g
                            } else {
                                T::zero()
                            }
                        })
                        .collect(),
                )]
            }),
        )
    }

    pub fn ln_t(&self) -> Tensor<T> {
        let data = self.data().iter().map(|&v| v.ln()).collect();
        let input = self.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            "ln",
            vec![self.clone()],
            Box::new(move |g| {
                let x = input.data();
                vec![Some(
                    g.iter().zip(x.iter()).map(|(&g, &v)| g / v).collect(),
                )]
            }),
        )
    }

    pub fn sqrt_t(&self) -> Tensor<T> {
        let data: Vec<T> = self.data().iter().map(|&v| v.sqrt()).collect();
        let out = data.clone();
        let two = T::from_f64(2.0);
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            "sqrt",
            vec![self.clone()],
            Box::new(move |g| {
                vec![Some(
                    g.iter()
                        .zip(out.iter())
                        .map(|(&g, &s)| g / (two * s))
                        .collect(),
                )]
            }),
        )
    }

    /// Clamp into `[lo, hi]`; gradient passes through strictly inside the
    /// interval and is 0 on the clamped set.
    pub fn clamp_t(&self, lo: T, hi: T) -> Tensor<T> {
        let data = self
            .data()
            .iter()
            .map(|&v| v.max(lo).min(hi))
            .collect();
        let input = self.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            "clamp",
            vec![self.clone()],
            Box::new(move |g| {
                let x = input.data();
                vec![Some(
                    g.iter()
                        .zip(x.iter())
                        .map(|(&g, &v)| if v > lo && v < hi { g } else { T::zero() })
                        .collect(),
                )]
            }),
        )
    }

    /// Elementwise `x^p` for positive inputs.
    pub fn powf_scalar(&self, p: T) -> Tensor<T> {
        let data = self.data().iter().map(|&v| v.powf(p)).collect();
        let input = self.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            "powf",
            vec![self.clone()],
            Box::new(move |g| {
                let x = input.data();
                vec![Some(
                    g.iter()
                        .zip(x.iter())
                        .map(|(&g, &v)| g * p * v.powf(p - T::one()))
                        .collect(),
                )]
            }),
        )
    }
}
