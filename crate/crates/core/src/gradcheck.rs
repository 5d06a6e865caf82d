//! Central finite-difference gradient checking.
//!
//! This module is test support: it evaluates losses by rebuilding them from
//! perturbed leaf values, entirely independent of the backward rules it
//! verifies.

use crate::tensor::{backward, Tensor};

/// Default step for central differences at double precision.
pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, floor)`; the floor turns the comparison absolute
/// for gradients smaller than the requested tolerance scale.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-4);
    (analytic - numeric).abs() / denom
}

/// Verifies d(loss)/d(inputs) for every element of every input against
/// central finite differences.
///
/// `loss_fn` must rebuild the loss from the given leaves each call; the
/// harness perturbs one element at a time and re-evaluates. Returns the worst
/// relative error observed, or panics with a description of the first element
/// exceeding `tol`.
pub fn check_gradients<F>(inputs: &[&Tensor<f64>], loss_fn: F, tol: f64) -> f64
where
    F: Fn(&[Tensor<f64>]) -> Tensor<f64>,
{
    let leaves: Vec<Tensor<f64>> = inputs
        .iter()
        .map(|t| Tensor::param(t.shape(), t.to_vec()))
        .collect();

    let loss = loss_fn(&leaves);
    assert_eq!(loss.numel(), 1, "gradient check requires a scalar loss");
    backward(&loss).expect("backward failed during gradient check");

    let mut worst = 0.0f64;
    for (slot, leaf) in leaves.iter().enumerate() {
        let analytic = leaf
            .grad()
            .unwrap_or_else(|| panic!("input {slot} received no gradient"));
        let base = leaf.to_vec();
        for idx in 0..base.len() {
            let numeric = {
                let eval = |delta: f64| -> f64 {
                    let mut probe: Vec<Tensor<f64>> = leaves.iter().map(|l| l.detach()).collect();
                    let mut data = base.clone();
                    data[idx] += delta;
                    probe[slot] = Tensor::from_vec(leaf.shape(), data);
                    loss_fn(&probe).item()
                };
                (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP)
            };
            let err = relative_error(analytic[idx], numeric);
            assert!(
                err < tol,
                "input {slot} element {idx}: analytic {} vs numeric {} (rel err {err:.3e}, tol {tol:.1e})",
                analytic[idx],
                numeric
            );
            worst = worst.max(err);
        }
    }
    worst
}

/// Deterministic uniform values in [-1, 1] for building check inputs.
pub struct CheckRng(u64);

impl CheckRng {
    pub fn new(seed: u64) -> CheckRng {
        CheckRng(seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493))
    }

    pub fn next_f64(&mut self) -> f64 {
        // splitmix64
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z = z ^ (z >> 31);
        (z >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0
    }

    pub fn tensor(&mut self, shape: &[usize]) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| self.next_f64()).collect())
    }

    /// Values in [lo, hi].
    pub fn tensor_in(&mut self, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(
            shape,
            (0..n)
                .map(|_| lo + (self.next_f64() + 1.0) * 0.5 * (hi - lo))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_loss_has_exact_gradient() {
        let mut rng = CheckRng::new(7);
        let x = rng.tensor(&[2, 3]);
        check_gradients(&[&x], |leaves| leaves[0].sum_all(), 1e-6);
    }

    #[test]
    #[should_panic(expected = "rel err")]
    fn broken_gradient_is_caught() {
        let x = Tensor::from_vec(&[1], vec![0.7]);
        // x * detach(x) evaluates to x^2 but backprops only through the first
        // factor, so the analytic gradient is x while the true one is 2x.
        check_gradients(
            &[&x],
            |leaves| leaves[0].mul(&leaves[0].detach()).unwrap().sum_all(),
            1e-4,
        );
    }
}
