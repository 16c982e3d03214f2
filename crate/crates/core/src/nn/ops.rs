//! Elementwise layers and the training loss.

use super::tensor::Tensor;
use crate::{Error, Result};

pub fn relu_forward(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

/// Passes `grad_out` where the forward input was strictly positive.
///
/// `relu(x) > 0` exactly when `x > 0`, so the forward output works as the
/// mask just as well as the input.
pub fn relu_backward(grad_out: &Tensor, cached_input: &Tensor) -> Result<Tensor> {
    cached_input.expect_shape(grad_out.shape(), "relu backward")?;
    let data = grad_out
        .data()
        .iter()
        .zip(cached_input.data())
        .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(grad_out.shape(), data)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    b.expect_shape(a.shape(), "add")?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::from_vec(a.shape(), data)
}

/// Gradient of `a + b` with respect to `a` and `b`.
pub fn add_backward(grad_out: &Tensor) -> (Tensor, Tensor) {
    (grad_out.clone(), grad_out.clone())
}

/// `loss = sum((pred - target)^2) / (2 * numel)`, with gradient
/// `(pred - target) / numel`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "mse: prediction {} vs target {}",
            pred.shape(),
            target.shape()
        )));
    }
    let numel = pred.numel() as f64;
    let mut sum = 0.0f64;
    let mut grad = Vec::with_capacity(pred.numel());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let d = p as f64 - t as f64;
        sum += d * d;
        grad.push((d / numel) as f32);
    }
    Ok((sum / (2.0 * numel), Tensor::from_vec(pred.shape(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Shape;

    fn row(v: &[f32]) -> Tensor {
        Tensor::from_vec(Shape::new(1, 1, 1, v.len()).unwrap(), v.to_vec()).unwrap()
    }

    #[test]
    fn relu_values_and_subgradient_at_zero() {
        let x = row(&[-1.0, 0.0, 2.0]);
        assert_eq!(relu_forward(&x).data(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&row(&[5.0, 5.0, 5.0]), &x).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn add_identity_and_residual() {
        let y = row(&[0.2, 0.9, -0.1]);
        let x = row(&[0.25, 0.5, 0.0]);
        assert_eq!(add(&y, &Tensor::zeros(y.shape())).unwrap(), y);
        let residual = row(&[0.05, -0.4, 0.1]);
        let out = add(&y, &residual).unwrap();
        for (o, e) in out.data().iter().zip(x.data()) {
            assert!((o - e).abs() < 1e-7);
        }
        let (ga, gb) = add_backward(&row(&[1.0, 2.0, 3.0]));
        assert_eq!(ga, gb);
        assert_eq!(ga.data(), &[1.0, 2.0, 3.0]);
        assert!(add(&y, &row(&[1.0])).is_err());
    }

    #[test]
    fn mse_closed_forms() {
        let t = row(&[0.1, 0.2, 0.3, 0.4]);
        let (l, g) = mse_loss(&t, &t).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
        let p = t.map(|v| v + 1.0);
        let (l, _) = mse_loss(&p, &t).unwrap();
        assert!((l - 0.5).abs() < 1e-7);
        assert!(mse_loss(&t, &row(&[0.0])).is_err());
    }
}
