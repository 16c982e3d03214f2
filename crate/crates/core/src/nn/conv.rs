//! Same-padded 2-D convolution (cross-correlation, stride 1).
//!
//! Both passes lower each batch sample to a GEMM over an im2col buffer. The
//! buffer is built for a band of output rows at a time so that wide layers on
//! full-size images stay within a fixed memory budget; band boundaries depend
//! only on the layer geometry, never on thread count.

use matrixmultiply::sgemm;

use super::tensor::{Shape, Tensor};
use crate::{par, Error, Result};

/// Upper bound on the im2col band, in floats.
const COL_BUDGET: usize = 1 << 20;

/// Weights `(k_out, k_in, f, f)`, one bias per output channel, and implicit
/// zero padding of `(f - 1) / 2` pixels on every side.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub weights: Tensor,
    pub bias: Vec<f32>,
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Clone, Debug)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Vec<f32>,
}

impl ConvParams {
    pub fn new(weights: Tensor, bias: Vec<f32>) -> Result<Self> {
        let s = weights.shape();
        if s.h != s.w {
            return Err(Error::shape(format!("kernel must be square, got {}x{}", s.h, s.w)));
        }
        if s.h % 2 == 0 {
            return Err(Error::shape(format!("kernel size must be odd, got {}", s.h)));
        }
        if bias.len() != s.n {
            return Err(Error::shape(format!(
                "bias has {} entries for {} output channels",
                bias.len(),
                s.n
            )));
        }
        Ok(ConvParams { weights, bias })
    }

    pub fn zeros(k_in: usize, k_out: usize, kernel: usize) -> Result<Self> {
        let shape = Shape::new(k_out, k_in, kernel, kernel)?;
        ConvParams::new(Tensor::zeros(shape), vec![0.0; k_out])
    }

    pub fn k_out(&self) -> usize {
        self.weights.shape().n
    }

    pub fn k_in(&self) -> usize {
        self.weights.shape().c
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape().h
    }

    pub fn padding(&self) -> usize {
        (self.kernel() - 1) / 2
    }

    pub fn num_params(&self) -> usize {
        self.weights.numel() + self.bias.len()
    }

    fn check_input(&self, input: Shape) -> Result<()> {
        if input.c != self.k_in() {
            return Err(Error::shape(format!(
                "conv expects {} input channels, got {} (input {input})",
                self.k_in(),
                input.c
            )));
        }
        Ok(())
    }
}

struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    pad: usize,
    /// Rows of the im2col matrix: `c * f * f`.
    kff: usize,
    band_rows: usize,
}

impl Geometry {
    fn new(input: Shape, f: usize) -> Self {
        let kff = input.c * f * f;
        Geometry {
            c: input.c,
            h: input.h,
            w: input.w,
            f,
            pad: (f - 1) / 2,
            kff,
            band_rows: (COL_BUDGET / (kff * input.w)).clamp(1, input.h),
        }
    }

    fn bands(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.h)
            .step_by(self.band_rows)
            .map(move |r0| (r0, (r0 + self.band_rows).min(self.h)))
    }

    /// Valid output columns `[lo, hi)` for horizontal tap `v`, and the shift
    /// from output column to input column.
    #[inline]
    fn span(&self, v: usize) -> (usize, usize, isize) {
        let shift = v as isize - self.pad as isize;
        let lo = (-shift).max(0) as usize;
        let hi = (self.w as isize - shift).clamp(0, self.w as isize) as usize;
        (lo.min(hi), hi, shift)
    }

    /// Fills `col` (`kff x band`) for output rows `r0..r1` of one sample.
    fn im2col(&self, x: &[f32], r0: usize, r1: usize, col: &mut [f32]) {
        let (h, w, f) = (self.h, self.w, self.f);
        let bw = (r1 - r0) * w;
        for ci in 0..self.c {
            let plane = &x[ci * h * w..(ci + 1) * h * w];
            for u in 0..f {
                for v in 0..f {
                    let row = (ci * f + u) * f + v;
                    let dst = &mut col[row * bw..(row + 1) * bw];
                    let (lo, hi, shift) = self.span(v);
                    for r in r0..r1 {
                        let d = &mut dst[(r - r0) * w..(r - r0 + 1) * w];
                        let ir = r as isize + u as isize - self.pad as isize;
                        if ir < 0 || ir >= h as isize || lo == hi {
                            d.fill(0.0);
                            continue;
                        }
                        let src = &plane[ir as usize * w..(ir as usize + 1) * w];
                        d[..lo].fill(0.0);
                        d[hi..].fill(0.0);
                        let s0 = (lo as isize + shift) as usize;
                        d[lo..hi].copy_from_slice(&src[s0..s0 + (hi - lo)]);
                    }
                }
            }
        }
    }
}

/// `out[n,k,i,j] = bias[k] + sum_{c,u,v} w[k,c,u,v] * in_padded[n,c,i+u,j+v]`.
pub fn conv2d_forward(input: &Tensor, p: &ConvParams) -> Result<Tensor> {
    let s = input.shape();
    p.check_input(s)?;
    let geo = Geometry::new(s, p.kernel());
    let k_out = p.k_out();
    let hw = s.plane();
    let out_shape = Shape::new(s.n, k_out, s.h, s.w)?;
    let mut out = Tensor::zeros(out_shape);
    let weights = p.weights.data();

    par::for_each_chunk(out.data_mut(), k_out * hw, |n, out_s| {
        for (k, plane) in out_s.chunks_mut(hw).enumerate() {
            plane.fill(p.bias[k]);
        }
        let x = input.sample(n);
        let mut col = vec![0.0f32; geo.kff * geo.band_rows * geo.w];
        for (r0, r1) in geo.bands() {
            let bw = (r1 - r0) * geo.w;
            geo.im2col(x, r0, r1, &mut col);
            // SAFETY: all pointers address live buffers whose extents cover
            // the strided m x k, k x n and m x n views described here.
            unsafe {
                sgemm(
                    k_out,
                    geo.kff,
                    bw,
                    1.0,
                    weights.as_ptr(),
                    geo.kff as isize,
                    1,
                    col.as_ptr(),
                    bw as isize,
                    1,
                    1.0,
                    out_s.as_mut_ptr().add(r0 * geo.w),
                    hw as isize,
                    1,
                );
            }
        }
    });
    Ok(out)
}

/// Adjoint of [`conv2d_forward`] with respect to input, weights and bias.
pub fn conv2d_backward(grad_out: &Tensor, input: &Tensor, p: &ConvParams) -> Result<ConvGrads> {
    let (dx, dw, db) = backward(grad_out, input, p, true)?;
    Ok(ConvGrads {
        input: dx.expect("input gradient requested"),
        weights: dw,
        bias: db,
    })
}

/// Parameter gradients only; the first layer of a network has no use for
/// the input gradient, which costs as much as the weight gradient.
pub(crate) fn conv2d_backward_params(
    grad_out: &Tensor,
    input: &Tensor,
    p: &ConvParams,
) -> Result<(Tensor, Vec<f32>)> {
    let (_, dw, db) = backward(grad_out, input, p, false)?;
    Ok((dw, db))
}

fn backward(
    grad_out: &Tensor,
    input: &Tensor,
    p: &ConvParams,
    want_input: bool,
) -> Result<(Option<Tensor>, Tensor, Vec<f32>)> {
    let s = input.shape();
    p.check_input(s)?;
    let k_out = p.k_out();
    grad_out.expect_shape(Shape::new(s.n, k_out, s.h, s.w)?, "conv grad_out")?;
    let geo = Geometry::new(s, p.kernel());
    let hw = s.plane();

    let mut grad_bias = vec![0.0f64; k_out];
    for n in 0..s.n {
        for (k, plane) in grad_out.sample(n).chunks(hw).enumerate() {
            grad_bias[k] += plane.iter().map(|&g| g as f64).sum::<f64>();
        }
    }

    let per_sample = par::map(s.n, |n| {
        let x = input.sample(n);
        let dy = grad_out.sample(n);
        let mut col = vec![0.0f32; geo.kff * geo.band_rows * geo.w];
        let mut dw = vec![0.0f32; k_out * geo.kff];
        for (r0, r1) in geo.bands() {
            let bw = (r1 - r0) * geo.w;
            geo.im2col(x, r0, r1, &mut col);
            // dw^T += col * dy_band^T, so col is streamed in storage order.
            // SAFETY: see conv2d_forward; dy is read as the transpose of a
            // k_out x bw view with row stride hw starting at the band's
            // first pixel, and dw is written through its transpose.
            unsafe {
                sgemm(
                    geo.kff,
                    bw,
                    k_out,
                    1.0,
                    col.as_ptr(),
                    bw as isize,
                    1,
                    dy.as_ptr().add(r0 * geo.w),
                    1,
                    hw as isize,
                    1.0,
                    dw.as_mut_ptr(),
                    1,
                    geo.kff as isize,
                );
            }
        }
        dw
    });
    let mut dw_total = vec![0.0f32; k_out * geo.kff];
    for dw in per_sample {
        for (t, v) in dw_total.iter_mut().zip(&dw) {
            *t += v;
        }
    }

    // The input gradient is the same-padded correlation of grad_out with
    // the kernel rotated by 180 degrees and its channel axes swapped.
    let grad_input = if want_input {
        let f = p.kernel();
        let flipped = Tensor::from_fn(Shape::new(s.c, k_out, f, f)?, |c, k, u, v| {
            p.weights.get(k, c, f - 1 - u, f - 1 - v)
        });
        Some(conv2d_forward(grad_out, &ConvParams::new(flipped, vec![0.0; s.c])?)?)
    } else {
        None
    };
    Ok((
        grad_input,
        Tensor::from_vec(p.weights.shape(), dw_total)?,
        grad_bias.into_iter().map(|v| v as f32).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(n: usize, c: usize, h: usize, w: usize) -> Shape {
        Shape::new(n, c, h, w).unwrap()
    }

    #[test]
    fn centered_delta_is_identity() {
        let input = Tensor::from_fn(shape(1, 1, 5, 5), |_, _, i, j| (i * 5 + j) as f32 * 0.1 - 1.0);
        let mut p = ConvParams::zeros(1, 1, 7).unwrap();
        p.weights.set(0, 0, 3, 3, 1.0);
        let out = conv2d_forward(&input, &p).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn ones_kernel_counts_in_bounds_taps() {
        let input = Tensor::full(shape(1, 1, 4, 4), 1.0);
        let p = ConvParams::new(Tensor::full(shape(1, 1, 7, 7), 1.0), vec![0.0]).unwrap();
        let out = conv2d_forward(&input, &p).unwrap();
        // A 7x7 window with radius 3 covers the whole 4x4 image from every
        // output position.
        assert!(out.data().iter().all(|&v| v == 16.0));
    }

    #[test]
    fn same_padding_preserves_shape() {
        let input = Tensor::zeros(shape(2, 128, 8, 8));
        let p = ConvParams::zeros(128, 128, 7).unwrap();
        assert_eq!(conv2d_forward(&input, &p).unwrap().shape(), shape(2, 128, 8, 8));
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let input = Tensor::zeros(shape(1, 2, 8, 8));
        let p = ConvParams::zeros(3, 4, 3).unwrap();
        assert!(matches!(conv2d_forward(&input, &p), Err(Error::Shape(_))));
        let g = Tensor::zeros(shape(1, 4, 8, 8));
        assert!(conv2d_backward(&g, &input, &p).is_err());
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(ConvParams::zeros(1, 1, 4).is_err());
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let input = Tensor::from_fn(shape(1, 2, 6, 6), |_, c, i, j| (c + i * j) as f32 * 0.01);
        let p = ConvParams::new(Tensor::full(shape(3, 2, 3, 3), 0.5), vec![0.1; 3]).unwrap();
        let g = conv2d_backward(&Tensor::zeros(shape(1, 3, 6, 6)), &input, &p).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.weights.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn banding_matches_single_band() {
        // 16 channels * 49 taps * 1400 columns forces several bands.
        let s = shape(1, 16, 3, 1400);
        assert!(Geometry::new(s, 7).band_rows < 3);
        let input = Tensor::from_fn(s, |_, c, i, j| ((c * 31 + i * 7 + j) % 17) as f32 / 17.0 - 0.5);
        let p = ConvParams::new(
            Tensor::from_fn(shape(2, 16, 7, 7), |k, c, u, v| ((k + c * 3 + u * 5 + v) % 11) as f32 / 11.0 - 0.5),
            vec![0.25, -0.25],
        )
        .unwrap();
        let out = conv2d_forward(&input, &p).unwrap();
        for &(k, i, j) in &[(0, 0, 0), (1, 1, 700), (0, 2, 1399), (1, 0, 3)] {
            let mut acc = p.bias[k] as f64;
            for c in 0..16 {
                for u in 0..7 {
                    for v in 0..7 {
                        let (ii, jj) = (i as isize + u as isize - 3, j as isize + v as isize - 3);
                        if ii >= 0 && ii < 3 && jj >= 0 && jj < 1400 {
                            acc += p.weights.get(k, c, u, v) as f64
                                * input.get(0, c, ii as usize, jj as usize) as f64;
                        }
                    }
                }
            }
            assert!((out.get(0, k, i, j) as f64 - acc).abs() < 1e-4);
        }
    }
}
