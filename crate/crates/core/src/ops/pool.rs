//! Average pooling with zero padding.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::Op;
use crate::error::TensorError;
use crate::tensor::Tensor;

fn out_size(n: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = n + 2 * padding;
    (kernel > 0 && stride > 0 && padded >= kernel).then(|| (padded - kernel) / stride + 1)
}

/// Mean over each `kernel x kernel` window of a `[B, C, H, W]` tensor.
///
/// Padded positions count as zeros and the divisor is always `kernel²`.
pub fn avg_pool2d(x: &Tensor, kernel: usize, stride: usize, padding: usize) -> Result<Tensor, TensorError> {
    const OP: &str = "avg_pool2d";
    let [b, c, h, w] =
        <[usize; 4]>::try_from(x.shape()).map_err(|_| TensorError::invalid(OP, "expected a 4-D tensor"))?;
    let (ho, wo) = match (
        out_size(h, kernel, stride, padding),
        out_size(w, kernel, stride, padding),
    ) {
        (Some(ho), Some(wo)) => (ho, wo),
        _ => return Err(TensorError::invalid(OP, "window does not fit")),
    };
    let src = x.data();
    let norm = 1.0 / (kernel * kernel) as f64;
    let mut out = vec![0.0; b * c * ho * wo];
    for p in 0..b * c {
        let plane = &src[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * ho * wo..(p + 1) * ho * wo];
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = 0.0;
                for ky in 0..kernel {
                    let Some(iy) = (oy * stride + ky).checked_sub(padding).filter(|&v| v < h) else {
                        continue;
                    };
                    for kx in 0..kernel {
                        if let Some(ix) = (ox * stride + kx).checked_sub(padding).filter(|&v| v < w) {
                            acc += plane[iy * w + ix];
                        }
                    }
                }
                dst[oy * wo + ox] = acc * norm;
            }
        }
    }
    Tensor::from_op(
        OP,
        out,
        vec![b, c, ho, wo],
        Op::AvgPool2d {
            x: x.clone(),
            kernel,
            stride,
            padding,
        },
    )
}

pub(crate) fn avg_pool2d_backward(
    in_shape: &[usize],
    out_shape: &[usize],
    kernel: usize,
    stride: usize,
    padding: usize,
    g: &[f64],
) -> Vec<f64> {
    let (h, w) = (in_shape[2], in_shape[3]);
    let (ho, wo) = (out_shape[2], out_shape[3]);
    let planes = in_shape[0] * in_shape[1];
    let norm = 1.0 / (kernel * kernel) as f64;
    let mut gx = vec![0.0; planes * h * w];
    for p in 0..planes {
        let gin = &g[p * ho * wo..(p + 1) * ho * wo];
        let dst = &mut gx[p * h * w..(p + 1) * h * w];
        for oy in 0..ho {
            for ox in 0..wo {
                let v = gin[oy * wo + ox] * norm;
                for ky in 0..kernel {
                    let Some(iy) = (oy * stride + ky).checked_sub(padding).filter(|&v| v < h) else {
                        continue;
                    };
                    for kx in 0..kernel {
                        if let Some(ix) = (ox * stride + kx).checked_sub(padding).filter(|&v| v < w) {
                            dst[iy * w + ix] += v;
                        }
                    }
                }
            }
        }
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_one_to_nine() {
        let x = Tensor::new((1..=9).map(f64::from).collect(), &[1, 1, 3, 3]).unwrap();
        let y = avg_pool2d(&x, 3, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[5.0]);
    }

    #[test]
    fn kernel_one_is_identity() {
        let x = Tensor::new((0..12).map(|i| i as f64 * 0.5).collect(), &[1, 3, 2, 2]).unwrap();
        assert_eq!(avg_pool2d(&x, 1, 1, 0).unwrap().data(), x.data());
    }

    #[test]
    fn constant_interior_and_padded_border() {
        let x = Tensor::full(&[1, 1, 5, 5], 2.0);
        let y = avg_pool2d(&x, 3, 1, 1).unwrap();
        let d = y.data();
        assert_eq!(d[2 * 5 + 2], 2.0);
        // corner window sees 4 of 9 cells
        assert!((d[0] - 2.0 * 4.0 / 9.0).abs() < 1e-15);
    }
}
