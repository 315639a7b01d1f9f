//! 2-D convolution and transposed convolution via im2col + GEMM.
//!
//! Layouts: inputs are `[B, C, H, W]`; conv weights are `[C_out, C_in, k, k]`;
//! transposed-conv weights are `[C_in, C_out, k, k]` (the adjoint layout).

use alloc::vec;
use alloc::vec::Vec;

use super::gemm;
use crate::autodiff::Op;
use crate::error::TensorError;
use crate::tensor::Tensor;

/// Square kernel, stride and symmetric zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub const fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        ConvGeometry {
            kernel,
            stride,
            padding,
        }
    }

    /// `floor((n + 2p - k) / s) + 1`, or `None` when the window does not fit.
    pub fn conv_out(&self, n: usize) -> Option<usize> {
        let padded = n + 2 * self.padding;
        if self.kernel == 0 || self.stride == 0 || padded < self.kernel {
            return None;
        }
        Some((padded - self.kernel) / self.stride + 1)
    }

    /// `(n - 1) s - 2p + k`, or `None` when that is not positive.
    pub fn transposed_out(&self, n: usize) -> Option<usize> {
        if self.kernel == 0 || self.stride == 0 || n == 0 {
            return None;
        }
        let full = (n - 1) * self.stride + self.kernel;
        full.checked_sub(2 * self.padding).filter(|&v| v > 0)
    }
}

/// Spatial extents of one im2col problem: an image of `c x h x w` and the
/// `ho x wo` grid of window positions.
#[derive(Clone, Copy)]
struct Cols {
    c: usize,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
    g: ConvGeometry,
}

impl Cols {
    fn rows(&self) -> usize {
        self.c * self.g.kernel * self.g.kernel
    }

    fn len(&self) -> usize {
        self.rows() * self.ho * self.wo
    }

    /// Source pixel for window row `(ki, kj)` at output `(oy, ox)`.
    #[inline]
    fn source(&self, ki: usize, kj: usize, oy: usize, ox: usize) -> Option<(usize, usize)> {
        let iy = (oy * self.g.stride + ki).checked_sub(self.g.padding)?;
        let ix = (ox * self.g.stride + kj).checked_sub(self.g.padding)?;
        (iy < self.h && ix < self.w).then_some((iy, ix))
    }

    fn im2col(&self, img: &[f64], out: &mut [f64]) {
        let k = self.g.kernel;
        let plane = self.ho * self.wo;
        for ci in 0..self.c {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (ci * k + ki) * k + kj;
                    let dst = &mut out[row * plane..(row + 1) * plane];
                    for oy in 0..self.ho {
                        for ox in 0..self.wo {
                            dst[oy * self.wo + ox] = match self.source(ki, kj, oy, ox) {
                                Some((iy, ix)) => img[(ci * self.h + iy) * self.w + ix],
                                None => 0.0,
                            };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Cols::im2col`]: scatters and accumulates into `img`.
    fn col2im(&self, cols: &[f64], img: &mut [f64]) {
        let k = self.g.kernel;
        let plane = self.ho * self.wo;
        for ci in 0..self.c {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (ci * k + ki) * k + kj;
                    let src = &cols[row * plane..(row + 1) * plane];
                    for oy in 0..self.ho {
                        for ox in 0..self.wo {
                            if let Some((iy, ix)) = self.source(ki, kj, oy, ox) {
                                img[(ci * self.h + iy) * self.w + ix] += src[oy * self.wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn dims4(t: &Tensor, op: &'static str) -> Result<[usize; 4], TensorError> {
    <[usize; 4]>::try_from(t.shape()).map_err(|_| TensorError::invalid(op, "expected a 4-D tensor"))
}

fn check_bias(b: Option<&Tensor>, channels: usize, op: &'static str) -> Result<(), TensorError> {
    match b {
        Some(b) if b.shape() != [channels] => Err(TensorError::mismatch(op, b.shape(), &[channels])),
        _ => Ok(()),
    }
}

fn add_bias(out: &mut [f64], bias: Option<&Tensor>, batch: usize, channels: usize, plane: usize) {
    if let Some(b) = bias {
        for bi in 0..batch {
            for (c, &bv) in b.data().iter().enumerate() {
                let base = (bi * channels + c) * plane;
                out[base..base + plane].iter_mut().for_each(|v| *v += bv);
            }
        }
    }
}

fn bias_grad(g: &[f64], batch: usize, channels: usize, plane: usize) -> Vec<f64> {
    let mut gb = vec![0.0; channels];
    for bi in 0..batch {
        for (c, acc) in gb.iter_mut().enumerate() {
            let base = (bi * channels + c) * plane;
            *acc += g[base..base + plane].iter().sum::<f64>();
        }
    }
    gb
}

/// Cross-correlation of `x [B, C_in, H, W]` with `w [C_out, C_in, k, k]`.
pub fn conv2d(x: &Tensor, w: &Tensor, b: Option<&Tensor>, geom: ConvGeometry) -> Result<Tensor, TensorError> {
    const OP: &str = "conv2d";
    let [batch, cin, h, wd] = dims4(x, OP)?;
    let [cout, wcin, kh, kw] = dims4(w, OP)?;
    if wcin != cin || kh != geom.kernel || kw != geom.kernel {
        return Err(TensorError::mismatch(OP, x.shape(), w.shape()));
    }
    check_bias(b, cout, OP)?;
    let (ho, wo) = match (geom.conv_out(h), geom.conv_out(wd)) {
        (Some(ho), Some(wo)) => (ho, wo),
        _ => return Err(TensorError::invalid(OP, "input smaller than the kernel")),
    };
    let cols = Cols {
        c: cin,
        h,
        w: wd,
        ho,
        wo,
        g: geom,
    };
    let plane = ho * wo;
    let mut col = vec![0.0; cols.len()];
    let mut out = vec![0.0; batch * cout * plane];
    let in_plane = cin * h * wd;
    for bi in 0..batch {
        cols.im2col(&x.data()[bi * in_plane..(bi + 1) * in_plane], &mut col);
        gemm(
            cout,
            cols.rows(),
            plane,
            w.data(),
            false,
            &col,
            false,
            0.0,
            &mut out[bi * cout * plane..(bi + 1) * cout * plane],
        );
    }
    add_bias(&mut out, b, batch, cout, plane);
    Tensor::from_op(
        OP,
        out,
        vec![batch, cout, ho, wo],
        Op::Conv2d {
            x: x.clone(),
            w: w.clone(),
            b: b.cloned(),
            geom,
        },
    )
}

pub(crate) fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    geom: ConvGeometry,
    out_shape: &[usize],
    g: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let [batch, cin, h, wd] = dims4(x, "conv2d").expect("validated in forward");
    let (cout, ho, wo) = (out_shape[1], out_shape[2], out_shape[3]);
    let cols = Cols {
        c: cin,
        h,
        w: wd,
        ho,
        wo,
        g: geom,
    };
    let plane = ho * wo;
    let in_plane = cin * h * wd;
    let mut col = vec![0.0; cols.len()];
    let mut dcol = vec![0.0; cols.len()];
    let mut gx = vec![0.0; x.numel()];
    let mut gw = vec![0.0; w.numel()];
    for bi in 0..batch {
        let gi = &g[bi * cout * plane..(bi + 1) * cout * plane];
        cols.im2col(&x.data()[bi * in_plane..(bi + 1) * in_plane], &mut col);
        // dW += dY * col^T
        gemm(cout, plane, cols.rows(), gi, false, &col, true, 1.0, &mut gw);
        // dcol = W^T * dY
        gemm(cols.rows(), cout, plane, w.data(), true, gi, false, 0.0, &mut dcol);
        cols.col2im(&dcol, &mut gx[bi * in_plane..(bi + 1) * in_plane]);
    }
    (gx, gw, bias_grad(g, batch, cout, plane))
}

/// Transposed convolution of `x [B, C_in, H, W]` with `w [C_in, C_out, k, k]`;
/// the adjoint of [`conv2d`] with the same geometry.
pub fn conv_transpose2d(x: &Tensor, w: &Tensor, b: Option<&Tensor>, geom: ConvGeometry) -> Result<Tensor, TensorError> {
    const OP: &str = "conv_transpose2d";
    let [batch, cin, h, wd] = dims4(x, OP)?;
    let [wcin, cout, kh, kw] = dims4(w, OP)?;
    if wcin != cin || kh != geom.kernel || kw != geom.kernel {
        return Err(TensorError::mismatch(OP, x.shape(), w.shape()));
    }
    check_bias(b, cout, OP)?;
    let (ho, wo) = match (geom.transposed_out(h), geom.transposed_out(wd)) {
        (Some(ho), Some(wo)) => (ho, wo),
        _ => return Err(TensorError::invalid(OP, "padding leaves an empty output")),
    };
    // The im2col problem of the adjoint conv: image `cout x ho x wo`, window grid `h x wd`.
    let cols = Cols {
        c: cout,
        h: ho,
        w: wo,
        ho: h,
        wo: wd,
        g: geom,
    };
    let in_plane = h * wd;
    let out_plane = ho * wo;
    let mut col = vec![0.0; cols.len()];
    let mut out = vec![0.0; batch * cout * out_plane];
    for bi in 0..batch {
        // col = W^T * x_b, W viewed as [C_in, C_out k k]
        gemm(
            cols.rows(),
            cin,
            in_plane,
            w.data(),
            true,
            &x.data()[bi * cin * in_plane..],
            false,
            0.0,
            &mut col,
        );
        cols.col2im(&col, &mut out[bi * cout * out_plane..(bi + 1) * cout * out_plane]);
    }
    add_bias(&mut out, b, batch, cout, out_plane);
    Tensor::from_op(
        OP,
        out,
        vec![batch, cout, ho, wo],
        Op::ConvTranspose2d {
            x: x.clone(),
            w: w.clone(),
            b: b.cloned(),
            geom,
        },
    )
}

pub(crate) fn conv_transpose2d_backward(
    x: &Tensor,
    w: &Tensor,
    geom: ConvGeometry,
    out_shape: &[usize],
    g: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let [batch, cin, h, wd] = dims4(x, "conv_transpose2d").expect("validated in forward");
    let (cout, ho, wo) = (out_shape[1], out_shape[2], out_shape[3]);
    let cols = Cols {
        c: cout,
        h: ho,
        w: wo,
        ho: h,
        wo: wd,
        g: geom,
    };
    let in_plane = h * wd;
    let out_plane = ho * wo;
    let mut dcol = vec![0.0; cols.len()];
    let mut gx = vec![0.0; x.numel()];
    let mut gw = vec![0.0; w.numel()];
    for bi in 0..batch {
        cols.im2col(&g[bi * cout * out_plane..(bi + 1) * cout * out_plane], &mut dcol);
        let xb = &x.data()[bi * cin * in_plane..(bi + 1) * cin * in_plane];
        // dx_b = W * dcol
        gemm(
            cin,
            cols.rows(),
            in_plane,
            w.data(),
            false,
            &dcol,
            false,
            0.0,
            &mut gx[bi * cin * in_plane..(bi + 1) * cin * in_plane],
        );
        // dW += x_b * dcol^T
        gemm(cin, in_plane, cols.rows(), xb, false, &dcol, true, 1.0, &mut gw);
    }
    (gx, gw, bias_grad(g, batch, cout, out_plane))
}
