//! Differentiable primitives.
//!
//! Element-wise arithmetic, reductions and reshapes are methods on
//! [`Tensor`](crate::Tensor); layer primitives are free functions here.

pub mod conv;
pub mod elementwise;
pub mod linalg;
pub mod norm;
pub mod pool;
pub mod shape;

pub use conv::{conv2d, conv_transpose2d, ConvGeometry};
pub use linalg::softmax;
pub use norm::{batch_norm_eval, batch_norm_train, BatchStats};
pub use pool::avg_pool2d;

/// Row-major `c = op(a) * op(b) + beta * c` where `op` optionally transposes.
///
/// `a` is `m x k` after `op`, `b` is `k x n` after `op`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices cover every index reached through these strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
