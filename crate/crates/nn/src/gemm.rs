//! Thin safe wrapper over `matrixmultiply::sgemm` for row-major operands.

/// Computes `c = op(a) * op(b) + beta * c` where `op(a)` is `m x k` and
/// `op(b)` is `k x n`. A transposed operand is stored in its untransposed
/// row-major layout (`k x m` for `a`, `n x k` for `b`).
#[allow(clippy::too_many_arguments)]
pub fn sgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_trans: bool,
    b: &[f32],
    b_trans: bool,
    beta: f32,
    c: &mut [f32],
) {
    assert!(a.len() >= m * k, "lhs buffer too small");
    assert!(b.len() >= k * n, "rhs buffer too small");
    assert!(c.len() >= m * n, "output buffer too small");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in &mut c[..m * n] {
            *v *= beta;
        }
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above guarantee every index the kernel touches is in bounds.
    unsafe {
        matrixmultiply::sgemm(
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

/// General strided variant used by attention, where heads are interleaved
/// column blocks of a wider matrix.
#[allow(clippy::too_many_arguments)]
pub fn sgemm_strided(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_strides: (usize, usize),
    b: &[f32],
    b_strides: (usize, usize),
    beta: f32,
    c: &mut [f32],
    c_strides: (usize, usize),
) {
    if m == 0 || n == 0 || k == 0 {
        assert!(k != 0 || beta == 1.0, "k = 0 only supported as a no-op accumulate");
        return;
    }
    let max_a = (m - 1) * a_strides.0 + (k - 1) * a_strides.1;
    let max_b = (k - 1) * b_strides.0 + (n - 1) * b_strides.1;
    let max_c = (m - 1) * c_strides.0 + (n - 1) * c_strides.1;
    assert!(max_a < a.len() && max_b < b.len() && max_c < c.len(), "strided gemm out of bounds");
    // SAFETY: the largest reachable offset of each operand is checked above.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            c_strides.0 as isize,
            c_strides.1 as isize,
        );
    }
}
