//! Small dense symmetric kernels: Cholesky factorization, solves and inverses.
//!
//! Matrices are square, row-major `Vec<f64>`s. Blocks handled here are bounded
//! by the sample size, so a straightforward O(k³) factorization is enough.

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric matrix. Only the lower triangle is read.
    ///
    /// Returns `None` when a pivot is not strictly positive, i.e. the matrix is
    /// not numerically positive definite.
    pub fn factor(a: &[f64], dim: usize) -> Option<Cholesky> {
        assert_eq!(a.len(), dim * dim, "matrix is not {dim}x{dim}");
        let mut l = vec![0.0; dim * dim];
        for j in 0..dim {
            let row_j = &l[j * dim..j * dim + j];
            let d = a[j * dim + j] - row_j.iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j * dim + j] = djj;
            for i in j + 1..dim {
                let s: f64 = (0..j).map(|k| l[i * dim + k] * l[j * dim + k]).sum();
                l[i * dim + j] = (a[i * dim + j] - s) / djj;
            }
        }
        Some(Cholesky { dim, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// `y = L x`
    pub fn lower_mul(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim;
        for i in (0..n).rev() {
            y[i] = (0..=i).map(|k| self.lower[i * n + k] * x[k]).sum();
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim;
        let l = &self.lower;
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[i * n + k] * b[k]).sum();
            b[i] = (b[i] - s) / l[i * n + i];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[k * n + i] * b[k]).sum();
            b[i] = (b[i] - s) / l[i * n + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Dense inverse `A⁻¹`, symmetrized.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.dim;
        let mut inv = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let m = 0.5 * (inv[i * n + j] + inv[j * n + i]);
                inv[i * n + j] = m;
                inv[j * n + i] = m;
            }
        }
        inv
    }
}

/// `y = A x` for a square row-major matrix.
pub fn mat_vec(a: &[f64], dim: usize, x: &[f64]) -> Vec<f64> {
    a.chunks_exact(dim)
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect()
}

/// Dot product with four independent fused multiply-add accumulators.
///
/// The summation order is fixed, so the result is bitwise identical whichever
/// instruction set runs it, and identical to each lane of [`dot_panel`].
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    #[cfg(target_arch = "x86_64")]
    if fast_path() {
        // SAFETY: the CPU supports AVX2 and FMA.
        return unsafe { dot_avx2(a, b) };
    }
    dot_kernel(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dot_avx2(a: &[f64], b: &[f64]) -> f64 {
    dot_kernel(a, b)
}

#[cfg(target_arch = "x86_64")]
fn fast_path() -> bool {
    std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
}

#[inline(always)]
fn finish(acc: [f64; 4], a_tail: &[f64], b_tail: &[f64]) -> f64 {
    let mut tail = 0.0;
    for (x, y) in a_tail.iter().zip(b_tail) {
        tail = x.mul_add(*y, tail);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline(always)]
fn dot_kernel(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let body = n - n % 4;
    let mut acc = [0.0f64; 4];
    for (ac, bc) in a[..body].chunks_exact(4).zip(b[..body].chunks_exact(4)) {
        for l in 0..4 {
            acc[l] = ac[l].mul_add(bc[l], acc[l]);
        }
    }
    finish(acc, &a[body..], &b[body..])
}

/// [`dot`] of each of the `W` columns in `a` against each consecutive
/// length-`n` column of `panel`, written to `out`.
pub fn dot_panel<const W: usize>(a: [&[f64]; W], panel: &[f64], n: usize, out: &mut Vec<[f64; W]>) {
    out.clear();
    if n == 0 {
        return;
    }
    #[cfg(target_arch = "x86_64")]
    if fast_path() {
        // SAFETY: the CPU supports AVX2 and FMA.
        unsafe { dot_panel_avx2(a, panel, n, out) };
        return;
    }
    let a = a.map(|c| &c[..n]);
    for x in panel.chunks_exact(n) {
        out.push(a.map(|c| dot_kernel(c, x)));
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dot_panel_avx2<const W: usize>(a: [&[f64]; W], panel: &[f64], n: usize, out: &mut Vec<[f64; W]>) {
    use std::arch::x86_64::*;
    let body = n - n % 4;
    let a = a.map(|c| &c[..n]);
    let mut lanes = [[0.0f64; 4]; W];
    for x in panel.chunks_exact(n) {
        let mut acc = [_mm256_setzero_pd(); W];
        let mut i = 0;
        while i < body {
            // SAFETY: i + 4 <= body <= n, and every slice has length n.
            let xv = _mm256_loadu_pd(x.as_ptr().add(i));
            for r in 0..W {
                let av = _mm256_loadu_pd(a[r].as_ptr().add(i));
                acc[r] = _mm256_fmadd_pd(av, xv, acc[r]);
            }
            i += 4;
        }
        for r in 0..W {
            _mm256_storeu_pd(lanes[r].as_mut_ptr(), acc[r]);
        }
        let xt = &x[body..];
        out.push(std::array::from_fn(|r| finish(lanes[r], &a[r][body..], xt)));
    }
}
