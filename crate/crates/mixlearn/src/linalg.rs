//! Symmetric positive definite solvers used by the kernel learners: a
//! blocked dense Cholesky factorization whose trailing updates run through
//! dgemm, and a banded Cholesky for kernel matrices whose entries vanish
//! beyond a fixed number of off-diagonals. Matrices are row-major.

use crate::error::{Error, Result};

const BLOCK: usize = 192;

/// In-place lower Cholesky factorization A = L L^T of a row-major SPD
/// matrix. Only the lower triangle is read and written; the strict upper
/// triangle is left untouched.
pub fn cholesky_factor(a: &mut [f64], n: usize) -> Result<()> {
    assert_eq!(a.len(), n * n, "matrix buffer must be n*n");
    let mut k0 = 0;
    while k0 < n {
        let kb = BLOCK.min(n - k0);
        factor_diagonal_block(a, n, k0, kb)?;
        panel_solve(a, n, k0, kb);
        trailing_update(a, n, k0, kb);
        k0 += kb;
    }
    Ok(())
}

fn factor_diagonal_block(a: &mut [f64], n: usize, k0: usize, kb: usize) -> Result<()> {
    for j in k0..k0 + kb {
        let mut d = a[j * n + j];
        for t in k0..j {
            d -= a[j * n + t] * a[j * n + t];
        }
        if !(d > 0.0) {
            return Err(Error::numerical(format!(
                "matrix is not positive definite (pivot {d:.3e} at row {j})"
            )));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..k0 + kb {
            let mut s = a[i * n + j];
            for t in k0..j {
                s -= a[i * n + t] * a[j * n + t];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}

fn panel_solve(a: &mut [f64], n: usize, k0: usize, kb: usize) {
    for i in k0 + kb..n {
        for j in k0..k0 + kb {
            let mut s = a[i * n + j];
            for t in k0..j {
                s -= a[i * n + t] * a[j * n + t];
            }
            a[i * n + j] = s / a[j * n + j];
        }
    }
}

fn trailing_update(a: &mut [f64], n: usize, k0: usize, kb: usize) {
    let start = k0 + kb;
    let mut j0 = start;
    while j0 < n {
        let jb = BLOCK.min(n - j0);
        let rows = n - j0;
        // A[j0.., j0..j0+jb] -= L[j0.., k0..k0+kb] * L[j0..j0+jb, k0..k0+kb]^T
        unsafe {
            matrixmultiply::dgemm(
                rows,
                kb,
                jb,
                -1.0,
                a.as_ptr().add(j0 * n + k0),
                n as isize,
                1,
                a.as_ptr().add(j0 * n + k0),
                1,
                n as isize,
                1.0,
                a.as_mut_ptr().add(j0 * n + j0),
                n as isize,
                1,
            );
        }
        j0 += jb;
    }
}

/// Solves L L^T x = b in place given the factor from cholesky_factor.
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    assert_eq!(l.len(), n * n);
    assert_eq!(b.len(), n);
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[i * n + j] * b[j];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= l[j * n + i] * b[j];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Multiplies the SPD matrix whose lower triangle is stored in a by x.
/// Usable only before the buffer is overwritten by cholesky_factor.
pub fn sym_matvec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    assert_eq!(x.len(), n);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = a[i * n + i] * x[i];
        for j in 0..i {
            s += a[i * n + j] * x[j];
            y[j] += a[i * n + j] * x[i];
        }
        y[i] += s;
    }
    y
}

/// Symmetric banded matrix with half-bandwidth w: entry (i, j) is stored for
/// 0 <= i - j <= w at data[i * (w + 1) + (i - j)]. Entries further from the
/// diagonal are structural zeros.
#[derive(Debug, Clone)]
pub struct SymBanded {
    pub n: usize,
    pub halfband: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, halfband: usize) -> Self {
        SymBanded {
            n,
            halfband,
            data: vec![0.0; n * (halfband + 1)],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.halfband {
            0.0
        } else {
            self.data[hi * (self.halfband + 1) + (hi - lo)]
        }
    }

    /// Sets the entry (i, j); the pair must lie inside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        assert!(hi - lo <= self.halfband, "entry outside the band");
        self.data[hi * (self.halfband + 1) + (hi - lo)] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let w = self.halfband;
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(w);
            let mut s = 0.0;
            for j in lo..i {
                let v = self.data[i * (w + 1) + (i - j)];
                s += v * x[j];
                y[j] += v * x[i];
            }
            s += self.data[i * (w + 1)] * x[i];
            y[i] += s;
        }
        y
    }

    /// In-place banded Cholesky; afterwards the storage holds the lower
    /// factor in the same band layout.
    pub fn cholesky_factor(&mut self) -> Result<()> {
        let w = self.halfband;
        let stride = w + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(w);
            for j in lo..=i {
                let mut s = self.data[i * stride + (i - j)];
                let kmin = lo.max(j.saturating_sub(w));
                for k in kmin..j {
                    s -= self.data[i * stride + (i - k)] * self.data[j * stride + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::numerical(format!(
                            "banded matrix is not positive definite (pivot {s:.3e} at row {i})"
                        )));
                    }
                    self.data[i * stride] = s.sqrt();
                } else {
                    self.data[i * stride + (i - j)] = s / self.data[j * stride];
                }
            }
        }
        Ok(())
    }

    /// Solves L L^T x = b in place after cholesky_factor.
    pub fn solve(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let w = self.halfband;
        let stride = w + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(w);
            let mut s = b[i];
            for j in lo..i {
                s -= self.data[i * stride + (i - j)] * b[j];
            }
            b[i] = s / self.data[i * stride];
        }
        for i in (0..self.n).rev() {
            let hi = (i + w).min(self.n - 1);
            let mut s = b[i];
            for j in i + 1..=hi {
                s -= self.data[j * stride + (j - i)] * b[j];
            }
            b[i] = s / self.data[i * stride];
        }
    }
}
