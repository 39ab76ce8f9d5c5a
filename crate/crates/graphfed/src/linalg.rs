//! Dense row-major matrices and a cyclic Jacobi eigensolver for symmetric
//! matrices. Device populations stay small (K <= a few hundred), so dense
//! storage and O(K^3) decompositions are the right trade.

use crate::error::{Error, Result};

/// Dense `rows x cols` matrix of `f64`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Build from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::input("rows have unequal lengths"));
        }
        Ok(Mat {
            rows: nrows,
            cols: ncols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = out.row_mut(i);
                for (o, r) in orow.iter_mut().zip(rrow) {
                    *o += a * r;
                }
            }
        }
        out
    }

    /// `diag(d) * self`: scales row i by `d[i]`.
    pub fn scale_rows(&self, d: &[f64]) -> Mat {
        assert_eq!(d.len(), self.rows, "scale_rows dimension mismatch");
        let mut out = self.clone();
        for (i, &s) in d.iter().enumerate() {
            for v in out.row_mut(i) {
                *v *= s;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Frobenius norm of the off-diagonal part.
fn off_diagonal_norm(a: &Mat) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                sum += a[(p, q)] * a[(p, q)];
            }
        }
    }
    sum.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps the strict upper triangle in deterministic row-major order,
/// annihilating one off-diagonal entry per rotation, until the off-diagonal
/// Frobenius norm drops below `tol` or the sweep budget is exhausted.
/// Returns the (unsorted) eigenvalues and the accumulated rotation matrix
/// whose columns are the eigenvectors.
pub fn jacobi_eigen(a: &Mat, tol: f64, max_sweeps: usize) -> Result<(Vec<f64>, Mat)> {
    let n = a.rows();
    let mut a = a.clone();
    let mut v = Mat::identity(n);

    for _ in 0..max_sweeps {
        if off_diagonal_norm(&a) < tol {
            return Ok((diag(&a), v));
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = 0.5 * (a[(q, q)] - a[(p, p)]) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Rotate rows/columns p and q of A; symmetry is maintained.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let residual = off_diagonal_norm(&a);
    if residual < tol {
        Ok((diag(&a), v))
    } else {
        Err(Error::numeric(format!(
            "Jacobi eigensolver did not converge in {max_sweeps} sweeps \
             (off-diagonal residual {residual:.3e})"
        )))
    }
}

fn diag(a: &Mat) -> Vec<f64> {
    (0..a.rows()).map(|i| a[(i, i)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let i = Mat::identity(2);
        assert_eq!(a.matmul(&i), a);
        assert_eq!(i.matmul(&a), a);
    }

    #[test]
    fn transpose_involution() {
        let a = Mat::from_fn(3, 5, |i, j| (i * 7 + j) as f64);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn scale_rows_matches_diag_product() {
        let a = Mat::from_fn(3, 2, |i, j| (i + j) as f64 + 1.0);
        let d = [2.0, 0.5, -1.0];
        let mut diag = Mat::zeros(3, 3);
        for (i, &v) in d.iter().enumerate() {
            diag[(i, i)] = v;
        }
        assert_eq!(a.scale_rows(&d), diag.matmul(&a));
    }

    #[test]
    fn jacobi_two_by_two() {
        // Closed form: eigenvalues {0, 2}, eigenvectors (1,1)/sqrt(2), (1,-1)/sqrt(2).
        let l = Mat::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let (vals, vecs) = jacobi_eigen(&l, 1e-12, 100).unwrap();
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((sorted[0] - 0.0).abs() < 1e-12);
        assert!((sorted[1] - 2.0).abs() < 1e-12);
        // Reconstruction check.
        let mut lam = Mat::zeros(2, 2);
        lam[(0, 0)] = vals[0];
        lam[(1, 1)] = vals[1];
        let rec = vecs.matmul(&lam).matmul(&vecs.transpose());
        assert!(rec.max_abs_diff(&l) < 1e-12);
    }

    #[test]
    fn jacobi_zero_matrix() {
        let z = Mat::zeros(3, 3);
        let (vals, vecs) = jacobi_eigen(&z, 1e-12, 100).unwrap();
        assert!(vals.iter().all(|&v| v == 0.0));
        assert_eq!(vecs, Mat::identity(3));
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric() {
        // Deterministic pseudo-random symmetric matrix.
        let n = 12;
        let mut a = Mat::zeros(n, n);
        let mut state: u64 = 0x9e3779b97f4a7c15;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for i in 0..n {
            for j in i..n {
                let v = next();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let (vals, vecs) = jacobi_eigen(&a, 1e-12, 100).unwrap();
        let mut lam = Mat::zeros(n, n);
        for (i, &v) in vals.iter().enumerate() {
            lam[(i, i)] = v;
        }
        let rec = vecs.matmul(&lam).matmul(&vecs.transpose());
        assert!(rec.max_abs_diff(&a) < 1e-9);
        // Orthonormality of the accumulated rotations.
        let vtv = vecs.transpose().matmul(&vecs);
        assert!(vtv.max_abs_diff(&Mat::identity(n)) < 1e-12);
    }
}
