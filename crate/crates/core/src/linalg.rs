//! Small dense linear algebra used by the moment systems, Newton solves and
//! the system stability check. Sizes here are at most a few dozen.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().map(|a| a.abs()).sum())
            .fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)] == 0.0))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting and column equilibration.
///
/// Solves are followed by one pass of residual-based iterative refinement
/// against the original (unscaled) matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    col_scale: Vec<f64>,
    original: Matrix,
    condition: f64,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidParameter {
                name: "matrix",
                reason: format!("expected square matrix, got {}x{}", a.rows, a.cols),
            });
        }
        let n = a.rows;
        let col_scale: Vec<f64> = (0..n)
            .map(|j| {
                let m = (0..n).map(|i| a[(i, j)].abs()).fold(0.0, f64::max);
                if m > 0.0 {
                    1.0 / m
                } else {
                    1.0
                }
            })
            .collect();
        let mut lu: Vec<f64> = (0..n * n).map(|k| a.data[k] * col_scale[k % n]).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| lu[x * n + k].abs().total_cmp(&lu[y * n + k].abs()))
                .unwrap_or(k);
            if lu[p * n + k] == 0.0 || !lu[p * n + k].is_finite() {
                return Err(Error::Singular { context: "LU factorization" });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                for j in k + 1..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        let mut out = Self {
            n,
            lu,
            perm,
            col_scale,
            original: a.clone(),
            condition: f64::NAN,
        };
        out.condition = out.estimate_condition();
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// 1-norm condition estimate of the equilibrated matrix, from an
    /// explicit inverse (the systems here are tiny).
    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn estimate_condition(&self) -> f64 {
        let n = self.n;
        let norm1 = |cols: &dyn Fn(usize, usize) -> f64| -> f64 {
            (0..n)
                .map(|j| (0..n).map(|i| cols(i, j).abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let scaled = |i: usize, j: usize| self.original[(i, j)] * self.col_scale[j];
        let mut inv = vec![0.0; n * n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let x = self.solve_scaled(&e);
            for i in 0..n {
                inv[i * n + j] = x[i];
            }
        }
        norm1(&scaled) * norm1(&|i, j| inv[i * n + j])
    }

    // Solves (A * diag(col_scale)) y = b.
    fn solve_scaled(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * y[j]).sum();
            y[i] = (y[i] - s) / self.lu[i * n + i];
        }
        y
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let unscale = |y: Vec<f64>| -> Vec<f64> {
            y.into_iter().zip(&self.col_scale).map(|(v, s)| v * s).collect()
        };
        let mut x = unscale(self.solve_scaled(b));
        let ax = self.original.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = unscale(self.solve_scaled(&r));
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        x
    }
}

/// Determinant of a small complex matrix (row-major, `n x n`) by Gaussian
/// elimination with partial pivoting.
pub fn complex_det(n: usize, mut a: Vec<Complex64>) -> Complex64 {
    assert_eq!(a.len(), n * n);
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| a[x * n + k].norm().total_cmp(&a[y * n + k].norm()))
            .unwrap_or(k);
        if a[p * n + k].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            det = -det;
        }
        let pivot = a[k * n + k];
        det *= pivot;
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            for j in k + 1..n {
                let t = a[k * n + j];
                a[i * n + j] -= f * t;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lu_solves_small_system() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let lu = Lu::new(&a).unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        let back = a.mul_vec(&x);
        for (b, e) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(*b, e, epsilon = 1e-14);
        }
        assert!(lu.condition() > 1.0 && lu.condition() < 10.0);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(Lu::new(&a), Err(Error::Singular { .. })));
    }

    #[test]
    fn complex_det_matches_2x2_formula() {
        let a = vec![
            Complex64::new(1.0, 1.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(3.0, 0.5),
        ];
        let expected = a[0] * a[3] - a[1] * a[2];
        let d = complex_det(2, a);
        assert!((d - expected).norm() < 1e-14);
    }
}
