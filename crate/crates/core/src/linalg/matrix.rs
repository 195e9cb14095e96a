use super::LinalgError;

/// Dense n-by-n real matrix, row-major storage.
///
/// Entries are validated to be finite at construction. Dimensions in this
/// crate stay small (the largest built-in system is a few dozen states), so
/// everything is plain `Vec<f64>` with direct elimination algorithms.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if n == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        if data.len() != n * n {
            return Err(LinalgError::BadEntryCount {
                n,
                expected: n * n,
                got: data.len(),
            });
        }
        for (idx, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(LinalgError::NonFinite {
                    row: idx / n,
                    col: idx % n,
                });
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(LinalgError::BadEntryCount {
                    n,
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(n, data)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &d) in entries.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.n && col < self.n);
        self.data[row * self.n + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.data[row * self.n + col] = value;
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> SquareMatrix {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Matrix product; panics on dimension mismatch (programmer error).
    pub fn mul(&self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n, "matrix product dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * rhs.get(k, j);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.n, v.len(), "matrix-vector dimension mismatch");
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.get(i, j) * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n, "matrix sum dimension mismatch");
        let data = self
            .data
            .iter()
            .zip(rhs.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        SquareMatrix { n: self.n, data }
    }

    pub fn scale(&self, factor: f64) -> SquareMatrix {
        SquareMatrix {
            n: self.n,
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }

    /// Adds `c` to every diagonal entry.
    pub fn shift_diagonal(&self, c: f64) -> SquareMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            out.set(i, i, out.get(i, i) + c);
        }
        out
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<LuDecomposition, LinalgError> {
        let n = self.n;
        let mut lu = self.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular_col = None;
        let scale = self.max_abs_entry().max(1.0);
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_val = lu[col * n + col].abs();
            for row in col + 1..n {
                let v = lu[row * n + col].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = row;
                }
            }
            if pivot_val <= f64::EPSILON * scale {
                singular_col.get_or_insert((col, pivot_val));
                continue;
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot_row * n + j);
                }
                piv.swap(col, pivot_row);
                sign = -sign;
            }
            let inv_pivot = 1.0 / lu[col * n + col];
            for row in col + 1..n {
                let factor = lu[row * n + col] * inv_pivot;
                lu[row * n + col] = factor;
                if factor != 0.0 {
                    for j in col + 1..n {
                        lu[row * n + j] -= factor * lu[col * n + j];
                    }
                }
            }
        }
        Ok(LuDecomposition {
            n,
            lu,
            piv,
            sign,
            singular_col,
        })
    }

    /// Determinant via LU; exactly singular matrices return 0.
    pub fn determinant(&self) -> f64 {
        let lu = self.lu().expect("lu of validated matrix");
        lu.determinant()
    }

    pub fn inverse(&self) -> Result<SquareMatrix, LinalgError> {
        let lu = self.lu()?;
        lu.require_nonsingular()?;
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for col in 0..n {
            e.fill(0.0);
            e[col] = 1.0;
            let x = lu.solve(&e);
            for row in 0..n {
                out.set(row, col, x[row]);
            }
        }
        Ok(out)
    }

    /// L1 condition number estimate `||A||_1 * ||A^-1||_1`; infinite when
    /// numerically singular.
    pub fn condition_l1(&self) -> f64 {
        let norm_a = self.induced_l1_norm();
        match self.inverse() {
            Ok(inv) => norm_a * inv.induced_l1_norm(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Maximum absolute column sum.
    pub fn induced_l1_norm(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0_f64, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn induced_linf_norm(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0_f64, f64::max)
    }
}

/// Result of `SquareMatrix::lu`. Tolerates exactly singular input so that
/// determinants of singular matrices come out as zero; `solve` and
/// `inverse` reject singular factorizations.
#[derive(Debug, Clone)]
pub struct LuDecomposition {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
    sign: f64,
    singular_col: Option<(usize, f64)>,
}

impl LuDecomposition {
    pub fn is_singular(&self) -> bool {
        self.singular_col.is_some()
    }

    fn require_nonsingular(&self) -> Result<(), LinalgError> {
        match self.singular_col {
            Some((col, pivot)) => Err(LinalgError::Singular { col, pivot }),
            None => Ok(()),
        }
    }

    pub fn determinant(&self) -> f64 {
        if self.is_singular() {
            return 0.0;
        }
        let mut det = self.sign;
        for i in 0..self.n {
            det *= self.lu[i * self.n + i];
        }
        det
    }

    /// Solves `A x = b`; the factorization must be nonsingular.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "rhs dimension mismatch");
        assert!(!self.is_singular(), "solve on singular factorization");
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }
}
