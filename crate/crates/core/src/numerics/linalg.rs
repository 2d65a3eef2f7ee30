use crate::numerics::Real;

/// Dense square matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<F> {
    n: usize,
    data: Vec<F>,
}

impl<F: Real> SquareMatrix<F> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![F::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    /// Unit diagonal with every off-diagonal entry equal to `rho`.
    pub fn equicorrelated(n: usize, rho: F) -> Self {
        let mut m = Self::identity(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m[(i, j)] = rho;
                }
            }
        }
        m
    }

    /// Builds from rows; `None` unless the rows form a square matrix.
    pub fn from_rows(rows: &[Vec<F>]) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max_asymmetry(&self) -> F {
        let mut worst = F::zero();
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Lower-triangular factor `L` with `L L^T = self`, tolerating a
    /// positive semi-definite matrix: a pivot within `tol` of zero yields a
    /// zero column. Returns `None` when a pivot falls below `-tol`.
    pub fn cholesky_semidefinite(&self, tol: F) -> Option<SquareMatrix<F>> {
        let n = self.n;
        let mut l = SquareMatrix::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if d < -tol || !d.is_finite() {
                return None;
            }
            if d <= tol {
                // Rank-deficient direction: the rest of the column must vanish too.
                for i in (j + 1)..n {
                    let mut s = self[(i, j)];
                    for k in 0..j {
                        s = s - l[(i, k)] * l[(j, k)];
                    }
                    if s.abs() > tol.sqrt() {
                        return None;
                    }
                }
                continue;
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(l)
    }

    /// `y = L x` for a lower-triangular `self`, writing into `out`.
    #[inline]
    pub fn lower_mul_into(&self, x: &[F], out: &mut [F]) {
        for i in 0..self.n {
            let row = self.row(i);
            let mut s = F::zero();
            for k in 0..=i {
                s = s + row[k] * x[k];
            }
            out[i] = s;
        }
    }
}

impl<F> std::ops::Index<(usize, usize)> for SquareMatrix<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.n + j]
    }
}

impl<F> std::ops::IndexMut<(usize, usize)> for SquareMatrix<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.n + j]
    }
}
