//! Accumulated normal equations for small least-squares problems.

/// Running X'X, X'y and y'y for a regression with `dim` columns.
#[derive(Debug, Clone)]
pub(crate) struct Gram {
    dim: usize,
    xtx: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
    count: usize,
}

impl Gram {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            xtx: vec![0.0; dim * dim],
            xty: vec![0.0; dim],
            yty: 0.0,
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add(&mut self, row: &[f64], y: f64) {
        debug_assert_eq!(row.len(), self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.xtx[i * self.dim + j] += row[i] * row[j];
            }
            self.xty[i] += row[i] * y;
        }
        self.yty += y * y;
        self.count += 1;
    }

    /// `self - other`, for suffix sums built from totals and prefixes.
    pub fn minus(&self, other: &Gram) -> Gram {
        Gram {
            dim: self.dim,
            xtx: self.xtx.iter().zip(&other.xtx).map(|(a, b)| a - b).collect(),
            xty: self.xty.iter().zip(&other.xty).map(|(a, b)| a - b).collect(),
            yty: self.yty - other.yty,
            count: self.count - other.count,
        }
    }

    /// Least-squares coefficients, or `None` when X'X is numerically singular.
    pub fn solve(&self) -> Option<Vec<f64>> {
        let n = self.dim;
        let max_diag = (0..n).map(|i| self.xtx[i * n + i]).fold(0.0, f64::max);
        if !max_diag.is_finite() || max_diag <= 0.0 {
            return None;
        }
        let tol = 1e-12 * max_diag;
        // LDL' factorization; exact for a single regressor
        let mut l = vec![0.0; n * n];
        let mut d = vec![0.0; n];
        for j in 0..n {
            let mut dj = self.xtx[j * n + j];
            for k in 0..j {
                dj -= l[j * n + k] * l[j * n + k] * d[k];
            }
            if dj <= tol {
                return None;
            }
            d[j] = dj;
            l[j * n + j] = 1.0;
            for i in j + 1..n {
                let mut s = self.xtx[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k] * d[k];
                }
                l[i * n + j] = s / dj;
            }
        }
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut s = self.xty[i];
            for k in 0..i {
                s -= l[i * n + k] * z[k];
            }
            z[i] = s;
        }
        let mut beta = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = z[i] / d[i];
            for k in i + 1..n {
                s -= l[k * n + i] * beta[k];
            }
            beta[i] = s;
        }
        Some(beta)
    }

    /// Residual sum of squares at the least-squares solution `beta`.
    pub fn sse_at(&self, beta: &[f64]) -> f64 {
        let fitted: f64 = beta.iter().zip(&self.xty).map(|(b, v)| b * v).sum();
        (self.yty - fitted).max(0.0)
    }
}
