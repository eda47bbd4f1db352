//! Shared numeric kernels: moments, correlation, quantiles and least squares.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    data: Vec<F>,
    rows: usize,
    cols: usize,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            data: vec![F::zero(); rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            data: rows.iter().flatten().copied().collect(),
            rows: rows.len(),
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(F::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }
}

pub fn mean<F: Real>(x: &[F]) -> F {
    assert!(!x.is_empty(), "mean of empty slice");
    x.iter().copied().sum::<F>() / F::of_usize(x.len())
}

/// Sample variance (n-1 denominator). Returns 0 for slices of length < 2.
pub fn variance<F: Real>(x: &[F]) -> F {
    if x.len() < 2 {
        return F::zero();
    }
    let m = mean(x);
    let ss = x
        .iter()
        .map(|v| (*v - m) * (*v - m))
        .fold(F::zero(), |a, b| a + b);
    ss / F::of_usize(x.len() - 1)
}

pub fn std_dev<F: Real>(x: &[F]) -> F {
    variance(x).sqrt()
}

/// True when all entries are bitwise-equal to the first (robust constant test).
pub fn is_constant<F: Real>(x: &[F]) -> bool {
    x.iter().all(|v| *v == x[0])
}

/// Pearson correlation. `None` when either series is constant.
pub fn pearson<F: Real>(x: &[F], y: &[F]) -> Option<F> {
    assert_eq!(x.len(), y.len(), "pearson: length mismatch");
    if x.len() < 2 || is_constant(x) || is_constant(y) {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = F::zero();
    let mut sxx = F::zero();
    let mut syy = F::zero();
    for (a, b) in x.iter().zip(y) {
        let dx = *a - mx;
        let dy = *b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= F::zero() || syy <= F::zero() {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Median with midpoint-of-middle-two for even counts.
pub fn median<F: Real>(x: &[F]) -> F {
    assert!(!x.is_empty(), "median of empty slice");
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median: non-finite value"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / F::of(2.0)
    }
}

/// Linear-interpolation quantile (R type 7). `p` in [0, 1].
pub fn quantile<F: Real>(x: &[F], p: f64) -> F {
    assert!(!x.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&p), "quantile: p out of range");
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("quantile: non-finite value"));
    let h = (v.len() as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = F::of(h - lo as f64);
    v[lo] + (v[hi] - v[lo]) * frac
}

/// Ordinary least squares via Householder QR.
#[derive(Debug, Clone)]
pub struct Ols<F> {
    pub coefficients: Vec<F>,
    pub fitted: Vec<F>,
    pub residuals: Vec<F>,
    /// Residual sum of squares.
    pub ssr: F,
    /// Upper-triangular factor of the design, for standard errors.
    r: Matrix<F>,
    n: usize,
    p: usize,
}

impl<F: Real> Ols<F> {
    /// Fits `y ~ x` (no implicit intercept; include a ones column if wanted).
    ///
    /// Errors on rank-deficient designs or when `n < p`.
    pub fn fit(x: &Matrix<F>, y: &[F]) -> Result<Self> {
        let n = x.rows();
        let p = x.cols();
        if y.len() != n {
            return Err(Error::numerical("ols: response length mismatch"));
        }
        if n < p || p == 0 {
            return Err(Error::numerical(format!(
                "ols: need at least as many rows ({n}) as columns ({p})"
            )));
        }
        let mut a = x.clone();
        let mut qty = y.to_vec();

        // Householder reflections applied to [A | y].
        for k in 0..p {
            let mut norm = F::zero();
            for i in k..n {
                let v = a.get(i, k);
                norm = norm + v * v;
            }
            let norm = norm.sqrt();
            if norm == F::zero() {
                continue;
            }
            let akk = a.get(k, k);
            let alpha = if akk >= F::zero() { -norm } else { norm };
            // v = column - alpha*e1, stored temporarily in the column
            let mut beta = F::zero();
            a.set(k, k, akk - alpha);
            for i in k..n {
                let v = a.get(i, k);
                beta = beta + v * v;
            }
            if beta > F::zero() {
                // Apply H = I - 2 v v^T / beta to remaining columns and y.
                for j in (k + 1)..p {
                    let mut dot = F::zero();
                    for i in k..n {
                        dot = dot + a.get(i, k) * a.get(i, j);
                    }
                    let scale = F::of(2.0) * dot / beta;
                    for i in k..n {
                        let v = a.get(i, j) - scale * a.get(i, k);
                        a.set(i, j, v);
                    }
                }
                let mut dot = F::zero();
                for i in k..n {
                    dot = dot + a.get(i, k) * qty[i];
                }
                let scale = F::of(2.0) * dot / beta;
                for i in k..n {
                    qty[i] = qty[i] - scale * a.get(i, k);
                }
            }
            a.set(k, k, alpha);
            for i in (k + 1)..n {
                a.set(i, k, F::zero());
            }
        }

        let mut r = Matrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                r.set(i, j, a.get(i, j));
            }
        }
        let dmax = (0..p)
            .map(|i| r.get(i, i).abs())
            .fold(F::zero(), |m, v| if v > m { v } else { m });
        let tol = dmax * F::epsilon() * F::of_usize(100 * n.max(1));
        if dmax == F::zero() || (0..p).any(|i| r.get(i, i).abs() < tol) {
            return Err(Error::numerical("ols: singular design matrix"));
        }

        // Back-substitute R beta = (Q^T y)[..p]
        let mut coefficients = vec![F::zero(); p];
        for i in (0..p).rev() {
            let mut s = qty[i];
            for j in (i + 1)..p {
                s = s - r.get(i, j) * coefficients[j];
            }
            coefficients[i] = s / r.get(i, i);
        }

        let fitted = x.mul_vec(&coefficients);
        let residuals: Vec<F> = y.iter().zip(&fitted).map(|(a, b)| *a - *b).collect();
        let ssr = residuals.iter().map(|e| *e * *e).sum();
        Ok(Ols {
            coefficients,
            fitted,
            residuals,
            ssr,
            r,
            n,
            p,
        })
    }

    /// Error variance estimate `ssr / (n - p)`.
    pub fn sigma2(&self) -> F {
        self.ssr / F::of_usize(self.n - self.p)
    }

    /// Diagonal entry `j` of `(X^T X)^{-1}`.
    pub fn xtx_inv_diag(&self, j: usize) -> F {
        // (X^T X)^{-1} = R^{-1} R^{-T}; entry jj = || R^{-T} e_j ||^2.
        let p = self.p;
        let mut z = vec![F::zero(); p];
        for i in 0..p {
            let rhs = if i == j { F::one() } else { F::zero() };
            let mut s = rhs;
            for k in 0..i {
                s = s - self.r.get(k, i) * z[k];
            }
            z[i] = s / self.r.get(i, i);
        }
        z.iter().map(|v| *v * *v).sum()
    }

    /// t-statistic of coefficient `j` against zero.
    pub fn t_stat(&self, j: usize) -> F {
        let se = (self.sigma2() * self.xtx_inv_diag(j)).sqrt();
        self.coefficients[j] / se
    }

    pub fn n_obs(&self) -> usize {
        self.n
    }

    pub fn n_params(&self) -> usize {
        self.p
    }
}
