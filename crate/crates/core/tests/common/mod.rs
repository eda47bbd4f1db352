//! Shared oracles for integration tests. Everything here recomputes results
//! by an independent route (dense linear algebra, enumeration) and must not
//! call into the implementation paths it checks.

#![allow(dead_code)]

/// Dense Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(*rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        assert!(m[col][col].abs() > 1e-300, "singular dense system");
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = m[row][col] / m[col][col];
            for k in col..=n {
                let v = m[col][k];
                m[row][k] -= factor * v;
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

/// Smoothing-spline oracle: direct dense solve of the penalized normal
/// equations (I + lambda K) f = y with K = Q R^{-1} Q^T built explicitly.
pub mod spline_oracle {
    use super::solve_dense;

    fn q_matrix(n: usize) -> Vec<Vec<f64>> {
        let m = n - 2;
        let mut q = vec![vec![0.0; m]; n];
        for j in 0..m {
            q[j][j] = 1.0;
            q[j + 1][j] = -2.0;
            q[j + 2][j] = 1.0;
        }
        q
    }

    fn r_matrix(n: usize) -> Vec<Vec<f64>> {
        let m = n - 2;
        let mut r = vec![vec![0.0; m]; m];
        for j in 0..m {
            r[j][j] = 2.0 / 3.0;
            if j + 1 < m {
                r[j][j + 1] = 1.0 / 6.0;
                r[j + 1][j] = 1.0 / 6.0;
            }
        }
        r
    }

    /// K = Q R^{-1} Q^T so that the roughness penalty is f^T K f.
    pub fn penalty_matrix(n: usize) -> Vec<Vec<f64>> {
        let m = n - 2;
        let q = q_matrix(n);
        let r = r_matrix(n);
        // Z = R^{-1} Q^T, column by column.
        let mut z = vec![vec![0.0; n]; m];
        for col in 0..n {
            let rhs: Vec<f64> = (0..m).map(|j| q[col][j]).collect();
            let sol = solve_dense(&r, &rhs);
            for j in 0..m {
                z[j][col] = sol[j];
            }
        }
        let mut k = vec![vec![0.0; n]; n];
        for i in 0..n {
            for jcol in 0..n {
                let mut s = 0.0;
                for l in 0..m {
                    s += q[i][l] * z[l][jcol];
                }
                k[i][jcol] = s;
            }
        }
        k
    }

    /// Returns (fitted values, interior second derivatives).
    pub fn dense_fit(y: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let n = y.len();
        let m = n - 2;
        let k = penalty_matrix(n);
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = lambda * k[i][j] + if i == j { 1.0 } else { 0.0 };
            }
        }
        let fitted = solve_dense(&a, y);

        // gamma = R^{-1} Q^T f.
        let q = q_matrix(n);
        let qtf: Vec<f64> = (0..m)
            .map(|j| (0..n).map(|i| q[i][j] * fitted[i]).sum())
            .collect();
        let gamma = solve_dense(&r_matrix(n), &qtf);
        (fitted, gamma)
    }

    /// Penalized objective of candidate knot values `g` against data `y`.
    pub fn objective(y: &[f64], g: &[f64], lambda: f64) -> f64 {
        let n = y.len();
        let k = penalty_matrix(n);
        let sse: f64 = y.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
        let mut penalty = 0.0;
        for i in 0..n {
            for j in 0..n {
                penalty += g[i] * k[i][j] * g[j];
            }
        }
        sse + lambda * penalty
    }

    /// Linear extrapolation one step past the boundary, from oracle output.
    pub fn dense_one_step(y: &[f64], lambda: f64) -> f64 {
        let (fitted, gamma) = dense_fit(y, lambda);
        let n = fitted.len();
        let slope = fitted[n - 1] - fitted[n - 2] + gamma[gamma.len() - 1] / 6.0;
        fitted[n - 1] + slope
    }
}
