//! Banded linear solves (bandwidth ≤ 2 is all the artifact needs).
//!
//! LU with partial pivoting in band storage; factor once, solve many. Row
//! swaps widen the upper band by the lower bandwidth, which the storage
//! accounts for up front.

use crate::error::{LabError, Result};

/// Band matrix in row-major band storage. Row i holds columns
/// [i − kl, i + ku + kl]; the extra kl columns absorb pivoting fill.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Banded { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    /// Tridiagonal convenience constructor from (sub, diag, super).
    pub fn tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64]) -> Self {
        let n = diag.len();
        assert_eq!(sub.len(), n - 1);
        assert_eq!(sup.len(), n - 1);
        let mut m = Banded::new(n, 1, 1);
        for i in 0..n {
            m.set(i, i, diag[i]);
            if i > 0 {
                m.set(i, i - 1, sub[i - 1]);
            }
            if i + 1 < n {
                m.set(i, i + 1, sup[i]);
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> Option<usize> {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku + self.kl).min(self.n - 1);
        if j < lo || j > hi {
            return None;
        }
        Some(i * self.width + (j + self.kl - i))
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = self
            .offset(i, j)
            .unwrap_or_else(|| panic!("({i},{j}) outside band kl={} ku={}", self.kl, self.ku));
        self.data[idx] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let idx = self
            .offset(i, j)
            .unwrap_or_else(|| panic!("({i},{j}) outside band kl={} ku={}", self.kl, self.ku));
        self.data[idx] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.offset(i, j).map(|idx| self.data[idx]).unwrap_or(0.0)
    }

    /// y = A x with the band structure.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += self.get(i, j) * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// LU factorization with partial pivoting. Near-singular pivots are an
    /// error unless `pivot_floor` is given, in which case they are replaced by
    /// ±pivot_floor (inverse-iteration use).
    pub fn factor(mut self, pivot_floor: Option<f64>) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.ku + kl;
        // per-row scales: row magnitudes can span many orders (e.g. cosh²χ
        // coefficients), so near-singularity must be judged locally
        let mut row_scale: Vec<f64> = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(n - 1);
                (lo..=hi).fold(0.0f64, |m, j| m.max(self.get(i, j).abs()))
            })
            .collect();
        let mut pivots = vec![0usize; n];

        for k in 0..n {
            let imax = (k + kl).min(n - 1);
            let mut r = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=imax {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    r = i;
                }
            }
            pivots[k] = r;
            if r != k {
                let hi = (k + reach).min(n - 1);
                for j in k..=hi {
                    let a = self.offset(k, j).unwrap();
                    let b = self.offset(r, j).unwrap();
                    self.data.swap(a, b);
                }
                row_scale.swap(k, r);
            }
            let mut piv = self.get(k, k);
            if piv.abs() <= 1e-14 * row_scale[k] {
                match pivot_floor {
                    Some(floor) => {
                        piv = if piv >= 0.0 { floor } else { -floor };
                        let idx = self.offset(k, k).unwrap();
                        self.data[idx] = piv;
                    }
                    None => {
                        return Err(LabError::SingularPivot { row: k, magnitude: piv.abs() })
                    }
                }
            }
            let hi = (k + reach).min(n - 1);
            for i in k + 1..=imax {
                let m = self.get(i, k) / piv;
                let idx = self.offset(i, k).unwrap();
                self.data[idx] = m;
                if m != 0.0 {
                    row_scale[i] = row_scale[i].max(m.abs() * row_scale[k]);
                    for j in k + 1..=hi {
                        let akj = self.get(k, j);
                        if akj != 0.0 {
                            let idx = self.offset(i, j).unwrap();
                            self.data[idx] -= m * akj;
                        }
                    }
                }
            }
        }
        Ok(BandedLu { mat: self, pivots })
    }
}

/// Factored form; `solve` is O(n·bandwidth).
#[derive(Debug, Clone)]
pub struct BandedLu {
    mat: Banded,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.mat.n;
        let kl = self.mat.kl;
        let reach = self.mat.ku + kl;
        assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        for k in 0..n {
            let r = self.pivots[k];
            if r != k {
                x.swap(k, r);
            }
            let imax = (k + kl).min(n - 1);
            for i in k + 1..=imax {
                x[i] -= self.mat.get(i, k) * x[k];
            }
        }
        for k in (0..n).rev() {
            let hi = (k + reach).min(n - 1);
            let mut acc = x[k];
            for j in k + 1..=hi {
                acc -= self.mat.get(k, j) * x[j];
            }
            x[k] = acc / self.mat.get(k, k);
        }
        x
    }
}

/// One-shot banded solve.
pub fn solve_banded(matrix: &Banded, rhs: &[f64]) -> Result<Vec<f64>> {
    Ok(matrix.clone().factor(None)?.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent dense Gaussian-elimination oracle (test-only).
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
        let mut x = b.to_vec();
        for k in 0..n {
            let (r, _) = (k..n)
                .map(|i| (i, m[i][k].abs()))
                .max_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            m.swap(k, r);
            x.swap(k, r);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in k + 1..n {
                acc -= m[k][j] * x[j];
            }
            x[k] = acc / m[k][k];
        }
        x
    }

    #[test]
    fn identity_returns_rhs() {
        let mut a = Banded::new(4, 1, 1);
        for i in 0..4 {
            a.set(i, i, 1.0);
        }
        let rhs = vec![3.0, -1.0, 2.5, 0.0];
        let x = solve_banded(&a, &rhs).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn discrete_poisson_matches_dense_oracle() {
        // Toeplitz (−2, 1) of size 5, rhs = e1.
        let n = 5;
        let a = Banded::tridiagonal(&[1.0; 4], &[-2.0; 5], &[1.0; 4]);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = -2.0;
            if i > 0 {
                dense[i][i - 1] = 1.0;
            }
            if i + 1 < n {
                dense[i][i + 1] = 1.0;
            }
        }
        let mut rhs = vec![0.0; n];
        rhs[0] = 1.0;
        let x = solve_banded(&a, &rhs).unwrap();
        let want = dense_solve(&dense, &rhs);
        for (v, w) in x.iter().zip(&want) {
            assert!((v - w).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_reports_row() {
        let mut a = Banded::new(3, 1, 1);
        a.set(0, 0, 1.0);
        a.set(2, 2, 1.0);
        // row 1 left as all zeros
        match solve_banded(&a, &[1.0, 1.0, 1.0]) {
            Err(LabError::SingularPivot { row, .. }) => assert!(row <= 2),
            other => panic!("expected singular pivot, got {other:?}"),
        }
    }

    #[test]
    fn residual_small_on_well_conditioned_system() {
        let n = 64;
        let sub = vec![1.0; n - 1];
        let sup = vec![1.25; n - 1];
        let diag = vec![4.0; n];
        let a = Banded::tridiagonal(&sub, &diag, &sup);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = solve_banded(&a, &rhs).unwrap();
        let ax = a.matvec(&x);
        let rhs_inf = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let res = ax
            .iter()
            .zip(&rhs)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max);
        assert!(res <= 1e-10 * rhs_inf, "residual {res}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn agrees_with_dense_oracle_on_random_tridiagonal(
            n in 2usize..64,
            seeds in proptest::collection::vec(-1.0f64..1.0, 64 * 3 + 64),
        ) {
            // Diagonally dominant => well-conditioned.
            let mut a = Banded::new(n, 1, 1);
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                let lo = seeds[3 * i];
                let up = seeds[3 * i + 1];
                let dg = 3.0 + seeds[3 * i + 2];
                dense[i][i] = dg;
                a.set(i, i, dg);
                if i > 0 {
                    dense[i][i - 1] = lo;
                    a.set(i, i - 1, lo);
                }
                if i + 1 < n {
                    dense[i][i + 1] = up;
                    a.set(i, i + 1, up);
                }
            }
            let rhs: Vec<f64> = seeds[64 * 3..64 * 3 + n].to_vec();
            let x = solve_banded(&a, &rhs).unwrap();
            let want = dense_solve(&dense, &rhs);
            let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (u, v) in x.iter().zip(&want) {
                prop_assert!((u - v).abs() <= 1e-10 * scale);
            }
        }
    }
}
