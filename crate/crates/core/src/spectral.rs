//! The tridiagonal linearization matrix M of the deviation system, its exact
//! spectrum, and coordinates in its eigenbasis.
//!
//! M has entries mᵢ,ᵢ₋₁ = σᵢ₋₁, mᵢ,ᵢ = −(σᵢ₋₁+σᵢ), mᵢ,ᵢ₊₁ = σᵢ with
//! σᵢ = i(k−i)/2. Conjugating the column-zero-sum variants M_k^j by the
//! lower-triangular ones matrix peels off one eigenvalue −j per level, which
//! yields the spectrum {−i(i−1)/2} exactly (integer arithmetic, no floating
//! point). Eigenvectors are recovered by inverse iteration with deflation.

use crate::error::{LabError, Result};
use crate::numerics::Banded;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// σᵢ = i(k−i)/2 for i = 0..k.
fn sigmas(k: usize) -> Vec<f64> {
    (0..=k).map(|i| (i * (k - i)) as f64 / 2.0).collect()
}

/// The k×k matrix M as a dense row-major matrix.
pub fn build_m(k: usize) -> Result<Vec<Vec<f64>>> {
    if k < 2 {
        return Err(LabError::invalid(format!("k must be at least 2, got {k}")));
    }
    let sigma = sigmas(k);
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        m[i][i] = -(sigma[i] + sigma[i + 1]);
        if i > 0 {
            m[i][i - 1] = sigma[i];
        }
        if i + 1 < k {
            m[i][i + 1] = sigma[i + 1];
        }
    }
    Ok(m)
}

fn tridiag_of_m(k: usize) -> (Vec<f64>, Vec<f64>) {
    let sigma = sigmas(k);
    let diag: Vec<f64> = (0..k).map(|i| -(sigma[i] + sigma[i + 1])).collect();
    let off: Vec<f64> = (1..k).map(|i| sigma[i]).collect();
    (diag, off)
}

/// Exact eigenvalues from the conjugation-chain recursion, as integers:
/// spec(M_k^k) = {0} and spec(M_k^j) = {0} ∪ (−j + spec(M_k^{j+1})).
pub fn exact_eigenvalues(k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(LabError::invalid(format!("k must be at least 2, got {k}")));
    }
    let mut eigs: Vec<i64> = vec![0];
    for j in (1..k).rev() {
        let mut next = Vec::with_capacity(eigs.len() + 1);
        next.push(0i64);
        next.extend(eigs.iter().map(|&l| l - j as i64));
        eigs = next;
    }
    let mut eigs: Vec<f64> = eigs.into_iter().map(|v| v as f64).collect();
    eigs.sort_by(|a, b| b.total_cmp(a)); // descending: 0, −1, −3, …
    Ok(eigs)
}

/// Spectrum of M with ℓ∞-normalized eigenvectors (first nonzero component
/// positive; e₁ = (1, …, 1) exactly).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralData {
    pub k: usize,
    pub matrix: Vec<Vec<f64>>,
    /// −mᵢ = −i(i−1)/2, descending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// Squared ℓ² norms of the eigenvectors; with orthogonality these give the
    /// inverse change of basis.
    pub norms2: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tridiag_matvec(diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut v = diag[i] * x[i];
            if i > 0 {
                v += off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += off[i] * x[i + 1];
            }
            v
        })
        .collect()
}

/// Exact spectrum plus eigenvectors; residual ‖Me − λe‖∞ ≤ 1e−10 enforced.
pub fn exact_spectrum(k: usize) -> Result<SpectralData> {
    let matrix = build_m(k)?;
    let eigenvalues = exact_eigenvalues(k)?;
    let (diag, off) = tridiag_of_m(k);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);

    let mut eigenvectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    // kernel vector is exact by the zero row sums
    eigenvectors.push(vec![1.0; k]);

    for (idx, &lam) in eigenvalues.iter().enumerate().skip(1) {
        let mut v = inverse_iteration(&diag, &off, lam, &eigenvectors, &mut rng)?;
        // deflate once more and fix the sign convention
        orthogonalize(&mut v, &eigenvectors);
        normalize_linf(&mut v);
        let res = residual_inf(&diag, &off, lam, &v);
        if res > 1e-10 {
            return Err(LabError::invalid(format!(
                "eigenvector residual {res:.3e} for eigenvalue {lam} (index {idx}, k = {k})"
            )));
        }
        eigenvectors.push(v);
    }

    let norms2: Vec<f64> = eigenvectors.iter().map(|e| dot(e, e)).collect();
    Ok(SpectralData { k, matrix, eigenvalues, eigenvectors, norms2 })
}

fn inverse_iteration(
    diag: &[f64],
    off: &[f64],
    lam: f64,
    found: &[Vec<f64>],
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let n = diag.len();
    let scale = diag.iter().chain(off).fold(1.0f64, |m, v| m.max(v.abs()));
    let shifted: Vec<f64> = diag.iter().map(|&d| d - lam).collect();
    let lu = Banded::tridiagonal(off, &shifted, off)
        .factor(Some(1e-13 * scale))
        .expect("floored factorization cannot fail");

    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    orthogonalize(&mut v, found);
    for _ in 0..12 {
        let mut w = lu.solve(&v);
        orthogonalize(&mut w, found);
        let norm = dot(&w, &w).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            v = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            continue;
        }
        for x in &mut w {
            *x /= norm;
        }
        let res = residual_inf(diag, off, lam, &w);
        v = w;
        if res <= 1e-12 {
            break;
        }
    }
    Ok(v)
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for e in basis {
        let c = dot(v, e) / dot(e, e);
        for (x, y) in v.iter_mut().zip(e) {
            *x -= c * y;
        }
    }
}

fn normalize_linf(v: &mut [f64]) {
    let maxabs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let first_sign = v
        .iter()
        .find(|x| x.abs() > 1e-8 * maxabs)
        .map(|x| x.signum())
        .unwrap_or(1.0);
    for x in v.iter_mut() {
        *x *= first_sign / maxabs;
    }
}

fn residual_inf(diag: &[f64], off: &[f64], lam: f64, v: &[f64]) -> f64 {
    let mv = tridiag_matvec(diag, off, v);
    let vinf = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    mv.iter()
        .zip(v)
        .map(|(a, b)| (a - lam * b).abs())
        .fold(0.0f64, f64::max)
        / vinf
}

impl SpectralData {
    /// Coordinates in the eigenbasis: ξ = Σ φᵢ eᵢ.
    pub fn to_phi(&self, xi: &[f64]) -> Vec<f64> {
        assert_eq!(xi.len(), self.k);
        self.eigenvectors
            .iter()
            .zip(&self.norms2)
            .map(|(e, &n2)| dot(xi, e) / n2)
            .collect()
    }

    pub fn from_phi(&self, phi: &[f64]) -> Vec<f64> {
        assert_eq!(phi.len(), self.k);
        let mut xi = vec![0.0; self.k];
        for (e, &c) in self.eigenvectors.iter().zip(phi) {
            for (x, &v) in xi.iter_mut().zip(e) {
                *x += c * v;
            }
        }
        xi
    }

    /// Spectral gap −m₂ (equals −1 for every k ≥ 2).
    pub fn gap(&self) -> f64 {
        self.eigenvalues[1]
    }
}

/// (Mξ, ξ); equals −Σᵢ σᵢ(ξᵢ₊₁−ξᵢ)² by summation by parts.
pub fn quadratic_form(k: usize, xi: &[f64]) -> Result<f64> {
    if xi.len() != k {
        return Err(LabError::invalid("dimension mismatch"));
    }
    let (diag, off) = tridiag_of_m(k);
    let mxi = tridiag_matvec(&diag, &off, xi);
    Ok(dot(&mxi, xi))
}

/// Number of eigenvalues of a symmetric tridiagonal matrix strictly below x
/// (Sturm sequence via the LDLᵀ pivot recurrence).
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    let scale = diag.iter().chain(off).fold(1.0f64, |m, v| m.max(v.abs()));
    let guard = 1e-300f64.max(1e-18 * scale);
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let qs = if q.abs() < guard { if q >= 0.0 { guard } else { -guard } } else { q };
        q = (diag[i] - x) - off[i - 1] * off[i - 1] / qs;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// All eigenvalues of a symmetric tridiagonal matrix by Sturm bisection,
/// ascending. Independent of the exact-recursion path; used as its oracle.
pub fn sturm_eigenvalues(diag: &[f64], off: &[f64], tol: f64) -> Vec<f64> {
    let n = diag.len();
    // Gershgorin enclosure
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i < n - 1 {
            r += off[i].abs();
        }
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    lo -= 1.0;
    hi += 1.0;
    (0..n)
        .map(|j| {
            // smallest x with count(x) ≥ j+1
            let (mut a, mut b) = (lo, hi);
            while b - a > tol {
                let mid = 0.5 * (a + b);
                if sturm_count(diag, off, mid) >= j + 1 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Sturm eigenvalues of M itself (ascending).
pub fn sturm_eigenvalues_of_m(k: usize, tol: f64) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(LabError::invalid("k must be at least 2"));
    }
    let (diag, off) = tridiag_of_m(k);
    Ok(sturm_eigenvalues(&diag, &off, tol))
}
