//! Soliton profiles and weighted-Sobolev machinery on the hyperbolic grid.
//!
//! A phase-space profile is the pair (w, ∂ₛw) sampled at χ nodes. All the
//! degenerate y-weights become smooth sech powers in χ:
//!
//!   ρ dy                    → sech^{4/(p−1)+2} χ dχ
//!   (∂_y w)²(1−y²) ρ dy     → (∂_χ w)² sech^{4/(p−1)} χ dχ
//!   κ(d, y)·(1−y²)^{1/(p−1)} → κ₀ cosh^{−2/(p−1)}(χ − ζ),  ζ = −artanh d,
//!
//! so solitons are translates of a fixed bump and quadrature is exponentially
//! accurate.

use crate::error::{LabError, Result};
use crate::numerics::HypGrid;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::sync::Arc;

/// κ₀ = (2(p+1)/(p−1)²)^{1/(p−1)}, the constant soliton.
pub fn kappa0(p: f64) -> f64 {
    (2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0))).powf(1.0 / (p - 1.0))
}

/// Soliton parameter pair (d, ν) with ν > −1 + |d|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonParam {
    pub d: f64,
    pub nu: f64,
}

impl SolitonParam {
    pub fn new(d: f64, nu: f64) -> Result<Self> {
        if !(d.abs() < 1.0) {
            return Err(LabError::invalid(format!("|d| must be below 1, got {d}")));
        }
        if !(nu > -1.0 + d.abs()) {
            return Err(LabError::invalid(format!(
                "nu must exceed −1+|d| = {}, got {nu}",
                -1.0 + d.abs()
            )));
        }
        Ok(SolitonParam { d, nu })
    }

    /// Hyperbolic center ζ = −artanh d.
    pub fn zeta(&self) -> f64 {
        -self.d.atanh()
    }

    /// d* = d/(1+ν).
    pub fn d_star(&self) -> f64 {
        self.d / (1.0 + self.nu)
    }

    /// ζ* = −artanh d*.
    pub fn zeta_star(&self) -> f64 {
        -self.d_star().atanh()
    }

    /// The conditioning ratio ν/(1−|d|) used by the continuity lemma.
    pub fn cond_ratio(&self) -> f64 {
        self.nu / (1.0 - self.d.abs())
    }
}

/// (w, ∂ₛw) on a hyperbolic grid.
#[derive(Debug, Clone)]
pub struct PhaseProfile {
    pub grid: Arc<HypGrid>,
    pub p: f64,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl PhaseProfile {
    pub fn new(grid: Arc<HypGrid>, p: f64, w1: Vec<f64>, w2: Vec<f64>) -> Result<Self> {
        if !(p > 1.0) {
            return Err(LabError::invalid(format!("p must exceed 1, got {p}")));
        }
        if w1.len() != grid.len() || w2.len() != grid.len() {
            return Err(LabError::GridMismatch(format!(
                "field lengths ({}, {}) vs grid {}",
                w1.len(),
                w2.len(),
                grid.len()
            )));
        }
        // truncation policy: the integration weight must be negligible at the
        // boundary before the grid is usable for norms
        let tail = grid.chi_max().cosh().powf(-(4.0 / (p - 1.0) + 2.0));
        if tail >= 1e-12 {
            return Err(LabError::invalid(format!(
                "chi_max = {} leaves boundary weight {tail:.3e} ≥ 1e−12 at p = {p}",
                grid.chi_max()
            )));
        }
        if w1.iter().chain(&w2).any(|v| !v.is_finite()) {
            return Err(LabError::invalid("profile values must be finite"));
        }
        Ok(PhaseProfile { grid, p, w1, w2 })
    }

    pub fn zero(grid: Arc<HypGrid>, p: f64) -> Result<Self> {
        let n = grid.len();
        PhaseProfile::new(grid, p, vec![0.0; n], vec![0.0; n])
    }

    /// Componentwise difference, on the same grid.
    pub fn diff(&self, other: &PhaseProfile) -> Result<PhaseProfile> {
        self.grid.ensure_same(&other.grid)?;
        let w1 = self.w1.iter().zip(&other.w1).map(|(a, b)| a - b).collect();
        let w2 = self.w2.iter().zip(&other.w2).map(|(a, b)| a - b).collect();
        PhaseProfile::new(self.grid.clone(), self.p, w1, w2)
    }

    pub fn scaled(&self, c: f64) -> PhaseProfile {
        PhaseProfile {
            grid: self.grid.clone(),
            p: self.p,
            w1: self.w1.iter().map(|v| c * v).collect(),
            w2: self.w2.iter().map(|v| c * v).collect(),
        }
    }
}

/// Quadrature weights for the two H-norm terms: `rho` carries ρ dy and `der`
/// carries the (1−y²)ρ dy factor that multiplies χ-derivatives.
#[derive(Debug, Clone)]
pub struct NormKit {
    pub rho: Vec<f64>,
    pub der: Vec<f64>,
}

impl NormKit {
    pub fn new(grid: &HypGrid, p: f64) -> NormKit {
        let h = grid.spacing();
        let n = grid.len();
        let e_rho = 4.0 / (p - 1.0) + 2.0;
        let e_der = 4.0 / (p - 1.0);
        let mut rho = Vec::with_capacity(n);
        let mut der = Vec::with_capacity(n);
        for (j, &chi) in grid.chi().iter().enumerate() {
            let trap = if j == 0 || j == n - 1 { 0.5 * h } else { h };
            let c = chi.cosh();
            rho.push(trap * c.powf(-e_rho));
            der.push(trap * c.powf(-e_der));
        }
        NormKit { rho, der }
    }
}

/// ‖(w₁, w₂)‖_H — the square root of ∫(w₁² + (w₁′)²(1−y²) + w₂²)ρ dy.
pub fn h_norm(profile: &PhaseProfile) -> f64 {
    let kit = NormKit::new(&profile.grid, profile.p);
    h_norm_sq_with(&kit, &profile.grid, &profile.w1, &profile.w2).sqrt()
}

pub(crate) fn h_norm_sq_with(kit: &NormKit, grid: &HypGrid, w1: &[f64], w2: &[f64]) -> f64 {
    let dw1 = grid.deriv_chi(w1);
    let mut acc = 0.0;
    for j in 0..grid.len() {
        acc += kit.rho[j] * (w1[j] * w1[j] + w2[j] * w2[j]) + kit.der[j] * dw1[j] * dw1[j];
    }
    acc
}

/// ‖r‖_{H₀} of a scalar profile (first-component norm).
pub fn h0_norm(grid: &HypGrid, p: f64, r: &[f64]) -> f64 {
    let kit = NormKit::new(grid, p);
    let dr = grid.deriv_chi(r);
    let mut acc = 0.0;
    for j in 0..grid.len() {
        acc += kit.rho[j] * r[j] * r[j] + kit.der[j] * dr[j] * dr[j];
    }
    acc.sqrt()
}

/// Stable 1 + d·y at a node: cosh(χ−ζ)/(coshχ coshζ) with ζ = −artanh d.
#[inline]
pub(crate) fn one_plus_dy(chi: f64, zeta: f64) -> f64 {
    (chi - zeta).cosh() / (chi.cosh() * zeta.cosh())
}

/// The soliton κ(d) as a phase profile (second component zero).
pub fn kappa(p: f64, d: f64, grid: &Arc<HypGrid>) -> Result<PhaseProfile> {
    if !(d.abs() < 1.0) {
        return Err(LabError::invalid(format!("|d| must be below 1, got {d}")));
    }
    let k0 = kappa0(p);
    let zeta = -d.atanh();
    let e = 2.0 / (p - 1.0);
    let w1: Vec<f64> = grid
        .chi()
        .iter()
        .map(|&chi| k0 * (chi.cosh() / (chi - zeta).cosh()).powf(e))
        .collect();
    let n = grid.len();
    PhaseProfile::new(grid.clone(), p, w1, vec![0.0; n])
}

/// The generalized soliton κ*(d, ν) = (κ₁*, ν ∂_ν κ₁*).
pub fn kappa_star(p: f64, d: f64, nu: f64, grid: &Arc<HypGrid>) -> Result<PhaseProfile> {
    let param = SolitonParam::new(d, nu)?;
    let k0 = kappa0(p);
    let zeta = param.zeta();
    let a = 1.0 / (p - 1.0);
    let omd2 = (1.0 - d) * (1.0 + d);
    let amp = k0 * omd2.powf(a);
    let n = grid.len();
    let mut w1 = Vec::with_capacity(n);
    let mut w2 = Vec::with_capacity(n);
    for &chi in grid.chi() {
        let q = one_plus_dy(chi, zeta) + nu;
        if q <= 0.0 {
            return Err(LabError::invalid(format!(
                "1 + d·y + ν = {q:.3e} ≤ 0 on the grid (d = {d}, ν = {nu})"
            )));
        }
        w1.push(amp * q.powf(-2.0 * a));
        w2.push(-2.0 * a * nu * amp * q.powf(-2.0 * a - 1.0));
    }
    PhaseProfile::new(grid.clone(), p, w1, w2)
}

/// Analytic partials of κ* with respect to d and ν, for the modulation
/// Jacobian fast path. Returns (∂_d κ₁*, ∂_d κ₂*, ∂_ν κ₁*, ∂_ν κ₂*).
#[allow(clippy::type_complexity)]
pub fn kappa_star_partials(
    p: f64,
    d: f64,
    nu: f64,
    grid: &HypGrid,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let param = SolitonParam::new(d, nu)?;
    let k0 = kappa0(p);
    let zeta = param.zeta();
    let a = 1.0 / (p - 1.0);
    let omd2 = (1.0 - d) * (1.0 + d);
    let n = grid.len();
    let (mut k1d, mut k2d, mut k1n, mut k2n) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (&chi, &y) in grid.chi().iter().zip(grid.y()) {
        let q = one_plus_dy(chi, zeta) + nu;
        let qa1 = q.powf(-2.0 * a - 1.0);
        let qa2 = q.powf(-2.0 * a - 2.0);
        // ∂_d κ₁* = −2aκ₀ (1−d²)^{a−1} q^{−2a−1} [d·q + y(1−d²)]
        k1d.push(-2.0 * a * k0 * omd2.powf(a - 1.0) * qa1 * (d * q + y * omd2));
        // ∂_d κ₂* = −2aκ₀ν (1−d²)^{a−1} q^{−2a−2} [−2ad·q − (2a+1)y(1−d²)]
        k2d.push(
            -2.0 * a
                * k0
                * nu
                * omd2.powf(a - 1.0)
                * qa2
                * (-2.0 * a * d * q - (2.0 * a + 1.0) * y * omd2),
        );
        // ∂_ν κ₁* = −2aκ₀ (1−d²)^a q^{−2a−1}
        let dnu1 = -2.0 * a * k0 * omd2.powf(a) * qa1;
        k1n.push(dnu1);
        // ∂_ν κ₂* = ∂_ν κ₁* + ν ∂²_ν κ₁*
        k2n.push(dnu1 + nu * 2.0 * a * (2.0 * a + 1.0) * k0 * omd2.powf(a) * qa2);
    }
    Ok((k1d, k2d, k1n, k2n))
}

/// Alternating-sign sum Σᵢ (−1)ⁱ κ*(dᵢ, νᵢ), i starting at 1.
pub fn alternating_kappa_star_sum(
    p: f64,
    grid: &Arc<HypGrid>,
    params: &[SolitonParam],
) -> Result<PhaseProfile> {
    let mut out = PhaseProfile::zero(grid.clone(), p)?;
    for (idx, sp) in params.iter().enumerate() {
        let sign = if (idx + 1) % 2 == 0 { 1.0 } else { -1.0 };
        let k = kappa_star(p, sp.d, sp.nu, grid)?;
        for j in 0..grid.len() {
            out.w1[j] += sign * k.w1[j];
            out.w2[j] += sign * k.w2[j];
        }
    }
    Ok(out)
}

/// Energy functional
/// E(w) = ∫(½(∂ₛw)² + ½(∂_y w)²(1−y²) + (p+1)/(p−1)² w² − |w|^{p+1}/(p+1)) ρ dy.
pub fn energy(profile: &PhaseProfile) -> f64 {
    let p = profile.p;
    let kit = NormKit::new(&profile.grid, p);
    let dw1 = profile.grid.deriv_chi(&profile.w1);
    let c_lin = (p + 1.0) / ((p - 1.0) * (p - 1.0));
    let mut acc = 0.0;
    for j in 0..profile.grid.len() {
        let w1 = profile.w1[j];
        let w2 = profile.w2[j];
        acc += kit.rho[j]
            * (0.5 * w2 * w2 + c_lin * w1 * w1 - w1.abs().powf(p + 1.0) / (p + 1.0))
            + 0.5 * kit.der[j] * dw1[j] * dw1[j];
    }
    acc
}

/// Weighted sup ‖h (1−y²)^{1/(p−1)}‖_{L∞} of a scalar profile.
pub fn hardy_sobolev_sup(grid: &HypGrid, p: f64, h: &[f64]) -> f64 {
    let e = 2.0 / (p - 1.0);
    grid.chi()
        .iter()
        .zip(h)
        .map(|(&chi, &v)| v.abs() * chi.cosh().powf(-e))
        .fold(0.0, f64::max)
}

/// One entry of a κ* continuity audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuityEntry {
    pub first: SolitonParam,
    pub second: SolitonParam,
    /// |ν₁/(1−|d₁|) − ν₂/(1−|d₂|)| + |artanh d₁ − artanh d₂|
    pub distance: f64,
    /// ‖κ*(1) − κ*(2)‖_H / distance; None for identical pairs (skipped).
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub entries: Vec<ContinuityEntry>,
    pub max_ratio: f64,
}

/// Empirical Lipschitz audit of (d, ν) ↦ κ*(d, ν) over sampled pairs, all
/// satisfying the conditioning window ν/(1−|d|) ∈ [−1+1/A, A].
pub fn kappa_star_continuity_check(
    p: f64,
    grid: &Arc<HypGrid>,
    pairs: &[(SolitonParam, SolitonParam)],
    a: f64,
) -> Result<ContinuityReport> {
    if a < 2.0 {
        return Err(LabError::invalid("A must be at least 2"));
    }
    let mut entries = Vec::with_capacity(pairs.len());
    let mut max_ratio = 0.0f64;
    for &(s1, s2) in pairs {
        for s in [s1, s2] {
            let r = s.cond_ratio();
            if r < -1.0 + 1.0 / a || r > a {
                return Err(LabError::invalid(format!(
                    "parameter (d = {}, nu = {}) violates the conditioning window for A = {a}",
                    s.d, s.nu
                )));
            }
        }
        let distance =
            (s1.cond_ratio() - s2.cond_ratio()).abs() + (s1.d.atanh() - s2.d.atanh()).abs();
        let ratio = if distance == 0.0 {
            None
        } else {
            let k1 = kappa_star(p, s1.d, s1.nu, grid)?;
            let k2 = kappa_star(p, s2.d, s2.nu, grid)?;
            let r = h_norm(&k1.diff(&k2)?) / distance;
            max_ratio = max_ratio.max(r);
            Some(r)
        };
        entries.push(ContinuityEntry { first: s1, second: s2, distance, ratio });
    }
    Ok(ContinuityReport { entries, max_ratio })
}

/// Write a profile as CSV with columns (chi, y, w1, w2) at full double
/// precision; `comments` lines are prefixed with '#'.
pub fn write_profile_csv<W: Write>(
    profile: &PhaseProfile,
    comments: &[String],
    out: &mut W,
) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "chi,y,w1,w2")?;
    for j in 0..profile.grid.len() {
        writeln!(
            out,
            "{},{},{},{}",
            profile.grid.chi()[j],
            profile.grid.y()[j],
            profile.w1[j],
            profile.w2[j]
        )?;
    }
    Ok(())
}

/// Read a profile CSV produced by [`write_profile_csv`]. The exponent p is
/// not part of the format and must be supplied.
pub fn read_profile_csv<R: BufRead>(p: f64, input: R) -> Result<PhaseProfile> {
    let mut chi = Vec::new();
    let mut w1 = Vec::new();
    let mut w2 = Vec::new();
    let mut saw_header = false;
    for line in input.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !saw_header {
            if !t.starts_with("chi,") {
                return Err(LabError::Parse(format!("expected profile header, got '{t}'")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        if fields.len() != 4 {
            return Err(LabError::Parse(format!("expected 4 columns, got {}", fields.len())));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| LabError::Parse(format!("bad float '{s}': {e}")))
        };
        chi.push(parse(fields[0])?);
        w1.push(parse(fields[2])?);
        w2.push(parse(fields[3])?);
    }
    if chi.len() < 3 {
        return Err(LabError::Parse("profile CSV has fewer than 3 rows".into()));
    }
    let chi_max = -chi[0];
    let n = chi.len();
    let grid = HypGrid::new(chi_max, n)?;
    // verify the nodes match a uniform grid
    for (a, b) in grid.chi().iter().zip(&chi) {
        if (a - b).abs() > 1e-9 {
            return Err(LabError::Parse("chi column is not the expected uniform grid".into()));
        }
    }
    PhaseProfile::new(Arc::new(grid), p, w1, w2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid() -> Arc<HypGrid> {
        Arc::new(HypGrid::new(10.0, 2001).unwrap())
    }

    #[test]
    fn kappa0_closed_forms() {
        assert_abs_diff_eq!(kappa0(3.0), 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(kappa0(2.0), 6.0, epsilon = 1e-12);
        for &p in &[1.3, 2.0, 3.0, 5.0] {
            let k0 = kappa0(p);
            let want = 2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0));
            assert_abs_diff_eq!(k0.powf(p - 1.0), want, epsilon = 1e-14 * want);
        }
    }

    #[test]
    fn kappa_values() {
        let g = grid();
        let k = kappa(3.0, 0.0, &g).unwrap();
        for &v in &k.w1 {
            assert_abs_diff_eq!(v, kappa0(3.0), epsilon = 1e-12);
        }
        assert!(k.w2.iter().all(|&v| v == 0.0));

        // κ(0.5) at y = −0.5, p = 3: κ₀ √(0.75) / 0.75 = κ₀/√0.75
        let k = kappa(3.0, 0.5, &g).unwrap();
        let j = (0..g.len())
            .min_by(|&a, &b| (g.y()[a] + 0.5).abs().total_cmp(&(g.y()[b] + 0.5).abs()))
            .unwrap();
        let want = kappa0(3.0) / 0.75f64.sqrt();
        assert!((k.w1[j] - want).abs() < 5e-3, "{} vs {want}", k.w1[j]);

        // the formula itself is exact at the matched node
        let y = g.y()[j];
        let exact = kappa0(3.0) * (0.75f64).sqrt() / (1.0 + 0.5 * y);
        assert_abs_diff_eq!(k.w1[j], exact, epsilon = 1e-12);
    }

    #[test]
    fn kappa_star_values_and_domain() {
        let g = grid();
        // ν = 0 collapses to κ(d)
        for &d in &[0.0, 0.4, -0.7] {
            let ks = kappa_star(3.0, d, 0.0, &g).unwrap();
            let k = kappa(3.0, d, &g).unwrap();
            for j in 0..g.len() {
                assert_abs_diff_eq!(ks.w1[j], k.w1[j], epsilon = 1e-12 * k.w1[j].abs());
                assert_eq!(ks.w2[j], 0.0);
            }
        }

        // d = 0, ν = 1, p = 3: κ₁* = κ₀/2, κ₂* = −κ₀/4 at every node
        let ks = kappa_star(3.0, 0.0, 1.0, &g).unwrap();
        for j in 0..g.len() {
            assert_abs_diff_eq!(ks.w1[j], kappa0(3.0) / 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(ks.w2[j], -kappa0(3.0) / 4.0, epsilon = 1e-12);
        }

        // ν at the domain edge is rejected
        assert!(SolitonParam::new(0.5, -0.5).is_err());
        assert!(kappa_star(3.0, 0.5, -0.500001, &g).is_err());
        assert!(SolitonParam::new(0.5, -0.49).is_ok());
    }

    #[test]
    fn norm_basics() {
        let g = grid();
        let z = PhaseProfile::zero(g.clone(), 3.0).unwrap();
        assert_eq!(h_norm(&z), 0.0);

        let ones = PhaseProfile::new(g.clone(), 3.0, vec![1.0; g.len()], vec![0.0; g.len()])
            .unwrap();
        let n2 = h_norm(&ones).powi(2);
        assert!((n2 - 4.0 / 3.0).abs() < 1e-6, "norm² {n2}");

        // zero iff identically zero
        let mut w1 = vec![0.0; g.len()];
        w1[1000] = 1e-6;
        let tiny = PhaseProfile::new(g.clone(), 3.0, w1, vec![0.0; g.len()]).unwrap();
        assert!(h_norm(&tiny) > 0.0);
    }

    #[test]
    fn truncation_policy_enforced() {
        let small = Arc::new(HypGrid::new(5.0, 501).unwrap());
        assert!(PhaseProfile::zero(small, 3.0).is_err());
    }

    #[test]
    fn soliton_continuity_in_h0() {
        let g = grid();
        // ‖κ(d₁) − κ(d₂)‖_{H₀} ≤ C |artanh d₁ − artanh d₂|
        let ds = [-0.6, -0.3, 0.0, 0.3, 0.6];
        let mut max_c = 0.0f64;
        for i in 0..ds.len() {
            for j in i + 1..ds.len() {
                let k1 = kappa(3.0, ds[i], &g).unwrap();
                let k2 = kappa(3.0, ds[j], &g).unwrap();
                let dist = (ds[i].atanh() - ds[j].atanh()).abs();
                let c = h_norm(&k1.diff(&k2).unwrap()) / dist;
                max_c = max_c.max(c);
            }
        }
        assert!(max_c < 10.0, "continuity constant {max_c}");
    }

    #[test]
    fn energy_values() {
        let g = grid();
        let z = PhaseProfile::zero(g.clone(), 3.0).unwrap();
        assert_eq!(energy(&z), 0.0);

        // E(κ₀) = κ₀²/(p−1) · ∫ρ dy = 4/3 at p = 3
        let k = kappa(3.0, 0.0, &g).unwrap();
        assert!((energy(&k) - 4.0 / 3.0).abs() < 1e-5, "E = {}", energy(&k));

        // Lorentz invariance of the soliton energy
        for &d in &[0.3, -0.3, 0.6, -0.6] {
            let e = energy(&kappa(3.0, d, &g).unwrap());
            assert!((e - 4.0 / 3.0).abs() < 1e-4, "E(κ({d})) = {e}");
        }
    }

    #[test]
    fn well_separated_sum_has_additive_energy() {
        let g = grid();
        // centers ±3.5 → gap 7 in ζ; d = −tanh ζ. The tail interaction decays
        // like gap·e^{−gap}, which first drops below 2% around gap ≈ 6.
        let params = [
            SolitonParam::new((3.5f64).tanh(), 0.0).unwrap(),
            SolitonParam::new(-(3.5f64).tanh(), 0.0).unwrap(),
        ];
        let sum = alternating_kappa_star_sum(3.0, &g, &params).unwrap();
        let e = energy(&sum);
        let want = 2.0 * 4.0 / 3.0;
        assert!((e - want).abs() / want < 0.02, "E = {e}, want ≈ {want}");
    }

    #[test]
    fn hardy_sobolev_weighted_sup() {
        let g = grid();
        let k = kappa(3.0, 0.0, &g).unwrap();
        let sup = hardy_sobolev_sup(&g, 3.0, &k.w1);
        assert_abs_diff_eq!(sup, kappa0(3.0), epsilon = 1e-10);
        assert_eq!(hardy_sobolev_sup(&g, 3.0, &vec![0.0; g.len()]), 0.0);

        // ratio sup/‖·‖_{H₀} stays bounded as d → ±1
        let reference = sup / h0_norm(&g, 3.0, &k.w1);
        for &d in &[0.9, -0.9, 0.99, -0.99] {
            let kd = kappa(3.0, d, &g).unwrap();
            let ratio = hardy_sobolev_sup(&g, 3.0, &kd.w1) / h0_norm(&g, 3.0, &kd.w1);
            assert!(ratio < 5.0 * reference, "ratio {ratio} at d = {d}");
        }
    }

    #[test]
    fn continuity_check_ratios() {
        let g = grid();
        let a = 2.0;
        // identical pair → skipped
        let s = SolitonParam::new(0.3, 0.05).unwrap();
        let rep = kappa_star_continuity_check(3.0, &g, &[(s, s)], a).unwrap();
        assert!(rep.entries[0].ratio.is_none());

        // (d, ν) vs (d, ν+1e−6): ratio approaches the analytic ∂_ν norm
        let s1 = SolitonParam::new(0.3, 0.05).unwrap();
        let s2 = SolitonParam::new(0.3, 0.05 + 1e-6).unwrap();
        let rep = kappa_star_continuity_check(3.0, &g, &[(s1, s2)], a).unwrap();
        let ratio = rep.entries[0].ratio.unwrap();
        let (_, _, k1n, k2n) = kappa_star_partials(3.0, 0.3, 0.05, &g).unwrap();
        // κ₂* = ν ∂_ν κ₁*, so ∂_ν of the pair is (∂_ν κ₁*, ∂_ν κ₂*)
        let dprof = PhaseProfile::new(g.clone(), 3.0, k1n, k2n).unwrap();
        // distance includes the 1/(1−|d|) scaling of ν
        let analytic = h_norm(&dprof) * (1.0 - 0.3);
        assert!(
            (ratio - analytic).abs() / analytic < 1e-3,
            "fd {ratio} vs analytic {analytic}"
        );

        // sampled family stays within 10x of the reference ratio
        let mut pairs = Vec::new();
        let base = SolitonParam::new(0.0, 0.0).unwrap();
        let base2 = SolitonParam::new(0.0, 0.1).unwrap();
        pairs.push((base, base2));
        for &d in &[0.5, -0.5] {
            for &nu in &[0.0, 0.1] {
                pairs.push((base, SolitonParam::new(d, nu).unwrap()));
            }
        }
        let rep = kappa_star_continuity_check(3.0, &g, &pairs, a).unwrap();
        let reference = rep.entries[0].ratio.unwrap();
        assert!(rep.max_ratio <= 10.0 * reference, "{} vs {reference}", rep.max_ratio);

        // conditioning window violations are rejected
        let bad = SolitonParam::new(0.0, 3.0).unwrap();
        assert!(kappa_star_continuity_check(3.0, &g, &[(base, bad)], a).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = grid();
        let k = kappa_star(3.0, 0.37, 0.01, &g).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&k, &["config-hash: test".into()], &mut buf).unwrap();
        let back = read_profile_csv(3.0, std::io::BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(back.w1, k.w1);
        assert_eq!(back.w2, k.w2);
        assert_eq!(back.grid.len(), g.len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn h_norm_is_a_norm(
            scale in 0.1f64..5.0,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let g = Arc::new(HypGrid::new(10.0, 301).unwrap());
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let w1: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let w2: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                PhaseProfile::new(g.clone(), 3.0, w1, w2).unwrap()
            };
            let u = mk(&mut rng);
            let v = mk(&mut rng);
            // homogeneity
            let lhs = h_norm(&u.scaled(scale));
            let rhs = scale * h_norm(&u);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
            // triangle inequality
            let sum = PhaseProfile::new(
                g.clone(),
                3.0,
                u.w1.iter().zip(&v.w1).map(|(a, b)| a + b).collect(),
                u.w2.iter().zip(&v.w2).map(|(a, b)| a + b).collect(),
            ).unwrap();
            prop_assert!(h_norm(&sum) <= h_norm(&u) + h_norm(&v) + 1e-10);
        }
    }
}
