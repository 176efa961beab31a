//! Modulation of a profile around an alternating κ*-sum.
//!
//! A profile v is decomposed as v = Σᵢ(−1)ⁱ κ*(dᵢ, νᵢ) + q with q orthogonal
//! to the null and unstable directions at each soliton: Π_l^{dᵢ*}(q) = 0 for
//! l = 0, 1, where Π_l^d(r) = φ(W_l(d), r) and the dual directions W_l(d)
//! are built from the explicit W_{l,2} formulas plus a banded solve for
//! W_{l,1}. The 2k conditions are solved by Newton in (ζᵢ, νᵢ) — the ζ
//! parameterization keeps the Jacobian well-conditioned as |dᵢ| → 1.

use crate::centers::{p_bar, CenterSystem};
use crate::error::{LabError, Result};
use crate::numerics::newton::dense_solve;
use crate::numerics::{Banded, HypGrid};
use crate::profiles::{
    h_norm, h_norm_sq_with, kappa_star, kappa_star_partials, NormKit, PhaseProfile, SolitonParam,
};
use crate::spectral::SpectralData;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

/// Dual projection directions W₀(d), W₁(d), normalized so Π_l(F_l(d)) = 1.
#[derive(Debug, Clone)]
pub struct ProjectionKit {
    pub d: f64,
    pub w0: PhaseProfile,
    pub w1: PhaseProfile,
    pub cbar0: f64,
    pub cbar1: f64,
    /// Measured cross-projections (Π₀(F₁), Π₁(F₀)) under the normalization.
    pub cross: [f64; 2],
    /// Relative weighted-ℓ² residual of the two W_{l,1} solves.
    pub solve_residual: f64,
}

fn one_plus_dy_nodes(grid: &HypGrid, d: f64) -> Vec<f64> {
    let zeta = -d.atanh();
    grid.chi().iter().map(|&chi| crate::profiles::one_plus_dy(chi, zeta)).collect()
}

/// The explicit second components W_{l,2}(d) (unit normalization constant).
fn w_l2(l: usize, p: f64, d: f64, grid: &HypGrid) -> Vec<f64> {
    let a = 1.0 / (p - 1.0);
    let omd2 = (1.0 - d) * (1.0 + d);
    let amp = omd2.powf(a);
    let opdy = one_plus_dy_nodes(grid, d);
    grid.y()
        .iter()
        .zip(&opdy)
        .map(|(&y, &q)| {
            let g = if l == 1 { 1.0 - y * y } else { y + d };
            amp * g * q.powf(-2.0 * a - 1.0)
        })
        .collect()
}

/// Analytic ∂_y W_{l,2}(d).
fn w_l2_dy(l: usize, p: f64, d: f64, grid: &HypGrid) -> Vec<f64> {
    let a = 1.0 / (p - 1.0);
    let omd2 = (1.0 - d) * (1.0 + d);
    let amp = omd2.powf(a);
    let opdy = one_plus_dy_nodes(grid, d);
    grid.y()
        .iter()
        .zip(&opdy)
        .map(|(&y, &q)| {
            let qa = q.powf(-2.0 * a - 1.0);
            let qb = q.powf(-2.0 * a - 2.0);
            if l == 1 {
                amp * (-2.0 * y * qa - (2.0 * a + 1.0) * d * (1.0 - y * y) * qb)
            } else {
                amp * (qa - (2.0 * a + 1.0) * d * (y + d) * qb)
            }
        })
        .collect()
}

/// The explicit test directions F_l(d).
fn f_l(l: usize, p: f64, d: f64, grid: &Arc<HypGrid>) -> Result<PhaseProfile> {
    let a = 1.0 / (p - 1.0);
    let omd2 = (1.0 - d) * (1.0 + d);
    let opdy = one_plus_dy_nodes(grid, d);
    let n = grid.len();
    let mut c1v = Vec::with_capacity(n);
    let mut c2v = Vec::with_capacity(n);
    for (j, &q) in opdy.iter().enumerate() {
        let qa = q.powf(-2.0 * a - 1.0);
        if l == 1 {
            let v = omd2.powf(p * a) * qa;
            c1v.push(v);
            c2v.push(v);
        } else {
            c1v.push(omd2.powf(a) * (grid.y()[j] + d) * qa);
            c2v.push(0.0);
        }
    }
    PhaseProfile::new(grid.clone(), p, c1v, c2v)
}

/// Solve −L r + r = f with homogeneous Neumann walls (flux-form L).
fn solve_minus_l_plus_one(p: f64, grid: &HypGrid, f: &[f64]) -> Result<Vec<f64>> {
    let n = grid.len();
    let h = grid.spacing();
    let e = 4.0 / (p - 1.0);
    let coeff = |chi_j: f64, chi_half: f64| -> f64 {
        chi_j.cosh().powf(2.0 + e) * chi_half.cosh().powf(-e)
    };
    let mut m = Banded::new(n, 1, 1);
    for j in 0..n {
        let chi = grid.chi()[j];
        let gp = coeff(chi, chi + 0.5 * h) / (h * h);
        let gm = coeff(chi, chi - 0.5 * h) / (h * h);
        // −L ≈ −[gp(r_{j+1}−r_j) − gm(r_j−r_{j−1})]/h², reflected at walls
        m.add(j, j, 1.0 + gp + gm);
        if j + 1 < n {
            m.add(j, j + 1, -gp);
        } else {
            m.add(j, j - 1, -gp);
        }
        if j > 0 {
            m.add(j, j - 1, -gm);
        } else {
            m.add(j, j + 1, -gm);
        }
    }
    crate::numerics::solve_banded(&m, f)
}

/// Residual of the W_{l,1} equation in the weighted ℓ² norm, relative to f.
fn weighted_residual(p: f64, grid: &HypGrid, r: &[f64], f: &[f64]) -> f64 {
    let lr = crate::pde::apply_l(r, p, grid);
    let kit = NormKit::new(grid, p);
    let mut res2 = 0.0;
    let mut f2 = 0.0;
    for j in 0..grid.len() {
        let rr = -lr[j] + r[j] - f[j];
        res2 += kit.rho[j] * rr * rr;
        f2 += kit.rho[j] * f[j] * f[j];
    }
    (res2 / f2.max(1e-300)).sqrt()
}

/// Build the projection kit at velocity d: W_{l,2} from the closed formulas,
/// W_{l,1} from the banded solve, constants fixed by Π_l(F_l(d)) = 1.
pub fn build_projection_kit(p: f64, d: f64, grid: &Arc<HypGrid>) -> Result<ProjectionKit> {
    if !(d.abs() < 1.0) {
        return Err(LabError::invalid(format!("|d| must be below 1, got {d}")));
    }
    let a = 1.0 / (p - 1.0);
    let kit = NormKit::new(grid, p);
    let mut profiles = Vec::with_capacity(2);
    let mut residual = 0.0f64;
    for l in 0..2usize {
        let w2 = w_l2(l, p, d, grid);
        let w2_dy = w_l2_dy(l, p, d, grid);
        // f = (l − (p+3)/(p−1)) W_{l,2} − 2y ∂_y W_{l,2} + (8/(p−1)) W_{l,2}/(1−y²)
        let f: Vec<f64> = (0..grid.len())
            .map(|j| {
                let y = grid.y()[j];
                let chi = grid.chi()[j];
                let inv_1my2 = chi.cosh().powi(2);
                (l as f64 - (p + 3.0) / (p - 1.0)) * w2[j] - 2.0 * y * w2_dy[j]
                    + 8.0 * a * w2[j] * inv_1my2
            })
            .collect();
        let w1 = solve_minus_l_plus_one(p, grid, &f)?;
        residual = residual.max(weighted_residual(p, grid, &w1, &f));
        profiles.push(PhaseProfile::new(grid.clone(), p, w1, w2)?);
    }

    let f0 = f_l(0, p, d, grid)?;
    let f1 = f_l(1, p, d, grid)?;
    let z0 = phi_bilinear_with(&kit, grid, &profiles[0], &f0);
    let z1 = phi_bilinear_with(&kit, grid, &profiles[1], &f1);
    if z0.abs() < 1e-300 || z1.abs() < 1e-300 {
        return Err(LabError::DegenerateFit(format!("vanishing normalization at d = {d}")));
    }
    let (cbar0, cbar1) = (1.0 / z0, 1.0 / z1);
    let w0 = profiles[0].scaled(cbar0);
    let w1 = profiles[1].scaled(cbar1);
    let cross = [
        phi_bilinear_with(&kit, grid, &w0, &f1),
        phi_bilinear_with(&kit, grid, &w1, &f0),
    ];
    Ok(ProjectionKit { d, w0, w1, cbar0, cbar1, cross, solve_residual: residual })
}

/// The H-pairing φ(q, r) = ∫(q₁r₁ + q₁′r₁′(1−y²) + q₂r₂)ρ dy.
pub fn phi_bilinear(q: &PhaseProfile, r: &PhaseProfile) -> Result<f64> {
    q.grid.ensure_same(&r.grid)?;
    let kit = NormKit::new(&q.grid, q.p);
    Ok(phi_bilinear_with(&kit, &q.grid, q, r))
}

pub(crate) fn phi_bilinear_with(
    kit: &NormKit,
    grid: &HypGrid,
    q: &PhaseProfile,
    r: &PhaseProfile,
) -> f64 {
    let dq = grid.deriv_chi(&q.w1);
    let dr = grid.deriv_chi(&r.w1);
    let mut acc = 0.0;
    for j in 0..grid.len() {
        acc += kit.rho[j] * (q.w1[j] * r.w1[j] + q.w2[j] * r.w2[j]) + kit.der[j] * dq[j] * dr[j];
    }
    acc
}

/// Π_l^d(r) with a prebuilt kit.
pub fn project(kit_norm: &NormKit, kit: &ProjectionKit, l: usize, r: &PhaseProfile) -> f64 {
    let w = if l == 0 { &kit.w0 } else { &kit.w1 };
    phi_bilinear_with(kit_norm, &r.grid, w, r)
}

/// Jacobian strategy for the modulation Newton solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModJacobian {
    /// Forward differences (step 1e−7 on ζ, 1e−9 on ν), projection kits
    /// rebuilt at the perturbed d*.
    FiniteDifference,
    /// Analytic ∂_d κ*, ∂_ν κ* with the kits frozen per iteration.
    Analytic,
}

#[derive(Debug, Clone)]
pub struct ModulateOptions {
    pub jacobian: ModJacobian,
    /// Residual tolerance, scaled internally by (1 + ‖v‖_H).
    pub tol: f64,
    pub max_iter: usize,
    /// Abort when any ζ*-gap falls below this during iteration.
    pub min_gap: f64,
}

impl Default for ModulateOptions {
    fn default() -> Self {
        ModulateOptions {
            jacobian: ModJacobian::FiniteDifference,
            tol: 1e-11,
            max_iter: 50,
            min_gap: 0.5,
        }
    }
}

/// Result of a modulation solve.
#[derive(Debug, Clone)]
pub struct ModulationState {
    pub params: Vec<SolitonParam>,
    pub q: PhaseProfile,
    pub q_norm: f64,
    /// max over (l, i) of |Π_l^{dᵢ*}(q)| at the solution.
    pub ortho_residual: f64,
    pub newton_iterations: usize,
}

/// Kit cache keyed by the bit pattern of d (kits are read-only once built).
#[derive(Default)]
pub struct KitCache {
    map: HashMap<u64, Arc<ProjectionKit>>,
}

impl KitCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&mut self, p: f64, d: f64, grid: &Arc<HypGrid>) -> Result<Arc<ProjectionKit>> {
        if let Some(k) = self.map.get(&d.to_bits()) {
            return Ok(k.clone());
        }
        let kit = Arc::new(build_projection_kit(p, d, grid)?);
        self.map.insert(d.to_bits(), kit.clone());
        Ok(kit)
    }
}

fn reconstruct_sum(
    p: f64,
    grid: &Arc<HypGrid>,
    zetas: &[f64],
    nus: &[f64],
) -> Result<(Vec<PhaseProfile>, PhaseProfile)> {
    let k = zetas.len();
    let mut parts = Vec::with_capacity(k);
    let mut sum = PhaseProfile::zero(grid.clone(), p)?;
    for i in 0..k {
        let d = -zetas[i].tanh();
        let prof = kappa_star(p, d, nus[i], grid)?;
        let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
        for j in 0..grid.len() {
            sum.w1[j] += sign * prof.w1[j];
            sum.w2[j] += sign * prof.w2[j];
        }
        parts.push(prof);
    }
    Ok((parts, sum))
}

/// Modulate `v` around an alternating κ*-sum: solve the 2k orthogonality
/// conditions Π_l^{dᵢ*}(q) = 0 in the unknowns (ζᵢ, νᵢ).
pub fn modulate(
    v: &PhaseProfile,
    guess: &[SolitonParam],
    cache: &mut KitCache,
    opts: &ModulateOptions,
) -> Result<ModulationState> {
    let k = guess.len();
    if k == 0 {
        return Err(LabError::invalid("need at least one soliton"));
    }
    let p = v.p;
    let grid = &v.grid;
    let norm_kit = NormKit::new(grid, p);
    let v_norm = h_norm_sq_with(&norm_kit, grid, &v.w1, &v.w2).sqrt();
    let tol = opts.tol * (1.0 + v_norm);

    let mut zetas: Vec<f64> = guess.iter().map(|g| g.zeta()).collect();
    let mut nus: Vec<f64> = guess.iter().map(|g| g.nu).collect();

    // residual of the 2k conditions at (ζ, ν); returns (F, q, kits)
    let eval = |zetas: &[f64],
                nus: &[f64],
                cache: &mut KitCache|
     -> Result<(Vec<f64>, PhaseProfile, Vec<Arc<ProjectionKit>>)> {
        let (_, sum) = reconstruct_sum(p, grid, zetas, nus)?;
        let q = v.diff(&sum)?;
        let mut kits = Vec::with_capacity(k);
        let mut f = Vec::with_capacity(2 * k);
        for i in 0..k {
            let d = -zetas[i].tanh();
            let d_star = d / (1.0 + nus[i]);
            let kit = cache.get(p, d_star, grid)?;
            f.push(project(&norm_kit, &kit, 0, &q));
            f.push(project(&norm_kit, &kit, 1, &q));
            kits.push(kit);
        }
        Ok((f, q, kits))
    };

    let mut iterations = 0;
    loop {
        // separation guard in the starred centers
        for i in 1..k {
            let zs_prev = -((-zetas[i - 1].tanh()) / (1.0 + nus[i - 1])).atanh();
            let zs = -((-zetas[i].tanh()) / (1.0 + nus[i])).atanh();
            if zs - zs_prev < opts.min_gap {
                return Err(LabError::invalid(format!(
                    "separation collapse: ζ*_{} − ζ*_{} = {:.3}",
                    i + 1,
                    i,
                    zs - zs_prev
                )));
            }
        }
        let (f, q, kits) = eval(&zetas, &nus, cache)?;
        let res = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !res.is_finite() {
            return Err(LabError::NewtonNonConvergence {
                iterations,
                residual: res,
                last_iterate: zetas.iter().chain(&nus).copied().collect(),
            });
        }
        if res <= tol || iterations >= opts.max_iter {
            if res > tol {
                return Err(LabError::NewtonNonConvergence {
                    iterations,
                    residual: res,
                    last_iterate: zetas.iter().chain(&nus).copied().collect(),
                });
            }
            let q_norm = h_norm_sq_with(&norm_kit, grid, &q.w1, &q.w2).sqrt();
            let params: Vec<SolitonParam> = (0..k)
                .map(|i| SolitonParam::new(-zetas[i].tanh(), nus[i]))
                .collect::<Result<_>>()?;
            return Ok(ModulationState {
                params,
                q,
                q_norm,
                ortho_residual: res,
                newton_iterations: iterations,
            });
        }
        iterations += 1;

        // Jacobian: columns ordered [ζ₁..ζ_k, ν₁..ν_k]
        let dim = 2 * k;
        let mut jac = vec![vec![0.0; dim]; dim];
        match opts.jacobian {
            ModJacobian::FiniteDifference => {
                const STEP_ZETA: f64 = 1e-7;
                const STEP_NU: f64 = 1e-9;
                for c in 0..dim {
                    let mut zp = zetas.clone();
                    let mut np = nus.clone();
                    let step = if c < k {
                        zp[c] += STEP_ZETA;
                        STEP_ZETA
                    } else {
                        np[c - k] += STEP_NU;
                        STEP_NU
                    };
                    let (fp, _, _) = eval(&zp, &np, cache)?;
                    for r in 0..dim {
                        jac[r][c] = (fp[r] - f[r]) / step;
                    }
                }
            }
            ModJacobian::Analytic => {
                // kits frozen for the iteration; q depends on the parameters
                // only through the κ*-sum: ∂F/∂x = −(−1)ʲ Π_l(∂ κ*_j / ∂x).
                for jsol in 0..k {
                    let d = -zetas[jsol].tanh();
                    let sign = if (jsol + 1) % 2 == 0 { 1.0 } else { -1.0 };
                    let (k1d, k2d, k1n, k2n) = kappa_star_partials(p, d, nus[jsol], grid)?;
                    // chain rule d = −tanh ζ ⇒ ∂ζ = −(1−d²)∂d
                    let dd_dz = -(1.0 - d) * (1.0 + d);
                    let dz = PhaseProfile::new(
                        grid.clone(),
                        p,
                        k1d.iter().map(|v| v * dd_dz).collect(),
                        k2d.iter().map(|v| v * dd_dz).collect(),
                    )?;
                    let dn = PhaseProfile::new(grid.clone(), p, k1n, k2n)?;
                    for i in 0..k {
                        for l in 0..2usize {
                            let r = 2 * i + l;
                            jac[r][jsol] = -sign * project(&norm_kit, &kits[i], l, &dz);
                            jac[r][k + jsol] = -sign * project(&norm_kit, &kits[i], l, &dn);
                        }
                    }
                }
            }
        }

        let neg_f: Vec<f64> = f.iter().map(|x| -x).collect();
        let delta = dense_solve(&jac, &neg_f).map_err(|_| LabError::NewtonNonConvergence {
            iterations,
            residual: res,
            last_iterate: zetas.iter().chain(&nus).copied().collect(),
        })?;

        // keep ν inside its domain; halve the step if it would leave
        let mut lambda = 1.0f64;
        for _ in 0..8 {
            let ok = (0..k).all(|i| {
                let z = zetas[i] + lambda * delta[i];
                let nu = nus[i] + lambda * delta[k + i];
                let d = -z.tanh();
                nu > -1.0 + d.abs()
            });
            if ok {
                break;
            }
            lambda *= 0.5;
        }
        for i in 0..k {
            zetas[i] += lambda * delta[i];
            nus[i] += lambda * delta[k + i];
        }
    }
}

/// Gap functionals of a parameter snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gaps {
    pub j: f64,
    pub jbar: f64,
    pub jhat: f64,
    pub jtilde: f64,
}

/// J, J̄, Ĵ from the parameters and J̃ from the φ-coordinates of
/// ξ = (2/(p−1))(ζ − ζ̄(s)).
pub fn gaps(
    params: &[SolitonParam],
    s: f64,
    system: &CenterSystem,
    spectral: &SpectralData,
) -> Result<Gaps> {
    let p = system.params.p;
    let k = params.len();
    let zetas: Vec<f64> = params.iter().map(|sp| sp.zeta()).collect();
    let mut j = 0.0;
    let mut jhat = 0.0;
    let pb = p_bar(p);
    for i in 1..k {
        let gap = zetas[i] - zetas[i - 1];
        j += (-2.0 / (p - 1.0) * gap).exp();
        jhat += (-pb / (p - 1.0) * gap).exp();
    }
    let jbar = params
        .iter()
        .map(|sp| sp.nu.abs() / ((1.0 - sp.d) * (1.0 + sp.d)))
        .sum();
    let xi = system.xi_from_zeta(s, &zetas)?;
    let phi = spectral.to_phi(&xi);
    let jtilde = phi[1..].iter().map(|v| v * v).sum();
    Ok(Gaps { j, jbar, jhat, jtilde })
}

/// Components of the shrinking-set norm N(ν, s).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShrinkComponents {
    /// s^{1/2+η}‖q‖_H
    pub q_term: f64,
    /// s^{1/2+|γᵢ|}|νᵢ|
    pub nu_terms: Vec<f64>,
    /// s^η|φᵢ| for i ≥ 2
    pub phi_terms: Vec<f64>,
    /// s₀^η|φ₁|
    pub phi1_term: f64,
}

/// Which component of N is largest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShrinkArgmax {
    QNorm,
    /// 0-based soliton index.
    Nu(usize),
    /// 0-based eigenmode index (≥ 1).
    Phi(usize),
    Phi1,
}

impl ShrinkComponents {
    pub fn n(&self) -> f64 {
        let mut m = self.q_term.max(self.phi1_term);
        for &v in self.nu_terms.iter().chain(&self.phi_terms) {
            m = m.max(v);
        }
        m
    }

    pub fn argmax(&self) -> ShrinkArgmax {
        let mut best = (self.q_term, ShrinkArgmax::QNorm);
        if self.phi1_term > best.0 {
            best = (self.phi1_term, ShrinkArgmax::Phi1);
        }
        for (i, &v) in self.nu_terms.iter().enumerate() {
            if v > best.0 {
                best = (v, ShrinkArgmax::Nu(i));
            }
        }
        for (i, &v) in self.phi_terms.iter().enumerate() {
            if v > best.0 {
                best = (v, ShrinkArgmax::Phi(i + 1));
            }
        }
        best.1
    }

    /// Membership in the shrinking set V(s₀, s).
    pub fn inside(&self) -> bool {
        self.n() <= 1.0
    }
}

/// Evaluate the shrinking-set components at time s (run started at s0).
pub fn shrink_norm(
    q_norm: f64,
    params: &[SolitonParam],
    s: f64,
    s0: f64,
    system: &CenterSystem,
    spectral: &SpectralData,
) -> Result<ShrinkComponents> {
    let eta = system.params.eta_shrink;
    let zetas: Vec<f64> = params.iter().map(|sp| sp.zeta()).collect();
    let xi = system.xi_from_zeta(s, &zetas)?;
    let phi = spectral.to_phi(&xi);
    let nu_terms = params
        .iter()
        .zip(system.gamma())
        .map(|(sp, &g)| s.powf(0.5 + g.abs()) * sp.nu.abs())
        .collect();
    Ok(ShrinkComponents {
        q_term: s.powf(0.5 + eta) * q_norm,
        nu_terms,
        phi_terms: phi[1..].iter().map(|v| s.powf(eta) * v.abs()).collect(),
        phi1_term: s0.powf(eta) * phi[0].abs(),
    })
}

/// One row of a modulation time series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModSeriesRow {
    pub s: f64,
    pub zeta: Vec<f64>,
    pub nu: Vec<f64>,
    pub q_norm: f64,
    pub j: f64,
    pub jbar: f64,
    pub jhat: f64,
    pub jtilde: f64,
    pub n_shrink: f64,
}

/// CSV columns (s, zeta_1..k, nu_1..k, q_norm, J, Jbar, Jhat, Jtilde, N).
pub fn write_series_csv<W: Write>(
    rows: &[ModSeriesRow],
    k: usize,
    comments: &[String],
    out: &mut W,
) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut header = String::from("s");
    for i in 1..=k {
        header.push_str(&format!(",zeta_{i}"));
    }
    for i in 1..=k {
        header.push_str(&format!(",nu_{i}"));
    }
    header.push_str(",q_norm,J,Jbar,Jhat,Jtilde,N");
    writeln!(out, "{header}")?;
    for r in rows {
        let mut line = format!("{}", r.s);
        for v in r.zeta.iter().chain(&r.nu) {
            line.push_str(&format!(",{v}"));
        }
        line.push_str(&format!(
            ",{},{},{},{},{},{}",
            r.q_norm, r.j, r.jbar, r.jhat, r.jtilde, r.n_shrink
        ));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Read back a series CSV produced by [`write_series_csv`].
pub fn read_series_csv<R: BufRead>(k: usize, input: R) -> Result<Vec<ModSeriesRow>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for line in input.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true;
            continue;
        }
        let vals: Vec<f64> = t
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| LabError::Parse(format!("bad float: {e}"))))
            .collect::<Result<_>>()?;
        if vals.len() != 1 + 2 * k + 6 {
            return Err(LabError::Parse(format!(
                "expected {} columns, got {}",
                1 + 2 * k + 6,
                vals.len()
            )));
        }
        rows.push(ModSeriesRow {
            s: vals[0],
            zeta: vals[1..1 + k].to_vec(),
            nu: vals[1 + k..1 + 2 * k].to_vec(),
            q_norm: vals[1 + 2 * k],
            j: vals[2 + 2 * k],
            jbar: vals[3 + 2 * k],
            jhat: vals[4 + 2 * k],
            jtilde: vals[5 + 2 * k],
            n_shrink: vals[6 + 2 * k],
        });
    }
    Ok(rows)
}

/// Least-squares fit of c₁ from a center time series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct C1Fit {
    pub c1_hat: f64,
    /// rms of (ζ̇ − c₁F) over the samples, relative to the rms of ζ̇.
    pub residual: f64,
    /// Per-soliton fits (same regression restricted to one index).
    pub per_index: Vec<f64>,
}

/// Fit ζ̇ᵢ ≈ c₁·(e^{−2(ζᵢ−ζᵢ₋₁)/(p−1)} − e^{−2(ζᵢ₊₁−ζᵢ)/(p−1)}) across all i
/// and sampled s; ζ̇ by centered differences. Degenerate regressions (no
/// usable signal, or a nonpositive fit) are errors.
pub fn fit_c1(p: f64, times: &[f64], zetas: &[Vec<f64>]) -> Result<C1Fit> {
    if times.len() != zetas.len() || times.len() < 3 {
        return Err(LabError::invalid("need at least 3 aligned samples"));
    }
    let k = zetas[0].len();
    let feature = |z: &[f64], i: usize| -> f64 {
        let left = if i == 0 { 0.0 } else { (-2.0 / (p - 1.0) * (z[i] - z[i - 1])).exp() };
        let right = if i == k - 1 { 0.0 } else { (-2.0 / (p - 1.0) * (z[i + 1] - z[i])).exp() };
        left - right
    };
    let mut sxy = vec![0.0f64; k];
    let mut sxx = vec![0.0f64; k];
    let mut syy = 0.0f64;
    for j in 1..times.len() - 1 {
        let dt = times[j + 1] - times[j - 1];
        if dt <= 0.0 {
            return Err(LabError::invalid("times must be strictly increasing"));
        }
        for i in 0..k {
            let zdot = (zetas[j + 1][i] - zetas[j - 1][i]) / dt;
            let f = feature(&zetas[j], i);
            sxy[i] += zdot * f;
            sxx[i] += f * f;
            syy += zdot * zdot;
        }
    }
    let tot_xx: f64 = sxx.iter().sum();
    let tot_xy: f64 = sxy.iter().sum();
    let count = ((times.len() - 2) * k) as f64;
    if tot_xx < 1e-14 * count {
        return Err(LabError::DegenerateFit("interaction features vanish".into()));
    }
    let c1_hat = tot_xy / tot_xx;
    if !(c1_hat > 0.0) {
        return Err(LabError::DegenerateFit(format!("nonpositive fit c1 = {c1_hat:.3e}")));
    }
    // residual rms relative to the signal rms
    let mut res2 = 0.0f64;
    for j in 1..times.len() - 1 {
        let dt = times[j + 1] - times[j - 1];
        for i in 0..k {
            let zdot = (zetas[j + 1][i] - zetas[j - 1][i]) / dt;
            let f = feature(&zetas[j], i);
            res2 += (zdot - c1_hat * f) * (zdot - c1_hat * f);
        }
    }
    let per_index = (0..k)
        .map(|i| if sxx[i] > 1e-300 { sxy[i] / sxx[i] } else { f64::NAN })
        .collect();
    Ok(C1Fit { c1_hat, residual: (res2 / syy.max(1e-300)).sqrt(), per_index })
}

/// Fitted bound ratio for the ν-drift estimate: the smallest C with
/// |ν̇ᵢ − νᵢ|/(1−dᵢ²) ≤ C·(‖q‖²_H + J + ‖q‖_H·J̄) over the sampled series.
pub fn nu_drift_ratio(p: f64, rows: &[ModSeriesRow]) -> Result<f64> {
    if rows.len() < 3 {
        return Err(LabError::invalid("need at least 3 samples"));
    }
    let k = rows[0].zeta.len();
    let mut c = 0.0f64;
    for j in 1..rows.len() - 1 {
        let dt = rows[j + 1].s - rows[j - 1].s;
        let bound = rows[j].q_norm * rows[j].q_norm + rows[j].j + rows[j].q_norm * rows[j].jbar;
        if bound <= 0.0 {
            continue;
        }
        for i in 0..k {
            let nudot = (rows[j + 1].nu[i] - rows[j - 1].nu[i]) / dt;
            let d = -rows[j].zeta[i].tanh();
            let lhs = (nudot - rows[j].nu[i]).abs() / ((1.0 - d) * (1.0 + d));
            c = c.max(lhs / bound);
        }
    }
    let _ = p;
    Ok(c)
}
