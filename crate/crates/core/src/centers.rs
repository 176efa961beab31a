//! Finite-dimensional soliton-center dynamics.
//!
//! Three equivalent descriptions of the same motion are implemented: the
//! center system ζ̇ᵢ = c₁(e^{−2(ζᵢ−ζᵢ₋₁)/(p−1)} − e^{−2(ζᵢ₊₁−ζᵢ)/(p−1)}),
//! the deviation system for ξᵢ = (2/(p−1))(ζᵢ − ζ̄ᵢ(s)) in τ = log s, and the
//! gap-variable system for bᵢ = σᵢ₋₁(e^{−(ξᵢ−ξᵢ₋₁)} − 1). B = max bᵢ and
//! −b = −min bᵢ are Lyapunov functionals; the compact ∏[−σᵢ₋₁+η, A] is
//! flow-invariant, which combined with a generic Lyapunov-attractor argument
//! drives every bounded solution to the explicit one.

use crate::error::{LabError, Result};
use crate::numerics::{integrate_rk, Trajectory, DEFAULT_ODE_TOL};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Exponent cap p̄: p below 2, 2 − 1/100 at p = 2, and 2 above.
pub fn p_bar(p: f64) -> f64 {
    if p < 2.0 {
        p
    } else if p == 2.0 {
        2.0 - 0.01
    } else {
        2.0
    }
}

/// Model parameters shared across the artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelParams {
    /// Nonlinearity exponent, p > 1.
    pub p: f64,
    /// Soliton count, k ≥ 2.
    pub k: usize,
    /// ODE constant multiplying the exponential interaction; default 1
    /// (a time rescaling makes that canonical for the pure ODE study; the
    /// PDE-facing value is fitted, see `modulation::fit_c1`).
    pub c1: f64,
    /// Decay exponent of the injected rest term R_i(s) = O(s^{−1−η}).
    pub eta_rest: f64,
    /// The δ entering the shrink exponent; existence-level, default 1.
    pub delta: f64,
    /// Shrink exponent η = (1/4)·min{1, δ, p̄/2 − 1/2} (derived).
    pub eta_shrink: f64,
}

impl ModelParams {
    pub fn new(p: f64, k: usize, c1: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(LabError::invalid(format!("p must exceed 1, got {p}")));
        }
        if k < 2 {
            return Err(LabError::invalid(format!("k must be at least 2, got {k}")));
        }
        if !(c1 > 0.0) {
            return Err(LabError::invalid(format!("c1 must be positive, got {c1}")));
        }
        let delta = 1.0;
        let eta_shrink = 0.25 * 1.0f64.min(delta).min(p_bar(p) / 2.0 - 0.5);
        Ok(ModelParams { p, k, c1, eta_rest: 0.3, delta, eta_shrink })
    }

    pub fn with_eta_rest(mut self, eta: f64) -> Self {
        self.eta_rest = eta;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self.eta_shrink = 0.25 * 1.0f64.min(delta).min(p_bar(self.p) / 2.0 - 0.5);
        self
    }
}

/// Center system data: γᵢ, σᵢ and the explicit-solution offsets ᾱᵢ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterSystem {
    pub params: ModelParams,
    /// γᵢ = (p−1)(−i + (k+1)/2), i = 1..k.
    gamma: Vec<f64>,
    /// σᵢ = i(k−i)/2, i = 0..k (σ₀ = σₖ = 0).
    sigma: Vec<f64>,
    /// Zero-sum offsets of the explicit solution.
    bar_alpha: Vec<f64>,
}

impl CenterSystem {
    pub fn new(params: ModelParams) -> Self {
        let (p, k, c1) = (params.p, params.k, params.c1);
        let gamma: Vec<f64> =
            (1..=k).map(|i| (p - 1.0) * (-(i as f64) + (k as f64 + 1.0) / 2.0)).collect();
        let sigma: Vec<f64> = (0..=k).map(|i| (i * (k - i)) as f64 / 2.0).collect();

        // Gap recurrence e^{−2(ᾱᵢ−ᾱᵢ₋₁)/(p−1)} = (p−1)(i−1)(k+1−i)/(4c₁)
        // closed by the zero-sum condition.
        let deltas: Vec<f64> = (2..=k)
            .map(|i| {
                let rhs = (p - 1.0) * ((i - 1) * (k + 1 - i)) as f64 / (4.0 * c1);
                -(p - 1.0) / 2.0 * rhs.ln()
            })
            .collect();
        let mut alpha1 = 0.0;
        for (idx, &d) in deltas.iter().enumerate() {
            let j = idx + 2;
            alpha1 -= (k + 1 - j) as f64 * d;
        }
        alpha1 /= k as f64;
        let mut bar_alpha = Vec::with_capacity(k);
        let mut acc = alpha1;
        bar_alpha.push(acc);
        for &d in &deltas {
            acc += d;
            bar_alpha.push(acc);
        }

        CenterSystem { params, gamma, sigma, bar_alpha }
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn bar_alpha(&self) -> &[f64] {
        &self.bar_alpha
    }

    /// Explicit zero-center-of-mass solution ζ̄ᵢ(s) = −(γᵢ/2) log s + ᾱᵢ.
    pub fn bar_zeta(&self, s: f64) -> Result<Vec<f64>> {
        if !(s > 0.0) {
            return Err(LabError::invalid(format!("similarity time must be positive, got {s}")));
        }
        let ls = s.ln();
        Ok(self
            .gamma
            .iter()
            .zip(&self.bar_alpha)
            .map(|(&g, &a)| -0.5 * g * ls + a)
            .collect())
    }

    /// d/ds of the explicit solution, (−γᵢ/(2s))ᵢ.
    pub fn bar_zeta_dot(&self, s: f64) -> Vec<f64> {
        self.gamma.iter().map(|&g| -0.5 * g / s).collect()
    }

    /// Center vector field ζ̇ᵢ, boundary gaps treated as infinite.
    pub fn rhs_tl(&self, zeta: &[f64]) -> Vec<f64> {
        let k = self.k();
        assert_eq!(zeta.len(), k);
        let (p, c1) = (self.params.p, self.params.c1);
        let e = |gap: f64| (-2.0 / (p - 1.0) * gap).exp();
        (0..k)
            .map(|i| {
                let left = if i == 0 { 0.0 } else { e(zeta[i] - zeta[i - 1]) };
                let right = if i == k - 1 { 0.0 } else { e(zeta[i + 1] - zeta[i]) };
                c1 * (left - right)
            })
            .collect()
    }

    /// Validity predicate used by callers: strictly increasing centers.
    pub fn is_ordered(zeta: &[f64]) -> bool {
        zeta.windows(2).all(|w| w[1] > w[0])
    }

    /// Gap variables bᵢ, i = 1..k+1, with the zero boundary entries included.
    fn b_full(&self, xi: &[f64]) -> Vec<f64> {
        let k = self.k();
        assert_eq!(xi.len(), k);
        let mut full = vec![0.0; k + 1];
        for m in 1..k {
            full[m] = self.sigma[m] * ((-(xi[m] - xi[m - 1])).exp() - 1.0);
        }
        full
    }

    /// Deviation vector field dξ/dτ; the components sum to zero by
    /// telescoping, so ∑ξᵢ is preserved.
    pub fn rhs_ptl(&self, xi: &[f64]) -> Vec<f64> {
        let full = self.b_full(xi);
        (0..self.k()).map(|m| full[m] - full[m + 1]).collect()
    }

    /// Gap-variable vector field on (b₂, …, bₖ).
    ///
    /// Rejects states outside the equivalence domain bᵢ > −σᵢ₋₁.
    pub fn rhs_b(&self, b: &[f64]) -> Result<Vec<f64>> {
        let k = self.k();
        assert_eq!(b.len(), k - 1);
        for (j, &v) in b.iter().enumerate() {
            let bound = -self.sigma[j + 1];
            if v <= bound {
                return Err(LabError::invalid(format!(
                    "b_{} = {v} outside the equivalence domain (must exceed {bound})",
                    j + 2
                )));
            }
        }
        Ok(self.rhs_b_unchecked(b))
    }

    fn rhs_b_unchecked(&self, b: &[f64]) -> Vec<f64> {
        let k = self.k();
        let mut full = vec![0.0; k + 1];
        full[1..k].copy_from_slice(b);
        (0..k - 1)
            .map(|j| (full[j + 1] + self.sigma[j + 1]) * (full[j] - 2.0 * full[j + 1] + full[j + 2]))
            .collect()
    }

    /// Lyapunov data (bᵢ)ᵢ₌₂..ₖ with b = min and B = max over all k+1 entries.
    pub fn lyapunov_bb(&self, xi: &[f64]) -> LyapState {
        let full = self.b_full(xi);
        let b_min = full.iter().copied().fold(f64::INFINITY, f64::min);
        let b_max = full.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        LyapState { b_seq: full[1..self.k()].to_vec(), b_min, b_max }
    }

    /// Deviations ξᵢ = (2/(p−1))(ζᵢ − ζ̄ᵢ(s)).
    pub fn xi_from_zeta(&self, s: f64, zeta: &[f64]) -> Result<Vec<f64>> {
        let bz = self.bar_zeta(s)?;
        Ok(zeta
            .iter()
            .zip(&bz)
            .map(|(&z, &b)| 2.0 / (self.params.p - 1.0) * (z - b))
            .collect())
    }

    pub fn zeta_from_xi(&self, s: f64, xi: &[f64]) -> Result<Vec<f64>> {
        let bz = self.bar_zeta(s)?;
        Ok(xi
            .iter()
            .zip(&bz)
            .map(|(&x, &b)| b + 0.5 * (self.params.p - 1.0) * x)
            .collect())
    }

    /// Integrate the deviation system from `xi0` over a τ-span, sampling at
    /// the given cadence.
    pub fn integrate_ptl(&self, xi0: &[f64], tau_span: f64, cadence: f64) -> Result<Trajectory> {
        let n_samples = (tau_span / cadence).round() as usize;
        let samples: Vec<f64> = (0..=n_samples).map(|j| j as f64 * cadence).collect();
        integrate_rk(
            |_, xi| self.rhs_ptl(xi),
            xi0,
            0.0,
            tau_span,
            DEFAULT_ODE_TOL,
            Some(&samples),
        )
    }

    /// Monotonicity certificate for B, −b and B−b along one trajectory.
    pub fn check_monotone_lyapunov(&self, xi0: &[f64], tau_span: f64) -> Result<LyapunovReport> {
        let sum: f64 = xi0.iter().sum();
        let scale = xi0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if sum.abs() > 1e-9 * scale {
            return Err(LabError::invalid(format!("xi0 must have zero sum, got {sum:.3e}")));
        }
        let cadence = 0.02;
        let traj = self.integrate_ptl(xi0, tau_span, cadence)?;

        let stats: Vec<(f64, f64, f64, f64)> = traj
            .states
            .iter()
            .map(|xi| {
                let l = self.lyapunov_bb(xi);
                let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                let drift = xi.iter().sum::<f64>().abs();
                (l.b_max, -l.b_min, norm, drift)
            })
            .collect();

        let mut max_rise_big_b = 0.0f64;
        let mut max_rise_neg_b = 0.0f64;
        for w in stats.windows(2) {
            max_rise_big_b = max_rise_big_b.max(w[1].0 - w[0].0);
            max_rise_neg_b = max_rise_neg_b.max(w[1].1 - w[0].1);
        }
        let max_sum_drift = stats.iter().map(|t| t.3).fold(0.0, f64::max);

        // Strict decrease of B−b measured over windows of width 0.5 in τ while
        // the state is away from the critical point.
        let window = (0.5 / cadence).round() as usize;
        let mut min_window_decrease_per_tau: Option<f64> = None;
        for j in 0..stats.len().saturating_sub(window) {
            if stats[j].2 >= 1e-3 {
                let gap0 = stats[j].0 + stats[j].1;
                let gap1 = stats[j + window].0 + stats[j + window].1;
                let rate = (gap0 - gap1) / (window as f64 * cadence);
                min_window_decrease_per_tau = Some(match min_window_decrease_per_tau {
                    Some(m) => m.min(rate),
                    None => rate,
                });
            }
        }

        Ok(LyapunovReport {
            max_rise_big_b,
            max_rise_neg_b,
            max_sum_drift,
            min_window_decrease_per_tau,
            initial_gap: stats.first().map(|t| t.0 + t.1).unwrap_or(0.0),
            final_gap: stats.last().map(|t| t.0 + t.1).unwrap_or(0.0),
        })
    }

    /// Flow-invariance check of the compact ∏ᵢ₌₂..ₖ [−σᵢ₋₁+η, A] for the
    /// gap-variable system, sampling faces and interior.
    pub fn check_compact_stability(
        &self,
        eta: f64,
        a: f64,
        n_samples: usize,
        horizon: f64,
        seed: u64,
    ) -> Result<CompactStabilityReport> {
        if !(eta > 0.0 && eta <= 0.2) {
            return Err(LabError::invalid(format!("eta must lie in (0, 1/5], got {eta}")));
        }
        if a < 0.0 {
            return Err(LabError::invalid("A must be nonnegative"));
        }
        let k = self.k();
        let dim = k - 1;
        let lows: Vec<f64> = (0..dim).map(|j| -self.sigma[j + 1] + eta).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let starts: Vec<Vec<f64>> = (0..n_samples)
            .map(|idx| {
                let mut b: Vec<f64> = (0..dim).map(|j| rng.gen_range(lows[j]..=a)).collect();
                if idx % 2 == 0 {
                    // pin one coordinate to a face
                    let j = rng.gen_range(0..dim);
                    b[j] = if rng.gen_bool(0.5) { lows[j] } else { a };
                }
                b
            })
            .collect();

        let escapes: Vec<BoxEscape> = starts
            .par_iter()
            .enumerate()
            .filter_map(|(idx, b0)| {
                let traj = match integrate_rk(
                    |_, b| self.rhs_b_unchecked(b),
                    b0,
                    0.0,
                    horizon,
                    DEFAULT_ODE_TOL,
                    Some(&sample_grid(horizon, 0.05)),
                ) {
                    Ok(t) => t,
                    Err(e) => {
                        return Some(BoxEscape {
                            sample: idx,
                            tau: f64::NAN,
                            coord: 0,
                            side: format!("integration failure: {e}"),
                            value: f64::NAN,
                        })
                    }
                };
                for (t, state) in traj.times.iter().zip(&traj.states) {
                    for j in 0..dim {
                        if state[j] < lows[j] - 1e-8 {
                            return Some(BoxEscape {
                                sample: idx,
                                tau: *t,
                                coord: j + 2,
                                side: "low".into(),
                                value: state[j],
                            });
                        }
                        if state[j] > a + 1e-8 {
                            return Some(BoxEscape {
                                sample: idx,
                                tau: *t,
                                coord: j + 2,
                                side: "high".into(),
                                value: state[j],
                            });
                        }
                    }
                }
                None
            })
            .collect();

        Ok(CompactStabilityReport { n_samples, eta, a, horizon, escapes })
    }

    /// Perturbed center system ζ̇ = rhs_tl(ζ) + R(s): integrates, extracts the
    /// center-of-mass limit, and fits the tail deviation against s^{−η}.
    pub fn integrate_perturbed(
        &self,
        zeta0: &[f64],
        s0: f64,
        s1: f64,
        rest: &dyn Fn(f64) -> Vec<f64>,
    ) -> Result<PerturbedReport> {
        if !(s1 > s0 && s0 > 0.0) {
            return Err(LabError::invalid("need s1 > s0 > 0"));
        }
        let eta = self.params.eta_rest;
        // geometric sampling matches the log s clock of the dynamics
        let n = 400usize;
        let ratio = (s1 / s0).powf(1.0 / n as f64);
        let mut samples: Vec<f64> = (0..=n).map(|j| (s0 * ratio.powi(j as i32)).min(s1)).collect();
        *samples.last_mut().unwrap() = s1;
        let traj = integrate_rk(
            |s, z| {
                let mut v = self.rhs_tl(z);
                let r = rest(s);
                for i in 0..v.len() {
                    v[i] += r[i];
                }
                v
            },
            zeta0,
            s0,
            s1,
            DEFAULT_ODE_TOL,
            Some(&samples),
        )?;

        let kf = self.k() as f64;
        let zeta0_hat = traj.last_state().iter().sum::<f64>() / kf;

        // tail fit of sup_i |ζ_i(s) − ζ̄_i(s) − ζ₀| against s^{−η}, over the
        // geometric second half of the run
        let s_mid = (s0 * s1).sqrt();
        let mut c_fit = 0.0f64;
        for (s, z) in traj.times.iter().zip(&traj.states) {
            if *s < s_mid {
                continue;
            }
            let bz = self.bar_zeta(*s)?;
            let dev = z
                .iter()
                .zip(&bz)
                .map(|(&zi, &bi)| (zi - bi - zeta0_hat).abs())
                .fold(0.0f64, f64::max);
            c_fit = c_fit.max(dev * s.powf(eta));
        }
        Ok(PerturbedReport { trajectory: traj, zeta0_hat, c_fit, eta })
    }
}

/// Gap-variable snapshot: b₂..bₖ plus min/max over all k+1 entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapState {
    pub b_seq: Vec<f64>,
    pub b_min: f64,
    pub b_max: f64,
}

impl LyapState {
    /// The decreasing functional B − b.
    pub fn gap(&self) -> f64 {
        self.b_max - self.b_min
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Largest upward move of B between consecutive samples.
    pub max_rise_big_b: f64,
    /// Largest upward move of −b between consecutive samples.
    pub max_rise_neg_b: f64,
    /// Largest |∑ξᵢ| along the trajectory.
    pub max_sum_drift: f64,
    /// Smallest decrease rate of B−b per unit τ over width-0.5 windows whose
    /// start has ‖ξ‖ ≥ 1e−3; None when no window qualifies.
    pub min_window_decrease_per_tau: Option<f64>,
    pub initial_gap: f64,
    pub final_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxEscape {
    pub sample: usize,
    pub tau: f64,
    /// Paper index i of the escaping coordinate bᵢ.
    pub coord: usize,
    pub side: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompactStabilityReport {
    pub n_samples: usize,
    pub eta: f64,
    pub a: f64,
    pub horizon: f64,
    pub escapes: Vec<BoxEscape>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbedReport {
    pub trajectory: Trajectory,
    /// Extracted center-of-mass limit ζ₀.
    pub zeta0_hat: f64,
    /// Fitted constant in sup_i |ζᵢ(s) − ζ̄ᵢ(s) − ζ₀| ≤ C s^{−η}.
    pub c_fit: f64,
    pub eta: f64,
}

/// Least-squares decay fit of log‖ξ(τ)‖ against τ over the linear regime.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Fit the tail decay exponent of a deviation trajectory. Uses samples with
/// ‖ξ‖ ∈ [1e−11, 0.1]; rejects trajectories that never enter that regime.
pub fn convergence_rate(trajectory: &Trajectory) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = trajectory
        .times
        .iter()
        .zip(&trajectory.states)
        .filter_map(|(&t, xi)| {
            let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm > 1e-11 && norm < 0.1).then(|| (t, norm.ln()))
        })
        .collect();
    if pts.len() < 8 {
        return Err(LabError::DegenerateFit(format!(
            "only {} samples inside the linear regime ‖ξ‖ ∈ (1e−11, 0.1)",
            pts.len()
        )));
    }
    let span = pts.last().unwrap().0 - pts.first().unwrap().0;
    if span < 1.0 {
        return Err(LabError::DegenerateFit(format!("fit window spans only Δτ = {span:.3}")));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(LabError::DegenerateFit("degenerate abscissa".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok(RateFit {
        slope,
        intercept,
        window: (pts.first().unwrap().0, pts.last().unwrap().0),
        n_points: pts.len(),
    })
}

/// Options for the generic Lyapunov-attractor certificate.
#[derive(Debug, Clone)]
pub struct AttractorOptions {
    /// Distance below which the state counts as "at x₀".
    pub dist_tol: f64,
    /// Width (in flow time) of the strict-decrease windows.
    pub window: f64,
    /// Minimum required drop of L per window, relative to |L|, while away
    /// from x₀.
    pub strict_drop: f64,
    pub seed: u64,
}

impl Default for AttractorOptions {
    fn default() -> Self {
        // strict_drop sits above the integrator's relative energy drift so a
        // conserved L cannot pass as decreasing
        AttractorOptions { dist_tol: 1e-6, window: 0.5, strict_drop: 1e-9, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SampleFailure {
    LeftBox { t: f64, coord: usize },
    NotDecreasing { t: f64, rise: f64 },
    NotConverged { final_dist: f64 },
    Integration { message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub start: Vec<f64>,
    pub failure: Option<SampleFailure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttractorVerdict {
    pub all_converged: bool,
    pub samples: Vec<SampleOutcome>,
}

/// Numerical counterpart of the Lyapunov attractor theorem: on sampled starts
/// in a compact box, certify forward invariance, strict decrease of L away
/// from x₀, and terminal convergence to x₀.
pub fn lyapunov_attractor_check(
    flow: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    box_: &[(f64, f64)],
    l_func: &(dyn Fn(&[f64]) -> f64 + Sync),
    x0: &[f64],
    horizon: f64,
    n_samples: usize,
    opts: &AttractorOptions,
) -> AttractorVerdict {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let dim = box_.len();
    let starts: Vec<Vec<f64>> = (0..n_samples)
        .map(|_| (0..dim).map(|j| rng.gen_range(box_[j].0..=box_[j].1)).collect())
        .collect();

    let cadence = 0.05f64.min(opts.window / 4.0);
    let samples = sample_grid(horizon, cadence);
    let window_steps = (opts.window / cadence).round() as usize;

    let outcomes: Vec<SampleOutcome> = starts
        .par_iter()
        .map(|start| {
            let traj = match integrate_rk(
                |_, x| flow(x),
                start,
                0.0,
                horizon,
                DEFAULT_ODE_TOL,
                Some(&samples),
            ) {
                Ok(t) => t,
                Err(e) => {
                    return SampleOutcome {
                        start: start.clone(),
                        failure: Some(SampleFailure::Integration { message: e.to_string() }),
                    }
                }
            };
            // forward invariance
            for (t, x) in traj.times.iter().zip(&traj.states) {
                for j in 0..dim {
                    if x[j] < box_[j].0 - 1e-8 || x[j] > box_[j].1 + 1e-8 {
                        return SampleOutcome {
                            start: start.clone(),
                            failure: Some(SampleFailure::LeftBox { t: *t, coord: j }),
                        };
                    }
                }
            }
            // strict decrease over windows while away from x0
            let dist = |x: &[f64]| -> f64 {
                x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            };
            let lvals: Vec<f64> = traj.states.iter().map(|x| l_func(x)).collect();
            for j in 0..traj.states.len().saturating_sub(window_steps) {
                if dist(&traj.states[j]) >= opts.dist_tol {
                    let drop = lvals[j] - lvals[j + window_steps];
                    if drop < opts.strict_drop * lvals[j].abs() {
                        return SampleOutcome {
                            start: start.clone(),
                            failure: Some(SampleFailure::NotDecreasing {
                                t: traj.times[j],
                                rise: -drop,
                            }),
                        };
                    }
                }
            }
            let final_dist = dist(traj.last_state());
            if final_dist > opts.dist_tol {
                return SampleOutcome {
                    start: start.clone(),
                    failure: Some(SampleFailure::NotConverged { final_dist }),
                };
            }
            SampleOutcome { start: start.clone(), failure: None }
        })
        .collect();

    AttractorVerdict { all_converged: outcomes.iter().all(|o| o.failure.is_none()), samples: outcomes }
}

/// Uniform sample times 0, c, 2c, …, horizon.
pub(crate) fn sample_grid(horizon: f64, cadence: f64) -> Vec<f64> {
    let n = (horizon / cadence).round() as usize;
    let mut v: Vec<f64> = (0..n).map(|j| j as f64 * cadence).collect();
    v.push(horizon);
    v
}

/// Draw a random zero-sum deviation vector with entries of the given scale.
pub fn random_zero_sum(k: usize, scale: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut xi: Vec<f64> = (0..k).map(|_| rng.gen_range(-scale..scale)).collect();
    let mean = xi.iter().sum::<f64>() / k as f64;
    for v in &mut xi {
        *v -= mean;
    }
    xi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn system(p: f64, k: usize, c1: f64) -> CenterSystem {
        CenterSystem::new(ModelParams::new(p, k, c1).unwrap())
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1.0, 2, 1.0).is_err());
        assert!(ModelParams::new(3.0, 1, 1.0).is_err());
        assert!(ModelParams::new(3.0, 2, 0.0).is_err());
        let p = ModelParams::new(3.0, 2, 1.0).unwrap();
        assert_abs_diff_eq!(p.eta_shrink, 0.125);
        let p2 = ModelParams::new(2.0, 2, 1.0).unwrap();
        assert_abs_diff_eq!(p2.eta_shrink, 0.25 * (1.99 / 2.0 - 0.5), epsilon = 1e-15);
    }

    #[test]
    fn bar_alpha_two_solitons_hand_solved() {
        // e^{−(ᾱ₂−ᾱ₁)} = 1/2 with zero sum gives (−log2/2, log2/2).
        let sys = system(3.0, 2, 1.0);
        let a = sys.bar_alpha();
        assert_abs_diff_eq!(a[0], -0.5 * 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(a[1], 0.5 * 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn bar_alpha_zero_sum_and_antisymmetry() {
        for k in 2..=8 {
            for &(p, c1) in &[(3.0, 1.0), (2.0, 0.7), (1.4, 2.0)] {
                let sys = system(p, k, c1);
                let a = sys.bar_alpha();
                let sum: f64 = a.iter().sum();
                assert!(sum.abs() < 1e-12, "sum {sum} at k={k}");
                for i in 0..k {
                    assert!(
                        (a[i] + a[k - 1 - i]).abs() < 1e-12,
                        "antisymmetry broken at k={k}, i={i}"
                    );
                }
                // the defining recurrence holds exactly
                for i in 2..=k {
                    let lhs = (-(2.0 / (p - 1.0)) * (a[i - 1] - a[i - 2])).exp();
                    let rhs = (p - 1.0) * ((i - 1) * (k + 1 - i)) as f64 / (4.0 * c1);
                    assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * rhs.abs());
                }
            }
        }
    }

    #[test]
    fn bar_zeta_two_soliton_value() {
        let sys = system(3.0, 2, 1.0);
        let z = sys.bar_zeta(10.0).unwrap();
        assert_abs_diff_eq!(z[1], 0.5 * 10f64.ln() + 0.5 * 2f64.ln(), epsilon = 1e-12);
        assert!((z[0] + z[1]).abs() < 1e-12);
        assert!(sys.bar_zeta(0.0).is_err());
    }

    #[test]
    fn bar_zeta_middle_soliton_fixed_for_odd_k() {
        let sys = system(3.0, 5, 1.3);
        for &s in &[2.0, 10.0, 500.0] {
            let z = sys.bar_zeta(s).unwrap();
            assert!(z[2].abs() < 1e-12, "middle center {} at s={s}", z[2]);
            let sum: f64 = z.iter().sum();
            assert!(sum.abs() < 1e-11);
        }
    }

    #[test]
    fn explicit_solution_solves_center_system() {
        for &k in &[2usize, 3, 5] {
            for &(p, c1) in &[(3.0, 1.0), (2.0, 0.5)] {
                let sys = system(p, k, c1);
                for &s in &[5.0, 50.0, 500.0] {
                    let z = sys.bar_zeta(s).unwrap();
                    let rhs = sys.rhs_tl(&z);
                    let want = sys.bar_zeta_dot(s);
                    for i in 0..k {
                        assert!(
                            (rhs[i] - want[i]).abs() <= 1e-12,
                            "residual {} at k={k} p={p} s={s} i={i}",
                            (rhs[i] - want[i]).abs()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn symmetric_pair_pushes_apart() {
        let sys = system(3.0, 2, 1.0);
        let a = 0.7;
        let rhs = sys.rhs_tl(&[-a, a]);
        let want = 1.0 * (-4.0 * a / 2.0).exp();
        assert_abs_diff_eq!(rhs[1], want, epsilon = 1e-15);
        assert_abs_diff_eq!(rhs[0], -want, epsilon = 1e-15);
    }

    #[test]
    fn huge_gaps_give_vanishing_field() {
        let sys = system(3.0, 3, 1.0);
        let z = [-600.0, 0.0, 600.0]; // gaps ≥ 300·(p−1)
        for v in sys.rhs_tl(&z) {
            assert!(v.abs() < 1e-260, "field {v}");
        }
    }

    #[test]
    fn deviation_field_fixes_origin_and_preserves_sum() {
        let sys = system(3.0, 4, 1.0);
        for v in sys.rhs_ptl(&[0.0; 4]) {
            assert_eq!(v, 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let xi = random_zero_sum(4, 2.0, &mut rng);
            let f = sys.rhs_ptl(&xi);
            let sum: f64 = f.iter().sum();
            let scale: f64 = f.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            assert!(sum.abs() <= 1e-13 * scale, "sum {sum}");
        }
    }

    #[test]
    fn deviation_field_consistent_with_center_field() {
        // chain rule: dξ/dτ = s·(2/(p−1))·(rhs_tl(ζ) − dζ̄/ds) at ζ = ζ̄ + (p−1)ξ/2
        let sys = system(2.5, 4, 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let xi = random_zero_sum(4, 1.0, &mut rng);
            let s = rng.gen_range(2.0..50.0);
            let zeta = sys.zeta_from_xi(s, &xi).unwrap();
            let via_tl: Vec<f64> = {
                let tl = sys.rhs_tl(&zeta);
                let bzd = sys.bar_zeta_dot(s);
                tl.iter()
                    .zip(&bzd)
                    .map(|(&a, &b)| s * 2.0 / (sys.params.p - 1.0) * (a - b))
                    .collect()
            };
            let direct = sys.rhs_ptl(&xi);
            for i in 0..4 {
                let scale = direct[i].abs().max(1e-3);
                assert!(
                    (via_tl[i] - direct[i]).abs() <= 1e-10 * scale,
                    "mismatch {} vs {}",
                    via_tl[i],
                    direct[i]
                );
            }
        }
    }

    #[test]
    fn gap_field_consistent_with_deviation_field() {
        // ḃᵢ = σᵢ₋₁ e^{−(ξᵢ−ξᵢ₋₁)} (ξ̇ᵢ₋₁ − ξ̇ᵢ)
        let sys = system(3.0, 5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let xi = random_zero_sum(5, 1.2, &mut rng);
            let xidot = sys.rhs_ptl(&xi);
            let lyap = sys.lyapunov_bb(&xi);
            let bdot = sys.rhs_b(&lyap.b_seq).unwrap();
            for m in 1..5 {
                let want =
                    sys.sigma()[m] * (-(xi[m] - xi[m - 1])).exp() * (xidot[m - 1] - xidot[m]);
                let got = bdot[m - 1];
                let scale = want.abs().max(1e-6);
                assert!((got - want).abs() <= 1e-10 * scale, "got {got} want {want}");
            }
        }
    }

    #[test]
    fn gap_field_rejects_domain_violation() {
        let sys = system(3.0, 3, 1.0);
        // σ₁ = 1 for k = 3, so b₂ = −1 is outside
        assert!(sys.rhs_b(&[-1.0, 0.0]).is_err());
        assert!(sys.rhs_b(&[0.0, 0.0]).is_ok());
    }

    #[test]
    fn gap_field_zero_fixed_point_and_boundary_inward() {
        let sys = system(3.0, 3, 1.0);
        for v in sys.rhs_b(&[0.0, 0.0]).unwrap() {
            assert_eq!(v, 0.0);
        }
        // boundary point b = (−σ₁+η, 0): inward derivative bound from the
        // convexity of σ
        let eta = 0.2;
        let s1 = sys.sigma()[1];
        let b = [-s1 + eta, 0.0];
        let db = sys.rhs_b(&b).unwrap();
        let bound = eta * (-sys.sigma()[1] + 2.0 * sys.sigma()[1] - 2.0 * eta - sys.sigma()[2])
            .max(0.5 - 2.0 * eta);
        assert!(db[0] > 0.0 && db[0] >= bound - 1e-12, "db {} bound {bound}", db[0]);
    }

    #[test]
    fn lyapunov_state_signs_and_example() {
        let sys = system(3.0, 2, 1.0);
        let l = sys.lyapunov_bb(&[0.0, 0.0]);
        assert_eq!((l.b_min, l.b_max), (0.0, 0.0));

        // k=2, ξ = (1, −1): b₂ = σ₁(e² − 1), so B = b₂ and b = 0
        let l = sys.lyapunov_bb(&[1.0, -1.0]);
        let want = 0.5 * (2f64.exp() - 1.0);
        assert_abs_diff_eq!(l.b_max, want, epsilon = 1e-12);
        assert_eq!(l.b_min, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let xi = random_zero_sum(5, 2.0, &mut rng);
            let l = system(3.0, 5, 1.0).lyapunov_bb(&xi);
            assert!(l.b_min <= 0.0 && l.b_max >= 0.0);
        }
    }

    #[test]
    fn monotone_lyapunov_on_stationary_and_generic_starts() {
        let sys = system(3.0, 3, 1.0);
        let rep = sys.check_monotone_lyapunov(&[0.0; 3], 5.0).unwrap();
        assert_eq!(rep.initial_gap, 0.0);
        assert_eq!(rep.final_gap, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let xi0 = random_zero_sum(3, 2.0, &mut rng);
            let rep = sys.check_monotone_lyapunov(&xi0, 20.0).unwrap();
            assert!(rep.max_rise_big_b <= 1e-8, "B rose by {}", rep.max_rise_big_b);
            assert!(rep.max_rise_neg_b <= 1e-8, "−b rose by {}", rep.max_rise_neg_b);
            assert!(rep.max_sum_drift <= 1e-9);
            assert!(rep.final_gap < rep.initial_gap);
            if let Some(rate) = rep.min_window_decrease_per_tau {
                assert!(rate >= 1e-10, "window decrease rate {rate}");
            }
        }

        assert!(sys.check_monotone_lyapunov(&[1.0, 0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn compact_box_traps_the_flow() {
        let sys = system(3.0, 4, 1.0);
        let rep = sys.check_compact_stability(0.2, 2.0, 40, 15.0, 11).unwrap();
        assert!(rep.escapes.is_empty(), "escapes: {:?}", rep.escapes);
        assert!(sys.check_compact_stability(0.3, 2.0, 1, 1.0, 0).is_err());
    }

    #[test]
    fn convergence_rate_matches_spectral_gap() {
        let sys = system(3.0, 2, 1.0);
        let traj = sys.integrate_ptl(&[0.8, -0.8], 25.0, 0.05).unwrap();
        let fit = convergence_rate(&traj).unwrap();
        assert!(fit.slope > -1.1 && fit.slope < -0.9, "slope {}", fit.slope);

        let flat = sys.integrate_ptl(&[0.0, 0.0], 25.0, 0.05).unwrap();
        assert!(convergence_rate(&flat).is_err());
    }

    #[test]
    fn fast_mode_decays_at_its_own_rate_before_crossover() {
        // start along the e₃ eigenvector of M (zero-sum automatically)
        let sys = system(3.0, 3, 1.0);
        let spec = crate::spectral::exact_spectrum(3).unwrap();
        let e3 = &spec.eigenvectors[2];
        let xi0: Vec<f64> = e3.iter().map(|v| 1e-4 * v).collect();
        let traj = sys.integrate_ptl(&xi0, 4.0, 0.02).unwrap();
        let fit = convergence_rate(&traj).unwrap();
        assert!(fit.slope > -3.2 && fit.slope < -2.8, "slope {}", fit.slope);
    }

    #[test]
    fn perturbed_system_translation_invariance() {
        let sys = system(3.0, 3, 1.0);
        let s0 = 2.0;
        let c = 0.37;
        let z0: Vec<f64> = sys.bar_zeta(s0).unwrap().iter().map(|z| z + c).collect();
        let rep = sys
            .integrate_perturbed(&z0, s0, 100.0, &|_s| vec![0.0; 3])
            .unwrap();
        // ζ(s) = ζ̄(s) + c exactly
        for (s, z) in rep.trajectory.times.iter().zip(&rep.trajectory.states) {
            let bz = sys.bar_zeta(*s).unwrap();
            for i in 0..3 {
                assert!(
                    (z[i] - bz[i] - c).abs() <= 1e-9,
                    "deviation {} at s={s}",
                    (z[i] - bz[i] - c).abs()
                );
            }
        }
        assert_abs_diff_eq!(rep.zeta0_hat, c, epsilon = 1e-9);
    }

    #[test]
    fn unperturbed_tail_decays_like_one_over_s() {
        let mut params = ModelParams::new(3.0, 3, 1.0).unwrap();
        params.eta_rest = 1.0; // fit the tail against s^{−1}
        let sys = CenterSystem::new(params);
        let s0 = 2.0;
        let mut z0 = sys.bar_zeta(s0).unwrap();
        z0[0] -= 0.4;
        z0[2] += 0.4;
        let rep = sys.integrate_perturbed(&z0, s0, 400.0, &|_s| vec![0.0; 3]).unwrap();
        assert!(rep.c_fit.is_finite() && rep.c_fit < 10.0, "C = {}", rep.c_fit);
        // deviation at the end is consistent with C/s
        let bz = sys.bar_zeta(400.0).unwrap();
        let dev = rep
            .trajectory
            .last_state()
            .iter()
            .zip(&bz)
            .map(|(&z, &b)| (z - b - rep.zeta0_hat).abs())
            .fold(0.0f64, f64::max);
        assert!(dev <= 1.5 * rep.c_fit / 400.0 + 1e-9, "dev {dev} vs C/s {}", rep.c_fit / 400.0);
    }

    #[test]
    fn attractor_check_linear_sink_and_rotation_counterexample() {
        let sink = |x: &[f64]| x.iter().map(|v| -v).collect::<Vec<f64>>();
        let norm2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let box2 = [(-1.0, 1.0), (-1.0, 1.0)];
        let verdict = lyapunov_attractor_check(
            &sink,
            &box2,
            &norm2,
            &[0.0, 0.0],
            20.0,
            16,
            &AttractorOptions::default(),
        );
        assert!(verdict.all_converged);

        let rotation = |x: &[f64]| vec![-x[1], x[0]];
        let verdict = lyapunov_attractor_check(
            &rotation,
            &box2,
            &norm2,
            &[0.0, 0.0],
            20.0,
            8,
            &AttractorOptions::default(),
        );
        assert!(!verdict.all_converged);
        assert!(verdict
            .samples
            .iter()
            .any(|s| matches!(s.failure, Some(SampleFailure::NotDecreasing { .. }))));
    }

    #[test]
    fn attractor_check_gap_system_composition() {
        let sys = system(3.0, 3, 1.0);
        let lows: Vec<f64> = (0..2).map(|j| -sys.sigma()[j + 1] + 0.2).collect();
        let box_: Vec<(f64, f64)> = lows.iter().map(|&lo| (lo, 2.0)).collect();
        let flow = |b: &[f64]| sys.rhs_b_unchecked(b);
        let l = |b: &[f64]| {
            let mut lo = 0.0f64;
            let mut hi = 0.0f64;
            for &v in b {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            hi - lo
        };
        let verdict = lyapunov_attractor_check(
            &flow,
            &box_,
            &l,
            &[0.0, 0.0],
            40.0,
            16,
            &AttractorOptions::default(),
        );
        assert!(verdict.all_converged, "{:?}", verdict.samples);
    }
}
