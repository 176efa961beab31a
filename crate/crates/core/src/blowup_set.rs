//! Blow-up-set asymptotics near a characteristic point, and multi-point
//! configuration plans.
//!
//! Near a characteristic point x₀ with k solitons and center of mass ζ₀ the
//! blow-up graph behaves like a corner with a log-power correction that is
//! asymmetric in e^{−2θζ₀} (θ = sign(x−x₀)):
//!
//!   T′(x) = −θ(1 − γ e^{−2θζ₀} / |log|x−x₀||^{(k−1)(p−1)/2}),
//!   T(x)  = T(x₀) − |x−x₀| + γ e^{−2θζ₀}|x−x₀| / |log|x−x₀||^{(k−1)(p−1)/2},
//!
//! with the o(1) factors dropped (tolerances of any test must scale like
//! 1/|log|x−x₀||).

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

/// Model of one characteristic point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharPointModel {
    pub k: usize,
    pub zeta0: f64,
    pub p: f64,
    /// The γ(p) > 0 prefactor (existence-level; default 1).
    pub gamma_const: f64,
    pub t0: f64,
    pub x0: f64,
}

impl CharPointModel {
    pub fn new(k: usize, zeta0: f64, p: f64) -> Result<Self> {
        if k < 2 {
            return Err(LabError::invalid(format!("k must be at least 2, got {k}")));
        }
        if !(p > 1.0) {
            return Err(LabError::invalid(format!("p must exceed 1, got {p}")));
        }
        Ok(CharPointModel { k, zeta0, p, gamma_const: 1.0, t0: 0.0, x0: 0.0 })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(LabError::invalid("gamma must be positive"));
        }
        self.gamma_const = gamma;
        Ok(self)
    }

    /// The log-power exponent (k−1)(p−1)/2.
    pub fn log_power(&self) -> f64 {
        (self.k as f64 - 1.0) * (self.p - 1.0) / 2.0
    }

    fn check_offset(&self, x: f64) -> Result<f64> {
        let r = x - self.x0;
        if r == 0.0 {
            return Err(LabError::invalid("x must differ from the characteristic point"));
        }
        if r.abs() >= 0.5 {
            return Err(LabError::invalid(format!(
                "|x − x₀| = {} too large for the asymptotics (need < 1/2)",
                r.abs()
            )));
        }
        Ok(r)
    }

    /// The correction factor γ e^{−2θζ₀}/|log|x−x₀||^{(k−1)(p−1)/2}.
    pub fn correction(&self, x: f64) -> Result<f64> {
        let r = self.check_offset(x)?;
        let theta = r.signum();
        let logpow = r.abs().ln().abs().powf(self.log_power());
        Ok(self.gamma_const * (-2.0 * theta * self.zeta0).exp() / logpow)
    }

    /// Leading-order T′(x).
    pub fn predicted_t_prime(&self, x: f64) -> Result<f64> {
        let r = self.check_offset(x)?;
        let theta = r.signum();
        Ok(-theta * (1.0 - self.correction(x)?))
    }

    /// Leading-order T(x).
    pub fn predicted_t(&self, x: f64) -> Result<f64> {
        let r = self.check_offset(x)?;
        Ok(self.t0 - r.abs() + self.correction(x)? * r.abs())
    }

    /// The two-sided envelope bounds on T(x) − T(x₀) + |x−x₀|:
    /// [|x−x₀|/(C₀·L^β), C₀·|x−x₀|/L^β] with
    /// C₀ = 2·max(γe^{2|ζ₀|}, 1/(γe^{−2|ζ₀|})).
    pub fn envelope(&self, x: f64) -> Result<(f64, f64)> {
        let r = self.check_offset(x)?;
        let logpow = r.abs().ln().abs().powf(self.log_power());
        let c0 = 2.0 * (self.gamma_const * (2.0 * self.zeta0.abs()).exp())
            .max(1.0 / (self.gamma_const * (-2.0 * self.zeta0.abs()).exp()));
        Ok((r.abs() / (c0 * logpow), c0 * r.abs() / logpow))
    }
}

/// One requested characteristic point of a multi-point plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanPoint {
    pub x: f64,
    pub blow_up_time: f64,
    pub k: usize,
    pub zeta0: f64,
}

/// Validated plan entry: the point model plus the shooting configuration the
/// point would require.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanEntry {
    pub point: PlanPoint,
    pub model: CharPointModel,
    /// Suggested shooting parameters (p, k, s0, s_target) for this point.
    pub shooting: SuggestedShooting,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuggestedShooting {
    pub p: f64,
    pub k: usize,
    pub s0: f64,
    pub s_target: f64,
}

/// Validate the disjoint-cone condition xₙ + Tₙ < xₙ₊₁ − Tₙ₊₁ and compose
/// per-point models. Pure configuration; no PDE gluing is performed.
pub fn multi_point_plan(points: &[PlanPoint], p: f64) -> Result<Vec<PlanEntry>> {
    for w in points.windows(2) {
        if w[1].x <= w[0].x {
            return Err(LabError::invalid("points must be sorted by x"));
        }
        if !(w[0].x + w[0].blow_up_time < w[1].x - w[1].blow_up_time) {
            return Err(LabError::invalid(format!(
                "cones overlap: x = {} (T = {}) against x = {} (T = {})",
                w[0].x, w[0].blow_up_time, w[1].x, w[1].blow_up_time
            )));
        }
    }
    points
        .iter()
        .map(|pt| {
            if !(pt.blow_up_time > 0.0) {
                return Err(LabError::invalid("blow-up times must be positive"));
            }
            let mut model = CharPointModel::new(pt.k, pt.zeta0, p)?;
            model.t0 = pt.blow_up_time;
            model.x0 = pt.x;
            Ok(PlanEntry {
                point: pt.clone(),
                model,
                shooting: SuggestedShooting { p, k: pt.k, s0: 30.0, s_target: 38.0 },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn symmetric_only_when_centered() {
        let m = CharPointModel::new(2, 0.0, 3.0).unwrap();
        for &r in &[1e-3, 1e-5, 1e-7] {
            let right = m.predicted_t_prime(r).unwrap();
            let left = m.predicted_t_prime(-r).unwrap();
            assert_abs_diff_eq!(right.abs(), left.abs(), epsilon = 1e-15);
            let tr = m.predicted_t(r).unwrap();
            let tl = m.predicted_t(-r).unwrap();
            assert_abs_diff_eq!(tr, tl, epsilon = 1e-18);
        }
        let m = CharPointModel::new(2, 0.3, 3.0).unwrap();
        let r = 1e-4;
        assert!(m.predicted_t(r).unwrap() != m.predicted_t(-r).unwrap());
    }

    #[test]
    fn asymmetry_ratio_is_exactly_exponential() {
        for &z0 in &[0.7, -0.4, 1.3] {
            let m = CharPointModel::new(3, z0, 3.0).unwrap();
            for &r in &[1e-3, 1e-6] {
                let ratio = m.correction(r).unwrap() / m.correction(-r).unwrap();
                let want = (-4.0 * z0).exp();
                assert!(
                    (ratio - want).abs() <= 1e-10 * want,
                    "ratio {ratio} vs {want}"
                );
            }
        }
    }

    #[test]
    fn one_plus_t_prime_side_ratio() {
        // |1 + T′| on the right is smaller by e^{−4ζ₀} relative to the
        // left at equal offsets when ζ₀ > 0 (right side: 1 + T′ = correction)
        let m = CharPointModel::new(2, 0.7, 3.0).unwrap();
        let r = 1e-5;
        let right = (1.0 + m.predicted_t_prime(r).unwrap()).abs();
        let left = (1.0 - m.predicted_t_prime(-r).unwrap()).abs();
        assert_abs_diff_eq!(right / left, (-4.0f64 * 0.7).exp(), epsilon = 1e-12);
    }

    #[test]
    fn corner_limit() {
        let m = CharPointModel::new(4, 0.2, 3.0).unwrap();
        let tp = m.predicted_t_prime(1e-12).unwrap();
        assert!((tp + 1.0).abs() < 1e-3);
        let tp = m.predicted_t_prime(-1e-12).unwrap();
        assert!((tp - 1.0).abs() < 1e-3);
        let t = m.predicted_t(1e-14).unwrap();
        assert!((t - m.t0).abs() < 1e-13);
        assert!(m.predicted_t(0.0).is_err());
        assert!(m.predicted_t(0.6).is_err());
    }

    #[test]
    fn derivative_consistency_with_the_graph() {
        // numerical derivative of predicted_t matches predicted_t_prime to
        // relative error ≤ 2/|log|x−x₀|| (the o(1) budget)
        let m = CharPointModel::new(2, 0.7, 3.0).unwrap();
        let mut r = 1e-8;
        while r <= 1e-3 {
            for &x in &[m.x0 + r, m.x0 - r] {
                let dx = 1e-3 * r;
                let fd = (m.predicted_t(x + dx).unwrap() - m.predicted_t(x - dx).unwrap())
                    / (2.0 * dx);
                let tp = m.predicted_t_prime(x).unwrap();
                let rel = (fd - tp).abs() / tp.abs();
                let budget = 2.0 / r.abs().ln().abs();
                assert!(rel <= budget, "rel {rel:.3e} > {budget:.3e} at r = {r:.1e}");
            }
            r *= 10.0;
        }
    }

    #[test]
    fn envelope_contains_the_correction() {
        for &z0 in &[0.0, 0.7, -1.1] {
            let m = CharPointModel::new(2, z0, 3.0).unwrap();
            let mut r = 1e-8;
            while r <= 1e-3 {
                for &x in &[m.x0 + r, m.x0 - r] {
                    let hat = m.predicted_t(x).unwrap() - m.t0 + (x - m.x0).abs();
                    let (lo, hi) = m.envelope(x).unwrap();
                    assert!(hat >= lo && hat <= hi, "{lo} ≤ {hat} ≤ {hi} fails at {x}");
                }
                r *= 10.0;
            }
        }
    }

    #[test]
    fn plan_validation() {
        let ok = [
            PlanPoint { x: 0.0, blow_up_time: 1.0, k: 2, zeta0: 0.0 },
            PlanPoint { x: 3.0, blow_up_time: 1.0, k: 2, zeta0: 0.0 },
        ];
        let plan = multi_point_plan(&ok, 3.0).unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[1].model.x0, 3.0);

        let bad = [
            PlanPoint { x: 0.0, blow_up_time: 1.0, k: 2, zeta0: 0.0 },
            PlanPoint { x: 1.5, blow_up_time: 1.0, k: 2, zeta0: 0.0 },
        ];
        assert!(multi_point_plan(&bad, 3.0).is_err());

        let single = [PlanPoint { x: 5.0, blow_up_time: 2.0, k: 4, zeta0: 1.0 }];
        assert_eq!(multi_point_plan(&single, 3.0).unwrap().len(), 1);
    }
}
