//! Adaptive embedded Runge–Kutta integration (Dormand–Prince 5(4)).

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

/// Sampled solution of an ODE system plus solver diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub meta: SolverMeta,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverMeta {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub tol: f64,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory never empty")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory never empty")
    }
}

const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate dy/dt = f(t, y) from t0 to t1 with local error per step ≤ tol.
///
/// With `sample_times` the trajectory is reported exactly at those times
/// (steps never straddle a sample point); otherwise every accepted step is
/// reported. Step-size underflow (e.g. at a finite-time blow-up) is an error
/// carrying the time of failure.
pub fn integrate_rk<F>(
    f: F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    tol: f64,
    sample_times: Option<&[f64]>,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    if !(t1 > t0) {
        return Err(LabError::invalid(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    if !(tol > 0.0) {
        return Err(LabError::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if let Some(samples) = sample_times {
        let mut prev = t0;
        for &t in samples {
            if t < prev || t > t1 {
                return Err(LabError::invalid(
                    "sample times must be nondecreasing and inside [t0, t1]",
                ));
            }
            prev = t;
        }
    }

    let dim = y0.len();
    let mut meta = SolverMeta { tol, ..Default::default() };
    let mut times = Vec::new();
    let mut states = Vec::new();

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut next_sample = 0usize;
    let record_steps = sample_times.is_none();

    if record_steps {
        times.push(t);
        states.push(y.clone());
    } else if let Some(samples) = sample_times {
        while next_sample < samples.len() && samples[next_sample] <= t0 {
            times.push(samples[next_sample]);
            states.push(y.clone());
            next_sample += 1;
        }
    }

    let mut k1 = f(t, &y);
    meta.rhs_evals += 1;

    // Initial step heuristic; the controller reshapes it quickly.
    let ynorm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fnorm = k1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut h = ((t1 - t0) * 1e-2)
        .min(0.1 * (ynorm + 1.0) / (fnorm + 1e-12))
        .min(t1 - t0)
        .max(1e-10 * (t1 - t0));

    let combine = |y: &[f64], h: f64, ks: &[&[f64]], ws: &[f64]| -> Vec<f64> {
        let mut out = y.to_vec();
        for (k, &w) in ks.iter().zip(ws) {
            if w != 0.0 {
                for i in 0..y.len() {
                    out[i] += h * w * k[i];
                }
            }
        }
        out
    };

    while t < t1 {
        let hmin = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < hmin {
            return Err(LabError::StepUnderflow { t });
        }
        let mut h_eff = h.min(t1 - t);
        if let Some(samples) = sample_times {
            if next_sample < samples.len() {
                let gap = samples[next_sample] - t;
                if gap > 0.0 && h_eff > gap {
                    h_eff = gap;
                }
            }
        }

        let k2 = f(t + h_eff / 5.0, &combine(&y, h_eff, &[&k1], &A2));
        let k3 = f(t + 3.0 * h_eff / 10.0, &combine(&y, h_eff, &[&k1, &k2], &A3));
        let k4 = f(t + 4.0 * h_eff / 5.0, &combine(&y, h_eff, &[&k1, &k2, &k3], &A4));
        let k5 = f(t + 8.0 * h_eff / 9.0, &combine(&y, h_eff, &[&k1, &k2, &k3, &k4], &A5));
        let k6 = f(t + h_eff, &combine(&y, h_eff, &[&k1, &k2, &k3, &k4, &k5], &A6));
        let y5 = combine(&y, h_eff, &[&k1, &k2, &k3, &k4, &k5, &k6], &B5[..6]);
        let k7 = f(t + h_eff, &y5);
        meta.rhs_evals += 6;

        let mut err: f64 = 0.0;
        let ks = [&k1, &k2, &k3, &k4, &k5, &k6, &k7];
        for i in 0..dim {
            let mut e = 0.0;
            for (s, k) in ks.iter().enumerate() {
                e += (B5[s] - B4[s]) * k[i];
            }
            e *= h_eff;
            let scale = tol + tol * y[i].abs().max(y5[i].abs());
            err = err.max((e / scale).abs());
        }

        if err.is_finite() && err <= 1.0 {
            t += h_eff;
            y = y5;
            k1 = k7;
            meta.accepted += 1;
            if record_steps {
                times.push(t);
                states.push(y.clone());
            } else if let Some(samples) = sample_times {
                while next_sample < samples.len()
                    && samples[next_sample] <= t + 1e-12 * t.abs().max(1.0)
                {
                    times.push(samples[next_sample]);
                    states.push(y.clone());
                    next_sample += 1;
                }
            }
            let factor = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
            h = h_eff * factor.clamp(0.2, 5.0);
        } else {
            meta.rejected += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.1 };
            h = h_eff * factor;
        }
    }

    if record_steps && times.last().copied() != Some(t) {
        times.push(t);
        states.push(y.clone());
    }

    Ok(Trajectory { times, states, meta })
}
