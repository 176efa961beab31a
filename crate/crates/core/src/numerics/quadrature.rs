//! Quadrature for weighted integrals ∫ f(y) ρ dy with ρ = (1−y²)^{2/(p−1)}.
//!
//! The integral is mapped to χ = artanh y, where the combined density
//! ρ·dy/dχ = sech^{4/(p−1)+2} χ is smooth and exponentially small at the
//! truncation boundary; a trapezoid rule in χ is then exponentially accurate
//! on smooth integrands and second order on integrands with isolated corners.

use super::grid::HypGrid;
use crate::error::{LabError, Result};

/// Nodal weights w_j so that Σ_j w_j f(y_j) ≈ ∫_{−1}^{1} f(y) ρ(y) dy.
pub fn gauss_weights(grid: &HypGrid, p: f64) -> Result<Vec<f64>> {
    if !(p > 1.0) {
        return Err(LabError::invalid(format!("p must exceed 1, got {p}")));
    }
    if grid.len() < 3 {
        return Err(LabError::invalid("quadrature needs n >= 3"));
    }
    let h = grid.spacing();
    let expo = 4.0 / (p - 1.0) + 2.0;
    let n = grid.len();
    let weights = grid
        .chi()
        .iter()
        .enumerate()
        .map(|(j, &chi)| {
            let trap = if j == 0 || j == n - 1 { 0.5 * h } else { h };
            // sech^expo χ, with cosh evaluated once
            trap * chi.cosh().powf(-expo)
        })
        .collect();
    Ok(weights)
}

/// Σ_j w_j f_j for a nodal field.
pub fn integrate(weights: &[f64], f: &[f64]) -> f64 {
    assert_eq!(weights.len(), f.len());
    weights.iter().zip(f).map(|(w, v)| w * v).sum()
}
