//! Uniform grid in the hyperbolic coordinate χ = artanh y.
//!
//! All profile work happens on this grid: solitons become translates of a
//! fixed bump in χ, and the degenerate weight (1−y²)^{2/(p−1)} becomes a
//! smooth, exponentially decaying sech power.

use crate::error::{LabError, Result};

/// Uniform nodes χ_j on [−chi_max, chi_max], with the mapped y = tanh χ cached.
#[derive(Debug, Clone, PartialEq)]
pub struct HypGrid {
    chi_max: f64,
    n: usize,
    nodes: Vec<f64>,
    y: Vec<f64>,
}

impl HypGrid {
    pub fn new(chi_max: f64, n: usize) -> Result<Self> {
        if !(chi_max > 0.0) || !chi_max.is_finite() {
            return Err(LabError::invalid(format!("chi_max must be positive, got {chi_max}")));
        }
        if n < 3 {
            return Err(LabError::invalid(format!("grid needs at least 3 nodes, got {n}")));
        }
        let h = 2.0 * chi_max / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|j| -chi_max + h * j as f64).collect();
        let y: Vec<f64> = nodes.iter().map(|&chi| chi.tanh()).collect();
        Ok(HypGrid { chi_max, n, nodes, y })
    }

    /// Default resolution used throughout the artifact: chi_max = 10, n = 2001.
    pub fn default_grid() -> Self {
        HypGrid::new(10.0, 2001).expect("default grid parameters are valid")
    }

    pub fn chi_max(&self) -> f64 {
        self.chi_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node spacing h = 2·chi_max/(n−1).
    pub fn spacing(&self) -> f64 {
        2.0 * self.chi_max / (self.n - 1) as f64
    }

    pub fn chi(&self) -> &[f64] {
        &self.nodes
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Centered d/dχ of a nodal field, second order in the interior and
    /// one-sided second order at the two ends.
    pub fn deriv_chi(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.n, "field length must match grid");
        let h = self.spacing();
        let n = self.n;
        let mut out = vec![0.0; n];
        // grouped as differences so constants cancel exactly
        out[0] = (4.0 * (w[1] - w[0]) - (w[2] - w[0])) / (2.0 * h);
        for j in 1..n - 1 {
            out[j] = (w[j + 1] - w[j - 1]) / (2.0 * h);
        }
        out[n - 1] = (4.0 * (w[n - 2] - w[n - 1]) - (w[n - 3] - w[n - 1])) / (-2.0 * h);
        out
    }

    /// Check that two grids coincide (same truncation and resolution).
    pub fn ensure_same(&self, other: &HypGrid) -> Result<()> {
        if self.n != other.n || self.chi_max != other.chi_max {
            return Err(LabError::GridMismatch(format!(
                "(chi_max, n) = ({}, {}) vs ({}, {})",
                self.chi_max, self.n, other.chi_max, other.n
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_strictly_increasing_and_inside_unit_interval() {
        let g = HypGrid::new(10.0, 101).unwrap();
        for j in 1..g.len() {
            assert!(g.chi()[j] > g.chi()[j - 1]);
        }
        for &y in g.y() {
            assert!(y.abs() < 1.0);
        }
        assert!((g.spacing() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(HypGrid::new(0.0, 11).is_err());
        assert!(HypGrid::new(10.0, 2).is_err());
        assert!(HypGrid::new(f64::NAN, 11).is_err());
    }

    #[test]
    fn derivative_is_second_order() {
        // d/dχ sin(χ) = cos(χ); halving h cuts the max error by ≈ 4.
        let errs: Vec<f64> = [201usize, 401]
            .iter()
            .map(|&n| {
                let g = HypGrid::new(2.0, n).unwrap();
                let w: Vec<f64> = g.chi().iter().map(|&c| c.sin()).collect();
                let d = g.deriv_chi(&w);
                g.chi()
                    .iter()
                    .zip(&d)
                    .map(|(&c, &v)| (v - c.cos()).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }
}
