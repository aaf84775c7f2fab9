//! Logarithmic grids and trapezoid quadrature on them.
//!
//! Every scale integral in this crate is of the form `∫ g(t) dt/t` over a
//! positive window, approximated by the trapezoid rule in `τ = ln t`.  The
//! grid type below is the single source of truth for node placement so that
//! independently assembled quantities (kernels, norms, decompositions) use
//! bit-identical nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A log-uniform grid of positive scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    /// Smallest scale (inclusive).
    pub t_min: f64,
    /// Largest scale (inclusive).
    pub t_max: f64,
    /// Number of nodes, at least 2.
    pub nodes: usize,
}

impl LogGrid {
    /// Build a grid after validating the window.
    pub fn new(t_min: f64, t_max: f64, nodes: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_min > 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_min",
                message: format!("must be finite and positive, got {t_min}"),
            });
        }
        if !(t_max.is_finite() && t_max > t_min) {
            return Err(Error::InvalidParameter {
                name: "t_max",
                message: format!("must be finite and exceed t_min={t_min}, got {t_max}"),
            });
        }
        if nodes < 2 {
            return Err(Error::InvalidParameter {
                name: "nodes",
                message: format!("need at least 2 quadrature nodes, got {nodes}"),
            });
        }
        Ok(LogGrid { t_min, t_max, nodes })
    }

    /// The nodes `t_i`, log-uniform from `t_min` to `t_max` inclusive.
    pub fn points(&self) -> Vec<f64> {
        let lo = self.t_min.ln();
        let hi = self.t_max.ln();
        let step = (hi - lo) / (self.nodes - 1) as f64;
        (0..self.nodes)
            .map(|i| {
                if i == 0 {
                    self.t_min
                } else if i == self.nodes - 1 {
                    self.t_max
                } else {
                    (lo + step * i as f64).exp()
                }
            })
            .collect()
    }

    /// Trapezoid weights for `∫ g dt/t ≈ Σ w_i g(t_i)`: the uniform log step,
    /// halved at the two endpoints.
    pub fn weights(&self) -> Vec<f64> {
        let step = (self.t_max.ln() - self.t_min.ln()) / (self.nodes - 1) as f64;
        (0..self.nodes)
            .map(|i| {
                if i == 0 || i == self.nodes - 1 {
                    0.5 * step
                } else {
                    step
                }
            })
            .collect()
    }

    /// A grid with the same endpoints and twice as many intervals; used by
    /// quadrature self-refinement checks.
    pub fn doubled(&self) -> LogGrid {
        LogGrid {
            t_min: self.t_min,
            t_max: self.t_max,
            nodes: 2 * self.nodes - 1,
        }
    }

    /// Trapezoid value of `∫ g dt/t` for samples `g(t_i)` on this grid.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.nodes {
            return Err(Error::LengthMismatch {
                expected: self.nodes,
                got: samples.len(),
            });
        }
        let w = self.weights();
        let mut acc = 0.0;
        for (s, wi) in samples.iter().zip(w.iter()) {
            acc += s * wi;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_log_uniform_and_hit_endpoints() {
        let g = LogGrid::new(1e-3, 1e3, 200).unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 200);
        assert_eq!(pts[0], 1e-3);
        assert_eq!(pts[199], 1e3);
        let ratios: Vec<f64> = pts.windows(2).map(|w| w[1] / w[0]).collect();
        let first = ratios[0];
        for r in &ratios {
            assert!((r / first - 1.0).abs() < 1e-10, "log-uniform spacing violated");
        }
    }

    // Oracle: ∫ t^a dt/t over [l, u] = (u^a - l^a)/a.
    #[test]
    fn trapezoid_matches_power_law_integral() {
        let g = LogGrid::new(0.5, 2.0, 4001).unwrap();
        let a = 0.7;
        let samples: Vec<f64> = g.points().iter().map(|t| t.powf(a)).collect();
        let got = g.integrate(&samples).unwrap();
        let exact = (2.0f64.powf(a) - 0.5f64.powf(a)) / a;
        assert!(
            (got - exact).abs() / exact < 1e-7,
            "got {got}, exact {exact}"
        );
    }

    #[test]
    fn doubling_refines_in_place() {
        let g = LogGrid::new(1e-2, 1e2, 100).unwrap();
        let d = g.doubled();
        assert_eq!(d.nodes, 199);
        // Every coarse node must survive in the refined grid.
        let fine = d.points();
        for p in g.points() {
            assert!(
                fine.iter().any(|q| (q - p).abs() <= 1e-12 * p),
                "coarse node {p} missing after refinement"
            );
        }
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(LogGrid::new(0.0, 1.0, 10).is_err());
        assert!(LogGrid::new(1.0, 1.0, 10).is_err());
        assert!(LogGrid::new(1e-3, 1e3, 1).is_err());
    }
}
