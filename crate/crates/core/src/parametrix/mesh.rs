//! Graded time mesh, series controls, and fields stored on the mesh.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{LeviError, Result};
use crate::levy_kernel::JumpKernel;

/// Nodes t_j = T (j/M)^ρ, j = 1..=M.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeMesh {
    pub horizon: f64,
    pub nodes: usize,
    pub grading: f64,
}

impl TimeMesh {
    pub fn new(horizon: f64, nodes: usize, grading: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(LeviError::InvalidParams {
                name: "horizon",
                reason: format!("must be positive, got {horizon}"),
            });
        }
        if nodes < 2 {
            return Err(LeviError::InvalidParams {
                name: "nodes",
                reason: format!("need at least 2 nodes, got {nodes}"),
            });
        }
        if !(grading >= 1.0 && grading.is_finite()) {
            return Err(LeviError::InvalidParams {
                name: "grading",
                reason: format!("must be ≥ 1, got {grading}"),
            });
        }
        Ok(Self {
            horizon,
            nodes,
            grading,
        })
    }

    /// t_j for 1 ≤ j ≤ M.
    pub fn time(&self, j: usize) -> f64 {
        self.horizon * (j as f64 / self.nodes as f64).powf(self.grading)
    }

    pub fn times(&self) -> Vec<f64> {
        (1..=self.nodes).map(|j| self.time(j)).collect()
    }

    /// Mesh coordinate u·M with u = (t/T)^{1/ρ}; node j sits at j.
    pub fn coordinate(&self, t: f64) -> f64 {
        (t / self.horizon).max(0.0).powf(1.0 / self.grading) * self.nodes as f64
    }

    /// Index of the node equal to `t` (to rounding), if any.
    pub fn node_of(&self, t: f64) -> Option<usize> {
        let c = self.coordinate(t);
        let j = c.round();
        if j >= 1.0 && j <= self.nodes as f64 && (self.time(j as usize) - t).abs() <= 1e-12 * t {
            Some(j as usize)
        } else {
            None
        }
    }

    /// The same horizon and grading with twice the nodes.
    pub fn refined(&self) -> Self {
        Self {
            nodes: 2 * self.nodes,
            ..*self
        }
    }
}

/// Knobs of the series and Volterra constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesControls {
    pub theta: f64,
    pub k_max: usize,
    /// Terms Φ^{⊠k} built before the tail test may stop the series.
    pub min_terms: usize,
    pub eps_tail: f64,
    pub eps_quad: f64,
    /// Gauss–Legendre nodes per half of the time product rule.
    pub quad_nodes: usize,
    /// Picard tolerance (relative, sup norm) at each implicit Volterra node.
    pub picard_tol: f64,
    /// Largest admitted growth of the sup norm from one node to the next.
    pub amplification: f64,
}

impl SeriesControls {
    /// θ = ½·min(η, α, α + γ − d) and default tolerances.
    pub fn defaults_for(kernel: &JumpKernel) -> Self {
        Self {
            theta: 0.5 * theta_ceiling(kernel),
            k_max: 40,
            min_terms: 3,
            eps_tail: 1e-7,
            eps_quad: 1e-6,
            quad_nodes: 16,
            picard_tol: 1e-11,
            amplification: 2.0,
        }
    }

    pub fn validate(&self, kernel: &JumpKernel) -> Result<()> {
        let cap = theta_ceiling(kernel);
        if !(self.theta > 0.0 && self.theta < cap) {
            return Err(LeviError::InvalidParams {
                name: "theta",
                reason: format!("θ = {} must lie in (0, {cap})", self.theta),
            });
        }
        if self.k_max < 1 || self.quad_nodes < 2 || self.min_terms > self.k_max {
            return Err(LeviError::InvalidParams {
                name: "series",
                reason: "k_max ≥ 1, min_terms ≤ k_max and quad_nodes ≥ 2 required".into(),
            });
        }
        if !(self.eps_tail > 0.0 && self.eps_quad > 0.0 && self.picard_tol > 0.0 && self.amplification > 1.0) {
            return Err(LeviError::InvalidParams {
                name: "series",
                reason: "tolerances must be positive and amplification above 1".into(),
            });
        }
        Ok(())
    }
}

/// α ∧ η ∧ (α + γ − d).
pub fn theta_ceiling(kernel: &JumpKernel) -> f64 {
    let p = &kernel.params;
    p.alpha.min(kernel.modulation.eta).min(p.alpha + p.gamma - p.dim as f64)
}

/// A block-valued function of time known at the mesh nodes, read back by
/// linear interpolation in the mesh coordinate of W(t) = t^κ F(t). Below
/// t₁ the scaled value is held constant.
#[derive(Debug, Clone)]
pub struct StoredField {
    pub mesh: TimeMesh,
    pub kappa: f64,
    /// W at t_1, t_2, … (possibly fewer than M while marching).
    nodes: Vec<Array2<f64>>,
}

impl StoredField {
    pub fn new(mesh: TimeMesh, kappa: f64) -> Self {
        Self {
            mesh,
            kappa,
            nodes: Vec::with_capacity(mesh.nodes),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Appends F(t_j) for the next node j.
    pub fn push(&mut self, value: Array2<f64>) {
        let t = self.mesh.time(self.nodes.len() + 1);
        self.nodes.push(value * t.powf(self.kappa));
    }

    /// Replaces F at the last stored node.
    pub fn set_last(&mut self, value: Array2<f64>) {
        let j = self.nodes.len();
        let t = self.mesh.time(j);
        self.nodes[j - 1] = value * t.powf(self.kappa);
    }

    /// F(t_j), 1-based.
    pub fn node(&self, j: usize) -> Array2<f64> {
        let t = self.mesh.time(j);
        &self.nodes[j - 1] * t.powf(-self.kappa)
    }

    pub fn add_assign_node(&mut self, j: usize, value: &Array2<f64>) {
        let t = self.mesh.time(j);
        self.nodes[j - 1].scaled_add(t.powf(self.kappa), value);
    }

    /// F(t) for 0 < t ≤ t_len.
    pub fn at(&self, t: f64) -> Array2<f64> {
        let c = self.mesh.coordinate(t);
        let last = self.nodes.len();
        let w = if c <= 1.0 || last == 1 {
            self.nodes[0].clone()
        } else {
            let j = (c.floor() as usize).clamp(1, last - 1);
            let f = (c - j as f64).min(1.0);
            let mut w = &self.nodes[j - 1] * (1.0 - f);
            w.scaled_add(f, &self.nodes[j]);
            w
        };
        w * t.powf(-self.kappa)
    }

    pub fn sup_norm_at_node(&self, j: usize) -> f64 {
        sup_norm(&self.node(j))
    }
}

pub fn sup_norm(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_nodes() {
        let m = TimeMesh::new(1.0, 64, 2.0).unwrap();
        assert!((m.time(1) - 1.0 / 4096.0).abs() < 1e-18);
        assert_eq!(m.time(64), 1.0);
        assert!(m.times().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(m.node_of(m.time(17)), Some(17));
        assert_eq!(m.node_of(0.5), None);
        assert!(TimeMesh::new(1.0, 64, 0.5).is_err());
    }

    #[test]
    fn stored_field_interpolates_linear_in_coordinate() {
        let m = TimeMesh::new(2.0, 8, 2.0).unwrap();
        let mut f = StoredField::new(m, 0.0);
        for j in 1..=8 {
            f.push(Array2::from_elem((1, 1), m.coordinate(m.time(j))));
        }
        for t in [0.1, 0.77, 1.3, 2.0] {
            let c = m.coordinate(t).max(1.0);
            assert!((f.at(t)[[0, 0]] - c).abs() < 1e-12);
        }
        // singular scaling: F = t^{-1/2} is reproduced exactly
        let mut g = StoredField::new(m, 0.5);
        for j in 1..=8 {
            g.push(Array2::from_elem((1, 1), m.time(j).powf(-0.5)));
        }
        assert!((g.at(0.9)[[0, 0]] - 0.9f64.powf(-0.5)).abs() < 1e-12);
    }
}
