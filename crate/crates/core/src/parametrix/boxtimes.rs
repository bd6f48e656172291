//! Product-integration rule for the time part of ⊠:
//! (A ⊠ B)(t) = ∫_0^t A(t − τ) ∘ B(τ) dτ, where both factors may carry an
//! endpoint singularity of the form σ^{−1+θ/α}.
//!
//! The interval is split at t/2. On the half touching τ = 0 the substitution
//! τ = (t/2) v^ρ, and on the other half t − τ = (t/2) v^ρ, with ρ = α/θ turn
//! the declared power profile into a bounded integrand in v, which is then
//! integrated by Gauss–Legendre.

use ndarray::Array2;

use crate::error::{LeviError, Result};
use crate::quadrature::gauss_legendre;

use super::mesh::sup_norm;

/// Largest tolerated ratio between the transformed integrand at the
/// endpoint-most node and the larger of the next two.
pub const GROWTH_LIMIT: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct ProductRule {
    pub grading: f64,
    v: Vec<f64>,
    w: Vec<f64>,
}

/// One node of the rule: weight, time of the left factor, time of the right
/// factor, and the Jacobian of the substitution at the node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductNode {
    pub weight: f64,
    pub jacobian: f64,
    pub left: f64,
    pub right: f64,
}

impl ProductRule {
    pub fn new(nodes: usize, grading: f64) -> Self {
        let (x, w) = gauss_legendre(nodes);
        Self {
            grading,
            v: x.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            w: w.iter().map(|w| 0.5 * w).collect(),
        }
    }

    /// Nodes of the half where the right factor's time is small, then the
    /// half where the left factor's time is small; each ordered from the
    /// endpoint inwards.
    pub fn nodes(&self, t: f64) -> [Vec<ProductNode>; 2] {
        let rho = self.grading;
        let half = 0.5 * t;
        let mk = |swap: bool| -> Vec<ProductNode> {
            self.v
                .iter()
                .zip(&self.w)
                .map(|(v, w)| {
                    let small = half * v.powf(rho);
                    let jacobian = half * rho * v.powf(rho - 1.0);
                    let weight = w * jacobian;
                    if swap {
                        ProductNode {
                            weight,
                            jacobian,
                            left: small,
                            right: t - small,
                        }
                    } else {
                        ProductNode {
                            weight,
                            jacobian,
                            left: t - small,
                            right: small,
                        }
                    }
                })
                .collect()
        };
        [mk(false), mk(true)]
    }

    /// ∫_0^t f(t − τ, τ) dτ.
    pub fn integrate<F>(&self, t: f64, mut f: F) -> Result<Array2<f64>>
    where
        F: FnMut(f64, f64) -> Result<Array2<f64>>,
    {
        let mut acc: Option<Array2<f64>> = None;
        for half in self.nodes(t) {
            let mut scaled = Vec::with_capacity(half.len());
            for node in &half {
                let v = f(node.left, node.right)?;
                scaled.push(sup_norm(&v) * node.jacobian);
                match acc.as_mut() {
                    None => acc = Some(v * node.weight),
                    Some(a) => a.scaled_add(node.weight, &v),
                }
            }
            check_growth(&scaled)?;
        }
        Ok(acc.expect("product rule has nodes"))
    }

    pub fn integrate_scalar<F: FnMut(f64, f64) -> f64>(&self, t: f64, mut f: F) -> Result<f64> {
        let a = self.integrate(t, |l, r| Ok(Array2::from_elem((1, 1), f(l, r))))?;
        Ok(a[[0, 0]])
    }
}

/// Transformed integrand sizes ordered from the endpoint: the first must not exceed
/// the next two by more than [`GROWTH_LIMIT`].
fn check_growth(scaled: &[f64]) -> Result<()> {
    if scaled.len() < 3 {
        return Ok(());
    }
    let top = scaled.iter().fold(0.0f64, |m, v| m.max(*v));
    if scaled[0] <= 1e-14 * top || top == 0.0 {
        return Ok(());
    }
    let growth = scaled[0] / scaled[1].max(scaled[2]).max(1e-300);
    if growth > GROWTH_LIMIT {
        return Err(LeviError::SingularityMisdeclared { growth });
    }
    Ok(())
}
