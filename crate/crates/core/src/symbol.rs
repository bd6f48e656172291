//! Characteristic exponent q(z, ξ) = ∫(1 − cos ξ·u) ν(z, du).

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{LeviError, Result};
use crate::levy_kernel::JumpKernel;
use crate::quadrature::{integrate_adaptive, AdaptiveTol};
use crate::spectral_measure::dot;

/// π / (2 sin(πα/2) Γ(1+α)), the value of ∫₀^∞ (1 − cos s) s^{−1−α} ds.
pub fn stable_prefactor(alpha: f64) -> f64 {
    PI / (2.0 * (PI * alpha / 2.0).sin() * gamma(1.0 + alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparability {
    pub c_low: f64,
    pub c_high: f64,
}

#[derive(Debug, Clone)]
pub struct SymbolEvaluator {
    pub kernel: JumpKernel,
    /// True when h is constant along every ray, which holds for every
    /// shipped modulation family.
    pub closed_form_available: bool,
    prefactor: f64,
}

impl SymbolEvaluator {
    pub fn new(kernel: JumpKernel) -> Self {
        let prefactor = stable_prefactor(kernel.alpha());
        Self {
            kernel,
            closed_form_available: true,
            prefactor,
        }
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// q₀(ξ) for the unmodulated kernel ν₀.
    pub fn exponent_closed_form(&self, xi: &[f64]) -> Result<f64> {
        if !self.closed_form_available {
            return Err(LeviError::NotClosedForm);
        }
        Ok(self.base(xi))
    }

    /// Unmodulated part q₀(ξ).
    pub fn base(&self, xi: &[f64]) -> f64 {
        if xi.iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        self.prefactor * self.kernel.spectral.projected_sum(xi, self.kernel.alpha())
    }

    /// Modulated part q_g(ξ) = C_α Σ g_i w_i |ξ·θ_i|^α, so that
    /// q(z, ξ) = q₀(ξ) + a·s(z)·q_g(ξ).
    pub fn modulated_part(&self, xi: &[f64]) -> f64 {
        let alpha = self.kernel.alpha();
        let m = &self.kernel.modulation;
        self.prefactor
            * self
                .kernel
                .spectral
                .atoms()
                .iter()
                .enumerate()
                .map(|(i, a)| m.factor(i) * a.weight * dot(&a.direction, xi).abs().powf(alpha))
                .sum::<f64>()
    }

    /// q(z, ξ) from the closed form with the per-atom factors absorbed.
    pub fn exponent(&self, z: &[f64], xi: &[f64]) -> Result<f64> {
        if !self.closed_form_available {
            return Err(LeviError::NotClosedForm);
        }
        if xi.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        let alpha = self.kernel.alpha();
        let m = &self.kernel.modulation;
        Ok(self.prefactor
            * self
                .kernel
                .spectral
                .atoms()
                .iter()
                .enumerate()
                .map(|(i, a)| m.h(z, i) * a.weight * dot(&a.direction, xi).abs().powf(alpha))
                .sum::<f64>())
    }

    /// q(z, ξ) by per-atom radial quadrature of (1 − cos(s ξ·θ)) s^{−1−α}.
    pub fn exponent_numeric(&self, z: &[f64], xi: &[f64]) -> Result<f64> {
        if xi.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        let alpha = self.kernel.alpha();
        let mut total = 0.0;
        for (i, a) in self.kernel.spectral.atoms().iter().enumerate() {
            let b = dot(&a.direction, xi).abs();
            if b == 0.0 {
                continue;
            }
            total += self.kernel.modulation.h(z, i) * a.weight * radial_one_minus_cos(b, alpha)?;
        }
        Ok(total)
    }

    /// min and max of q(z, ξ)/|ξ|^α over the sample sets.
    pub fn comparability_scan(&self, z_samples: &[Vec<f64>], xi_samples: &[Vec<f64>]) -> Result<Comparability> {
        if z_samples.is_empty() || xi_samples.is_empty() {
            return Err(LeviError::InvalidParams {
                name: "samples",
                reason: "sample sets must be nonempty".into(),
            });
        }
        let alpha = self.kernel.alpha();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for xi in xi_samples {
            let n = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                return Err(LeviError::InvalidParams {
                    name: "xi_samples",
                    reason: "ξ = 0 is excluded".into(),
                });
            }
            for z in z_samples {
                let r = self.exponent(z, xi)? / n.powf(alpha);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        if lo < 1e-12 {
            return Err(LeviError::DegenerateKernel { c_low: lo });
        }
        Ok(Comparability { c_low: lo, c_high: hi })
    }
}

/// ∫₀^∞ (1 − cos(b s)) s^{−1−α} ds for b > 0, by direct quadrature.
pub fn radial_one_minus_cos(b: f64, alpha: f64) -> Result<f64> {
    let tol = AdaptiveTol {
        abs: 1e-15,
        rel: 1e-13,
        max_panels: 2000,
    };
    let s0 = PI / b;
    // s = s0 v^p removes the s^{1−α} endpoint behaviour
    let p = 1.0 / (2.0 - alpha);
    let (near, _) = integrate_adaptive(
        |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let s = s0 * v.powf(p);
            let half = (0.5 * b * s).sin();
            2.0 * half * half * s.powf(-1.0 - alpha) * s0 * p * v.powf(p - 1.0)
        },
        &[0.0, 0.5, 1.0],
        tol,
        "symbol near field",
    )?;
    let period = 2.0 * PI / b;
    let periods = 64;
    let mut osc = 0.0;
    for k in 0..periods {
        let a = s0 + k as f64 * period;
        let (v, _) = integrate_adaptive(
            |s: f64| (b * s).cos() * s.powf(-1.0 - alpha),
            &[a, a + 0.5 * period, a + period],
            tol,
            "symbol far field",
        )?;
        osc += v;
    }
    // ∫_U^∞ cos(bs) s^{−1−α} ds with cos(bU) = −1, sin(bU) = 0, by parts
    let u = s0 + periods as f64 * period;
    let tail = -(1.0 + alpha) * u.powf(-2.0 - alpha) / (b * b)
        + (1.0 + alpha) * (2.0 + alpha) * (3.0 + alpha) * u.powf(-4.0 - alpha) / b.powi(4);
    Ok(near + s0.powf(-alpha) / alpha - osc - tail)
}
