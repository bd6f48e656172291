//! The nonlocal operators L^z and L^{z,δ} applied by ray quadrature, the
//! generator majorant A^#, and a maximum-principle probe.
//!
//! Grid-sampled inputs are turned into functions on ℝ^d by a periodic cubic
//! B-spline. Outside the box they either repeat (`Extension::Periodic`, the
//! torus picture used by the parametrix) or continue as a power tail matched
//! at the boundary (`Extension::PowerTail`).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{LeviError, Result};
use crate::function::SpatialFunction;
use crate::grid::{GridFft, SpatialGrid};
use crate::levy_kernel::{periodic_far_field, JumpKernel};
use crate::quadrature::{integrate_adaptive, AdaptiveTol};

// the majorant integrand has kinks where the compensated difference
// changes sign
const MAJORANT_TOL: AdaptiveTol = AdaptiveTol {
    abs: 1e-12,
    rel: 1e-9,
    max_panels: 8000,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Extension {
    Periodic,
    /// |f(x)| continued as (r_b/r)^p from the box boundary.
    PowerTail { exponent: f64 },
}

/// Cubic B-spline interpolant of grid samples (physical order).
#[derive(Debug, Clone)]
pub struct GridField {
    grid: SpatialGrid,
    coeffs: Vec<f64>,
    extension: Extension,
    sup: f64,
    edge: f64,
}

#[inline]
fn bspline_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let u = 1.0 - t;
    [
        u * u * u / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}

#[inline]
fn bspline_slopes(t: f64) -> [f64; 4] {
    let u = 1.0 - t;
    [-0.5 * u * u, 1.5 * t * t - 2.0 * t, -1.5 * t * t + t + 0.5, 0.5 * t * t]
}

impl GridField {
    pub fn new(grid: &SpatialGrid, values: &[f64], extension: Extension) -> Result<Self> {
        if values.len() != grid.len() || values.is_empty() {
            return Err(LeviError::InvalidParams {
                name: "values",
                reason: format!("expected {} samples, got {}", grid.len(), values.len()),
            });
        }
        if let Extension::PowerTail { exponent } = extension {
            if !(exponent > 0.0) {
                return Err(LeviError::InvalidParams {
                    name: "exponent",
                    reason: format!("tail exponent must be positive, got {exponent}"),
                });
            }
        }
        let n = grid.n();
        let fft = GridFft::new(grid);
        let mut spec = fft.forward_real(values);
        for (k, c) in spec.iter_mut().enumerate() {
            let ij = grid.unflatten(k);
            let mut den = 1.0;
            for axis in 0..grid.dim {
                den *= (4.0 + 2.0 * (2.0 * PI * ij[axis] as f64 / n as f64).cos()) / 6.0;
            }
            *c /= Complex64::new(den, 0.0);
        }
        let coeffs = fft.inverse_real(spec);
        let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // largest sample on the outermost two layers of the box
        let mut edge: f64 = 0.0;
        for (idx, v) in values.iter().enumerate() {
            let ij = grid.unflatten(idx);
            if (0..grid.dim).any(|k| ij[k] <= 1 || ij[k] >= n - 2) {
                edge = edge.max(v.abs());
            }
        }
        Ok(Self {
            grid: *grid,
            coeffs,
            extension,
            sup,
            edge,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Periodic spline value and gradient at x.
    fn spline(&self, x: &[f64], want_grad: bool) -> (f64, [f64; 2]) {
        let h = self.grid.spacing();
        let r = self.grid.half_width;
        let n = self.grid.n() as i64;
        let mut base = [0i64; 2];
        let mut w = [[0.0; 4]; 2];
        let mut dw = [[0.0; 4]; 2];
        for k in 0..self.grid.dim {
            let u = (x[k] + r) / h;
            let i = u.floor();
            let t = u - i;
            base[k] = i as i64 - 1;
            w[k] = bspline_weights(t);
            if want_grad {
                dw[k] = bspline_slopes(t);
            }
        }
        if self.grid.dim == 1 {
            let mut v = 0.0;
            let mut g = 0.0;
            for a in 0..4 {
                let c = self.coeffs[(base[0] + a as i64).rem_euclid(n) as usize];
                v += w[0][a] * c;
                g += dw[0][a] * c;
            }
            (v, [g / h, 0.0])
        } else {
            let mut v = 0.0;
            let mut g0 = 0.0;
            let mut g1 = 0.0;
            for a in 0..4 {
                let i = (base[0] + a as i64).rem_euclid(n) as usize;
                for b in 0..4 {
                    let j = (base[1] + b as i64).rem_euclid(n) as usize;
                    let c = self.coeffs[i * n as usize + j];
                    v += w[0][a] * w[1][b] * c;
                    if want_grad {
                        g0 += dw[0][a] * w[1][b] * c;
                        g1 += w[0][a] * dw[1][b] * c;
                    }
                }
            }
            (v, [g0 / h, g1 / h])
        }
    }

    /// Radius (sup norm) inside which the interpolant is used as is.
    fn inner_radius(&self) -> f64 {
        self.grid.half_width - self.grid.spacing()
    }

    fn eval(&self, x: &[f64], want_grad: bool) -> (f64, [f64; 2]) {
        match self.extension {
            Extension::Periodic => self.spline(x, want_grad),
            Extension::PowerTail { exponent } => {
                let rin = self.inner_radius();
                let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if sup <= rin {
                    return self.spline(x, want_grad);
                }
                let scale = rin / sup;
                let xb: Vec<f64> = x.iter().map(|v| v * scale).collect();
                let (vb, _) = self.spline(&xb, false);
                let v = vb * scale.powf(exponent);
                let mut g = [0.0; 2];
                if want_grad {
                    // radial derivative of the tail along the sup-norm ray
                    let rr = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    for k in 0..x.len() {
                        g[k] = -exponent * v * x[k] / (rr * rr);
                    }
                }
                (v, g)
            }
        }
    }
}

impl SpatialFunction for GridField {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, false).0
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = self.eval(x, true).1;
        g[..self.grid.dim].to_vec()
    }

    fn decay_envelope(&self, r: f64) -> Option<f64> {
        match self.extension {
            Extension::Periodic => None,
            Extension::PowerTail { exponent } => {
                let rin = self.inner_radius();
                let s = r / (self.grid.dim as f64).sqrt();
                if s <= rin {
                    Some(self.sup)
                } else {
                    Some(self.edge.max(1e-300) * 1.5 * (rin / s).powf(exponent))
                }
            }
        }
    }

    fn ray_knots(&self, x: &[f64], theta: &[f64]) -> Option<f64> {
        let h = self.grid.spacing();
        let r = self.grid.half_width;
        let on_grid = x.iter().all(|v| {
            let u = (v + r) / h;
            (u - u.round()).abs() < 1e-9
        });
        let axis = theta.iter().filter(|c| c.abs() > 1e-12).count() == 1;
        let inside = self.extension == Extension::Periodic;
        (on_grid && axis && inside).then_some(h)
    }

    fn ray_period(&self, theta: &[f64]) -> Option<f64> {
        if self.extension != Extension::Periodic {
            return None;
        }
        let l = 2.0 * self.grid.half_width;
        if self.grid.dim == 1 {
            return Some(l);
        }
        // θ ∝ (m₁, m₂) with small integers gives period L·|m|
        for m1 in 0..=8i32 {
            for m2 in -8..=8i32 {
                if m1 == 0 && m2 <= 0 {
                    continue;
                }
                let norm = ((m1 * m1 + m2 * m2) as f64).sqrt();
                let c = [m1 as f64 / norm, m2 as f64 / norm];
                let par = c[0] * theta[0] + c[1] * theta[1];
                if (par.abs() - 1.0).abs() < 1e-12 {
                    return Some(l * norm);
                }
            }
        }
        None
    }
}

/// Cutoff schedule and tolerances of the δ → 0 limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorQuadrature {
    /// δ₀; `None` means 1/16 for evaluable inputs and the spacing for grid fields.
    pub delta0: Option<f64>,
    /// The schedule is δ₀ 2^{−k}, k = 0..=levels.
    pub levels: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
}

impl Default for GeneratorQuadrature {
    fn default() -> Self {
        Self {
            delta0: None,
            levels: 6,
            tol_abs: 1e-8,
            tol_rel: 1e-6,
        }
    }
}

/// Applies L^z for one jump kernel.
#[derive(Debug, Clone)]
pub struct Generator {
    pub kernel: JumpKernel,
    pub quad: GeneratorQuadrature,
}

impl Generator {
    pub fn new(kernel: JumpKernel) -> Self {
        Self {
            kernel,
            quad: GeneratorQuadrature::default(),
        }
    }

    pub fn with_quadrature(mut self, quad: GeneratorQuadrature) -> Self {
        self.quad = quad;
        self
    }

    /// L^{z,δ}f(x) for δ > 0; for δ = 0 the limit over the cutoff schedule
    /// with Richardson extrapolation in δ^{2−α} and δ^{4−α}.
    pub fn apply_generator<F: SpatialFunction + ?Sized>(&self, f: &F, z: &[f64], x: &[f64], delta: f64) -> Result<f64> {
        if delta < 0.0 || !delta.is_finite() {
            return Err(LeviError::InvalidParams {
                name: "delta",
                reason: format!("cutoff must be ≥ 0, got {delta}"),
            });
        }
        if delta > 0.0 {
            return self.kernel.integrate_second_difference(f, x, z, delta);
        }
        let d0 = self.quad.delta0.unwrap_or(1.0 / 16.0);
        let alpha = self.kernel.alpha();
        self.cutoff_limit(f, x, z, d0, [2.0 - alpha, 4.0 - alpha])
    }

    /// As [`Self::apply_generator`] with δ₀ defaulting to the grid spacing.
    pub fn apply_to_field(&self, f: &GridField, z: &[f64], x: &[f64], delta: f64) -> Result<f64> {
        if delta > 0.0 {
            return self.apply_generator(f, z, x, delta);
        }
        let d0 = self.quad.delta0.unwrap_or(f.grid().spacing());
        // at spline knots the second difference carries an s³ term
        let alpha = self.kernel.alpha();
        self.cutoff_limit(f, x, z, d0, [2.0 - alpha, 3.0 - alpha])
    }

    /// Limit δ → 0 over the schedule; the δ-independent far part is
    /// computed once when δ₀ ≤ 1.
    fn cutoff_limit<F: SpatialFunction + ?Sized>(&self, f: &F, x: &[f64], z: &[f64], d0: f64, exponents: [f64; 2]) -> Result<f64> {
        if d0 > 1.0 {
            return self.limit(|d| self.kernel.integrate_second_difference(f, x, z, d), d0, exponents, 0.0);
        }
        let far = self.kernel.integrate_far_part(f, x, z)?;
        Ok(far + self.limit(|d| self.kernel.integrate_near_part(f, x, z, d), d0, exponents, far)?)
    }

    /// L_x f(x) with the state frozen at the evaluation point, at every grid
    /// point listed in `indices`.
    pub fn apply_on_grid(&self, f: &GridField, indices: &[usize]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        indices
            .par_iter()
            .map(|&i| {
                let x = f.grid().point(i);
                self.apply_to_field(f, &x, &x, 0.0)
            })
            .collect()
    }

    /// `offset` is added back by the caller; it only enters the tolerance.
    fn limit<G: Fn(f64) -> Result<f64>>(&self, at: G, d0: f64, exponents: [f64; 2], offset: f64) -> Result<f64> {
        let levels = self.quad.levels.max(3);
        let mut v = Vec::with_capacity(levels + 1);
        for k in 0..=levels {
            v.push(at(d0 * 0.5f64.powi(k as i32))?);
        }
        let richardson = |v: &[f64], p: f64| -> Vec<f64> {
            let r = 2f64.powf(p);
            v.windows(2).map(|w| (r * w[1] - w[0]) / (r - 1.0)).collect()
        };
        let r1 = richardson(&v, exponents[0]);
        let r2 = richardson(&r1, exponents[1]);
        let last = r2[r2.len() - 1];
        let prev = r2[r2.len() - 2];
        let diff = (last - prev).abs();
        let tol = self.quad.tol_abs + self.quad.tol_rel * (last + offset).abs();
        if !(diff <= tol) {
            return Err(LeviError::NonconvergentLimit { diff, tol });
        }
        Ok(last)
    }

    /// A^# f(x) = ∫ |f(x+u) − f(x) − u·∇f(x) 1{|u| ≤ t^{1/α}}| ν₀(du).
    pub fn generator_majorant<F: SpatialFunction + ?Sized>(&self, f: &F, x: &[f64], t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(LeviError::InvalidParams {
                name: "t",
                reason: format!("scale must be positive, got {t}"),
            });
        }
        let alpha = self.kernel.alpha();
        let r = t.powf(1.0 / alpha);
        let fx = f.value(x);
        let grad = f.gradient(x);
        let mut total = 0.0;
        for atom in self.kernel.spectral.atoms() {
            let theta = &atom.direction;
            let slope: f64 = theta.iter().zip(&grad).map(|(a, b)| a * b).sum();
            total += atom.weight * ray_majorant(f, fx, slope, x, theta, alpha, r)?;
        }
        Ok(total)
    }

    /// L^{z,δ}f(x₀) at a point the caller certifies to be a global maximum.
    pub fn maximum_principle_probe<F: SpatialFunction + ?Sized>(&self, f: &F, z: &[f64], x0: &[f64], delta: f64) -> Result<f64> {
        self.apply_generator(f, z, x0, delta)
    }
}

fn ray_majorant<F: SpatialFunction + ?Sized>(
    f: &F,
    fx: f64,
    slope: f64,
    x: &[f64],
    theta: &[f64],
    alpha: f64,
    r: f64,
) -> Result<f64> {
    let d = x.len();
    let mut y = vec![0.0; d];
    let mut diff = |s: f64| -> f64 {
        for k in 0..d {
            y[k] = x[k] + s * theta[k];
        }
        f.value(&y) - fx
    };
    let s1 = (1e-3f64).min(0.5 * r);
    // below s₁ the compensated difference is ~ ½ f'' s²
    let d1 = (diff(s1) - slope * s1).abs();
    let mut total = d1 * s1.powf(-alpha) / (2.0 - alpha);
    let (near, _) = integrate_adaptive(
        |v: f64| {
            let s = v.exp();
            (diff(s) - slope * s).abs() * s.powf(-alpha)
        },
        &[s1.ln(), r.ln()],
        MAJORANT_TOL,
        "majorant near field",
    )?;
    total += near;
    if let Some(period) = f.ray_period(theta) {
        let mut g = |s: f64| diff(s).abs();
        return Ok(total + periodic_far_field(&mut g, alpha, r, period)?);
    }
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cap = 1e3 * (1.0 + xn + r);
    let mut a = r;
    let mut prev = f64::NAN;
    loop {
        let b = 2.0 * a;
        let (v, _) = integrate_adaptive(
            |s: f64| diff(s).abs() * s.powf(-1.0 - alpha),
            &[a, b],
            MAJORANT_TOL,
            "majorant far field",
        )?;
        total += v;
        a = b;
        if a >= cap {
            let ratio = v / prev;
            if !(ratio < 0.95) {
                return Err(LeviError::QuadratureNonconvergence {
                    context: "majorant far field",
                    tol: 0.95,
                    estimate: ratio,
                });
            }
            total += v * ratio / (1.0 - ratio);
            break;
        }
        prev = v;
    }
    Ok(total)
}
