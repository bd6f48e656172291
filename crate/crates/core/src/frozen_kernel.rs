//! Frozen-coefficient densities p_t^z by spectral inversion of exp(−t q(z, ·)).
//!
//! Two boundary treatments are offered. `Periodic` is the density of the
//! frozen flow on the torus [−R, R)^d: it sums to one on the grid exactly and
//! is the object every downstream construction uses. `FreeSpace` (d = 1)
//! approximates the whole-line density by inverting on a box four times wider
//! and subtracting the remaining periodic images from their large-|x|
//! expansion.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{LeviError, Result};
use crate::grid::{circular_to_physical, GridFft, SpatialGrid};
use crate::levy_kernel::JumpKernel;
use crate::quadrature::hurwitz_zeta;
use crate::spectral_measure::probe_directions;
use crate::symbol::SymbolEvaluator;

/// Spectral multiplier applied on top of exp(−t q).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deriv {
    None,
    /// ∂_t, multiplier −q(z, ξ).
    Time,
    /// Multiplier −q_g(ξ): the modulated part of the generator.
    Modulated,
    /// Multiplier −q₀(ξ): the unmodulated generator.
    Base,
    /// ∂^β_x with |β| ≤ 2.
    Space([u8; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    FreeSpace,
}

/// q₀ and q_g tabulated on the dual lattice of a grid, so that
/// q(z, ξ) = q₀(ξ) + a·s(z)·q_g(ξ).
#[derive(Debug, Clone)]
pub struct SpectralSymbol {
    pub grid: SpatialGrid,
    pub fft: GridFft,
    pub q0: Vec<f64>,
    pub qg: Vec<f64>,
    pub amplitude: f64,
    pub alpha: f64,
}

impl SpectralSymbol {
    pub fn new(symbol: &SymbolEvaluator, grid: &SpatialGrid) -> Self {
        let n = grid.len();
        let mut q0 = Vec::with_capacity(n);
        let mut qg = Vec::with_capacity(n);
        for k in 0..n {
            let xi = grid.frequency(k);
            q0.push(symbol.base(&xi));
            qg.push(symbol.modulated_part(&xi));
        }
        Self {
            grid: *grid,
            fft: GridFft::new(grid),
            q0,
            qg,
            amplitude: symbol.kernel.modulation.amplitude(),
            alpha: symbol.kernel.alpha(),
        }
    }

    #[inline]
    pub fn q(&self, k: usize, s: f64) -> f64 {
        self.q0[k] + self.amplitude * s * self.qg[k]
    }

    /// Multiplier table (FFT order) for exp(−t q(s, ·)) times `deriv`.
    pub fn multiplier(&self, t: f64, s: f64, deriv: Deriv) -> Vec<Complex64> {
        let n = self.grid.n();
        (0..self.grid.len())
            .map(|k| {
                let q = self.q(k, s);
                let e = (-t * q).exp();
                match deriv {
                    Deriv::None => Complex64::new(e, 0.0),
                    Deriv::Time => Complex64::new(-q * e, 0.0),
                    Deriv::Modulated => Complex64::new(-self.qg[k] * e, 0.0),
                    Deriv::Base => Complex64::new(-self.q0[k] * e, 0.0),
                    Deriv::Space(beta) => {
                        let ij = self.grid.unflatten(k);
                        let mut m = Complex64::new(e, 0.0);
                        for axis in 0..self.grid.dim {
                            let order = beta[axis];
                            if order == 0 {
                                continue;
                            }
                            // odd derivatives of the Nyquist mode are not representable
                            if order % 2 == 1 && ij[axis] == n / 2 {
                                return Complex64::new(0.0, 0.0);
                            }
                            let xi = self.grid.wavenumber(ij[axis]);
                            m *= Complex64::new(0.0, xi).powu(order as u32);
                        }
                        m
                    }
                }
            })
            .collect()
    }

    /// Kernel field in circular order (index 0 at displacement 0), density units.
    pub fn kernel_circular(&self, t: f64, s: f64, deriv: Deriv) -> Vec<f64> {
        let cell = self.grid.cell();
        self.fft
            .inverse_real(self.multiplier(t, s, deriv))
            .into_iter()
            .map(|v| v / cell)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrozenKernel {
    pub base_point: Vec<f64>,
    pub time: f64,
    pub grid: SpatialGrid,
    pub boundary: Boundary,
    /// Field in physical grid order (x_0 = −R).
    pub values: Vec<f64>,
    /// exp(−t q(z, ξ)) on the dual lattice, FFT order.
    pub spectral: Vec<f64>,
    /// Mass outside the box (free-space only).
    pub outside_mass: f64,
}

impl FrozenKernel {
    /// Σ values · h^d plus, in free space, the mass outside the box.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell() + self.outside_mass
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// max |p(x) − p(−x)| over the grid (the point −x_0 = R lies outside and
    /// is skipped).
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.grid.n();
        let mut worst: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let ij = self.grid.unflatten(idx);
            if (0..self.grid.dim).any(|k| ij[k] == 0) {
                continue;
            }
            let mut m = [0usize; 2];
            for k in 0..self.grid.dim {
                m[k] = n - ij[k];
            }
            worst = worst.max((self.values[idx] - self.values[self.grid.flatten(m)]).abs());
        }
        worst
    }

    /// Values with ringing below zero clipped, for use inside validation integrals.
    pub fn clipped(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.max(0.0)).collect()
    }
}

/// Evaluates frozen kernels and their derivatives for one jump kernel.
#[derive(Debug, Clone)]
pub struct FrozenEvaluator {
    pub symbol: SymbolEvaluator,
}

impl FrozenEvaluator {
    pub fn new(kernel: JumpKernel) -> Self {
        Self {
            symbol: SymbolEvaluator::new(kernel),
        }
    }

    pub fn kernel(&self) -> &JumpKernel {
        &self.symbol.kernel
    }

    /// Smallest admissible time on `grid` for base point `z`.
    pub fn t_min(&self, z: &[f64], grid: &SpatialGrid) -> Result<f64> {
        let dirs = probe_directions(grid.dim, 720);
        let c = self.symbol.comparability_scan(&[z.to_vec()], &dirs)?;
        Ok(grid.aliasing_floor(c.c_low, self.kernel().alpha()))
    }

    pub fn evaluate_frozen(&self, z: &[f64], t: f64, grid: &SpatialGrid, boundary: Boundary) -> Result<FrozenKernel> {
        self.field(z, t, grid, boundary, Deriv::None)
    }

    pub fn frozen_time_derivative(&self, z: &[f64], t: f64, grid: &SpatialGrid, boundary: Boundary) -> Result<FrozenKernel> {
        self.field(z, t, grid, boundary, Deriv::Time)
    }

    pub fn frozen_space_derivative(
        &self,
        z: &[f64],
        t: f64,
        grid: &SpatialGrid,
        boundary: Boundary,
        beta: [u8; 2],
    ) -> Result<FrozenKernel> {
        if beta[0] as usize + beta[1] as usize > 2 || (grid.dim == 1 && beta[1] != 0) {
            return Err(LeviError::InvalidParams {
                name: "beta",
                reason: format!("multi-index {beta:?} not supported"),
            });
        }
        self.field(z, t, grid, boundary, Deriv::Space(beta))
    }

    fn field(&self, z: &[f64], t: f64, grid: &SpatialGrid, boundary: Boundary, deriv: Deriv) -> Result<FrozenKernel> {
        if !(t > 0.0) {
            return Err(LeviError::InvalidParams {
                name: "t",
                reason: format!("time must be positive, got {t}"),
            });
        }
        let t_min = self.t_min(z, grid)?;
        if t < t_min {
            return Err(LeviError::AliasingRisk { t, t_min });
        }
        let s = self.kernel().modulation.feature(z);
        let (values, spectral, outside) = match boundary {
            Boundary::Periodic => {
                let ss = SpectralSymbol::new(&self.symbol, grid);
                let circ = ss.kernel_circular(t, s, deriv);
                let spec = (0..grid.len()).map(|k| (-t * ss.q(k, s)).exp()).collect();
                (circular_to_physical(grid, &circ), spec, 0.0)
            }
            Boundary::FreeSpace => self.free_space(z, t, grid, deriv)?,
        };
        if deriv == Deriv::None {
            let low = values.iter().copied().fold(f64::INFINITY, f64::min);
            if low < -1e-9 {
                log::warn!("frozen kernel ringing {low:e} below tolerance at t = {t}");
            }
        }
        Ok(FrozenKernel {
            base_point: z.to_vec(),
            time: t,
            grid: *grid,
            boundary,
            values,
            spectral,
            outside_mass: outside,
        })
    }

    fn free_space(&self, z: &[f64], t: f64, grid: &SpatialGrid, deriv: Deriv) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        if grid.dim != 1 {
            return Err(LeviError::InvalidParams {
                name: "boundary",
                reason: "free-space evaluation is available in d = 1 only".into(),
            });
        }
        const PAD: usize = 4;
        let wide = SpatialGrid::new(1, grid.half_width * PAD as f64, grid.n() * PAD)?;
        let ss = SpectralSymbol::new(&self.symbol, &wide);
        let s = self.kernel().modulation.feature(z);
        let circ = ss.kernel_circular(t, s, deriv);
        let n = grid.n();
        let big = wide.n();
        let period = 2.0 * wide.half_width;
        // q(z, ξ) = c|ξ|^α in one dimension
        let c = ss.q(1, s) / wide.wavenumber(1).powf(self.kernel().alpha());
        let series = StableTailSeries::new(self.kernel().alpha(), c, t);
        let axis = grid.axis();
        let mut values = Vec::with_capacity(n);
        for (j, x) in axis.iter().enumerate() {
            // offset of x from the origin in the wide circular layout
            let o = (j as i64 - (n / 2) as i64).rem_euclid(big as i64) as usize;
            let images = series.image_sum(*x, period, deriv);
            values.push(circ[o] - images);
        }
        let spec = (0..grid.len())
            .map(|k| (-t * c * grid.wavenumber(k).abs().powf(self.kernel().alpha())).exp())
            .collect();
        let outside = if deriv == Deriv::None {
            series.outside_mass(grid.half_width)
        } else {
            0.0
        };
        Ok((values, spec, outside))
    }
}

/// Large-|x| expansion of the one-dimensional stable density with symbol
/// c|ξ|^α: p_t(x) ~ (1/π) Σ_m (−1)^{m+1} Γ(mα+1)/m! sin(mπα/2) (ct)^m |x|^{−mα−1}.
#[derive(Debug, Clone)]
pub struct StableTailSeries {
    alpha: f64,
    ct: f64,
    c: f64,
    coeffs: Vec<f64>,
}

impl StableTailSeries {
    pub fn new(alpha: f64, c: f64, t: f64) -> Self {
        let mut coeffs = Vec::new();
        let mut fact = 1.0;
        for m in 1..=40 {
            fact *= m as f64;
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            let a = sign * gamma(m as f64 * alpha + 1.0) / fact * (m as f64 * PI * alpha / 2.0).sin() / PI;
            coeffs.push(a);
        }
        Self {
            alpha,
            ct: c * t,
            c,
            coeffs,
        }
    }

    /// Terms of the series in order, truncated once the magnitude envelope
    /// (the coefficient without its sine factor) stops decreasing or falls
    /// below 1e−18 of the first term.
    fn terms(&self, r: f64, mut per_term: impl FnMut(usize, f64, f64)) {
        let mut prev = f64::INFINITY;
        let mut first = 0.0;
        let mut fact = 1.0;
        for i in 0..self.coeffs.len() {
            let m = (i + 1) as f64;
            fact *= m;
            let s = m * self.alpha + 1.0;
            let env = gamma(s) / fact * self.ct.powf(m) * r.powf(-s);
            if i == 0 {
                first = env;
            }
            if env > prev || (i > 0 && env < 1e-18 * first) {
                break;
            }
            prev = env;
            per_term(i, m, s);
        }
    }

    /// Σ_{n≠0} of the (derivative of the) expansion at x + nL, |x| < L/2.
    pub fn image_sum(&self, x: f64, period: f64, deriv: Deriv) -> f64 {
        let l = period;
        let u = x / l;
        let mut total = 0.0;
        self.terms(l - x.abs(), |i, m, s| {
            let a = self.coeffs[i];
            let (time_factor, order) = match deriv {
                Deriv::None => (self.ct.powf(m), 0usize),
                Deriv::Time => (m * self.c * self.ct.powf(m - 1.0) , 0),
                Deriv::Space(b) => (self.ct.powf(m), b[0] as usize),
                Deriv::Base | Deriv::Modulated => (f64::NAN, 0),
            };
            // Σ_{n≠0} ∂_x^k |x + nL|^{−s}
            let spatial = match order {
                0 => l.powf(-s) * (hurwitz_zeta(s, 1.0 + u) + hurwitz_zeta(s, 1.0 - u)),
                1 => -s * l.powf(-s - 1.0) * (hurwitz_zeta(s + 1.0, 1.0 + u) - hurwitz_zeta(s + 1.0, 1.0 - u)),
                _ => s * (s + 1.0) * l.powf(-s - 2.0) * (hurwitz_zeta(s + 2.0, 1.0 + u) + hurwitz_zeta(s + 2.0, 1.0 - u)),
            };
            total += a * time_factor * spatial;
        });
        total
    }

    /// ∫_{|x|>R} of the expansion.
    pub fn outside_mass(&self, r: f64) -> f64 {
        let mut total = 0.0;
        self.terms(r, |i, m, s| {
            total += 2.0 * self.coeffs[i] * self.ct.powf(m) * r.powf(1.0 - s) / (s - 1.0);
        });
        total
    }
}

/// max over the grid of |p^{w₁}_t − p^{w₂}_t| / [(|w₁−w₂|^η ∧ 1) G^{(α+γ−θ)}_t].
pub fn frozen_holder_in_base(
    eval: &FrozenEvaluator,
    w1: &[f64],
    w2: &[f64],
    t: f64,
    grid: &SpatialGrid,
    theta: f64,
) -> Result<f64> {
    let dw = w1.iter().zip(w2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if dw == 0.0 {
        return Ok(0.0);
    }
    let k = eval.kernel();
    let p1 = eval.evaluate_frozen(w1, t, grid, Boundary::Periodic)?;
    let p2 = eval.evaluate_frozen(w2, t, grid, Boundary::Periodic)?;
    let scale = dw.powf(k.modulation.eta).min(1.0);
    let beta = k.alpha() + k.params.gamma - theta;
    let mut worst: f64 = 0.0;
    for idx in 0..grid.len() {
        let x = grid.point(idx);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let g = crate::bounds::g_kernel(beta, t, r, grid.dim, k.alpha());
        worst = worst.max((p1.values[idx] - p2.values[idx]).abs() / (scale * g));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_kernel::{Modulation, StableParams};
    use crate::spectral_measure::SpectralMeasure;

    fn cauchy() -> FrozenEvaluator {
        let w = 1.0 / PI;
        let mu = SpectralMeasure::from_pairs(1, &[(vec![1.0], w), (vec![-1.0], w)]).unwrap();
        FrozenEvaluator::new(JumpKernel::new(mu, StableParams::new(1.0, 1.0, 1, 4.0 / 3.0).unwrap(), Modulation::constant()).unwrap())
    }

    fn cosine(alpha: f64) -> FrozenEvaluator {
        let w = 1.0 / PI;
        let mu = SpectralMeasure::from_pairs(1, &[(vec![1.0], w), (vec![-1.0], w)]).unwrap();
        let m = Modulation::cosine(0.3, vec![PI / 10.0], vec![1.0, 1.0]).unwrap();
        FrozenEvaluator::new(JumpKernel::new(mu, StableParams::new(alpha, 1.0, 1, 4.0 / 3.0).unwrap(), m).unwrap())
    }

    fn cauchy_density(t: f64, x: f64) -> f64 {
        t / (PI * (t * t + x * x))
    }

    #[test]
    fn periodic_kernel_is_the_wrapped_cauchy_density() {
        // Σ_n Cauchy(x + 2Rn) = sinh(πt/R) / (2R (cosh(πt/R) − cos(πx/R)))
        let grid = SpatialGrid::new(1, 10.0, 512).unwrap();
        let e = cauchy();
        let r = 10.0;
        for t in [0.5, 1.0] {
            let p = e.evaluate_frozen(&[0.0], t, &grid, Boundary::Periodic).unwrap();
            for (j, x) in grid.axis().iter().enumerate() {
                let wrapped = (PI * t / r).sinh() / (2.0 * r * ((PI * t / r).cosh() - (PI * x / r).cos()));
                assert!((p.values[j] - wrapped).abs() < 1e-12 * wrapped.max(1e-3), "x = {x}");
            }
            assert!((p.mass() - 1.0).abs() < 1e-12);
            assert!(p.symmetry_defect() < 1e-12);
        }
    }

    #[test]
    fn free_space_matches_cauchy() {
        let grid = SpatialGrid::new(1, 40.0, 2048).unwrap();
        let e = cauchy();
        for t in [0.5, 1.0, 2.0] {
            let p = e.evaluate_frozen(&[0.0], t, &grid, Boundary::FreeSpace).unwrap();
            let mut worst: f64 = 0.0;
            for (j, x) in grid.axis().iter().enumerate() {
                if x.abs() <= 20.0 {
                    let c = cauchy_density(t, *x);
                    worst = worst.max(((p.values[j] - c) / c).abs());
                }
            }
            assert!(worst < 1e-6, "t = {t}: {worst:e}");
            assert!((p.mass() - 1.0).abs() < 1e-6, "mass {}", p.mass());
            // ∂_t p_t(0) = −1/(π t²)
            let dt = e.frozen_time_derivative(&[0.0], t, &grid, Boundary::FreeSpace).unwrap();
            assert!((dt.values[1024] + 1.0 / (PI * t * t)).abs() < 1e-8);
        }
        let dx = e
            .frozen_space_derivative(&[0.0], 1.0, &grid, Boundary::FreeSpace, [1, 0])
            .unwrap();
        let j = 1024 + 32; // x = 1.25
        let x = grid.axis()[j];
        assert!((x - 1.25).abs() < 1e-12);
        let exact = -2.0 * x / (PI * (1.0 + x * x).powi(2));
        assert!((dx.values[j] - exact).abs() < 1e-8, "{} vs {exact}", dx.values[j]);
        assert!(dx.values[1024].abs() < 1e-12);
    }

    #[test]
    fn aliasing_guard_rejects_small_times() {
        let grid = SpatialGrid::new(1, 40.0, 256).unwrap();
        let e = cauchy();
        let t_min = e.t_min(&[0.0], &grid).unwrap();
        assert!(matches!(
            e.evaluate_frozen(&[0.0], 0.5 * t_min, &grid, Boundary::Periodic),
            Err(LeviError::AliasingRisk { .. })
        ));
        assert!(e.evaluate_frozen(&[0.0], 1.01 * t_min, &grid, Boundary::Periodic).is_ok());
    }

    #[test]
    fn semigroup_and_mass_of_derivative() {
        let grid = SpatialGrid::new(1, 40.0, 1024).unwrap();
        let e = cosine(1.4);
        let z = [3.0];
        let p1 = e.evaluate_frozen(&z, 0.7, &grid, Boundary::Periodic).unwrap();
        let p2 = e.evaluate_frozen(&z, 1.4, &grid, Boundary::Periodic).unwrap();
        // direct circular self-convolution as the oracle
        let n = grid.n();
        let h = grid.spacing();
        let circ = crate::grid::physical_to_circular(&grid, &p1.values);
        let phys2 = crate::grid::physical_to_circular(&grid, &p2.values);
        let sup = phys2.iter().copied().fold(0.0, f64::max);
        for o in (0..n).step_by(7) {
            let conv: f64 = (0..n).map(|l| circ[l] * circ[(o + n - l) % n]).sum::<f64>() * h;
            assert!((conv - phys2[o]).abs() < 1e-5 * sup);
        }
        let dt = e.frozen_time_derivative(&z, 0.7, &grid, Boundary::Periodic).unwrap();
        assert!(dt.values.iter().sum::<f64>().abs() * h < 1e-6);
        assert!(p1.min_value() > -1e-9);
    }

    #[test]
    fn holder_in_base_point() {
        let grid = SpatialGrid::new(1, 40.0, 512).unwrap();
        let e = cosine(1.0);
        assert_eq!(frozen_holder_in_base(&e, &[1.0], &[1.0], 1.5, &grid, 0.5).unwrap(), 0.0);
        let c = cauchy();
        assert!(frozen_holder_in_base(&c, &[1.0], &[4.0], 1.5, &grid, 0.5).unwrap() < 1e-14);
        let g1 = frozen_holder_in_base(&e, &[0.0], &[2.0], 1.5, &grid, 0.5).unwrap();
        let g2 = frozen_holder_in_base(&e, &[0.0], &[2.0], 1.5, &grid.refined(), 0.5).unwrap();
        assert!(g1.is_finite() && g1 > 0.0);
        assert!((g1 / g2 - 1.0).abs() < 0.2);
    }
}
