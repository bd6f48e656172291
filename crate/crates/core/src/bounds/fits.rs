//! Least max-ratio fits of computed fields against their majorants.
//!
//! Every fit is a supremum of |field| / majorant over a sample set, with
//! samples whose majorant falls below [`MAJORANT_FLOOR`] skipped. Distances
//! are minimum-image distances on the torus grid.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LeviError, Result};
use crate::frozen_kernel::{Boundary, Deriv, FrozenEvaluator};
use crate::generator::{Extension, Generator, GridField};
use crate::grid::SpatialGrid;
use crate::levy_kernel::JumpKernel;
use crate::parametrix::KernelFamily;

use super::comparison::{g_kernel, h_kernel};

pub const MAJORANT_FLOOR: f64 = 1e-12;

/// G^{(β)} with β = α + γ unless stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Majorant {
    pub alpha: f64,
    pub beta: f64,
    pub dim: usize,
}

impl Majorant {
    pub fn for_kernel(k: &JumpKernel) -> Self {
        Self {
            alpha: k.alpha(),
            beta: k.alpha() + k.params.gamma,
            dim: k.dim(),
        }
    }

    #[inline]
    pub fn g(&self, t: f64, r: f64) -> f64 {
        g_kernel(self.beta, t, r, self.dim, self.alpha)
    }
}

/// |x_i − x_j| on the torus.
pub fn grid_distance(grid: &SpatialGrid, i: usize, j: usize) -> f64 {
    let d = grid.displacement(&grid.point(i), &grid.point(j));
    d.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Distances from each probe to every grid point, [probe][point].
pub fn distance_table(grid: &SpatialGrid, probes: &[usize]) -> Array2<f64> {
    let n = grid.len();
    let pts: Vec<Vec<f64>> = (0..n).map(|i| grid.point(i)).collect();
    let mut out = Array2::zeros((probes.len(), n));
    for (p, &i) in probes.iter().enumerate() {
        for j in 0..n {
            let d = grid.displacement(&pts[i], &pts[j]);
            out[[p, j]] = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
    }
    out
}

/// max |F[p][j]| / majorant(dist(probe p, j)) over a probe block.
pub fn block_ratio<M: Fn(f64) -> f64>(grid: &SpatialGrid, probes: &[usize], block: &Array2<f64>, majorant: M) -> f64 {
    let dist = distance_table(grid, probes);
    let mut worst: f64 = 0.0;
    for ((p, j), v) in block.indexed_iter() {
        let m = majorant(dist[[p, j]]);
        if m >= MAJORANT_FLOOR {
            worst = worst.max(v.abs() / m);
        }
    }
    worst
}

/// p_t(x_p, ·) for a set of rows x_p at increasing times.
#[derive(Debug, Clone)]
pub struct KernelSlices {
    pub grid: SpatialGrid,
    pub rows: Vec<usize>,
    pub times: Vec<f64>,
    pub values: Vec<Array2<f64>>,
}

impl KernelSlices {
    pub fn new(grid: SpatialGrid, rows: Vec<usize>, times: Vec<f64>, values: Vec<Array2<f64>>) -> Result<Self> {
        let bad = |reason: String| LeviError::InvalidParams { name: "slices", reason };
        if times.is_empty() || times.len() != values.len() {
            return Err(bad(format!("{} times for {} fields", times.len(), values.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] > 0.0) {
            return Err(bad("times must be positive and increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| v.dim() != (rows.len(), grid.len())) {
            return Err(bad(format!("field of shape {:?}, expected {:?}", v.dim(), (rows.len(), grid.len()))));
        }
        Ok(Self { grid, rows, times, values })
    }

    /// Centered three-point ∂_t at an interior time index.
    pub fn time_derivative(&self, k: usize) -> Option<Array2<f64>> {
        if k == 0 || k + 1 >= self.times.len() {
            return None;
        }
        Some(centered_derivative(
            [self.times[k - 1], self.times[k], self.times[k + 1]],
            [&self.values[k - 1], &self.values[k], &self.values[k + 1]],
        ))
    }
}

/// Three-point derivative at the middle of a non-uniform stencil.
pub fn centered_derivative(t: [f64; 3], f: [&Array2<f64>; 3]) -> Array2<f64> {
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    let a = -h2 / (h1 * (h1 + h2));
    let b = (h2 - h1) / (h1 * h2);
    let c = h1 / (h2 * (h1 + h2));
    f[0] * a + f[1] * b + f[2] * c
}

/// The (C, c) fit of |∂_t^k p_t(x, y)| ≤ C t^{−k} e^{ct} G_t^{(α+γ)}(y − x), k = 0, 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundFit {
    pub c: f64,
    pub constant: f64,
    /// k = 0 and k = 1 constants at the chosen c.
    pub value_constant: f64,
    pub derivative_constant: f64,
    /// (c, C(c)) over the scan.
    pub scan: Vec<[f64; 2]>,
    /// Times where ∂_t was not formed (one-sided stencil).
    pub skipped_derivative_times: Vec<f64>,
}

pub fn default_rate_grid() -> Vec<f64> {
    (0..=20).map(|i| 0.1 * i as f64).collect()
}

/// For each scanned c, C(c) is the least constant over all samples; the
/// reported pair is the one with the smallest mean log-slack
/// ln(C e^{ct} / ratio(t)) over the sample times.
pub fn upper_bound_fit(slices: &KernelSlices, maj: Majorant, rates: &[f64]) -> Result<UpperBoundFit> {
    let dist = distance_table(&slices.grid, &slices.rows);
    let ratio = |t: f64, f: &Array2<f64>, scale: f64| -> f64 {
        let mut worst: f64 = 0.0;
        for ((p, j), v) in f.indexed_iter() {
            let m = maj.g(t, dist[[p, j]]);
            if m >= MAJORANT_FLOOR {
                worst = worst.max(scale * v.abs() / m);
            }
        }
        worst
    };
    let n = slices.times.len();
    let mut r0 = Vec::with_capacity(n);
    let mut r1 = Vec::with_capacity(n);
    let mut skipped = Vec::new();
    for (k, &t) in slices.times.iter().enumerate() {
        r0.push(ratio(t, &slices.values[k], 1.0));
        match slices.time_derivative(k) {
            Some(d) => r1.push(ratio(t, &d, t)),
            None => {
                r1.push(0.0);
                skipped.push(t);
            }
        }
    }
    if r0.iter().chain(&r1).any(|v| !v.is_finite()) {
        return Err(LeviError::UnboundedRatio("non-finite ratio in the upper-bound fit".into()));
    }
    let envelope: Vec<f64> = r0.iter().zip(&r1).map(|(a, b)| a.max(*b)).collect();
    let best_c = |c: f64| -> f64 {
        slices
            .times
            .iter()
            .zip(&envelope)
            .map(|(t, m)| m * (-c * t).exp())
            .fold(0.0, f64::max)
    };
    let mut scan = Vec::with_capacity(rates.len());
    let mut pick = (f64::INFINITY, 0.0, 0.0);
    for &c in rates {
        let big = best_c(c);
        scan.push([c, big]);
        let slack: f64 = slices
            .times
            .iter()
            .zip(&envelope)
            .filter(|(_, m)| **m > 0.0)
            .map(|(t, m)| (big * (c * t).exp() / m).ln())
            .sum::<f64>()
            / n as f64;
        if slack < pick.0 {
            pick = (slack, c, big);
        }
    }
    let (_, c, constant) = pick;
    let at = |r: &[f64]| -> f64 {
        slices
            .times
            .iter()
            .zip(r)
            .map(|(t, v)| v * (-c * t).exp())
            .fold(0.0, f64::max)
    };
    Ok(UpperBoundFit {
        c,
        constant,
        value_constant: at(&r0),
        derivative_constant: at(&r1),
        scan,
        skipped_derivative_times: skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub constant: f64,
    /// Grid indices of the worst pair and the time it was found at.
    pub worst_pair: (usize, usize),
    pub worst_time: f64,
}

/// |p_t(x₁, y) − p_t(x₂, y)| ≤ K (|x₁ − x₂|/t^{1/α})^θ e^{ct} (G_t(y − x₁) + G_t(y − x₂)),
/// with `pairs` given as positions in `slices.rows`.
pub fn holder_in_x_check(slices: &KernelSlices, maj: Majorant, pairs: &[(usize, usize)], theta: f64, c: f64) -> HolderFit {
    let dist = distance_table(&slices.grid, &slices.rows);
    let mut best = HolderFit {
        constant: 0.0,
        worst_pair: (0, 0),
        worst_time: 0.0,
    };
    for &(a, b) in pairs {
        let (ia, ib) = (slices.rows[a], slices.rows[b]);
        if ia == ib {
            continue;
        }
        let gap = grid_distance(&slices.grid, ia, ib);
        for (k, &t) in slices.times.iter().enumerate() {
            let v = &slices.values[k];
            let scale = (gap / t.powf(1.0 / maj.alpha)).powf(theta) * (c * t).exp();
            for y in 0..slices.grid.len() {
                let m = scale * (maj.g(t, dist[[a, y]]) + maj.g(t, dist[[b, y]]));
                if m < MAJORANT_FLOOR {
                    continue;
                }
                let r = (v[[a, y]] - v[[b, y]]).abs() / m;
                if r > best.constant {
                    best = HolderFit {
                        constant: r,
                        worst_pair: (ia, ib),
                        worst_time: t,
                    };
                }
            }
        }
    }
    best
}

/// Constants c in |∂^β p_t^z(x)| ≤ c t^{−|β|/α} G_t(x) for |β| = 0, 1, 2 and
/// |∂_t p_t^z(x)| ≤ c t^{−1} G_t(x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenBoundFit {
    pub value: f64,
    pub gradient: f64,
    pub hessian: f64,
    pub time_derivative: f64,
}

pub fn frozen_bound_fit(
    eval: &FrozenEvaluator,
    bases: &[Vec<f64>],
    times: &[f64],
    grid: &SpatialGrid,
    boundary: Boundary,
) -> Result<FrozenBoundFit> {
    let maj = Majorant::for_kernel(eval.kernel());
    let radii: Vec<f64> = (0..grid.len())
        .map(|i| grid.point(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let fit = |values: &[f64], t: f64, order: f64| -> f64 {
        let scale = t.powf(-order / maj.alpha);
        values
            .iter()
            .zip(&radii)
            .map(|(v, r)| {
                let m = scale * maj.g(t, *r);
                if m >= MAJORANT_FLOOR {
                    v.abs() / m
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    };
    let first: &[[u8; 2]] = if grid.dim == 1 { &[[1, 0]] } else { &[[1, 0], [0, 1]] };
    let second: &[[u8; 2]] = if grid.dim == 1 { &[[2, 0]] } else { &[[2, 0], [1, 1], [0, 2]] };
    let mut out = FrozenBoundFit {
        value: 0.0,
        gradient: 0.0,
        hessian: 0.0,
        time_derivative: 0.0,
    };
    for z in bases {
        for &t in times {
            out.value = out.value.max(fit(&eval.evaluate_frozen(z, t, grid, boundary)?.values, t, 0.0));
            out.time_derivative = out
                .time_derivative
                .max(fit(&eval.frozen_time_derivative(z, t, grid, boundary)?.values, t, maj.alpha));
            for b in first {
                let f = eval.frozen_space_derivative(z, t, grid, boundary, *b)?;
                out.gradient = out.gradient.max(fit(&f.values, t, 1.0));
            }
            for b in second {
                let f = eval.frozen_space_derivative(z, t, grid, boundary, *b)?;
                out.hessian = out.hessian.max(fit(&f.values, t, 2.0));
            }
        }
    }
    Ok(out)
}

/// Largest scaled base-point gap over the given pairs and times.
pub fn frozen_holder_fit(
    eval: &FrozenEvaluator,
    pairs: &[(Vec<f64>, Vec<f64>)],
    times: &[f64],
    grid: &SpatialGrid,
    theta: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (w1, w2) in pairs {
        for &t in times {
            worst = worst.max(crate::frozen_kernel::frozen_holder_in_base(eval, w1, w2, t, grid, theta)?);
        }
    }
    Ok(worst)
}

/// c_A in A^#(p_t^z)(x) ≤ c_A t^{−1} G_t(x), sampled at `points` of the
/// periodic frozen field.
pub fn generator_bound_fit(gen: &Generator, eval: &FrozenEvaluator, z: &[f64], times: &[f64], grid: &SpatialGrid, points: &[usize]) -> Result<f64> {
    let maj = Majorant::for_kernel(eval.kernel());
    let mut worst: f64 = 0.0;
    for &t in times {
        let p = eval.evaluate_frozen(z, t, grid, Boundary::Periodic)?;
        let field = GridField::new(grid, &p.values, Extension::Periodic)?;
        let ratios: Vec<f64> = points
            .par_iter()
            .map(|&i| {
                let x = grid.point(i);
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let m = maj.g(t, r) / t;
                let a = gen.generator_majorant(&field, &x, t)?;
                Ok(if m >= MAJORANT_FLOOR { a / m } else { 0.0 })
            })
            .collect::<Result<_>>()?;
        worst = ratios.into_iter().fold(worst, f64::max);
    }
    Ok(worst)
}

/// max over rows x of |∫ ∂_t p_t^y(y − x) dy|, per time.
pub fn cancellation_defects(family: &KernelFamily, times: &[f64], rows: &[usize]) -> Vec<f64> {
    let grid = &family.grid;
    let cell = grid.cell();
    let mut distinct: Vec<f64> = family.features.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    times
        .iter()
        .map(|&t| {
            let tables: Vec<Vec<f64>> = distinct
                .par_iter()
                .map(|s| family.symbol.kernel_circular(t, *s, Deriv::Time))
                .collect();
            let which: Vec<usize> = family
                .features
                .iter()
                .map(|s| distinct.binary_search_by(|v| v.total_cmp(s)).expect("feature listed"))
                .collect();
            rows.iter()
                .map(|&x| {
                    let sum: f64 = (0..grid.len()).map(|y| tables[which[y]][family.offset(x, y)]).sum();
                    (sum * cell).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// c in |∫ ∂_t p_t^y(y − x) dy| ≤ c t^{−1+θ/α}.
pub fn cancellation_fit(family: &KernelFamily, times: &[f64], rows: &[usize], theta: f64) -> f64 {
    let alpha = family.symbol.alpha;
    cancellation_defects(family, times, rows)
        .iter()
        .zip(times)
        .map(|(d, t)| d / t.powf(-1.0 + theta / alpha))
        .fold(0.0, f64::max)
}

/// C_Φ in |Φ_t(x, y)| ≤ C_Φ t^{−1} (1 ∧ |y − x|^η) G_t(y − x) for one block.
pub fn phi_block_ratio(grid: &SpatialGrid, probes: &[usize], block: &Array2<f64>, maj: Majorant, eta: f64, t: f64) -> f64 {
    block_ratio(grid, probes, block, |r| maj.g(t, r) * r.powf(eta).min(1.0) / t)
}

/// c₃ in |Ψ_t(x, y)| ≤ c₃ t^{−1+θ/α} H_t^{(γ,θ)}(y − x) for one block.
pub fn psi_block_ratio(grid: &SpatialGrid, probes: &[usize], block: &Array2<f64>, k: &JumpKernel, theta: f64, t: f64) -> f64 {
    let alpha = k.alpha();
    let gamma = k.params.gamma;
    let d = k.dim();
    block_ratio(grid, probes, block, |r| t.powf(-1.0 + theta / alpha) * h_kernel(gamma, theta, t, r, d, alpha))
}

/// Sup residual of p_{s+t} = p_s ∘ p_t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub sup_residual: f64,
    pub scale: f64,
    pub relative: f64,
}

/// Rows layout: `p_s` and `p_st` hold rows x ∈ probes, `p_t_full` holds
/// every row z.
pub fn chapman_kolmogorov(p_s: &Array2<f64>, p_t_full: &Array2<f64>, p_st: &Array2<f64>, cell: f64) -> Residual {
    let composed = p_s.dot(p_t_full) * cell;
    let sup_residual = (&composed - p_st).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = p_st.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Residual {
        sup_residual,
        scale,
        relative: sup_residual / scale,
    }
}

/// max over rows of |Σ_y p(x, y) h^d − 1|.
pub fn mass_defect(rows: &Array2<f64>, cell: f64) -> f64 {
    rows.rows()
        .into_iter()
        .map(|r| (r.sum() * cell - 1.0).abs())
        .fold(0.0, f64::max)
}

/// sup_x |Σ_y p(x, y) f(y) h^d − f(x)| for a full rows-layout field.
pub fn initial_condition_error(p_full: &Array2<f64>, f: &[f64], cell: f64) -> f64 {
    let fv = ndarray::ArrayView1::from(f);
    let u = p_full.dot(&fv) * cell;
    u.iter().zip(f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeResidual {
    /// max |(∂_t − L_x) p| / (t^{−1} G_t(y − x)).
    pub worst_ratio: f64,
    pub worst_abs: f64,
    /// (x index, y index) of the worst ratio.
    pub at: (usize, usize),
}

/// (∂_t − L_x) p_t(x, y) in column layout (row q holds p(·, y_q)) from
/// fields at three times; ∂_t by the centered stencil, L_x by generator
/// quadrature on the periodic spline of each column.
pub fn pde_residual(
    gen: &Generator,
    grid: &SpatialGrid,
    probes: &[usize],
    times: [f64; 3],
    cols: [&Array2<f64>; 3],
    x_sample: &[usize],
    maj: Majorant,
) -> Result<PdeResidual> {
    let dt = centered_derivative(times, cols);
    let t = times[1];
    let mut out = PdeResidual {
        worst_ratio: 0.0,
        worst_abs: 0.0,
        at: (0, 0),
    };
    for (q, &y) in probes.iter().enumerate() {
        let column: Vec<f64> = cols[1].row(q).to_vec();
        let field = GridField::new(grid, &column, Extension::Periodic)?;
        let lx = gen.apply_on_grid(&field, x_sample)?;
        for (&x, l) in x_sample.iter().zip(&lx) {
            let res = (dt[[q, x]] - l).abs();
            let m = maj.g(t, grid_distance(grid, x, y)) / t;
            out.worst_abs = out.worst_abs.max(res);
            if m >= MAJORANT_FLOOR && res / m > out.worst_ratio {
                out.worst_ratio = res / m;
                out.at = (x, y);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub name: String,
    pub coarse: f64,
    pub fine: f64,
    pub relative_change: f64,
    pub tolerance: f64,
    pub stable: bool,
}

/// Compares a fitted constant across a ×2 refinement. A constant that is
/// non-finite or more than doubles is treated as not saturating.
pub fn refinement_stability(name: &str, coarse: f64, fine: f64, tolerance: f64) -> Result<Stability> {
    if !coarse.is_finite() || !fine.is_finite() || fine > 2.0 * coarse.abs().max(f64::MIN_POSITIVE) {
        return Err(LeviError::UnboundedRatio(format!("{name}: {coarse:e} → {fine:e} under refinement")));
    }
    let relative_change = if coarse == 0.0 && fine == 0.0 {
        0.0
    } else {
        (fine - coarse).abs() / coarse.abs().max(fine.abs())
    };
    Ok(Stability {
        name: name.to_string(),
        coarse,
        fine,
        relative_change,
        tolerance,
        stable: relative_change <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_kernel::{Modulation, StableParams};
    use crate::parametrix::{Which, KernelFamily};
    use crate::spectral_measure::SpectralMeasure;
    use std::f64::consts::PI;

    fn cauchy_kernel(a: f64) -> JumpKernel {
        let mu = SpectralMeasure::from_pairs(1, &[(vec![1.0], 1.0 / PI), (vec![-1.0], 1.0 / PI)]).unwrap();
        let m = if a == 0.0 {
            Modulation::constant()
        } else {
            Modulation::cosine(a, vec![PI / 10.0], vec![1.0, 1.0]).unwrap()
        };
        JumpKernel::new(mu, StableParams::new(1.0, 1.0, 1, 2.0).unwrap(), m).unwrap()
    }

    fn cauchy_slices(grid: SpatialGrid, rows: Vec<usize>, times: Vec<f64>) -> KernelSlices {
        let values = times
            .iter()
            .map(|&t| {
                Array2::from_shape_fn((rows.len(), grid.len()), |(p, j)| {
                    let r = grid_distance(&grid, rows[p], j);
                    t / (PI * (t * t + r * r))
                })
            })
            .collect();
        KernelSlices::new(grid, rows, times, values).unwrap()
    }

    #[test]
    fn cauchy_upper_bound_constant_is_one_over_pi() {
        // |p| / G^{(2)} and t|∂_t p| / G^{(2)} both peak at 1/π, uniformly in t
        let grid = SpatialGrid::new(1, 409.6, 8192).unwrap();
        let times: Vec<f64> = (0..9).map(|k| 0.5 + 0.02 * k as f64).collect();
        let s = cauchy_slices(grid, vec![4096], times);
        let maj = Majorant { alpha: 1.0, beta: 2.0, dim: 1 };
        let fit = upper_bound_fit(&s, maj, &default_rate_grid()).unwrap();
        assert_eq!(fit.c, 0.0);
        assert!((fit.value_constant - 1.0 / PI).abs() < 1e-12, "{fit:?}");
        assert!((fit.derivative_constant - 1.0 / PI).abs() < 1e-3, "{fit:?}");
        assert_eq!(fit.skipped_derivative_times.len(), 2);
    }

    #[test]
    fn exponential_growth_is_absorbed_by_the_rate() {
        let grid = SpatialGrid::new(1, 10.0, 64).unwrap();
        let maj = Majorant { alpha: 1.0, beta: 2.0, dim: 1 };
        // two times: no interior point, so only the k = 0 ratio enters
        let times: Vec<f64> = vec![0.5, 2.0];
        let rows = vec![32];
        let values = times
            .iter()
            .map(|&t| Array2::from_shape_fn((1, 64), |(_, j)| 2.0 * (0.5 * t).exp() * maj.g(t, grid_distance(&grid, 32, j))))
            .collect();
        let s = KernelSlices::new(grid, rows, times, values).unwrap();
        let fit = upper_bound_fit(&s, maj, &default_rate_grid()).unwrap();
        assert!((fit.c - 0.5).abs() < 1e-12 && (fit.value_constant - 2.0).abs() < 1e-12, "{fit:?}");
    }

    #[test]
    fn holder_of_equal_points_is_zero() {
        let grid = SpatialGrid::new(1, 10.0, 64).unwrap();
        let s = cauchy_slices(grid, vec![10, 10, 12], vec![0.5, 1.0]);
        let maj = Majorant { alpha: 1.0, beta: 2.0, dim: 1 };
        assert_eq!(holder_in_x_check(&s, maj, &[(0, 1)], 0.5, 0.0).constant, 0.0);
        let h = holder_in_x_check(&s, maj, &[(0, 2)], 0.5, 0.0);
        assert!(h.constant > 0.0 && h.constant.is_finite());
        assert_eq!(h.worst_pair, (10, 12));
    }

    #[test]
    fn gaussian_chapman_kolmogorov_and_mass() {
        let grid = SpatialGrid::new(1, 12.8, 512).unwrap();
        let heat = |t: f64| {
            Array2::from_shape_fn((512, 512), |(i, j)| {
                let r = grid_distance(&grid, i, j);
                (-r * r / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
            })
        };
        let (a, b) = (heat(0.5), heat(1.0));
        let h = grid.cell();
        let probes = [0usize, 100, 240];
        let sel = |m: &Array2<f64>| m.select(ndarray::Axis(0), &probes);
        let r = chapman_kolmogorov(&sel(&a), &a, &sel(&b), h);
        assert!(r.relative < 1e-10, "{r:?}");
        assert!(mass_defect(&a, h) < 1e-12);
        let f: Vec<f64> = (0..512).map(|i| (-(grid.point(i)[0]).powi(2) / 8.0).exp()).collect();
        // e^{tΔ} of a Gaussian of variance 4 is a Gaussian of variance 4 + 2t
        let exact: Vec<f64> = (0..512)
            .map(|i| (4.0 / (4.0 + 2.0 * 0.5f64)).sqrt() * (-(grid.point(i)[0]).powi(2) / (2.0 * (4.0 + 1.0))).exp())
            .collect();
        let u = a.dot(&ndarray::ArrayView1::from(&f)) * h;
        let gap = u.iter().zip(&exact).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        // the torus wraps the exact line solution near the edges
        assert!(gap < 1e-6, "{gap:e}");
        assert!(initial_condition_error(&a, &f, h) > 0.0);
    }

    #[test]
    fn constant_coefficients_solve_the_equation_and_cancel() {
        let k = cauchy_kernel(0.0);
        let grid = SpatialGrid::new(1, 10.0, 256).unwrap();
        let fam = KernelFamily::new(&k, &grid);
        let prop = crate::parametrix::DensePropagator::new(fam.clone());
        let probes = [128usize, 40];
        let t = 1.0;
        let dt = 1e-3;
        let cols: Vec<Array2<f64>> = [t - dt, t, t + dt]
            .iter()
            .map(|s| crate::parametrix::Propagator::block(&prop, Which::P0, *s, crate::parametrix::Layout::Columns, &probes))
            .collect();
        let gen = Generator::new(k.clone());
        let xs: Vec<usize> = (0..256).step_by(8).collect();
        let r = pde_residual(&gen, &grid, &probes, [t - dt, t, t + dt], [&cols[0], &cols[1], &cols[2]], &xs, Majorant::for_kernel(&k)).unwrap();
        assert!(r.worst_ratio < 1e-3, "{r:?}");
        assert!(cancellation_fit(&fam, &[0.5, 1.0], &[0, 77, 128], 0.5) < 1e-12);
        let cos = KernelFamily::new(&cauchy_kernel(0.3), &grid);
        let c = cancellation_fit(&cos, &[0.5, 1.0], &[0, 77, 128], 0.5);
        assert!(c > 1e-6 && c.is_finite(), "{c}");
    }

    #[test]
    fn frozen_fits_are_finite() {
        let k = cauchy_kernel(0.3);
        let eval = FrozenEvaluator::new(k.clone());
        let grid = SpatialGrid::new(1, 10.0, 256).unwrap();
        let f = frozen_bound_fit(&eval, &[vec![0.0], vec![5.0]], &[1.0, 1.5], &grid, Boundary::Periodic).unwrap();
        for v in [f.value, f.gradient, f.hessian, f.time_derivative] {
            assert!(v.is_finite() && v > 0.0, "{f:?}");
        }
        // tail ratio 1.3/π on the line at z = 0; at the box edge the images at
        // distances 10, 10, 30, 30, … multiply it by Σ 2/(2k+1)² = π²/4
        assert!(f.value > 1.3 / PI && f.value < 1.01 * 1.3 * PI / 4.0, "{f:?}");
        let g = Generator::new(k);
        let ca = generator_bound_fit(&g, &eval, &[0.0], &[1.0], &grid, &[128, 140, 200]).unwrap();
        assert!(ca.is_finite() && ca > 0.0);
    }

    #[test]
    fn stability_classification() {
        let s = refinement_stability("C", 1.0, 1.1, 0.2).unwrap();
        assert!(s.stable);
        assert!(!refinement_stability("C", 1.0, 1.5, 0.2).unwrap().stable);
        assert!(matches!(refinement_stability("C", 1.0, 3.0, 0.2), Err(LeviError::UnboundedRatio(_))));
        assert!(refinement_stability("C", 0.0, 0.0, 0.2).unwrap().stable);
    }
}
