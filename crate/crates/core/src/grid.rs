//! Uniform periodic grids on [−R, R)^d and their discrete Fourier transforms.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{LeviError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_dim: usize,
}

impl SpatialGrid {
    pub fn new(dim: usize, half_width: f64, points_per_dim: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(LeviError::InvalidParams {
                name: "dimension",
                reason: format!("grids support d = 1 or 2, got {dim}"),
            });
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(LeviError::InvalidParams {
                name: "half_width",
                reason: format!("must be positive, got {half_width}"),
            });
        }
        if !points_per_dim.is_power_of_two() || points_per_dim < 4 {
            return Err(LeviError::InvalidParams {
                name: "points_per_dim",
                reason: format!("must be a power of two ≥ 4, got {points_per_dim}"),
            });
        }
        Ok(Self {
            dim,
            half_width,
            points_per_dim,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_dim as f64
    }

    /// Cell volume h^d.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.points_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n(&self) -> usize {
        self.points_per_dim
    }

    /// Coordinates of the 1-D axis, x_j = −R + j h.
    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points_per_dim)
            .map(|j| -self.half_width + j as f64 * h)
            .collect()
    }

    /// Multi-index of a flat (row-major, first coordinate slowest) index.
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        let n = self.points_per_dim;
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / n, idx % n]
        }
    }

    pub fn flatten(&self, ij: [usize; 2]) -> usize {
        if self.dim == 1 {
            ij[0]
        } else {
            ij[0] * self.points_per_dim + ij[1]
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        let ij = self.unflatten(idx);
        (0..self.dim)
            .map(|k| -self.half_width + ij[k] as f64 * h)
            .collect()
    }

    /// Flat index of the grid point nearest to `x` (wrapped onto the torus).
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        let h = self.spacing();
        let n = self.points_per_dim as i64;
        let mut ij = [0usize; 2];
        for k in 0..self.dim {
            let j = ((x[k] + self.half_width) / h).round() as i64;
            ij[k] = j.rem_euclid(n) as usize;
        }
        self.flatten(ij)
    }

    /// Signed wavenumber for FFT index k: ξ = (π/R)·k, k ∈ [−N/2, N/2).
    pub fn wavenumber(&self, k: usize) -> f64 {
        let n = self.points_per_dim;
        let ks = if k >= n / 2 { k as i64 - n as i64 } else { k as i64 };
        PI / self.half_width * ks as f64
    }

    /// Frequency vector of a flat spectral index.
    pub fn frequency(&self, idx: usize) -> Vec<f64> {
        let ij = self.unflatten(idx);
        (0..self.dim).map(|k| self.wavenumber(ij[k])).collect()
    }

    /// Offset index o ↦ displacement o·h taken in [−R, R) per axis; used for
    /// kernels stored in circular (origin at index 0) order.
    pub fn offset_displacement(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        let n = self.points_per_dim;
        let ij = self.unflatten(idx);
        (0..self.dim)
            .map(|k| {
                let o = ij[k];
                if o >= n / 2 {
                    (o as f64 - n as f64) * h
                } else {
                    o as f64 * h
                }
            })
            .collect()
    }

    /// Flat circular offset of (x_i − x_j).
    pub fn offset_index(&self, i: usize, j: usize) -> usize {
        let n = self.points_per_dim;
        let a = self.unflatten(i);
        let b = self.unflatten(j);
        let mut o = [0usize; 2];
        for k in 0..self.dim {
            o[k] = (a[k] + n - b[k]) % n;
        }
        self.flatten(o)
    }

    /// Minimum-image displacement x − y on the torus.
    pub fn displacement(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let l = 2.0 * self.half_width;
        x.iter()
            .zip(y)
            .map(|(a, b)| {
                let d = a - b;
                d - l * (d / l).round()
            })
            .collect()
    }

    /// Smallest t for which exp(−t c_low (π/h)^α) < 1e−12.
    pub fn aliasing_floor(&self, c_low: f64, alpha: f64) -> f64 {
        -(1e-12f64).ln() / (c_low * (PI / self.spacing()).powf(alpha))
    }

    pub fn refined(&self) -> Self {
        Self {
            points_per_dim: 2 * self.points_per_dim,
            ..*self
        }
    }
}

/// Cached FFT plans for a grid.
#[derive(Clone)]
pub struct GridFft {
    n: usize,
    dim: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GridFft(n = {}, d = {})", self.n, self.dim)
    }
}

impl GridFft {
    pub fn new(grid: &SpatialGrid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.points_per_dim;
        Self {
            n,
            dim: grid.dim,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let n = self.n;
        if self.dim == 1 {
            plan.process(data);
            return;
        }
        plan.process(data); // rows
        transpose_in_place(data, n);
        plan.process(data); // columns
        transpose_in_place(data, n);
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    /// Unnormalized inverse transform.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, true);
    }

    pub fn forward_real(&self, field: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = field.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.forward(&mut c);
        c
    }

    /// Normalized inverse transform, real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut spec);
        let s = 1.0 / spec.len() as f64;
        spec.iter().map(|c| c.re * s).collect()
    }
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Reorders a circular (origin at index 0) field into physical grid order
/// (x_0 = −R), and back.
pub fn circular_to_physical(grid: &SpatialGrid, circ: &[f64]) -> Vec<f64> {
    let half = grid.points_per_dim / 2;
    (0..grid.len())
        .map(|idx| {
            let ij = grid.unflatten(idx);
            let mut o = [0usize; 2];
            for k in 0..grid.dim {
                o[k] = (ij[k] + half) % grid.points_per_dim;
            }
            circ[grid.flatten(o)]
        })
        .collect()
}

pub fn physical_to_circular(grid: &SpatialGrid, phys: &[f64]) -> Vec<f64> {
    let half = grid.points_per_dim / 2;
    (0..grid.len())
        .map(|idx| {
            let ij = grid.unflatten(idx);
            let mut o = [0usize; 2];
            for k in 0..grid.dim {
                o[k] = (ij[k] + half) % grid.points_per_dim;
            }
            phys[grid.flatten(o)]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(SpatialGrid::new(1, 40.0, 100).is_err());
        assert!(SpatialGrid::new(3, 40.0, 128).is_err());
        let g = SpatialGrid::new(1, 40.0, 2048).unwrap();
        assert!((g.spacing() - 40.0 / 1024.0).abs() < 1e-15);
        assert!((g.aliasing_floor(1.0, 1.0) - 27.631021115928547 * g.spacing() / PI).abs() < 1e-12);
    }

    #[test]
    fn fft_round_trip_2d() {
        let g = SpatialGrid::new(2, 3.0, 16).unwrap();
        let f = GridFft::new(&g);
        let field: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 31) as f64 - 15.0).collect();
        let back = f.inverse_real(f.forward_real(&field));
        for (a, b) in field.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn circular_order_round_trip() {
        let g = SpatialGrid::new(2, 1.0, 8).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|i| i as f64).collect();
        assert_eq!(physical_to_circular(&g, &circular_to_physical(&g, &v)), v);
        // the origin offset sits at the centre of the physical box
        let phys = circular_to_physical(&g, &v);
        let centre = g.flatten([4, 4]);
        assert_eq!(phys[centre], 0.0);
        assert_eq!(g.point(centre), vec![0.0, 0.0]);
    }

    #[test]
    fn displacement_is_minimum_image() {
        let g = SpatialGrid::new(1, 5.0, 8).unwrap();
        let d = g.displacement(&[4.5], &[-4.5]);
        assert!((d[0] + 1.0).abs() < 1e-14);
        assert_eq!(g.offset_index(1, 7), 2);
    }
}
