//! Φ_t(x, y) = (L^x − L^y) applied to u ↦ p⁰_t(u, y), evaluated pointwise by
//! ray quadrature against the signed measure (h(x, ·) − h(y, ·)) ν₀. This is
//! an independent route to the spectral Φ used inside the propagators.

use crate::error::Result;
use crate::function::SpatialFunction;
use crate::generator::{Extension, GridField};
use crate::grid::circular_to_physical;
use crate::levy_kernel::{radial_second_difference, JumpKernel};

use super::propagator::{KernelFamily, Which};

/// A field translated so that its origin sits at `shift`.
struct Shifted<'a> {
    field: &'a GridField,
    shift: Vec<f64>,
}

impl SpatialFunction for Shifted<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().zip(&self.shift).map(|(a, b)| a - b).collect();
        self.field.value(&y)
    }

    fn ray_period(&self, theta: &[f64]) -> Option<f64> {
        self.field.ray_period(theta)
    }
}

/// Spectral Φ_t(x_i, y_j).
pub fn phi_spectral(family: &KernelFamily, t: f64, i: usize, j: usize) -> f64 {
    let s = &family.features;
    let k = family.circular(Which::Phi, t, s[j]);
    family.amplitude() * (s[i] - s[j]) * k[family.offset(i, j)]
}

/// Φ_t(x_i, y_j) by ray quadrature on the periodic interpolant of p^{y}_t.
pub fn phi_by_quadrature(kernel: &JumpKernel, family: &KernelFamily, t: f64, i: usize, j: usize) -> Result<f64> {
    let grid = &family.grid;
    let x = grid.point(i);
    let y = grid.point(j);
    let circ = family.circular(Which::P0, t, family.features[j]);
    let field = GridField::new(grid, &circular_to_physical(grid, &circ), Extension::Periodic)?;
    let f = Shifted { field: &field, shift: y.clone() };
    let fx = f.value(&x);
    let mut total = 0.0;
    for (a, atom) in kernel.spectral.atoms().iter().enumerate() {
        let dh = kernel.modulation.h(&x, a) - kernel.modulation.h(&y, a);
        if dh == 0.0 {
            continue;
        }
        total += atom.weight * dh * radial_second_difference(&f, fx, &x, &atom.direction, kernel.alpha(), 0.0)?;
    }
    Ok(total)
}
