//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;

use levi_core::grid::SpatialGrid;
use levi_core::parametrix::{DensePropagator, KernelFamily, Parametrix, SeriesControls, TimeMesh};
use levi_core::{JumpKernel, Modulation, SpectralMeasure, StableParams};

/// Cauchy-type jumps along ±1 with intensity 1 + a cos(πz/10).
pub fn cosine_kernel(amplitude: f64) -> JumpKernel {
    let mu = SpectralMeasure::from_pairs(1, &[(vec![1.0], 1.0 / PI), (vec![-1.0], 1.0 / PI)]).expect("symmetric atoms");
    let m = if amplitude == 0.0 {
        Modulation::constant()
    } else {
        Modulation::cosine(amplitude, vec![PI / 10.0], vec![1.0, 1.0]).expect("admissible amplitude")
    };
    JumpKernel::new(mu, StableParams::new(1.0, 1.0, 1, 2.0).expect("valid"), m).expect("valid kernel")
}

/// Dense engine on [−10, 10) with `n` points and `m` graded nodes up to T = 1.
pub fn dense_engine(amplitude: f64, n: usize, m: usize) -> Parametrix<DensePropagator> {
    let k = cosine_kernel(amplitude);
    let grid = SpatialGrid::new(1, 10.0, n).expect("power of two");
    let controls = SeriesControls::defaults_for(&k);
    let mesh = TimeMesh::new(1.0, m, k.alpha() / controls.theta).expect("valid mesh");
    Parametrix::new(DensePropagator::new(KernelFamily::new(&k, &grid)), &k, mesh, controls).expect("valid engine")
}
