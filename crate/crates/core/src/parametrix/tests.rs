use std::f64::consts::PI;

use ndarray::Axis;

use super::*;
use crate::error::LeviError;
use crate::grid::SpatialGrid;
use crate::levy_kernel::{JumpKernel, Modulation, StableParams};
use crate::spectral_measure::SpectralMeasure;

fn kernel(a: f64) -> JumpKernel {
    let mu = SpectralMeasure::from_pairs(1, &[(vec![1.0], 1.0 / PI), (vec![-1.0], 1.0 / PI)]).unwrap();
    let m = if a == 0.0 {
        Modulation::constant()
    } else {
        Modulation::cosine(a, vec![PI / 10.0], vec![1.0, 1.0]).unwrap()
    };
    JumpKernel::new(mu, StableParams::new(1.0, 1.0, 1, 2.0).unwrap(), m).unwrap()
}

fn engine(a: f64, n: usize, m: usize) -> (JumpKernel, Parametrix<DensePropagator>) {
    let k = kernel(a);
    let grid = SpatialGrid::new(1, 10.0, n).unwrap();
    let prop = DensePropagator::new(KernelFamily::new(&k, &grid));
    let controls = SeriesControls::defaults_for(&k);
    let mesh = TimeMesh::new(1.0, m, k.alpha() / controls.theta).unwrap();
    let e = Parametrix::new(prop, &k, mesh, controls).unwrap();
    (k, e)
}

fn all(n: usize) -> Vec<usize> {
    (0..n).collect()
}

#[test]
fn constant_coefficients_degenerate_to_zero_order() {
    let (_, e) = engine(0.0, 64, 8);
    let s = e.psi_series(&all(64)).unwrap();
    assert_eq!(s.terms_used, 1);
    for t in [0.3, 1.0] {
        let p = e.assemble_heat_kernel(&s, t).unwrap();
        let p0 = e.zero_order(t, Layout::Columns, &all(64));
        assert_eq!(p, p0);
    }
    let d = e.duhamel_solve(&all(64)).unwrap();
    let p = e.duhamel_at(&d, 0.7).unwrap();
    assert_eq!(p, e.zero_order(0.7, Layout::Rows, &all(64)));
}

#[test]
fn phi_routes_agree() {
    let k = kernel(0.3);
    let grid = SpatialGrid::new(1, 10.0, 256).unwrap();
    let fam = KernelFamily::new(&k, &grid);
    let t = 1.0;
    let scale = (0..256).map(|i| phi_spectral(&fam, t, i, 100).abs()).fold(0.0, f64::max);
    for (i, j) in [(100, 100), (110, 100), (90, 100), (128, 60), (20, 200)] {
        let a = phi_spectral(&fam, t, i, j);
        let b = phi_by_quadrature(&k, &fam, t, i, j).unwrap();
        assert!((a - b).abs() < 1e-4 * scale, "({i}, {j}): {a} vs {b}");
    }
    assert_eq!(phi_spectral(&fam, t, 77, 77), 0.0);
}

#[test]
fn series_and_volterra_agree_and_conserve_mass() {
    let n = 64;
    let (_, e) = engine(0.3, n, 16);
    let s = e.psi_series(&all(n)).unwrap();
    assert!(s.terms_used >= 3 && s.tail_bound < e.controls.eps_tail);
    let d = e.duhamel_solve(&all(n)).unwrap();
    let h = e.prop.grid().cell();
    for t in [0.5, 1.0] {
        let pc = e.assemble_heat_kernel(&s, t).unwrap(); // [y][x]
        let pr = e.duhamel_at(&d, t).unwrap(); // [x][y]
        let scale = sup_norm(&pr);
        let gap = sup_norm(&(&pc.t() - &pr));
        assert!(gap < 1e-3 * scale, "t = {t}: gap {gap:e}");
        for row in pr.axis_iter(Axis(0)) {
            assert!((row.sum() * h - 1.0).abs() < 1e-3, "mass {}", row.sum() * h);
        }
    }
}

#[test]
fn chebyshev_engine_matches_dense_engine() {
    let k = kernel(0.3);
    let grid = SpatialGrid::new(1, 10.0, 32).unwrap();
    let fam = KernelFamily::new(&k, &grid);
    let controls = SeriesControls::defaults_for(&k);
    let mesh = TimeMesh::new(0.5, 8, 2.0).unwrap();
    let dense = Parametrix::new(DensePropagator::new(fam.clone()), &k, mesh, controls).unwrap();
    let cheb = Parametrix::new(ChebyshevPropagator::new(fam, 16, (-1.0, 1.0)), &k, mesh, controls).unwrap();
    let probes = [3, 16, 30];
    let a = dense.duhamel_solve(&probes).unwrap();
    let b = cheb.duhamel_solve(&probes).unwrap();
    let pa = dense.duhamel_at(&a, 0.5).unwrap();
    let pb = cheb.duhamel_at(&b, 0.5).unwrap();
    assert!(sup_norm(&(&pa - &pb)) < 1e-8 * sup_norm(&pa));
    let sa = dense.psi_series(&probes).unwrap();
    let sb = cheb.psi_series(&probes).unwrap();
    let qa = dense.assemble_heat_kernel(&sa, 0.4).unwrap();
    let qb = cheb.assemble_heat_kernel(&sb, 0.4).unwrap();
    assert!(sup_norm(&(&qa - &qb)) < 1e-8 * sup_norm(&qa));
}

#[test]
fn tail_not_converged_is_reported() {
    let (k, mut e) = engine(0.3, 32, 8);
    e.controls.k_max = 3;
    e.controls.eps_tail = 1e-30;
    assert!(matches!(e.psi_series(&[5, 9]), Err(LeviError::TailNotConverged { terms: 3, .. })));
    let _ = k;
}

#[test]
fn frozen_cache_builds_once() {
    let (_, e) = engine(0.3, 32, 8);
    let c = FrozenCache::new(e.mesh, Layout::Columns, vec![1, 2]);
    assert!(!c.is_loaded(3));
    let a = c.get(&e.prop, 3).clone();
    assert!(c.is_loaded(3));
    assert!(!c.preload(3, a.clone() * 2.0));
    assert_eq!(c.get(&e.prop, 3), &a);
}

#[test]
fn series_constants_fit_known_sequence() {
    // norms generated exactly from the bound with C₁ = 2, C₂ = 0.5
    let mesh = TimeMesh::new(1.0, 8, 2.0).unwrap();
    let gain = 0.5;
    let norms: Vec<Vec<f64>> = (1..=5)
        .map(|k| {
            mesh.times()
                .iter()
                .map(|t| 2.0 * 0.5f64.powi(k) * t.powf(-1.0 + k as f64 * gain) / statrs::function::gamma::gamma(k as f64 * gain))
                .collect()
        })
        .collect();
    let fit = fit_series_constants(&norms, &mesh, gain);
    assert!((fit.c2 - 0.5).abs() < 1e-12 && (fit.c1 - 2.0).abs() < 1e-10, "{fit:?}");
    assert!(series_tail_bound(fit, &mesh, gain, 5) < series_tail_bound(fit, &mesh, gain, 4));
}
