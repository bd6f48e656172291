//! The two explicit space-time kernels of the construction, applied to
//! blocks of columns or rows.
//!
//! On the torus grid the zero-order kernel is p⁰_t(x, z) = k_t^{s(z)}(x − z),
//! where k_t^s has multiplier exp(−t q(s, ·)), and
//! Φ_t(x, z) = a (s(x) − s(z)) (L_g k_t^{s(z)})(x − z) with L_g the operator
//! of multiplier −q_g. Both depend on the base point only through the scalar
//! feature s, which is what the Chebyshev propagator exploits.
//!
//! Block layout: a block is (probes × grid points). In `Columns` row p holds
//! F(·, y_p) and kernels act from the left; in `Rows` row p holds F(x_p, ·)
//! and kernels act from the right. Either way one application is
//! Σ_z K(x, z) F(z, y) h^d with the free index being the one the block stores.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frozen_kernel::{Deriv, SpectralSymbol};
use crate::grid::SpatialGrid;
use crate::levy_kernel::JumpKernel;
use crate::symbol::SymbolEvaluator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    P0,
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Columns,
    Rows,
}

/// Spectral tables of q₀, q_g on a grid plus the feature s at every point.
#[derive(Debug, Clone)]
pub struct KernelFamily {
    pub grid: SpatialGrid,
    pub symbol: SpectralSymbol,
    /// s(x_i) in physical order.
    pub features: Vec<f64>,
}

impl KernelFamily {
    pub fn new(kernel: &JumpKernel, grid: &SpatialGrid) -> Self {
        let symbol = SpectralSymbol::new(&SymbolEvaluator::new(kernel.clone()), grid);
        let features = (0..grid.len()).map(|i| kernel.modulation.feature(&grid.point(i))).collect();
        Self {
            grid: *grid,
            symbol,
            features,
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.symbol.amplitude
    }

    /// Φ vanishes identically.
    pub fn is_trivial(&self) -> bool {
        self.amplitude() == 0.0
    }

    /// Real multiplier table (FFT order): exp(−tq) for p⁰, −q_g exp(−tq) for Φ.
    pub fn multiplier(&self, which: Which, t: f64, s: f64) -> Vec<f64> {
        let ss = &self.symbol;
        (0..self.grid.len())
            .map(|k| {
                let e = (-t * ss.q(k, s)).exp();
                match which {
                    Which::P0 => e,
                    Which::Phi => -ss.qg[k] * e,
                }
            })
            .collect()
    }

    /// Kernel in circular order, density units (for Φ without the a(s(x) − s(z)) factor).
    pub fn circular(&self, which: Which, t: f64, s: f64) -> Vec<f64> {
        let deriv = match which {
            Which::P0 => Deriv::None,
            Which::Phi => Deriv::Modulated,
        };
        self.symbol.kernel_circular(t, s, deriv)
    }

    /// Circular offset index of x_i − x_j.
    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> usize {
        if self.grid.dim == 1 {
            let n = self.grid.n();
            (i + n - j) % n
        } else {
            self.grid.offset_index(i, j)
        }
    }
}

/// An explicit kernel acting on blocks.
pub trait Propagator: Sync {
    fn family(&self) -> &KernelFamily;

    /// K_t applied to `block` in the given layout.
    fn apply(&self, which: Which, t: f64, layout: Layout, block: &Array2<f64>) -> Array2<f64>;

    /// The kernel's own columns K_t(·, y_p) or rows K_t(x_p, ·).
    fn block(&self, which: Which, t: f64, layout: Layout, probes: &[usize]) -> Array2<f64>;

    fn grid(&self) -> &SpatialGrid {
        &self.family().grid
    }
}

/// Bytes of kernel matrices a dense propagator keeps around.
const MATRIX_CACHE_BYTES: usize = 1 << 28;

/// Dense N^d × N^d matrices; exact on the grid, meant for d = 1.
#[derive(Debug)]
pub struct DensePropagator {
    pub family: KernelFamily,
    cache: Mutex<HashMap<(Which, u64), Arc<Array2<f64>>>>,
}

impl Clone for DensePropagator {
    fn clone(&self) -> Self {
        Self::new(self.family.clone())
    }
}

impl DensePropagator {
    pub fn new(family: KernelFamily) -> Self {
        Self {
            family,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// K_t[x][z], memoized per (kernel, t).
    pub fn matrix(&self, which: Which, t: f64) -> Arc<Array2<f64>> {
        let key = (which, t.to_bits());
        if let Some(m) = self.cache.lock().expect("matrix cache").get(&key) {
            return Arc::clone(m);
        }
        let m = Arc::new(self.build(which, t));
        let n = self.family.grid.len();
        let capacity = (MATRIX_CACHE_BYTES / (8 * n * n)).max(4);
        let mut cache = self.cache.lock().expect("matrix cache");
        if cache.len() >= capacity {
            cache.clear();
        }
        cache.insert(key, Arc::clone(&m));
        m
    }

    fn build(&self, which: Which, t: f64) -> Array2<f64> {
        let fam = &self.family;
        let n = fam.grid.len();
        if which == Which::Phi && fam.is_trivial() {
            return Array2::zeros((n, n));
        }
        let mut ids: HashMap<u64, usize> = HashMap::new();
        let mut distinct = Vec::new();
        let col_id: Vec<usize> = fam
            .features
            .iter()
            .map(|s| {
                *ids.entry(s.to_bits()).or_insert_with(|| {
                    distinct.push(*s);
                    distinct.len() - 1
                })
            })
            .collect();
        let kernels: Vec<Vec<f64>> = distinct.par_iter().map(|s| fam.circular(which, t, *s)).collect();
        let a = fam.amplitude();
        let mut m = Array2::zeros((n, n));
        m.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(x, mut row)| {
            for z in 0..n {
                let k = kernels[col_id[z]][fam.offset(x, z)];
                row[z] = match which {
                    Which::P0 => k,
                    Which::Phi => a * (fam.features[x] - fam.features[z]) * k,
                };
            }
        });
        m
    }
}

impl Propagator for DensePropagator {
    fn family(&self) -> &KernelFamily {
        &self.family
    }

    fn apply(&self, which: Which, t: f64, layout: Layout, block: &Array2<f64>) -> Array2<f64> {
        if which == Which::Phi && self.family.is_trivial() {
            return Array2::zeros(block.raw_dim());
        }
        let m = self.matrix(which, t);
        let cell = self.family.grid.cell();
        let mut out = match layout {
            Layout::Columns => block.dot(&m.t()),
            Layout::Rows => block.dot(&*m),
        };
        out *= cell;
        out
    }

    fn block(&self, which: Which, t: f64, layout: Layout, probes: &[usize]) -> Array2<f64> {
        let m = self.matrix(which, t);
        match layout {
            Layout::Columns => m.t().select(Axis(0), probes),
            Layout::Rows => m.select(Axis(0), probes),
        }
    }
}

/// Either propagator, chosen at run time.
#[derive(Debug, Clone)]
pub enum AnyPropagator {
    Dense(DensePropagator),
    Chebyshev(ChebyshevPropagator),
}

impl Propagator for AnyPropagator {
    fn family(&self) -> &KernelFamily {
        match self {
            Self::Dense(p) => p.family(),
            Self::Chebyshev(p) => p.family(),
        }
    }

    fn apply(&self, which: Which, t: f64, layout: Layout, block: &Array2<f64>) -> Array2<f64> {
        match self {
            Self::Dense(p) => p.apply(which, t, layout, block),
            Self::Chebyshev(p) => p.apply(which, t, layout, block),
        }
    }

    fn block(&self, which: Which, t: f64, layout: Layout, probes: &[usize]) -> Array2<f64> {
        match self {
            Self::Dense(p) => p.block(which, t, layout, probes),
            Self::Chebyshev(p) => p.block(which, t, layout, probes),
        }
    }
}

/// FFT application with Chebyshev interpolation of the kernel in the
/// feature s: k^s ≈ Σ_j ℓ_j(s) k^{s_j}.
#[derive(Debug, Clone)]
pub struct ChebyshevPropagator {
    pub family: KernelFamily,
    pub nodes: Vec<f64>,
    /// ℓ_j(s(x_i)), indexed [j][i].
    lagrange: Vec<Vec<f64>>,
}

impl ChebyshevPropagator {
    pub fn new(family: KernelFamily, count: usize, range: (f64, f64)) -> Self {
        let (lo, hi) = range;
        let count = if hi > lo { count.max(2) } else { 1 };
        let nodes: Vec<f64> = if count == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..count)
                .map(|j| 0.5 * (lo + hi) + 0.5 * (hi - lo) * (std::f64::consts::PI * j as f64 / (count - 1) as f64).cos())
                .collect()
        };
        let lagrange = lagrange_table(&nodes, &family.features);
        Self {
            family,
            nodes,
            lagrange,
        }
    }

    fn multipliers(&self, which: Which, t: f64) -> Vec<Vec<f64>> {
        self.nodes.par_iter().map(|s| self.family.multiplier(which, t, *s)).collect()
    }
}

/// Barycentric Lagrange basis of Chebyshev points of the second kind.
fn lagrange_table(nodes: &[f64], at: &[f64]) -> Vec<Vec<f64>> {
    let j = nodes.len();
    if j == 1 {
        return vec![vec![1.0; at.len()]];
    }
    let w: Vec<f64> = (0..j)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == j - 1 {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect();
    let mut table = vec![vec![0.0; at.len()]; j];
    for (i, s) in at.iter().enumerate() {
        if let Some(k) = nodes.iter().position(|n| (n - s).abs() < 1e-15) {
            table[k][i] = 1.0;
            continue;
        }
        let terms: Vec<f64> = (0..j).map(|k| w[k] / (s - nodes[k])).collect();
        let den: f64 = terms.iter().sum();
        for k in 0..j {
            table[k][i] = terms[k] / den;
        }
    }
    table
}

impl Propagator for ChebyshevPropagator {
    fn family(&self) -> &KernelFamily {
        &self.family
    }

    fn apply(&self, which: Which, t: f64, layout: Layout, block: &Array2<f64>) -> Array2<f64> {
        let fam = &self.family;
        if which == Which::Phi && fam.is_trivial() {
            return Array2::zeros(block.raw_dim());
        }
        let ms = self.multipliers(which, t);
        let a = fam.amplitude();
        let s = &fam.features;
        let fft = &fam.symbol.fft;
        let n = fam.grid.len();
        let mut out = Array2::zeros(block.raw_dim());
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(block.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(mut o, v)| {
                let v = v.to_vec();
                match layout {
                    Layout::Columns => {
                        // Σ_j m_j F(ℓ_j v), and Σ_j s_j m_j F(ℓ_j v) for Φ
                        let mut acc = vec![Complex64::new(0.0, 0.0); n];
                        let mut acc_s = vec![Complex64::new(0.0, 0.0); n];
                        for (j, m) in ms.iter().enumerate() {
                            let lv: Vec<f64> = v.iter().zip(&self.lagrange[j]).map(|(a, b)| a * b).collect();
                            let spec = fft.forward_real(&lv);
                            for k in 0..n {
                                acc[k] += spec[k] * m[k];
                                if which == Which::Phi {
                                    acc_s[k] += spec[k] * (m[k] * self.nodes[j]);
                                }
                            }
                        }
                        let u = fft.inverse_real(acc);
                        match which {
                            Which::P0 => o.iter_mut().zip(&u).for_each(|(o, u)| *o = *u),
                            Which::Phi => {
                                let us = fft.inverse_real(acc_s);
                                for i in 0..n {
                                    o[i] = a * (s[i] * u[i] - us[i]);
                                }
                            }
                        }
                    }
                    Layout::Rows => {
                        let fv = fft.forward_real(&v);
                        let fsv = if which == Which::Phi {
                            let sv: Vec<f64> = v.iter().zip(s).map(|(a, b)| a * b).collect();
                            Some(fft.forward_real(&sv))
                        } else {
                            None
                        };
                        for (j, m) in ms.iter().enumerate() {
                            let u = fft.inverse_real(fv.iter().zip(m).map(|(c, m)| c * *m).collect());
                            let l = &self.lagrange[j];
                            match &fsv {
                                None => {
                                    for i in 0..n {
                                        o[i] += l[i] * u[i];
                                    }
                                }
                                Some(fsv) => {
                                    let us = fft.inverse_real(fsv.iter().zip(m).map(|(c, m)| c * *m).collect());
                                    for i in 0..n {
                                        o[i] += a * l[i] * (us[i] - s[i] * u[i]);
                                    }
                                }
                            }
                        }
                    }
                }
            });
        out
    }

    fn block(&self, which: Which, t: f64, layout: Layout, probes: &[usize]) -> Array2<f64> {
        let fam = &self.family;
        let n = fam.grid.len();
        let mut out = Array2::zeros((probes.len(), n));
        if which == Which::Phi && fam.is_trivial() {
            return out;
        }
        let a = fam.amplitude();
        let s = &fam.features;
        match layout {
            Layout::Columns => {
                out.axis_iter_mut(Axis(0)).into_par_iter().zip(probes.par_iter()).for_each(|(mut o, &y)| {
                    let k = fam.circular(which, t, s[y]);
                    for x in 0..n {
                        let v = k[fam.offset(x, y)];
                        o[x] = match which {
                            Which::P0 => v,
                            Which::Phi => a * (s[x] - s[y]) * v,
                        };
                    }
                });
            }
            Layout::Rows => {
                let ks: Vec<Vec<f64>> = self.nodes.par_iter().map(|sj| fam.circular(which, t, *sj)).collect();
                out.axis_iter_mut(Axis(0)).into_par_iter().zip(probes.par_iter()).for_each(|(mut o, &x)| {
                    for z in 0..n {
                        let off = fam.offset(x, z);
                        let v: f64 = ks.iter().zip(&self.lagrange).map(|(k, l)| l[z] * k[off]).sum();
                        o[z] = match which {
                            Which::P0 => v,
                            Which::Phi => a * (s[x] - s[z]) * v,
                        };
                    }
                });
            }
        }
        out
    }
}

/// Applies `prop` by brute force from explicit rows, for tests and checks.
pub fn apply_reference<P: Propagator + ?Sized>(prop: &P, which: Which, t: f64, layout: Layout, block: &Array2<f64>) -> Array2<f64> {
    let fam = prop.family();
    let n = fam.grid.len();
    let all: Vec<usize> = (0..n).collect();
    let k = prop.block(which, t, Layout::Columns, &all); // k[z][x] = K(x, z)
    let cell = fam.grid.cell();
    match layout {
        Layout::Columns => block.dot(&k) * cell,
        Layout::Rows => block.dot(&k.t()) * cell,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_kernel::{Modulation, StableParams};
    use crate::spectral_measure::SpectralMeasure;
    use std::f64::consts::PI;

    fn family(n: usize, a: f64) -> (JumpKernel, KernelFamily) {
        let mu = SpectralMeasure::from_pairs(1, &[(vec![1.0], 1.0 / PI), (vec![-1.0], 1.0 / PI)]).unwrap();
        let m = if a == 0.0 {
            Modulation::constant()
        } else {
            Modulation::cosine(a, vec![PI / 5.0], vec![1.0, 1.0]).unwrap()
        };
        let k = JumpKernel::new(mu, StableParams::new(1.0, 1.0, 1, 2.0).unwrap(), m).unwrap();
        let grid = SpatialGrid::new(1, 10.0, n).unwrap();
        let f = KernelFamily::new(&k, &grid);
        (k, f)
    }

    fn sample_block(rows: usize, n: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, n), |(p, i)| ((0.37 * (p + 1) as f64 * i as f64).sin() + 0.5) * (-((i as f64 - n as f64 / 2.0) / 10.0).powi(2)).exp())
    }

    #[test]
    fn dense_matches_chebyshev() {
        let (_, fam) = family(64, 0.3);
        let dense = DensePropagator::new(fam.clone());
        let cheb = ChebyshevPropagator::new(fam, 16, (-1.0, 1.0));
        let b = sample_block(3, 64);
        for which in [Which::P0, Which::Phi] {
            for layout in [Layout::Columns, Layout::Rows] {
                for t in [0.05, 0.5] {
                    let d = dense.apply(which, t, layout, &b);
                    let c = cheb.apply(which, t, layout, &b);
                    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let err = (&d - &c).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    assert!(err <= 1e-9 * scale, "{which:?} {layout:?} t = {t}: {err:e} / {scale:e}");
                    let r = apply_reference(&dense, which, t, layout, &b);
                    let err = (&d - &r).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    assert!(err <= 1e-12 * scale);
                }
                let probes = [0, 5, 40];
                let bd = dense.block(which, 0.3, layout, &probes);
                let bc = cheb.block(which, 0.3, layout, &probes);
                let scale = bd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let err = (&bd - &bc).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(err <= 1e-9 * scale, "{which:?} {layout:?} block");
            }
        }
    }

    #[test]
    fn constant_modulation_has_no_phi() {
        let (_, fam) = family(32, 0.0);
        let dense = DensePropagator::new(fam);
        assert!(dense.matrix(Which::Phi, 0.4).iter().all(|v| *v == 0.0));
        // p⁰ is then a convolution: rows sum to one
        let m = dense.matrix(Which::P0, 0.4);
        let h = dense.grid().cell();
        for row in m.axis_iter(Axis(0)) {
            assert!((row.sum() * h - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_vanishes_on_the_diagonal() {
        let (_, fam) = family(64, 0.3);
        let m = DensePropagator::new(fam).matrix(Which::Phi, 0.2);
        for i in 0..64 {
            assert_eq!(m[[i, i]], 0.0);
        }
    }
}
