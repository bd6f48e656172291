//! Compute-once store of zero-order kernels at the mesh nodes.

use std::sync::OnceLock;

use ndarray::Array2;

use super::mesh::TimeMesh;
use super::propagator::{Layout, Propagator, Which};

/// p⁰(t_j) blocks for a fixed layout and probe list; each node is built at
/// most once and is read-only afterwards.
#[derive(Debug)]
pub struct FrozenCache {
    pub mesh: TimeMesh,
    pub layout: Layout,
    pub probes: Vec<usize>,
    entries: Vec<OnceLock<Array2<f64>>>,
}

impl FrozenCache {
    pub fn new(mesh: TimeMesh, layout: Layout, probes: Vec<usize>) -> Self {
        Self {
            mesh,
            layout,
            probes,
            entries: (0..mesh.nodes).map(|_| OnceLock::new()).collect(),
        }
    }

    /// p⁰(t_j), 1-based.
    pub fn get<P: Propagator + ?Sized>(&self, prop: &P, j: usize) -> &Array2<f64> {
        self.entries[j - 1].get_or_init(|| prop.block(Which::P0, self.mesh.time(j), self.layout, &self.probes))
    }

    /// Installs a block loaded from elsewhere; false if the node was already set.
    pub fn preload(&self, j: usize, block: Array2<f64>) -> bool {
        self.entries[j - 1].set(block).is_ok()
    }

    pub fn is_loaded(&self, j: usize) -> bool {
        self.entries[j - 1].get().is_some()
    }
}
