//! Levi parametrix: Φ, its ⊠-powers, Ψ, and the heat kernel, built both as a
//! series and as the solution of the Volterra equation.

pub mod boxtimes;
pub mod cache;
pub mod engine;
pub mod mesh;
pub mod phi;
pub mod propagator;

pub use boxtimes::{ProductNode, ProductRule};
pub use cache::FrozenCache;
pub use engine::{fit_c1, fit_series_constants, predicted_ratio, series_tail_bound, Duhamel, Parametrix, PsiSeries, SeriesFit};
pub use mesh::{sup_norm, theta_ceiling, SeriesControls, StoredField, TimeMesh};
pub use phi::{phi_by_quadrature, phi_spectral};
pub use propagator::{AnyPropagator, ChebyshevPropagator, DensePropagator, KernelFamily, Layout, Propagator, Which};

#[cfg(test)]
mod tests;
