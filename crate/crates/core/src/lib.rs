//! Heat kernels of anisotropic stable-like nonlocal operators built by the
//! Levi parametrix, with independent numerical checks of their estimates.

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod frozen_kernel;
pub mod function;
pub mod generator;
pub mod levy_kernel;
pub mod parametrix;
pub mod quadrature;
pub mod grid;
pub mod spectral_measure;
pub mod symbol;

pub use error::{LeviError, Result};
pub use function::{FnSpatial, Gaussian, SpatialFunction};
pub use levy_kernel::{BallMass, JumpKernel, Modulation, ModulationFamily, StableParams};
pub use spectral_measure::{SpectralMeasure, SphericalAtom};
