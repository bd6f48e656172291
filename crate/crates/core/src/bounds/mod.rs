//! Comparison kernels, bound fits and the validation report.

pub mod comparison;
pub mod fits;
pub mod report;

pub use comparison::{g_kernel, h_kernel, subconvolution_check, ComparisonKernel, KernelKind, SubconvolutionReport};
pub use fits::{KernelSlices, Majorant};
pub use report::{CheckOutcome, FittedConstants, RunMetadata, ValidationReport};
