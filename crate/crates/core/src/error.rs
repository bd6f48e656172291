use thiserror::Error;

/// Every failure the numerical core can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LeviError {
    #[error("spectral measure has no atoms")]
    EmptyMeasure,
    #[error("atom direction has norm {norm} (expected 1)")]
    NonUnitDirection { norm: f64 },
    #[error("stability index {alpha} outside the supported range (0, {max})")]
    InvalidAlpha { alpha: f64, max: f64 },
    #[error("radius must be positive, got {0}")]
    NonpositiveRadius(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParams { name: &'static str, reason: String },
    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e}) in {context}")]
    QuadratureNonconvergence {
        context: &'static str,
        tol: f64,
        estimate: f64,
    },
    #[error("symbol has no closed form for this modulation")]
    NotClosedForm,
    #[error("kernel is degenerate: lower symbol constant {c_low:e}")]
    DegenerateKernel { c_low: f64 },
    #[error("aliasing risk: t = {t} is below the grid floor t_min = {t_min}")]
    AliasingRisk { t: f64, t_min: f64 },
    #[error("inadmissible exponents: {0}")]
    InadmissibleExponents(String),
    #[error("integrand grows faster than the declared endpoint profile (growth factor {growth:.3})")]
    SingularityMisdeclared { growth: f64 },
    #[error("series tail {tail:e} above tolerance {tol:e} after {terms} terms")]
    TailNotConverged { terms: usize, tail: f64, tol: f64 },
    #[error("Volterra march unstable at node {node}: amplification {factor:.3}")]
    MarchingInstability { node: usize, factor: f64 },
    #[error("cutoff schedule did not converge: last difference {diff:e}, tolerance {tol:e}")]
    NonconvergentLimit { diff: f64, tol: f64 },
    #[error("ratio fit does not saturate: {0}")]
    UnboundedRatio(String),
}

pub type Result<T> = std::result::Result<T, LeviError>;
