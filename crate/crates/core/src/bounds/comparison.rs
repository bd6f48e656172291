//! Comparison kernels G^{(β)} and H^{(κ,ζ)} and their sub-convolution check.

use serde::{Deserialize, Serialize};

use crate::error::{LeviError, Result};
use crate::quadrature::{integrate_adaptive, AdaptiveTol};

/// G^{(β)}_t(x) = t^{−d/α} ((|x|/t^{1/α}) ∨ 1)^{−β}.
#[inline]
pub fn g_kernel(beta: f64, t: f64, r: f64, dim: usize, alpha: f64) -> f64 {
    let scale = t.powf(1.0 / alpha);
    t.powf(-(dim as f64) / alpha) * (r / scale).max(1.0).powf(-beta)
}

/// H^{(κ,ζ)}_t(x) = (t^{−ζ/α} ∧ ((|x|/t^{1/α}) ∨ 1)^ζ) G^{(α+κ)}_t(x).
#[inline]
pub fn h_kernel(kappa: f64, zeta: f64, t: f64, r: f64, dim: usize, alpha: f64) -> f64 {
    let scale = t.powf(1.0 / alpha);
    let a = t.powf(-zeta / alpha).min((r / scale).max(1.0).powf(zeta));
    a * g_kernel(alpha + kappa, t, r, dim, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    G { beta: f64 },
    H { kappa: f64, zeta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonKernel {
    pub kind: KernelKind,
    pub alpha: f64,
    pub dim: usize,
}

impl ComparisonKernel {
    pub fn g(beta: f64, alpha: f64, dim: usize) -> Result<Self> {
        if !(beta > dim as f64) {
            return Err(LeviError::InadmissibleExponents(format!(
                "G needs β > d, got β = {beta}, d = {dim}"
            )));
        }
        Ok(Self {
            kind: KernelKind::G { beta },
            alpha,
            dim,
        })
    }

    pub fn h(kappa: f64, zeta: f64, alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha + kappa - dim as f64 > zeta) {
            return Err(LeviError::InadmissibleExponents(format!(
                "H needs α + κ − d > ζ, got α = {alpha}, κ = {kappa}, ζ = {zeta}, d = {dim}"
            )));
        }
        if zeta < 0.0 {
            return Err(LeviError::InadmissibleExponents(format!("ζ = {zeta} must be ≥ 0")));
        }
        Ok(Self {
            kind: KernelKind::H { kappa, zeta },
            alpha,
            dim,
        })
    }

    pub fn eval(&self, t: f64, r: f64) -> f64 {
        match self.kind {
            KernelKind::G { beta } => g_kernel(beta, t, r, self.dim, self.alpha),
            KernelKind::H { kappa, zeta } => h_kernel(kappa, zeta, t, r, self.dim, self.alpha),
        }
    }

    /// Radii where the kernel at time t has a kink.
    fn kinks(&self, t: f64) -> Vec<f64> {
        let mut k = vec![t.powf(1.0 / self.alpha)];
        if let KernelKind::H { .. } = self.kind {
            k.push(1.0);
        }
        k
    }

    /// ∫_{ℝ} K_t(x) dx in d = 1, by quadrature.
    pub fn integral_1d(&self, t: f64) -> Result<f64> {
        let f = |y: f64| self.eval(t, y.abs());
        integrate_line(f, &self.kinks(t).iter().flat_map(|r| [-r, *r]).collect::<Vec<_>>())
    }

    /// (K_{t−s} * K_s)(x) in d = 1.
    pub fn convolve_1d(&self, t: f64, s: f64, x: f64) -> Result<f64> {
        let mut breaks = vec![0.0, x];
        for r in self.kinks(s) {
            breaks.extend([-r, r]);
        }
        for r in self.kinks(t - s) {
            breaks.extend([x - r, x + r]);
        }
        integrate_line(|y: f64| self.eval(t - s, (x - y).abs()) * self.eval(s, y.abs()), &breaks)
    }
}

/// ∫_ℝ f with interior breakpoints; both tails mapped to (0, 1] by y = b/u.
fn integrate_line<F: Fn(f64) -> f64>(f: F, breaks: &[f64]) -> Result<f64> {
    let mut b: Vec<f64> = breaks.to_vec();
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, c| (*a - *c).abs() < 1e-14);
    let reach = b.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    b.insert(0, -reach);
    b.push(reach);
    let tol = AdaptiveTol {
        abs: 1e-15,
        rel: 1e-11,
        max_panels: 4000,
    };
    let (mid, _) = integrate_adaptive(&f, &b, tol, "comparison convolution")?;
    let tail = |u: f64| {
        if u <= 0.0 {
            0.0
        } else {
            let y = reach / u;
            (f(y) + f(-y)) * reach / (u * u)
        }
    };
    let (tails, _) = integrate_adaptive(tail, &[0.0, 1e-3, 0.1, 1.0], tol, "comparison tails")?;
    Ok(mid + tails)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubconvolutionReport {
    /// max over samples of (K_{t−s} * K_s)(x) / K_t(x).
    pub fitted_c: f64,
    /// min of the same ratio (two-sided comparability for G).
    pub min_ratio: f64,
    pub violations: usize,
    pub samples: usize,
}

/// Ratio (K_{t−s} * K_s)(x)/K_t(x) over `xs` for every s in `s_list`.
pub fn subconvolution_check(kernel: &ComparisonKernel, t: f64, s_list: &[f64], xs: &[f64]) -> Result<SubconvolutionReport> {
    if kernel.dim != 1 {
        return Err(LeviError::InvalidParams {
            name: "dimension",
            reason: "sub-convolution quadrature is implemented for d = 1".into(),
        });
    }
    if let KernelKind::G { beta } = kernel.kind {
        if !(beta > 1.0 && beta < 3.0) {
            return Err(LeviError::InadmissibleExponents(format!("G sub-convolution needs β ∈ (d, d+2), got {beta}")));
        }
    }
    let mut hi: f64 = 0.0;
    let mut lo = f64::INFINITY;
    let mut violations = 0;
    let mut samples = 0;
    for &s in s_list {
        if !(s > 0.0 && s < t) {
            return Err(LeviError::InvalidParams {
                name: "s_list",
                reason: format!("s = {s} must lie in (0, t)"),
            });
        }
        for &x in xs {
            let c = kernel.convolve_1d(t, s, x)?;
            let r = c / kernel.eval(t, x.abs());
            samples += 1;
            if !r.is_finite() {
                violations += 1;
                continue;
            }
            hi = hi.max(r);
            lo = lo.min(r);
        }
    }
    Ok(SubconvolutionReport {
        fitted_c: hi,
        min_ratio: lo,
        violations,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g_values() {
        assert_eq!(g_kernel(2.5, 1.0, 0.0, 1, 1.0), 1.0);
        assert!((g_kernel(2.5, 1.0, 2.0, 1, 1.0) - 0.176_776_695_296_636_9).abs() < 1e-15);
    }

    #[test]
    fn h_small_argument_identity() {
        // for |x| ≤ t^{1/α}: H = (t^{−ζ/α} ∧ 1) G^{(α+κ)}, and G^{(β)} does not depend on β there
        let (alpha, kappa, zeta) = (1.2, 1.0, 0.4);
        for t in [0.3f64, 1.0, 2.5] {
            for r in [0.0, 0.5 * t.powf(1.0 / alpha)] {
                let lhs = h_kernel(kappa, zeta, t, r, 1, alpha);
                let rhs = t.powf(-zeta / alpha).min(1.0) * g_kernel(kappa + alpha - zeta, t, r, 1, alpha);
                assert!((lhs - rhs).abs() < 1e-14 * lhs);
            }
        }
    }

    #[test]
    fn inadmissible_h_rejected() {
        assert!(matches!(ComparisonKernel::h(1.0, 1.0, 1.0, 1), Err(LeviError::InadmissibleExponents(_))));
        assert!(ComparisonKernel::h(1.0, 0.5, 1.0, 1).is_ok());
        assert!(ComparisonKernel::g(0.5, 1.0, 1).is_err());
    }

    #[test]
    fn g_integral_is_time_independent() {
        let k = ComparisonKernel::g(2.0, 1.0, 1).unwrap();
        for t in [0.5, 1.0, 2.0] {
            // closed form 2(1 + 1/(β − 1)) = 4
            assert!((k.integral_1d(t).unwrap() - 4.0).abs() < 1e-9);
        }
        // uniform grid quadrature on a wide box, tails added analytically
        for t in [0.5f64, 1.0, 2.0] {
            let (l, n) = (400.0, 400_000);
            let h = 2.0 * l / n as f64;
            let grid: f64 = (0..n).map(|j| k.eval(t, (-l + (j as f64 + 0.5) * h).abs())).sum::<f64>() * h;
            let tails = 2.0 * t / l;
            assert!((grid + tails - 4.0).abs() < 1e-4 * 4.0);
        }
    }

    #[test]
    fn h_integral_bounded() {
        let k = ComparisonKernel::h(1.0, 0.5, 1.0, 1).unwrap();
        let vals: Vec<f64> = [0.25, 0.5, 1.0, 2.0].iter().map(|t| k.integral_1d(*t).unwrap()).collect();
        assert!(vals.iter().all(|v| v.is_finite() && *v < 20.0), "{vals:?}");
    }

    #[test]
    fn g_subconvolution_two_sided() {
        let k = ComparisonKernel::g(2.0, 1.0, 1).unwrap();
        let xs: Vec<f64> = (0..41).map(|j| -20.0 + j as f64).collect();
        let r = subconvolution_check(&k, 1.0, &[0.1, 0.5, 0.9], &xs).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.fitted_c / r.min_ratio <= 10.0, "{r:?}");
    }

    proptest! {
        #[test]
        fn g_scaling_identity(t in 0.05..4.0f64, x in -30.0..30.0f64, beta in 1.1..3.0f64, alpha in 0.3..1.95f64) {
            let lhs = g_kernel(beta, t, x.abs(), 1, alpha);
            let rhs = t.powf(-1.0 / alpha) * g_kernel(beta, 1.0, (t.powf(-1.0 / alpha) * x).abs(), 1, alpha);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
        }
    }
}
