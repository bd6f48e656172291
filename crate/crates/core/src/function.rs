//! Spatial functions that can be evaluated anywhere in ℝ^d.

/// A real function on ℝ^d used as input to the radial quadratures.
pub trait SpatialFunction: Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Gradient; central differences unless overridden.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let mut y = x.to_vec();
        for i in 0..x.len() {
            let e = 1e-5 * (1.0 + x[i].abs());
            y[i] = x[i] + e;
            let fp = self.value(&y);
            y[i] = x[i] - e;
            let fm = self.value(&y);
            y[i] = x[i];
            g[i] = (fp - fm) / (2.0 * e);
        }
        g
    }

    /// Upper bound of |f(y)| over |y| ≥ r, if the function decays.
    /// `None` means only boundedness is known.
    fn decay_envelope(&self, _r: f64) -> Option<f64> {
        None
    }

    /// Period of s ↦ f(x + sθ) when it is the same for every x.
    fn ray_period(&self, _theta: &[f64]) -> Option<f64> {
        None
    }

    /// Spacing h when s ↦ f(x ± sθ) is a polynomial of degree ≤ 3 between
    /// consecutive points of hℤ.
    fn ray_knots(&self, _x: &[f64], _theta: &[f64]) -> Option<f64> {
        None
    }
}

/// Adapter turning a closure into a [`SpatialFunction`].
pub struct FnSpatial<F> {
    f: F,
    envelope: Option<fn(f64) -> f64>,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnSpatial<F> {
    pub fn new(f: F) -> Self {
        Self { f, envelope: None }
    }

    pub fn with_envelope(f: F, envelope: fn(f64) -> f64) -> Self {
        Self {
            f,
            envelope: Some(envelope),
        }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> SpatialFunction for FnSpatial<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn decay_envelope(&self, r: f64) -> Option<f64> {
        self.envelope.map(|e| e(r))
    }
}

/// exp(−|x − c|²/σ²) with its exact gradient.
#[derive(Debug, Clone)]
pub struct Gaussian {
    pub center: Vec<f64>,
    pub width: f64,
}

impl SpatialFunction for Gaussian {
    fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        (-r2 / (self.width * self.width)).exp()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let v = self.value(x);
        x.iter()
            .zip(&self.center)
            .map(|(a, c)| -2.0 * (a - c) / (self.width * self.width) * v)
            .collect()
    }

    fn decay_envelope(&self, r: f64) -> Option<f64> {
        let c = self.center.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d = (r - c).max(0.0);
        Some((-d * d / (self.width * self.width)).exp())
    }
}
