//! Finite atomic spherical measures μ₀.

use serde::{Deserialize, Serialize};

use crate::error::{LeviError, Result};

pub const UNIT_TOL: f64 = 1e-12;
pub const MERGE_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalAtom {
    pub direction: Vec<f64>,
    pub weight: f64,
}

impl SphericalAtom {
    pub fn new(direction: Vec<f64>, weight: f64) -> Result<Self> {
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(LeviError::NonUnitDirection { norm });
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(LeviError::InvalidParams {
                name: "weight",
                reason: format!("atom weight must be positive and finite, got {weight}"),
            });
        }
        Ok(Self { direction, weight })
    }

    fn distance(&self, dir: &[f64]) -> f64 {
        self.direction
            .iter()
            .zip(dir)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    dim: usize,
    atoms: Vec<SphericalAtom>,
}

impl SpectralMeasure {
    pub fn new(dim: usize, atoms: Vec<SphericalAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(LeviError::EmptyMeasure);
        }
        if dim == 0 {
            return Err(LeviError::InvalidParams {
                name: "dimension",
                reason: "dimension must be positive".into(),
            });
        }
        for a in &atoms {
            if a.direction.len() != dim {
                return Err(LeviError::InvalidParams {
                    name: "direction",
                    reason: format!("expected {dim} components, got {}", a.direction.len()),
                });
            }
            // re-validate in case the atom was built by hand
            SphericalAtom::new(a.direction.clone(), a.weight)?;
        }
        Ok(Self { dim, atoms })
    }

    /// Convenience constructor from `(direction, weight)` pairs.
    pub fn from_pairs(dim: usize, pairs: &[(Vec<f64>, f64)]) -> Result<Self> {
        let atoms = pairs
            .iter()
            .map(|(d, w)| SphericalAtom::new(d.clone(), *w))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, atoms)
    }

    /// The symmetric pair {(±θ, w/2)} for every given direction, merged.
    pub fn symmetric_pairs(dim: usize, pairs: &[(Vec<f64>, f64)]) -> Result<Self> {
        symmetrize(&Self::from_pairs(dim, pairs)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[SphericalAtom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        total_mass(self)
    }

    pub fn is_symmetric(&self) -> bool {
        self.atoms.iter().all(|a| {
            let neg: Vec<f64> = a.direction.iter().map(|v| -v).collect();
            self.atoms
                .iter()
                .any(|b| b.distance(&neg) <= MERGE_TOL && (b.weight - a.weight).abs() <= SYMMETRY_TOL)
        })
    }

    /// Σ_i w_i |ξ·θ_i|^α.
    pub fn projected_sum(&self, xi: &[f64], alpha: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * dot(&a.direction, xi).abs().powf(alpha))
            .sum()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Splits every atom into (θ, w/2) and (−θ, w/2), merging coincident rays.
pub fn symmetrize(measure: &SpectralMeasure) -> Result<SpectralMeasure> {
    if measure.atoms.is_empty() {
        return Err(LeviError::EmptyMeasure);
    }
    let mut out: Vec<SphericalAtom> = Vec::with_capacity(2 * measure.atoms.len());
    let mut push = |dir: Vec<f64>, w: f64| {
        if let Some(b) = out.iter_mut().find(|b| b.distance(&dir) <= MERGE_TOL) {
            b.weight += w;
        } else {
            out.push(SphericalAtom { direction: dir, weight: w });
        }
    };
    for a in &measure.atoms {
        let norm = a.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(LeviError::NonUnitDirection { norm });
        }
        push(a.direction.clone(), 0.5 * a.weight);
        push(a.direction.iter().map(|v| -v).collect(), 0.5 * a.weight);
    }
    SpectralMeasure::new(measure.dim, out)
}

pub fn total_mass(measure: &SpectralMeasure) -> f64 {
    measure.atoms.iter().map(|a| a.weight).sum()
}

/// Deterministic probe directions: {±1} in d = 1, a uniform angular lattice
/// of `probe_count` points in d = 2.
pub fn probe_directions(dim: usize, probe_count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..probe_count.max(4))
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / probe_count.max(4) as f64;
                vec![phi.cos(), phi.sin()]
            })
            .collect(),
        _ => {
            // coordinate axes only; coarse but deterministic
            let mut v = Vec::new();
            for i in 0..dim {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                v.push(e);
            }
            v
        }
    }
}

/// min over probe directions ξ of Σ_i w_i |ξ·θ_i|^α.
pub fn nondegeneracy_margin(measure: &SpectralMeasure, alpha: f64, probe_count: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(LeviError::InvalidAlpha { alpha, max: 2.0 });
    }
    Ok(probe_directions(measure.dim, probe_count)
        .iter()
        .map(|xi| measure.projected_sum(xi, alpha))
        .fold(f64::INFINITY, f64::min))
}
