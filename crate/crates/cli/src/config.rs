//! Experiment configuration files (TOML).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use levi_core::experiment::{Check, Experiment, Method, Sampling, Tolerances};
use levi_core::grid::SpatialGrid;
use levi_core::parametrix::{SeriesControls, TimeMesh};
use levi_core::{JumpKernel, LeviError, Modulation, SpectralMeasure, StableParams};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub d: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// Constant of the ball-mass condition on the base measure.
    pub m0: f64,
    pub atoms: Vec<AtomConfig>,
    pub modulation: ModulationConfig,
    /// Declared comparability constant of h; at least the attained one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub direction: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModulationConfig {
    Constant,
    Cosine {
        amplitude: f64,
        wavevector: Vec<f64>,
        factors: Vec<f64>,
    },
    Bump {
        amplitude: f64,
        width: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    pub nodes: usize,
    /// Mesh grading ρ; α/θ when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_terms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_tail: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_quad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplification: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default = "default_checks")]
    pub checks: BTreeSet<Check>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sampling: Sampling,
}

fn default_checks() -> BTreeSet<Check> {
    [Check::Mass, Check::Nonnegativity, Check::ChapmanKolmogorov, Check::CrossMethod].into_iter().collect()
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            checks: default_checks(),
            tolerances: Tolerances::default(),
            sampling: Sampling::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Gnuplot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: BTreeSet<Format>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("levi-out")
}

fn default_formats() -> BTreeSet<Format> {
    [Format::Csv].into_iter().collect()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

fn at(path: &str) -> impl Fn(LeviError) -> CliError + '_ {
    move |e| CliError::Config {
        path: path.to_string(),
        reason: e.to_string(),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let path = e.span().map(|s| format!("bytes {}..{}", s.start, s.end)).unwrap_or_else(|| "<document>".into());
            CliError::Config {
                path,
                reason: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// SHA-256 of the canonical JSON form, so formatting, comments and key
    /// order in the file do not matter.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn kernel(&self) -> Result<JumpKernel, CliError> {
        let p = &self.problem;
        let pairs: Vec<(Vec<f64>, f64)> = p.atoms.iter().map(|a| (a.direction.clone(), a.weight)).collect();
        let mu = SpectralMeasure::from_pairs(p.d, &pairs).map_err(at("problem.atoms"))?;
        let params = StableParams::new(p.alpha, p.gamma, p.d, p.m0).map_err(at("problem"))?;
        let m = match &p.modulation {
            ModulationConfig::Constant => Ok(Modulation::constant()),
            ModulationConfig::Cosine {
                amplitude,
                wavevector,
                factors,
            } => Modulation::cosine(*amplitude, wavevector.clone(), factors.clone()),
            ModulationConfig::Bump { amplitude, width } => Modulation::bump(*amplitude, *width),
        }
        .and_then(|m| m.with_declared(p.big_m0, p.eta))
        .map_err(at("problem.modulation"))?;
        JumpKernel::new(mu, params, m).map_err(at("problem"))
    }

    pub fn experiment(&self) -> Result<Experiment, CliError> {
        let kernel = self.kernel()?;
        let grid = SpatialGrid::new(self.problem.d, self.grid.half_width, self.grid.points).map_err(at("grid"))?;
        let s = &self.series;
        let mut controls = SeriesControls::defaults_for(&kernel);
        controls.theta = s.theta.unwrap_or(controls.theta);
        controls.k_max = s.k_max.unwrap_or(controls.k_max);
        controls.min_terms = s.min_terms.unwrap_or(controls.min_terms);
        controls.eps_tail = s.eps_tail.unwrap_or(controls.eps_tail);
        controls.eps_quad = s.eps_quad.unwrap_or(controls.eps_quad);
        controls.quad_nodes = s.quad_nodes.unwrap_or(controls.quad_nodes);
        controls.picard_tol = s.picard_tol.unwrap_or(controls.picard_tol);
        controls.amplification = s.amplification.unwrap_or(controls.amplification);
        controls.validate(&kernel).map_err(at("series"))?;
        let grading = self.time.grading.unwrap_or(kernel.alpha() / controls.theta);
        let mesh = TimeMesh::new(self.time.horizon, self.time.nodes, grading).map_err(at("time"))?;
        let method = s.method.unwrap_or(if grid.len() <= levi_core::experiment::DENSE_LIMIT {
            Method::Dense
        } else {
            Method::Chebyshev { nodes: 12 }
        });
        let e = Experiment {
            kernel,
            grid,
            mesh,
            controls,
            method,
            checks: self.validation.checks.clone(),
            tolerances: self.validation.tolerances,
            sampling: self.validation.sampling.clone(),
            frozen_refinements: 0,
        };
        e.validate().map_err(at("validation"))?;
        Ok(e)
    }
}
