//! `levi run`: config → kernels, report, manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use levi_core::bounds::ValidationReport;
use levi_core::experiment::Run;

use crate::cache::{CacheEntry, KernelCache, CACHE_ENV};
use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::export::{field_csv, field_gnuplot, write_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportMode {
    #[default]
    All,
    Kernels,
    Report,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub export: ExportMode,
    pub use_cache: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheStats {
    pub enabled: bool,
    pub directory: Option<PathBuf>,
    pub hits: usize,
    pub misses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config: PathBuf,
    pub config_hash: String,
    pub export: ExportMode,
    pub files: Vec<PathBuf>,
    pub cache: CacheStats,
    pub frozen_stage_seconds: f64,
    pub total_seconds: f64,
    pub passed: bool,
    pub failing_checks: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: ValidationReport,
    pub manifest: Manifest,
}

impl RunSummary {
    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.report.passed {
            0
        } else {
            1
        }
    }
}

/// Cache directory: the flag, then the environment, then `<output>/cache`.
pub fn cache_dir(opts: &RunOptions, output: &Path) -> PathBuf {
    opts.cache_dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| output.join("cache"))
}

fn time_label(t: f64) -> String {
    format!("{t:.6}").trim_end_matches('0').trim_end_matches('.').replace('.', "p")
}

/// Output paths in the config are relative to the config file.
fn output_dir(config_path: &Path, config: &ExperimentConfig) -> PathBuf {
    if config.output.directory.is_absolute() {
        config.output.directory.clone()
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(&config.output.directory)
    }
}

pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let config = ExperimentConfig::load(config_path)?;
    let mut exp = config.experiment()?;
    if exp.sampling.export_times.is_empty() && opts.export != ExportMode::Report {
        exp.sampling.export_times.push(exp.mesh.horizon);
    }
    if opts.export == ExportMode::Report {
        exp.sampling.export_times.clear();
    }
    let work = || run_experiment(config_path, &config, exp, opts);
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config {
                path: "--threads".into(),
                reason: e.to_string(),
            })?
            .install(work),
        None => work(),
    }
}

fn run_experiment(
    config_path: &Path,
    config: &ExperimentConfig,
    exp: levi_core::experiment::Experiment,
    opts: &RunOptions,
) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    let hash = config.hash();
    let out = output_dir(config_path, config);
    let mut run = Run::new(exp)?;

    let stage = Instant::now();
    let cache = if opts.use_cache {
        Some(KernelCache::new(&cache_dir(opts, &out), &hash)?)
    } else {
        None
    };
    let nodes = run.exp.mesh.nodes;
    let mut missed = Vec::new();
    for j in 1..=nodes {
        match cache.as_ref().map(|c| c.load(j, &run.rows)).transpose()?.flatten() {
            Some(e) => {
                run.frozen.preload(j, e.values);
            }
            None => missed.push(j),
        }
    }
    run.frozen_stage();
    if let Some(c) = &cache {
        for &j in &missed {
            c.store(&CacheEntry {
                node: j,
                rows: run.rows.clone(),
                values: run.frozen.get(&run.engine.prop, j).clone(),
            })?;
        }
    }
    let frozen_stage_seconds = stage.elapsed().as_secs_f64();
    log::info!("frozen stage: {} cached, {} computed, {frozen_stage_seconds:.3}s", nodes - missed.len(), missed.len());

    let mut outputs = run.evaluate()?;
    outputs.report.metadata.config_hash = Some(hash.clone());

    let mut files = Vec::new();
    if opts.export != ExportMode::Report {
        let grid = *run.grid();
        for f in &outputs.fields {
            let stem = format!("{}_t{}", f.name, time_label(f.t));
            for fmt in &config.output.formats {
                let (path, text) = match fmt {
                    Format::Csv => (out.join(format!("{stem}.csv")), field_csv(&grid, f)?),
                    Format::Gnuplot => (out.join(format!("{stem}.dat")), field_gnuplot(&grid, f)?),
                };
                write_text(&path, &text)?;
                files.push(path);
            }
        }
    }
    if opts.export != ExportMode::Kernels {
        let path = out.join("report.json");
        write_text(&path, &serde_json::to_string_pretty(&outputs.report).expect("report serializes"))?;
        files.push(path);
    }
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config_path.to_path_buf(),
        config_hash: hash,
        export: opts.export,
        files,
        cache: CacheStats {
            enabled: cache.is_some(),
            directory: cache.as_ref().map(|_| cache_dir(opts, &out)),
            hits: nodes - missed.len(),
            misses: if cache.is_some() { missed.len() } else { 0 },
        },
        frozen_stage_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
        passed: outputs.report.passed,
        failing_checks: outputs.report.failing().into_iter().map(String::from).collect(),
    };
    let path = out.join("manifest.json");
    write_text(&path, &serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok(RunSummary {
        report: outputs.report,
        manifest,
    })
}
