//! End-to-end runs: both constructions of the heat kernel for one jump
//! kernel, the requested checks, and the resulting report.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::bounds::fits::{
    self, cancellation_fit, chapman_kolmogorov, default_rate_grid, frozen_bound_fit, frozen_holder_fit, generator_bound_fit,
    holder_in_x_check, mass_defect, pde_residual, phi_block_ratio, psi_block_ratio, refinement_stability,
    upper_bound_fit, KernelSlices, Majorant,
};
use crate::bounds::{subconvolution_check, CheckOutcome, ComparisonKernel, RunMetadata, ValidationReport};
use crate::error::{LeviError, Result};
use crate::frozen_kernel::{Boundary, FrozenEvaluator};
use crate::generator::Generator;
use crate::grid::SpatialGrid;
use crate::levy_kernel::JumpKernel;
use crate::parametrix::{
    fit_c1, predicted_ratio, sup_norm, AnyPropagator, ChebyshevPropagator, DensePropagator, Duhamel, FrozenCache, KernelFamily, Layout,
    Parametrix, Propagator, PsiSeries, SeriesControls, TimeMesh, Which,
};

/// Largest grid a dense propagator is allowed on.
pub const DENSE_LIMIT: usize = 4096;

/// Points per dimension allowed for frozen-kernel evaluation grids.
pub const FROZEN_GRID_CAP_1D: usize = 8192;
pub const FROZEN_GRID_CAP_2D: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Degeneration,
    Mass,
    Nonnegativity,
    ChapmanKolmogorov,
    PdeResidual,
    CrossMethod,
    MeshHalving,
    SeriesDecay,
    Subconvolution,
    BoundFits,
    Refinement,
    InitialCondition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    Dense,
    Chebyshev { nodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub degeneration: f64,
    pub mass: f64,
    pub negativity: f64,
    pub chapman_kolmogorov: f64,
    pub pde_residual: f64,
    pub cross_method: f64,
    pub halving_factor: f64,
    pub decay_factor: f64,
    pub subconvolution_spread: f64,
    pub subconvolution_stability: f64,
    pub fit_stability: f64,
    pub initial_condition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            degeneration: 1e-6,
            mass: 1e-3,
            negativity: 1e-6,
            chapman_kolmogorov: 1e-3,
            pde_residual: 1e-2,
            cross_method: 1e-3,
            halving_factor: 1.5,
            decay_factor: 3.0,
            subconvolution_spread: 10.0,
            subconvolution_stability: 0.1,
            fit_stability: 0.2,
            initial_condition: 5e-3,
        }
    }
}

impl Tolerances {
    /// Every tolerance multiplied by `k`, factors divided by it.
    pub fn relaxed(&self, k: f64) -> Self {
        Self {
            degeneration: self.degeneration * k,
            mass: self.mass * k,
            negativity: self.negativity * k,
            chapman_kolmogorov: self.chapman_kolmogorov * k,
            pde_residual: self.pde_residual * k,
            cross_method: self.cross_method * k,
            halving_factor: 1.0 + (self.halving_factor - 1.0) / k,
            decay_factor: self.decay_factor * k,
            subconvolution_spread: self.subconvolution_spread * k,
            subconvolution_stability: self.subconvolution_stability * k,
            fit_stability: self.fit_stability * k,
            initial_condition: self.initial_condition * k,
        }
    }

    pub fn named(&self) -> BTreeMap<String, f64> {
        [
            ("degeneration", self.degeneration),
            ("mass", self.mass),
            ("negativity", self.negativity),
            ("chapman_kolmogorov", self.chapman_kolmogorov),
            ("pde_residual", self.pde_residual),
            ("cross_method", self.cross_method),
            ("halving_factor", self.halving_factor),
            ("decay_factor", self.decay_factor),
            ("subconvolution_spread", self.subconvolution_spread),
            ("subconvolution_stability", self.subconvolution_stability),
            ("fit_stability", self.fit_stability),
            ("initial_condition", self.initial_condition),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Where and when the checks sample the kernel. Points are physical
/// coordinates, snapped to the nearest grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    /// x points of the Volterra rows; `None` means every grid point.
    pub rows: Option<Vec<Vec<f64>>>,
    /// y points of the series columns.
    pub columns: Vec<Vec<f64>>,
    /// x points used by the bound fits and the refinement study.
    pub fit_points: Vec<Vec<f64>>,
    pub mass_times: Vec<f64>,
    pub ck_pairs: Vec<[f64; 2]>,
    pub compare_times: Vec<f64>,
    pub residual_window: [f64; 2],
    pub residual_nodes: usize,
    pub residual_stride: usize,
    pub fit_window: [f64; 2],
    pub fit_times: usize,
    pub initial_times: Vec<f64>,
    pub bump_center: Vec<f64>,
    pub bump_half_width: f64,
    pub export_times: Vec<f64>,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            rows: None,
            columns: vec![vec![0.0], vec![2.5], vec![5.0], vec![-7.5]],
            fit_points: vec![vec![-5.0], vec![-2.5], vec![0.0], vec![2.5], vec![5.0]],
            mass_times: vec![0.5, 1.0],
            ck_pairs: vec![[0.5, 0.5]],
            compare_times: vec![0.5, 1.0],
            residual_window: [0.25, 1.0],
            residual_nodes: 4,
            residual_stride: 1,
            fit_window: [0.25, 1.0],
            fit_times: 4,
            initial_times: vec![0.2, 0.1, 0.05],
            bump_center: vec![0.0],
            bump_half_width: 8.0,
            export_times: vec![],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub kernel: JumpKernel,
    pub grid: SpatialGrid,
    pub mesh: TimeMesh,
    pub controls: SeriesControls,
    pub method: Method,
    pub checks: BTreeSet<Check>,
    pub tolerances: Tolerances,
    pub sampling: Sampling,
    /// Extra ×2 refinements of the frozen-kernel evaluation grid beyond the
    /// coarsest one that resolves the fit times.
    pub frozen_refinements: usize,
}

/// p(x, y) on rows × columns of the grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSlice {
    pub name: String,
    pub t: f64,
    pub rows: Vec<usize>,
    pub columns: Vec<usize>,
    pub values: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct Outputs {
    pub report: ValidationReport,
    pub fields: Vec<FieldSlice>,
}

fn invalid(name: &'static str, reason: String) -> LeviError {
    LeviError::InvalidParams { name, reason }
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        let d = self.kernel.dim();
        if self.grid.dim != d {
            return Err(invalid("grid", format!("grid dimension {} for a kernel in d = {d}", self.grid.dim)));
        }
        self.controls.validate(&self.kernel)?;
        if self.method == Method::Dense && self.grid.len() > DENSE_LIMIT {
            return Err(invalid(
                "method",
                format!("dense propagator limited to {DENSE_LIMIT} grid points, got {}", self.grid.len()),
            ));
        }
        if let Method::Chebyshev { nodes } = self.method {
            if nodes < 2 {
                return Err(invalid("method", format!("Chebyshev needs ≥ 2 nodes, got {nodes}")));
            }
        }
        let s = &self.sampling;
        let bump = self.checks.contains(&Check::InitialCondition).then_some(&s.bump_center);
        let points = s.rows.iter().flatten().chain(&s.columns).chain(&s.fit_points).chain(bump);
        for p in points {
            if p.len() != d || p.iter().any(|v| !(v.abs() <= self.grid.half_width)) {
                return Err(invalid("sampling", format!("point {p:?} is not inside the d = {d} box")));
            }
        }
        let horizon = self.mesh.horizon * (1.0 + 1e-12);
        let mut times: Vec<f64> = s.mass_times.iter().chain(&s.compare_times).chain(&s.initial_times).chain(&s.export_times).copied().collect();
        times.extend(s.ck_pairs.iter().flat_map(|[a, b]| [*a, *b, a + b]));
        if let Some(t) = times.iter().find(|t| !(**t > 0.0 && **t <= horizon)) {
            return Err(invalid("sampling", format!("time {t} outside (0, {}]", self.mesh.horizon)));
        }
        if self.needs_series() && s.columns.is_empty() {
            return Err(invalid("sampling", "series checks need at least one column".into()));
        }
        if self.checks.contains(&Check::BoundFits) && s.fit_points.len() < 2 {
            return Err(invalid("sampling", "bound fits need at least two fit points".into()));
        }
        if !(s.bump_half_width > 0.0) || s.residual_stride == 0 {
            return Err(invalid("sampling", "bump width and residual stride must be positive".into()));
        }
        let tol = self.tolerances.named();
        if let Some((k, v)) = tol.iter().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(invalid("tolerances", format!("{k} = {v}")));
        }
        Ok(())
    }

    fn needs_series(&self) -> bool {
        [Check::Degeneration, Check::PdeResidual, Check::CrossMethod, Check::MeshHalving, Check::SeriesDecay, Check::BoundFits]
            .iter()
            .any(|c| self.checks.contains(c))
    }

    pub fn propagator(&self, grid: &SpatialGrid) -> AnyPropagator {
        let family = KernelFamily::new(&self.kernel, grid);
        match self.method {
            Method::Dense => AnyPropagator::Dense(DensePropagator::new(family)),
            Method::Chebyshev { nodes } => {
                AnyPropagator::Chebyshev(ChebyshevPropagator::new(family, nodes, self.kernel.modulation.feature_range()))
            }
        }
    }

    pub fn metadata(&self) -> RunMetadata {
        let mut tolerances = self.tolerances.named();
        tolerances.insert("eps_tail".into(), self.controls.eps_tail);
        tolerances.insert("eps_quad".into(), self.controls.eps_quad);
        tolerances.insert("picard_tol".into(), self.controls.picard_tol);
        tolerances.insert("amplification".into(), self.controls.amplification);
        tolerances.insert("majorant_floor".into(), fits::MAJORANT_FLOOR);
        RunMetadata {
            dim: self.grid.dim,
            points_per_dim: self.grid.n(),
            half_width: self.grid.half_width,
            mesh_nodes: self.mesh.nodes,
            horizon: self.mesh.horizon,
            grading: self.mesh.grading,
            theta: self.controls.theta,
            alpha: self.kernel.alpha(),
            gamma: self.kernel.params.gamma,
            config_hash: None,
            tolerances,
            notes: vec![format!("bounds are certified on t ∈ (0, {}] only", self.mesh.horizon)],
        }
    }

    /// The same experiment on a twice finer grid, with rows restricted to
    /// the fit points.
    pub fn refined(&self) -> Self {
        let mut e = self.clone();
        e.grid = self.grid.refined();
        e.sampling.rows = Some(self.sampling.fit_points.clone());
        e.frozen_refinements += 1;
        e
    }

    /// The same experiment with half the mesh nodes and rows restricted to
    /// the fit points.
    pub fn coarsened(&self) -> Self {
        let mut e = self.clone();
        e.mesh = TimeMesh {
            nodes: self.mesh.nodes / 2,
            ..self.mesh
        };
        e.sampling.rows = Some(self.sampling.fit_points.clone());
        e
    }
}

/// A run in progress: the engine plus lazily built constructions.
pub struct Run {
    pub exp: Experiment,
    pub engine: Parametrix<AnyPropagator>,
    pub rows: Vec<usize>,
    pub columns: Vec<usize>,
    pub fit_rows: Vec<usize>,
    pub frozen: FrozenCache,
    duhamel: Option<Duhamel>,
    series: Option<PsiSeries>,
}

fn snap(grid: &SpatialGrid, points: &[Vec<f64>]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(points.len());
    for p in points {
        let i = grid.nearest_index(p);
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

impl Run {
    pub fn new(mut exp: Experiment) -> Result<Self> {
        exp.validate()?;
        if exp.checks.contains(&Check::SeriesDecay) {
            exp.controls.min_terms = exp.controls.min_terms.max(6);
        }
        let prop = exp.propagator(&exp.grid);
        let engine = Parametrix::new(prop, &exp.kernel, exp.mesh, exp.controls)?;
        let fit_rows = snap(&exp.grid, &exp.sampling.fit_points);
        let rows = match &exp.sampling.rows {
            None => (0..exp.grid.len()).collect(),
            Some(points) => {
                let mut r = snap(&exp.grid, points);
                for i in &fit_rows {
                    if !r.contains(i) {
                        r.push(*i);
                    }
                }
                r
            }
        };
        let columns = snap(&exp.grid, &exp.sampling.columns);
        let frozen = FrozenCache::new(exp.mesh, Layout::Rows, rows.clone());
        Ok(Self {
            exp,
            engine,
            rows,
            columns,
            fit_rows,
            frozen,
            duhamel: None,
            series: None,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.exp.grid
    }

    pub fn all_rows(&self) -> bool {
        self.rows.len() == self.grid().len() && self.rows.iter().enumerate().all(|(i, r)| i == *r)
    }

    /// p⁰ at every mesh node for the rows (the frozen-kernel stage).
    pub fn frozen_stage(&self) {
        use rayon::prelude::*;
        (1..=self.exp.mesh.nodes).into_par_iter().for_each(|j| {
            self.frozen.get(&self.engine.prop, j);
        });
    }

    pub fn duhamel(&mut self) -> Result<&Duhamel> {
        if self.duhamel.is_none() {
            log::info!("Volterra march over {} rows", self.rows.len());
            self.duhamel = Some(self.engine.duhamel_solve(&self.rows)?);
        }
        Ok(self.duhamel.as_ref().expect("set above"))
    }

    pub fn series(&mut self) -> Result<&PsiSeries> {
        if self.series.is_none() {
            log::info!("series over {} columns", self.columns.len());
            self.series = Some(self.engine.psi_series(&self.columns)?);
        }
        Ok(self.series.as_ref().expect("set above"))
    }

    /// p_t(x, ·) for the rows, from the Volterra solution.
    pub fn p_rows(&mut self, t: f64) -> Result<Array2<f64>> {
        self.duhamel()?;
        let sol = self.duhamel.as_ref().expect("built");
        if let Some(j) = self.exp.mesh.node_of(t) {
            let mut p = self.frozen.get(&self.engine.prop, j).clone();
            p += &sol.remainder.node(j);
            return Ok(p);
        }
        self.engine.duhamel_at(sol, t)
    }

    /// p_t(·, y) for the columns, from the series.
    pub fn p_cols(&mut self, t: f64) -> Result<Array2<f64>> {
        self.series()?;
        self.engine.assemble_heat_kernel(self.series.as_ref().expect("built"), t)
    }

    fn positions(&self, indices: &[usize]) -> Vec<usize> {
        indices
            .iter()
            .map(|i| self.rows.iter().position(|r| r == i).expect("index is a row"))
            .collect()
    }

    /// Mesh nodes with times in [lo, hi].
    fn nodes_in(&self, window: [f64; 2]) -> Vec<usize> {
        (1..=self.exp.mesh.nodes)
            .filter(|j| {
                let t = self.exp.mesh.time(*j);
                t >= window[0] * (1.0 - 1e-12) && t <= window[1] * (1.0 + 1e-12)
            })
            .collect()
    }

    /// `count` entries spread evenly over `v`, always keeping both ends.
    fn spread<T: Copy>(v: &[T], count: usize) -> Vec<T> {
        if v.len() <= count || count < 2 {
            return v.to_vec();
        }
        let mut out: Vec<T> = (0..count).map(|k| v[k * (v.len() - 1) / (count - 1)]).collect();
        out.dedup_by(|_, _| false);
        out
    }

    pub fn check_degeneration(&mut self) -> Result<CheckOutcome> {
        let mut worst: f64 = 0.0;
        let cols = self.columns.clone();
        for j in 1..=self.exp.mesh.nodes {
            let t = self.exp.mesh.time(j);
            let phi = self.engine.phi(t, Layout::Columns, &cols);
            let p0 = self.engine.zero_order(t, Layout::Columns, &cols);
            worst = worst.max(sup_norm(&phi) / sup_norm(&p0));
        }
        for t in self.exp.sampling.compare_times.clone() {
            let p0 = self.engine.zero_order(t, Layout::Rows, &self.rows);
            let pr = self.p_rows(t)?;
            worst = worst.max(sup_norm(&(&pr - &p0)) / sup_norm(&p0));
            let p0c = self.engine.zero_order(t, Layout::Columns, &cols);
            let pc = self.p_cols(t)?;
            worst = worst.max(sup_norm(&(&pc - &p0c)) / sup_norm(&p0c));
        }
        let terms = self.series()?.terms_used;
        Ok(CheckOutcome::at_most("degeneration", worst, self.exp.tolerances.degeneration)
            .with_note(format!("max |Φ| and ‖p − p⁰‖ relative to sup p⁰; series used {terms} term(s)")))
    }

    pub fn check_mass(&mut self) -> Result<CheckOutcome> {
        let cell = self.grid().cell();
        let mut worst: f64 = 0.0;
        for t in self.exp.sampling.mass_times.clone() {
            worst = worst.max(mass_defect(&self.p_rows(t)?, cell));
        }
        Ok(CheckOutcome::at_most("mass", worst, self.exp.tolerances.mass))
    }

    pub fn check_nonnegativity(&mut self) -> Result<CheckOutcome> {
        let mut low: f64 = 0.0;
        let times: Vec<f64> = self.exp.sampling.mass_times.iter().chain(&self.exp.sampling.compare_times).copied().collect();
        for t in times {
            low = low.min(self.p_rows(t)?.iter().copied().fold(f64::INFINITY, f64::min));
        }
        Ok(CheckOutcome::at_most("nonnegativity", -low, self.exp.tolerances.negativity).with_note("largest negative value of p"))
    }

    pub fn check_chapman_kolmogorov(&mut self) -> Result<CheckOutcome> {
        let tol = self.exp.tolerances.chapman_kolmogorov;
        if !self.all_rows() {
            return Ok(CheckOutcome::failed("chapman_kolmogorov", tol, "needs p on every grid row"));
        }
        let cell = self.grid().cell();
        let mut worst: f64 = 0.0;
        for [s, t] in self.exp.sampling.ck_pairs.clone() {
            let ps = self.p_rows(s)?;
            let pt = self.p_rows(t)?;
            let pst = self.p_rows(s + t)?;
            worst = worst.max(chapman_kolmogorov(&ps, &pt, &pst, cell).relative);
        }
        Ok(CheckOutcome::at_most("chapman_kolmogorov", worst, tol).with_note("sup residual / sup p"))
    }

    pub fn check_pde_residual(&mut self) -> Result<CheckOutcome> {
        let m = self.exp.mesh.nodes;
        let interior: Vec<usize> = self.nodes_in(self.exp.sampling.residual_window).into_iter().filter(|j| *j > 1 && *j < m).collect();
        let picked = Self::spread(&interior, self.exp.sampling.residual_nodes);
        let gen = Generator::new(self.exp.kernel.clone());
        let xs: Vec<usize> = (0..self.grid().len()).step_by(self.exp.sampling.residual_stride).collect();
        let maj = Majorant::for_kernel(&self.exp.kernel);
        let grid = *self.grid();
        let cols = self.columns.clone();
        let mut worst: f64 = 0.0;
        let mut at = String::new();
        for j in picked {
            let times = [self.exp.mesh.time(j - 1), self.exp.mesh.time(j), self.exp.mesh.time(j + 1)];
            let f: Vec<Array2<f64>> = times.iter().map(|t| self.p_cols(*t)).collect::<Result<_>>()?;
            let r = pde_residual(&gen, &grid, &cols, times, [&f[0], &f[1], &f[2]], &xs, maj)?;
            if r.worst_ratio > worst {
                worst = r.worst_ratio;
                at = format!("t = {:.4}, x index {}, y index {}", times[1], r.at.0, r.at.1);
            }
        }
        Ok(CheckOutcome::at_most("pde_residual", worst, self.exp.tolerances.pde_residual)
            .with_note(format!("|(∂_t − L_x)p| / (t^-1 G_t); worst at {at}")))
    }

    /// Largest relative gap between the two constructions on rows × columns.
    pub fn cross_gap(&mut self, times: &[f64]) -> Result<f64> {
        let cols = self.columns.clone();
        let mut worst: f64 = 0.0;
        for &t in times {
            let pr = self.p_rows(t)?.select(Axis(1), &cols);
            let pc = self.p_cols(t)?.select(Axis(1), &self.rows).reversed_axes();
            worst = worst.max(sup_norm(&(&pr - &pc)) / sup_norm(&pr));
        }
        Ok(worst)
    }

    pub fn check_cross_method(&mut self) -> Result<CheckOutcome> {
        let times = self.exp.sampling.compare_times.clone();
        let gap = self.cross_gap(&times)?;
        Ok(CheckOutcome::at_most("cross_method", gap, self.exp.tolerances.cross_method))
    }

    /// Gap ratio between a run on half the nodes and this one, on the fit rows.
    pub fn check_mesh_halving(&mut self) -> Result<(CheckOutcome, [f64; 2])> {
        let times = self.exp.sampling.compare_times.clone();
        let mut coarse = Run::new(self.exp.coarsened())?;
        let gap_coarse = coarse.cross_gap(&times)?;
        let cols = self.columns.clone();
        let pos = self.positions(&self.fit_rows.clone());
        let mut gap_fine: f64 = 0.0;
        for &t in &times {
            let pr = self.p_rows(t)?.select(Axis(0), &pos).select(Axis(1), &cols);
            let pc = self.p_cols(t)?.select(Axis(1), &self.fit_rows).reversed_axes();
            gap_fine = gap_fine.max(sup_norm(&(&pr - &pc)) / sup_norm(&pr));
        }
        let factor = gap_coarse / gap_fine;
        Ok((
            CheckOutcome::at_least("mesh_halving", factor, self.exp.tolerances.halving_factor)
                .with_note(format!("gap {gap_coarse:.3e} on {} nodes, {gap_fine:.3e} on {}", coarse.exp.mesh.nodes, self.exp.mesh.nodes)),
            [gap_coarse, gap_fine],
        ))
    }

    pub fn check_series_decay(&mut self) -> Result<CheckOutcome> {
        let gain = self.engine.gain();
        let horizon = self.exp.mesh.horizon;
        let m = self.exp.mesh.nodes;
        let tol = self.exp.tolerances.decay_factor;
        let s = self.series()?;
        let mut worst: f64 = 1.0;
        let upto = (s.term_norms.len() - 1).min(5);
        for k in 1..=upto {
            let rho = s.term_norms[k][m - 1] / s.term_norms[k - 1][m - 1];
            let pred = s.fit.c2 * predicted_ratio(k, horizon, gain);
            worst = worst.max((rho / pred).max(pred / rho));
        }
        let mut out = CheckOutcome::at_most("series_decay", worst, tol)
            .with_note(format!("term ratios k = 1..{upto} at t = {horizon} against C₂ = {:.4e}", s.fit.c2));
        if upto < 5 {
            out.passed = false;
        }
        Ok(out)
    }

    pub fn check_subconvolution(&self) -> Result<(Vec<CheckOutcome>, [f64; 2])> {
        let tol = self.exp.tolerances;
        if self.grid().dim != 1 {
            return Ok((vec![CheckOutcome::failed("subconvolution", tol.subconvolution_spread, "implemented for d = 1")], [f64::NAN; 2]));
        }
        let k = &self.exp.kernel;
        let alpha = k.alpha();
        let beta = alpha + k.params.gamma;
        let s_list = [0.1, 0.25, 0.5, 0.75, 0.9];
        let r = self.grid().half_width;
        let xs = |step: f64| -> Vec<f64> {
            let n = (2.0 * r / step).round() as usize;
            (0..=n).map(|i| -r + i as f64 * step).collect()
        };
        let g = ComparisonKernel::g(beta, alpha, 1)?;
        let h = ComparisonKernel::h(k.params.gamma, self.exp.controls.theta, alpha, 1)?;
        let g1 = subconvolution_check(&g, 1.0, &s_list, &xs(1.0))?;
        let g2 = subconvolution_check(&g, 1.0, &s_list, &xs(0.5))?;
        let h1 = subconvolution_check(&h, 1.0, &s_list, &xs(1.0))?;
        let h2 = subconvolution_check(&h, 1.0, &s_list, &xs(0.5))?;
        let mut out = vec![
            CheckOutcome::at_most("subconvolution_violations", (g2.violations + h2.violations) as f64, 0.0),
            CheckOutcome::at_most("subconvolution_spread", g2.fitted_c / g2.min_ratio, tol.subconvolution_spread)
                .with_note("max/min of (G_{t−s} * G_s)/G_t"),
        ];
        for (name, a, b) in [("c_g", g1.fitted_c, g2.fitted_c), ("c_h", h1.fitted_c, h2.fitted_c)] {
            out.push(match refinement_stability(name, a, b, tol.subconvolution_stability) {
                Ok(s) => CheckOutcome::at_most(format!("subconvolution_stability:{name}"), s.relative_change, tol.subconvolution_stability),
                Err(e) => CheckOutcome::failed(format!("subconvolution_stability:{name}"), tol.subconvolution_stability, e.to_string()),
            });
        }
        Ok((out, [g2.fitted_c, h2.fitted_c]))
    }

    /// Every fitted constant, by name. `rates` is the c grid of the upper-bound fit.
    pub fn bound_fits(&mut self, rates: &[f64]) -> Result<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        let k = self.exp.kernel.clone();
        let grid = *self.grid();
        let theta = self.exp.controls.theta;
        let maj = Majorant::for_kernel(&k);
        let nodes = self.nodes_in(self.exp.sampling.fit_window);
        if nodes.len() < 3 {
            return Err(invalid("fit_window", format!("only {} mesh nodes in the window", nodes.len())));
        }
        let pos = self.positions(&self.fit_rows.clone());
        let mut times = Vec::with_capacity(nodes.len());
        let mut values = Vec::with_capacity(nodes.len());
        for &j in &nodes {
            let t = self.exp.mesh.time(j);
            times.push(t);
            values.push(self.p_rows(t)?.select(Axis(0), &pos));
        }
        let slices = KernelSlices::new(grid, self.fit_rows.clone(), times.clone(), values)?;
        let upper = upper_bound_fit(&slices, maj, rates)?;
        out.insert("upper_c".into(), upper.constant);
        out.insert("upper_rate".into(), upper.c);
        out.insert("upper_value".into(), upper.value_constant);
        out.insert("upper_derivative".into(), upper.derivative_constant);
        let pairs: Vec<(usize, usize)> = (1..self.fit_rows.len()).map(|i| (i - 1, i)).collect();
        out.insert("holder_x".into(), holder_in_x_check(&slices, maj, &pairs, theta, upper.c).constant);

        let eval = FrozenEvaluator::new(k.clone());
        let bases: Vec<Vec<f64>> = self.fit_rows.iter().map(|i| grid.point(*i)).collect();
        let candidates = Self::spread(&times, self.exp.sampling.fit_times);
        // The frozen kernels are evaluated on a grid fine enough to resolve
        // the earliest fit time, independently of the engine grid.
        let cap = if grid.dim == 1 { FROZEN_GRID_CAP_1D } else { FROZEN_GRID_CAP_2D };
        let mut fgrid = grid;
        let t_floor = loop {
            let floor = bases.iter().map(|z| eval.t_min(z, &fgrid)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
            if floor <= candidates[0] || fgrid.n() * 2 > cap {
                break floor;
            }
            fgrid = fgrid.refined();
        };
        for _ in 0..self.exp.frozen_refinements {
            if fgrid.n() * 2 <= cap {
                fgrid = fgrid.refined();
            }
        }
        let ftimes: Vec<f64> = candidates.into_iter().filter(|t| *t >= t_floor).collect();
        if ftimes.is_empty() {
            return Err(LeviError::AliasingRisk {
                t: times[times.len() - 1],
                t_min: t_floor,
            });
        }
        let fpoints = snap(&fgrid, &bases);
        let grid = fgrid;
        let frozen = frozen_bound_fit(&eval, &bases, &ftimes, &grid, Boundary::Periodic)?;
        out.insert("frozen_value".into(), frozen.value);
        out.insert("frozen_gradient".into(), frozen.gradient);
        out.insert("frozen_hessian".into(), frozen.hessian);
        out.insert("frozen_time_derivative".into(), frozen.time_derivative);
        let base_pairs: Vec<(Vec<f64>, Vec<f64>)> = (1..bases.len()).map(|i| (bases[i - 1].clone(), bases[i].clone())).collect();
        if !k.modulation.is_constant() {
            out.insert("frozen_holder".into(), frozen_holder_fit(&eval, &base_pairs, &ftimes, &grid, theta)?);
        }
        let gen = Generator::new(k.clone());
        out.insert("c_a".into(), generator_bound_fit(&gen, &eval, &bases[0], &ftimes, &grid, &fpoints)?);
        let grid = *self.grid();
        let family = self.engine.prop.family();
        if !k.modulation.is_constant() {
            out.insert("cancellation".into(), cancellation_fit(family, &times, &self.fit_rows, theta));
            let eta = k.modulation.eta;
            let mut c_phi: f64 = 0.0;
            let mut c_psi: f64 = 0.0;
            let cols = self.columns.clone();
            for &t in &times {
                let phi = self.engine.phi(t, Layout::Columns, &self.fit_rows);
                c_phi = c_phi.max(phi_block_ratio(&grid, &self.fit_rows, &phi, maj, eta, t));
            }
            self.series()?;
            let s = self.series.as_ref().expect("built");
            for &t in &times {
                let psi = self.engine.psi_at(s, t);
                c_psi = c_psi.max(psi_block_ratio(&grid, &cols, &psi, &k, theta, t));
            }
            out.insert("c_phi".into(), c_phi);
            out.insert("c_psi".into(), c_psi);
            // below the window the sup norms are capped by the grid spacing
            out.insert("c1".into(), fit_c1(&s.term_norms, &self.exp.mesh, self.engine.gain(), s.fit.c2, &nodes));
            out.insert("c2".into(), s.fit.c2);
        }
        Ok(out)
    }

    pub fn check_initial_condition(&mut self) -> Result<(Vec<CheckOutcome>, Vec<f64>)> {
        let s = &self.exp.sampling;
        let (center, w) = (s.bump_center.clone(), s.bump_half_width);
        let grid = *self.grid();
        let f: Vec<f64> = (0..grid.len())
            .map(|i| {
                let d = grid.displacement(&grid.point(i), &center);
                let r2 = d.iter().map(|v| v * v).sum::<f64>() / (w * w);
                if r2 < 1.0 {
                    (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let fr: Vec<f64> = self.rows.iter().map(|i| f[*i]).collect();
        let cell = grid.cell();
        let mut errors = Vec::new();
        for t in s.initial_times.clone() {
            let p = self.p_rows(t)?;
            let u = p.dot(&ndarray::ArrayView1::from(&f)) * cell;
            errors.push(u.iter().zip(&fr).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / sup);
        }
        let rises = errors.windows(2).filter(|w| !(w[1] < w[0])).count();
        let last = *errors.last().unwrap_or(&f64::NAN);
        let tol = self.exp.tolerances.initial_condition;
        Ok((
            vec![
                CheckOutcome::at_most("initial_condition_monotone", rises as f64, 0.0)
                    .with_note(format!("relative errors {:?} at t = {:?}", errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(), self.exp.sampling.initial_times)),
                CheckOutcome::at_most("initial_condition", last, tol),
            ],
            errors,
        ))
    }

    /// p at the export times on rows × all columns.
    pub fn export_fields(&mut self) -> Result<Vec<FieldSlice>> {
        let mut out = Vec::new();
        let all: Vec<usize> = (0..self.grid().len()).collect();
        for t in self.exp.sampling.export_times.clone() {
            out.push(FieldSlice {
                name: "p".into(),
                t,
                rows: self.rows.clone(),
                columns: all.clone(),
                values: self.p_rows(t)?,
            });
        }
        Ok(out)
    }

    /// Runs every requested check.
    pub fn evaluate(&mut self) -> Result<Outputs> {
        let mut report = ValidationReport::new(self.exp.metadata());
        let checks = self.exp.checks.clone();
        for c in &checks {
            log::info!("check {c:?}");
            match c {
                Check::Degeneration => report.push(self.check_degeneration()?),
                Check::Mass => report.push(self.check_mass()?),
                Check::Nonnegativity => report.push(self.check_nonnegativity()?),
                Check::ChapmanKolmogorov => report.push(self.check_chapman_kolmogorov()?),
                Check::PdeResidual => report.push(self.check_pde_residual()?),
                Check::CrossMethod => report.push(self.check_cross_method()?),
                Check::MeshHalving => report.push(self.check_mesh_halving()?.0),
                Check::SeriesDecay => report.push(self.check_series_decay()?),
                Check::Subconvolution => {
                    let (outs, [c_g, c_h]) = self.check_subconvolution()?;
                    outs.into_iter().for_each(|o| report.push(o));
                    if c_h.is_finite() {
                        report.constants.c_h = Some(c_h);
                        report.constants.extra.insert("c_g".into(), c_g);
                    }
                }
                Check::BoundFits => {
                    let fits = self.bound_fits(&default_rate_grid())?;
                    record_constants(&mut report, &fits);
                    if checks.contains(&Check::Refinement) {
                        for o in self.refinement_study(&fits)? {
                            report.push(o);
                        }
                    }
                }
                Check::Refinement => {
                    if !checks.contains(&Check::BoundFits) {
                        report.push(CheckOutcome::failed("refinement", self.exp.tolerances.fit_stability, "needs bound_fits"));
                    }
                }
                Check::InitialCondition => {
                    let (outs, _) = self.check_initial_condition()?;
                    outs.into_iter().for_each(|o| report.push(o));
                }
            }
        }
        if let Some(s) = &self.series {
            report.metadata.notes.push(format!("series: {} terms, tail bound {:.3e}", s.terms_used, s.tail_bound));
        }
        if let Some(d) = &self.duhamel {
            report.metadata.notes.push(format!("Volterra: max amplification {:.4}", d.max_amplification));
        }
        report.finalize();
        let fields = self.export_fields()?;
        Ok(Outputs { report, fields })
    }

    /// Fits on the ×2 refined grid compared with `coarse`.
    pub fn refinement_study(&self, coarse: &BTreeMap<String, f64>) -> Result<Vec<CheckOutcome>> {
        let tol = self.exp.tolerances.fit_stability;
        let mut fine = Run::new(self.exp.refined())?;
        let rate = coarse.get("upper_rate").copied().unwrap_or(0.0);
        let fits = fine.bound_fits(&[rate])?;
        let mut out = Vec::new();
        for (name, a) in coarse {
            if name == "upper_rate" {
                continue;
            }
            let Some(b) = fits.get(name) else { continue };
            out.push(match refinement_stability(name, *a, *b, tol) {
                Ok(s) => CheckOutcome::at_most(format!("refinement:{name}"), s.relative_change, tol)
                    .with_note(format!("{a:.4e} → {b:.4e}")),
                Err(e) => CheckOutcome::failed(format!("refinement:{name}"), tol, e.to_string()),
            });
        }
        Ok(out)
    }
}

/// Files named constants into the report's fixed slots and `extra`.
pub fn record_constants(report: &mut ValidationReport, fits: &BTreeMap<String, f64>) {
    let c = &mut report.constants;
    for (name, v) in fits {
        let v = *v;
        match name.as_str() {
            "upper_c" => c.upper_c = Some(v),
            "upper_rate" => c.upper_rate = Some(v),
            "c_phi" => c.c_phi = Some(v),
            "c1" => c.c1 = Some(v),
            "c2" => c.c2 = Some(v),
            "c_a" => c.c_a = Some(v),
            _ => {
                c.extra.insert(name.clone(), v);
            }
        }
    }
}

/// Blocks of the construction for callers that need them directly.
pub fn zero_order_rows(run: &Run, t: f64) -> Array2<f64> {
    run.engine.prop.block(Which::P0, t, Layout::Rows, &run.rows)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::levy_kernel::{Modulation, StableParams};
    use crate::spectral_measure::SpectralMeasure;

    fn experiment(a: f64, checks: &[Check]) -> Experiment {
        let mu = SpectralMeasure::from_pairs(1, &[(vec![1.0], 1.0 / PI), (vec![-1.0], 1.0 / PI)]).unwrap();
        let m = if a == 0.0 {
            Modulation::constant()
        } else {
            Modulation::cosine(a, vec![PI / 10.0], vec![1.0, 1.0]).unwrap()
        };
        let kernel = JumpKernel::new(mu, StableParams::new(1.0, 1.0, 1, 2.0).unwrap(), m).unwrap();
        let controls = SeriesControls::defaults_for(&kernel);
        Experiment {
            grid: SpatialGrid::new(1, 10.0, 64).unwrap(),
            mesh: TimeMesh::new(1.0, 16, kernel.alpha() / controls.theta).unwrap(),
            controls,
            kernel,
            method: Method::Dense,
            checks: checks.iter().copied().collect(),
            tolerances: Tolerances::default(),
            sampling: Sampling {
                export_times: vec![1.0],
                ..Sampling::default()
            },
            frozen_refinements: 0,
        }
    }

    #[test]
    fn constant_coefficients_pass_degeneration_and_mass() {
        let e = experiment(0.0, &[Check::Degeneration, Check::Mass, Check::ChapmanKolmogorov]);
        let out = Run::new(e).unwrap().evaluate().unwrap();
        assert!(out.report.passed, "{:#?}", out.report.checks);
        assert!(out.report.check("degeneration").unwrap().value < 1e-12);
        assert_eq!(out.fields.len(), 1);
        assert_eq!(out.fields[0].values.dim(), (64, 64));
    }

    #[test]
    fn cosine_run_reports_constants() {
        let e = experiment(0.3, &[Check::Mass, Check::CrossMethod, Check::BoundFits, Check::Subconvolution]);
        let out = Run::new(e).unwrap().evaluate().unwrap();
        let c = &out.report.constants;
        assert!(c.upper_c.is_some() && c.c_phi.is_some() && c.c2.is_some() && c.c_h.is_some(), "{c:?}");
        assert!(c.non_finite().is_empty(), "{c:?}");
        assert!(out.report.check("mass").unwrap().passed);
    }

    #[test]
    fn rejects_bad_sampling() {
        let mut e = experiment(0.3, &[Check::Mass]);
        e.sampling.mass_times = vec![2.0];
        assert!(matches!(Run::new(e).err(), Some(LeviError::InvalidParams { .. })));
        let mut e = experiment(0.3, &[Check::Mass]);
        e.sampling.columns = vec![vec![11.0]];
        assert!(Run::new(e).is_err());
    }

    #[test]
    fn refined_and_coarsened_keep_the_fit_rows() {
        let e = experiment(0.3, &[]);
        assert_eq!(e.refined().grid.n(), 128);
        assert_eq!(e.coarsened().mesh.nodes, 8);
        assert_eq!(e.refined().sampling.rows.as_ref().unwrap().len(), 5);
    }
}
