//! The two constructions of the heat kernel.
//!
//! Series (column layout): Ψ = Σ_{k≥1} Φ^{⊠k} with Φ^{⊠(k+1)} = Φ ⊠ Φ^{⊠k},
//! then p = p⁰ + p⁰ ⊠ Ψ. Only the remainder S = Σ_{k≥2} Φ^{⊠k} is stored on
//! the mesh; Φ itself is always evaluated exactly.
//!
//! Volterra (row layout): r = p − p⁰ solves r = p⁰ ⊠ Φ + r ⊠ Φ, marched over
//! the mesh with a Picard iteration at each node for the part of the time
//! integral that reaches back into the current interval.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{LeviError, Result};
use crate::levy_kernel::JumpKernel;

use super::boxtimes::ProductRule;
use super::mesh::{sup_norm, SeriesControls, StoredField, TimeMesh};
use super::propagator::{Layout, Propagator, Which};

pub struct Parametrix<P: Propagator> {
    pub prop: P,
    pub mesh: TimeMesh,
    pub controls: SeriesControls,
    pub alpha: f64,
    rule: ProductRule,
}

/// Ψ in column layout for a set of base points y.
#[derive(Debug, Clone)]
pub struct PsiSeries {
    pub probes: Vec<usize>,
    /// Σ_{k≥2} Φ^{⊠k} on the mesh.
    pub remainder: StoredField,
    pub terms_used: usize,
    pub tail_bound: f64,
    /// sup |Φ^{⊠k}(t_j)| over the block, indexed [k − 1][j − 1].
    pub term_norms: Vec<Vec<f64>>,
    pub fit: SeriesFit,
}

/// C₁, C₂ of the term bound C₁ C₂^k t^{−1+kθ/α}/Γ(kθ/α).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub c1: f64,
    pub c2: f64,
}

/// r = p − p⁰ in row layout for a set of x points.
#[derive(Debug, Clone)]
pub struct Duhamel {
    pub probes: Vec<usize>,
    pub remainder: StoredField,
    pub picard_iterations: Vec<usize>,
    pub max_amplification: f64,
}

impl<P: Propagator> Parametrix<P> {
    pub fn new(prop: P, kernel: &JumpKernel, mesh: TimeMesh, controls: SeriesControls) -> Result<Self> {
        controls.validate(kernel)?;
        let alpha = kernel.alpha();
        let rule = ProductRule::new(controls.quad_nodes, alpha / controls.theta);
        Ok(Self {
            prop,
            mesh,
            controls,
            alpha,
            rule,
        })
    }

    /// θ/α, the exponent gained per ⊠.
    pub fn gain(&self) -> f64 {
        self.controls.theta / self.alpha
    }

    pub fn rule(&self) -> &ProductRule {
        &self.rule
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t > 0.0 && t <= self.mesh.horizon * (1.0 + 1e-12)) {
            return Err(LeviError::InvalidParams {
                name: "t",
                reason: format!("time {t} outside (0, {}]", self.mesh.horizon),
            });
        }
        Ok(())
    }

    pub fn zero_order(&self, t: f64, layout: Layout, probes: &[usize]) -> Array2<f64> {
        self.prop.block(Which::P0, t, layout, probes)
    }

    pub fn phi(&self, t: f64, layout: Layout, probes: &[usize]) -> Array2<f64> {
        self.prop.block(Which::Phi, t, layout, probes)
    }

    /// Builds Φ^{⊠k}, k ≥ 2, until the fitted tail bound drops below ε_tail.
    pub fn psi_series(&self, probes: &[usize]) -> Result<PsiSeries> {
        let m = self.mesh.nodes;
        let g = self.gain();
        let n1: Vec<f64> = (1..=m)
            .map(|j| sup_norm(&self.phi(self.mesh.time(j), Layout::Columns, probes)))
            .collect();
        let shape = (probes.len(), self.prop.grid().len());
        let mut remainder = StoredField::new(self.mesh, (1.0 - 2.0 * g).max(0.0));
        for _ in 0..m {
            remainder.push(Array2::zeros(shape));
        }
        let mut norms = vec![n1];
        let top = norms[0].iter().fold(0.0f64, |a, b| a.max(*b));
        if top <= self.controls.eps_quad {
            return Ok(PsiSeries {
                probes: probes.to_vec(),
                remainder,
                terms_used: 1,
                tail_bound: 0.0,
                term_norms: norms,
                fit: SeriesFit { c1: 0.0, c2: 0.0 },
            });
        }
        let mut prev: Option<StoredField> = None;
        let mut last_tail = f64::INFINITY;
        for k in 2..=self.controls.k_max {
            let mut term = StoredField::new(self.mesh, (1.0 - k as f64 * g).max(0.0));
            for j in 1..=m {
                let t = self.mesh.time(j);
                let v = self.rule.integrate(t, |l, r| {
                    let right = match &prev {
                        None => self.phi(r, Layout::Columns, probes),
                        Some(f) => f.at(r),
                    };
                    Ok(self.prop.apply(Which::Phi, l, Layout::Columns, &right))
                })?;
                remainder.add_assign_node(j, &v);
                term.push(v);
            }
            norms.push((1..=m).map(|j| term.sup_norm_at_node(j)).collect());
            prev = Some(term);
            log::debug!("series term {k}: sup at T = {:e}", norms[k - 1][m - 1]);
            if k >= 3.max(self.controls.min_terms) {
                let fit = fit_series_constants(&norms, &self.mesh, g);
                last_tail = series_tail_bound(fit, &self.mesh, g, k);
                if last_tail < self.controls.eps_tail {
                    return Ok(PsiSeries {
                        probes: probes.to_vec(),
                        remainder,
                        terms_used: k,
                        tail_bound: last_tail,
                        term_norms: norms,
                        fit,
                    });
                }
            }
        }
        Err(LeviError::TailNotConverged {
            terms: self.controls.k_max,
            tail: last_tail,
            tol: self.controls.eps_tail,
        })
    }

    /// Ψ(t) for the series' probes.
    pub fn psi_at(&self, series: &PsiSeries, t: f64) -> Array2<f64> {
        let mut v = self.phi(t, Layout::Columns, &series.probes);
        v += &series.remainder.at(t);
        v
    }

    /// p(t) = p⁰(t) + (p⁰ ⊠ Ψ)(t) in column layout.
    pub fn assemble_heat_kernel(&self, series: &PsiSeries, t: f64) -> Result<Array2<f64>> {
        self.check_time(t)?;
        let mut p = self.zero_order(t, Layout::Columns, &series.probes);
        if series.term_norms[0].iter().all(|v| *v <= self.controls.eps_quad) {
            return Ok(p);
        }
        let corr = self.rule.integrate(t, |l, r| {
            let psi = self.psi_at(series, r);
            Ok(self.prop.apply(Which::P0, l, Layout::Columns, &psi))
        })?;
        p += &corr;
        Ok(p)
    }

    /// (p⁰ ⊠ Φ)(t) in row layout.
    fn forcing(&self, t: f64, probes: &[usize]) -> Result<Array2<f64>> {
        self.rule.integrate(t, |l, r| {
            let p0 = self.zero_order(l, Layout::Rows, probes);
            Ok(self.prop.apply(Which::Phi, r, Layout::Rows, &p0))
        })
    }

    /// Marches r = p⁰ ⊠ Φ + r ⊠ Φ over the mesh.
    pub fn duhamel_solve(&self, probes: &[usize]) -> Result<Duhamel> {
        let m = self.mesh.nodes;
        let shape = (probes.len(), self.prop.grid().len());
        let mut r = StoredField::new(self.mesh, 0.0);
        let mut iterations = Vec::with_capacity(m);
        let mut max_amp: f64 = 0.0;
        let trivial = (1..=m).all(|j| sup_norm(&self.phi(self.mesh.time(j), Layout::Rows, probes)) <= self.controls.eps_quad);
        if trivial {
            for _ in 0..m {
                r.push(Array2::zeros(shape));
            }
            return Ok(Duhamel {
                probes: probes.to_vec(),
                remainder: r,
                picard_iterations: vec![0; m],
                max_amplification: 0.0,
            });
        }
        for j in 1..=m {
            let t = self.mesh.time(j);
            let t_prev = if j == 1 { 0.0 } else { self.mesh.time(j - 1) };
            let forcing = self.forcing(t, probes)?;
            let nodes: Vec<_> = self.rule.nodes(t).into_iter().flatten().collect();
            let (fixed, implicit): (Vec<_>, Vec<_>) = nodes.into_iter().partition(|n| j > 1 && n.left <= t_prev);
            let mut base = forcing.clone();
            for n in &fixed {
                base.scaled_add(n.weight, &self.prop.apply(Which::Phi, n.right, Layout::Rows, &r.at(n.left)));
            }
            let guess = if j == 1 { forcing.clone() } else { r.node(j - 1) };
            r.push(guess);
            let mut prev_diff = f64::INFINITY;
            let mut converged = false;
            let mut it = 0;
            while it < 60 {
                it += 1;
                let mut next = base.clone();
                for n in &implicit {
                    next.scaled_add(n.weight, &self.prop.apply(Which::Phi, n.right, Layout::Rows, &r.at(n.left)));
                }
                let diff = sup_norm(&(&next - &r.node(j)));
                let scale = sup_norm(&next).max(1e-300);
                r.set_last(next);
                if diff <= self.controls.picard_tol * scale {
                    converged = true;
                    break;
                }
                if it >= 3 && diff > prev_diff {
                    return Err(LeviError::MarchingInstability {
                        node: j,
                        factor: diff / prev_diff,
                    });
                }
                prev_diff = diff;
            }
            if !converged {
                return Err(LeviError::MarchingInstability { node: j, factor: 1.0 });
            }
            iterations.push(it);
            let now = r.sup_norm_at_node(j);
            let before = if j == 1 { 0.0 } else { r.sup_norm_at_node(j - 1) };
            let amp = now / before.max(sup_norm(&forcing)).max(1e-300);
            max_amp = max_amp.max(amp);
            if amp > self.controls.amplification {
                return Err(LeviError::MarchingInstability { node: j, factor: amp });
            }
        }
        Ok(Duhamel {
            probes: probes.to_vec(),
            remainder: r,
            picard_iterations: iterations,
            max_amplification: max_amp,
        })
    }

    /// p(t) = p⁰(t) + r(t) in row layout; off the mesh, r(t) is recomputed
    /// from the Volterra equation with the stored r on the right-hand side.
    pub fn duhamel_at(&self, sol: &Duhamel, t: f64) -> Result<Array2<f64>> {
        self.check_time(t)?;
        let mut p = self.zero_order(t, Layout::Rows, &sol.probes);
        if let Some(j) = self.mesh.node_of(t) {
            p += &sol.remainder.node(j);
            return Ok(p);
        }
        if sol.remainder.sup_norm_at_node(self.mesh.nodes) == 0.0 {
            return Ok(p);
        }
        p += &self.forcing(t, &sol.probes)?;
        let rest = self
            .rule
            .integrate(t, |l, r| Ok(self.prop.apply(Which::Phi, r, Layout::Rows, &sol.remainder.at(l))))?;
        p += &rest;
        Ok(p)
    }
}

/// C₂ = max_k ρ_k / r_k over measured term ratios ρ_k at the horizon, with
/// r_k = T^{θ/α} Γ(kθ/α)/Γ((k+1)θ/α); then C₁ as the least constant making
/// every measured norm satisfy the term bound.
pub fn fit_series_constants(norms: &[Vec<f64>], mesh: &TimeMesh, gain: f64) -> SeriesFit {
    let m = mesh.nodes;
    let big_t = mesh.horizon;
    let mut c2: f64 = 0.0;
    for k in 1..norms.len() {
        let (a, b) = (norms[k - 1][m - 1], norms[k][m - 1]);
        if a > 0.0 && b > 0.0 {
            c2 = c2.max(b / a / predicted_ratio(k, big_t, gain));
        }
    }
    let all: Vec<usize> = (1..=m).collect();
    let c1 = fit_c1(norms, mesh, gain, c2, &all);
    SeriesFit { c1, c2 }
}

/// Least C₁ making the term bound hold at the listed mesh nodes (1-based).
pub fn fit_c1(norms: &[Vec<f64>], mesh: &TimeMesh, gain: f64, c2: f64, nodes: &[usize]) -> f64 {
    let mut c1: f64 = 0.0;
    if c2 > 0.0 {
        for (k0, row) in norms.iter().enumerate() {
            let k = (k0 + 1) as f64;
            for &j in nodes {
                let t = mesh.time(j);
                let ln_bound = k * c2.ln() + (-1.0 + k * gain) * t.ln() - ln_gamma(k * gain);
                c1 = c1.max(row[j - 1] / ln_bound.exp());
            }
        }
    }
    c1
}

/// C₂-free shape t^{θ/α} Γ(kθ/α)/Γ((k+1)θ/α) of ‖Φ^{⊠(k+1)}‖/‖Φ^{⊠k}‖.
pub fn predicted_ratio(k: usize, t: f64, gain: f64) -> f64 {
    let k = k as f64;
    (gain * t.ln() + ln_gamma(k * gain) - ln_gamma((k + 1.0) * gain)).exp()
}

/// max over mesh times of Σ_{m>K} C₁ C₂^m t^{−1+mθ/α}/Γ(mθ/α).
pub fn series_tail_bound(fit: SeriesFit, mesh: &TimeMesh, gain: f64, k: usize) -> f64 {
    if fit.c1 == 0.0 || fit.c2 == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for t in mesh.times() {
        let mut sum = 0.0;
        let mut peaked = false;
        let mut prev = 0.0;
        for m in (k + 1)..(k + 2000) {
            let mf = m as f64;
            let v = (fit.c1.ln() + mf * fit.c2.ln() + (-1.0 + mf * gain) * t.ln() - ln_gamma(mf * gain)).exp();
            sum += v;
            if v < prev {
                peaked = true;
            }
            if peaked && v < 1e-18 * sum {
                break;
            }
            prev = v;
        }
        worst = worst.max(sum);
    }
    worst
}
