//! Grid-convergence index and the parameter sensitivity sweep.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ConstraintSpec, ObstacleMode};
use crate::io::format_value;
use crate::optimizer::{pso_optimize, EvacuationObjective, PsoParams};
use crate::scenario::{Scenario, ScenarioConfig};

pub const DEFAULT_SAFETY_FACTOR: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GciReport {
    pub f_coarse: f64,
    pub f_medium: f64,
    pub f_fine: f64,
    pub ratio: f64,
    pub safety_factor: f64,
    /// Observed order of convergence; `None` when the two finest values agree.
    pub order: Option<f64>,
    /// Richardson extrapolation of the fine value.
    pub asymptotic: f64,
    pub apparent_uncertainty: f64,
    /// In percent of the fine value.
    pub percentage_uncertainty: f64,
    /// The three differences do not change sign.
    pub monotone: bool,
    pub converged_exactly: bool,
}

/// Grid-convergence index of three solutions on grids refined by `ratio`.
pub fn gci(f_coarse: f64, f_medium: f64, f_fine: f64, ratio: f64, safety_factor: f64) -> Result<GciReport> {
    if ![f_coarse, f_medium, f_fine, ratio, safety_factor].iter().all(|v| v.is_finite()) {
        return Err(Error::Argument("grid-convergence inputs must be finite".into()));
    }
    if !(ratio > 1.0) {
        return Err(Error::Argument(format!("refinement ratio must exceed 1, got {ratio}")));
    }
    if !(safety_factor > 0.0) {
        return Err(Error::Argument(format!("safety factor must be positive, got {safety_factor}")));
    }
    let e_fine = f_medium - f_fine;
    let e_coarse = f_coarse - f_medium;
    let base = GciReport {
        f_coarse,
        f_medium,
        f_fine,
        ratio,
        safety_factor,
        order: None,
        asymptotic: f_fine,
        apparent_uncertainty: 0.0,
        percentage_uncertainty: 0.0,
        monotone: e_fine * e_coarse >= 0.0,
        converged_exactly: false,
    };
    if e_fine == 0.0 {
        return Ok(GciReport { converged_exactly: true, ..base });
    }
    if e_coarse == 0.0 {
        return Err(Error::Degenerate("coarse and medium values coincide; the order is undefined".into()));
    }
    if f_fine == 0.0 {
        return Err(Error::Degenerate("relative uncertainty undefined for a zero fine value".into()));
    }
    let p = (e_coarse / e_fine).abs().ln() / ratio.ln();
    // p < 0 means the solutions drift apart under refinement; the magnitude
    // keeps the uncertainty positive
    let growth = ratio.powf(p) - 1.0;
    let denom = growth.abs();
    if denom == 0.0 {
        return Err(Error::Degenerate("equal successive differences give order zero".into()));
    }
    let percentage = safety_factor * (e_fine / f_fine).abs() / denom * 100.0;
    Ok(GciReport {
        order: Some(p),
        asymptotic: f_fine - e_fine / growth,
        apparent_uncertainty: percentage * f_fine.abs() / 100.0,
        percentage_uncertainty: percentage,
        ..base
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub rho_in: f64,
    pub c_rep: f64,
}

/// Thirteen points covering `rho_in` in [0.75, 1.5] and `C_rep` in [6, 18]:
/// a 3 x 3 lattice plus the centres of its four cells.
pub fn default_sweep_points() -> Vec<SweepPoint> {
    let mut out = Vec::with_capacity(13);
    for &rho_in in &[0.75, 1.125, 1.5] {
        for &c_rep in &[6.0, 12.0, 18.0] {
            out.push(SweepPoint { rho_in, c_rep });
        }
    }
    for &rho_in in &[0.9375, 1.3125] {
        for &c_rep in &[9.0, 15.0] {
            out.push(SweepPoint { rho_in, c_rep });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub baseline: Option<f64>,
    pub optimized: Option<f64>,
    pub best_design: Option<Vec<f64>>,
    pub error: Option<String>,
}

impl SweepRow {
    /// `100 (optimized - baseline) / baseline`.
    pub fn improvement_pct(&self) -> Option<f64> {
        match (self.baseline, self.optimized) {
            (Some(b), Some(o)) if b != 0.0 => Some(100.0 * (o - b) / b),
            _ => None,
        }
    }
}

pub const SWEEP_HEADER: [&str; 6] = ["rho_in", "C_rep", "baseline", "optimized", "improvement_pct", "error"];

pub fn sweep_rows(rows: &[SweepRow]) -> Vec<Vec<String>> {
    let opt = |v: Option<f64>| v.map(format_value).unwrap_or_default();
    rows.iter()
        .map(|r| {
            vec![
                format_value(r.point.rho_in),
                format_value(r.point.c_rep),
                opt(r.baseline),
                opt(r.optimized),
                opt(r.improvement_pct()),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

/// Baseline and optimized evacuation time at every `(rho_in, C_rep)` point.
/// A failing point is recorded with its error and the sweep goes on. With a
/// zero-generation budget no optimization is attempted.
pub fn sensitivity_sweep(
    template: &ScenarioConfig,
    points: &[SweepPoint],
    mode: ObstacleMode,
    spec: &ConstraintSpec,
    pso: &PsoParams,
    seed: u64,
) -> Vec<SweepRow> {
    points
        .par_iter()
        .map(|&point| {
            let mut row = SweepRow { point, baseline: None, optimized: None, best_design: None, error: None };
            if let Err(e) = sweep_point(template, &mut row, mode, spec, pso, seed) {
                row.error = Some(e.to_string());
            }
            row
        })
        .collect()
}

fn sweep_point(
    template: &ScenarioConfig,
    row: &mut SweepRow,
    mode: ObstacleMode,
    spec: &ConstraintSpec,
    pso: &PsoParams,
    seed: u64,
) -> Result<()> {
    let mut cfg = template.clone();
    cfg.rho_in = row.point.rho_in;
    cfg.c_rep = row.point.c_rep;
    let objective = EvacuationObjective::new(Scenario::from_config(&cfg)?, mode, *spec);
    let baseline = objective.baseline()?;
    row.baseline = Some(baseline);
    if pso.iterations == 0 {
        row.optimized = Some(baseline);
        return Ok(());
    }
    let result = pso_optimize(&objective, pso, seed)?;
    row.optimized = Some(result.best_value);
    row.best_design = Some(result.best_design);
    Ok(())
}
