//! Derivative-free minimization of the evacuation time over obstacle designs.

mod brute;
mod objective;
mod pattern;
mod pso;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

pub use brute::{brute_force_search, BruteForceParams};
pub use objective::{EvacuationObjective, FnObjective, Objective};
pub use pattern::{pattern_search, PatternParams};
pub use pso::{
    initialize_swarm, pso_optimize, pso_step, repair_feasibility, velocity_update, Particle, PsoParams, SwarmState,
};

/// Incumbent after one iteration (generation, round or poll).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Objective evaluations so far.
    pub evaluations: usize,
    pub best_value: f64,
    pub best_design: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best_design: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub trace: Vec<TraceRow>,
}

impl OptimizationResult {
    /// Trace as CSV rows: iteration, evaluations, best value, design values.
    pub fn trace_rows(&self) -> impl Iterator<Item = Vec<String>> + '_ {
        self.trace.iter().map(|r| {
            let mut row = vec![r.iteration.to_string(), r.evaluations.to_string(), crate::io::format_value(r.best_value)];
            row.extend(r.best_design.iter().map(|&v| crate::io::format_value(v)));
            row
        })
    }

    /// Evaluations spent until the incumbent first came within `target`.
    pub fn evaluations_to_reach(&self, target: f64) -> Option<usize> {
        self.trace.iter().find(|r| r.best_value <= target).map(|r| r.evaluations)
    }
}

pub const TRACE_HEADER: [&str; 4] = ["iteration", "evaluations", "best_value", "design..."];

/// Evaluates a batch of (feasible) designs in parallel, in input order.
pub(crate) fn evaluate_batch<O: Objective + ?Sized>(objective: &O, designs: &[Vec<f64>]) -> Result<Vec<f64>> {
    designs.par_iter().map(|x| objective.evaluate(x)).collect()
}

/// Uniform point in the box.
pub(crate) fn uniform_in<R: Rng>(rng: &mut R, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds.iter().map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo }).collect()
}

pub(crate) fn in_box(x: &[f64], bounds: &[(f64, f64)]) -> bool {
    x.len() == bounds.len() && x.iter().zip(bounds).all(|(&v, &(lo, hi))| v >= lo && v <= hi)
}
