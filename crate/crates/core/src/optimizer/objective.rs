use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::dynamics::{run_simulation, RunOptions};
use crate::error::{Error, Result};
use crate::geometry::{check_constraints, design_bounds, ConstraintSpec, ObstacleMode, Verdict};
use crate::scenario::Scenario;

/// A box-constrained black-box function with an extra feasibility test.
/// `evaluate` is only ever called on feasible points.
pub trait Objective: Sync {
    fn bounds(&self) -> &[(f64, f64)];
    fn is_feasible(&self, x: &[f64]) -> bool;
    fn evaluate(&self, x: &[f64]) -> Result<f64>;
}

/// Objective built from closures; the box is part of the feasible set.
pub struct FnObjective<F, G> {
    bounds: Vec<(f64, f64)>,
    f: F,
    feasible: G,
}

impl<F> FnObjective<F, fn(&[f64]) -> bool>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(bounds: Vec<(f64, f64)>, f: F) -> Self {
        fn always(_: &[f64]) -> bool {
            true
        }
        FnObjective { bounds, f, feasible: always }
    }
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> bool + Sync,
{
    pub fn with_constraint(bounds: Vec<(f64, f64)>, f: F, feasible: G) -> Self {
        FnObjective { bounds, f, feasible }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> bool + Sync,
{
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn is_feasible(&self, x: &[f64]) -> bool {
        super::in_box(x, &self.bounds) && (self.feasible)(x)
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

/// Evacuation time of a scenario with the obstacles drawn from a design
/// vector. Designs producing the same obstacle cells share one simulation.
pub struct EvacuationObjective {
    scenario: Scenario,
    mode: ObstacleMode,
    spec: ConstraintSpec,
    bounds: Vec<(f64, f64)>,
    by_design: Mutex<HashMap<Vec<u64>, f64>>,
    by_mask: Mutex<HashMap<Vec<usize>, f64>>,
    simulations: AtomicUsize,
}

impl EvacuationObjective {
    pub fn new(scenario: Scenario, mode: ObstacleMode, spec: ConstraintSpec) -> Self {
        let bounds = design_bounds(mode, scenario.grid(), &spec);
        EvacuationObjective {
            scenario,
            mode,
            spec,
            bounds,
            by_design: Mutex::new(HashMap::new()),
            by_mask: Mutex::new(HashMap::new()),
            simulations: AtomicUsize::new(0),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn mode(&self) -> ObstacleMode {
        self.mode
    }

    pub fn spec(&self) -> &ConstraintSpec {
        &self.spec
    }

    pub fn verdict(&self, x: &[f64]) -> Verdict {
        check_constraints(self.mode, &self.spec, self.scenario.grid(), x)
    }

    /// Simulations actually run (cache misses).
    pub fn simulations(&self) -> usize {
        self.simulations.load(Ordering::Relaxed)
    }

    /// Objective value of the room without optimized obstacles.
    pub fn baseline(&self) -> Result<f64> {
        self.value_of_mask(Vec::new())
    }

    /// Scenario with the obstacles of a feasible design.
    pub fn realize(&self, x: &[f64]) -> Result<Scenario> {
        let verdict = self.verdict(x);
        match verdict.cells {
            Some(cells) if verdict.violations.is_empty() => Ok(self.scenario.with_obstacle_cells(cells)),
            _ => Err(Error::Argument(format!("infeasible design: {:?}", verdict.violations))),
        }
    }

    fn value_of_mask(&self, cells: Vec<usize>) -> Result<f64> {
        if let Some(&v) = self.by_mask.lock().expect("cache poisoned").get(&cells) {
            return Ok(v);
        }
        let scenario = self.scenario.with_obstacle_cells(cells.iter().copied());
        let value = run_simulation(&scenario, &RunOptions::default())?.objective();
        self.simulations.fetch_add(1, Ordering::Relaxed);
        self.by_mask.lock().expect("cache poisoned").insert(cells, value);
        Ok(value)
    }
}

impl Objective for EvacuationObjective {
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn is_feasible(&self, x: &[f64]) -> bool {
        self.verdict(x).is_feasible()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(&v) = self.by_design.lock().expect("cache poisoned").get(&key) {
            return Ok(v);
        }
        let verdict = self.verdict(x);
        let cells = match verdict.cells {
            Some(cells) if verdict.violations.is_empty() => cells,
            _ => return Err(Error::Argument(format!("infeasible design passed to the simulator: {:?}", verdict.violations))),
        };
        let value = self.value_of_mask(cells)?;
        self.by_design.lock().expect("cache poisoned").insert(key, value);
        Ok(value)
    }
}
