//! Crowd dynamics: nonlocal velocity field and the upwind finite-volume
//! update of the density.

use rayon::prelude::*;
use serde::Serialize;

use crate::eikonal::{desired_velocity, solve_eikonal, EikonalProblem};
use crate::error::{Error, Result};
use crate::grid::{total_mass, CellLabel, Grid, ScalarField, VectorField};
use crate::scenario::Scenario;
use crate::vec2::Vec2;
use crate::visibility::{build_stencils, SensoryStencil};

/// Time-independent fields derived from a scenario.
#[derive(Clone, Debug)]
pub struct StaticFields {
    /// Distance to the exits.
    pub phi: ScalarField,
    /// Distance to the obstacles (walls included).
    pub phi_obs: ScalarField,
    pub vdes: VectorField,
    pub stencil: SensoryStencil,
}

impl StaticFields {
    pub fn compute(scenario: &Scenario) -> Result<Self> {
        let grid = scenario.grid();
        let p = scenario.params();
        let phi = solve_eikonal(&EikonalProblem::exit_distance(grid)?)?;
        let phi_obs = solve_eikonal(&EikonalProblem::obstacle_distance(grid)?)?;
        let vdes = desired_velocity(&phi, grid)?;
        let stencil = build_stencils(grid, &vdes, p.r, p.eps, p.opaque);
        Ok(StaticFields { phi, phi_obs, vdes, stencil })
    }
}

/// `V^int(x) = -C_rep * sum_y (y - x) / |y - x|^2 * rho(y) * h^2` over the
/// stencil of `x`.
pub fn interaction_velocity(grid: &Grid, rho: &ScalarField, stencil: &SensoryStencil, c_rep: f64) -> VectorField {
    let n = grid.n() as isize;
    let values = rho.values();
    let mut out = VectorField::zeros(grid);
    out.values_mut().par_iter_mut().enumerate().for_each(|(c, v)| {
        let base = c as isize;
        let mut acc = Vec2::ZERO;
        for o in stencil.cell(c) {
            let target = (base + o.dj as isize * n + o.di as isize) as usize;
            let r = values[target];
            if r != 0.0 {
                acc += o.weight * r;
            }
        }
        *v = acc * -c_rep;
    });
    out
}

/// Obstacle blending weight: 1 on obstacles, falling linearly to 0 at
/// distance `cutoff`.
#[inline]
pub fn blend_weight(dist_to_obstacle: f64, cutoff: f64) -> f64 {
    (1.0 - dist_to_obstacle / cutoff).max(0.0)
}

/// Velocity of one walkable cell. Near obstacles the interaction only
/// modulates the speed along `vdes`; away from them it is added.
#[inline]
pub fn blend_velocity(vdes: Vec2, vint: Vec2, lambda: f64) -> Vec2 {
    let s = (1.0 + vdes.dot(vint)).max(0.0);
    vdes * (lambda * s) + (vdes + vint) * (1.0 - lambda)
}

/// Total velocity field. Exit cells move with the desired velocity, blocked
/// cells are at rest.
pub fn total_velocity(grid: &Grid, fields: &StaticFields, vint: &VectorField, cutoff: f64) -> VectorField {
    let labels = grid.labels();
    let vdes = fields.vdes.values();
    let dist = fields.phi_obs.values();
    let vi = vint.values();
    let mut out = VectorField::zeros(grid);
    out.values_mut().par_iter_mut().enumerate().for_each(|(c, v)| {
        *v = match labels[c] {
            CellLabel::Free | CellLabel::Entrance => blend_velocity(vdes[c], vi[c], blend_weight(dist[c], cutoff)),
            CellLabel::Exit => vdes[c],
            CellLabel::Obstacle | CellLabel::Wall => Vec2::ZERO,
        };
    });
    out
}

/// Largest total outgoing face speed over walkable cells. A step is stable
/// when `dt * rate <= h`.
pub fn max_outflow_rate(grid: &Grid, v: &VectorField) -> f64 {
    let n = grid.n();
    let labels = grid.labels();
    let vals = v.values();
    let open = |c: usize| !labels[c].is_blocked();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let c = j * n + i;
            if !labels[c].is_walkable() {
                continue;
            }
            let mut rate = 0.0;
            if i + 1 < n && open(c + 1) {
                rate += (0.5 * (vals[c].x + vals[c + 1].x)).max(0.0);
            }
            if i > 0 && open(c - 1) {
                rate += (-0.5 * (vals[c].x + vals[c - 1].x)).max(0.0);
            }
            if j + 1 < n && open(c + n) {
                rate += (0.5 * (vals[c].y + vals[c + n].y)).max(0.0);
            }
            if j > 0 && open(c - n) {
                rate += (-0.5 * (vals[c].y + vals[c - n].y)).max(0.0);
            }
            worst = worst.max(rate);
        }
    }
    worst
}

/// Bookkeeping of one density update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Mass removed by clipping negative densities.
    pub clipped: f64,
}

/// One conservative upwind step of length `dt` with cell velocities `v`.
///
/// Mass entering an exit cell is added to `outflow[door]` and removed. Steps
/// longer than the stability limit are rejected.
pub fn step_density(
    grid: &Grid,
    rho: &mut ScalarField,
    v: &VectorField,
    dt: f64,
    outflow: &mut [f64],
) -> Result<StepReport> {
    let n = grid.n();
    let h = grid.h();
    let rate = max_outflow_rate(grid, v);
    let limit = if rate > 0.0 { h / rate } else { f64::INFINITY };
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }

    let labels = grid.labels();
    let vals = v.values();
    let old = rho.values().to_vec();
    let new = rho.values_mut();
    let k = dt / h;
    let mut face = |a: usize, b: usize, u: f64| {
        let f = old[a] * u.max(0.0) + old[b] * u.min(0.0);
        if f == 0.0 {
            return;
        }
        new[a] -= k * f;
        new[b] += k * f;
        if f > 0.0 {
            if let Some(e) = grid.exit_of(b) {
                outflow[e] += f * dt * h;
            }
        } else if let Some(e) = grid.exit_of(a) {
            outflow[e] -= f * dt * h;
        }
    };
    for j in 0..n {
        for i in 0..n {
            let a = j * n + i;
            if labels[a].is_blocked() {
                continue;
            }
            if i + 1 < n && !labels[a + 1].is_blocked() {
                face(a, a + 1, 0.5 * (vals[a].x + vals[a + 1].x));
            }
            if j + 1 < n && !labels[a + n].is_blocked() {
                face(a, a + n, 0.5 * (vals[a].y + vals[a + n].y));
            }
        }
    }

    let mut report = StepReport::default();
    let cell_area = h * h;
    for (r, l) in new.iter_mut().zip(labels) {
        if !l.is_walkable() {
            *r = 0.0;
        } else if *r < 0.0 {
            report.clipped -= *r * cell_area;
            *r = 0.0;
        }
    }
    Ok(report)
}

/// Stable step for velocity field `v`: `cfl_factor` of the limit, never
/// longer than `cfl_factor * h` (the limit for unit speed).
pub fn stable_dt(grid: &Grid, v: &VectorField, cfl_factor: f64) -> f64 {
    cfl_factor * grid.h() / max_outflow_rate(grid, v).max(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Evacuated { time: f64 },
    Timeout { time: f64, remaining_mass: f64 },
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub rho: ScalarField,
}

#[derive(Clone, Debug)]
pub struct EvacuationResult {
    pub outcome: Outcome,
    /// `(t, total mass)` before every step and at the end.
    pub mass_history: Vec<(f64, f64)>,
    /// Mass that left through each door, in door order.
    pub exit_outflow: Vec<f64>,
    pub steps: usize,
    /// Mass removed by clipping negative densities, summed over all steps.
    pub clipped_mass: f64,
    pub snapshots: Vec<Snapshot>,
}

impl EvacuationResult {
    pub fn evacuation_time(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Evacuated { time } => Some(time),
            Outcome::Timeout { .. } => None,
        }
    }

    /// Evacuation time, or `t_max` plus the mass left inside on timeout.
    pub fn objective(&self) -> f64 {
        match self.outcome {
            Outcome::Evacuated { time } => time,
            Outcome::Timeout { time, remaining_mass } => time + remaining_mass,
        }
    }

    /// Share of the evacuated mass that left through door `k`.
    pub fn exit_share(&self, k: usize) -> f64 {
        let total: f64 = self.exit_outflow.iter().sum();
        if total > 0.0 {
            self.exit_outflow[k] / total
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub record_history: bool,
    /// Times at which to keep a copy of the density: the first state at or
    /// after each time is stored.
    pub snapshot_times: Vec<f64>,
}

/// Time stepper owning the evolving density.
#[derive(Debug)]
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    fields: StaticFields,
    rho: ScalarField,
    t: f64,
    steps: usize,
    outflow: Vec<f64>,
    clipped: f64,
    warned_entrance: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let fields = StaticFields::compute(scenario)?;
        Ok(Self::with_fields(scenario, fields))
    }

    pub fn with_fields(scenario: &'a Scenario, fields: StaticFields) -> Self {
        let mut sim = Simulation {
            scenario,
            fields,
            rho: scenario.initial_density().clone(),
            t: 0.0,
            steps: 0,
            outflow: vec![0.0; scenario.grid().exit_count()],
            clipped: 0.0,
            warned_entrance: false,
        };
        sim.impose_entrance();
        sim
    }

    pub fn fields(&self) -> &StaticFields {
        &self.fields
    }

    pub fn density(&self) -> &ScalarField {
        &self.rho
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn mass(&self) -> f64 {
        total_mass(&self.rho)
    }

    pub fn exit_outflow(&self) -> &[f64] {
        &self.outflow
    }

    /// Current total velocity field.
    pub fn velocity(&self) -> VectorField {
        let p = self.scenario.params();
        let grid = self.scenario.grid();
        let vint = interaction_velocity(grid, &self.rho, &self.fields.stencil, p.c_rep);
        total_velocity(grid, &self.fields, &vint, p.lambda_cutoff)
    }

    fn impose_entrance(&mut self) {
        let grid = self.scenario.grid();
        let value = self.scenario.params().inflow_at(self.t);
        for (r, l) in self.rho.values_mut().iter_mut().zip(grid.labels()) {
            if *l == CellLabel::Entrance {
                if *r > value + 1e-12 && value > 0.0 && !self.warned_entrance {
                    log::debug!("entrance density {r} above the imposed inflow {value}; overwritten");
                    self.warned_entrance = true;
                }
                *r = value;
            }
        }
    }

    /// Advances one step and re-imposes the entrance density. Returns `dt`.
    pub fn advance(&mut self) -> Result<f64> {
        let grid = self.scenario.grid();
        let v = self.velocity();
        let dt = stable_dt(grid, &v, self.scenario.params().cfl_factor);
        let report = step_density(grid, &mut self.rho, &v, dt, &mut self.outflow)?;
        self.clipped += report.clipped;
        self.t += dt;
        self.steps += 1;
        self.impose_entrance();
        Ok(dt)
    }

    /// Runs until the room is empty (after the inflow stops) or `t_max`.
    pub fn run(mut self, options: &RunOptions) -> Result<EvacuationResult> {
        let p = *self.scenario.params();
        let mut pending: Vec<f64> = options.snapshot_times.clone();
        pending.sort_by(f64::total_cmp);
        pending.reverse();
        let mut snapshots = Vec::new();
        let mut history = Vec::new();
        let outcome = loop {
            let mass = self.mass();
            if options.record_history {
                history.push((self.t, mass));
            }
            while pending.last().is_some_and(|&s| self.t >= s) {
                pending.pop();
                snapshots.push(Snapshot { t: self.t, rho: self.rho.clone() });
            }
            if !p.inflow_active(self.t) && mass < p.mass_threshold {
                break Outcome::Evacuated { time: self.t };
            }
            if self.t >= p.t_max {
                break Outcome::Timeout { time: self.t, remaining_mass: mass };
            }
            self.advance()?;
        };
        Ok(EvacuationResult {
            outcome,
            mass_history: history,
            exit_outflow: self.outflow,
            steps: self.steps,
            clipped_mass: self.clipped,
            snapshots,
        })
    }
}

/// Simulates `scenario` from its initial density to evacuation or timeout.
pub fn run_simulation(scenario: &Scenario, options: &RunOptions) -> Result<EvacuationResult> {
    Simulation::new(scenario)?.run(options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Geometry, Opening, Side};
    use crate::scenario::{presets, ScenarioConfig};

    fn corridor(n: usize) -> Grid {
        build_grid(
            n,
            &Geometry {
                exits: vec![Opening::Segment { side: Side::Right, from: 0.0, to: 1.0 }],
                entrances: vec![],
                walls: vec![],
            },
        )
        .unwrap()
    }

    #[test]
    fn blend_limits() {
        let d = Vec2::new(1.0, 0.0);
        let i = Vec2::new(-0.5, 0.3);
        assert_eq!(blend_velocity(d, i, 0.0), d + i);
        assert_eq!(blend_velocity(d, i, 1.0), d * 0.5);
        // a strong opposing interaction stops the flow near obstacles
        assert_eq!(blend_velocity(d, Vec2::new(-3.0, 0.0), 1.0), Vec2::ZERO);
        assert_eq!(blend_weight(0.0, 0.03), 1.0);
        assert_eq!(blend_weight(0.06, 0.03), 0.0);
    }

    #[test]
    fn interaction_pushes_away_from_crowd_ahead() {
        let g = corridor(20);
        let vdes = VectorField::from_values(20, g.h(), vec![Vec2::new(1.0, 0.0); 400]);
        let stencil = build_stencils(&g, &vdes, 0.2, 0.05, true);
        let mut rho = ScalarField::zeros(&g);
        rho.set(12, 10, 1.0);
        let v = interaction_velocity(&g, &rho, &stencil, 2.0);
        let here = v.get(10, 10);
        // one cell at distance 2h straight ahead: -C * 2h / (2h)^2 * h^2
        let h = g.h();
        assert!((here.x + 2.0 * h * h / (2.0 * h)).abs() < 1e-12);
        assert_eq!(here.y, 0.0);
        // cells behind the crowd do not feel cells behind them
        assert_eq!(v.get(14, 10), Vec2::ZERO);
    }

    #[test]
    fn uniform_flow_moves_mass_into_exit() {
        let g = corridor(10);
        let mut rho = ScalarField::zeros(&g);
        rho.set(8, 5, 1.0);
        let v = VectorField::from_values(10, g.h(), vec![Vec2::new(1.0, 0.0); 100]);
        let mut out = vec![0.0];
        let dt = 0.5 * g.h();
        step_density(&g, &mut rho, &v, dt, &mut out).unwrap();
        assert!((rho.get(8, 5) - 0.5).abs() < 1e-15);
        assert_eq!(rho.get(9, 5), 0.0);
        assert!((out[0] - 0.5 * g.h() * g.h()).abs() < 1e-15);
    }

    #[test]
    fn oversized_step_rejected() {
        let g = corridor(10);
        let mut rho = ScalarField::zeros(&g);
        let v = VectorField::from_values(10, g.h(), vec![Vec2::new(1.0, 1.0); 100]);
        let mut out = vec![0.0];
        let err = step_density(&g, &mut rho, &v, g.h(), &mut out).unwrap_err();
        assert!(matches!(err, Error::Cfl { .. }));
        step_density(&g, &mut rho, &v, 0.5 * g.h(), &mut out).unwrap();
    }

    #[test]
    fn small_room_empties() {
        let mut cfg: ScenarioConfig = presets::load("test_B").unwrap();
        cfg.n = 30;
        let s = Scenario::from_config(&cfg).unwrap();
        let res = run_simulation(&s, &RunOptions { record_history: true, snapshot_times: vec![0.0, 1.0] }).unwrap();
        let t = res.evacuation_time().expect("room empties");
        assert!(t > 0.5 && t < 10.0, "{t}");
        assert_eq!(res.snapshots.len(), 2);
        let start = res.mass_history[0].1;
        let out: f64 = res.exit_outflow.iter().sum();
        let end = res.mass_history.last().unwrap().1;
        assert!((start - out - end - res.clipped_mass).abs() < 1e-10);
        for w in res.mass_history.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-15);
        }
    }
}
