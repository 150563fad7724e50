//! Scenario configuration (JSON) and its validated, immutable form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, Geometry, Grid, Opening, Rect, ScalarField};

pub const DEFAULT_LAMBDA_CUTOFF: f64 = 0.03;
pub const DEFAULT_CFL_FACTOR: f64 = 0.9;
pub const DEFAULT_MASS_THRESHOLD: f64 = 1e-5;
pub const DEFAULT_T_MAX: f64 = 50.0;

/// Initial density: `value` on the walkable cells whose centre lies in `rect`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityPatch {
    pub rect: Rect,
    pub value: f64,
}

/// On-disk scenario description. Unset optional keys take their documented
/// defaults when the scenario is resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    #[serde(default)]
    pub exits: Vec<Opening>,
    #[serde(default)]
    pub entrances: Vec<Opening>,
    #[serde(default)]
    pub walls: Vec<Rect>,
    #[serde(default)]
    pub rho_in: f64,
    #[serde(default)]
    pub t1: f64,
    #[serde(rename = "C_rep")]
    pub c_rep: f64,
    pub r: f64,
    /// Inner cutoff of the sensory region; one cell when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default = "default_lambda_cutoff")]
    pub lambda_cutoff: f64,
    #[serde(default = "default_cfl_factor")]
    pub cfl_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_bar: Option<DensityPatch>,
    #[serde(default = "default_mass_threshold")]
    pub mass_threshold: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    /// `false` lets pedestrians perceive each other through obstacles.
    #[serde(default = "default_opaque")]
    pub opaque: bool,
    /// Run settings of the front end, carried through untouched so a run
    /// manifest can be fed back as a configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

fn default_lambda_cutoff() -> f64 {
    DEFAULT_LAMBDA_CUTOFF
}
fn default_cfl_factor() -> f64 {
    DEFAULT_CFL_FACTOR
}
fn default_mass_threshold() -> f64 {
    DEFAULT_MASS_THRESHOLD
}
fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}
fn default_opaque() -> bool {
    true
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn geometry(&self) -> Geometry {
        Geometry { exits: self.exits.clone(), entrances: self.entrances.clone(), walls: self.walls.clone() }
    }

    /// Copy with every default made explicit.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        if c.eps.is_none() && c.n > 0 {
            c.eps = Some(1.0 / c.n as f64);
        }
        c
    }
}

/// Physical and numerical parameters of the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub c_rep: f64,
    pub r: f64,
    pub eps: f64,
    pub rho_in: f64,
    pub t1: f64,
    pub lambda_cutoff: f64,
    pub cfl_factor: f64,
    pub mass_threshold: f64,
    pub t_max: f64,
    pub opaque: bool,
}

impl ModelParams {
    /// Entrance density imposed at time `t`.
    #[inline]
    pub fn inflow_at(&self, t: f64) -> f64 {
        if t <= self.t1 {
            self.rho_in
        } else {
            0.0
        }
    }

    #[inline]
    pub fn inflow_active(&self, t: f64) -> bool {
        self.rho_in > 0.0 && t <= self.t1
    }
}

/// A validated scenario. Immutable; cheap to share across threads.
#[derive(Clone, Debug)]
pub struct Scenario {
    config: ScenarioConfig,
    grid: Grid,
    params: ModelParams,
    initial: ScalarField,
}

impl Scenario {
    /// Validates `config`, listing every violated field in the error.
    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        let config = config.resolved();
        let mut problems = Vec::new();
        let eps = config.eps.unwrap_or(0.0);
        if config.n < crate::grid::MIN_CELLS {
            problems.push(format!("n must be at least {}, got {}", crate::grid::MIN_CELLS, config.n));
        }
        if !(config.c_rep > 0.0) {
            problems.push(format!("C_rep must be positive, got {}", config.c_rep));
        }
        if !(eps > 0.0) {
            problems.push(format!("eps must be positive, got {eps}"));
        }
        if !(config.r > eps) {
            problems.push(format!("r must exceed eps, got r = {} and eps = {eps}", config.r));
        }
        if !(config.cfl_factor > 0.0 && config.cfl_factor <= 1.0) {
            problems.push(format!("cfl_factor must lie in (0, 1], got {}", config.cfl_factor));
        }
        if !(config.mass_threshold > 0.0) {
            problems.push(format!("mass_threshold must be positive, got {}", config.mass_threshold));
        }
        if !(config.lambda_cutoff > 0.0) {
            problems.push(format!("lambda_cutoff must be positive, got {}", config.lambda_cutoff));
        }
        if !(config.rho_in >= 0.0) {
            problems.push(format!("rho_in must be non-negative, got {}", config.rho_in));
        }
        if !(config.t1 >= 0.0) {
            problems.push(format!("t1 must be non-negative, got {}", config.t1));
        }
        if !(config.t_max > 0.0) {
            problems.push(format!("t_max must be positive, got {}", config.t_max));
        }
        if let Some(p) = config.rho_bar {
            if !(p.value >= 0.0) {
                problems.push(format!("rho_bar.value must be non-negative, got {}", p.value));
            }
        }
        if config.exits.is_empty() {
            problems.push("exits must not be empty".to_string());
        }
        let grid = match build_grid(config.n.max(crate::grid::MIN_CELLS), &config.geometry()) {
            Ok(g) => Some(g),
            Err(e) => {
                if !config.exits.is_empty() {
                    problems.push(e.to_string());
                }
                None
            }
        };
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let grid = grid.expect("grid built when no problems were found");

        let params = ModelParams {
            c_rep: config.c_rep,
            r: config.r,
            eps,
            rho_in: config.rho_in,
            t1: config.t1,
            lambda_cutoff: config.lambda_cutoff,
            cfl_factor: config.cfl_factor,
            mass_threshold: config.mass_threshold,
            t_max: config.t_max,
            opaque: config.opaque,
        };
        let initial = initial_density(&grid, config.rho_bar);
        Ok(Scenario { config, grid, params, initial })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn initial_density(&self) -> &ScalarField {
        &self.initial
    }

    /// Same scenario with extra obstacle cells (interior `Free` cells only).
    pub fn with_obstacle_cells(&self, cells: impl IntoIterator<Item = usize>) -> Scenario {
        let grid = self.grid.with_obstacles(cells);
        let mut initial = self.initial.clone();
        for (v, l) in initial.values_mut().iter_mut().zip(grid.labels()) {
            if !l.is_walkable() {
                *v = 0.0;
            }
        }
        Scenario { config: self.config.clone(), grid, params: self.params, initial }
    }

    /// Same scenario with a different grid (same labels contract).
    pub fn with_grid(&self, grid: Grid) -> Scenario {
        let initial = initial_density(&grid, self.config.rho_bar);
        Scenario { config: self.config.clone(), grid, params: self.params, initial }
    }
}

fn initial_density(grid: &Grid, patch: Option<DensityPatch>) -> ScalarField {
    let mut rho = ScalarField::zeros(grid);
    if let Some(p) = patch {
        let n = grid.n();
        for j in 0..n {
            for i in 0..n {
                if grid.label(i, j).is_walkable() && p.rect.contains(grid.center(i, j)) {
                    rho.set(i, j, p.value);
                }
            }
        }
    }
    rho
}

/// Scenario files shipped with the crate.
pub mod presets {
    use super::ScenarioConfig;
    use crate::error::{Error, Result};

    pub const SCENARIO_L: &str = include_str!("../presets/scenario_L.json");
    pub const TEST_A: &str = include_str!("../presets/test_A.json");
    pub const TEST_B: &str = include_str!("../presets/test_B.json");

    pub const NAMES: [&str; 3] = ["scenario_L", "test_A", "test_B"];

    pub fn text(name: &str) -> Option<&'static str> {
        match name.trim_end_matches(".json") {
            "scenario_L" => Some(SCENARIO_L),
            "test_A" => Some(TEST_A),
            "test_B" => Some(TEST_B),
            _ => None,
        }
    }

    pub fn load(name: &str) -> Result<ScenarioConfig> {
        let text = text(name).ok_or_else(|| Error::Argument(format!("unknown preset {name:?}")))?;
        ScenarioConfig::from_json(text)
    }
}
