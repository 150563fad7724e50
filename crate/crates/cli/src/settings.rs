//! Run settings: command-line flags over the `run` block of the config over
//! built-in defaults. The resolved settings go back into the manifest so it
//! can be replayed as a config.

use anyhow::Result;
use serde::{Deserialize, Serialize};

use evacopt::geometry::{ConstraintSpec, ObstacleMode};
use evacopt::{presets, Error, ScenarioConfig};

use crate::{DesignArgs, ModeArg, ScenarioArgs};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ObstacleMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstacle_design: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deterministic_pso: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_search: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_evaluations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shrink: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_fields: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corners: Option<bool>,
}

/// A true flag wins, otherwise the file value, otherwise `false`.
pub fn switch(flag: bool, file: Option<bool>) -> bool {
    flag || file.unwrap_or(false)
}

/// Loads the scenario, applies the scenario overrides and splits off the
/// run block. `default_preset` is used when neither a file nor a preset is
/// named.
pub fn load(args: &ScenarioArgs, default_preset: Option<&str>) -> Result<(ScenarioConfig, RunSettings)> {
    let mut cfg = match (&args.config, args.preset.as_deref().or(default_preset)) {
        (Some(path), _) => ScenarioConfig::load(path).map_err(as_config_error)?,
        (None, Some(name)) => presets::load(name)?,
        (None, None) => anyhow::bail!("one of --config or --preset is required"),
    };
    if let Some(n) = args.n {
        cfg.n = n;
        // the default sensory cutoff follows the grid
        cfg.eps = None;
    }
    if let Some(r) = args.r {
        cfg.r = r;
    }
    if let Some(c) = args.c_rep {
        cfg.c_rep = c;
    }
    if let Some(v) = args.rho_in {
        cfg.rho_in = v;
    }
    if args.transparent {
        cfg.opaque = false;
    }
    let file = match cfg.run.take() {
        Some(v) => serde_json::from_value(v).map_err(|e| Error::Config(vec![format!("run: {e}")]))?,
        None => RunSettings::default(),
    };
    Ok((cfg.resolved(), file))
}

/// A config that does not parse is reported like one that does not validate.
fn as_config_error(e: Error) -> Error {
    match e {
        Error::Json(j) => Error::Config(vec![j.to_string()]),
        other => other,
    }
}

/// Obstacle family and constraints from flags, file and defaults.
pub fn design(args: &DesignArgs, file: &RunSettings, default_spec: ConstraintSpec) -> (ObstacleMode, ConstraintSpec) {
    let file_kind = file.mode.map(|m| match m {
        ObstacleMode::Bezier { .. } => ModeArg::Bezier,
        ObstacleMode::Circles { .. } => ModeArg::Circles,
    });
    let kind = args.mode.or(file_kind).unwrap_or(ModeArg::Bezier);
    let file_count = file.mode.filter(|_| file_kind == Some(kind)).map(|m| m.count());
    let count = args.obstacles.or(file_count).unwrap_or(match kind {
        ModeArg::Bezier => 1,
        ModeArg::Circles => 6,
    });
    let mode = match kind {
        ModeArg::Bezier => ObstacleMode::Bezier { count },
        ModeArg::Circles => ObstacleMode::Circles { count },
    };
    // staggered circles are too small for the Bezier area band
    let family_default = match kind {
        ModeArg::Bezier => default_spec,
        ModeArg::Circles => ConstraintSpec { area_min_frac: 0.0, area_max_frac: 1.0, ..default_spec },
    };
    let mut spec = file.constraints.unwrap_or(family_default);
    if let Some(v) = args.area_min {
        spec.area_min_frac = v;
    }
    if let Some(v) = args.area_max {
        spec.area_max_frac = v;
    }
    if let Some(v) = args.margin_cells {
        spec.margin_cells = v;
    }
    (mode, spec)
}

/// Config with the resolved settings in its run block.
pub fn manifest(cfg: &ScenarioConfig, settings: &RunSettings) -> Result<ScenarioConfig> {
    let mut m = cfg.clone();
    m.run = Some(serde_json::to_value(settings)?);
    Ok(m)
}
