//! Macroscopic crowd evacuation with a nonlocal conservation law, and shape
//! optimization of obstacles that shorten the evacuation time.

pub mod analysis;
pub mod dynamics;
pub mod eikonal;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod optimizer;
pub mod scenario;
pub mod vec2;
pub mod visibility;

pub use dynamics::{run_simulation, EvacuationResult, Outcome, RunOptions, Simulation, StaticFields};
pub use error::{Error, Result};
pub use grid::{build_grid, CellLabel, Geometry, Grid, Opening, Rect, ScalarField, Side, VectorField};
pub use scenario::{presets, ModelParams, Scenario, ScenarioConfig};
pub use vec2::Vec2;
