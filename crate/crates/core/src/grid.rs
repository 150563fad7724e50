//! Cartesian discretization of the unit square and the cell-centred fields
//! that live on it.
//!
//! Cells are indexed row-major: `idx = j * n + i`, with `i` the column
//! (x direction) and `j` the row (y direction). Cell `(i, j)` has its centre
//! at `((i + 0.5) h, (j + 0.5) h)`. The outermost ring of cells is the room
//! boundary; it is `Wall` except where entrances or exits are cut into it.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::vec2::Vec2;

pub const MIN_CELLS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellLabel {
    Free,
    Obstacle,
    Exit,
    Entrance,
    Wall,
}

impl CellLabel {
    /// Impermeable and opaque: internal obstacles and the boundary ring.
    #[inline]
    pub fn is_blocked(self) -> bool {
        matches!(self, CellLabel::Obstacle | CellLabel::Wall)
    }

    /// Cells that carry pedestrian density.
    #[inline]
    pub fn is_walkable(self) -> bool {
        matches!(self, CellLabel::Free | CellLabel::Entrance)
    }

    /// Numeric code used in label CSV files.
    pub fn code(self) -> u8 {
        match self {
            CellLabel::Free => 0,
            CellLabel::Obstacle => 1,
            CellLabel::Exit => 2,
            CellLabel::Entrance => 3,
            CellLabel::Wall => 4,
        }
    }
}

/// Closed axis-aligned rectangle, serialized as `[x0, y0, x1, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };

    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    #[inline]
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn check(&self, what: &str) -> Result<()> {
        let ordered = self.x0 <= self.x1 && self.y0 <= self.y1;
        let inside = [self.x0, self.y0, self.x1, self.y1]
            .iter()
            .all(|v| v.is_finite() && (0.0..=1.0).contains(v));
        if ordered && inside {
            Ok(())
        } else {
            Err(Error::Geometry(format!("{what} rectangle {self:?} is not an ordered box inside [0,1]^2")))
        }
    }
}

impl From<[f64; 4]> for Rect {
    fn from([x0, y0, x1, y1]: [f64; 4]) -> Self {
        Rect { x0, y0, x1, y1 }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// A door. Either a run of boundary cells along one side (`from..=to` is the
/// coordinate along that side) or an arbitrary rectangle of cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Opening {
    Segment { side: Side, from: f64, to: f64 },
    Region { rect: Rect },
}

impl Opening {
    fn check(&self, what: &str) -> Result<()> {
        match *self {
            Opening::Segment { from, to, .. } => {
                if from.is_finite() && to.is_finite() && 0.0 <= from && from <= to && to <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Geometry(format!("{what} segment [{from}, {to}] is not inside [0,1]")))
                }
            }
            Opening::Region { rect } => rect.check(what),
        }
    }

    fn cells(&self, n: usize, h: f64) -> Vec<usize> {
        let mut out = Vec::new();
        match *self {
            Opening::Segment { side, from, to } => {
                for k in 0..n {
                    let s = (k as f64 + 0.5) * h;
                    if s < from || s > to {
                        continue;
                    }
                    let (i, j) = match side {
                        Side::Left => (0, k),
                        Side::Right => (n - 1, k),
                        Side::Bottom => (k, 0),
                        Side::Top => (k, n - 1),
                    };
                    out.push(j * n + i);
                }
            }
            Opening::Region { rect } => {
                for j in 0..n {
                    for i in 0..n {
                        let c = Vec2::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                        if rect.contains(c) {
                            out.push(j * n + i);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Static room layout: doors and internal walls.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    #[serde(default)]
    pub exits: Vec<Opening>,
    #[serde(default)]
    pub entrances: Vec<Opening>,
    #[serde(default)]
    pub walls: Vec<Rect>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
    labels: Vec<CellLabel>,
    /// Index of the door each exit cell belongs to.
    exit_of: Vec<Option<u16>>,
    exit_count: usize,
}

/// Labels an `n x n` grid from a geometry description.
pub fn build_grid(n: usize, geometry: &Geometry) -> Result<Grid> {
    if n < MIN_CELLS {
        return Err(Error::Geometry(format!("grid needs at least {MIN_CELLS} cells per side, got {n}")));
    }
    for w in &geometry.walls {
        w.check("wall")?;
    }
    for e in &geometry.entrances {
        e.check("entrance")?;
    }
    for e in &geometry.exits {
        e.check("exit")?;
    }

    let h = 1.0 / n as f64;
    let mut labels = vec![CellLabel::Free; n * n];
    for j in 0..n {
        for i in 0..n {
            if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                labels[j * n + i] = CellLabel::Wall;
            }
        }
    }
    for wall in &geometry.walls {
        for c in (Opening::Region { rect: *wall }).cells(n, h) {
            if labels[c] == CellLabel::Free {
                labels[c] = CellLabel::Obstacle;
            }
        }
    }
    for entrance in &geometry.entrances {
        for c in entrance.cells(n, h) {
            labels[c] = CellLabel::Entrance;
        }
    }
    let mut exit_of = vec![None; n * n];
    for (k, exit) in geometry.exits.iter().enumerate() {
        for c in exit.cells(n, h) {
            labels[c] = CellLabel::Exit;
            exit_of[c] = Some(k as u16);
        }
    }
    if !labels.contains(&CellLabel::Exit) {
        return Err(Error::NoExit);
    }
    Ok(Grid { n, h, labels, exit_of, exit_count: geometry.exits.len() })
}

impl Grid {
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new((i as f64 + 0.5) * self.h, (j as f64 + 0.5) * self.h)
    }

    #[inline]
    pub fn label(&self, i: usize, j: usize) -> CellLabel {
        self.labels[j * self.n + i]
    }

    #[inline]
    pub fn labels(&self) -> &[CellLabel] {
        &self.labels
    }

    /// Cell containing `p`, if `p` is inside the unit square.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let fi = (p.x / self.h).floor();
        let fj = (p.y / self.h).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.n as f64 || fj >= self.n as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    pub fn count(&self, label: CellLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn exit_count(&self) -> usize {
        self.exit_count
    }

    #[inline]
    pub fn exit_of(&self, idx: usize) -> Option<usize> {
        self.exit_of[idx].map(usize::from)
    }

    #[inline]
    pub fn is_ring(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1
    }

    /// Copy of this grid with the given cells turned into obstacles. Only
    /// `Free` cells strictly inside the boundary ring are converted; doors and
    /// walls keep their labels.
    pub fn with_obstacles(&self, cells: impl IntoIterator<Item = usize>) -> Grid {
        let mut g = self.clone();
        for c in cells {
            let (i, j) = g.coords(c);
            if !g.is_ring(i, j) && g.labels[c] == CellLabel::Free {
                g.labels[c] = CellLabel::Obstacle;
            }
        }
        g
    }

    /// Walkable cells that cannot reach an exit through edge-adjacent
    /// walkable cells.
    /// Writes the label codes (see [`CellLabel::code`]) as a grid CSV.
    pub fn write_labels_csv(&self, path: &Path) -> Result<()> {
        io::write_grid_csv(path, self.n, |c| vec![self.labels[c].code().to_string()])
    }

    pub fn unreachable_cells(&self) -> Vec<usize> {
        let n = self.n;
        let mut seen = vec![false; self.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for (c, l) in self.labels.iter().enumerate() {
            if *l == CellLabel::Exit {
                seen[c] = true;
                queue.push_back(c);
            }
        }
        while let Some(c) = queue.pop_front() {
            let (i, j) = self.coords(c);
            let mut visit = |ni: usize, nj: usize| {
                let k = nj * n + ni;
                if !seen[k] && self.labels[k].is_walkable() {
                    seen[k] = true;
                    queue.push_back(k);
                }
            };
            if i > 0 {
                visit(i - 1, j);
            }
            if i + 1 < n {
                visit(i + 1, j);
            }
            if j > 0 {
                visit(i, j - 1);
            }
            if j + 1 < n {
                visit(i, j + 1);
            }
        }
        (0..self.len())
            .filter(|&c| self.labels[c].is_walkable() && !seen[c])
            .collect()
    }
}

/// One real value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    n: usize,
    h: f64,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::filled(grid.n, grid.h, 0.0)
    }

    pub fn filled(n: usize, h: f64, value: f64) -> Self {
        ScalarField { n, h, values: vec![value; n * n] }
    }

    pub fn from_values(n: usize, h: f64, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * n, "field size does not match grid");
        ScalarField { n, h, values }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.n + i] = v;
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Writes `n` rows of `n` comma-separated values, row `j = 0` first.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::write_grid_csv(path, self.n, |c| vec![io::format_value(self.values[c])])
    }
}

/// One 2-vector per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    n: usize,
    h: f64,
    values: Vec<Vec2>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        VectorField { n: grid.n, h: grid.h, values: vec![Vec2::ZERO; grid.len()] }
    }

    pub fn from_values(n: usize, h: f64, values: Vec<Vec2>) -> Self {
        assert_eq!(values.len(), n * n, "field size does not match grid");
        VectorField { n, h, values }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Vec2 {
        self.values[j * self.n + i]
    }

    #[inline]
    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Vec2] {
        &mut self.values
    }

    /// Like [`ScalarField::write_csv`], with each cell written as `x,y`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::write_grid_csv(path, self.n, |c| vec![io::format_value(self.values[c].x), io::format_value(self.values[c].y)])
    }
}

/// Discrete total mass, `sum(rho) * h^2`.
pub fn total_mass(rho: &ScalarField) -> f64 {
    rho.values.iter().sum::<f64>() * rho.h * rho.h
}
