//! Line of sight through opaque cells and the precomputed sensory stencils.
//!
//! A stencil stores, for every walkable cell, the cells it interacts with:
//! walkable cells `y` with `eps < |y - x| < r`, strictly in front of the
//! desired direction at `x`, and (for opaque obstacles) visible from `x`.
//! Entries are indices into a shared table of lattice offsets, so the
//! per-cell storage is one `u32` per entry.

use rayon::prelude::*;

use crate::grid::{Grid, VectorField};
use crate::vec2::Vec2;

/// Relative slack used when comparing lattice distances with `eps` and `r`,
/// so that a radius equal to a whole number of cells is excluded exactly.
const RADIUS_SLACK: f64 = 1e-9;

/// Number of evenly spaced samples (endpoints included) used to test the
/// segment between two cell centres at distance `dist`.
#[inline]
pub fn sample_count(dist: f64, h: f64) -> usize {
    (dist / (0.5 * h)).ceil() as usize + 1
}

/// True if no sample point on the segment between the centres of `a` and `b`
/// falls in a blocked cell.
pub fn visible(grid: &Grid, a: (usize, usize), b: (usize, usize)) -> bool {
    // sample from the lower index so that the point set does not depend on
    // argument order
    let (a, b) = if (a.1, a.0) <= (b.1, b.0) { (a, b) } else { (b, a) };
    let pa = grid.center(a.0, a.1);
    let pb = grid.center(b.0, b.1);
    let samples = sample_count(pa.distance(pb), grid.h());
    let step = 1.0 / (samples - 1).max(1) as f64;
    for k in 0..samples {
        let p = pa + (pb - pa) * (k as f64 * step);
        match grid.cell_of(p) {
            Some((i, j)) if grid.label(i, j).is_blocked() => return false,
            None => return false,
            _ => {}
        }
    }
    true
}

/// One lattice offset of the annulus `eps < |d| < r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilOffset {
    pub di: i32,
    pub dj: i32,
    /// `|y - x|`
    pub dist: f64,
    /// `(y - x) / |y - x|^2 * h^2`: the quadrature weight of the kernel
    /// without the repulsion constant.
    pub weight: Vec2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensoryStencil {
    n: usize,
    offsets: Vec<StencilOffset>,
    start: Vec<u32>,
    entries: Vec<u32>,
}

impl SensoryStencil {
    pub fn offsets(&self) -> &[StencilOffset] {
        &self.offsets
    }

    /// Total number of stored (source, target) pairs.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Offsets stored for one source cell.
    pub fn cell(&self, idx: usize) -> impl Iterator<Item = &StencilOffset> + '_ {
        let range = self.start[idx] as usize..self.start[idx + 1] as usize;
        self.entries[range].iter().map(move |&k| &self.offsets[k as usize])
    }

    /// Target cell indices stored for one source cell.
    pub fn targets(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.n as isize;
        let (i, j) = ((idx as isize) % n, (idx as isize) / n);
        self.cell(idx)
            .map(move |o| ((j + o.dj as isize) * n + i + o.di as isize) as usize)
    }

    pub fn cell_len(&self, idx: usize) -> usize {
        (self.start[idx + 1] - self.start[idx]) as usize
    }
}

/// Lattice offsets with `eps < |d| < r`, in a fixed order.
pub fn annulus_offsets(h: f64, r: f64, eps: f64) -> Vec<StencilOffset> {
    let outer = r / h;
    let inner = eps / h;
    let reach = outer.ceil() as i32;
    let mut out = Vec::new();
    for dj in -reach..=reach {
        for di in -reach..=reach {
            let d = ((di * di + dj * dj) as f64).sqrt();
            if d > inner * (1.0 + RADIUS_SLACK) && d < outer * (1.0 - RADIUS_SLACK) {
                let dist = d * h;
                let v = Vec2::new(di as f64 * h, dj as f64 * h);
                out.push(StencilOffset { di, dj, dist, weight: v * (h * h / (dist * dist)) });
            }
        }
    }
    out
}

/// Builds the sensory stencils for all walkable cells. With `opaque` false
/// the visibility test is skipped (transparent obstacles).
pub fn build_stencils(grid: &Grid, vdes: &VectorField, r: f64, eps: f64, opaque: bool) -> SensoryStencil {
    let n = grid.n();
    let h = grid.h();
    if r < h {
        log::warn!("sensory radius {r} is below one cell ({h}); interactions are disabled");
    }
    let offsets = annulus_offsets(h, r, eps);
    let per_cell: Vec<Vec<u32>> = (0..grid.len())
        .into_par_iter()
        .map(|c| {
            let (i, j) = grid.coords(c);
            if !grid.label(i, j).is_walkable() {
                return Vec::new();
            }
            let heading = vdes.get(i, j);
            let mut list = Vec::new();
            for (k, o) in offsets.iter().enumerate() {
                let ti = i as i64 + o.di as i64;
                let tj = j as i64 + o.dj as i64;
                if ti < 0 || tj < 0 || ti >= n as i64 || tj >= n as i64 {
                    continue;
                }
                let (ti, tj) = (ti as usize, tj as usize);
                if !grid.label(ti, tj).is_walkable() {
                    continue;
                }
                if Vec2::new(o.di as f64, o.dj as f64).dot(heading) <= 0.0 {
                    continue;
                }
                if opaque && !visible(grid, (i, j), (ti, tj)) {
                    continue;
                }
                list.push(k as u32);
            }
            list
        })
        .collect();

    let mut start = Vec::with_capacity(grid.len() + 1);
    let mut entries = Vec::with_capacity(per_cell.iter().map(Vec::len).sum());
    start.push(0u32);
    for list in per_cell {
        entries.extend_from_slice(&list);
        start.push(u32::try_from(entries.len()).expect("stencil exceeds u32 entries"));
    }
    SensoryStencil { n, offsets, start, entries }
}
