//! Distance fields by a first-order semi-Lagrangian scheme with fast
//! sweeping, and the desired-velocity field derived from the exit distance.
//!
//! The update at a cell `x` is
//!
//! ```text
//! u(x) = min over foot points P of  |x - P| + I[u](P)
//! ```
//!
//! where `P` ranges over the far edge of each of the eight triangles
//! `(x, x + h e_a, x + h e_a + h e_b)` around `x` and `I` is linear
//! interpolation on that edge. The minimization over `P` (equivalently over
//! the step direction) is solved exactly on each triangle: it is a convex
//! problem in one variable. A triangle whose axial vertex is infinite is
//! skipped, so characteristics never cut between two blocked cells that
//! touch at a corner.

use crate::error::{Error, Result};
use crate::grid::{CellLabel, Grid, ScalarField, VectorField};
use crate::vec2::Vec2;

/// `+inf` stand-in, in units of the domain diameter.
pub const SENTINEL_DIAMETERS: f64 = 10.0;
pub const DEFAULT_MAX_SWEEPS: usize = 500;

const AXES: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Sentinel value used for "infinite" distance on an `n x n` grid of spacing `h`.
pub fn sentinel(n: usize, h: f64) -> f64 {
    SENTINEL_DIAMETERS * std::f64::consts::SQRT_2 * n as f64 * h
}

#[inline]
fn is_infinite(v: f64, sentinel: f64) -> bool {
    v >= 0.5 * sentinel
}

#[derive(Clone, Debug)]
pub struct EikonalProblem {
    n: usize,
    h: f64,
    zero: Vec<bool>,
    forbidden: Vec<bool>,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl EikonalProblem {
    pub fn new(n: usize, h: f64, zero: Vec<bool>, forbidden: Vec<bool>) -> Result<Self> {
        if zero.len() != n * n || forbidden.len() != n * n {
            return Err(Error::Argument("eikonal masks do not match the grid size".into()));
        }
        if zero.iter().zip(&forbidden).any(|(&z, &f)| z && f) {
            return Err(Error::Argument("eikonal zero set and forbidden set overlap".into()));
        }
        let diameter = std::f64::consts::SQRT_2 * n as f64 * h;
        Ok(EikonalProblem {
            n,
            h,
            zero,
            forbidden,
            tolerance: 1e-8 * diameter,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        })
    }

    /// Distance to the exits, infinite inside obstacles and walls.
    pub fn exit_distance(grid: &Grid) -> Result<Self> {
        let zero = grid.labels().iter().map(|&l| l == CellLabel::Exit).collect();
        let forbidden = grid.labels().iter().map(|l| l.is_blocked()).collect();
        Self::new(grid.n(), grid.h(), zero, forbidden)
    }

    /// Distance to obstacles and walls.
    pub fn obstacle_distance(grid: &Grid) -> Result<Self> {
        let zero = grid.labels().iter().map(|l| l.is_blocked()).collect();
        Self::new(grid.n(), grid.h(), zero, vec![false; grid.len()])
    }

    pub fn sentinel(&self) -> f64 {
        sentinel(self.n, self.h)
    }
}

/// Solves the eikonal problem by Gauss-Seidel sweeps in the four diagonal
/// orderings until the largest update of a full round drops below the
/// tolerance.
pub fn solve_eikonal(problem: &EikonalProblem) -> Result<ScalarField> {
    let n = problem.n;
    let h = problem.h;
    let big = problem.sentinel();
    if !problem.zero.iter().any(|&z| z) {
        return Err(Error::EmptyZeroSet);
    }
    let mut u: Vec<f64> = problem.zero.iter().map(|&z| if z { 0.0 } else { big }).collect();
    let fixed: Vec<bool> = problem.zero.iter().zip(&problem.forbidden).map(|(&z, &f)| z || f).collect();

    let mut sweeps = 0;
    loop {
        let mut residual: f64 = 0.0;
        for ordering in 0..4 {
            let rev_i = ordering & 1 == 1;
            let rev_j = ordering & 2 == 2;
            for jj in 0..n {
                let j = if rev_j { n - 1 - jj } else { jj };
                for ii in 0..n {
                    let i = if rev_i { n - 1 - ii } else { ii };
                    let c = j * n + i;
                    if fixed[c] {
                        continue;
                    }
                    let candidate = local_update(&u, n, h, big, i, j);
                    if candidate < u[c] {
                        residual = residual.max(u[c] - candidate);
                        u[c] = candidate;
                    }
                }
            }
            sweeps += 1;
        }
        if residual < problem.tolerance {
            log::trace!("eikonal converged after {sweeps} sweeps");
            break;
        }
        if sweeps >= problem.max_sweeps {
            return Err(Error::NotConverged { sweeps, residual });
        }
    }
    Ok(ScalarField::from_values(n, h, u))
}

#[inline]
fn local_update(u: &[f64], n: usize, h: f64, big: f64, i: usize, j: usize) -> f64 {
    let at = |di: isize, dj: isize| -> f64 {
        let ni = i as isize + di;
        let nj = j as isize + dj;
        if ni < 0 || nj < 0 || ni >= n as isize || nj >= n as isize {
            f64::INFINITY
        } else {
            let v = u[nj as usize * n + ni as usize];
            if is_infinite(v, big) {
                f64::INFINITY
            } else {
                v
            }
        }
    };
    let mut best = f64::INFINITY;
    for &(ax, ay) in &AXES {
        let ua = at(ax, ay);
        if ua.is_infinite() {
            continue;
        }
        // the two diagonal vertices sharing this axial edge
        let (bx, by) = (ay, ax);
        for s in [1isize, -1] {
            let ub = at(ax + s * bx, ay + s * by);
            best = best.min(triangle_min(ua, ub, h));
        }
    }
    best
}

/// `min over t in [0,1] of h sqrt(1 + t^2) + (1 - t) ua + t ub`.
#[inline]
fn triangle_min(ua: f64, ub: f64, h: f64) -> f64 {
    if ub.is_infinite() {
        return h + ua;
    }
    let d = (ua - ub) / h;
    if d <= 0.0 {
        h + ua
    } else if d >= std::f64::consts::FRAC_1_SQRT_2 {
        std::f64::consts::SQRT_2 * h + ub
    } else {
        let t = d / (1.0 - d * d).sqrt();
        h * (1.0 + t * t).sqrt() + ua - t * (ua - ub)
    }
}

/// Unit field `-grad(phi) / |grad(phi)|` on walkable and exit cells, zero
/// elsewhere.
///
/// Each derivative is a central difference when both neighbours carry finite
/// distance, one-sided toward the finite side otherwise, and zero if neither
/// does. At a walkable cell any component pointing into an edge-adjacent
/// blocked cell (or out of the domain) is removed before normalizing. If
/// nothing is left the cell steps toward its lowest edge neighbour.
pub fn desired_velocity(phi: &ScalarField, grid: &Grid) -> Result<VectorField> {
    let n = grid.n();
    let h = grid.h();
    assert_eq!(phi.n(), n, "distance field does not match grid");
    let big = sentinel(n, h);
    let values = phi.values();
    let finite = |i: isize, j: isize| -> Option<f64> {
        if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
            return None;
        }
        let v = values[j as usize * n + i as usize];
        (!is_infinite(v, big)).then_some(v)
    };
    let blocked = |i: isize, j: isize| -> bool {
        i < 0 || j < 0 || i >= n as isize || j >= n as isize || grid.label(i as usize, j as usize).is_blocked()
    };

    let mut out = VectorField::zeros(grid);
    for j in 0..n {
        for i in 0..n {
            let label = grid.label(i, j);
            let walkable = label.is_walkable();
            if !walkable && label != CellLabel::Exit {
                continue;
            }
            let (ii, jj) = (i as isize, j as isize);
            let Some(here) = finite(ii, jj) else {
                if walkable {
                    return Err(Error::EnclosedRegion { i, j });
                }
                continue;
            };
            let derivative = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
                (Some(a), Some(b)) => (b - a) / (2.0 * h),
                (None, Some(b)) => (b - here) / h,
                (Some(a), None) => (here - a) / h,
                (None, None) => 0.0,
            };
            let gx = derivative(finite(ii - 1, jj), finite(ii + 1, jj));
            let gy = derivative(finite(ii, jj - 1), finite(ii, jj + 1));
            let mut v = Vec2::new(-gx, -gy);

            if walkable {
                if (v.x > 0.0 && blocked(ii + 1, jj)) || (v.x < 0.0 && blocked(ii - 1, jj)) {
                    v.x = 0.0;
                }
                if (v.y > 0.0 && blocked(ii, jj + 1)) || (v.y < 0.0 && blocked(ii, jj - 1)) {
                    v.y = 0.0;
                }
            }
            let mut norm = v.norm();
            if norm < 1e-12 {
                // steepest edge neighbour
                let mut best: Option<(f64, Vec2)> = None;
                for &(dx, dy) in &AXES {
                    if blocked(ii + dx, jj + dy) {
                        continue;
                    }
                    if let Some(w) = finite(ii + dx, jj + dy) {
                        if w < here && best.map_or(true, |(b, _)| w < b) {
                            best = Some((w, Vec2::new(dx as f64, dy as f64)));
                        }
                    }
                }
                match best {
                    Some((_, dir)) => {
                        v = dir;
                        norm = 1.0;
                    }
                    None if walkable => return Err(Error::EnclosedRegion { i, j }),
                    None => continue,
                }
            }
            out.values_mut()[j * n + i] = v * (1.0 / norm);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Geometry, Opening, Rect, Side};

    fn right_exit(walls: Vec<Rect>) -> Geometry {
        Geometry {
            exits: vec![Opening::Segment { side: Side::Right, from: 0.0, to: 1.0 }],
            entrances: vec![],
            walls,
        }
    }

    #[test]
    fn planar_distance_from_right_wall() {
        let n = 50;
        let g = build_grid(n, &right_exit(vec![])).unwrap();
        let phi = solve_eikonal(&EikonalProblem::exit_distance(&g).unwrap()).unwrap();
        let h = g.h();
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let exact = 1.0 - g.center(i, j).x;
                assert!((phi.get(i, j) - exact).abs() <= 2.0 * h);
            }
        }
    }

    #[test]
    fn forbidden_cells_hold_sentinel() {
        let g = build_grid(20, &right_exit(vec![Rect::new(0.4, 0.4, 0.6, 0.6)])).unwrap();
        let problem = EikonalProblem::exit_distance(&g).unwrap();
        let big = problem.sentinel();
        let phi = solve_eikonal(&problem).unwrap();
        for (c, l) in g.labels().iter().enumerate() {
            if l.is_blocked() {
                assert_eq!(phi.values()[c], big);
            } else {
                assert!(phi.values()[c] < 0.5 * big);
            }
            assert!(phi.values()[c] >= 0.0);
        }
    }

    #[test]
    fn empty_zero_set_rejected() {
        let p = EikonalProblem::new(10, 0.1, vec![false; 100], vec![false; 100]).unwrap();
        assert!(matches!(solve_eikonal(&p), Err(Error::EmptyZeroSet)));
        assert!(EikonalProblem::new(10, 0.1, vec![true; 100], vec![true; 100]).is_err());
    }

    #[test]
    fn non_convergence_reports_residual() {
        let g = build_grid(30, &right_exit(vec![])).unwrap();
        let mut p = EikonalProblem::exit_distance(&g).unwrap();
        p.max_sweeps = 1;
        p.tolerance = 1e-300;
        match solve_eikonal(&p) {
            Err(Error::NotConverged { sweeps, residual }) => {
                assert_eq!(sweeps, 4);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn triangle_min_matches_dense_search() {
        let h = 0.1;
        for &(ua, ub) in &[(1.0, 1.0), (1.0, 0.95), (1.0, 0.93), (1.0, 0.5), (0.3, 0.4)] {
            let dense = (0..=100_000)
                .map(|k| {
                    let t = k as f64 / 100_000.0;
                    h * (1.0 + t * t).sqrt() + (1.0 - t) * ua + t * ub
                })
                .fold(f64::INFINITY, f64::min);
            assert!((triangle_min(ua, ub, h) - dense).abs() < 1e-9, "{ua} {ub}");
        }
    }

    #[test]
    fn point_source_is_close_to_euclidean() {
        let n = 60;
        let h = 1.0 / n as f64;
        let mut zero = vec![false; n * n];
        zero[30 * n + 30] = true;
        let phi = solve_eikonal(&EikonalProblem::new(n, h, zero, vec![false; n * n]).unwrap()).unwrap();
        for j in 0..n {
            for i in 0..n {
                let exact = h * (((i as f64 - 30.0).powi(2) + (j as f64 - 30.0).powi(2)).sqrt());
                let err = phi.get(i, j) - exact;
                assert!(err >= -1e-12 && err <= 2.0 * h, "({i},{j}) err {err}");
            }
        }
    }

    #[test]
    fn desired_velocity_planar() {
        let g = build_grid(20, &right_exit(vec![])).unwrap();
        let phi = solve_eikonal(&EikonalProblem::exit_distance(&g).unwrap()).unwrap();
        let v = desired_velocity(&phi, &g).unwrap();
        for j in 0..20 {
            for i in 0..20 {
                if g.label(i, j) == CellLabel::Free {
                    let d = v.get(i, j);
                    assert!((d.x - 1.0).abs() < 1e-12 && d.y.abs() < 1e-12, "({i},{j}) {d:?}");
                }
            }
        }
    }

    #[test]
    fn enclosed_pocket_is_reported() {
        let walls = vec![
            Rect::new(0.2, 0.2, 0.6, 0.25),
            Rect::new(0.2, 0.55, 0.6, 0.6),
            Rect::new(0.2, 0.2, 0.25, 0.6),
            Rect::new(0.55, 0.2, 0.6, 0.6),
        ];
        let g = build_grid(20, &right_exit(walls)).unwrap();
        let phi = solve_eikonal(&EikonalProblem::exit_distance(&g).unwrap()).unwrap();
        assert!(matches!(desired_velocity(&phi, &g), Err(Error::EnclosedRegion { .. })));
    }
}
