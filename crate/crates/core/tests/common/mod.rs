//! Reference implementations the library is checked against, plus the
//! property checks shared by the proptest suites and the acceptance runner.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evacopt::dynamics::{max_outflow_rate, step_density};
use evacopt::eikonal::{solve_eikonal, EikonalProblem};
use evacopt::geometry::{bezier_point, closed_control_points, rasterize_bezier, CURVE_SAMPLES};
use evacopt::optimizer::{pso_optimize, FnObjective, OptimizationResult, PsoParams};
use evacopt::visibility::visible;
use evacopt::{build_grid, Geometry, Grid, Opening, Rect, ScalarField, Scenario, ScenarioConfig, Side, Simulation, Vec2, VectorField};

// ---------------------------------------------------------------- layouts

/// Random room: walls on the interior, one exit segment on a random side.
pub fn random_geometry(seed: u64) -> Geometry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = [Side::Left, Side::Right, Side::Bottom, Side::Top][rng.gen_range(0..4)];
    let from = rng.gen_range(0.1..0.6);
    let exit = Opening::Segment { side, from, to: from + rng.gen_range(0.1..0.3) };
    let mut walls = Vec::new();
    for _ in 0..rng.gen_range(0..5) {
        let x0 = rng.gen_range(0.15..0.75);
        let y0 = rng.gen_range(0.15..0.75);
        walls.push(Rect::new(x0, y0, (x0 + rng.gen_range(0.05..0.3)).min(0.9), (y0 + rng.gen_range(0.05..0.3)).min(0.9)));
    }
    Geometry { exits: vec![exit], entrances: vec![], walls }
}

pub fn random_layout(n: usize, seed: u64) -> Grid {
    build_grid(n, &random_geometry(seed)).expect("layout")
}

// ------------------------------------------------------------- dijkstra

#[derive(PartialEq)]
struct Node(f64, usize);

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0)
    }
}

/// Shortest 8-neighbour path length from the exit cells through unblocked
/// cells. A diagonal move needs both cells it cuts past to be open.
pub fn dijkstra_exit_distance(grid: &Grid) -> Vec<f64> {
    let n = grid.n() as i64;
    let h = grid.h();
    let open = |i: i64, j: i64| i >= 0 && j >= 0 && i < n && j < n && !grid.label(i as usize, j as usize).is_blocked();
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut heap = BinaryHeap::new();
    for (c, l) in grid.labels().iter().enumerate() {
        if *l == evacopt::CellLabel::Exit {
            dist[c] = 0.0;
            heap.push(Node(0.0, c));
        }
    }
    while let Some(Node(d, c)) = heap.pop() {
        if d > dist[c] {
            continue;
        }
        let (i, j) = grid.coords(c);
        let (i, j) = (i as i64, j as i64);
        for di in -1..=1i64 {
            for dj in -1..=1i64 {
                if (di, dj) == (0, 0) || !open(i + di, j + dj) {
                    continue;
                }
                if di != 0 && dj != 0 && !(open(i + di, j) && open(i, j + dj)) {
                    continue;
                }
                let step = if di != 0 && dj != 0 { h * std::f64::consts::SQRT_2 } else { h };
                let k = ((j + dj) * n + i + di) as usize;
                if d + step < dist[k] {
                    dist[k] = d + step;
                    heap.push(Node(d + step, k));
                }
            }
        }
    }
    dist
}

/// Largest gap between the eikonal exit distance and the graph distance
/// over the cells the graph reaches.
pub fn eikonal_vs_dijkstra(grid: &Grid) -> f64 {
    let phi = solve_eikonal(&EikonalProblem::exit_distance(grid).unwrap()).unwrap();
    let oracle = dijkstra_exit_distance(grid);
    oracle
        .iter()
        .zip(phi.values())
        .filter(|(d, _)| d.is_finite())
        .map(|(d, u)| (d - u).abs())
        .fold(0.0, f64::max)
}

// ------------------------------------------------------------ visibility

/// Liang-Barsky clip of segment `a -> b` against the closed box `lo..hi`.
pub fn segment_hits_box(a: Vec2, b: Vec2, lo: Vec2, hi: Vec2) -> bool {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [(-d.x, a.x - lo.x), (d.x, hi.x - a.x), (-d.y, a.y - lo.y), (d.y, hi.y - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// Exact line of sight: does the segment between the centres touch any
/// blocked cell, each shrunk about its centre by `shrink` of the cell size?
pub fn segment_blocked(grid: &Grid, a: (usize, usize), b: (usize, usize), shrink: f64) -> bool {
    let pa = grid.center(a.0, a.1);
    let pb = grid.center(b.0, b.1);
    let half = 0.5 * grid.h() * (1.0 - shrink);
    let n = grid.n();
    (0..n).any(|j| {
        (0..n).any(|i| {
            if !grid.label(i, j).is_blocked() || (i, j) == a || (i, j) == b {
                return false;
            }
            let c = grid.center(i, j);
            segment_hits_box(pa, pb, c - Vec2::new(half, half), c + Vec2::new(half, half))
        })
    })
}

/// Visibility is symmetric and agrees with exact line of sight up to
/// grazing contacts: clear of every (slightly grown) blocked cell means
/// visible, crossing the central half of one means hidden.
pub fn check_visibility(grid: &Grid) -> Result<(), String> {
    let n = grid.n();
    let open: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .filter(|&(i, j)| !grid.label(i, j).is_blocked())
        .collect();
    for &a in &open {
        for &b in &open {
            let ab = visible(grid, a, b);
            if ab != visible(grid, b, a) {
                return Err(format!("asymmetric visibility between {a:?} and {b:?}"));
            }
            if !segment_blocked(grid, a, b, -1e-9) && !ab {
                return Err(format!("{a:?} -> {b:?} is clear but reported hidden"));
            }
            if segment_blocked(grid, a, b, 0.5) && ab {
                return Err(format!("{a:?} -> {b:?} crosses a wall but reported visible"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------- convex hulls

fn cross(o: Vec2, a: Vec2, b: Vec2) -> f64 {
    (a - o).cross(b - o)
}

/// Turns smaller than this count as straight (coordinates are O(1)).
const COLLINEAR: f64 = 1e-14;

/// Andrew's monotone chain; counter-clockwise, no collinear points.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut p: Vec<Vec2> = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= COLLINEAR {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// Point in a counter-clockwise convex polygon, boundary included within `tol`.
pub fn in_convex(hull: &[Vec2], q: Vec2, tol: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0].distance(q) <= tol,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            cross(a, b, q).abs() <= tol * a.distance(b) && (q - a).dot(b - a) >= -tol && (q - b).dot(a - b) >= -tol
        }
        m => (0..m).all(|k| {
            let (a, b) = (hull[k], hull[(k + 1) % m]);
            cross(a, b, q) >= -tol * a.distance(b)
        }),
    }
}

/// Even-odd ray casting for a general polygon.
pub fn point_in_polygon(poly: &[Vec2], q: Vec2) -> bool {
    let mut inside = false;
    let m = poly.len();
    for k in 0..m {
        let (a, b) = (poly[k], poly[(k + m - 1) % m]);
        if (a.y > q.y) != (b.y > q.y) && q.x < (b.x - a.x) * (q.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
    }
    inside
}

/// Rasterized Bezier obstacle: every cell lies in the control hull, the
/// cell set is lattice convex and it matches polygon containment away from
/// the curve.
pub fn check_bezier(grid: &Grid, p0: Vec2, p1: Vec2, p2: Vec2) -> Result<(), String> {
    let ctrl = closed_control_points(p0, p1, p2);
    let Ok(cells) = rasterize_bezier(grid, &ctrl) else {
        return Ok(());
    };
    let h = grid.h();
    let centres: Vec<Vec2> = cells.iter().map(|&c| {
        let (i, j) = grid.coords(c);
        grid.center(i, j)
    }).collect();

    let ctrl_hull = convex_hull(&ctrl);
    if let Some(c) = centres.iter().find(|&&c| !in_convex(&ctrl_hull, c, 1e-9)) {
        return Err(format!("cell centre {c:?} outside the control hull"));
    }

    let set: std::collections::HashSet<usize> = cells.iter().copied().collect();
    let cell_hull = convex_hull(&centres);
    let n = grid.n();
    for j in 0..n {
        for i in 0..n {
            if in_convex(&cell_hull, grid.center(i, j), 1e-9 * h) && !set.contains(&grid.idx(i, j)) {
                return Err(format!("cell ({i}, {j}) inside the hull of the set but missing"));
            }
        }
    }

    let polygon: Vec<Vec2> = (0..CURVE_SAMPLES * 4)
        .map(|k| bezier_point(&ctrl, k as f64 / (CURVE_SAMPLES * 4) as f64).unwrap())
        .collect();
    for j in 0..n {
        for i in 0..n {
            let c = grid.center(i, j);
            let near = polygon.iter().any(|p| p.distance(c) < 0.05 * h);
            if !near && point_in_polygon(&polygon, c) != set.contains(&grid.idx(i, j)) {
                return Err(format!("cell ({i}, {j}) disagrees with polygon containment"));
            }
        }
    }
    Ok(())
}

// ------------------------------------------------------------- dynamics

/// Random velocities on a room whose doors are sealed: cells touching an
/// exit (and the exits) are at rest, so no face carries flux out.
pub fn sealed_velocity(grid: &Grid, seed: u64, scale: f64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n();
    let near_exit = |i: usize, j: usize| {
        let mut any = false;
        for (di, dj) in [(0i64, 0i64), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (a, b) = (i as i64 + di, j as i64 + dj);
            if a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                any |= grid.label(a as usize, b as usize) == evacopt::CellLabel::Exit;
            }
        }
        any
    };
    let mut v = VectorField::zeros(grid);
    for j in 0..n {
        for i in 0..n {
            if grid.label(i, j).is_walkable() && !near_exit(i, j) {
                v.values_mut()[j * n + i] = Vec2::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
            }
        }
    }
    v
}

pub fn random_density(grid: &Grid, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rho = ScalarField::zeros(grid);
    for (r, l) in rho.values_mut().iter_mut().zip(grid.labels()) {
        if l.is_walkable() {
            *r = rng.gen_range(0.0..1.0);
        }
    }
    rho
}

pub fn mass(rho: &ScalarField) -> f64 {
    evacopt::grid::total_mass(rho)
}

/// Relative mass drift after `steps` upwind steps in a sealed room.
pub fn sealed_mass_drift(grid: &Grid, seed: u64, steps: usize) -> Result<f64, String> {
    let mut rho = random_density(grid, seed);
    let start = mass(&rho);
    let mut outflow = vec![0.0; grid.exit_count()];
    for k in 0..steps {
        let v = sealed_velocity(grid, seed.wrapping_add(k as u64 + 1), 2.0);
        let dt = 0.9 * grid.h() / max_outflow_rate(grid, &v).max(1.0);
        let report = step_density(grid, &mut rho, &v, dt, &mut outflow).map_err(|e| e.to_string())?;
        if report.clipped != 0.0 {
            return Err(format!("step {k} clipped {}", report.clipped));
        }
    }
    if outflow.iter().any(|&o| o != 0.0) {
        return Err("mass left a sealed room".into());
    }
    Ok((mass(&rho) - start).abs() / start)
}

/// Random scenario for the positivity battery.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(16..=30);
    let Geometry { exits, walls, .. } = random_geometry(seed ^ 0x5eed);
    let with_entrance = rng.gen_bool(0.5);
    let cfg = ScenarioConfig {
        n,
        exits,
        entrances: if with_entrance {
            vec![Opening::Segment { side: Side::Left, from: 0.4, to: 0.6 }]
        } else {
            vec![]
        },
        walls,
        rho_in: if with_entrance { rng.gen_range(0.2..1.5) } else { 0.0 },
        t1: rng.gen_range(0.0..0.5),
        c_rep: rng.gen_range(0.5..20.0),
        r: rng.gen_range(0.1..0.25),
        eps: None,
        lambda_cutoff: evacopt::scenario::DEFAULT_LAMBDA_CUTOFF,
        cfl_factor: rng.gen_range(0.3..1.0),
        rho_bar: Some(evacopt::scenario::DensityPatch {
            rect: Rect::new(0.05, 0.05, 0.95, 0.95),
            value: rng.gen_range(0.05..1.0),
        }),
        mass_threshold: evacopt::scenario::DEFAULT_MASS_THRESHOLD,
        t_max: 5.0,
        opaque: rng.gen_bool(0.5),
        run: None,
    };
    Scenario::from_config(&cfg.resolved()).expect("random scenario")
}

/// Steps a scenario and checks after every step that the density is
/// non-negative, vanishes on blocked and exit cells and that clipping
/// removed (next to) nothing.
pub fn check_positivity(scenario: &Scenario, steps: usize) -> Result<(), String> {
    let mut sim = match Simulation::new(scenario) {
        Ok(s) => s,
        // a wall may seal part of the room off
        Err(evacopt::Error::EnclosedRegion { .. }) => return Ok(()),
        Err(e) => return Err(e.to_string()),
    };
    let grid = scenario.grid();
    for k in 0..steps {
        sim.advance().map_err(|e| e.to_string())?;
        for (c, (&r, l)) in sim.density().values().iter().zip(grid.labels()).enumerate() {
            if r < 0.0 || !r.is_finite() {
                return Err(format!("step {k}: density {r} at cell {c}"));
            }
            if !l.is_walkable() && r != 0.0 {
                return Err(format!("step {k}: density {r} on {l:?} cell {c}"));
            }
        }
    }
    Ok(())
}

// ------------------------------------------------------------ optimizers

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn sphere_objective(dim: usize) -> FnObjective<fn(&[f64]) -> f64, fn(&[f64]) -> bool> {
    FnObjective::new(vec![(-5.0, 5.0); dim], sphere as fn(&[f64]) -> f64)
}

/// Seeds (out of `seeds`) on which PSO gets the sphere below `target`.
pub fn pso_sphere_successes(dim: usize, particles: usize, iterations: usize, seeds: u64, target: f64) -> usize {
    let objective = sphere_objective(dim);
    let params = PsoParams { particles, iterations, ..PsoParams::default() };
    (0..seeds)
        .filter(|&s| pso_optimize(&objective, &params, s).map(|r| r.best_value < target).unwrap_or(false))
        .count()
}

/// The incumbent never gets worse and the evaluation count never drops.
pub fn check_trace(result: &OptimizationResult) -> Result<(), String> {
    for w in result.trace.windows(2) {
        if w[1].best_value > w[0].best_value {
            return Err(format!("incumbent rose from {} to {} at iteration {}", w[0].best_value, w[1].best_value, w[1].iteration));
        }
        if w[1].evaluations < w[0].evaluations {
            return Err(format!("evaluation count fell at iteration {}", w[1].iteration));
        }
    }
    match result.trace.last() {
        Some(last) if last.best_value != result.best_value => Err("final trace row differs from the result".into()),
        _ => Ok(()),
    }
}
