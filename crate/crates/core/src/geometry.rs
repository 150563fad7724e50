//! Obstacle shapes: closed smooth Bézier curves and staggered circles, their
//! rasterization onto the grid, and the feasibility constraints of a design.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::vec2::Vec2;

/// Curve samples used by the inner-region test.
pub const CURVE_SAMPLES: usize = 200;

/// Cross products below this are treated as "on the tangent line".
const ON_LINE: f64 = 1e-12;

/// Point on the Bézier curve with control points `ctrl` (de Casteljau).
pub fn bezier_point(ctrl: &[Vec2], t: f64) -> Result<Vec2> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Parameter(t));
    }
    if ctrl.is_empty() {
        return Err(Error::Degenerate("no control points".into()));
    }
    let mut pts = ctrl.to_vec();
    for level in (1..pts.len()).rev() {
        for k in 0..level {
            pts[k] = pts[k] * (1.0 - t) + pts[k + 1] * t;
        }
    }
    Ok(pts[0])
}

/// Derivative `B'(t) = m * sum_k (P_{k+1} - P_k) b_{k,m-1}(t)`.
pub fn bezier_derivative(ctrl: &[Vec2], t: f64) -> Result<Vec2> {
    if ctrl.len() < 2 {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Parameter(t));
        }
        return Ok(Vec2::ZERO);
    }
    let m = (ctrl.len() - 1) as f64;
    let diffs: Vec<Vec2> = ctrl.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(bezier_point(&diffs, t)? * m)
}

/// Closed quartic with matching tangents at the joint: `[P0, P1, P2, 2 P0 - P1, P0]`.
pub fn closed_control_points(p0: Vec2, p1: Vec2, p2: Vec2) -> [Vec2; 5] {
    [p0, p1, p2, p0 * 2.0 - p1, p0]
}

/// Control points of obstacle `k` of a Bézier design vector (six numbers per
/// obstacle: `x0 y0 x1 y1 x2 y2`).
pub fn bezier_controls(design: &[f64], k: usize) -> [Vec2; 5] {
    let d = &design[6 * k..6 * k + 6];
    closed_control_points(Vec2::new(d[0], d[1]), Vec2::new(d[2], d[3]), Vec2::new(d[4], d[5]))
}

/// Cells whose centre lies on the inner side of every sampled tangent line of
/// the closed curve.
pub fn rasterize_bezier(grid: &Grid, ctrl: &[Vec2; 5]) -> Result<Vec<usize>> {
    if ctrl[0].distance(ctrl[1]) < ON_LINE {
        return Err(Error::Degenerate("first two control points coincide".into()));
    }
    let mut samples = Vec::with_capacity(CURVE_SAMPLES);
    for k in 0..CURVE_SAMPLES {
        let t = k as f64 / CURVE_SAMPLES as f64;
        samples.push((bezier_point(ctrl, t)?, bezier_derivative(ctrl, t)?));
    }
    // orientation of the sampled polygon
    let mut twice_area = 0.0;
    for k in 0..CURVE_SAMPLES {
        let a = samples[k].0;
        let b = samples[(k + 1) % CURVE_SAMPLES].0;
        twice_area += a.cross(b);
    }
    if twice_area.abs() < ON_LINE {
        return Err(Error::Degenerate("curve encloses no area".into()));
    }
    let sign = twice_area.signum();

    let (lo, hi) = bounding_box(ctrl);
    let n = grid.n();
    let h = grid.h();
    let range = |a: f64, b: f64| {
        let first = ((a / h - 0.5).ceil().max(0.0)) as usize;
        let last = ((b / h - 0.5).floor().min(n as f64 - 1.0)).max(-1.0);
        (first, last as isize)
    };
    let (i0, i1) = range(lo.x, hi.x);
    let (j0, j1) = range(lo.y, hi.y);
    let mut cells = Vec::new();
    for j in j0 as isize..=j1 {
        for i in i0 as isize..=i1 {
            let c = grid.center(i as usize, j as usize);
            let mut decisive = false;
            let mut inside = true;
            for &(p, d) in &samples {
                let cr = d.cross(c - p) * sign;
                if cr.abs() < ON_LINE {
                    continue;
                }
                if cr < 0.0 {
                    inside = false;
                    break;
                }
                decisive = true;
            }
            if inside && decisive {
                cells.push(grid.idx(i as usize, j as usize));
            }
        }
    }
    Ok(cells)
}

fn bounding_box(pts: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn cells(&self, grid: &Grid) -> Vec<usize> {
        let n = grid.n();
        let mut out = Vec::new();
        for j in 0..n {
            for i in 0..n {
                if grid.center(i, j).distance(self.center) <= self.radius {
                    out.push(grid.idx(i, j));
                }
            }
        }
        out
    }
}

/// Diameter of each of `count` staggered circles.
pub fn circle_diameter(count: usize) -> f64 {
    0.5 / count as f64 - 0.01
}

/// `count` circles evenly spaced across the right half of the room, at the
/// heights `ys` (one per circle, left to right).
pub fn staggered_circles(ys: &[f64]) -> Vec<Circle> {
    let count = ys.len();
    let radius = 0.5 * circle_diameter(count);
    ys.iter()
        .enumerate()
        .map(|(k, &y)| Circle { center: Vec2::new(0.5 + (k as f64 + 0.5) * 0.5 / count as f64, y), radius })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObstacleMode {
    Bezier { count: usize },
    Circles { count: usize },
}

impl ObstacleMode {
    pub fn count(&self) -> usize {
        match *self {
            ObstacleMode::Bezier { count } | ObstacleMode::Circles { count } => count,
        }
    }

    pub fn dimension(&self) -> usize {
        match *self {
            ObstacleMode::Bezier { count } => 6 * count,
            ObstacleMode::Circles { count } => count,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    /// Width of the band along the room border kept free of obstacles.
    pub margin_cells: usize,
    /// Bounds on the total obstacle area as a fraction of the room.
    pub area_min_frac: f64,
    pub area_max_frac: f64,
    pub forbid_overlap: bool,
}

// A single closed quartic with a mirrored tangent encloses at most about 8.7%
// of the room inside a 3-cell margin, so a 10% floor would leave nothing.
impl Default for ConstraintSpec {
    fn default() -> Self {
        ConstraintSpec { margin_cells: 3, area_min_frac: 0.05, area_max_frac: 0.25, forbid_overlap: true }
    }
}

/// Box of admissible design values, one `(lo, hi)` per variable.
pub fn design_bounds(mode: ObstacleMode, grid: &Grid, spec: &ConstraintSpec) -> Vec<(f64, f64)> {
    let m = spec.margin_cells as f64 * grid.h();
    match mode {
        ObstacleMode::Bezier { count } => vec![(m, 1.0 - m); 6 * count],
        ObstacleMode::Circles { count } => {
            let r = 0.5 * circle_diameter(count);
            vec![(m + r, 1.0 - m - r); count]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    WrongDimension { expected: usize, got: usize },
    OutsideBox { variable: usize, value: f64 },
    Degenerate { obstacle: usize, reason: String },
    AreaTooSmall { fraction: f64, min: f64 },
    AreaTooLarge { fraction: f64, max: f64 },
    Overlap { a: usize, b: usize },
    /// Walkable cells cut off from every exit.
    Disconnected { cells: usize },
}

/// Outcome of a feasibility check.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub violations: Vec<Violation>,
    /// Union of the obstacle cells (sorted), when the design could be drawn.
    pub cells: Option<Vec<usize>>,
    pub area_fraction: f64,
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Obstacle cells of every obstacle of `design`, or the reason one cannot
/// be drawn.
pub fn rasterize_design(mode: ObstacleMode, grid: &Grid, design: &[f64]) -> Result<Vec<Vec<usize>>> {
    if design.len() != mode.dimension() {
        return Err(Error::Argument(format!(
            "design has {} values, mode needs {}",
            design.len(),
            mode.dimension()
        )));
    }
    match mode {
        ObstacleMode::Bezier { count } => (0..count).map(|k| rasterize_bezier(grid, &bezier_controls(design, k))).collect(),
        ObstacleMode::Circles { .. } => Ok(staggered_circles(design).iter().map(|c| c.cells(grid)).collect()),
    }
}

/// Checks every constraint and reports all that fail.
pub fn check_constraints(mode: ObstacleMode, spec: &ConstraintSpec, grid: &Grid, design: &[f64]) -> Verdict {
    let mut violations = Vec::new();
    if design.len() != mode.dimension() {
        violations.push(Violation::WrongDimension { expected: mode.dimension(), got: design.len() });
        return Verdict { violations, cells: None, area_fraction: 0.0 };
    }
    let bounds = design_bounds(mode, grid, spec);
    for (k, (&x, &(lo, hi))) in design.iter().zip(&bounds).enumerate() {
        if !(x >= lo - 1e-12 && x <= hi + 1e-12) {
            violations.push(Violation::OutsideBox { variable: k, value: x });
        }
    }
    // the implied fourth control point must stay in the box as well
    if let ObstacleMode::Bezier { count } = mode {
        let (lo, hi) = bounds[0];
        for k in 0..count {
            let p3 = bezier_controls(design, k)[3];
            for (axis, v) in [(0, p3.x), (1, p3.y)] {
                if !(v >= lo - 1e-12 && v <= hi + 1e-12) {
                    violations.push(Violation::OutsideBox { variable: 6 * k + axis, value: v });
                }
            }
        }
    }

    let mut shapes = Vec::with_capacity(mode.count());
    for k in 0..mode.count() {
        let cells = match mode {
            ObstacleMode::Bezier { .. } => rasterize_bezier(grid, &bezier_controls(design, k)),
            ObstacleMode::Circles { .. } => Ok(staggered_circles(design)[k].cells(grid)),
        };
        match cells {
            Ok(c) => shapes.push(c),
            Err(e) => {
                violations.push(Violation::Degenerate { obstacle: k, reason: e.to_string() });
                shapes.push(Vec::new());
            }
        }
    }

    let mut union: Vec<usize> = shapes.iter().flatten().copied().collect();
    union.sort_unstable();
    union.dedup();
    let total: usize = shapes.iter().map(Vec::len).sum();
    if spec.forbid_overlap && total != union.len() {
        for a in 0..shapes.len() {
            for b in a + 1..shapes.len() {
                if shapes[a].iter().any(|c| shapes[b].contains(c)) {
                    violations.push(Violation::Overlap { a, b });
                }
            }
        }
    }

    let h = grid.h();
    let area_fraction = union.len() as f64 * h * h;
    if area_fraction < spec.area_min_frac {
        violations.push(Violation::AreaTooSmall { fraction: area_fraction, min: spec.area_min_frac });
    }
    if area_fraction > spec.area_max_frac {
        violations.push(Violation::AreaTooLarge { fraction: area_fraction, max: spec.area_max_frac });
    }

    if !union.is_empty() {
        let stranded = grid.with_obstacles(union.iter().copied()).unreachable_cells().len();
        if stranded > 0 {
            violations.push(Violation::Disconnected { cells: stranded });
        }
    }
    Verdict { violations, cells: Some(union), area_fraction }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Geometry, Opening, Side};

    fn room(n: usize) -> Grid {
        build_grid(
            n,
            &Geometry {
                exits: vec![Opening::Segment { side: Side::Right, from: 0.4, to: 0.6 }],
                entrances: vec![],
                walls: vec![],
            },
        )
        .unwrap()
    }

    #[test]
    fn closed_curve_is_smooth_at_the_joint() {
        let c = closed_control_points(Vec2::new(0.3, 0.3), Vec2::new(0.6, 0.2), Vec2::new(0.5, 0.8));
        let start = bezier_point(&c, 0.0).unwrap();
        let end = bezier_point(&c, 1.0).unwrap();
        assert!(start.distance(end) < 1e-15);
        let d0 = bezier_derivative(&c, 0.0).unwrap();
        let d1 = bezier_derivative(&c, 1.0).unwrap();
        assert!(d0.distance(d1) < 1e-12);
        assert!(d0.distance((c[1] - c[0]) * 4.0) < 1e-12);
    }

    #[test]
    fn parameter_outside_unit_interval() {
        let c = [Vec2::ZERO, Vec2::new(1.0, 0.0)];
        assert!(matches!(bezier_point(&c, 1.5), Err(Error::Parameter(_))));
        assert!(matches!(bezier_point(&c, -0.1), Err(Error::Parameter(_))));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let c = closed_control_points(Vec2::new(0.2, 0.4), Vec2::new(0.7, 0.1), Vec2::new(0.6, 0.9));
        for &t in &[0.1, 0.37, 0.8] {
            let e = 1e-6;
            let fd = (bezier_point(&c, t + e).unwrap() - bezier_point(&c, t - e).unwrap()) * (0.5 / e);
            assert!(fd.distance(bezier_derivative(&c, t).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let g = room(50);
        let p = Vec2::new(0.5, 0.5);
        let c = closed_control_points(p, p, Vec2::new(0.6, 0.6));
        assert!(matches!(rasterize_bezier(&g, &c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn orientation_does_not_matter() {
        let g = room(50);
        let (a, b, c) = (Vec2::new(0.4, 0.5), Vec2::new(0.6, 0.3), Vec2::new(0.7, 0.7));
        let ccw = rasterize_bezier(&g, &closed_control_points(a, b, c)).unwrap();
        // mirror image through the P0 vertical traverses the other way
        let m = |p: Vec2| Vec2::new(2.0 * a.x - p.x, p.y);
        let cw = rasterize_bezier(&g, &closed_control_points(m(a), m(b), m(c))).unwrap();
        assert!(!ccw.is_empty());
        assert_eq!(ccw.len(), cw.len());
    }

    #[test]
    fn circle_layout() {
        let cs = staggered_circles(&[0.5; 6]);
        let d = 0.5 / 6.0 - 0.01;
        for (k, c) in cs.iter().enumerate() {
            assert!((c.radius - d / 2.0).abs() < 1e-15);
            assert!(c.center.x - c.radius > 0.5 - 1e-12);
            assert!(c.center.x + c.radius < 1.0);
            if k > 0 {
                let gap = c.center.x - cs[k - 1].center.x - 2.0 * c.radius;
                assert!((gap - 0.01).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constraints_report_every_violation() {
        let g = room(50);
        let spec = ConstraintSpec::default();
        // tiny triangle-ish curve touching the margin
        let design = [0.01, 0.5, 0.1, 0.5, 0.05, 0.55];
        let v = check_constraints(ObstacleMode::Bezier { count: 1 }, &spec, &g, &design);
        assert!(v.violations.iter().any(|x| matches!(x, Violation::OutsideBox { variable: 0, .. })));
        assert!(v.violations.iter().any(|x| matches!(x, Violation::AreaTooSmall { .. })));
        let v = check_constraints(ObstacleMode::Bezier { count: 1 }, &spec, &g, &[0.5; 5]);
        assert_eq!(v.violations, vec![Violation::WrongDimension { expected: 6, got: 5 }]);
    }

    #[test]
    fn overlapping_obstacles_rejected() {
        let g = room(50);
        let spec = ConstraintSpec { area_min_frac: 0.0, area_max_frac: 1.0, ..Default::default() };
        let one = [0.3, 0.3, 0.5, 0.2, 0.5, 0.5];
        let mut two = one.to_vec();
        two.extend_from_slice(&[0.32, 0.32, 0.5, 0.25, 0.45, 0.45]);
        let v = check_constraints(ObstacleMode::Bezier { count: 2 }, &spec, &g, &two);
        assert!(v.violations.contains(&Violation::Overlap { a: 0, b: 1 }));
    }

    #[test]
    fn six_circles_area() {
        let g = room(100);
        let spec = ConstraintSpec { area_min_frac: 0.0, area_max_frac: 1.0, ..Default::default() };
        let v = check_constraints(ObstacleMode::Circles { count: 6 }, &spec, &g, &[0.3, 0.7, 0.3, 0.7, 0.3, 0.7]);
        assert!(v.is_feasible(), "{:?}", v.violations);
        let exact = 6.0 * std::f64::consts::PI * (0.5 * circle_diameter(6)).powi(2);
        let h2 = g.h() * g.h();
        assert!((v.area_fraction - exact).abs() <= 6.0 * h2 * 8.0);
    }
}
