use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pattern::{pattern_search, PatternParams};
use super::{evaluate_batch, uniform_in, Objective, OptimizationResult, TraceRow};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PsoParams {
    pub particles: usize,
    pub iterations: usize,
    pub chi: f64,
    pub omega: f64,
    pub c1: f64,
    pub c2: f64,
    /// Use `r1 = r2 = 1` instead of random factors.
    pub deterministic: bool,
    /// Generations without improvement of the global best before a local
    /// search is started from it. `None` disables the local search.
    pub stagnation: Option<usize>,
    pub local_search: PatternParams,
    /// Two particles closer than this fraction of the box diagonal are
    /// considered crowded and one of them is moved.
    pub crowding: f64,
    pub max_resamples: usize,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            particles: 30,
            iterations: 100,
            chi: 1.0,
            omega: 0.729,
            c1: 1.494,
            c2: 1.494,
            deterministic: false,
            stagnation: Some(10),
            local_search: PatternParams { initial_step: 0.05, min_step: 0.005, max_evaluations: Some(60) },
            crowding: 1e-3,
            max_resamples: 10_000,
        }
    }
}

/// `chi * (omega v + c1 r1 (p - x) + c2 r2 (b - x))`, component-wise.
pub fn velocity_update(x: &[f64], v: &[f64], p: &[f64], b: &[f64], r1: &[f64], r2: &[f64], params: &PsoParams) -> Vec<f64> {
    (0..x.len())
        .map(|k| params.chi * (params.omega * v[k] + params.c1 * r1[k] * (p[k] - x[k]) + params.c2 * r2[k] * (b[k] - x[k])))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub best_x: Vec<f64>,
    pub best_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub best_x: Vec<f64>,
    pub best_value: f64,
    pub iteration: usize,
    pub evaluations: usize,
}

const PRIMES: [u32; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

fn radical_inverse(mut k: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base as u64) as f64 * inv;
        k /= base as u64;
        inv /= b;
    }
    out
}

/// Halton points with a random shift modulo one per axis.
fn shifted_halton<R: Rng>(rng: &mut R, count: usize, bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let shift: Vec<f64> = (0..bounds.len()).map(|_| rng.gen::<f64>()).collect();
    (0..count)
        .map(|k| {
            bounds
                .iter()
                .enumerate()
                .map(|(d, &(lo, hi))| {
                    let u = if d < PRIMES.len() { radical_inverse(k as u64 + 1, PRIMES[d]) } else { rng.gen() };
                    lo + (hi - lo) * ((u + shift[d]) % 1.0)
                })
                .collect()
        })
        .collect()
}

fn diagonal(bounds: &[(f64, f64)]) -> f64 {
    bounds.iter().map(|&(lo, hi)| (hi - lo) * (hi - lo)).sum::<f64>().sqrt()
}

/// Re-draws every infeasible position uniformly in the box (halving its
/// velocity) until feasible, then spreads out particles that sit on top of
/// each other. No objective evaluations are made. Returns the number of
/// re-draws.
pub fn repair_feasibility<O: Objective + ?Sized, R: Rng>(
    objective: &O,
    positions: &mut [Vec<f64>],
    velocities: &mut [Vec<f64>],
    params: &PsoParams,
    rng: &mut R,
) -> Result<usize> {
    let bounds = objective.bounds();
    let mut redraws = 0;
    for (x, v) in positions.iter_mut().zip(velocities.iter_mut()) {
        if !objective.is_feasible(x) {
            redraw(objective, x, v, params, rng)?;
            redraws += 1;
        }
    }
    let min_gap = params.crowding * diagonal(bounds);
    for a in 1..positions.len() {
        let mut attempts = 0;
        while (0..a).any(|b| distance(&positions[a], &positions[b]) < min_gap) {
            if attempts >= params.max_resamples {
                return Err(Error::NoFeasiblePoint(attempts));
            }
            let (x, v) = (&mut positions[a], &mut velocities[a]);
            redraw(objective, x, v, params, rng)?;
            redraws += 1;
            attempts += 1;
        }
    }
    Ok(redraws)
}

fn redraw<O: Objective + ?Sized, R: Rng>(objective: &O, x: &mut Vec<f64>, v: &mut [f64], params: &PsoParams, rng: &mut R) -> Result<()> {
    for e in v.iter_mut() {
        *e *= 0.5;
    }
    for _ in 0..params.max_resamples {
        *x = uniform_in(rng, objective.bounds());
        if objective.is_feasible(x) {
            return Ok(());
        }
    }
    Err(Error::NoFeasiblePoint(params.max_resamples))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Feasible initial swarm on shifted Halton points, velocities uniform in a
/// quarter of the box width, all particles evaluated.
pub fn initialize_swarm<O: Objective + ?Sized, R: Rng>(objective: &O, params: &PsoParams, rng: &mut R) -> Result<SwarmState> {
    if params.particles == 0 {
        return Err(Error::Argument("swarm needs at least one particle".into()));
    }
    let bounds = objective.bounds();
    let mut xs = shifted_halton(rng, params.particles, bounds);
    let mut vs: Vec<Vec<f64>> = (0..params.particles)
        .map(|_| {
            bounds
                .iter()
                .map(|&(lo, hi)| {
                    let w = 0.25 * (hi - lo);
                    if w > 0.0 {
                        rng.gen_range(-w..=w)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    repair_feasibility(objective, &mut xs, &mut vs, params, rng)?;
    let values = evaluate_batch(objective, &xs)?;
    let particles: Vec<Particle> = xs
        .into_iter()
        .zip(vs)
        .zip(&values)
        .map(|((x, v), &f)| Particle { best_x: x.clone(), x, v, best_value: f })
        .collect();
    let (best_x, best_value) = best_of(&particles);
    Ok(SwarmState { particles, best_x, best_value, iteration: 0, evaluations: values.len() })
}

fn best_of(particles: &[Particle]) -> (Vec<f64>, f64) {
    let mut best = 0;
    for (k, p) in particles.iter().enumerate() {
        if p.best_value < particles[best].best_value {
            best = k;
        }
    }
    (particles[best].best_x.clone(), particles[best].best_value)
}

/// One generation: move every particle, repair, evaluate the whole swarm and
/// update the personal and global bests.
pub fn pso_step<O: Objective + ?Sized, R: Rng>(
    state: &mut SwarmState,
    objective: &O,
    params: &PsoParams,
    rng: &mut R,
) -> Result<()> {
    let dim = state.best_x.len();
    let mut xs = Vec::with_capacity(state.particles.len());
    let mut vs = Vec::with_capacity(state.particles.len());
    for p in &state.particles {
        let (r1, r2): (Vec<f64>, Vec<f64>) = if params.deterministic {
            (vec![1.0; dim], vec![1.0; dim])
        } else {
            ((0..dim).map(|_| rng.gen()).collect(), (0..dim).map(|_| rng.gen()).collect())
        };
        let v = velocity_update(&p.x, &p.v, &p.best_x, &state.best_x, &r1, &r2, params);
        let x: Vec<f64> = p.x.iter().zip(&v).map(|(a, b)| a + b).collect();
        xs.push(x);
        vs.push(v);
    }
    repair_feasibility(objective, &mut xs, &mut vs, params, rng)?;
    let values = evaluate_batch(objective, &xs)?;
    state.evaluations += values.len();
    for ((p, x), (v, f)) in state.particles.iter_mut().zip(xs).zip(vs.into_iter().zip(values)) {
        if f < p.best_value {
            p.best_value = f;
            p.best_x = x.clone();
        }
        p.x = x;
        p.v = v;
    }
    let (bx, bv) = best_of(&state.particles);
    if bv < state.best_value {
        state.best_value = bv;
        state.best_x = bx;
    }
    state.iteration += 1;
    Ok(())
}

/// Particle swarm minimization with a local pattern search whenever the
/// global best stalls.
pub fn pso_optimize<O: Objective + ?Sized>(objective: &O, params: &PsoParams, seed: u64) -> Result<OptimizationResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = initialize_swarm(objective, params, &mut rng)?;
    let mut trace = vec![TraceRow {
        iteration: 0,
        evaluations: state.evaluations,
        best_value: state.best_value,
        best_design: state.best_x.clone(),
    }];
    let mut stalled = 0;
    for _ in 0..params.iterations {
        let before = state.best_value;
        pso_step(&mut state, objective, params, &mut rng)?;
        if state.best_value < before {
            stalled = 0;
        } else {
            stalled += 1;
        }
        if params.stagnation.is_some_and(|s| stalled >= s) {
            stalled = 0;
            let local = pattern_search(objective, &state.best_x, &params.local_search)?;
            state.evaluations += local.evaluations;
            if local.best_value < state.best_value {
                log::debug!("local search improved {} -> {}", state.best_value, local.best_value);
                state.best_value = local.best_value;
                state.best_x = local.best_design;
            }
        }
        trace.push(TraceRow {
            iteration: state.iteration,
            evaluations: state.evaluations,
            best_value: state.best_value,
            best_design: state.best_x.clone(),
        });
    }
    Ok(OptimizationResult {
        best_design: state.best_x,
        best_value: state.best_value,
        evaluations: state.evaluations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::FnObjective;

    #[test]
    fn forced_unit_factors_update() {
        let p = PsoParams::default();
        let v = velocity_update(&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0], &[4.0, 0.0], &[1.0; 2], &[1.0; 2], &p);
        assert!((v[0] - 9.693).abs() < 1e-12);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn particle_at_the_best_stays_put() {
        let p = PsoParams::default();
        let x = [0.3, -0.2];
        let v = velocity_update(&x, &[0.0; 2], &x, &x, &[0.7, 0.1], &[0.2, 0.9], &p);
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn halton_points_fill_the_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = vec![(-1.0, 1.0), (0.0, 10.0), (2.0, 2.0)];
        for x in shifted_halton(&mut rng, 50, &b) {
            assert!(super::super::in_box(&x, &b));
        }
        assert!((radical_inverse(3, 2) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn coincident_particles_are_spread() {
        let obj = FnObjective::new(vec![(0.0, 1.0); 2], |x: &[f64]| x[0]);
        let p = PsoParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut xs = vec![vec![0.5, 0.5]; 3];
        let mut vs = vec![vec![0.0; 2]; 3];
        repair_feasibility(&obj, &mut xs, &mut vs, &p, &mut rng).unwrap();
        let gap = p.crowding * 2f64.sqrt();
        for a in 0..3 {
            for b in 0..a {
                assert!(distance(&xs[a], &xs[b]) >= gap);
            }
        }
    }

    #[test]
    fn empty_feasible_set_aborts() {
        let obj = FnObjective::with_constraint(vec![(0.0, 1.0)], |x: &[f64]| x[0], |_: &[f64]| false);
        let p = PsoParams { max_resamples: 100, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(initialize_swarm(&obj, &p, &mut rng), Err(Error::NoFeasiblePoint(100))));
    }
}
