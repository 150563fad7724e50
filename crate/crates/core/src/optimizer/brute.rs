use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{evaluate_batch, uniform_in, Objective, OptimizationResult, TraceRow};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceParams {
    pub points_per_round: usize,
    pub rounds: usize,
    /// Width factor applied to the sampling box after every round.
    pub shrink: f64,
}

impl Default for BruteForceParams {
    fn default() -> Self {
        BruteForceParams { points_per_round: 300, rounds: 50, shrink: 12.0 / 13.0 }
    }
}

/// Recursive uniform sampling: every round samples the current box, then the
/// box is re-centred on the incumbent and narrowed by `shrink`, staying
/// inside the original box. Infeasible samples are dropped unevaluated.
pub fn brute_force_search<O: Objective + ?Sized>(objective: &O, params: &BruteForceParams, seed: u64) -> Result<OptimizationResult> {
    if params.points_per_round == 0 {
        return Err(Error::Argument("points_per_round must be at least 1".into()));
    }
    if !(params.shrink > 0.0 && params.shrink < 1.0) {
        return Err(Error::Argument(format!("shrink must lie in (0, 1), got {}", params.shrink)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = objective.bounds().to_vec();
    let mut bounds = full.clone();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0;
    let mut trace = Vec::with_capacity(params.rounds);
    let mut width = 1.0;
    for round in 0..params.rounds {
        let candidates: Vec<Vec<f64>> = (0..params.points_per_round)
            .map(|_| uniform_in(&mut rng, &bounds))
            .filter(|x| objective.is_feasible(x))
            .collect();
        let values = evaluate_batch(objective, &candidates)?;
        evaluations += values.len();
        for (x, v) in candidates.into_iter().zip(values) {
            if best.as_ref().map_or(true, |(_, b)| v < *b) {
                best = Some((x, v));
            }
        }
        if let Some((x, v)) = &best {
            trace.push(TraceRow { iteration: round, evaluations, best_value: *v, best_design: x.clone() });
            width *= params.shrink;
            bounds = full
                .iter()
                .zip(x)
                .map(|(&(lo, hi), &c)| {
                    let half = 0.5 * width * (hi - lo);
                    ((c - half).max(lo), (c + half).min(hi))
                })
                .collect();
        }
    }
    let (best_design, best_value) = best.ok_or(Error::NoFeasiblePoint(params.points_per_round * params.rounds))?;
    Ok(OptimizationResult { best_design, best_value, evaluations, trace })
}
