use super::{evaluate_batch, Objective, OptimizationResult, TraceRow};
use crate::error::{Error, Result};

/// Compass search settings. Steps are fractions of the box width per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternParams {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evaluations: Option<usize>,
}

impl Default for PatternParams {
    fn default() -> Self {
        PatternParams { initial_step: 0.05, min_step: 0.002, max_evaluations: None }
    }
}

/// Polls `x ± step e_i` for every axis; moves to the best improving point and
/// keeps the step, otherwise halves it. Infeasible poll points are skipped
/// without evaluation.
pub fn pattern_search<O: Objective + ?Sized>(objective: &O, start: &[f64], params: &PatternParams) -> Result<OptimizationResult> {
    if !objective.is_feasible(start) {
        return Err(Error::InfeasibleStart);
    }
    if !(params.initial_step > 0.0 && params.min_step > 0.0) {
        return Err(Error::Argument("pattern search steps must be positive".into()));
    }
    let widths: Vec<f64> = objective.bounds().iter().map(|&(lo, hi)| hi - lo).collect();
    let mut x = start.to_vec();
    let mut fx = objective.evaluate(&x)?;
    let mut evaluations = 1;
    let mut step = params.initial_step;
    let mut trace = vec![TraceRow { iteration: 0, evaluations, best_value: fx, best_design: x.clone() }];
    let budget_left = |evaluations: usize| params.max_evaluations.map_or(true, |m| evaluations < m);

    while step >= params.min_step && budget_left(evaluations) {
        let mut poll = Vec::with_capacity(2 * x.len());
        for (k, &w) in widths.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[k] += sign * step * w;
                if objective.is_feasible(&y) {
                    poll.push(y);
                }
            }
        }
        if let Some(max) = params.max_evaluations {
            poll.truncate(max.saturating_sub(evaluations));
        }
        let values = evaluate_batch(objective, &poll)?;
        evaluations += values.len();
        let mut best: Option<usize> = None;
        for (k, &v) in values.iter().enumerate() {
            if v < fx && best.map_or(true, |b| v < values[b]) {
                best = Some(k);
            }
        }
        match best {
            Some(k) => {
                fx = values[k];
                x = poll.swap_remove(k);
            }
            None => step *= 0.5,
        }
        trace.push(TraceRow { iteration: trace.len(), evaluations, best_value: fx, best_design: x.clone() });
    }
    Ok(OptimizationResult { best_design: x, best_value: fx, evaluations, trace })
}
