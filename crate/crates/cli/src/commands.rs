use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use evacopt::analysis::{default_sweep_points, gci as gci_report, sensitivity_sweep, sweep_rows, SweepPoint, SWEEP_HEADER};
use evacopt::geometry::ConstraintSpec;
use evacopt::io::{format_value, write_json, write_table};
use evacopt::optimizer::{
    brute_force_search, pattern_search, pso_optimize, BruteForceParams, EvacuationObjective, OptimizationResult, PatternParams,
    PsoParams, TRACE_HEADER,
};
use evacopt::{EvacuationResult, Outcome, RunOptions, Scenario, ScenarioConfig, Simulation};

use crate::settings::{self, switch, RunSettings};
use crate::{BruteForceArgs, GciArgs, MethodArg, OptimizeArgs, SimulateArgs, SweepArgs};

/// Prints a line; a closed stdout is not an error.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

pub enum Status {
    Done,
    Timeout,
}

const DEFAULT_SEED: u64 = 1;

fn prepare(out: &Path, cfg: &ScenarioConfig, run: &RunSettings) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_json(&out.join("manifest.json"), &settings::manifest(cfg, run)?)?;
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> Result<Status> {
    let (cfg, file) = settings::load(&a.scenario, None)?;
    let design = a.obstacle_design.clone().or(file.obstacle_design.clone());
    let frames = a.scenario.frames.or(file.frames).unwrap_or(0);
    let dump = switch(a.dump_fields, file.dump_fields);
    let mut run = RunSettings {
        command: Some("simulate".into()),
        frames: Some(frames),
        dump_fields: Some(dump),
        ..RunSettings::default()
    };
    let base = Scenario::from_config(&cfg)?;
    let scenario = match &design {
        Some(x) => {
            let (mode, spec) = settings::design(&a.design, &file, ConstraintSpec::default());
            run.mode = Some(mode);
            run.constraints = Some(spec);
            run.obstacle_design = Some(x.clone());
            prepare(&a.scenario.out, &cfg, &run)?;
            EvacuationObjective::new(base, mode, spec).realize(x)?
        }
        None => {
            prepare(&a.scenario.out, &cfg, &run)?;
            base
        }
    };
    let out = &a.scenario.out;
    let sim = Simulation::new(&scenario)?;
    if dump {
        let f = sim.fields();
        f.phi.write_csv(&out.join("phi.csv"))?;
        f.phi_obs.write_csv(&out.join("phi_obs.csv"))?;
        f.vdes.write_csv(&out.join("vdes.csv"))?;
        scenario.grid().write_labels_csv(&out.join("labels.csv"))?;
    }
    let result = run_with_frames(&scenario, sim, frames)?;
    write_run(out, &result)
}

/// Runs with the mass history recorded and writes the initial density plus
/// `frames` evenly spaced ones. Spacing needs the final time, so a first
/// pass without snapshots finds it.
fn run_with_frames(scenario: &Scenario, sim: Simulation<'_>, frames: usize) -> Result<EvacuationResult> {
    let mut options = RunOptions { record_history: true, snapshot_times: vec![0.0] };
    if frames > 0 {
        let fields = sim.fields().clone();
        let t_end = Simulation::with_fields(scenario, fields.clone()).run(&RunOptions::default())?.outcome_time();
        if t_end > 0.0 {
            options.snapshot_times.extend((1..=frames).map(|k| t_end * k as f64 / frames as f64));
        }
        return Ok(Simulation::with_fields(scenario, fields).run(&options)?);
    }
    Ok(sim.run(&options)?)
}

trait OutcomeTime {
    fn outcome_time(&self) -> f64;
}

impl OutcomeTime for EvacuationResult {
    fn outcome_time(&self) -> f64 {
        match self.outcome {
            Outcome::Evacuated { time } | Outcome::Timeout { time, .. } => time,
        }
    }
}

fn write_run(out: &Path, result: &EvacuationResult) -> Result<Status> {
    write_table(
        &out.join("mass_history.csv"),
        &["t", "mass"],
        result.mass_history.iter().map(|&(t, m)| vec![format_value(t), format_value(m)]),
    )?;
    let mut frames = Vec::new();
    let mut last = None;
    for s in &result.snapshots {
        // several requested times can fall on the same step
        if last == Some(s.t) {
            continue;
        }
        last = Some(s.t);
        let name = format!("rho_t{:.6}.csv", s.t);
        s.rho.write_csv(&out.join(&name))?;
        frames.push(json!({ "file": name, "t": s.t }));
    }
    let shares: Vec<f64> = (0..result.exit_outflow.len()).map(|k| result.exit_share(k)).collect();
    let record = json!({
        "outcome": result.outcome,
        "evacuation_time": result.evacuation_time(),
        "objective": result.objective(),
        "steps": result.steps,
        "exit_outflow": result.exit_outflow,
        "exit_share": shares,
        "clipped_mass": result.clipped_mass,
        "frames": frames,
    });
    write_json(&out.join("result.json"), &record)?;
    match result.outcome {
        Outcome::Evacuated { time } => {
            say(&format!("evacuated at t = {time:.6}"));
            Ok(Status::Done)
        }
        Outcome::Timeout { time, remaining_mass } => {
            say(&format!("timeout at t = {time:.6} with mass {remaining_mass:.6e} left"));
            Ok(Status::Timeout)
        }
    }
}

/// Writes best design, trace, obstacle mask and a replay of the best design.
fn finish_optimization(
    out: &Path,
    objective: &EvacuationObjective,
    result: &OptimizationResult,
    baseline: f64,
    frames: usize,
) -> Result<Status> {
    write_table(&out.join("trace.csv"), &TRACE_HEADER, result.trace_rows())?;
    let scenario = objective.realize(&result.best_design)?;
    scenario.grid().write_labels_csv(&out.join("obstacle_mask.csv"))?;
    let improvement = if baseline != 0.0 { 100.0 * (result.best_value - baseline) / baseline } else { 0.0 };
    let verdict = objective.verdict(&result.best_design);
    write_json(
        &out.join("best.json"),
        &json!({
            "best_design": result.best_design,
            "best_value": result.best_value,
            "baseline": baseline,
            "improvement_pct": improvement,
            "evaluations": result.evaluations,
            "simulations": objective.simulations(),
            "area_fraction": verdict.area_fraction,
        }),
    )?;
    say(&format!("best {:.6} (baseline {baseline:.6}, {improvement:+.2}%) after {} evaluations", result.best_value, result.evaluations));
    let sim = Simulation::new(&scenario)?;
    write_run(out, &run_with_frames(&scenario, sim, frames)?)?;
    Ok(Status::Done)
}

fn pso_params(particles: Option<usize>, iterations: Option<usize>, deterministic: bool, local_search: bool) -> PsoParams {
    let d = PsoParams::default();
    PsoParams {
        particles: particles.unwrap_or(d.particles),
        iterations: iterations.unwrap_or(d.iterations),
        deterministic,
        stagnation: if local_search { d.stagnation } else { None },
        ..d
    }
}

pub fn optimize(a: OptimizeArgs) -> Result<Status> {
    let (cfg, file) = settings::load(&a.scenario, None)?;
    let (mode, spec) = settings::design(&a.design, &file, ConstraintSpec::default());
    let method = match a.method {
        Some(m) => m,
        None => match file.method.as_deref() {
            None | Some("pso") => MethodArg::Pso,
            Some("pattern") => MethodArg::Pattern,
            Some(other) => bail!("unknown method `{other}` in the run block"),
        },
    };
    let frames = a.scenario.frames.or(file.frames).unwrap_or(0);
    let mut run = RunSettings {
        command: Some("optimize".into()),
        mode: Some(mode),
        constraints: Some(spec),
        frames: Some(frames),
        ..RunSettings::default()
    };
    let objective = EvacuationObjective::new(Scenario::from_config(&cfg)?, mode, spec);
    let result = match method {
        MethodArg::Pso => {
            let seed = a.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
            let params = pso_params(
                a.particles.or(file.particles),
                a.iters.or(file.iterations),
                switch(a.deterministic_pso, file.deterministic_pso),
                !a.no_local_search && file.local_search.unwrap_or(true),
            );
            run.method = Some("pso".into());
            run.seed = Some(seed);
            run.particles = Some(params.particles);
            run.iterations = Some(params.iterations);
            run.deterministic_pso = Some(params.deterministic);
            run.local_search = Some(params.stagnation.is_some());
            prepare(&a.scenario.out, &cfg, &run)?;
            pso_optimize(&objective, &params, seed)?
        }
        MethodArg::Pattern => {
            let start = a.start.clone().or(file.start.clone()).context("pattern search needs --start")?;
            let d = PatternParams::default();
            let params = PatternParams {
                initial_step: a.step.or(file.step).unwrap_or(d.initial_step),
                min_step: a.min_step.or(file.min_step).unwrap_or(d.min_step),
                max_evaluations: a.max_evals.or(file.max_evaluations).or(d.max_evaluations),
            };
            run.method = Some("pattern".into());
            run.start = Some(start.clone());
            run.step = Some(params.initial_step);
            run.min_step = Some(params.min_step);
            run.max_evaluations = params.max_evaluations;
            prepare(&a.scenario.out, &cfg, &run)?;
            pattern_search(&objective, &start, &params)?
        }
    };
    let baseline = objective.baseline()?;
    finish_optimization(&a.scenario.out, &objective, &result, baseline, frames)
}

pub fn brute_force(a: BruteForceArgs) -> Result<Status> {
    let (cfg, file) = settings::load(&a.scenario, None)?;
    let (mode, spec) = settings::design(&a.design, &file, ConstraintSpec::default());
    let frames = a.scenario.frames.or(file.frames).unwrap_or(0);
    let seed = a.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let d = BruteForceParams::default();
    let params = BruteForceParams {
        points_per_round: a.points.or(file.points).unwrap_or(d.points_per_round),
        rounds: a.rounds.or(file.rounds).unwrap_or(d.rounds),
        shrink: a.shrink.or(file.shrink).unwrap_or(d.shrink),
    };
    let run = RunSettings {
        command: Some("brute-force".into()),
        mode: Some(mode),
        constraints: Some(spec),
        seed: Some(seed),
        points: Some(params.points_per_round),
        rounds: Some(params.rounds),
        shrink: Some(params.shrink),
        frames: Some(frames),
        ..RunSettings::default()
    };
    prepare(&a.scenario.out, &cfg, &run)?;
    let objective = EvacuationObjective::new(Scenario::from_config(&cfg)?, mode, spec);
    let result = brute_force_search(&objective, &params, seed)?;
    let baseline = objective.baseline()?;
    finish_optimization(&a.scenario.out, &objective, &result, baseline, frames)
}

pub fn gci(a: GciArgs) -> Result<Status> {
    let report = gci_report(a.f_coarse, a.f_medium, a.f_fine, a.ratio, a.safety_factor)?;
    say(&serde_json::to_string_pretty(&report)?);
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        write_json(
            &out.join("manifest.json"),
            &json!({
                "command": "gci",
                "values": [a.f_coarse, a.f_medium, a.f_fine],
                "ratio": a.ratio,
                "safety_factor": a.safety_factor,
            }),
        )?;
        write_json(&out.join("gci.json"), &report)?;
    }
    Ok(Status::Done)
}

/// Cells per side of the sweep unless the scenario sets one.
const SWEEP_N: usize = 50;

pub fn sweep(a: SweepArgs) -> Result<Status> {
    let mut scenario_args = a.scenario.clone();
    if scenario_args.config.is_none() && scenario_args.n.is_none() {
        scenario_args.n = Some(SWEEP_N);
    }
    let (cfg, file) = settings::load(&scenario_args, Some("test_A"))?;
    let (mode, spec) = settings::design(&a.design, &file, ConstraintSpec::default());
    let seed = a.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let corners = switch(a.corners, file.corners);
    let params = pso_params(a.particles.or(file.particles), a.iters.or(file.iterations), false, true);
    let run = RunSettings {
        command: Some("sweep".into()),
        mode: Some(mode),
        constraints: Some(spec),
        seed: Some(seed),
        particles: Some(params.particles),
        iterations: Some(params.iterations),
        corners: Some(corners),
        ..RunSettings::default()
    };
    prepare(&a.scenario.out, &cfg, &run)?;
    let points = if corners {
        vec![SweepPoint { rho_in: 0.75, c_rep: 6.0 }, SweepPoint { rho_in: 1.5, c_rep: 18.0 }]
    } else {
        default_sweep_points()
    };
    let rows = sensitivity_sweep(&cfg, &points, mode, &spec, &params, seed);
    write_table(&a.scenario.out.join("sweep.csv"), &SWEEP_HEADER, sweep_rows(&rows))?;
    write_json(&a.scenario.out.join("sweep.json"), &rows)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} sweep points failed; see sweep.csv", rows.len());
    }
    say(&format!("{} sweep points written", rows.len()));
    Ok(Status::Done)
}
