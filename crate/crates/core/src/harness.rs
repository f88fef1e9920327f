//! Trial and experiment runners: close the loop between simulator,
//! estimator, and controller, and write the result artifacts.

use crate::config::Config;
use crate::controller::{plan, ControllerState};
use crate::error::{Error, Result};
use crate::filter::{
    estimate as filter_estimate, init_particles, measurement_update, motion_update,
    resample_if_needed, ParticleSet,
};
use crate::geom::Vec2;
use crate::sensor::{simulate_measurements, MeasurementVector, SensingMode};
use crate::stats::{mann_whitney_u, mean, std_dev, UTestResult};
use crate::world::{HybridAction, World, WorldState};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

/// What the controller is given as its pose estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialMode {
    /// Ground truth plus small jitter; no filter in the loop.
    Fiducial,
    /// Particle filter on full-range beam readings.
    Proximity,
    /// Particle filter on readings truncated to near-contact range.
    Tactile,
}

impl TrialMode {
    pub fn all() -> [TrialMode; 3] {
        [TrialMode::Fiducial, TrialMode::Proximity, TrialMode::Tactile]
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrialMode::Fiducial => "fiducial",
            TrialMode::Proximity => "proximity",
            TrialMode::Tactile => "tactile",
        }
    }

    pub fn sensing_mode(&self, config: &Config) -> SensingMode {
        match self {
            TrialMode::Tactile => SensingMode::Tactile {
                d_tact_max: config.sensor.d_tact_max,
            },
            _ => SensingMode::Proximity,
        }
    }
}

impl fmt::Display for TrialMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrialMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fiducial" => Ok(TrialMode::Fiducial),
            "proximity" => Ok(TrialMode::Proximity),
            "tactile" => Ok(TrialMode::Tactile),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected fiducial, proximity, or tactile)"
            ))),
        }
    }
}

/// Per-control-tick trace entry, one JSON object per line in the trace file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    /// Time at the end of this control step (s).
    pub t: f64,
    /// True world state after the step.
    pub state: WorldState,
    /// Estimate handed to the controller at the start of the step.
    pub estimate: [f64; 2],
    /// Estimate error against the pre-step truth (mm).
    pub pose_error: f64,
    pub covariance: Option<[[f64; 2]; 2]>,
    pub ess: Option<f64>,
    /// Last simulated measurement of this step, absent in fiducial mode.
    pub measurement: Option<MeasurementVector>,
    pub action: HybridAction,
    /// Cost of the averaged sequence per brake configuration.
    pub config_costs: Vec<f64>,
    pub active_config: usize,
    pub switched: bool,
    /// Whether range truncation was applied to both the simulated and the
    /// expected readings this step.
    pub truncation_applied: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub mode: TrialMode,
    pub seed: u64,
    pub success: bool,
    /// Time of success, or time at which the trial stopped (s).
    pub exec_time_s: f64,
    /// Final planar distance between cylinder center and goal (mm).
    pub final_goal_distance: f64,
    /// Final |x - x_goal| (mm); success is judged on this axis.
    pub final_horizontal_distance: f64,
    /// Mean pose-estimate error over all control ticks (mm).
    pub avg_pose_error: f64,
    pub failure_reason: Option<String>,
    /// Pose error per control tick, on the control-rate grid.
    pub pose_error_trace: Vec<f64>,
}

/// Independent RNG streams per trial so that modes sharing a seed see the
/// same sensor-noise and sampling randomness where structurally possible.
fn stream(seed: u64, role: u64) -> StdRng {
    StdRng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(role + 1)))
}

/// Number of estimator updates owed during control tick `tick`, so that the
/// faster estimator rate is honored on average despite the coarser control
/// grid.
pub fn measurement_ticks(tick: usize, dt: f64, rate_hz: f64) -> usize {
    let before = (tick as f64 * dt * rate_hz).floor();
    let after = ((tick + 1) as f64 * dt * rate_hz).floor();
    (after - before) as usize
}

/// Run one closed-loop trial. Returns the outcome and the full tick trace.
pub fn run_trial(config: &Config, mode: TrialMode, seed: u64) -> Result<(TrialOutcome, Vec<TickRecord>)> {
    let world = World::new(
        config.hand.clone(),
        config.object.clone(),
        config.sim.clone(),
    );
    let mut state = world.preset_contact_pose()?;
    let goal = Vec2::new(config.object.goal_position[0], config.object.goal_position[1]);
    let start = Vec2::new(config.object.start_position[0], config.object.start_position[1]);
    let sensing = mode.sensing_mode(config);
    let dt = config.dt();
    let max_ticks = (config.trial.timeout_s / dt).ceil() as usize;
    let settle_ticks = (config.trial.settle_time_s / dt).round() as usize;

    let mut sensor_rng = stream(seed, 0);
    let mut filter_rng = stream(seed, 1);
    let mut ctrl_rng = stream(seed, 2);
    let mut jitter_rng = stream(seed, 3);
    let jitter = Normal::new(0.0, config.trial.fiducial_jitter_sigma).expect("sigma > 0");

    let mut particles: Option<ParticleSet> = match mode {
        TrialMode::Fiducial => None,
        _ => Some(init_particles(
            start,
            config.filter.init_spread,
            config.filter.num_particles,
            &mut filter_rng,
        )),
    };
    let mut ctrl = ControllerState::new(&state, &config.controller);

    let mut trace: Vec<TickRecord> = Vec::with_capacity(max_ticks);
    let mut pose_errors: Vec<f64> = Vec::with_capacity(max_ticks);
    let mut success = false;
    let mut exec_time = config.trial.timeout_s;
    let mut failure_reason: Option<String> = None;
    let mut prev_active: Option<usize> = None;
    let mut settle_remaining: Option<usize> = None;

    for tick in 0..max_ticks + settle_ticks {
        let estimate = match &particles {
            None => state.object_position
                + Vec2::new(jitter.sample(&mut jitter_rng), jitter.sample(&mut jitter_rng)),
            Some(ps) => filter_estimate(ps).0,
        };
        let pose_error = estimate.distance(state.object_position);
        pose_errors.push(pose_error);

        let planning_state = WorldState {
            joints: state.joints,
            joint_velocities: state.joint_velocities,
            object_position: estimate,
            object_velocity: Vec2::ZERO,
        };
        let (action, config_costs) = plan(
            &mut ctrl,
            &world,
            &planning_state,
            goal,
            dt,
            &config.controller,
            &mut ctrl_rng,
        );
        // expected displacement under the chosen action, from the estimate
        let expected_delta = if particles.is_some() {
            world.step(&planning_state, &action, dt)?.object_position - estimate
        } else {
            Vec2::ZERO
        };

        state = world.step(&state, &action, dt)?;
        let t = (tick + 1) as f64 * dt;

        let mut last_z: Option<MeasurementVector> = None;
        let mut degenerate = false;
        if let Some(ps) = particles.as_mut() {
            motion_update(ps, expected_delta, &config.filter.motion, &mut filter_rng);
            for _ in 0..measurement_ticks(tick, dt, config.filter.rate_hz) {
                let z = simulate_measurements(
                    &state.joints,
                    state.object_position,
                    &world.hand,
                    config.object.radius,
                    &config.sensor.noise,
                    sensing,
                    &mut sensor_rng,
                );
                match measurement_update(
                    ps,
                    &z,
                    &state.joints,
                    sensing,
                    &world.hand,
                    config.object.radius,
                    &config.filter.beam,
                ) {
                    Ok(()) => {}
                    Err(Error::DegenerateWeights) => {
                        degenerate = true;
                    }
                    Err(e) => return Err(e),
                }
                resample_if_needed(ps, config.filter.ess_threshold_fraction, &mut filter_rng);
                last_z = Some(z);
                if degenerate {
                    break;
                }
            }
        }

        let (covariance, ess) = match &particles {
            Some(ps) => {
                let (_, cov) = filter_estimate(ps);
                (Some(cov), Some(ps.effective_sample_size()))
            }
            None => (None, None),
        };
        let active = ctrl.active.expect("set by plan");
        trace.push(TickRecord {
            tick,
            t,
            state,
            estimate: [estimate.x, estimate.y],
            pose_error,
            covariance,
            ess,
            measurement: last_z,
            action,
            config_costs,
            active_config: active,
            switched: prev_active.is_some_and(|p| p != active),
            truncation_applied: matches!(sensing, SensingMode::Tactile { .. }),
        });
        prev_active = Some(active);

        if degenerate {
            failure_reason = Some("degenerate particle weights".to_string());
            exec_time = t;
            break;
        }
        match settle_remaining {
            Some(0) => break,
            Some(n) => settle_remaining = Some(n - 1),
            None => {
                if (state.object_position.x - goal.x).abs() < config.trial.success_radius {
                    success = true;
                    exec_time = t;
                    if settle_ticks == 0 {
                        break;
                    }
                    settle_remaining = Some(settle_ticks - 1);
                } else if tick + 1 >= max_ticks {
                    break;
                }
            }
        }
    }

    let outcome = TrialOutcome {
        mode,
        seed,
        success,
        exec_time_s: exec_time,
        final_goal_distance: state.object_position.distance(goal),
        final_horizontal_distance: (state.object_position.x - goal.x).abs(),
        avg_pose_error: mean(&pose_errors),
        failure_reason: failure_reason.or(if success {
            None
        } else {
            Some("timeout".to_string())
        }),
        pose_error_trace: pose_errors,
    };
    Ok((outcome, trace))
}

/// Per-mode aggregate statistics over one experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: TrialMode,
    pub n_trials: usize,
    pub success_count: usize,
    /// Over all trials of the mode.
    pub pose_error_mean: f64,
    pub pose_error_std: f64,
    pub goal_dist_all_mean: f64,
    pub goal_dist_all_std: f64,
    /// Over successful trials only.
    pub goal_dist_success_mean: f64,
    pub goal_dist_success_std: f64,
    pub exec_time_mean: f64,
    pub exec_time_std: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub modes: Vec<ModeSummary>,
    pub outcomes: Vec<TrialOutcome>,
    /// Proximity vs tactile on per-trial mean pose error (all trials).
    pub pose_error_test: Option<UTestResult>,
    /// Proximity vs tactile on final goal distance (all trials).
    pub goal_dist_test: Option<UTestResult>,
    /// Set when any trial could not be executed at all.
    pub incomplete: bool,
}

fn summarize_mode(mode: TrialMode, outcomes: &[&TrialOutcome]) -> ModeSummary {
    let pose: Vec<f64> = outcomes.iter().map(|o| o.avg_pose_error).collect();
    let dist_all: Vec<f64> = outcomes.iter().map(|o| o.final_goal_distance).collect();
    let dist_ok: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.success)
        .map(|o| o.final_goal_distance)
        .collect();
    let time_ok: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.success)
        .map(|o| o.exec_time_s)
        .collect();
    ModeSummary {
        mode,
        n_trials: outcomes.len(),
        success_count: outcomes.iter().filter(|o| o.success).count(),
        pose_error_mean: mean(&pose),
        pose_error_std: std_dev(&pose),
        goal_dist_all_mean: mean(&dist_all),
        goal_dist_all_std: std_dev(&dist_all),
        goal_dist_success_mean: mean(&dist_ok),
        goal_dist_success_std: std_dev(&dist_ok),
        exec_time_mean: mean(&time_ok),
        exec_time_std: std_dev(&time_ok),
    }
}

fn fmt_opt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        String::new()
    }
}

fn write_trials_csv(path: &Path, outcomes: &[TrialOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mode",
        "seed",
        "success",
        "exec_time_s",
        "final_goal_distance_mm",
        "final_horizontal_distance_mm",
        "avg_pose_error_mm",
        "failure_reason",
    ])?;
    for o in outcomes {
        w.write_record([
            o.mode.name().to_string(),
            o.seed.to_string(),
            (o.success as u8).to_string(),
            fmt_opt(o.exec_time_s),
            fmt_opt(o.final_goal_distance),
            fmt_opt(o.final_horizontal_distance),
            fmt_opt(o.avg_pose_error),
            o.failure_reason.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_summary_csv(path: &Path, summary: &ExperimentSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "row",
        "mode",
        "n_trials",
        "success_count",
        "pose_error_mean_mm",
        "pose_error_std_mm",
        "goal_dist_all_mean_mm",
        "goal_dist_all_std_mm",
        "goal_dist_success_mean_mm",
        "goal_dist_success_std_mm",
        "exec_time_mean_s",
        "exec_time_std_s",
        "u_statistic",
        "p_value",
    ])?;
    for m in &summary.modes {
        w.write_record([
            "mode".to_string(),
            m.mode.name().to_string(),
            m.n_trials.to_string(),
            m.success_count.to_string(),
            fmt_opt(m.pose_error_mean),
            fmt_opt(m.pose_error_std),
            fmt_opt(m.goal_dist_all_mean),
            fmt_opt(m.goal_dist_all_std),
            fmt_opt(m.goal_dist_success_mean),
            fmt_opt(m.goal_dist_success_std),
            fmt_opt(m.exec_time_mean),
            fmt_opt(m.exec_time_std),
            String::new(),
            String::new(),
        ])?;
    }
    let mut utest_row = |name: &str, t: &Option<UTestResult>| -> Result<()> {
        if let Some(t) = t {
            w.write_record([
                name.to_string(),
                "proximity_vs_tactile".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                fmt_opt(t.u),
                fmt_opt(t.p),
            ])?;
        }
        Ok(())
    };
    utest_row("utest_pose_error", &summary.pose_error_test)?;
    utest_row("utest_goal_dist", &summary.goal_dist_test)?;
    w.flush()?;
    Ok(())
}

fn write_pose_error_trace_csv(path: &Path, outcomes: &[TrialOutcome], dt: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["mode", "tick", "time_s", "n_trials", "mean_mm", "std_mm"])?;
    for mode in TrialMode::all() {
        let traces: Vec<&Vec<f64>> = outcomes
            .iter()
            .filter(|o| o.mode == mode)
            .map(|o| &o.pose_error_trace)
            .collect();
        let max_len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
        for tick in 0..max_len {
            let samples: Vec<f64> = traces
                .iter()
                .filter_map(|t| t.get(tick).copied())
                .collect();
            w.write_record([
                mode.name().to_string(),
                tick.to_string(),
                fmt_opt(tick as f64 * dt),
                samples.len().to_string(),
                fmt_opt(mean(&samples)),
                fmt_opt(std_dev(&samples)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_trace_jsonl(path: &Path, trace: &[TickRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for record in trace {
        serde_json::to_writer(&mut w, record)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Run `n_trials` per mode with seeds `base_seed .. base_seed + n_trials`,
/// paired across modes, and write all artifacts into `out_dir`.
///
/// Results accumulated so far are flushed to `trials.csv` after every trial,
/// so an interrupted run leaves partial data behind. A trial that cannot be
/// executed at all marks the summary incomplete but does not abort the rest.
pub fn run_experiment(
    config: &Config,
    modes: &[TrialMode],
    n_trials: usize,
    base_seed: u64,
    out_dir: &Path,
) -> Result<ExperimentSummary> {
    std::fs::create_dir_all(out_dir)?;
    let mut outcomes: Vec<TrialOutcome> = Vec::new();
    let mut incomplete = false;
    for &mode in modes {
        for k in 0..n_trials {
            let seed = base_seed + k as u64;
            match run_trial(config, mode, seed) {
                Ok((outcome, trace)) => {
                    write_trace_jsonl(
                        &out_dir.join(format!("trace_{}_{}.jsonl", mode.name(), seed)),
                        &trace,
                    )?;
                    outcomes.push(outcome);
                }
                Err(e) => {
                    eprintln!("trial {mode} seed {seed} could not run: {e}");
                    incomplete = true;
                }
            }
            write_trials_csv(&out_dir.join("trials.csv"), &outcomes)?;
        }
    }

    let mode_summaries: Vec<ModeSummary> = modes
        .iter()
        .map(|&mode| {
            let of_mode: Vec<&TrialOutcome> =
                outcomes.iter().filter(|o| o.mode == mode).collect();
            summarize_mode(mode, &of_mode)
        })
        .collect();

    let sample = |mode: TrialMode, f: fn(&TrialOutcome) -> f64| -> Vec<f64> {
        outcomes
            .iter()
            .filter(|o| o.mode == mode)
            .map(f)
            .collect()
    };
    let prox_pose = sample(TrialMode::Proximity, |o| o.avg_pose_error);
    let tact_pose = sample(TrialMode::Tactile, |o| o.avg_pose_error);
    let prox_dist = sample(TrialMode::Proximity, |o| o.final_goal_distance);
    let tact_dist = sample(TrialMode::Tactile, |o| o.final_goal_distance);
    let pose_error_test = if !prox_pose.is_empty() && !tact_pose.is_empty() {
        Some(mann_whitney_u(&prox_pose, &tact_pose)?)
    } else {
        None
    };
    let goal_dist_test = if !prox_dist.is_empty() && !tact_dist.is_empty() {
        Some(mann_whitney_u(&prox_dist, &tact_dist)?)
    } else {
        None
    };

    let summary = ExperimentSummary {
        modes: mode_summaries,
        outcomes,
        pose_error_test,
        goal_dist_test,
        incomplete,
    };
    write_summary_csv(&out_dir.join("summary.csv"), &summary)?;
    write_pose_error_trace_csv(
        &out_dir.join("pose_error_trace.csv"),
        &summary.outcomes,
        config.dt(),
    )?;
    Ok(summary)
}
