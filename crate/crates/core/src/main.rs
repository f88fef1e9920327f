use clap::{Parser, Subcommand};
use inhand::config::Config;
use inhand::geom::Vec2;
use inhand::hand::{sensor_frames, JointVector};
use inhand::harness::{run_experiment, run_trial, TrialMode};
use inhand::sensor::expected_measurements;
use inhand::world::{World, WorldState};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "inhand",
    about = "Planar in-hand manipulation: simulator, estimator, controller, experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop trial and write its tick trace.
    RunTrial {
        /// fiducial, proximity, or tactile
        #[arg(long)]
        mode: TrialMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML config file; defaults apply if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for the trace file.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the full experiment across modes with paired seeds.
    RunExperiment {
        /// Comma-separated modes, or "all".
        #[arg(long, default_value = "all")]
        modes: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print sensor poses and expected readings for a given scene.
    RaycastDebug {
        /// Six joint angles (rad), comma-separated, fingers left then right.
        #[arg(long, value_delimiter = ',')]
        joints: Vec<f64>,
        /// Cylinder center "x,y" (mm).
        #[arg(long, value_delimiter = ',')]
        object: Vec<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the default configuration as TOML.
    PrintConfig,
}

fn load_config(path: &Option<PathBuf>) -> inhand::Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => {
            let cfg = Config::default();
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

fn parse_modes(spec: &str) -> inhand::Result<Vec<TrialMode>> {
    if spec == "all" {
        return Ok(TrialMode::all().to_vec());
    }
    spec.split(',').map(|s| s.trim().parse()).collect()
}

fn run(cli: Cli) -> inhand::Result<ExitCode> {
    match cli.command {
        Command::RunTrial {
            mode,
            seed,
            config,
            out,
        } => {
            let cfg = load_config(&config)?;
            let (outcome, trace) = run_trial(&cfg, mode, seed)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("trace_{}_{}.jsonl", mode.name(), seed));
            let mut lines = String::new();
            for record in &trace {
                lines.push_str(&serde_json::to_string(record)?);
                lines.push('\n');
            }
            std::fs::write(&path, lines)?;
            println!("{}", serde_json::to_string_pretty(&outcome)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::RunExperiment {
            modes,
            trials,
            base_seed,
            config,
            out,
        } => {
            let cfg = load_config(&config)?;
            let modes = parse_modes(&modes)?;
            let summary = run_experiment(&cfg, &modes, trials, base_seed, &out)?;
            for m in &summary.modes {
                println!(
                    "{:<10} success {}/{}  pose err {:.2} ± {:.2} mm  goal dist {:.2} mm  time {:.1} s",
                    m.mode.name(),
                    m.success_count,
                    m.n_trials,
                    m.pose_error_mean,
                    m.pose_error_std,
                    m.goal_dist_all_mean,
                    m.exec_time_mean,
                );
            }
            if let Some(t) = &summary.pose_error_test {
                println!("pose error U = {:.1}, p = {:.4}", t.u, t.p);
            }
            if let Some(t) = &summary.goal_dist_test {
                println!("goal dist  U = {:.1}, p = {:.4}", t.u, t.p);
            }
            if summary.incomplete {
                eprintln!("experiment incomplete: some trials could not run");
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::RaycastDebug {
            joints,
            object,
            config,
        } => {
            let cfg = load_config(&config)?;
            if joints.len() != 6 || object.len() != 2 {
                return Err(inhand::Error::Config(
                    "--joints needs 6 values and --object needs 2".into(),
                ));
            }
            let q = JointVector([
                joints[0], joints[1], joints[2], joints[3], joints[4], joints[5],
            ]);
            let pos = Vec2::new(object[0], object[1]);
            let frames = sensor_frames(&q, &cfg.hand);
            let z = expected_measurements(&q, pos, &cfg.hand, cfg.object.radius);
            let world = World::new(cfg.hand.clone(), cfg.object.clone(), cfg.sim.clone());
            let contacts = world.detect_contacts(&WorldState::at_rest(q, pos));
            for (i, (f, zi)) in frames.iter().zip(z.0.iter()).enumerate() {
                println!(
                    "sensor {i}: origin ({:7.2}, {:7.2}) dir ({:+.3}, {:+.3})  reading {:6.2} mm",
                    f.origin.x, f.origin.y, f.direction.x, f.direction.y, zi
                );
            }
            println!("contacts: left {} right {}", contacts[0], contacts[1]);
            Ok(ExitCode::SUCCESS)
        }
        Command::PrintConfig => {
            print!("{}", Config::default().to_toml());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
