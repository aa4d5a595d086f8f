use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tactile_airl::harness::{
    eval_checkpoint, plot_metrics, render_svg, resume_run, train_run, Checkpoint, HarnessError,
    RunConfig,
};
use tactile_airl::numcore::gradcheck_random_nets;

#[derive(Parser)]
#[command(version, about = "Curiosity-driven model-based RL on synthetic tactile tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a run configuration (TOML).
    Train {
        config: PathBuf,
        /// Continue from this checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with frozen models.
    Eval {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a metrics file as an SVG learning curve next to it.
    Plot {
        metrics: PathBuf,
        #[arg(long, default_value_t = 10)]
        window: usize,
    },
    /// Compare analytic and numerical gradients on random networks.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        nets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { config, resume } => {
            let cfg = RunConfig::load(&config)?;
            let summary = match resume {
                Some(path) => {
                    let mut ck = Checkpoint::load(&path)?;
                    ck.config.run.episodes = cfg.run.episodes;
                    resume_run(ck, &cfg.run.output_dir)?
                }
                None => train_run(&cfg)?,
            };
            println!("metrics: {}", summary.metrics_path.display());
            for p in &summary.checkpoints {
                println!("checkpoint: {}", p.display());
            }
            if !summary.diverged.is_empty() {
                return Err(HarnessError::Divergence(format!(
                    "seeds halted: {:?}",
                    summary.diverged
                )));
            }
            Ok(())
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let env = ck.config.env.clone();
            let s = eval_checkpoint(&ck, &env, episodes, seed)?;
            if s.zero_episodes {
                println!("episodes=0 (nothing evaluated)");
            } else {
                print!(
                    "episodes={} mean_return={:.6} success_rate={:.3}",
                    s.episodes, s.mean_return, s.success_rate
                );
                if let Some(sh) = s.mean_abs_shear {
                    print!(" mean_abs_shear={sh:.6}");
                }
                println!();
            }
            Ok(())
        }
        Command::Plot { metrics, window } => {
            let text = std::fs::read_to_string(&metrics)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", metrics.display())))?;
            let series = plot_metrics(&text, window)?;
            let out = metrics.with_extension("svg");
            std::fs::write(&out, render_svg(&series))
                .map_err(|e| HarnessError::Io(format!("{}: {e}", out.display())))?;
            if series.skipped > 0 {
                eprintln!("skipped {} malformed rows", series.skipped);
            }
            println!("plot: {}", out.display());
            Ok(())
        }
        Command::Gradcheck { nets, seed } => {
            let worst = gradcheck_random_nets(nets, seed)
                .map_err(|e| HarnessError::Divergence(e.to_string()))?;
            println!("max relative error over {nets} nets: {worst:.3e}");
            if worst > 1e-4 {
                return Err(HarnessError::Divergence(format!(
                    "gradient check failed: {worst:.3e}"
                )));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
