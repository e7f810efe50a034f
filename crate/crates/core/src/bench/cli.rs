use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::config::ExperimentConfig;
use super::output::write_artifacts;
use super::runner::run_experiment;
use crate::optim::OptimizerKind;

#[derive(Debug, Parser)]
#[command(
    name = "snlls-bench",
    version,
    about = "Benchmark stochastic nonlinear least-squares optimizers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment config and write loss.csv, plot.svg and meta.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output root; defaults to the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the registered optimizer names.
    ListOptimizers,
    /// Run the oracle invariant checks.
    #[cfg(feature = "oracle")]
    Selftest {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

/// Entry point of the `snlls-bench` binary. Returns the process exit code:
/// 0 on success, 1 on a runtime failure, 2 on a usage error.
pub fn cli_main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };

    match cli.command {
        Command::ListOptimizers => {
            for k in OptimizerKind::ALL {
                let _ = writeln!(out, "{k}");
            }
            0
        }
        Command::Run {
            config,
            out: out_dir,
            seed,
        } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    let _ = writeln!(err, "error: cannot load config {}: {e}", config.display());
                    return 1;
                }
            };
            if let Some(seed) = seed {
                cfg.base_seed = seed;
            }
            let out_root = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
            let result = match run_experiment(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return 1;
                }
            };
            match write_artifacts(&cfg, &result, &out_root) {
                Ok(dir) => {
                    for t in &result.traces {
                        let _ = writeln!(out, "{:<14} final mean loss {:.6e}", t.optimizer, t.final_mean());
                    }
                    let _ = writeln!(out, "wrote {}", dir.display());
                    0
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    1
                }
            }
        }
        #[cfg(feature = "oracle")]
        Command::Selftest { seed } => match super::selftest::run_selftest(seed) {
            Ok(checks) => {
                for c in &checks {
                    let _ = writeln!(out, "{c}");
                }
                if checks.iter().all(|c| c.passed) {
                    0
                } else {
                    1
                }
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                1
            }
        },
    }
}
