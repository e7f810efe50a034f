//! Parses an inline experiment config, runs it and writes the CSV, SVG and
//! meta artifacts to a temporary directory.
//!
//! cargo run --release --example config_run

use std::path::Path;

use snlls::bench::{run_experiment, write_artifacts, ExperimentConfig};

const CONFIG: &str = "
name = demo
dataset.kind = synthetic
dataset.samples = 96
dataset.side = 6
model.layers = 36, 8, 36
model.activations = relu, sigmoid
epochs = 15
runs = 3
samples_per_batch = 16
optimizers = nlls1, nllsl, adagrad, adam
optimizer.nlls1.delta_scale = 0.5
optimizer.nllsl.delta_scale = 0.5
optimizer.adagrad.lr = 0.1
";

fn main() -> snlls::Result<()> {
    let cfg = ExperimentConfig::parse(CONFIG, Path::new("."))?;
    let result = run_experiment(&cfg)?;
    for t in &result.traces {
        println!(
            "{:<8} delta {:>6.3}  first {:.4e}  last {:.4e}",
            t.optimizer,
            t.meta.hyper.delta,
            t.mean[0],
            t.final_mean()
        );
    }
    let out = std::env::temp_dir().join("snlls-config-run");
    let dir = write_artifacts(&cfg, &result, &out)?;
    println!("artifacts in {}", dir.display());
    Ok(())
}
