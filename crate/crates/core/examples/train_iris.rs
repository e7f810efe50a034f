//! Trains the 4-10-10-3 Iris classifier with every optimizer for a few epochs
//! and prints the per-epoch mean loss.
//!
//! cargo run --release --example train_iris

use std::path::Path;

use snlls::bench::{run_experiment, ExperimentConfig};

fn main() -> snlls::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut cfg = ExperimentConfig::load(dir.join("iris.cfg"))?;
    cfg.epochs = 10;
    cfg.runs = 3;

    let result = run_experiment(&cfg)?;
    print!("{:>5}", "epoch");
    for t in &result.traces {
        print!(" {:>13}", t.optimizer);
    }
    println!();
    for e in 0..cfg.epochs {
        print!("{:>5}", e + 1);
        for t in &result.traces {
            print!(" {:>13.4e}", t.mean[e]);
        }
        println!();
    }
    Ok(())
}
