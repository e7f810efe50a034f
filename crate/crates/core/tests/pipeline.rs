use std::path::Path;

use snlls::bench::output::{csv_string, svg_string};
use snlls::bench::{run_experiment, run_on_dataset, ExperimentConfig};
use snlls::data::synth_autoencoder;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text, Path::new(".")).unwrap()
}

const SMALL: &str = "\
name = small
dataset.kind = synthetic
dataset.samples = 40
dataset.side = 4
model.layers = 16, 5, 16
model.activations = relu, sigmoid
epochs = 4
runs = 3
samples_per_batch = 8
base_seed = 3
optimizers = nlls1, nllsl, sgd, adagrad, adam, full-jacobian
";

#[test]
fn every_optimizer_takes_epochs_times_batches_steps() {
    let cfg = config(SMALL);
    let result = run_experiment(&cfg).unwrap();
    assert_eq!(result.traces.len(), 6);
    for t in &result.traces {
        assert_eq!(t.meta.batches, 5);
        assert_eq!(t.meta.residual_len, 8 * 16);
        assert_eq!(t.meta.steps, vec![cfg.epochs * 5; cfg.runs], "{}", t.optimizer);
        assert_eq!(t.epochs(), cfg.epochs);
        assert!(t.mean.iter().all(|x| x.is_finite()));
    }
}

#[test]
fn mean_is_the_arithmetic_mean_of_runs() {
    let result = run_experiment(&config(SMALL)).unwrap();
    for t in &result.traces {
        for e in 0..t.epochs() {
            let expect = t.runs.iter().map(|r| r[e]).sum::<f64>() / t.runs.len() as f64;
            assert!((t.mean[e] - expect).abs() <= 1e-15 * expect.abs().max(1.0));
        }
    }
}

#[test]
fn runs_are_reproducible_and_distinct() {
    let cfg = config(SMALL);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    for (ta, tb) in a.traces.iter().zip(&b.traces) {
        assert_eq!(csv_string(ta), csv_string(tb));
        assert_ne!(ta.runs[0], ta.runs[1], "runs should use different seeds");
    }
}

#[test]
fn nlls1_trains_the_small_autoencoder() {
    let result = run_experiment(&config(SMALL)).unwrap();
    let t = result.trace("nlls1").unwrap();
    assert!(t.final_mean() < t.mean[0]);
}

#[test]
fn run_on_dataset_matches_run_experiment() {
    let cfg = config(SMALL);
    let ds = synth_autoencoder(40, 4, cfg.base_seed).unwrap();
    let direct = run_on_dataset(&cfg, &ds).unwrap();
    let loaded = run_experiment(&cfg).unwrap();
    assert_eq!(csv_string(&direct.traces[0]), csv_string(&loaded.traces[0]));
}

#[test]
fn svg_is_well_formed() {
    let result = run_experiment(&config(SMALL)).unwrap();
    let named: Vec<(String, _)> = result.traces.iter().map(|t| (t.optimizer.clone(), t)).collect();
    let svg = svg_string(&named).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    let lines = root.descendants().filter(|n| n.tag_name().name() == "polyline").count();
    assert_eq!(lines, 6);
    for name in ["nlls1", "full-jacobian", "Epochs", "Loss"] {
        assert!(root.descendants().any(|n| n.text() == Some(name)), "{name} missing");
    }
    assert!(svg_string(&[]).is_err());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["iris.cfg", "autoencoder.cfg"] {
        let cfg = ExperimentConfig::load(dir.join(name)).unwrap();
        cfg.validate().unwrap();
    }
}
