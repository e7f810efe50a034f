//! Builds the rank-L Jacobian sketch for one batch and shows that it
//! reproduces the gradient through `(2/L)·Ĵ·r`.
//!
//! cargo run --example rank_l_sketch

use snlls::data::synth_autoencoder;
use snlls::model::{chain, Activation, Mlp};
use snlls::optim::nllsl_sketch;

fn main() -> snlls::Result<()> {
    let data = synth_autoencoder(4, 3, 2)?;
    let net = Mlp::init_weights(&chain(&[9, 3, 9], &[Activation::Relu, Activation::Sigmoid])?, 7)?;
    let eval = net.evaluate_batch(&data.features, &data.targets)?;
    let sketch = nllsl_sketch(&eval, 42, 1e-8)?;

    println!("n = {}, L = {}", eval.gradient.len(), eval.residual_len());
    println!("{:>4} {:>6} {:>13} {:>13}", "row", "column", "gradient", "sketch.r");
    let back = sketch.scaled_times(&eval.residuals);
    for i in 0..eval.gradient.len().min(12) {
        println!(
            "{i:>4} {:>6} {:>13.6e} {:>13.6e}",
            sketch.col_of_row[i], eval.gradient[i], back[i]
        );
    }
    let worst = back
        .iter()
        .zip(eval.gradient.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max |(2/L) J r - g| = {worst:.2e}");
    Ok(())
}
