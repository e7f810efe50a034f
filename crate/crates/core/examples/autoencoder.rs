//! A hand-written training loop: NLLS1 on a synthetic low-rank image
//! autoencoder, without the experiment runner.
//!
//! cargo run --release --example autoencoder

use snlls::data::{make_batches, synth_autoencoder};
use snlls::model::{chain, Activation, Mlp};
use snlls::optim::{delta_default, HyperParams, OptimizerKind};

fn main() -> snlls::Result<()> {
    let data = synth_autoencoder(256, 8, 11)?;
    let layers = chain(&[64, 16, 64], &[Activation::Relu, Activation::Sigmoid])?;
    let mut net = Mlp::init_weights(&layers, 1)?;
    let samples_per_batch = 32;

    let plan = make_batches(&data, samples_per_batch, 64, 0)?;
    let hp = HyperParams {
        delta: 0.5 * delta_default(plan.residual_len, plan.batch_count()),
        ..HyperParams::for_kind(OptimizerKind::Nlls1)
    };
    let mut opt = OptimizerKind::Nlls1.build(&hp, net.param_count(), 0)?;
    println!(
        "n = {}, L = {}, B = {}, delta = {:.3}",
        net.param_count(),
        plan.residual_len,
        plan.batch_count(),
        hp.delta
    );

    for epoch in 0..20u64 {
        let plan = make_batches(&data, samples_per_batch, 64, epoch)?;
        let mut total = 0.0;
        for batch in &plan.batches {
            let (x, y) = data.gather(batch);
            let eval = net.evaluate_batch(&x, &y)?;
            total += eval.loss;
            let step = opt.step(&eval, None)?;
            net.apply_step(&step)?;
        }
        println!("epoch {:>2}  loss {:.5e}", epoch + 1, total / plan.batch_count() as f64);
    }
    Ok(())
}
