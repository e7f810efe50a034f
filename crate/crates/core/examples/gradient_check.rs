//! Compares backprop gradients with central finite differences and the exact
//! Jacobian with the gradient, for the Iris network.
//!
//! cargo run --example gradient_check

use std::path::Path;

use snlls::data::load_iris_csv;
use snlls::model::{iris_layers, Mlp};
use snlls::oracle::{fd_gradient, FdSpec};

fn main() -> snlls::Result<()> {
    let data = load_iris_csv(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/iris.csv"))?;
    let (x, y) = data.gather(&(0..32).collect::<Vec<_>>());
    let net = Mlp::init_weights(&iris_layers(), 3)?;
    let eval = net.evaluate_batch(&x, &y)?;

    let loss = |w: &[f64]| {
        let probe = Mlp::from_weights(&iris_layers(), w.to_vec()).expect("weight count");
        probe.batch_loss(&x, &y).expect("batch shape")
    };
    let fd = fd_gradient(
        loss,
        net.weights(),
        &FdSpec {
            coords: Some(40),
            ..FdSpec::default()
        },
    )?;
    let worst = fd
        .indices
        .iter()
        .zip(fd.values.iter())
        .map(|(&i, &v)| (eval.gradient[i] - v).abs() / eval.gradient[i].abs().max(v.abs()).max(1e-4))
        .fold(0.0, f64::max);
    println!(
        "finite differences on {} coordinates: max relative error {worst:.2e}",
        fd.indices.len()
    );

    let jac = net.exact_jacobian(&x, &y)?;
    let l = eval.residual_len() as f64;
    let jr = jac.mul_vec(&eval.residuals)?;
    let worst = jr
        .iter()
        .zip(eval.gradient.iter())
        .map(|(a, g)| (2.0 / l * a - g).abs())
        .fold(0.0, f64::max);
    println!(
        "jacobian {}x{}: max |(2/L) J r - g| = {worst:.2e}",
        jac.rows(),
        jac.cols()
    );
    Ok(())
}
