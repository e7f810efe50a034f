//! One rank-1 Sherman-Morrison step, checked against a dense solve, and the
//! residual left by the alternative `1 + α₁` denominator.
//!
//! cargo run --example smw_step

use snlls::optim::{smw_rank1_solve, SmwMode};
use snlls::oracle::dense_smw_solve;

fn main() -> snlls::Result<()> {
    let d2 = [0.5, 2.0, 1.0, 4.0];
    let v = [0.3, -1.0, 0.8, 0.1];
    let g = [1.0, 0.5, -0.25, 2.0];
    let alpha = 0.1;

    let exact = smw_rank1_solve(&d2, &v, &g, alpha, SmwMode::Exact)?;
    let printed = smw_rank1_solve(&d2, &v, &g, alpha, SmwMode::AsPrinted)?;
    let dense = dense_smw_solve(&d2, &v, alpha, &g)?;

    println!("alpha1 = {:.6}, alpha2 = {:.6}", exact.alpha1, exact.alpha2);
    println!("exact step      {:?}", &exact.step[..]);
    println!("dense solve     {:?}", &dense[..]);
    println!("1+alpha1 step   {:?}", &printed.step[..]);

    // ‖((1/α)D + vvᵀ)s + g‖ for each step.
    let residual = |s: &[f64]| {
        let vs: f64 = v.iter().zip(s).map(|(a, b)| a * b).sum();
        (0..4)
            .map(|i| (d2[i].sqrt() / alpha * s[i] + v[i] * vs + g[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    println!(
        "residual exact {:.2e}, 1+alpha1 {:.2e}",
        residual(&exact.step),
        residual(&printed.step)
    );
    Ok(())
}
