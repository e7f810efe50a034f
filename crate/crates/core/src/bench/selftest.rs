//! Oracle-backed invariant checks.
//!
//! Each check compares an implementation against an independent brute-force
//! construction from [`crate::oracle`] and reports the worst observed error
//! against its bound.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{chain, iris_layers, Activation, LayerSpec, Mlp};
use crate::numkit::{norm, DenseMatrix, DenseVector};
use crate::optim::{
    adagrad_step, nlls1_step, nllsl_sketch, smw_rank1_solve, AdagradState, HyperParams, Nlls1State, SmwMode,
};
use crate::oracle::{brute_rank1, brute_rank_l, dense_smw_solve, fd_gradient, FdSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Largest error seen (or a count, for checks that are counted).
    pub worst: f64,
    pub bound: f64,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: worst {:.3e} (bound {:.1e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.bound,
            self.detail
        )
    }
}

fn outcome(name: &'static str, worst: f64, bound: f64, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: worst < bound,
        worst,
        bound,
        detail,
    }
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Coordinate-wise relative errors below this magnitude are measured
/// absolutely; central differences cannot resolve smaller gradients.
pub const FD_FLOOR: f64 = 1e-4;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect();
    DenseMatrix::from_row_major(rows, cols, data).expect("shape")
}

fn one_hot(rng: &mut ChaCha8Rng, rows: usize, classes: usize) -> DenseMatrix {
    let mut y = DenseMatrix::zeros(rows, classes);
    for s in 0..rows {
        y[(s, rng.gen_range(0..classes))] = 1.0;
    }
    y
}

/// The architecture zoo used by the gradient checks.
pub fn test_architectures() -> Vec<(&'static str, Vec<LayerSpec>)> {
    use Activation::*;
    vec![
        ("iris 4-10-10-3", iris_layers()),
        ("linear 6-2", chain(&[6, 2], &[Identity]).unwrap()),
        ("sigmoid 5-8-4", chain(&[5, 8, 4], &[Sigmoid, Identity]).unwrap()),
        ("autoencoder 16-6-16", chain(&[16, 6, 16], &[Relu, Sigmoid]).unwrap()),
        (
            "deep 3-7-7-7-5",
            chain(&[3, 7, 7, 7, 5], &[Sigmoid, Relu, Sigmoid, Softmax]).unwrap(),
        ),
    ]
}

/// Backprop gradient vs central differences on `coords` coordinates per net.
pub fn check_gradient_fidelity(coords: usize, seed: u64) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    let mut probed = 0;
    for (k, (_, layers)) in test_architectures().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let model = Mlp::init_weights(&layers, rng.gen())?;
        let (din, dout) = (model.input_dim(), model.output_dim());
        // Nudge weights off the zero-bias initialization.
        let w: Vec<f64> = model.weights().iter().map(|w| w + rng.gen_range(-0.1..0.1)).collect();
        let model = Mlp::from_weights(&layers, w.clone())?;
        let x = random_matrix(&mut rng, 12, din, -1.5, 1.5);
        let y = if layers.last().map(|l| l.activation) == Some(Activation::Softmax) {
            one_hot(&mut rng, 12, dout)
        } else {
            random_matrix(&mut rng, 12, dout, 0.0, 1.0)
        };
        let eval = model.evaluate_batch(&x, &y)?;
        let loss = |wv: &[f64]| {
            Mlp::from_weights(&layers, wv.to_vec())
                .and_then(|m| m.batch_loss(&x, &y))
                .unwrap_or(f64::NAN)
        };
        let spec = FdSpec {
            h: 1e-6,
            coords: Some(coords),
            seed: rng.gen(),
        };
        let fd = fd_gradient(loss, &w, &spec)?;
        for (&i, v) in fd.indices.iter().zip(fd.values.iter()) {
            worst = worst.max(relative_error(*v, eval.gradient[i], FD_FLOOR));
        }
        probed += fd.indices.len();
    }
    Ok(outcome(
        "gradient vs finite differences",
        worst,
        1e-5,
        format!("{probed} coordinates over 5 architectures"),
    ))
}

/// `(2/L)·J·r` against the backprop gradient on the Iris net with 32 samples.
pub fn check_jacobian_consistency(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Mlp::init_weights(&iris_layers(), seed)?;
    let w: Vec<f64> = model.weights().iter().map(|w| w + rng.gen_range(-0.1..0.1)).collect();
    let model = Mlp::from_weights(&iris_layers(), w)?;
    let x = random_matrix(&mut rng, 32, 4, -2.0, 2.0);
    let y = one_hot(&mut rng, 32, 3);
    let eval = model.evaluate_batch(&x, &y)?;
    let jac = model.exact_jacobian(&x, &y)?;
    let l = eval.residual_len();
    let jr = jac.mul_vec(&eval.residuals)?;
    let diff: Vec<f64> = jr
        .iter()
        .zip(eval.gradient.iter())
        .map(|(a, g)| 2.0 / l as f64 * a - g)
        .collect();
    let rel = norm(&diff) / eval.gradient.norm().max(f64::MIN_POSITIVE);
    Ok(outcome(
        "(2/L) J r == gradient",
        rel,
        1e-9,
        format!("J is {}x{}", jac.rows(), jac.cols()),
    ))
}

fn smw_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let n = rng.gen_range(1..=50);
    let a: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-4.0..2.0))).collect();
    let scale = 10f64.powf(rng.gen_range(-2.0..1.0));
    let v: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let alpha = 10f64.powf(rng.gen_range(-3.0..1.0));
    (a, v, g, alpha)
}

/// `‖H s + g‖ / (1 + ‖g‖)` with `H = (1/α)·diag(√a) + vvᵀ`.
pub fn smw_residual(a: &[f64], v: &[f64], alpha: f64, g: &[f64], s: &[f64]) -> f64 {
    let vs: f64 = v.iter().zip(s).map(|(x, y)| x * y).sum();
    let r: Vec<f64> = (0..a.len())
        .map(|i| a[i].sqrt() / alpha * s[i] + v[i] * vs + g[i])
        .collect();
    norm(&r) / (1.0 + norm(g))
}

/// NLLS1's exact SMW step solves the dense system; the as-printed
/// denominator does not (it must fail on at least one `α ≠ 1` instance).
pub fn check_smw_exactness(instances: usize, seed: u64) -> Result<(CheckOutcome, CheckOutcome)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut worst_vs_oracle = 0.0f64;
    let mut printed_failures = 0usize;
    for _ in 0..instances {
        let (a, v, g, alpha) = smw_instance(&mut rng);
        let exact = smw_rank1_solve(&a, &v, &g, alpha, SmwMode::Exact)?.step;
        worst = worst.max(smw_residual(&a, &v, alpha, &g, &exact));
        let dense = dense_smw_solve(&a, &v, alpha, &g)?;
        let diff: Vec<f64> = exact.iter().zip(dense.iter()).map(|(p, q)| p - q).collect();
        worst_vs_oracle = worst_vs_oracle.max(norm(&diff) / (1.0 + dense.norm()));

        let printed = smw_rank1_solve(&a, &v, &g, alpha, SmwMode::AsPrinted)?.step;
        if alpha != 1.0 && !(smw_residual(&a, &v, alpha, &g, &printed) <= 1e-10) {
            printed_failures += 1;
        }
    }
    let exact = outcome(
        "SMW rank-1 step solves ((1/a)D + vv^T)s = -g",
        worst,
        1e-10,
        format!("{instances} instances; max distance to dense oracle {worst_vs_oracle:.2e}"),
    );
    let printed = CheckOutcome {
        name: "as-printed SMW denominator violates the bound",
        passed: printed_failures >= 1,
        worst: printed_failures as f64,
        bound: 1.0,
        detail: format!("{printed_failures}/{instances} instances fail"),
    };
    Ok((exact, printed))
}

/// `(2/L)·Ĵ₁·r = g` for random `(n, L)` and the accumulated identities
/// `Σ‖r⁽ˢ⁾‖² = L·f` and `J₁J₁ᵀ = (L/4f)·jjᵀ` for `k ≤ 5`.
pub fn check_rank1(pairs: usize, seed: u64) -> Result<(CheckOutcome, CheckOutcome)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let n = rng.gen_range(1..40);
        let l = rng.gen_range(1..30);
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let r: Vec<f64> = (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let j = brute_rank1(&g, &r, l)?;
        let back = j.mul_vec(&r)?;
        for (b, gi) in back.iter().zip(&g) {
            worst = worst.max(relative_error(2.0 / l as f64 * b, *gi, 1.0));
        }
    }
    let relation = outcome(
        "rank-1 estimate (2/L) J1 r == g",
        worst,
        1e-12,
        format!("{pairs} (n, L) pairs"),
    );

    let mut worst_f = 0.0f64;
    let mut worst_jj = 0.0f64;
    let hp = HyperParams::default();
    for k in 1..=5usize {
        let n = rng.gen_range(2..12);
        let l = rng.gen_range(2..8);
        let mut state = Nlls1State::new(n, hp.d_init);
        let mut stacked: Vec<f64> = Vec::new();
        let mut grads: Vec<Vec<f64>> = Vec::new();
        for _ in 0..k {
            let r: Vec<f64> = (0..l).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let loss = r.iter().map(|x| x * x).sum::<f64>() / l as f64;
            let eval = crate::model::BatchEval {
                residuals: r.clone().into(),
                loss,
                gradient: g.clone().into(),
            };
            nlls1_step(&mut state, &eval, &hp)?;
            stacked.extend(r);
            grads.push(g);
        }
        let sum_sq: f64 = stacked.iter().map(|x| x * x).sum();
        worst_f = worst_f.max(relative_error(sum_sq, l as f64 * state.f, 1e-300));

        // Explicit J1 = (1/2f)·(Σg)·[r⁽¹⁾ᵀ … r⁽ᵏ⁾ᵀ], n × kL.
        let f = state.f;
        let jsum: Vec<f64> = (0..n).map(|i| grads.iter().map(|g| g[i]).sum()).collect();
        let mut j1 = DenseMatrix::zeros(n, stacked.len());
        for i in 0..n {
            for (c, rc) in stacked.iter().enumerate() {
                j1[(i, c)] = jsum[i] * rc / (2.0 * f);
            }
        }
        let jj = j1.matmul(&j1.transpose())?;
        let scale = l as f64 / (4.0 * f);
        for p in 0..n {
            for q in 0..n {
                let reduced = scale * jsum[p] * jsum[q];
                worst_jj = worst_jj.max((jj[(p, q)] - reduced).abs() / (1.0 + reduced.abs()));
            }
        }
        // The accumulator really is Σg.
        for (a, b) in state.j.iter().zip(&jsum) {
            worst_jj = worst_jj.max((a - b).abs());
        }
    }
    let accumulated = CheckOutcome {
        name: "rank-1 accumulation: sum |r|^2 == L f and J1 J1^T == (L/4f) j j^T",
        passed: worst_f < 1e-12 && worst_jj < 1e-10,
        worst: worst_f.max(worst_jj),
        bound: 1e-12,
        detail: format!("inner-product identity {worst_f:.2e}, outer-product identity {worst_jj:.2e} (bound 1e-10)"),
    };
    Ok((relation, accumulated))
}

/// Sketch vs explicit `(L/2)·diag(g)·P₁ᵀRP₂`, and `(2/L)·Ĵ_L·r = g`.
pub fn check_rank_l(seeds: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut structure_ok = true;
    for s in 0..seeds {
        let n = rng.gen_range(1..40);
        let l = rng.gen_range(1..25);
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        // Residuals bounded away from zero so no clamping happens.
        let r: Vec<f64> = (0..l)
            .map(|_| {
                let m = rng.gen_range(0.05..2.0);
                if rng.gen() {
                    m
                } else {
                    -m
                }
            })
            .collect();
        let loss = r.iter().map(|x| x * x).sum::<f64>() / l as f64;
        let eval = crate::model::BatchEval {
            residuals: r.clone().into(),
            loss,
            gradient: g.clone().into(),
        };
        let floor = 1e-8;
        let sketch = nllsl_sketch(&eval, seed.wrapping_add(s as u64), floor)?;
        let dense = brute_rank_l(&g, &r, l, &sketch.row_perm, &sketch.res_perm, floor)?;
        for i in 0..n {
            let row = dense.row(i);
            let nonzeros: Vec<usize> = (0..l).filter(|&c| row[c] != 0.0).collect();
            if g[i] != 0.0 && nonzeros != vec![sketch.col_of_row[i]] {
                structure_ok = false;
            }
            worst = worst.max(relative_error(row[sketch.col_of_row[i]], sketch.values[i], 1e-300));
        }
        let back = dense.mul_vec(&r)?;
        for (b, gi) in back.iter().zip(&g) {
            worst = worst.max(relative_error(2.0 / l as f64 * b, *gi, 1.0));
        }
    }
    let mut out = outcome(
        "rank-L sketch matches explicit estimate and (2/L) JL r == g",
        worst,
        1e-12,
        format!("{seeds} permutation seeds"),
    );
    if !structure_ok {
        out.passed = false;
        out.detail.push_str("; nonzero structure mismatch");
    }
    Ok(out)
}

/// With Jacobian accumulation disabled, NLLS1 steps are bit-identical to
/// Adagrad (lr = α, ε = 0) sharing the same accumulator seed.
pub fn check_adagrad_reduction(steps: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 30;
    let nlls_hp = HyperParams {
        accumulate_jacobian: false,
        ..HyperParams::default()
    };
    let ada_hp = HyperParams {
        lr: nlls_hp.alpha,
        eps: 0.0,
        ..HyperParams::default()
    };
    let mut nlls = Nlls1State::new(n, nlls_hp.d_init);
    let mut ada = AdagradState::new(n, nlls_hp.d_init);
    let mut mismatches = 0usize;
    for _ in 0..steps {
        let l = 6;
        let r: DenseVector = (0..l).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: DenseVector = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = r.iter().map(|x| x * x).sum::<f64>() / l as f64;
        let eval = crate::model::BatchEval {
            residuals: r,
            loss,
            gradient: g,
        };
        let a = nlls1_step(&mut nlls, &eval, &nlls_hp)?;
        let b = adagrad_step(&mut ada, &eval, &ada_hp)?;
        mismatches += a
            .iter()
            .zip(b.iter())
            .filter(|(p, q)| p.to_bits() != q.to_bits())
            .count();
    }
    Ok(CheckOutcome {
        name: "ablated NLLS1 == Adagrad bit for bit",
        passed: mismatches == 0,
        worst: mismatches as f64,
        bound: 1.0,
        detail: format!("{steps} steps, {mismatches} differing entries"),
    })
}

/// Everything above at full size.
pub fn run_selftest(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = vec![check_gradient_fidelity(200, seed)?, check_jacobian_consistency(seed)?];
    let (exact, printed) = check_smw_exactness(1000, seed)?;
    out.push(exact);
    out.push(printed);
    let (rel, acc) = check_rank1(100, seed)?;
    out.push(rel);
    out.push(acc);
    out.push(check_rank_l(100, seed)?);
    out.push(check_adagrad_reduction(100, seed)?);
    Ok(out)
}
