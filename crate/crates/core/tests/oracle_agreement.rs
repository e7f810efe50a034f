use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snlls::model::BatchEval;
use snlls::numkit::{DenseMatrix, DenseVector};
use snlls::optim::{full_jacobian_step, nllsl_sketch, nllsl_step, HyperParams, NllsLState, OptimizerKind};
use snlls::oracle::{brute_rank_l, dense_full_jacobian_solve, dense_smw_solve};

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_eval(rng: &mut ChaCha8Rng, n: usize, l: usize) -> (DenseMatrix, BatchEval) {
    let jac = DenseMatrix::from_row_major(n, l, random_vec(rng, n * l)).unwrap();
    let r = random_vec(rng, l);
    let g: Vec<f64> = jac.mul_vec(&r).unwrap().iter().map(|x| 2.0 * x / l as f64).collect();
    let loss = r.iter().map(|x| x * x).sum::<f64>() / l as f64;
    (
        jac,
        BatchEval {
            residuals: r.into(),
            loss,
            gradient: g.into(),
        },
    )
}

#[test]
fn woodbury_step_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let (jac, eval) = random_eval(&mut rng, 20, 5);
        let d2: Vec<f64> = (0..20).map(|_| rng.gen_range(0.01..2.0)).collect();
        let hp = HyperParams {
            alpha: rng.gen_range(0.01..2.0),
            ..HyperParams::for_kind(OptimizerKind::FullJacobian)
        };
        let fast = full_jacobian_step(&jac, &eval, &d2, &hp).unwrap();
        let dense = dense_full_jacobian_solve(&jac, &d2, hp.alpha, &eval.gradient).unwrap();
        let err = fast
            .iter()
            .zip(dense.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-9 * (1.0 + dense.norm()), "{err}");
    }
}

#[test]
fn nllsl_steps_match_explicit_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, l) = (12, 6);
    let hp = HyperParams {
        delta: 0.7,
        ..HyperParams::for_kind(OptimizerKind::NllsL)
    };
    let mut state = NllsLState::new(n, hp.d_init, 99);
    let mut u = vec![0.0; n];
    let mut f = 0.0;
    let mut d2 = vec![hp.d_init; n];
    for _ in 0..5 {
        let (_, eval) = random_eval(&mut rng, n, l);
        let seed = state.clone().next_seed();
        let sketch = nllsl_sketch(&eval, seed, hp.div_floor).unwrap();
        let jl = brute_rank_l(
            &eval.gradient,
            &eval.residuals,
            l,
            &sketch.row_perm,
            &sketch.res_perm,
            hp.div_floor,
        )
        .unwrap();
        for i in 0..n {
            u[i] += jl.row(i).iter().sum::<f64>();
            d2[i] += eval.gradient[i] * eval.gradient[i];
        }
        f += eval.loss;
        let v: Vec<f64> = u.iter().map(|x| hp.delta / f.sqrt() * x).collect();
        let expect = dense_smw_solve(&d2, &v, hp.alpha, &eval.gradient).unwrap();
        let got = nllsl_step(&mut state, &eval, &hp).unwrap();
        let err = got
            .iter()
            .zip(expect.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(
            err <= 1e-10 * (1.0 + DenseVector::from(eval.gradient.to_vec()).norm()),
            "{err}"
        );
    }
}

#[test]
fn sketch_matches_brute_force_over_many_seeds() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for seed in 0..100 {
        let n = rng.gen_range(1..15);
        let l = rng.gen_range(1..10);
        let (_, eval) = random_eval(&mut rng, n, l);
        let sketch = nllsl_sketch(&eval, seed, 1e-8).unwrap();
        let jl = brute_rank_l(
            &eval.gradient,
            &eval.residuals,
            l,
            &sketch.row_perm,
            &sketch.res_perm,
            1e-8,
        )
        .unwrap();
        for i in 0..n {
            for c in 0..l {
                let want = if c == sketch.col_of_row[i] {
                    sketch.values[i]
                } else {
                    0.0
                };
                assert!((jl[(i, c)] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
        let back = sketch.scaled_times(&eval.residuals);
        for i in 0..n {
            assert!((back[i] - eval.gradient[i]).abs() <= 1e-12 * eval.gradient[i].abs().max(1.0));
        }
    }
}
