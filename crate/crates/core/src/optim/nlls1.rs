use super::{accumulate_squares, check_eval, smw_rank1_solve, HyperParams, Optimizer, OptimizerKind};
use crate::error::Result;
use crate::model::BatchEval;
use crate::numkit::{DenseMatrix, DenseVector};

/// Accumulators of the rank-1 method.
///
/// The accumulated Jacobian estimate is `J₁ = (1/2f)·j·[r⁽¹⁾ᵀ … r⁽ᵏ⁾ᵀ]`; only
/// `j = Σ g⁽ˢ⁾` and `f = Σ ‖r⁽ˢ⁾‖²/L` are stored since the stacked residuals
/// only ever enter through `Σ ‖r⁽ˢ⁾‖² = L·f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nlls1State {
    pub f: f64,
    pub j: DenseVector,
    pub d2: DenseVector,
    pub k: usize,
}

impl Nlls1State {
    pub fn new(n: usize, d_init: f64) -> Self {
        Self {
            f: 0.0,
            j: DenseVector::zeros(n),
            d2: DenseVector::filled(n, d_init),
            k: 0,
        }
    }
}

/// One NLLS1 step. Accumulates `f`, `j`, `d²` from `eval` and then solves
/// `((1/α)diag(√d²) + vvᵀ)s = −g` with `v = (δ/√f)·j`.
pub fn nlls1_step(state: &mut Nlls1State, eval: &BatchEval, hp: &HyperParams) -> Result<DenseVector> {
    check_eval(eval, state.d2.len())?;
    let g = &eval.gradient;

    state.f += eval.loss;
    if hp.accumulate_jacobian {
        for (j, gi) in state.j.iter_mut().zip(g.iter()) {
            *j += gi;
        }
    }
    accumulate_squares(&mut state.d2, g);

    let v = scaled_direction(&state.j, state.f, hp.delta);
    let solve = smw_rank1_solve(&state.d2, &v, g, hp.alpha, hp.smw_mode)?;
    state.k += 1;
    Ok(solve.step)
}

/// `(δ/√f)·acc`, or zero when nothing has been accumulated.
pub(super) fn scaled_direction(acc: &[f64], f: f64, delta: f64) -> Vec<f64> {
    if f > 0.0 {
        let scale = delta / f.sqrt();
        acc.iter().map(|x| scale * x).collect()
    } else {
        vec![0.0; acc.len()]
    }
}

#[derive(Debug, Clone)]
pub struct Nlls1 {
    hp: HyperParams,
    state: Nlls1State,
}

impl Nlls1 {
    pub fn new(hp: HyperParams, n: usize) -> Self {
        let state = Nlls1State::new(n, hp.d_init);
        Self { hp, state }
    }

    pub fn state(&self) -> &Nlls1State {
        &self.state
    }
}

impl Optimizer for Nlls1 {
    fn kind(&self) -> OptimizerKind {
        OptimizerKind::Nlls1
    }

    fn step(&mut self, eval: &BatchEval, _: Option<&DenseMatrix>) -> Result<DenseVector> {
        nlls1_step(&mut self.state, eval, &self.hp)
    }

    fn steps_taken(&self) -> usize {
        self.state.k
    }
}
