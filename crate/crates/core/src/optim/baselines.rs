//! First-order comparison methods.

use super::{check_eval, HyperParams, Optimizer, OptimizerKind};
use crate::error::Result;
use crate::model::BatchEval;
use crate::numkit::{DenseMatrix, DenseVector};

pub fn sgd_step(eval: &BatchEval, hp: &HyperParams) -> Result<DenseVector> {
    check_eval(eval, eval.gradient.len())?;
    Ok(eval.gradient.iter().map(|g| -hp.lr * g).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    /// `d_init + Σ g.*g`.
    pub accum: DenseVector,
    pub k: usize,
}

impl AdagradState {
    pub fn new(n: usize, initial: f64) -> Self {
        Self {
            accum: DenseVector::filled(n, initial),
            k: 0,
        }
    }
}

/// `s = −lr·g/√(accum + ε)` after adding `g.*g` to the accumulator.
pub fn adagrad_step(state: &mut AdagradState, eval: &BatchEval, hp: &HyperParams) -> Result<DenseVector> {
    check_eval(eval, state.accum.len())?;
    super::accumulate_squares(&mut state.accum, &eval.gradient);
    state.k += 1;
    Ok(eval
        .gradient
        .iter()
        .zip(state.accum.iter())
        .map(|(g, a)| -hp.lr * g / (a + hp.eps).sqrt())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: DenseVector,
    pub v: DenseVector,
    pub t: usize,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: DenseVector::zeros(n),
            v: DenseVector::zeros(n),
            t: 0,
        }
    }
}

/// Bias-corrected Adam.
pub fn adam_step(state: &mut AdamState, eval: &BatchEval, hp: &HyperParams) -> Result<DenseVector> {
    check_eval(eval, state.m.len())?;
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - hp.beta1.powi(t);
    let c2 = 1.0 - hp.beta2.powi(t);
    let mut s = DenseVector::zeros(state.m.len());
    for (i, g) in eval.gradient.iter().enumerate() {
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        s[i] = -hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
    }
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct Sgd {
    hp: HyperParams,
    k: usize,
}

impl Sgd {
    pub fn new(hp: HyperParams) -> Self {
        Self { hp, k: 0 }
    }
}

impl Optimizer for Sgd {
    fn kind(&self) -> OptimizerKind {
        OptimizerKind::Sgd
    }

    fn step(&mut self, eval: &BatchEval, _: Option<&DenseMatrix>) -> Result<DenseVector> {
        let s = sgd_step(eval, &self.hp)?;
        self.k += 1;
        Ok(s)
    }

    fn steps_taken(&self) -> usize {
        self.k
    }
}

#[derive(Debug, Clone)]
pub struct Adagrad {
    hp: HyperParams,
    state: AdagradState,
}

impl Adagrad {
    pub fn new(hp: HyperParams, n: usize) -> Self {
        let state = AdagradState::new(n, hp.d_init);
        Self { hp, state }
    }
}

impl Optimizer for Adagrad {
    fn kind(&self) -> OptimizerKind {
        OptimizerKind::Adagrad
    }

    fn step(&mut self, eval: &BatchEval, _: Option<&DenseMatrix>) -> Result<DenseVector> {
        adagrad_step(&mut self.state, eval, &self.hp)
    }

    fn steps_taken(&self) -> usize {
        self.state.k
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    hp: HyperParams,
    state: AdamState,
}

impl Adam {
    pub fn new(hp: HyperParams, n: usize) -> Self {
        Self {
            hp,
            state: AdamState::new(n),
        }
    }
}

impl Optimizer for Adam {
    fn kind(&self) -> OptimizerKind {
        OptimizerKind::Adam
    }

    fn step(&mut self, eval: &BatchEval, _: Option<&DenseMatrix>) -> Result<DenseVector> {
        adam_step(&mut self.state, eval, &self.hp)
    }

    fn steps_taken(&self) -> usize {
        self.state.t
    }
}
