//! Optimizers over a flat weight vector.
//!
//! Every optimizer consumes a [`BatchEval`] (and, for the full-Jacobian
//! method, the batch Jacobian) and returns a step `s` that the caller adds to
//! the weights.
//!
//! | name            | search direction                                        |
//! |-----------------|---------------------------------------------------------|
//! | `nlls1`         | `((1/α)D + vvᵀ)s = −g`, `v` from accumulated gradients  |
//! | `nllsl`         | same solve, `v` from accumulated rank-L sketch values   |
//! | `full-jacobian` | `(JJᵀ + (1/α)D)s = −g` with the exact batch Jacobian    |
//! | `sgd`, `adagrad`, `adam` | the usual first-order baselines                |
//!
//! `D = diag(√d²)` where `d²` is a running sum of squared gradients.

mod baselines;
mod full_jacobian;
mod nlls1;
mod nllsl;
mod smw;

use std::fmt;
use std::str::FromStr;

pub use baselines::{adagrad_step, adam_step, sgd_step, Adagrad, AdagradState, Adam, AdamState, Sgd};
pub use full_jacobian::{full_jacobian_step, FullJacobian};
pub use nlls1::{nlls1_step, Nlls1, Nlls1State};
pub use nllsl::{nllsl_sketch, nllsl_step, NllsL, NllsLState, RankLSketch};
pub use smw::{smw_rank1_solve, SmwSolve};

use crate::error::{Error, Result};
use crate::model::BatchEval;
use crate::numkit::{DenseMatrix, DenseVector};

/// `√(L / 4B)`, the scale around which `δ` should be chosen.
pub fn delta_default(residual_len: usize, batches: usize) -> f64 {
    (residual_len as f64 / (4.0 * batches as f64)).sqrt()
}

/// Denominator used in the rank-1 SMW update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmwMode {
    /// `1 + vᵀ(αD⁻¹)v`, the exact Sherman-Morrison solve.
    #[default]
    Exact,
    /// `1 + vᵀs₁`. Kept for comparison; it does not solve the system exactly.
    AsPrinted,
}

impl FromStr for SmwMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(SmwMode::Exact),
            "as_printed" | "as-printed" => Ok(SmwMode::AsPrinted),
            other => Err(Error::Config(format!("unknown smw mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Damping scale `α` in `(1/α)D`.
    pub alpha: f64,
    /// Scale of the accumulated-Jacobian vector, `v = (δ/√f)·j`.
    pub delta: f64,
    /// Objective scaling; set to the batch count.
    pub gamma: f64,
    /// Seed value of the squared-gradient accumulator.
    pub d_init: f64,
    /// Learning rate for SGD, Adagrad and Adam.
    pub lr: f64,
    /// Smallest residual magnitude inverted by the rank-L sketch.
    pub div_floor: f64,
    pub smw_mode: SmwMode,
    /// When false the NLLS methods keep `j` (or `u`) at zero.
    pub accumulate_jacobian: bool,
    pub beta1: f64,
    pub beta2: f64,
    /// Adagrad/Adam epsilon.
    pub eps: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 5e-3,
            delta: 1.0,
            gamma: 1.0,
            d_init: 1e-5,
            lr: 0.01,
            div_floor: 1e-8,
            smw_mode: SmwMode::Exact,
            accumulate_jacobian: true,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }
}

impl HyperParams {
    /// Defaults for a given optimizer.
    pub fn for_kind(kind: OptimizerKind) -> Self {
        let base = Self::default();
        match kind {
            OptimizerKind::Nlls1 => base,
            OptimizerKind::NllsL => Self {
                alpha: 5e-2,
                d_init: 1e-10,
                ..base
            },
            OptimizerKind::FullJacobian => base,
            OptimizerKind::Sgd => Self { lr: 0.01, ..base },
            OptimizerKind::Adagrad => Self {
                lr: 0.01,
                d_init: 1e-10,
                ..base
            },
            OptimizerKind::Adam => Self { lr: 0.001, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("d_init", self.d_init),
            ("div_floor", self.div_floor),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.eps >= 0.0) || !(self.lr.is_finite()) {
            return Err(Error::Config("eps must be >= 0 and lr finite".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Nlls1,
    NllsL,
    Sgd,
    Adagrad,
    Adam,
    FullJacobian,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::Nlls1,
        OptimizerKind::NllsL,
        OptimizerKind::Sgd,
        OptimizerKind::Adagrad,
        OptimizerKind::Adam,
        OptimizerKind::FullJacobian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Nlls1 => "nlls1",
            OptimizerKind::NllsL => "nllsl",
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adagrad => "adagrad",
            OptimizerKind::Adam => "adam",
            OptimizerKind::FullJacobian => "full-jacobian",
        }
    }

    /// Fresh optimizer state for `n` weights. `seed` drives any internal
    /// randomness (the rank-L permutations).
    pub fn build(self, hp: &HyperParams, n: usize, seed: u64) -> Result<Box<dyn Optimizer>> {
        hp.validate()?;
        let hp = hp.clone();
        Ok(match self {
            OptimizerKind::Nlls1 => Box::new(Nlls1::new(hp, n)),
            OptimizerKind::NllsL => Box::new(NllsL::new(hp, n, seed)),
            OptimizerKind::Sgd => Box::new(Sgd::new(hp)),
            OptimizerKind::Adagrad => Box::new(Adagrad::new(hp, n)),
            OptimizerKind::Adam => Box::new(Adam::new(hp, n)),
            OptimizerKind::FullJacobian => Box::new(FullJacobian::new(hp, n)),
        })
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "full_jacobian" && *k == OptimizerKind::FullJacobian))
            .ok_or_else(|| Error::Config(format!("unknown optimizer `{s}`")))
    }
}

/// A stateful optimizer driven one batch at a time.
pub trait Optimizer: Send {
    fn kind(&self) -> OptimizerKind;

    /// Whether [`Optimizer::step`] needs the exact batch Jacobian.
    fn needs_jacobian(&self) -> bool {
        false
    }

    fn step(&mut self, eval: &BatchEval, jacobian: Option<&DenseMatrix>) -> Result<DenseVector>;

    /// Number of steps taken so far.
    fn steps_taken(&self) -> usize;
}

pub(crate) fn check_eval(eval: &BatchEval, n: usize) -> Result<()> {
    if eval.gradient.len() != n {
        return Err(Error::Dimension(format!(
            "optimizer holds {n} weights, gradient has {}",
            eval.gradient.len()
        )));
    }
    if !eval.gradient.is_finite() {
        return Err(Error::Poisoned("non-finite gradient entry".into()));
    }
    if !eval.residuals.is_finite() || !eval.loss.is_finite() {
        return Err(Error::Poisoned("non-finite residual or loss".into()));
    }
    Ok(())
}

/// `d² ← d² + g.*g`.
pub(crate) fn accumulate_squares(d2: &mut [f64], g: &[f64]) {
    for (d, gi) in d2.iter_mut().zip(g) {
        *d += gi * gi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_default_examples() {
        assert!((delta_default(96, 4) - 6f64.sqrt()).abs() < 1e-15);
        // δ = 0.8 is roughly a third of √6.
        assert!((delta_default(96, 4) / 3.0 - 0.8).abs() < 0.02);
        let d = delta_default(25_088, 1_875);
        assert!((d - 1.829).abs() < 1e-3);
        assert!((0.5 * d - 0.9).abs() < 0.02);
        assert_eq!(delta_default(4, 1), 1.0);
    }

    #[test]
    fn names_round_trip() {
        for k in OptimizerKind::ALL {
            assert_eq!(k.name().parse::<OptimizerKind>().unwrap(), k);
        }
        assert!("lbfgs".parse::<OptimizerKind>().is_err());
    }

    #[test]
    fn hyperparams_validation() {
        for k in OptimizerKind::ALL {
            HyperParams::for_kind(k).validate().unwrap();
        }
        let bad = HyperParams {
            alpha: 0.0,
            ..HyperParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = HyperParams {
            div_floor: f64::NAN,
            ..HyperParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
