use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::nlls1::scaled_direction;
use super::{accumulate_squares, check_eval, smw_rank1_solve, HyperParams, Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::model::BatchEval;
use crate::numkit::{DenseMatrix, DenseVector};

/// Nonzero structure of one rank-L Jacobian estimate `(L/2)·diag(g)·P₁ᵀ·R·P₂`.
///
/// Row `i` of the estimate has a single nonzero, `values[i]`, in column
/// `col_of_row[i]`. Rows whose permuted slot is among the first `L − 1` get
/// distinct columns; every other row shares the last permuted column.
#[derive(Debug, Clone, PartialEq)]
pub struct RankLSketch {
    /// `P₁`: row `i` occupies slot `row_perm[i]` of `R`.
    pub row_perm: Vec<usize>,
    /// `P₂`: column `c` of `R` lands on residual `res_perm[c]`.
    pub res_perm: Vec<usize>,
    pub values: DenseVector,
    pub col_of_row: Vec<usize>,
}

impl RankLSketch {
    /// Builds the sketch for given permutations. Residuals smaller than
    /// `floor` in magnitude are clamped to `±floor` before inversion.
    pub fn from_permutations(
        gradient: &[f64],
        residuals: &[f64],
        row_perm: Vec<usize>,
        res_perm: Vec<usize>,
        floor: f64,
    ) -> Result<Self> {
        let n = gradient.len();
        let l = residuals.len();
        if l == 0 {
            return Err(Error::Dimension("rank-L sketch needs at least one residual".into()));
        }
        check_permutation(&row_perm, n, "row")?;
        check_permutation(&res_perm, l, "residual")?;

        let half_l = l as f64 / 2.0;
        let mut values = DenseVector::zeros(n);
        let mut col_of_row = vec![0; n];
        for i in 0..n {
            let col = res_perm[row_perm[i].min(l - 1)];
            let rho = clamp_magnitude(residuals[col], floor);
            values[i] = half_l * gradient[i] / rho;
            col_of_row[i] = col;
        }
        Ok(Self {
            row_perm,
            res_perm,
            values,
            col_of_row,
        })
    }

    /// `(2/L)·Ĵ·r`, which equals `g` whenever no residual was clamped.
    pub fn scaled_times(&self, residuals: &[f64]) -> DenseVector {
        let scale = 2.0 / residuals.len() as f64;
        self.values
            .iter()
            .zip(&self.col_of_row)
            .map(|(v, &c)| scale * v * residuals[c])
            .collect()
    }
}

fn clamp_magnitude(x: f64, floor: f64) -> f64 {
    if x.abs() >= floor {
        x
    } else if x < 0.0 {
        -floor
    } else {
        floor
    }
}

fn check_permutation(p: &[usize], len: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; len];
    if p.len() != len {
        return Err(Error::Dimension(format!(
            "{what} permutation has {} entries, expected {len}",
            p.len()
        )));
    }
    for &i in p {
        if i >= len || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Dimension(format!("{what} permutation is not a bijection")));
        }
    }
    Ok(())
}

/// Draws `P₁` (over the weights) and `P₂` (over the residuals) from `seed`
/// and builds the sketch for `eval`.
pub fn nllsl_sketch(eval: &BatchEval, seed: u64, floor: f64) -> Result<RankLSketch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row_perm: Vec<usize> = (0..eval.gradient.len()).collect();
    row_perm.shuffle(&mut rng);
    let mut res_perm: Vec<usize> = (0..eval.residuals.len()).collect();
    res_perm.shuffle(&mut rng);
    RankLSketch::from_permutations(&eval.gradient, &eval.residuals, row_perm, res_perm, floor)
}

/// Accumulators of the rank-L method. `u` sums the sketch values of every
/// step; the permutation stream is reseeded per step from `rng`.
#[derive(Debug, Clone)]
pub struct NllsLState {
    pub f: f64,
    pub u: DenseVector,
    pub d2: DenseVector,
    pub k: usize,
    rng: ChaCha8Rng,
}

impl NllsLState {
    pub fn new(n: usize, d_init: f64, perm_seed: u64) -> Self {
        Self {
            f: 0.0,
            u: DenseVector::zeros(n),
            d2: DenseVector::filled(n, d_init),
            k: 0,
            rng: ChaCha8Rng::seed_from_u64(perm_seed),
        }
    }

    /// Seed for the next step's permutations.
    pub fn next_seed(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// One NLLSL step: accumulate `f`, `d²` and `u += sketch.values`, then the
/// same rank-1 SMW solve as NLLS1 with `v = (δ/√f)·u`.
pub fn nllsl_step(state: &mut NllsLState, eval: &BatchEval, hp: &HyperParams) -> Result<DenseVector> {
    check_eval(eval, state.d2.len())?;
    let seed = state.next_seed();
    let sketch = nllsl_sketch(eval, seed, hp.div_floor)?;
    Ok(nllsl_step_with_sketch(state, eval, &sketch, hp)?.1)
}

/// The step for an already drawn sketch; also returns the `v` it used.
pub(crate) fn nllsl_step_with_sketch(
    state: &mut NllsLState,
    eval: &BatchEval,
    sketch: &RankLSketch,
    hp: &HyperParams,
) -> Result<(Vec<f64>, DenseVector)> {
    state.f += eval.loss;
    if hp.accumulate_jacobian {
        for (u, x) in state.u.iter_mut().zip(sketch.values.iter()) {
            *u += x;
        }
    }
    accumulate_squares(&mut state.d2, &eval.gradient);
    let v = scaled_direction(&state.u, state.f, hp.delta);
    let solve = smw_rank1_solve(&state.d2, &v, &eval.gradient, hp.alpha, hp.smw_mode)?;
    state.k += 1;
    Ok((v, solve.step))
}

#[derive(Debug, Clone)]
pub struct NllsL {
    hp: HyperParams,
    state: NllsLState,
}

impl NllsL {
    pub fn new(hp: HyperParams, n: usize, perm_seed: u64) -> Self {
        let state = NllsLState::new(n, hp.d_init, perm_seed);
        Self { hp, state }
    }

    pub fn state(&self) -> &NllsLState {
        &self.state
    }
}

impl Optimizer for NllsL {
    fn kind(&self) -> OptimizerKind {
        OptimizerKind::NllsL
    }

    fn step(&mut self, eval: &BatchEval, _: Option<&DenseMatrix>) -> Result<DenseVector> {
        nllsl_step(&mut self.state, eval, &self.hp)
    }

    fn steps_taken(&self) -> usize {
        self.state.k
    }
}
