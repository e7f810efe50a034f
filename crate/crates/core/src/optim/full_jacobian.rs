use super::{accumulate_squares, check_eval, HyperParams, Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::model::BatchEval;
use crate::numkit::{dense_solve, DenseMatrix, DenseVector};

/// Solves `(JJᵀ + A)s = −g` with `A = (1/α)·diag(√d²)` through the Woodbury
/// identity, so only an `L × L` system `I + JᵀA⁻¹J` is factored.
///
/// `d2` is used as given; accumulation is the caller's job.
pub fn full_jacobian_step(jac: &DenseMatrix, eval: &BatchEval, d2: &[f64], hp: &HyperParams) -> Result<DenseVector> {
    let n = d2.len();
    check_eval(eval, n)?;
    if jac.rows() != n {
        return Err(Error::Dimension(format!(
            "jacobian has {} rows for {n} weights",
            jac.rows()
        )));
    }
    let l = jac.cols();
    let g = &eval.gradient;

    let a_inv: Vec<f64> = d2.iter().map(|d| hp.alpha / d.sqrt()).collect();
    let a_inv_g: Vec<f64> = a_inv.iter().zip(g.iter()).map(|(a, gi)| a * gi).collect();

    let mut inner = DenseMatrix::identity(l);
    let mut rhs = vec![0.0; l];
    for i in 0..n {
        let row = jac.row(i);
        let w = a_inv[i];
        for p in 0..l {
            let jp = row[p];
            if jp == 0.0 {
                continue;
            }
            rhs[p] += jp * a_inv_g[i];
            let scaled = w * jp;
            for q in 0..l {
                inner[(p, q)] += scaled * row[q];
            }
        }
    }
    let y = dense_solve(&inner, &rhs)?;
    let jy = jac.mul_vec(&y)?;
    Ok((0..n).map(|i| -a_inv_g[i] + a_inv[i] * jy[i]).collect())
}

/// Levenberg-Marquardt style baseline that uses the exact batch Jacobian.
#[derive(Debug, Clone)]
pub struct FullJacobian {
    hp: HyperParams,
    d2: DenseVector,
    k: usize,
}

impl FullJacobian {
    pub fn new(hp: HyperParams, n: usize) -> Self {
        let d2 = DenseVector::filled(n, hp.d_init);
        Self { hp, d2, k: 0 }
    }

    pub fn d2(&self) -> &DenseVector {
        &self.d2
    }
}

impl Optimizer for FullJacobian {
    fn kind(&self) -> OptimizerKind {
        OptimizerKind::FullJacobian
    }

    fn needs_jacobian(&self) -> bool {
        true
    }

    fn step(&mut self, eval: &BatchEval, jacobian: Option<&DenseMatrix>) -> Result<DenseVector> {
        let jac = jacobian.ok_or_else(|| Error::Precondition("full-jacobian step needs the batch jacobian".into()))?;
        check_eval(eval, self.d2.len())?;
        accumulate_squares(&mut self.d2, &eval.gradient);
        let s = full_jacobian_step(jac, eval, &self.d2, &self.hp)?;
        self.k += 1;
        Ok(s)
    }

    fn steps_taken(&self) -> usize {
        self.k
    }
}
