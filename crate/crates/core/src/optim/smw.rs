use super::SmwMode;
use crate::error::Result;
use crate::numkit::{check_len, dot_unchecked, DenseVector};

/// Intermediate terms of the rank-1 Sherman-Morrison solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SmwSolve {
    pub s1: DenseVector,
    pub alpha1: f64,
    pub s2: DenseVector,
    pub alpha2: f64,
    pub step: DenseVector,
}

/// Solves `((1/α)·diag(√a) + vvᵀ) s = −g` using element-wise operations only.
///
/// With `D⁻¹` acting as `1./√a`:
/// `s₁ = −α g./√a`, `α₁ = vᵀs₁`, `s₂ = α v./√a`, `α₂ = vᵀs₂`, and
/// `s = s₁ − α₁/(1+α₂) s₂` (or `1+α₁` in [`SmwMode::AsPrinted`]).
///
/// `a` must be strictly positive.
pub fn smw_rank1_solve(a: &[f64], v: &[f64], g: &[f64], alpha: f64, mode: SmwMode) -> Result<SmwSolve> {
    check_len(a, v)?;
    check_len(a, g)?;
    let root: Vec<f64> = a.iter().map(|x| x.sqrt()).collect();
    let s1: DenseVector = g.iter().zip(&root).map(|(gi, r)| -alpha * gi / r).collect();
    let alpha1 = dot_unchecked(v, &s1);
    let s2: DenseVector = v.iter().zip(&root).map(|(vi, r)| alpha * vi / r).collect();
    let alpha2 = dot_unchecked(v, &s2);
    let denom = match mode {
        SmwMode::Exact => 1.0 + alpha2,
        SmwMode::AsPrinted => 1.0 + alpha1,
    };
    let coef = alpha1 / denom;
    let step = s1.iter().zip(s2.iter()).map(|(p, q)| p - coef * q).collect();
    Ok(SmwSolve {
        s1,
        alpha1,
        s2,
        alpha2,
        step,
    })
}
