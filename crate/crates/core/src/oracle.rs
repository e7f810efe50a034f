//! Brute-force reference implementations.
//!
//! Used by the test suites and by `snlls-bench selftest`. Nothing here is on
//! a training hot path, and nothing here reuses backprop or the structured
//! solvers it is meant to check: matrices are formed explicitly and solved
//! densely.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkit::{dense_solve, DenseMatrix, DenseVector};

/// Largest `n · L` an oracle will materialize.
pub const MAX_ORACLE_ENTRIES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSpec {
    pub h: f64,
    /// Number of coordinates to probe; `None` probes all of them.
    pub coords: Option<usize>,
    /// Chooses which coordinates are probed.
    pub seed: u64,
}

impl Default for FdSpec {
    fn default() -> Self {
        Self {
            h: 1e-6,
            coords: None,
            seed: 0,
        }
    }
}

/// Central-difference estimate on a subset of coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FdEstimate {
    pub indices: Vec<usize>,
    pub values: DenseVector,
}

/// `(f(w + h eᵢ) − f(w − h eᵢ)) / 2h` for the coordinates chosen by `spec`.
pub fn fd_gradient<F>(loss_fn: F, w: &[f64], spec: &FdSpec) -> Result<FdEstimate>
where
    F: Fn(&[f64]) -> f64,
{
    if !(spec.h > 0.0) {
        return Err(Error::Precondition(format!("step h must be positive, got {}", spec.h)));
    }
    let n = w.len();
    let mut indices: Vec<usize> = match spec.coords {
        Some(k) if k < n => sample(&mut ChaCha8Rng::seed_from_u64(spec.seed), n, k).into_vec(),
        _ => (0..n).collect(),
    };
    indices.sort_unstable();

    let mut probe = w.to_vec();
    let mut values = Vec::with_capacity(indices.len());
    for &i in &indices {
        let orig = probe[i];
        probe[i] = orig + spec.h;
        let up = loss_fn(&probe);
        probe[i] = orig - spec.h;
        let down = loss_fn(&probe);
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Poisoned(format!("loss not finite around coordinate {i}")));
        }
        values.push((up - down) / (2.0 * spec.h));
    }
    Ok(FdEstimate {
        indices,
        values: values.into(),
    })
}

/// Forms `H = (1/α)·diag(√a) + vvᵀ` densely and solves `H s = −g`.
pub fn dense_smw_solve(a: &[f64], v: &[f64], alpha: f64, g: &[f64]) -> Result<DenseVector> {
    let n = a.len();
    if v.len() != n || g.len() != n {
        return Err(Error::Dimension("a, v and g must have equal length".into()));
    }
    if a.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::Degenerate("diagonal accumulator must be positive".into()));
    }
    let mut h = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = v[i] * v[j];
        }
        h[(i, i)] += a[i].sqrt() / alpha;
    }
    let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
    dense_solve(&h, &neg_g)
}

/// Forms `JJᵀ + (1/α)·diag(√d²)` densely and solves against `−g`.
pub fn dense_full_jacobian_solve(jac: &DenseMatrix, d2: &[f64], alpha: f64, g: &[f64]) -> Result<DenseVector> {
    let n = jac.rows();
    if d2.len() != n || g.len() != n {
        return Err(Error::Dimension("jacobian rows, d2 and g must agree".into()));
    }
    let mut h = jac.matmul(&jac.transpose())?;
    for i in 0..n {
        h[(i, i)] += d2[i].sqrt() / alpha;
    }
    let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
    dense_solve(&h, &neg_g)
}

fn guard(n: usize, l: usize) -> Result<()> {
    if n.saturating_mul(l) > MAX_ORACLE_ENTRIES {
        return Err(Error::Capacity(format!("oracle matrix {n}x{l} too large")));
    }
    Ok(())
}

/// Explicit rank-1 estimate `θ·g rᵀ` with `θ = L / (2‖r‖²)`.
pub fn brute_rank1(g: &[f64], r: &[f64], l: usize) -> Result<DenseMatrix> {
    if r.len() != l {
        return Err(Error::Dimension(format!("L = {l} but r has {} entries", r.len())));
    }
    guard(g.len(), l)?;
    let rr: f64 = r.iter().map(|x| x * x).sum();
    if rr == 0.0 {
        return Err(Error::Degenerate("rank-1 estimate needs a nonzero residual".into()));
    }
    let theta = l as f64 / (2.0 * rr);
    let mut m = DenseMatrix::zeros(g.len(), l);
    for (i, gi) in g.iter().enumerate() {
        for (j, rj) in r.iter().enumerate() {
            m[(i, j)] = theta * gi * rj;
        }
    }
    Ok(m)
}

/// Explicit rank-L estimate `(L/2)·diag(g)·P₁ᵀ·R·P₂`.
///
/// `row_perm[i]` is the slot of `R` that row `i` receives (so `P₁ᵀ` has a
/// one at `(i, row_perm[i])`), and `P₂` has a one at `(c, res_perm[c])`.
/// `R` is `n × L` with `R[c][c] = 1/(P₂r)_c` for `c < L − 1` and
/// `R[j][L−1] = 1/(P₂r)_{L−1}` for `j ≥ L − 1`; residual magnitudes below
/// `floor` are clamped with their sign.
pub fn brute_rank_l(
    g: &[f64],
    r: &[f64],
    l: usize,
    row_perm: &[usize],
    res_perm: &[usize],
    floor: f64,
) -> Result<DenseMatrix> {
    let n = g.len();
    if r.len() != l || row_perm.len() != n || res_perm.len() != l || l == 0 {
        return Err(Error::Dimension("inconsistent rank-L oracle inputs".into()));
    }
    guard(n, l.max(n))?;

    let mut p1t = DenseMatrix::zeros(n, n);
    for (i, &slot) in row_perm.iter().enumerate() {
        p1t[(i, slot)] = 1.0;
    }
    let mut p2 = DenseMatrix::zeros(l, l);
    for (c, &col) in res_perm.iter().enumerate() {
        p2[(c, col)] = 1.0;
    }
    let permuted = p2.mul_vec(r)?;
    let beta = |c: usize| {
        let x = permuted[c];
        let x = if x.abs() >= floor {
            x
        } else if x < 0.0 {
            -floor
        } else {
            floor
        };
        1.0 / x
    };
    let mut rect = DenseMatrix::zeros(n, l);
    for j in 0..n {
        let c = if j < l - 1 { j } else { l - 1 };
        rect[(j, c)] = beta(c);
    }
    let mut diag_g = DenseMatrix::zeros(n, n);
    for (i, gi) in g.iter().enumerate() {
        diag_g[(i, i)] = gi * l as f64 / 2.0;
    }
    diag_g.matmul(&p1t)?.matmul(&rect)?.matmul(&p2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_of_squared_norm() {
        let est = fd_gradient(|w| w.iter().map(|x| x * x).sum(), &[1.0, 2.0], &FdSpec::default()).unwrap();
        assert_eq!(est.indices, vec![0, 1]);
        assert!((est.values[0] - 2.0).abs() < 1e-9);
        assert!((est.values[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn fd_of_constant_and_subset() {
        let spec = FdSpec {
            coords: Some(3),
            ..FdSpec::default()
        };
        let est = fd_gradient(|_| 7.0, &[0.0; 10], &spec).unwrap();
        assert_eq!(est.indices.len(), 3);
        assert!(est.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fd_rejects_nonfinite() {
        assert!(matches!(
            fd_gradient(
                |w| 1.0 / w[0],
                &[0.0],
                &FdSpec {
                    h: 0.0,
                    ..FdSpec::default()
                }
            ),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            fd_gradient(|w| if w[0] > 0.0 { f64::NAN } else { 0.0 }, &[0.0], &FdSpec::default()),
            Err(Error::Poisoned(_))
        ));
    }

    #[test]
    fn dense_smw_examples() {
        let g = [1.0, -2.0];
        let s = dense_smw_solve(&[4.0, 1.0], &[0.0, 0.0], 0.5, &g).unwrap();
        assert!((s[0] + 0.5 * 1.0 / 2.0).abs() < 1e-15);
        assert!((s[1] - 0.5 * 2.0).abs() < 1e-15);

        let s = dense_smw_solve(&[1.0, 1.0], &[1.0, 1.0], 0.5, &[1.0, 0.0]).unwrap();
        assert!((s[0] + 0.375).abs() < 1e-15 && (s[1] - 0.125).abs() < 1e-15);

        let s = dense_smw_solve(&[1.0], &[1.0], 1.0, &[1.0]).unwrap();
        assert_eq!(s.as_slice(), &[-0.5]);
    }

    #[test]
    fn rank1_examples() {
        let m = brute_rank1(&[3.0, 4.0], &[2.0], 1).unwrap();
        assert_eq!(m.as_slice(), &[0.75, 1.0]);
        let back = m.mul_vec(&[2.0]).unwrap();
        assert_eq!(back.iter().map(|x| 2.0 * x).collect::<Vec<_>>(), vec![3.0, 4.0]);

        let zero = brute_rank1(&[0.0; 3], &[1.0, 2.0], 2).unwrap();
        assert!(zero.as_slice().iter().all(|v| *v == 0.0));
        assert!(matches!(brute_rank1(&[1.0], &[0.0, 0.0], 2), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rank_l_identity_example() {
        let m = brute_rank_l(&[1.0, 2.0, 3.0], &[2.0, 4.0], 2, &[0, 1, 2], &[0, 1], 1e-8).unwrap();
        assert_eq!(m.as_slice(), &[0.5, 0.0, 0.0, 0.5, 0.0, 0.75]);
    }
}
