//! Small dense kernels: element-wise arithmetic, inner products and a
//! partially pivoted Gaussian elimination solver.
//!
//! Everything here is `f64` and allocation-light; problem sizes in this crate
//! stay in the hundreds, so there is no blocking or BLAS.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Pivots with magnitude below this are treated as singular.
pub const SINGULAR_PIVOT: f64 = 1e-14;

/// Owned dense vector of `f64`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn filled(len: usize, value: f64) -> Self {
        Self(vec![value; len])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for DenseVector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

impl FromIterator<f64> for DenseVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> DenseVector {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<DenseVector> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `selfᵀ · x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Result<DenseVector> {
        if x.len() != self.rows {
            return Err(Error::Dimension(format!(
                "matrix has {} rows, vector has {} entries",
                self.rows,
                x.len()
            )));
        }
        let mut out = DenseVector::zeros(self.cols);
        for (i, &xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Element-wise operation selector for [`ewise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ewise {
    Mul,
    /// Division; every denominator must satisfy `|b_i| >= floor`.
    Div {
        floor: f64,
    },
    Sqrt,
}

/// Applies an element-wise operation. `b` is required for `Mul` and `Div`
/// and ignored for `Sqrt`.
pub fn ewise(op: Ewise, a: &[f64], b: Option<&[f64]>) -> Result<DenseVector> {
    match op {
        Ewise::Mul => {
            let b = second_operand(a, b)?;
            Ok(a.iter().zip(b).map(|(x, y)| x * y).collect())
        }
        Ewise::Div { floor } => {
            let b = second_operand(a, b)?;
            if let Some((i, y)) = b.iter().enumerate().find(|(_, y)| !(y.abs() >= floor)) {
                return Err(Error::Degenerate(format!(
                    "denominator {y:e} at index {i} is below floor {floor:e}"
                )));
            }
            Ok(a.iter().zip(b).map(|(x, y)| x / y).collect())
        }
        Ewise::Sqrt => {
            if let Some((i, x)) = a.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
                return Err(Error::Degenerate(format!("square root of {x} at index {i}")));
            }
            Ok(a.iter().map(|x| x.sqrt()).collect())
        }
    }
}

fn second_operand<'a>(a: &[f64], b: Option<&'a [f64]>) -> Result<&'a [f64]> {
    let b = b.ok_or_else(|| Error::Dimension("binary element-wise op needs two operands".into()))?;
    check_len(a, b)?;
    Ok(b)
}

pub fn mul(a: &[f64], b: &[f64]) -> Result<DenseVector> {
    ewise(Ewise::Mul, a, Some(b))
}

pub fn div(a: &[f64], b: &[f64], floor: f64) -> Result<DenseVector> {
    ewise(Ewise::Div { floor }, a, Some(b))
}

pub fn sqrt(a: &[f64]) -> Result<DenseVector> {
    ewise(Ewise::Sqrt, a, None)
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a, b)?;
    Ok(dot_unchecked(a, b))
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot_unchecked(a, a).sqrt()
}

pub(crate) fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("length {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Result<DenseVector> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension(format!(
            "solve needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.len() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has {} entries for a {n}x{n} system",
            b.len()
        )));
    }

    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let (piv_row, piv) = (col..n)
            .map(|r| (r, m[r * n + col]))
            .max_by(|p, q| p.1.abs().total_cmp(&q.1.abs()))
            .expect("non-empty pivot range");
        if !(piv.abs() >= SINGULAR_PIVOT) {
            return Err(Error::Singular {
                column: col,
                pivot: piv,
            });
        }
        if piv_row != col {
            for j in 0..n {
                m.swap(col * n + j, piv_row * n + j);
            }
            x.swap(col, piv_row);
        }
        for r in col + 1..n {
            let factor = m[r * n + col] / piv;
            if factor == 0.0 {
                continue;
            }
            m[r * n + col] = 0.0;
            for j in col + 1..n {
                m[r * n + j] -= factor * m[col * n + j];
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let tail: f64 = (col + 1..n).map(|j| m[col * n + j] * x[j]).sum();
        x[col] = (x[col] - tail) / m[col * n + col];
    }
    Ok(DenseVector(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ewise_examples() {
        assert_eq!(&*mul(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), &[3.0, 8.0]);
        assert_eq!(&*sqrt(&[4.0, 9.0]).unwrap(), &[2.0, 3.0]);
        assert_eq!(&*div(&[1.0, 1.0], &[2.0, 4.0], 1e-12).unwrap(), &[0.5, 0.25]);
    }

    #[test]
    fn ewise_errors() {
        assert!(matches!(mul(&[1.0], &[1.0, 2.0]), Err(Error::Dimension(_))));
        assert!(matches!(
            div(&[1.0, 1.0], &[1.0, 1e-20], 1e-12),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(sqrt(&[-1.0]), Err(Error::Degenerate(_))));
        assert!(matches!(ewise(Ewise::Mul, &[1.0], None), Err(Error::Dimension(_))));
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&[1.0, 1.0], &[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(dot(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(dot(&[2.0], &[3.0]).unwrap(), 6.0);
        assert!(dot(&[1.0], &[]).is_err());
    }

    #[test]
    fn solve_examples() {
        let x = dense_solve(&DenseMatrix::identity(2), &[3.0, 5.0]).unwrap();
        assert_eq!(&*x, &[3.0, 5.0]);

        let a = DenseMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = dense_solve(&a, &[-1.0, 0.0]).unwrap();
        assert!((x[0] + 0.375).abs() < 1e-15 && (x[1] - 0.125).abs() < 1e-15);

        let z = DenseMatrix::zeros(2, 2);
        assert!(matches!(dense_solve(&z, &[1.0, 1.0]), Err(Error::Singular { .. })));
        assert!(dense_solve(&DenseMatrix::zeros(2, 3), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn solve_needs_pivoting() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let x = dense_solve(&a, &[2.0, 3.0]).unwrap();
        assert_eq!(&*x, &[3.0, 2.0]);
    }

    fn vec_pair(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..max).prop_flat_map(|n| {
            (
                prop::collection::vec(-10.0..10.0f64, n),
                prop::collection::vec(-10.0..10.0f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn dot_is_symmetric((a, b) in vec_pair(64)) {
            let ab = dot(&a, &b).unwrap();
            let ba = dot(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * norm(&a) * norm(&b));
        }

        #[test]
        fn ewise_is_pure((a, b) in vec_pair(16)) {
            let (a0, b0) = (a.clone(), b.clone());
            let _ = mul(&a, &b);
            let _ = div(&a, &b, 1e-300);
            prop_assert_eq!(a, a0);
            prop_assert_eq!(b, b0);
        }

        #[test]
        fn solve_round_trip(n in 1usize..24, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut a = DenseMatrix::zeros(n, n);
            for i in 0..n {
                let mut off = 0.0;
                for j in 0..n {
                    if i != j {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        a[(i, j)] = v;
                        off += v.abs();
                    }
                }
                a[(i, i)] = off + rng.gen_range(0.5..2.0);
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let x = dense_solve(&a, &b).unwrap();
            let ax = a.mul_vec(&x).unwrap();
            let err = ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-9);
        }
    }
}
