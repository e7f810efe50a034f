//! Dense feed-forward network with a sum-of-squares batch loss.
//!
//! Weights live in one flat vector so optimizers can treat the network as a
//! plain `w ∈ ℝⁿ`. Layer `k` contributes its `in_dim × out_dim` kernel
//! (row-major, `W[i][o]` at `i * out_dim + o`) followed by `out_dim` biases.
//!
//! Residuals of a batch are flattened sample-major: the residual of sample
//! `s`, output component `c` sits at `s * C + c`, so a batch of `S` samples
//! has `L = S · C` residual components.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkit::{DenseMatrix, DenseVector};

/// Upper bound on `n · L` for materialized Jacobians.
pub const MAX_JACOBIAN_ENTRIES: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "softmax" => Ok(Activation::Softmax),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }

    fn param_count(&self) -> usize {
        (self.in_dim + 1) * self.out_dim
    }
}

/// Builds a chain of layers from widths, e.g. `[4, 10, 10, 3]` with three
/// activations.
pub fn chain(widths: &[usize], activations: &[Activation]) -> Result<Vec<LayerSpec>> {
    if widths.len() < 2 || activations.len() != widths.len() - 1 {
        return Err(Error::Dimension(format!(
            "{} widths need {} activations, got {}",
            widths.len(),
            widths.len().saturating_sub(1),
            activations.len()
        )));
    }
    Ok(widths
        .windows(2)
        .zip(activations)
        .map(|(w, &a)| LayerSpec::new(w[0], w[1], a))
        .collect())
}

/// The network used for the Iris experiment: 4→10→10→3, relu/relu/softmax.
pub fn iris_layers() -> Vec<LayerSpec> {
    use Activation::*;
    chain(&[4, 10, 10, 3], &[Relu, Relu, Softmax]).expect("static layer chain")
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Dimension("network needs at least one layer".into()));
    }
    for (k, spec) in specs.iter().enumerate() {
        if spec.in_dim == 0 || spec.out_dim == 0 {
            return Err(Error::Dimension(format!("layer {k} has a zero dimension")));
        }
        if spec.activation == Activation::Softmax && k + 1 != specs.len() {
            return Err(Error::Dimension(format!(
                "softmax is only allowed on the final layer (found on layer {k})"
            )));
        }
    }
    for (k, pair) in specs.windows(2).enumerate() {
        if pair[0].out_dim != pair[1].in_dim {
            return Err(Error::Dimension(format!(
                "layer {k} outputs {} values but layer {} expects {}",
                pair[0].out_dim,
                k + 1,
                pair[1].in_dim
            )));
        }
    }
    Ok(())
}

/// Residuals, loss and gradient of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEval {
    pub residuals: DenseVector,
    /// `(1/L)‖r‖²`.
    pub loss: f64,
    pub gradient: DenseVector,
}

impl BatchEval {
    pub fn residual_len(&self) -> usize {
        self.residuals.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<LayerSpec>,
    weights: DenseVector,
}

impl Mlp {
    /// Glorot-uniform kernels, zero biases.
    pub fn init_weights(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        validate_specs(specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(specs.iter().map(LayerSpec::param_count).sum());
        for spec in specs {
            let limit = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
            weights.extend((0..spec.in_dim * spec.out_dim).map(|_| rng.gen_range(-limit..=limit)));
            weights.extend(std::iter::repeat_n(0.0, spec.out_dim));
        }
        Ok(Self {
            layers: specs.to_vec(),
            weights: weights.into(),
        })
    }

    pub fn from_weights(specs: &[LayerSpec], weights: Vec<f64>) -> Result<Self> {
        validate_specs(specs)?;
        let n: usize = specs.iter().map(LayerSpec::param_count).sum();
        if weights.len() != n {
            return Err(Error::Dimension(format!(
                "layers need {n} weights, got {}",
                weights.len()
            )));
        }
        Ok(Self {
            layers: specs.to_vec(),
            weights: weights.into(),
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self) -> &DenseVector {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut DenseVector {
        &mut self.weights
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// `w ← w + s`.
    pub fn apply_step(&mut self, step: &[f64]) -> Result<()> {
        crate::numkit::check_len(&self.weights, step)?;
        for (w, s) in self.weights.iter_mut().zip(step) {
            *w += s;
        }
        Ok(())
    }

    /// Per-sample predictions, one row per row of `x`.
    pub fn forward(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_inputs(x)?;
        let c = self.output_dim();
        let mut out = DenseMatrix::zeros(x.rows(), c);
        for s in 0..x.rows() {
            let acts = self.forward_sample(x.row(s));
            out.row_mut(s).copy_from_slice(acts.last().expect("at least one layer"));
        }
        Ok(out)
    }

    /// Residuals `pred − Y`, loss `(1/L)‖r‖²` and its backpropagated gradient.
    pub fn evaluate_batch(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<BatchEval> {
        self.check_batch(x, y)?;
        let c = self.output_dim();
        let l = x.rows() * c;
        let scale = 2.0 / l as f64;

        let mut residuals = DenseVector::zeros(l);
        let mut gradient = DenseVector::zeros(self.param_count());
        let mut seed = vec![0.0; c];
        for s in 0..x.rows() {
            let acts = self.forward_sample(x.row(s));
            let pred = acts.last().expect("at least one layer");
            let r = &mut residuals[s * c..(s + 1) * c];
            for ((ri, p), t) in r.iter_mut().zip(pred).zip(y.row(s)) {
                *ri = p - t;
            }
            for (sd, ri) in seed.iter_mut().zip(r.iter()) {
                *sd = scale * ri;
            }
            self.backward_sample(&acts, &seed, &mut gradient);
        }
        let loss = crate::numkit::dot_unchecked(&residuals, &residuals) / l as f64;
        Ok(BatchEval {
            residuals,
            loss,
            gradient,
        })
    }

    /// Loss only, no gradient.
    pub fn batch_loss(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
        self.check_batch(x, y)?;
        let pred = self.forward(x)?;
        let sq: f64 = pred
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        Ok(sq / (x.rows() * self.output_dim()) as f64)
    }

    /// The `n × L` Jacobian of the residual vector; column `l` is `∇_w r_l`.
    pub fn exact_jacobian(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_batch(x, y)?;
        let n = self.param_count();
        let c = self.output_dim();
        let l = x.rows() * c;
        if n.saturating_mul(l) > MAX_JACOBIAN_ENTRIES {
            return Err(Error::Capacity(format!(
                "jacobian would hold {n}x{l} entries (limit {MAX_JACOBIAN_ENTRIES})"
            )));
        }
        let mut jac = DenseMatrix::zeros(n, l);
        let mut seed = vec![0.0; c];
        let mut column = vec![0.0; n];
        for s in 0..x.rows() {
            let acts = self.forward_sample(x.row(s));
            for comp in 0..c {
                seed.iter_mut().for_each(|v| *v = 0.0);
                seed[comp] = 1.0;
                column.iter_mut().for_each(|v| *v = 0.0);
                self.backward_sample(&acts, &seed, &mut column);
                let col = s * c + comp;
                for (i, v) in column.iter().enumerate() {
                    jac[(i, col)] = *v;
                }
            }
        }
        Ok(jac)
    }

    fn check_inputs(&self, x: &DenseMatrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "network expects {} features, batch has {}",
                self.input_dim(),
                x.cols()
            )));
        }
        Ok(())
    }

    fn check_batch(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<()> {
        self.check_inputs(x)?;
        if y.rows() != x.rows() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} target rows",
                x.rows(),
                y.rows()
            )));
        }
        if y.cols() != self.output_dim() {
            return Err(Error::Dimension(format!(
                "network produces {} outputs, targets have {}",
                self.output_dim(),
                y.cols()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::Dimension("empty batch".into()));
        }
        Ok(())
    }

    /// Activations of every layer, input included.
    fn forward_sample(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let mut offset = 0;
        for spec in &self.layers {
            let (kernel, rest) = self.weights[offset..].split_at(spec.in_dim * spec.out_dim);
            let bias = &rest[..spec.out_dim];
            let input = acts.last().expect("input pushed");
            let mut z = bias.to_vec();
            for (i, &xi) in input.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (zo, w) in z.iter_mut().zip(&kernel[i * spec.out_dim..(i + 1) * spec.out_dim]) {
                    *zo += xi * w;
                }
            }
            activate(spec.activation, &mut z);
            acts.push(z);
            offset += spec.param_count();
        }
        acts
    }

    /// Accumulates `(∂ output / ∂ w)ᵀ · seed` into `grad`.
    fn backward_sample(&self, acts: &[Vec<f64>], seed: &[f64], grad: &mut [f64]) {
        let mut upstream = seed.to_vec();
        let mut offset = self.weights.len();
        for (k, spec) in self.layers.iter().enumerate().rev() {
            offset -= spec.param_count();
            let delta = activation_backward(spec.activation, &acts[k + 1], &upstream);
            let input = &acts[k];
            let kernel_len = spec.in_dim * spec.out_dim;
            {
                let (gk, gb) = grad[offset..offset + spec.param_count()].split_at_mut(kernel_len);
                for (i, &xi) in input.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    for (g, d) in gk[i * spec.out_dim..(i + 1) * spec.out_dim].iter_mut().zip(&delta) {
                        *g += xi * d;
                    }
                }
                for (g, d) in gb.iter_mut().zip(&delta) {
                    *g += d;
                }
            }
            if k > 0 {
                let kernel = &self.weights[offset..offset + kernel_len];
                upstream = (0..spec.in_dim)
                    .map(|i| {
                        kernel[i * spec.out_dim..(i + 1) * spec.out_dim]
                            .iter()
                            .zip(&delta)
                            .map(|(w, d)| w * d)
                            .sum()
                    })
                    .collect();
            }
        }
    }
}

fn activate(act: Activation, z: &mut [f64]) {
    match act {
        Activation::Identity => {}
        Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Sigmoid => z.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp())),
        Activation::Softmax => {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            z.iter_mut().for_each(|v| *v = (*v - max).exp());
            let total: f64 = z.iter().sum();
            z.iter_mut().for_each(|v| *v /= total);
        }
    }
}

/// Maps `∂/∂(post-activation)` to `∂/∂(pre-activation)` given the
/// post-activation values.
fn activation_backward(act: Activation, out: &[f64], upstream: &[f64]) -> Vec<f64> {
    match act {
        Activation::Identity => upstream.to_vec(),
        Activation::Relu => out
            .iter()
            .zip(upstream)
            .map(|(a, u)| if *a > 0.0 { *u } else { 0.0 })
            .collect(),
        Activation::Sigmoid => out.iter().zip(upstream).map(|(a, u)| u * a * (1.0 - a)).collect(),
        // Full softmax Jacobian: diag(p) − p pᵀ.
        Activation::Softmax => {
            let weighted: f64 = out.iter().zip(upstream).map(|(p, u)| p * u).sum();
            out.iter().zip(upstream).map(|(p, u)| p * (u - weighted)).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Activation::*;

    fn rand_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix::from_row_major(rows, cols, data).unwrap()
    }

    #[test]
    fn iris_net_has_193_weights() {
        let m = Mlp::init_weights(&iris_layers(), 7).unwrap();
        assert_eq!(m.param_count(), 193);
    }

    #[test]
    fn init_is_glorot_with_zero_bias_and_deterministic() {
        let specs = [LayerSpec::new(2, 1, Identity)];
        let m = Mlp::init_weights(&specs, 3).unwrap();
        assert_eq!(m.param_count(), 3);
        assert_eq!(m.weights()[2], 0.0);
        let limit = (6.0f64 / 3.0).sqrt();
        assert!(m.weights()[..2].iter().all(|w| w.abs() <= limit));

        let a = Mlp::init_weights(&iris_layers(), 11).unwrap();
        let b = Mlp::init_weights(&iris_layers(), 11).unwrap();
        assert_eq!(a.weights().as_slice(), b.weights().as_slice());
    }

    #[test]
    fn broken_chain_is_rejected() {
        let specs = [LayerSpec::new(4, 10, Relu), LayerSpec::new(9, 3, Softmax)];
        assert!(matches!(Mlp::init_weights(&specs, 0), Err(Error::Dimension(_))));
        let specs = [LayerSpec::new(4, 10, Softmax), LayerSpec::new(10, 3, Identity)];
        assert!(Mlp::init_weights(&specs, 0).is_err());
        assert!(Mlp::init_weights(&[LayerSpec::new(0, 1, Relu)], 0).is_err());
    }

    #[test]
    fn forward_examples() {
        let specs = chain(&[3, 4, 2], &[Identity, Identity]).unwrap();
        let n = Mlp::init_weights(&specs, 0).unwrap().param_count();
        let zero = Mlp::from_weights(&specs, vec![0.0; n]).unwrap();
        let out = zero.forward(&rand_matrix(5, 3, 1)).unwrap();
        assert!(out.as_slice().iter().all(|v| *v == 0.0));

        let single = Mlp::from_weights(&[LayerSpec::new(2, 1, Identity)], vec![1.0, 1.0, 0.0]).unwrap();
        let x = DenseMatrix::from_rows(&[vec![2.0, 3.0]]).unwrap();
        assert_eq!(single.forward(&x).unwrap().as_slice(), &[5.0]);

        let soft = Mlp::from_weights(&[LayerSpec::new(2, 3, Softmax)], vec![0.0; 9]).unwrap();
        let out = soft.forward(&rand_matrix(4, 2, 2)).unwrap();
        for v in out.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(soft.forward(&rand_matrix(1, 3, 0)).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one_and_relu_nonnegative() {
        let m = Mlp::init_weights(&iris_layers(), 5).unwrap();
        let out = m.forward(&rand_matrix(20, 4, 9)).unwrap();
        for s in 0..out.rows() {
            let sum: f64 = out.row(s).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
        let relu = Mlp::init_weights(&chain(&[3, 6], &[Relu]).unwrap(), 1).unwrap();
        assert!(relu
            .forward(&rand_matrix(10, 3, 4))
            .unwrap()
            .as_slice()
            .iter()
            .all(|v| *v >= 0.0));
    }

    #[test]
    fn evaluate_perfect_fit() {
        let m = Mlp::init_weights(&chain(&[3, 5, 2], &[Sigmoid, Identity]).unwrap(), 4).unwrap();
        let x = rand_matrix(6, 3, 8);
        let y = m.forward(&x).unwrap();
        let e = m.evaluate_batch(&x, &y).unwrap();
        assert_eq!(e.loss, 0.0);
        assert!(e.residuals.iter().all(|r| *r == 0.0));
        assert!(e.gradient.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn evaluate_linear_by_hand() {
        // m(w;x) = w·x + b with b = 0; (wx − y)² at w=1, x=2, y=0.
        let m = Mlp::from_weights(&[LayerSpec::new(1, 1, Identity)], vec![1.0, 0.0]).unwrap();
        let x = DenseMatrix::from_rows(&[vec![2.0]]).unwrap();
        let y = DenseMatrix::from_rows(&[vec![0.0]]).unwrap();
        let e = m.evaluate_batch(&x, &y).unwrap();
        assert_eq!(e.residuals.as_slice(), &[2.0]);
        assert_eq!(e.loss, 4.0);
        assert_eq!(e.gradient[0], 8.0);
        // Bias derivative 2·r = 4.
        assert_eq!(e.gradient[1], 4.0);
    }

    #[test]
    fn batch_shape_errors() {
        let m = Mlp::init_weights(&iris_layers(), 0).unwrap();
        let x = rand_matrix(4, 4, 0);
        assert!(m.evaluate_batch(&x, &rand_matrix(3, 3, 0)).is_err());
        assert!(m.evaluate_batch(&x, &rand_matrix(4, 2, 0)).is_err());
    }

    #[test]
    fn jacobian_of_linear_model_is_inputs() {
        let m = Mlp::from_weights(&[LayerSpec::new(3, 1, Identity)], vec![0.3, -0.2, 0.9, 0.1]).unwrap();
        let x = rand_matrix(5, 3, 3);
        let y = rand_matrix(5, 1, 4);
        let j = m.exact_jacobian(&x, &y).unwrap();
        assert_eq!((j.rows(), j.cols()), (4, 5));
        for l in 0..5 {
            for i in 0..3 {
                assert_eq!(j[(i, l)], x[(l, i)]);
            }
            assert_eq!(j[(3, l)], 1.0);
        }
    }

    #[test]
    fn jacobian_size_guard() {
        let m = Mlp::init_weights(&chain(&[100, 1000], &[Identity]).unwrap(), 0).unwrap();
        let x = DenseMatrix::zeros(100, 100);
        let y = DenseMatrix::zeros(100, 1000);
        assert!(matches!(m.exact_jacobian(&x, &y), Err(Error::Capacity(_))));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let m = Mlp::init_weights(&iris_layers(), 21).unwrap();
        let x = rand_matrix(8, 4, 1);
        let y = rand_matrix(8, 3, 2);
        assert_eq!(m.evaluate_batch(&x, &y).unwrap(), m.evaluate_batch(&x, &y).unwrap());
    }
}
