//! Stochastic nonlinear least-squares training with low-rank Jacobian
//! estimates.
//!
//! The batch loss `(1/L)‖r‖²` of a model has gradient `g = (2/L)·J·r`, where
//! `J` is the `n × L` Jacobian of the residuals. The NLLS optimizers build a
//! cheap surrogate for `J` from nothing but observed `(g, r)` pairs and take
//! damped Gauss-Newton steps `(JJᵀ + (1/α)D)s = −g`, solved with
//! Sherman-Morrison in `O(n)`:
//!
//! - [`optim::nlls1_step`] uses a rank-1 estimate accumulated over batches,
//! - [`optim::nllsl_step`] uses a permuted rank-L estimate,
//! - [`optim::full_jacobian_step`] uses the exact Jacobian (small problems).
//!
//! SGD, Adagrad and Adam are provided for comparison, together with a dense
//! MLP ([`model`]), dataset loaders ([`data`]) and a reproducible benchmark
//! harness ([`bench`]).
//!
//! ```
//! use snlls::model::{iris_layers, Mlp};
//! use snlls::numkit::DenseMatrix;
//! use snlls::optim::{HyperParams, OptimizerKind};
//!
//! let mut model = Mlp::init_weights(&iris_layers(), 1).unwrap();
//! let x = DenseMatrix::from_rows(&[vec![0.1, -0.3, 0.5, 1.0]]).unwrap();
//! let y = DenseMatrix::from_rows(&[vec![0.0, 1.0, 0.0]]).unwrap();
//!
//! let hp = HyperParams { delta: 0.8, ..HyperParams::for_kind(OptimizerKind::Nlls1) };
//! let mut opt = OptimizerKind::Nlls1.build(&hp, model.param_count(), 0).unwrap();
//! for _ in 0..10 {
//!     let eval = model.evaluate_batch(&x, &y).unwrap();
//!     let step = opt.step(&eval, None).unwrap();
//!     model.apply_step(&step).unwrap();
//! }
//! ```

pub mod bench;
pub mod data;
mod error;
pub mod model;
pub mod numkit;
pub mod optim;
#[cfg(feature = "oracle")]
pub mod oracle;

pub use error::{Error, Result};
