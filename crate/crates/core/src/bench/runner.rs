use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::config::{DatasetSpec, EpochLoss, ExperimentConfig, OptimizerSpec};
use crate::data::{load_idx, load_iris_csv, plan_batches, synth_autoencoder, Dataset};
use crate::error::{Error, Result};
use crate::model::Mlp;
use crate::optim::HyperParams;

/// Mixes a seed with a stream tag and an index (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_EPOCH: u64 = 1;
const STREAM_OPTIMIZER: u64 = 2;

/// Seed of run `run` (0-based): model init, train split and everything
/// derived from it.
pub fn run_seed(base_seed: u64, run: usize) -> u64 {
    base_seed.wrapping_add(run as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    /// Weight count.
    pub n: usize,
    /// Residual components per batch.
    pub residual_len: usize,
    pub batches: usize,
    pub gamma: f64,
    pub train_samples: usize,
    /// Training samples left out of every epoch's batches.
    pub dropped_per_epoch: usize,
    pub hyper: HyperParams,
    /// Optimizer steps taken in each run.
    pub steps: Vec<usize>,
    pub wall_time: Duration,
}

/// Per-epoch losses of every run of one optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTrace {
    pub optimizer: String,
    /// `runs[r][e]` is the loss of run `r` after epoch `e`.
    pub runs: Vec<Vec<f64>>,
    /// Arithmetic mean over runs, per epoch.
    pub mean: Vec<f64>,
    pub meta: TraceMeta,
}

impl LossTrace {
    pub fn from_runs(optimizer: impl Into<String>, runs: Vec<Vec<f64>>, meta: TraceMeta) -> Result<Self> {
        let epochs = runs.first().map_or(0, Vec::len);
        if runs.is_empty() || runs.iter().any(|r| r.len() != epochs) {
            return Err(Error::Precondition("runs must be non-empty and equally long".into()));
        }
        let mean = (0..epochs)
            .map(|e| runs.iter().map(|r| r[e]).sum::<f64>() / runs.len() as f64)
            .collect();
        Ok(Self {
            optimizer: optimizer.into(),
            runs,
            mean,
            meta,
        })
    }

    pub fn epochs(&self) -> usize {
        self.mean.len()
    }

    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("at least one epoch")
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub name: String,
    pub traces: Vec<LossTrace>,
}

impl ExperimentResult {
    pub fn trace(&self, optimizer: &str) -> Option<&LossTrace> {
        self.traces.iter().find(|t| t.optimizer == optimizer)
    }
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    match spec {
        DatasetSpec::Iris { path, .. } => load_iris_csv(path),
        DatasetSpec::Idx {
            images, labels, limit, ..
        } => {
            let ds = load_idx(images, labels.as_deref())?;
            Ok(match limit {
                Some(k) if *k < ds.len() => ds.subset(&(0..*k).collect::<Vec<_>>()),
                _ => ds,
            })
        }
        DatasetSpec::Synthetic {
            samples, side, seed, ..
        } => synth_autoencoder(*samples, *side, *seed),
    }
}

/// Runs every configured optimizer for `cfg.runs` seeded repetitions.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.dataset)?;
    run_on_dataset(cfg, &dataset)
}

/// As [`run_experiment`] with an already loaded dataset.
pub fn run_on_dataset(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<ExperimentResult> {
    cfg.validate()?;
    let traces = cfg
        .optimizers
        .iter()
        .map(|opt| run_optimizer(cfg, dataset, opt))
        .collect::<Result<_>>()?;
    Ok(ExperimentResult {
        name: cfg.name.clone(),
        traces,
    })
}

struct RunOutcome {
    losses: Vec<f64>,
    steps: usize,
}

fn run_optimizer(cfg: &ExperimentConfig, dataset: &Dataset, spec: &OptimizerSpec) -> Result<LossTrace> {
    let train_samples = cfg.dataset.train_samples().unwrap_or(dataset.len());
    let output_dim = dataset.output_dim();
    if cfg.layers.last().map(|l| l.out_dim) != Some(output_dim) {
        return Err(Error::Config(format!(
            "model outputs {:?} values but targets have {output_dim}",
            cfg.layers.last().map(|l| l.out_dim)
        )));
    }
    let probe = plan_batches(train_samples, cfg.samples_per_batch, output_dim, 0)?;
    let batches = probe.batch_count();
    let residual_len = probe.residual_len;
    let gamma = cfg.gamma.unwrap_or(batches as f64);
    let hyper = spec.resolve(residual_len, batches, gamma);
    hyper.validate()?;
    let n = Mlp::init_weights(&cfg.layers, 0)?.param_count();

    let started = Instant::now();
    let outcomes: Vec<RunOutcome> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| train_one(cfg, dataset, spec, &hyper, run, train_samples))
        .collect::<Result<_>>()?;
    let wall_time = started.elapsed();

    let steps = outcomes.iter().map(|o| o.steps).collect();
    let runs = outcomes.into_iter().map(|o| o.losses).collect();
    LossTrace::from_runs(
        spec.kind.name(),
        runs,
        TraceMeta {
            n,
            residual_len,
            batches,
            gamma,
            train_samples,
            dropped_per_epoch: probe.dropped.len(),
            hyper,
            steps,
            wall_time,
        },
    )
}

fn train_one(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    spec: &OptimizerSpec,
    hyper: &HyperParams,
    run: usize,
    train_samples: usize,
) -> Result<RunOutcome> {
    let seed = run_seed(cfg.base_seed, run);
    let train = if train_samples < dataset.len() {
        dataset.shuffled_split(train_samples, seed)?.0
    } else {
        dataset.clone()
    };
    let mut model = Mlp::init_weights(&cfg.layers, seed)?;
    let mut opt = spec
        .kind
        .build(hyper, model.param_count(), derive_seed(seed, STREAM_OPTIMIZER, 0))?;

    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let plan = plan_batches(
            train.len(),
            cfg.samples_per_batch,
            train.output_dim(),
            derive_seed(seed, STREAM_EPOCH, epoch as u64),
        )?;
        let mut total = 0.0;
        for (b, idx) in plan.batches.iter().enumerate() {
            let ctx = |e: Error| Error::InRun {
                optimizer: spec.kind.name().to_string(),
                run,
                epoch,
                batch: b,
                source: Box::new(e),
            };
            let (x, y) = train.gather(idx);
            let eval = model.evaluate_batch(&x, &y).map_err(ctx)?;
            let jac = if opt.needs_jacobian() {
                Some(model.exact_jacobian(&x, &y).map_err(ctx)?)
            } else {
                None
            };
            let step = opt.step(&eval, jac.as_ref()).map_err(ctx)?;
            model.apply_step(&step).map_err(ctx)?;
            total += eval.loss;
        }
        let loss = match cfg.epoch_loss {
            EpochLoss::Online => total / plan.batch_count() as f64,
            EpochLoss::FullTrainingSet => model.batch_loss(&train.features, &train.targets)?,
        };
        losses.push(loss);
    }
    Ok(RunOutcome {
        losses,
        steps: opt.steps_taken(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_is_per_epoch_average() {
        let meta = TraceMeta {
            n: 1,
            residual_len: 1,
            batches: 1,
            gamma: 1.0,
            train_samples: 1,
            dropped_per_epoch: 0,
            hyper: HyperParams::default(),
            steps: vec![1, 1],
            wall_time: Duration::ZERO,
        };
        let t = LossTrace::from_runs("x", vec![vec![1.0, 4.0], vec![3.0, 2.0]], meta.clone()).unwrap();
        assert_eq!(t.mean, vec![2.0, 3.0]);
        assert_eq!(t.final_mean(), 3.0);
        assert!(LossTrace::from_runs("x", vec![vec![1.0], vec![]], meta.clone()).is_err());
        assert!(LossTrace::from_runs("x", vec![], meta).is_err());
    }

    #[test]
    fn seeds_are_distinct() {
        let a = derive_seed(1, STREAM_EPOCH, 0);
        assert_ne!(a, derive_seed(1, STREAM_EPOCH, 1));
        assert_ne!(a, derive_seed(2, STREAM_EPOCH, 0));
        assert_ne!(a, derive_seed(1, STREAM_OPTIMIZER, 0));
        assert_eq!(a, derive_seed(1, STREAM_EPOCH, 0));
    }
}
