//! Flat `key = value` experiment configuration.
//!
//! ```text
//! name = iris
//! dataset.kind = iris
//! dataset.path = data/iris.csv
//! dataset.train_samples = 128
//! model.layers = 4, 10, 10, 3
//! model.activations = relu, relu, softmax
//! epochs = 50
//! runs = 5
//! samples_per_batch = 32
//! base_seed = 1
//! optimizers = nlls1, sgd, adagrad
//! optimizer.nlls1.delta = 0.8
//! optimizer.sgd.lr = 1.0
//! ```
//!
//! `#` starts a comment. Relative paths resolve against the config file's
//! directory. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{chain, Activation, LayerSpec};
use crate::optim::{delta_default, HyperParams, OptimizerKind, SmwMode};

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Iris {
        path: PathBuf,
        /// Samples used for training after a seeded shuffle; the rest are held out.
        train_samples: Option<usize>,
    },
    Idx {
        images: PathBuf,
        labels: Option<PathBuf>,
        /// Keep only the first `limit` images.
        limit: Option<usize>,
        train_samples: Option<usize>,
    },
    Synthetic {
        samples: usize,
        side: usize,
        seed: u64,
        train_samples: Option<usize>,
    },
}

impl DatasetSpec {
    pub fn train_samples(&self) -> Option<usize> {
        match self {
            DatasetSpec::Iris { train_samples, .. }
            | DatasetSpec::Idx { train_samples, .. }
            | DatasetSpec::Synthetic { train_samples, .. } => *train_samples,
        }
    }
}

/// Per-optimizer hyperparameter overrides. Unset fields fall back to
/// [`HyperParams::for_kind`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HyperOverrides {
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    /// Multiplier of `√(L/4B)`, used when `delta` is not given.
    pub delta_scale: Option<f64>,
    pub d_init: Option<f64>,
    pub lr: Option<f64>,
    pub div_floor: Option<f64>,
    pub smw_mode: Option<SmwMode>,
    pub accumulate_jacobian: Option<bool>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub overrides: HyperOverrides,
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            overrides: HyperOverrides::default(),
        }
    }

    /// Resolves the final hyperparameters for a problem with `residual_len`
    /// residuals per batch, `batches` batches and objective scaling `gamma`.
    pub fn resolve(&self, residual_len: usize, batches: usize, gamma: f64) -> HyperParams {
        let o = &self.overrides;
        let mut hp = HyperParams::for_kind(self.kind);
        hp.gamma = gamma;
        hp.delta = o
            .delta
            .unwrap_or_else(|| o.delta_scale.unwrap_or(1.0) * delta_default(residual_len, batches));
        macro_rules! apply {
            ($($field:ident),*) => { $( if let Some(v) = o.$field { hp.$field = v; } )* };
        }
        apply!(
            alpha,
            d_init,
            lr,
            div_floor,
            smw_mode,
            accumulate_jacobian,
            beta1,
            beta2,
            eps
        );
        hp
    }
}

/// How the per-epoch loss is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpochLoss {
    /// Mean of the pre-step batch losses seen during the epoch.
    #[default]
    Online,
    /// Loss over the whole training set after the epoch.
    FullTrainingSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetSpec,
    pub layers: Vec<LayerSpec>,
    pub optimizers: Vec<OptimizerSpec>,
    pub epochs: usize,
    pub runs: usize,
    pub samples_per_batch: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    /// Objective scaling; defaults to the batch count.
    pub gamma: Option<f64>,
    pub epoch_loss: EpochLoss,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.samples_per_batch == 0 {
            return Err(Error::Config("samples_per_batch must be at least 1".into()));
        }
        if self.optimizers.is_empty() {
            return Err(Error::Config("no optimizers configured".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Config("no model layers configured".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut cfg = Self::parse(&text, base)?;
        if cfg.name.is_empty() {
            cfg.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "experiment".into());
        }
        Ok(cfg)
    }

    /// Parses config text; relative paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv = read_pairs(text)?;
        let mut take = |key: &str| kv.remove(key);

        let name = take("name").unwrap_or_default();
        let epochs = parse_num(take("epochs"), "epochs")?.ok_or_else(|| missing("epochs"))?;
        let runs = parse_num(take("runs"), "runs")?.unwrap_or(5);
        let samples_per_batch =
            parse_num(take("samples_per_batch"), "samples_per_batch")?.ok_or_else(|| missing("samples_per_batch"))?;
        let base_seed = parse_num(take("base_seed"), "base_seed")?.unwrap_or(0);
        let output_dir = base_dir.join(take("output_dir").unwrap_or_else(|| "out".into()));
        let gamma = parse_num(take("gamma"), "gamma")?;
        let epoch_loss = match take("epoch_loss").as_deref() {
            None | Some("online") => EpochLoss::Online,
            Some("full") => EpochLoss::FullTrainingSet,
            Some(other) => {
                return Err(Error::Config(format!(
                    "epoch_loss must be `online` or `full`, got `{other}`"
                )))
            }
        };

        let train_samples = parse_num(take("dataset.train_samples"), "dataset.train_samples")?;
        let kind = take("dataset.kind").ok_or_else(|| missing("dataset.kind"))?;
        let dataset = match kind.as_str() {
            "iris" => DatasetSpec::Iris {
                path: base_dir.join(take("dataset.path").ok_or_else(|| missing("dataset.path"))?),
                train_samples,
            },
            "idx" => DatasetSpec::Idx {
                images: base_dir.join(take("dataset.path").ok_or_else(|| missing("dataset.path"))?),
                labels: take("dataset.labels").map(|p| base_dir.join(p)),
                limit: parse_num(take("dataset.limit"), "dataset.limit")?,
                train_samples,
            },
            "synthetic" => DatasetSpec::Synthetic {
                samples: parse_num(take("dataset.samples"), "dataset.samples")?.unwrap_or(256),
                side: parse_num(take("dataset.side"), "dataset.side")?.unwrap_or(8),
                seed: parse_num(take("dataset.seed"), "dataset.seed")?.unwrap_or(base_seed),
                train_samples,
            },
            other => return Err(Error::Config(format!("unknown dataset.kind `{other}`"))),
        };

        let widths: Vec<usize> = split_list(&take("model.layers").ok_or_else(|| missing("model.layers"))?)
            .map(|w| w.parse().map_err(|_| Error::Config(format!("bad layer width `{w}`"))))
            .collect::<Result<_>>()?;
        let activations: Vec<Activation> =
            split_list(&take("model.activations").ok_or_else(|| missing("model.activations"))?)
                .map(str::parse)
                .collect::<Result<_>>()?;
        let layers = chain(&widths, &activations).map_err(|e| Error::Config(e.to_string()))?;

        let names = take("optimizers").ok_or_else(|| missing("optimizers"))?;
        let mut optimizers: Vec<OptimizerSpec> = split_list(&names)
            .map(|n| n.parse().map(OptimizerSpec::new))
            .collect::<Result<_>>()?;

        let rest: Vec<(String, String)> = std::mem::take(&mut kv).into_iter().collect();
        for (key, value) in rest {
            let Some(tail) = key.strip_prefix("optimizer.") else {
                return Err(Error::Config(format!("unknown key `{key}`")));
            };
            let (opt_name, param) = tail
                .rsplit_once('.')
                .ok_or_else(|| Error::Config(format!("malformed key `{key}`")))?;
            let kind: OptimizerKind = opt_name.parse()?;
            let spec = optimizers
                .iter_mut()
                .find(|o| o.kind == kind)
                .ok_or_else(|| Error::Config(format!("`{key}` configures `{kind}`, which is not in `optimizers`")))?;
            set_override(&mut spec.overrides, param, &value).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        }

        let cfg = ExperimentConfig {
            name,
            dataset,
            layers,
            optimizers,
            epochs,
            runs,
            samples_per_batch,
            base_seed,
            output_dir,
            gamma,
            epoch_loss,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing required key `{key}`"))
}

fn read_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut kv = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: idx + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let k = k.trim().to_string();
        if kv.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("duplicate key `{k}`"),
            });
        }
    }
    Ok(kv)
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn parse_num<T: std::str::FromStr>(v: Option<String>, key: &str) -> Result<Option<T>> {
    v.map(|s| {
        s.parse()
            .map_err(|_| Error::Config(format!("`{key}` has invalid value `{s}`")))
    })
    .transpose()
}

fn set_override(o: &mut HyperOverrides, param: &str, value: &str) -> Result<()> {
    let num = || -> Result<Option<f64>> {
        value
            .parse::<f64>()
            .map(Some)
            .map_err(|_| Error::Config(format!("`{value}` is not a number")))
    };
    match param {
        "alpha" => o.alpha = num()?,
        "delta" => o.delta = num()?,
        "delta_scale" => o.delta_scale = num()?,
        "d_init" => o.d_init = num()?,
        "lr" => o.lr = num()?,
        "div_floor" => o.div_floor = num()?,
        "beta1" => o.beta1 = num()?,
        "beta2" => o.beta2 = num()?,
        "eps" => o.eps = num()?,
        "smw_mode" => o.smw_mode = Some(value.parse()?),
        "accumulate_jacobian" => {
            o.accumulate_jacobian = Some(
                value
                    .parse()
                    .map_err(|_| Error::Config(format!("`{value}` is not true/false")))?,
            )
        }
        other => return Err(Error::Config(format!("unknown hyperparameter `{other}`"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const IRIS: &str = "
# Iris comparison
name = iris
dataset.kind = iris
dataset.path = iris.csv
dataset.train_samples = 128
model.layers = 4, 10, 10, 3
model.activations = relu, relu, softmax
epochs = 50
samples_per_batch = 32
base_seed = 7
optimizers = nlls1, sgd
optimizer.nlls1.delta = 0.8
optimizer.nlls1.smw_mode = as_printed
optimizer.sgd.lr = 1.0
";

    #[test]
    fn parses_iris_config() {
        let cfg = ExperimentConfig::parse(IRIS, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.name, "iris");
        assert_eq!(cfg.runs, 5);
        assert_eq!(cfg.epochs, 50);
        assert_eq!(cfg.base_seed, 7);
        assert_eq!(cfg.output_dir, PathBuf::from("/cfg/out"));
        assert_eq!(
            cfg.dataset,
            DatasetSpec::Iris {
                path: "/cfg/iris.csv".into(),
                train_samples: Some(128)
            }
        );
        assert_eq!(cfg.layers.len(), 3);
        let hp = cfg.optimizers[0].resolve(96, 4, 4.0);
        assert_eq!(hp.delta, 0.8);
        assert_eq!(hp.alpha, 5e-3);
        assert_eq!(hp.smw_mode, SmwMode::AsPrinted);
        assert_eq!(cfg.optimizers[1].resolve(96, 4, 4.0).lr, 1.0);
    }

    #[test]
    fn delta_scale_uses_default_formula() {
        let mut spec = OptimizerSpec::new(OptimizerKind::Nlls1);
        spec.overrides.delta_scale = Some(0.5);
        assert!((spec.resolve(96, 4, 4.0).delta - 0.5 * 6f64.sqrt()).abs() < 1e-15);
        assert!((OptimizerSpec::new(OptimizerKind::Nlls1).resolve(4, 1, 1.0).delta - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = Path::new(".");
        assert!(ExperimentConfig::parse(&IRIS.replace("epochs = 50", "epochs = 0"), base).is_err());
        assert!(ExperimentConfig::parse(&IRIS.replace("sgd\n", "sgd, lbfgs\n"), base).is_err());
        assert!(ExperimentConfig::parse(&format!("{IRIS}\nbogus = 1\n"), base).is_err());
        assert!(ExperimentConfig::parse(&format!("{IRIS}\noptimizer.adam.lr = 1\n"), base).is_err());
        assert!(ExperimentConfig::parse(&format!("{IRIS}\noptimizer.sgd.momentum = 1\n"), base).is_err());
        assert!(ExperimentConfig::parse(&format!("{IRIS}\nruns = 3\nruns = 4\n"), base).is_err());
        assert!(ExperimentConfig::parse("epochs 5", base).is_err());
    }
}
