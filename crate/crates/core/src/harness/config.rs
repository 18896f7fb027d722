use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::accountant::{calibrate_sigma, MechanismCost, Method, PrivacyBudget};
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::io;
use crate::loss::Loss;
use crate::sanitize::ClipConfig;
use crate::solvers::{AdamConfig, Optimizer, SolverConfig};
use crate::synth::{generate_synthetic, SyntheticSpec};

pub const DEFAULT_DELTA: f64 = 1e-5;

/// ε values serialize as numbers, except the non-private sentinel ∞ which
/// is written (and accepted) as the string `"inf"`.
pub mod epsilon_serde {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn parse(r: Repr) -> std::result::Result<f64, String> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
                other => other.parse().map_err(|_| format!("invalid epsilon {s:?}")),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        parse(Repr::deserialize(d)?).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
            match v {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?
                .map(parse)
                .transpose()
                .map_err(serde::de::Error::custom)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    #[default]
    Logistic,
    Squared,
    WeightedQuadratic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Binary {
        train_features: PathBuf,
        train_labels: PathBuf,
        #[serde(default)]
        test_features: Option<PathBuf>,
        #[serde(default)]
        test_labels: Option<PathBuf>,
    },
    Csv {
        train_features: PathBuf,
        train_labels: PathBuf,
        #[serde(default)]
        test_features: Option<PathBuf>,
        #[serde(default)]
        test_labels: Option<PathBuf>,
    },
}

/// Train split and optional test split.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: FeatureDataset,
    pub test: Option<FeatureDataset>,
}

impl DataSource {
    pub fn load(&self) -> Result<Splits> {
        fn pair(
            a: &Path,
            b: &Path,
            loader: fn(&Path, &Path) -> Result<FeatureDataset>,
        ) -> Result<FeatureDataset> {
            loader(a, b)
        }
        fn optional(
            f: &Option<PathBuf>,
            l: &Option<PathBuf>,
            loader: fn(&Path, &Path) -> Result<FeatureDataset>,
        ) -> Result<Option<FeatureDataset>> {
            match (f, l) {
                (Some(f), Some(l)) => Ok(Some(loader(f, l)?)),
                (None, None) => Ok(None),
                _ => Err(Error::InvalidArgument(
                    "test_features and test_labels must be given together".into(),
                )),
            }
        }
        match self {
            DataSource::Synthetic(spec) => {
                let (train, test) = generate_synthetic(spec)?;
                Ok(Splits {
                    train,
                    test: Some(test),
                })
            }
            DataSource::Binary {
                train_features,
                train_labels,
                test_features,
                test_labels,
            } => {
                let loader: fn(&Path, &Path) -> Result<FeatureDataset> = |a, b| io::load_dataset(a, b);
                Ok(Splits {
                    train: pair(train_features, train_labels, loader)?,
                    test: optional(test_features, test_labels, loader)?,
                })
            }
            DataSource::Csv {
                train_features,
                train_labels,
                test_features,
                test_labels,
            } => {
                let loader: fn(&Path, &Path) -> Result<FeatureDataset> = |a, b| io::load_csv(a, b);
                Ok(Splits {
                    train: pair(train_features, train_labels, loader)?,
                    test: optional(test_features, test_labels, loader)?,
                })
            }
        }
    }
}

/// Hyperparameters that may differ per method within one sweep.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_clip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_clip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Optimizer>,
}

fn default_iters() -> usize {
    1
}
fn default_eta() -> f64 {
    1.0
}
fn default_clip() -> f64 {
    1.0
}
fn default_bias() -> Option<f64> {
    Some(-10.0)
}

/// Everything needed for one training run. Exactly one of `epsilon` and
/// `sigma` must be set; `epsilon: "inf"` disables sanitization altogether.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    pub data: DataSource,
    #[serde(default, with = "epsilon_serde::option", skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub loss: LossName,
    #[serde(default = "default_iters", alias = "iterations")]
    pub iters: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_clip")]
    pub feature_clip: f64,
    #[serde(default = "default_clip")]
    pub gradient_clip: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub adam: AdamConfig,
    /// Initial bias for the first-order and feature-covariance methods with
    /// the logistic loss; `null` trains without a bias.
    #[serde(default = "default_bias")]
    pub bias_init: Option<f64>,
    #[serde(default)]
    pub average_iterates: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_method: BTreeMap<Method, MethodOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

impl RunConfig {
    pub fn new(method: Method, data: DataSource) -> Self {
        RunConfig {
            method,
            data,
            epsilon: None,
            delta: DEFAULT_DELTA,
            sigma: None,
            loss: LossName::Logistic,
            iters: 1,
            eta: 1.0,
            lambda: 0.0,
            alpha: 0.0,
            feature_clip: 1.0,
            gradient_clip: 1.0,
            seed: 0,
            optimizer: Optimizer::Adam,
            adam: AdamConfig::default(),
            bias_init: default_bias(),
            average_iterates: false,
            per_method: BTreeMap::new(),
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| crate::error::DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Copy with `method` selected and its overrides folded in.
    pub fn for_method(&self, method: Method) -> RunConfig {
        let mut out = self.clone();
        out.method = method;
        if let Some(o) = self.per_method.get(&method) {
            out.iters = o.iters.unwrap_or(out.iters);
            out.eta = o.eta.unwrap_or(out.eta);
            out.lambda = o.lambda.unwrap_or(out.lambda);
            out.alpha = o.alpha.unwrap_or(out.alpha);
            out.loss = o.loss.unwrap_or(out.loss);
            out.feature_clip = o.feature_clip.unwrap_or(out.feature_clip);
            out.gradient_clip = o.gradient_clip.unwrap_or(out.gradient_clip);
            out.optimizer = o.optimizer.unwrap_or(out.optimizer);
        }
        out.per_method.clear();
        out
    }

    pub fn is_non_private(&self) -> bool {
        self.epsilon.is_some_and(f64::is_infinite)
    }

    /// The (ε, δ) budget, when one was given and is finite.
    pub fn budget(&self) -> Result<Option<PrivacyBudget>> {
        match self.epsilon {
            Some(e) if e.is_finite() => Ok(Some(PrivacyBudget::new(e, self.delta)?)),
            _ => Ok(None),
        }
    }

    fn loss(&self) -> Loss {
        match (self.method, self.loss) {
            (Method::LeastSquares, _) | (_, LossName::WeightedQuadratic) => {
                Loss::WeightedQuadratic { alpha: self.alpha }
            }
            (_, LossName::Logistic) => Loss::Logistic,
            (_, LossName::Squared) => Loss::Squared,
        }
    }

    /// Resolves the budget into a noise multiplier and builds the solver
    /// configuration.
    pub fn solver_config(&self) -> Result<SolverConfig> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        let (sigma, clip) = match (self.epsilon, self.sigma) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidArgument(
                    "give either epsilon or sigma, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::InvalidArgument(
                    "one of epsilon or sigma is required".into(),
                ))
            }
            (Some(e), None) if e.is_infinite() && e > 0.0 => (0.0, None),
            (Some(_), None) => {
                let budget = self.budget()?.expect("finite epsilon");
                let cost = MechanismCost::new(self.method, self.iters);
                let clip = ClipConfig::new(self.feature_clip, self.gradient_clip)?;
                (calibrate_sigma(&cost, &budget)?, Some(clip))
            }
            (None, Some(s)) => (s, Some(ClipConfig::new(self.feature_clip, self.gradient_clip)?)),
        };
        let loss = self.loss();
        let bias_init = match (self.method, loss) {
            (Method::FirstOrder | Method::FeatureCovariance, Loss::Logistic) => self.bias_init,
            _ => None,
        };
        let cfg = SolverConfig {
            method: self.method,
            loss,
            iterations: self.iters,
            eta: self.eta,
            lambda: self.lambda,
            alpha: self.alpha,
            optimizer: self.optimizer,
            adam: self.adam,
            clip,
            sigma,
            seed: self.seed,
            bias_init,
            average_iterates: self.average_iterates,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
