//! TOML run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    encode_ttfs, load_cifar10, load_idx, load_iris, EncodeOptions, EncodedDataset, IrisSource,
    RawDataset, Split,
};
use crate::error::{Error, Result};
use crate::network::{Network, NetworkSpec, Shape3, WeightInit};
use crate::neuron::{NeuronModel, NeuronVariant};
use crate::objectives::CostConfig;
use crate::training::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetId {
    Mnist,
    FashionMnist,
    Cifar10,
    Iris,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub dataset: DatasetId,
    /// Dataset directory (or Iris CSV file). Defaults to a standard
    /// sub-directory of `$TTFS_DATA_DIR`, itself defaulting to `data`.
    pub path: Option<PathBuf>,
    pub train_subset: Option<usize>,
    pub test_subset: Option<usize>,
    pub tau_in: f64,
    pub double_channels: bool,
    pub augment: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dataset: DatasetId::Mnist,
            path: None,
            train_subset: None,
            test_subset: None,
            tau_in: 5.0,
            double_channels: false,
            augment: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub architecture: String,
    pub variant: NeuronVariant,
    /// Ignored by the non-leaky model.
    pub tau: f64,
    pub v_threshold: f64,
    pub padding: usize,
    /// Multiplier on the initial weight mean.
    pub init_mean_gain: f64,
    /// Multiplier on the initial weight standard deviation.
    pub init_std_gain: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            architecture: "784-400-10".into(),
            variant: NeuronVariant::NonLeaky,
            tau: 1.0,
            v_threshold: 1.0,
            padding: 0,
            init_mean_gain: 4.0,
            init_std_gain: 0.25,
        }
    }
}

impl NetworkConfig {
    pub fn model(&self) -> Result<NeuronModel> {
        let tau = match self.variant {
            NeuronVariant::NonLeaky => f64::INFINITY,
            _ => self.tau,
        };
        NeuronModel::new(self.variant, tau, self.v_threshold)
    }

    pub fn weight_init(&self) -> WeightInit {
        WeightInit {
            mean_gain: self.init_mean_gain,
            std_gain: self.init_std_gain,
        }
    }

    pub fn spec(&self, input: Shape3) -> Result<NetworkSpec> {
        NetworkSpec::from_architecture(&self.architecture, input, self.padding, self.model()?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Gamma2,
    Gamma3,
    Xi,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Gamma2 => "gamma2",
            SweepParameter::Gamma3 => "gamma3",
            SweepParameter::Xi => "xi",
        }
    }

    pub fn apply(self, cost: &mut CostConfig, value: f64) {
        match self {
            SweepParameter::Gamma2 => cost.gamma2 = value,
            SweepParameter::Gamma3 => cost.gamma3 = value,
            SweepParameter::Xi => cost.xi = value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    pub v_hats: Vec<f64>,
    pub n_steps: Vec<u64>,
    /// Number of samples from the start of the dataset; all when absent.
    pub samples: Option<usize>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            v_hats: vec![0.5, 0.9, 0.99, 0.999, 0.9999],
            n_steps: vec![1_000_000],
            samples: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub gradcheck: GradcheckConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.network.model()?;
        self.cost.validate(&model)?;
        if self.train.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        if !(self.train.eta >= 0.0 && self.train.eta.is_finite()) {
            return Err(Error::Config("train.eta must be finite and nonnegative".into()));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() || s.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("sweep.values must be a non-empty list of finite numbers".into()));
            }
            if s.seeds.is_empty() {
                return Err(Error::Config("sweep.seeds must not be empty".into()));
            }
        }
        if self.gradcheck.v_hats.iter().any(|v| !(*v > 0.0 && *v < model.v_threshold)) {
            return Err(Error::Config("gradcheck.v_hats must lie strictly between 0 and the threshold".into()));
        }
        if self.gradcheck.n_steps.contains(&0) {
            return Err(Error::Config("gradcheck.n_steps must be positive".into()));
        }
        let gains = [self.network.init_mean_gain, self.network.init_std_gain];
        if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Config("network init gains must be finite and nonnegative".into()));
        }
        self.network.architecture.parse::<crate::network::Architecture>()?;
        Ok(())
    }

    /// Freshly initialized network for `spec`, seeded by `train.seed`.
    pub fn init_network(&self, spec: NetworkSpec) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(self.train.seed);
        Network::init_with(spec, self.cost.t_ref, self.network.weight_init(), &mut rng)
    }

    /// Training settings with the cost section folded in.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            cost: self.cost,
            ..self.train
        }
    }

    pub fn encode_options(&self) -> EncodeOptions {
        EncodeOptions {
            tau_in: self.data.tau_in,
            double_channels: self.data.double_channels,
            iris_bias: true,
        }
    }

    fn data_root(&self) -> PathBuf {
        std::env::var_os("TTFS_DATA_DIR").map_or_else(|| PathBuf::from("data"), PathBuf::from)
    }

    /// Raw dataset for `split`, truncated to the configured subset.
    pub fn load_raw(&self, split: Split) -> Result<RawDataset> {
        let dir = |name: &str| self.data.path.clone().unwrap_or_else(|| self.data_root().join(name));
        let mut raw = match self.data.dataset {
            DatasetId::Mnist | DatasetId::FashionMnist => {
                let d = dir(if self.data.dataset == DatasetId::Mnist {
                    "mnist"
                } else {
                    "fashion-mnist"
                });
                let prefix = if split == Split::Train { "train" } else { "t10k" };
                load_idx(
                    &d.join(format!("{prefix}-images-idx3-ubyte")),
                    &d.join(format!("{prefix}-labels-idx1-ubyte")),
                    split,
                )?
            }
            DatasetId::Cifar10 => {
                let d = dir("cifar-10-batches-bin");
                let files: Vec<PathBuf> = match split {
                    Split::Train => (1..=5).map(|i| d.join(format!("data_batch_{i}.bin"))).collect(),
                    Split::Test => vec![d.join("test_batch.bin")],
                };
                load_cifar10(&files, split)?
            }
            DatasetId::Iris => {
                let source = self.data.path.clone().map_or(IrisSource::Embedded, IrisSource::File);
                let mut raw = load_iris(&source)?;
                raw.split = split;
                raw
            }
        };
        let subset = match split {
            Split::Train => self.data.train_subset,
            Split::Test => self.data.test_subset,
        };
        if let Some(n) = subset {
            raw.truncate(n);
        }
        if raw.is_empty() {
            return Err(Error::Dataset(format!("{split:?} split is empty")));
        }
        Ok(raw)
    }

    pub fn load_encoded(&self, split: Split) -> Result<EncodedDataset> {
        encode_ttfs(&self.load_raw(split)?, &self.encode_options())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = RunConfig::from_toml(
            r#"
            [data]
            dataset = "iris"
            [network]
            architecture = "5-10-10-3"
            variant = "alpha-synapse"
            tau = 5.0
            [cost]
            gamma2 = 1.0
            t_ref = 10.0
            membrane = "integral"
            [train]
            epochs = 2
            [sweep]
            parameter = "gamma3"
            values = [0.0, 1e-4]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.network.model().unwrap().tau, 5.0);
        assert_eq!(cfg.sweep.as_ref().unwrap().seeds, vec![0, 1, 2]);
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        let raw = cfg.load_raw(Split::Train).unwrap();
        assert_eq!(raw.len(), 150);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(RunConfig::from_toml("[cost]\ngama2 = 1.0"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("bogus = 1"), Err(Error::Config(_))));
        assert!(RunConfig::from_toml("[cost]\ntau_soft = -1.0").is_err());
        assert!(RunConfig::from_toml("[network]\narchitecture = \"x-10\"").is_err());
        assert!(RunConfig::from_toml("[cost]\nmembrane = \"integral\"\nv_hat = 1.5").is_err());
    }
}
