use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::em::DetectConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FourGroupSweepZout,
    FourGroupSweepSigma,
    RealNetworkSweepSigma,
    SingleRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BpEm,
    NaiveMf,
    Kmeans,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::BpEm, Method::NaiveMf, Method::Kmeans];

    pub fn name(self) -> &'static str {
        match self {
            Method::BpEm => "bp-em",
            Method::NaiveMf => "naive-mf",
            Method::Kmeans => "kmeans",
        }
    }

    /// Stable per-method seed coordinate.
    pub fn seed_tag(self) -> u64 {
        match self {
            Method::BpEm => 1,
            Method::NaiveMf => 2,
            Method::Kmeans => 3,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (bp-em, naive-mf, kmeans)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 500 trials per point.
    Paper,
    /// 100 trials per point.
    Ci,
}

impl Preset {
    pub fn trials(self) -> usize {
        match self {
            Preset::Paper => 500,
            Preset::Ci => 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub z_out: Vec<f64>,
    pub sigma: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub dataset: Option<PathBuf>,
    /// Attribute means are `mean_spacing * l`.
    pub mean_spacing: f64,
    /// Number of labels the detectors fit; defaults to the true community count.
    pub l_max: Option<usize>,
    pub solver: DetectConfig,
}

impl ExperimentConfig {
    /// Default sweep ranges for each experiment kind.
    pub fn preset(kind: ExperimentKind, preset: Preset) -> Self {
        let (z_out, sigma) = match kind {
            ExperimentKind::FourGroupSweepZout => ((1..=10).map(f64::from).collect(), vec![1.0, 3.0, 5.0]),
            ExperimentKind::FourGroupSweepSigma => {
                (vec![3.0, 5.0, 7.0], (1..=10).map(f64::from).collect())
            }
            ExperimentKind::RealNetworkSweepSigma => (Vec::new(), (1..=10).map(f64::from).collect()),
            ExperimentKind::SingleRun => (vec![3.0], vec![1.0]),
        };
        ExperimentConfig {
            kind,
            z_out,
            sigma,
            trials: preset.trials(),
            methods: Method::ALL.to_vec(),
            seed: 1,
            dataset: None,
            mean_spacing: 10.0,
            l_max: None,
            solver: DetectConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.sigma.is_empty() || self.sigma.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Config("sigma list must be non-empty and positive".into()));
        }
        let needs_dataset = matches!(self.kind, ExperimentKind::RealNetworkSweepSigma);
        if needs_dataset && self.dataset.is_none() {
            return Err(Error::Config("this experiment needs a dataset".into()));
        }
        let synthetic = match self.kind {
            ExperimentKind::FourGroupSweepZout | ExperimentKind::FourGroupSweepSigma => true,
            ExperimentKind::SingleRun => self.dataset.is_none(),
            ExperimentKind::RealNetworkSweepSigma => false,
        };
        if synthetic {
            if self.z_out.is_empty() {
                return Err(Error::Config("z_out list must be non-empty".into()));
            }
            if self.z_out.iter().any(|z| !(0.0..=16.0).contains(z)) {
                return Err(Error::Config("z_out values must lie in [0, 16]".into()));
            }
        }
        if matches!(self.l_max, Some(0)) {
            return Err(Error::Config("l_max must be at least 1".into()));
        }
        self.solver.validate()
    }

    /// Parses the TOML layout
    ///
    /// ```toml
    /// [experiment]
    /// kind = "four-group-sweep-zout"
    /// preset = "ci"
    /// z_out = [1, 2, 3]
    ///
    /// [solver]
    /// tol = 1e-6
    /// ```
    ///
    /// Keys missing from `[experiment]` come from the preset of its kind.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let e = file.experiment;
        let mut cfg = Self::preset(e.kind, e.preset.unwrap_or(Preset::Ci));
        if let Some(v) = e.z_out {
            cfg.z_out = v;
        }
        if let Some(v) = e.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = e.trials {
            cfg.trials = v;
        }
        if let Some(v) = e.methods {
            cfg.methods = v;
        }
        if let Some(v) = e.seed {
            cfg.seed = v;
        }
        cfg.dataset = e.dataset;
        if let Some(v) = e.mean_spacing {
            cfg.mean_spacing = v;
        }
        cfg.l_max = e.l_max;
        cfg.solver = file.solver;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative dataset paths are resolved against the config file.
        if let (Some(ds), Some(dir)) = (cfg.dataset.as_mut(), path.parent()) {
            if ds.is_relative() && !ds.exists() {
                *ds = dir.join(&ds);
            }
        }
        Ok(cfg)
    }
}

/// Reads only the `[solver]` table of a config file; an `[experiment]`
/// table, if present, is ignored.
pub fn load_solver_config(path: &Path) -> Result<DetectConfig> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct SolverFile {
        #[serde(default)]
        solver: DetectConfig,
        #[allow(dead_code)]
        experiment: Option<toml::Table>,
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: SolverFile =
        toml::from_str(&text).map_err(|e| Error::Config(e.message().to_string()))?;
    file.solver.validate()?;
    Ok(file.solver)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: ExperimentSection,
    #[serde(default)]
    solver: DetectConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    kind: ExperimentKind,
    preset: Option<Preset>,
    z_out: Option<Vec<f64>>,
    sigma: Option<Vec<f64>>,
    trials: Option<usize>,
    methods: Option<Vec<Method>>,
    seed: Option<u64>,
    dataset: Option<PathBuf>,
    mean_spacing: Option<f64>,
    l_max: Option<usize>,
}
