use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind, Method};
use crate::attr::sample_attributes;
use crate::baselines::{detect_kmeans_only, detect_naive_mf};
use crate::em::detect;
use crate::error::{Error, Result};
use crate::generate::sample_four_group;
use crate::graph::{AttributedNetwork, GroundTruth};
use crate::io::parse_gml;
use crate::metrics::{accuracy, modularity};
use crate::seeds::derive_seed;

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    ZOut,
    Sigma,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::ZOut => "z_out",
            SweepAxis::Sigma => "sigma",
        }
    }
}

/// One setting of the sweep. `z_out` is absent for real networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub z_out: Option<f64>,
    pub sigma: f64,
}

impl SweepPoint {
    fn seed_parts(&self) -> [u64; 2] {
        [self.z_out.map_or(u64::MAX, f64::to_bits), self.sigma.to_bits()]
    }
}

/// Outcome of one method on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: SweepPoint,
    pub trial: usize,
    pub method: Method,
    /// Modularity of the planted labels on this trial's network.
    pub truth_modularity: f64,
    pub outcome: std::result::Result<TrialOutcome, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub accuracy: f64,
    pub modularity: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub kind: ExperimentKind,
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    pub methods: Vec<Method>,
    /// Ordered by point, then trial, then method.
    pub records: Vec<TrialRecord>,
}

impl ExperimentResults {
    pub fn sweep_value(&self, p: &SweepPoint) -> f64 {
        match self.axis {
            SweepAxis::ZOut => p.z_out.unwrap_or(f64::NAN),
            SweepAxis::Sigma => p.sigma,
        }
    }

    /// The coordinate held fixed while the sweep axis varies.
    pub fn fixed_axis(&self) -> Option<(&'static str, fn(&SweepPoint) -> f64)> {
        match (self.axis, self.kind) {
            (SweepAxis::ZOut, _) => Some(("sigma", |p| p.sigma)),
            (SweepAxis::Sigma, ExperimentKind::RealNetworkSweepSigma) => None,
            (SweepAxis::Sigma, _) => Some(("z_out", |p| p.z_out.unwrap_or(f64::NAN))),
        }
    }
}

struct Dataset {
    network: AttributedNetwork,
    truth: GroundTruth,
}

fn load_dataset(config: &ExperimentConfig) -> Result<Option<Dataset>> {
    let Some(path) = &config.dataset else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (network, truth) = parse_gml(&text)?;
    let truth = truth.ok_or_else(|| {
        Error::validation(format!(
            "{} has no `value` field on every node to use as ground truth",
            path.display()
        ))
    })?;
    Ok(Some(Dataset { network, truth }))
}

fn sweep_points(config: &ExperimentConfig, real: bool) -> (SweepAxis, Vec<SweepPoint>) {
    let mut points = Vec::new();
    match config.kind {
        ExperimentKind::FourGroupSweepZout => {
            for &sigma in &config.sigma {
                for &z in &config.z_out {
                    points.push(SweepPoint { z_out: Some(z), sigma });
                }
            }
            (SweepAxis::ZOut, points)
        }
        ExperimentKind::FourGroupSweepSigma => {
            for &z in &config.z_out {
                for &sigma in &config.sigma {
                    points.push(SweepPoint { z_out: Some(z), sigma });
                }
            }
            (SweepAxis::Sigma, points)
        }
        ExperimentKind::RealNetworkSweepSigma => {
            for &sigma in &config.sigma {
                points.push(SweepPoint { z_out: None, sigma });
            }
            (SweepAxis::Sigma, points)
        }
        ExperimentKind::SingleRun => {
            let z_out = if real { None } else { config.z_out.first().copied() };
            points.push(SweepPoint {
                z_out,
                sigma: config.sigma[0],
            });
            (SweepAxis::Sigma, points)
        }
    }
}

fn run_method(
    method: Method,
    network: &AttributedNetwork,
    truth: &GroundTruth,
    l_max: usize,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<TrialOutcome> {
    let (labels, iterations, converged) = match method {
        Method::BpEm => {
            let r = detect(network, l_max, &config.solver, seed)?;
            (r.labels, r.iterations, r.converged)
        }
        Method::NaiveMf => {
            let r = detect_naive_mf(network, l_max, &config.solver, seed)?;
            (r.labels, r.iterations, r.converged)
        }
        Method::Kmeans => (
            detect_kmeans_only(network.attributes(), l_max, seed, &config.solver)?,
            0,
            true,
        ),
    };
    Ok(TrialOutcome {
        accuracy: accuracy(&labels, truth)?.accuracy,
        modularity: modularity(&labels, network),
        iterations,
        converged,
    })
}

/// Runs every (sweep point, trial, method) combination.
///
/// Each trial regenerates the attributes, and for synthetic experiments the
/// network, from a seed derived from `(seed, point, trial)`; each method gets
/// its own seed derived from `(seed, point, trial, method)`. Trials run in
/// parallel, and records are collected in a fixed order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let dataset = load_dataset(config)?;
    let (axis, points) = sweep_points(config, dataset.is_some());

    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..config.trials).map(move |t| (p, t)))
        .collect();
    let per_job: Vec<Result<Vec<TrialRecord>>> = jobs
        .par_iter()
        .map(|&(p, trial)| {
            let point = points[p];
            let [zb, sb] = point.seed_parts();
            let data_seed = derive_seed(config.seed, &[zb, sb, trial as u64]);
            let (network, truth) = match (&dataset, point.z_out) {
                (Some(ds), _) => (ds.network.clone(), ds.truth.clone()),
                (None, Some(z)) => sample_four_group(z, derive_seed(data_seed, &[0]))?,
                (None, None) => unreachable!("synthetic sweep points carry z_out"),
            };
            let k = truth.n_communities();
            let mu: Vec<f64> = (0..k).map(|l| config.mean_spacing * l as f64).collect();
            let d = sample_attributes(&truth, &mu, &vec![point.sigma; k], derive_seed(data_seed, &[1]))?;
            let network = network.with_attributes(d)?;
            let truth_modularity = modularity(&truth, &network);
            let l_max = config.l_max.unwrap_or(k);
            Ok(config
                .methods
                .iter()
                .map(|&method| {
                    let seed = derive_seed(config.seed, &[zb, sb, trial as u64, method.seed_tag()]);
                    TrialRecord {
                        point,
                        trial,
                        method,
                        truth_modularity,
                        outcome: run_method(method, &network, &truth, l_max, config, seed)
                            .map_err(|e| e.to_string()),
                    }
                })
                .collect())
        })
        .collect();

    let mut records = Vec::with_capacity(jobs.len() * config.methods.len());
    for r in per_job {
        records.extend(r?);
    }
    Ok(ExperimentResults {
        kind: config.kind,
        axis,
        points,
        methods: config.methods.clone(),
        records,
    })
}
