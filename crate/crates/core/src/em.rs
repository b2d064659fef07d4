//! EM parameter estimation interleaved with belief propagation.
//!
//! Each iteration runs one BP sweep (messages, then vertex beliefs), forms
//! the edge beliefs, and applies the closed-form maximizers of the
//! approximate Q function:
//!
//! ```text
//! gamma_l   = (1/|V|) sum_i b_i(l)
//! G'_ll     = 2 / (|V| gamma_l^2)       sum_{ij in E} b_ij(l, l)
//! G'_ls     = 1 / (|V| gamma_l gamma_s) sum_{ij in E} [b_ij(l, s) + b_ij(s, l)]
//! mu_l      = sum_i d_i b_i(l) / sum_i b_i(l)
//! sigma_l^2 = sum_i (d_i - mu_l)^2 b_i(l) / sum_i b_i(l)
//! ```
//!
//! Iteration stops once both the largest message change and the largest
//! parameter change fall below `tol`.

use serde::{Deserialize, Serialize};

use crate::attr::{gaussian_log_pdf, mean, population_std, sigma_floor, ModelParams};
use crate::bp::{mpm_labels, BpConfig, BpState, Marginals, Schedule};
use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, GroundTruth};
use crate::kmeans::kmeanspp_1d_best_of;
use crate::matrix::SquareMatrix;
use crate::seeds::derive_seed;

/// Solver settings shared by the BP/EM detector and the mean-field baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub tol: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub schedule: Schedule,
    pub n_restarts: usize,
    /// Lower bound on fitted standard deviations; derived from the data when unset.
    pub sigma_floor: Option<f64>,
    /// Starting standard deviation of every label.
    pub initial_sigma: f64,
    pub gamma_floor: f64,
    /// Labels with less total belief than this keep their previous `(mu, sigma)`.
    pub responsibility_floor: f64,
    pub kmeans_rounds: usize,
    pub kmeans_inits: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            tol: 1e-6,
            max_iterations: 500,
            damping: 0.0,
            schedule: Schedule::Fixed,
            n_restarts: 1,
            sigma_floor: None,
            initial_sigma: 1.0,
            gamma_floor: 1e-8,
            responsibility_floor: 1e-6,
            kmeans_rounds: 100,
            kmeans_inits: 10,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::validation("tol must be positive"));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::validation("damping must lie in [0, 1)"));
        }
        if self.n_restarts == 0 {
            return Err(Error::validation("n_restarts must be at least 1"));
        }
        if !(self.initial_sigma > 0.0) {
            return Err(Error::validation("initial_sigma must be positive"));
        }
        if matches!(self.sigma_floor, Some(f) if !(f > 0.0)) {
            return Err(Error::validation("sigma_floor must be positive"));
        }
        if !(self.gamma_floor > 0.0 && self.gamma_floor < 1.0) {
            return Err(Error::validation("gamma_floor must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn bp(&self) -> BpConfig {
        BpConfig {
            damping: self.damping,
            schedule: self.schedule,
        }
    }

    pub fn resolved_sigma_floor(&self, attributes: &[f64]) -> f64 {
        self.sigma_floor.unwrap_or_else(|| sigma_floor(attributes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub message_delta: f64,
    pub param_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub labels: GroundTruth,
    pub beliefs: Marginals,
    pub params: ModelParams,
    pub iterations: usize,
    pub converged: bool,
    pub trajectory: Vec<IterationDiagnostics>,
    /// Approximate Q function at the final state; used to rank restarts.
    pub objective: f64,
}

/// Mean belief per label, floored at `gamma_floor` and renormalized.
pub fn em_update_gamma(beliefs: &Marginals, gamma_floor: f64) -> Vec<f64> {
    let n = beliefs.len() as f64;
    let raw: Vec<f64> = beliefs
        .label_totals()
        .into_iter()
        .map(|t| (t / n).max(gamma_floor))
        .collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|g| g / z).collect()
}

/// Closed-form affinity update from summed edge beliefs, clipped to `[0, |V|]`.
pub fn em_update_gamma_prime(
    edge_totals: &SquareMatrix,
    gamma: &[f64],
    n_vertices: usize,
) -> SquareMatrix {
    let l = gamma.len();
    let n = n_vertices as f64;
    let mut out = SquareMatrix::zeros(l);
    for a in 0..l {
        out[(a, a)] = 2.0 * edge_totals[(a, a)] / (n * gamma[a] * gamma[a]);
        for b in a + 1..l {
            let v = (edge_totals[(a, b)] + edge_totals[(b, a)]) / (n * gamma[a] * gamma[b]);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    for a in 0..l {
        for b in 0..l {
            out[(a, b)] = out[(a, b)].clamp(0.0, n);
        }
    }
    out
}

/// Belief-weighted Gaussian maximum likelihood per label.
pub fn em_update_theta(
    beliefs: &Marginals,
    attributes: &[f64],
    previous_mu: &[f64],
    previous_sigma: &[f64],
    sigma_floor: f64,
    responsibility_floor: f64,
) -> (Vec<f64>, Vec<f64>) {
    let l = beliefs.n_labels();
    let mut weight = vec![0.0; l];
    let mut first = vec![0.0; l];
    for (row, &d) in beliefs.rows().zip(attributes) {
        for t in 0..l {
            weight[t] += row[t];
            first[t] += row[t] * d;
        }
    }
    let mut mu = previous_mu.to_vec();
    let mut sigma = previous_sigma.to_vec();
    for t in 0..l {
        if weight[t] < responsibility_floor {
            continue;
        }
        mu[t] = first[t] / weight[t];
    }
    let mut second = vec![0.0; l];
    for (row, &d) in beliefs.rows().zip(attributes) {
        for t in 0..l {
            second[t] += row[t] * (d - mu[t]) * (d - mu[t]);
        }
    }
    for t in 0..l {
        if weight[t] < responsibility_floor {
            continue;
        }
        sigma[t] = (second[t] / weight[t]).sqrt().max(sigma_floor);
    }
    (mu, sigma)
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// The approximate Q function with the large-`|V|` non-edge term
/// `-(1/|V|) * [ sum_{l<s} G'_ls T_l T_s + sum_l G'_ll T_l^2 / 2 ]`,
/// where `T_l = sum_i b_i(l)`, and edge beliefs summed over `E`.
pub fn approximate_q(
    params: &ModelParams,
    beliefs: &Marginals,
    edge_totals: &SquareMatrix,
    attributes: &[f64],
) -> f64 {
    let l = params.n_labels();
    let n = beliefs.len() as f64;
    let mut q = 0.0;
    for (row, &d) in beliefs.rows().zip(attributes) {
        for t in 0..l {
            if row[t] > 0.0 {
                q += row[t]
                    * (params.gamma[t].ln() + gaussian_log_pdf(d, params.mu[t], params.sigma[t]));
            }
        }
    }
    let totals = beliefs.label_totals();
    for a in 0..l {
        for b in 0..l {
            q += xlogy(edge_totals[(a, b)], params.gamma_prime[(a, b)]);
        }
        q -= params.gamma_prime[(a, a)] * totals[a] * totals[a] / (2.0 * n);
        for b in a + 1..l {
            q -= params.gamma_prime[(a, b)] * totals[a] * totals[b] / n;
        }
    }
    q
}

/// Starting parameters: uniform prior, flat affinity `2|E| / (|V| - 1)`,
/// k-means++ centers as means and a common starting deviation.
pub fn initial_params(
    network: &AttributedNetwork,
    l_max: usize,
    config: &DetectConfig,
    seed: u64,
) -> Result<ModelParams> {
    let n = network.n_vertices();
    let d = network.attributes();
    let floor = config.resolved_sigma_floor(d);
    let affinity = if n > 1 {
        (2.0 * network.n_edges() as f64 / (n - 1) as f64).min(n as f64)
    } else {
        0.0
    };
    let mu = match kmeanspp_1d_best_of(d, l_max, seed, config.kmeans_rounds, config.kmeans_inits) {
        Ok(km) => km.centers,
        // Fewer distinct attribute values than labels: spread the means
        // evenly over the observed range instead.
        Err(Error::Validation(_)) => {
            let (lo, hi) = d
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            let span = if hi > lo { hi - lo } else { config.initial_sigma };
            let start = if hi > lo { lo } else { mean(d) - span / 2.0 };
            (0..l_max)
                .map(|t| start + span * (t as f64 + 0.5) / l_max as f64)
                .collect()
        }
        Err(e) => return Err(e),
    };
    Ok(ModelParams {
        gamma: vec![1.0 / l_max as f64; l_max],
        gamma_prime: SquareMatrix::filled(l_max, affinity),
        mu,
        sigma: vec![config.initial_sigma.max(floor); l_max],
    })
}

pub(crate) fn check_inputs(network: &AttributedNetwork, l_max: usize) -> Result<()> {
    if l_max == 0 {
        return Err(Error::validation("L_max must be at least 1"));
    }
    if network.n_vertices() == 0 {
        return Err(Error::validation("network has no vertices"));
    }
    if l_max > network.n_vertices() {
        return Err(Error::validation(format!(
            "L_max = {l_max} exceeds the {} vertices",
            network.n_vertices()
        )));
    }
    Ok(())
}

/// Runs BP/EM to joint convergence from the given parameters and state.
pub fn detect_from(
    network: &AttributedNetwork,
    mut params: ModelParams,
    mut state: BpState,
    config: &DetectConfig,
) -> DetectionResult {
    let d = network.attributes();
    let floor = config.resolved_sigma_floor(d);
    let bp = config.bp();
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut edge_totals = state.edge_belief_totals(network, &params);

    for _ in 0..config.max_iterations {
        let message_delta = state.sweep(network, &params, &bp);
        edge_totals = state.edge_belief_totals(network, &params);

        let gamma = em_update_gamma(state.beliefs(), config.gamma_floor);
        let gamma_prime = em_update_gamma_prime(&edge_totals, &gamma, network.n_vertices());
        let (mu, sigma) = em_update_theta(
            state.beliefs(),
            d,
            &params.mu,
            &params.sigma,
            floor,
            config.responsibility_floor,
        );
        let next = ModelParams {
            gamma,
            gamma_prime,
            mu,
            sigma,
        };
        let param_delta = next.max_abs_diff(&params);
        params = next;
        state.refresh_external_field(&params);
        trajectory.push(IterationDiagnostics {
            message_delta,
            param_delta,
        });
        if message_delta < config.tol && param_delta < config.tol {
            converged = true;
            break;
        }
    }

    let objective = approximate_q(&params, state.beliefs(), &edge_totals, d);
    DetectionResult {
        labels: mpm_labels(state.beliefs()),
        beliefs: state.beliefs().clone(),
        params,
        iterations: trajectory.len(),
        converged,
        trajectory,
        objective,
    }
}

/// Community detection with BP/EM on the attributed block model.
///
/// With `n_restarts > 1`, runs from independently seeded random states and
/// keeps the run with the highest approximate Q (earliest on ties).
pub fn detect(
    network: &AttributedNetwork,
    l_max: usize,
    config: &DetectConfig,
    seed: u64,
) -> Result<DetectionResult> {
    check_inputs(network, l_max)?;
    config.validate()?;
    let params = initial_params(network, l_max, config, seed)?;
    let mut best: Option<DetectionResult> = None;
    for r in 0..config.n_restarts {
        let run_seed = derive_seed(seed, &[r as u64]);
        let state = BpState::init(network, &params, run_seed);
        let result = detect_from(network, params.clone(), state, config);
        if best.as_ref().is_none_or(|b| result.objective > b.objective) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Overall attribute spread; handy for choosing config scales.
pub fn attribute_scale(network: &AttributedNetwork) -> f64 {
    population_std(network.attributes())
}
