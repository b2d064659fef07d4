//! Competitor methods: naive mean field on the same model, and attribute-only k-means++.
//!
//! The mean-field variant replaces messages by vertex marginals. Maximizing
//! the variational free energy of the posterior over fully factorized
//! distributions gives the fixed-point equation
//!
//! ```text
//! b_i(l) ~ phi_i(l) * exp[ sum_{j in N(i)} sum_s b_j(s) log G'_ls
//!                          - (1/|V|) sum_{j != i} sum_s b_j(s) G'_ls ]
//! ```
//!
//! where the second term is the sparse limit of `log(1 - G'_ls / |V|)` over
//! non-adjacent pairs. Parameters follow the same EM updates with `b_ij`
//! replaced by `b_i b_j` on edges, and one standard deviation shared by all
//! labels.

use crate::attr::{log_vertex_potential_into, ModelParams};
use crate::bp::{mpm_labels, normalize_log, Marginals};
use crate::em::{
    approximate_q, check_inputs, em_update_gamma, em_update_gamma_prime, initial_params,
    DetectConfig, DetectionResult, IterationDiagnostics,
};
use crate::error::Result;
use crate::graph::{AttributedNetwork, GroundTruth};
use crate::kmeans::kmeanspp_1d_best_of;
use crate::matrix::SquareMatrix;
use crate::seeds::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Affinities below this are treated as this value inside the logarithm.
const LOG_AFFINITY_FLOOR: f64 = 1e-12;

/// Right-hand side of the mean-field equation for vertex `i`, normalized.
/// `totals` is `sum_j b_j` over all vertices, including `i`.
pub fn naive_mf_target(
    i: usize,
    network: &AttributedNetwork,
    params: &ModelParams,
    beliefs: &Marginals,
    totals: &[f64],
) -> Vec<f64> {
    let l = params.n_labels();
    let n = network.n_vertices() as f64;
    let g = &params.gamma_prime;
    let mut out = vec![0.0; l];
    log_vertex_potential_into(network.attributes()[i], params, &mut out);
    let mut neighbor_mass = vec![0.0; l];
    for &j in network.neighbors(i) {
        for (acc, b) in neighbor_mass.iter_mut().zip(beliefs.row(j)) {
            *acc += b;
        }
    }
    let others: Vec<f64> = totals.iter().zip(beliefs.row(i)).map(|(t, b)| t - b).collect();
    for a in 0..l {
        let mut e = 0.0;
        for s in 0..l {
            e += neighbor_mass[s] * g[(a, s)].max(LOG_AFFINITY_FLOOR).ln();
            e -= others[s] * g[(a, s)] / n;
        }
        out[a] += e;
    }
    normalize_log(&mut out);
    out
}

/// One Gauss-Seidel pass of the mean-field equations in vertex order.
/// Returns the largest change of any belief entry.
pub fn naive_mf_sweep(
    network: &AttributedNetwork,
    params: &ModelParams,
    beliefs: &mut Marginals,
) -> f64 {
    let mut totals = beliefs.label_totals();
    let mut max_delta = 0.0f64;
    for i in 0..network.n_vertices() {
        let next = naive_mf_target(i, network, params, beliefs, &totals);
        let row = beliefs.row_mut(i);
        for t in 0..next.len() {
            max_delta = max_delta.max((next[t] - row[t]).abs());
            totals[t] += next[t] - row[t];
            row[t] = next[t];
        }
    }
    max_delta
}

/// `sum_{ij in E} b_i (outer) b_j`, edges oriented `i < j`.
pub fn factorized_edge_totals(network: &AttributedNetwork, beliefs: &Marginals) -> SquareMatrix {
    let mut out = SquareMatrix::zeros(beliefs.n_labels());
    for &(i, j) in network.edges() {
        let (bi, bj) = (beliefs.row(i), beliefs.row(j));
        for a in 0..bi.len() {
            for b in 0..bj.len() {
                out[(a, b)] += bi[a] * bj[b];
            }
        }
    }
    out
}

/// Means per label and one pooled standard deviation.
fn shared_theta(
    beliefs: &Marginals,
    attributes: &[f64],
    previous: &ModelParams,
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
    let mu: Vec<f64> = (0..l)
        .map(|t| {
            if weight[t] < responsibility_floor {
                previous.mu[t]
            } else {
                first[t] / weight[t]
            }
        })
        .collect();
    let mut second = 0.0;
    for (row, &d) in beliefs.rows().zip(attributes) {
        for t in 0..l {
            second += row[t] * (d - mu[t]) * (d - mu[t]);
        }
    }
    let sigma = (second / beliefs.len() as f64).sqrt().max(sigma_floor);
    (mu, vec![sigma; l])
}

/// Naive mean-field community detection with EM parameter estimation.
pub fn detect_naive_mf(
    network: &AttributedNetwork,
    l_max: usize,
    config: &DetectConfig,
    seed: u64,
) -> Result<DetectionResult> {
    check_inputs(network, l_max)?;
    config.validate()?;
    let init = initial_params(network, l_max, config, seed)?;
    let d = network.attributes();
    let floor = config.resolved_sigma_floor(d);

    let mut best: Option<DetectionResult> = None;
    for r in 0..config.n_restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[r as u64]));
        let rows: Vec<Vec<f64>> = (0..network.n_vertices())
            .map(|_| (0..l_max).map(|_| rng.random::<f64>() + f64::MIN_POSITIVE).collect())
            .collect();
        let mut beliefs = Marginals::from_rows(&rows);
        let mut params = init.clone();
        let mut trajectory = Vec::new();
        let mut converged = false;
        for _ in 0..config.max_iterations {
            let message_delta = naive_mf_sweep(network, &params, &mut beliefs);
            let gamma = em_update_gamma(&beliefs, config.gamma_floor);
            let edge_totals = factorized_edge_totals(network, &beliefs);
            let gamma_prime = em_update_gamma_prime(&edge_totals, &gamma, network.n_vertices());
            let (mu, sigma) = shared_theta(&beliefs, d, &params, floor, config.responsibility_floor);
            let next = ModelParams {
                gamma,
                gamma_prime,
                mu,
                sigma,
            };
            let param_delta = next.max_abs_diff(&params);
            params = next;
            trajectory.push(IterationDiagnostics {
                message_delta,
                param_delta,
            });
            if message_delta < config.tol && param_delta < config.tol {
                converged = true;
                break;
            }
        }
        let edge_totals = factorized_edge_totals(network, &beliefs);
        let result = DetectionResult {
            labels: mpm_labels(&beliefs),
            objective: approximate_q(&params, &beliefs, &edge_totals, d),
            beliefs,
            params,
            iterations: trajectory.len(),
            converged,
            trajectory,
        };
        if best.as_ref().is_none_or(|b| result.objective > b.objective) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Attribute-only clustering: k-means++ cluster indices used as labels.
pub fn detect_kmeans_only(
    attributes: &[f64],
    l_max: usize,
    seed: u64,
    config: &DetectConfig,
) -> Result<GroundTruth> {
    let km = kmeanspp_1d_best_of(
        attributes,
        l_max,
        seed,
        config.kmeans_rounds,
        config.kmeans_inits,
    )?;
    GroundTruth::new(km.assignment, l_max)
}
