//! Model parameters and the Gaussian attribute likelihood.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GroundTruth;
use crate::matrix::SquareMatrix;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Parameters of the attributed block model.
///
/// `gamma_prime` holds the scaled affinities `|V| * Gamma`, so an edge between
/// labels `l` and `s` appears with probability `gamma_prime[(l, s)] / |V|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: Vec<f64>,
    pub gamma_prime: SquareMatrix,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl ModelParams {
    pub fn n_labels(&self) -> usize {
        self.gamma.len()
    }

    /// Checks the simplex, symmetry, range and positivity constraints.
    pub fn validate(&self, n_vertices: usize, sigma_floor: f64) -> Result<()> {
        let l = self.gamma.len();
        if l == 0 {
            return Err(Error::validation("model needs at least one label"));
        }
        if self.gamma_prime.dim() != l || self.mu.len() != l || self.sigma.len() != l {
            return Err(Error::validation("parameter dimensions disagree"));
        }
        if self.gamma.iter().any(|&g| !(g >= 0.0)) {
            return Err(Error::validation("label prior has a negative entry"));
        }
        let total: f64 = self.gamma.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::validation(format!("label prior sums to {total}")));
        }
        if self.gamma_prime.asymmetry() > 1e-12 {
            return Err(Error::validation("affinity matrix is not symmetric"));
        }
        let upper = n_vertices as f64;
        if self
            .gamma_prime
            .as_slice()
            .iter()
            .any(|&g| !(0.0..=upper).contains(&g))
        {
            return Err(Error::validation(format!("affinity outside [0, {upper}]")));
        }
        if self.mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::validation("non-finite attribute mean"));
        }
        if self.sigma.iter().any(|&s| !(s >= sigma_floor && s.is_finite())) {
            return Err(Error::validation(format!(
                "attribute standard deviation below floor {sigma_floor}"
            )));
        }
        Ok(())
    }

    /// Relabels the model: label `l` becomes `perm[l]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let scatter = |v: &[f64]| {
            let mut out = vec![0.0; v.len()];
            for (l, &x) in v.iter().enumerate() {
                out[perm[l]] = x;
            }
            out
        };
        ModelParams {
            gamma: scatter(&self.gamma),
            gamma_prime: self.gamma_prime.permuted(perm),
            mu: scatter(&self.mu),
            sigma: scatter(&self.sigma),
        }
    }

    /// Largest absolute change of any parameter.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let vec_diff = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        vec_diff(&self.gamma, &other.gamma)
            .max(self.gamma_prime.max_abs_diff(&other.gamma_prime))
            .max(vec_diff(&self.mu, &other.mu))
            .max(vec_diff(&self.sigma, &other.sigma))
    }
}

/// Natural log of the normal density with mean `mu` and standard deviation `sigma`.
pub fn gaussian_log_pdf(d: f64, mu: f64, sigma: f64) -> f64 {
    let z = (d - mu) / sigma;
    -HALF_LN_2PI - sigma.ln() - 0.5 * z * z
}

/// `log gamma_l + log N(d; mu_l, sigma_l)` for every label.
pub fn log_vertex_potential(d: f64, params: &ModelParams) -> Vec<f64> {
    let mut out = vec![0.0; params.n_labels()];
    log_vertex_potential_into(d, params, &mut out);
    out
}

pub fn log_vertex_potential_into(d: f64, params: &ModelParams, out: &mut [f64]) {
    for (l, o) in out.iter_mut().enumerate() {
        *o = params.gamma[l].ln() + gaussian_log_pdf(d, params.mu[l], params.sigma[l]);
    }
}

/// Lower bound on any fitted standard deviation: `1e-3` of the data's
/// standard deviation, but never below `1e-8`.
pub fn sigma_floor(attributes: &[f64]) -> f64 {
    (1e-3 * population_std(attributes)).max(1e-8)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Class means used by the benchmark protocol: `0, 10, 20, ...`.
pub fn protocol_means(n_labels: usize) -> Vec<f64> {
    (0..n_labels).map(|l| 10.0 * l as f64).collect()
}

/// Draws `d_i ~ N(mu[x_i], sigma[x_i]^2)` independently.
pub fn sample_attributes(
    labels: &GroundTruth,
    mu: &[f64],
    sigma: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    let k = labels.n_communities();
    if mu.len() < k || sigma.len() < k {
        return Err(Error::validation(format!(
            "need attribute parameters for {k} labels"
        )));
    }
    let dists = mu
        .iter()
        .zip(sigma)
        .map(|(&m, &s)| {
            Normal::new(m, s).map_err(|e| Error::validation(format!("bad normal ({m}, {s}): {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(labels
        .labels()
        .iter()
        .map(|&l| dists[l].sample(&mut rng))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(gamma: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>) -> ModelParams {
        let l = gamma.len();
        ModelParams {
            gamma,
            gamma_prime: SquareMatrix::filled(l, 1.0),
            mu,
            sigma,
        }
    }

    #[test]
    fn symmetric_model_gives_equal_potentials() {
        let p = params(vec![0.25; 4], vec![1.0; 4], vec![2.0; 4]);
        let phi = log_vertex_potential(0.3, &p);
        assert!(phi.iter().all(|&x| x == phi[0]));
    }

    #[test]
    fn gaussian_peak() {
        let p = params(vec![1.0, 0.0], vec![3.0, 0.0], vec![1.0, 1.0]);
        let phi = log_vertex_potential(3.0, &p);
        assert!((phi[0] + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        assert_eq!(phi[1], f64::NEG_INFINITY);
    }

    // Log-density via a compensated evaluation: ln(sigma) and the quadratic
    // term are formed with two-product error terms, then summed with Neumaier
    // summation. Independent of `gaussian_log_pdf`.
    fn log_pdf_oracle(d: f64, mu: f64, sigma: f64, gamma: f64) -> f64 {
        fn two_prod(a: f64, b: f64) -> (f64, f64) {
            let p = a * b;
            (p, a.mul_add(b, -p))
        }
        let diff = d - mu;
        let err_diff = (d - (mu + diff)) + (mu - ((mu + diff) - diff));
        let z = diff / sigma;
        let z_err = (diff - z * sigma + err_diff) / sigma;
        let (z2, z2_err) = two_prod(z, z);
        let terms = [
            gamma.ln(),
            -0.5 * (2.0 * std::f64::consts::PI).ln(),
            -sigma.ln(),
            -0.5 * z2,
            -0.5 * z2_err,
            -z * z_err,
        ];
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for t in terms {
            let s = sum + t;
            comp += if sum.abs() >= t.abs() {
                (sum - s) + t
            } else {
                (t - s) + sum
            };
            sum = s;
        }
        sum + comp
    }

    #[test]
    fn potential_matches_compensated_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        use rand::Rng;
        for _ in 0..500 {
            let gamma: Vec<f64> = {
                let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
                let t: f64 = raw.iter().sum();
                raw.iter().map(|g| g / t).collect()
            };
            let mu: Vec<f64> = (0..3).map(|_| rng.random_range(-20.0..20.0)).collect();
            let sigma: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..5.0)).collect();
            let p = params(gamma.clone(), mu.clone(), sigma.clone());
            let d = rng.random_range(-30.0..30.0);
            let phi = log_vertex_potential(d, &p);
            for l in 0..3 {
                let want = log_pdf_oracle(d, mu[l], sigma[l], gamma[l]);
                let tol = 1e-12 * want.abs().max(1.0);
                assert!((phi[l] - want).abs() <= tol, "{} vs {}", phi[l], want);
            }
        }
    }

    #[test]
    fn normalized_potentials_form_a_distribution() {
        let p = params(vec![0.2, 0.3, 0.5], vec![0.0, 10.0, 20.0], vec![1.0, 0.5, 2.0]);
        for d in [-50.0, 0.0, 4.9, 10.0, 1e3] {
            let phi = log_vertex_potential(d, &p);
            assert!(phi.iter().all(|x| x.is_finite()));
            let m = phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = phi.iter().map(|x| (x - m).exp()).collect();
            let z: f64 = w.iter().sum();
            assert!((w.iter().map(|x| x / z).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_noise_recovers_means() {
        let truth = GroundTruth::blocks(3, 10);
        let mu = protocol_means(3);
        let d = sample_attributes(&truth, &mu, &[1e-3; 3], 5).unwrap();
        for (v, &x) in d.iter().enumerate() {
            assert!((x - 10.0 * truth.labels()[v] as f64).abs() < 1e-2);
        }
    }

    #[test]
    fn per_label_sample_means_obey_clt_bound() {
        let truth = GroundTruth::blocks(4, 10_000);
        let mu = protocol_means(4);
        let sigma = [3.0; 4];
        let d = sample_attributes(&truth, &mu, &sigma, 99).unwrap();
        for l in 0..4 {
            let block = &d[l * 10_000..(l + 1) * 10_000];
            // 4 standard errors of the mean: 4 * sigma / sqrt(10^4)
            assert!((mean(block) - mu[l]).abs() < 4.0 * sigma[l] / 100.0);
        }
        let again = sample_attributes(&truth, &mu, &sigma, 99).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn validate_catches_violations() {
        let good = params(vec![0.5, 0.5], vec![0.0, 1.0], vec![1.0, 1.0]);
        assert!(good.validate(10, 1e-8).is_ok());
        let mut bad = good.clone();
        bad.gamma = vec![0.6, 0.6];
        assert!(bad.validate(10, 1e-8).is_err());
        let mut bad = good.clone();
        bad.sigma[1] = 1e-9;
        assert!(bad.validate(10, 1e-8).is_err());
        let mut bad = good.clone();
        bad.gamma_prime[(0, 1)] = 2.0;
        assert!(bad.validate(10, 1e-8).is_err());
        let mut bad = good;
        bad.gamma_prime = SquareMatrix::filled(2, 11.0);
        assert!(bad.validate(10, 1e-8).is_err());
    }

    #[test]
    fn sigma_floor_scales_with_data() {
        assert_eq!(sigma_floor(&[1.0, 1.0]), 1e-8);
        assert!((sigma_floor(&[0.0, 10.0]) - 5e-3).abs() < 1e-15);
    }
}
