//! Stochastic block model samplers, including the 128-vertex four-group benchmark.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, GroundTruth};
use crate::matrix::SquareMatrix;

pub const FOUR_GROUP_VERTICES: usize = 128;
pub const FOUR_GROUP_BLOCK: usize = 32;
pub const FOUR_GROUP_DEGREE: f64 = 16.0;

/// Samples an SBM graph: every pair `i < j` becomes an edge independently
/// with probability `gamma_prime[x_i, x_j] / n`.
pub fn sample_sbm(
    n: usize,
    labels: &GroundTruth,
    gamma_prime: &SquareMatrix,
    seed: u64,
) -> Result<AttributedNetwork> {
    if labels.len() != n {
        return Err(Error::validation(format!(
            "{} labels for {n} vertices",
            labels.len()
        )));
    }
    let k = gamma_prime.dim();
    if labels.labels().iter().any(|&l| l >= k) {
        return Err(Error::validation(format!(
            "labels exceed the {k}x{k} affinity matrix"
        )));
    }
    if gamma_prime.asymmetry() > 1e-12 {
        return Err(Error::validation("affinity matrix is not symmetric"));
    }
    for &g in gamma_prime.as_slice() {
        if !(0.0..=n as f64).contains(&g) {
            return Err(Error::validation(format!(
                "affinity {g} outside [0, {n}]: edge probability would leave [0, 1]"
            )));
        }
    }
    let scale = n as f64;
    let probs: Vec<f64> = gamma_prime.as_slice().iter().map(|g| g / scale).collect();
    let x = labels.labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        let row = &probs[x[i] * k..(x[i] + 1) * k];
        for j in i + 1..n {
            if rng.random::<f64>() < row[x[j]] {
                edges.push((i, j));
            }
        }
    }
    Ok(AttributedNetwork::from_canonical(n, edges))
}

/// Edge probabilities of the four-group benchmark for a given expected
/// number of inter-community neighbors per vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourGroupProbabilities {
    pub p_in: f64,
    pub p_out: f64,
}

impl FourGroupProbabilities {
    pub fn new(z_out: f64) -> Result<Self> {
        if !(0.0..=FOUR_GROUP_DEGREE).contains(&z_out) {
            return Err(Error::validation(format!(
                "z_out = {z_out} is outside [0, 16]"
            )));
        }
        let within = (FOUR_GROUP_BLOCK - 1) as f64;
        let between = (FOUR_GROUP_VERTICES - FOUR_GROUP_BLOCK) as f64;
        let p_out = z_out / between;
        let p_in = (FOUR_GROUP_DEGREE - between * p_out) / within;
        Ok(FourGroupProbabilities { p_in, p_out })
    }

    pub fn gamma_prime(&self) -> SquareMatrix {
        let n = FOUR_GROUP_VERTICES as f64;
        SquareMatrix::planted(4, self.p_in * n, self.p_out * n)
    }
}

/// Four communities of 32 vertices, expected degree 16.
pub fn sample_four_group(z_out: f64, seed: u64) -> Result<(AttributedNetwork, GroundTruth)> {
    let probs = FourGroupProbabilities::new(z_out)?;
    let truth = GroundTruth::blocks(4, FOUR_GROUP_BLOCK);
    let network = sample_sbm(FOUR_GROUP_VERTICES, &truth, &probs.gamma_prime(), seed)?;
    Ok((network, truth))
}
