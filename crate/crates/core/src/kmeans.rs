//! One-dimensional k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// Cluster centers in ascending order.
    pub centers: Vec<f64>,
    /// Index into `centers` for every input value.
    pub assignment: Vec<usize>,
}

impl KMeans {
    /// Within-cluster sum of squared distances.
    pub fn sse(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.assignment)
            .map(|(v, &c)| (v - self.centers[c]).powi(2))
            .sum()
    }
}

fn nearest(centers: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, &x) in centers.iter().enumerate() {
        let d = (v - x) * (v - x);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn count_distinct(values: &[f64]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    sorted.len()
}

fn seed_centers(values: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k);
    centers.push(values[rng.random_range(0..values.len())]);
    let mut dist2: Vec<f64> = values.iter().map(|v| (v - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = dist2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in dist2.iter().enumerate() {
            acc += w;
            if acc > target && w > 0.0 {
                pick = Some(i);
                break;
            }
        }
        // Rounding can leave `acc` just short of `target`; fall back to the
        // last point that still carries weight.
        let i = pick.unwrap_or_else(|| dist2.iter().rposition(|&w| w > 0.0).unwrap());
        let c = values[i];
        centers.push(c);
        for (d, v) in dist2.iter_mut().zip(values) {
            *d = d.min((v - c) * (v - c));
        }
    }
    centers
}

/// k-means++ seeding followed by at most `rounds` Lloyd iterations.
///
/// Empty clusters are reseeded at the point farthest from its center.
pub fn kmeanspp_1d(values: &[f64], k: usize, seed: u64, rounds: usize) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::validation("k must be at least 1"));
    }
    if values.is_empty() {
        return Err(Error::validation("k-means needs at least one value"));
    }
    let distinct = count_distinct(values);
    if k > distinct {
        return Err(Error::validation(format!(
            "k = {k} exceeds the {distinct} distinct values"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(values, k, &mut rng);
    let mut assignment: Vec<usize> = values.iter().map(|&v| nearest(&centers, v)).collect();
    for _ in 0..rounds {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&v, &c) in values.iter().zip(&assignment) {
            sums[c] += v;
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c] / counts[c] as f64;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..values.len())
                    .max_by(|&a, &b| {
                        let da = (values[a] - centers[assignment[a]]).abs();
                        let db = (values[b] - centers[assignment[b]]).abs();
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap();
                centers[c] = values[far];
                assignment[far] = c;
            }
        }
        let next: Vec<usize> = values.iter().map(|&v| nearest(&centers, v)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
    let mut rank = vec![0; k];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    Ok(KMeans {
        centers: order.iter().map(|&c| centers[c]).collect(),
        assignment: assignment.into_iter().map(|c| rank[c]).collect(),
    })
}

/// Runs [`kmeanspp_1d`] from `n_init` seedings and keeps the lowest SSE.
/// Seedings use `seed, seed + 1, ...`; ties keep the earliest.
pub fn kmeanspp_1d_best_of(
    values: &[f64],
    k: usize,
    seed: u64,
    rounds: usize,
    n_init: usize,
) -> Result<KMeans> {
    let mut best = kmeanspp_1d(values, k, seed, rounds)?;
    let mut best_sse = best.sse(values);
    for t in 1..n_init.max(1) as u64 {
        let run = kmeanspp_1d(values, k, seed.wrapping_add(t), rounds)?;
        let sse = run.sse(values);
        if sse < best_sse {
            best = run;
            best_sse = sse;
        }
    }
    Ok(best)
}
