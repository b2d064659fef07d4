//! Permutation-matched accuracy and Newman modularity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, GroundTruth};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accuracy {
    pub accuracy: f64,
    /// `permutation[predicted] = true label` achieving `accuracy`.
    pub permutation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub modularity: f64,
    pub best_permutation: Vec<usize>,
}

/// `confusion[p][t]` counts vertices predicted `p` with true label `t`, on a
/// square alphabet of size `max(L_pred, L_true)`.
pub fn confusion_matrix(predicted: &GroundTruth, truth: &GroundTruth) -> Result<Vec<Vec<u64>>> {
    if predicted.len() != truth.len() {
        return Err(Error::validation(format!(
            "{} predicted labels for {} true labels",
            predicted.len(),
            truth.len()
        )));
    }
    let k = predicted.n_communities().max(truth.n_communities()).max(1);
    let mut c = vec![vec![0u64; k]; k];
    for (&p, &t) in predicted.labels().iter().zip(truth.labels()) {
        c[p][t] += 1;
    }
    Ok(c)
}

/// Minimum-cost perfect assignment on a square matrix (Hungarian method with
/// potentials, `O(n^3)`). Returns `assign[row] = column`.
pub fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays; index 0 is the virtual start column.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            assign[row_of[j] - 1] = j - 1;
        }
    }
    assign
}

/// Fraction of vertices whose predicted label, after the best relabeling,
/// equals the true label.
pub fn accuracy(predicted: &GroundTruth, truth: &GroundTruth) -> Result<Accuracy> {
    let c = confusion_matrix(predicted, truth)?;
    let top = c.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost: Vec<Vec<i64>> = c
        .iter()
        .map(|row| row.iter().map(|&x| top - x as i64).collect())
        .collect();
    let permutation = min_cost_assignment(&cost);
    let hits: u64 = permutation.iter().enumerate().map(|(p, &t)| c[p][t]).sum();
    let n = predicted.len();
    Ok(Accuracy {
        accuracy: if n == 0 { 1.0 } else { hits as f64 / n as f64 },
        permutation,
    })
}

/// Exhaustive maximum over all relabelings; feasible for small alphabets.
pub fn accuracy_exhaustive(predicted: &GroundTruth, truth: &GroundTruth) -> Result<f64> {
    let c = confusion_matrix(predicted, truth)?;
    let k = c.len();
    if k > 8 {
        return Err(Error::validation(format!(
            "exhaustive matching over {k}! permutations is not supported"
        )));
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0u64;
    loop {
        best = best.max(perm.iter().enumerate().map(|(p, &t)| c[p][t]).sum());
        // next lexicographic permutation
        let Some(i) = (0..k.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            break;
        };
        let j = (i + 1..k).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
    let n = predicted.len();
    Ok(if n == 0 { 1.0 } else { best as f64 / n as f64 })
}

/// Newman modularity, summed per community as edge fraction minus squared
/// degree fraction. A graph without edges has modularity 0.
pub fn modularity(labels: &GroundTruth, network: &AttributedNetwork) -> f64 {
    let m = network.n_edges();
    if m == 0 {
        log::warn!("modularity of an edgeless graph is defined as 0");
        return 0.0;
    }
    let k = labels.labels().iter().max().map_or(1, |x| x + 1);
    let mut internal = vec![0usize; k];
    let mut degree = vec![0usize; k];
    let x = labels.labels();
    for &(i, j) in network.edges() {
        if x[i] == x[j] {
            internal[x[i]] += 1;
        }
    }
    for (v, &c) in x.iter().enumerate() {
        degree[c] += network.degree(v);
    }
    let two_m = 2.0 * m as f64;
    (0..k)
        .map(|c| internal[c] as f64 / m as f64 - (degree[c] as f64 / two_m).powi(2))
        .sum()
}

pub fn evaluate(
    predicted: &GroundTruth,
    truth: &GroundTruth,
    network: &AttributedNetwork,
) -> Result<EvalReport> {
    let acc = accuracy(predicted, truth)?;
    Ok(EvalReport {
        accuracy: acc.accuracy,
        modularity: modularity(predicted, network),
        best_permutation: acc.permutation,
    })
}
