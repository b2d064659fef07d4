//! Belief propagation on the sparse attributed block model.
//!
//! One message `m_{j->i}(x_j)` lives on each directed slot `j -> i`. Pairs
//! that are not joined by an edge are not messaged individually: their
//! combined influence on vertex `j` is the external field
//!
//! ```text
//! -(1/|V|) * sum_{k not adjacent to j, k != j} sum_s G'[x_j, s] b_k(s)
//! ```
//!
//! evaluated as `-(h - sum_{k in N(j)} G' b_k - G' b_j) / |V|` with the
//! global accumulator `h = G' * sum_k b_k`, refreshed once per sweep.
//!
//! All products are accumulated as sums of logs and normalized with the
//! maximum subtracted.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attr::{log_vertex_potential_into, ModelParams};
use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, GroundTruth};
use crate::matrix::SquareMatrix;

/// A row-major table of length-`L` probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    n_labels: usize,
    data: Vec<f64>,
}

impl Marginals {
    pub fn uniform(rows: usize, n_labels: usize) -> Self {
        Marginals {
            n_labels,
            data: vec![1.0 / n_labels as f64; rows * n_labels],
        }
    }

    /// Builds a table from rows; each row is normalized to sum to one.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_labels = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_labels);
        for r in rows {
            assert_eq!(r.len(), n_labels, "ragged marginal rows");
            let z: f64 = r.iter().sum();
            data.extend(r.iter().map(|x| x / z));
        }
        Marginals { n_labels, data }
    }

    fn random(rows: usize, n_labels: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut data = Vec::with_capacity(rows * n_labels);
        let mut u = vec![0.0; n_labels];
        for _ in 0..rows {
            u.iter_mut().for_each(|x| *x = rng.random::<f64>());
            let z: f64 = u.iter().sum();
            if z > 0.0 {
                data.extend(u.iter().map(|x| x / z));
            } else {
                data.extend(std::iter::repeat_n(1.0 / n_labels as f64, n_labels));
            }
        }
        Marginals { n_labels, data }
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn len(&self) -> usize {
        if self.n_labels == 0 {
            0
        } else {
            self.data.len() / self.n_labels
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_labels..(i + 1) * self.n_labels]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_labels..(i + 1) * self.n_labels]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n_labels)
    }

    /// Column sums `sum_i p_i(l)`.
    pub fn label_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.n_labels];
        for row in self.rows() {
            for (t, p) in totals.iter_mut().zip(row) {
                *t += p;
            }
        }
        totals
    }

    /// Largest deviation of any row sum from one.
    pub fn max_normalization_error(&self) -> f64 {
        self.rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Relabels every row: entry `l` moves to `perm[l]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for (src, dst) in self.rows().zip(out.data.chunks_exact_mut(self.n_labels)) {
            for (l, &p) in src.iter().enumerate() {
                dst[perm[l]] = p;
            }
        }
        out
    }
}

/// Order in which a sweep visits source vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Asynchronous, source vertices in index order.
    #[default]
    Fixed,
    /// Asynchronous, source vertices in a fresh seeded permutation each sweep.
    RandomPermutation,
    /// All messages computed from the previous sweep's messages, in parallel.
    Synchronous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpConfig {
    /// Weight of the old message when mixing, in `[0, 1)`.
    pub damping: f64,
    pub schedule: Schedule,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig {
            damping: 0.0,
            schedule: Schedule::Fixed,
        }
    }
}

/// Messages, beliefs and the external-field accumulator of one BP run.
#[derive(Debug, Clone, PartialEq)]
pub struct BpState {
    /// `messages.row(s)` is `m_{j->i}` for slot `s = j -> i`, a distribution over `x_j`.
    messages: Marginals,
    beliefs: Marginals,
    external_field: Vec<f64>,
    schedule_rng: ChaCha8Rng,
}

/// Pairwise belief of an edge, `b_ij(x_i, x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBelief(pub SquareMatrix);

/// `G' * sum_k b_k`: the affinity-weighted belief mass of the whole graph.
pub fn compute_external_field(beliefs: &Marginals, gamma_prime: &SquareMatrix) -> Vec<f64> {
    let totals = beliefs.label_totals();
    let mut h = vec![0.0; gamma_prime.dim()];
    gamma_prime.mul_vec_into(&totals, &mut h);
    h
}

/// `sum_{k not in N(j), k != j} G' b_k`, obtained from the accumulator by
/// removing the contributions of `j` and its neighbors.
pub fn non_neighbor_field(
    j: usize,
    network: &AttributedNetwork,
    gamma_prime: &SquareMatrix,
    beliefs: &Marginals,
    external_field: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; gamma_prime.dim()];
    non_neighbor_field_into(j, network, gamma_prime, beliefs, external_field, &mut out);
    out
}

fn non_neighbor_field_into(
    j: usize,
    network: &AttributedNetwork,
    gamma_prime: &SquareMatrix,
    beliefs: &Marginals,
    external_field: &[f64],
    out: &mut [f64],
) {
    let mut local = beliefs.row(j).to_vec();
    for &k in network.neighbors(j) {
        for (acc, b) in local.iter_mut().zip(beliefs.row(k)) {
            *acc += b;
        }
    }
    gamma_prime.mul_vec_into(&local, out);
    for (o, h) in out.iter_mut().zip(external_field) {
        *o = h - *o;
    }
}

/// Turns log-weights into a normalized distribution in place. Degenerate
/// input (all `-inf` or NaN) becomes uniform.
pub(crate) fn normalize_log(w: &mut [f64]) {
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let u = 1.0 / w.len() as f64;
        w.iter_mut().for_each(|x| *x = u);
        return;
    }
    let mut z = 0.0;
    for x in w.iter_mut() {
        *x = (*x - max).exp();
        z += *x;
    }
    w.iter_mut().for_each(|x| *x /= z);
}

fn log_affinity_into(gamma_prime: &SquareMatrix, p: &[f64], out: &mut [f64]) {
    gamma_prime.mul_vec_into(p, out);
    out.iter_mut().for_each(|x| *x = x.ln());
}

/// Reusable buffers for per-vertex message computation.
struct Scratch {
    l: usize,
    base: Vec<f64>,
    tmp: Vec<f64>,
    terms: Vec<f64>,
    prefix: Vec<f64>,
    suffix: Vec<f64>,
}

impl Scratch {
    fn new(l: usize) -> Self {
        Scratch {
            l,
            base: vec![0.0; l],
            tmp: vec![0.0; l],
            terms: Vec::new(),
            prefix: Vec::new(),
            suffix: Vec::new(),
        }
    }

    /// Fills `base` with `log phi_j + external field of j` and `terms` with
    /// `log(G' m_{k->j})` for each neighbor `k`, then prefix/suffix sums of
    /// those terms so any single neighbor can be left out without subtraction.
    fn load_vertex(
        &mut self,
        j: usize,
        network: &AttributedNetwork,
        params: &ModelParams,
        messages: &Marginals,
        beliefs: &Marginals,
        external_field: &[f64],
    ) {
        let l = self.l;
        let n = network.n_vertices() as f64;
        let g = &params.gamma_prime;
        log_vertex_potential_into(network.attributes()[j], params, &mut self.base);

        non_neighbor_field_into(j, network, g, beliefs, external_field, &mut self.tmp);
        for t in 0..l {
            self.base[t] -= self.tmp[t] / n;
        }

        let deg = network.degree(j);
        self.terms.resize(deg * l, 0.0);
        for (p, s) in network.slots(j).enumerate() {
            let incoming = messages.row(network.reverse(s));
            log_affinity_into(g, incoming, &mut self.terms[p * l..(p + 1) * l]);
        }
        self.prefix.resize((deg + 1) * l, 0.0);
        self.suffix.resize((deg + 1) * l, 0.0);
        self.prefix[..l].fill(0.0);
        self.suffix[deg * l..].fill(0.0);
        for p in 0..deg {
            for t in 0..l {
                self.prefix[(p + 1) * l + t] = self.prefix[p * l + t] + self.terms[p * l + t];
            }
        }
        for p in (0..deg).rev() {
            for t in 0..l {
                self.suffix[p * l + t] = self.suffix[(p + 1) * l + t] + self.terms[p * l + t];
            }
        }
    }

    /// Normalized message for the `p`-th outgoing slot of the loaded vertex.
    fn message(&self, p: usize, out: &mut [f64]) {
        let l = self.l;
        for t in 0..l {
            out[t] = self.base[t] + self.prefix[p * l + t] + self.suffix[(p + 1) * l + t];
        }
        normalize_log(out);
    }

    /// Normalized belief of the loaded vertex.
    fn belief(&self, deg: usize, out: &mut [f64]) {
        let l = self.l;
        for t in 0..l {
            out[t] = self.base[t] + self.prefix[deg * l + t];
        }
        normalize_log(out);
    }
}

impl BpState {
    /// Random normalized messages and beliefs drawn from `uniform[0, 1)`.
    pub fn init(network: &AttributedNetwork, params: &ModelParams, seed: u64) -> Self {
        let l = params.n_labels();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let messages = Marginals::random(network.n_slots(), l, &mut rng);
        let beliefs = Marginals::random(network.n_vertices(), l, &mut rng);
        let external_field = compute_external_field(&beliefs, &params.gamma_prime);
        let schedule_rng = ChaCha8Rng::seed_from_u64(rng.random());
        BpState {
            messages,
            beliefs,
            external_field,
            schedule_rng,
        }
    }

    /// Builds a state from explicit messages and beliefs.
    pub fn from_parts(
        network: &AttributedNetwork,
        params: &ModelParams,
        messages: Marginals,
        beliefs: Marginals,
        seed: u64,
    ) -> Result<Self> {
        let l = params.n_labels();
        if messages.n_labels() != l || beliefs.n_labels() != l {
            return Err(Error::validation("marginal width differs from label count"));
        }
        if messages.len() != network.n_slots() || beliefs.len() != network.n_vertices() {
            return Err(Error::validation("marginal table size does not fit the network"));
        }
        let external_field = compute_external_field(&beliefs, &params.gamma_prime);
        Ok(BpState {
            messages,
            beliefs,
            external_field,
            schedule_rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn n_labels(&self) -> usize {
        self.beliefs.n_labels()
    }

    pub fn messages(&self) -> &Marginals {
        &self.messages
    }

    pub fn message(&self, slot: usize) -> &[f64] {
        self.messages.row(slot)
    }

    pub fn beliefs(&self) -> &Marginals {
        &self.beliefs
    }

    pub fn belief(&self, v: usize) -> &[f64] {
        self.beliefs.row(v)
    }

    pub fn external_field(&self) -> &[f64] {
        &self.external_field
    }

    /// Recomputes the accumulator from the current beliefs, e.g. after the
    /// affinity matrix changed.
    pub fn refresh_external_field(&mut self, params: &ModelParams) {
        self.external_field = compute_external_field(&self.beliefs, &params.gamma_prime);
    }

    /// The updated message for slot `j -> i`, without writing it back.
    pub fn update_message(
        &self,
        slot: usize,
        network: &AttributedNetwork,
        params: &ModelParams,
    ) -> Vec<f64> {
        let j = network.source(slot);
        let mut scratch = Scratch::new(self.n_labels());
        scratch.load_vertex(
            j,
            network,
            params,
            &self.messages,
            &self.beliefs,
            &self.external_field,
        );
        let mut out = vec![0.0; self.n_labels()];
        scratch.message(slot - network.slots(j).start, &mut out);
        out
    }

    /// The belief of vertex `i` implied by the current messages.
    pub fn compute_vertex_belief(
        &self,
        i: usize,
        network: &AttributedNetwork,
        params: &ModelParams,
    ) -> Vec<f64> {
        let mut scratch = Scratch::new(self.n_labels());
        scratch.load_vertex(
            i,
            network,
            params,
            &self.messages,
            &self.beliefs,
            &self.external_field,
        );
        let mut out = vec![0.0; self.n_labels()];
        scratch.belief(network.degree(i), &mut out);
        out
    }

    /// `b_ij(x_i, x_j) ~ G'[x_i, x_j] m_{i->j}(x_i) m_{j->i}(x_j)`.
    pub fn compute_edge_belief(
        &self,
        (i, j): (usize, usize),
        network: &AttributedNetwork,
        params: &ModelParams,
    ) -> Result<EdgeBelief> {
        let slot = network
            .slot_between(i, j)
            .ok_or_else(|| Error::Contract(format!("({i}, {j}) is not an edge")))?;
        let mut out = SquareMatrix::zeros(self.n_labels());
        edge_belief_into(
            &params.gamma_prime,
            self.messages.row(slot),
            self.messages.row(network.reverse(slot)),
            &mut out,
            1.0,
        );
        Ok(EdgeBelief(out))
    }

    /// `sum_{ij in E} b_ij(l, s)`, each edge oriented with `i < j`.
    pub fn edge_belief_totals(
        &self,
        network: &AttributedNetwork,
        params: &ModelParams,
    ) -> SquareMatrix {
        let mut total = SquareMatrix::zeros(self.n_labels());
        for &(i, j) in network.edges() {
            let slot = network.slot_between(i, j).expect("edge has a slot");
            edge_belief_into(
                &params.gamma_prime,
                self.messages.row(slot),
                self.messages.row(network.reverse(slot)),
                &mut total,
                1.0,
            );
        }
        total
    }

    /// One pass over every directed message, then all vertex beliefs, then
    /// the external field. Returns the largest change of any message entry.
    pub fn sweep(
        &mut self,
        network: &AttributedNetwork,
        params: &ModelParams,
        config: &BpConfig,
    ) -> f64 {
        let l = self.n_labels();
        let n = network.n_vertices();
        let lambda = config.damping;
        let mut max_delta = 0.0f64;

        match config.schedule {
            Schedule::Fixed | Schedule::RandomPermutation => {
                let mut order: Vec<usize> = (0..n).collect();
                if config.schedule == Schedule::RandomPermutation {
                    order.shuffle(&mut self.schedule_rng);
                }
                let mut scratch = Scratch::new(l);
                let mut fresh = vec![0.0; l];
                for &j in &order {
                    scratch.load_vertex(
                        j,
                        network,
                        params,
                        &self.messages,
                        &self.beliefs,
                        &self.external_field,
                    );
                    // Messages leaving j never feed back into j's own inputs,
                    // so updating j's slots one after another equals updating
                    // them from a single load.
                    for (p, s) in network.slots(j).enumerate() {
                        scratch.message(p, &mut fresh);
                        let old = self.messages.row_mut(s);
                        for t in 0..l {
                            let v = (1.0 - lambda) * fresh[t] + lambda * old[t];
                            max_delta = max_delta.max((v - old[t]).abs());
                            old[t] = v;
                        }
                    }
                }
            }
            Schedule::Synchronous => {
                let messages = &self.messages;
                let beliefs = &self.beliefs;
                let field = &self.external_field;
                let rows: Vec<(usize, Vec<f64>)> = (0..n)
                    .into_par_iter()
                    .map_init(
                        || Scratch::new(l),
                        |scratch, j| {
                            scratch.load_vertex(j, network, params, messages, beliefs, field);
                            let mut out = vec![0.0; network.degree(j) * l];
                            for p in 0..network.degree(j) {
                                scratch.message(p, &mut out[p * l..(p + 1) * l]);
                            }
                            (j, out)
                        },
                    )
                    .collect();
                for (j, out) in rows {
                    for (p, s) in network.slots(j).enumerate() {
                        let old = self.messages.row_mut(s);
                        for t in 0..l {
                            let v = (1.0 - lambda) * out[p * l + t] + lambda * old[t];
                            max_delta = max_delta.max((v - old[t]).abs());
                            old[t] = v;
                        }
                    }
                }
            }
        }

        self.recompute_beliefs(network, params);
        max_delta
    }

    /// Recomputes every vertex belief from the current messages (all against
    /// the same belief snapshot), then refreshes the external field.
    pub fn recompute_beliefs(&mut self, network: &AttributedNetwork, params: &ModelParams) {
        let l = self.n_labels();
        let mut next = self.beliefs.clone();
        let mut scratch = Scratch::new(l);
        for i in 0..network.n_vertices() {
            scratch.load_vertex(
                i,
                network,
                params,
                &self.messages,
                &self.beliefs,
                &self.external_field,
            );
            scratch.belief(network.degree(i), next.row_mut(i));
        }
        self.beliefs = next;
        self.refresh_external_field(params);
    }
}

/// Adds `weight * normalized(G' (outer) m_i m_j)` into `out`. When every
/// product vanishes the plain outer product is used instead.
fn edge_belief_into(
    gamma_prime: &SquareMatrix,
    m_i: &[f64],
    m_j: &[f64],
    out: &mut SquareMatrix,
    weight: f64,
) {
    let l = m_i.len();
    let mut z = 0.0;
    for a in 0..l {
        for b in 0..l {
            z += gamma_prime[(a, b)] * m_i[a] * m_j[b];
        }
    }
    for a in 0..l {
        for b in 0..l {
            let p = if z > 0.0 {
                gamma_prime[(a, b)] * m_i[a] * m_j[b] / z
            } else {
                m_i[a] * m_j[b]
            };
            out[(a, b)] += weight * p;
        }
    }
}

/// Maximum-posterior-marginal labels; ties go to the smallest label.
pub fn mpm_labels(beliefs: &Marginals) -> GroundTruth {
    let labels = beliefs
        .rows()
        .map(|row| {
            let mut best = 0;
            for (l, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = l;
                }
            }
            best
        })
        .collect();
    GroundTruth::new(labels, beliefs.n_labels()).expect("argmax is below the label count")
}
