//! Independent reference implementations used by the integration tests.
//!
//! Nothing here reuses the library's accumulators or log-domain helpers:
//! sums over non-neighbors are explicit, products are taken in probability
//! space, and maximizers are generic numerical routines applied to the
//! library's objective as a black box.
#![allow(dead_code)]

use std::collections::HashSet;
use std::f64::consts::PI;

use asbm::bp::Marginals;
use asbm::{AttributedNetwork, GroundTruth, ModelParams, SquareMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi graph with standard-normal-ish attributes around `label * 3`.
pub fn random_network(n: usize, p: f64, n_labels: usize, rng: &mut ChaCha8Rng) -> AttributedNetwork {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let d = (0..n)
        .map(|_| 3.0 * rng.random_range(0..n_labels) as f64 + 2.0 * (rng.random::<f64>() - 0.5))
        .collect();
    AttributedNetwork::from_edges(n, &edges)
        .unwrap()
        .with_attributes(d)
        .unwrap()
}

pub fn random_params(n_labels: usize, n_vertices: usize, rng: &mut ChaCha8Rng) -> ModelParams {
    let raw: Vec<f64> = (0..n_labels).map(|_| 0.2 + rng.random::<f64>()).collect();
    let z: f64 = raw.iter().sum();
    let mut g = SquareMatrix::zeros(n_labels);
    for a in 0..n_labels {
        for b in a..n_labels {
            let v = rng.random::<f64>() * (n_vertices as f64 / 2.0).min(20.0) + 0.1;
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    ModelParams {
        gamma: raw.iter().map(|x| x / z).collect(),
        gamma_prime: g,
        mu: (0..n_labels).map(|l| 3.0 * l as f64 + rng.random::<f64>() - 0.5).collect(),
        sigma: (0..n_labels).map(|_| 0.8 + rng.random::<f64>()).collect(),
    }
}

pub fn random_marginals(rows: usize, n_labels: usize, rng: &mut ChaCha8Rng) -> Marginals {
    let rows: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..n_labels).map(|_| rng.random::<f64>() + 1e-3).collect())
        .collect();
    Marginals::from_rows(&rows)
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let z: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= z);
    v
}

/// `gamma_l * N(d; mu_l, sigma_l)` in probability space.
pub fn phi(d: f64, params: &ModelParams) -> Vec<f64> {
    (0..params.n_labels())
        .map(|l| {
            let (m, s) = (params.mu[l], params.sigma[l]);
            params.gamma[l] * (-(d - m) * (d - m) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
        })
        .collect()
}

pub fn edge_set(net: &AttributedNetwork) -> HashSet<(usize, usize)> {
    net.edges()
        .iter()
        .flat_map(|&(i, j)| [(i, j), (j, i)])
        .collect()
}

/// `sum_{k : jk not an edge, k != j} sum_s G'[l, s] b_k(s)` by direct summation.
pub fn direct_non_neighbor_field(
    j: usize,
    net: &AttributedNetwork,
    gamma_prime: &SquareMatrix,
    beliefs: &Marginals,
) -> Vec<f64> {
    let edges = edge_set(net);
    let l = gamma_prime.dim();
    let mut out = vec![0.0; l];
    for k in 0..net.n_vertices() {
        if k == j || edges.contains(&(j, k)) {
            continue;
        }
        for a in 0..l {
            for s in 0..l {
                out[a] += gamma_prime[(a, s)] * beliefs.row(k)[s];
            }
        }
    }
    out
}

/// Message and belief rules written out term by term. `messages[(k, j)]`
/// is the message from `k` to `j`, a distribution over `x_k`.
pub struct LiteralBp<'a> {
    pub net: &'a AttributedNetwork,
    pub params: &'a ModelParams,
    pub edges: HashSet<(usize, usize)>,
}

impl<'a> LiteralBp<'a> {
    pub fn new(net: &'a AttributedNetwork, params: &'a ModelParams) -> Self {
        LiteralBp {
            net,
            params,
            edges: edge_set(net),
        }
    }

    fn neighbors(&self, j: usize) -> Vec<usize> {
        (0..self.net.n_vertices())
            .filter(|&k| self.edges.contains(&(j, k)))
            .collect()
    }

    fn unnormalized(
        &self,
        j: usize,
        skip: Option<usize>,
        message: &dyn Fn(usize, usize) -> Vec<f64>,
        beliefs: &Marginals,
    ) -> Vec<f64> {
        let n = self.net.n_vertices() as f64;
        let g = &self.params.gamma_prime;
        let l = self.params.n_labels();
        let f = phi(self.net.attributes()[j], self.params);
        let field = direct_non_neighbor_field(j, self.net, g, beliefs);
        let mut out: Vec<f64> = (0..l).map(|a| f[a] * (-field[a] / n).exp()).collect();
        for k in self.neighbors(j) {
            if Some(k) == skip {
                continue;
            }
            let m = message(k, j);
            for a in 0..l {
                out[a] *= (0..l).map(|s| g[(a, s)] * m[s]).sum::<f64>();
            }
        }
        out
    }

    pub fn message(
        &self,
        j: usize,
        i: usize,
        message: &dyn Fn(usize, usize) -> Vec<f64>,
        beliefs: &Marginals,
    ) -> Vec<f64> {
        normalized(self.unnormalized(j, Some(i), message, beliefs))
    }

    pub fn belief(
        &self,
        i: usize,
        message: &dyn Fn(usize, usize) -> Vec<f64>,
        beliefs: &Marginals,
    ) -> Vec<f64> {
        normalized(self.unnormalized(i, None, message, beliefs))
    }
}

/// A reference sweep: sources in ascending order, each outgoing message
/// recomputed from the latest messages, then every belief from the
/// pre-sweep belief snapshot. Messages are keyed by slot of `net`.
pub fn literal_sweep(
    net: &AttributedNetwork,
    params: &ModelParams,
    messages: &mut Marginals,
    beliefs: &mut Marginals,
) {
    let lit = LiteralBp::new(net, params);
    for j in 0..net.n_vertices() {
        for i in lit.neighbors(j) {
            let snapshot = messages.clone();
            let lookup = |a: usize, b: usize| snapshot.row(net.slot_between(a, b).unwrap()).to_vec();
            let m = lit.message(j, i, &lookup, beliefs);
            messages
                .row_mut(net.slot_between(j, i).unwrap())
                .copy_from_slice(&m);
        }
    }
    let lookup = |a: usize, b: usize| messages.row(net.slot_between(a, b).unwrap()).to_vec();
    let next: Vec<Vec<f64>> = (0..net.n_vertices())
        .map(|i| lit.belief(i, &lookup, beliefs))
        .collect();
    *beliefs = Marginals::from_rows(&next);
}

/// Best matching count over every relabeling of `pred`, by enumeration.
pub fn brute_force_hits(pred: &[usize], truth: &[usize], k: usize) -> usize {
    fn rec(pos: usize, used: &mut Vec<bool>, perm: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if pos == used.len() {
            f(perm);
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                perm.push(c);
                rec(pos + 1, used, perm, f);
                perm.pop();
                used[c] = false;
            }
        }
    }
    let mut best = 0;
    rec(0, &mut vec![false; k], &mut Vec::new(), &mut |perm| {
        let hits = pred.iter().zip(truth).filter(|(&p, &t)| perm[p] == t).count();
        best = best.max(hits);
    });
    best
}

/// Exact posterior over all `L^|V|` labelings of the block model with
/// Gaussian attributes (no sparse approximation). Returns the marginals
/// and the MAP labeling.
pub fn exact_posterior(net: &AttributedNetwork, params: &ModelParams) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = net.n_vertices();
    let l = params.n_labels();
    let edges = edge_set(net);
    let nf = n as f64;
    let mut marg = vec![vec![0.0; l]; n];
    let mut x = vec![0usize; n];
    let mut log_weights = Vec::new();
    let mut states = Vec::new();
    loop {
        let mut lw = 0.0;
        for i in 0..n {
            lw += phi(net.attributes()[i], params)[x[i]].ln();
            for j in i + 1..n {
                let p = params.gamma_prime[(x[i], x[j])] / nf;
                lw += if edges.contains(&(i, j)) { p.ln() } else { (1.0 - p).ln() };
            }
        }
        log_weights.push(lw);
        states.push(x.clone());
        // next labeling in base-L counting order
        let mut pos = 0;
        while pos < n {
            x[pos] += 1;
            if x[pos] < l {
                break;
            }
            x[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
    }
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut map = 0;
    for (s, &lw) in log_weights.iter().enumerate() {
        let w = (lw - max).exp();
        z += w;
        for i in 0..n {
            marg[i][states[s][i]] += w;
        }
        if lw > log_weights[map] {
            map = s;
        }
    }
    for row in &mut marg {
        row.iter_mut().for_each(|p| *p /= z);
    }
    (marg, states[map].clone())
}

/// Maximizer of a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if hi - lo < 1e-13 * (1.0 + hi.abs()) {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

/// Nelder–Mead minimization in two dimensions.
pub fn nelder_mead_2d(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: f64) -> [f64; 2] {
    let mut pts = [start, [start[0] + step, start[1]], [start[0], start[1] + step]];
    let mut vals = pts.map(&f);
    for _ in 0..20_000 {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let (b, m, w) = (idx[0], idx[1], idx[2]);
        let spread = (vals[w] - vals[b]).abs();
        let size = (0..2).map(|k| (pts[w][k] - pts[b][k]).abs().max((pts[m][k] - pts[b][k]).abs())).fold(0.0, f64::max);
        if size < 1e-12 && spread < 1e-14 {
            break;
        }
        let c = [(pts[b][0] + pts[m][0]) / 2.0, (pts[b][1] + pts[m][1]) / 2.0];
        let at = |t: f64| [c[0] + t * (pts[w][0] - c[0]), c[1] + t * (pts[w][1] - c[1])];
        let xr = at(-1.0);
        let fr = f(xr);
        if fr < vals[b] {
            let xe = at(-2.0);
            let fe = f(xe);
            if fe < fr {
                pts[w] = xe;
                vals[w] = fe;
            } else {
                pts[w] = xr;
                vals[w] = fr;
            }
        } else if fr < vals[m] {
            pts[w] = xr;
            vals[w] = fr;
        } else {
            let xc = if fr < vals[w] { at(-0.5) } else { at(0.5) };
            let fc = f(xc);
            if fc < vals[w].min(fr) {
                pts[w] = xc;
                vals[w] = fc;
            } else {
                for k in [m, w] {
                    pts[k] = [
                        pts[b][0] + 0.5 * (pts[k][0] - pts[b][0]),
                        pts[b][1] + 0.5 * (pts[k][1] - pts[b][1]),
                    ];
                    vals[k] = f(pts[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    pts[best]
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projected gradient ascent over the simplex with a numerical gradient and
/// backtracking line search.
pub fn simplex_ascent(f: impl Fn(&[f64]) -> f64, start: &[f64]) -> Vec<f64> {
    let mut x = start.to_vec();
    let mut fx = f(&x);
    let mut step = 1e-3;
    for _ in 0..20_000 {
        let h = 1e-7;
        let grad: Vec<f64> = (0..x.len())
            .map(|k| {
                let mut a = x.clone();
                let mut b = x.clone();
                a[k] += h;
                b[k] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            })
            .collect();
        let mut moved = false;
        while step > 1e-18 {
            let y = project_simplex(&x.iter().zip(&grad).map(|(a, g)| a + step * g).collect::<Vec<_>>());
            let fy = f(&y);
            if fy > fx {
                let change = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                x = y;
                fx = fy;
                step *= 2.0;
                moved = change > 1e-13;
                break;
            }
            step /= 2.0;
        }
        if !moved {
            break;
        }
    }
    x
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn labels(v: &[usize], k: usize) -> GroundTruth {
    GroundTruth::new(v.to_vec(), k).unwrap()
}
