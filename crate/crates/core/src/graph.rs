//! Undirected simple graphs with one real attribute per vertex.
//!
//! Adjacency is stored in CSR form. Every undirected edge `{i, j}` owns two
//! directed slots, `i -> j` in row `i` and `j -> i` in row `j`, and each slot
//! knows the index of its reverse. Belief propagation keeps one message per
//! directed slot.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// An undirected simple graph with per-vertex attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedNetwork {
    n_vertices: usize,
    /// Undirected edges as `(i, j)` with `i < j`, sorted lexicographically.
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    reverse: Vec<usize>,
    slot_edge: Vec<usize>,
    attributes: Vec<f64>,
    /// Original vertex ids as they appeared in the input file.
    ids: Vec<i64>,
}

impl AttributedNetwork {
    /// Builds a network from an edge list. Pairs may be given in either
    /// orientation; self-loops and repeated pairs are rejected.
    pub fn from_edges(n_vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        let mut canon = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::validation(format!(
                    "edge ({a}, {b}) references a vertex outside 0..{n_vertices}"
                )));
            }
            if a == b {
                return Err(Error::validation(format!("self-loop on vertex {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::validation(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
            canon.push(e);
        }
        canon.sort_unstable();
        Ok(Self::from_canonical(n_vertices, canon))
    }

    /// `edges` must be sorted, deduplicated and oriented `i < j`.
    pub(crate) fn from_canonical(n_vertices: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut degree = vec![0usize; n_vertices];
        for &(i, j) in &edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = Vec::with_capacity(n_vertices + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let n_slots = 2 * edges.len();
        let mut targets = vec![0usize; n_slots];
        let mut slot_edge = vec![0usize; n_slots];
        let mut cursor = offsets[..n_vertices].to_vec();
        // Edges are sorted by (i, j), so filling row i in edge order yields
        // ascending targets for the `i -> j` half. The `j -> i` half arrives
        // in ascending i as well, but interleaves with the first half, so
        // rows are sorted afterwards.
        for (e, &(i, j)) in edges.iter().enumerate() {
            targets[cursor[i]] = j;
            slot_edge[cursor[i]] = e;
            cursor[i] += 1;
            targets[cursor[j]] = i;
            slot_edge[cursor[j]] = e;
            cursor[j] += 1;
        }
        for v in 0..n_vertices {
            let (lo, hi) = (offsets[v], offsets[v + 1]);
            let mut row: Vec<(usize, usize)> = targets[lo..hi]
                .iter()
                .copied()
                .zip(slot_edge[lo..hi].iter().copied())
                .collect();
            row.sort_unstable();
            for (k, (t, e)) in row.into_iter().enumerate() {
                targets[lo + k] = t;
                slot_edge[lo + k] = e;
            }
        }
        let mut reverse = vec![0usize; n_slots];
        for v in 0..n_vertices {
            for s in offsets[v]..offsets[v + 1] {
                let t = targets[s];
                let row = &targets[offsets[t]..offsets[t + 1]];
                let k = row
                    .binary_search(&v)
                    .expect("adjacency rows are mutually consistent");
                reverse[s] = offsets[t] + k;
            }
        }
        AttributedNetwork {
            n_vertices,
            edges,
            offsets,
            targets,
            reverse,
            slot_edge,
            attributes: vec![0.0; n_vertices],
            ids: (0..n_vertices as i64).collect(),
        }
    }

    /// Replaces the attribute vector. All values must be finite.
    pub fn with_attributes(mut self, attributes: Vec<f64>) -> Result<Self> {
        self.set_attributes(attributes)?;
        Ok(self)
    }

    pub fn set_attributes(&mut self, attributes: Vec<f64>) -> Result<()> {
        if attributes.len() != self.n_vertices {
            return Err(Error::validation(format!(
                "expected {} attribute values, got {}",
                self.n_vertices,
                attributes.len()
            )));
        }
        if let Some(i) = attributes.iter().position(|d| !d.is_finite()) {
            return Err(Error::validation(format!(
                "attribute of vertex {i} is not finite"
            )));
        }
        self.attributes = attributes;
        Ok(())
    }

    pub(crate) fn with_ids(mut self, ids: Vec<i64>) -> Self {
        debug_assert_eq!(ids.len(), self.n_vertices);
        self.ids = ids;
        self
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of directed slots, `2 |E|`.
    pub fn n_slots(&self) -> usize {
        self.targets.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn attributes(&self) -> &[f64] {
        &self.attributes
    }

    /// Original file ids, indexed by dense vertex index.
    pub fn ids(&self) -> &[i64] {
        &self.ids
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Sorted neighbors of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Directed slots leaving `v`; slot `s` points at `target(s)`.
    pub fn slots(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    pub fn target(&self, slot: usize) -> usize {
        self.targets[slot]
    }

    /// The slot carrying the opposite direction of `slot`.
    pub fn reverse(&self, slot: usize) -> usize {
        self.reverse[slot]
    }

    /// Undirected edge index of a directed slot.
    pub fn slot_edge(&self, slot: usize) -> usize {
        self.slot_edge[slot]
    }

    /// Source vertex of a slot, found by binary search over row offsets.
    pub fn source(&self, slot: usize) -> usize {
        self.offsets.partition_point(|&o| o <= slot) - 1
    }

    /// The slot `from -> to`, if the two vertices are adjacent.
    pub fn slot_between(&self, from: usize, to: usize) -> Option<usize> {
        self.neighbors(from)
            .binary_search(&to)
            .ok()
            .map(|k| self.offsets[from] + k)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n_vertices && b < self.n_vertices && self.slot_between(a, b).is_some()
    }
}

/// Community assignment of every vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    labels: Vec<usize>,
    n_communities: usize,
}

impl GroundTruth {
    pub fn new(labels: Vec<usize>, n_communities: usize) -> Result<Self> {
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= n_communities) {
            return Err(Error::validation(format!(
                "label {l} of vertex {i} is not below {n_communities}"
            )));
        }
        Ok(GroundTruth {
            labels,
            n_communities,
        })
    }

    /// Infers the community count as `max label + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let n_communities = labels.iter().max().map_or(0, |m| m + 1);
        GroundTruth {
            labels,
            n_communities,
        }
    }

    /// Equal-sized consecutive blocks: vertex `v` gets label `v / block_size`.
    pub fn blocks(n_blocks: usize, block_size: usize) -> Self {
        GroundTruth {
            labels: (0..n_blocks * block_size).map(|v| v / block_size).collect(),
            n_communities: n_blocks,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_communities(&self) -> usize {
        self.n_communities
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }
}
