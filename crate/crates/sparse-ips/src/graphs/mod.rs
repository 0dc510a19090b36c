//! Finite rooted graphs, random graph generators, and local structure.
//!
//! A [`RootedGraph`] is a simple undirected graph stored as sorted
//! adjacency lists with an optional distinguished root. Generators cover
//! Erdős–Rényi graphs, cycles, cliques, truncated regular trees, and
//! unimodular Galton–Watson trees driven by an [`OffspringDistribution`].
//!
//! ```
//! use rand::SeedableRng;
//! use sparse_ips::graphs::{sample_ugw, OffspringDistribution, RootedGraph, UgwTruncation};
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let g = RootedGraph::erdos_renyi(50, 3.0 / 50.0, &mut rng).unwrap();
//! assert_eq!(g.len(), 50);
//!
//! let rho = OffspringDistribution::poisson(3.0, 40).unwrap();
//! let trunc = UgwTruncation { max_depth: 4, max_vertices: 10_000 };
//! let t = sample_ugw(&rho, trunc, &mut rng).unwrap();
//! assert_eq!(t.graph.root(), Some(0));
//! ```
//! Local-neighborhood analysis (balls, rooted-isomorphism canonical codes,
//! neighborhood class frequencies) lives in [`canonical`] and the helpers
//! here.

mod canonical;

pub use canonical::{canonical_code, NeighborhoodClass, GENERAL_GRAPH_CAP};

use std::collections::HashMap;
use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};

/// Hard cap on generated vertex counts; guards against runaway tree growth.
pub const VERTEX_CAP: usize = 20_000_000;

/// Finite simple undirected graph with sorted adjacency lists and an
/// optional root vertex.
///
/// Immutable after construction; shared freely across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedGraph {
    adjacency: Vec<Vec<u32>>,
    root: Option<u32>,
}

impl RootedGraph {
    /// Build from an edge list. Duplicate edges and self-loops are rejected.
    pub fn from_edges(n: usize, edges: &[(u32, u32)], root: Option<u32>) -> Result<Self> {
        if n > VERTEX_CAP {
            return Err(Error::SizeCap { got: n, cap: VERTEX_CAP });
        }
        if let Some(r) = root {
            if r as usize >= n {
                return Err(Error::InvalidInput(format!("root {r} >= n {n}")));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at {u}")));
            }
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidInput(format!("edge ({u},{v}) out of range")));
            }
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for (v, nbrs) in adjacency.iter_mut().enumerate() {
            nbrs.sort_unstable();
            if nbrs.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput(format!("duplicate edge at vertex {v}")));
            }
        }
        Ok(Self { adjacency, root })
    }

    /// Number of vertices.
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Number of edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn root(&self) -> Option<usize> {
        self.root.map(|r| r as usize)
    }

    pub fn with_root(mut self, root: Option<u32>) -> Result<Self> {
        if let Some(r) = root {
            if r as usize >= self.len() {
                return Err(Error::InvalidInput(format!("root {r} out of range")));
            }
        }
        self.root = root;
        Ok(self)
    }

    /// Whether the graph is connected (the empty graph counts as connected).
    pub fn is_connected(&self) -> bool {
        if self.is_empty() {
            return true;
        }
        let comp = component_vertices(self, 0);
        comp.len() == self.len()
    }

    /// Erdős–Rényi graph G(n, p) with a uniformly random root.
    ///
    /// Uses geometric edge skipping, so generation is O(n + |E|) rather
    /// than O(n²) for sparse p.
    pub fn erdos_renyi<R: Rng>(n: usize, p: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("p = {p} outside [0,1]")));
        }
        let mut edges: Vec<(u32, u32)> = Vec::new();
        if n >= 2 && p > 0.0 {
            if p >= 1.0 {
                for u in 0..n as u32 {
                    for v in (u + 1)..n as u32 {
                        edges.push((u, v));
                    }
                }
            } else {
                // Batagelj–Brandes skip sampling: walk the pairs (w, u)
                // with w < u, jumping ahead by Geometric(p) between edges
                let log1mp = (1.0 - p).ln();
                let mut u: i64 = 1;
                let mut w: i64 = -1;
                while (u as usize) < n {
                    let x: f64 = rng.gen::<f64>();
                    let cap = n as i64 * n as i64;
                    let skip = (((1.0 - x).ln() / log1mp).floor()).min(cap as f64) as i64;
                    w += 1 + skip.clamp(0, cap);
                    while w >= u && (u as usize) < n {
                        w -= u;
                        u += 1;
                    }
                    if (u as usize) < n {
                        edges.push((w as u32, u as u32));
                    }
                }
            }
        }
        let root = if n > 0 {
            Some(rng.gen_range(0..n as u32))
        } else {
            None
        };
        Self::from_edges(n, &edges, root)
    }

    /// Complete graph K_n rooted at 0.
    pub fn complete(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("complete graph needs n >= 1".into()));
        }
        let mut edges = Vec::with_capacity(n * (n - 1) / 2);
        for u in 0..n as u32 {
            for v in (u + 1)..n as u32 {
                edges.push((u, v));
            }
        }
        Self::from_edges(n, &edges, Some(0))
    }

    /// Path 0-1-…-(n−1) rooted at 0.
    pub fn path(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("path needs n >= 1".into()));
        }
        let edges: Vec<(u32, u32)> = (0..n as u32 - 1).map(|u| (u, u + 1)).collect();
        Self::from_edges(n, &edges, Some(0))
    }

    /// Cycle on n vertices rooted at 0 (n = 1 and n = 2 degenerate to a
    /// point and a single edge).
    pub fn cycle(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("cycle needs n >= 1".into()));
        }
        let mut edges = Vec::with_capacity(n);
        for u in 0..n as u32 {
            let v = ((u as usize + 1) % n) as u32;
            if u < v {
                edges.push((u, v));
            } else if u > v {
                edges.push((v, u));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Self::from_edges(n, &edges, Some(0))
    }

    /// Truncated rooted κ-regular tree: the root has `kappa` children and
    /// every internal vertex has `kappa − 1` children, down to `depth`
    /// generations. Depth 0 is a single vertex.
    pub fn regular_tree(kappa: usize, depth: usize) -> Result<Self> {
        if kappa < 2 {
            return Err(Error::InvalidInput(format!("kappa = {kappa} < 2")));
        }
        let mut edges: Vec<(u32, u32)> = Vec::new();
        let mut frontier: Vec<u32> = vec![0];
        let mut next_id: u64 = 1;
        for gen in 0..depth {
            let mut next = Vec::new();
            for &v in &frontier {
                let children = if gen == 0 { kappa } else { kappa - 1 };
                for _ in 0..children {
                    if next_id as usize > VERTEX_CAP {
                        return Err(Error::SizeCap {
                            got: next_id as usize,
                            cap: VERTEX_CAP,
                        });
                    }
                    let c = next_id as u32;
                    next_id += 1;
                    edges.push((v, c));
                    next.push(c);
                }
            }
            frontier = next;
        }
        Self::from_edges(next_id as usize, &edges, Some(0))
    }

    /// Induced subgraph on the vertices at graph distance ≤ r from `v`,
    /// rooted at `v` (relabeled in BFS discovery order).
    pub fn ball(&self, v: usize, r: usize) -> Result<Self> {
        if v >= self.len() {
            return Err(Error::InvalidInput(format!("vertex {v} out of range")));
        }
        let mut dist: HashMap<u32, usize> = HashMap::new();
        let mut order: Vec<u32> = vec![v as u32];
        dist.insert(v as u32, 0);
        let mut queue = VecDeque::from([v as u32]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            if du == r {
                continue;
            }
            for &w in self.neighbors(u as usize) {
                if !dist.contains_key(&w) {
                    dist.insert(w, du + 1);
                    order.push(w);
                    queue.push_back(w);
                }
            }
        }
        self.induced(&order)
    }

    /// The connected component of a uniformly chosen vertex, rooted there.
    pub fn component_of_uniform_root<R: Rng>(&self, rng: &mut R) -> Result<Self> {
        if self.is_empty() {
            return Err(Error::InvalidInput("empty graph has no root".into()));
        }
        let v = rng.gen_range(0..self.len());
        let order = component_vertices(self, v);
        self.induced(&order)
    }

    /// Induced subgraph on `order`, rooted at `order[0]`, vertices
    /// relabeled by position in `order`.
    fn induced(&self, order: &[u32]) -> Result<Self> {
        let relabel: HashMap<u32, u32> = order
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as u32))
            .collect();
        let mut edges = Vec::new();
        for (i, &v) in order.iter().enumerate() {
            for &w in self.neighbors(v as usize) {
                if let Some(&j) = relabel.get(&w) {
                    if (i as u32) < j {
                        edges.push((i as u32, j));
                    }
                }
            }
        }
        Self::from_edges(order.len(), &edges, Some(0))
    }

    /// Write as edge-list text: `n <count> root <index>` then `u v` lines
    /// with u < v. A rootless graph writes `root -`.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        match self.root {
            Some(r) => writeln!(w, "n {} root {}", self.len(), r)?,
            None => writeln!(w, "n {} root -", self.len())?,
        }
        for u in 0..self.len() {
            for &v in self.neighbors(u) {
                if (u as u32) < v {
                    writeln!(w, "{u} {v}")?;
                }
            }
        }
        Ok(())
    }

    /// Parse the edge-list text format produced by [`write_edge_list`].
    ///
    /// [`write_edge_list`]: RootedGraph::write_edge_list
    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty edge-list input".into()))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "n" || parts[2] != "root" {
            return Err(Error::InvalidInput(format!("bad header: {header}")));
        }
        let n: usize = parts[1]
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad vertex count: {}", parts[1])))?;
        let root = if parts[3] == "-" {
            None
        } else {
            Some(
                parts[3]
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad root: {}", parts[3])))?,
            )
        };
        let mut edges = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (u, v) = (it.next(), it.next());
            match (u, v) {
                (Some(u), Some(v)) => {
                    let u: u32 = u
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("bad edge line: {line}")))?;
                    let v: u32 = v
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("bad edge line: {line}")))?;
                    edges.push((u, v));
                }
                _ => return Err(Error::InvalidInput(format!("bad edge line: {line}"))),
            }
        }
        Self::from_edges(n, &edges, root)
    }
}

/// Vertices of the component containing `v`, in BFS order from `v`.
fn component_vertices(g: &RootedGraph, v: usize) -> Vec<u32> {
    let mut seen = vec![false; g.len()];
    seen[v] = true;
    let mut order = vec![v as u32];
    let mut queue = VecDeque::from([v as u32]);
    while let Some(u) = queue.pop_front() {
        for &w in g.neighbors(u as usize) {
            if !seen[w as usize] {
                seen[w as usize] = true;
                order.push(w);
                queue.push_back(w);
            }
        }
    }
    order
}

/// Probability distribution over offspring counts {0, 1, …, k_max}.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDistribution {
    probs: Vec<f64>,
}

impl OffspringDistribution {
    /// Tolerance for the sum-to-one check.
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("empty offspring distribution".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput("negative or non-finite probability".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "offspring probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Point mass at `k`.
    pub fn delta(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self { probs }
    }

    /// Poisson(c) truncated at `k_max` and renormalized.
    pub fn poisson(c: f64, k_max: usize) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidInput(format!("bad Poisson mean {c}")));
        }
        let mut probs = Vec::with_capacity(k_max + 1);
        let mut p = (-c).exp();
        for k in 0..=k_max {
            probs.push(p);
            p *= c / (k as f64 + 1.0);
        }
        let sum: f64 = probs.iter().sum();
        for q in &mut probs {
            *q /= sum;
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p)
            .sum()
    }

    /// Size-biased shift ρ̂(k) = (k+1)ρ(k+1) / Σ_n nρ(n).
    ///
    /// Fixed exactly by Poisson distributions; a point mass δ_κ maps to
    /// δ_{κ−1}.
    pub fn hat(&self) -> Result<Self> {
        let m = self.mean();
        if m <= 0.0 {
            return Err(Error::InvalidInput(
                "size-biased shift needs strictly positive mean".into(),
            ));
        }
        let k_max = self.probs.len() - 1;
        let mut probs = Vec::with_capacity(k_max.max(1));
        for k in 0..k_max {
            probs.push((k as f64 + 1.0) * self.probs[k + 1] / m);
        }
        if probs.is_empty() {
            probs.push(1.0);
        }
        Ok(Self { probs })
    }

    /// Draw one offspring count by inverse CDF.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.probs.len() - 1
    }
}

/// Truncation limits for unimodular Galton–Watson sampling.
#[derive(Debug, Clone, Copy)]
pub struct UgwTruncation {
    pub max_depth: usize,
    pub max_vertices: usize,
}

impl Default for UgwTruncation {
    fn default() -> Self {
        Self {
            max_depth: 12,
            max_vertices: 1_000_000,
        }
    }
}

/// A sampled UGW tree together with a flag recording whether generation
/// was cut off by the truncation limits.
#[derive(Debug, Clone)]
pub struct UgwSample {
    pub graph: RootedGraph,
    pub truncated: bool,
}

/// Sample a unimodular Galton–Watson tree UGW(ρ): the root draws its
/// degree from ρ, every later vertex draws its offspring count from the
/// size-biased shift ρ̂.
pub fn sample_ugw<R: Rng>(
    rho: &OffspringDistribution,
    trunc: UgwTruncation,
    rng: &mut R,
) -> Result<UgwSample> {
    if trunc.max_vertices == 0 {
        return Err(Error::InvalidInput("max_vertices must be positive".into()));
    }
    let hat = if rho.mean() > 0.0 { Some(rho.hat()?) } else { None };
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut frontier: Vec<u32> = vec![0];
    let mut n: usize = 1;
    let mut truncated = false;
    for depth in 0.. {
        if frontier.is_empty() {
            break;
        }
        if depth == trunc.max_depth {
            truncated = true;
            break;
        }
        let mut next = Vec::new();
        'gen: for &v in &frontier {
            let k = if depth == 0 {
                rho.sample(rng)
            } else {
                hat.as_ref().map_or(0, |h| h.sample(rng))
            };
            for _ in 0..k {
                if n >= trunc.max_vertices {
                    truncated = true;
                    break 'gen;
                }
                let c = n as u32;
                n += 1;
                edges.push((v, c));
                next.push(c);
            }
        }
        if truncated {
            break;
        }
        frontier = next;
    }
    Ok(UgwSample {
        graph: RootedGraph::from_edges(n, &edges, Some(0))?,
        truncated,
    })
}

/// Frequencies, over all n choices of root, of the rooted-isomorphism
/// class of the radius-r ball.
pub fn local_nbhd_distribution(
    g: &RootedGraph,
    r: usize,
) -> Result<HashMap<NeighborhoodClass, f64>> {
    if g.is_empty() {
        return Err(Error::InvalidInput("empty graph".into()));
    }
    let mut counts: HashMap<NeighborhoodClass, usize> = HashMap::new();
    for v in 0..g.len() {
        let ball = g.ball(v, r)?;
        let class = canonical_code(&ball)?;
        *counts.entry(class).or_insert(0) += 1;
    }
    let n = g.len() as f64;
    Ok(counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / n))
        .collect())
}

#[cfg(test)]
mod tests;
