//! Canonical codes for connected rooted graphs up to rooted isomorphism.
//!
//! Trees get an AHU-style bottom-up canonical labeling (exact, near-linear
//! time, any size). General connected graphs are handled exactly up to
//! [`GENERAL_GRAPH_CAP`] vertices by individualization-refinement with
//! backtracking: the code is the lexicographically minimal adjacency
//! bit-matrix over all root-preserving relabelings compatible with the
//! refined partition.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graphs::RootedGraph;

/// Size cap for the general-graph (non-tree) canonicalization path.
pub const GENERAL_GRAPH_CAP: usize = 32;

/// Isomorphism class of a connected rooted graph: equal codes iff
/// rooted-isomorphic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NeighborhoodClass {
    code: Vec<u8>,
}

impl NeighborhoodClass {
    pub fn code(&self) -> &[u8] {
        &self.code
    }
}

/// Canonical code of a connected rooted graph.
///
/// Errors if the graph is disconnected, rootless, or a non-tree above the
/// size cap.
pub fn canonical_code(g: &RootedGraph) -> Result<NeighborhoodClass> {
    let root = g
        .root()
        .ok_or_else(|| Error::InvalidInput("canonical code needs a root".into()))?;
    if !g.is_connected() {
        return Err(Error::InvalidInput(
            "canonical code needs a connected graph".into(),
        ));
    }
    let n = g.len();
    let is_tree = g.edge_count() == n - 1;
    let code = if is_tree {
        let mut out = vec![b'T'];
        out.extend(ahu_code(g, root));
        out
    } else {
        if n > GENERAL_GRAPH_CAP {
            return Err(Error::SizeCap {
                got: n,
                cap: GENERAL_GRAPH_CAP,
            });
        }
        let mut out = vec![b'G', n as u8];
        out.extend(minimal_adjacency_code(g, root));
        out
    };
    Ok(NeighborhoodClass { code })
}

/// AHU canonical string of a rooted tree: `(` children-codes-sorted `)`.
fn ahu_code(g: &RootedGraph, root: usize) -> Vec<u8> {
    // iterative post-order to avoid recursion depth limits
    let n = g.len();
    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![root];
    let mut seen = vec![false; n];
    seen[root] = true;
    while let Some(v) = stack.pop() {
        order.push(v);
        for &w in g.neighbors(v) {
            let w = w as usize;
            if !seen[w] {
                seen[w] = true;
                parent[w] = v;
                stack.push(w);
            }
        }
    }
    let mut codes: Vec<Vec<Vec<u8>>> = vec![Vec::new(); n];
    let mut result = Vec::new();
    for &v in order.iter().rev() {
        let mut children = std::mem::take(&mut codes[v]);
        children.sort();
        let mut code = Vec::with_capacity(2 + children.iter().map(Vec::len).sum::<usize>());
        code.push(b'(');
        for c in children {
            code.extend(c);
        }
        code.push(b')');
        if v == root {
            result = code;
        } else {
            codes[parent[v]].push(code);
        }
    }
    result
}

/// Ordered partition of the vertex set into cells; the root always sits in
/// its own leading cell.
type Partition = Vec<Vec<usize>>;

/// Lexicographically minimal adjacency bit-rows over root-preserving
/// relabelings consistent with iterated degree refinement.
fn minimal_adjacency_code(g: &RootedGraph, root: usize) -> Vec<u8> {
    let n = g.len();
    let mut initial: Partition = Vec::new();
    initial.push(vec![root]);
    let mut rest: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    // split the non-root vertices by degree for a cheap head start
    rest.sort_by_key(|&v| g.degree(v));
    let mut k = 0;
    while k < rest.len() {
        let d = g.degree(rest[k]);
        let mut cell = Vec::new();
        while k < rest.len() && g.degree(rest[k]) == d {
            cell.push(rest[k]);
            k += 1;
        }
        initial.push(cell);
    }
    let refined = refine(g, initial);
    let mut best: Option<Vec<u32>> = None;
    search(g, refined, &mut Vec::new(), &mut best);
    let rows = best.expect("canonical search always yields a labeling");
    let mut out = Vec::with_capacity(rows.len() * 4);
    for r in rows {
        out.extend(r.to_be_bytes());
    }
    out
}

/// Equitable refinement: repeatedly split cells by the multiset of
/// neighbor counts into every cell.
fn refine(g: &RootedGraph, mut part: Partition) -> Partition {
    loop {
        let cell_of: HashMap<usize, usize> = part
            .iter()
            .enumerate()
            .flat_map(|(i, cell)| cell.iter().map(move |&v| (v, i)))
            .collect();
        let ncells = part.len();
        let mut next: Partition = Vec::new();
        let mut changed = false;
        for cell in &part {
            if cell.len() == 1 {
                next.push(cell.clone());
                continue;
            }
            let mut keyed: Vec<(Vec<u32>, usize)> = cell
                .iter()
                .map(|&v| {
                    let mut sig = vec![0u32; ncells];
                    for &w in g.neighbors(v) {
                        sig[cell_of[&(w as usize)]] += 1;
                    }
                    (sig, v)
                })
                .collect();
            keyed.sort();
            let mut i = 0;
            while i < keyed.len() {
                let sig = keyed[i].0.clone();
                let mut sub = Vec::new();
                while i < keyed.len() && keyed[i].0 == sig {
                    sub.push(keyed[i].1);
                    i += 1;
                }
                if sub.len() < cell.len() {
                    changed = true;
                }
                next.push(sub);
            }
        }
        part = next;
        if !changed {
            return part;
        }
    }
}

/// Backtracking over individualized vertices; keeps the minimal adjacency
/// rows seen so far.
fn search(g: &RootedGraph, part: Partition, prefix: &mut Vec<usize>, best: &mut Option<Vec<u32>>) {
    if let Some(split_at) = part.iter().position(|c| c.len() > 1) {
        let cell = part[split_at].clone();
        for &v in &cell {
            let mut next: Partition = Vec::new();
            for (i, c) in part.iter().enumerate() {
                if i == split_at {
                    next.push(vec![v]);
                    next.push(cell.iter().copied().filter(|&w| w != v).collect());
                } else {
                    next.push(c.clone());
                }
            }
            search(g, refine(g, next), prefix, best);
        }
    } else {
        let order: Vec<usize> = part.iter().map(|c| c[0]).collect();
        let mut pos = vec![0usize; g.len()];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let mut rows = vec![0u32; g.len()];
        for (i, &v) in order.iter().enumerate() {
            for &w in g.neighbors(v) {
                rows[i] |= 1 << pos[w as usize];
            }
        }
        match best {
            Some(b) if *b <= rows => {}
            _ => *best = Some(rows),
        }
    }
}
