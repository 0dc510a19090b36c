//! Euler–Maruyama simulation of interacting diffusions on finite graphs
//! with unit noise.
//!
//! The drift at a vertex averages a pairwise potential β over its
//! neighbors, or more generally is an arbitrary function of (t, own state,
//! local empirical measure). Isolated vertices see their own state as the
//! measure argument.
//!
//! ```
//! use sparse_ips::diffusion::{simulate_diffusion, DiffusionInit, DiffusionModel};
//! use sparse_ips::graphs::RootedGraph;
//!
//! let g = RootedGraph::complete(2).unwrap();
//! // attractive pairwise coupling: drift toward the neighbor
//! let m = DiffusionModel::pairwise(Box::new(|_t, x, y| y - x), 10.0);
//! let init = DiffusionInit::Fixed(vec![-1.0, 1.0]);
//! let ens = simulate_diffusion(&g, &m, &init, 1.0, 0.01, 8, 3).unwrap();
//! let last = ens.grid.len() - 1;
//! let mean_gap: f64 = (0..8)
//!     .map(|r| (ens.value(r, last, 0) - ens.value(r, last, 1)).abs())
//!     .sum::<f64>() / 8.0;
//! assert!(mean_gap < 2.0); // coupling has pulled the pair together
//! ```

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphs::RootedGraph;
use crate::rng::substream;

type PairwiseFn = dyn Fn(f64, f64, f64) -> f64 + Sync + Send;
type GeneralDriftFn = dyn Fn(f64, f64, &[f64]) -> f64 + Sync + Send;

/// Drift specification for interacting diffusions.
pub enum Drift {
    /// Pairwise potential β(t, x, y), averaged over neighbor states y.
    Pairwise(Box<PairwiseFn>),
    /// General drift b(t, x, neighbor states); for the mean-field solvers
    /// the slice holds particle samples of the current law.
    General(Box<GeneralDriftFn>),
}

/// Scalar diffusion model: a drift and a declared uniform bound on it.
pub struct DiffusionModel {
    pub drift: Drift,
    pub bound: f64,
}

impl DiffusionModel {
    pub fn pairwise(beta: Box<PairwiseFn>, bound: f64) -> Self {
        Self {
            drift: Drift::Pairwise(beta),
            bound,
        }
    }

    pub fn general(b: Box<GeneralDriftFn>, bound: f64) -> Self {
        Self {
            drift: Drift::General(b),
            bound,
        }
    }

    /// Drift of a vertex in state `x` whose neighbors hold `neighbors`.
    /// An empty slice (isolated vertex) uses the self-measure convention.
    pub fn drift_at(&self, t: f64, x: f64, neighbors: &[f64]) -> f64 {
        match &self.drift {
            Drift::Pairwise(beta) => {
                if neighbors.is_empty() {
                    beta(t, x, x)
                } else {
                    neighbors.iter().map(|&y| beta(t, x, y)).sum::<f64>() / neighbors.len() as f64
                }
            }
            Drift::General(b) => {
                if neighbors.is_empty() {
                    b(t, x, &[x])
                } else {
                    b(t, x, neighbors)
                }
            }
        }
    }
}

/// Grid-sampled diffusion paths for many replicas.
pub struct DiffusionPathEnsemble {
    pub grid: Vec<f64>,
    /// `values[replica][step][vertex]`
    pub values: Vec<Vec<Vec<f64>>>,
}

impl DiffusionPathEnsemble {
    pub fn replicas(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, replica: usize, step: usize, v: usize) -> f64 {
        self.values[replica][step][v]
    }

    /// CSV export: `replica,vertex,t,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "replica,vertex,t,value")?;
        for (r, path) in self.values.iter().enumerate() {
            for (k, row) in path.iter().enumerate() {
                for (v, &x) in row.iter().enumerate() {
                    writeln!(w, "{r},{v},{},{x}", self.grid[k])?;
                }
            }
        }
        Ok(())
    }
}

/// Per-replica initial values.
#[derive(Clone)]
pub enum DiffusionInit {
    Fixed(Vec<f64>),
    /// I.i.d. Gaussian(mean, std) per vertex, drawn fresh per replica.
    Gaussian { mean: f64, std: f64 },
}

impl DiffusionInit {
    fn draw<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            DiffusionInit::Fixed(xs) => xs.clone(),
            DiffusionInit::Gaussian { mean, std } => (0..n)
                .map(|_| mean + std * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        }
    }
}

/// Euler–Maruyama simulation: X(t+dt) = X(t) + drift·dt + √dt·Z with one
/// standard normal per vertex per step, drift reading only time-t values.
pub fn simulate_diffusion(
    g: &RootedGraph,
    m: &DiffusionModel,
    init: &DiffusionInit,
    horizon: f64,
    dt: f64,
    replicas: usize,
    seed: u64,
) -> Result<DiffusionPathEnsemble> {
    if dt <= 0.0 || horizon <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "need positive dt and horizon, got {dt}, {horizon}"
        )));
    }
    if let DiffusionInit::Fixed(xs) = init {
        if xs.len() != g.len() {
            return Err(Error::InvalidInput("initial value length mismatch".into()));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite initial value".into()));
        }
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let n = g.len();
    let values: Vec<Vec<Vec<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut init_rng = substream(seed, r as u64, 1u64 << 63);
            let mut x = init.draw(n, &mut init_rng);
            let mut rngs: Vec<_> = (0..n)
                .map(|v| substream(seed, r as u64, v as u64))
                .collect();
            let mut path = Vec::with_capacity(steps + 1);
            path.push(x.clone());
            let sqrt_dt = dt.sqrt();
            let mut nbr_buf: Vec<f64> = Vec::new();
            for k in 0..steps {
                let t = k as f64 * dt;
                let mut next = vec![0.0f64; n];
                for v in 0..n {
                    nbr_buf.clear();
                    nbr_buf.extend(g.neighbors(v).iter().map(|&u| x[u as usize]));
                    let b = m.drift_at(t, x[v], &nbr_buf);
                    debug_assert!(
                        b.abs() <= m.bound * (1.0 + 1e-9),
                        "declared drift bound violated: |{b}| > {}",
                        m.bound
                    );
                    let z: f64 = rngs[v].sample(StandardNormal);
                    next[v] = x[v] + b * dt + sqrt_dt * z;
                    if !next[v].is_finite() {
                        return Err(Error::NonFinite { step: k, vertex: v });
                    }
                }
                x = next;
                path.push(x.clone());
            }
            Ok(path)
        })
        .collect::<Result<_>>()?;
    Ok(DiffusionPathEnsemble { grid, values })
}
