//! Statistics over trajectory ensembles: empirical measures, Wasserstein
//! distances, agreement curves with confidence intervals, correlation
//! decay, and a conditional-independence diagnostic for the second-order
//! Markov random field property of path marginals.
//!
//! ```
//! use sparse_ips::observables::{wasserstein_discrete, wasserstein_real, TimeSeriesWithCI};
//!
//! assert_eq!(wasserstein_discrete(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
//! let w = wasserstein_real(&[0.0, 1.0], &[0.5, 1.5], 1.0).unwrap();
//! assert!((w - 0.5).abs() < 1e-12);
//!
//! let ts = TimeSeriesWithCI::from_proportions(vec![0.0, 1.0], &[500, 250], 1000).unwrap();
//! assert!((ts.mean[0] - 0.5).abs() < 1e-12 && ts.halfwidth[0] > 0.0);
//! ```

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::graphs::RootedGraph;
use crate::jump::{JumpTrajectoryEnsemble, ReplicaTrajectory};

const Z95: f64 = 1.959_963_984_540_054;

/// A time series of proportions or means with 95% confidence half-widths.
pub struct TimeSeriesWithCI {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub halfwidth: Vec<f64>,
    pub replicas: usize,
}

impl TimeSeriesWithCI {
    /// Build from per-time success counts out of `replicas` trials.
    /// Wald intervals for replicas ≥ 1000, Wilson below (Wald collapses
    /// on extreme proportions at small counts).
    pub fn from_proportions(grid: Vec<f64>, successes: &[u64], replicas: usize) -> Result<Self> {
        if grid.len() != successes.len() {
            return Err(Error::InvalidInput("grid/successes length mismatch".into()));
        }
        if replicas == 0 {
            return Err(Error::InvalidInput("no replicas".into()));
        }
        let n = replicas as f64;
        let mut mean = Vec::with_capacity(grid.len());
        let mut halfwidth = Vec::with_capacity(grid.len());
        for &s in successes {
            let p = s as f64 / n;
            let hw = if replicas >= 1000 {
                Z95 * (p * (1.0 - p) / n).sqrt()
            } else {
                let z2 = Z95 * Z95;
                Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
            };
            mean.push(p);
            halfwidth.push(hw);
        }
        Ok(Self {
            grid,
            mean,
            halfwidth,
            replicas,
        })
    }

    /// CSV export: `t,mean,halfwidth`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,mean,halfwidth")?;
        for k in 0..self.grid.len() {
            writeln!(w, "{},{},{}", self.grid[k], self.mean[k], self.halfwidth[k])?;
        }
        Ok(())
    }
}

/// Global empirical measure at time `t`, averaged over all replicas and
/// vertices.
pub fn empirical_measure(
    ens: &JumpTrajectoryEnsemble,
    t: f64,
    n_states: usize,
) -> Result<Vec<f64>> {
    if t > ens.horizon {
        return Err(Error::InvalidInput(format!(
            "t={t} beyond horizon {}",
            ens.horizon
        )));
    }
    let n = ens.graph.len();
    let mut mu = vec![0.0; n_states];
    for rep in &ens.replicas {
        for v in 0..n {
            mu[rep.state_at(v, t) as usize] += 1.0;
        }
    }
    let total = (n * ens.replicas.len()) as f64;
    for p in mu.iter_mut() {
        *p /= total;
    }
    Ok(mu)
}

/// Empirical measure of a single replica at time `t`.
pub fn empirical_measure_replica(rep: &ReplicaTrajectory, t: f64, n_states: usize) -> Vec<f64> {
    let n = rep.initial.len();
    let mut mu = vec![0.0; n_states];
    for v in 0..n {
        mu[rep.state_at(v, t) as usize] += 1.0 / n as f64;
    }
    mu
}

/// p-Wasserstein distance between equal-weight sample sets on the real
/// line, by the monotone (sorted-quantile) coupling. Sample counts may
/// differ; the coupling is computed exactly on the merged quantile grid.
pub fn wasserstein_real(a: &[f64], b: &[f64], p: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("empty sample set".into()));
    }
    if p < 1.0 {
        return Err(Error::InvalidInput("order p must be ≥ 1".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0usize, 0usize);
    let (wa, wb) = (1.0 / xs.len() as f64, 1.0 / ys.len() as f64);
    let (mut ra, mut rb) = (wa, wb);
    let mut acc = 0.0;
    while i < xs.len() && j < ys.len() {
        let m = ra.min(rb);
        acc += m * (xs[i] - ys[j]).abs().powf(p);
        ra -= m;
        rb -= m;
        if ra <= 1e-15 {
            i += 1;
            ra = wa;
        }
        if rb <= 1e-15 {
            j += 1;
            rb = wb;
        }
    }
    Ok(acc.powf(1.0 / p))
}

/// W_1 between distributions on a finite set under the discrete (0/1)
/// metric: exactly the total variation distance.
pub fn wasserstein_discrete(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::InvalidInput("mismatched ground spaces".into()));
    }
    Ok(0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Whether the root of `g` agrees with exactly `k` of its neighbors at
/// time `t` in the given replica.
pub fn root_agreement_indicator(g: &RootedGraph, rep: &ReplicaTrajectory, t: f64, k: usize) -> bool {
    let root = g.root().expect("rooted graph") as usize;
    let x = rep.state_at(root, t);
    let agree = g
        .neighbors(root)
        .iter()
        .filter(|&&u| rep.state_at(u as usize, t) == x)
        .count();
    agree == k
}

/// Fraction of replicas in which the root agrees with exactly `k` of its
/// `kappa` neighbors, per grid time, with 95% CIs.
pub fn root_agreement_curve(
    ens: &JumpTrajectoryEnsemble,
    grid: &[f64],
    kappa: usize,
    k: usize,
) -> Result<TimeSeriesWithCI> {
    let root = ens
        .graph
        .root()
        .ok_or_else(|| Error::InvalidInput("graph has no root".into()))? as usize;
    let deg = ens.graph.degree(root);
    if deg == 0 {
        return Err(Error::InvalidInput("isolated root".into()));
    }
    if deg != kappa {
        return Err(Error::InvalidInput(format!(
            "root degree {deg} != kappa {kappa}"
        )));
    }
    if k > kappa {
        return Err(Error::InvalidInput(format!("k={k} > kappa={kappa}")));
    }
    let mut successes = vec![0u64; grid.len()];
    for rep in &ens.replicas {
        for (i, &t) in grid.iter().enumerate() {
            if root_agreement_indicator(&ens.graph, rep, t, k) {
                successes[i] += 1;
            }
        }
    }
    TimeSeriesWithCI::from_proportions(grid.to_vec(), &successes, ens.replicas.len())
}

/// Empirical covariance of vertex states against graph distance.
pub struct CorrelationProfile {
    pub distance: Vec<usize>,
    pub covariance: Vec<f64>,
    pub stderr: Vec<f64>,
    pub pairs: Vec<usize>,
}

impl CorrelationProfile {
    pub fn at(&self, d: usize) -> Option<(f64, f64)> {
        self.distance
            .iter()
            .position(|&x| x == d)
            .map(|i| (self.covariance[i], self.stderr[i]))
    }

    /// CSV export: `distance,covariance,stderr,pairs`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "distance,covariance,stderr,pairs")?;
        for i in 0..self.distance.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.distance[i], self.covariance[i], self.stderr[i], self.pairs[i]
            )?;
        }
        Ok(())
    }
}

/// Average empirical covariance of states at time `t` over vertex pairs at
/// each graph distance d = 0..max_dist. Distances with no pairs are
/// omitted. The standard error is taken across replicas of the
/// pair-averaged statistic.
pub fn correlation_decay_profile(
    ens: &JumpTrajectoryEnsemble,
    t: f64,
    max_dist: usize,
) -> Result<CorrelationProfile> {
    let n = ens.graph.len();
    let reps = ens.replicas.len();
    if reps < 2 {
        return Err(Error::InvalidInput("need ≥ 2 replicas".into()));
    }
    // per-vertex means across replicas
    let mut mean = vec![0.0; n];
    for rep in &ens.replicas {
        for v in 0..n {
            mean[v] += rep.state_at(v, t) as f64 / reps as f64;
        }
    }
    // unordered vertex pairs (v ≤ u) bucketed by BFS distance
    let mut buckets: Vec<Vec<(usize, usize)>> = vec![Vec::new(); max_dist + 1];
    for v in 0..n {
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[v] = 0;
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            if dist[u] == max_dist {
                continue;
            }
            for &w in ens.graph.neighbors(u) {
                let w = w as usize;
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        for u in v..n {
            if dist[u] <= max_dist {
                buckets[dist[u]].push((v, u));
            }
        }
    }
    let mut distance = Vec::new();
    let mut covariance = Vec::new();
    let mut stderr = Vec::new();
    let mut pairs = Vec::new();
    for (d, bucket) in buckets.iter().enumerate() {
        if bucket.is_empty() {
            continue;
        }
        let per_rep: Vec<f64> = ens
            .replicas
            .iter()
            .map(|rep| {
                bucket
                    .iter()
                    .map(|&(v, u)| {
                        (rep.state_at(v, t) as f64 - mean[v]) * (rep.state_at(u, t) as f64 - mean[u])
                    })
                    .sum::<f64>()
                    / bucket.len() as f64
            })
            .collect();
        let m = per_rep.iter().sum::<f64>() / reps as f64;
        let var = per_rep.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (reps - 1) as f64;
        distance.push(d);
        covariance.push(m);
        stderr.push((var / reps as f64).sqrt());
        pairs.push(bucket.len());
    }
    Ok(CorrelationProfile {
        distance,
        covariance,
        stderr,
        pairs,
    })
}

/// Plug-in conditional-mutual-information diagnostic on a 5-vertex path.
pub struct CmiDiagnostic {
    /// I(path_0 ; path_{3,4} | path_{1,2}) in bits.
    pub cmi_second_order: f64,
    /// I(path_0 ; path_{2,3,4} | path_1) in bits.
    pub cmi_first_order: f64,
    /// Miller–Madow-type bias bound (cells − 1)/(2 M ln 2) per estimator.
    pub bias_bound_second: f64,
    pub bias_bound_first: f64,
    /// Replicas divided by occupied joint cells: average support per cell.
    pub effective_samples_second: f64,
    pub effective_samples_first: f64,
    pub replicas: usize,
}

impl CmiDiagnostic {
    /// CSV export: one row of all fields.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "cmi_second_order,cmi_first_order,bias_bound_second,bias_bound_first,effective_samples_second,effective_samples_first,replicas"
        )?;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            self.cmi_second_order,
            self.cmi_first_order,
            self.bias_bound_second,
            self.bias_bound_first,
            self.effective_samples_second,
            self.effective_samples_first,
            self.replicas
        )?;
        Ok(())
    }
}

/// Discretized path symbol of vertex `v`: its states at the grid times,
/// encoded base-`n_states`.
pub fn path_symbol(rep: &ReplicaTrajectory, v: usize, times: &[f64], n_states: usize) -> u16 {
    let mut code = 0u16;
    for &t in times {
        code = code * n_states as u16 + rep.state_at(v, t) as u16;
    }
    code
}

/// Plug-in CMI I(A;B|C) in bits from per-replica symbols, where the
/// entries of each row are (a, b, c).
fn plug_in_cmi(rows: &[(u64, u64, u64)]) -> (f64, usize) {
    let m = rows.len() as f64;
    let mut abc: HashMap<(u64, u64, u64), f64> = HashMap::new();
    let mut ac: HashMap<(u64, u64), f64> = HashMap::new();
    let mut bc: HashMap<(u64, u64), f64> = HashMap::new();
    let mut c: HashMap<u64, f64> = HashMap::new();
    for &(a, b, cc) in rows {
        *abc.entry((a, b, cc)).or_default() += 1.0;
        *ac.entry((a, cc)).or_default() += 1.0;
        *bc.entry((b, cc)).or_default() += 1.0;
        *c.entry(cc).or_default() += 1.0;
    }
    let mut cmi = 0.0;
    for (&(a, b, cc), &n_abc) in &abc {
        let p = n_abc / m;
        cmi += p * ((n_abc * c[&cc]) / (ac[&(a, cc)] * bc[&(b, cc)])).log2();
    }
    (cmi.max(0.0), abc.len())
}

/// CMI diagnostic from precomputed per-replica path symbols (one row of 5
/// per replica) over an alphabet of `n_symbols` per vertex.
pub fn cmi_from_symbols(symbols: &[[u16; 5]], n_symbols: usize) -> Result<CmiDiagnostic> {
    if symbols.is_empty() {
        return Err(Error::InvalidInput("no replicas".into()));
    }
    let m = symbols.len() as f64;
    let s = n_symbols as u64;
    // second order: A = {0}, B = {3,4}, C = {1,2}
    let rows2: Vec<(u64, u64, u64)> = symbols
        .iter()
        .map(|p| {
            (
                p[0] as u64,
                p[3] as u64 * s + p[4] as u64,
                p[1] as u64 * s + p[2] as u64,
            )
        })
        .collect();
    // first order: A = {0}, B = {2,3,4}, C = {1}
    let rows1: Vec<(u64, u64, u64)> = symbols
        .iter()
        .map(|p| {
            (
                p[0] as u64,
                (p[2] as u64 * s + p[3] as u64) * s + p[4] as u64,
                p[1] as u64,
            )
        })
        .collect();
    let (cmi2, occ2) = plug_in_cmi(&rows2);
    let (cmi1, occ1) = plug_in_cmi(&rows1);
    let cells = (n_symbols as f64).powi(5);
    let bias = (cells - 1.0) / (2.0 * m * std::f64::consts::LN_2);
    Ok(CmiDiagnostic {
        cmi_second_order: cmi2,
        cmi_first_order: cmi1,
        bias_bound_second: bias,
        bias_bound_first: bias,
        effective_samples_second: m / occ2 as f64,
        effective_samples_first: m / occ1 as f64,
        replicas: symbols.len(),
    })
}

/// CMI diagnostic for an ensemble on a 5-vertex path graph, with paths
/// discretized at `times` (at most 3 grid points so the path-symbol
/// alphabet stays enumerable).
pub fn cmi_2mrf_diagnostic(
    ens: &JumpTrajectoryEnsemble,
    times: &[f64],
    n_states: usize,
) -> Result<CmiDiagnostic> {
    if ens.graph.len() != 5 {
        return Err(Error::InvalidInput("need a 5-vertex path graph".into()));
    }
    for v in 0..5usize {
        let mut expect: Vec<u32> = Vec::new();
        if v > 0 {
            expect.push(v as u32 - 1);
        }
        if v < 4 {
            expect.push(v as u32 + 1);
        }
        let mut got = ens.graph.neighbors(v).to_vec();
        got.sort_unstable();
        if got != expect {
            return Err(Error::InvalidInput("graph is not the path 0-1-2-3-4".into()));
        }
    }
    if times.is_empty() || times.len() > 3 {
        return Err(Error::InvalidInput("need 1..=3 grid times".into()));
    }
    let symbols: Vec<[u16; 5]> = ens
        .replicas
        .iter()
        .map(|rep| std::array::from_fn(|v| path_symbol(rep, v, times, n_states)))
        .collect();
    cmi_from_symbols(&symbols, n_states.pow(times.len() as u32))
}
