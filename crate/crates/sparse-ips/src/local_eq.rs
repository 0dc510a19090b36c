//! Local-equation approximations for root-neighborhood marginals on
//! κ-regular trees, under the Markovian closure: the leaf rates condition
//! on the current (leaf, root) state pair instead of full paths.
//!
//! Three routes are provided and cross-check one another — a closed
//! nonlinear ODE on the joint law over X^{κ+1}, a self-consistent Monte
//! Carlo fixed point, and a binned-regression analogue for diffusions.
//!
//! ```
//! use sparse_ips::jump::voter_model;
//! use sparse_ips::local_eq::solve_local_eq_ode;
//!
//! let (law, _gamma) = solve_local_eq_ode(&voter_model(), 3, &[0.7, 0.3], 1.0, 0.1).unwrap();
//! let agree = law.agreement_statistic(2);
//! // product initial law: P(root agrees with exactly 2 of 3 neighbors)
//! let expect = 0.7 * 3.0 * 0.7f64.powi(2) * 0.3 + 0.3 * 3.0 * 0.3f64.powi(2) * 0.7;
//! assert!((agree[0] - expect).abs() < 1e-12);
//! ```

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::diffusion::{DiffusionInit, DiffusionModel, DiffusionPathEnsemble, Drift};
use crate::error::{Error, Result};
use crate::graphs::RootedGraph;
use crate::jump::{simulate_jump_fold, JumpInit, JumpModel, NeighborCounts};
use crate::mean_field::{check_simplex, solve_mf_master};
use crate::observables::{root_agreement_indicator, TimeSeriesWithCI};
use crate::rng::substream;

/// Mass below which a conditioning event is treated as unreachable and the
/// closure rate falls back to its previous-time value (or the mean-field
/// rate at t=0).
pub const CONDITIONING_FLOOR: f64 = 1e-12;

/// Joint law flow of (X_o, X_1, …, X_κ): a simplex vector over X^{κ+1}
/// per grid time, configs indexed base-|X| with the root as the most
/// significant digit.
pub struct LocalEqJointLaw {
    pub kappa: usize,
    pub n_states: usize,
    pub grid: Vec<f64>,
    /// `values[k][config]`
    pub values: Vec<Vec<f64>>,
}

impl LocalEqJointLaw {
    pub fn n_configs(&self) -> usize {
        self.n_states.pow(self.kappa as u32 + 1)
    }

    /// Decode a config index into (root state, leaf states).
    pub fn decode(&self, mut c: usize) -> (u8, Vec<u8>) {
        let mut leaves = vec![0u8; self.kappa];
        for l in (0..self.kappa).rev() {
            leaves[l] = (c % self.n_states) as u8;
            c /= self.n_states;
        }
        (c as u8, leaves)
    }

    pub fn encode(&self, root: u8, leaves: &[u8]) -> usize {
        let mut c = root as usize;
        for &x in leaves {
            c = c * self.n_states + x as usize;
        }
        c
    }

    /// Root marginal at grid index `k`.
    pub fn root_marginal(&self, k: usize) -> Vec<f64> {
        let mut mu = vec![0.0; self.n_states];
        for (c, &p) in self.values[k].iter().enumerate() {
            mu[self.decode(c).0 as usize] += p;
        }
        mu
    }

    /// P(root agrees with exactly `k_agree` leaves) per grid time.
    pub fn agreement_statistic(&self, k_agree: usize) -> Vec<f64> {
        self.values
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(c, _)| {
                        let (root, leaves) = self.decode(c);
                        leaves.iter().filter(|&&x| x == root).count() == k_agree
                    })
                    .map(|(_, &p)| p)
                    .sum()
            })
            .collect()
    }

    /// CSV export: `t,config,probability`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,config,probability")?;
        for (k, row) in self.values.iter().enumerate() {
            for (c, &p) in row.iter().enumerate() {
                writeln!(w, "{},{c},{p}", self.grid[k])?;
            }
        }
        Ok(())
    }
}

/// Closure rates γ̄_j(t, x, y) on a time grid, indexed by (grid point,
/// jump direction, own state x, neighbor state y). `fallback` marks
/// entries set by the unreachable-conditioning rule.
#[derive(Clone)]
pub struct GammaTable {
    pub grid: Vec<f64>,
    pub n_jumps: usize,
    pub n_states: usize,
    pub values: Vec<f64>,
    pub fallback: Vec<bool>,
}

impl GammaTable {
    pub fn zeros(grid: Vec<f64>, n_jumps: usize, n_states: usize) -> Self {
        let len = grid.len() * n_jumps * n_states * n_states;
        Self {
            grid,
            n_jumps,
            n_states,
            values: vec![0.0; len],
            fallback: vec![false; len],
        }
    }

    pub fn idx(&self, k: usize, j: usize, x: u8, y: u8) -> usize {
        ((k * self.n_jumps + j) * self.n_states + x as usize) * self.n_states + y as usize
    }

    pub fn at(&self, k: usize, j: usize, x: u8, y: u8) -> f64 {
        self.values[self.idx(k, j, x, y)]
    }

    /// Piecewise-constant-in-time lookup: the last grid point ≤ t applies.
    pub fn value_at(&self, t: f64, j: usize, x: u8, y: u8) -> f64 {
        let k = match self.grid.partition_point(|&s| s <= t) {
            0 => 0,
            k => k - 1,
        };
        self.at(k, j, x, y)
    }

    pub fn sup_distance(&self, other: &GammaTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v))
    }

    /// CSV export: `t,j,x,y,rate,fallback`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,j,x,y,rate,fallback")?;
        for (k, &t) in self.grid.iter().enumerate() {
            for j in 0..self.n_jumps {
                for x in 0..self.n_states as u8 {
                    for y in 0..self.n_states as u8 {
                        let i = self.idx(k, j, x, y);
                        writeln!(
                            w,
                            "{t},{j},{x},{y},{},{}",
                            self.values[i], self.fallback[i] as u8
                        )?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn decode_config(mut c: usize, kappa: usize, n_states: usize) -> (u8, Vec<u8>) {
    let mut leaves = vec![0u8; kappa];
    for l in (0..kappa).rev() {
        leaves[l] = (c % n_states) as u8;
        c /= n_states;
    }
    (c as u8, leaves)
}

fn neighbor_counts(leaves: &[u8], n_states: usize) -> NeighborCounts {
    let mut counts = vec![0u32; n_states];
    for &x in leaves {
        counts[x as usize] += 1;
    }
    NeighborCounts::new(counts)
}

/// γ̄_j(t, x, y) read off a joint law: the conditional expectation of the
/// root rate r̄_j(t, X_o, θ_o) given (X_o, X_1) = (x, y). Entries whose
/// conditioning mass is below the floor are taken from `prev` (the
/// previous-time table slice) or, lacking one, from the mean-field rate
/// at the current root marginal.
#[allow(clippy::too_many_arguments)]
fn gamma_from_law(
    m: &JumpModel,
    kappa: usize,
    t: f64,
    law: &[f64],
    prev: Option<(&[f64], &[bool])>,
    out_values: &mut [f64],
    out_fallback: &mut [bool],
) {
    let s = m.n_states();
    let nj = m.jumps().len();
    let mut num = vec![0.0; nj * s * s];
    let mut den = vec![0.0; s * s];
    for (c, &p) in law.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let (root, leaves) = decode_config(c, kappa, s);
        let theta = neighbor_counts(&leaves, s);
        let pair = root as usize * s + leaves[0] as usize;
        den[pair] += p;
        for j in 0..nj {
            num[j * s * s + pair] += p * m.rate(j, t, root, &theta);
        }
    }
    let root_marginal = {
        let mut mu = vec![0.0; s];
        for (c, &p) in law.iter().enumerate() {
            mu[decode_config(c, kappa, s).0 as usize] += p;
        }
        let total: f64 = mu.iter().sum();
        if total > 0.0 {
            for v in mu.iter_mut() {
                *v /= total;
            }
        }
        mu
    };
    for j in 0..nj {
        for pair in 0..s * s {
            let i = j * s * s + pair;
            if den[pair] >= CONDITIONING_FLOOR {
                out_values[i] = num[i] / den[pair];
                out_fallback[i] = false;
            } else if let Some((pv, _)) = prev {
                out_values[i] = pv[i];
                out_fallback[i] = true;
            } else {
                let x = (pair / s) as u8;
                out_values[i] = if m.has_normalized() {
                    m.normalized_rate(j, t, x, &root_marginal)
                } else {
                    0.0
                };
                out_fallback[i] = true;
            }
        }
    }
}

/// Generator of the closed local equation applied to `law`: the root
/// jumps at its exact rate given the leaf configuration, each leaf at the
/// closure rate γ̄_j(t, x_leaf, x_root).
fn local_eq_rhs(
    m: &JumpModel,
    kappa: usize,
    t: f64,
    law: &[f64],
    gamma: &[f64],
    out: &mut [f64],
) {
    let s = m.n_states();
    let nj = m.jumps().len();
    out.iter_mut().for_each(|d| *d = 0.0);
    for (c, &p) in law.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let (root, leaves) = decode_config(c, kappa, s);
        let theta = neighbor_counts(&leaves, s);
        // root digit has place value s^kappa
        let root_place = s.pow(kappa as u32);
        for j in 0..nj {
            if let Some(target) = m.target(root, j) {
                let rate = m.rate(j, t, root, &theta);
                if rate > 0.0 {
                    let c2 = (c as isize
                        + (target as isize - root as isize) * root_place as isize)
                        as usize;
                    out[c] -= p * rate;
                    out[c2] += p * rate;
                }
            }
            for (l, &xl) in leaves.iter().enumerate() {
                if let Some(target) = m.target(xl, j) {
                    let place = s.pow((kappa - 1 - l) as u32);
                    let rate = gamma[(j * s + xl as usize) * s + root as usize];
                    if rate > 0.0 {
                        let c2 = (c as isize
                            + (target as isize - xl as isize) * place as isize)
                            as usize;
                        out[c] -= p * rate;
                        out[c2] += p * rate;
                    }
                }
            }
        }
    }
}

/// Product law over X^{κ+1} from a per-vertex law.
fn product_law(mu0: &[f64], kappa: usize) -> Vec<f64> {
    let s = mu0.len();
    let n = s.pow(kappa as u32 + 1);
    (0..n)
        .map(|c| {
            let (root, leaves) = decode_config(c, kappa, s);
            leaves
                .iter()
                .fold(mu0[root as usize], |p, &x| p * mu0[x as usize])
        })
        .collect()
}

/// Solve the Markovianized local equation on X^{κ+1} with RK4 from an
/// i.i.d. product initial law. Returns the joint-law flow and the γ̄
/// table realized along it.
pub fn solve_local_eq_ode(
    m: &JumpModel,
    kappa: usize,
    mu0: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<(LocalEqJointLaw, GammaTable)> {
    if kappa < 1 {
        return Err(Error::InvalidInput("kappa must be ≥ 1".into()));
    }
    if mu0.len() != m.n_states() {
        return Err(Error::InvalidInput("mu0 length mismatch".into()));
    }
    check_simplex(mu0)?;
    if dt <= 0.0 || horizon <= 0.0 {
        return Err(Error::InvalidInput("need positive dt and horizon".into()));
    }
    let s = m.n_states();
    let nj = m.jumps().len();
    let steps = (horizon / dt).round().max(1.0) as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let n = s.pow(kappa as u32 + 1);
    let mut law = product_law(mu0, kappa);
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(law.clone());
    let mut table = GammaTable::zeros(grid.clone(), nj, s);
    let gsz = nj * s * s;
    // gamma as a pure function of the law, re-derived at every RK4 stage
    let mut gbuf = vec![0.0; gsz];
    let mut gflag = vec![false; gsz];
    {
        let (gv, gf) = (&mut table.values[0..gsz], &mut table.fallback[0..gsz]);
        gamma_from_law(m, kappa, 0.0, &law, None, gv, gf);
    }
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    for step in 0..steps {
        let t = step as f64 * dt;
        let prev_slice = {
            let a = step * gsz;
            (a, a + gsz)
        };
        let eval = |t_s: f64, law_s: &[f64], out: &mut [f64], gbuf: &mut [f64], gflag: &mut [bool], table: &GammaTable| {
            let prev = (
                &table.values[prev_slice.0..prev_slice.1],
                &table.fallback[prev_slice.0..prev_slice.1],
            );
            gamma_from_law(m, kappa, t_s, law_s, Some(prev), gbuf, gflag);
            local_eq_rhs(m, kappa, t_s, law_s, gbuf, out);
        };
        eval(t, &law, &mut k1, &mut gbuf, &mut gflag, &table);
        for c in 0..n {
            stage[c] = law[c] + 0.5 * dt * k1[c];
        }
        eval(t + 0.5 * dt, &stage, &mut k2, &mut gbuf, &mut gflag, &table);
        for c in 0..n {
            stage[c] = law[c] + 0.5 * dt * k2[c];
        }
        eval(t + 0.5 * dt, &stage, &mut k3, &mut gbuf, &mut gflag, &table);
        for c in 0..n {
            stage[c] = law[c] + dt * k3[c];
        }
        eval(t + dt, &stage, &mut k4, &mut gbuf, &mut gflag, &table);
        for c in 0..n {
            law[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        let worst = law.iter().fold(0.0f64, |w, &p| w.max(-p));
        if worst > 1e-6 {
            return Err(Error::SimplexViolation {
                t: t + dt,
                violation: worst,
            });
        }
        for p in law.iter_mut() {
            *p = p.max(0.0);
        }
        let total: f64 = law.iter().sum();
        for p in law.iter_mut() {
            *p /= total;
        }
        // realized gamma at the committed law
        {
            gamma_from_law(m, kappa, t + dt, &law, {
                Some((
                    &table.values[prev_slice.0..prev_slice.1],
                    &table.fallback[prev_slice.0..prev_slice.1],
                ))
            }, &mut gbuf, &mut gflag);
            let a = (step + 1) * gsz;
            table.values[a..a + gsz].copy_from_slice(&gbuf);
            table.fallback[a..a + gsz].copy_from_slice(&gflag);
        }
        rows.push(law.clone());
    }
    Ok((
        LocalEqJointLaw {
            kappa,
            n_states: s,
            grid,
            values: rows,
        },
        table,
    ))
}

/// Closed-form γ̄ at t = 0 under the product initial law: condition on
/// (X_o, X_1) = (x, y) and enumerate the remaining κ−1 i.i.d. leaves.
/// Returned as a one-grid-point table at t = 0.
pub fn gamma_closed_form_t0(m: &JumpModel, kappa: usize, mu0: &[f64]) -> Result<GammaTable> {
    if kappa < 1 {
        return Err(Error::InvalidInput("kappa must be ≥ 1".into()));
    }
    check_simplex(mu0)?;
    let s = m.n_states();
    let nj = m.jumps().len();
    let mut table = GammaTable::zeros(vec![0.0], nj, s);
    let rest = s.pow(kappa as u32 - 1);
    for x in 0..s as u8 {
        for y in 0..s as u8 {
            for c in 0..rest {
                let (_, others) = decode_config(c, kappa - 1, s);
                let weight: f64 = others.iter().map(|&z| mu0[z as usize]).product();
                if weight == 0.0 {
                    continue;
                }
                let mut leaves = vec![y];
                leaves.extend_from_slice(&others);
                let theta = neighbor_counts(&leaves, s);
                for j in 0..nj {
                    let i = table.idx(0, j, x, y);
                    table.values[i] += weight * m.rate(j, 0.0, x, &theta);
                }
            }
        }
    }
    Ok(table)
}

/// Output of the self-consistent Monte Carlo fixed point.
pub struct FixedPointResult {
    pub gamma: GammaTable,
    pub law: LocalEqJointLaw,
    pub converged: bool,
    pub iterations: usize,
}

/// Self-consistent Monte Carlo fixed point for the Markovianized local
/// equation: simulate M replicas of the (κ+1)-particle system with leaves
/// driven by the current γ̄ table (piecewise constant in t), re-estimate
/// γ̄ from the replicas, damp, and iterate to sup-norm tolerance. The
/// initial table carries the mean-field rates. Leaf estimates are pooled
/// over all κ (root, leaf) pairs by exchangeability.
#[allow(clippy::too_many_arguments)]
pub fn simulate_local_eq_fixed_point(
    m: &JumpModel,
    kappa: usize,
    mu0: &[f64],
    horizon: f64,
    dt: f64,
    replicas: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<FixedPointResult> {
    if replicas < 10_000 {
        return Err(Error::InvalidInput("need at least 10^4 replicas".into()));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    if kappa < 1 {
        return Err(Error::InvalidInput("kappa must be ≥ 1".into()));
    }
    check_simplex(mu0)?;
    if mu0.len() != m.n_states() {
        return Err(Error::InvalidInput("mu0 length mismatch".into()));
    }
    let s = m.n_states();
    let nj = m.jumps().len();
    let steps = (horizon / dt).round().max(1.0) as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let gsz = nj * s * s;

    // initial table: mean-field rates along the mean-field flow
    let mut gamma = GammaTable::zeros(grid.clone(), nj, s);
    if m.has_normalized() {
        let mf = solve_mf_master(m, mu0, horizon, dt)?;
        for (k, &t) in grid.iter().enumerate() {
            let mu = mf.simplex_at(mf.index_of(t));
            for j in 0..nj {
                for x in 0..s as u8 {
                    for y in 0..s as u8 {
                        let i = gamma.idx(k, j, x, y);
                        gamma.values[i] = m.normalized_rate(j, t, x, mu);
                    }
                }
            }
        }
    }

    let envelope = m.envelope(kappa, horizon);
    let mut converged = false;
    let mut iterations = 0;
    let mut law_rows: Vec<Vec<f64>> = Vec::new();
    for iter in 0..max_iters {
        iterations = iter + 1;
        let leaf_bound = gamma.max_value().max(envelope);
        let gamma_ref = &gamma;
        // per-replica: states at every grid time, and the root rate at
        // those times for the gamma re-estimation
        let per_rep: Vec<(Vec<Vec<u8>>, Vec<Vec<f64>>)> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(seed, iter as u64, r as u64);
                let mut state = vec![0u8; kappa + 1];
                for x in state.iter_mut() {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    *x = s as u8 - 1;
                    for (z, &p) in mu0.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            *x = z as u8;
                            break;
                        }
                    }
                }
                let mut snapshots = Vec::with_capacity(steps + 1);
                let mut root_rates = Vec::with_capacity(steps + 1);
                let snapshot =
                    |state: &[u8], snapshots: &mut Vec<Vec<u8>>, rates: &mut Vec<Vec<f64>>, t: f64| {
                        snapshots.push(state.to_vec());
                        let theta = neighbor_counts(&state[1..], s);
                        rates.push((0..nj).map(|j| m.rate(j, t, state[0], &theta)).collect());
                    };
                snapshot(&state, &mut snapshots, &mut root_rates, 0.0);
                // thinning over [0, T]: the root against the model
                // envelope, leaves against the running table bound
                let mut t = 0.0;
                let total = nj as f64 * (envelope + kappa as f64 * leaf_bound);
                let mut next_grid = 1usize;
                loop {
                    if total <= 0.0 {
                        t = horizon;
                    } else {
                        let u: f64 = rng.gen();
                        t += -(1.0 - u).ln() / total;
                    }
                    while next_grid <= steps && grid[next_grid] <= t.min(horizon) {
                        snapshot(&state, &mut snapshots, &mut root_rates, grid[next_grid]);
                        next_grid += 1;
                    }
                    if t >= horizon {
                        break;
                    }
                    let pick: f64 = rng.gen::<f64>() * total;
                    let (v, j) = if pick < nj as f64 * envelope {
                        (0usize, ((pick / envelope) as usize).min(nj - 1))
                    } else {
                        let q = ((pick - nj as f64 * envelope) / leaf_bound) as usize;
                        let q = q.min(kappa * nj - 1);
                        (1 + q / nj, q % nj)
                    };
                    let rate = if v == 0 {
                        let theta = neighbor_counts(&state[1..], s);
                        m.rate(j, t, state[0], &theta)
                    } else {
                        gamma_ref.value_at(t, j, state[v], state[0])
                    };
                    let bound = if v == 0 { envelope } else { leaf_bound };
                    if bound > 0.0 && rng.gen::<f64>() * bound < rate {
                        if let Some(target) = m.target(state[v], j) {
                            state[v] = target;
                        }
                    }
                }
                (snapshots, root_rates)
            })
            .collect();

        // re-estimate gamma: numerator/denominator per (grid, j, x, y)
        let mut num = vec![0.0; (steps + 1) * gsz];
        let mut den = vec![0.0; (steps + 1) * s * s];
        let n_cfg = s.pow(kappa as u32 + 1);
        let mut counts = vec![0.0; (steps + 1) * n_cfg];
        for (snapshots, root_rates) in &per_rep {
            for k in 0..=steps {
                let st = &snapshots[k];
                let rates = &root_rates[k];
                let root = st[0] as usize;
                for &leaf in &st[1..] {
                    let pair = root * s + leaf as usize;
                    den[k * s * s + pair] += 1.0;
                    for j in 0..nj {
                        num[(k * nj + j) * s * s + pair] += rates[j];
                    }
                }
                let mut c = root;
                for &leaf in &st[1..] {
                    c = c * s + leaf as usize;
                }
                counts[k * n_cfg + c] += 1.0;
            }
        }
        let mut estimate = gamma.clone();
        for k in 0..=steps {
            for j in 0..nj {
                for pair in 0..s * s {
                    let i = (k * nj + j) * s * s + pair;
                    let d = den[k * s * s + pair];
                    if d > 0.0 {
                        estimate.values[i] = num[i] / d;
                        estimate.fallback[i] = false;
                    } else if k > 0 {
                        let iprev = ((k - 1) * nj + j) * s * s + pair;
                        estimate.values[i] = estimate.values[iprev];
                        estimate.fallback[i] = true;
                    } else {
                        // keep the mean-field initial value
                        estimate.fallback[i] = true;
                    }
                }
            }
        }
        let mut next = gamma.clone();
        for i in 0..next.values.len() {
            next.values[i] = 0.5 * gamma.values[i] + 0.5 * estimate.values[i];
            next.fallback[i] = estimate.fallback[i];
        }
        let change = next.sup_distance(&gamma);
        gamma = next;
        // empirical joint law, symmetrized over leaf orderings via the
        // pooled pair counts is overkill; plain empirical suffices here
        law_rows = (0..=steps)
            .map(|k| {
                let total: f64 = replicas as f64;
                counts[k * n_cfg..(k + 1) * n_cfg]
                    .iter()
                    .map(|&c| c / total)
                    .collect()
            })
            .collect();
        if change <= tol {
            converged = true;
            break;
        }
    }
    Ok(FixedPointResult {
        gamma,
        law: LocalEqJointLaw {
            kappa,
            n_states: s,
            grid,
            values: law_rows,
        },
        converged,
        iterations,
    })
}

/// Result of the Markovianized diffusion local equation.
pub struct DiffusionLocalEqResult {
    /// `ensemble.values[replica][step][coordinate]`, coordinate 0 = root.
    pub ensemble: DiffusionPathEnsemble,
    pub converged: bool,
    pub iterations: usize,
    /// Number of empty regression bins patched by nearest-populated-bin.
    pub bin_fallbacks: usize,
}

/// Markovianized local equation for pairwise-drift diffusions: the root
/// uses the exact neighbor-averaged drift; each leaf uses
/// ½[β(x_leaf, x_root) + γ̄_t(x_leaf, x_root)], with γ̄ a binned
/// regression of β(X_o, X_1) on the pair (X_o, X_2), iterated to a fixed
/// point with 0.5 damping.
#[allow(clippy::too_many_arguments)]
pub fn markovian_local_eq_diffusion(
    m: &DiffusionModel,
    kappa: usize,
    mu0: &DiffusionInit,
    horizon: f64,
    dt: f64,
    replicas: usize,
    bins: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<DiffusionLocalEqResult> {
    let beta = match &m.drift {
        Drift::Pairwise(b) => b,
        Drift::General(_) => {
            return Err(Error::InvalidInput(
                "diffusion local equation needs a pairwise drift".into(),
            ))
        }
    };
    if kappa < 2 {
        return Err(Error::InvalidInput("kappa must be ≥ 2".into()));
    }
    if replicas < 1000 || bins < 2 || dt <= 0.0 || horizon <= 0.0 || tol <= 0.0 {
        return Err(Error::InvalidInput(
            "need replicas ≥ 1000, bins ≥ 2, positive dt/horizon/tol".into(),
        ));
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let d = kappa + 1;
    let sqrt_dt = dt.sqrt();

    // regression table per step: bin edges for x and y plus cell values
    struct Table {
        x_edges: Vec<Vec<f64>>,
        y_edges: Vec<Vec<f64>>,
        cells: Vec<Vec<f64>>,
        present: Vec<Vec<bool>>,
    }
    let mut table: Option<Table> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut bin_fallbacks = 0usize;
    let mut paths: Vec<Vec<Vec<f64>>> = Vec::new();

    let locate = |edges: &[f64], v: f64| -> usize {
        edges.partition_point(|&e| e <= v).min(edges.len())
    };
    let lookup = |tab: &Table, k: usize, x: f64, y: f64| -> (f64, bool) {
        let bi = locate(&tab.x_edges[k], x);
        let bj = locate(&tab.y_edges[k], y);
        let bins_n = tab.x_edges[k].len() + 1;
        let at = |i: usize, j: usize| (tab.cells[k][i * bins_n + j], tab.present[k][i * bins_n + j]);
        let (v, ok) = at(bi, bj);
        if ok {
            return (v, false);
        }
        // nearest populated bin by Manhattan rings; average ties
        for r in 1..(2 * bins_n) {
            let (mut sum, mut cnt) = (0.0, 0usize);
            for di in 0..=r as isize {
                let dj = r as isize - di;
                let mut cands = vec![
                    (bi as isize - di, bj as isize - dj),
                    (bi as isize + di, bj as isize + dj),
                ];
                if di != 0 && dj != 0 {
                    cands.push((bi as isize - di, bj as isize + dj));
                    cands.push((bi as isize + di, bj as isize - dj));
                }
                for (i, j) in cands {
                    if i < 0 || j < 0 || i as usize >= bins_n || j as usize >= bins_n {
                        continue;
                    }
                    let (v, ok) = at(i as usize, j as usize);
                    if ok {
                        sum += v;
                        cnt += 1;
                    }
                }
            }
            if cnt > 0 {
                return (sum / cnt as f64, true);
            }
        }
        (0.0, true)
    };

    for iter in 0..max_iters {
        iterations = iter + 1;
        let tab = table.as_ref();
        let new_paths: Vec<Vec<Vec<f64>>> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(seed, iter as u64, r as u64);
                let mut x: Vec<f64> = match mu0 {
                    DiffusionInit::Fixed(xs) => (0..d).map(|i| xs[i % xs.len()]).collect(),
                    DiffusionInit::Gaussian { mean, std } => (0..d)
                        .map(|_| mean + std * rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                };
                let mut out = Vec::with_capacity(steps + 1);
                out.push(x.clone());
                for step in 0..steps {
                    let t = step as f64 * dt;
                    let mut next = x.clone();
                    // root: exact neighbor-averaged pairwise drift
                    let root_drift =
                        x[1..].iter().map(|&y| beta(t, x[0], y)).sum::<f64>() / kappa as f64;
                    let z: f64 = rng.sample(StandardNormal);
                    next[0] = x[0] + root_drift * dt + sqrt_dt * z;
                    for l in 1..d {
                        let closure = match tab {
                            Some(tab) => lookup(tab, step, x[l], x[0]).0,
                            None => beta(t, x[l], x[0]),
                        };
                        let drift = 0.5 * (beta(t, x[l], x[0]) + closure);
                        let z: f64 = rng.sample(StandardNormal);
                        next[l] = x[l] + drift * dt + sqrt_dt * z;
                    }
                    x = next;
                    out.push(x.clone());
                }
                out
            })
            .collect();

        // re-estimate the regression table from the fresh ensemble:
        // response beta(t, X_o, X_1), regressors (X_o, X_2); pooled over
        // ordered leaf pairs by exchangeability
        let bins_n = bins;
        let mut x_edges = Vec::with_capacity(steps + 1);
        let mut y_edges = Vec::with_capacity(steps + 1);
        let mut cells = Vec::with_capacity(steps + 1);
        let mut present = Vec::with_capacity(steps + 1);
        let mut fallbacks = 0usize;
        for k in 0..=steps {
            let t = grid[k];
            // samples: (x = X_o, y = X_l', response = beta(X_o, X_l))
            let mut xs: Vec<f64> = Vec::with_capacity(replicas);
            let mut ys: Vec<f64> = Vec::with_capacity(replicas);
            for p in &new_paths {
                xs.push(p[k][0]);
                for l in 1..d {
                    ys.push(p[k][l]);
                }
            }
            let quantile_edges = |mut v: Vec<f64>| -> Vec<f64> {
                v.sort_by(f64::total_cmp);
                (1..bins_n).map(|b| v[(b * v.len()) / bins_n]).collect()
            };
            let ex = quantile_edges(xs);
            let ey = quantile_edges(ys);
            let mut sums = vec![0.0; bins_n * bins_n];
            let mut cnts = vec![0.0; bins_n * bins_n];
            for p in &new_paths {
                let xo = p[k][0];
                let bi = locate(&ex, xo);
                for l in 1..d {
                    for l2 in 1..d {
                        if l2 == l {
                            continue;
                        }
                        let bj = locate(&ey, p[k][l2]);
                        sums[bi * bins_n + bj] += beta(t, xo, p[k][l]);
                        cnts[bi * bins_n + bj] += 1.0;
                    }
                }
            }
            let mut cell = vec![0.0; bins_n * bins_n];
            let mut pres = vec![false; bins_n * bins_n];
            for i in 0..bins_n * bins_n {
                if cnts[i] > 0.0 {
                    cell[i] = sums[i] / cnts[i];
                    pres[i] = true;
                } else {
                    fallbacks += 1;
                }
            }
            x_edges.push(ex);
            y_edges.push(ey);
            cells.push(cell);
            present.push(pres);
        }
        // damped update against the previous table where one exists
        let new_tab = match table.take() {
            Some(old) => {
                let mut merged = Table {
                    x_edges,
                    y_edges,
                    cells,
                    present,
                };
                for k in 0..=steps {
                    for i in 0..bins_n * bins_n {
                        if merged.present[k][i] && old.present[k][i] {
                            merged.cells[k][i] =
                                0.5 * old.cells[k][i] + 0.5 * merged.cells[k][i];
                        }
                    }
                }
                merged
            }
            None => Table {
                x_edges,
                y_edges,
                cells,
                present,
            },
        };
        // convergence: sup change of the root-marginal mean trajectory,
        // a stable scalar summary of the closure's effect
        let mean_curve: Vec<f64> = (0..=steps)
            .map(|k| new_paths.iter().map(|p| p[k][1]).sum::<f64>() / replicas as f64)
            .collect();
        let change = if paths.is_empty() {
            f64::INFINITY
        } else {
            let old_curve: Vec<f64> = (0..=steps)
                .map(|k| paths.iter().map(|p| p[k][1]).sum::<f64>() / replicas as f64)
                .collect();
            mean_curve
                .iter()
                .zip(&old_curve)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        table = Some(new_tab);
        paths = new_paths;
        bin_fallbacks = fallbacks;
        if change <= tol {
            converged = true;
            break;
        }
    }
    Ok(DiffusionLocalEqResult {
        ensemble: DiffusionPathEnsemble {
            grid,
            values: paths,
        },
        converged,
        iterations,
        bin_fallbacks,
    })
}

/// Ground-truth baseline for the figure comparisons: direct simulation on
/// the κ-regular tree of the given depth, reduced to the
/// root-agrees-with-exactly-k curve with 95% CIs.
#[allow(clippy::too_many_arguments)]
pub fn direct_tree_baseline(
    m: &JumpModel,
    kappa: usize,
    depth: usize,
    init: &JumpInit,
    grid: &[f64],
    k_agree: usize,
    replicas: usize,
    seed: u64,
) -> Result<TimeSeriesWithCI> {
    if depth == 0 {
        return Err(Error::InvalidInput(
            "depth 0 leaves the root isolated; the agreement statistic is undefined".into(),
        ));
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    let horizon = grid.iter().fold(0.0f64, |a, &b| a.max(b));
    let g = RootedGraph::regular_tree(kappa, depth)?;
    let g_ref = &g;
    let grid_ref = grid;
    let indicators = simulate_jump_fold(&g, m, init, horizon, 0.0, replicas, seed, |_, rep| {
        grid_ref
            .iter()
            .map(|&t| root_agreement_indicator(g_ref, rep, t, k_agree))
            .collect::<Vec<bool>>()
    })?;
    let mut successes = vec![0u64; grid.len()];
    for row in &indicators {
        for (i, &hit) in row.iter().enumerate() {
            if hit {
                successes[i] += 1;
            }
        }
    }
    TimeSeriesWithCI::from_proportions(grid.to_vec(), &successes, replicas)
}

#[cfg(test)]
mod tests;
