//! Mean-field (complete-graph limit) solvers.
//!
//! For finite-state jump dynamics with normalized rates the law of the
//! limiting nonlinear process solves a nonlinear master equation,
//! integrated here with classical RK4. Particle methods approximate the
//! same flows stochastically: N particles interacting through their
//! running empirical measure, for jump and diffusion dynamics alike.
//!
//! ```
//! use sparse_ips::jump::contact_model;
//! use sparse_ips::mean_field::solve_mf_master;
//!
//! let flow = solve_mf_master(&contact_model(4.0), &[0.5, 0.5], 20.0, 0.01).unwrap();
//! let end = flow.simplex_at(flow.grid.len() - 1);
//! assert!((end[1] - 0.75).abs() < 1e-3); // mean-field fixed point 1 - 1/λ
//! ```

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::diffusion::{DiffusionInit, DiffusionModel};
use crate::error::{Error, Result};
use crate::jump::JumpModel;
use crate::rng::substream;

/// Time-indexed probability distributions: simplex vectors for finite
/// state spaces, equal-weight sample sets for real-valued ones.
pub struct MeasureFlow {
    pub grid: Vec<f64>,
    pub values: FlowValues,
}

pub enum FlowValues {
    Simplex(Vec<Vec<f64>>),
    Samples(Vec<Vec<f64>>),
}

impl MeasureFlow {
    /// Simplex vector at grid index `k`; panics on sample-valued flows.
    pub fn simplex_at(&self, k: usize) -> &[f64] {
        match &self.values {
            FlowValues::Simplex(v) => &v[k],
            FlowValues::Samples(_) => panic!("sample-valued flow"),
        }
    }

    pub fn samples_at(&self, k: usize) -> &[f64] {
        match &self.values {
            FlowValues::Samples(v) => &v[k],
            FlowValues::Simplex(_) => panic!("simplex-valued flow"),
        }
    }

    /// Index of the grid point closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        self.grid
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (*a - t).abs().total_cmp(&(*b - t).abs()))
            .map(|(i, _)| i)
            .unwrap()
    }

    /// CSV export: `t,state,probability` or `t,sample,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match &self.values {
            FlowValues::Simplex(rows) => {
                writeln!(w, "t,state,probability")?;
                for (k, row) in rows.iter().enumerate() {
                    for (s, &p) in row.iter().enumerate() {
                        writeln!(w, "{},{s},{p}", self.grid[k])?;
                    }
                }
            }
            FlowValues::Samples(rows) => {
                writeln!(w, "t,sample,value")?;
                for (k, row) in rows.iter().enumerate() {
                    for (i, &x) in row.iter().enumerate() {
                        writeln!(w, "{},{i},{x}", self.grid[k])?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn check_simplex(mu: &[f64]) -> Result<()> {
    if mu.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidInput("negative entry in simplex vector".into()));
    }
    let sum: f64 = mu.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("simplex sums to {sum}")));
    }
    Ok(())
}

/// Right-hand side of the nonlinear master equation:
/// dμ(x) = Σ_j [ μ(x−j) r̂_j(t, x−j, μ) − μ(x) r̂_j(t, x, μ) ].
fn master_rhs(m: &JumpModel, t: f64, mu: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|d| *d = 0.0);
    for x in 0..m.n_states() {
        for j in 0..m.jumps().len() {
            if let Some(y) = m.target(x as u8, j) {
                let flux = mu[x] * m.normalized_rate(j, t, x as u8, mu);
                out[x] -= flux;
                out[y as usize] += flux;
            }
        }
    }
}

/// Solve the nonlinear master equation with RK4, clipping tiny negative
/// entries and renormalizing after each step.
pub fn solve_mf_master(m: &JumpModel, mu0: &[f64], horizon: f64, dt: f64) -> Result<MeasureFlow> {
    if !m.has_normalized() {
        return Err(Error::InvalidInput("model has no normalized rates".into()));
    }
    if mu0.len() != m.n_states() {
        return Err(Error::InvalidInput("mu0 length mismatch".into()));
    }
    check_simplex(mu0)?;
    if dt <= 0.0 || horizon <= 0.0 {
        return Err(Error::InvalidInput("need positive dt and horizon".into()));
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let s = m.n_states();
    let mut mu = mu0.to_vec();
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(mu.clone());
    let mut k1 = vec![0.0; s];
    let mut k2 = vec![0.0; s];
    let mut k3 = vec![0.0; s];
    let mut k4 = vec![0.0; s];
    let mut stage = vec![0.0; s];
    for step in 0..steps {
        let t = step as f64 * dt;
        master_rhs(m, t, &mu, &mut k1);
        for x in 0..s {
            stage[x] = mu[x] + 0.5 * dt * k1[x];
        }
        master_rhs(m, t + 0.5 * dt, &stage, &mut k2);
        for x in 0..s {
            stage[x] = mu[x] + 0.5 * dt * k2[x];
        }
        master_rhs(m, t + 0.5 * dt, &stage, &mut k3);
        for x in 0..s {
            stage[x] = mu[x] + dt * k3[x];
        }
        master_rhs(m, t + dt, &stage, &mut k4);
        for x in 0..s {
            mu[x] += dt / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
        }
        let worst = mu.iter().fold(0.0f64, |w, &p| w.max(-p));
        if worst > 1e-6 {
            return Err(Error::SimplexViolation {
                t: t + dt,
                violation: worst,
            });
        }
        for p in mu.iter_mut() {
            *p = p.max(0.0);
        }
        let total: f64 = mu.iter().sum();
        for p in mu.iter_mut() {
            *p /= total;
        }
        rows.push(mu.clone());
    }
    Ok(MeasureFlow {
        grid: (0..=steps).map(|k| k as f64 * dt).collect(),
        values: FlowValues::Simplex(rows),
    })
}

/// Particle approximation of the nonlinear jump process: N particles jump
/// at normalized rates against the empirical measure, which is frozen over
/// each dt-window.
pub fn simulate_nonlinear_jump(
    m: &JumpModel,
    mu0: &[f64],
    horizon: f64,
    n_particles: usize,
    dt: f64,
    seed: u64,
) -> Result<MeasureFlow> {
    if !m.has_normalized() || !m.normalized_bound().is_finite() {
        return Err(Error::InvalidInput(
            "model needs normalized rates with a finite bound".into(),
        ));
    }
    check_simplex(mu0)?;
    if n_particles < 100 {
        return Err(Error::InvalidInput("need at least 100 particles".into()));
    }
    if dt <= 0.0 || horizon <= 0.0 {
        return Err(Error::InvalidInput("need positive dt and horizon".into()));
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let s = m.n_states();
    let n_jumps = m.jumps().len();
    let bound = m.normalized_bound();
    let intensity = n_jumps as f64 * bound;
    let mut particles: Vec<(u8, _)> = (0..n_particles)
        .map(|i| {
            let mut rng = substream(seed, i as u64, 0);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut state = s as u8 - 1;
            for (x, &p) in mu0.iter().enumerate() {
                acc += p;
                if u < acc {
                    state = x as u8;
                    break;
                }
            }
            (state, rng)
        })
        .collect();
    let empirical = |ps: &[(u8, _)]| -> Vec<f64> {
        let mut mu = vec![0.0; s];
        for &(x, _) in ps {
            mu[x as usize] += 1.0 / ps.len() as f64;
        }
        mu
    };
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(empirical(&particles));
    for step in 0..steps {
        let t0 = step as f64 * dt;
        let frozen = rows[step].clone();
        particles.par_iter_mut().for_each(|(state, rng)| {
            if intensity <= 0.0 {
                return;
            }
            let mut t = t0;
            loop {
                let u: f64 = rng.gen();
                t += -(1.0 - u).ln() / intensity;
                if t > t0 + dt {
                    break;
                }
                let pick: f64 = rng.gen::<f64>() * intensity;
                let mut acc = 0.0;
                for j in 0..n_jumps {
                    acc += m.normalized_rate(j, t, *state, &frozen);
                    if pick < acc {
                        if let Some(y) = m.target(*state, j) {
                            *state = y;
                        }
                        break;
                    }
                }
            }
        });
        rows.push(empirical(&particles));
    }
    Ok(MeasureFlow {
        grid: (0..=steps).map(|k| k as f64 * dt).collect(),
        values: FlowValues::Simplex(rows),
    })
}

/// Particle method for the nonlinear (McKean–Vlasov) diffusion: N
/// particles evolve by Euler–Maruyama with drift read from the frozen
/// previous-step sample set.
pub fn solve_mckean_vlasov_diffusion(
    m: &DiffusionModel,
    mu0: &DiffusionInit,
    horizon: f64,
    n_particles: usize,
    dt: f64,
    seed: u64,
) -> Result<MeasureFlow> {
    if n_particles < 100 {
        return Err(Error::InvalidInput("need at least 100 particles".into()));
    }
    if dt <= 0.0 || horizon <= 0.0 {
        return Err(Error::InvalidInput("need positive dt and horizon".into()));
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let mut x = {
        let mut rng = substream(seed, 0, 1u64 << 62);
        mu0_draw(mu0, n_particles, &mut rng)
    };
    let mut rngs: Vec<_> = (0..n_particles)
        .map(|i| substream(seed, i as u64, 1))
        .collect();
    let sqrt_dt = dt.sqrt();
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(x.clone());
    for step in 0..steps {
        let t = step as f64 * dt;
        let frozen = x.clone();
        let next: Vec<f64> = x
            .par_iter()
            .zip(rngs.par_iter_mut())
            .map(|(&xi, rng)| {
                let b = m.drift_at(t, xi, &frozen);
                let z: f64 = rng.sample(StandardNormal);
                xi + b * dt + sqrt_dt * z
            })
            .collect();
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step, vertex: i });
        }
        x = next;
        rows.push(x.clone());
    }
    Ok(MeasureFlow {
        grid: (0..=steps).map(|k| k as f64 * dt).collect(),
        values: FlowValues::Samples(rows),
    })
}

fn mu0_draw<R: Rng>(init: &DiffusionInit, n: usize, rng: &mut R) -> Vec<f64> {
    match init {
        DiffusionInit::Fixed(xs) => {
            // cycle the fixed values to fill N particles
            (0..n).map(|i| xs[i % xs.len()]).collect()
        }
        DiffusionInit::Gaussian { mean, std } => (0..n)
            .map(|_| mean + std * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    }
}

/// Probability that the root agrees with exactly `k` of `kappa`
/// independent neighbors, all distributed by the flow's marginal:
/// Σ_s μ_t(s)·C(κ,k)·μ_t(s)^k·(1−μ_t(s))^{κ−k}, per grid time.
pub fn mf_agreement_statistic(flow: &MeasureFlow, kappa: usize, k: usize) -> Result<Vec<f64>> {
    if k > kappa {
        return Err(Error::InvalidInput(format!("k={k} > kappa={kappa}")));
    }
    let rows = match &flow.values {
        FlowValues::Simplex(rows) => rows,
        FlowValues::Samples(_) => {
            return Err(Error::InvalidInput(
                "agreement statistic needs a finite-state flow".into(),
            ))
        }
    };
    let choose = binomial(kappa, k);
    Ok(rows
        .iter()
        .map(|mu| {
            mu.iter()
                .map(|&p| p * choose * p.powi(k as i32) * (1.0 - p).powi((kappa - k) as i32))
                .sum()
        })
        .collect())
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

#[cfg(test)]
mod tests;
