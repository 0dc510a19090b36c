//! Scenario runner: TOML configs, built-in figure scenarios, the
//! hydrodynamic convergence report, and reproducibility manifests.
//!
//! ```
//! use sparse_ips::scenario::{builtin_scenario, ScenarioSpec};
//!
//! let fig2 = builtin_scenario("fig2").unwrap();
//! assert_eq!(fig2.replicas, 100_000);
//!
//! let spec = ScenarioSpec::from_toml(r#"
//!     name = "demo"
//!     model = "voter"
//!     horizon = 1.0
//!     dt = 0.1
//!     replicas = 1000
//!     methods = ["direct", "meanfield"]
//!
//!     [graph.regular_tree]
//!     kappa = 3
//!     depth = 4
//!
//!     [init.bernoulli]
//!     p = 0.3
//! "#).unwrap();
//! assert!(spec.validate().is_ok());
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graphs::{OffspringDistribution, RootedGraph, UgwTruncation};
use crate::jump::{contact_model, sir_model, voter_model, JumpInit, JumpModel};
use crate::local_eq::{
    direct_tree_baseline, simulate_local_eq_fixed_point, solve_local_eq_ode,
};
use crate::mean_field::{mf_agreement_statistic, solve_mf_master};
use crate::observables::{empirical_measure_replica, wasserstein_discrete, TimeSeriesWithCI};
use crate::rng::substream;
use crate::svg::{line_plot, Series};
use crate::{graphs, jump};

fn config_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        msg: msg.into(),
    }
}

/// Graph generator specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    RegularTree { kappa: usize, depth: usize },
    ErdosRenyi { n: usize, c: f64 },
    ErdosRenyiComponent { n: usize, c: f64 },
    Cycle { n: usize },
    Path { n: usize },
    Complete { n: usize },
    EdgeList { file: String },
}

impl GraphSpec {
    /// Build the graph; random generators draw from the (seed, replica)
    /// substream so different replicas can see different graphs.
    pub fn build(&self, seed: u64, replica: u64) -> Result<RootedGraph> {
        match self {
            GraphSpec::RegularTree { kappa, depth } => RootedGraph::regular_tree(*kappa, *depth),
            GraphSpec::ErdosRenyi { n, c } => {
                let mut rng = substream(seed, replica, GRAPH_STREAM);
                RootedGraph::erdos_renyi(*n, (c / *n as f64).min(1.0), &mut rng)
            }
            GraphSpec::ErdosRenyiComponent { n, c } => {
                let mut rng = substream(seed, replica, GRAPH_STREAM);
                let g = RootedGraph::erdos_renyi(*n, (c / *n as f64).min(1.0), &mut rng)?;
                g.component_of_uniform_root(&mut rng)
            }
            GraphSpec::Cycle { n } => RootedGraph::cycle(*n),
            GraphSpec::Path { n } => RootedGraph::path(*n),
            GraphSpec::Complete { n } => RootedGraph::complete(*n),
            GraphSpec::EdgeList { file } => {
                let f = fs::File::open(file)
                    .map_err(|e| config_err("graph.file", format!("{file}: {e}")))?;
                RootedGraph::read_edge_list(std::io::BufReader::new(f))
            }
        }
    }
}

const GRAPH_STREAM: u64 = (1 << 62) + 1;

/// Jump-model specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Voter,
    Contact { lambda: f64 },
    Sir { lambda: f64, recovery: f64 },
}

impl ModelSpec {
    pub fn build(&self) -> Result<JumpModel> {
        match self {
            ModelSpec::Voter => Ok(voter_model()),
            ModelSpec::Contact { lambda } => {
                if *lambda < 0.0 {
                    return Err(config_err("model.lambda", "must be ≥ 0"));
                }
                Ok(contact_model(*lambda))
            }
            ModelSpec::Sir { lambda, recovery } => {
                if *lambda < 0.0 || *recovery < 0.0 {
                    return Err(config_err("model", "rates must be ≥ 0"));
                }
                Ok(sir_model(*lambda, *recovery))
            }
        }
    }
}

/// Initial-law specification: i.i.d. per vertex.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    Bernoulli { p: f64 },
    Product { probs: Vec<f64> },
}

impl InitSpec {
    pub fn build(&self, n_states: usize) -> Result<JumpInit> {
        let probs = self.marginal(n_states)?;
        Ok(JumpInit::Product(probs))
    }

    /// The per-vertex law as a simplex vector over the model's states.
    pub fn marginal(&self, n_states: usize) -> Result<Vec<f64>> {
        let probs = match self {
            InitSpec::Bernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(config_err("init.p", "must lie in [0,1]"));
                }
                let mut v = vec![0.0; n_states];
                v[0] = 1.0 - p;
                v[1.min(n_states - 1)] = *p;
                v
            }
            InitSpec::Product { probs } => probs.clone(),
        };
        if probs.len() != n_states {
            return Err(config_err("init.probs", "length must match the state space"));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(config_err("init.probs", "must be a probability vector"));
        }
        Ok(probs)
    }
}

/// Approximation methods to run side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    Meanfield,
    LocaleqOde,
    LocaleqMc,
}

/// A figure-style scenario: one graph/model/init and a set of methods,
/// all reduced to the root agreement-with-exactly-k curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub graph: GraphSpec,
    pub model: ModelSpec,
    pub init: InitSpec,
    pub horizon: f64,
    pub dt: f64,
    pub replicas: usize,
    pub methods: Vec<Method>,
    /// k in the agreement-with-exactly-k statistic (default 2).
    pub agreement_k: Option<usize>,
    pub seed: Option<u64>,
    /// Monte Carlo fixed-point controls (localeq-mc only).
    pub mc_max_iters: Option<usize>,
    pub mc_tol: Option<f64>,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScenarioSpec =
            toml::from_str(text).map_err(|e| config_err("scenario", e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon <= 0.0 {
            return Err(config_err("horizon", "must be positive"));
        }
        if self.dt <= 0.0 || self.dt > self.horizon {
            return Err(config_err("dt", "must lie in (0, horizon]"));
        }
        if self.replicas == 0 {
            return Err(config_err("replicas", "must be positive"));
        }
        if self.methods.is_empty() {
            return Err(config_err("methods", "need at least one method"));
        }
        self.model.build()?;
        Ok(())
    }

    /// The tree parameters, required by the local-equation methods and
    /// the agreement statistic.
    fn tree_params(&self) -> Result<(usize, usize)> {
        match self.graph {
            GraphSpec::RegularTree { kappa, depth } => Ok((kappa, depth)),
            _ => Err(config_err(
                "graph",
                "this scenario requires a regular_tree graph",
            )),
        }
    }
}

/// Built-in scenarios reproducing the figure comparisons.
pub fn builtin_scenario(name: &str) -> Option<ScenarioSpec> {
    let base = ScenarioSpec {
        name: name.to_string(),
        graph: GraphSpec::RegularTree { kappa: 3, depth: 9 },
        model: ModelSpec::Voter,
        init: InitSpec::Bernoulli { p: 0.3 },
        horizon: 5.0,
        dt: 0.1,
        replicas: 100_000,
        methods: vec![],
        agreement_k: Some(2),
        seed: Some(20260826),
        mc_max_iters: None,
        mc_tol: None,
    };
    match name {
        "fig2" => Some(ScenarioSpec {
            methods: vec![Method::Direct, Method::Meanfield],
            ..base
        }),
        "fig4" => Some(ScenarioSpec {
            methods: vec![Method::Direct, Method::Meanfield, Method::LocaleqOde],
            ..base
        }),
        _ => None,
    }
}

/// Curves produced by a scenario run, keyed by method.
pub struct ScenarioOutput {
    pub grid: Vec<f64>,
    pub curves: Vec<(Method, TimeSeriesWithCI)>,
    pub files: Vec<PathBuf>,
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::Direct => "direct",
        Method::Meanfield => "meanfield",
        Method::LocaleqOde => "localeq-ode",
        Method::LocaleqMc => "localeq-mc",
    }
}

/// Run a figure-style scenario, writing one CSV per method, an overlay
/// SVG, and a manifest into `out_dir`.
pub fn run_scenario(
    spec: &ScenarioSpec,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<ScenarioOutput> {
    spec.validate()?;
    let seed = seed_override.or(spec.seed).unwrap_or(0);
    let m = spec.model.build()?;
    let k_agree = spec.agreement_k.unwrap_or(2);
    let (kappa, depth) = spec.tree_params()?;
    let mu0 = spec.init.marginal(m.n_states())?;
    let init = spec.init.build(m.n_states())?;
    let steps = (spec.horizon / spec.dt).round().max(1.0) as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * spec.dt).collect();

    fs::create_dir_all(out_dir)?;
    let mut curves = Vec::new();
    let mut files = Vec::new();
    for &method in &spec.methods {
        let curve = match method {
            Method::Direct => direct_tree_baseline(
                &m,
                kappa,
                depth,
                &init,
                &grid,
                k_agree,
                spec.replicas,
                seed,
            )?,
            Method::Meanfield => {
                let flow = solve_mf_master(&m, &mu0, spec.horizon, spec.dt)?;
                let stat = mf_agreement_statistic(&flow, kappa, k_agree)?;
                TimeSeriesWithCI {
                    grid: grid.clone(),
                    mean: stat,
                    halfwidth: vec![0.0; grid.len()],
                    replicas: 0,
                }
            }
            Method::LocaleqOde => {
                let (law, _) = solve_local_eq_ode(&m, kappa, &mu0, spec.horizon, spec.dt)?;
                TimeSeriesWithCI {
                    grid: grid.clone(),
                    mean: law.agreement_statistic(k_agree),
                    halfwidth: vec![0.0; grid.len()],
                    replicas: 0,
                }
            }
            Method::LocaleqMc => {
                let res = simulate_local_eq_fixed_point(
                    &m,
                    kappa,
                    &mu0,
                    spec.horizon,
                    spec.dt,
                    spec.replicas.max(10_000),
                    spec.mc_max_iters.unwrap_or(10),
                    spec.mc_tol.unwrap_or(0.005),
                    seed,
                )?;
                TimeSeriesWithCI {
                    grid: grid.clone(),
                    mean: res.law.agreement_statistic(k_agree),
                    halfwidth: vec![0.0; grid.len()],
                    replicas: spec.replicas,
                }
            }
        };
        let path = out_dir.join(format!("{}_{}.csv", spec.name, method_label(method)));
        let mut f = fs::File::create(&path)?;
        curve.write_csv(&mut f)?;
        files.push(path);
        curves.push((method, curve));
    }

    // overlay plot
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let series: Vec<Series> = curves
        .iter()
        .enumerate()
        .map(|(i, (method, c))| Series {
            label: method_label(*method).to_string(),
            color: colors[i % colors.len()].to_string(),
            points: c.grid.iter().copied().zip(c.mean.iter().copied()).collect(),
            ci: Some(c.halfwidth.clone()),
        })
        .collect();
    let svg = line_plot(
        &spec.name,
        "t",
        &format!("P(root agrees with exactly {k_agree})"),
        &series,
    );
    let svg_path = out_dir.join(format!("{}.svg", spec.name));
    fs::write(&svg_path, svg)?;
    files.push(svg_path);

    files.push(write_manifest(out_dir, &spec.name, seed, spec)?);
    Ok(ScenarioOutput {
        grid,
        curves,
        files,
    })
}

/// Reproducibility manifest: seed, SHA-256 of the canonical config, and
/// the crate version.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub config_sha256: String,
    pub version: String,
}

pub fn write_manifest<S: Serialize>(
    out_dir: &Path,
    name: &str,
    seed: u64,
    spec: &S,
) -> Result<PathBuf> {
    let canonical =
        toml::to_string(spec).map_err(|e| config_err("manifest", e.to_string()))?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let manifest = Manifest {
        name: name.to_string(),
        seed,
        config_sha256: format!("{:x}", hasher.finalize()),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let path = out_dir.join(format!("{name}_manifest.toml"));
    fs::write(
        &path,
        toml::to_string(&manifest).map_err(|e| config_err("manifest", e.to_string()))?,
    )?;
    Ok(path)
}

/// Verify that a manifest matches a config's hash.
pub fn verify_manifest<S: Serialize>(path: &Path, spec: &S) -> Result<bool> {
    let text = fs::read_to_string(path)?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| config_err("manifest", e.to_string()))?;
    let canonical =
        toml::to_string(spec).map_err(|e| config_err("manifest", e.to_string()))?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(manifest.config_sha256 == format!("{:x}", hasher.finalize()))
}

/// Random-limit demonstration: the across-replica dispersion of the
/// time-t empirical measure on the uniform-root component of G(n, c/n)
/// stays bounded away from zero as n grows — the limit is genuinely
/// random.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomLimitSpec {
    pub ns: Vec<usize>,
    pub c: f64,
    pub p: f64,
    pub t: f64,
    pub replicas: usize,
    pub seed: Option<u64>,
}

impl Default for RandomLimitSpec {
    fn default() -> Self {
        Self {
            ns: vec![300, 1000, 3000],
            c: 3.0,
            p: 0.3,
            t: 1.0,
            replicas: 300,
            seed: Some(20260826),
        }
    }
}

pub struct RandomLimitReport {
    pub ns: Vec<usize>,
    pub dispersion: Vec<f64>,
    pub files: Vec<PathBuf>,
}

/// Each replica draws a fresh graph (the limit's randomness includes the
/// tree), runs the voter model once, and records the empirical mass at
/// state 1 at time t; the report is the per-n standard deviation.
pub fn run_randomlimit(
    spec: &RandomLimitSpec,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<RandomLimitReport> {
    let seed = seed_override.or(spec.seed).unwrap_or(0);
    if spec.replicas < 2 {
        return Err(config_err("replicas", "need at least 2"));
    }
    let m = voter_model();
    fs::create_dir_all(out_dir)?;
    let mut dispersion = Vec::new();
    for (ni, &n) in spec.ns.iter().enumerate() {
        use rayon::prelude::*;
        let masses: Vec<f64> = (0..spec.replicas)
            .into_par_iter()
            .map(|r| -> Result<f64> {
                let gspec = GraphSpec::ErdosRenyiComponent { n, c: spec.c };
                let g = gspec.build(seed ^ (ni as u64), r as u64)?;
                let init = JumpInit::bernoulli(spec.p);
                let folded = jump::simulate_jump_fold(
                    &g,
                    &m,
                    &init,
                    spec.t,
                    0.0,
                    1,
                    seed ^ ((ni as u64) << 32) ^ (r as u64 + 1),
                    |_, rep| empirical_measure_replica(rep, spec.t, 2)[1],
                )?;
                Ok(folded[0])
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean = masses.iter().sum::<f64>() / masses.len() as f64;
        let var = masses.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (masses.len() - 1) as f64;
        dispersion.push(var.sqrt());
    }
    let path = out_dir.join("randomlimit.csv");
    let mut text = String::from("n,dispersion,replicas\n");
    for (i, &n) in spec.ns.iter().enumerate() {
        text.push_str(&format!("{n},{},{}\n", dispersion[i], spec.replicas));
    }
    fs::write(&path, text)?;
    let manifest = write_manifest(out_dir, "randomlimit", seed, spec)?;
    Ok(RandomLimitReport {
        ns: spec.ns.clone(),
        dispersion,
        files: vec![path, manifest],
    })
}

/// Hydrodynamic-limit convergence check: global empirical measure on
/// G(n, c/n) against the root law on truncated UGW(Poisson(c)) trees.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroSpec {
    pub ns: Vec<usize>,
    pub c: f64,
    pub p: f64,
    pub t: f64,
    /// Independent graph draws per n; distances are averaged over them.
    pub graph_seeds: usize,
    /// Simulation replicas per graph.
    pub replicas: usize,
    /// Sampled UGW trees for the baseline root law.
    pub ugw_samples: usize,
    pub ugw_depth: usize,
    pub seed: Option<u64>,
}

impl Default for HydroSpec {
    fn default() -> Self {
        Self {
            ns: vec![100, 300, 1000],
            c: 2.0,
            p: 0.3,
            t: 1.0,
            graph_seeds: 10,
            replicas: 200,
            ugw_samples: 2000,
            ugw_depth: 8,
            seed: Some(20260826),
        }
    }
}

pub struct HydroReport {
    pub ns: Vec<usize>,
    pub distances: Vec<f64>,
    pub baseline_law: Vec<f64>,
    pub inversions: usize,
    pub files: Vec<PathBuf>,
}

/// Root law of the voter model on sampled truncated UGW(Poisson(c))
/// trees at time t, averaged over tree draws and one replica each.
pub fn ugw_root_law(
    m: &JumpModel,
    c: f64,
    depth: usize,
    samples: usize,
    p: f64,
    t: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let rho = OffspringDistribution::poisson(c, 60)?;
    let trunc = UgwTruncation {
        max_depth: depth,
        max_vertices: 1_000_000,
    };
    let counts: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut rng = substream(seed, i as u64, GRAPH_STREAM);
            let tree = graphs::sample_ugw(&rho, trunc, &mut rng)?;
            let init = JumpInit::bernoulli(p);
            let root = tree.graph.root().unwrap() as usize;
            let folded = jump::simulate_jump_fold(
                &tree.graph,
                m,
                &init,
                t,
                0.0,
                1,
                seed ^ (i as u64 + 1),
                |_, rep| rep.state_at(root, t),
            )?;
            let mut mu = vec![0.0; m.n_states()];
            mu[folded[0] as usize] = 1.0;
            Ok(mu)
        })
        .collect::<Result<_>>()?;
    let mut law = vec![0.0; m.n_states()];
    for mu in &counts {
        for (s, &v) in mu.iter().enumerate() {
            law[s] += v / samples as f64;
        }
    }
    Ok(law)
}

pub fn run_hydro(
    spec: &HydroSpec,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<HydroReport> {
    use rayon::prelude::*;
    let seed = seed_override.or(spec.seed).unwrap_or(0);
    let m = voter_model();
    fs::create_dir_all(out_dir)?;
    let baseline = ugw_root_law(&m, spec.c, spec.ugw_depth, spec.ugw_samples, spec.p, spec.t, seed)?;
    let mut distances = Vec::new();
    for (ni, &n) in spec.ns.iter().enumerate() {
        let per_seed: Vec<f64> = (0..spec.graph_seeds)
            .into_par_iter()
            .map(|gs| -> Result<f64> {
                let gspec = GraphSpec::ErdosRenyi { n, c: spec.c };
                let g = gspec.build(seed ^ ((ni as u64) << 16), gs as u64)?;
                let init = JumpInit::bernoulli(spec.p);
                let mus = jump::simulate_jump_fold(
                    &g,
                    &m,
                    &init,
                    spec.t,
                    0.0,
                    spec.replicas,
                    seed ^ ((ni as u64) << 16) ^ ((gs as u64 + 1) << 40),
                    |_, rep| empirical_measure_replica(rep, spec.t, m.n_states()),
                )?;
                let mut avg = vec![0.0; m.n_states()];
                for mu in &mus {
                    for (s, &v) in mu.iter().enumerate() {
                        avg[s] += v / mus.len() as f64;
                    }
                }
                wasserstein_discrete(&avg, &baseline)
            })
            .collect::<Result<_>>()?;
        distances.push(per_seed.iter().sum::<f64>() / per_seed.len() as f64);
    }
    let inversions = distances.windows(2).filter(|w| w[1] > w[0]).count();
    let path = out_dir.join("hydro.csv");
    let mut text = String::from("n,w1_distance\n");
    for (i, &n) in spec.ns.iter().enumerate() {
        text.push_str(&format!("{n},{}\n", distances[i]));
    }
    fs::write(&path, text)?;
    let manifest = write_manifest(out_dir, "hydro", seed, spec)?;
    Ok(HydroReport {
        ns: spec.ns.clone(),
        distances,
        baseline_law: baseline,
        inversions,
        files: vec![path, manifest],
    })
}

/// Config for the `simulate` subcommand: direct simulation reduced to
/// the global empirical-measure flow and, when the root has neighbors,
/// the root agreement curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub graph: GraphSpec,
    pub model: ModelSpec,
    pub init: InitSpec,
    pub horizon: f64,
    pub dt: f64,
    pub replicas: usize,
    pub agreement_k: Option<usize>,
    pub seed: Option<u64>,
}

pub fn run_simulate(
    cfg: &SimulateConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<Vec<PathBuf>> {
    let seed = seed_override.or(cfg.seed).unwrap_or(0);
    let m = cfg.model.build()?;
    let g = cfg.graph.build(seed, 0)?;
    let init = cfg.init.build(m.n_states())?;
    if cfg.dt <= 0.0 || cfg.horizon <= 0.0 {
        return Err(config_err("dt/horizon", "must be positive"));
    }
    let steps = (cfg.horizon / cfg.dt).round().max(1.0) as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * cfg.dt).collect();
    let k_agree = cfg.agreement_k.unwrap_or(2);
    let root = g.root().map(|r| r as usize);
    let kappa = root.map_or(0, |r| g.degree(r));
    let g_ref = &g;
    let grid_ref = &grid;
    let n_states = m.n_states();
    let folded = jump::simulate_jump_fold(&g, &m, &init, cfg.horizon, 0.0, cfg.replicas, seed, {
        move |_, rep| {
            let measures: Vec<Vec<f64>> = grid_ref
                .iter()
                .map(|&t| empirical_measure_replica(rep, t, n_states))
                .collect();
            let agree: Option<Vec<bool>> = (kappa > 0 && k_agree <= kappa).then(|| {
                grid_ref
                    .iter()
                    .map(|&t| crate::observables::root_agreement_indicator(g_ref, rep, t, k_agree))
                    .collect()
            });
            (measures, agree)
        }
    })?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();

    let mut text = String::from("t,state,probability\n");
    for (k, &t) in grid.iter().enumerate() {
        for s in 0..n_states {
            let avg: f64 = folded.iter().map(|(ms, _)| ms[k][s]).sum::<f64>()
                / folded.len() as f64;
            text.push_str(&format!("{t},{s},{avg}\n"));
        }
    }
    let path = out_dir.join("simulate_measure.csv");
    fs::write(&path, text)?;
    files.push(path);

    if folded.first().is_some_and(|(_, a)| a.is_some()) {
        let mut successes = vec![0u64; grid.len()];
        for (_, agree) in &folded {
            for (k, &hit) in agree.as_ref().unwrap().iter().enumerate() {
                if hit {
                    successes[k] += 1;
                }
            }
        }
        let curve = TimeSeriesWithCI::from_proportions(grid.clone(), &successes, cfg.replicas)?;
        let path = out_dir.join("simulate_agreement.csv");
        let mut f = fs::File::create(&path)?;
        curve.write_csv(&mut f)?;
        files.push(path);
    }
    files.push(write_manifest(out_dir, "simulate", seed, cfg)?);
    Ok(files)
}

/// Config for the `meanfield` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanfieldConfig {
    pub model: ModelSpec,
    pub init: InitSpec,
    pub horizon: f64,
    pub dt: f64,
    /// "master" (ODE) or "particles".
    pub method: String,
    pub particles: Option<usize>,
    pub seed: Option<u64>,
}

pub fn run_meanfield(
    cfg: &MeanfieldConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<Vec<PathBuf>> {
    let seed = seed_override.or(cfg.seed).unwrap_or(0);
    let m = cfg.model.build()?;
    let mu0 = cfg.init.marginal(m.n_states())?;
    let flow = match cfg.method.as_str() {
        "master" => solve_mf_master(&m, &mu0, cfg.horizon, cfg.dt)?,
        "particles" => crate::mean_field::simulate_nonlinear_jump(
            &m,
            &mu0,
            cfg.horizon,
            cfg.particles.unwrap_or(10_000),
            cfg.dt,
            seed,
        )?,
        other => return Err(config_err("method", format!("unknown method '{other}'"))),
    };
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("meanfield.csv");
    let mut f = fs::File::create(&path)?;
    flow.write_csv(&mut f)?;
    let manifest = write_manifest(out_dir, "meanfield", seed, cfg)?;
    Ok(vec![path, manifest])
}

/// Config for the `localeq` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocaleqConfig {
    pub model: ModelSpec,
    pub kappa: usize,
    pub init: InitSpec,
    pub horizon: f64,
    pub dt: f64,
    /// "ode" or "mc".
    pub method: String,
    pub replicas: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

pub fn run_localeq(
    cfg: &LocaleqConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<Vec<PathBuf>> {
    let seed = seed_override.or(cfg.seed).unwrap_or(0);
    let m = cfg.model.build()?;
    let mu0 = cfg.init.marginal(m.n_states())?;
    let (law, gamma) = match cfg.method.as_str() {
        "ode" => solve_local_eq_ode(&m, cfg.kappa, &mu0, cfg.horizon, cfg.dt)?,
        "mc" => {
            let res = simulate_local_eq_fixed_point(
                &m,
                cfg.kappa,
                &mu0,
                cfg.horizon,
                cfg.dt,
                cfg.replicas.unwrap_or(100_000),
                cfg.max_iters.unwrap_or(10),
                cfg.tol.unwrap_or(0.005),
                seed,
            )?;
            (res.law, res.gamma)
        }
        other => return Err(config_err("method", format!("unknown method '{other}'"))),
    };
    fs::create_dir_all(out_dir)?;
    let law_path = out_dir.join("localeq_law.csv");
    law.write_csv(fs::File::create(&law_path)?)?;
    let gamma_path = out_dir.join("localeq_gamma.csv");
    gamma.write_csv(fs::File::create(&gamma_path)?)?;
    let manifest = write_manifest(out_dir, "localeq", seed, cfg)?;
    Ok(vec![law_path, gamma_path, manifest])
}

/// Config for the `graphstats` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphStatsConfig {
    pub graph: GraphSpec,
    /// Independent samples for random generators (default 1).
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

pub fn run_graphstats(
    cfg: &GraphStatsConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<Vec<PathBuf>> {
    let seed = seed_override.or(cfg.seed).unwrap_or(0);
    let samples = cfg.samples.unwrap_or(1);
    fs::create_dir_all(out_dir)?;
    let mut text = String::from("sample,n,edges,max_degree,connected,root_degree\n");
    for i in 0..samples {
        let g = cfg.graph.build(seed, i as u64)?;
        let root_degree = g.root().map_or(0, |r| g.degree(r as usize));
        text.push_str(&format!(
            "{i},{},{},{},{},{root_degree}\n",
            g.len(),
            g.edge_count(),
            g.max_degree(),
            g.is_connected() as u8
        ));
    }
    let path = out_dir.join("graphstats.csv");
    fs::write(&path, text)?;
    let manifest = write_manifest(out_dir, "graphstats", seed, cfg)?;
    Ok(vec![path, manifest])
}

/// Install a rayon pool with `threads` workers (None = rayon default) and
/// run `f` inside it. Results are thread-count-invariant by the RNG
/// substream contract; this only controls parallelism.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests;
