//! Simulation and approximation toolkit for interacting particle systems
//! on sparse random graphs.
//!
//! The crate provides:
//!
//! - [`graphs`]: finite rooted graphs, sparse random graph generators,
//!   unimodular Galton–Watson tree sampling, and local-neighborhood
//!   analysis up to rooted isomorphism.
//! - [`jump`]: exact event-driven simulation of interacting pure-jump
//!   processes (voter, contact, SIR) by per-vertex thinning.
//! - [`diffusion`]: Euler–Maruyama simulation of pairwise interacting
//!   diffusions with unit noise.
//! - [`mean_field`]: the nonlinear master equation for finite-state jump
//!   dynamics on the complete-graph limit, and particle methods for
//!   nonlinear (McKean–Vlasov) processes.
//! - [`local_eq`]: Markovianized local equations for the root-neighborhood
//!   marginal on regular trees, as a closed ODE and as a self-consistent
//!   Monte Carlo fixed point.
//! - [`observables`]: empirical measures, Wasserstein distances, agreement
//!   curves with confidence intervals, correlation decay, and a
//!   conditional-independence diagnostic.
//! - [`scenario`]: TOML-configured scenario runner behind the `sparse-ips`
//!   command-line tool, with CSV and SVG output.
//!
//! Everything downstream of a seed is deterministic: random number streams
//! are derived per (seed, replica, vertex), so results do not depend on
//! thread count.
//!
//! ```
//! use sparse_ips::graphs::RootedGraph;
//! use sparse_ips::jump::{simulate_jump, voter_model};
//!
//! let g = RootedGraph::regular_tree(3, 4).unwrap();
//! let model = voter_model();
//! let init = vec![0u8; g.len()];
//! let ens = simulate_jump(&g, &model, &init, 1.0, 10, 42).unwrap();
//! assert_eq!(ens.replicas(), 10);
//! // all-zeros is voter consensus: nothing ever jumps
//! assert!((0..10).all(|r| (0..g.len()).all(|v| ens.events(r, v).is_empty())));
//! ```

pub mod diffusion;
pub mod error;
pub mod graphs;
pub mod jump;
pub mod local_eq;
pub mod mean_field;
pub mod observables;
pub mod rng;
pub mod scenario;
pub mod svg;

pub use error::Error;
