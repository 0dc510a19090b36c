use super::*;
use crate::graphs::RootedGraph;
use crate::jump::{
    contact_model, simulate_jump_init, voter_model, JumpInit, JumpModel, NeighborCounts,
};

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[test]
fn voter_master_marginal_is_constant() {
    let m = voter_model();
    let flow = solve_mf_master(&m, &[0.7, 0.3], 5.0, 0.01).unwrap();
    for k in 0..flow.grid.len() {
        assert!((flow.simplex_at(k)[1] - 0.3).abs() <= 1e-8);
    }
}

#[test]
fn contact_master_reaches_endemic_fixed_point() {
    // normalized contact with lambda = 2 has stable fixed point 1 - 1/lambda
    let m = contact_model(2.0);
    let flow = solve_mf_master(&m, &[0.5, 0.5], 5.0, 0.01).unwrap();
    let last = flow.simplex_at(flow.grid.len() - 1);
    assert!((last[1] - 0.5).abs() <= 1e-6, "mu(1) = {}", last[1]);

    let flow = solve_mf_master(&m, &[0.9, 0.1], 20.0, 0.01).unwrap();
    let last = flow.simplex_at(flow.grid.len() - 1);
    assert!((last[1] - 0.5).abs() <= 1e-6, "mu(1) = {}", last[1]);
}

#[test]
fn zero_rate_model_is_constant() {
    let m = JumpModel::new(
        3,
        vec![1, -1],
        Box::new(|_, _, _, _| 0.0),
        Box::new(|_, _| 0.0),
    )
    .with_normalized(Box::new(|_, _, _, _| 0.0), 0.0);
    let mu0 = [0.2, 0.5, 0.3];
    let flow = solve_mf_master(&m, &mu0, 2.0, 0.01).unwrap();
    for k in 0..flow.grid.len() {
        assert!(tv(flow.simplex_at(k), &mu0) <= 1e-12);
    }
}

#[test]
fn master_conserves_mass() {
    let m = contact_model(3.0);
    let flow = solve_mf_master(&m, &[0.6, 0.4], 10.0, 0.02).unwrap();
    for k in 0..flow.grid.len() {
        let row = flow.simplex_at(k);
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(row.iter().all(|&p| p >= 0.0));
    }
}

#[test]
fn master_rejects_bad_input() {
    let m = voter_model();
    assert!(solve_mf_master(&m, &[0.5, 0.6], 1.0, 0.01).is_err());
    assert!(solve_mf_master(&m, &[1.0], 1.0, 0.01).is_err());
    assert!(solve_mf_master(&m, &[0.5, 0.5], 1.0, 0.0).is_err());
    let bare = JumpModel::new(
        2,
        vec![1],
        Box::new(|_, _, _, _| 0.0),
        Box::new(|_, _| 0.0),
    );
    assert!(solve_mf_master(&bare, &[1.0, 0.0], 1.0, 0.01).is_err());
}

#[test]
fn nonlinear_particles_track_master() {
    let m = contact_model(2.0);
    let mu0 = [0.9, 0.1];
    let n = 10_000;
    let master = solve_mf_master(&m, &mu0, 2.0, 0.01).unwrap();
    let particles = simulate_nonlinear_jump(&m, &mu0, 2.0, n, 0.01, 71).unwrap();
    let tol = 5.0 / (n as f64).sqrt();
    for t in [1.0, 2.0] {
        let km = master.index_of(t);
        let kp = particles.index_of(t);
        let d = tv(master.simplex_at(km), particles.simplex_at(kp));
        assert!(d <= tol, "t={t}: tv={d} > {tol}");
    }
}

#[test]
fn nonlinear_particles_deterministic_in_seed() {
    let m = voter_model();
    let a = simulate_nonlinear_jump(&m, &[0.6, 0.4], 1.0, 500, 0.05, 9).unwrap();
    let b = simulate_nonlinear_jump(&m, &[0.6, 0.4], 1.0, 500, 0.05, 9).unwrap();
    for k in 0..a.grid.len() {
        assert_eq!(a.simplex_at(k), b.simplex_at(k));
    }
}

#[test]
fn mv_linear_drift_mean_decays_exponentially() {
    // dX = -X dt + dB from X_0 = 1: E[X_t] = e^{-t}
    let m = DiffusionModel::general(Box::new(|_t, x, _nu: &[f64]| -x), 1.0);
    let n = 20_000;
    let flow =
        solve_mckean_vlasov_diffusion(&m, &DiffusionInit::Fixed(vec![1.0]), 1.0, n, 0.005, 17)
            .unwrap();
    let last = flow.samples_at(flow.grid.len() - 1);
    let mean = last.iter().sum::<f64>() / n as f64;
    let expect = (-1.0f64).exp();
    assert!(
        (mean - expect).abs() / expect <= 0.05,
        "mean {mean} vs {expect}"
    );
}

#[test]
fn mv_zero_drift_variance_grows_linearly() {
    let m = DiffusionModel::general(Box::new(|_, _, _: &[f64]| 0.0), 0.0);
    let n = 20_000;
    let flow =
        solve_mckean_vlasov_diffusion(&m, &DiffusionInit::Fixed(vec![0.0]), 1.0, n, 0.01, 29)
            .unwrap();
    let last = flow.samples_at(flow.grid.len() - 1);
    let mean = last.iter().sum::<f64>() / n as f64;
    let var = last.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    assert!((var - 1.0).abs() <= 0.05, "var {var}");
}

#[test]
fn mv_antisymmetric_pairwise_drift_conserves_mean() {
    // beta(x, y) = sin(y - x) is antisymmetric, so the empirical mean is
    // driven by noise alone
    let m = DiffusionModel::pairwise(Box::new(|_t, x, y| (y - x).sin()), 1.0);
    let n = 2_000;
    let init = DiffusionInit::Gaussian {
        mean: 0.5,
        std: 0.3,
    };
    let flow = solve_mckean_vlasov_diffusion(&m, &init, 0.5, n, 0.01, 41).unwrap();
    let mean_at = |k: usize| flow.samples_at(k).iter().sum::<f64>() / n as f64;
    let drift = (mean_at(flow.grid.len() - 1) - mean_at(0)).abs();
    // noise floor: sd of the mean increment is sqrt(t/n) ~ 0.0158
    assert!(drift <= 0.07, "mean moved by {drift}");
}

#[test]
fn agreement_statistic_matches_closed_forms() {
    let point = MeasureFlow {
        grid: vec![0.0],
        values: FlowValues::Simplex(vec![vec![0.0, 1.0]]),
    };
    let a = mf_agreement_statistic(&point, 4, 4).unwrap();
    assert!((a[0] - 1.0).abs() <= 1e-12);

    let uniform = MeasureFlow {
        grid: vec![0.0],
        values: FlowValues::Simplex(vec![vec![0.5, 0.5]]),
    };
    let a = mf_agreement_statistic(&uniform, 3, 2).unwrap();
    assert!((a[0] - 3.0 / 8.0).abs() <= 1e-12);

    let bern = MeasureFlow {
        grid: vec![0.0],
        values: FlowValues::Simplex(vec![vec![0.7, 0.3]]),
    };
    let a = mf_agreement_statistic(&bern, 3, 2).unwrap();
    assert!((a[0] - 0.3654).abs() <= 1e-12, "got {}", a[0]);

    assert!(mf_agreement_statistic(&bern, 3, 4).is_err());
}

#[test]
fn binomial_coefficients() {
    assert_eq!(binomial(3, 2), 3.0);
    assert_eq!(binomial(5, 0), 1.0);
    assert_eq!(binomial(6, 3), 20.0);
}

#[test]
fn propagation_of_chaos_on_complete_graphs() {
    // contact process with degree-normalized rates on K_n: the root
    // marginal at t=1 approaches the mean-field law as n grows
    let lambda = 2.0;
    let model = || {
        JumpModel::new(
            2,
            vec![1, -1],
            Box::new(move |j, _t, x, theta: &NeighborCounts| match (j, x) {
                (0, 0) => lambda * theta.fraction(1),
                (1, 1) => 1.0,
                _ => 0.0,
            }),
            Box::new(move |_k, _t| lambda.max(1.0)),
        )
    };
    let mu0 = [0.9, 0.1];
    let master = solve_mf_master(&contact_model(lambda), &mu0, 1.0, 0.005).unwrap();
    let p_mf = master.simplex_at(master.grid.len() - 1)[1];

    let mut errs = Vec::new();
    for (n, replicas) in [(50usize, 4000usize), (200, 1500), (1000, 400)] {
        let g = RootedGraph::complete(n).unwrap();
        let m = model();
        let init = JumpInit::Product(mu0.to_vec());
        let ens = simulate_jump_init(&g, &m, &init, 1.0, replicas, 1234).unwrap();
        let mut total = 0.0;
        for r in 0..replicas {
            let infected = (0..n).filter(|&v| ens.state_at(r, v, 1.0) == 1).count();
            total += infected as f64 / n as f64;
        }
        errs.push((total / replicas as f64 - p_mf).abs());
    }
    assert!(errs[2] <= 0.01, "n=1000 err {}", errs[2]);
    assert!(errs[0] <= 0.05, "n=50 err {}", errs[0]);
    assert!(
        errs[2] <= errs[0] + 0.005,
        "no decay: {errs:?} toward mean-field value {p_mf}"
    );
}
