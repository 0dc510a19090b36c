use super::*;
use crate::jump::{voter_model, JumpInit, JumpModel};
use crate::mean_field::{mf_agreement_statistic, MeasureFlow};

#[test]
fn consensus_initial_law_is_absorbing() {
    let m = voter_model();
    let (law, _) = solve_local_eq_ode(&m, 3, &[0.0, 1.0], 2.0, 0.02).unwrap();
    let all_ones = law.encode(1, &[1, 1, 1]);
    for row in &law.values {
        for (c, &p) in row.iter().enumerate() {
            let expect = if c == all_ones { 1.0 } else { 0.0 };
            assert!((p - expect).abs() <= 1e-12, "config {c}: {p}");
        }
    }
}

#[test]
fn symmetric_initial_law_keeps_root_at_half() {
    let m = voter_model();
    let (law, _) = solve_local_eq_ode(&m, 3, &[0.5, 0.5], 3.0, 0.01).unwrap();
    for k in 0..law.grid.len() {
        let mu = law.root_marginal(k);
        assert!((mu[1] - 0.5).abs() <= 1e-8, "t={}: {}", law.grid[k], mu[1]);
    }
}

#[test]
fn joint_law_mass_and_leaf_exchangeability() {
    let m = voter_model();
    let (law, _) = solve_local_eq_ode(&m, 3, &[0.7, 0.3], 2.0, 0.01).unwrap();
    for k in 0..law.grid.len() {
        let row = &law.values[k];
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        // all 6 permutations of the three leaf coordinates
        for (c, &p) in row.iter().enumerate() {
            let (root, leaves) = law.decode(c);
            for perm in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                let permuted: Vec<u8> = perm.iter().map(|&i| leaves[i]).collect();
                let q = row[law.encode(root, &permuted)];
                assert!((p - q).abs() <= 1e-8, "t={} c={c}", law.grid[k]);
            }
        }
    }
}

#[test]
fn realized_gamma_at_time_zero_matches_enumeration() {
    for kappa in [2usize, 3] {
        let m = voter_model();
        let mu0 = [0.7, 0.3];
        let (_, table) = solve_local_eq_ode(&m, kappa, &mu0, 0.5, 0.01).unwrap();
        let oracle = gamma_closed_form_t0(&m, kappa, &mu0).unwrap();
        for j in 0..2 {
            for x in 0..2u8 {
                for y in 0..2u8 {
                    let a = table.at(0, j, x, y);
                    let b = oracle.at(0, j, x, y);
                    assert!((a - b).abs() <= 1e-12, "kappa={kappa} j={j} x={x} y={y}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn gamma_closed_form_voter_by_hand() {
    // kappa = 2, voter, Bernoulli(p): rate of 0→1 at root state 0 given
    // leaf 1 in state y averages theta(1)/2 over the other leaf ~ Bern(p)
    let m = voter_model();
    let p = 0.3;
    let oracle = gamma_closed_form_t0(&m, 2, &[1.0 - p, p]).unwrap();
    assert!((oracle.at(0, 0, 0, 1) - (1.0 + p) / 2.0).abs() <= 1e-15);
    assert!((oracle.at(0, 0, 0, 0) - p / 2.0).abs() <= 1e-15);
    assert!((oracle.at(0, 1, 1, 0) - (1.0 + (1.0 - p)) / 2.0).abs() <= 1e-15);
    // direction 0 (+1) has zero rate from state 1
    assert!(oracle.at(0, 0, 1, 1).abs() <= 1e-15);
}

#[test]
fn agreement_statistic_at_time_zero_is_binomial() {
    let m = voter_model();
    let (law, _) = solve_local_eq_ode(&m, 3, &[0.7, 0.3], 0.5, 0.01).unwrap();
    let agree = law.agreement_statistic(2);
    assert!((agree[0] - 0.3654).abs() <= 1e-12, "{}", agree[0]);
}

#[test]
fn ode_agreement_tracks_mean_field_only_at_start() {
    // sanity on the statistic itself: identical formula to the
    // mean-field agreement at the product initial time
    let m = voter_model();
    let (law, _) = solve_local_eq_ode(&m, 3, &[0.7, 0.3], 0.5, 0.01).unwrap();
    let flow = MeasureFlow {
        grid: vec![0.0],
        values: crate::mean_field::FlowValues::Simplex(vec![vec![0.7, 0.3]]),
    };
    let mf = mf_agreement_statistic(&flow, 3, 2).unwrap();
    assert!((law.agreement_statistic(2)[0] - mf[0]).abs() <= 1e-12);
}

#[test]
fn ode_input_validation() {
    let m = voter_model();
    assert!(solve_local_eq_ode(&m, 0, &[0.5, 0.5], 1.0, 0.01).is_err());
    assert!(solve_local_eq_ode(&m, 2, &[0.5, 0.6], 1.0, 0.01).is_err());
    assert!(solve_local_eq_ode(&m, 2, &[0.5, 0.5], 1.0, -0.1).is_err());
    assert!(solve_local_eq_ode(&m, 2, &[1.0], 1.0, 0.01).is_err());
}

#[test]
fn fixed_point_zero_rates_yields_zero_gamma() {
    let m = JumpModel::new(
        2,
        vec![1, -1],
        Box::new(|_, _, _, _| 0.0),
        Box::new(|_, _| 0.0),
    )
    .with_normalized(Box::new(|_, _, _, _| 0.0), 0.0);
    let res =
        simulate_local_eq_fixed_point(&m, 2, &[0.6, 0.4], 1.0, 0.1, 10_000, 5, 1e-9, 3).unwrap();
    assert!(res.converged);
    assert!(res.gamma.max_value() <= 1e-15);
    // the law stays the empirical product law of the initial draw
    let mass: f64 = res.law.values.last().unwrap().iter().sum();
    assert!((mass - 1.0).abs() <= 1e-9);
}

#[test]
fn fixed_point_matches_ode_for_voter() {
    let m = voter_model();
    let mu0 = [0.7, 0.3];
    let (law, _) = solve_local_eq_ode(&m, 2, &mu0, 2.0, 0.05).unwrap();
    let res =
        simulate_local_eq_fixed_point(&m, 2, &mu0, 2.0, 0.05, 20_000, 8, 0.01, 99).unwrap();
    let sup = law
        .grid
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let a = law.root_marginal(k)[1];
            let b = res.law.root_marginal(k)[1];
            (a - b).abs()
        })
        .fold(0.0, f64::max);
    assert!(sup <= 0.03, "root marginal sup distance {sup}");
}

#[test]
fn fixed_point_gamma_at_time_zero_within_noise_of_enumeration() {
    let m = voter_model();
    let mu0 = [0.7, 0.3];
    let res =
        simulate_local_eq_fixed_point(&m, 3, &mu0, 0.5, 0.1, 20_000, 4, 0.01, 7).unwrap();
    let oracle = gamma_closed_form_t0(&m, 3, &mu0).unwrap();
    for j in 0..2 {
        for x in 0..2u8 {
            for y in 0..2u8 {
                let i = res.gamma.idx(0, j, x, y);
                if res.gamma.fallback[i] {
                    continue;
                }
                let d = (res.gamma.at(0, j, x, y) - oracle.at(0, j, x, y)).abs();
                assert!(d <= 0.05, "j={j} x={x} y={y}: off by {d}");
            }
        }
    }
}

#[test]
fn fixed_point_input_validation() {
    let m = voter_model();
    assert!(simulate_local_eq_fixed_point(&m, 2, &[0.5, 0.5], 1.0, 0.1, 100, 3, 0.01, 1).is_err());
    assert!(
        simulate_local_eq_fixed_point(&m, 2, &[0.5, 0.5], 1.0, 0.1, 10_000, 3, 0.0, 1).is_err()
    );
}

#[test]
fn diffusion_local_eq_free_motion_has_linear_variance() {
    let beta = |_t: f64, _x: f64, _y: f64| 0.0;
    let m = DiffusionModel::pairwise(Box::new(beta), 0.0);
    let res = markovian_local_eq_diffusion(
        &m,
        2,
        &DiffusionInit::Fixed(vec![0.0]),
        1.0,
        0.02,
        5_000,
        8,
        3,
        0.01,
        13,
    )
    .unwrap();
    let last: Vec<f64> = res.ensemble.values.iter().map(|p| p.last().unwrap()[0]).collect();
    let mean = last.iter().sum::<f64>() / last.len() as f64;
    let var = last.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / last.len() as f64;
    assert!((var - 1.0).abs() <= 0.07, "root variance {var}");
}

#[test]
fn diffusion_local_eq_recovers_uncoupled_drift() {
    // beta(x, y) = -x ignores the neighbor, so the closure target is -x
    // and every coordinate is an OU process: leaf mean ~ e^{-t}
    let m = DiffusionModel::pairwise(Box::new(|_t, x: f64, _y: f64| -x), 10.0);
    let res = markovian_local_eq_diffusion(
        &m,
        2,
        &DiffusionInit::Fixed(vec![1.0]),
        1.0,
        0.02,
        8_000,
        16,
        4,
        0.005,
        19,
    )
    .unwrap();
    let leaf_mean = res
        .ensemble
        .values
        .iter()
        .map(|p| p.last().unwrap()[1])
        .sum::<f64>()
        / res.ensemble.values.len() as f64;
    let expect = (-1.0f64).exp();
    assert!(
        (leaf_mean - expect).abs() <= 0.05,
        "leaf mean {leaf_mean} vs {expect}"
    );
}

#[test]
fn diffusion_local_eq_preserves_symmetry() {
    let m = DiffusionModel::pairwise(Box::new(|_t, x: f64, y: f64| (y - x).sin()), 1.0);
    let init = DiffusionInit::Gaussian { mean: 0.0, std: 1.0 };
    let res =
        markovian_local_eq_diffusion(&m, 2, &init, 1.0, 0.02, 8_000, 8, 3, 0.01, 23).unwrap();
    let last: Vec<f64> = res.ensemble.values.iter().map(|p| p.last().unwrap()[0]).collect();
    let n = last.len() as f64;
    let mean = last.iter().sum::<f64>() / n;
    let m2 = last.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = last.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let skew = m3 / m2.powf(1.5);
    let se = (6.0 / n).sqrt();
    assert!(skew.abs() <= 3.0 * se, "skewness {skew}, se {se}");
}

#[test]
fn diffusion_local_eq_rejects_general_drift() {
    let m = DiffusionModel::general(Box::new(|_, x, _: &[f64]| -x), 1.0);
    assert!(markovian_local_eq_diffusion(
        &m,
        2,
        &DiffusionInit::Fixed(vec![0.0]),
        1.0,
        0.1,
        2_000,
        8,
        2,
        0.01,
        1
    )
    .is_err());
}

#[test]
fn direct_baseline_matches_binomial_at_time_zero() {
    let m = voter_model();
    let init = JumpInit::bernoulli(0.3);
    let curve = direct_tree_baseline(&m, 3, 2, &init, &[0.0, 0.5], 2, 20_000, 5).unwrap();
    assert!(
        (curve.mean[0] - 0.3654).abs() <= curve.halfwidth[0],
        "{} ± {}",
        curve.mean[0],
        curve.halfwidth[0]
    );
}

#[test]
fn direct_baseline_consensus_and_degenerate_depth() {
    let m = voter_model();
    let init = JumpInit::Fixed(vec![1; 10]);
    let curve = direct_tree_baseline(&m, 3, 2, &init, &[0.0, 1.0], 3, 200, 5).unwrap();
    assert!(curve.mean.iter().all(|&p| p == 1.0));
    assert!(direct_tree_baseline(&m, 3, 0, &JumpInit::bernoulli(0.5), &[0.0], 2, 200, 5).is_err());
}

#[test]
fn gamma_table_csv_shape() {
    let m = voter_model();
    let (_, table) = solve_local_eq_ode(&m, 2, &[0.7, 0.3], 0.2, 0.1).unwrap();
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,j,x,y,rate,fallback\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 2 * 2);
}
