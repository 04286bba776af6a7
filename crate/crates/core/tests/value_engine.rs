//! Oracle tests for policy evaluation, action differences, best replies
//! and the equilibrium solver.

use inspection_game::grid::{Grid, PolicyField, ValueField};
use inspection_game::kernel::{Ctx, Kernel};
use inspection_game::params::ModelParams;
use inspection_game::value::{
    action_differences, best_reply_update, evaluate_policies, monotonicity_report,
    policy_operator_once, solve_equilibrium, EqOptions,
};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn defaults() -> ModelParams {
    ModelParams::default()
}

#[test]
fn perpetual_truthful_trust() {
    let p = defaults();
    let grid = Grid::uniform(21, 21);
    let kernel = Kernel::termination(p.clone());
    let policies = PolicyField::constant(&grid, 1, 0.0, 0.0);
    let v = evaluate_policies(&kernel, &grid, &policies, 1e-10).unwrap();
    let perpetuity = p.b / (1.0 - p.delta);
    for i in 0..21 {
        for j in 0..21 {
            let (vs, vr) = v.at(&grid, 0, i, j);
            assert!(vs.abs() < 1e-8);
            assert!((vr - perpetuity).abs() < 1e-7);
        }
    }
}

#[test]
fn trust_absorption_value_on_mu_zero_slice() {
    // Full deception, strategic receiver never checks: on mu = 0 the sender
    // collects the perpetuity B/(1-delta).
    let p = defaults();
    let grid = Grid::uniform(21, 21);
    let kernel = Kernel::termination(p.clone());
    let policies = PolicyField::constant(&grid, 1, 1.0, 0.0);
    let v = evaluate_policies(&kernel, &grid, &policies, 1e-10).unwrap();
    for i in 0..21 {
        let (vs, _) = v.at(&grid, 0, i, 0);
        assert!((vs - p.b / (1.0 - p.delta)).abs() < 1e-7);
    }
}

#[test]
fn certain_detection_two_period_oracle() {
    // sigma = rho = 1 at (lambda, mu) = (0, 0): the sender deceives, the
    // check detects, the game ends after one period. Hand recursion:
    // V_s = B + delta*0, V_r = R - C.
    let mut p = defaults();
    p.r = 0.7;
    let grid = Grid::uniform(11, 11);
    let kernel = Kernel::termination(p.clone());
    let policies = PolicyField::constant(&grid, 1, 1.0, 1.0);
    let v = evaluate_policies(&kernel, &grid, &policies, 1e-10).unwrap();
    let (vs, vr) = v.at(&grid, 0, 0, 0);
    assert!((vs - p.b).abs() < 1e-8, "vs = {vs}");
    assert!((vr - (p.r - p.c)).abs() < 1e-8, "vr = {vr}");
}

#[test]
fn operator_is_a_delta_contraction() {
    let p = defaults();
    let grid = Grid::uniform(15, 15);
    let kernel = Kernel::termination(p.clone());
    let policies = PolicyField::constant(&grid, 1, 0.4, 0.6);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let mut a = ValueField::zeros(&grid, 1);
        let mut b = ValueField::zeros(&grid, 1);
        for k in 0..a.v_s.len() {
            a.v_s[k] = rng.random::<f64>() * 10.0 - 5.0;
            a.v_r[k] = rng.random::<f64>() * 10.0 - 5.0;
            b.v_s[k] = rng.random::<f64>() * 10.0 - 5.0;
            b.v_r[k] = rng.random::<f64>() * 10.0 - 5.0;
        }
        let d0 = a.sup_distance(&b);
        let ta = policy_operator_once(&kernel, &grid, &policies, &a);
        let tb = policy_operator_once(&kernel, &grid, &policies, &b);
        let d1 = ta.sup_distance(&tb);
        assert!(d1 <= p.delta * d0 + 1e-12, "{d1} vs {}", p.delta * d0);
    }
}

#[test]
fn payoff_bound_preserved() {
    let mut p = defaults();
    p.r = 0.5;
    let grid = Grid::uniform(15, 15);
    let bound = p.value_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for kernel in [
        Kernel::termination(p.clone()),
        Kernel::silent_two_sided(p.clone()),
        Kernel::noisy(p.clone(), false),
        Kernel::noisy(p.clone(), true),
    ] {
        let mut policies = PolicyField::constant(&grid, 1, 0.0, 0.0);
        for k in 0..policies.sigma.len() {
            policies.sigma[k] = rng.random::<f64>();
            policies.rho[k] = rng.random::<f64>();
        }
        let v = evaluate_policies(&kernel, &grid, &policies, 1e-10).unwrap();
        assert!(v.sup_norm() <= bound + 1e-9);
    }
}

#[test]
fn monotone_iterates_from_zero_seed_under_truthful_sender() {
    let p = defaults();
    let grid = Grid::uniform(15, 15);
    let kernel = Kernel::termination(p.clone());
    let policies = PolicyField::constant(&grid, 1, 0.0, 0.7);
    let mut v = ValueField::zeros(&grid, 1);
    for _ in 0..40 {
        let next = policy_operator_once(&kernel, &grid, &policies, &v);
        for k in 0..v.v_s.len() {
            assert!(next.v_s[k] >= v.v_s[k] - 1e-12);
            assert!(next.v_r[k] >= v.v_r[k] - 1e-12);
        }
        v = next;
    }
}

#[test]
fn action_differences_on_zero_values() {
    let p = defaults();
    let grid = Grid::uniform(11, 11);
    let kernel = Kernel::termination(p.clone());
    let values = ValueField::zeros(&grid, 1);
    let policies = PolicyField::constant(&grid, 1, 0.0, 0.5);
    for i in 0..11 {
        for j in 0..11 {
            let d = action_differences(&kernel, &grid, &policies, &values, i, j);
            assert!((d.delta_s - p.b).abs() < 1e-12);
            // sigma = 0 makes checking a sure waste of C.
            assert!((d.delta_r - (-p.c)).abs() < 1e-12);
        }
    }
}

#[test]
fn benchmark_state_indifference() {
    // A hand-built value field with continuation jump B/(1-delta) at
    // p_check = (1-delta)/delta makes the sender exactly indifferent.
    let p = defaults();
    let grid = Grid::uniform(2, 2);
    let kernel = Kernel::termination(p.clone());
    let mut values = ValueField::zeros(&grid, 1);
    let jump = p.b / (1.0 - p.delta);
    // V_s = jump * mu (so V(lambda,0) = 0 and V at mu+ = 1 equals jump).
    for i in 0..2 {
        for j in 0..2 {
            values.v_s[grid.idx(i, j)] = jump * grid.mu[j];
        }
    }
    let p_star = (1.0 - p.delta) / p.delta;
    // mu = p_star, rho = 0: p_check = p_star and mu+ = 1.
    let ctx = Ctx {
        lambda: 0.5,
        mu: p_star,
        mode: 0,
        sigma: 0.0,
        rho: 0.0,
    };
    let ds = kernel.sender_diff(&grid, &values, &ctx);
    assert!(ds.abs() < 1e-9, "ds = {ds}");
}

#[test]
fn bisection_pins_interior_mix() {
    // Construct values increasing in lambda so the sender diff strictly
    // falls in the own mix through the posterior jump.
    let p = defaults();
    let grid = Grid::uniform(41, 41);
    let kernel = Kernel::termination(p.clone());
    let mut values = ValueField::zeros(&grid, 1);
    for i in 0..41 {
        for j in 0..41 {
            // Increasing in lambda, mildly decreasing in mu.
            values.v_s[grid.idx(i, j)] =
                12.0 * grid.lambda[i] - 1.0 * grid.mu[j] * grid.lambda[i];
            values.v_r[grid.idx(i, j)] = 3.0 * grid.lambda[i] + 0.5 * grid.mu[j];
        }
    }
    let policies = PolicyField::constant(&grid, 1, 0.5, 0.9);
    let (next, _res) = best_reply_update(&kernel, &grid, &policies, &values, 1.0, 1e-9);
    // Find a node with an interior sigma target and verify indifference.
    let mut checked = false;
    for i in 0..41 {
        for j in 0..41 {
            let s = next.sigma[grid.idx(i, j)];
            if s > 1e-6 && s < 1.0 - 1e-6 {
                let ctx = Ctx {
                    lambda: grid.lambda[i],
                    mu: grid.mu[j],
                    mode: 0,
                    sigma: s,
                    rho: policies.rho[grid.idx(i, j)],
                };
                let ds = kernel.sender_diff(&grid, &values, &ctx);
                assert!(ds.abs() <= 1e-8, "interior mix not indifferent: {ds}");
                checked = true;
            }
        }
    }
    assert!(checked, "no interior sigma target found in the test field");
}

#[test]
fn expensive_checks_dominance() {
    // C far above any continuation gain: the receiver never checks and the
    // strategic sender deceives everywhere.
    let mut p = defaults();
    p.b = 1.0;
    p.c = 10.0;
    p.mu0 = 0.0;
    let grid = Grid::uniform(21, 21);
    let kernel = Kernel::termination(p.clone());
    let eq = solve_equilibrium(&kernel, &grid, &EqOptions::default()).unwrap();
    assert!(eq.converged);
    // The damped iteration parks corners within residual/|diff| of 0 or 1.
    for k in 0..grid.nodes() {
        assert!(eq.policies.rho[k] < 1e-5);
        assert!(eq.policies.sigma[k] > 1.0 - 1e-5);
    }
    // Exhaustive best-reply audit on the converged values.
    for i in 0..21 {
        for j in 0..21 {
            let d = action_differences(&kernel, &grid, &eq.policies, &eq.values, i, j);
            assert!(d.delta_s >= -1e-9, "deception must not be dominated");
            assert!(d.delta_r <= 1e-9, "checking must not be profitable");
        }
    }
}

#[test]
fn monotonicity_detector_flags_crafted_violation() {
    let grid = Grid::uniform(5, 5);
    let mut values = ValueField::zeros(&grid, 1);
    let policies = PolicyField::constant(&grid, 1, 0.0, 0.0);
    // Constant values: zero violations.
    let rep = monotonicity_report(&grid, &values, &policies);
    assert_eq!(rep.total_violations(), 0);
    // Make V_r strictly decreasing in lambda: every lambda step violates.
    for i in 0..5 {
        for j in 0..5 {
            values.v_r[grid.idx(i, j)] = -(i as f64);
        }
    }
    let rep = monotonicity_report(&grid, &values, &policies);
    assert_eq!(rep.vr_increasing_lambda.violations, 4 * 5);
    assert!(rep.vr_increasing_lambda.max_violation > 0.9);
}
