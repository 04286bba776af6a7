//! Finite punishment chain: closed-form entry values, the augmented
//! kernel, punishment indifference residuals, and the search for a
//! punishment length replicating the termination cutoffs.

use thiserror::Error;

use crate::bayes;
use crate::grid::{Grid, ValueField};
use crate::kernel::{Kernel, KernelKind};
use crate::params::ModelParams;
use crate::value::EquilibriumResult;

#[derive(Debug, Error)]
pub enum PunishmentError {
    #[error("no T within cap")]
    NoTWithinCap,
    #[error("termination equilibrium has no interior mixing point")]
    NoMixingPoint,
}

/// Simple public punishment: `t` periods of mandatory inspection, then a
/// reset to the trust-absorption state `(lambda_entry, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PunishmentSpec {
    pub t: u32,
}

/// Kernel with the detection branch routed into the punishment chain.
/// A zero-length chain is the termination benchmark itself.
pub fn punishment_kernel(params: ModelParams, spec: PunishmentSpec) -> Kernel {
    if spec.t == 0 {
        Kernel::termination(params)
    } else {
        Kernel {
            kind: KernelKind::Punishment { t: spec.t },
            params,
        }
    }
}

/// Closed-form continuation values at punishment entry:
/// `V_s = delta^T V_s(lambda, 0)` and
/// `V_r = -C (1 - delta^T)/(1 - delta) + delta^T V_r(lambda, 0)`.
pub fn punishment_entry_values(
    t: u32,
    lambda: f64,
    params: &ModelParams,
    grid: &Grid,
    normal_values: &ValueField,
) -> (f64, f64) {
    let dt = params.delta.powi(t as i32);
    let vs0 = normal_values.interp_s(grid, 0, lambda, 0.0);
    let vr0 = normal_values.interp_r(grid, 0, lambda, 0.0);
    let v_pun_s = dt * vs0;
    let v_pun_r = -params.c * (1.0 - dt) / (1.0 - params.delta) + dt * vr0;
    (v_pun_s, v_pun_r)
}

/// Punishment indifference residuals at a state with explicit local mixes.
///
/// `F_s = B - delta p_check [V_s(lambda+, mu+) - V_pun_s(T)]` and
/// `F_r = C - R(1-lambda)sigma
///        - delta [p_T V_r(lambda+, mu+) + (1-p_T) V_pun_r(T) - V_r(lambda,0)]`.
/// At `T = 0` both coincide with the termination residuals.
pub fn punishment_indifference_residuals(
    lambda: f64,
    mu: f64,
    sigma: f64,
    rho: f64,
    t: u32,
    params: &ModelParams,
    grid: &Grid,
    values: &ValueField,
) -> (f64, f64) {
    let (v_pun_s, v_pun_r) = punishment_entry_values(t, lambda, params, grid, values);
    let pc = mu + (1.0 - mu) * rho;
    let pt = lambda + (1.0 - lambda) * (1.0 - sigma);
    let lam_p = bayes::posterior_truthful_check(lambda, sigma);
    let mu_p = bayes::posterior_vigilance(mu, rho);
    let vs_up = values.interp_s(grid, 0, lam_p, mu_p);
    let vr_up = values.interp_r(grid, 0, lam_p, mu_p);
    let vr0 = values.interp_r(grid, 0, lambda, 0.0);
    let f_s = params.b - params.delta * pc * (vs_up - v_pun_s);
    let f_r = params.c - params.r * (1.0 - lambda) * sigma
        - params.delta * (pt * vr_up + (1.0 - pt) * v_pun_r - vr0);
    (f_s, f_r)
}

/// Result of the punishment-equivalence search.
#[derive(Debug, Clone)]
pub struct EquivalenceResult {
    /// Smallest punishment length meeting the residual tolerance.
    pub t: u32,
    /// Re-solved mixing intensities at the termination cutoff.
    pub sigma: f64,
    pub rho: f64,
    pub residual_norm: f64,
    /// Sign-change bracket of the sender residual at the unadjusted mixes.
    pub bracket: Option<(u32, u32)>,
    /// Mixing point implied by the punishment residuals near the cutoff.
    pub x_star_pun: (f64, f64),
    pub per_t_norms: Vec<(u32, f64)>,
}

fn norm2(v: (f64, f64)) -> f64 {
    (v.0 * v.0 + v.1 * v.1).sqrt()
}

/// Newton in the two mixing intensities at fixed `(lambda, mu, T)`.
fn solve_mixes_at(
    lambda: f64,
    mu: f64,
    t: u32,
    params: &ModelParams,
    grid: &Grid,
    values: &ValueField,
    start: (f64, f64),
) -> ((f64, f64), f64) {
    let f = |s: f64, r: f64| {
        punishment_indifference_residuals(lambda, mu, s, r, t, params, grid, values)
    };
    let mut x = (start.0.clamp(0.0, 1.0), start.1.clamp(0.0, 1.0));
    let mut best = x;
    let mut best_norm = norm2(f(x.0, x.1));
    let h = 1e-6;
    for _ in 0..80 {
        let r = f(x.0, x.1);
        let n = norm2(r);
        if n < best_norm {
            best_norm = n;
            best = x;
        }
        if n <= 1e-10 {
            break;
        }
        let clampu = |v: f64| v.clamp(0.0, 1.0);
        let (f_sp, f_rp) = f(clampu(x.0 + h), x.1);
        let (f_sm, f_rm) = f(clampu(x.0 - h), x.1);
        let (g_sp, g_rp) = f(x.0, clampu(x.1 + h));
        let (g_sm, g_rm) = f(x.0, clampu(x.1 - h));
        let j = [
            [(f_sp - f_sm) / (2.0 * h), (g_sp - g_sm) / (2.0 * h)],
            [(f_rp - f_rm) / (2.0 * h), (g_rp - g_rm) / (2.0 * h)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            break;
        }
        let step = (
            -(j[1][1] * r.0 - j[0][1] * r.1) / det,
            -(-j[1][0] * r.0 + j[0][0] * r.1) / det,
        );
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            let cand = (clampu(x.0 + alpha * step.0), clampu(x.1 + alpha * step.1));
            if norm2(f(cand.0, cand.1)) < n {
                x = cand;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (best, best_norm)
}

/// Finds the smallest integer punishment length (with adjusted mixes at
/// the termination cutoff) whose indifference residuals drop below 1e-6,
/// scanning `T = 0..=t_max`. Also reports the fixed-mix sign-change
/// bracket of the sender residual.
pub fn find_equivalent_t(
    params: &ModelParams,
    grid: &Grid,
    termination_eq: &EquilibriumResult,
    x_star: (f64, f64),
    t_max: u32,
) -> Result<EquivalenceResult, PunishmentError> {
    let (lambda, mu) = x_star;
    let (sigma0, rho0) = termination_eq.policies.interp(grid, 0, lambda, mu);
    let values = &termination_eq.values;

    // Fixed-mix sender-residual scan for the bracket diagnostic.
    let mut bracket = None;
    let mut prev: Option<(u32, f64)> = None;
    for t in 0..=t_max {
        let (f_s, _) = punishment_indifference_residuals(
            lambda, mu, sigma0, rho0, t, params, grid, values,
        );
        if let Some((pt, pf)) = prev {
            if pf.signum() != f_s.signum() && pf != 0.0 {
                bracket = Some((pt, t));
                break;
            }
        }
        prev = Some((t, f_s));
    }

    let mut per_t_norms = Vec::new();
    let mut found: Option<(u32, (f64, f64), f64)> = None;
    let mut best: Option<(u32, (f64, f64), f64)> = None;
    for t in 0..=t_max {
        let mut local_best = ((sigma0, rho0), f64::INFINITY);
        for start in [(sigma0, rho0), (0.5, 0.5), (0.2, 0.8)] {
            let (mix, n) = solve_mixes_at(lambda, mu, t, params, grid, values, start);
            if n < local_best.1 {
                local_best = (mix, n);
            }
        }
        per_t_norms.push((t, local_best.1));
        match best {
            Some((_, _, bn)) if bn <= local_best.1 => {}
            _ => best = Some((t, local_best.0, local_best.1)),
        }
        if local_best.1 <= 1e-6 {
            found = Some((t, local_best.0, local_best.1));
            break;
        }
    }
    let (t, mixes, residual_norm) = match found {
        Some(hit) => hit,
        None => return Err(PunishmentError::NoTWithinCap),
    };

    // Mixing point implied by the punishment residuals with the chosen T,
    // policies read from the termination fields.
    let x_star_pun = newton_on_state(params, grid, termination_eq, t, x_star);

    Ok(EquivalenceResult {
        t,
        sigma: mixes.0,
        rho: mixes.1,
        residual_norm,
        bracket,
        x_star_pun,
        per_t_norms,
    })
}

fn newton_on_state(
    params: &ModelParams,
    grid: &Grid,
    eq: &EquilibriumResult,
    t: u32,
    x0: (f64, f64),
) -> (f64, f64) {
    let f = |l: f64, m: f64| {
        let (s, r) = eq.policies.interp(grid, 0, l, m);
        punishment_indifference_residuals(l, m, s, r, t, params, grid, &eq.values)
    };
    let clamp = |v: f64| v.clamp(1e-9, 1.0 - 1e-9);
    let mut x = x0;
    let mut best = x;
    let mut best_norm = norm2(f(x.0, x.1));
    let h = 1e-4;
    for _ in 0..60 {
        let r = f(x.0, x.1);
        let n = norm2(r);
        if n < best_norm {
            best_norm = n;
            best = x;
        }
        if n <= 1e-9 {
            break;
        }
        let (f_lp, g_lp) = f(clamp(x.0 + h), x.1);
        let (f_lm, g_lm) = f(clamp(x.0 - h), x.1);
        let (f_mp, g_mp) = f(x.0, clamp(x.1 + h));
        let (f_mm, g_mm) = f(x.0, clamp(x.1 - h));
        let j = [
            [(f_lp - f_lm) / (2.0 * h), (f_mp - f_mm) / (2.0 * h)],
            [(g_lp - g_lm) / (2.0 * h), (g_mp - g_mm) / (2.0 * h)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            break;
        }
        let step = (
            -(j[1][1] * r.0 - j[0][1] * r.1) / det,
            -(-j[1][0] * r.0 + j[0][0] * r.1) / det,
        );
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..25 {
            let cand = (clamp(x.0 + alpha * step.0), clamp(x.1 + alpha * step.1));
            if norm2(f(cand.0, cand.1)) < n {
                x = cand;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PolicyField;
    use crate::value::evaluate_policies;

    #[test]
    fn entry_value_examples() {
        let params = ModelParams {
            delta: 0.9,
            c: 1.0,
            ..ModelParams::default()
        };
        let grid = Grid::uniform(3, 3);
        let mut vals = ValueField::zeros(&grid, 1);
        // Constant normal values: V_s(.,0) = 10, V_r(.,0) = 5.
        vals.v_s.iter_mut().for_each(|v| *v = 10.0);
        vals.v_r.iter_mut().for_each(|v| *v = 5.0);
        let (s0, r0) = punishment_entry_values(0, 0.4, &params, &grid, &vals);
        assert!((s0 - 10.0).abs() < 1e-12);
        assert!((r0 - 5.0).abs() < 1e-12);
        let (s2, r2) = punishment_entry_values(2, 0.4, &params, &grid, &vals);
        assert!((s2 - 8.1).abs() < 1e-12);
        assert!((r2 - 2.15).abs() < 1e-12);
    }

    #[test]
    fn entry_values_decrease_in_t() {
        let params = ModelParams::default();
        let grid = Grid::uniform(3, 3);
        let mut vals = ValueField::zeros(&grid, 1);
        vals.v_s.iter_mut().for_each(|v| *v = 4.0);
        vals.v_r.iter_mut().for_each(|v| *v = 4.0);
        let mut prev: Option<(f64, f64)> = None;
        for t in 0..12 {
            let cur = punishment_entry_values(t, 0.5, &params, &grid, &vals);
            if let Some(p) = prev {
                assert!(cur.0 < p.0);
                assert!(cur.1 < p.1);
            }
            prev = Some(cur);
        }
    }

    #[test]
    fn residuals_monotone_in_t() {
        // F_s falls in T (the sender-side RHS rises), F_r rises in T.
        let params = ModelParams::default();
        let grid = Grid::uniform(21, 21);
        let kernel = Kernel::termination(params.clone());
        let policies = PolicyField::constant(&grid, 1, 0.3, 0.4);
        let values = evaluate_policies(&kernel, &grid, &policies, 1e-10).unwrap();
        let mut prev: Option<(f64, f64)> = None;
        for t in 0..=20 {
            let cur = punishment_indifference_residuals(
                0.4, 0.3, 0.3, 0.4, t, &params, &grid, &values,
            );
            if let Some(p) = prev {
                assert!(cur.0 < p.0, "F_s must fall in T");
                assert!(cur.1 > p.1, "F_r must rise in T");
            }
            prev = Some(cur);
        }
    }

    #[test]
    fn t0_residuals_match_termination_comparison() {
        let params = ModelParams::default();
        let grid = Grid::uniform(31, 31);
        let kernel = Kernel::termination(params.clone());
        let policies = PolicyField::constant(&grid, 1, 0.4, 0.5);
        let values = evaluate_policies(&kernel, &grid, &policies, 1e-10).unwrap();
        for &(l, m) in &[(0.3, 0.2), (0.6, 0.5), (0.8, 0.1)] {
            let (s, r) = policies.interp(&grid, 0, l, m);
            let (fs0, fr0) =
                punishment_indifference_residuals(l, m, s, r, 0, &params, &grid, &values);
            let (fs_t, fr_t) = crate::cutoff::indifference_residuals_at(
                &kernel, &grid, &values, l, m, s, r,
            );
            // A zero-length chain replaces the termination zeros with the
            // trust-reset continuation on the detection branches; the
            // residuals differ from their termination counterparts by
            // exactly those terms.
            let pc = m + (1.0 - m) * r;
            let pt = l + (1.0 - l) * (1.0 - s);
            let vs0 = values.interp_s(&grid, 0, l, 0.0);
            let vr0 = values.interp_r(&grid, 0, l, 0.0);
            assert!((fs0 - (fs_t + params.delta * pc * vs0)).abs() < 1e-12);
            assert!((fr0 - (fr_t - params.delta * (1.0 - pt) * vr0)).abs() < 1e-12);
        }
    }
}
