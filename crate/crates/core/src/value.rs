//! Policy evaluation, best replies, and the stationary-equilibrium solver.
//!
//! Evaluation iterates the discounted expectation operator, which is a
//! contraction with modulus `delta` for any well-formed kernel. The
//! equilibrium loop alternates evaluation with damped simultaneous best
//! replies; mixing at near-indifferent nodes is solved by bisection on the
//! own mixing probability, which enters the branch weights through the
//! Bayes maps.

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{Grid, PolicyField, ValueField};
use crate::kernel::{Ctx, Kernel, Succ};

#[derive(Debug, Error)]
pub enum ValueError {
    #[error("policy evaluation did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("policy field contains entries outside [0,1]")]
    BadPolicy,
}

/// Deceive-minus-truth and check-minus-trust continuation differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDiffs {
    pub delta_s: f64,
    pub delta_r: f64,
}

/// Per-property monotonicity violation summary.
#[derive(Debug, Clone, Copy, Default)]
pub struct MonoCheck {
    pub violations: usize,
    pub max_violation: f64,
    pub worst: (usize, usize),
}

/// Violation counts for the value/policy shape properties, slack 1e-7.
#[derive(Debug, Clone, Default)]
pub struct MonotonicityReport {
    pub vs_increasing_lambda: MonoCheck,
    pub vr_increasing_lambda: MonoCheck,
    pub vs_decreasing_mu: MonoCheck,
    pub vr_increasing_mu: MonoCheck,
    pub rho_decreasing_lambda: MonoCheck,
    pub sigma_decreasing_mu: MonoCheck,
}

impl MonotonicityReport {
    pub fn total_violations(&self) -> usize {
        self.vs_increasing_lambda.violations
            + self.vr_increasing_lambda.violations
            + self.vs_decreasing_mu.violations
            + self.vr_increasing_mu.violations
            + self.rho_decreasing_lambda.violations
            + self.sigma_decreasing_mu.violations
    }

    pub fn max_violation(&self) -> f64 {
        [
            self.vs_increasing_lambda.max_violation,
            self.vr_increasing_lambda.max_violation,
            self.vs_decreasing_mu.max_violation,
            self.vr_increasing_mu.max_violation,
            self.rho_decreasing_lambda.max_violation,
            self.sigma_decreasing_mu.max_violation,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Converged policies, values and solver diagnostics.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub policies: PolicyField,
    pub values: ValueField,
    /// Representative interior mixing node, if the mixing region is nonempty.
    pub mixing_point: Option<(f64, f64)>,
    pub mixing_nodes: usize,
    pub residual_sup: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual_trace: Vec<f64>,
    pub diagnostics: MonotonicityReport,
}

// ---------------------------------------------------------------------------
// Compiled evaluation
// ---------------------------------------------------------------------------

const MAX_SUCC: usize = 5;

#[derive(Clone, Copy)]
struct NodePlan {
    flow_s: f64,
    flow_r: f64,
    s_len: usize,
    r_len: usize,
    // Successor reads: 4 flat value indices + combined bilinear weights.
    s_idx: [[u32; 4]; MAX_SUCC],
    s_w: [[f64; 4]; MAX_SUCC],
    r_idx: [[u32; 4]; MAX_SUCC],
    r_w: [[f64; 4]; MAX_SUCC],
}

impl NodePlan {
    fn empty() -> Self {
        Self {
            flow_s: 0.0,
            flow_r: 0.0,
            s_len: 0,
            r_len: 0,
            s_idx: [[0; 4]; MAX_SUCC],
            s_w: [[0.0; 4]; MAX_SUCC],
            r_idx: [[0; 4]; MAX_SUCC],
            r_w: [[0.0; 4]; MAX_SUCC],
        }
    }
}

fn succ_weights(grid: &Grid, succ: Succ, weight: f64) -> Option<([u32; 4], [f64; 4])> {
    match succ {
        Succ::Terminated => None,
        Succ::To { mode, lambda, mu } => {
            let (i, j, tl, tm) = grid.weights(lambda, mu);
            let base = (mode as usize * grid.nodes()) as u32;
            let nmu = grid.n_mu() as u32;
            let k = base + i as u32 * nmu + j as u32;
            Some((
                [k, k + 1, k + nmu, k + nmu + 1],
                [
                    weight * (1.0 - tl) * (1.0 - tm),
                    weight * (1.0 - tl) * tm,
                    weight * tl * (1.0 - tm),
                    weight * tl * tm,
                ],
            ))
        }
    }
}

/// Precomputes mixed branch weights and interpolation stencils per node;
/// the inner sweeps then reduce to a handful of fused multiply-adds.
fn compile(kernel: &Kernel, grid: &Grid, policies: &PolicyField) -> Vec<NodePlan> {
    let n_modes = kernel.n_modes();
    let nodes = grid.nodes();
    (0..n_modes * nodes)
        .into_par_iter()
        .map(|flat| {
            let mode = flat / nodes;
            let rest = flat % nodes;
            let i = rest / grid.n_mu();
            let j = rest % grid.n_mu();
            let (sigma, rho) = policies.at(grid, mode, i, j);
            let ctx = Ctx {
                lambda: grid.lambda[i],
                mu: grid.mu[j],
                mode: mode as u16,
                sigma,
                rho,
            };
            let mut plan = NodePlan::empty();
            for (deceive, w) in [(true, sigma), (false, 1.0 - sigma)] {
                if w == 0.0 {
                    continue;
                }
                for b in kernel.sender_branches(&ctx, deceive).iter() {
                    let bw = w * b.prob;
                    if bw == 0.0 {
                        continue;
                    }
                    plan.flow_s += bw * b.pay;
                    if let Some((idx, ws)) = succ_weights(grid, b.succ, bw) {
                        plan.s_idx[plan.s_len] = idx;
                        plan.s_w[plan.s_len] = ws;
                        plan.s_len += 1;
                    }
                }
            }
            for (check, w) in [(true, rho), (false, 1.0 - rho)] {
                if w == 0.0 {
                    continue;
                }
                for b in kernel.receiver_branches(&ctx, check).iter() {
                    let bw = w * b.prob;
                    if bw == 0.0 {
                        continue;
                    }
                    plan.flow_r += bw * b.pay;
                    if let Some((idx, ws)) = succ_weights(grid, b.succ, bw) {
                        plan.r_idx[plan.r_len] = idx;
                        plan.r_w[plan.r_len] = ws;
                        plan.r_len += 1;
                    }
                }
            }
            plan
        })
        .collect()
}

fn sweep(plans: &[NodePlan], delta: f64, v: &ValueField, out: &mut ValueField) {
    let vs = &v.v_s;
    let vr = &v.v_r;
    out.v_s
        .par_iter_mut()
        .zip(out.v_r.par_iter_mut())
        .zip(plans.par_iter())
        .for_each(|((os, or), plan)| {
            let mut acc_s = 0.0;
            for k in 0..plan.s_len {
                let idx = &plan.s_idx[k];
                let w = &plan.s_w[k];
                acc_s += w[0] * vs[idx[0] as usize]
                    + w[1] * vs[idx[1] as usize]
                    + w[2] * vs[idx[2] as usize]
                    + w[3] * vs[idx[3] as usize];
            }
            let mut acc_r = 0.0;
            for k in 0..plan.r_len {
                let idx = &plan.r_idx[k];
                let w = &plan.r_w[k];
                acc_r += w[0] * vr[idx[0] as usize]
                    + w[1] * vr[idx[1] as usize]
                    + w[2] * vr[idx[2] as usize]
                    + w[3] * vr[idx[3] as usize];
            }
            *os = plan.flow_s + delta * acc_s;
            *or = plan.flow_r + delta * acc_r;
        });
}

/// One application of the policy-evaluation operator. Exposed for the
/// contraction diagnostics in the invariant suite.
pub fn policy_operator_once(
    kernel: &Kernel,
    grid: &Grid,
    policies: &PolicyField,
    v: &ValueField,
) -> ValueField {
    let plans = compile(kernel, grid, policies);
    let mut out = ValueField::zeros(grid, kernel.n_modes());
    sweep(&plans, kernel.params.delta, v, &mut out);
    out
}

/// Fixed point of the evaluation operator for fixed policies.
pub fn evaluate_policies(
    kernel: &Kernel,
    grid: &Grid,
    policies: &PolicyField,
    tol: f64,
) -> Result<ValueField, ValueError> {
    let seed = ValueField::zeros(grid, kernel.n_modes());
    evaluate_policies_from(kernel, grid, policies, tol, seed)
}

/// Same as [`evaluate_policies`] but warm-started from a caller's seed.
pub fn evaluate_policies_from(
    kernel: &Kernel,
    grid: &Grid,
    policies: &PolicyField,
    tol: f64,
    seed: ValueField,
) -> Result<ValueField, ValueError> {
    if !policies.valid() {
        return Err(ValueError::BadPolicy);
    }
    let delta = kernel.params.delta;
    let vmax = kernel.params.value_bound().max(1.0);
    let cap = ((tol / vmax).ln() / delta.ln()).ceil().max(1.0) as usize + 100;
    let plans = compile(kernel, grid, policies);
    let mut cur = seed;
    let mut next = ValueField::zeros(grid, kernel.n_modes());
    for _ in 0..cap {
        sweep(&plans, delta, &cur, &mut next);
        let dist = cur.sup_distance(&next);
        std::mem::swap(&mut cur, &mut next);
        if dist <= tol {
            return Ok(cur);
        }
    }
    Err(ValueError::NoConvergence(cap))
}

// ---------------------------------------------------------------------------
// Best replies
// ---------------------------------------------------------------------------

/// Action differences at a normal-mode grid node under the ambient policies.
pub fn action_differences(
    kernel: &Kernel,
    grid: &Grid,
    policies: &PolicyField,
    values: &ValueField,
    i: usize,
    j: usize,
) -> ActionDiffs {
    let (sigma, rho) = policies.at(grid, 0, i, j);
    let ctx = Ctx {
        lambda: grid.lambda[i],
        mu: grid.mu[j],
        mode: 0,
        sigma,
        rho,
    };
    ActionDiffs {
        delta_s: kernel.sender_diff(grid, values, &ctx),
        delta_r: kernel.receiver_diff(grid, values, &ctx),
    }
}

/// Zero of a monotone-in-own-mix action difference, by bisection.
/// `f(0)` and `f(1)` are assumed to bracket a sign change.
fn bisect_mix(mut lo: f64, mut hi: f64, f_lo: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut sign_lo = f_lo.signum();
    if sign_lo == 0.0 {
        return lo;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo) < 1e-14 {
            return mid;
        }
        if fm.signum() == sign_lo {
            lo = mid;
            sign_lo = fm.signum();
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Target own mix for one player at one node.
///
/// The `diff` closure evaluates the player's action difference with the own
/// mixing probability substituted into the Bayes maps. Ties outside the
/// mixing band break toward truth/trust.
fn mix_target(current: f64, band: f64, diff: impl Fn(f64) -> f64) -> f64 {
    let d_cur = diff(current);
    if d_cur > band {
        let d1 = diff(1.0);
        if d1 >= 0.0 {
            return 1.0;
        }
        return bisect_mix(current, 1.0, d_cur, diff);
    }
    if d_cur < -band {
        let d0 = diff(0.0);
        if d0 <= 0.0 {
            return 0.0;
        }
        return bisect_mix(0.0, current, d0, diff);
    }
    // Near indifference at the current mix: pin the interior zero if the
    // endpoints still bracket one, otherwise fall to the dominant corner.
    let d0 = diff(0.0);
    if d0 <= 0.0 {
        return 0.0;
    }
    let d1 = diff(1.0);
    if d1 >= 0.0 {
        return 1.0;
    }
    bisect_mix(0.0, 1.0, d0, diff)
}

/// Sup-norm one-step deviation gain over normal-mode nodes.
pub fn best_reply_residual(
    kernel: &Kernel,
    grid: &Grid,
    policies: &PolicyField,
    values: &ValueField,
) -> f64 {
    (0..grid.nodes())
        .into_par_iter()
        .map(|flat| {
            let i = flat / grid.n_mu();
            let j = flat % grid.n_mu();
            let d = action_differences(kernel, grid, policies, values, i, j);
            let (sigma, rho) = policies.at(grid, 0, i, j);
            let gain_s = (d.delta_s * (1.0 - sigma)).max(-d.delta_s * sigma).max(0.0);
            let gain_r = (d.delta_r * (1.0 - rho)).max(-d.delta_r * rho).max(0.0);
            gain_s.max(gain_r)
        })
        .reduce(|| 0.0, f64::max)
}

/// One damped simultaneous best-reply sweep; punishment modes are forced
/// and left untouched. Returns the updated field and the pre-update
/// sup-norm best-reply violation.
pub fn best_reply_update(
    kernel: &Kernel,
    grid: &Grid,
    policies: &PolicyField,
    values: &ValueField,
    damping: f64,
    mix_band: f64,
) -> (PolicyField, f64) {
    let nodes = grid.nodes();
    let updates: Vec<(f64, f64, f64)> = (0..nodes)
        .into_par_iter()
        .map(|flat| {
            let i = flat / grid.n_mu();
            let j = flat % grid.n_mu();
            let (sigma, rho) = policies.at(grid, 0, i, j);
            let lambda = grid.lambda[i];
            let mu = grid.mu[j];
            let diff_s = |own: f64| {
                kernel.sender_diff(
                    grid,
                    values,
                    &Ctx {
                        lambda,
                        mu,
                        mode: 0,
                        sigma: own,
                        rho,
                    },
                )
            };
            let diff_r = |own: f64| {
                kernel.receiver_diff(
                    grid,
                    values,
                    &Ctx {
                        lambda,
                        mu,
                        mode: 0,
                        sigma,
                        rho: own,
                    },
                )
            };
            let ds = diff_s(sigma);
            let dr = diff_r(rho);
            let gain_s = (ds * (1.0 - sigma)).max(-ds * sigma).max(0.0);
            let gain_r = (dr * (1.0 - rho)).max(-dr * rho).max(0.0);
            let target_s = mix_target(sigma, mix_band, diff_s);
            let target_r = mix_target(rho, mix_band, diff_r);
            (target_s, target_r, gain_s.max(gain_r))
        })
        .collect();
    let mut out = policies.clone();
    let mut residual = 0.0f64;
    for (flat, (ts, tr, gain)) in updates.into_iter().enumerate() {
        out.sigma[flat] = (1.0 - damping) * out.sigma[flat] + damping * ts;
        out.rho[flat] = (1.0 - damping) * out.rho[flat] + damping * tr;
        residual = residual.max(gain);
    }
    (out, residual)
}

// ---------------------------------------------------------------------------
// Stage equilibrium
// ---------------------------------------------------------------------------

/// Zero of `f` on `[0,1]` by sign-change scan plus bisection. Returns the
/// corner matching the sign when `f` never changes sign.
fn root_or_corner(f: impl Fn(f64) -> f64, scan: usize) -> f64 {
    let mut prev_x = 0.0;
    let mut prev_f = f(0.0);
    if prev_f == 0.0 {
        return 0.0;
    }
    for k in 1..=scan {
        let x = k as f64 / scan as f64;
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx.signum() != prev_f.signum() {
            return bisect_mix(prev_x, x, prev_f, &f);
        }
        prev_x = x;
        prev_f = fx;
    }
    // No sign change: the action difference has one sign throughout.
    if prev_f > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Equilibrium of the one-shot node game induced by continuation values.
///
/// Tries pure corners first (preferring truth/trust), then one-sided
/// mixing, then the coupled interior system: for each sender mix the
/// receiver mix that restores sender indifference is unique because the
/// sender difference falls in the opponent's inspection probability; the
/// receiver's difference is then a scalar root-find in the sender mix.
fn stage_nash(kernel: &Kernel, grid: &Grid, values: &ValueField, i: usize, j: usize) -> (f64, f64) {
    let lambda = grid.lambda[i];
    let mu = grid.mu[j];
    let tol = 1e-11;
    let ds = |s: f64, r: f64| {
        kernel.sender_diff(
            grid,
            values,
            &Ctx {
                lambda,
                mu,
                mode: 0,
                sigma: s,
                rho: r,
            },
        )
    };
    let dr = |s: f64, r: f64| {
        kernel.receiver_diff(
            grid,
            values,
            &Ctx {
                lambda,
                mu,
                mode: 0,
                sigma: s,
                rho: r,
            },
        )
    };
    let gain = |s: f64, r: f64| {
        let a = ds(s, r);
        let b = dr(s, r);
        (a * (1.0 - s))
            .max(-a * s)
            .max(b * (1.0 - r))
            .max(-b * r)
            .max(0.0)
    };
    // Pure corners, truth/trust preferred.
    for (s, r) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
        let a = ds(s, r);
        let b = dr(s, r);
        let s_ok = (s == 0.0 && a <= tol) || (s == 1.0 && a >= -tol);
        let r_ok = (r == 0.0 && b <= tol) || (r == 1.0 && b >= -tol);
        if s_ok && r_ok {
            return (s, r);
        }
    }
    // Sender mixes against a receiver corner.
    for r in [0.0, 1.0] {
        let s = root_or_corner(|x| ds(x, r), 16);
        if s > 0.0 && s < 1.0 {
            let b = dr(s, r);
            if (r == 0.0 && b <= tol) || (r == 1.0 && b >= -tol) {
                return (s, r);
            }
        }
    }
    // Receiver mixes against a sender corner.
    for s in [0.0, 1.0] {
        let r = root_or_corner(|x| dr(s, x), 16);
        if r > 0.0 && r < 1.0 {
            let a = ds(s, r);
            if (s == 0.0 && a <= tol) || (s == 1.0 && a >= -tol) {
                return (s, r);
            }
        }
    }
    // Coupled interior: rho*(sigma) restores sender indifference, then the
    // receiver difference is driven to zero in sigma.
    let rho_of = |s: f64| root_or_corner(|r| ds(s, r), 16);
    let g = |s: f64| {
        let r = rho_of(s);
        dr(s, r)
    };
    let s_star = root_or_corner(g, 24);
    let r_star = rho_of(s_star);
    let cand = (s_star, r_star);
    // Keep whichever candidate deviates least; the interior solve wins
    // whenever it is genuinely consistent.
    let mut best = cand;
    let mut best_gain = gain(cand.0, cand.1);
    for (s, r) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
        let gn = gain(s, r);
        if gn < best_gain {
            best_gain = gn;
            best = (s, r);
        }
    }
    best
}

/// One damped sweep of per-node stage equilibria; used when plain best
/// replies stall on the cyclic inspection-game structure.
pub fn stage_nash_update(
    kernel: &Kernel,
    grid: &Grid,
    policies: &PolicyField,
    values: &ValueField,
    damping: f64,
) -> PolicyField {
    let nodes = grid.nodes();
    let targets: Vec<(f64, f64)> = (0..nodes)
        .into_par_iter()
        .map(|flat| {
            let i = flat / grid.n_mu();
            let j = flat % grid.n_mu();
            stage_nash(kernel, grid, values, i, j)
        })
        .collect();
    let mut out = policies.clone();
    for (flat, (ts, tr)) in targets.into_iter().enumerate() {
        out.sigma[flat] = (1.0 - damping) * out.sigma[flat] + damping * ts;
        out.rho[flat] = (1.0 - damping) * out.rho[flat] + damping * tr;
    }
    out
}

// ---------------------------------------------------------------------------
// Row relaxation
//
// The vigilance belief only moves up within a period (posterior after a
// check) and resets to the exact node mu = 0 on trust, so the mu = 0 row is
// a self-contained subgame and every other row depends only on rows above
// it plus row 0. Solving row 0 first and then relaxing rows top-down turns
// the unstable global coordination into a chain of small one-dimensional
// fixed points.
// ---------------------------------------------------------------------------

/// In-place evaluation restricted to column `j` (all modes), holding every
/// other column fixed.
fn evaluate_column(
    kernel: &Kernel,
    grid: &Grid,
    policies: &PolicyField,
    values: &mut ValueField,
    j: usize,
    tol: f64,
) {
    let n_modes = kernel.n_modes();
    let nl = grid.n_lambda();
    let delta = kernel.params.delta;
    let cap = ((tol / kernel.params.value_bound().max(1.0)).ln() / delta.ln()).ceil() as usize + 50;
    let mut new_s = vec![0.0; n_modes * nl];
    let mut new_r = vec![0.0; n_modes * nl];
    for _ in 0..cap {
        let mut change = 0.0f64;
        for mode in 0..n_modes {
            for i in 0..nl {
                let (sigma, rho) = policies.at(grid, mode, i, j);
                let ctx = Ctx {
                    lambda: grid.lambda[i],
                    mu: grid.mu[j],
                    mode: mode as u16,
                    sigma,
                    rho,
                };
                let mut vs = 0.0;
                for (deceive, w) in [(true, sigma), (false, 1.0 - sigma)] {
                    if w == 0.0 {
                        continue;
                    }
                    for b in kernel.sender_branches(&ctx, deceive).iter() {
                        let cont = match b.succ {
                            Succ::Terminated => 0.0,
                            Succ::To { mode, lambda, mu } => {
                                values.interp_s(grid, mode as usize, lambda, mu)
                            }
                        };
                        vs += w * b.prob * (b.pay + delta * cont);
                    }
                }
                let mut vr = 0.0;
                for (check, w) in [(true, rho), (false, 1.0 - rho)] {
                    if w == 0.0 {
                        continue;
                    }
                    for b in kernel.receiver_branches(&ctx, check).iter() {
                        let cont = match b.succ {
                            Succ::Terminated => 0.0,
                            Succ::To { mode, lambda, mu } => {
                                values.interp_r(grid, mode as usize, lambda, mu)
                            }
                        };
                        vr += w * b.prob * (b.pay + delta * cont);
                    }
                }
                new_s[mode * nl + i] = vs;
                new_r[mode * nl + i] = vr;
            }
        }
        for mode in 0..n_modes {
            for i in 0..nl {
                let k = mode * grid.nodes() + grid.idx(i, j);
                let vs = new_s[mode * nl + i];
                let vr = new_r[mode * nl + i];
                change = change.max((values.v_s[k] - vs).abs());
                change = change.max((values.v_r[k] - vr).abs());
                values.v_s[k] = vs;
                values.v_r[k] = vr;
            }
        }
        if change <= tol {
            break;
        }
    }
}

fn column_residual(
    kernel: &Kernel,
    grid: &Grid,
    policies: &PolicyField,
    values: &ValueField,
    j: usize,
) -> f64 {
    let mut res = 0.0f64;
    for i in 0..grid.n_lambda() {
        let d = action_differences(kernel, grid, policies, values, i, j);
        let (sigma, rho) = policies.at(grid, 0, i, j);
        let gain_s = (d.delta_s * (1.0 - sigma)).max(-d.delta_s * sigma).max(0.0);
        let gain_r = (d.delta_r * (1.0 - rho)).max(-d.delta_r * rho).max(0.0);
        res = res.max(gain_s).max(gain_r);
    }
    res
}

/// Damped stage-equilibrium relaxation of one column until its local
/// best-reply residual stops improving or drops below `tol`.
fn relax_column(
    kernel: &Kernel,
    grid: &Grid,
    policies: &mut PolicyField,
    values: &mut ValueField,
    j: usize,
    tol: f64,
    max_iter: usize,
) -> f64 {
    let nl = grid.n_lambda();
    let mut damping = 0.5f64;
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    for _ in 0..max_iter {
        evaluate_column(kernel, grid, policies, values, j, tol.min(1e-9));
        let res = column_residual(kernel, grid, policies, values, j);
        if res < best {
            best = res;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 20 {
                damping = (damping * 0.5).max(0.02);
                since_best = 0;
            }
        }
        if res <= tol {
            return res;
        }
        let targets: Vec<(f64, f64)> = (0..nl)
            .into_par_iter()
            .map(|i| stage_nash(kernel, grid, values, i, j))
            .collect();
        for (i, (ts, tr)) in targets.into_iter().enumerate() {
            let k = grid.idx(i, j);
            policies.sigma[k] = (1.0 - damping) * policies.sigma[k] + damping * ts;
            policies.rho[k] = (1.0 - damping) * policies.rho[k] + damping * tr;
        }
    }
    evaluate_column(kernel, grid, policies, values, j, tol.min(1e-9));
    column_residual(kernel, grid, policies, values, j)
}

/// Solver knobs for [`solve_equilibrium`].
#[derive(Debug, Clone)]
pub struct EqOptions {
    pub tol_value: f64,
    pub tol_eq: f64,
    pub damping: f64,
    pub mix_band: f64,
    pub max_outer: usize,
    pub seed_sigma: f64,
    pub seed_rho: f64,
}

impl Default for EqOptions {
    fn default() -> Self {
        let s = crate::params::SolverConfig::default();
        Self {
            tol_value: s.tol_value,
            tol_eq: s.tol_eq,
            damping: s.damping,
            mix_band: s.mix_band,
            max_outer: s.max_outer,
            seed_sigma: s.seed_sigma,
            seed_rho: s.seed_rho,
        }
    }
}

impl EqOptions {
    pub fn from_solver(s: &crate::params::SolverConfig) -> Self {
        Self {
            tol_value: s.tol_value,
            tol_eq: s.tol_eq,
            damping: s.damping,
            mix_band: s.mix_band,
            max_outer: s.max_outer,
            seed_sigma: s.seed_sigma,
            seed_rho: s.seed_rho,
        }
    }
}

/// Damped best-reply iteration to a stationary equilibrium.
///
/// Punishment modes, when present, are pinned to forced truth and
/// mandatory inspection. Non-convergence is reported through the result
/// rather than an error; the residual trace documents the attempt.
pub fn solve_equilibrium(
    kernel: &Kernel,
    grid: &Grid,
    opts: &EqOptions,
) -> Result<EquilibriumResult, ValueError> {
    let n_modes = kernel.n_modes();
    let mut policies = PolicyField::constant(grid, n_modes, opts.seed_sigma, opts.seed_rho);
    // Forced behavior inside the chain.
    for mode in 1..n_modes {
        for k in 0..grid.nodes() {
            policies.sigma[mode * grid.nodes() + k] = 0.0;
            policies.rho[mode * grid.nodes() + k] = 1.0;
        }
    }
    let mut values = ValueField::zeros(grid, n_modes);
    let mut trace = Vec::with_capacity(opts.max_outer);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    // Phase 1: damped simultaneous best replies. Around joint-mixing
    // regions these can cycle (inspection-game structure); the loop then
    // falls through to the structured phase below.
    let stall_window = 30usize;
    let phase1_cap = opts.max_outer.min(200);
    for it in 0..phase1_cap {
        iterations = it + 1;
        values = evaluate_policies_from(kernel, grid, &policies, opts.tol_value, values)?;
        let (next, res) = best_reply_update(
            kernel,
            grid,
            &policies,
            &values,
            opts.damping,
            opts.mix_band,
        );
        residual = res;
        trace.push(res);
        if res <= opts.tol_eq {
            break;
        }
        if it >= stall_window && res > 0.5 * trace[it - stall_window] {
            break;
        }
        policies = next;
    }

    if residual > opts.tol_eq {
        // Phase 2: column relaxation. The mu = 0 column is a closed
        // subgame; remaining columns only look upward in mu, so a top-down
        // sweep resolves them against already-settled continuations.
        relax_column(
            kernel,
            grid,
            &mut policies,
            &mut values,
            0,
            0.25 * opts.tol_eq,
            800,
        );
        for j in (1..grid.n_mu()).rev() {
            relax_column(
                kernel,
                grid,
                &mut policies,
                &mut values,
                j,
                0.25 * opts.tol_eq,
                250,
            );
            iterations += 1;
        }
        values = evaluate_policies_from(kernel, grid, &policies, opts.tol_value, values)?;
        residual = best_reply_residual(kernel, grid, &policies, &values);
        trace.push(residual);

        // Polish: a few damped whole-grid stage sweeps, keeping the best
        // iterate seen.
        let mut best = (policies.clone(), values.clone(), residual);
        let mut polish = 0usize;
        while residual > opts.tol_eq && polish < 60 {
            polish += 1;
            iterations += 1;
            policies = stage_nash_update(kernel, grid, &policies, &values, 0.3);
            values = evaluate_policies_from(kernel, grid, &policies, opts.tol_value, values)?;
            residual = best_reply_residual(kernel, grid, &policies, &values);
            trace.push(residual);
            if residual < best.2 {
                best = (policies.clone(), values.clone(), residual);
            }
        }
        if best.2 < residual {
            policies = best.0;
            values = best.1;
            residual = best.2;
        }
    }
    let converged = residual <= opts.tol_eq;
    // Mixing region: near-indifferent nodes with interior mixes.
    let mut mixing_nodes = 0usize;
    let mut mix_accum = (0.0, 0.0);
    for i in 0..grid.n_lambda() {
        for j in 0..grid.n_mu() {
            let d = action_differences(kernel, grid, &policies, &values, i, j);
            let (s, r) = policies.at(grid, 0, i, j);
            let interior = s > 1e-6 && s < 1.0 - 1e-6 && r > 1e-6 && r < 1.0 - 1e-6;
            if interior && d.delta_s.abs() <= opts.tol_eq && d.delta_r.abs() <= opts.tol_eq {
                mixing_nodes += 1;
                mix_accum.0 += grid.lambda[i];
                mix_accum.1 += grid.mu[j];
            }
        }
    }
    let mixing_point = if mixing_nodes > 0 {
        Some((
            mix_accum.0 / mixing_nodes as f64,
            mix_accum.1 / mixing_nodes as f64,
        ))
    } else {
        None
    };
    let diagnostics = monotonicity_report(grid, &values, &policies);
    Ok(EquilibriumResult {
        policies,
        values,
        mixing_point,
        mixing_nodes,
        residual_sup: residual,
        iterations,
        converged,
        residual_trace: trace,
        diagnostics,
    })
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

const MONO_SLACK: f64 = 1e-7;

fn scan_mono(
    grid: &Grid,
    get: impl Fn(usize, usize) -> f64,
    along_lambda: bool,
    increasing: bool,
) -> MonoCheck {
    let mut check = MonoCheck::default();
    let (ni, nj) = (grid.n_lambda(), grid.n_mu());
    let (outer, inner) = if along_lambda { (nj, ni) } else { (ni, nj) };
    for o in 0..outer {
        for k in 1..inner {
            let (prev, cur) = if along_lambda {
                (get(k - 1, o), get(k, o))
            } else {
                (get(o, k - 1), get(o, k))
            };
            let viol = if increasing { prev - cur } else { cur - prev };
            if viol > MONO_SLACK {
                check.violations += 1;
                if viol > check.max_violation {
                    check.max_violation = viol;
                    check.worst = if along_lambda { (k, o) } else { (o, k) };
                }
            }
        }
    }
    check
}

/// Counts monotonicity violations of converged values and policies beyond
/// a 1e-7 slack, normal mode only.
pub fn monotonicity_report(
    grid: &Grid,
    values: &ValueField,
    policies: &PolicyField,
) -> MonotonicityReport {
    let vs = |i: usize, j: usize| values.v_s[grid.idx(i, j)];
    let vr = |i: usize, j: usize| values.v_r[grid.idx(i, j)];
    let sg = |i: usize, j: usize| policies.sigma[grid.idx(i, j)];
    let rh = |i: usize, j: usize| policies.rho[grid.idx(i, j)];
    MonotonicityReport {
        vs_increasing_lambda: scan_mono(grid, vs, true, true),
        vr_increasing_lambda: scan_mono(grid, vr, true, true),
        vs_decreasing_mu: scan_mono(grid, vs, false, false),
        vr_increasing_mu: scan_mono(grid, vr, false, true),
        rho_decreasing_lambda: scan_mono(grid, rh, true, false),
        sigma_decreasing_mu: scan_mono(grid, sg, false, false),
    }
}
