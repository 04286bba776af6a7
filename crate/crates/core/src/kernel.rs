//! Transition kernels: branch structure of one period of play.
//!
//! A kernel lists, for each player and own action, the public branches of
//! the period: probability, stage payoff, and successor state (possibly
//! absorbing). Policy evaluation mixes branches with the policy weights;
//! best replies and cutoff residuals use the kernel's action-difference
//! functions, which follow each model's displayed indifference equations.

use crate::bayes;
use crate::grid::{Grid, ValueField};
use crate::params::ModelParams;

/// Successor of a branch: a grid-domain state or absorption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Succ {
    To { mode: u16, lambda: f64, mu: f64 },
    Terminated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub prob: f64,
    pub pay: f64,
    pub succ: Succ,
}

/// Inline branch list; one action never produces more than four branches.
#[derive(Debug, Clone, Copy)]
pub struct Branches {
    items: [Branch; 4],
    len: usize,
}

impl Branches {
    pub fn new() -> Self {
        Self {
            items: [Branch {
                prob: 0.0,
                pay: 0.0,
                succ: Succ::Terminated,
            }; 4],
            len: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, prob: f64, pay: f64, succ: Succ) {
        debug_assert!(self.len < 4);
        self.items[self.len] = Branch { prob, pay, succ };
        self.len += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Branch> {
        self.items[..self.len].iter()
    }

    pub fn total_prob(&self) -> f64 {
        self.iter().map(|b| b.prob).sum()
    }
}

impl Default for Branches {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Detected deception absorbs the relationship.
    Termination,
    /// Detected deception enters a mandatory-inspection chain of length `t`.
    Punishment { t: u32 },
    /// Checks are public but a truthful outcome is not disclosed.
    SilentTwoSided,
    /// Imperfect check signal; `regime_b` terminates on any bad signal.
    Noisy { regime_b: bool },
}

/// One-period transition structure under a fixed information variant.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub kind: KernelKind,
    pub params: ModelParams,
}

/// Local state/policy bundle the branch builders work from.
#[derive(Debug, Clone, Copy)]
pub struct Ctx {
    pub lambda: f64,
    pub mu: f64,
    pub mode: u16,
    pub sigma: f64,
    pub rho: f64,
}

impl Kernel {
    pub fn termination(params: ModelParams) -> Self {
        Self {
            kind: KernelKind::Termination,
            params,
        }
    }

    pub fn silent_two_sided(params: ModelParams) -> Self {
        Self {
            kind: KernelKind::SilentTwoSided,
            params,
        }
    }

    pub fn noisy(params: ModelParams, regime_b: bool) -> Self {
        Self {
            kind: KernelKind::Noisy { regime_b },
            params,
        }
    }

    /// Mode layers carried by value/policy fields: normal plus the chain.
    pub fn n_modes(&self) -> usize {
        match self.kind {
            KernelKind::Punishment { t } => 1 + t as usize,
            _ => 1,
        }
    }

    fn chain_len(&self) -> u32 {
        match self.kind {
            KernelKind::Punishment { t } => t,
            _ => 0,
        }
    }

    /// Successor of the detection branch in normal mode.
    fn detection_succ(&self, ctx: &Ctx) -> Succ {
        match self.kind {
            KernelKind::Punishment { t } if t >= 1 => Succ::To {
                mode: 1,
                lambda: ctx.lambda,
                mu: ctx.mu,
            },
            _ => Succ::Terminated,
        }
    }

    /// Branches faced by the strategic sender playing `deceive`.
    pub fn sender_branches(&self, ctx: &Ctx, deceive: bool) -> Branches {
        let mut out = Branches::new();
        if ctx.mode > 0 {
            // Punishment chain: mandatory check, forced truth, no payoff.
            out.push(1.0, 0.0, self.chain_succ(ctx));
            return out;
        }
        let p = &self.params;
        let pc = ctx.mu + (1.0 - ctx.mu) * ctx.rho;
        let mu_p = bayes::posterior_vigilance(ctx.mu, ctx.rho);
        match self.kind {
            KernelKind::Termination | KernelKind::Punishment { .. } => {
                let lam_p = bayes::posterior_truthful_check(ctx.lambda, ctx.sigma);
                if deceive {
                    out.push(1.0 - pc, p.b, trust_reset(ctx.lambda));
                    out.push(pc, p.b, self.detection_succ(ctx));
                } else {
                    out.push(1.0 - pc, 0.0, trust_reset(ctx.lambda));
                    out.push(pc, 0.0, to_normal(lam_p, mu_p));
                }
            }
            KernelKind::SilentTwoSided => {
                if deceive {
                    out.push(1.0 - pc, p.b, trust_reset(ctx.lambda));
                    out.push(pc, p.b, Succ::Terminated);
                } else {
                    out.push(1.0 - pc, 0.0, trust_reset(ctx.lambda));
                    out.push(pc, 0.0, to_normal(ctx.lambda, mu_p));
                }
            }
            KernelKind::Noisy { regime_b } => {
                let lam_g =
                    bayes::noisy_good_posterior(ctx.lambda, ctx.sigma, p.pi_t, p.pi_d);
                if deceive {
                    out.push(1.0 - pc, p.b, trust_reset(ctx.lambda));
                    out.push(pc * (1.0 - p.pi_d), p.b, to_normal(lam_g, mu_p));
                    out.push(pc * p.pi_d, p.b, Succ::Terminated);
                } else if regime_b {
                    out.push(1.0 - pc, 0.0, trust_reset(ctx.lambda));
                    out.push(pc * p.pi_t, 0.0, to_normal(lam_g, mu_p));
                    out.push(pc * (1.0 - p.pi_t), 0.0, Succ::Terminated);
                } else {
                    out.push(1.0 - pc, 0.0, trust_reset(ctx.lambda));
                    out.push(pc, 0.0, to_normal(lam_g, mu_p));
                }
            }
        }
        out
    }

    /// Branches faced by the strategic receiver playing `check`.
    pub fn receiver_branches(&self, ctx: &Ctx, check: bool) -> Branches {
        let mut out = Branches::new();
        if ctx.mode > 0 {
            out.push(1.0, -self.params.c, self.chain_succ(ctx));
            return out;
        }
        let p = &self.params;
        let pt = ctx.lambda + (1.0 - ctx.lambda) * (1.0 - ctx.sigma);
        let pd = (1.0 - ctx.lambda) * ctx.sigma;
        let mu_p = bayes::posterior_vigilance(ctx.mu, ctx.rho);
        if !check {
            // Trust trades blindly; the public state resets vigilance.
            out.push(1.0, p.b * pt, trust_reset(ctx.lambda));
            return out;
        }
        match self.kind {
            KernelKind::Termination | KernelKind::Punishment { .. } => {
                let lam_p = bayes::posterior_truthful_check(ctx.lambda, ctx.sigma);
                out.push(pt, p.b - p.c, to_normal(lam_p, mu_p));
                out.push(pd, p.r - p.c, self.detection_succ(ctx));
            }
            KernelKind::SilentTwoSided => {
                out.push(pt, p.b - p.c, to_normal(ctx.lambda, mu_p));
                out.push(pd, p.r - p.c, Succ::Terminated);
            }
            KernelKind::Noisy { regime_b } => {
                let lam_g =
                    bayes::noisy_good_posterior(ctx.lambda, ctx.sigma, p.pi_t, p.pi_d);
                if regime_b {
                    out.push(pt * p.pi_t, p.b - p.c, to_normal(lam_g, mu_p));
                    out.push(pt * (1.0 - p.pi_t), p.b - p.c, Succ::Terminated);
                    out.push(pd * (1.0 - p.pi_d), -p.c, to_normal(lam_g, mu_p));
                    out.push(pd * p.pi_d, p.r - p.c, Succ::Terminated);
                } else {
                    out.push(pt, p.b - p.c, to_normal(lam_g, mu_p));
                    out.push(pd * (1.0 - p.pi_d), -p.c, to_normal(lam_g, mu_p));
                    out.push(pd * p.pi_d, p.r - p.c, Succ::Terminated);
                }
            }
        }
        out
    }

    fn chain_succ(&self, ctx: &Ctx) -> Succ {
        let t = self.chain_len();
        if u32::from(ctx.mode) < t {
            Succ::To {
                mode: ctx.mode + 1,
                lambda: ctx.lambda,
                mu: ctx.mu,
            }
        } else {
            trust_reset(ctx.lambda)
        }
    }

    /// Deceive-minus-truth value difference at a normal-mode state.
    ///
    /// This is the exact difference of the two action-contingent Bellman
    /// branches, so equilibria of the solver are genuine best-reply fixed
    /// points of the evaluation system. Detection carries its actual
    /// continuation: zero under termination, the chain entry value under
    /// punishment.
    pub fn sender_diff(&self, grid: &Grid, values: &ValueField, ctx: &Ctx) -> f64 {
        let p = &self.params;
        let pc = ctx.mu + (1.0 - ctx.mu) * ctx.rho;
        let mu_p = bayes::posterior_vigilance(ctx.mu, ctx.rho);
        match self.kind {
            KernelKind::Termination => {
                let lam_p = bayes::posterior_truthful_check(ctx.lambda, ctx.sigma);
                let v_up = values.interp_s(grid, 0, lam_p, mu_p);
                p.b - p.delta * pc * v_up
            }
            KernelKind::Punishment { t } => {
                let lam_p = bayes::posterior_truthful_check(ctx.lambda, ctx.sigma);
                let v_up = values.interp_s(grid, 0, lam_p, mu_p);
                let v_pun = if t >= 1 {
                    values.interp_s(grid, 1, ctx.lambda, ctx.mu)
                } else {
                    0.0
                };
                p.b - p.delta * pc * (v_up - v_pun)
            }
            KernelKind::SilentTwoSided => {
                let v_up = values.interp_s(grid, 0, ctx.lambda, mu_p);
                p.b - p.delta * pc * v_up
            }
            KernelKind::Noisy { regime_b } => {
                let lam_g =
                    bayes::noisy_good_posterior(ctx.lambda, ctx.sigma, p.pi_t, p.pi_d);
                let v_g = values.interp_s(grid, 0, lam_g, mu_p);
                let kappa = p.pi_t + p.pi_d - 1.0;
                if regime_b {
                    p.b - p.delta * pc * kappa * v_g
                } else {
                    p.b - p.delta * pc * p.pi_d * v_g
                }
            }
        }
    }

    /// Check-minus-trust value difference at a normal-mode state, again the
    /// exact difference of the receiver's Bellman branches.
    pub fn receiver_diff(&self, grid: &Grid, values: &ValueField, ctx: &Ctx) -> f64 {
        let p = &self.params;
        let pt = ctx.lambda + (1.0 - ctx.lambda) * (1.0 - ctx.sigma);
        let pd = (1.0 - ctx.lambda) * ctx.sigma;
        let mu_p = bayes::posterior_vigilance(ctx.mu, ctx.rho);
        let v_reset = values.interp_r(grid, 0, ctx.lambda, 0.0);
        match self.kind {
            KernelKind::Termination => {
                let lam_p = bayes::posterior_truthful_check(ctx.lambda, ctx.sigma);
                let v_up = values.interp_r(grid, 0, lam_p, mu_p);
                p.r * pd - p.c + p.delta * (pt * v_up - v_reset)
            }
            KernelKind::Punishment { t } => {
                let lam_p = bayes::posterior_truthful_check(ctx.lambda, ctx.sigma);
                let v_up = values.interp_r(grid, 0, lam_p, mu_p);
                let v_pun = if t >= 1 {
                    values.interp_r(grid, 1, ctx.lambda, ctx.mu)
                } else {
                    0.0
                };
                p.r * pd - p.c + p.delta * (pt * v_up + (1.0 - pt) * v_pun - v_reset)
            }
            KernelKind::SilentTwoSided => {
                let v_up = values.interp_r(grid, 0, ctx.lambda, mu_p);
                p.r * pd - p.c + p.delta * (pt * v_up - v_reset)
            }
            KernelKind::Noisy { regime_b } => {
                let lam_g =
                    bayes::noisy_good_posterior(ctx.lambda, ctx.sigma, p.pi_t, p.pi_d);
                let v_g = values.interp_r(grid, 0, lam_g, mu_p);
                if regime_b {
                    p.r * (pt * (1.0 - p.pi_t) + pd * p.pi_d) - p.c
                        + p.delta * ((pt * p.pi_t + pd * (1.0 - p.pi_d)) * v_g - v_reset)
                } else {
                    p.r * pd * p.pi_d - p.c
                        + p.delta * ((1.0 - pd * p.pi_d) * v_g - v_reset)
                }
            }
        }
    }

    /// Probability the period ends the normal phase (termination or
    /// punishment entry) at a state under given local policies.
    pub fn hazard(&self, ctx: &Ctx) -> f64 {
        let p = &self.params;
        let pc = ctx.mu + (1.0 - ctx.mu) * ctx.rho;
        let pd = (1.0 - ctx.lambda) * ctx.sigma;
        match self.kind {
            KernelKind::Termination | KernelKind::Punishment { .. } | KernelKind::SilentTwoSided => {
                pc * pd
            }
            KernelKind::Noisy { regime_b } => {
                if regime_b {
                    let pt = ctx.lambda + (1.0 - ctx.lambda) * (1.0 - ctx.sigma);
                    pc * (pt * (1.0 - p.pi_t) + pd * p.pi_d)
                } else {
                    pc * pd * p.pi_d
                }
            }
        }
    }
}

#[inline]
fn trust_reset(lambda: f64) -> Succ {
    Succ::To {
        mode: 0,
        lambda,
        mu: 0.0,
    }
}

#[inline]
fn to_normal(lambda: f64, mu: f64) -> Succ {
    Succ::To {
        mode: 0,
        lambda,
        mu,
    }
}
