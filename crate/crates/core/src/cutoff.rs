//! Mixing-cutoff system: indifference residuals, the joint mixing point,
//! the closed-form deterrence benchmark with robustness bounds,
//! comparative-statics sweeps, and the termination hazard.

use thiserror::Error;

use crate::grid::{Grid, PolicyField, ValueField};
use crate::kernel::{Ctx, Kernel};
use crate::params::ModelParams;
use crate::value::{solve_equilibrium, EqOptions, EquilibriumResult};

#[derive(Debug, Error)]
pub enum CutoffError {
    #[error("no root in box")]
    NoRootInBox,
    #[error("gap nonpositive")]
    GapNonpositive,
    #[error("{0}")]
    Solver(#[from] crate::value::ValueError),
}

/// Joint mixing point with local-uniqueness diagnostics.
#[derive(Debug, Clone)]
pub struct MixingSolution {
    pub x_star: (f64, f64),
    pub residuals: (f64, f64),
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    pub locally_unique: bool,
    /// Sign conditions for classical local uniqueness:
    /// `dF_s/dmu < 0` and `dF_r/dlambda < 0`.
    pub sign_conditions: (bool, bool),
    /// Determinant agrees between 1e-4 and 1e-3 difference steps.
    pub jacobian_stable: bool,
}

/// Sender and receiver indifference residuals at a state, policies read
/// from the fields. `F_s = 0` and `F_r = 0` jointly pin the mixing point;
/// `F_s` equals the sender action difference and `F_r` its negative.
pub fn indifference_residuals(
    kernel: &Kernel,
    grid: &Grid,
    values: &ValueField,
    policies: &PolicyField,
    lambda: f64,
    mu: f64,
) -> (f64, f64) {
    let (sigma, rho) = policies.interp(grid, 0, lambda, mu);
    indifference_residuals_at(kernel, grid, values, lambda, mu, sigma, rho)
}

/// Residuals with the local mixing intensities supplied explicitly.
pub fn indifference_residuals_at(
    kernel: &Kernel,
    grid: &Grid,
    values: &ValueField,
    lambda: f64,
    mu: f64,
    sigma: f64,
    rho: f64,
) -> (f64, f64) {
    let ctx = Ctx {
        lambda,
        mu,
        mode: 0,
        sigma,
        rho,
    };
    let f_s = kernel.sender_diff(grid, values, &ctx);
    let f_r = -kernel.receiver_diff(grid, values, &ctx);
    (f_s, f_r)
}

fn residual_vec(
    kernel: &Kernel,
    grid: &Grid,
    values: &ValueField,
    policies: &PolicyField,
    x: (f64, f64),
) -> (f64, f64) {
    indifference_residuals(kernel, grid, values, policies, x.0, x.1)
}

fn fd_jacobian(
    kernel: &Kernel,
    grid: &Grid,
    values: &ValueField,
    policies: &PolicyField,
    x: (f64, f64),
    h: f64,
) -> [[f64; 2]; 2] {
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let eval = |l: f64, m: f64| residual_vec(kernel, grid, values, policies, (clamp(l), clamp(m)));
    let (fs_lp, fr_lp) = eval(x.0 + h, x.1);
    let (fs_lm, fr_lm) = eval(x.0 - h, x.1);
    let (fs_mp, fr_mp) = eval(x.0, x.1 + h);
    let (fs_mm, fr_mm) = eval(x.0, x.1 - h);
    [
        [(fs_lp - fs_lm) / (2.0 * h), (fs_mp - fs_mm) / (2.0 * h)],
        [(fr_lp - fr_lm) / (2.0 * h), (fr_mp - fr_mm) / (2.0 * h)],
    ]
}

fn det2(j: &[[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

fn norm2(v: (f64, f64)) -> f64 {
    (v.0 * v.0 + v.1 * v.1).sqrt()
}

/// 1-D bisection for a residual component along one axis.
fn bisect_axis(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let mut a = lo;
    let mut b = hi;
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut sa = fa.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a) < 1e-14 {
            return Some(m);
        }
        if fm.signum() == sa {
            a = m;
            sa = fm.signum();
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Solves `F_s = F_r = 0` by damped Newton with a central finite-difference
/// Jacobian (step 1e-4), falling back to alternating bisection along each
/// indifference locus. The mu-direction search is restricted to
/// `[0, min(1, (1-delta)/delta)]` because `p_check >= mu` at a sender
/// mixing state.
pub fn solve_mixing_point(
    kernel: &Kernel,
    grid: &Grid,
    eq: &EquilibriumResult,
    x0: (f64, f64),
) -> Result<MixingSolution, CutoffError> {
    if !(x0.0 > 0.0 && x0.0 < 1.0 && x0.1 > 0.0 && x0.1 < 1.0) {
        return Err(CutoffError::NoRootInBox);
    }
    let params = &kernel.params;
    let mu_max = ((1.0 - params.delta) / params.delta).min(1.0);
    let eps = 1e-9;
    let f = |x: (f64, f64)| residual_vec(kernel, grid, &eq.values, &eq.policies, x);

    // Damped Newton.
    let mut x = x0;
    let mut best = x;
    let mut best_norm = norm2(f(x));
    let mut solved = best_norm <= 1e-8;
    if !solved {
        for _ in 0..120 {
            let r = f(x);
            let n = norm2(r);
            if n < best_norm {
                best_norm = n;
                best = x;
            }
            if n <= 1e-8 {
                solved = true;
                break;
            }
            let j = fd_jacobian(kernel, grid, &eq.values, &eq.policies, x, 1e-4);
            let d = det2(&j);
            if d.abs() < 1e-14 {
                break;
            }
            let step = (
                -(j[1][1] * r.0 - j[0][1] * r.1) / d,
                -(-j[1][0] * r.0 + j[0][0] * r.1) / d,
            );
            // Backtracking line search on the residual norm.
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand = (
                    (x.0 + alpha * step.0).clamp(eps, 1.0 - eps),
                    (x.1 + alpha * step.1).clamp(eps, 1.0 - eps),
                );
                if norm2(f(cand)) < n {
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
    }

    if !solved {
        // Alternating bisection: lambda along the receiver locus, mu along
        // the sender locus.
        let mut y = best;
        let mut ok = true;
        for _ in 0..80 {
            let mu = y.1;
            let lam = match bisect_axis(|l| f((l, mu)).1, eps, 1.0 - eps) {
                Some(l) => l,
                None => {
                    ok = false;
                    break;
                }
            };
            let mu_new = match bisect_axis(|m| f((lam, m)).0, 0.0, mu_max.max(1e-6)) {
                Some(m) => m,
                None => {
                    ok = false;
                    break;
                }
            };
            let moved = (lam - y.0).abs().max((mu_new - y.1).abs());
            y = (lam, mu_new);
            let n = norm2(f(y));
            if n < best_norm {
                best_norm = n;
                best = y;
            }
            if n <= 1e-8 {
                solved = true;
                break;
            }
            if moved < 1e-13 {
                break;
            }
        }
        if !solved && !ok && best_norm > 1e-6 {
            return Err(CutoffError::NoRootInBox);
        }
    }

    let x = best;
    let j = fd_jacobian(kernel, grid, &eq.values, &eq.policies, x, 1e-4);
    let j_coarse = fd_jacobian(kernel, grid, &eq.values, &eq.policies, x, 1e-3);
    let d = det2(&j);
    let d_coarse = det2(&j_coarse);
    let stable = if d.abs().max(d_coarse.abs()) < 1e-12 {
        true
    } else {
        (d - d_coarse).abs() <= 0.25 * d.abs().max(d_coarse.abs())
    };
    if !solved && best_norm > 1e-8 {
        return Err(CutoffError::NoRootInBox);
    }
    Ok(MixingSolution {
        x_star: x,
        residuals: f(x),
        jacobian: j,
        det: d,
        locally_unique: d.abs() > 1e-8,
        sign_conditions: (j[0][1] < 0.0, j[1][0] < 0.0),
        jacobian_stable: stable,
    })
}

// ---------------------------------------------------------------------------
// Closed-form benchmark
// ---------------------------------------------------------------------------

/// Closed-form deterrence benchmark and its robustness bounds.
#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub p_star: f64,
    pub lambda_star: f64,
    pub p_bounds: (f64, f64),
    pub lambda_bounds: (f64, f64),
    /// False when the honesty-cutoff formula leaves (0,1).
    pub lambda_in_unit: bool,
    /// `|delta * p_star - (1 - delta)|`; zero in exact arithmetic.
    pub identity_gap: f64,
}

/// Evaluates `p* = (1-delta)/delta` and the honesty cutoff
/// `lambda* = 1 - C / (delta B p* (sigma_bar - sigma_bar'))` together with
/// the multiplicative tolerance-band bounds.
pub fn closed_form_benchmark(
    params: &ModelParams,
    sigma_bar: f64,
    sigma_bar_prime: f64,
) -> Result<BenchmarkResult, CutoffError> {
    let gap = sigma_bar - sigma_bar_prime;
    if gap <= 0.0 {
        return Err(CutoffError::GapNonpositive);
    }
    let delta = params.delta;
    let eps = params.eps_band;
    let p_star = (1.0 - delta) / delta;
    let core = params.c / (delta * params.b * p_star * gap);
    let lambda_star = 1.0 - core;
    let p_bounds = (p_star / (1.0 + eps), p_star / (1.0 - eps));
    let lambda_bounds = (lambda_star, 1.0 - core * (1.0 - eps) / (1.0 + eps));
    Ok(BenchmarkResult {
        p_star,
        lambda_star,
        p_bounds,
        lambda_bounds,
        lambda_in_unit: lambda_star > 0.0 && lambda_star < 1.0,
        identity_gap: (delta * p_star - (1.0 - delta)).abs(),
    })
}

// ---------------------------------------------------------------------------
// Comparative statics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTarget {
    B,
    C,
    Delta,
}

impl SweepTarget {
    pub fn name(&self) -> &'static str {
        match self {
            Self::B => "b",
            Self::C => "c",
            Self::Delta => "delta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "b" => Some(Self::B),
            "c" => Some(Self::C),
            "delta" => Some(Self::Delta),
            _ => None,
        }
    }

    fn apply(&self, base: &ModelParams, v: f64) -> ModelParams {
        let mut p = base.clone();
        match self {
            Self::B => p.b = v,
            Self::C => p.c = v,
            Self::Delta => p.delta = v,
        }
        p
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub param: f64,
    pub lambda_star: f64,
    pub mu_star: f64,
    pub p_check: f64,
    pub hazard: f64,
    pub flags: String,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub target: SweepTarget,
    pub rows: Vec<SweepRow>,
    pub sign_report: Vec<String>,
}

impl SweepTable {
    /// Fixed-header delimiter-separated rendering.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,lambda_star,mu_star,p_check,hazard,flags\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                crate::report::sig9(r.param),
                crate::report::sig9(r.lambda_star),
                crate::report::sig9(r.mu_star),
                crate::report::sig9(r.p_check),
                crate::report::sig9(r.hazard),
                r.flags
            ));
        }
        out
    }
}

/// Closed-form benchmark sweep over one primitive.
pub fn comparative_statics_sweep_benchmark(
    params: &ModelParams,
    target: SweepTarget,
    values: &[f64],
) -> Result<SweepTable, CutoffError> {
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let p = target.apply(params, v);
        let bench = closed_form_benchmark(&p, p.sigma_bar, p.sigma_bar_prime)?;
        let mut flags = Vec::new();
        if !bench.lambda_in_unit {
            flags.push("lambda_star outside (0,1)");
        }
        if bench.p_star >= 1.0 {
            flags.push("p_star at or above 1");
        }
        rows.push(SweepRow {
            param: v,
            lambda_star: bench.lambda_star,
            mu_star: bench.p_star.min(1.0),
            p_check: bench.p_star,
            hazard: bench.p_star.min(1.0) * (1.0 - bench.lambda_star) * p.sigma_bar,
            flags: flags.join(";"),
        });
    }
    let sign_report = benchmark_sign_report(target, &rows);
    Ok(SweepTable {
        target,
        rows,
        sign_report,
    })
}

fn benchmark_sign_report(target: SweepTarget, rows: &[SweepRow]) -> Vec<String> {
    let mut out = Vec::new();
    let diffs: Vec<f64> = rows
        .windows(2)
        .map(|w| w[1].lambda_star - w[0].lambda_star)
        .collect();
    let check = |pred: &str, ok: bool| format!("{pred}: {}", if ok { "ok" } else { "violated" });
    match target {
        SweepTarget::B => out.push(check(
            "d lambda*/d b > 0",
            diffs.iter().all(|d| *d >= -1e-12),
        )),
        SweepTarget::C => out.push(check(
            "d lambda*/d c < 0",
            diffs.iter().all(|d| *d <= 1e-12),
        )),
        SweepTarget::Delta => {
            out.push(check(
                "d p*/d delta < 0",
                rows.windows(2).all(|w| w[1].p_check <= w[0].p_check + 1e-12),
            ));
            out.push(check(
                "d lambda*/d delta < 0 (benchmark)",
                diffs.iter().all(|d| *d <= 1e-12),
            ));
        }
    }
    out
}

/// Full-model sweep: solves the equilibrium and the mixing point for each
/// parameter value; rows without an interior mixing point carry a flag.
pub fn comparative_statics_sweep_full(
    params: &ModelParams,
    target: SweepTarget,
    values: &[f64],
    grid: &Grid,
    opts: &EqOptions,
) -> Result<SweepTable, CutoffError> {
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let p = target.apply(params, v);
        let kernel = Kernel::termination(p.clone());
        let eq = solve_equilibrium(&kernel, grid, opts)?;
        let seed = eq
            .mixing_point
            .unwrap_or((p.lambda0, (0.5 * (1.0 - p.delta) / p.delta).clamp(0.05, 0.95)));
        match solve_mixing_point(&kernel, grid, &eq, seed) {
            Ok(sol) => {
                let (l, m) = sol.x_star;
                let (sigma, rho) = eq.policies.interp(grid, 0, l, m);
                let pc = m + (1.0 - m) * rho;
                rows.push(SweepRow {
                    param: v,
                    lambda_star: l,
                    mu_star: m,
                    p_check: pc,
                    hazard: pc * (1.0 - l) * sigma,
                    flags: if eq.converged {
                        String::new()
                    } else {
                        "solver not converged".to_string()
                    },
                });
            }
            Err(_) => rows.push(SweepRow {
                param: v,
                lambda_star: f64::NAN,
                mu_star: f64::NAN,
                p_check: f64::NAN,
                hazard: f64::NAN,
                flags: "no interior mixing".to_string(),
            }),
        }
    }
    let mut sign_report = Vec::new();
    let finite: Vec<&SweepRow> = rows.iter().filter(|r| r.lambda_star.is_finite()).collect();
    if finite.len() >= 2 {
        let dl: Vec<f64> = finite
            .windows(2)
            .map(|w| w[1].lambda_star - w[0].lambda_star)
            .collect();
        let dm: Vec<f64> = finite
            .windows(2)
            .map(|w| w[1].mu_star - w[0].mu_star)
            .collect();
        let tol = 1e-9;
        match target {
            SweepTarget::B => {
                sign_report.push(sign_line("d lambda*/d b > 0", dl.iter().all(|d| *d >= -tol)));
                sign_report.push(sign_line("d mu*/d b > 0", dm.iter().all(|d| *d >= -tol)));
            }
            SweepTarget::C => {
                sign_report.push(sign_line("d lambda*/d c < 0", dl.iter().all(|d| *d <= tol)));
                sign_report.push(sign_line("d mu*/d c > 0", dm.iter().all(|d| *d >= -tol)));
            }
            SweepTarget::Delta => {
                sign_report.push(sign_line("d mu*/d delta < 0", dm.iter().all(|d| *d <= tol)));
                sign_report.push(
                    "d lambda*/d delta: ambiguous in general, negative in benchmark".to_string(),
                );
            }
        }
    }
    Ok(SweepTable {
        target,
        rows,
        sign_report,
    })
}

fn sign_line(pred: &str, ok: bool) -> String {
    format!("{pred}: {}", if ok { "ok" } else { "violated" })
}

/// Per-period termination hazard at a state under the field policies.
pub fn hazard(grid: &Grid, policies: &PolicyField, lambda: f64, mu: f64) -> f64 {
    let (sigma, rho) = policies.interp(grid, 0, lambda, mu);
    let p_check = mu + (1.0 - mu) * rho;
    p_check * (1.0 - lambda) * sigma
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_point_values() {
        let p = ModelParams {
            delta: 0.9,
            b: 1.0,
            c: 0.01,
            eps_band: 0.1,
            ..ModelParams::default()
        };
        let b = closed_form_benchmark(&p, 0.6, 0.1).unwrap();
        assert!((b.p_star - 0.111111111111).abs() < 1e-9);
        assert!((b.lambda_star - 0.8).abs() < 1e-9);
        assert!((b.p_bounds.0 - 0.1010101010).abs() < 1e-9);
        assert!((b.p_bounds.1 - 0.1234567901).abs() < 1e-9);
        assert!(b.identity_gap <= 1e-12);
        // Remark route: lambda* via delta p* = 1 - delta coincides.
        let alt = 1.0 - p.c / ((1.0 - p.delta) * p.b * 0.5);
        assert!((b.lambda_star - alt).abs() < 1e-12);
    }

    #[test]
    fn benchmark_gap_error() {
        let p = ModelParams::default();
        assert!(matches!(
            closed_form_benchmark(&p, 0.2, 0.5),
            Err(CutoffError::GapNonpositive)
        ));
    }

    #[test]
    fn benchmark_bounds_nest() {
        for eps in [0.0, 0.1, 0.3, 0.5] {
            let p = ModelParams {
                eps_band: eps,
                c: 0.02,
                ..ModelParams::default()
            };
            let b = closed_form_benchmark(&p, 0.6, 0.1).unwrap();
            assert!(b.p_bounds.0 <= b.p_star && b.p_star <= b.p_bounds.1);
            assert!(b.lambda_bounds.0 <= b.lambda_star && b.lambda_star <= b.lambda_bounds.1);
        }
    }

    #[test]
    fn benchmark_delta_sweep_examples() {
        let p = ModelParams::default();
        let t =
            comparative_statics_sweep_benchmark(&p, SweepTarget::Delta, &[0.8, 0.9, 0.95]).unwrap();
        let ps: Vec<f64> = t.rows.iter().map(|r| r.p_check).collect();
        assert!((ps[0] - 0.25).abs() < 1e-12);
        assert!((ps[1] - 0.111111111).abs() < 1e-9);
        assert!((ps[2] - 0.052631578).abs() < 1e-9);
        assert!(ps[0] > ps[1] && ps[1] > ps[2]);
        assert!(t.sign_report.iter().all(|l| l.ends_with("ok")));
    }

    #[test]
    fn benchmark_c_sweep_monotone() {
        let p = ModelParams::default();
        let t = comparative_statics_sweep_benchmark(
            &p,
            SweepTarget::C,
            &[0.01, 0.02, 0.04, 0.08],
        )
        .unwrap();
        let ls: Vec<f64> = t.rows.iter().map(|r| r.lambda_star).collect();
        assert!(ls.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn hazard_examples() {
        let grid = Grid::uniform(3, 3);
        // sigma = 0.5, rho chosen so p_check = 0.2 at mu = 0.
        let policies = PolicyField::constant(&grid, 1, 0.5, 0.2);
        let h = hazard(&grid, &policies, 0.6, 0.0);
        assert!((h - 0.2 * 0.4 * 0.5).abs() < 1e-12);
        assert_eq!(hazard(&grid, &policies, 1.0, 0.0), 0.0);
    }
}
