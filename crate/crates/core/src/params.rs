//! Model primitives and run configuration.
//!
//! All scalar parameters live in one validated record ([`ModelParams`]).
//! Solver, grid and simulation knobs are grouped separately so that a run
//! is fully described by a flat key-value config file plus a seed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("{0}")]
    Invalid(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error("config io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which information/technology variant a run operates under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantId {
    Baseline,
    NoisyA,
    NoisyB,
    SilentTwoSided,
    LeakageQ,
    Alarm,
    Sce,
}

impl VariantId {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "baseline" => Some(Self::Baseline),
            "noisy_a" => Some(Self::NoisyA),
            "noisy_b" => Some(Self::NoisyB),
            "silent_two_sided" => Some(Self::SilentTwoSided),
            "leakage" => Some(Self::LeakageQ),
            "alarm" => Some(Self::Alarm),
            "sce" => Some(Self::Sce),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::NoisyA => "noisy_a",
            Self::NoisyB => "noisy_b",
            Self::SilentTwoSided => "silent_two_sided",
            Self::LeakageQ => "leakage",
            Self::Alarm => "alarm",
            Self::Sce => "sce",
        }
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Default for VariantId {
    fn default() -> Self {
        VariantId::Baseline
    }
}

/// All scalar model primitives in one place.
///
/// `b` is the sender's per-period deception benefit, `c` the receiver's
/// inspection cost, `r` the detection compensation (0 gives the main-model
/// payoffs; positive values switch on the compensation convention used by
/// the private-monitoring variants).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub b: f64,
    pub c: f64,
    pub r: f64,
    pub delta: f64,
    pub lambda0: f64,
    pub mu0: f64,
    /// Committed-honest share in the self-confirming benchmark.
    pub theta: f64,
    /// Disclosure probability of a truthful check (leakage variant).
    pub q: f64,
    /// P(good signal | truth, check) under noisy checks.
    pub pi_t: f64,
    /// P(bad signal | deceive, check) under noisy checks.
    pub pi_d: f64,
    /// Alarm frequency under truthful play.
    pub eps_alarm: f64,
    /// Alarm likelihood ratio favoring deception.
    pub kappa_alarm: f64,
    /// Multiplicative tolerance band for the closed-form benchmark.
    pub eps_band: f64,
    /// Punishment length cap used by the equivalence search.
    pub t_pun: u32,
    /// Continuous-time discount rate.
    pub beta_ct: f64,
    /// Maximum continuous-time inspection rate.
    pub r_bar: f64,
    /// Deception rate before a deterrence window (benchmark).
    pub sigma_bar: f64,
    /// Deception rate inside the deterrence window (benchmark).
    pub sigma_bar_prime: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            b: 1.0,
            c: 0.2,
            r: 0.0,
            delta: 0.9,
            lambda0: 0.5,
            mu0: 0.2,
            theta: 0.5,
            q: 0.5,
            pi_t: 0.9,
            pi_d: 0.9,
            eps_alarm: 0.1,
            kappa_alarm: 2.0,
            eps_band: 0.1,
            t_pun: 200,
            beta_ct: 1.0,
            r_bar: 2.0,
            sigma_bar: 0.6,
            sigma_bar_prime: 0.1,
        }
    }
}

impl ModelParams {
    /// Checks every invariant and returns the first violation by name.
    ///
    /// `c < b` is the main-model assumption but several variants relax it,
    /// so it is reported through [`Self::warnings`] rather than rejected.
    pub fn validate(&self) -> Result<(), ParamError> {
        fn err(msg: &str) -> Result<(), ParamError> {
            Err(ParamError::Invalid(msg.to_string()))
        }
        if !(self.c > 0.0) {
            return err("c must be positive");
        }
        if !(self.b > 0.0) {
            return err("b must be positive");
        }
        if !(self.r >= 0.0) {
            return err("r must be nonnegative");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return err("delta out of (0,1)");
        }
        if !(self.lambda0 > 0.0 && self.lambda0 < 1.0) {
            return err("lambda0 out of (0,1)");
        }
        if !(self.mu0 >= 0.0 && self.mu0 < 1.0) {
            return err("mu0 out of [0,1)");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return err("theta out of [0,1]");
        }
        if !(0.0..=1.0).contains(&self.q) {
            return err("q out of [0,1]");
        }
        if !(0.0..=1.0).contains(&self.pi_t) {
            return err("pi_t out of [0,1]");
        }
        if !(0.0..=1.0).contains(&self.pi_d) {
            return err("pi_d out of [0,1]");
        }
        if !(self.eps_alarm > 0.0 && self.eps_alarm < 1.0) {
            return err("eps_alarm out of (0,1)");
        }
        if !(self.kappa_alarm > 1.0) {
            return err("kappa_alarm must exceed 1");
        }
        if self.kappa_alarm * self.eps_alarm > 1.0 {
            return err("kappa*eps exceeds 1");
        }
        if !(self.eps_band >= 0.0 && self.eps_band < 1.0) {
            return err("eps_band out of [0,1)");
        }
        if !(self.beta_ct > 0.0) {
            return err("beta_ct must be positive");
        }
        if !(self.r_bar > 0.0) {
            return err("r_bar must be positive");
        }
        if !(0.0..=1.0).contains(&self.sigma_bar) || !(0.0..=1.0).contains(&self.sigma_bar_prime) {
            return err("sigma_bar and sigma_bar_prime must lie in [0,1]");
        }
        Ok(())
    }

    /// Soft diagnostics that do not invalidate a parameter set.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.c >= self.b {
            w.push("c >= b: outside the main-model range (variants may still apply)".to_string());
        }
        if self.pi_t + self.pi_d < 1.0 {
            w.push("pi_t + pi_d < 1: noisy-check precision kappa is negative".to_string());
        }
        w
    }

    /// Noisy-check precision `pi_t + pi_d - 1`.
    pub fn kappa_noisy(&self) -> f64 {
        self.pi_t + self.pi_d - 1.0
    }

    /// Geometric bound on any continuation value the model can produce.
    pub fn value_bound(&self) -> f64 {
        (self.b + self.r + self.c) / (1.0 - self.delta)
    }
}

/// Validates and passes through a parameter record.
pub fn validate_params(p: ModelParams) -> Result<ModelParams, ParamError> {
    p.validate()?;
    Ok(p)
}

/// Equilibrium-solver knobs.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub n_lambda: usize,
    pub n_mu: usize,
    /// Node count for the one-dimensional variant grids.
    pub n_1d: usize,
    pub tol_value: f64,
    pub tol_eq: f64,
    pub damping: f64,
    pub mix_band: f64,
    pub max_outer: usize,
    pub seed_sigma: f64,
    pub seed_rho: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_lambda: 201,
            n_mu: 201,
            n_1d: 401,
            tol_value: 1e-10,
            tol_eq: 1e-6,
            damping: 0.3,
            mix_band: 1e-9,
            max_outer: 600,
            seed_sigma: 0.5,
            seed_rho: 0.5,
        }
    }
}

/// Simulation knobs.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_paths: usize,
    /// 0 means "derive from the truncation bound".
    pub horizon: usize,
    pub seed: u64,
    pub window: usize,
    pub spurt_quantile: f64,
    pub bins: usize,
    pub bootstrap: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            horizon: 0,
            seed: 17,
            window: 5,
            spurt_quantile: 0.8,
            bins: 20,
            bootstrap: 200,
        }
    }
}

impl SimConfig {
    /// Horizon that keeps the discounted-tail truncation error below `tol`.
    pub fn effective_horizon(&self, p: &ModelParams, tol: f64) -> usize {
        if self.horizon > 0 {
            return self.horizon;
        }
        let vmax = p.value_bound().max(1.0);
        let h = ((tol / vmax).ln() / p.delta.ln()).ceil();
        (h.max(1.0) as usize).max(8)
    }
}

/// One fully resolved run: model + solver + simulation + variant selection.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub model: ModelParams,
    pub solver: SolverConfig,
    pub sim: SimConfig,
    pub variant: VariantId,
    pub noisy_regime_b: bool,
}

impl RunConfig {
    /// Applies one `key = value` assignment; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ParamError> {
        fn f64_of(key: &str, value: &str) -> Result<f64, ParamError> {
            value.parse::<f64>().map_err(|e| ParamError::BadValue {
                key: key.to_string(),
                msg: e.to_string(),
            })
        }
        fn usize_of(key: &str, value: &str) -> Result<usize, ParamError> {
            value.parse::<usize>().map_err(|e| ParamError::BadValue {
                key: key.to_string(),
                msg: e.to_string(),
            })
        }
        match key {
            "b" => self.model.b = f64_of(key, value)?,
            "c" => self.model.c = f64_of(key, value)?,
            "r" => self.model.r = f64_of(key, value)?,
            "delta" => self.model.delta = f64_of(key, value)?,
            "lambda0" => self.model.lambda0 = f64_of(key, value)?,
            "mu0" => self.model.mu0 = f64_of(key, value)?,
            "theta" => self.model.theta = f64_of(key, value)?,
            "q" => self.model.q = f64_of(key, value)?,
            "pi_t" => self.model.pi_t = f64_of(key, value)?,
            "pi_d" => self.model.pi_d = f64_of(key, value)?,
            "eps_alarm" => self.model.eps_alarm = f64_of(key, value)?,
            "kappa_alarm" => self.model.kappa_alarm = f64_of(key, value)?,
            "eps_band" => self.model.eps_band = f64_of(key, value)?,
            "t_pun" => self.model.t_pun = usize_of(key, value)? as u32,
            "beta_ct" => self.model.beta_ct = f64_of(key, value)?,
            "r_bar" => self.model.r_bar = f64_of(key, value)?,
            "sigma_bar" => self.model.sigma_bar = f64_of(key, value)?,
            "sigma_bar_prime" => self.model.sigma_bar_prime = f64_of(key, value)?,
            "grid_n_lambda" => self.solver.n_lambda = usize_of(key, value)?,
            "grid_n_mu" => self.solver.n_mu = usize_of(key, value)?,
            "grid_n_1d" => self.solver.n_1d = usize_of(key, value)?,
            "tol_value" => self.solver.tol_value = f64_of(key, value)?,
            "tol_eq" => self.solver.tol_eq = f64_of(key, value)?,
            "damping" => self.solver.damping = f64_of(key, value)?,
            "mix_band" => self.solver.mix_band = f64_of(key, value)?,
            "max_outer" => self.solver.max_outer = usize_of(key, value)?,
            "seed_sigma" => self.solver.seed_sigma = f64_of(key, value)?,
            "seed_rho" => self.solver.seed_rho = f64_of(key, value)?,
            "n_paths" => self.sim.n_paths = usize_of(key, value)?,
            "horizon" => self.sim.horizon = usize_of(key, value)?,
            "seed" => {
                self.sim.seed = value.parse::<u64>().map_err(|e| ParamError::BadValue {
                    key: key.to_string(),
                    msg: e.to_string(),
                })?
            }
            "window" => self.sim.window = usize_of(key, value)?,
            "spurt_quantile" => self.sim.spurt_quantile = f64_of(key, value)?,
            "bins" => self.sim.bins = usize_of(key, value)?,
            "bootstrap" => self.sim.bootstrap = usize_of(key, value)?,
            "variant" => {
                self.variant = VariantId::parse(value).ok_or_else(|| ParamError::BadValue {
                    key: key.to_string(),
                    msg: format!("unknown variant `{value}`"),
                })?;
                self.noisy_regime_b = self.variant == VariantId::NoisyB;
            }
            _ => return Err(ParamError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parses a flat `key = value` config file. `#` starts a comment.
    pub fn from_str_cfg(text: &str) -> Result<Self, ParamError> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ParamError::Invalid(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.model.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ParamError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_cfg(&text)
    }

    /// Flat view of every key for manifests and golden files.
    pub fn resolved_entries(&self) -> BTreeMap<String, String> {
        let m = &self.model;
        let s = &self.solver;
        let sim = &self.sim;
        let mut out = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            out.insert(k.to_string(), v);
        };
        put("b", format!("{}", m.b));
        put("c", format!("{}", m.c));
        put("r", format!("{}", m.r));
        put("delta", format!("{}", m.delta));
        put("lambda0", format!("{}", m.lambda0));
        put("mu0", format!("{}", m.mu0));
        put("theta", format!("{}", m.theta));
        put("q", format!("{}", m.q));
        put("pi_t", format!("{}", m.pi_t));
        put("pi_d", format!("{}", m.pi_d));
        put("eps_alarm", format!("{}", m.eps_alarm));
        put("kappa_alarm", format!("{}", m.kappa_alarm));
        put("eps_band", format!("{}", m.eps_band));
        put("t_pun", format!("{}", m.t_pun));
        put("beta_ct", format!("{}", m.beta_ct));
        put("r_bar", format!("{}", m.r_bar));
        put("sigma_bar", format!("{}", m.sigma_bar));
        put("sigma_bar_prime", format!("{}", m.sigma_bar_prime));
        put("grid_n_lambda", format!("{}", s.n_lambda));
        put("grid_n_mu", format!("{}", s.n_mu));
        put("grid_n_1d", format!("{}", s.n_1d));
        put("tol_value", format!("{}", s.tol_value));
        put("tol_eq", format!("{}", s.tol_eq));
        put("damping", format!("{}", s.damping));
        put("mix_band", format!("{}", s.mix_band));
        put("max_outer", format!("{}", s.max_outer));
        put("seed_sigma", format!("{}", s.seed_sigma));
        put("seed_rho", format!("{}", s.seed_rho));
        put("n_paths", format!("{}", sim.n_paths));
        put("horizon", format!("{}", sim.horizon));
        put("seed", format!("{}", sim.seed));
        put("window", format!("{}", sim.window));
        put("spurt_quantile", format!("{}", sim.spurt_quantile));
        put("bins", format!("{}", sim.bins));
        put("bootstrap", format!("{}", sim.bootstrap));
        put("variant", self.variant.name().to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_accept() {
        let p = ModelParams {
            b: 1.0,
            c: 0.2,
            delta: 0.9,
            ..ModelParams::default()
        };
        assert!(validate_params(p).is_ok());
    }

    #[test]
    fn delta_boundary_rejected() {
        let p = ModelParams {
            delta: 1.0,
            ..ModelParams::default()
        };
        let err = validate_params(p).unwrap_err().to_string();
        assert_eq!(err, "delta out of (0,1)");
    }

    #[test]
    fn alarm_likelihood_cap() {
        let p = ModelParams {
            kappa_alarm: 2.0,
            eps_alarm: 0.6,
            ..ModelParams::default()
        };
        let err = validate_params(p).unwrap_err().to_string();
        assert_eq!(err, "kappa*eps exceeds 1");
    }

    #[test]
    fn c_above_b_warns_but_passes() {
        let p = ModelParams {
            b: 1.0,
            c: 2.0,
            ..ModelParams::default()
        };
        assert!(!p.warnings().is_empty());
        assert!(validate_params(p).is_ok());
    }

    #[test]
    fn config_roundtrip_and_unknown_key() {
        let cfg = RunConfig::from_str_cfg("delta = 0.8\nb = 2.0 # comment\n").unwrap();
        assert_eq!(cfg.model.delta, 0.8);
        assert_eq!(cfg.model.b, 2.0);
        let err = RunConfig::from_str_cfg("no_such_key = 1\n").unwrap_err();
        assert!(matches!(err, ParamError::UnknownKey(_)));
    }
}
