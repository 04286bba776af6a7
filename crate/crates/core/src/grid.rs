//! Belief state, grids and grid-valued fields.
//!
//! The public state is `x = (lambda, mu)` plus a mode tag: normal play,
//! one of finitely many punishment steps, or absorbing termination.
//! Policies and values are stored per (mode, lambda-node, mu-node) on a
//! uniform grid whose endpoints 0 and 1 are exact; off-grid reads use
//! bilinear interpolation.

use thiserror::Error;

/// Play mode attached to the public belief pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Normal,
    /// k-th period of a punishment chain, 1-based.
    Pun(u32),
    Terminated,
}

/// Public belief state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefState {
    pub lambda: f64,
    pub mu: f64,
    pub mode: Mode,
}

#[derive(Debug, Error)]
pub enum StateError {
    #[error("belief out of [0,1]: {0}")]
    OutOfRange(f64),
}

impl BeliefState {
    pub fn new(lambda: f64, mu: f64, mode: Mode) -> Result<Self, StateError> {
        for v in [lambda, mu] {
            if !(0.0..=1.0).contains(&v) {
                return Err(StateError::OutOfRange(v));
            }
        }
        Ok(Self { lambda, mu, mode })
    }

    pub fn normal(lambda: f64, mu: f64) -> Self {
        Self {
            lambda,
            mu,
            mode: Mode::Normal,
        }
    }
}

/// Uniform grid over `[0,1]^2`.
///
/// Node 0 and node 1 are exact on both axes; `mu = 0` is therefore always a
/// grid node, which keeps the heavily visited trust-reset branch free of
/// interpolation error.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl Grid {
    pub fn uniform(n_lambda: usize, n_mu: usize) -> Self {
        assert!(n_lambda >= 2 && n_mu >= 2, "grid needs at least 2 nodes per axis");
        Self {
            lambda: axis(n_lambda),
            mu: axis(n_mu),
        }
    }

    pub fn n_lambda(&self) -> usize {
        self.lambda.len()
    }

    pub fn n_mu(&self) -> usize {
        self.mu.len()
    }

    pub fn nodes(&self) -> usize {
        self.lambda.len() * self.mu.len()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.mu.len() + j
    }

    /// Cell index and fractional offset along one axis.
    #[inline]
    fn locate(axis: &[f64], x: f64) -> (usize, f64) {
        let n = axis.len();
        let pos = x.clamp(0.0, 1.0) * (n - 1) as f64;
        let mut i = pos.floor() as usize;
        if i >= n - 1 {
            i = n - 2;
        }
        // Using stored node values keeps reads at nodes exact.
        let x0 = axis[i];
        let x1 = axis[i + 1];
        let t = if x <= x0 {
            0.0
        } else if x >= x1 {
            1.0
        } else {
            (x - x0) / (x1 - x0)
        };
        (i, t)
    }

    /// Bilinear weights for a point: (i, j, t_lambda, t_mu).
    #[inline]
    pub fn weights(&self, lambda: f64, mu: f64) -> (usize, usize, f64, f64) {
        let (i, tl) = Self::locate(&self.lambda, lambda);
        let (j, tm) = Self::locate(&self.mu, mu);
        (i, j, tl, tm)
    }
}

fn axis(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    v[0] = 0.0;
    v[n - 1] = 1.0;
    v
}

/// Grid-valued deception/inspection probabilities, one layer per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyField {
    pub n_modes: usize,
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
}

impl PolicyField {
    pub fn constant(grid: &Grid, n_modes: usize, sigma: f64, rho: f64) -> Self {
        let n = grid.nodes() * n_modes;
        Self {
            n_modes,
            sigma: vec![sigma; n],
            rho: vec![rho; n],
        }
    }

    #[inline]
    pub fn at(&self, grid: &Grid, mode: usize, i: usize, j: usize) -> (f64, f64) {
        let k = mode * grid.nodes() + grid.idx(i, j);
        (self.sigma[k], self.rho[k])
    }

    pub fn valid(&self) -> bool {
        self.sigma
            .iter()
            .chain(self.rho.iter())
            .all(|p| (0.0..=1.0).contains(p))
    }

    /// Interpolated policy pair at an off-grid state.
    pub fn interp(&self, grid: &Grid, mode: usize, lambda: f64, mu: f64) -> (f64, f64) {
        let s = interp_layer(&self.sigma, grid, self.n_modes, mode, lambda, mu);
        let r = interp_layer(&self.rho, grid, self.n_modes, mode, lambda, mu);
        (s, r)
    }
}

/// Grid-valued continuation values for both players.
///
/// The terminated mode is virtual: both players' continuation there is
/// identically zero and is never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub n_modes: usize,
    pub v_s: Vec<f64>,
    pub v_r: Vec<f64>,
}

impl ValueField {
    pub fn zeros(grid: &Grid, n_modes: usize) -> Self {
        let n = grid.nodes() * n_modes;
        Self {
            n_modes,
            v_s: vec![0.0; n],
            v_r: vec![0.0; n],
        }
    }

    #[inline]
    pub fn at(&self, grid: &Grid, mode: usize, i: usize, j: usize) -> (f64, f64) {
        let k = mode * grid.nodes() + grid.idx(i, j);
        (self.v_s[k], self.v_r[k])
    }

    pub fn interp_s(&self, grid: &Grid, mode: usize, lambda: f64, mu: f64) -> f64 {
        interp_layer(&self.v_s, grid, self.n_modes, mode, lambda, mu)
    }

    pub fn interp_r(&self, grid: &Grid, mode: usize, lambda: f64, mu: f64) -> f64 {
        interp_layer(&self.v_r, grid, self.n_modes, mode, lambda, mu)
    }

    pub fn sup_norm(&self) -> f64 {
        self.v_s
            .iter()
            .chain(self.v_r.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &ValueField) -> f64 {
        let d1 = self
            .v_s
            .iter()
            .zip(&other.v_s)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let d2 = self
            .v_r
            .iter()
            .zip(&other.v_r)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        d1.max(d2)
    }
}

#[inline]
fn interp_layer(
    data: &[f64],
    grid: &Grid,
    n_modes: usize,
    mode: usize,
    lambda: f64,
    mu: f64,
) -> f64 {
    debug_assert!(mode < n_modes);
    let _ = n_modes;
    let (i, j, tl, tm) = grid.weights(lambda, mu);
    let base = mode * grid.nodes();
    let nmu = grid.n_mu();
    let k00 = data[base + i * nmu + j];
    let k01 = data[base + i * nmu + j + 1];
    let k10 = data[base + (i + 1) * nmu + j];
    let k11 = data[base + (i + 1) * nmu + j + 1];
    let a = k00 * (1.0 - tm) + k01 * tm;
    let b = k10 * (1.0 - tm) + k11 * tm;
    a * (1.0 - tl) + b * tl
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_deterministic_with_exact_endpoints() {
        let g1 = Grid::uniform(201, 201);
        let g2 = Grid::uniform(201, 201);
        assert_eq!(g1, g2);
        assert_eq!(g1.lambda[0], 0.0);
        assert_eq!(g1.lambda[200], 1.0);
        assert_eq!(g1.mu[0], 0.0);
        assert_eq!(g1.mu[200], 1.0);
        assert!(g1.lambda.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn interp_at_nodes_is_exact() {
        let grid = Grid::uniform(11, 7);
        let mut vf = ValueField::zeros(&grid, 1);
        for i in 0..11 {
            for j in 0..7 {
                vf.v_s[grid.idx(i, j)] = (i * 100 + j) as f64 + 0.25;
            }
        }
        for i in 0..11 {
            for j in 0..7 {
                let got = vf.interp_s(&grid, 0, grid.lambda[i], grid.mu[j]);
                assert_eq!(got, (i * 100 + j) as f64 + 0.25);
            }
        }
    }

    #[test]
    fn interp_midpoint_averages() {
        let grid = Grid::uniform(3, 3);
        let mut vf = ValueField::zeros(&grid, 1);
        vf.v_s = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0];
        let got = vf.interp_s(&grid, 0, 0.75, 0.3);
        assert!((got - 1.0).abs() < 1e-15);
    }

    #[test]
    fn state_range_enforced() {
        assert!(BeliefState::new(0.5, 0.5, Mode::Normal).is_ok());
        assert!(BeliefState::new(-0.1, 0.5, Mode::Normal).is_err());
        assert!(BeliefState::new(0.5, 1.5, Mode::Terminated).is_err());
    }
}
