//! Temporary exploration harness (removed before release).

use inspection_game::cutoff::solve_mixing_point;
use inspection_game::grid::Grid;
use inspection_game::kernel::Kernel;
use inspection_game::params::ModelParams;
use inspection_game::value::{solve_equilibrium, EqOptions};
use std::time::Instant;

#[test]
#[ignore]
fn explore_structured() {
    let mut p = ModelParams::default();
    p.r = 0.6;
    for n in [41, 101] {
        let grid = Grid::uniform(n, n);
        let kernel = Kernel::termination(p.clone());
        let t0 = Instant::now();
        let eq = solve_equilibrium(&kernel, &grid, &EqOptions::default()).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        println!(
            "n={n} converged={} iters={} residual={:.3e} mixing_nodes={} mp={:?} time={dt:.1}s",
            eq.converged, eq.iterations, eq.residual_sup, eq.mixing_nodes, eq.mixing_point
        );
        let d = &eq.diagnostics;
        println!(
            "mono: vsL={} vrL={} vsM={} vrM={} rhoL={} sigM={} max={:.3e}",
            d.vs_increasing_lambda.violations,
            d.vr_increasing_lambda.violations,
            d.vs_decreasing_mu.violations,
            d.vr_increasing_mu.violations,
            d.rho_decreasing_lambda.violations,
            d.sigma_decreasing_mu.violations,
            d.max_violation()
        );
        let half = (n - 1) / 2;
        let k = grid.idx(half, 0);
        println!(
            "(0.5, 0): sigma={:.4} rho={:.4} V_s={:.3} V_r={:.3} [expect ~.979 ~.111 5.0 5.10]",
            eq.policies.sigma[k], eq.policies.rho[k], eq.values.v_s[k], eq.values.v_r[k]
        );
        let seed = eq.mixing_point.unwrap_or((0.5, 0.05));
        match solve_mixing_point(&kernel, &grid, &eq, seed) {
            Ok(sol) => println!(
                "x*={:?} res=({:.2e},{:.2e}) det={:.3e} unique={} signs={:?}",
                sol.x_star, sol.residuals.0, sol.residuals.1, sol.det, sol.locally_unique, sol.sign_conditions,
            ),
            Err(e) => println!("mixing point: {e}"),
        }
    }
}
