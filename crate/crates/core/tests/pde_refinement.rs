//! Grid-refinement guard for the finite-difference benchmarks: doubling the
//! spatial nodes and quadrupling the time steps must move the reported
//! values by at most 0.003, protecting against domain/boundary pollution.

use stopsim::kalman::riccati_solve;
use stopsim::model::{
    linear_gaussian_example_params, stein_stein_example_params, SimGrid,
};
use stopsim::pde::{
    kalman_time_steps, solve_bermudan_kalman, solve_bermudan_stein_stein, stein_stein_time_steps,
    Axis, Grid2D,
};

#[test]
fn kalman_solver_refinement() {
    let params = linear_gaussian_example_params();
    let sim = SimGrid::new(1.0, 0.05, 0.01, 1).unwrap();
    let riccati = riccati_solve(&params, 0.0025, &sim).unwrap();
    let mut values = Vec::new();
    for (nodes_m, nodes_y, base) in [(401usize, 400usize, 8000usize), (801, 800, 32000)] {
        let am = Axis::new(-0.6, 0.6, nodes_m).unwrap();
        let ay = Axis::new(0.01, 4.0, nodes_y).unwrap();
        let steps = kalman_time_steps(&params, &riccati, am, ay, 1.0, 20, base);
        let grid = Grid2D::bermudan(am, ay, 1.0, steps, 20).unwrap();
        let res = solve_bermudan_kalman(&params, &riccati, &grid).unwrap();
        values.push(res.query_value(0.0, 2.0).unwrap());
    }
    let diff = (values[1] - values[0]).abs();
    println!("kalman refinement: {:.5} -> {:.5} (diff {:.5})", values[0], values[1], diff);
    assert!(diff <= 0.003, "refinement changed the value by {diff}");
}

#[test]
fn stein_stein_solver_refinement() {
    let params = stein_stein_example_params();
    let x0 = 0.15;
    let y0 = 110.0f64.ln();
    let half_x = 5.0 * params.alpha / (2.0 * params.kappa).sqrt();
    let half_y = 5.0 * params.sigma_bar;
    let mut values = Vec::new();
    for (nodes, base) in [(401usize, 8000usize), (801, 32000)] {
        let ax = Axis::new(x0 - half_x, x0 + half_x, nodes).unwrap();
        let ay = Axis::new(y0 - half_y, y0 + half_y, nodes).unwrap();
        let steps = stein_stein_time_steps(&params, ax, ay, 1.0, 5, base);
        let mut grid = Grid2D::bermudan(ax, ay, 1.0, steps, 5).unwrap();
        grid.exercise_steps.retain(|&s| s != 0);
        let res = solve_bermudan_stein_stein(&params, &grid).unwrap();
        values.push(res.query_value(x0, y0).unwrap());
    }
    let diff = (values[1] - values[0]).abs();
    println!("stein-stein refinement: {:.5} -> {:.5} (diff {:.5})", values[0], values[1], diff);
    assert!(diff <= 0.003, "refinement changed the value by {diff}");
}
