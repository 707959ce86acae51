//! Closed-form Kalman–Bucy filter for the linear-Gaussian model.
//!
//! With a Gaussian initial law, X_t | F^Y_t ~ N(m_t, P_t) where
//!
//! ```text
//! dm_t = -kappa m_t dt + (rho sigma_x + P_t / sigma_y) dWbar_t,
//! dWbar_t = (dY_t - (m_t - a) dt) / sigma_y,
//! dP_t = (-2 kappa P_t + sigma_x^2 - (rho sigma_x + P_t / sigma_y)^2) dt.
//! ```
//!
//! The variance ODE is deterministic (Riccati) and is integrated once per
//! experiment with a classical fourth-order step, then shared. The
//! conditional reward of the payoff (y (c1 + x) - c2)_+ under N(m, P) has the
//! closed form G(m, P, y) implemented by [`conditional_payoff`].


use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{LinearGaussianParams, SimGrid};
use crate::num::{norm_cdf, norm_pdf};
use crate::rng::{standard_normal, SeedTree, StreamKind};

/// Conditional mean and variance of the state at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub m: f64,
    pub p: f64,
    pub t: f64,
}

/// Riccati variance path on a uniform grid with linear interpolation.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    step: f64,
    values: Vec<f64>,
}

impl RiccatiSolution {
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[0];
        }
        let pos = t / self.step;
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().unwrap();
        }
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn grid_step(&self) -> f64 {
        self.step
    }
}

fn riccati_rhs(params: &LinearGaussianParams, p: f64) -> f64 {
    let gain = params.rho * params.sigma_x + p / params.sigma_y;
    -2.0 * params.kappa * p + params.sigma_x * params.sigma_x - gain * gain
}

/// Integrates the variance ODE from `p0` to the grid horizon with RK4 on the
/// sub-delta grid, clamping at zero from below.
pub fn riccati_solve(
    params: &LinearGaussianParams,
    p0: f64,
    grid: &SimGrid,
) -> Result<RiccatiSolution> {
    if p0 < 0.0 {
        return Err(Error::config("initial variance must be nonnegative"));
    }
    params.validate()?;
    let h = grid.sub_dt();
    let n = grid.n_obs_steps() * grid.substeps();
    let mut values = Vec::with_capacity(n + 1);
    let mut p = p0;
    values.push(p);
    for _ in 0..n {
        let k1 = riccati_rhs(params, p);
        let k2 = riccati_rhs(params, p + 0.5 * h * k1);
        let k3 = riccati_rhs(params, p + 0.5 * h * k2);
        let k4 = riccati_rhs(params, p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        p = p.max(0.0);
        values.push(p);
    }
    Ok(RiccatiSolution { step: h, values })
}

/// One Euler update of the conditional mean from the raw observed increment;
/// the variance is advanced through the precomputed Riccati path.
pub fn kalman_step(
    state: &KalmanState,
    params: &LinearGaussianParams,
    dy: f64,
    riccati: &RiccatiSolution,
    h_step: f64,
) -> KalmanState {
    let gain = params.rho * params.sigma_x + state.p / params.sigma_y;
    let innovation = (dy - (state.m - params.mean_level) * h_step) / params.sigma_y;
    let t = state.t + h_step;
    KalmanState {
        m: state.m - params.kappa * state.m * h_step + gain * innovation,
        p: riccati.value(t),
        t,
    }
}

/// Conditional expected reward G(m, P, y) = E[(y (c1 + X) - c2)_+] for
/// X ~ N(m, P), y > 0:
///
/// ```text
/// G = y sqrt(P) phi(x*) + ((c1 + m) y - c2) (1 - Phi(x*)),
/// x* = (c2 - (c1 + m) y) / (y sqrt(P)),
/// ```
///
/// degenerating to ((c1 + m) y - c2)_+ at P = 0.
pub fn conditional_payoff(m: f64, p: f64, y: f64, params: &LinearGaussianParams) -> Result<f64> {
    if y <= 0.0 {
        return Err(Error::domain(format!("conditional payoff needs y > 0, got {y}")));
    }
    if p < 0.0 {
        return Err(Error::domain(format!("variance must be nonnegative, got {p}")));
    }
    let edge = (params.c1 + m) * y - params.c2;
    if p == 0.0 {
        return Ok(edge.max(0.0));
    }
    let spread = y * p.sqrt();
    let x_star = -edge / spread;
    Ok(spread * norm_pdf(x_star) + edge * (1.0 - norm_cdf(x_star)))
}

/// One (m, Y) path under the physical measure, sampled on the delta grid.
#[derive(Debug, Clone)]
pub struct FilterPath {
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    pub y: Vec<f64>,
}

/// Joint conditional-mean / observation paths driven by a single innovation
/// Brownian motion per path:
///
/// ```text
/// dm = -kappa m dt + gain(P_t) dWbar,   dY = (m - a) dt + sigma_y dWbar.
/// ```
pub fn simulate_filter_paths(
    params: &LinearGaussianParams,
    m0: f64,
    p0: f64,
    y0: f64,
    grid: &SimGrid,
    n_paths: usize,
    seeds: &SeedTree,
) -> Result<Vec<FilterPath>> {
    params.validate()?;
    let riccati = riccati_solve(params, p0, grid)?;
    let h = grid.sub_dt();
    let sqrt_h = h.sqrt();
    let n_obs = grid.n_obs_steps();
    let sub = grid.substeps();
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeds.stream(StreamKind::Observation, k);
            let mut times = Vec::with_capacity(n_obs + 1);
            let mut ms = Vec::with_capacity(n_obs + 1);
            let mut ys = Vec::with_capacity(n_obs + 1);
            let mut m = m0;
            let mut y = y0;
            let mut t = 0.0;
            times.push(t);
            ms.push(m);
            ys.push(y);
            for i in 1..=n_obs {
                for _ in 0..sub {
                    let dwbar = sqrt_h * standard_normal(&mut rng);
                    let gain = params.rho * params.sigma_x + riccati.value(t) / params.sigma_y;
                    y += (m - params.mean_level) * h + params.sigma_y * dwbar;
                    m += -params.kappa * m * h + gain * dwbar;
                    t += h;
                }
                times.push(grid.obs_time(i));
                ms.push(m);
                ys.push(y);
            }
            FilterPath { times, m: ms, y: ys }
        })
        .collect();
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::linear_gaussian_example_params;
    use crate::num::mean_and_se;
    use crate::rng::SeedTree;

    fn grid() -> SimGrid {
        SimGrid::new(1.0, 0.05, 0.01, 1).unwrap()
    }

    /// Positive root of the stationarity equation, computed independently.
    fn steady_state_oracle(params: &LinearGaussianParams) -> f64 {
        // 0 = -2 kappa P + sigma_x^2 - (rho sigma_x + P/sigma_y)^2
        // => (1/sigma_y^2) P^2 + (2 kappa + 2 rho sigma_x / sigma_y) P
        //    + rho^2 sigma_x^2 - sigma_x^2 = 0
        let a = 1.0 / (params.sigma_y * params.sigma_y);
        let b = 2.0 * params.kappa + 2.0 * params.rho * params.sigma_x / params.sigma_y;
        let c = params.rho * params.rho * params.sigma_x * params.sigma_x
            - params.sigma_x * params.sigma_x;
        (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)
    }

    #[test]
    fn riccati_steady_state() {
        let params = linear_gaussian_example_params();
        let p_star = steady_state_oracle(&params);
        // with the example parameters this is the positive root of
        // 100 P^2 + 7.6 P - 0.0576 = 0
        assert!((100.0 * p_star * p_star + 7.6 * p_star - 0.0576).abs() < 1e-12);
        assert!((p_star - 0.006944).abs() < 5e-7);

        // integrate long enough to converge
        let long_grid = SimGrid::new(10.0, 0.5, 0.01, 1).unwrap();
        let sol = riccati_solve(&params, 0.0025, &long_grid).unwrap();
        assert!((sol.value(10.0) - p_star).abs() < 1e-9);
    }

    #[test]
    fn riccati_fixed_point_and_degenerate() {
        let params = linear_gaussian_example_params();
        let p_star = steady_state_oracle(&params);
        let sol = riccati_solve(&params, p_star, &grid()).unwrap();
        for i in 0..=10 {
            assert!((sol.value(i as f64 * 0.1) - p_star).abs() < 1e-10);
        }

        let mut degenerate = params;
        degenerate.sigma_x = 1e-300;
        degenerate.rho = 0.0;
        let sol = riccati_solve(&degenerate, 0.0, &grid()).unwrap();
        assert!(sol.value(1.0).abs() < 1e-12);
    }

    #[test]
    fn riccati_monotone_toward_steady_state() {
        let params = linear_gaussian_example_params();
        let p_star = steady_state_oracle(&params);
        for p0 in [0.0, 0.0025, 0.01, 0.05] {
            let sol = riccati_solve(&params, p0, &grid()).unwrap();
            let mut prev = sol.value(0.0);
            for i in 1..=100 {
                let cur = sol.value(i as f64 * 0.01);
                if p0 < p_star {
                    assert!(cur >= prev - 1e-12 && cur <= p_star + 1e-9);
                } else {
                    assert!(cur <= prev + 1e-12 && cur >= p_star - 1e-9);
                }
                prev = cur;
            }
        }
    }

    #[test]
    fn riccati_is_deterministic() {
        let params = linear_gaussian_example_params();
        let a = riccati_solve(&params, 0.0025, &grid()).unwrap();
        let b = riccati_solve(&params, 0.0025, &grid()).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn step_examples() {
        let params = linear_gaussian_example_params();
        let riccati = riccati_solve(&params, 0.0025, &grid()).unwrap();
        let h = 0.01;
        // zero innovation: dy = (m - a) h
        let state = KalmanState { m: 0.3, p: 0.0025, t: 0.0 };
        let next = kalman_step(&state, &params, (0.3 - 0.05) * h, &riccati, h);
        assert!((next.m - (0.3 - 2.0 * 0.3 * h)).abs() < 1e-14);
        assert!((next.t - h).abs() < 1e-15);

        // gain at the steady state is rho sigma_x + P*/sigma_y ~ 0.2494
        let p_star = 0.006_944_410_108_488_77;
        let gain = params.rho * params.sigma_x + p_star / params.sigma_y;
        assert!((gain - 0.2494).abs() < 5e-5);

        // kappa = 0 with zero innovation leaves m unchanged
        let mut frozen = params;
        frozen.kappa = 0.0;
        let riccati0 = riccati_solve(&frozen, 0.0025, &grid()).unwrap();
        let next = kalman_step(&state, &frozen, (0.3 - 0.05) * h, &riccati0, h);
        assert_eq!(next.m, 0.3);
    }

    #[test]
    fn conditional_payoff_examples() {
        let params = linear_gaussian_example_params();
        // degenerate limit
        assert!((conditional_payoff(0.2, 0.0, 2.0, &params).unwrap() - 0.4).abs() < 1e-15);
        // at the kink the value is y sqrt(P) / sqrt(2 pi)
        let p = 0.01;
        let y = 2.0;
        let m = params.c2 / y - params.c1; // (c1+m) y = c2
        let got = conditional_payoff(m, p, y, &params).unwrap();
        let expected = y * p.sqrt() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((got - expected).abs() < 1e-12);
        // domain error
        assert!(conditional_payoff(0.0, 0.01, 0.0, &params).is_err());
        assert!(conditional_payoff(0.0, 0.01, -1.0, &params).is_err());
    }

    #[test]
    fn conditional_payoff_matches_monte_carlo() {
        let params = linear_gaussian_example_params();
        let mut rng = SeedTree::new(7).stream(StreamKind::Scratch, 0);
        let draws = 400_000;
        for &(m, p, y) in &[(0.0f64, 0.0025f64, 2.0f64), (-0.12, 0.01, 2.24), (0.2, 0.004, 1.8)] {
            let samples: Vec<f64> = (0..draws)
                .map(|_| {
                    let x = m + p.sqrt() * standard_normal(&mut rng);
                    (y * (params.c1 + x) - params.c2).max(0.0)
                })
                .collect();
            let (mc, se) = mean_and_se(&samples);
            let exact = conditional_payoff(m, p, y, &params).unwrap();
            assert!((exact - mc).abs() < 3.0 * se, "G({m},{p},{y}) = {exact} vs MC {mc} +- {se}");
        }
    }

    #[test]
    fn conditional_payoff_monotone() {
        use rand::Rng;
        let params = linear_gaussian_example_params();
        let mut rng = SeedTree::new(8).stream(StreamKind::Scratch, 0);
        for _ in 0..100 {
            let m = -0.3 + 0.6 * rng.random::<f64>();
            let p = 1e-4 + 0.02 * rng.random::<f64>();
            let y = 0.5 + 3.0 * rng.random::<f64>();
            let base = conditional_payoff(m, p, y, &params).unwrap();
            let dm = conditional_payoff(m + 1e-5, p, y, &params).unwrap();
            assert!(dm >= base - 1e-12, "not increasing in m at ({m},{p},{y})");
            let dp = conditional_payoff(m, p + 1e-6, y, &params).unwrap();
            assert!(dp >= base - 1e-12, "not increasing in P at ({m},{p},{y})");
        }
    }

    #[test]
    fn filter_paths_degenerate_and_moments() {
        let mut params = linear_gaussian_example_params();
        params.kappa = 0.0;
        params.sigma_y = 1e-300; // kills the innovation noise contribution to Y
        // zero noise, a = m0: Y is constant
        // (gain stays finite because P0 = 0 and sigma_x terms vanish below)
        params.sigma_x = 1e-300;
        params.rho = 0.0;
        let paths =
            simulate_filter_paths(&params, 0.05, 0.0, 2.0, &grid(), 2, &SeedTree::new(3)).unwrap();
        for p in &paths {
            for &y in &p.y {
                assert!((y - 2.0).abs() < 1e-250);
            }
        }
    }

    #[test]
    fn filter_paths_variance_and_mean() {
        let params = linear_gaussian_example_params();
        let grid = grid();
        let paths =
            simulate_filter_paths(&params, 0.1, 0.0025, 2.0, &grid, 30_000, &SeedTree::new(4))
                .unwrap();
        // Var(Y_dt - y0) ~ sigma_y^2 dt to leading order over one delta
        let incs: Vec<f64> = paths.iter().map(|p| p.y[1] - p.y[0]).collect();
        let mean_inc = incs.iter().sum::<f64>() / incs.len() as f64;
        let var = incs.iter().map(|v| (v - mean_inc) * (v - mean_inc)).sum::<f64>()
            / (incs.len() - 1) as f64;
        let expected = params.sigma_y * params.sigma_y * grid.delta_obs();
        assert!((var / expected - 1.0).abs() < 0.05, "var ratio {}", var / expected);

        // E[m_t] = m0 e^{-kappa t}
        let finals: Vec<f64> = paths.iter().map(|p| *p.m.last().unwrap()).collect();
        let (mean, se) = mean_and_se(&finals);
        let expected_m = 0.1 * (-params.kappa).exp();
        assert!((mean - expected_m).abs() < 4.0 * se + 1e-3, "mean {mean} vs {expected_m}");
    }
}
