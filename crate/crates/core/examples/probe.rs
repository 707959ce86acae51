use stopsim::bench::{build_ensemble, ExperimentConfig, LawConfig};
use stopsim::kalman::{riccati_solve, KalmanState};
use stopsim::model::{linear_gaussian_model, SimGrid};
use stopsim::rmc::{
    backward_induction, evaluate_basis_into, BasisSet, EnsembleMeta, EuropeanValuer, EvalContext,
    FilterRef, PathEnsemble,
};
use stopsim::rng::{standard_normal, SeedTree, StreamKind};

/// Longstaff-Schwartz on the exact Kalman filter state (m_t, Y_t) simulated
/// under the physical measure: no particles, no rho-weighting, targets are
/// plain discounted conditional payoffs.
fn kalman_ls(m0: f64, p0: f64, y0: f64, n_paths: usize, seed: u64) -> (f64, f64) {
    let params = stopsim::model::linear_gaussian_example_params();
    let model = linear_gaussian_model(params).unwrap();
    let grid = SimGrid::new(1.0, 0.05, 0.01, 1).unwrap();
    let riccati = riccati_solve(&params, p0, &grid).unwrap();
    let basis = BasisSet::linear_gaussian();
    let valuer = EuropeanValuer::linear_gaussian(params, 1.0, 16).unwrap();
    let n_dates = grid.n_exercise() + 1;
    let times: Vec<f64> = (0..n_dates).map(|m| grid.exercise_time(m)).collect();
    let prepared: Vec<_> = times.iter().map(|&t| valuer.prepare(t).unwrap()).collect();
    let r = basis.len();
    let tree = SeedTree::new(seed);
    let sub = grid.sub_dt();
    let sqrt_sub = sub.sqrt();

    let mut features = vec![0.0; n_dates * n_paths * r];
    let mut payoffs = vec![0.0; n_dates * n_paths];
    for k in 0..n_paths {
        let mut rng = tree.stream(StreamKind::Truth, k as u64);
        let mut ks = KalmanState { m: m0, p: p0, t: 0.0 };
        let mut y = y0;
        for date in 0..n_dates {
            if date > 0 {
                for _ in 0..grid.obs_per_exercise() {
                    let gain = params.rho * params.sigma_x + ks.p / params.sigma_y;
                    let dwbar = sqrt_sub * standard_normal(&mut rng);
                    let dy = (ks.m - params.mean_level) * sub + params.sigma_y * dwbar;
                    y += dy;
                    let t = ks.t + sub;
                    ks = KalmanState {
                        m: ks.m - params.kappa * ks.m * sub + gain * dwbar,
                        p: riccati.value(t),
                        t,
                    };
                }
            }
            let t = times[date];
            let ctx = EvalContext {
                model: &model,
                lg_params: Some(&params),
                european: Some(&prepared[date]),
            };
            evaluate_basis_into(
                &basis,
                t,
                FilterRef::Kalman(&ks),
                &[y],
                &ctx,
                &mut features[(date * n_paths + k) * r..(date * n_paths + k + 1) * r],
            )
            .unwrap();
            payoffs[date * n_paths + k] = (-params.discount_rate * t).exp()
                * stopsim::kalman::conditional_payoff(ks.m, ks.p, y, &params).unwrap();
        }
    }
    let ensemble = PathEnsemble {
        n_paths,
        n_dates,
        r_basis: r,
        times,
        basis_names: basis.names(),
        features,
        payoffs,
        proxies: vec![0.0; n_dates * n_paths],
        meta: EnsembleMeta { n_particles: 0, seed, dt_exercise: 0.05, delta_obs: 0.01 },
    };
    let (_, _, est) = backward_induction(&ensemble, &basis).unwrap();
    (est.value, est.std_error)
}

fn main() {
    // rows 1 and 3 with the exact filter
    let (v1, s1) = kalman_ls(0.0, 0.0025, 2.0, 30_000, 1);
    println!("kalman-LS row1: {v1:.4} +- {s1:.4}  (paper mc 0.1810, pde 0.1853)");
    let (v3, s3) = kalman_ls(0.2, 0.0025, 1.8, 30_000, 1);
    println!("kalman-LS row3: {v3:.4} +- {s3:.4}  (paper mc 0.1862, pde 0.1904)");

    // particle-LS row 3 at larger n to see the filter-noise trend
    for n in [1500usize] {
        let mut cfg = ExperimentConfig::linear_gaussian_default();
        cfg.initial_law = LawConfig::Gaussian { mean: 0.2, std: 0.05 };
        cfg.y0 = 1.8;
        cfg.particles = n;
        cfg.paths = 30_000;
        let ensemble = build_ensemble(&cfg, &SeedTree::new(cfg.seed)).unwrap();
        let basis = BasisSet::linear_gaussian();
        let (_, _, est) = backward_induction(&ensemble, &basis).unwrap();
        println!("particle-LS row3 n={n}: {:.4} +- {:.4}", est.value, est.std_error);
    }
}
