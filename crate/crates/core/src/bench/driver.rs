//! Forward passes: build feature/payoff ensembles path by path, plus the
//! European Monte Carlo benchmark and single-configuration pricing.

use rayon::prelude::*;

use crate::bench::config::{Algo, ExperimentConfig, ModelKind, Solver};
use crate::error::{Error, Result};
use crate::kalman::riccati_solve;
use crate::model::{
    linear_gaussian_model, stein_stein_model, Dynamics, InitialLaw, SimGrid, StateSampler,
};
use crate::pde;
use crate::pfilter::{init_cloud, KernelSpec};
use crate::rmc::{
    backward_induction, evaluate_basis_into, tvr_backward_induction, BasisSet, CashflowState,
    EnsembleMeta, EuropeanValuer, EvalContext, FilterRef, PathEnsemble, PreparedEuropean,
    RegressionFit, ValueEstimate,
};
use crate::rng::{standard_normal, SeedTree, StreamKind};

/// Seed-tree labels for the phases of one experiment.
pub mod phase {
    pub const FORWARD: u64 = 1;
    pub const EUROPEAN: u64 = 2;
    pub const CONVERGENCE: u64 = 3;
    pub const OUT_OF_SAMPLE: u64 = 4;
}

struct PathOut {
    features: Vec<f64>,
    payoffs: Vec<f64>,
    proxies: Vec<f64>,
}

fn assemble(
    per_path: Vec<PathOut>,
    times: Vec<f64>,
    basis: &BasisSet,
    meta: EnsembleMeta,
) -> PathEnsemble {
    let n_paths = per_path.len();
    let n_dates = times.len();
    let r = basis.len();
    let mut features = vec![0.0; n_dates * n_paths * r];
    let mut payoffs = vec![0.0; n_dates * n_paths];
    let mut proxies = vec![0.0; n_dates * n_paths];
    for (k, p) in per_path.iter().enumerate() {
        for m in 0..n_dates {
            let src = &p.features[m * r..(m + 1) * r];
            let dst = (m * n_paths + k) * r;
            features[dst..dst + r].copy_from_slice(src);
            payoffs[m * n_paths + k] = p.payoffs[m];
            proxies[m * n_paths + k] = p.proxies[m];
        }
    }
    PathEnsemble {
        n_paths,
        n_dates,
        r_basis: r,
        times,
        basis_names: basis.names(),
        features,
        payoffs,
        proxies,
        meta,
    }
}

/// Forward pass for the linear-Gaussian model under the reference measure:
/// per path, simulate the observation increments, run weight/mutate/branch
/// per observation interval, and record basis features, the immediate reward
/// rho_t(g), and the conditional-mean proxy at every exercise date.
pub fn lg_ensemble(config: &ExperimentConfig, seeds: &SeedTree) -> Result<PathEnsemble> {
    config.validate()?;
    let params = config.lg_params()?;
    let model = linear_gaussian_model(params)?;
    let grid = config.grid.to_grid()?;
    let law = config.initial_law.to_law();
    let basis = BasisSet::linear_gaussian();
    let valuer = EuropeanValuer::linear_gaussian(params, grid.horizon(), config.quad_order)?;
    let n_dates = grid.n_exercise() + 1;
    let times: Vec<f64> = (0..n_dates).map(|m| grid.exercise_time(m)).collect();
    let prepared: Vec<PreparedEuropean> =
        times.iter().map(|&t| valuer.prepare(t)).collect::<Result<_>>()?;
    let tree = seeds.derive(phase::FORWARD);

    let sub_dt = grid.sub_dt();
    let sqrt_sub = sub_dt.sqrt();
    let delta = grid.delta_obs();
    let substeps = grid.substeps();
    let ope = grid.obs_per_exercise();
    let r = basis.len();

    let per_path: Vec<PathOut> = (0..config.paths as u64)
        .into_par_iter()
        .map(|k| -> Result<PathOut> {
            let mut rng_init = tree.stream(StreamKind::ParticleInit, k);
            let mut rng_obs = tree.stream(StreamKind::Observation, k);
            let mut rng_noise = tree.stream(StreamKind::ParticleNoise, k);
            let mut rng_branch = tree.stream(StreamKind::Branching, k);
            let mut cloud = init_cloud(config.particles, &law, &mut rng_init)?;

            let mut out = PathOut {
                features: vec![0.0; n_dates * r],
                payoffs: vec![0.0; n_dates],
                proxies: vec![0.0; n_dates],
            };
            let record = |date: usize,
                              cloud: &crate::pfilter::ParticleCloud,
                              y: f64,
                              out: &mut PathOut|
             -> Result<()> {
                let t = times[date];
                let ctx = EvalContext {
                    model: &model,
                    lg_params: Some(&params),
                    european: Some(&prepared[date]),
                };
                evaluate_basis_into(
                    &basis,
                    t,
                    FilterRef::Cloud(cloud),
                    &[y],
                    &ctx,
                    &mut out.features[date * r..(date + 1) * r],
                )
                .map_err(|e| Error::non_finite(format!("path {k}, date {date}: {e}")))?;
                out.payoffs[date] = cloud.estimate_rho(|x| model.payoff(t, x, &[y]));
                out.proxies[date] = cloud.estimate_pi(|x| x[0]);
                Ok(())
            };

            let mut y = config.y0;
            record(0, &cloud, y, &mut out)?;
            let mut dys = vec![0.0; substeps];
            for i in 0..grid.n_obs_steps() {
                let mut dy_total = 0.0;
                for slot in dys.iter_mut() {
                    *slot = params.sigma_y * sqrt_sub * standard_normal(&mut rng_obs);
                    dy_total += *slot;
                }
                cloud.update_weights_discrete(&model, &[dy_total], delta)?;
                cloud.propagate_reference(&model, &dys, sub_dt, &mut rng_noise)?;
                cloud.branch(&mut rng_branch)?;
                y += dy_total;
                if (i + 1) % ope == 0 {
                    record((i + 1) / ope, &cloud, y, &mut out)?;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let meta = EnsembleMeta {
        n_particles: config.particles,
        seed: seeds.master(),
        dt_exercise: grid.dt_exercise(),
        delta_obs: grid.delta_obs(),
    };
    Ok(assemble(per_path, times, &basis, meta))
}

/// Forward pass for the stochastic-volatility model under the physical
/// measure with candidate-observation weighting: the truth path (X, Y) is
/// simulated jointly; the filter sees Y only at exercise dates, propagates
/// particles with private noise between observations, weights them by a
/// kernel comparison of candidate observations, and branches.
pub fn ss_ensemble(config: &ExperimentConfig, seeds: &SeedTree) -> Result<PathEnsemble> {
    config.validate()?;
    let params = config.ss_params()?;
    let model = stein_stein_model(params)?;
    let grid = config.grid.to_grid()?;
    let law = config.initial_law.to_law();
    let basis = BasisSet::stein_stein();
    let kernel = KernelSpec::gaussian();
    let n_dates = grid.n_exercise() + 1;
    let times: Vec<f64> = (0..n_dates).map(|m| grid.exercise_time(m)).collect();
    let tree = seeds.derive(phase::FORWARD);

    let sub_dt = grid.sub_dt();
    let sqrt_sub = sub_dt.sqrt();
    let subs_per_exercise = grid.obs_per_exercise() * grid.substeps();
    let r = basis.len();

    let per_path: Vec<PathOut> = (0..config.paths as u64)
        .into_par_iter()
        .map(|k| -> Result<PathOut> {
            let mut rng_truth = tree.stream(StreamKind::Truth, k);
            let mut rng_init = tree.stream(StreamKind::ParticleInit, k);
            let mut rng_noise = tree.stream(StreamKind::ParticleNoise, k);
            let mut rng_branch = tree.stream(StreamKind::Branching, k);

            let mut x = [0.0];
            law.sample(&mut rng_truth, &mut x);
            let mut y = config.y0;
            let mut cloud = init_cloud(config.particles, &law, &mut rng_init)?;

            let mut out = PathOut {
                features: vec![0.0; n_dates * r],
                payoffs: vec![0.0; n_dates],
                proxies: vec![0.0; n_dates],
            };
            let record = |date: usize,
                              cloud: &crate::pfilter::ParticleCloud,
                              y: f64,
                              out: &mut PathOut|
             -> Result<()> {
                let t = times[date];
                let ctx = EvalContext { model: &model, lg_params: None, european: None };
                evaluate_basis_into(
                    &basis,
                    t,
                    FilterRef::Cloud(cloud),
                    &[y],
                    &ctx,
                    &mut out.features[date * r..(date + 1) * r],
                )
                .map_err(|e| Error::non_finite(format!("path {k}, date {date}: {e}")))?;
                // the reward depends on the observation only
                out.payoffs[date] = model.payoff(t, &[0.0], &[y]);
                out.proxies[date] = cloud.estimate_pi(|v| v[0]);
                Ok(())
            };

            record(0, &cloud, y, &mut out)?;
            for m in 0..grid.n_exercise() {
                let y_prev = y;
                // truth over one exercise interval
                for _ in 0..subs_per_exercise {
                    let du = sqrt_sub * standard_normal(&mut rng_truth);
                    let dw = sqrt_sub * standard_normal(&mut rng_truth);
                    let vol = x[0];
                    y += (params.discount_rate - 0.5 * vol * vol) * sub_dt + vol * du;
                    x[0] += params.kappa * (params.sigma_bar - vol) * sub_dt
                        + params.rho * params.alpha * du
                        + (1.0 - params.rho * params.rho).sqrt() * params.alpha * dw;
                }
                if !(x[0].is_finite() && y.is_finite()) {
                    return Err(Error::non_finite(format!("truth path {k}")));
                }
                // filter: mutate with candidates, weight against the new
                // observation, branch
                let candidates = cloud.propagate_candidate(
                    &model,
                    &[y_prev],
                    subs_per_exercise,
                    sub_dt,
                    &mut rng_noise,
                )?;
                cloud.update_weights_candidate(&candidates, &[y], &kernel)?;
                cloud.branch(&mut rng_branch)?;
                record(m + 1, &cloud, y, &mut out)?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let meta = EnsembleMeta {
        n_particles: config.particles,
        seed: seeds.master(),
        dt_exercise: grid.dt_exercise(),
        delta_obs: grid.delta_obs(),
    };
    Ok(assemble(per_path, times, &basis, meta))
}

/// Builds the ensemble appropriate for the configured model.
pub fn build_ensemble(config: &ExperimentConfig, seeds: &SeedTree) -> Result<PathEnsemble> {
    match config.model {
        ModelKind::LinearGaussian => lg_ensemble(config, seeds),
        ModelKind::SteinStein => ss_ensemble(config, seeds),
    }
}

/// Basis matching the configured model.
pub fn basis_for(config: &ExperimentConfig) -> BasisSet {
    match config.model {
        ModelKind::LinearGaussian => BasisSet::linear_gaussian(),
        ModelKind::SteinStein => BasisSet::stein_stein(),
    }
}

/// Plain Monte Carlo mean and standard error.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EuropeanEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// Terminal-exercise value by joint physical-measure simulation: the mean of
/// the discounted terminal reward over fresh (X, Y) paths. Each path is an
/// antithetic pair sharing the initial draw, with the Gaussian increments
/// negated in the second arm.
pub fn european_mc<M: Dynamics>(
    model: &M,
    grid: &SimGrid,
    xi0: &InitialLaw,
    y0: f64,
    n_paths: usize,
    seeds: &SeedTree,
) -> Result<EuropeanEstimate> {
    let tree = seeds.derive(phase::EUROPEAN);
    let horizon = grid.horizon();
    let sub_dt = grid.sub_dt();
    let sqrt_sub = sub_dt.sqrt();
    let total_steps = grid.n_obs_steps() * grid.substeps();
    let dims = model.dims();
    let payoffs: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut rng = tree.stream(StreamKind::Truth, k);
            let mut scratch = crate::model::StepScratch::new(dims);
            let mut x0 = vec![0.0; dims.d];
            xi0.sample(&mut rng, &mut x0);
            let mut x = vec![0.0; dims.d];
            let mut y = vec![0.0; dims.d_y];
            let mut du = vec![0.0; dims.d_y];
            let mut dw = vec![0.0; dims.d_w];
            let mut h_drift = vec![0.0; dims.d_y];
            let mut disp = vec![0.0; dims.d_y];
            let mut pair = 0.0;
            let arm_rng = rng.clone();
            for sign in [1.0, -1.0] {
                let mut rng = arm_rng.clone();
                x.copy_from_slice(&x0);
                y.fill(y0);
                for _ in 0..total_steps {
                    for v in du.iter_mut() {
                        *v = sign * sqrt_sub * standard_normal(&mut rng);
                    }
                    for v in dw.iter_mut() {
                        *v = sign * sqrt_sub * standard_normal(&mut rng);
                    }
                    model.obs_drift(&x, &mut h_drift);
                    model.obs_dispersion(&x, &mut disp);
                    for c in 0..dims.d_y {
                        y[c] += h_drift[c] * sub_dt + disp[c] * du[c];
                    }
                    crate::model::euler_step(
                        model,
                        &mut x,
                        crate::model::DriftMode::Physical,
                        &du,
                        &dw,
                        sub_dt,
                        &mut scratch,
                    )?;
                }
                pair += 0.5 * model.payoff(horizon, &x, &y);
            }
            Ok(pair)
        })
        .collect::<Result<Vec<_>>>()?;
    let (value, std_error) = crate::num::mean_and_se(&payoffs);
    Ok(EuropeanEstimate { value, std_error, n_paths })
}

/// European value for a configured experiment.
pub fn european_for(config: &ExperimentConfig, seeds: &SeedTree) -> Result<EuropeanEstimate> {
    let grid = config.grid.to_grid()?;
    let law = config.initial_law.to_law();
    match config.model {
        ModelKind::LinearGaussian => {
            let model = linear_gaussian_model(config.lg_params()?)?;
            european_mc(&model, &grid, &law, config.y0, config.european_paths, seeds)
        }
        ModelKind::SteinStein => {
            let model = stein_stein_model(config.ss_params()?)?;
            european_mc(&model, &grid, &law, config.y0, config.european_paths, seeds)
        }
    }
}

/// Default PDE grid for the Kalman-reduced problem: m in [-0.6, 0.6],
/// y in (0, 4], 400-ish nodes per axis and at least 8000 CFL-safe steps.
pub fn lg_pde_grid(config: &ExperimentConfig) -> Result<(pde::Grid2D, crate::kalman::RiccatiSolution)>
{
    let params = config.lg_params()?;
    let grid = config.grid.to_grid()?;
    let p0 = config.initial_law.to_law().variance();
    let riccati = riccati_solve(&params, p0, &grid)?;
    let axis_m = pde::Axis::new(-0.6, 0.6, 401)?;
    let axis_y = pde::Axis::new(0.01, 4.0, 400)?;
    let m_ex = grid.n_exercise();
    let steps =
        pde::kalman_time_steps(&params, &riccati, axis_m, axis_y, grid.horizon(), m_ex, 8000);
    Ok((pde::Grid2D::bermudan(axis_m, axis_y, grid.horizon(), steps, m_ex)?, riccati))
}

/// Default PDE grid for the fully observed stochastic-volatility problem:
/// five stationary standard deviations around the initial volatility and
/// five sigma_bar sqrt(T) around the initial log-price.
pub fn ss_pde_grid(config: &ExperimentConfig) -> Result<pde::Grid2D> {
    let params = config.ss_params()?;
    let grid = config.grid.to_grid()?;
    let x0 = config.initial_law.to_law().mean();
    let half_x = 5.0 * params.alpha / (2.0 * params.kappa).sqrt();
    let half_y = 5.0 * params.sigma_bar * grid.horizon().sqrt();
    let axis_x = pde::Axis::new(x0 - half_x, x0 + half_x, 401)?;
    let axis_y = pde::Axis::new(config.y0 - half_y, config.y0 + half_y, 401)?;
    let m_ex = grid.n_exercise();
    let steps = pde::stein_stein_time_steps(&params, axis_x, axis_y, grid.horizon(), m_ex, 8000);
    let mut pde_grid = pde::Grid2D::bermudan(axis_x, axis_y, grid.horizon(), steps, m_ex)?;
    // the price is first observed at dt, so exercise starts there, not at 0
    pde_grid.exercise_steps.retain(|&s| s != 0);
    Ok(pde_grid)
}

/// PDE benchmark value at the configured initial point. Linear-Gaussian
/// configs need a Gaussian or Dirac initial law.
pub fn pde_value(config: &ExperimentConfig) -> Result<(f64, f64)> {
    match config.model {
        ModelKind::LinearGaussian => {
            let law = config.initial_law.to_law();
            if !law.is_gaussian_family() {
                return Err(Error::config(
                    "the Kalman-reduced solver needs a Gaussian or Dirac initial law",
                ));
            }
            let (grid, riccati) = lg_pde_grid(config)?;
            let result = pde::solve_bermudan_kalman(&config.lg_params()?, &riccati, &grid)?;
            Ok((result.query_value(law.mean(), config.y0)?, result.max_cfl))
        }
        ModelKind::SteinStein => {
            let grid = ss_pde_grid(config)?;
            let result = pde::solve_bermudan_stein_stein(&config.ss_params()?, &grid)?;
            let x0 = config.initial_law.to_law().mean();
            Ok((result.query_value(x0, config.y0)?, result.max_cfl))
        }
    }
}

/// Full Monte Carlo run: forward ensemble plus backward induction.
pub struct McRun {
    pub estimate: ValueEstimate,
    pub fit: RegressionFit,
    pub cashflows: Option<CashflowState>,
}

pub fn run_mc(config: &ExperimentConfig) -> Result<McRun> {
    let seeds = SeedTree::new(config.seed);
    let ensemble = build_ensemble(config, &seeds)?;
    let basis = basis_for(config);
    match config.algo {
        Algo::Ls => {
            let (fit, cash, est) = backward_induction(&ensemble, &basis)?;
            cash.check_consistency(&ensemble)?;
            Ok(McRun { estimate: est, fit, cashflows: Some(cash) })
        }
        Algo::Tvr => {
            let (fit, est) = tvr_backward_induction(&ensemble, &basis)?;
            Ok(McRun { estimate: est, fit, cashflows: None })
        }
    }
}

/// Output of the `price` command: one solver, one configuration.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PriceOutput {
    pub solver: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub immediate_value: Option<f64>,
    pub continuation_value: Option<f64>,
    pub config_hash: String,
    pub config_summary: String,
}

pub fn run_price(config: &ExperimentConfig) -> Result<PriceOutput> {
    config.validate()?;
    let hash = config.hash();
    let summary = config.summary();
    match config.solver {
        Solver::Mc => {
            let run = run_mc(config)?;
            Ok(PriceOutput {
                solver: if config.algo == Algo::Ls { "mc-ls" } else { "mc-tvr" }.into(),
                value: run.estimate.value,
                std_error: Some(run.estimate.std_error),
                immediate_value: Some(run.estimate.immediate_value),
                continuation_value: Some(run.estimate.continuation_value),
                config_hash: hash,
                config_summary: summary,
            })
        }
        Solver::Pde => {
            let (value, _) = pde_value(config)?;
            Ok(PriceOutput {
                solver: "pde".into(),
                value,
                std_error: None,
                immediate_value: None,
                continuation_value: None,
                config_hash: hash,
                config_summary: summary,
            })
        }
        Solver::European => {
            let seeds = SeedTree::new(config.seed);
            let est = european_for(config, &seeds)?;
            Ok(PriceOutput {
                solver: "european".into(),
                value: est.value,
                std_error: Some(est.std_error),
                immediate_value: None,
                continuation_value: None,
                config_hash: hash,
                config_summary: summary,
            })
        }
    }
}
