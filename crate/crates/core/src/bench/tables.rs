//! Benchmark tables and the filter convergence study.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::bench::config::{ExperimentConfig, LawConfig, ModelKind};
use crate::bench::driver::{
    self, european_for, lg_pde_grid, run_mc, EuropeanEstimate, McRun,
};
use crate::error::{Error, Result};
use crate::kalman::{riccati_solve, KalmanState};
use crate::model::{linear_gaussian_model, InitialLaw, StateSampler};
use crate::num::ols_slope;
use crate::pde;
use crate::pfilter::init_cloud;
use crate::rng::{standard_normal, SeedTree, StreamKind};

/// One deterministic result row; `runtime_s` is informational and excluded
/// from serialized artifacts so output files stay byte-reproducible.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ResultRow {
    pub label: String,
    pub config_summary: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub config_hash: String,
    #[serde(skip)]
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "label,config_summary,value,std_error,config_hash")?;
        for r in &self.rows {
            let se = r.std_error.map(|s| s.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", r.label, r.config_summary, r.value, se, r.config_hash)?;
        }
        Ok(())
    }

    pub fn write_json<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("serialize results: {e}")))?;
        writeln!(w, "{text}")?;
        Ok(())
    }

    /// Console rendering with runtimes.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let se = r.std_error.map(|v| format!(" +- {v:.4}")).unwrap_or_default();
            s.push_str(&format!("{:<24} {:>8.4}{se}", r.label, r.value));
            if r.runtime_s > 0.0 {
                s.push_str(&format!("   ({:.1}s)", r.runtime_s));
            }
            s.push('\n');
        }
        s
    }
}

/// The seven initial conditions of the linear-Gaussian benchmark table.
pub fn table1_initial_conditions() -> Vec<(LawConfig, f64)> {
    let half = 0.05 * 3.0f64.sqrt();
    vec![
        (LawConfig::Gaussian { mean: 0.0, std: 0.05 }, 2.0),
        (LawConfig::Gaussian { mean: -0.12, std: 0.05 }, 2.24),
        (LawConfig::Gaussian { mean: 0.2, std: 0.05 }, 1.8),
        (LawConfig::Gaussian { mean: 0.0, std: 0.1 }, 2.0),
        (LawConfig::Dirac { value: 0.0 }, 2.0),
        (LawConfig::Uniform { lo: -half, hi: half }, 2.0),
        (LawConfig::TwoPoint { lo: -0.05, hi: 0.05 }, 2.0),
    ]
}

/// One fully solved initial condition of the linear-Gaussian table.
pub struct Table1Row {
    pub label: String,
    pub config: ExperimentConfig,
    pub mc: McRun,
    /// Benchmark value where the initial law is Gaussian or Dirac.
    pub pde: Option<f64>,
    pub european: EuropeanEstimate,
    pub runtime_s: f64,
}

/// Runs every initial condition of the benchmark table with the base
/// config's path/particle counts and seed. The PDE solve is shared between
/// rows with the same initial variance.
pub fn run_table1(base: &ExperimentConfig) -> Result<Vec<Table1Row>> {
    if base.model != ModelKind::LinearGaussian {
        return Err(Error::config("table1 requires the linear-Gaussian model"));
    }
    base.validate()?;
    let params = base.lg_params()?;
    let mut pde_cache: HashMap<u64, Arc<pde::SolverResult>> = HashMap::new();
    let mut rows = Vec::new();
    for (idx, (law, y0)) in table1_initial_conditions().into_iter().enumerate() {
        let start = Instant::now();
        let mut config = base.clone();
        config.initial_law = law;
        config.y0 = y0;
        let mc = run_mc(&config)?;
        let pde_value = if law.to_law().is_gaussian_family() {
            let p0 = law.to_law().variance();
            let solver = match pde_cache.get(&p0.to_bits()) {
                Some(s) => s.clone(),
                None => {
                    let (grid, riccati) = lg_pde_grid(&config)?;
                    let solved =
                        Arc::new(pde::solve_bermudan_kalman(&params, &riccati, &grid)?);
                    pde_cache.insert(p0.to_bits(), solved.clone());
                    solved
                }
            };
            Some(solver.query_value(law.to_law().mean(), y0)?)
        } else {
            None
        };
        let european = european_for(&config, &SeedTree::new(config.seed))?;
        rows.push(Table1Row {
            label: format!("row{}", idx + 1),
            config,
            mc,
            pde: pde_value,
            european,
            runtime_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

pub fn table1_result(rows: &[Table1Row]) -> ResultTable {
    let mut table = ResultTable::default();
    for row in rows {
        let hash = row.config.hash();
        let summary = row.config.summary();
        table.rows.push(ResultRow {
            label: format!("{}/mc", row.label),
            config_summary: summary.clone(),
            value: row.mc.estimate.value,
            std_error: Some(row.mc.estimate.std_error),
            config_hash: hash.clone(),
            runtime_s: row.runtime_s,
        });
        if let Some(v) = row.pde {
            table.rows.push(ResultRow {
                label: format!("{}/pde", row.label),
                config_summary: summary.clone(),
                value: v,
                std_error: None,
                config_hash: hash.clone(),
                runtime_s: 0.0,
            });
        }
        table.rows.push(ResultRow {
            label: format!("{}/european", row.label),
            config_summary: summary,
            value: row.european.value,
            std_error: Some(row.european.std_error),
            config_hash: hash,
            runtime_s: 0.0,
        });
    }
    table
}

/// One observation frequency of the stochastic-volatility table.
pub struct Table2Row {
    pub dt: f64,
    pub config: ExperimentConfig,
    pub full_pde: f64,
    pub partial_mc: McRun,
    pub runtime_s: f64,
}

pub struct Table2Result {
    pub rows: Vec<Table2Row>,
    pub european: EuropeanEstimate,
}

/// Full-observation PDE versus partial-observation Monte Carlo for
/// dt in {0.2, 0.1, 0.05}, plus the European benchmark.
pub fn run_table2(base: &ExperimentConfig) -> Result<Table2Result> {
    if base.model != ModelKind::SteinStein {
        return Err(Error::config("table2 requires the stochastic-volatility model"));
    }
    base.validate()?;
    let params = base.ss_params()?;
    let mut rows = Vec::new();
    for &dt in &[0.2, 0.1, 0.05] {
        let start = Instant::now();
        let mut config = base.clone();
        config.grid.dt_exercise = dt;
        config.validate()?;
        let grid = driver::ss_pde_grid(&config)?;
        let solved = pde::solve_bermudan_stein_stein(&params, &grid)?;
        let x0 = config.initial_law.to_law().mean();
        let full_pde = solved.query_value(x0, config.y0)?;
        let partial_mc = run_mc(&config)?;
        rows.push(Table2Row {
            dt,
            config,
            full_pde,
            partial_mc,
            runtime_s: start.elapsed().as_secs_f64(),
        });
    }
    let european = european_for(base, &SeedTree::new(base.seed))?;
    Ok(Table2Result { rows, european })
}

pub fn table2_result(result: &Table2Result) -> ResultTable {
    let mut table = ResultTable::default();
    for row in &result.rows {
        let hash = row.config.hash();
        let summary = row.config.summary();
        table.rows.push(ResultRow {
            label: format!("dt={}/full_pde", row.dt),
            config_summary: summary.clone(),
            value: row.full_pde,
            std_error: None,
            config_hash: hash.clone(),
            runtime_s: row.runtime_s,
        });
        table.rows.push(ResultRow {
            label: format!("dt={}/partial_mc", row.dt),
            config_summary: summary,
            value: row.partial_mc.estimate.value,
            std_error: Some(row.partial_mc.estimate.std_error),
            config_hash: hash,
            runtime_s: 0.0,
        });
    }
    table.rows.push(ResultRow {
        label: "european_mc".into(),
        config_summary: "terminal exercise".into(),
        value: result.european.value,
        std_error: Some(result.european.std_error),
        config_hash: String::new(),
        runtime_s: 0.0,
    });
    table
}

/// Filter RMSE against the Kalman mean on common observation paths.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceReport {
    pub particle_counts: Vec<usize>,
    pub rmse: Vec<f64>,
    pub trials: usize,
    pub slope: f64,
    pub slope_half_width: f64,
}

impl ConvergenceReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "particles,rmse")?;
        for (n, r) in self.particle_counts.iter().zip(&self.rmse) {
            writeln!(w, "{n},{r}")?;
        }
        writeln!(w, "# slope,{},half_width,{}", self.slope, self.slope_half_width)?;
        Ok(())
    }
}

/// For each particle count, runs the particle filter and the Kalman filter
/// on the same physical-measure observation paths and reports the terminal
/// RMSE of pi^n(x) against the Kalman mean, with the fitted log-log slope.
pub fn run_convergence_study(
    config: &ExperimentConfig,
    particle_counts: &[usize],
    trials: usize,
) -> Result<ConvergenceReport> {
    if config.model != ModelKind::LinearGaussian {
        return Err(Error::config("the convergence study requires the linear-Gaussian model"));
    }
    let params = config.lg_params()?;
    let model = linear_gaussian_model(params)?;
    let grid = config.grid.to_grid()?;
    let law = config.initial_law.to_law();
    let (m0, p0) = match law {
        InitialLaw::Gaussian { mean, std } => (mean, std * std),
        InitialLaw::Dirac { value } => (value, 0.0),
        _ => {
            return Err(Error::config(
                "the Kalman reference needs a Gaussian or Dirac initial law",
            ))
        }
    };
    if trials < 3 {
        return Err(Error::config("need at least 3 trials"));
    }
    let riccati = riccati_solve(&params, p0, &grid)?;
    let tree = SeedTree::new(config.seed).derive(driver::phase::CONVERGENCE);
    let delta = grid.delta_obs();
    let sub_dt = grid.sub_dt();
    let sqrt_sub = sub_dt.sqrt();
    let substeps = grid.substeps();

    let errors: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|j| -> Result<Vec<f64>> {
            // one truth/observation path per trial, shared by all filters
            let mut rng_truth = tree.stream(StreamKind::Truth, j);
            let mut x = [0.0];
            law.sample(&mut rng_truth, &mut x);
            let n_incs = grid.n_obs_steps() * substeps;
            let mut dys = Vec::with_capacity(n_incs);
            {
                let mut xs = x;
                for _ in 0..n_incs {
                    let du = sqrt_sub * standard_normal(&mut rng_truth);
                    let dw = sqrt_sub * standard_normal(&mut rng_truth);
                    let dy = (xs[0] - params.mean_level) * sub_dt + params.sigma_y * du;
                    dys.push(dy);
                    xs[0] += -params.kappa * xs[0] * sub_dt
                        + params.rho * params.sigma_x * du
                        + (1.0 - params.rho * params.rho).sqrt() * params.sigma_x * dw;
                }
            }
            // Kalman reference on the same increments
            let mut ks = KalmanState { m: m0, p: p0, t: 0.0 };
            for &dy in &dys {
                ks = crate::kalman::kalman_step(&ks, &params, dy, &riccati, sub_dt);
            }
            // particle filters per n
            let mut errs = Vec::with_capacity(particle_counts.len());
            for (ni, &n) in particle_counts.iter().enumerate() {
                let stream_idx = ((ni as u64) << 32) | j;
                let mut rng_init = tree.stream(StreamKind::ParticleInit, stream_idx);
                let mut rng_noise = tree.stream(StreamKind::ParticleNoise, stream_idx);
                let mut rng_branch = tree.stream(StreamKind::Branching, stream_idx);
                let mut cloud = init_cloud(n, &law, &mut rng_init)?;
                for step in 0..grid.n_obs_steps() {
                    let block = &dys[step * substeps..(step + 1) * substeps];
                    let dy_total: f64 = block.iter().sum();
                    cloud.update_weights_discrete(&model, &[dy_total], delta)?;
                    cloud.propagate_reference(&model, block, sub_dt, &mut rng_noise)?;
                    cloud.branch(&mut rng_branch)?;
                }
                errs.push(cloud.estimate_pi(|v| v[0]) - ks.m);
            }
            Ok(errs)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rmse = Vec::with_capacity(particle_counts.len());
    for ni in 0..particle_counts.len() {
        let mse: f64 =
            errors.iter().map(|e| e[ni] * e[ni]).sum::<f64>() / trials as f64;
        rmse.push(mse.sqrt());
    }
    let log_n: Vec<f64> = particle_counts.iter().map(|&n| (n as f64).ln()).collect();
    let log_rmse: Vec<f64> = rmse.iter().map(|r| r.ln()).collect();
    let (slope, slope_half_width) = ols_slope(&log_n, &log_rmse);
    Ok(ConvergenceReport {
        particle_counts: particle_counts.to_vec(),
        rmse,
        trials,
        slope,
        slope_half_width,
    })
}
