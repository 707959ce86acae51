//! Stopping-region export: per-path (conditional-mean proxy, observation)
//! points with the fitted stop/continue decision at one exercise date, plus
//! the exercise boundary of the PDE benchmark at the same date.

use crate::bench::config::{ExperimentConfig, ModelKind};
use crate::bench::driver::{build_ensemble, lg_pde_grid, ss_pde_grid};
use crate::error::{Error, Result};
use crate::pde;
use crate::rmc::{backward_induction, extract_policy, Decision, tvr_backward_induction};
use crate::rng::SeedTree;

#[derive(Debug, Clone, serde::Serialize)]
pub struct RegionPoint {
    /// Conditional-mean estimate of the unobserved state.
    pub proxy: f64,
    pub y: f64,
    pub immediate: f64,
    pub continuation: f64,
    pub stop: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RegionExport {
    pub time: f64,
    pub date_index: usize,
    pub points: Vec<RegionPoint>,
    /// (proxy coordinate, observation coordinate) of the PDE exercise
    /// boundary at the matching date.
    pub boundary: Vec<(f64, f64)>,
}

impl RegionExport {
    pub fn write_points_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "proxy,y,immediate,continuation,decision")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{}",
                p.proxy,
                p.y,
                p.immediate,
                p.continuation,
                if p.stop { "stop" } else { "continue" }
            )?;
        }
        Ok(())
    }

    pub fn write_boundary_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "proxy,y")?;
        for (a, b) in &self.boundary {
            writeln!(w, "{a},{b}")?;
        }
        Ok(())
    }
}

/// Runs the configured Monte Carlo solver, evaluates its stopping rule at the
/// exercise date nearest `time_req` (which must be an exercise date), and
/// attaches the PDE exercise boundary at the same date.
pub fn export_stopping_region(config: &ExperimentConfig, time_req: f64) -> Result<RegionExport> {
    config.validate()?;
    let grid = config.grid.to_grid()?;
    let dt = grid.dt_exercise();
    let pos = time_req / dt;
    let date = pos.round() as usize;
    if (pos - pos.round()).abs() > 1e-9 || date > grid.n_exercise() {
        return Err(Error::config(format!(
            "{time_req} is not an exercise date (spacing {dt}, horizon {})",
            grid.horizon()
        )));
    }

    let seeds = SeedTree::new(config.seed);
    let ensemble = build_ensemble(config, &seeds)?;
    let basis = crate::bench::driver::basis_for(config);
    let fit = match config.algo {
        crate::bench::config::Algo::Ls => backward_induction(&ensemble, &basis)?.0,
        crate::bench::config::Algo::Tvr => tvr_backward_induction(&ensemble, &basis)?.0,
    };
    let policy = extract_policy(&fit);

    let mut points = Vec::with_capacity(ensemble.n_paths);
    for k in 0..ensemble.n_paths {
        let features = ensemble.feature_row(date, k);
        let immediate = ensemble.payoffs_at(date)[k];
        let continuation = policy.continuation(date, features).unwrap_or(immediate);
        let stop = policy.decide(date, features, immediate) == Decision::Stop;
        points.push(RegionPoint {
            proxy: ensemble.proxies_at(date)[k],
            y: ensemble.feature_row(date, k)[1], // the observation feature
            immediate,
            continuation,
            stop,
        });
    }

    let time = grid.exercise_time(date);
    let boundary = match config.model {
        ModelKind::LinearGaussian => {
            let (pgrid, riccati) = lg_pde_grid(config)?;
            let solved = pde::solve_bermudan_kalman(&config.lg_params()?, &riccati, &pgrid)?;
            boundary_at(&solved, time)
        }
        ModelKind::SteinStein => {
            let pgrid = ss_pde_grid(config)?;
            let solved = pde::solve_bermudan_stein_stein(&config.ss_params()?, &pgrid)?;
            boundary_at(&solved, time)
        }
    };
    Ok(RegionExport { time, date_index: date, points, boundary })
}

fn boundary_at(solved: &pde::SolverResult, time: f64) -> Vec<(f64, f64)> {
    match solved.exercise_slice_at(time) {
        Some(slice) => pde::SolverResult::boundary_points(slice, &solved.axis1, &solved.axis2),
        None => Vec::new(),
    }
}
