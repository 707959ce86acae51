//! Explicit finite-difference solvers for the fully specified Bermudan
//! free-boundary benchmarks.
//!
//! Both problems are quasi-variational inequalities on a 2-D spatial grid:
//! step the generator backward in time with an explicit stencil and apply the
//! obstacle max only at exercise dates. Boundary conditions are linearity
//! (second derivative zero) on all spatial edges; cross derivatives use the
//! four-point centered stencil. The CFL ratio is checked before stepping and
//! reported in the result.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kalman::{conditional_payoff, RiccatiSolution};
use crate::model::{LinearGaussianParams, SteinSteinParams};

/// Uniform axis: `nodes` points from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, nodes: usize) -> Result<Self> {
        if !(max > min) || nodes < 3 {
            return Err(Error::config("axis needs max > min and at least 3 nodes"));
        }
        Ok(Axis { min, max, nodes })
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.nodes - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step()
    }
}

/// Space-time grid with Bermudan exercise dates aligned on time nodes.
#[derive(Debug, Clone)]
pub struct Grid2D {
    pub axis1: Axis,
    pub axis2: Axis,
    pub horizon: f64,
    pub n_time_steps: usize,
    /// Time-step indices (0 = valuation date) that allow exercise; the
    /// terminal index is always implicitly an exercise date.
    pub exercise_steps: Vec<usize>,
}

impl Grid2D {
    /// Bermudan grid with `m_exercise` equally spaced exercise intervals;
    /// `n_time_steps` must be divisible by `m_exercise` so dates align with
    /// time nodes. Exercise dates include t = 0.
    pub fn bermudan(
        axis1: Axis,
        axis2: Axis,
        horizon: f64,
        n_time_steps: usize,
        m_exercise: usize,
    ) -> Result<Self> {
        if horizon <= 0.0 || m_exercise == 0 {
            return Err(Error::config("horizon and exercise count must be positive"));
        }
        if n_time_steps % m_exercise != 0 {
            return Err(Error::config(format!(
                "time steps ({n_time_steps}) must be divisible by exercise intervals ({m_exercise})"
            )));
        }
        let stride = n_time_steps / m_exercise;
        let exercise_steps = (0..m_exercise).map(|m| m * stride).collect();
        Ok(Grid2D { axis1, axis2, horizon, n_time_steps, exercise_steps })
    }

    /// Terminal exercise only.
    pub fn european(axis1: Axis, axis2: Axis, horizon: f64, n_time_steps: usize) -> Result<Self> {
        if horizon <= 0.0 || n_time_steps == 0 {
            return Err(Error::config("horizon and time steps must be positive"));
        }
        Ok(Grid2D { axis1, axis2, horizon, n_time_steps, exercise_steps: Vec::new() })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_time_steps as f64
    }

    fn is_exercise_step(&self, step: usize) -> bool {
        self.exercise_steps.binary_search(&step).is_ok()
    }
}

/// Exercise information retained at one exercise date.
#[derive(Debug, Clone)]
pub struct ExerciseSlice {
    pub time: f64,
    /// Continuation surface just before the obstacle max.
    pub continuation: Vec<f64>,
    /// Obstacle surface at this date.
    pub obstacle: Vec<f64>,
    /// True where exercising is (weakly) optimal: obstacle >= continuation.
    pub mask: Vec<bool>,
}

/// Backward-solved value surface plus per-exercise-date masks.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub axis1: Axis,
    pub axis2: Axis,
    /// Value at t = 0, row-major over (axis1, axis2).
    pub value: Vec<f64>,
    /// Exercise slices in increasing time order.
    pub exercise: Vec<ExerciseSlice>,
    /// Largest CFL ratio encountered.
    pub max_cfl: f64,
}

impl SolverResult {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.axis2.nodes + j
    }

    /// Bilinear interpolation of the t = 0 surface.
    pub fn query_value(&self, p1: f64, p2: f64) -> Result<f64> {
        bilinear(&self.axis1, &self.axis2, &self.value, p1, p2)
    }

    /// Bilinear interpolation of any surface stored on this grid, such as a
    /// per-date continuation or obstacle slice.
    pub fn query_surface(&self, surface: &[f64], p1: f64, p2: f64) -> Result<f64> {
        bilinear(&self.axis1, &self.axis2, surface, p1, p2)
    }

    /// The exercise slice closest to `time`.
    pub fn exercise_slice_at(&self, time: f64) -> Option<&ExerciseSlice> {
        self.exercise
            .iter()
            .min_by(|a, b| (a.time - time).abs().partial_cmp(&(b.time - time).abs()).unwrap())
    }

    /// Exercise-boundary points at one slice: for each axis1 node, the axis2
    /// coordinates where the mask flips.
    pub fn boundary_points(slice: &ExerciseSlice, axis1: &Axis, axis2: &Axis) -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        for i in 0..axis1.nodes {
            for j in 1..axis2.nodes {
                let a = slice.mask[i * axis2.nodes + j - 1];
                let b = slice.mask[i * axis2.nodes + j];
                if a != b {
                    pts.push((axis1.coord(i), 0.5 * (axis2.coord(j - 1) + axis2.coord(j))));
                }
            }
        }
        pts
    }

    /// Surface export: node coordinates and value at t = 0.
    pub fn write_surface_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "axis1,axis2,value")?;
        for i in 0..self.axis1.nodes {
            for j in 0..self.axis2.nodes {
                writeln!(
                    w,
                    "{},{},{}",
                    self.axis1.coord(i),
                    self.axis2.coord(j),
                    self.value[self.idx(i, j)]
                )?;
            }
        }
        Ok(())
    }
}

fn bilinear(axis1: &Axis, axis2: &Axis, grid: &[f64], p1: f64, p2: f64) -> Result<f64> {
    let tol1 = 1e-9 * axis1.step();
    let tol2 = 1e-9 * axis2.step();
    if p1 < axis1.min - tol1 || p1 > axis1.max + tol1 || p2 < axis2.min - tol2 || p2 > axis2.max + tol2
    {
        return Err(Error::domain(format!("query point ({p1}, {p2}) outside the grid")));
    }
    let u = ((p1 - axis1.min) / axis1.step()).clamp(0.0, (axis1.nodes - 1) as f64);
    let v = ((p2 - axis2.min) / axis2.step()).clamp(0.0, (axis2.nodes - 1) as f64);
    let i = (u.floor() as usize).min(axis1.nodes - 2);
    let j = (v.floor() as usize).min(axis2.nodes - 2);
    let fu = u - i as f64;
    let fv = v - j as f64;
    let n2 = axis2.nodes;
    let v00 = grid[i * n2 + j];
    let v01 = grid[i * n2 + j + 1];
    let v10 = grid[(i + 1) * n2 + j];
    let v11 = grid[(i + 1) * n2 + j + 1];
    Ok(v00 * (1.0 - fu) * (1.0 - fv) + v01 * (1.0 - fu) * fv + v10 * fu * (1.0 - fv) + v11 * fu * fv)
}

/// PDE coefficients at one node: first/second derivatives along each axis,
/// the cross term, and the zeroth-order (killing) rate.
#[derive(Debug, Clone, Copy, Default)]
struct NodeCoeffs {
    conv1: f64,
    conv2: f64,
    diff1: f64,
    diff2: f64,
    cross: f64,
    kill: f64,
}

/// Generic explicit backward stepper over the grid. `coeffs(t, x1, x2)`
/// supplies generator coefficients; `obstacle(t, x1, x2)` the exercise value.
fn solve_backward(
    grid: &Grid2D,
    coeffs: &(dyn Fn(f64, f64, f64) -> NodeCoeffs + Sync),
    obstacle: &(dyn Fn(f64, f64, f64) -> Result<f64> + Sync),
) -> Result<SolverResult> {
    let a1 = grid.axis1;
    let a2 = grid.axis2;
    let (n1, n2) = (a1.nodes, a2.nodes);
    let (d1, d2) = (a1.step(), a2.step());
    let dt = grid.dt();

    // stability scan over time layers and the spatial extremes
    let mut max_cfl = 0.0f64;
    for step in 0..=grid.n_time_steps {
        let t = step as f64 * dt;
        for &x1 in &[a1.min, a1.max, 0.5 * (a1.min + a1.max)] {
            for &x2 in &[a2.min, a2.max] {
                let c = coeffs(t, x1, x2);
                let ratio = dt
                    * (2.0 * c.diff1 / (d1 * d1)
                        + 2.0 * c.diff2 / (d2 * d2)
                        + c.cross.abs() / (2.0 * d1 * d2)
                        + c.kill.max(0.0));
                max_cfl = max_cfl.max(ratio);
            }
        }
    }
    if max_cfl > 1.0 {
        return Err(Error::CflViolation { ratio: max_cfl });
    }

    let obstacle_surface = |t: f64| -> Result<Vec<f64>> {
        let mut g = vec![0.0; n1 * n2];
        for i in 0..n1 {
            for j in 0..n2 {
                g[i * n2 + j] = obstacle(t, a1.coord(i), a2.coord(j))?;
            }
        }
        Ok(g)
    };

    let mut value = obstacle_surface(grid.horizon)?;
    let mut next = vec![0.0; n1 * n2];
    let mut exercise_rev: Vec<ExerciseSlice> = Vec::new();

    for step in (0..grid.n_time_steps).rev() {
        let t_known = (step + 1) as f64 * dt;
        // interior update from the known layer
        {
            let value_ref = &value;
            next.par_chunks_mut(n2).enumerate().for_each(|(i, row)| {
                if i == 0 || i == n1 - 1 {
                    return;
                }
                let x1 = a1.coord(i);
                for j in 1..n2 - 1 {
                    let x2 = a2.coord(j);
                    let c = coeffs(t_known, x1, x2);
                    let v = value_ref[i * n2 + j];
                    let vm = value_ref[(i - 1) * n2 + j];
                    let vp = value_ref[(i + 1) * n2 + j];
                    let vl = value_ref[i * n2 + j - 1];
                    let vr = value_ref[i * n2 + j + 1];
                    let vpp = value_ref[(i + 1) * n2 + j + 1];
                    let vpm = value_ref[(i + 1) * n2 + j - 1];
                    let vmp = value_ref[(i - 1) * n2 + j + 1];
                    let vmm = value_ref[(i - 1) * n2 + j - 1];
                    let lv = c.conv1 * (vp - vm) / (2.0 * d1)
                        + c.conv2 * (vr - vl) / (2.0 * d2)
                        + c.diff1 * (vp - 2.0 * v + vm) / (d1 * d1)
                        + c.diff2 * (vr - 2.0 * v + vl) / (d2 * d2)
                        + c.cross * (vpp - vpm - vmp + vmm) / (4.0 * d1 * d2)
                        - c.kill * v;
                    row[j] = v + dt * lv;
                }
            });
        }
        // linearity boundaries: extrapolate rows, then columns (corners last)
        for j in 1..n2 - 1 {
            next[j] = 2.0 * next[n2 + j] - next[2 * n2 + j];
            next[(n1 - 1) * n2 + j] = 2.0 * next[(n1 - 2) * n2 + j] - next[(n1 - 3) * n2 + j];
        }
        for i in 0..n1 {
            next[i * n2] = 2.0 * next[i * n2 + 1] - next[i * n2 + 2];
            next[i * n2 + n2 - 1] = 2.0 * next[i * n2 + n2 - 2] - next[i * n2 + n2 - 3];
        }
        std::mem::swap(&mut value, &mut next);

        if grid.is_exercise_step(step) {
            let t = step as f64 * dt;
            let g = obstacle_surface(t)?;
            let mut mask = vec![false; n1 * n2];
            let continuation = value.clone();
            for idx in 0..n1 * n2 {
                if g[idx] >= value[idx] {
                    mask[idx] = true;
                    value[idx] = g[idx];
                }
            }
            exercise_rev.push(ExerciseSlice { time: t, continuation, obstacle: g, mask });
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!("value surface at step {step}")));
        }
    }
    exercise_rev.reverse();
    Ok(SolverResult { axis1: a1, axis2: a2, value, exercise: exercise_rev, max_cfl })
}

fn cfl_sum(c: &NodeCoeffs, d1: f64, d2: f64) -> f64 {
    2.0 * c.diff1 / (d1 * d1)
        + 2.0 * c.diff2 / (d2 * d2)
        + c.cross.abs() / (2.0 * d1 * d2)
        + c.kill.max(0.0)
}

fn round_up_multiple(n: usize, m: usize) -> usize {
    n.div_ceil(m) * m
}

/// Smallest CFL-safe time-step count (at least `base`, a multiple of
/// `m_exercise`) for the Kalman-reduced problem on the given axes.
pub fn kalman_time_steps(
    params: &LinearGaussianParams,
    riccati: &RiccatiSolution,
    axis1: Axis,
    axis2: Axis,
    horizon: f64,
    m_exercise: usize,
    base: usize,
) -> usize {
    let (d1, d2) = (axis1.step(), axis2.step());
    let mut worst = 0.0f64;
    let samples = 512;
    for k in 0..=samples {
        let t = horizon * k as f64 / samples as f64;
        let pt = riccati.value(t);
        for &m in &[axis1.min, axis1.max] {
            let c = kalman_node_coeffs(params, pt, m);
            worst = worst.max(cfl_sum(&c, d1, d2));
        }
    }
    let needed = (1.05 * horizon * worst).ceil() as usize;
    round_up_multiple(needed.max(base), m_exercise)
}

/// Smallest CFL-safe time-step count for the stochastic-volatility problem.
pub fn stein_stein_time_steps(
    params: &SteinSteinParams,
    axis1: Axis,
    axis2: Axis,
    horizon: f64,
    m_exercise: usize,
    base: usize,
) -> usize {
    let (d1, d2) = (axis1.step(), axis2.step());
    let mut worst = 0.0f64;
    for &x in &[axis1.min, axis1.max, 0.0] {
        let c = stein_node_coeffs(params, x);
        worst = worst.max(cfl_sum(&c, d1, d2));
    }
    let needed = (1.05 * horizon * worst).ceil() as usize;
    round_up_multiple(needed.max(base), m_exercise)
}

fn kalman_node_coeffs(p: &LinearGaussianParams, pt: f64, m: f64) -> NodeCoeffs {
    let gain = p.rho * p.sigma_x + pt / p.sigma_y;
    NodeCoeffs {
        conv1: -p.kappa * m,
        conv2: m - p.mean_level,
        diff1: 0.5 * gain * gain,
        diff2: 0.5 * p.sigma_y * p.sigma_y,
        cross: p.rho * p.sigma_x * p.sigma_y + pt,
        kill: p.discount_rate,
    }
}

fn stein_node_coeffs(p: &SteinSteinParams, x: f64) -> NodeCoeffs {
    NodeCoeffs {
        conv1: p.kappa * (p.sigma_bar - x),
        conv2: p.discount_rate - 0.5 * x * x,
        diff1: 0.5 * p.alpha * p.alpha,
        diff2: 0.5 * x * x,
        cross: p.rho * p.alpha * x,
        kill: p.discount_rate,
    }
}

/// Bermudan solver for the Kalman-reduced problem on (m, y):
///
/// ```text
/// V_t + (m - a) V_y + 1/2 sigma_y^2 V_yy - kappa m V_m
///     + 1/2 (rho sigma_x + P_t/sigma_y)^2 V_mm + (rho sigma_x sigma_y + P_t) V_my - r V
/// ```
///
/// with obstacle G(m, P_t, y) applied at exercise dates and terminal value
/// G(m, P_T, y). Axis 1 is m, axis 2 is y (y > 0 required by the obstacle).
pub fn solve_bermudan_kalman(
    params: &LinearGaussianParams,
    riccati: &RiccatiSolution,
    grid: &Grid2D,
) -> Result<SolverResult> {
    params.validate()?;
    if grid.axis2.min <= 0.0 {
        return Err(Error::domain("the y axis must be strictly positive"));
    }
    let p = *params;
    let coeffs = move |t: f64, m: f64, _y: f64| kalman_node_coeffs(&p, riccati.value(t), m);
    let obstacle =
        move |t: f64, m: f64, y: f64| conditional_payoff(m, riccati.value(t), y, &p);
    solve_backward(grid, &coeffs, &obstacle)
}

/// Bermudan solver for the fully observed stochastic-volatility problem on
/// (x, y) = (volatility, log-price):
///
/// ```text
/// V_t + (r - x^2/2) V_y + 1/2 x^2 V_yy + kappa (sigma_bar - x) V_x
///     + 1/2 alpha^2 V_xx + rho alpha x V_xy - r V
/// ```
///
/// with obstacle (K - e^y)_+ at exercise dates.
pub fn solve_bermudan_stein_stein(
    params: &SteinSteinParams,
    grid: &Grid2D,
) -> Result<SolverResult> {
    params.validate()?;
    let p = *params;
    let coeffs = move |_t: f64, x: f64, _y: f64| stein_node_coeffs(&p, x);
    let obstacle = move |_t: f64, _x: f64, y: f64| Ok((p.strike - y.exp()).max(0.0));
    solve_backward(grid, &coeffs, &obstacle)
}

/// Bilinear query on an arbitrary stored surface (spec-level operation; the
/// method on [`SolverResult`] is the common entry point).
pub fn query_value(result: &SolverResult, point: (f64, f64)) -> Result<f64> {
    result.query_value(point.0, point.1)
}
