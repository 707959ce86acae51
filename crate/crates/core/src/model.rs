//! Diffusion models for a partially observed state/observation pair.
//!
//! The state X and observation Y follow
//!
//! ```text
//! dX_t = b(X_t) dt + alpha(X_t) dU_t + sigma(X_t) dW_t
//! dY_t = h(X_t) dt + s(X_t) dU_t
//! ```
//!
//! with U, W independent Wiener processes of dimension d_Y and d_W. When the
//! observation dispersion s is constant, the scaled observation Y / s is a
//! Brownian motion under the reference measure and the state drift picks up
//! the correction -alpha * h / s. Models store the raw dynamics; consumers
//! that need the unit-noise form normalize through [`Dynamics::const_obs_dispersion`].
//!
//! Rewards are stored discounted: `payoff(t, x, y) = e^{-rt} g(x, y)`, so
//! every downstream recursion is undiscounted.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{standard_normal, SeedTree, StreamKind};

/// State, observation and independent-noise dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub d: usize,
    pub d_y: usize,
    pub d_w: usize,
}

/// Coefficient functions of a state/observation diffusion.
///
/// All evaluation methods write into caller-provided buffers so the particle
/// loops stay allocation-free. Matrix outputs are row-major.
pub trait Dynamics: Send + Sync {
    fn dims(&self) -> ModelDims;

    /// State drift b(x), d components.
    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// Loading alpha(x) of the state on the observation noise U, d x d_Y.
    fn obs_loading(&self, x: &[f64], out: &mut [f64]);

    /// Loading sigma(x) of the state on the independent noise W, d x d_W.
    fn ind_loading(&self, x: &[f64], out: &mut [f64]);

    /// Observation drift h(x), d_Y components.
    fn obs_drift(&self, x: &[f64], out: &mut [f64]);

    /// Diagonal dispersion of the observation noise at x, d_Y components.
    fn obs_dispersion(&self, x: &[f64], out: &mut [f64]);

    /// The observation dispersion when it does not depend on the state.
    /// `None` means the reference-measure machinery is unavailable.
    fn const_obs_dispersion(&self) -> Option<Vec<f64>>;

    fn discount_rate(&self) -> f64;

    /// Reward discounted to time zero: e^{-rt} g(x, y).
    fn payoff(&self, t: f64, x: &[f64], y: &[f64]) -> f64;
}

/// Scratch buffers for one Euler step; reuse across steps.
#[derive(Debug, Clone)]
pub struct StepScratch {
    pub drift: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sigma: Vec<f64>,
    pub h: Vec<f64>,
    pub disp: Vec<f64>,
}

impl StepScratch {
    pub fn new(dims: ModelDims) -> Self {
        StepScratch {
            drift: vec![0.0; dims.d],
            alpha: vec![0.0; dims.d * dims.d_y],
            sigma: vec![0.0; dims.d * dims.d_w],
            h: vec![0.0; dims.d_y],
            disp: vec![0.0; dims.d_y],
        }
    }
}

/// Which drift the Euler step applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftMode {
    /// Drift b; `dy` holds increments of the shared unit noise U.
    Physical,
    /// Drift b - alpha h / s; `dy` holds increments of the normalized
    /// observation (a Brownian motion under the reference measure).
    Reference,
}

/// One Euler–Maruyama update of the state, in place.
///
/// `dy` and `dw` carry the d_Y- and d_W-dimensional noise increments for the
/// step (see [`DriftMode`] for what `dy` means in each mode).
pub fn euler_step<M: Dynamics + ?Sized>(
    model: &M,
    state: &mut [f64],
    mode: DriftMode,
    dy: &[f64],
    dw: &[f64],
    h_step: f64,
    scratch: &mut StepScratch,
) -> Result<()> {
    let dims = model.dims();
    assert_eq!(state.len(), dims.d, "state dimension mismatch");
    assert_eq!(dy.len(), dims.d_y, "observation increment dimension mismatch");
    assert_eq!(dw.len(), dims.d_w, "noise increment dimension mismatch");
    assert!(h_step >= 0.0, "time step must be nonnegative");

    model.drift(state, &mut scratch.drift);
    model.obs_loading(state, &mut scratch.alpha);
    model.ind_loading(state, &mut scratch.sigma);
    if mode == DriftMode::Reference {
        model.obs_drift(state, &mut scratch.h);
        let disp = model.const_obs_dispersion().ok_or_else(|| {
            Error::config("reference-measure stepping requires a constant observation dispersion")
        })?;
        // drift correction: b - alpha * (h / s)
        for i in 0..dims.d {
            let mut corr = 0.0;
            for k in 0..dims.d_y {
                corr += scratch.alpha[i * dims.d_y + k] * scratch.h[k] / disp[k];
            }
            scratch.drift[i] -= corr;
        }
    }
    for i in 0..dims.d {
        let mut incr = scratch.drift[i] * h_step;
        for k in 0..dims.d_y {
            incr += scratch.alpha[i * dims.d_y + k] * dy[k];
        }
        for k in 0..dims.d_w {
            incr += scratch.sigma[i * dims.d_w + k] * dw[k];
        }
        state[i] += incr;
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite(
            "state after Euler step; model coefficients may be misconfigured",
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Time grid
// ---------------------------------------------------------------------------

/// Simulation grid: horizon T, exercise spacing dt, observation/mutation
/// spacing delta, and Euler substeps per delta interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    horizon: f64,
    n_exercise: usize,
    obs_per_exercise: usize,
    substeps: usize,
}

fn ratio_as_integer(num: f64, den: f64) -> Option<usize> {
    if den <= 0.0 || num <= 0.0 {
        return None;
    }
    let r = num / den;
    let k = r.round();
    if k >= 1.0 && (r - k).abs() < 1e-9 * k {
        Some(k as usize)
    } else {
        None
    }
}

impl SimGrid {
    pub fn new(horizon: f64, dt_exercise: f64, delta_obs: f64, substeps: usize) -> Result<Self> {
        let n_exercise = ratio_as_integer(horizon, dt_exercise)
            .ok_or_else(|| Error::config("horizon / dt_exercise must be a positive integer"))?;
        let obs_per_exercise = ratio_as_integer(dt_exercise, delta_obs)
            .ok_or_else(|| Error::config("dt_exercise / delta_obs must be a positive integer"))?;
        if substeps < 1 {
            return Err(Error::config("substeps must be at least 1"));
        }
        Ok(SimGrid { horizon, n_exercise, obs_per_exercise, substeps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of exercise intervals M; exercise dates are 0, dt, ..., T.
    pub fn n_exercise(&self) -> usize {
        self.n_exercise
    }

    pub fn dt_exercise(&self) -> f64 {
        self.horizon / self.n_exercise as f64
    }

    pub fn obs_per_exercise(&self) -> usize {
        self.obs_per_exercise
    }

    pub fn n_obs_steps(&self) -> usize {
        self.n_exercise * self.obs_per_exercise
    }

    pub fn delta_obs(&self) -> f64 {
        self.horizon / self.n_obs_steps() as f64
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn sub_dt(&self) -> f64 {
        self.delta_obs() / self.substeps as f64
    }

    pub fn exercise_time(&self, m: usize) -> f64 {
        m as f64 * self.dt_exercise()
    }

    pub fn obs_time(&self, i: usize) -> f64 {
        i as f64 * self.delta_obs()
    }
}

/// One simulated path sampled on the observation grid. `x` is present only
/// for joint physical-measure simulations.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub times: Vec<f64>,
    /// Observations, `times.len() * d_y`, row-major.
    pub y: Vec<f64>,
    /// States, `times.len() * d`, row-major; absent for observation-only paths.
    pub x: Option<Vec<f64>>,
}

impl PathSample {
    pub fn y_at(&self, i: usize, d_y: usize) -> &[f64] {
        &self.y[i * d_y..(i + 1) * d_y]
    }

    pub fn x_at(&self, i: usize, d: usize) -> Option<&[f64]> {
        self.x.as_ref().map(|x| &x[i * d..(i + 1) * d])
    }
}

// ---------------------------------------------------------------------------
// Initial laws
// ---------------------------------------------------------------------------

/// Samples initial states. Dimension must match the model's `d`.
pub trait StateSampler: Send + Sync {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]);
}

/// One-dimensional initial laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialLaw {
    Gaussian { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Half mass at each of two points.
    TwoPoint { lo: f64, hi: f64 },
    Dirac { value: f64 },
}

impl InitialLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            InitialLaw::Gaussian { mean, .. } => mean,
            InitialLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            InitialLaw::TwoPoint { lo, hi } => 0.5 * (lo + hi),
            InitialLaw::Dirac { value } => value,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            InitialLaw::Gaussian { std, .. } => std * std,
            InitialLaw::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            InitialLaw::TwoPoint { lo, hi } => {
                let half = 0.5 * (hi - lo);
                half * half
            }
            InitialLaw::Dirac { .. } => 0.0,
        }
    }

    /// True for laws the Kalman benchmark can represent exactly.
    pub fn is_gaussian_family(&self) -> bool {
        matches!(self, InitialLaw::Gaussian { .. } | InitialLaw::Dirac { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialLaw::Gaussian { mean, std } => mean.is_finite() && std.is_finite() && std >= 0.0,
            InitialLaw::Uniform { lo, hi } | InitialLaw::TwoPoint { lo, hi } => {
                lo.is_finite() && hi.is_finite() && lo <= hi
            }
            InitialLaw::Dirac { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid initial law {self:?}")))
        }
    }
}

impl StateSampler for InitialLaw {
    fn dim(&self) -> usize {
        1
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        out[0] = match *self {
            InitialLaw::Gaussian { mean, std } => mean + std * standard_normal(rng),
            InitialLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            InitialLaw::TwoPoint { lo, hi } => {
                if rng.random::<bool>() {
                    hi
                } else {
                    lo
                }
            }
            InitialLaw::Dirac { value } => value,
        };
    }
}

// ---------------------------------------------------------------------------
// Path simulation
// ---------------------------------------------------------------------------

/// Observation paths under the reference measure: independent unit Brownian
/// motions started at `y0`, recorded on the delta grid. Path k draws from
/// stream (Observation, k).
pub fn simulate_observation_paths(
    grid: &SimGrid,
    d_y: usize,
    y0: &[f64],
    n_paths: usize,
    seeds: &SeedTree,
) -> Result<Vec<PathSample>> {
    if n_paths < 1 {
        return Err(Error::config("need at least one path"));
    }
    assert_eq!(y0.len(), d_y);
    let n_steps = grid.n_obs_steps();
    let delta = grid.delta_obs();
    let sqrt_delta = delta.sqrt();
    let paths: Vec<PathSample> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeds.stream(StreamKind::Observation, k);
            let mut times = Vec::with_capacity(n_steps + 1);
            let mut y = Vec::with_capacity((n_steps + 1) * d_y);
            times.push(0.0);
            y.extend_from_slice(y0);
            let mut cur = y0.to_vec();
            for i in 1..=n_steps {
                for c in cur.iter_mut() {
                    *c += sqrt_delta * standard_normal(&mut rng);
                }
                times.push(grid.obs_time(i));
                y.extend_from_slice(&cur);
            }
            PathSample { times, y, x: None }
        })
        .collect();
    Ok(paths)
}

/// Joint (X, Y) paths under the physical measure via Euler with `substeps`
/// per delta interval, recorded on the delta grid. Path k draws its initial
/// state from stream (ParticleInit, k) and its noise from (Truth, k).
pub fn simulate_joint_paths<M: Dynamics + ?Sized>(
    model: &M,
    grid: &SimGrid,
    x0_sampler: &dyn StateSampler,
    y0: &[f64],
    n_paths: usize,
    seeds: &SeedTree,
) -> Result<Vec<PathSample>> {
    if n_paths < 1 {
        return Err(Error::config("need at least one path"));
    }
    let dims = model.dims();
    assert_eq!(y0.len(), dims.d_y);
    assert_eq!(x0_sampler.dim(), dims.d);
    let n_steps = grid.n_obs_steps();
    let sub = grid.substeps();
    let h = grid.sub_dt();
    let sqrt_h = h.sqrt();
    (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut init_rng = seeds.stream(StreamKind::ParticleInit, k);
            let mut rng = seeds.stream(StreamKind::Truth, k);
            let mut scratch = StepScratch::new(dims);
            let mut xs = vec![0.0; dims.d];
            x0_sampler.sample(&mut init_rng, &mut xs);
            let mut ys = y0.to_vec();
            let mut du = vec![0.0; dims.d_y];
            let mut dw = vec![0.0; dims.d_w];

            let mut times = Vec::with_capacity(n_steps + 1);
            let mut y_rec = Vec::with_capacity((n_steps + 1) * dims.d_y);
            let mut x_rec = Vec::with_capacity((n_steps + 1) * dims.d);
            times.push(0.0);
            y_rec.extend_from_slice(&ys);
            x_rec.extend_from_slice(&xs);

            for i in 1..=n_steps {
                for _ in 0..sub {
                    for v in du.iter_mut() {
                        *v = sqrt_h * standard_normal(&mut rng);
                    }
                    for v in dw.iter_mut() {
                        *v = sqrt_h * standard_normal(&mut rng);
                    }
                    // advance Y from the pre-step state, then X
                    model.obs_drift(&xs, &mut scratch.h);
                    model.obs_dispersion(&xs, &mut scratch.disp);
                    for c in 0..dims.d_y {
                        ys[c] += scratch.h[c] * h + scratch.disp[c] * du[c];
                    }
                    euler_step(model, &mut xs, DriftMode::Physical, &du, &dw, h, &mut scratch)?;
                }
                times.push(grid.obs_time(i));
                y_rec.extend_from_slice(&ys);
                x_rec.extend_from_slice(&xs);
            }
            Ok(PathSample { times, y: y_rec, x: Some(x_rec) })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Concrete models
// ---------------------------------------------------------------------------

/// Mean-reverting Gaussian drift observed through a linear diffusion:
///
/// ```text
/// dX_t = -kappa X_t dt + sigma_x (rho dB_t + sqrt(1-rho^2) dB'_t)
/// dY_t = (X_t - mean_level) dt + sigma_y dB_t
/// ```
///
/// with reward e^{-rt} (y (c1 + x) - c2)_+.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearGaussianParams {
    pub kappa: f64,
    pub mean_level: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub discount_rate: f64,
    pub c1: f64,
    pub c2: f64,
}

impl LinearGaussianParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_x > 0.0 && self.sigma_y > 0.0) {
            return Err(Error::config("sigma_x and sigma_y must be positive"));
        }
        if self.rho.abs() > 1.0 {
            return Err(Error::config("|rho| must not exceed 1"));
        }
        if self.discount_rate < 0.0 || self.kappa < 0.0 {
            return Err(Error::config("kappa and discount_rate must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearGaussianModel {
    pub params: LinearGaussianParams,
}

pub fn linear_gaussian_model(params: LinearGaussianParams) -> Result<LinearGaussianModel> {
    params.validate()?;
    Ok(LinearGaussianModel { params })
}

impl Dynamics for LinearGaussianModel {
    fn dims(&self) -> ModelDims {
        ModelDims { d: 1, d_y: 1, d_w: 1 }
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.params.kappa * x[0];
    }

    fn obs_loading(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.params.rho * self.params.sigma_x;
    }

    fn ind_loading(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = (1.0 - self.params.rho * self.params.rho).sqrt() * self.params.sigma_x;
    }

    fn obs_drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0] - self.params.mean_level;
    }

    fn obs_dispersion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.params.sigma_y;
    }

    fn const_obs_dispersion(&self) -> Option<Vec<f64>> {
        Some(vec![self.params.sigma_y])
    }

    fn discount_rate(&self) -> f64 {
        self.params.discount_rate
    }

    fn payoff(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        let raw = (y[0] * (self.params.c1 + x[0]) - self.params.c2).max(0.0);
        (-self.params.discount_rate * t).exp() * raw
    }
}

/// Stein–Stein stochastic volatility: log-price Y with volatility X,
///
/// ```text
/// dY_t = (r - X_t^2 / 2) dt + X_t dU_t
/// dX_t = kappa (sigma_bar - X_t) dt + rho alpha dU_t + sqrt(1-rho^2) alpha dW_t
/// ```
///
/// with put reward e^{-rt} (K - e^y)_+. The observation dispersion depends on
/// the state, so no reference measure is available.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SteinSteinParams {
    pub kappa: f64,
    pub sigma_bar: f64,
    pub alpha: f64,
    pub rho: f64,
    pub discount_rate: f64,
    pub strike: f64,
}

impl SteinSteinParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha <= 0.0 {
            return Err(Error::config("alpha must be positive"));
        }
        if self.rho.abs() > 1.0 {
            return Err(Error::config("|rho| must not exceed 1"));
        }
        if self.kappa < 0.0 || self.discount_rate < 0.0 || self.strike <= 0.0 {
            return Err(Error::config(
                "kappa, discount_rate must be nonnegative and strike positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SteinSteinModel {
    pub params: SteinSteinParams,
}

pub fn stein_stein_model(params: SteinSteinParams) -> Result<SteinSteinModel> {
    params.validate()?;
    Ok(SteinSteinModel { params })
}

impl Dynamics for SteinSteinModel {
    fn dims(&self) -> ModelDims {
        ModelDims { d: 1, d_y: 1, d_w: 1 }
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.params.kappa * (self.params.sigma_bar - x[0]);
    }

    fn obs_loading(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.params.rho * self.params.alpha;
    }

    fn ind_loading(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = (1.0 - self.params.rho * self.params.rho).sqrt() * self.params.alpha;
    }

    fn obs_drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.params.discount_rate - 0.5 * x[0] * x[0];
    }

    fn obs_dispersion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }

    fn const_obs_dispersion(&self) -> Option<Vec<f64>> {
        None
    }

    fn discount_rate(&self) -> f64 {
        self.params.discount_rate
    }

    fn payoff(&self, t: f64, _x: &[f64], y: &[f64]) -> f64 {
        let raw = (self.params.strike - y[0].exp()).max(0.0);
        (-self.params.discount_rate * t).exp() * raw
    }
}

/// Model assembled from closures; observation dispersion must be constant.
/// Mostly useful for tests and ad-hoc experiments.
#[derive(Clone)]
pub struct CustomModel {
    pub dims: ModelDims,
    pub drift: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    pub obs_loading: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    pub ind_loading: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    pub obs_drift: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    pub obs_dispersion: Vec<f64>,
    pub discount_rate: f64,
    pub payoff: Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>,
}

impl CustomModel {
    /// Trivial d-dimensional model: zero drift, identity independent loading,
    /// zero observation drift, unit observation noise, zero payoff.
    pub fn trivial(d: usize) -> Self {
        CustomModel {
            dims: ModelDims { d, d_y: d, d_w: d },
            drift: Arc::new(|_, out| out.fill(0.0)),
            obs_loading: Arc::new(|_, out| out.fill(0.0)),
            ind_loading: Arc::new(move |_, out| {
                out.fill(0.0);
                for i in 0..d {
                    out[i * d + i] = 1.0;
                }
            }),
            obs_drift: Arc::new(|_, out| out.fill(0.0)),
            obs_dispersion: vec![1.0; d],
            discount_rate: 0.0,
            payoff: Arc::new(|_, _, _| 0.0),
        }
    }
}

impl Dynamics for CustomModel {
    fn dims(&self) -> ModelDims {
        self.dims
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    fn obs_loading(&self, x: &[f64], out: &mut [f64]) {
        (self.obs_loading)(x, out)
    }

    fn ind_loading(&self, x: &[f64], out: &mut [f64]) {
        (self.ind_loading)(x, out)
    }

    fn obs_drift(&self, x: &[f64], out: &mut [f64]) {
        (self.obs_drift)(x, out)
    }

    fn obs_dispersion(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.obs_dispersion);
    }

    fn const_obs_dispersion(&self) -> Option<Vec<f64>> {
        Some(self.obs_dispersion.clone())
    }

    fn discount_rate(&self) -> f64 {
        self.discount_rate
    }

    fn payoff(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        (self.payoff)(t, x, y)
    }
}

/// Parameters of the worked linear-Gaussian example.
pub fn linear_gaussian_example_params() -> LinearGaussianParams {
    LinearGaussianParams {
        kappa: 2.0,
        mean_level: 0.05,
        sigma_x: 0.3,
        sigma_y: 0.1,
        rho: 0.6,
        discount_rate: 0.1,
        c1: 1.0,
        c2: 2.0,
    }
}

/// Parameters of the worked Stein–Stein example; the price starts at 110, so
/// the log-price starts at ln(110).
pub fn stein_stein_example_params() -> SteinSteinParams {
    SteinSteinParams {
        kappa: 1.0,
        sigma_bar: 0.15,
        alpha: 0.1,
        rho: 0.0,
        discount_rate: 0.05,
        strike: 100.0,
    }
}
