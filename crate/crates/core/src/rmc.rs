//! Regression Monte Carlo backward induction on filter/observation states.
//!
//! The forward pass stores, per path and exercise date, a feature vector and
//! the immediate (discounted, unnormalized-filter) reward G. The backward
//! pass regresses realized future cashflows on the features to get a
//! continuation-value surrogate q_hat per date, stopping where
//! q_hat <= G (ties stop). The Tsitsiklis–van Roy variant regresses carried
//! values max(G, q_hat) instead of cashflows.
//!
//! Features may be evaluated on a particle cloud or on a Kalman state; the
//! European feature uses the closed Gaussian transition of the
//! linear-Gaussian model (Gauss–Hermite quadrature) or a nested Monte Carlo
//! fallback for generic models.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kalman::{conditional_payoff, KalmanState};
use crate::model::{Dynamics, LinearGaussianParams, StepScratch};
use crate::num::{expected_positive_part, mean_and_se, phi1};
use crate::pfilter::ParticleCloud;
use crate::quad::GaussHermite;
use crate::rng::{standard_normal, SeedTree, StreamKind};

// ---------------------------------------------------------------------------
// Basis
// ---------------------------------------------------------------------------

/// One regression feature on the hyperstate (t, filter, y).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    /// Constant 1.
    Const,
    /// y^k of the (scalar) observation.
    ObsPow(u32),
    /// Unnormalized filter moment rho_t(x^k).
    RhoMoment(u32),
    /// Normalized filter moment pi_t(x^k).
    PiMoment(u32),
    /// Unnormalized immediate reward rho_t(g(t, ., y)).
    RhoPayoff,
    /// Normalized immediate reward pi_t(g(t, ., y)).
    PiPayoff,
    /// Unnormalized European value rho_t(EUR(t, ., y)).
    RhoEuropean,
}

impl Feature {
    pub fn name(&self) -> String {
        match self {
            Feature::Const => "1".into(),
            Feature::ObsPow(1) => "y".into(),
            Feature::ObsPow(k) => format!("y^{k}"),
            Feature::RhoMoment(1) => "rho_x".into(),
            Feature::RhoMoment(k) => format!("rho_x^{k}"),
            Feature::PiMoment(1) => "pi_x".into(),
            Feature::PiMoment(k) => format!("pi_x^{k}"),
            Feature::RhoPayoff => "rho_g".into(),
            Feature::PiPayoff => "pi_g".into(),
            Feature::RhoEuropean => "rho_eur".into(),
        }
    }
}

/// Ordered feature set; the first feature is always the constant.
#[derive(Debug, Clone)]
pub struct BasisSet {
    features: Vec<Feature>,
}

impl BasisSet {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.first() != Some(&Feature::Const) {
            return Err(Error::config("the first basis feature must be the constant 1"));
        }
        Ok(BasisSet { features })
    }

    /// {1, y, y^2, rho x, rho g, rho EUR} for the linear-Gaussian example.
    pub fn linear_gaussian() -> Self {
        BasisSet {
            features: vec![
                Feature::Const,
                Feature::ObsPow(1),
                Feature::ObsPow(2),
                Feature::RhoMoment(1),
                Feature::RhoPayoff,
                Feature::RhoEuropean,
            ],
        }
    }

    /// {1, y, y^2, pi g, pi x, pi x^2} for the stochastic-volatility example:
    /// polynomial-plus-payoff in the observable plus the first two filter
    /// moments of the volatility state.
    pub fn stein_stein() -> Self {
        BasisSet {
            features: vec![
                Feature::Const,
                Feature::ObsPow(1),
                Feature::ObsPow(2),
                Feature::PiPayoff,
                Feature::PiMoment(1),
                Feature::PiMoment(2),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name()).collect()
    }
}

/// Filter state a feature set can be evaluated on.
#[derive(Clone, Copy)]
pub enum FilterRef<'a> {
    Cloud(&'a ParticleCloud),
    Kalman(&'a KalmanState),
}

/// Everything feature evaluation may need besides the state itself.
pub struct EvalContext<'a> {
    pub model: &'a dyn Dynamics,
    pub lg_params: Option<&'a LinearGaussianParams>,
    pub european: Option<&'a PreparedEuropean>,
}

/// Evaluates the basis at (t, state, y) into `out` (length = basis length).
pub fn evaluate_basis_into(
    basis: &BasisSet,
    t: f64,
    state: FilterRef<'_>,
    y: &[f64],
    ctx: &EvalContext<'_>,
    out: &mut [f64],
) -> Result<()> {
    assert_eq!(out.len(), basis.len());
    for (slot, feature) in out.iter_mut().zip(basis.features()) {
        let value = match *feature {
            Feature::Const => 1.0,
            Feature::ObsPow(k) => y[0].powi(k as i32),
            Feature::RhoMoment(k) => match state {
                FilterRef::Cloud(c) => c.estimate_rho(|x| x[0].powi(k as i32)),
                FilterRef::Kalman(ks) => kalman_moment(ks, k)?,
            },
            Feature::PiMoment(k) => match state {
                FilterRef::Cloud(c) => c.estimate_pi(|x| x[0].powi(k as i32)),
                FilterRef::Kalman(ks) => kalman_moment(ks, k)?,
            },
            Feature::RhoPayoff => match state {
                FilterRef::Cloud(c) => c.estimate_rho(|x| ctx.model.payoff(t, x, y)),
                FilterRef::Kalman(ks) => kalman_payoff(ks, t, y, ctx)?,
            },
            Feature::PiPayoff => match state {
                FilterRef::Cloud(c) => c.estimate_pi(|x| ctx.model.payoff(t, x, y)),
                FilterRef::Kalman(ks) => kalman_payoff(ks, t, y, ctx)?,
            },
            Feature::RhoEuropean => {
                let prep = ctx.european.ok_or_else(|| {
                    Error::config("European feature requested without a prepared valuer")
                })?;
                match state {
                    FilterRef::Cloud(c) => c.estimate_rho(|x| prep.value_point(x, y)),
                    FilterRef::Kalman(ks) => prep.value_gaussian(ks.m, ks.p, y[0])?,
                }
            }
        };
        if !value.is_finite() {
            return Err(Error::non_finite(format!("feature '{}'", feature.name())));
        }
        *slot = value;
    }
    Ok(())
}

/// Convenience wrapper returning a fresh vector.
pub fn evaluate_basis(
    basis: &BasisSet,
    t: f64,
    state: FilterRef<'_>,
    y: &[f64],
    ctx: &EvalContext<'_>,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; basis.len()];
    evaluate_basis_into(basis, t, state, y, ctx, &mut out)?;
    Ok(out)
}

fn kalman_moment(ks: &KalmanState, k: u32) -> Result<f64> {
    match k {
        1 => Ok(ks.m),
        2 => Ok(ks.m * ks.m + ks.p),
        _ => Err(Error::config(format!("moment x^{k} unsupported on Kalman states"))),
    }
}

fn kalman_payoff(ks: &KalmanState, t: f64, y: &[f64], ctx: &EvalContext<'_>) -> Result<f64> {
    let params = ctx
        .lg_params
        .ok_or_else(|| Error::config("payoff feature on a Kalman state needs model parameters"))?;
    Ok((-params.discount_rate * t).exp() * conditional_payoff(ks.m, ks.p, y[0], params)?)
}

// ---------------------------------------------------------------------------
// European feature
// ---------------------------------------------------------------------------

/// Computes EUR(t, x, y) = E[e^{-r (T-t)} g(X_T, Y_T) | X_t = x, Y_t = y].
#[derive(Clone)]
pub enum EuropeanValuer {
    /// Closed Gaussian transition of the linear-Gaussian model, integrated by
    /// Gauss–Hermite quadrature.
    LinearGaussian { params: LinearGaussianParams, horizon: f64, quad: Arc<GaussHermite> },
    /// Nested Monte Carlo for generic models.
    NestedMc {
        model: Arc<dyn Dynamics>,
        horizon: f64,
        max_step: f64,
        inner_paths: usize,
        seed: u64,
    },
}

impl EuropeanValuer {
    pub fn linear_gaussian(
        params: LinearGaussianParams,
        horizon: f64,
        quad_order: usize,
    ) -> Result<Self> {
        params.validate()?;
        Ok(EuropeanValuer::LinearGaussian {
            params,
            horizon,
            quad: Arc::new(GaussHermite::new(quad_order)?),
        })
    }

    pub fn nested_mc(
        model: Arc<dyn Dynamics>,
        horizon: f64,
        max_step: f64,
        inner_paths: usize,
        seed: u64,
    ) -> Self {
        EuropeanValuer::NestedMc { model, horizon, max_step, inner_paths, seed }
    }

    /// Precomputes the date-dependent transition constants.
    pub fn prepare(&self, t: f64) -> Result<PreparedEuropean> {
        match self {
            EuropeanValuer::LinearGaussian { params, horizon, quad } => {
                if t > *horizon + 1e-12 {
                    return Err(Error::domain(format!("date {t} beyond horizon {horizon}")));
                }
                let s = (*horizon - t).max(0.0);
                Ok(PreparedEuropean::Lg(LgDate::new(params, s, quad.clone())))
            }
            EuropeanValuer::NestedMc { model, horizon, max_step, inner_paths, seed } => {
                if t > *horizon + 1e-12 {
                    return Err(Error::domain(format!("date {t} beyond horizon {horizon}")));
                }
                Ok(PreparedEuropean::Mc {
                    model: model.clone(),
                    t,
                    horizon: *horizon,
                    max_step: *max_step,
                    inner_paths: *inner_paths,
                    seed: *seed,
                })
            }
        }
    }

    /// EUR(t, x, y); prefer `prepare` + `value_point` inside per-date loops.
    pub fn value(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.prepare(t)?.value_point(x, y))
    }
}

/// The transition constants of one date, ready for repeated evaluation.
pub enum PreparedEuropean {
    Lg(LgDate),
    Mc {
        model: Arc<dyn Dynamics>,
        t: f64,
        horizon: f64,
        max_step: f64,
        inner_paths: usize,
        seed: u64,
    },
}

impl PreparedEuropean {
    /// EUR at a point state X_t = x.
    pub fn value_point(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            PreparedEuropean::Lg(date) => date.value_gaussian(x[0], 0.0, y[0]),
            PreparedEuropean::Mc { model, t, horizon, max_step, inner_paths, seed } => {
                nested_mc_value(model.as_ref(), *t, x, y, *horizon, *max_step, *inner_paths, *seed)
            }
        }
    }

    /// EUR averaged over a Gaussian prior X_t ~ N(m, p); linear-Gaussian only.
    pub fn value_gaussian(&self, m: f64, p: f64, y: f64) -> Result<f64> {
        match self {
            PreparedEuropean::Lg(date) => Ok(date.value_gaussian(m, p, y)),
            PreparedEuropean::Mc { .. } => Err(Error::config(
                "Gaussian-prior European values require the linear-Gaussian valuer",
            )),
        }
    }
}

/// Spec-level entry point: EUR(t, x, y) for a single state.
pub fn european_feature(valuer: &EuropeanValuer, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    valuer.value(t, x, y)
}

/// Date constants of the linear-Gaussian transition over the remaining
/// horizon s: with B the Brownian motion shared between X and Y,
///
/// ```text
/// X_{t+s} = e^{-kappa s} X_t + sigma_x int e^{-kappa (s-v)} dB_v
/// Y_{t+s} = y - a s + int X dv + sigma_y (W_{t+s} - W_t)
/// ```
///
/// so (X_{t+s}, Y_{t+s}) is jointly Gaussian given (X_t, Y_t) and the payoff
/// expectation reduces to a 1-D Gaussian quadrature over X_{t+s} with the
/// conditional Y-distribution handled in closed form.
pub struct LgDate {
    s: f64,
    discount: f64,
    e1: f64,
    phi: f64,
    v_x0: f64,
    v_i0: f64,
    c_xi0: f64,
    c_xw: f64,
    c_iw: f64,
    a: f64,
    sigma_y: f64,
    c1: f64,
    c2: f64,
    quad: Arc<GaussHermite>,
}

impl LgDate {
    fn new(params: &LinearGaussianParams, s: f64, quad: Arc<GaussHermite>) -> Self {
        let k = params.kappa;
        let sx2 = params.sigma_x * params.sigma_x;
        let e1 = (-k * s).exp();
        let phi = phi1(k, s);
        let v_x0 = sx2 * phi1(2.0 * k, s);
        // J2 = int_0^s ((1 - e^{-k w}) / k)^2 dw, J1 = int e^{-kw}(1-e^{-kw})/k dw,
        // J3 = int (1 - e^{-kw})/k dw; series near k = 0
        let (j1, j2, j3) = if k * s < 1e-6 {
            let s2 = s * s;
            let s3 = s2 * s;
            (s2 / 2.0 - k * s3 / 2.0, s3 / 3.0 - k * s2 * s2 / 4.0, s2 / 2.0 - k * s3 / 6.0)
        } else {
            (
                (phi - phi1(2.0 * k, s)) / k,
                (s - 2.0 * phi + phi1(2.0 * k, s)) / (k * k),
                (s - phi) / k,
            )
        };
        LgDate {
            s,
            discount: (-params.discount_rate * s).exp(),
            e1,
            phi,
            v_x0,
            v_i0: sx2 * j2,
            c_xi0: sx2 * j1,
            c_xw: params.rho * params.sigma_x * phi,
            c_iw: params.rho * params.sigma_x * j3,
            a: params.mean_level,
            sigma_y: params.sigma_y,
            c1: params.c1,
            c2: params.c2,
            quad,
        }
    }

    /// e^{-r s} E[(Y_T (c1 + X_T) - c2)_+] for X_t ~ N(m, p), Y_t = y.
    pub fn value_gaussian(&self, m: f64, p: f64, y: f64) -> f64 {
        let mu_x = self.e1 * m;
        let v_x = self.e1 * self.e1 * p + self.v_x0;
        let mu_y = y - self.a * self.s + self.phi * m;
        let v_i = self.phi * self.phi * p + self.v_i0;
        let c_xi = self.e1 * self.phi * p + self.c_xi0;
        let v_y =
            (v_i + self.sigma_y * self.sigma_y * self.s + 2.0 * self.sigma_y * self.c_iw).max(0.0);
        let c_xy = c_xi + self.sigma_y * self.c_xw;
        if v_x <= 1e-300 {
            // X_T deterministic
            let lin = self.c1 + mu_x;
            return self.discount
                * expected_positive_part(lin * mu_y - self.c2, lin.abs() * v_y.sqrt());
        }
        let beta = c_xy / v_x;
        let sd_cond = (v_y - c_xy * c_xy / v_x).max(0.0).sqrt();
        let value = self.quad.gaussian_expectation(mu_x, v_x.sqrt(), |xi| {
            let lin = self.c1 + xi;
            let my = mu_y + beta * (xi - mu_x);
            expected_positive_part(lin * my - self.c2, lin.abs() * sd_cond)
        });
        self.discount * value
    }
}

fn mix_bits(vals: &[u64]) -> u64 {
    let mut acc = 0x9e37_79b9_7f4a_7c15u64;
    for &v in vals {
        acc ^= v;
        acc = acc.rotate_left(23).wrapping_mul(0xff51_afd7_ed55_8ccd);
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn nested_mc_value(
    model: &dyn Dynamics,
    t: f64,
    x: &[f64],
    y: &[f64],
    horizon: f64,
    max_step: f64,
    inner_paths: usize,
    seed: u64,
) -> f64 {
    let dims = model.dims();
    let span = horizon - t;
    if span <= 0.0 {
        return model.payoff(horizon, x, y) * (model.discount_rate() * t).exp();
    }
    let n_steps = (span / max_step).ceil().max(1.0) as usize;
    let h = span / n_steps as f64;
    let sqrt_h = h.sqrt();
    let stream = mix_bits(&[t.to_bits(), x[0].to_bits(), y[0].to_bits()]);
    let mut rng = SeedTree::new(seed).stream(StreamKind::Nested, stream);
    let mut scratch = StepScratch::new(dims);
    let mut du = vec![0.0; dims.d_y];
    let mut dw = vec![0.0; dims.d_w];
    let mut xs = vec![0.0; dims.d];
    let mut ys = vec![0.0; dims.d_y];
    let mut acc = 0.0;
    for _ in 0..inner_paths {
        xs.copy_from_slice(x);
        ys.copy_from_slice(y);
        for _ in 0..n_steps {
            for v in du.iter_mut() {
                *v = sqrt_h * standard_normal(&mut rng);
            }
            for v in dw.iter_mut() {
                *v = sqrt_h * standard_normal(&mut rng);
            }
            model.obs_drift(&xs, &mut scratch.h);
            model.obs_dispersion(&xs, &mut scratch.disp);
            for k in 0..dims.d_y {
                ys[k] += scratch.h[k] * h + scratch.disp[k] * du[k];
            }
            crate::model::euler_step(
                model,
                &mut xs,
                crate::model::DriftMode::Physical,
                &du,
                &dw,
                h,
                &mut scratch,
            )
            .expect("nested simulation diverged");
        }
        acc += model.payoff(horizon, &xs, &ys);
    }
    acc / inner_paths as f64 * (model.discount_rate() * t).exp()
}

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

/// Result of one regression; dropped columns carry zero coefficients.
#[derive(Debug, Clone)]
pub struct LsqFit {
    pub coefficients: Vec<f64>,
    pub dropped: Vec<usize>,
    pub residual_norm: f64,
    pub condition_estimate: f64,
}

/// Minimizes ||X beta - y||_2 by modified Gram–Schmidt QR with
/// reorthogonalization. Columns whose residual after projection falls below
/// a relative tolerance are dropped (rank deficiency) and reported.
///
/// `features` is n x r row-major.
pub fn least_squares_fit(features: &[f64], n: usize, r: usize, targets: &[f64]) -> Result<LsqFit> {
    if n < r {
        return Err(Error::config(format!("need at least {r} samples for {r} features, got {n}")));
    }
    assert_eq!(features.len(), n * r);
    assert_eq!(targets.len(), n);
    const TOL: f64 = 1e-10;

    let mut q_cols: Vec<Vec<f64>> = Vec::with_capacity(r);
    let mut kept: Vec<usize> = Vec::with_capacity(r);
    let mut r_upper: Vec<Vec<f64>> = Vec::with_capacity(r); // column j of R over kept rows
    let mut r_diag: Vec<f64> = Vec::with_capacity(r);
    let mut dropped = Vec::new();

    for j in 0..r {
        let mut v: Vec<f64> = (0..n).map(|i| features[i * r + j]).collect();
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut rj = vec![0.0; kept.len()];
        for _ in 0..2 {
            for (qi, q) in q_cols.iter().enumerate() {
                let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                rj[qi] += dot;
                for (vk, qk) in v.iter_mut().zip(q) {
                    *vk -= dot * qk;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= TOL * norm0 {
            dropped.push(j);
        } else {
            for x in v.iter_mut() {
                *x /= norm;
            }
            q_cols.push(v);
            kept.push(j);
            r_upper.push(rj);
            r_diag.push(norm);
        }
    }

    let k = kept.len();
    let mut coefficients = vec![0.0; r];
    let mut residual = targets.to_vec();
    if k > 0 {
        let d: Vec<f64> = q_cols
            .iter()
            .map(|q| q.iter().zip(targets).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        // back-substitution on R (r_upper[l][i] is entry (i, l) for i < l)
        let mut beta = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = d[i];
            for l in (i + 1)..k {
                acc -= r_upper[l][i] * beta[l];
            }
            beta[i] = acc / r_diag[i];
        }
        for (slot, &j) in kept.iter().enumerate() {
            coefficients[j] = beta[slot];
        }
        for (q, &di) in q_cols.iter().zip(&d) {
            for (res, qv) in residual.iter_mut().zip(q) {
                *res -= di * qv;
            }
        }
    }
    let residual_norm = residual.iter().map(|x| x * x).sum::<f64>().sqrt();
    let condition_estimate = if k > 0 {
        let max = r_diag.iter().cloned().fold(f64::MIN, f64::max);
        let min = r_diag.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    } else {
        1.0
    };
    Ok(LsqFit { coefficients, dropped, residual_norm, condition_estimate })
}

/// Worst |<residual, column>| / (||residual|| ||column||) over all columns;
/// zero when the residual vanishes.
pub fn residual_orthogonality(features: &[f64], n: usize, r: usize, residual: &[f64]) -> f64 {
    let res_norm = residual.iter().map(|x| x * x).sum::<f64>().sqrt();
    if res_norm == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for j in 0..r {
        let mut dot = 0.0;
        let mut norm = 0.0;
        for i in 0..n {
            let c = features[i * r + j];
            dot += c * residual[i];
            norm += c * c;
        }
        let norm = norm.sqrt();
        if norm > 0.0 {
            worst = worst.max(dot.abs() / (norm * res_norm));
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Ensembles and backward induction
// ---------------------------------------------------------------------------

/// Configuration echoed into value estimates.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleMeta {
    pub n_particles: usize,
    pub seed: u64,
    pub dt_exercise: f64,
    pub delta_obs: f64,
}

/// Per-path, per-date features and immediate rewards from a forward pass.
/// `features` is laid out [date][path][feature]; `payoffs` and `proxies`
/// are [date][path]. `proxies` carries the conditional-mean estimate
/// pi_t(x) for stopping-region exports.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub n_dates: usize,
    pub r_basis: usize,
    pub times: Vec<f64>,
    pub basis_names: Vec<String>,
    pub features: Vec<f64>,
    pub payoffs: Vec<f64>,
    pub proxies: Vec<f64>,
    pub meta: EnsembleMeta,
}

impl PathEnsemble {
    pub fn features_at(&self, date: usize) -> &[f64] {
        let stride = self.n_paths * self.r_basis;
        &self.features[date * stride..(date + 1) * stride]
    }

    pub fn feature_row(&self, date: usize, path: usize) -> &[f64] {
        let stride = self.n_paths * self.r_basis;
        let start = date * stride + path * self.r_basis;
        &self.features[start..start + self.r_basis]
    }

    pub fn payoffs_at(&self, date: usize) -> &[f64] {
        &self.payoffs[date * self.n_paths..(date + 1) * self.n_paths]
    }

    pub fn proxies_at(&self, date: usize) -> &[f64] {
        &self.proxies[date * self.n_paths..(date + 1) * self.n_paths]
    }
}

/// Coefficients and diagnostics per regression date, plus the date-0 scalars.
#[derive(Debug, Clone, Serialize)]
pub struct RegressionFit {
    /// Exercise-date indices with a regression (1..=M-1), ascending.
    pub date_indices: Vec<usize>,
    pub times: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    pub residual_norms: Vec<f64>,
    pub condition_estimates: Vec<f64>,
    pub dropped: Vec<Vec<usize>>,
    /// Worst residual/feature correlation across dates.
    pub max_orthogonality: f64,
    pub basis_names: Vec<String>,
    /// Immediate reward at time zero (common to all paths, Monte Carlo mean).
    pub g0: f64,
    /// Continuation value at time zero.
    pub q0: f64,
    pub n_dates: usize,
}

impl RegressionFit {
    /// Per-date coefficients and residual norms as CSV.
    pub fn write_diagnostics_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "date_index,time")?;
        for name in &self.basis_names {
            write!(w, ",coef_{name}")?;
        }
        writeln!(w, ",residual_norm,condition_estimate,dropped")?;
        for (i, &di) in self.date_indices.iter().enumerate() {
            write!(w, "{},{}", di, self.times[i])?;
            for c in &self.coefficients[i] {
                write!(w, ",{c}")?;
            }
            let dropped = self.dropped[i]
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(";");
            writeln!(
                w,
                ",{},{},{}",
                self.residual_norms[i], self.condition_estimates[i], dropped
            )?;
        }
        Ok(())
    }
}

/// Realized cashflow and stopping date per path after backward induction.
#[derive(Debug, Clone)]
pub struct CashflowState {
    pub cashflows: Vec<f64>,
    pub stop_dates: Vec<usize>,
}

impl CashflowState {
    /// Every cashflow must equal the stored immediate reward at its stopping
    /// date, recomputed from the ensemble.
    pub fn check_consistency(&self, paths: &PathEnsemble) -> Result<()> {
        for k in 0..paths.n_paths {
            let expected = paths.payoffs_at(self.stop_dates[k])[k];
            if self.cashflows[k] != expected {
                return Err(Error::domain(format!(
                    "cashflow of path {k} ({}) differs from reward at its stopping date ({expected})",
                    self.cashflows[k]
                )));
            }
        }
        Ok(())
    }
}

/// Monte Carlo value with standard error and configuration echo.
#[derive(Debug, Clone, Serialize)]
pub struct ValueEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Immediate reward at time zero.
    pub immediate_value: f64,
    /// Estimated continuation value at time zero.
    pub continuation_value: f64,
    pub n_paths: usize,
    pub n_particles: usize,
    pub dt_exercise: f64,
    pub delta_obs: f64,
    pub seed: u64,
    pub basis: Vec<String>,
    pub algorithm: String,
}

fn make_estimate(
    paths: &PathEnsemble,
    cash: &[f64],
    g0: f64,
    q0: f64,
    algorithm: &str,
) -> ValueEstimate {
    let (mean, se) = mean_and_se(cash);
    ValueEstimate {
        value: mean,
        std_error: se,
        immediate_value: g0,
        continuation_value: q0,
        n_paths: paths.n_paths,
        n_particles: paths.meta.n_particles,
        dt_exercise: paths.meta.dt_exercise,
        delta_obs: paths.meta.delta_obs,
        seed: paths.meta.seed,
        basis: paths.basis_names.clone(),
        algorithm: algorithm.into(),
    }
}

/// Longstaff–Schwartz backward induction over realized cashflows.
///
/// From the terminal date down to the first interior date, regresses the
/// running future cashflow on the current features and stops wherever
/// q_hat <= G. At time zero no regression is run: the value is
/// max(G_0, mean future cashflow) with G_0 common to all paths.
pub fn backward_induction(
    paths: &PathEnsemble,
    basis: &BasisSet,
) -> Result<(RegressionFit, CashflowState, ValueEstimate)> {
    ensure_basis_matches(paths, basis)?;
    let last = paths.n_dates - 1;
    let mut cash = paths.payoffs_at(last).to_vec();
    let mut stop = vec![last; paths.n_paths];

    let mut fit = empty_fit(paths);
    for m in (1..last).rev() {
        let block = paths.features_at(m);
        let lsq = least_squares_fit(block, paths.n_paths, paths.r_basis, &cash)?;
        let rewards = paths.payoffs_at(m);
        // residual orthogonality before the stopping update
        let fitted: Vec<f64> = (0..paths.n_paths)
            .map(|k| dot(paths.feature_row(m, k), &lsq.coefficients))
            .collect();
        let residual: Vec<f64> = cash.iter().zip(&fitted).map(|(c, f)| c - f).collect();
        let ortho = residual_orthogonality(block, paths.n_paths, paths.r_basis, &residual);
        fit.max_orthogonality = fit.max_orthogonality.max(ortho);

        for k in 0..paths.n_paths {
            if fitted[k] <= rewards[k] {
                cash[k] = rewards[k];
                stop[k] = m;
            }
        }
        fit.date_indices.push(m);
        fit.times.push(paths.times[m]);
        fit.coefficients.push(lsq.coefficients);
        fit.residual_norms.push(lsq.residual_norm);
        fit.condition_estimates.push(lsq.condition_estimate);
        fit.dropped.push(lsq.dropped);
    }
    reverse_fit(&mut fit);

    let g0 = mean(paths.payoffs_at(0));
    let q0 = mean(&cash);
    if g0 >= q0 {
        let rewards = paths.payoffs_at(0);
        for k in 0..paths.n_paths {
            cash[k] = rewards[k];
            stop[k] = 0;
        }
    }
    fit.g0 = g0;
    fit.q0 = q0;
    let estimate = make_estimate(paths, &cash, g0, q0, "ls");
    Ok((fit, CashflowState { cashflows: cash, stop_dates: stop }, estimate))
}

/// Tsitsiklis–van Roy variant: regresses carried values and replaces them by
/// max(G, q_hat) each date instead of tracking cashflows.
pub fn tvr_backward_induction(
    paths: &PathEnsemble,
    basis: &BasisSet,
) -> Result<(RegressionFit, ValueEstimate)> {
    ensure_basis_matches(paths, basis)?;
    let last = paths.n_dates - 1;
    let mut values = paths.payoffs_at(last).to_vec();

    let mut fit = empty_fit(paths);
    for m in (1..last).rev() {
        let block = paths.features_at(m);
        let lsq = least_squares_fit(block, paths.n_paths, paths.r_basis, &values)?;
        let rewards = paths.payoffs_at(m);
        for k in 0..paths.n_paths {
            let qhat = dot(paths.feature_row(m, k), &lsq.coefficients);
            values[k] = rewards[k].max(qhat);
        }
        fit.date_indices.push(m);
        fit.times.push(paths.times[m]);
        fit.coefficients.push(lsq.coefficients);
        fit.residual_norms.push(lsq.residual_norm);
        fit.condition_estimates.push(lsq.condition_estimate);
        fit.dropped.push(lsq.dropped);
    }
    reverse_fit(&mut fit);

    let g0 = mean(paths.payoffs_at(0));
    let q0 = mean(&values);
    if g0 >= q0 {
        let rewards = paths.payoffs_at(0);
        values.copy_from_slice(rewards);
    }
    fit.g0 = g0;
    fit.q0 = q0;
    let estimate = make_estimate(paths, &values, g0, q0, "tvr");
    Ok((fit, estimate))
}

fn ensure_basis_matches(paths: &PathEnsemble, basis: &BasisSet) -> Result<()> {
    if basis.len() != paths.r_basis {
        return Err(Error::config(format!(
            "basis has {} features but the ensemble stores {}",
            basis.len(),
            paths.r_basis
        )));
    }
    Ok(())
}

fn empty_fit(paths: &PathEnsemble) -> RegressionFit {
    RegressionFit {
        date_indices: Vec::new(),
        times: Vec::new(),
        coefficients: Vec::new(),
        residual_norms: Vec::new(),
        condition_estimates: Vec::new(),
        dropped: Vec::new(),
        max_orthogonality: 0.0,
        basis_names: paths.basis_names.clone(),
        g0: 0.0,
        q0: 0.0,
        n_dates: paths.n_dates,
    }
}

fn reverse_fit(fit: &mut RegressionFit) {
    fit.date_indices.reverse();
    fit.times.reverse();
    fit.coefficients.reverse();
    fit.residual_norms.reverse();
    fit.condition_estimates.reverse();
    fit.dropped.reverse();
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

// ---------------------------------------------------------------------------
// Stopping policy
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Stop,
    Continue,
}

/// Threshold classifier extracted from a regression fit: stop where the
/// fitted continuation value does not exceed the immediate reward.
#[derive(Debug, Clone)]
pub struct StoppingPolicy {
    fit: RegressionFit,
}

pub fn extract_policy(fit: &RegressionFit) -> StoppingPolicy {
    StoppingPolicy { fit: fit.clone() }
}

impl StoppingPolicy {
    /// Fitted continuation value at an interior date; `None` at 0 and T.
    pub fn continuation(&self, date: usize, features: &[f64]) -> Option<f64> {
        let pos = self.fit.date_indices.iter().position(|&d| d == date)?;
        Some(dot(features, &self.fit.coefficients[pos]))
    }

    pub fn decide(&self, date: usize, features: &[f64], immediate: f64) -> Decision {
        if date + 1 >= self.fit.n_dates {
            return Decision::Stop;
        }
        if date == 0 {
            return if self.fit.q0 <= self.fit.g0 { Decision::Stop } else { Decision::Continue };
        }
        match self.continuation(date, features) {
            Some(q) if q > immediate => Decision::Continue,
            _ => Decision::Stop,
        }
    }
}

/// Out-of-sample valuation: applies the policy forward on a fresh ensemble.
pub fn evaluate_policy(policy: &StoppingPolicy, paths: &PathEnsemble) -> Result<ValueEstimate> {
    if policy.fit.n_dates != paths.n_dates {
        return Err(Error::config("policy and ensemble disagree on the number of dates"));
    }
    let last = paths.n_dates - 1;
    let mut cash = vec![0.0; paths.n_paths];
    for k in 0..paths.n_paths {
        let mut chosen = last;
        for m in 0..last {
            let g = paths.payoffs_at(m)[k];
            if policy.decide(m, paths.feature_row(m, k), g) == Decision::Stop {
                chosen = m;
                break;
            }
        }
        cash[k] = paths.payoffs_at(chosen)[k];
    }
    let q0 = mean(&cash);
    let g0 = mean(paths.payoffs_at(0));
    Ok(make_estimate(paths, &cash, g0, q0, "ls-oos"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        linear_gaussian_example_params, linear_gaussian_model, InitialLaw,
    };
    use crate::pfilter::init_cloud;
    use crate::rng::{SeedTree, StreamKind};
    use rand::Rng;

    fn meta() -> EnsembleMeta {
        EnsembleMeta { n_particles: 1, seed: 0, dt_exercise: 0.5, delta_obs: 0.5 }
    }

    /// Synthetic ensemble from closures of (date, path).
    fn synthetic_ensemble(
        n_paths: usize,
        n_dates: usize,
        names: &[&str],
        feature: impl Fn(usize, usize, usize) -> f64,
        payoff: impl Fn(usize, usize) -> f64,
    ) -> PathEnsemble {
        let r = names.len();
        let mut features = vec![0.0; n_dates * n_paths * r];
        let mut payoffs = vec![0.0; n_dates * n_paths];
        for m in 0..n_dates {
            for k in 0..n_paths {
                for i in 0..r {
                    features[(m * n_paths + k) * r + i] = feature(m, k, i);
                }
                payoffs[m * n_paths + k] = payoff(m, k);
            }
        }
        PathEnsemble {
            n_paths,
            n_dates,
            r_basis: r,
            times: (0..n_dates).map(|m| m as f64 * 0.5).collect(),
            basis_names: names.iter().map(|s| s.to_string()).collect(),
            features,
            payoffs,
            proxies: vec![0.0; n_dates * n_paths],
            meta: meta(),
        }
    }

    #[test]
    fn basis_requires_leading_constant() {
        assert!(BasisSet::new(vec![Feature::ObsPow(1)]).is_err());
        assert!(BasisSet::new(vec![Feature::Const, Feature::ObsPow(1)]).is_ok());
        assert_eq!(BasisSet::linear_gaussian().len(), 6);
        assert_eq!(BasisSet::stein_stein().len(), 6);
    }

    #[test]
    fn basis_evaluation_on_fixture_cloud() {
        let params = linear_gaussian_example_params();
        let model = linear_gaussian_model(params).unwrap();
        // weights (3, 1) at locations (1, 0)
        let cloud =
            crate::pfilter::ParticleCloud::from_weighted(1, vec![1.0, 0.0], &[3.0, 1.0], 0.0)
                .unwrap();
        let basis = BasisSet::new(vec![
            Feature::Const,
            Feature::RhoMoment(1),
            Feature::PiMoment(1),
            Feature::RhoPayoff,
        ])
        .unwrap();
        let ctx = EvalContext { model: &model, lg_params: Some(&params), european: None };
        let out =
            evaluate_basis(&basis, 0.0, FilterRef::Cloud(&cloud), &[2.0], &ctx).unwrap();
        assert_eq!(out[0], 1.0);
        assert!((out[1] - 1.5).abs() < 1e-14); // (1/2)(3*1 + 1*0)
        assert!((out[2] - 0.75).abs() < 1e-14);
        // rho g at t=0: mean over particles of (y(1+x)-2)_+ weighted:
        // x=1 -> (2*2-2)=2, x=0 -> 0; rho = (3*2 + 0)/2 = 3
        assert!((out[3] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn basis_on_kalman_state_consistent_with_gaussian_cloud() {
        let params = linear_gaussian_example_params();
        let model = linear_gaussian_model(params).unwrap();
        let valuer = EuropeanValuer::linear_gaussian(params, 1.0, 24).unwrap();
        let prep = valuer.prepare(0.4).unwrap();
        let basis = BasisSet::linear_gaussian();
        let ks = KalmanState { m: 0.1, p: 0.004, t: 0.4 };
        let ctx = EvalContext { model: &model, lg_params: Some(&params), european: Some(&prep) };
        let out = evaluate_basis(&basis, 0.4, FilterRef::Kalman(&ks), &[2.1], &ctx).unwrap();
        assert_eq!(out[0], 1.0);
        assert!((out[1] - 2.1).abs() < 1e-15);
        assert!((out[2] - 4.41).abs() < 1e-12);
        assert!((out[3] - 0.1).abs() < 1e-15);
        let g = (-params.discount_rate * 0.4f64).exp()
            * conditional_payoff(0.1, 0.004, 2.1, &params).unwrap();
        assert!((out[4] - g).abs() < 1e-12);
        // the European feature of the Gaussian prior matches a big dirac cloud
        let n = 4000;
        let mut rng = SeedTree::new(9).stream(StreamKind::Scratch, 1);
        let cloud =
            init_cloud(n, &InitialLaw::Gaussian { mean: 0.1, std: 0.004f64.sqrt() }, &mut rng)
                .unwrap();
        let cloud_eur = cloud.estimate_rho(|x| prep.value_point(x, &[2.1]));
        assert!(
            (out[5] - cloud_eur).abs() < 0.01 * out[5].abs().max(1e-3),
            "gaussian {} vs cloud {}",
            out[5],
            cloud_eur
        );
    }

    #[test]
    fn european_terminal_is_exact_payoff() {
        let params = linear_gaussian_example_params();
        let valuer = EuropeanValuer::linear_gaussian(params, 1.0, 8).unwrap();
        let got = european_feature(&valuer, 1.0, &[0.2], &[2.0]).unwrap();
        assert!((got - 0.4).abs() < 1e-12);
        let got = european_feature(&valuer, 1.0, &[-0.4], &[2.0]).unwrap();
        assert!(got.abs() < 1e-12);
    }

    #[test]
    fn european_deterministic_flow() {
        let mut params = linear_gaussian_example_params();
        params.sigma_x = 1e-12;
        params.sigma_y = 1e-12;
        let valuer = EuropeanValuer::linear_gaussian(params, 1.0, 8).unwrap();
        let (t, x, y) = (0.3, 0.2, 2.0);
        let s: f64 = 0.7;
        let x_t = x * (-params.kappa * s).exp();
        let y_t = y - params.mean_level * s + x * phi1(params.kappa, s);
        let expected =
            (-params.discount_rate * s).exp() * (y_t * (params.c1 + x_t) - params.c2).max(0.0);
        let got = european_feature(&valuer, t, &[x], &[y]).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn european_rejects_low_order() {
        let params = linear_gaussian_example_params();
        assert!(EuropeanValuer::linear_gaussian(params, 1.0, 1).is_err());
    }

    #[test]
    fn european_quadrature_matches_nested_mc() {
        let params = linear_gaussian_example_params();
        let model = Arc::new(linear_gaussian_model(params).unwrap());
        let valuer = EuropeanValuer::linear_gaussian(params, 1.0, 12).unwrap();
        let mut rng = SeedTree::new(17).stream(StreamKind::Scratch, 0);
        for _ in 0..3 {
            let t = 0.05 * (1.0 + (18.0 * rng.random::<f64>()).floor());
            let x = -0.3 + 0.6 * rng.random::<f64>();
            let y = 1.2 + 1.6 * rng.random::<f64>();
            let inner = 100_000;
            let nested = EuropeanValuer::nested_mc(model.clone(), 1.0, 0.01, inner, 321);
            let mc = european_feature(&nested, t, &[x], &[y]).unwrap();
            let quad_val = european_feature(&valuer, t, &[x], &[y]).unwrap();
            // inner-standard-error bound, conservatively taken from the payoff scale
            let se = 0.5 / (inner as f64).sqrt();
            assert!(
                (quad_val - mc).abs() < 3.0 * se + 3e-3,
                "t={t} x={x} y={y}: quad {quad_val} vs nested {mc}"
            );
        }
    }

    #[test]
    fn lstsq_recovers_exact_linear_targets() {
        let n = 100;
        let r = 3;
        let mut features = vec![0.0; n * r];
        let mut targets = vec![0.0; n];
        for i in 0..n {
            let x = i as f64 / 10.0;
            features[i * r] = 1.0;
            features[i * r + 1] = x;
            features[i * r + 2] = x * x;
            targets[i] = 2.0 - 3.0 * x + 0.5 * x * x;
        }
        let fit = least_squares_fit(&features, n, r, &targets).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((fit.coefficients[1] + 3.0).abs() < 1e-10);
        assert!((fit.coefficients[2] - 0.5).abs() < 1e-10);
        assert!(fit.residual_norm < 1e-9);
        assert!(fit.dropped.is_empty());
    }

    #[test]
    fn lstsq_constant_feature_gives_mean() {
        let targets = vec![1.0, 2.0, 3.0, 6.0];
        let features = vec![1.0; 4];
        let fit = least_squares_fit(&features, 4, 1, &targets).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lstsq_drops_duplicate_column() {
        let n = 50;
        let r = 3;
        let mut features = vec![0.0; n * r];
        let mut targets = vec![0.0; n];
        let mut rng = SeedTree::new(5).stream(StreamKind::Scratch, 2);
        for i in 0..n {
            let x: f64 = rng.random();
            features[i * r] = 1.0;
            features[i * r + 1] = x;
            features[i * r + 2] = x; // duplicate
            targets[i] = 1.0 + 2.0 * x + 0.1 * rng.random::<f64>();
        }
        let fit = least_squares_fit(&features, n, r, &targets).unwrap();
        assert_eq!(fit.dropped, vec![2]);
        assert_eq!(fit.coefficients[2], 0.0);
        // fitted values agree with the two-column regression
        let two: Vec<f64> =
            (0..n).flat_map(|i| [features[i * r], features[i * r + 1]]).collect();
        let fit2 = least_squares_fit(&two, n, 2, &targets).unwrap();
        for i in 0..n {
            let a = fit.coefficients[0] + fit.coefficients[1] * features[i * r + 1];
            let b = fit2.coefficients[0] + fit2.coefficients[1] * features[i * r + 1];
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lstsq_zero_targets_allowed() {
        let features = vec![1.0, 0.5, 1.0, 1.5, 1.0, 2.5];
        let fit = least_squares_fit(&features, 3, 2, &vec![0.0; 3]).unwrap();
        assert!(fit.coefficients.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn lstsq_needs_enough_samples() {
        assert!(least_squares_fit(&[1.0, 2.0], 1, 2, &[1.0]).is_err());
    }

    #[test]
    fn lstsq_residual_orthogonal_to_features() {
        let mut rng = SeedTree::new(6).stream(StreamKind::Scratch, 3);
        let n = 500;
        let r = 4;
        let mut features = vec![0.0; n * r];
        let mut targets = vec![0.0; n];
        for i in 0..n {
            features[i * r] = 1.0;
            for j in 1..r {
                features[i * r + j] = rng.random::<f64>() * 3.0 - 1.0;
            }
            targets[i] = rng.random::<f64>();
        }
        let fit = least_squares_fit(&features, n, r, &targets).unwrap();
        let residual: Vec<f64> = (0..n)
            .map(|i| targets[i] - dot(&features[i * r..(i + 1) * r], &fit.coefficients))
            .collect();
        let worst = residual_orthogonality(&features, n, r, &residual);
        assert!(worst < 1e-10, "orthogonality {worst}");
    }

    #[test]
    fn backward_zero_payoff() {
        let paths = synthetic_ensemble(50, 5, &["1", "y"], |_, k, i| if i == 0 { 1.0 } else { k as f64 }, |_, _| 0.0);
        let basis =
            BasisSet::new(vec![Feature::Const, Feature::ObsPow(1)]).unwrap();
        let (_, cash, est) = backward_induction(&paths, &basis).unwrap();
        assert_eq!(est.value, 0.0);
        // ties stop: with q_hat = G = 0 everywhere the rule stops immediately
        assert!(cash.stop_dates.iter().all(|&s| s == 0));
        cash.check_consistency(&paths).unwrap();
    }

    #[test]
    fn backward_single_exercise_date() {
        // M = 1: value = max(G_0, mean of terminal payoffs)
        let term = |k: usize| (k % 7) as f64;
        let paths = synthetic_ensemble(
            70,
            2,
            &["1"],
            |_, _, _| 1.0,
            move |m, k| if m == 1 { term(k) } else { 0.5 },
        );
        let basis = BasisSet::new(vec![Feature::Const]).unwrap();
        let (fit, _, est) = backward_induction(&paths, &basis).unwrap();
        let term_mean = (0..70).map(term).sum::<f64>() / 70.0;
        assert!((est.value - term_mean.max(0.5)).abs() < 1e-12);
        assert!((fit.g0 - 0.5).abs() < 1e-12);
        assert!(fit.date_indices.is_empty());

        let (_, tvr) = tvr_backward_induction(&paths, &basis).unwrap();
        assert!((tvr.value - est.value).abs() < 1e-12);
    }

    #[test]
    fn backward_stops_when_immediate_dominates() {
        // payoff decreasing in date: optimal to stop at 0
        let paths =
            synthetic_ensemble(40, 4, &["1"], |_, _, _| 1.0, |m, _| 3.0 - m as f64);
        let basis = BasisSet::new(vec![Feature::Const]).unwrap();
        let (fit, cash, est) = backward_induction(&paths, &basis).unwrap();
        assert_eq!(est.value, 3.0);
        assert!(cash.stop_dates.iter().all(|&s| s == 0));
        assert!(fit.g0 > fit.q0);
        cash.check_consistency(&paths).unwrap();
    }

    #[test]
    fn tvr_zero_payoff() {
        let paths = synthetic_ensemble(30, 4, &["1"], |_, _, _| 1.0, |_, _| 0.0);
        let basis = BasisSet::new(vec![Feature::Const]).unwrap();
        let (_, est) = tvr_backward_induction(&paths, &basis).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn policy_extraction_and_decisions() {
        // payoff rises with the feature; training data splits stop/continue
        let n = 200;
        let paths = synthetic_ensemble(
            n,
            4,
            &["1", "y"],
            |_, k, i| if i == 0 { 1.0 } else { k as f64 / n as f64 },
            |m, k| {
                let x = k as f64 / n as f64;
                if m == 3 {
                    x
                } else {
                    x * (1.0 - 0.2 * m as f64)
                }
            },
        );
        let basis = BasisSet::new(vec![Feature::Const, Feature::ObsPow(1)]).unwrap();
        let (fit, cash, _) = backward_induction(&paths, &basis).unwrap();
        let policy = extract_policy(&fit);
        // terminal date always stops
        assert_eq!(policy.decide(3, paths.feature_row(3, 0), 5.0), Decision::Stop);
        // training decisions replay exactly at interior dates
        for k in 0..n {
            let s = cash.stop_dates[k];
            if s > 0 && s < 3 {
                assert_eq!(
                    policy.decide(s, paths.feature_row(s, k), paths.payoffs_at(s)[k]),
                    Decision::Stop
                );
            }
        }
        // out-of-sample value on the training set matches the in-sample mean
        let oos = evaluate_policy(&policy, &paths).unwrap();
        let (in_mean, _) = mean_and_se(&cash.cashflows);
        assert!((oos.value - in_mean).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_csv_shape() {
        let paths = synthetic_ensemble(30, 4, &["1"], |_, _, _| 1.0, |m, k| (m * k % 3) as f64);
        let basis = BasisSet::new(vec![Feature::Const]).unwrap();
        let (fit, _, _) = backward_induction(&paths, &basis).unwrap();
        let mut buf = Vec::new();
        fit.write_diagnostics_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("date_index,time,coef_1,residual_norm"));
        assert_eq!(s.lines().count(), 1 + fit.date_indices.len());
    }
}
