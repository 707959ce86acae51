//! Branching particle approximation of the conditional law of the state.
//!
//! A cloud of n weighted particles (v_j, a_j) tracks both the normalized and
//! the unnormalized conditional distribution. One observation interval runs
//! weight -> mutate -> branch:
//!
//! * weights multiply by exp(h(v_j) dY - h(v_j)^2 delta / 2) in unit-noise
//!   form (discrete observations), or are set from a kernel comparison of
//!   per-particle candidate observations against the true one;
//! * mutation drives every particle by the observed increment plus private
//!   noise (reference measure) or by fully private noise (candidate mode);
//! * branching replaces the cloud by offspring counts o_j in
//!   {floor(n a_j), floor(n a_j)+1} with E[o_j] = n a_j and sum o_j = n,
//!   and accumulates log((1/n) sum a_j) into the running normalizer.
//!
//! Weight arithmetic is carried in log space.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{euler_step, DriftMode, Dynamics, StateSampler, StepScratch};
use crate::rng::standard_normal;

/// Log-weight floor used for infeasible particles: exp of it is the smallest
/// positive normal f64, so weights stay strictly positive.
const LOG_WEIGHT_FLOOR: f64 = -708.0;

/// n particle locations with positive weights and the running normalizer of
/// the unnormalized conditional distribution.
#[derive(Debug, Clone)]
pub struct ParticleCloud {
    dim: usize,
    locations: Vec<f64>,
    log_weights: Vec<f64>,
    log_normalizer: f64,
}

/// Offspring counts of one branching event plus the parent of each
/// post-branch slot.
#[derive(Debug, Clone)]
pub struct BranchingOutcome {
    pub offspring: Vec<u32>,
    pub parent_map: Vec<u32>,
}

/// n independent draws from the initial law, unit weights.
pub fn init_cloud(
    n: usize,
    x0_sampler: &dyn StateSampler,
    rng: &mut ChaCha8Rng,
) -> Result<ParticleCloud> {
    if n < 2 {
        return Err(Error::config("particle count must be at least 2"));
    }
    let dim = x0_sampler.dim();
    let mut locations = vec![0.0; n * dim];
    for j in 0..n {
        x0_sampler.sample(rng, &mut locations[j * dim..(j + 1) * dim]);
    }
    Ok(ParticleCloud { dim, locations, log_weights: vec![0.0; n], log_normalizer: 0.0 })
}

impl ParticleCloud {
    /// Cloud assembled from explicit locations (n x dim, row-major) and
    /// positive weights; useful for fixtures and resuming from dumps.
    pub fn from_weighted(
        dim: usize,
        locations: Vec<f64>,
        weights: &[f64],
        log_normalizer: f64,
    ) -> Result<Self> {
        let n = weights.len();
        if n < 2 || locations.len() != n * dim {
            return Err(Error::config("need at least 2 particles and matching location count"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::config("weights must be positive and finite"));
        }
        Ok(ParticleCloud {
            dim,
            locations,
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            log_normalizer,
        })
    }

    pub fn n(&self) -> usize {
        self.log_weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn location(&self, j: usize) -> &[f64] {
        &self.locations[j * self.dim..(j + 1) * self.dim]
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    fn shifted_weights(&self) -> (f64, Vec<f64>) {
        let shift = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w = self.log_weights.iter().map(|lw| (lw - shift).exp()).collect();
        (shift, w)
    }

    /// Normalized-filter estimate: sum_j abar_j f(v_j).
    pub fn estimate_pi(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let (_, w) = self.shifted_weights();
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        for j in 0..self.n() {
            acc += w[j] * f(self.location(j));
        }
        acc / total
    }

    /// Unnormalized estimate: exp(log_normalizer) * (1/n) sum_j a_j f(v_j).
    pub fn estimate_rho(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let (shift, w) = self.shifted_weights();
        let mut acc = 0.0;
        for j in 0..self.n() {
            acc += w[j] * f(self.location(j));
        }
        (self.log_normalizer + shift).exp() * acc / self.n() as f64
    }

    /// Effective sample size (sum a)^2 / sum a^2.
    pub fn ess(&self) -> f64 {
        let (_, w) = self.shifted_weights();
        let s: f64 = w.iter().sum();
        let s2: f64 = w.iter().map(|v| v * v).sum();
        s * s / s2
    }

    /// Mutation under the reference measure over one observation interval.
    ///
    /// `dy_raw` holds the raw observed increments per Euler substep
    /// (substeps x d_Y, row-major); they are normalized by the constant
    /// observation dispersion internally. Each particle adds private
    /// independent noise from `rng`.
    pub fn propagate_reference<M: Dynamics + ?Sized>(
        &mut self,
        model: &M,
        dy_raw: &[f64],
        sub_dt: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let dims = model.dims();
        assert_eq!(dims.d, self.dim, "model/cloud dimension mismatch");
        assert_eq!(dy_raw.len() % dims.d_y, 0, "dy length must be a multiple of d_y");
        let disp = model.const_obs_dispersion().ok_or_else(|| {
            Error::config("reference-measure propagation requires constant observation dispersion")
        })?;
        let substeps = dy_raw.len() / dims.d_y;
        let mut dy_norm = vec![0.0; dy_raw.len()];
        for s in 0..substeps {
            for k in 0..dims.d_y {
                dy_norm[s * dims.d_y + k] = dy_raw[s * dims.d_y + k] / disp[k];
            }
        }
        let sqrt_h = sub_dt.sqrt();
        let mut scratch = StepScratch::new(dims);
        let mut dw = vec![0.0; dims.d_w];
        for j in 0..self.n() {
            let state = &mut self.locations[j * dims.d..(j + 1) * dims.d];
            for s in 0..substeps {
                for v in dw.iter_mut() {
                    *v = sqrt_h * standard_normal(rng);
                }
                euler_step(
                    model,
                    state,
                    DriftMode::Reference,
                    &dy_norm[s * dims.d_y..(s + 1) * dims.d_y],
                    &dw,
                    sub_dt,
                    &mut scratch,
                )
                .map_err(|e| Error::non_finite(format!("particle {j}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Mutation by fully private noise plus a private candidate observation
    /// per particle, integrated from `y_start` over `substeps` Euler steps.
    /// Returns the candidates (n x d_Y, row-major).
    pub fn propagate_candidate<M: Dynamics + ?Sized>(
        &mut self,
        model: &M,
        y_start: &[f64],
        substeps: usize,
        sub_dt: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>> {
        let dims = model.dims();
        assert_eq!(dims.d, self.dim, "model/cloud dimension mismatch");
        assert_eq!(y_start.len(), dims.d_y);
        let sqrt_h = sub_dt.sqrt();
        let mut scratch = StepScratch::new(dims);
        let mut du = vec![0.0; dims.d_y];
        let mut dw = vec![0.0; dims.d_w];
        let mut candidates = vec![0.0; self.n() * dims.d_y];
        for j in 0..self.n() {
            let state = &mut self.locations[j * dims.d..(j + 1) * dims.d];
            let cand = &mut candidates[j * dims.d_y..(j + 1) * dims.d_y];
            cand.copy_from_slice(y_start);
            for _ in 0..substeps {
                for v in du.iter_mut() {
                    *v = sqrt_h * standard_normal(rng);
                }
                for v in dw.iter_mut() {
                    *v = sqrt_h * standard_normal(rng);
                }
                model.obs_drift(state, &mut scratch.h);
                model.obs_dispersion(state, &mut scratch.disp);
                for k in 0..dims.d_y {
                    cand[k] += scratch.h[k] * sub_dt + scratch.disp[k] * du[k];
                }
                euler_step(model, state, DriftMode::Physical, &du, &dw, sub_dt, &mut scratch)
                    .map_err(|e| Error::non_finite(format!("particle {j}: {e}")))?;
            }
            if cand.iter().any(|v| !v.is_finite()) {
                return Err(Error::non_finite(format!("candidate observation of particle {j}")));
            }
        }
        Ok(candidates)
    }

    /// Multiplicative weight update for a discretely observed increment over
    /// one interval of length `delta`, with h frozen at the interval-start
    /// locations (call before mutating).
    pub fn update_weights_discrete<M: Dynamics + ?Sized>(
        &mut self,
        model: &M,
        dy_raw: &[f64],
        delta: f64,
    ) -> Result<()> {
        let dims = model.dims();
        assert_eq!(dy_raw.len(), dims.d_y);
        let disp = model.const_obs_dispersion().ok_or_else(|| {
            Error::config("discrete-observation weights require constant observation dispersion")
        })?;
        let mut h = vec![0.0; dims.d_y];
        for j in 0..self.n() {
            model.obs_drift(self.location(j), &mut h);
            let mut exponent = 0.0;
            for k in 0..dims.d_y {
                let hn = h[k] / disp[k];
                exponent += hn * (dy_raw[k] / disp[k]) - 0.5 * hn * hn * delta;
            }
            self.log_weights[j] += exponent;
            if !self.log_weights[j].is_finite() {
                return Err(Error::non_finite(format!("weight of particle {j}")));
            }
        }
        Ok(())
    }

    /// Kernel weights from candidate observations: a_j is the product over
    /// observation components of n^{1/3} phi(n^{1/3} (Y^(j) - Y)). Weights
    /// are set, not multiplied.
    pub fn update_weights_candidate(
        &mut self,
        candidates: &[f64],
        y_obs: &[f64],
        kernel: &KernelSpec,
    ) -> Result<()> {
        let d_y = y_obs.len();
        assert_eq!(candidates.len(), self.n() * d_y);
        let bw = (self.n() as f64).powf(kernel.bandwidth_exponent);
        let log_bw = bw.ln();
        let mut any_positive = false;
        for j in 0..self.n() {
            let mut lw = 0.0;
            for k in 0..d_y {
                let u = bw * (candidates[j * d_y + k] - y_obs[k]);
                lw += log_bw + kernel.log_density(u);
            }
            if lw.exp() > 0.0 {
                any_positive = true;
            }
            self.log_weights[j] = lw;
        }
        if !any_positive {
            return Err(Error::FilterCollapse(
                "all candidate weights underflowed; increase the particle count or widen the kernel"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Minimal-variance branching. Offspring counts are drawn by systematic
    /// residual sampling: the integer parts of n abar_j are assigned
    /// deterministically and the remaining offspring by a single uniform
    /// shift over the cumulative fractional parts, so each count lands in
    /// {floor(n abar_j), floor(n abar_j)+1} with the exact mean, and the
    /// total is always n.
    pub fn branch(&mut self, rng: &mut ChaCha8Rng) -> Result<BranchingOutcome> {
        let n = self.n();
        let (shift, w) = self.shifted_weights();
        let total: f64 = w.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::non_finite("branch weights"));
        }
        // normalizer picks up log of the pre-branch mean weight
        self.log_normalizer += shift + total.ln() - (n as f64).ln();

        let mut offspring = vec![0u32; n];
        let mut fracs = vec![0.0f64; n];
        let mut assigned: usize = 0;
        for j in 0..n {
            let target = n as f64 * w[j] / total;
            let fl = target.floor();
            offspring[j] = fl as u32;
            fracs[j] = target - fl;
            assigned += fl as usize;
        }
        let residual = n - assigned;
        let u: f64 = rng.random();
        if residual > 0 {
            let mut picks = 0usize;
            let mut cum = 0.0f64;
            let mut bumped = vec![false; n];
            for j in 0..n {
                cum += fracs[j];
                if picks < residual && cum > u + picks as f64 {
                    offspring[j] += 1;
                    bumped[j] = true;
                    picks += 1;
                }
            }
            // float shortfall in the cumulative sum: place leftovers on the
            // largest un-bumped fractional parts
            while picks < residual {
                let j = (0..n)
                    .filter(|&j| !bumped[j])
                    .max_by(|&a, &b| fracs[a].partial_cmp(&fracs[b]).unwrap())
                    .expect("residual offspring without free slot");
                offspring[j] += 1;
                bumped[j] = true;
                picks += 1;
            }
        }

        let total_offspring: u32 = offspring.iter().sum();
        assert_eq!(total_offspring as usize, n, "branching must conserve the particle count");

        let mut parent_map = Vec::with_capacity(n);
        let mut locations = Vec::with_capacity(n * self.dim);
        for j in 0..n {
            for _ in 0..offspring[j] {
                parent_map.push(j as u32);
                locations.extend_from_slice(self.location(j));
            }
        }
        self.locations = locations;
        self.log_weights.fill(0.0);
        Ok(BranchingOutcome { offspring, parent_map })
    }

    /// Push the weight of infeasible particles to the underflow floor so they
    /// receive no offspring at the next branching.
    pub fn apply_state_constraints(&mut self, feasible: impl Fn(&[f64]) -> bool) -> Result<()> {
        let mut any = false;
        for j in 0..self.n() {
            if feasible(self.location(j)) {
                any = true;
            } else {
                self.log_weights[j] = LOG_WEIGHT_FLOOR;
            }
        }
        if any {
            Ok(())
        } else {
            Err(Error::FilterCollapse("every particle violates the state constraints".into()))
        }
    }
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Smooth unit-mass kernel used to score candidate observations; the
/// bandwidth scales as n^(1/3).
#[derive(Debug, Clone)]
pub struct KernelSpec {
    kind: KernelKind,
    pub bandwidth_exponent: f64,
}

#[derive(Debug, Clone)]
enum KernelKind {
    Gaussian,
    /// Piecewise-linear density on a uniform grid; zero outside.
    Tabulated { x0: f64, dx: f64, values: Vec<f64> },
}

impl KernelSpec {
    /// Standard Gaussian kernel phi(x) = exp(-x^2/2) / sqrt(2 pi).
    pub fn gaussian() -> Self {
        KernelSpec { kind: KernelKind::Gaussian, bandwidth_exponent: 1.0 / 3.0 }
    }

    /// Kernel tabulated on a uniform grid starting at `x0` with spacing `dx`.
    /// Values must be nonnegative and integrate to one (trapezoid rule).
    pub fn tabulated(x0: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || dx <= 0.0 {
            return Err(Error::config("tabulated kernel needs at least 2 points and dx > 0"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config("kernel values must be finite and nonnegative"));
        }
        let mut mass = 0.0;
        for w in values.windows(2) {
            mass += 0.5 * (w[0] + w[1]) * dx;
        }
        if (mass - 1.0).abs() > 1e-3 {
            return Err(Error::config(format!("kernel mass {mass:.6} differs from 1")));
        }
        Ok(KernelSpec { kind: KernelKind::Tabulated { x0, dx, values }, bandwidth_exponent: 1.0 / 3.0 })
    }

    pub fn log_density(&self, u: f64) -> f64 {
        match &self.kind {
            KernelKind::Gaussian => -0.5 * u * u - 0.918_938_533_204_672_7, // ln sqrt(2 pi)
            KernelKind::Tabulated { x0, dx, values } => {
                let pos = (u - x0) / dx;
                if pos < 0.0 || pos >= (values.len() - 1) as f64 {
                    f64::NEG_INFINITY
                } else {
                    let i = pos.floor() as usize;
                    let frac = pos - i as f64;
                    let v = values[i] * (1.0 - frac) + values[i + 1] * frac;
                    v.ln()
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Per-step filter state for CSV diagnostics.
#[derive(Debug, Clone, Default)]
pub struct FilterTrace {
    rows: Vec<(f64, f64, f64, f64)>,
}

impl FilterTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, t: f64, cloud: &ParticleCloud) {
        let pi_x = cloud.estimate_pi(|x| x[0]);
        let pi_x2 = cloud.estimate_pi(|x| x[0] * x[0]);
        self.rows.push((t, pi_x, pi_x2, cloud.ess()));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,pi_x,pi_x2,ess")?;
        for (t, a, b, c) in &self.rows {
            writeln!(w, "{t},{a},{b},{c}")?;
        }
        Ok(())
    }
}
