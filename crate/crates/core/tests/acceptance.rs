//! Acceptance suite: every benchmark criterion at its stated tolerance, one
//! pass/fail line per criterion. Heavy artifacts (the benchmark tables) are
//! computed once and shared across criteria.
//!
//! Reference values come from the two worked examples: the linear-Gaussian
//! drift model (Monte Carlo / PDE / European per initial law) and the
//! Stein-Stein stochastic-volatility put (full-observation PDE vs
//! partial-observation Monte Carlo at three exercise frequencies).

use std::sync::LazyLock;

use rand::Rng;
use stopsim::bench::{
    run_convergence_study, run_table1, run_table2, ExperimentConfig, Table1Row, Table2Result,
};
use stopsim::kalman::conditional_payoff;
use stopsim::model::linear_gaussian_example_params;
use stopsim::num::mean_and_se;
use stopsim::pfilter::ParticleCloud;
use stopsim::rmc::{least_squares_fit, residual_orthogonality, EuropeanValuer};
use stopsim::rng::{standard_normal, SeedTree, StreamKind};

/// Paper benchmark rows: (mc, pde, european) per initial condition.
const TABLE1_MC: [f64; 7] = [0.1810, 0.2566, 0.1862, 0.1852, 0.1723, 0.1827, 0.1853];
const TABLE1_PDE: [Option<f64>; 7] =
    [Some(0.1853), Some(0.2661), Some(0.1904), Some(0.1919), Some(0.1832), None, None];
const MC_TOL: f64 = 0.010;
const PDE_TOL: f64 = 0.005;

const TABLE2_FULL: [f64; 3] = [1.665, 1.686, 1.696];
const TABLE2_PARTIAL: [f64; 3] = [1.646, 1.673, 1.685];
const TABLE2_FULL_TOL: f64 = 0.01;
const TABLE2_PARTIAL_TOL: f64 = 0.02;
const SS_EUROPEAN: f64 = 1.570;
const SS_EUROPEAN_TOL: f64 = 0.02;
const LG_EUROPEAN_ROW1: f64 = 0.1331;
const LG_EUROPEAN_TOL: f64 = 0.005;

static TABLE1: LazyLock<Vec<Table1Row>> = LazyLock::new(|| {
    let cfg = ExperimentConfig::linear_gaussian_default();
    run_table1(&cfg).expect("table1 runs")
});

static TABLE2: LazyLock<Table2Result> = LazyLock::new(|| {
    let cfg = ExperimentConfig::stein_stein_default();
    run_table2(&cfg).expect("table2 runs")
});

fn report(criterion: &str, pass: bool, detail: &str) {
    println!("acceptance {criterion}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{criterion} failed: {detail}");
}

#[test]
fn criterion_1_table1_row1() {
    let row = &TABLE1[0];
    let mc = row.mc.estimate.value;
    let pde = row.pde.expect("row 1 has a PDE benchmark");

    // converged European for the tight row-1 band: antithetic pairs with a
    // fine Euler step
    let mut cfg = row.config.clone();
    cfg.european_paths = 4_000_000;
    cfg.grid.substeps = 8;
    let eur = stopsim::bench::european_for(&cfg, &SeedTree::new(cfg.seed)).unwrap();

    let ok_mc = (mc - TABLE1_MC[0]).abs() <= MC_TOL;
    let ok_pde = (pde - TABLE1_PDE[0].unwrap()).abs() <= PDE_TOL;
    let ok_eur = (eur.value - LG_EUROPEAN_ROW1).abs() <= LG_EUROPEAN_TOL;
    report(
        "criterion 1 (benchmark row 1)",
        ok_mc && ok_pde && ok_eur,
        &format!(
            "mc {:.4} vs {} +-{}; pde {:.4} vs {} +-{}; european {:.4} vs {} +-{}",
            mc,
            TABLE1_MC[0],
            MC_TOL,
            pde,
            TABLE1_PDE[0].unwrap(),
            PDE_TOL,
            eur.value,
            LG_EUROPEAN_ROW1,
            LG_EUROPEAN_TOL
        ),
    );
}

#[test]
fn criterion_2_table1_all_rows() {
    let rows = &*TABLE1;
    let mut detail = String::new();
    let mut ok = true;
    for (i, row) in rows.iter().enumerate() {
        let mc = row.mc.estimate.value;
        let mc_ok = (mc - TABLE1_MC[i]).abs() <= MC_TOL;
        ok &= mc_ok;
        detail.push_str(&format!("row{} mc {:.4}/{:.4} ", i + 1, mc, TABLE1_MC[i]));
        if let Some(expected) = TABLE1_PDE[i] {
            let pde = row.pde.expect("PDE value present for Gaussian/Dirac rows");
            let pde_ok = (pde - expected).abs() <= PDE_TOL;
            ok &= pde_ok;
            detail.push_str(&format!("pde {pde:.4}/{expected:.4} "));
        } else {
            assert!(row.pde.is_none(), "no PDE benchmark for non-Gaussian initial laws");
        }
    }
    // spread ordering on the reported means: Gaussian < uniform < two-point
    let (v1, v2, v3) = (rows[0].mc.estimate.value, rows[5].mc.estimate.value, rows[6].mc.estimate.value);
    let order_ok = v1 < v2 && v2 < v3;
    ok &= order_ok;
    detail.push_str(&format!("ordering {v1:.4} < {v2:.4} < {v3:.4}: {order_ok}"));
    report("criterion 2 (benchmark table rows)", ok, &detail);
}

#[test]
fn criterion_3_table2() {
    let result = &*TABLE2;
    let mut ok = true;
    let mut detail = String::new();
    for (i, row) in result.rows.iter().enumerate() {
        let full_ok = (row.full_pde - TABLE2_FULL[i]).abs() <= TABLE2_FULL_TOL;
        let partial = row.partial_mc.estimate.value;
        let partial_ok = (partial - TABLE2_PARTIAL[i]).abs() <= TABLE2_PARTIAL_TOL;
        ok &= full_ok && partial_ok;
        detail.push_str(&format!(
            "dt={} full {:.4}/{:.4} partial {:.4}/{:.4}; ",
            row.dt, row.full_pde, TABLE2_FULL[i], partial, TABLE2_PARTIAL[i]
        ));
    }
    // value increases with exercise frequency (dt runs 0.2, 0.1, 0.05)
    let mono_full = result.rows[0].full_pde < result.rows[1].full_pde
        && result.rows[1].full_pde < result.rows[2].full_pde;
    let se = |i: usize| result.rows[i].partial_mc.estimate.std_error;
    let mono_partial = result.rows[0].partial_mc.estimate.value
        <= result.rows[1].partial_mc.estimate.value + 2.0 * (se(0) + se(1))
        && result.rows[1].partial_mc.estimate.value
            <= result.rows[2].partial_mc.estimate.value + 2.0 * (se(1) + se(2));
    let eur_ok = (result.european.value - SS_EUROPEAN).abs() <= SS_EUROPEAN_TOL;
    ok &= mono_full && mono_partial && eur_ok;
    detail.push_str(&format!(
        "monotone full {mono_full} partial {mono_partial}; european {:.4}/{SS_EUROPEAN}",
        result.european.value
    ));
    report("criterion 3 (stochastic-volatility table)", ok, &detail);
}

#[test]
fn criterion_4_filter_convergence_rate() {
    let start = std::time::Instant::now();
    let cfg = ExperimentConfig::linear_gaussian_default();
    let counts = [50usize, 100, 200, 400, 800, 1600];
    let report_data = run_convergence_study(&cfg, &counts, 200).unwrap();
    let slope = report_data.slope;
    let elapsed = start.elapsed().as_secs_f64();
    let ok = (-0.65..=-0.35).contains(&slope) && elapsed < 300.0;
    report(
        "criterion 4 (filter convergence rate)",
        ok,
        &format!(
            "slope {:.3} (half-width {:.3}) in [-0.65, -0.35], runtime {:.0}s < 300s; rmse {:?}",
            slope, report_data.slope_half_width, elapsed, report_data.rmse
        ),
    );
}

#[test]
fn criterion_5_branching_suite() {
    let mut rng = SeedTree::new(31).stream(StreamKind::Scratch, 0);
    let n = 16usize;
    // one million branchings with random weights: conservation and two-point
    // support on every call
    let locations: Vec<f64> = (0..n).map(|j| j as f64).collect();
    for trial in 0..1_000_000u64 {
        let weights: Vec<f64> = (0..n).map(|_| 0.01 + rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        let mut cloud =
            ParticleCloud::from_weighted(1, locations.clone(), &weights, 0.0).unwrap();
        let out = cloud.branch(&mut rng).unwrap();
        let mut sum = 0u32;
        for (j, &o) in out.offspring.iter().enumerate() {
            let target = n as f64 * weights[j] / total;
            let fl = target.floor() as u32;
            assert!(o == fl || o == fl + 1, "trial {trial}: support violation");
            sum += o;
        }
        assert_eq!(sum as usize, n, "trial {trial}: offspring sum");
    }
    // unbiasedness on fixed-weight fixtures: E[o_j] = n abar_j within 4 se
    let fixtures: [(&[f64], &[f64]); 2] =
        [(&[3.0, 1.0], &[0.0, 1.0]), (&[0.31, 1.7, 0.9, 2.09], &[0.0, 1.0, 2.0, 3.0])];
    let reps = 200_000;
    let mut ok = true;
    let mut detail = String::new();
    for (weights, locs) in fixtures {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        let mut means = vec![0.0f64; n];
        for _ in 0..reps {
            let mut cloud =
                ParticleCloud::from_weighted(1, locs.to_vec(), weights, 0.0).unwrap();
            let out = cloud.branch(&mut rng).unwrap();
            for (m, &o) in means.iter_mut().zip(&out.offspring) {
                *m += o as f64;
            }
        }
        for j in 0..n {
            let mean = means[j] / reps as f64;
            let target = n as f64 * weights[j] / total;
            let frac = target - target.floor();
            // o_j is floor + Bernoulli(frac): variance frac (1 - frac)
            let se = (frac * (1.0 - frac) / reps as f64).sqrt().max(1e-12);
            let pass = (mean - target).abs() <= 4.0 * se + 1e-9;
            ok &= pass;
            detail.push_str(&format!("E[o]={mean:.4}/{target:.4} "));
        }
    }
    report("criterion 5 (branching suite)", ok, &detail);
}

#[test]
fn criterion_6_regression_suite() {
    // exact recovery on linearly generated targets
    let mut rng = SeedTree::new(77).stream(StreamKind::Scratch, 1);
    let n = 4000;
    let r = 5;
    let truth = [0.7, -1.3, 0.002, 4.0, -0.25];
    let mut features = vec![0.0; n * r];
    let mut targets = vec![0.0; n];
    for i in 0..n {
        features[i * r] = 1.0;
        for j in 1..r {
            features[i * r + j] = rng.random::<f64>() * 4.0 - 2.0;
        }
        targets[i] = (0..r).map(|j| truth[j] * features[i * r + j]).sum();
    }
    let fit = least_squares_fit(&features, n, r, &targets).unwrap();
    let recovery_ok =
        fit.coefficients.iter().zip(&truth).all(|(a, b)| (a - b).abs() < 1e-10);

    // residual orthogonality on noisy targets
    for t in targets.iter_mut() {
        *t += rng.random::<f64>() - 0.5;
    }
    let fit = least_squares_fit(&features, n, r, &targets).unwrap();
    let residual: Vec<f64> = (0..n)
        .map(|i| {
            let row = &features[i * r..(i + 1) * r];
            targets[i] - row.iter().zip(&fit.coefficients).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect();
    let worst = residual_orthogonality(&features, n, r, &residual);
    let ortho_ok = worst <= 1e-8;

    // low-bias: the fitted-policy value never exceeds the PDE benchmark by
    // more than 3 standard errors on any Gaussian/Dirac row, and the
    // backward recursions kept residuals orthogonal to the basis
    let mut low_bias_ok = true;
    let mut fit_ortho_ok = true;
    let mut detail = String::new();
    for row in TABLE1.iter() {
        if let Some(pde) = row.pde {
            let est = &row.mc.estimate;
            let pass = est.value <= pde + 3.0 * est.std_error;
            low_bias_ok &= pass;
            detail.push_str(&format!("{:.4}<={:.4} ", est.value, pde));
        }
        fit_ortho_ok &= row.mc.fit.max_orthogonality <= 1e-8;
    }
    report(
        "criterion 6 (regression suite)",
        recovery_ok && ortho_ok && low_bias_ok && fit_ortho_ok,
        &format!(
            "recovery {recovery_ok}, orthogonality {worst:.2e}, forward-fit orthogonality {fit_ortho_ok}, low bias {detail}"
        ),
    );
}

#[test]
fn criterion_7_oracle_equivalence() {
    let params = linear_gaussian_example_params();
    let mut rng = SeedTree::new(99).stream(StreamKind::Scratch, 2);

    // conditional payoff vs a brute-force Gaussian Monte Carlo oracle
    let mut payoff_ok = true;
    let mut worst_payoff = 0.0f64;
    for _ in 0..50 {
        let m = -0.3 + 0.6 * rng.random::<f64>();
        let p = 1e-4 + 0.02 * rng.random::<f64>();
        let y = 0.5 + 3.0 * rng.random::<f64>();
        let draws = 1_000_000;
        let samples: Vec<f64> = (0..draws)
            .map(|_| {
                let x = m + p.sqrt() * standard_normal(&mut rng);
                (y * (params.c1 + x) - params.c2).max(0.0)
            })
            .collect();
        let (mc, se) = mean_and_se(&samples);
        let exact = conditional_payoff(m, p, y, &params).unwrap();
        let z = (exact - mc).abs() / se;
        worst_payoff = worst_payoff.max(z);
        payoff_ok &= z <= 3.0;
    }

    // European feature vs an independent nested Monte Carlo oracle written
    // here (hand-rolled Euler loop, separate from the library simulators)
    let valuer = EuropeanValuer::linear_gaussian(params, 1.0, 16).unwrap();
    let mut euro_ok = true;
    let mut worst_euro = 0.0f64;
    for _ in 0..20 {
        let t = 0.05 * (1.0 + (rng.random::<f64>() * 19.0).floor());
        let x0 = -0.3 + 0.6 * rng.random::<f64>();
        let y0 = 1.0 + 2.0 * rng.random::<f64>();
        let inner = 100_000;
        let steps = ((1.0 - t) / 0.005).ceil() as usize;
        let h = (1.0 - t) / steps as f64;
        let sqrt_h = h.sqrt();
        let samples: Vec<f64> = (0..inner)
            .map(|_| {
                let mut x = x0;
                let mut y = y0;
                for _ in 0..steps {
                    let dw = sqrt_h * standard_normal(&mut rng);
                    let du = sqrt_h * standard_normal(&mut rng);
                    y += (x - params.mean_level) * h + params.sigma_y * dw;
                    x += -params.kappa * x * h
                        + params.sigma_x
                            * (params.rho * dw
                                + (1.0 - params.rho * params.rho).sqrt() * du);
                }
                (-params.discount_rate * (1.0 - t)).exp()
                    * (y * (params.c1 + x) - params.c2).max(0.0)
            })
            .collect();
        let (mc, se) = mean_and_se(&samples);
        let feature = valuer.value(t, &[x0], &[y0]).unwrap();
        // allow the residual Euler discretization bias of the oracle itself
        let z = (feature - mc).abs() / (se + 2e-4);
        worst_euro = worst_euro.max(z);
        euro_ok &= z <= 3.0;
    }
    report(
        "criterion 7 (oracle equivalence)",
        payoff_ok && euro_ok,
        &format!("payoff worst z {worst_payoff:.2}, european worst z {worst_euro:.2}"),
    );
}

#[test]
fn extra_american_dominates_european() {
    // Bermudan value at least the European value on both examples
    let row1 = &TABLE1[0];
    let lg_ok = row1.mc.estimate.value
        >= row1.european.value - 2.0 * (row1.mc.estimate.std_error + row1.european.std_error);
    let t2 = &*TABLE2;
    let finest = &t2.rows[2].partial_mc.estimate;
    let ss_ok =
        finest.value >= t2.european.value - 2.0 * (finest.std_error + t2.european.std_error);
    report(
        "extra (American >= European)",
        lg_ok && ss_ok,
        &format!(
            "lg {:.4} >= {:.4}; ss {:.4} >= {:.4}",
            row1.mc.estimate.value, row1.european.value, finest.value, t2.european.value
        ),
    );
}

#[test]
fn extra_tvr_close_to_ls() {
    // the value-iteration variant lands near the cashflow variant on row 1
    let mut cfg = ExperimentConfig::linear_gaussian_default();
    cfg.algo = stopsim::bench::Algo::Tvr;
    let tvr = stopsim::bench::run_mc(&cfg).unwrap();
    let ls = &TABLE1[0].mc.estimate;
    let ok = (tvr.estimate.value - ls.value).abs() <= 0.01;
    report(
        "extra (TvR vs LS proximity)",
        ok,
        &format!("tvr {:.4} vs ls {:.4}", tvr.estimate.value, ls.value),
    );
}

#[test]
fn extra_out_of_sample_policy_value() {
    // fresh-path revaluation under the extracted policy agrees with the
    // in-sample estimate within two combined standard errors
    let cfg = ExperimentConfig::linear_gaussian_default();
    let seeds = SeedTree::new(cfg.seed);
    let ensemble = stopsim::bench::build_ensemble(&cfg, &seeds).unwrap();
    let basis = stopsim::rmc::BasisSet::linear_gaussian();
    let (fit, _, est) = stopsim::rmc::backward_induction(&ensemble, &basis).unwrap();
    let policy = stopsim::rmc::extract_policy(&fit);
    let mut fresh_cfg = cfg.clone();
    fresh_cfg.seed = cfg.seed + 1;
    let fresh = stopsim::bench::build_ensemble(&fresh_cfg, &SeedTree::new(fresh_cfg.seed)).unwrap();
    let oos = stopsim::rmc::evaluate_policy(&policy, &fresh).unwrap();
    let tol = 2.0 * (est.std_error + oos.std_error);
    let ok = (oos.value - est.value).abs() <= tol;
    report(
        "extra (out-of-sample policy value)",
        ok,
        &format!("in-sample {:.4}, out-of-sample {:.4}, tol {:.4}", est.value, oos.value, tol),
    );
}

#[test]
fn extra_stopping_region_mismatch_sets() {
    // at t = 0.5 the fitted rule misclassifies in both directions relative
    // to the PDE rule: both mismatch sets are nonempty
    let cfg = ExperimentConfig::linear_gaussian_default();
    let export = stopsim::bench::export_stopping_region(&cfg, 0.5).unwrap();
    let n_stop = export.points.iter().filter(|p| p.stop).count();
    let structure_ok = n_stop > 0 && n_stop < export.points.len() && !export.boundary.is_empty();

    let (grid, riccati) = stopsim::bench::lg_pde_grid(&cfg).unwrap();
    let solved =
        stopsim::pde::solve_bermudan_kalman(&cfg.lg_params().unwrap(), &riccati, &grid).unwrap();
    let slice = solved.exercise_slice_at(0.5).unwrap();
    let mut stop_but_pde_continues = 0usize;
    let mut continue_but_pde_stops = 0usize;
    for p in &export.points {
        let cont = match solved.query_surface(&slice.continuation, p.proxy, p.y) {
            Ok(v) => v,
            Err(_) => continue, // point outside the PDE grid
        };
        let obstacle = solved.query_surface(&slice.obstacle, p.proxy, p.y).unwrap();
        let pde_stops = obstacle >= cont;
        if p.stop && !pde_stops {
            stop_but_pde_continues += 1;
        }
        if !p.stop && pde_stops {
            continue_but_pde_stops += 1;
        }
    }
    let ok = structure_ok && stop_but_pde_continues > 0 && continue_but_pde_stops > 0;
    report(
        "extra (stopping-region mismatch sets)",
        ok,
        &format!(
            "{} stops of {}, {} boundary points, early-stops {}, late-stops {}",
            n_stop,
            export.points.len(),
            export.boundary.len(),
            stop_but_pde_continues,
            continue_but_pde_stops
        ),
    );
}
