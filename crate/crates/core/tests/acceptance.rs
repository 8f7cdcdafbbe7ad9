//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test -p evograph-core --test acceptance -- --nocapture` to see them.

use std::time::Instant;

use evograph_core::analysis::{self, fit_exponential_kernel, MeanProfile};
use evograph_core::recurrence::{self, cold_profile, default_kmax, perturbed_profile};
use evograph_core::special::{self, uc_closed_form, KernelSpec};
use evograph_core::{
    aggregate, build_sequence, check_concentration, compare, evolve_mean_field, fit_tail,
    run_trials, DegreeHistogram, DerivedConstants, ModelParams, SimConfig, TailModel, TrialPlan,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;
const TOL: f64 = 1e-11;

fn report(criterion: u32, pass: bool, detail: String) {
    println!(
        "{} criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn setup(a: f64, a1: f64, m: u32) -> (ModelParams, DerivedConstants) {
    let p = ModelParams::new(a, a1, m).unwrap();
    let c = p.derive(0.1).unwrap();
    (p, c)
}

fn final_histograms(p: &ModelParams, horizon: u64, trials: u64, seed: u64) -> Vec<DegreeHistogram> {
    let plan = TrialPlan::final_only(horizon).unwrap();
    run_trials(p, &SimConfig::default(), &plan, seed, trials)
        .into_iter()
        .map(|o| o.final_histogram().unwrap().clone())
        .collect()
}

#[test]
fn criterion_1_power_law_slope() {
    let (p, _) = setup(1.0, 1.0, 3);
    let start = Instant::now();
    let hs = final_histograms(&p, 200_000, 20, SEED);
    let profile = aggregate(&hs).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let ks: Vec<usize> = (5..=50).collect();
    let fit = fit_tail(&profile.mean, TailModel::PowerLaw, &ks).unwrap();
    let pass = (-3.3..=-2.7).contains(&fit.parameter) && elapsed <= 60.0;
    report(
        1,
        pass,
        format!(
            "log-log slope over k in [5, 50] = {:.4} (target [-3.3, -2.7]), simulation {elapsed:.1} s",
            fit.parameter
        ),
    );
}

#[test]
fn criterion_2_exponential_rate_and_tv() {
    let (p, c) = setup(0.6, 0.6, 2);
    let beta = c.beta.unwrap();
    let hs = final_histograms(&p, 200_000, 20, SEED + 1);
    let profile = aggregate(&hs).unwrap();
    let ks = profile.fit_window(p.m() as usize + 2, 30);
    let fit = fit_exponential_kernel(&profile.mean, beta, &ks, TOL).unwrap();
    let leading = fit_tail(&profile.mean, TailModel::Exponential { beta }, &ks).unwrap();
    let target = c.gamma.ln();
    let rel = (fit.parameter / target - 1.0).abs();

    let seq = build_sequence(&p, &c, default_kmax(c.regime), TOL).unwrap();
    let cmp = compare(&profile, &seq, 30);
    let tv = cmp.total_variation.unwrap();
    report(
        2,
        rel <= 0.15 && cmp.pass == Some(true),
        format!(
            "log gamma = {:.4} vs ln {:.2} = {target:.4} (rel. error {:.1}%, window k in [{}, {}]; \
             leading-order fit {:.4}); TV on k <= 30 = {tv:.4}",
            fit.parameter,
            c.gamma,
            100.0 * rel,
            ks[0],
            ks[ks.len() - 1],
            leading.parameter
        ),
    );
}

#[test]
fn criterion_3_critical_pointwise() {
    let (p, c) = setup(0.6, 0.4, 2);
    let hs = final_histograms(&p, 200_000, 50, SEED + 2);
    let profile = aggregate(&hs).unwrap();
    let seq = build_sequence(&p, &c, default_kmax(c.regime), TOL).unwrap();
    let cc = recurrence::leading_constant(&seq, TOL).unwrap();
    let theory: Vec<f64> = (0..=20)
        .map(|k| seq.tail_form(cc, k).unwrap_or(0.0))
        .collect();
    let ks: Vec<usize> = (2..=20).collect();
    let z = analysis::max_z_score(&profile, &theory, &ks);
    report(
        3,
        z <= 3.0,
        format!("max |mean - C_c u_c(k)| / stderr over k in [2, 20] = {z:.3} (C_c = {cc:.6})"),
    );
}

#[test]
fn criterion_4_recurrence_residuals() {
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (a, a1) in [(0.75, 0.3), (0.6, 0.6), (0.6, 0.4)] {
        for m in [1, 2, 5] {
            let (p, c) = setup(a, a1, m);
            let seq = build_sequence(&p, &c, 1000, TOL).unwrap();
            let r = (-1..=998).map(|k| seq.residual(k).unwrap()).fold(0.0, f64::max);
            worst = worst.max(r);
            detail.push(format!("{}/m={m}: {r:.1e}", c.regime));
        }
    }
    report(
        4,
        worst <= 1e-8,
        format!("max relative residual over k in [-1, 998] = {worst:.2e} ({})", detail.join(", ")),
    );
}

#[test]
fn criterion_5_mean_field_oracle() {
    let horizon = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (a, a1, m) in [(1.0, 1.0, 1), (0.6, 0.6, 2), (0.6, 0.4, 2)] {
        let (p, c) = setup(a, a1, m);
        let kmax = default_kmax(c.regime);
        let seq = build_sequence(&p, &c, kmax, TOL).unwrap();
        let t0 = 10 * kmax as u64;
        let noise: Vec<f64> = (0..=kmax).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let peak = seq.values()[..=50].iter().copied().fold(0.0, f64::max);
        for (label, init) in [
            ("perturbed", perturbed_profile(&seq, t0, &noise)),
            ("cold", cold_profile(&p, t0, kmax)),
        ] {
            let out = evolve_mean_field(&p, &c, t0, horizon, &init).unwrap();
            let err = (0..=50)
                .map(|k| (out[k] - seq.values()[k]).abs())
                .fold(0.0, f64::max)
                / peak;
            worst = worst.max(err);
            detail.push(format!("{}/{label}: {:.3}%", c.regime, 100.0 * err));
        }
    }
    report(
        5,
        worst <= 0.01,
        format!("max_(k<=50) |mean-field - d_k| / max d_k at T = 1e6: {}", detail.join(", ")),
    );
}

#[test]
fn criterion_6_special_functions() {
    let mut failures = Vec::new();

    let mut closed_worst: f64 = 0.0;
    for mu in [0.25, 0.5, 1.0] {
        for k in 1..=15 {
            let quad = KernelSpec::Uc { mu }.eval(k, 1e-13).unwrap();
            let closed = uc_closed_form(mu, k).unwrap();
            closed_worst = closed_worst.max((closed / quad - 1.0).abs());
        }
    }
    if closed_worst > 1e-8 {
        failures.push("closed form");
    }

    let mut ratio_worst: f64 = 0.0;
    for (a, a1) in [(1.0, 1.0), (0.75, 0.3), (0.9, 0.5)] {
        let (_, c) = setup(a, a1, 1);
        let kernel = KernelSpec::for_constants(&c).unwrap();
        let ratio = kernel.eval(1024, TOL).unwrap() / kernel.eval(512, TOL).unwrap();
        let target = 2f64.powf(-(1.0 + c.beta.unwrap()));
        ratio_worst = ratio_worst.max((ratio / target - 1.0).abs());
    }
    if ratio_worst > 0.02 {
        failures.push("u1 doubling ratio");
    }

    let mut boundary_worst: f64 = 0.0;
    for (a, a1) in [(1.0, 1.0), (0.75, 0.3), (0.6, 0.6), (0.7, 0.6), (0.6, 0.4), (0.75, 0.75)] {
        let (_, c) = setup(a, a1, 1);
        let Some(kernel) = KernelSpec::for_constants(&c) else {
            continue;
        };
        let lhs = 2.0 * c.a2 * kernel.eval(2, 1e-13).unwrap()
            + (c.a1 + c.b1) * kernel.eval(1, 1e-13).unwrap();
        let rhs = special::boundary_value(&kernel, &c);
        boundary_worst = boundary_worst.max((lhs / rhs - 1.0).abs());
    }
    if boundary_worst > 1e-8 {
        failures.push("boundary identity");
    }

    let mut bound_ok = true;
    for mu in [0.05, 0.25, 0.5, 1.0, 4.0] {
        for k in [1, 2, 3, 5, 10, 50, 100, 1000, 10_000] {
            bound_ok &= KernelSpec::Uc { mu }.eval(k, TOL).unwrap() <= 1.0 / k as f64;
        }
    }
    if !bound_ok {
        failures.push("u_c(k) <= 1/k");
    }

    report(
        6,
        failures.is_empty(),
        format!(
            "closed form vs quadrature {closed_worst:.1e}; u1(1024)/u1(512) vs 2^-(1+beta) {:.3}%; \
             boundary identity {boundary_worst:.1e}; u_c(k) <= 1/k {}{}",
            100.0 * ratio_worst,
            if bound_ok { "holds" } else { "violated" },
            if failures.is_empty() {
                String::new()
            } else {
                format!(" [failed: {}]", failures.join(", "))
            }
        ),
    );
}

#[test]
fn criterion_7_concentration_and_degree_bound() {
    let (p, c) = setup(0.6, 0.5, 2);
    let plan = TrialPlan::final_only(100_000).unwrap();
    let finals: Vec<_> = run_trials(&p, &SimConfig::default(), &plan, SEED + 7, 50)
        .iter()
        .map(|o| *o.final_sample().unwrap())
        .collect();
    let r = check_concentration(&finals, &c);
    report(
        7,
        r.edge_band_fraction == 1.0 && r.degree_bound_fraction == 1.0,
        format!(
            "edge band {:.0}% (worst |e_T/T - eta| = {:.4}, band {:.4}); degree bound {:.0}% \
             (largest max degree {}, bound {:.0})",
            100.0 * r.edge_band_fraction,
            r.worst_edge_deviation,
            r.edge_band,
            100.0 * r.degree_bound_fraction,
            r.largest_max_degree,
            r.degree_bound
        ),
    );
}

#[test]
fn criterion_8_mass_conservation() {
    let mut ok = true;
    let mut detail = Vec::new();
    for (a, a1, m) in [(0.75, 0.3, 2), (0.6, 0.6, 2), (0.6, 0.4, 2)] {
        let (p, c) = setup(a, a1, m);
        let seq = build_sequence(&p, &c, default_kmax(c.regime), TOL).unwrap();
        let mass = seq.mass() / a1 - 1.0;
        let degree = seq.degree_mass() / (2.0 * c.eta) - 1.0;
        ok &= mass.abs() <= 0.01 && degree.abs() <= 0.02;
        detail.push(format!("{}: mass {mass:+.1e}, degree mass {degree:+.1e}", c.regime));
    }
    report(8, ok, format!("relative errors {}", detail.join("; ")));
}

#[test]
fn criterion_9_exact_small_t() {
    let (p, _) = setup(1.0, 1.0, 1);
    let hs = final_histograms(&p, 3, 10_000, SEED + 9);
    let profile: MeanProfile = aggregate(&hs).unwrap();
    let exact = profile.mean_count == vec![0.0, 2.0, 1.0];
    let zero_var = profile.stderr.iter().all(|&s| s == 0.0);
    report(
        9,
        exact && zero_var,
        format!(
            "mean counts {:?} over {} trials, stderr {:?}",
            profile.mean_count, profile.trials, profile.stderr
        ),
    );
}
