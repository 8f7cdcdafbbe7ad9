use std::fmt;
use std::io::BufWriter;

use anyhow::anyhow;
use clap::Args;
use serde::Serialize;

use evograph_core::analysis::{detect_regime, fit_exponential_kernel, jackknife};
use evograph_core::recurrence::{default_kmax, leading_constant};
use evograph_core::special::{
    boundary_value, estimate_asymptotic_constant, homogeneous_residual, uc_closed_form,
    KernelSpec, CLOSED_FORM_MAX_K, DEFAULT_TOLERANCE,
};
use evograph_core::{
    aggregate, build_sequence, check_concentration, compare, fit_tail, run_trials,
    AnalysisError, ComparisonReport, DegreeHistogram, MeanProfile, ModelParams, MultigraphState,
    Probability, RecurrenceError, RegimeLabel, RngStream, TailModel, TheoreticalSequence,
    TrialOutput, TrialPlan,
};

use crate::config::{Env, RunArgs, RunConfig};
use crate::output::{num, opt, Outputs};

/// Failure classes; each maps to one process exit code.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Conjectured,
    Numerical(anyhow::Error),
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Conjectured => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "invalid configuration: {e:#}"),
            Failure::Conjectured => write!(
                f,
                "conjectured region (alpha1 >= 2 alpha_c): no limiting degree sequence is available"
            ),
            Failure::Numerical(e) => write!(f, "numerical failure: {e:#}"),
            Failure::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<RecurrenceError> for Failure {
    fn from(e: RecurrenceError) -> Self {
        match e {
            RecurrenceError::ConjecturedRegime => Failure::Conjectured,
            e => Failure::Numerical(e.into()),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn resolve(args: &RunArgs, env: &Env) -> Result<RunConfig, Failure> {
    args.resolve(env).map_err(Failure::Config)
}

fn theory_for(cfg: &RunConfig, params: &ModelParams) -> Result<TheoreticalSequence, Failure> {
    let c = params
        .derive(cfg.epsilon_fraction)
        .map_err(|e| Failure::Config(e.into()))?;
    let kmax = cfg.kmax.unwrap_or_else(|| default_kmax(c.regime));
    Ok(build_sequence(params, &c, kmax, DEFAULT_TOLERANCE)?)
}

fn final_histograms(outputs: &[TrialOutput]) -> Vec<DegreeHistogram> {
    outputs
        .iter()
        .map(|o| o.final_histogram().expect("horizon is a snapshot").clone())
        .collect()
}

/// Mean profile of at least two trials.
fn profile_of(hs: &[DegreeHistogram]) -> Result<MeanProfile, Failure> {
    aggregate(hs).map_err(|e| match e {
        AnalysisError::TooFewTrials { .. } => Failure::Config(anyhow!("{e}; raise --trials")),
        e => Failure::Numerical(e.into()),
    })
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateOpts {
    /// Add one column of raw counts per trial to each histogram CSV
    #[arg(long)]
    pub per_trial: bool,
    /// Also dump the final edge list of trial 0
    #[arg(long)]
    pub edge_list: bool,
}

fn histogram_rows(hs: &[&DegreeHistogram], per_trial: bool) -> Vec<Vec<String>> {
    let t = hs[0].t as f64;
    let n = hs.len() as f64;
    let width = hs.iter().map(|h| h.counts.len()).max().unwrap_or(0);
    (0..width)
        .map(|k| {
            let counts: Vec<u64> = hs
                .iter()
                .map(|h| h.counts.get(k).copied().unwrap_or(0))
                .collect();
            let mean = counts.iter().sum::<u64>() as f64 / n;
            // Sample standard error; undefined for a single trial.
            let stderr = (hs.len() > 1).then(|| {
                let var = counts
                    .iter()
                    .map(|&c| (c as f64 - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1.0);
                (var / n).sqrt()
            });
            let mut row = vec![
                k.to_string(),
                num(mean),
                opt(stderr),
                num(mean / t),
                opt(stderr.map(|s| s / t)),
            ];
            if per_trial {
                row.extend(counts.iter().map(u64::to_string));
            }
            row
        })
        .collect()
}

pub fn simulate(cfg: &RunConfig, opts: &SimulateOpts) -> CmdResult {
    let plan = cfg.plan();
    let outputs = run_trials(&cfg.params, &cfg.sim_config(), &plan, cfg.seed, cfg.trials);
    let mut out = Outputs::new(&cfg.out, "simulate")?;
    out.record_streams("trials", cfg.seed, cfg.trials);

    let mut header = vec!["k", "mean_count", "stderr_count", "mean", "stderr"];
    let trial_cols: Vec<String> = (0..cfg.trials).map(|i| format!("trial_{i}")).collect();
    if opts.per_trial {
        header.extend(trial_cols.iter().map(String::as_str));
    }
    for (i, &t) in plan.snapshots.iter().enumerate() {
        let hs: Vec<&DegreeHistogram> = outputs.iter().map(|o| &o.histograms[i]).collect();
        out.csv(
            &format!("histogram_t{t}.csv"),
            "histogram",
            &header,
            histogram_rows(&hs, opts.per_trial),
        )?;
    }

    let rows = plan.trajectory.iter().enumerate().map(|(i, &t)| {
        let samples: Vec<_> = outputs.iter().map(|o| o.trajectory[i]).collect();
        let n = samples.len() as f64;
        let mean = |f: fn(&evograph_core::TrajectorySample) -> u64| {
            samples.iter().map(|s| f(s) as f64).sum::<f64>() / n
        };
        vec![
            t.to_string(),
            num(mean(|s| s.edges)),
            samples.iter().map(|s| s.edges).min().unwrap().to_string(),
            samples.iter().map(|s| s.edges).max().unwrap().to_string(),
            num(mean(|s| s.vertices)),
            num(mean(|s| s.max_degree)),
            samples.iter().map(|s| s.max_degree).max().unwrap().to_string(),
        ]
    });
    out.csv(
        "trajectory.csv",
        "trajectory",
        &[
            "t",
            "edges_mean",
            "edges_min",
            "edges_max",
            "vertices_mean",
            "max_degree_mean",
            "max_degree_max",
        ],
        rows,
    )?;

    if opts.edge_list {
        let stream = RngStream::new(cfg.seed, 0);
        let mut rng = stream.rng();
        let mut state = MultigraphState::new();
        while state.step() < cfg.horizon {
            state.advance(&cfg.params, &cfg.sim_config(), &mut rng);
        }
        let mut buf = BufWriter::new(Vec::new());
        state
            .write_edge_list(&mut buf)
            .map_err(|e| Failure::Other(e.into()))?;
        let bytes = buf.into_inner().map_err(|e| Failure::Other(anyhow!("{e}")))?;
        out.raw("edges_trial0.txt", bytes)?;
    }

    let manifest = out.finish(cfg)?;
    println!(
        "simulated {} trial(s) to T = {} ({}); manifest {}",
        cfg.trials,
        cfg.horizon,
        cfg.constants.regime,
        manifest.display()
    );
    Ok(())
}

// ------------------------------------------------------------------ theory

#[derive(Debug, Serialize)]
struct TheorySummary {
    regime: RegimeLabel,
    alpha: String,
    alpha1: String,
    m: u32,
    alpha_c: f64,
    eta: f64,
    epsilon: f64,
    rho_eps: f64,
    beta: Option<f64>,
    /// `1 + beta`, the power-law tail exponent.
    exponent: Option<f64>,
    gamma: Option<f64>,
    mu: Option<f64>,
    theta: f64,
    /// Leading constant of the tail form.
    #[serde(rename = "C")]
    c: f64,
    /// Mixing constant `D`.
    #[serde(rename = "D")]
    d_mix: f64,
    d0: f64,
    kmax: usize,
    mass: f64,
    degree_mass: f64,
    max_residual: f64,
}

pub fn theory(cfg: &RunConfig) -> CmdResult {
    let seq = theory_for(cfg, &cfg.params)?;
    let cc = leading_constant(&seq, DEFAULT_TOLERANCE)?;
    let c = seq.constants();
    let kmax = seq.kmax();
    let mut out = Outputs::new(&cfg.out, "theory")?;
    let rows = (-1..=kmax as i64).map(|k| {
        vec![
            k.to_string(),
            num(seq.d(k).unwrap()),
            opt((k >= 1).then(|| seq.tail_form(cc, k as usize)).flatten()),
            opt(seq.residual(k)),
        ]
    });
    out.csv("theory.csv", "theory", &["k", "d_k", "tail_form", "residual"], rows)?;
    let summary = TheorySummary {
        regime: c.regime,
        alpha: cfg.alpha.clone(),
        alpha1: cfg.alpha1.clone(),
        m: cfg.m,
        alpha_c: c.alpha_c,
        eta: c.eta,
        epsilon: c.epsilon,
        rho_eps: c.rho_eps,
        beta: c.beta,
        exponent: c.power_law_exponent().map(f64::abs),
        gamma: (c.regime == RegimeLabel::Exponential).then_some(c.gamma),
        mu: (c.regime == RegimeLabel::Critical).then_some(c.mu),
        theta: c.theta,
        c: cc,
        d_mix: seq.mixing_constant(),
        d0: seq.d0(),
        kmax,
        mass: seq.mass(),
        degree_mass: seq.degree_mass(),
        max_residual: seq.max_residual(),
    };
    out.json("constants.json", "constants", &summary)?;
    let manifest = out.finish(cfg)?;
    println!(
        "{} regime, C = {cc:.6e}, max residual {:.1e}; manifest {}",
        c.regime,
        summary.max_residual,
        manifest.display()
    );
    Ok(())
}

// ----------------------------------------------------------------- special

#[derive(Debug, Clone, Args)]
pub struct SpecialOpts {
    /// Largest k to tabulate
    #[arg(long, default_value_t = 60)]
    pub k_max: u32,
}

#[derive(Debug, Serialize)]
struct SpecialSummary {
    kernel: KernelSpec,
    boundary_lhs: f64,
    boundary_rhs: f64,
    asymptotic_constant: Option<f64>,
    tail_sum: f64,
    tail_degree_sum: f64,
}

pub fn special(cfg: &RunConfig, opts: &SpecialOpts) -> CmdResult {
    let c = &cfg.constants;
    let kernel = KernelSpec::for_constants(c).ok_or(Failure::Conjectured)?;
    let k_max = opts.k_max.max(3);
    let numerical = |e: evograph_core::SpecialError| Failure::Numerical(e.into());
    let u: Vec<f64> = (1..=k_max + 2)
        .map(|k| kernel.eval(k, DEFAULT_TOLERANCE))
        .collect::<Result<_, _>>()
        .map_err(numerical)?;
    let rows = (1..=k_max).map(|k| {
        let i = k as usize - 1;
        let (r, scale) = homogeneous_residual(c, k, [u[i], u[i + 1], u[i + 2]]);
        let closed = match kernel {
            KernelSpec::Uc { mu } if k <= CLOSED_FORM_MAX_K => uc_closed_form(mu, k).ok(),
            _ => None,
        };
        vec![
            k.to_string(),
            num(u[i]),
            num(u[i].ln()),
            opt(kernel.tail_shape(k)),
            opt(closed),
            num(r.abs() / scale),
        ]
    });
    let mut out = Outputs::new(&cfg.out, "special")?;
    out.csv(
        "special.csv",
        "special",
        &["k", "u", "ln_u", "tail_shape", "closed_form", "relative_residual"],
        rows,
    )?;
    let asymptotic_constant = match kernel {
        KernelSpec::Uc { .. } => None,
        _ => estimate_asymptotic_constant(
            kernel,
            &evograph_core::recurrence::ASYMPTOTIC_GRID,
            DEFAULT_TOLERANCE,
        )
        .ok()
        .map(|a| a.constant),
    };
    let (tail_sum, tail_degree_sum) = kernel
        .tail_sums(k_max, DEFAULT_TOLERANCE)
        .map_err(numerical)?;
    let summary = SpecialSummary {
        kernel,
        boundary_lhs: 2.0 * c.a2 * u[1] + (c.a1 + c.b1) * u[0],
        boundary_rhs: boundary_value(&kernel, c),
        asymptotic_constant,
        tail_sum,
        tail_degree_sum,
    };
    out.json("special.json", "special", &summary)?;
    let manifest = out.finish(cfg)?;
    println!("{kernel:?} tabulated to k = {k_max}; manifest {}", manifest.display());
    Ok(())
}

// ----------------------------------------------------------------- compare

#[derive(Debug, Clone, Args)]
pub struct CompareOpts {
    /// Largest degree in the distance computations
    #[arg(long, default_value_t = 30)]
    pub k_report: usize,
    /// Largest degree used by tail fits
    #[arg(long, default_value_t = 50)]
    pub fit_max: usize,
    /// Compare the theory curve with itself instead of simulating
    #[arg(long)]
    pub self_test: bool,
}

fn jackknifed<F>(hs: &[DegreeHistogram], f: F) -> (Option<f64>, Option<f64>)
where
    F: Fn(&MeanProfile) -> Result<f64, AnalysisError> + Sync,
{
    match jackknife(hs, f) {
        Ok((x, se)) => (Some(x), Some(se)),
        Err(_) => (None, None),
    }
}

/// Report for a simulated profile; fit and detection fields are filled in
/// as far as the data allow.
fn compare_profile(
    params: &ModelParams,
    hs: &[DegreeHistogram],
    profile: &MeanProfile,
    theory: Option<&TheoreticalSequence>,
    opts: &CompareOpts,
) -> ComparisonReport {
    let c = params.derive(evograph_core::params::DEFAULT_EPSILON_FRACTION).ok();
    let regime = params.classify();
    let mut report = match theory {
        Some(seq) => compare(profile, seq, opts.k_report),
        None => ComparisonReport {
            regime_declared: regime,
            regime_detected: None,
            fitted_exponent: None,
            fitted_exponent_stderr: None,
            fitted_log_gamma: None,
            fitted_log_gamma_stderr: None,
            k_report: opts.k_report,
            sup_norm: None,
            total_variation: None,
            max_z_score: None,
            pass: None,
        },
    };
    let m = params.m() as usize;
    let ks = profile.fit_window(m + 2, opts.fit_max);
    report.regime_detected = detect_regime(hs, &profile.fit_window(m + 2, 400)).ok();
    match (regime, c.and_then(|c| c.beta)) {
        (RegimeLabel::Exponential, Some(beta)) => {
            (report.fitted_log_gamma, report.fitted_log_gamma_stderr) = jackknifed(hs, |p| {
                Ok(fit_exponential_kernel(&p.mean, beta, &ks, DEFAULT_TOLERANCE)?.parameter)
            });
        }
        (RegimeLabel::Critical, _) => {}
        _ => {
            (report.fitted_exponent, report.fitted_exponent_stderr) =
                jackknifed(hs, |p| Ok(fit_tail(&p.mean, TailModel::PowerLaw, &ks)?.parameter));
        }
    }
    report
}

pub fn compare_cmd(cfg: &RunConfig, opts: &CompareOpts) -> CmdResult {
    let regime = cfg.constants.regime;
    let theory = match regime {
        RegimeLabel::Conjectured => None,
        _ => Some(theory_for(cfg, &cfg.params)?),
    };
    let mut out = Outputs::new(&cfg.out, "compare")?;

    let (profile, report) = if opts.self_test {
        let seq = theory.as_ref().ok_or(Failure::Conjectured)?;
        let t = cfg.horizon as f64;
        let mean = seq.values().to_vec();
        let profile = MeanProfile {
            t: cfg.horizon,
            trials: 0,
            mean_count: mean.iter().map(|d| d * t).collect(),
            stderr: vec![0.0; mean.len()],
            mean,
        };
        let report = compare(&profile, seq, opts.k_report);
        (profile, report)
    } else {
        let plan = TrialPlan::final_only(cfg.horizon).map_err(|e| Failure::Config(e.into()))?;
        let outputs = run_trials(&cfg.params, &cfg.sim_config(), &plan, cfg.seed, cfg.trials);
        out.record_streams("trials", cfg.seed, cfg.trials);
        let hs = final_histograms(&outputs);
        let profile = profile_of(&hs)?;
        let finals: Vec<_> = outputs.iter().map(|o| *o.final_sample().unwrap()).collect();
        out.json(
            "concentration.json",
            "concentration",
            &check_concentration(&finals, &cfg.constants),
        )?;
        let report = compare_profile(&cfg.params, &hs, &profile, theory.as_ref(), opts);
        (profile, report)
    };

    let cc = match &theory {
        Some(seq) => Some(leading_constant(seq, DEFAULT_TOLERANCE)?),
        None => None,
    };
    let rows = (0..=opts.k_report).map(|k| {
        let th = theory.as_ref();
        vec![
            k.to_string(),
            num(profile.at(k)),
            num(profile.stderr_at(k)),
            opt(th.and_then(|s| s.values().get(k).copied())),
            opt(th.zip(cc).and_then(|(s, cc)| s.tail_form(cc, k))),
        ]
    });
    out.csv(
        "curve.csv",
        "curve",
        &["k", "empirical_mean", "stderr", "theory", "tail_form"],
        rows,
    )?;
    out.json("comparison.json", "comparison", &report)?;
    let manifest = out.finish(cfg)?;
    let verdict = match report.pass {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "no theory curve",
    };
    println!(
        "{regime}: TV = {}, {verdict}; manifest {}",
        opt(report.total_variation),
        manifest.display()
    );
    Ok(())
}

// ------------------------------------------------------------------- sweep

#[derive(Debug, Clone, Args)]
pub struct SweepOpts {
    /// Comma-separated alpha1 values (default: 7 points from alpha/2 to alpha)
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<String>>,
    #[command(flatten)]
    pub compare: CompareOpts,
}

pub fn sweep(cfg: &RunConfig, opts: &SweepOpts) -> CmdResult {
    let alpha: Probability = cfg.alpha.parse().map_err(|e: evograph_core::ParamError| {
        Failure::Config(e.into())
    })?;
    let grid: Vec<String> = match &opts.grid {
        Some(g) => g.clone(),
        None => (0..7)
            // Rounded so labels read 0.35 rather than 0.35000000000000003.
            .map(|i| num((cfg.params.alpha() * (6 + i) as f64 / 12.0 * 1e12).round() / 1e12))
            .collect(),
    };
    let points: Vec<ModelParams> = grid
        .iter()
        .map(|a1| {
            let a1: Probability = a1.parse()?;
            ModelParams::new(alpha, a1, cfg.m)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Config(e.into()))?;

    let mut out = Outputs::new(&cfg.out, "sweep")?;
    let plan = TrialPlan::final_only(cfg.horizon).map_err(|e| Failure::Config(e.into()))?;
    let mut rows = Vec::with_capacity(points.len());
    for (i, (p, label)) in points.iter().zip(&grid).enumerate() {
        let seed = cfg.seed.wrapping_add(i as u64);
        out.record_streams(format!("alpha1={label}"), seed, cfg.trials);
        let outputs = run_trials(p, &cfg.sim_config(), &plan, seed, cfg.trials);
        let hs = final_histograms(&outputs);
        let profile = profile_of(&hs)?;
        let regime = p.classify();
        let theory = match regime {
            RegimeLabel::Conjectured => None,
            _ => Some(theory_for(cfg, p)?),
        };
        let report = compare_profile(p, &hs, &profile, theory.as_ref(), &opts.compare);
        // Leading-order rate for every geometric point, for the sweep trend.
        let beta = theory.as_ref().and_then(|s| s.constants().beta);
        let ks = profile.fit_window(p.m() as usize + 2, opts.compare.fit_max);
        let leading_log_gamma = match (regime, beta) {
            (RegimeLabel::Exponential, Some(beta)) => {
                fit_tail(&profile.mean, TailModel::Exponential { beta }, &ks)
                    .ok()
                    .map(|f| f.parameter)
            }
            _ => None,
        };
        let theory_log_gamma = theory
            .as_ref()
            .filter(|_| regime == RegimeLabel::Exponential)
            .map(|s| s.constants().gamma.ln());
        rows.push(vec![
            cfg.alpha.clone(),
            label.clone(),
            regime.to_string(),
            report.regime_detected.map(|r| r.to_string()).unwrap_or_default(),
            opt(report.fitted_exponent),
            opt(report.fitted_log_gamma),
            opt(leading_log_gamma),
            opt(theory_log_gamma),
            opt(report.total_variation),
            report.pass.map(|b| b.to_string()).unwrap_or_default(),
        ]);
        eprintln!("alpha1 = {label}: {regime}");
    }
    out.csv(
        "sweep.csv",
        "sweep",
        &[
            "alpha",
            "alpha1",
            "regime_declared",
            "regime_detected",
            "fitted_exponent",
            "fitted_log_gamma",
            "leading_order_log_gamma",
            "theory_log_gamma",
            "total_variation",
            "pass",
        ],
        rows,
    )?;
    let manifest = out.finish(cfg)?;
    println!("swept {} points; manifest {}", points.len(), manifest.display());
    Ok(())
}
