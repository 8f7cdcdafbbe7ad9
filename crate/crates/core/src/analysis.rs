//! Aggregation of simulated degree histograms, tail fits and comparisons
//! against the theoretical degree sequence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{DerivedConstants, RegimeLabel};
use crate::recurrence::TheoreticalSequence;
use crate::special::{KernelSpec, SpecialError};

/// Total-variation threshold for [`compare`].
pub const TV_PASS_THRESHOLD: f64 = 0.05;

/// Fit windows drop degrees whose mean count per trial is below this.
pub const MIN_MEAN_COUNT: f64 = 10.0;

/// Minimum number of degrees a tail fit needs.
pub const MIN_FIT_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} trials, got {got}")]
    TooFewTrials { needed: usize, got: usize },
    #[error("histograms from different times ({0} and {1})")]
    MixedTimes(u64, u64),
    #[error("fit window has {0} usable degrees (need {MIN_FIT_POINTS})")]
    WindowTooSparse(usize),
    #[error("profile is not positive at k = {0}")]
    NonPositive(usize),
    #[error("the critical tail is compared pointwise, not fitted")]
    NoTailFit,
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// Vertex counts by degree in one trial at time `t`; `counts[k] = D_k(t)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeHistogram {
    pub t: u64,
    pub trial_id: u64,
    pub counts: Vec<u64>,
}

impl DegreeHistogram {
    /// `sum_k D_k = v_t`.
    pub fn vertex_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `sum_k k D_k = 2 e_t`.
    pub fn degree_mass(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| k as u64 * c)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: u64,
    pub edges: u64,
    pub vertices: u64,
    pub max_degree: u64,
}

/// Exact integer running sums over trials; merging is associative and
/// commutative, so any parallel reduction gives identical results.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProfileAccumulator {
    t: Option<u64>,
    trials: u64,
    sum: Vec<u64>,
    sum_sq: Vec<u128>,
}

impl ProfileAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_time(&mut self, t: u64) -> Result<(), AnalysisError> {
        match self.t {
            Some(own) if own != t => Err(AnalysisError::MixedTimes(own, t)),
            _ => {
                self.t = Some(t);
                Ok(())
            }
        }
    }

    pub fn add(&mut self, h: &DegreeHistogram) -> Result<(), AnalysisError> {
        self.check_time(h.t)?;
        if self.sum.len() < h.counts.len() {
            self.sum.resize(h.counts.len(), 0);
            self.sum_sq.resize(h.counts.len(), 0);
        }
        for (k, &c) in h.counts.iter().enumerate() {
            self.sum[k] += c;
            self.sum_sq[k] += c as u128 * c as u128;
        }
        self.trials += 1;
        Ok(())
    }

    /// Removes a histogram previously added (used for leave-one-out).
    fn remove(&mut self, h: &DegreeHistogram) {
        for (k, &c) in h.counts.iter().enumerate() {
            self.sum[k] -= c;
            self.sum_sq[k] -= c as u128 * c as u128;
        }
        self.trials -= 1;
    }

    pub fn merge(mut self, other: ProfileAccumulator) -> Result<Self, AnalysisError> {
        if let Some(t) = other.t {
            self.check_time(t)?;
        }
        if self.sum.len() < other.sum.len() {
            self.sum.resize(other.sum.len(), 0);
            self.sum_sq.resize(other.sum.len(), 0);
        }
        for (k, (&s, &q)) in other.sum.iter().zip(&other.sum_sq).enumerate() {
            self.sum[k] += s;
            self.sum_sq[k] += q;
        }
        self.trials += other.trials;
        Ok(self)
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn finish(&self) -> Result<MeanProfile, AnalysisError> {
        let n = self.trials as usize;
        if n < 2 {
            return Err(AnalysisError::TooFewTrials { needed: 2, got: n });
        }
        let t = self.t.expect("trials > 0") as f64;
        let nf = n as f64;
        let mut mean_count = Vec::with_capacity(self.sum.len());
        let mut stderr = Vec::with_capacity(self.sum.len());
        for (&s, &q) in self.sum.iter().zip(&self.sum_sq) {
            let mean = s as f64 / nf;
            // (sum c^2 - (sum c)^2 / n) / (n - 1), in exact integers.
            let centered = q as f64 * nf - (s as f64) * (s as f64);
            let var = (centered / (nf * (nf - 1.0))).max(0.0);
            mean_count.push(mean);
            stderr.push((var / nf).sqrt() / t);
        }
        let mean = mean_count.iter().map(|c| c / t).collect();
        Ok(MeanProfile {
            t: self.t.unwrap(),
            trials: self.trials,
            mean,
            stderr,
            mean_count,
        })
    }
}

/// Across-trial mean of `D_k(t) / t` with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanProfile {
    pub t: u64,
    pub trials: u64,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Mean of `D_k(t)` (not divided by `t`).
    pub mean_count: Vec<f64>,
}

impl MeanProfile {
    pub fn at(&self, k: usize) -> f64 {
        self.mean.get(k).copied().unwrap_or(0.0)
    }

    pub fn stderr_at(&self, k: usize) -> f64 {
        self.stderr.get(k).copied().unwrap_or(0.0)
    }

    /// Degrees in `[k_min, k_max]` whose mean count is at least
    /// [`MIN_MEAN_COUNT`].
    pub fn fit_window(&self, k_min: usize, k_max: usize) -> Vec<usize> {
        (k_min..=k_max)
            .filter(|&k| self.mean_count.get(k).copied().unwrap_or(0.0) >= MIN_MEAN_COUNT)
            .collect()
    }
}

/// Mean profile across trials, reduced in parallel.
pub fn aggregate(histograms: &[DegreeHistogram]) -> Result<MeanProfile, AnalysisError> {
    accumulate(histograms)?.finish()
}

fn accumulate(histograms: &[DegreeHistogram]) -> Result<ProfileAccumulator, AnalysisError> {
    histograms
        .par_iter()
        .try_fold(ProfileAccumulator::new, |mut acc, h| {
            acc.add(h)?;
            Ok(acc)
        })
        .try_reduce(ProfileAccumulator::new, ProfileAccumulator::merge)
}

/// Delete-one jackknife of `estimator` over trials: returns the estimate on
/// all trials and its standard error.
pub fn jackknife<F>(histograms: &[DegreeHistogram], estimator: F) -> Result<(f64, f64), AnalysisError>
where
    F: Fn(&MeanProfile) -> Result<f64, AnalysisError> + Sync,
{
    let n = histograms.len();
    if n < 3 {
        return Err(AnalysisError::TooFewTrials { needed: 3, got: n });
    }
    let total = accumulate(histograms)?;
    let full = estimator(&total.finish()?)?;
    let leave_out: Vec<f64> = histograms
        .par_iter()
        .map(|h| {
            let mut acc = total.clone();
            acc.remove(h);
            estimator(&acc.finish()?)
        })
        .collect::<Result<_, _>>()?;
    let nf = n as f64;
    let mean = leave_out.iter().sum::<f64>() / nf;
    let var = leave_out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (nf - 1.0) / nf;
    Ok((full, var.sqrt()))
}

/// Ordinary least squares of `y` on the columns of `x` (row-major).
/// Returns `None` for a singular design.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let p = rows.first()?.len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in rows.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yi;
        }
    }
    // Gauss-Jordan with partial pivoting on the normal equations.
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..p {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some((0..p).map(|i| a[i][p] / a[i][i]).collect())
}

/// Slope of the OLS line through `points`.
pub fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    ols_line(points).map(|(slope, _)| slope)
}

/// `(slope, intercept)` of the OLS line through `points`.
pub fn ols_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Which tail form to fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TailModel {
    /// `log d_k` against `log k`; the slope estimates `-(1 + beta)`.
    PowerLaw,
    /// `log d_k - (beta - 1) log k` against `k`; the slope estimates `log gamma`.
    Exponential { beta: f64 },
    Critical,
}

impl TailModel {
    pub fn for_constants(c: &DerivedConstants) -> Option<TailModel> {
        match c.regime {
            RegimeLabel::PowerLaw => Some(TailModel::PowerLaw),
            RegimeLabel::Exponential => c.beta.map(|beta| TailModel::Exponential { beta }),
            RegimeLabel::Critical => Some(TailModel::Critical),
            RegimeLabel::Conjectured => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub model: TailModel,
    /// Exponent (power law) or `log gamma` (exponential).
    pub parameter: f64,
    pub intercept: f64,
    pub points: usize,
}

fn log_points(profile: &[f64], ks: &[usize]) -> Result<Vec<(usize, f64)>, AnalysisError> {
    if ks.len() < MIN_FIT_POINTS {
        return Err(AnalysisError::WindowTooSparse(ks.len()));
    }
    ks.iter()
        .map(|&k| match profile.get(k) {
            Some(&v) if v > 0.0 => Ok((k, v.ln())),
            _ => Err(AnalysisError::NonPositive(k)),
        })
        .collect()
}

/// Least-squares fit of the leading tail form over the degrees `ks`.
pub fn fit_tail(profile: &[f64], model: TailModel, ks: &[usize]) -> Result<TailFit, AnalysisError> {
    let pts = log_points(profile, ks)?;
    let xy: Vec<(f64, f64)> = match model {
        TailModel::PowerLaw => pts.iter().map(|&(k, y)| ((k as f64).ln(), y)).collect(),
        TailModel::Exponential { beta } => pts
            .iter()
            .map(|&(k, y)| (k as f64, y - (beta - 1.0) * (k as f64).ln()))
            .collect(),
        TailModel::Critical => return Err(AnalysisError::NoTailFit),
    };
    let (parameter, intercept) =
        ols_line(&xy).ok_or(AnalysisError::WindowTooSparse(xy.len()))?;
    Ok(TailFit {
        model,
        parameter,
        intercept,
        points: xy.len(),
    })
}

/// Fits `log gamma` with the full exponential-regime kernel shape
/// `log d_k = c + log u2(k; beta, gamma)`, `beta` held fixed.
///
/// Unlike [`fit_tail`], this carries the `(1 + O(1/k))` correction of the
/// leading form, which dominates the bias at the small degrees a finite
/// simulation can resolve.
pub fn fit_exponential_kernel(
    profile: &[f64],
    beta: f64,
    ks: &[usize],
    tol: f64,
) -> Result<TailFit, AnalysisError> {
    let pts = log_points(profile, ks)?;
    let ssr = |log_gamma: f64| -> Result<(f64, f64), AnalysisError> {
        let kernel = KernelSpec::U2 {
            beta,
            gamma: log_gamma.exp(),
        };
        let resid: Vec<f64> = pts
            .iter()
            .map(|&(k, y)| Ok(y - kernel.ln_eval(k as u32, tol)?))
            .collect::<Result<_, AnalysisError>>()?;
        let c = resid.iter().sum::<f64>() / resid.len() as f64;
        Ok((resid.iter().map(|r| (r - c).powi(2)).sum(), c))
    };
    // Golden-section search for log gamma in (log 1e-4, -1e-6).
    let (mut lo, mut hi) = ((1e-4f64).ln(), -1e-6);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (ssr(x1)?.0, ssr(x2)?.0);
    while hi - lo > 1e-9 {
        if f1 > f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = ssr(x2)?.0;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = ssr(x1)?.0;
        }
    }
    let best = 0.5 * (lo + hi);
    let (_, c) = ssr(best)?;
    Ok(TailFit {
        model: TailModel::Exponential { beta },
        parameter: best,
        intercept: c,
        points: pts.len(),
    })
}

/// Empirical checks of the edge-count concentration and the maximum-degree
/// bound at the final time of each trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub trials: usize,
    pub horizon: u64,
    /// Half-width of the band `|e_T / T - eta| <= 0.05 eta`.
    pub edge_band: f64,
    /// `T^rho_eps (ln T)^3`.
    pub degree_bound: f64,
    pub edge_band_fraction: f64,
    pub degree_bound_fraction: f64,
    pub worst_edge_deviation: f64,
    pub largest_max_degree: u64,
}

pub fn check_concentration(finals: &[TrajectorySample], c: &DerivedConstants) -> ConcentrationReport {
    let horizon = finals.iter().map(|s| s.t).max().unwrap_or(0);
    let tf = horizon as f64;
    let edge_band = 0.05 * c.eta;
    let degree_bound = tf.powf(c.rho_eps) * tf.ln().powi(3);
    let n = finals.len().max(1) as f64;
    let deviations: Vec<f64> = finals
        .iter()
        .map(|s| (s.edges as f64 / s.t as f64 - c.eta).abs())
        .collect();
    ConcentrationReport {
        trials: finals.len(),
        horizon,
        edge_band,
        degree_bound,
        edge_band_fraction: deviations.iter().filter(|&&d| d <= edge_band).count() as f64 / n,
        degree_bound_fraction: finals
            .iter()
            .filter(|s| (s.max_degree as f64) <= degree_bound)
            .count() as f64
            / n,
        worst_edge_deviation: deviations.iter().copied().fold(0.0, f64::max),
        largest_max_degree: finals.iter().map(|s| s.max_degree).max().unwrap_or(0),
    }
}

/// `sup |p - q|` over `k <= k_report` and the total-variation distance of
/// the two profiles after renormalising each over `k <= k_report`.
pub fn distances(empirical: &[f64], theory: &[f64], k_report: usize) -> (f64, f64) {
    let get = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    let sup = (0..=k_report)
        .map(|k| (get(empirical, k) - get(theory, k)).abs())
        .fold(0.0, f64::max);
    let pe: f64 = (0..=k_report).map(|k| get(empirical, k)).sum();
    let pt: f64 = (0..=k_report).map(|k| get(theory, k)).sum();
    let tv = 0.5
        * (0..=k_report)
            .map(|k| (get(empirical, k) / pe - get(theory, k) / pt).abs())
            .sum::<f64>();
    (sup, tv)
}

/// Largest `|empirical - theory| / stderr` over `ks`.
pub fn max_z_score(profile: &MeanProfile, theory: &[f64], ks: &[usize]) -> f64 {
    ks.iter()
        .map(|&k| {
            let diff = (profile.at(k) - theory.get(k).copied().unwrap_or(0.0)).abs();
            let se = profile.stderr_at(k);
            if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub regime_declared: RegimeLabel,
    /// See [`detect_regime`].
    pub regime_detected: Option<RegimeLabel>,
    pub fitted_exponent: Option<f64>,
    pub fitted_exponent_stderr: Option<f64>,
    pub fitted_log_gamma: Option<f64>,
    pub fitted_log_gamma_stderr: Option<f64>,
    pub k_report: usize,
    pub sup_norm: Option<f64>,
    pub total_variation: Option<f64>,
    pub max_z_score: Option<f64>,
    pub pass: Option<bool>,
}

/// Theory-vs-profile distances; passes iff the TV distance is at most
/// [`TV_PASS_THRESHOLD`]. Fit fields are left empty for the caller.
pub fn compare(profile: &MeanProfile, theory: &TheoreticalSequence, k_report: usize) -> ComparisonReport {
    let (sup, tv) = distances(&profile.mean, theory.values(), k_report);
    let ks: Vec<usize> = (theory.m() as usize..=k_report).collect();
    ComparisonReport {
        regime_declared: theory.regime(),
        regime_detected: None,
        fitted_exponent: None,
        fitted_exponent_stderr: None,
        fitted_log_gamma: None,
        fitted_log_gamma_stderr: None,
        k_report,
        sup_norm: Some(sup),
        total_variation: Some(tv),
        max_z_score: Some(max_z_score(profile, theory.values(), &ks)),
        pass: Some(tv <= TV_PASS_THRESHOLD),
    }
}

/// [`detect_regime`] calls a tail geometric only if the fitted per-degree
/// decay `gamma` is below this.
pub const GEOMETRIC_DETECTION_CEILING: f64 = 0.9;

/// Regime read off the data alone. Successive ratios satisfy
/// `log(d_{k+1} / d_k) = log gamma + b/k + O(1/k^2)` with `log gamma = 0` for
/// a power law; the tail is called geometric when the fitted intercept is
/// negative at three jackknife standard errors and below
/// `log GEOMETRIC_DETECTION_CEILING` (the neglected `1/k^2` term biases power
/// laws slightly negative). Critical profiles also register as geometric on
/// finite windows.
pub fn detect_regime(histograms: &[DegreeHistogram], ks: &[usize]) -> Result<RegimeLabel, AnalysisError> {
    let pairs: Vec<usize> = ks.iter().copied().filter(|k| ks.contains(&(k + 1))).collect();
    if pairs.len() < MIN_FIT_POINTS {
        return Err(AnalysisError::WindowTooSparse(pairs.len()));
    }
    let intercept = |p: &MeanProfile| -> Result<f64, AnalysisError> {
        let mut pts = Vec::with_capacity(pairs.len());
        for &k in &pairs {
            let (a, b) = (p.at(k), p.at(k + 1));
            if a <= 0.0 {
                return Err(AnalysisError::NonPositive(k));
            }
            if b <= 0.0 {
                return Err(AnalysisError::NonPositive(k + 1));
            }
            pts.push((1.0 / k as f64, (b / a).ln()));
        }
        ols_line(&pts)
            .map(|(_, intercept)| intercept)
            .ok_or(AnalysisError::WindowTooSparse(pairs.len()))
    };
    let (r, se) = jackknife(histograms, intercept)?;
    Ok(if r < -3.0 * se && r < GEOMETRIC_DETECTION_CEILING.ln() {
        RegimeLabel::Exponential
    } else {
        RegimeLabel::PowerLaw
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(t: u64, trial_id: u64, counts: &[u64]) -> DegreeHistogram {
        DegreeHistogram {
            t,
            trial_id,
            counts: counts.to_vec(),
        }
    }

    #[test]
    fn identical_histograms_have_zero_stderr() {
        let h = [hist(3, 0, &[0, 2, 1]), hist(3, 1, &[0, 2, 1])];
        let p = aggregate(&h).unwrap();
        assert_eq!(p.mean_count, vec![0.0, 2.0, 1.0]);
        assert_eq!(p.mean, vec![0.0, 2.0 / 3.0, 1.0 / 3.0]);
        assert!(p.stderr.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn aggregate_rejects_mixed_times_and_single_trial() {
        assert!(matches!(
            aggregate(&[hist(3, 0, &[1]), hist(4, 1, &[1])]),
            Err(AnalysisError::MixedTimes(..))
        ));
        assert!(matches!(
            aggregate(&[hist(3, 0, &[1])]),
            Err(AnalysisError::TooFewTrials { .. })
        ));
    }

    #[test]
    fn stderr_formula() {
        // counts 1 and 3 at k = 0: mean 2, sample var 2, stderr 1.
        let p = aggregate(&[hist(1, 0, &[1]), hist(1, 1, &[3])]).unwrap();
        assert!((p.stderr[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn histogram_masses() {
        let h = hist(5, 0, &[1, 2, 0, 1]);
        assert_eq!(h.vertex_count(), 4);
        assert_eq!(h.degree_mass(), 5);
    }

    #[test]
    fn fit_recovers_exact_models() {
        let power: Vec<f64> = (0..60).map(|k| (k.max(1) as f64).powi(-3)).collect();
        let ks: Vec<usize> = (5..=50).collect();
        let f = fit_tail(&power, TailModel::PowerLaw, &ks).unwrap();
        assert!((f.parameter + 3.0).abs() < 1e-12);

        // d_k = 0.75^k k has beta - 1 = 1, i.e. beta = 2.
        let geo: Vec<f64> = (0..60).map(|k| 0.75f64.powi(k) * k as f64).collect();
        let f = fit_tail(&geo, TailModel::Exponential { beta: 2.0 }, &ks).unwrap();
        assert!((f.parameter - 0.75f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let v = vec![1.0; 20];
        assert!(matches!(
            fit_tail(&v, TailModel::PowerLaw, &[1, 2, 3]),
            Err(AnalysisError::WindowTooSparse(3))
        ));
        let mut v = vec![1.0; 20];
        v[4] = 0.0;
        assert!(matches!(
            fit_tail(&v, TailModel::PowerLaw, &(1..12).collect::<Vec<_>>()),
            Err(AnalysisError::NonPositive(4))
        ));
        assert!(matches!(
            fit_tail(&[1.0; 20], TailModel::Critical, &(1..12).collect::<Vec<_>>()),
            Err(AnalysisError::NoTailFit)
        ));
    }

    #[test]
    fn kernel_fit_recovers_gamma() {
        let kernel = KernelSpec::U2 {
            beta: -2.0,
            gamma: 0.75,
        };
        let profile: Vec<f64> = (0..20)
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    3.0 * kernel.eval(k, 1e-12).unwrap()
                }
            })
            .collect();
        let ks: Vec<usize> = (4..=15).collect();
        let f = fit_exponential_kernel(&profile, -2.0, &ks, 1e-11).unwrap();
        assert!((f.parameter - 0.75f64.ln()).abs() < 1e-6, "{}", f.parameter);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-5);
    }

    #[test]
    fn least_squares_three_columns() {
        let rows: Vec<Vec<f64>> = (1..10)
            .map(|k| vec![1.0, (k as f64).ln(), k as f64])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 0.5 - 2.0 * r[1] + 0.1 * r[2])
            .collect();
        let b = least_squares(&rows, &y).unwrap();
        assert!((b[0] - 0.5).abs() < 1e-9 && (b[1] + 2.0).abs() < 1e-9 && (b[2] - 0.1).abs() < 1e-9);
        assert!(least_squares(&[vec![1.0, 1.0], vec![2.0, 2.0]], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn self_distance_is_zero() {
        let v = vec![0.1, 0.4, 0.2, 0.05];
        assert_eq!(distances(&v, &v, 3), (0.0, 0.0));
        let (sup, tv) = distances(&[0.5, 0.5], &[1.0, 0.0], 1);
        assert_eq!(sup, 0.5);
        assert!((tv - 0.5).abs() < 1e-15);
    }

    #[test]
    fn jackknife_of_mean_matches_stderr() {
        let hs: Vec<DegreeHistogram> = [1u64, 4, 2, 7, 3]
            .iter()
            .enumerate()
            .map(|(i, &c)| hist(1, i as u64, &[c]))
            .collect();
        let (est, se) = jackknife(&hs, |p| Ok(p.mean[0])).unwrap();
        let p = aggregate(&hs).unwrap();
        assert!((est - p.mean[0]).abs() < 1e-12);
        // For the sample mean the jackknife reproduces the usual stderr.
        assert!((se - p.stderr[0]).abs() < 1e-12);
    }

    #[test]
    fn concentration_report() {
        let c = crate::params::ModelParams::new(1.0, 1.0, 1)
            .unwrap()
            .derive(0.1)
            .unwrap();
        let finals = [TrajectorySample {
            t: 1000,
            edges: 999,
            vertices: 1000,
            max_degree: 40,
        }];
        let r = check_concentration(&finals, &c);
        assert_eq!(r.edge_band_fraction, 1.0);
        assert_eq!(r.degree_bound_fraction, 1.0);
    }
}
