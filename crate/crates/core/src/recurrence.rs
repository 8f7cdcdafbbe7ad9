//! The limiting degree sequence `d_k` as the bounded solution of the
//! stationary mean-field recurrence, and the time-stepped mean-field
//! iteration it is the fixed profile of.
//!
//! The sequence is assembled as `d_k = D g(k) + w_k`: `g` is the regime's
//! homogeneous kernel, `w` a finite particular solution supported on
//! `1..m-1`, and `D` is fixed by the `k = 0` row.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::params::{DerivedConstants, ModelParams, RegimeLabel};
use crate::special::{estimate_asymptotic_constant, KernelSpec, SpecialError};

pub const DEFAULT_KMAX_POWER_LAW: usize = 2000;
pub const DEFAULT_KMAX_GEOMETRIC: usize = 500;

/// Grid used to extrapolate the kernel's asymptotic constant.
pub const ASYMPTOTIC_GRID: [u32; 4] = [256, 512, 1024, 2048];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecurrenceError {
    #[error("no limit theorem in the conjectured region alpha1 >= 2 alpha_c")]
    ConjecturedRegime,
    #[error("truncation kmax = {kmax} is below m + 2 = {min}")]
    TruncationTooSmall { kmax: usize, min: usize },
    #[error("start time t0 = {t0} is below |A1| kmax = {min}")]
    StartTooEarly { t0: u64, min: f64 },
    #[error("horizon {horizon} is not after the start time {t0}")]
    BadHorizon { t0: u64, horizon: u64 },
    #[error("mean-field mass went negative at k = {k}, t = {t}: {value:e}")]
    NegativeMass { k: usize, t: u64, value: f64 },
    #[error("mixing constant denominator vanished")]
    SingularBoundary,
    #[error(transparent)]
    Special(#[from] SpecialError),
}

pub fn default_kmax(regime: RegimeLabel) -> usize {
    match regime {
        RegimeLabel::PowerLaw => DEFAULT_KMAX_POWER_LAW,
        _ => DEFAULT_KMAX_GEOMETRIC,
    }
}

/// `w_1 .. w_{m-1}` (stored with `w[j-1] = w_j`); `w_k = 0` for `k >= m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticularSolution {
    pub w: Vec<f64>,
}

impl ParticularSolution {
    /// `w_k` for any `k`, zero outside `1..m-1`.
    pub fn at(&self, k: i64) -> f64 {
        if k >= 1 {
            self.w.get(k as usize - 1).copied().unwrap_or(0.0)
        } else {
            0.0
        }
    }
}

pub fn build_particular(params: &ModelParams, c: &DerivedConstants) -> ParticularSolution {
    let m = params.m() as usize;
    if m == 1 {
        return ParticularSolution { w: Vec::new() };
    }
    let mut w = vec![0.0; m + 1];
    w[m - 1] = -params.alpha1() / ((m - 1) as f64 * c.a0);
    for j in (1..m - 1).rev() {
        let jf = j as f64;
        w[j] = -(c.a2 * (jf + 2.0) * w[j + 2] + (c.a1 * (jf + 1.0) + c.b1) * w[j + 1])
            / (c.a0 * jf);
    }
    ParticularSolution {
        w: w[1..m].to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoreticalSequence {
    regime: RegimeLabel,
    kernel: KernelSpec,
    constants: DerivedConstants,
    m: u32,
    alpha1: f64,
    /// The mixing constant `D`.
    d_mix: f64,
    particular: ParticularSolution,
    /// `g(k)` for `k = 0..=kmax` (`g(0)` unused, stored as 0).
    g: Vec<f64>,
    /// `d_k` for `k = 0..=kmax`.
    d: Vec<f64>,
    /// `(sum_{k>kmax} g(k), sum_{k>kmax} k g(k))`.
    tail: (f64, f64),
}

/// Builds `d_0 .. d_kmax`, with each `g(k)` evaluated to relative
/// tolerance `tol`.
pub fn build_sequence(
    params: &ModelParams,
    c: &DerivedConstants,
    kmax: usize,
    tol: f64,
) -> Result<TheoreticalSequence, RecurrenceError> {
    let kernel = KernelSpec::for_constants(c).ok_or(RecurrenceError::ConjecturedRegime)?;
    let m = params.m() as usize;
    if kmax < m + 2 {
        return Err(RecurrenceError::TruncationTooSmall { kmax, min: m + 2 });
    }
    let mut g: Vec<f64> = (0..=kmax as u32)
        .into_par_iter()
        .map(|k| if k == 0 { Ok(0.0) } else { kernel.eval(k, tol) })
        .collect::<Result<_, SpecialError>>()?;
    g[0] = 0.0;
    let particular = build_particular(params, c);
    let w = |k: usize| particular.at(k as i64);

    let denom = 2.0 * c.a2 * g[2] + (c.a1 + c.b1) * g[1];
    if denom == 0.0 || !denom.is_finite() {
        return Err(RecurrenceError::SingularBoundary);
    }
    let d_mix = if m == 1 {
        -params.alpha1() / denom
    } else {
        -(2.0 * c.a2 * w(2) + (c.a1 + c.b1) * w(1)) / denom
    };
    let mut d: Vec<f64> = (0..=kmax).map(|k| d_mix * g[k] + w(k)).collect();
    // k = -1 row: A2 d_1 + B1 d_0 = 0.
    d[0] = -c.a2 * d[1] / c.b1;
    let tail = kernel.tail_sums(kmax as u32, tol)?;

    Ok(TheoreticalSequence {
        regime: c.regime,
        kernel,
        constants: *c,
        m: params.m(),
        alpha1: params.alpha1(),
        d_mix,
        particular,
        g,
        d,
        tail,
    })
}

impl TheoreticalSequence {
    pub fn regime(&self) -> RegimeLabel {
        self.regime
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.constants
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn kmax(&self) -> usize {
        self.d.len() - 1
    }

    /// The mixing constant `D`.
    pub fn mixing_constant(&self) -> f64 {
        self.d_mix
    }

    /// The constant `d = d_0`.
    pub fn d0(&self) -> f64 {
        self.d[0]
    }

    pub fn particular(&self) -> &ParticularSolution {
        &self.particular
    }

    /// `d_0 .. d_kmax`.
    pub fn values(&self) -> &[f64] {
        &self.d
    }

    /// `g(k)` for `1 <= k <= kmax`.
    pub fn kernel_value(&self, k: usize) -> Option<f64> {
        (k >= 1).then(|| self.g.get(k).copied()).flatten()
    }

    /// `d_k` for `-1 <= k <= kmax`; `d_{-1} = 0`.
    pub fn d(&self, k: i64) -> Option<f64> {
        match k {
            -1 => Some(0.0),
            k if k >= 0 => self.d.get(k as usize).copied(),
            _ => None,
        }
    }

    /// Recurrence residual at row `k` (for `-1 <= k <= kmax - 2`) relative
    /// to the largest participating term. Terms are measured before the
    /// cancellation between `D g(k)` and `w_k`, so rows where `d_k`
    /// vanishes exactly are still scaled meaningfully.
    pub fn residual(&self, k: i64) -> Option<f64> {
        if k < -1 || k + 2 > self.kmax() as i64 {
            return None;
        }
        let c = &self.constants;
        let kf = k as f64;
        let size = |j: i64| -> f64 {
            if j <= 0 {
                self.d(j).unwrap().abs()
            } else {
                (self.d_mix * self.g[j as usize]).abs() + self.particular.at(j).abs()
            }
        };
        let coeffs = [
            (c.a2 * (kf + 2.0) + c.b2, k + 2),
            (c.a1 * (kf + 1.0) + c.b1, k + 1),
            (c.a0 * kf + c.b0, k),
        ];
        let rhs = if k == self.m as i64 - 1 { self.alpha1 } else { 0.0 };
        let mut sum = rhs;
        let mut scale = rhs.abs().max(1e-300);
        for (coef, j) in coeffs {
            sum += coef * self.d(j).unwrap();
            scale = scale.max((coef * size(j)).abs());
        }
        Some(sum.abs() / scale)
    }

    /// Largest relative residual over rows `-1 ..= kmax - 2`.
    pub fn max_residual(&self) -> f64 {
        (-1..=self.kmax() as i64 - 2)
            .map(|k| self.residual(k).unwrap())
            .fold(0.0, f64::max)
    }

    /// `sum_{k>=0} d_k`, including the exact tail beyond `kmax`.
    pub fn mass(&self) -> f64 {
        self.d.iter().sum::<f64>() + self.d_mix * self.tail.0
    }

    /// `sum_k k d_k`, including the exact tail beyond `kmax`.
    pub fn degree_mass(&self) -> f64 {
        self.d
            .iter()
            .enumerate()
            .map(|(k, v)| k as f64 * v)
            .sum::<f64>()
            + self.d_mix * self.tail.1
    }

    /// `max_{1<=k<=kmax} k |d_k|`.
    pub fn sup_k_abs_d(&self) -> f64 {
        self.d
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, v)| k as f64 * v.abs())
            .fold(0.0, f64::max)
    }

    /// `C tail_shape(k)` in the power-law and exponential regimes and
    /// `C u_c(k)` at criticality.
    pub fn tail_form(&self, leading_constant: f64, k: usize) -> Option<f64> {
        if k == 0 {
            return None;
        }
        match self.kernel.tail_shape(k as u32) {
            Some(shape) => Some(leading_constant * shape),
            None => self.kernel_value(k).map(|g| leading_constant * g),
        }
    }
}

/// The constant `C` in `d_k ~ C k^(-1-beta)`, `C gamma^k k^(beta-1)` or
/// `d_k ~ C u_c(k)`. Kernels whose corrections decay slowly are retried on
/// grids scaled by 8, 64 and 512 before giving up.
pub fn leading_constant(seq: &TheoreticalSequence, tol: f64) -> Result<f64, RecurrenceError> {
    if let KernelSpec::Uc { .. } = seq.kernel {
        return Ok(seq.d_mix);
    }
    let mut result = Err(SpecialError::NotApplicable);
    for scale in [1, 8, 64, 512] {
        result = estimate_asymptotic_constant(seq.kernel, &ASYMPTOTIC_GRID.map(|k| k * scale), tol);
        if !matches!(result, Err(SpecialError::NoConvergence { .. })) {
            break;
        }
    }
    Ok(seq.d_mix * result?.constant)
}

/// `D(t0) = t0 d_k (1 + 0.5 u_k)` for the given `u_k` in `[-1, 1]`.
pub fn perturbed_profile(seq: &TheoreticalSequence, t0: u64, noise: &[f64]) -> Vec<f64> {
    seq.values()
        .iter()
        .zip(noise.iter().chain(std::iter::repeat(&0.0)))
        .map(|(d, u)| t0 as f64 * d * (1.0 + 0.5 * u))
        .collect()
}

/// Every vertex at degree `m`: `D_m(t0) = alpha1 t0`, zero elsewhere.
pub fn cold_profile(params: &ModelParams, t0: u64, kmax: usize) -> Vec<f64> {
    let mut v = vec![0.0; kmax + 1];
    if let Some(slot) = v.get_mut(params.m() as usize) {
        *slot = params.alpha1() * t0 as f64;
    }
    v
}

/// Iterates the expected-count recurrence
/// `D_k(t+1) = D_k(t) + [A2 (k+1) D_{k+1} + A1 k D_k + A0 (k-1) D_{k-1}] / t + alpha1 [k = m]`
/// from `init` (counts at time `t0`, indices `0..=kmax`) to `horizon`, and
/// returns `D_k(horizon) / horizon`. Mass pushed past `kmax` is dropped.
pub fn evolve_mean_field(
    params: &ModelParams,
    c: &DerivedConstants,
    t0: u64,
    horizon: u64,
    init: &[f64],
) -> Result<Vec<f64>, RecurrenceError> {
    let kmax = init.len().saturating_sub(1);
    let min = c.a1.abs() * kmax as f64;
    if (t0 as f64) < min || t0 == 0 {
        return Err(RecurrenceError::StartTooEarly { t0, min });
    }
    if horizon <= t0 {
        return Err(RecurrenceError::BadHorizon { t0, horizon });
    }
    let m = params.m() as usize;
    let alpha1 = params.alpha1();
    let up: Vec<f64> = (0..=kmax).map(|k| c.a0 * k as f64).collect();
    let stay: Vec<f64> = (0..=kmax).map(|k| c.a1 * k as f64).collect();
    let down: Vec<f64> = (0..=kmax).map(|k| c.a2 * k as f64).collect();
    let mut cur = init.to_vec();
    let mut next = vec![0.0; kmax + 1];
    for t in t0..horizon {
        let inv = 1.0 / t as f64;
        for k in 0..=kmax {
            let mut flow = stay[k] * cur[k];
            if k < kmax {
                flow += down[k + 1] * cur[k + 1];
            }
            if k >= 1 {
                flow += up[k - 1] * cur[k - 1];
            }
            next[k] = cur[k] + flow * inv;
        }
        if m <= kmax {
            next[m] += alpha1;
        }
        std::mem::swap(&mut cur, &mut next);
        if let Some((k, &value)) = cur.iter().enumerate().find(|(_, &v)| v < -1e-9) {
            return Err(RecurrenceError::NegativeMass { k, t: t + 1, value });
        }
    }
    let scale = 1.0 / horizon as f64;
    Ok(cur.into_iter().map(|v| v * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(a: f64, a1: f64, m: u32) -> (ModelParams, DerivedConstants) {
        let p = ModelParams::new(a, a1, m).unwrap();
        let c = p.derive(0.1).unwrap();
        (p, c)
    }

    #[test]
    fn particular_examples() {
        let (p, c) = setup(1.0, 1.0, 1);
        assert!(build_particular(&p, &c).w.is_empty());

        let (p, c) = setup(1.0, 1.0, 2);
        assert_eq!(c.a0, 0.5);
        assert_eq!(build_particular(&p, &c).w, vec![-2.0]);

        let (p, c) = setup(1.0, 1.0, 3);
        assert_eq!(build_particular(&p, &c).w, vec![-4.0, -1.0]);
    }

    #[test]
    fn particular_satisfies_backward_rows() {
        let (p, c) = setup(0.75, 0.5, 3);
        let w = build_particular(&p, &c);
        let r = c.a2 * 3.0 * w.at(3) + (c.a1 * 2.0 + c.b1) * w.at(2) + c.a0 * w.at(1);
        let scale = (c.a1 * 2.0 + c.b1).abs() * w.at(2).abs();
        assert!(r.abs() <= 1e-12 * scale);
        assert_eq!(w.at(3), 0.0);
    }

    #[test]
    fn exact_power_law_values() {
        // alpha = alpha1 = 1, m = 3: beta = 2, zeta = 0, D = 12, d_1 = d_2 = 0.
        let (p, c) = setup(1.0, 1.0, 3);
        let s = build_sequence(&p, &c, 100, 1e-12).unwrap();
        assert!((s.mixing_constant() - 12.0).abs() < 1e-9);
        assert!(s.values()[1].abs() < 1e-10 && s.values()[2].abs() < 1e-10);
        assert!((s.values()[3] - 0.4).abs() < 1e-10);
        assert_eq!(s.d(-1), Some(0.0));
        assert!(s.max_residual() < 1e-9);
    }

    #[test]
    fn errors() {
        let (p, c) = setup(0.55, 0.55, 1);
        assert_eq!(
            build_sequence(&p, &c, 100, 1e-10).unwrap_err(),
            RecurrenceError::ConjecturedRegime
        );
        let (p, c) = setup(1.0, 1.0, 5);
        assert!(matches!(
            build_sequence(&p, &c, 6, 1e-10),
            Err(RecurrenceError::TruncationTooSmall { kmax: 6, min: 7 })
        ));
    }

    #[test]
    fn masses_each_regime() {
        for (a, a1, m) in [(1.0, 1.0, 1), (0.6, 0.6, 2), (0.6, 0.4, 2)] {
            let (p, c) = setup(a, a1, m);
            let s = build_sequence(&p, &c, default_kmax(c.regime), 1e-10).unwrap();
            assert!((s.mass() / a1 - 1.0).abs() < 1e-6, "{a} {a1}: {}", s.mass());
            assert!((s.degree_mass() / (2.0 * c.eta) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn critical_leading_constant_is_d() {
        let (p, c) = setup(0.6, 0.4, 2);
        let s = build_sequence(&p, &c, 50, 1e-10).unwrap();
        assert_eq!(leading_constant(&s, 1e-10).unwrap(), s.mixing_constant());
    }

    #[test]
    fn mean_field_preconditions() {
        let (p, c) = setup(1.0, 1.0, 1);
        let init = cold_profile(&p, 10, 100);
        assert!(matches!(
            evolve_mean_field(&p, &c, 10, 1000, &init),
            Err(RecurrenceError::StartTooEarly { .. })
        ));
        assert!(matches!(
            evolve_mean_field(&p, &c, 1000, 1000, &cold_profile(&p, 1000, 100)),
            Err(RecurrenceError::BadHorizon { .. })
        ));
    }

    #[test]
    fn mean_field_fixed_point() {
        // Starting on t0 d_k the iteration stays there (up to the truncation).
        let (p, c) = setup(0.6, 0.6, 2);
        let s = build_sequence(&p, &c, 200, 1e-12).unwrap();
        let init = perturbed_profile(&s, 1000, &[]);
        let out = evolve_mean_field(&p, &c, 1000, 3000, &init).unwrap();
        for k in 0..=50 {
            assert!((out[k] - s.values()[k]).abs() < 1e-10, "k={k}");
        }
    }
}
