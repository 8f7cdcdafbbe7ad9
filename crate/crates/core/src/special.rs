//! Integral-representation solutions of the homogeneous degree recurrence.
//!
//! Each solution has the form `u(k) = int_0^b t^(k-1) v(t) dt`:
//!
//! * power law: `u1(k) = int_0^1 t^(k-1) ((1-t)/(1-zeta t))^beta dt`, `beta > 1`
//! * exponential: `u2(k) = gamma^(k-beta) int_0^1 t^(k-1) ((1-t)/(1-gamma t))^(-beta) dt`, `beta < -1`
//! * critical: `uc(k) = int_0^1 t^(k-1) exp(-mu/(1-t)) dt`
//!
//! For large `k` the mass of `t^(k-1)` sits within `O(1/k)` of `t = 1`, so all
//! integrals are evaluated after the change of variables `t = 1 - e^(-s)`
//! on a log scale, centred on the (unique, the log-integrand is concave)
//! peak in `s`.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::Serialize;
use thiserror::Error;

use crate::params::{DerivedConstants, RegimeLabel};
use crate::quad::{self, QuadError};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Default largest `k` accepted by [`uc_closed_form`].
pub const CLOSED_FORM_MAX_K: u32 = 15;

/// Largest tolerated `condition * eps` for the closed form.
pub const CLOSED_FORM_BUDGET: f64 = 1e-8;

// Integration is cut where the integrand falls below e^-CUTOFF of its peak.
const CUTOFF: f64 = 60.0;
const MAX_PANELS: usize = 4000;

// Panel roundoff makes relative errors much below this unreachable.
const QUAD_FLOOR: f64 = 1e-13;

fn quad_tolerance(tol: f64) -> f64 {
    (tol * 0.1).max(QUAD_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("k must be >= 1")]
    BadIndex,
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("closed form unstable at k = {k}: condition number {condition:e}")]
    UnstableEvaluation { k: u32, condition: f64 },
    #[error("asymptotic constant did not converge: last estimates {previous} and {last}")]
    NoConvergence { previous: f64, last: f64 },
    #[error("operation not defined for this kernel")]
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KernelSpec {
    U1 { beta: f64, zeta: f64 },
    U2 { beta: f64, gamma: f64 },
    Uc { mu: f64 },
}

/// `int_0^1 x^n (1-x)^p (1-z x)^(-q) dx`, or
/// `int_0^1 x^n exp(-mu/(1-x)) (1-x)^(-j) dx`.
#[derive(Debug, Clone, Copy)]
enum Integrand {
    Beta { n: f64, p: f64, z: f64, q: f64 },
    Exp { n: f64, mu: f64, j: f64 },
}

impl Integrand {
    /// Log of the integrand in `s`, including the Jacobian `e^-s`.
    fn ln_at(&self, s: f64) -> f64 {
        let x = -(-s).exp_m1();
        let ln_x = |n: f64| if n == 0.0 { 0.0 } else { n * x.ln() };
        match *self {
            Integrand::Beta { n, p, z, q } => {
                let pole = if q == 0.0 { 0.0 } else { q * (-z * x).ln_1p() };
                ln_x(n) - (p + 1.0) * s - pole
            }
            Integrand::Exp { n, mu, j } => ln_x(n) - mu * s.exp() + (j - 1.0) * s,
        }
    }

    fn ln_integral(&self, rel_tol: f64) -> Result<f64, SpecialError> {
        let h = |s: f64| self.ln_at(s);

        // Bracket the maximum of the concave log-integrand, then golden-section.
        let mut hi = 1.0;
        while h(2.0 * hi) > h(hi) {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(SpecialError::InvalidKernel(
                    "integrand does not decay".into(),
                ));
            }
        }
        let (mut lo, mut up) = (0.0_f64, 2.0 * hi);
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = up - inv_phi * (up - lo);
        let mut x2 = lo + inv_phi * (up - lo);
        let (mut f1, mut f2) = (h(x1), h(x2));
        for _ in 0..200 {
            if up - lo <= 1e-12 * (1.0 + up) {
                break;
            }
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (up - lo);
                f2 = h(x2);
            } else {
                up = x2;
                x2 = x1;
                f2 = f1;
                x1 = up - inv_phi * (up - lo);
                f1 = h(x1);
            }
        }
        let mut peak = 0.5 * (lo + up);
        let mut h_peak = h(peak);
        if h(0.0) >= h_peak {
            peak = 0.0;
            h_peak = h(0.0);
        }
        if !h_peak.is_finite() {
            return Err(SpecialError::InvalidKernel(format!(
                "non-finite log-integrand peak {h_peak}"
            )));
        }
        let floor = h_peak - CUTOFF;

        let bisect = |mut inside: f64, mut outside: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (inside + outside);
                if h(mid) > floor {
                    inside = mid;
                } else {
                    outside = mid;
                }
                if (inside - outside).abs() <= 1e-9 * (1.0 + inside.abs()) {
                    break;
                }
            }
            outside
        };
        let s_lo = if h(0.0) > floor { 0.0 } else { bisect(peak, 0.0) };
        let mut step = peak.max(1.0);
        let mut far = peak + step;
        while h(far) > floor {
            step *= 2.0;
            far = peak + step;
        }
        let s_hi = bisect(peak, far);

        let mut breaks = vec![s_lo];
        if peak > s_lo {
            breaks.push(peak);
        }
        breaks.push(s_hi);
        let est = quad::integrate(
            |s| (h(s) - h_peak).exp(),
            &breaks,
            0.0,
            rel_tol,
            MAX_PANELS,
        )?;
        Ok(h_peak + est.value.ln())
    }
}

impl KernelSpec {
    /// The kernel for the regime of `c`; `None` in the conjectured region.
    pub fn for_constants(c: &DerivedConstants) -> Option<KernelSpec> {
        match c.regime {
            RegimeLabel::PowerLaw => Some(KernelSpec::U1 {
                beta: c.beta?,
                zeta: c.zeta,
            }),
            RegimeLabel::Exponential => Some(KernelSpec::U2 {
                beta: c.beta?,
                gamma: c.gamma,
            }),
            RegimeLabel::Critical => Some(KernelSpec::Uc { mu: c.mu }),
            RegimeLabel::Conjectured => None,
        }
    }

    pub fn validate(&self) -> Result<(), SpecialError> {
        let ok = match *self {
            KernelSpec::U1 { beta, zeta } => beta > 1.0 && (0.0..1.0).contains(&zeta),
            KernelSpec::U2 { beta, gamma } => beta < -1.0 && gamma > 0.0 && gamma < 1.0,
            KernelSpec::Uc { mu } => mu > 0.0 && mu.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(SpecialError::InvalidKernel(format!("{self:?}")))
        }
    }

    /// Upper integration limit `b` in the unscaled representation.
    pub fn upper_limit(&self) -> f64 {
        match *self {
            KernelSpec::U2 { gamma, .. } => gamma,
            _ => 1.0,
        }
    }

    /// The weight `v(0)` of the unscaled representation.
    pub fn weight_at_zero(&self) -> f64 {
        match *self {
            KernelSpec::U1 { .. } => 1.0,
            KernelSpec::U2 { beta, gamma } => gamma.powf(-beta),
            KernelSpec::Uc { mu } => (-mu).exp(),
        }
    }

    /// `int_0^b t^n v(t) (1-t)^(-j) dt` as `(log prefactor, integrand)`.
    fn moment(&self, n: u32, j: u32) -> (f64, Integrand) {
        let (n, j) = (n as f64, j as f64);
        match *self {
            KernelSpec::U1 { beta, zeta } => (
                0.0,
                Integrand::Beta {
                    n,
                    p: beta - j,
                    z: zeta,
                    q: beta,
                },
            ),
            KernelSpec::U2 { beta, gamma } => (
                (n + 1.0 - beta) * gamma.ln(),
                Integrand::Beta {
                    n,
                    p: -beta,
                    z: gamma,
                    q: j - beta,
                },
            ),
            KernelSpec::Uc { mu } => (0.0, Integrand::Exp { n, mu, j }),
        }
    }

    pub fn ln_eval(&self, k: u32, tol: f64) -> Result<f64, SpecialError> {
        self.validate()?;
        if k == 0 {
            return Err(SpecialError::BadIndex);
        }
        let (prefactor, integrand) = self.moment(k - 1, 0);
        Ok(prefactor + integrand.ln_integral(quad_tolerance(tol))?)
    }

    /// `u(k)` to relative tolerance `tol`; requests much below `1e-12` get
    /// the quadrature roundoff floor instead.
    pub fn eval(&self, k: u32, tol: f64) -> Result<f64, SpecialError> {
        self.ln_eval(k, tol).map(f64::exp)
    }

    /// `(sum_{k > kmax} u(k), sum_{k > kmax} k u(k))`, evaluated exactly
    /// through `sum_{k>K} t^(k-1) = t^K/(1-t)` under the integral.
    pub fn tail_sums(&self, kmax: u32, tol: f64) -> Result<(f64, f64), SpecialError> {
        self.validate()?;
        let moment = |j: u32| -> Result<f64, SpecialError> {
            let (prefactor, integrand) = self.moment(kmax, j);
            Ok((prefactor + integrand.ln_integral(quad_tolerance(tol))?).exp())
        };
        let first = moment(1)?;
        let second = moment(2)?;
        Ok((first, second + kmax as f64 * first))
    }

    fn tail_scale_ln(&self, k: f64) -> Result<f64, SpecialError> {
        match *self {
            KernelSpec::U1 { beta, .. } => Ok((1.0 + beta) * k.ln()),
            KernelSpec::U2 { beta, gamma } => Ok(-k * gamma.ln() + (1.0 - beta) * k.ln()),
            KernelSpec::Uc { .. } => Err(SpecialError::NotApplicable),
        }
    }

    /// The leading tail shape `k^(-1-beta)` or `gamma^k k^(beta-1)`
    /// (unit constant); `None` for `Uc`, which is its own tail form.
    pub fn tail_shape(&self, k: u32) -> Option<f64> {
        self.tail_scale_ln(k as f64).ok().map(|x| (-x).exp())
    }
}

/// Memoized `u(k)` for one kernel; safe to share between threads.
#[derive(Debug)]
pub struct UTable {
    kernel: KernelSpec,
    tol: f64,
    cache: RwLock<HashMap<u32, f64>>,
}

impl UTable {
    pub fn new(kernel: KernelSpec, tol: f64) -> Result<Self, SpecialError> {
        kernel.validate()?;
        Ok(UTable {
            kernel,
            tol,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn get(&self, k: u32) -> Result<f64, SpecialError> {
        if let Some(&v) = self.cache.read().expect("poisoned memo").get(&k) {
            return Ok(v);
        }
        let v = self.kernel.eval(k, self.tol)?;
        self.cache.write().expect("poisoned memo").insert(k, v);
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.cache.read().expect("poisoned memo").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `u(k)` by quadrature at the default tolerance.
pub fn eval_u(kernel: KernelSpec, k: u32, tol: f64) -> Result<f64, SpecialError> {
    kernel.eval(k, tol)
}

/// `E2(mu) = int_1^inf t^-2 e^(-mu t) dt`, integrated over doubling panels
/// `[1,2], [2,4], ...` until the remainder bound drops below `1e-16` of the sum.
pub fn exp_integral_e2(mu: f64) -> Result<f64, SpecialError> {
    if !(mu > 0.0) {
        return Err(SpecialError::InvalidKernel(format!("mu = {mu}")));
    }
    let f = |t: f64| (-mu * t).exp() / (t * t);
    let mut total = 0.0;
    let mut a = 1.0;
    loop {
        let b = 2.0 * a;
        total += quad::integrate(f, &[a, b], 0.0, 1e-13, 200)?.value;
        // int_b^inf t^-2 e^(-mu t) <= e^(-mu b) / (mu b^2)
        let remainder = (-mu * b).exp() / (mu * b * b);
        if remainder <= 1e-16 * total {
            return Ok(total);
        }
        a = b;
    }
}

/// Neumaier-compensated sum plus the sum of magnitudes.
fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut sum, mut comp, mut abs) = (0.0f64, 0.0f64, 0.0f64);
    for x in terms {
        abs += x.abs();
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    (sum + comp, abs)
}

/// Finite-sum form of `uc(k)`, with the default ceiling on `k`.
pub fn uc_closed_form(mu: f64, k: u32) -> Result<f64, SpecialError> {
    uc_closed_form_with(mu, k, CLOSED_FORM_MAX_K, CLOSED_FORM_BUDGET)
}

/// Finite-sum form of `uc(k)`.
///
/// With `x = 1/(1-t)`, `uc(k) = sum_n C(k-1, n) (-1)^n E_{n+2}(mu)`, and the
/// recursion `E_{n+1} = (e^-mu - mu E_n)/n` unrolls every `E_{n+2}` into an
/// `e^-mu` polynomial plus a multiple of `E_2(mu)`:
///
/// `uc(k) = e^-mu sum_{n<k} sum_{l<n} C(k-1,n) (-1)^(n+l) mu^l (n-l)!/(n+1)!`
/// `      + E_2(mu) sum_{n<k} C(k-1,n) mu^n/(n+1)!`
///
/// The alternating sums cancel catastrophically as `k` grows; the result is
/// rejected when `condition * eps` exceeds `budget`.
pub fn uc_closed_form_with(mu: f64, k: u32, max_k: u32, budget: f64) -> Result<f64, SpecialError> {
    if k == 0 {
        return Err(SpecialError::BadIndex);
    }
    KernelSpec::Uc { mu }.validate()?;
    if k > max_k {
        return Err(SpecialError::UnstableEvaluation {
            k,
            condition: f64::INFINITY,
        });
    }
    let e2 = exp_integral_e2(mu)?;
    let e_mu = (-mu).exp();
    let mut terms = Vec::new();
    let mut binom = 1.0; // C(k-1, n)
    for n in 0..k {
        if n > 0 {
            binom *= (k - n) as f64 / n as f64;
        }
        // (n-l)!/(n+1)! for l = 0: 1/(n+1); each further l divides by (n-l+1).
        let mut ratio = 1.0 / (n as f64 + 1.0);
        let mut mu_pow = 1.0;
        for l in 0..n {
            let sign = if (n + l) % 2 == 0 { 1.0 } else { -1.0 };
            terms.push(sign * binom * mu_pow * ratio * e_mu);
            ratio /= (n - l) as f64;
            mu_pow *= mu;
        }
        // After the loop, ratio = 1/(n+1)! and mu_pow = mu^n.
        terms.push(binom * mu_pow * ratio * e2);
    }
    let (sum, abs) = compensated_sum(terms);
    let condition = abs / sum.abs();
    if !(condition * f64::EPSILON <= budget) {
        return Err(SpecialError::UnstableEvaluation { k, condition });
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticConstant {
    /// Extrapolated limit of `u(k) / tail_shape(k)`.
    pub constant: f64,
    /// Fitted order of the correction, `|a(k) - constant| ~ k^-rate`.
    pub convergence_rate: f64,
    /// Richardson estimates for consecutive grid pairs.
    pub estimates: Vec<f64>,
}

/// Extracts the constant in `u(k) = (1 + O(1/k)) D k^(-1-beta)` (U1) or
/// `u(k) = (1 + O(1/k)) D gamma^k k^(beta-1)` (U2) by Richardson
/// extrapolation of `a(k) = u(k) / tail_shape(k)` along `k_grid`: first order
/// between neighbours (these must agree to 1% at the top of the grid), then
/// second order over the last three points.
pub fn estimate_asymptotic_constant(
    kernel: KernelSpec,
    k_grid: &[u32],
    tol: f64,
) -> Result<AsymptoticConstant, SpecialError> {
    if matches!(kernel, KernelSpec::Uc { .. }) {
        return Err(SpecialError::NotApplicable);
    }
    if k_grid.len() < 3
        || k_grid.windows(2).any(|w| w[1] <= w[0])
        || *k_grid.last().unwrap() < 512
    {
        return Err(SpecialError::InvalidKernel(
            "k_grid must be increasing, have >= 3 points and reach 512".into(),
        ));
    }
    let scaled: Vec<(f64, f64)> = k_grid
        .iter()
        .map(|&k| {
            let kf = k as f64;
            Ok((kf, (kernel.ln_eval(k, tol)? + kernel.tail_scale_ln(kf)?).exp()))
        })
        .collect::<Result<_, SpecialError>>()?;
    // a(k) = D + c/k  =>  k a(k) is linear in k with slope D.
    let estimates: Vec<f64> = scaled
        .windows(2)
        .map(|w| (w[1].0 * w[1].1 - w[0].0 * w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let last = estimates[estimates.len() - 1];
    let previous = estimates[estimates.len() - 2];
    if (last - previous).abs() > 0.01 * last.abs() {
        return Err(SpecialError::NoConvergence { previous, last });
    }
    // R_i = D - c2 / (k_i k_{i+1}) + O(k^-3).
    let n = scaled.len();
    let p1 = scaled[n - 3].0 * scaled[n - 2].0;
    let p2 = scaled[n - 2].0 * scaled[n - 1].0;
    let constant = (p2 * last - p1 * previous) / (p2 - p1);
    let pts: Vec<(f64, f64)> = scaled
        .iter()
        .filter_map(|&(k, a)| {
            let gap = (a - constant).abs();
            (gap > 0.0).then(|| (k.ln(), gap.ln()))
        })
        .collect();
    let convergence_rate = -crate::analysis::ols_slope(&pts).unwrap_or(f64::NAN);
    Ok(AsymptoticConstant {
        constant,
        convergence_rate,
        estimates,
    })
}

/// Right-hand side of `2 A2 u(2) + (A1 + B1) u(1) = -phi1(0) v(0)`.
pub fn boundary_value(kernel: &KernelSpec, c: &DerivedConstants) -> f64 {
    -c.phi1(0.0) * kernel.weight_at_zero()
}

/// Residual of the homogeneous recurrence at row `k` and the largest
/// magnitude among its three terms.
pub fn homogeneous_residual(c: &DerivedConstants, k: u32, u: [f64; 3]) -> (f64, f64) {
    let kf = k as f64;
    let terms = [
        (c.a2 * (kf + 2.0) + c.b2) * u[2],
        (c.a1 * (kf + 1.0) + c.b1) * u[1],
        (c.a0 * kf + c.b0) * u[0],
    ];
    let scale = terms.iter().fold(1e-300f64, |m, t| m.max(t.abs()));
    (terms.iter().sum(), scale)
}
