//! Model parameters `(alpha, alpha1, m)` and every constant derived from them.
//!
//! The process executes, at each step, a vertex addition with probability
//! `alpha1`, a pure edge addition with probability `alpha - alpha1`, and an
//! edge deletion with probability `1 - alpha`. Everything downstream (the
//! recurrence coefficients, the regime split, the Laplace kernels) is a
//! function of these three numbers.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for detecting `alpha1 == alpha_c` on floating inputs.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

/// Default `epsilon / eta`.
pub const DEFAULT_EPSILON_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{param} = {value} violates {constraint}")]
    OutOfRange {
        param: &'static str,
        constraint: &'static str,
        value: f64,
    },
    #[error("invalid probability literal {0:?}")]
    BadLiteral(String),
    #[error(
        "epsilon fraction {fraction} gives rho_eps = {rho} (must be < 1); use a smaller fraction"
    )]
    DegenerateEpsilon { fraction: f64, rho: f64 },
}

/// A probability given either as a float or as an exact ratio.
///
/// Exact ratios make the measure-zero critical case `alpha1 == 4 alpha - 2`
/// requestable without relying on a float tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Probability {
    Float(f64),
    Exact(Ratio<i64>),
}

impl Probability {
    pub fn value(self) -> f64 {
        match self {
            Probability::Float(x) => x,
            Probability::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
        }
    }

    fn exact(self) -> Option<Ratio<i64>> {
        match self {
            Probability::Exact(r) => Some(r),
            Probability::Float(_) => None,
        }
    }
}

impl From<f64> for Probability {
    fn from(x: f64) -> Self {
        Probability::Float(x)
    }
}

impl From<Ratio<i64>> for Probability {
    fn from(r: Ratio<i64>) -> Self {
        Probability::Exact(r)
    }
}

impl FromStr for Probability {
    type Err = ParamError;

    /// Accepts `"0.6"` or `"3/5"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ParamError::BadLiteral(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Probability::Exact(Ratio::new(n, d)))
        } else {
            s.parse::<f64>().map(Probability::Float).map_err(|_| bad())
        }
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Probability::Float(x) => write!(f, "{x}"),
            Probability::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    /// `alpha1 < alpha_c`: tail `C k^(-1-beta)`.
    PowerLaw,
    /// `alpha_c < alpha1 < 2 alpha_c`: tail `C gamma^k k^(beta-1)`.
    Exponential,
    /// `alpha1 == alpha_c`: tail `C u_c(k)`.
    Critical,
    /// `alpha1 >= 2 alpha_c`: no theory curve.
    Conjectured,
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegimeLabel::PowerLaw => "PowerLaw",
            RegimeLabel::Exponential => "Exponential",
            RegimeLabel::Critical => "Critical",
            RegimeLabel::Conjectured => "Conjectured",
        };
        f.write_str(s)
    }
}

/// Validated `(alpha, alpha1, m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    alpha: f64,
    alpha1: f64,
    m: u32,
    exact: Option<(Ratio<i64>, Ratio<i64>)>,
    theorem_applicable: bool,
}

impl ModelParams {
    /// Checks `1/2 < alpha <= 1`, `0 < alpha1 <= alpha` and `m >= 1`.
    ///
    /// `alpha1 >= 2 alpha_c` is accepted (the process is still well defined)
    /// but clears [`ModelParams::theorem_applicable`].
    pub fn new(
        alpha: impl Into<Probability>,
        alpha1: impl Into<Probability>,
        m: u32,
    ) -> Result<Self, ParamError> {
        let (alpha, alpha1) = (alpha.into(), alpha1.into());
        let (a, a1) = (alpha.value(), alpha1.value());
        if !(a > 0.5 && a <= 1.0) {
            return Err(ParamError::OutOfRange {
                param: "alpha",
                constraint: "1/2 < alpha <= 1",
                value: a,
            });
        }
        if !(a1 > 0.0 && a1 <= a) {
            return Err(ParamError::OutOfRange {
                param: "alpha1",
                constraint: "0 < alpha1 <= alpha",
                value: a1,
            });
        }
        if m == 0 {
            return Err(ParamError::OutOfRange {
                param: "m",
                constraint: "m >= 1",
                value: 0.0,
            });
        }
        let exact = alpha.exact().zip(alpha1.exact());
        let mut params = ModelParams {
            alpha: a,
            alpha1: a1,
            m,
            exact,
            theorem_applicable: true,
        };
        params.theorem_applicable = params.classify() != RegimeLabel::Conjectured;
        Ok(params)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// False in the region `alpha1 >= 2 alpha_c`, where no limit theorem is
    /// available. Simulation is still permitted there.
    pub fn theorem_applicable(&self) -> bool {
        self.theorem_applicable
    }

    pub fn alpha_c(&self) -> f64 {
        4.0 * self.alpha - 2.0
    }

    /// Expected edges per unit time, `alpha_c m / 2`.
    pub fn eta(&self) -> f64 {
        self.alpha_c() * self.m as f64 / 2.0
    }

    pub fn classify(&self) -> RegimeLabel {
        if let Some((a, a1)) = self.exact {
            let ac = Ratio::from_integer(4) * a - Ratio::from_integer(2);
            return if a1 == ac {
                RegimeLabel::Critical
            } else if a1 >= Ratio::from_integer(2) * ac {
                RegimeLabel::Conjectured
            } else if a1 > ac {
                RegimeLabel::Exponential
            } else {
                RegimeLabel::PowerLaw
            };
        }
        let ac = self.alpha_c();
        if (self.alpha1 - ac).abs() <= CRITICAL_TOLERANCE {
            RegimeLabel::Critical
        } else if self.alpha1 >= 2.0 * ac - CRITICAL_TOLERANCE {
            RegimeLabel::Conjectured
        } else if self.alpha1 > ac {
            RegimeLabel::Exponential
        } else {
            RegimeLabel::PowerLaw
        }
    }

    pub fn derive(&self, epsilon_fraction: f64) -> Result<DerivedConstants, ParamError> {
        DerivedConstants::new(self, epsilon_fraction)
    }
}

/// Every constant the rest of the crate needs, computed once.
///
/// The recurrence coefficients are those of the mean-field master equation
/// `(A2 (k+2) + B2) d[k+2] + (A1 (k+1) + B1) d[k+1] + (A0 k + B0) d[k] = -alpha1 [k = m-1]`,
/// and `A`, `B` are the coefficients of `phi1(t) = A t^2 - (A+B) t + B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub regime: RegimeLabel,
    pub alpha_c: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub rho_eps: f64,
    /// `alpha_c / (alpha_c - alpha1)`; `None` at criticality.
    pub beta: Option<f64>,
    /// `1 - (alpha1 - alpha_c) / (2 (1 - alpha))`; infinite at `alpha = 1`.
    pub gamma: f64,
    pub theta: f64,
    /// `alpha_c / (2 (1 - alpha))`; infinite at `alpha = 1`.
    pub mu: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    /// `A = A2`.
    pub a: f64,
    /// `B = A0 = (2 alpha - alpha1) / alpha_c`.
    pub b: f64,
    /// `A / B`, the pole parameter of the power-law kernel.
    pub zeta: f64,
}

impl DerivedConstants {
    fn new(p: &ModelParams, epsilon_fraction: f64) -> Result<Self, ParamError> {
        if !(epsilon_fraction > 0.0 && epsilon_fraction < 1.0) {
            return Err(ParamError::OutOfRange {
                param: "epsilon_fraction",
                constraint: "0 < epsilon_fraction < 1",
                value: epsilon_fraction,
            });
        }
        let (alpha, alpha1, m) = (p.alpha, p.alpha1, p.m as f64);
        let regime = p.classify();
        let alpha_c = p.alpha_c();
        let eta = p.eta();
        let epsilon = epsilon_fraction * eta;
        let rho_eps = if alpha1 >= alpha_c || regime == RegimeLabel::Critical {
            0.5
        } else {
            (m * (alpha_c - alpha1) / (2.0 * (eta - epsilon))).max(0.5)
        };
        if rho_eps >= 1.0 {
            return Err(ParamError::DegenerateEpsilon {
                fraction: epsilon_fraction,
                rho: rho_eps,
            });
        }

        let beta = (regime != RegimeLabel::Critical).then(|| alpha_c / (alpha_c - alpha1));
        let gamma = 1.0 - (alpha1 - alpha_c) / (2.0 * (1.0 - alpha));
        let theta = (2.0 * alpha_c - alpha1) / (2.0 * alpha_c);
        let mu = alpha_c / (2.0 * (1.0 - alpha));

        let denom = 2.0 * alpha - 1.0;
        let a2 = (1.0 - alpha) / denom;
        let a1 = -(2.0 - alpha1) / (2.0 * denom);
        let a0 = (2.0 * alpha - alpha1) / (2.0 * denom);
        let a = a2;
        let b = (2.0 * alpha - alpha1) / alpha_c;

        Ok(DerivedConstants {
            regime,
            alpha_c,
            eta,
            epsilon,
            rho_eps,
            beta,
            gamma,
            theta,
            mu,
            a0,
            a1,
            a2,
            b0: 0.0,
            b1: -1.0,
            b2: 0.0,
            a,
            b,
            zeta: a / b,
        })
    }

    /// `phi1(t) = A2 t^2 + A1 t + A0`.
    pub fn phi1(&self, t: f64) -> f64 {
        (self.a2 * t + self.a1) * t + self.a0
    }

    /// `phi0(t) = B2 t^2 + B1 t + B0`, which reduces to `-t`.
    pub fn phi0(&self, t: f64) -> f64 {
        (self.b2 * t + self.b1) * t + self.b0
    }

    /// Tail exponent `-(1 + beta)` in the power-law regime.
    pub fn power_law_exponent(&self) -> Option<f64> {
        match self.regime {
            RegimeLabel::PowerLaw => self.beta.map(|b| -(1.0 + b)),
            _ => None,
        }
    }
}
