//! Variable exponents α(·) and their regime classification.

use crate::error::{Error, Result};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Behaviour of the Abel kernel k(t) = t^{−α(t)}/Γ(1−α(t)) at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// 0 < α(0) < 1: k is singular at 0.
    Interior,
    /// α(0) = 0: k(0⁺) = 1.
    ZeroStart,
    /// α(0) = 1, α′(0) ≠ 0: k(0⁺) = −α′(0).
    UnitStart,
}

/// α(·) with two derivatives. Time exponents take values in (0, 1) on the open
/// interval (0, horizon); space exponents take values in (1, 2) on (0, 1).
#[derive(Clone)]
pub struct ExponentFunction {
    alpha: Scalar,
    alpha_prime: Scalar,
    alpha_second: Scalar,
    /// Upper bound for |α′| + |α″| + |α‴|.
    pub smoothness_bound: f64,
    pub alpha0: f64,
    pub alpha_at_1: f64,
    /// `None` for space exponents.
    pub regime: Option<Regime>,
    pub horizon: f64,
    constant: bool,
    label: String,
}

impl fmt::Debug for ExponentFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExponentFunction")
            .field("label", &self.label)
            .field("alpha0", &self.alpha0)
            .field("regime", &self.regime)
            .field("horizon", &self.horizon)
            .finish()
    }
}

const SAMPLES: usize = 256;

impl ExponentFunction {
    pub fn new(
        alpha: Scalar,
        alpha_prime: Scalar,
        alpha_second: Scalar,
        smoothness_bound: f64,
        horizon: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain {
                what: "horizon",
                value: horizon,
                range: "(0, inf)",
            });
        }
        let alpha0 = alpha(0.0);
        let (lo, hi, regime) = if (0.0..=1.0).contains(&alpha0) {
            let regime = if alpha0 == 0.0 {
                Regime::ZeroStart
            } else if alpha0 == 1.0 {
                if alpha_prime(0.0) == 0.0 {
                    return Err(Error::Invalid(
                        "alpha(0) = 1 requires alpha'(0) != 0".into(),
                    ));
                }
                Regime::UnitStart
            } else {
                Regime::Interior
            };
            (0.0, 1.0, Some(regime))
        } else if alpha0 > 1.0 && alpha0 < 2.0 {
            (1.0, 2.0, None)
        } else {
            return Err(Error::Domain {
                what: "alpha(0)",
                value: alpha0,
                range: "[0, 1] or (1, 2)",
            });
        };
        let span = if regime.is_some() { horizon } else { 1.0 };
        for k in 1..SAMPLES {
            let t = span * k as f64 / SAMPLES as f64;
            let a = alpha(t);
            if !(a > lo && a < hi) {
                return Err(Error::Domain {
                    what: "alpha(t) on the open domain",
                    value: a,
                    range: if lo == 0.0 { "(0, 1)" } else { "(1, 2)" },
                });
            }
        }
        let alpha_at_1 = alpha(1.0);
        Ok(Self {
            alpha,
            alpha_prime,
            alpha_second,
            smoothness_bound,
            alpha0,
            alpha_at_1,
            regime,
            horizon,
            constant: false,
            label: label.into(),
        })
    }

    pub fn constant(a: f64) -> Result<Self> {
        let mut e = Self::new(
            Arc::new(move |_| a),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            0.0,
            1.0,
            format!("{a}"),
        )?;
        e.constant = true;
        Ok(e)
    }

    /// α(t) = a0 + slope·t.
    pub fn linear(a0: f64, slope: f64) -> Result<Self> {
        Self::linear_on(a0, slope, 1.0)
    }

    pub fn linear_on(a0: f64, slope: f64, horizon: f64) -> Result<Self> {
        if slope == 0.0 {
            return Self::constant(a0).and_then(|e| e.with_horizon(horizon));
        }
        Self::new(
            Arc::new(move |t| a0 + slope * t),
            Arc::new(move |_| slope),
            Arc::new(|_| 0.0),
            slope.abs(),
            horizon,
            format!("{a0}+{slope}*t"),
        )
    }

    /// α(t) = a0 + amp·sin(2πt).
    pub fn sine(a0: f64, amp: f64) -> Result<Self> {
        let w = 2.0 * PI;
        Self::new(
            Arc::new(move |t| a0 + amp * (w * t).sin()),
            Arc::new(move |t| amp * w * (w * t).cos()),
            Arc::new(move |t| -amp * w * w * (w * t).sin()),
            amp.abs() * (w + w * w + w * w * w),
            1.0,
            format!("{a0}+{amp}*sin(2*pi*t)"),
        )
    }

    pub fn with_horizon(self, horizon: f64) -> Result<Self> {
        let constant = self.constant;
        let mut e = Self::new(
            self.alpha,
            self.alpha_prime,
            self.alpha_second,
            self.smoothness_bound,
            horizon,
            self.label,
        )?;
        e.constant = constant;
        Ok(e)
    }

    pub fn alpha(&self, t: f64) -> f64 {
        (self.alpha)(t)
    }

    pub fn alpha_prime(&self, t: f64) -> f64 {
        (self.alpha_prime)(t)
    }

    pub fn alpha_second(&self, t: f64) -> f64 {
        (self.alpha_second)(t)
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn time_regime(&self) -> Result<Regime> {
        self.regime.ok_or(Error::NotTimeExponent)
    }

    /// (α(s) − α(0))/s, by Taylor expansion for tiny s.
    pub fn shift_ratio(&self, s: f64) -> f64 {
        if s < 1e-5 {
            self.alpha_prime(0.0) + 0.5 * s * self.alpha_second(0.0)
        } else {
            (self.alpha(s) - self.alpha0) / s
        }
    }

    /// The same exponent read from the right end: x ↦ α(1 − x).
    pub fn reflected(&self) -> Reflected<'_> {
        Reflected(self)
    }
}

/// View of x ↦ α(1 − x) used by the right-sided kernels.
pub struct Reflected<'a>(&'a ExponentFunction);

impl Reflected<'_> {
    pub fn alpha(&self, x: f64) -> f64 {
        self.0.alpha(1.0 - x)
    }

    pub fn alpha_prime(&self, x: f64) -> f64 {
        -self.0.alpha_prime(1.0 - x)
    }

    /// (α(1 − x) − α(1))/x.
    pub fn shift_ratio(&self, x: f64) -> f64 {
        if x < 1e-5 {
            -self.0.alpha_prime(1.0) + 0.5 * x * self.0.alpha_second(1.0)
        } else {
            (self.0.alpha(1.0 - x) - self.0.alpha_at_1) / x
        }
    }
}
