//! The Abel integral equation (k * u)(t) = f(t) with variable exponent,
//! reduced to a second-kind Volterra equation u + K * u = r in each regime:
//!
//! * Interior: K = g′, r = β_{α₀} f(0) + β_{α₀} * f′.
//! * ZeroStart: K = k′, r = f′.
//! * UnitStart: K = k′/k(0), r = f′/k(0) with k(0) = −α′(0).

use crate::error::{Error, Result};
use crate::exponent::{ExponentFunction, Regime, Scalar};
use crate::kernels::{build_kernel_table, eval_abel_kernel, eval_g_tilde};
use crate::quadrature::TimeGrid;
use crate::rules::{adaptive, gauss_jacobi, gauss_legendre, graded_jacobi, Grading, Rule};
use crate::special::rgamma;
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Clone)]
pub struct AbelProblem {
    pub exponent: ExponentFunction,
    pub f: Scalar,
    pub f_prime: Scalar,
    pub horizon: f64,
}

impl AbelProblem {
    pub fn new(
        exponent: ExponentFunction,
        f: Scalar,
        f_prime: Scalar,
        horizon: f64,
    ) -> Result<Self> {
        let regime = exponent.time_regime()?;
        if !(horizon > 0.0) {
            return Err(Error::Domain {
                what: "T",
                value: horizon,
                range: "(0, inf)",
            });
        }
        let p = Self {
            exponent,
            f,
            f_prime,
            horizon,
        };
        p.check_constraint(regime)?;
        Ok(p)
    }

    pub fn regime(&self) -> Regime {
        self.exponent
            .time_regime()
            .expect("validated on construction")
    }

    fn check_constraint(&self, regime: Regime) -> Result<()> {
        let f0 = (self.f)(0.0);
        match regime {
            Regime::Interior => Ok(()),
            Regime::UnitStart if self.exponent.alpha_prime(0.0) == 0.0 => {
                Err(Error::UnsupportedRegime(Regime::UnitStart))
            }
            r if f0.abs() > 1e-14 => Err(Error::ConstraintViolation {
                value: f0,
                regime: r,
            }),
            _ => Ok(()),
        }
    }

    /// Data f = k * u and f′ = u(0)k + k * u′ for a manufactured solution.
    pub fn manufactured(
        exponent: ExponentFunction,
        u: Scalar,
        u_prime: Scalar,
        horizon: f64,
    ) -> Result<Self> {
        let e1 = exponent.clone();
        let e2 = exponent.clone();
        let (u1, u0) = (u.clone(), u(0.0));
        let f: Scalar = Arc::new(move |t| forward_convolve_at(&e1, &*u1, t).unwrap_or(f64::NAN));
        let fp: Scalar = Arc::new(move |t| {
            let head = if u0 == 0.0 {
                0.0
            } else {
                u0 * eval_abel_kernel(&e2, t).unwrap_or(f64::NAN)
            };
            head + forward_convolve_at(&e2, &*u_prime, t).unwrap_or(f64::NAN)
        });
        Self::new(exponent, f, fp, horizon)
    }
}

/// u + K * u = r, with K = Φ′ given through its antiderivative Φ (Φ(0) = 0).
#[derive(Clone)]
pub struct VolterraSecondKind {
    pub antiderivative: Scalar,
    /// r(t₀), ..., r(t_N).
    pub rhs: Vec<f64>,
    pub grid: TimeGrid,
}

/// The reduced equation plus the singular part c·β_{α₀} removed from u (Interior only).
#[derive(Clone)]
pub struct AbelReformulation {
    pub equation: VolterraSecondKind,
    pub singular_coeff: f64,
    pub alpha0: f64,
}

fn jacobi_grading() -> Grading {
    Grading {
        left: 40,
        right: 20,
        ..Grading::default()
    }
}

/// (β_{α₀} * h)(t) = t^{α₀}/Γ(α₀) ∫₀¹ h(t(1−z)) z^{α₀−1} dz.
fn beta_convolve(rule: &Rule, a0: f64, t: f64, h: impl Fn(f64) -> f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    t.powf(a0) * rgamma(a0) * rule.apply(|z, zc| if z == 0.0 { h(t) } else { h(t * zc) })
}

pub fn reformulate(problem: &AbelProblem, grid: TimeGrid) -> Result<AbelReformulation> {
    let regime = problem.regime();
    problem.check_constraint(regime)?;
    if grid.horizon > problem.horizon * (1.0 + 1e-12) {
        return Err(Error::HorizonMismatch {
            table: problem.horizon,
            grid: grid.horizon,
        });
    }
    let times = grid.times();
    let exp = problem.exponent.clone();
    match regime {
        Regime::Interior => {
            let a0 = exp.alpha0;
            let f0 = (problem.f)(0.0);
            let table = Arc::new(build_kernel_table(&exp, grid.horizon, 1024, 2.0, 16)?);
            let rule = graded_jacobi(0.0, a0 - 1.0, jacobi_grading());
            // f′ may carry the u(0)k(t) ~ t^{−α₀} singularity, so that weight is split off
            let rule_fp = graded_jacobi(-a0, a0 - 1.0, jacobi_grading());
            let fp = problem.f_prime.clone();
            let tab = table.clone();
            let g_prime = |y: f64| {
                if y <= 0.0 {
                    0.0
                } else {
                    tab.g_prime(y).unwrap_or(f64::NAN)
                }
            };
            let rhs: Vec<f64> = times
                .par_iter()
                .map(|&t| {
                    // the limit t → 0 of the smooth part is the value at a tiny time
                    let t = if t == 0.0 { grid.tau * 1e-8 } else { t };
                    let smooth = beta_convolve(&rule_fp, a0, t, |s| fp(s) * (s / t).powf(a0));
                    let sing = if f0 == 0.0 {
                        0.0
                    } else {
                        f0 * beta_convolve(&rule, a0, t, g_prime)
                    };
                    smooth - sing
                })
                .collect();
            let antiderivative: Scalar = if exp.is_constant() {
                Arc::new(|_| 0.0)
            } else {
                Arc::new(move |t| {
                    if t <= 0.0 {
                        0.0
                    } else {
                        table.g(t).unwrap_or(f64::NAN) - 1.0
                    }
                })
            };
            Ok(AbelReformulation {
                equation: VolterraSecondKind {
                    antiderivative,
                    rhs,
                    grid,
                },
                singular_coeff: f0,
                alpha0: a0,
            })
        }
        Regime::ZeroStart => {
            let rhs = times.iter().map(|&t| (problem.f_prime)(t)).collect();
            let antiderivative: Scalar = Arc::new(move |t| {
                if t <= 0.0 {
                    0.0
                } else {
                    eval_g_tilde(&exp, t).unwrap_or(f64::NAN)
                }
            });
            Ok(AbelReformulation {
                equation: VolterraSecondKind {
                    antiderivative,
                    rhs,
                    grid,
                },
                singular_coeff: 0.0,
                alpha0: 0.0,
            })
        }
        Regime::UnitStart => {
            let k0 = -exp.alpha_prime(0.0);
            let rhs = times.iter().map(|&t| (problem.f_prime)(t) / k0).collect();
            let antiderivative: Scalar = Arc::new(move |t| {
                if t <= 0.0 {
                    0.0
                } else {
                    (eval_abel_kernel(&exp, t).unwrap_or(f64::NAN) - k0) / k0
                }
            });
            Ok(AbelReformulation {
                equation: VolterraSecondKind {
                    antiderivative,
                    rhs,
                    grid,
                },
                singular_coeff: 0.0,
                alpha0: 1.0,
            })
        }
    }
}

/// Cell means Pₘ of Φ on [mτ, (m+1)τ], m = 0..N−1.
fn cell_means(phi: &(dyn Fn(f64) -> f64 + Send + Sync), grid: TimeGrid) -> Vec<f64> {
    let gl = gauss_legendre(16);
    let first = graded_jacobi(
        0.0,
        0.0,
        Grading {
            left: 20,
            ..Grading::default()
        },
    );
    let tau = grid.tau;
    (0..grid.steps)
        .into_par_iter()
        .map(|m| {
            let rule = if m == 0 { &first } else { &gl };
            rule.apply(|z, _| phi((m as f64 + z) * tau))
        })
        .collect()
}

/// Product-trapezoidal marching for u + Φ′ * u = r with a piecewise-linear u.
///
/// uₙ(1 + R₀) = rₙ − L₀uₙ₋₁ − Σ_{j<n}(R_{n−j}uⱼ + L_{n−j}uⱼ₋₁), with
/// Rₘ = Pₘ − Φ(mτ) and Lₘ = Φ((m+1)τ) − Pₘ.
pub fn solve_volterra2(eq: &VolterraSecondKind) -> Result<Vec<f64>> {
    let grid = eq.grid;
    let n_steps = grid.steps;
    if n_steps < 2 {
        return Err(Error::Domain {
            what: "N",
            value: n_steps as f64,
            range: "[2, inf)",
        });
    }
    if eq.rhs.len() != n_steps + 1 {
        return Err(Error::Index {
            index: eq.rhs.len(),
            len: n_steps + 1,
        });
    }
    let phi = &*eq.antiderivative;
    let p = cell_means(phi, grid);
    let nodes: Vec<f64> = (0..=n_steps).map(|m| phi(m as f64 * grid.tau)).collect();
    let r: Vec<f64> = (0..n_steps).map(|m| p[m] - nodes[m]).collect();
    let l: Vec<f64> = (0..n_steps).map(|m| nodes[m + 1] - p[m]).collect();
    if r.iter().chain(&l).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("kernel weights are not finite".into()));
    }
    let diag = 1.0 + r[0];
    if diag.abs() < 1e-12 {
        return Err(Error::DegenerateDiagonal(1));
    }
    let mut u = vec![eq.rhs[0]];
    for n in 1..=n_steps {
        let mut s = l[0] * u[n - 1];
        for j in 1..n {
            s += r[n - j] * u[j] + l[n - j] * u[j - 1];
        }
        u.push((eq.rhs[n] - s) / diag);
    }
    Ok(u)
}

/// (k * u)(t) by adaptive Gauss-Kronrod after y = t w^{1/(1−a)}, a = α(0),
/// which removes the y^{−α(0)} endpoint singularity.
pub fn forward_convolve_at(exp: &ExponentFunction, u: &dyn Fn(f64) -> f64, t: f64) -> Result<f64> {
    exp.time_regime()?;
    if t < 0.0 {
        return Err(Error::Domain {
            what: "t",
            value: t,
            range: "[0, T]",
        });
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let a = exp.alpha(0.0).clamp(0.0, 0.95);
    let p = 1.0 / (1.0 - a);
    let integrand = |w: f64| {
        let y = t * w.powf(p);
        if y <= 0.0 {
            return 0.0;
        }
        let k = eval_abel_kernel(exp, y).unwrap_or(f64::NAN);
        k * u(t - y) * t * p * w.powf(p - 1.0)
    };
    adaptive(integrand, 0.0, 1.0, 1e-14, 1e-10)
}

pub fn forward_convolve(
    exp: &ExponentFunction,
    u: &(dyn Fn(f64) -> f64 + Sync),
    t_samples: &[f64],
) -> Result<Vec<f64>> {
    t_samples
        .par_iter()
        .map(|&t| forward_convolve_at(exp, u, t))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbelSolution {
    pub grid: TimeGrid,
    /// Values of u − c·β_{α₀} at the grid nodes.
    pub smooth: Vec<f64>,
    /// c in u = c·β_{α₀} + smooth part; zero outside the Interior regime.
    pub singular_coeff: f64,
    pub alpha0: f64,
    pub regime: Regime,
    /// max over probe points of |(k * u_h)(t) − f(t)|.
    pub residual: f64,
    /// max of |u(tₙ)|·tₙ^{1−α₀} over the first decade of steps (Interior only).
    pub scaled_bound: Option<f64>,
}

impl AbelSolution {
    /// u(tₙ); infinite at t = 0 when the singular part is present.
    pub fn value(&self, n: usize) -> f64 {
        let t = self.grid.t(n);
        if self.singular_coeff == 0.0 {
            return self.smooth[n];
        }
        if t == 0.0 {
            return f64::INFINITY * self.singular_coeff.signum();
        }
        self.singular_coeff * t.powf(self.alpha0 - 1.0) * rgamma(self.alpha0) + self.smooth[n]
    }

    pub fn values(&self) -> Vec<f64> {
        (0..=self.grid.steps).map(|n| self.value(n)).collect()
    }

    /// Piecewise-linear interpolant of the smooth part.
    pub fn smooth_at(&self, t: f64) -> f64 {
        let s = (t / self.grid.tau).clamp(0.0, self.grid.steps as f64);
        let j = (s.floor() as usize).min(self.grid.steps - 1);
        let w = s - j as f64;
        (1.0 - w) * self.smooth[j] + w * self.smooth[j + 1]
    }

    /// τ Σ′ |u(tₙ) − exact(tₙ)| by the trapezoidal rule (requires a bounded solution).
    pub fn l1_error(&self, exact: impl Fn(f64) -> f64) -> f64 {
        let n = self.grid.steps;
        let e: Vec<f64> = (0..=n)
            .map(|k| (self.value(k) - exact(self.grid.t(k))).abs())
            .collect();
        self.grid.tau * (e[1..n].iter().sum::<f64>() + 0.5 * (e[0] + e[n]))
    }
}

pub const PROBE_POINTS: usize = 8;

/// |(k * u_h)(t) − f(t)| at each t, with u_h the computed solution.
pub fn residuals(problem: &AbelProblem, sol: &AbelSolution, times: &[f64]) -> Result<Vec<f64>> {
    // k * (c β_{α₀}) = c·g, so only the smooth part is convolved numerically
    let g = if sol.singular_coeff != 0.0 {
        Some(build_kernel_table(
            &problem.exponent,
            sol.grid.horizon,
            256,
            2.0,
            16,
        )?)
    } else {
        None
    };
    times
        .par_iter()
        .map(|&t| {
            let conv = forward_convolve_at(&problem.exponent, &|y| sol.smooth_at(y), t)?;
            let sing = match &g {
                Some(tab) if t > 0.0 => sol.singular_coeff * tab.g(t)?,
                _ => 0.0,
            };
            Ok((conv + sing - (problem.f)(t)).abs())
        })
        .collect()
}

pub fn solve_abel(problem: &AbelProblem, grid: TimeGrid) -> Result<AbelSolution> {
    let reform = reformulate(problem, grid)?;
    let smooth = solve_volterra2(&reform.equation)?;
    let mut sol = AbelSolution {
        grid,
        smooth,
        singular_coeff: reform.singular_coeff,
        alpha0: reform.alpha0,
        regime: problem.regime(),
        residual: f64::NAN,
        scaled_bound: None,
    };
    let probes: Vec<f64> = (1..=PROBE_POINTS)
        .map(|i| grid.horizon * i as f64 / PROBE_POINTS as f64)
        .collect();
    let residuals = residuals(problem, &sol, &probes)?;
    sol.residual = residuals.into_iter().fold(0.0, f64::max);
    if sol.regime == Regime::Interior {
        let decade = (grid.steps / 10).max(1);
        let b = (1..=decade)
            .map(|n| sol.value(n).abs() * grid.t(n).powf(1.0 - sol.alpha0))
            .fold(0.0, f64::max);
        sol.scaled_bound = Some(b);
    }
    Ok(sol)
}

/// Slope of log|u| against log t over the first `window` nonzero grid nodes.
pub fn growth_slope(sol: &AbelSolution, window: usize) -> Result<f64> {
    if sol.grid.steps < window || window < 2 {
        return Err(Error::Invalid("window exceeds the grid".into()));
    }
    let (mut x, mut y) = (vec![], vec![]);
    for n in 1..=window {
        let v = sol.value(n).abs();
        if v == 0.0 {
            return Err(Error::IllConditioned("zero solution value".into()));
        }
        x.push(sol.grid.t(n).ln());
        y.push(v.ln());
    }
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Classical inverse of the constant-order Abel operator: u = ∂ₜ^{1−α}f for f = Σ cᵢ tⁱ.
pub fn constant_order_inverse(alpha: f64, coeffs: &[f64], t: f64) -> f64 {
    // ∂ₜ^{1−α} tⁱ = Γ(i+1)/Γ(i+α) t^{i+α−1}
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c * crate::special::gamma(i as f64 + 1.0)
                * rgamma(i as f64 + alpha)
                * t.powf(i as f64 + alpha - 1.0)
        })
        .sum()
}

/// Gauss-Jacobi cross-check of (k * u)(t) on s = t(1−z) with weight z^{−α(0)}.
pub fn forward_convolve_jacobi(
    exp: &ExponentFunction,
    u: &dyn Fn(f64) -> f64,
    t: f64,
    nodes: usize,
) -> Result<f64> {
    exp.time_regime()?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let a = exp.alpha(0.0);
    let rule = if a > 0.0 {
        graded_jacobi(
            0.0,
            -a,
            Grading {
                left: 30,
                nodes,
                ..Grading::default()
            },
        )
    } else {
        gauss_jacobi(nodes, 0.0, 0.0)
    };
    Ok(t * rule.apply(|z, zc| {
        let y = t * z;
        let k = eval_abel_kernel(exp, y).unwrap_or(f64::NAN);
        k * y.powf(a) * t.powf(-a) * u(t * zc)
    }))
}
