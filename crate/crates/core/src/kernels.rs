//! Variable-exponent kernels: the Abel kernel k, the weighted power kernel
//! β_{μ,λ}, the generalized identity function g = β_{α₀} * k and the
//! splittings k = β_{1−α₀} + g̃ (time) and x^{1−α(x)}/Γ(2−α(x)) = β_{2−α₀} + g_l
//! (space).

use crate::error::{Error, Result};
use crate::exponent::{ExponentFunction, Regime};
use crate::rules::{graded_jacobi, Grading, Rule};
use crate::special::{rgamma, rgamma_prime};
use rayon::prelude::*;

/// k(t) = t^{−α(t)}/Γ(1−α(t)). At t = 0 the regime limit is returned.
pub fn eval_abel_kernel(exp: &ExponentFunction, t: f64) -> Result<f64> {
    let regime = exp.time_regime()?;
    if t < 0.0 || t.is_nan() {
        return Err(Error::Domain {
            what: "t",
            value: t,
            range: "[0, T]",
        });
    }
    if t == 0.0 {
        return match regime {
            Regime::Interior => Err(Error::SingularAtZero),
            Regime::ZeroStart => Ok(1.0),
            Regime::UnitStart => Ok(-exp.alpha_prime(0.0)),
        };
    }
    let a = exp.alpha(t);
    Ok(t.powf(-a) * rgamma(1.0 - a))
}

/// k′(t) for t > 0.
pub fn eval_abel_kernel_prime(exp: &ExponentFunction, t: f64) -> Result<f64> {
    exp.time_regime()?;
    if t <= 0.0 {
        return Err(Error::LogSingularity);
    }
    let a = exp.alpha(t);
    let da = exp.alpha_prime(t);
    let r = rgamma(1.0 - a);
    let dr = -da * rgamma_prime(1.0 - a);
    Ok(t.powf(-a - 1.0) * ((-da * t * t.ln() - a) * r + t * dr))
}

/// β_{μ,λ}(t) = e^{−λt} t^{μ−1}/Γ(μ).
pub fn eval_beta(mu: f64, lambda: f64, t: f64) -> Result<f64> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Domain {
            what: "mu",
            value: mu,
            range: "(0, 1]",
        });
    }
    if !(lambda >= 0.0) {
        return Err(Error::Domain {
            what: "lambda",
            value: lambda,
            range: "[0, inf)",
        });
    }
    if t <= 0.0 {
        if mu == 1.0 && t == 0.0 {
            return Ok(1.0);
        }
        return Err(Error::SingularAtZero);
    }
    if mu == 1.0 {
        return Ok((-lambda * t).exp());
    }
    Ok((-lambda * t).exp() * t.powf(mu - 1.0) * rgamma(mu))
}

/// Value and derivative of x^{c−a(x)}/Γ(c+1−a(x)) − x^{c−a₀}/Γ(c+1−a₀)
/// without cancellation. `ratio` is (a(x) − a₀)/x and `da` is a′(x).
/// 1/Γ(z − s) − 1/Γ(z). For small s the difference is integrated from the
/// exact shift, since z − s rounds away the low bits of s.
fn rgamma_shift(z: f64, s: f64) -> f64 {
    // 4-point Gauss–Legendre on [0, 1]
    const NODES: [f64; 4] = [
        0.069_431_844_202_973_71,
        0.330_009_478_207_571_87,
        0.669_990_521_792_428_1,
        0.930_568_155_797_026_3,
    ];
    const WEIGHTS: [f64; 4] = [
        0.173_927_422_568_726_93,
        0.326_072_577_431_273_07,
        0.326_072_577_431_273_07,
        0.173_927_422_568_726_93,
    ];
    if s.abs() > 0.05 {
        return rgamma(z - s) - rgamma(z);
    }
    -s * NODES
        .iter()
        .zip(WEIGHTS)
        .map(|(t, w)| w * rgamma_prime(z - s * t))
        .sum::<f64>()
}

fn split_difference(c: f64, x: f64, a: f64, a0: f64, da: f64, ratio: f64) -> (f64, f64) {
    let ln = x.ln();
    let r = rgamma(c + 1.0 - a);
    let dr = -da * rgamma_prime(c + 1.0 - a);
    let shift = x * ratio;
    let em = (-shift * ln).exp_m1();
    let d = em * r + rgamma_shift(c + 1.0 - a0, shift);
    let p0 = c - a0;
    let value = x.powf(p0) * d;
    let inner = (1.0 + em) * (-da * x * ln * r + x * dr) + p0 * d - shift * (1.0 + em) * r;
    (value, x.powf(p0 - 1.0) * inner)
}

fn check_tilde(exp: &ExponentFunction, t: f64) -> Result<()> {
    match exp.time_regime()? {
        Regime::UnitStart => Err(Error::UnsupportedRegime(Regime::UnitStart)),
        _ if t <= 0.0 => Err(Error::Domain {
            what: "t",
            value: t,
            range: "(0, T]",
        }),
        _ => Ok(()),
    }
}

/// g̃(t) = k(t) − β_{1−α₀}(t).
pub fn eval_g_tilde(exp: &ExponentFunction, t: f64) -> Result<f64> {
    check_tilde(exp, t)?;
    let a = exp.alpha(t);
    Ok(split_difference(
        0.0,
        t,
        a,
        exp.alpha0,
        exp.alpha_prime(t),
        exp.shift_ratio(t),
    )
    .0)
}

pub fn eval_g_tilde_prime(exp: &ExponentFunction, t: f64) -> Result<f64> {
    check_tilde(exp, t)?;
    let a = exp.alpha(t);
    Ok(split_difference(
        0.0,
        t,
        a,
        exp.alpha0,
        exp.alpha_prime(t),
        exp.shift_ratio(t),
    )
    .1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// g_l(x) or g_r(x), with derivative, for a space exponent with values in (1, 2).
pub fn eval_g_sided_with_prime(exp: &ExponentFunction, side: Side, x: f64) -> Result<(f64, f64)> {
    if exp.regime.is_some() {
        return Err(Error::Invalid(
            "sided kernels need a space exponent in (1, 2)".into(),
        ));
    }
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::Domain {
            what: "x",
            value: x,
            range: "(0, 1]",
        });
    }
    Ok(match side {
        Side::Left => split_difference(
            1.0,
            x,
            exp.alpha(x),
            exp.alpha0,
            exp.alpha_prime(x),
            exp.shift_ratio(x),
        ),
        Side::Right => {
            let r = exp.reflected();
            split_difference(
                1.0,
                x,
                r.alpha(x),
                exp.alpha_at_1,
                r.alpha_prime(x),
                r.shift_ratio(x),
            )
        }
    })
}

/// g_l(x) or g_r(x); g(0) = 0.
pub fn eval_g_sided(exp: &ExponentFunction, side: Side, x: f64) -> Result<f64> {
    if x == 0.0 && exp.regime.is_none() {
        return Ok(0.0);
    }
    eval_g_sided_with_prime(exp, side, x).map(|v| v.0)
}

pub fn eval_g_sided_prime(exp: &ExponentFunction, side: Side, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::SingularAtZero);
    }
    eval_g_sided_with_prime(exp, side, x).map(|v| v.1)
}

/// Evaluator for g and g′ with a rule precomputed for one α₀.
///
/// g(t) = ∫₀¹ φ(tz)(1−z)^{α₀−1} z^{−α₀} dz with
/// φ(s) = s^{α₀−α(s)}/(Γ(α₀)Γ(1−α(s))). The integrand carries z·ln z terms at
/// z = 0, so the rule is geometrically graded there.
#[derive(Debug, Clone)]
pub struct IdentityFunction {
    exp: ExponentFunction,
    rule: Rule,
    inv_gamma_a0: f64,
}

impl IdentityFunction {
    pub fn new(exp: &ExponentFunction) -> Result<Self> {
        Self::with_grading(exp, Grading::default())
    }

    pub fn with_grading(exp: &ExponentFunction, grading: Grading) -> Result<Self> {
        match exp.time_regime()? {
            Regime::Interior => {}
            r => return Err(Error::UnsupportedRegime(r)),
        }
        let a0 = exp.alpha0;
        Ok(Self {
            exp: exp.clone(),
            rule: graded_jacobi(a0 - 1.0, -a0, grading),
            inv_gamma_a0: rgamma(a0),
        })
    }

    pub fn exponent(&self) -> &ExponentFunction {
        &self.exp
    }

    pub fn nodes(&self) -> usize {
        self.rule.len()
    }

    fn phi(&self, s: f64) -> f64 {
        let a = self.exp.alpha(s);
        let shift = s * self.exp.shift_ratio(s);
        (-shift * s.ln()).exp() * rgamma(1.0 - a)
    }

    /// φ′(s)·s.
    fn s_phi_prime(&self, s: f64) -> f64 {
        let a = self.exp.alpha(s);
        let da = self.exp.alpha_prime(s);
        let ratio = self.exp.shift_ratio(s);
        let ln = s.ln();
        let r = rgamma(1.0 - a);
        let dr = -da * rgamma_prime(1.0 - a);
        (-s * ratio * ln).exp() * ((-da * s * ln - s * ratio) * r + s * dr)
    }

    pub fn g(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::Domain {
                what: "t",
                value: t,
                range: "[0, T]",
            });
        }
        if t == 0.0 {
            return Ok(1.0);
        }
        Ok(self.inv_gamma_a0 * self.rule.apply(|z, _| self.phi(t * z)))
    }

    pub fn g_prime(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Err(Error::LogSingularity);
        }
        if t < 0.0 || t.is_nan() {
            return Err(Error::Domain {
                what: "t",
                value: t,
                range: "(0, T]",
            });
        }
        // ∂ₜφ(tz) = zφ′(tz) = (tz)φ′(tz)/t
        Ok(self.inv_gamma_a0 * self.rule.apply(|z, _| self.s_phi_prime(t * z)) / t)
    }

    /// Limit of g′ at 0⁺: 0 when α′(0) = 0, otherwise infinite with the sign of α′(0).
    pub fn g_prime_at_zero(&self) -> f64 {
        let d = self.exp.alpha_prime(0.0);
        if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }
}

/// g(t) by the default rule.
pub fn eval_g(exp: &ExponentFunction, t: f64) -> Result<f64> {
    IdentityFunction::new(exp)?.g(t)
}

pub fn eval_g_prime(exp: &ExponentFunction, t: f64) -> Result<f64> {
    IdentityFunction::new(exp)?.g_prime(t)
}

/// Samples of g and g′ on t_j = T(j/J)^γ with cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct KernelTable {
    ident: IdentityFunction,
    pub horizon: f64,
    pub grading: f64,
    pub grid: Vec<f64>,
    pub g_values: Vec<f64>,
    pub g_prime_values: Vec<f64>,
    pub quadrature_order: usize,
}

pub fn build_kernel_table(
    exp: &ExponentFunction,
    horizon: f64,
    samples: usize,
    grading: f64,
    order: usize,
) -> Result<KernelTable> {
    if samples < 2 {
        return Err(Error::Domain {
            what: "J",
            value: samples as f64,
            range: "[2, inf)",
        });
    }
    if !(grading >= 1.0) {
        return Err(Error::Domain {
            what: "gamma",
            value: grading,
            range: "[1, inf)",
        });
    }
    if !(horizon > 0.0) {
        return Err(Error::Domain {
            what: "T",
            value: horizon,
            range: "(0, inf)",
        });
    }
    let ident = IdentityFunction::with_grading(
        exp,
        Grading {
            nodes: order,
            ..Grading::default()
        },
    )?;
    let grid: Vec<f64> = (0..=samples)
        .map(|j| horizon * (j as f64 / samples as f64).powf(grading))
        .collect();
    let pairs: Vec<(f64, f64)> = grid[1..]
        .par_iter()
        .map(|&t| Ok((ident.g(t)?, ident.g_prime(t)?)))
        .collect::<Result<_>>()?;
    let mut g_values = vec![1.0];
    let mut g_prime_values = vec![ident.g_prime_at_zero()];
    for (g, dg) in pairs {
        g_values.push(g);
        g_prime_values.push(dg);
    }
    Ok(KernelTable {
        ident,
        horizon,
        grading,
        grid,
        g_values,
        g_prime_values,
        quadrature_order: order,
    })
}

impl KernelTable {
    pub fn exponent(&self) -> &ExponentFunction {
        self.ident.exponent()
    }

    pub fn identity(&self) -> &IdentityFunction {
        &self.ident
    }

    fn locate(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain {
                what: "t",
                value: t,
                range: "[0, table horizon]",
            });
        }
        let j_max = self.grid.len() - 2;
        let mut j = ((t / self.horizon).powf(1.0 / self.grading) * (j_max + 1) as f64) as usize;
        j = j.min(j_max);
        while j > 0 && self.grid[j] > t {
            j -= 1;
        }
        while j < j_max && self.grid[j + 1] <= t {
            j += 1;
        }
        Ok(j)
    }

    /// g(t); the first cell is evaluated directly because g is not C¹ at 0.
    pub fn g(&self, t: f64) -> Result<f64> {
        let j = self.locate(t)?;
        if j == 0 {
            return self.ident.g(t);
        }
        let (a, b) = (self.grid[j], self.grid[j + 1]);
        let h = b - a;
        let s = (t - a) / h;
        let (h00, h10, h01, h11) = hermite(s);
        Ok(h00 * self.g_values[j]
            + h10 * h * self.g_prime_values[j]
            + h01 * self.g_values[j + 1]
            + h11 * h * self.g_prime_values[j + 1])
    }

    pub fn g_prime(&self, t: f64) -> Result<f64> {
        let j = self.locate(t)?;
        if j == 0 {
            return self.ident.g_prime(t);
        }
        let (a, b) = (self.grid[j], self.grid[j + 1]);
        let h = b - a;
        let s = (t - a) / h;
        let d00 = 6.0 * s * s - 6.0 * s;
        let d10 = 3.0 * s * s - 4.0 * s + 1.0;
        let d11 = 3.0 * s * s - 2.0 * s;
        Ok((d00 * (self.g_values[j] - self.g_values[j + 1])) / h
            + d10 * self.g_prime_values[j]
            + d11 * self.g_prime_values[j + 1])
    }
}

fn hermite(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        2.0 * s3 - 3.0 * s2 + 1.0,
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::adaptive;

    fn lin(a0: f64, s: f64) -> ExponentFunction {
        ExponentFunction::linear(a0, s).unwrap()
    }

    #[test]
    fn abel_kernel_closed_forms_and_limits() {
        let e = ExponentFunction::constant(0.5).unwrap();
        assert!((eval_abel_kernel(&e, 1.0).unwrap() - 0.564_189_583_547_756_3).abs() < 1e-14);
        assert_eq!(eval_abel_kernel(&e, 0.0), Err(Error::SingularAtZero));
        assert!(eval_abel_kernel(&e, -1.0).is_err());
        let z = ExponentFunction::linear_on(0.0, 1.0, 0.5).unwrap();
        assert_eq!(eval_abel_kernel(&z, 0.0).unwrap(), 1.0);
        assert!((eval_abel_kernel(&z, 1e-10).unwrap() - 1.0).abs() < 1e-8);
        let u = lin(1.0, -0.5);
        assert_eq!(eval_abel_kernel(&u, 0.0).unwrap(), 0.5);
        assert!((eval_abel_kernel(&u, 1e-9).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn abel_kernel_prime_matches_difference() {
        for e in [
            lin(0.4, 0.1),
            lin(1.0, -0.5),
            ExponentFunction::sine(0.6, 0.1).unwrap(),
        ] {
            for &t in &[0.05, 0.3, 0.8] {
                let d = 1e-5;
                let fd = (eval_abel_kernel(&e, t + d).unwrap()
                    - eval_abel_kernel(&e, t - d).unwrap())
                    / (2.0 * d);
                let an = eval_abel_kernel_prime(&e, t).unwrap();
                assert!((fd - an).abs() < 1e-7 * an.abs().max(1.0), "{t}: {fd} {an}");
            }
        }
    }

    #[test]
    fn beta_closed_forms() {
        assert_eq!(eval_beta(1.0, 0.0, 0.7).unwrap(), 1.0);
        assert!((eval_beta(0.5, 0.0, 4.0).unwrap() - 0.282_094_791_773_878_1).abs() < 1e-14);
        assert!((eval_beta(0.5, 1.0, 1.0).unwrap() - 0.207_553_748_710_297_6).abs() < 1e-14);
        assert_eq!(eval_beta(0.5, 0.0, 0.0), Err(Error::SingularAtZero));
        assert!(eval_beta(1.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn g_is_identity_for_constant_exponent() {
        let e = ExponentFunction::constant(0.5).unwrap();
        let id = IdentityFunction::new(&e).unwrap();
        for &t in &[0.0, 1e-8, 0.3, 1.0] {
            assert!((id.g(t).unwrap() - 1.0).abs() < 1e-13);
        }
        let e = ExponentFunction::constant(0.6).unwrap();
        assert_eq!(eval_g_prime(&e, 0.3).unwrap(), 0.0);
        assert_eq!(eval_g_prime(&e, 0.0), Err(Error::LogSingularity));
    }

    #[test]
    fn g_matches_adaptive_quadrature() {
        let e = lin(0.4, 0.1);
        let a0 = 0.4;
        let t = 0.5;
        // z = u^{1/(1−α₀)} removes z^{−α₀}; 1−z = v^{1/α₀} removes (1−z)^{α₀−1}.
        let phi = |s: f64| s.powf(a0 - e.alpha(s)) * rgamma(1.0 - e.alpha(s)) * rgamma(a0);
        let left = adaptive(
            |u| {
                let p = 1.0 / (1.0 - a0);
                let z = u.powf(p);
                phi(t * z) * (1.0 - z).powf(a0 - 1.0) * p
            },
            0.0,
            0.5f64.powf(1.0 - a0),
            1e-14,
            1e-14,
        )
        .unwrap();
        let right = adaptive(
            |v| {
                let p = 1.0 / a0;
                let w = v.powf(p);
                let z = 1.0 - w;
                phi(t * z) * z.powf(-a0) * p
            },
            0.0,
            0.5f64.powf(a0),
            1e-14,
            1e-14,
        )
        .unwrap();
        let g = eval_g(&e, t).unwrap();
        assert!((g - left - right).abs() < 1e-11, "{g} vs {}", left + right);
    }

    #[test]
    fn g_prime_matches_central_differences() {
        let e = lin(0.4, 0.1);
        let id = IdentityFunction::new(&e).unwrap();
        let t = 0.5;
        let an = id.g_prime(t).unwrap();
        let errs: Vec<f64> = [1e-3, 1e-4]
            .iter()
            .map(|&d| (an - (id.g(t + d).unwrap() - id.g(t - d).unwrap()) / (2.0 * d)).abs())
            .collect();
        assert!(errs[0] < 1e-6 && errs[1] < 1e-8, "{errs:?}");
    }

    #[test]
    fn g_prime_grows_logarithmically() {
        let e = lin(0.4, 0.1);
        let id = IdentityFunction::new(&e).unwrap();
        let c: Vec<f64> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&t: &f64| id.g_prime(t).unwrap().abs() / (1.0 + t.ln().abs()))
            .collect();
        let (lo, hi) = c
            .iter()
            .fold((f64::MAX, 0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(hi / lo < 2.0, "{c:?}");
        assert!(id.g_prime_at_zero().is_infinite());
    }

    #[test]
    fn splitting_is_consistent() {
        let e = lin(0.4, 0.1);
        for &t in &[1e-6, 0.01, 0.5, 1.0] {
            let k = eval_abel_kernel(&e, t).unwrap();
            let sum = eval_beta(0.6, 0.0, t).unwrap() + eval_g_tilde(&e, t).unwrap();
            assert!((k - sum).abs() <= 1e-13 * k.abs(), "{t}");
        }
        let c = ExponentFunction::constant(0.7).unwrap();
        assert_eq!(eval_g_tilde(&c, 0.2).unwrap(), 0.0);
        assert_eq!(eval_g_tilde_prime(&c, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn g_tilde_vanishes_at_zero() {
        let e = lin(0.4, 0.1);
        for &t in &[1e-2, 1e-4, 1e-6, 1e-8] {
            let v = eval_g_tilde(&e, t).unwrap().abs();
            assert!(v <= 0.5 * t.powf(0.6) * (1.0 + t.ln().abs()), "{t}: {v}");
        }
    }

    #[test]
    fn g_tilde_prime_matches_difference() {
        for e in [lin(0.4, 0.1), lin(0.0, 0.5)] {
            for &t in &[0.01, 0.2, 0.9] {
                let d = 1e-6 * t;
                let fd = (eval_g_tilde(&e, t + d).unwrap() - eval_g_tilde(&e, t - d).unwrap())
                    / (2.0 * d);
                let an = eval_g_tilde_prime(&e, t).unwrap();
                assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{t}: {fd} {an}");
            }
        }
    }

    #[test]
    fn sided_kernels() {
        let c = ExponentFunction::constant(1.5).unwrap();
        assert_eq!(eval_g_sided(&c, Side::Left, 0.3).unwrap(), 0.0);
        let e = lin(1.4, 0.2);
        assert_eq!(eval_g_sided(&e, Side::Left, 0.0).unwrap(), 0.0);
        let small: Vec<f64> = [1e-4, 1e-7, 1e-10]
            .iter()
            .map(|&x| eval_g_sided(&e, Side::Left, x).unwrap().abs())
            .collect();
        assert!(
            small[0] > small[1] && small[1] > small[2] && small[2] < 1e-4,
            "{small:?}"
        );
        for side in [Side::Left, Side::Right] {
            let x = 0.5;
            let an = eval_g_sided_prime(&e, side, x).unwrap();
            for &(d, tol) in &[(1e-3, 1e-6), (1e-4, 1e-8)] {
                let fd = (eval_g_sided(&e, side, x + d).unwrap()
                    - eval_g_sided(&e, side, x - d).unwrap())
                    / (2.0 * d);
                assert!((fd - an).abs() < tol, "{side:?} {d}");
            }
        }
        // right-sided kernel uses α(1 − x) against α(1)
        let direct = |x: f64| {
            let a = e.alpha(1.0 - x);
            x.powf(1.0 - a) * rgamma(2.0 - a) - x.powf(1.0 - 1.6) * rgamma(2.0 - 1.6)
        };
        assert!((eval_g_sided(&e, Side::Right, 0.3).unwrap() - direct(0.3)).abs() < 1e-14);
    }

    #[test]
    fn table_interpolates() {
        let e = lin(0.4, 0.1);
        let table = build_kernel_table(&e, 1.0, 512, 2.0, 16).unwrap();
        assert_eq!(table.g_values[0], 1.0);
        let id = IdentityFunction::new(&e).unwrap();
        let mut worst = 0f64;
        for k in 0..100 {
            let t = ((k as f64 + 0.37) / 100.0).powi(3);
            worst = worst.max((table.g(t).unwrap() - id.g(t).unwrap()).abs());
        }
        assert!(worst < 1e-8, "{worst}");
        let c = build_kernel_table(&ExponentFunction::constant(0.5).unwrap(), 1.0, 64, 2.0, 16)
            .unwrap();
        assert!(c.g_prime_values.iter().all(|&v| v == 0.0));
        assert!(c.g_values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }
}
