//! Two-sided variable-exponent space-fractional diffusion-advection-reaction
//! problem on (0, 1) with homogeneous Dirichlet data, discretized by P1
//! elements on a uniform mesh.
//!
//! The strong form is
//! −∂ₓ(r I^{2−α}_x + (1−r) Î^{2−α}_x)∂ₓu + b u′ + c u = f, where the left and
//! right kernels are y^{1−α(y)}/Γ(2−α(y)) and y^{1−α(1−y)}/Γ(2−α(1−y)). They
//! split as β_{2−α₀} + g_l and β_{2−α₁} + g_r, so
//!
//! a(u, v) = r(I^{2−α₀}u′, v′) + (1−r)(Î^{2−α₁}u′, v′)
//!         − r(∫₀ˣ g_l′(x−s)u′(s)ds, v) + (1−r)(∫ₓ¹ g_r′(s−x)u′(s)ds, v)
//!         + (b u′, v) + (c u, v).

use crate::error::{Error, Result};
use crate::exponent::{ExponentFunction, Scalar};
use crate::kernels::{eval_g_sided, Side};
use crate::rules::{adaptive, gauss_legendre, graded_jacobi, Grading, Rule};
use crate::special::rgamma;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Clone)]
pub struct BvpCoefficients {
    pub r: f64,
    pub exponent: ExponentFunction,
    pub b: Scalar,
    pub b_prime: Scalar,
    pub c: Scalar,
    pub f: Scalar,
}

impl BvpCoefficients {
    pub fn new(
        r: f64,
        exponent: ExponentFunction,
        b: Scalar,
        b_prime: Scalar,
        c: Scalar,
        f: Scalar,
    ) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain {
                what: "r",
                value: r,
                range: "(0, 1)",
            });
        }
        if exponent.regime.is_some() {
            return Err(Error::Invalid(
                "the space exponent must take values in (1, 2)".into(),
            ));
        }
        Ok(Self {
            r,
            exponent,
            b,
            b_prime,
            c,
            f,
        })
    }

    /// b = b₀, c = c₀ constants.
    pub fn constant_coefficients(
        r: f64,
        exponent: ExponentFunction,
        b0: f64,
        c0: f64,
        f: Scalar,
    ) -> Result<Self> {
        Self::new(
            r,
            exponent,
            Arc::new(move |_| b0),
            Arc::new(|_| 0.0),
            Arc::new(move |_| c0),
            f,
        )
    }

    /// min over a grid of c − b′/2.
    pub fn coercivity_margin(&self) -> f64 {
        (0..=256)
            .map(|k| {
                let x = k as f64 / 256.0;
                (self.c)(x) - 0.5 * (self.b_prime)(x)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct FracFemSystem {
    pub n_cells: usize,
    pub h: f64,
    pub stiffness_frac: DMatrix<f64>,
    pub pert: DMatrix<f64>,
    pub advec_react: DMatrix<f64>,
    pub combined: DMatrix<f64>,
}

/// (I^ν χ_{[0,h]}, χ_{[kh,(k+1)h]}) for integer offsets k ≥ 0, scaled by h^{−(ν+1)}.
///
/// With F(y) = y₊^{ν+1}/Γ(ν+2), (I^ν χ_{[a,b]}, χ_{[c,d]}) = F(d−a) − F(c−a) − F(d−b) + F(c−b).
fn cell_pairing(nu: f64, k: usize) -> f64 {
    let g = rgamma(nu + 2.0);
    let f = |y: f64| if y > 0.0 { y.powf(nu + 1.0) * g } else { 0.0 };
    let kf = k as f64;
    f(kf + 1.0) - 2.0 * f(kf) + f(kf - 1.0)
}

/// Matrix of (I^ν φⱼ′, φᵢ′) over interior hats.
fn left_integral_matrix(nu: f64, n_cells: usize) -> DMatrix<f64> {
    let h = 1.0 / n_cells as f64;
    let p: Vec<f64> = (0..n_cells).map(|k| cell_pairing(nu, k)).collect();
    // P[cs][ct]: source cell cs, test cell ct; zero unless ct ≥ cs
    let pair = |cs: usize, ct: usize| if ct >= cs { p[ct - cs] } else { 0.0 };
    let scale = h.powf(nu + 1.0) / (h * h);
    let n = n_cells - 1;
    DMatrix::from_fn(n, n, |i, j| {
        // hat k has derivative +1/h on cell k and −1/h on cell k+1 (0-based cells)
        let (ci, cj) = (i, j);
        scale * (pair(cj, ci) - pair(cj + 1, ci) - pair(cj, ci + 1) + pair(cj + 1, ci + 1))
    })
}

/// r(I^{2−α₀}φⱼ′, φᵢ′) + (1−r)(Î^{2−α₁}φⱼ′, φᵢ′) in closed form.
pub fn assemble_frac_stiffness(coef: &BvpCoefficients, n_cells: usize) -> Result<DMatrix<f64>> {
    check_cells(n_cells)?;
    let left = left_integral_matrix(2.0 - coef.exponent.alpha0, n_cells);
    // (Î^ν u′, v′) = (u′, I^ν v′): the transpose of the left form
    let right = left_integral_matrix(2.0 - coef.exponent.alpha_at_1, n_cells).transpose();
    Ok(left * coef.r + right * (1.0 - coef.r))
}

fn check_cells(n_cells: usize) -> Result<()> {
    if n_cells < 2 {
        return Err(Error::Domain {
            what: "n_cells",
            value: n_cells as f64,
            range: "[2, inf)",
        });
    }
    Ok(())
}

/// S(q) = ∫ φᵢ(x) G(x − x_{i−q}) dx for G = g(·₊), q = −1..=n.
///
/// The hat φᵢ rises on cell i−1 and falls on cell i; on a cell at offset d ≥ 0
/// from the breakpoint the integrand is g(ξ + d h) against ξ/h or 1 − ξ/h.
fn hat_moments(g: &(dyn Fn(f64) -> f64 + Sync), n_cells: usize) -> Vec<f64> {
    let h = 1.0 / n_cells as f64;
    let gl = gauss_legendre(16);
    let first = graded_jacobi(
        0.0,
        0.0,
        Grading {
            left: 20,
            ..Grading::default()
        },
    );
    let moments: Vec<(f64, f64)> = (0..n_cells)
        .into_par_iter()
        .map(|d| {
            let rule: &Rule = if d == 0 { &first } else { &gl };
            let up = h * rule.apply(|z, _| z * g((z + d as f64) * h));
            let down = h * rule.apply(|z, zc| zc * g((z + d as f64) * h));
            (up, down)
        })
        .collect();
    // index q + 1 holds S(q)
    (-1..=n_cells as isize)
        .map(|q| {
            let up = if q >= 1 {
                moments.get(q as usize - 1).map_or(0.0, |m| m.0)
            } else {
                0.0
            };
            let down = if q >= 0 {
                moments.get(q as usize).map_or(0.0, |m| m.1)
            } else {
                0.0
            };
            up + down
        })
        .collect()
}

/// −r(∫₀ˣ g_l′(x−s)φⱼ′(s)ds, φᵢ) + (1−r)(∫ₓ¹ g_r′(s−x)φⱼ′(s)ds, φᵢ).
///
/// The inner integrals are exact, g_l((x−a)₊) − g_l((x−b)₊) for φⱼ′ = χ_{[a,b]},
/// and the outer ones depend only on i − j.
pub fn assemble_perturbation(coef: &BvpCoefficients, n_cells: usize) -> Result<DMatrix<f64>> {
    check_cells(n_cells)?;
    let n = n_cells - 1;
    if coef.exponent.is_constant() {
        return Ok(DMatrix::zeros(n, n));
    }
    let h = 1.0 / n_cells as f64;
    let exp = &coef.exponent;
    let gl = |x: f64| eval_g_sided(exp, Side::Left, x.min(1.0)).unwrap_or(f64::NAN);
    let gr = |x: f64| eval_g_sided(exp, Side::Right, x.min(1.0)).unwrap_or(f64::NAN);
    let sl = hat_moments(&gl, n_cells);
    let sr = hat_moments(&gr, n_cells);
    let s = |v: &Vec<f64>, q: isize| if q < -1 { 0.0 } else { v[(q + 1) as usize] };
    let m = DMatrix::from_fn(n, n, |i, j| {
        let q = i as isize - j as isize;
        let left = s(&sl, q + 1) - 2.0 * s(&sl, q) + s(&sl, q - 1);
        let right = 2.0 * s(&sr, -q) - s(&sr, -q - 1) - s(&sr, -q + 1);
        (-coef.r * left + (1.0 - coef.r) * right) / h
    });
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite perturbation entry".into()));
    }
    Ok(m)
}

/// (b φⱼ′, φᵢ) + (c φⱼ, φᵢ) by 4-point Gauss per cell.
pub fn assemble_advection_reaction(coef: &BvpCoefficients, n_cells: usize) -> Result<DMatrix<f64>> {
    check_cells(n_cells)?;
    let n = n_cells - 1;
    let h = 1.0 / n_cells as f64;
    let gl = gauss_legendre(4);
    let mut m = DMatrix::zeros(n, n);
    for cell in 0..n_cells {
        // local hats: left node `cell`, right node `cell+1` (global node numbers)
        for (z, w) in gl.nodes.iter().zip(&gl.weights) {
            let x = (cell as f64 + z) * h;
            let (b, c) = ((coef.b)(x), (coef.c)(x));
            let vals = [1.0 - z, *z];
            let ders = [-1.0 / h, 1.0 / h];
            for a in 0..2 {
                for e in 0..2 {
                    let (gi, gj) = (cell + a, cell + e);
                    if gi == 0 || gi == n_cells || gj == 0 || gj == n_cells {
                        continue;
                    }
                    m[(gi - 1, gj - 1)] += w * h * (b * ders[e] + c * vals[e]) * vals[a];
                }
            }
        }
    }
    Ok(m)
}

pub fn mass_matrix(n_cells: usize) -> DMatrix<f64> {
    let n = n_cells - 1;
    let h = 1.0 / n_cells as f64;
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0 * h / 3.0,
        1 => h / 6.0,
        _ => 0.0,
    })
}

pub fn assemble(coef: &BvpCoefficients, n_cells: usize) -> Result<FracFemSystem> {
    let stiffness_frac = assemble_frac_stiffness(coef, n_cells)?;
    let pert = assemble_perturbation(coef, n_cells)?;
    let advec_react = assemble_advection_reaction(coef, n_cells)?;
    let combined = &stiffness_frac + &pert + &advec_react;
    Ok(FracFemSystem {
        n_cells,
        h: 1.0 / n_cells as f64,
        stiffness_frac,
        pert,
        advec_react,
        combined,
    })
}

/// (f, φᵢ) by 8-point Gauss per cell.
pub fn load_vector(f: &(dyn Fn(f64) -> f64 + Sync), n_cells: usize) -> DVector<f64> {
    let h = 1.0 / n_cells as f64;
    let gl = gauss_legendre(8);
    let per_cell: Vec<(f64, f64)> = (0..n_cells)
        .into_par_iter()
        .map(|cell| {
            let mut lr = (0.0, 0.0);
            for (z, w) in gl.nodes.iter().zip(&gl.weights) {
                let fx = f((cell as f64 + z) * h) * w * h;
                lr.0 += fx * (1.0 - z);
                lr.1 += fx * z;
            }
            lr
        })
        .collect();
    DVector::from_fn(n_cells - 1, |i, _| per_cell[i].1 + per_cell[i + 1].0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityReport {
    /// min of c − b′/2 over a grid.
    pub margin: f64,
    /// min of wᵀ sym(A) w / wᵀ M w over random w.
    pub indicator: f64,
    pub samples: usize,
    pub coercive: bool,
}

pub fn coercivity_check(
    coef: &BvpCoefficients,
    system: &FracFemSystem,
    samples: usize,
    seed: u64,
) -> CoercivityReport {
    let n = system.combined.nrows();
    let sym = (&system.combined + system.combined.transpose()) * 0.5;
    let mass = mass_matrix(system.n_cells);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indicator = f64::INFINITY;
    for _ in 0..samples {
        let w = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let num = w.dot(&(&sym * &w));
        let den = w.dot(&(&mass * &w));
        if den > 0.0 {
            indicator = indicator.min(num / den);
        }
    }
    CoercivityReport {
        margin: coef.coercivity_margin(),
        indicator,
        samples,
        coercive: indicator > 0.0,
    }
}

#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub n_cells: usize,
    /// Nodal values including the two boundary zeros.
    pub nodal: Vec<f64>,
    /// ‖A u − F‖∞.
    pub residual: f64,
    /// a(u_h, u_h).
    pub energy: f64,
    pub coercivity: CoercivityReport,
}

impl BvpSolution {
    pub fn eval(&self, x: f64) -> f64 {
        let s = (x * self.n_cells as f64).clamp(0.0, self.n_cells as f64);
        let j = (s.floor() as usize).min(self.n_cells - 1);
        let w = s - j as f64;
        (1.0 - w) * self.nodal[j] + w * self.nodal[j + 1]
    }

    /// ‖u_h − u‖_{L²} by 8-point Gauss per cell.
    pub fn l2_error(&self, exact: impl Fn(f64) -> f64) -> f64 {
        let h = 1.0 / self.n_cells as f64;
        let gl = gauss_legendre(8);
        (0..self.n_cells)
            .map(|c| {
                gl.integrate(c as f64 * h, (c + 1) as f64 * h, |x| {
                    (self.eval(x) - exact(x)).powi(2)
                })
            })
            .sum::<f64>()
            .sqrt()
    }
}

pub const COERCIVITY_SAMPLES: usize = 200;

pub fn solve_bvp(coef: &BvpCoefficients, n_cells: usize) -> Result<BvpSolution> {
    solve_bvp_seeded(coef, n_cells, 7)
}

/// [`solve_bvp`] with the seed of the random coercivity probes.
pub fn solve_bvp_seeded(coef: &BvpCoefficients, n_cells: usize, seed: u64) -> Result<BvpSolution> {
    let sys = assemble(coef, n_cells)?;
    let coercivity = coercivity_check(coef, &sys, COERCIVITY_SAMPLES, seed);
    if !coercivity.coercive {
        return Err(Error::NonCoercive(format!(
            "indicator {:.3e}, margin c - b'/2 = {:.3e}",
            coercivity.indicator, coercivity.margin
        )));
    }
    let rhs = load_vector(&*coef.f, n_cells);
    let lu = sys.combined.clone().lu();
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::NonCoercive("singular system matrix".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonCoercive("non-finite solution".into()));
    }
    let residual = (&sys.combined * &x - &rhs).amax();
    let energy = x.dot(&(&sys.combined * &x));
    let mut nodal = vec![0.0];
    nodal.extend(x.iter());
    nodal.push(0.0);
    Ok(BvpSolution {
        n_cells,
        nodal,
        residual,
        energy,
        coercivity,
    })
}

/// Applies the strong operator to u with u′(0) = u′(1) = 0 and u(0) = u(1) = 0:
/// −r∫₀ˣ K_l(y)u″(x−y)dy − (1−r)∫₀^{1−x} K_r(y)u″(x+y)dy + b u′ + c u.
pub fn apply_operator(
    coef: &BvpCoefficients,
    u: &dyn Fn(f64) -> f64,
    du: &dyn Fn(f64) -> f64,
    d2u: &dyn Fn(f64) -> f64,
    x: f64,
) -> Result<f64> {
    let exp = &coef.exponent;
    let kl = |y: f64| {
        let a = exp.alpha(y);
        y.powf(1.0 - a) * rgamma(2.0 - a)
    };
    let kr = |y: f64| {
        let a = exp.alpha(1.0 - y);
        y.powf(1.0 - a) * rgamma(2.0 - a)
    };
    // y = L w^{1/(2−α_end)} removes the y^{1−α} endpoint singularity
    let weakened =
        |k: &dyn Fn(f64) -> f64, len: f64, a_end: f64, inner: &dyn Fn(f64) -> f64| -> Result<f64> {
            if len <= 0.0 {
                return Ok(0.0);
            }
            let p = 1.0 / (2.0 - a_end);
            adaptive(
                |w| {
                    let y = len * w.powf(p);
                    if y <= 0.0 {
                        return 0.0;
                    }
                    k(y) * inner(y) * len * p * w.powf(p - 1.0)
                },
                0.0,
                1.0,
                1e-13,
                1e-11,
            )
        };
    let left = weakened(&kl, x, exp.alpha0, &|y| d2u(x - y))?;
    let right = weakened(&kr, 1.0 - x, exp.alpha_at_1, &|y| d2u(x + y))?;
    Ok(-coef.r * left - (1.0 - coef.r) * right + (coef.b)(x) * du(x) + (coef.c)(x) * u(x))
}

/// u = x²(1−x)² and its first two derivatives.
pub fn quartic_bubble() -> (Scalar, Scalar, Scalar) {
    (
        Arc::new(|x| x * x * (1.0 - x) * (1.0 - x)),
        Arc::new(|x| 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x)),
        Arc::new(|x| 2.0 - 12.0 * x + 12.0 * x * x),
    )
}

/// Coefficients whose exact solution is x²(1−x)², with f cached on a fine grid
/// and interpolated by cubic Lagrange pieces.
pub fn manufactured_coefficients(
    r: f64,
    exponent: ExponentFunction,
    b0: f64,
    c0: f64,
    samples: usize,
) -> Result<BvpCoefficients> {
    let proto = BvpCoefficients::constant_coefficients(r, exponent, b0, c0, Arc::new(|_| 0.0))?;
    let (u, du, d2u) = quartic_bubble();
    let dx = 1.0 / samples as f64;
    let table: Vec<f64> = (0..=samples)
        .into_par_iter()
        .map(|k| apply_operator(&proto, &*u, &*du, &*d2u, k as f64 * dx))
        .collect::<Result<_>>()?;
    let f: Scalar = Arc::new(move |x| {
        let s = (x / dx).clamp(0.0, samples as f64);
        let j0 = (s.floor() as usize).saturating_sub(1).min(samples - 3);
        let t = s - j0 as f64;
        let p = &table[j0..j0 + 4];
        let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
        let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
        let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
        let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
        l0 * p[0] + l1 * p[1] + l2 * p[2] + l3 * p[3]
    });
    Ok(BvpCoefficients { f, ..proto })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coef(exp: ExponentFunction, r: f64) -> BvpCoefficients {
        BvpCoefficients::constant_coefficients(r, exp, 0.0, 0.0, Arc::new(|_| 1.0)).unwrap()
    }

    #[test]
    fn symmetric_for_constant_exponent_and_half_weight() {
        let c = coef(ExponentFunction::constant(1.5).unwrap(), 0.5);
        let s = assemble_frac_stiffness(&c, 16).unwrap();
        assert!((&s - s.transpose()).amax() < 1e-12);
        assert_eq!(assemble_perturbation(&c, 16).unwrap().amax(), 0.0);
    }

    #[test]
    fn near_two_is_classical_stiffness() {
        let c = coef(ExponentFunction::constant(1.99).unwrap(), 0.5);
        let s = assemble_frac_stiffness(&c, 8).unwrap();
        let h = 1.0 / 8.0;
        assert!(s[(3, 3)] > 0.0 && s[(3, 4)] < 0.0 && s[(4, 3)] < 0.0);
        assert!(
            (s[(3, 3)] * h - 2.0).abs() < 0.1 && (s[(3, 4)] * h + 1.0).abs() < 0.1,
            "{}",
            s[(3, 3)] * h
        );
    }

    #[test]
    fn zero_source_gives_zero() {
        let c = BvpCoefficients::constant_coefficients(
            0.3,
            ExponentFunction::linear(1.4, 0.2).unwrap(),
            1.0,
            2.0,
            Arc::new(|_| 0.0),
        )
        .unwrap();
        let s = solve_bvp(&c, 16).unwrap();
        assert!(s.nodal.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn negative_reaction_is_flagged() {
        let c = BvpCoefficients::constant_coefficients(
            0.5,
            ExponentFunction::constant(1.5).unwrap(),
            0.0,
            -50.0,
            Arc::new(|_| 1.0),
        )
        .unwrap();
        let sys = assemble(&c, 16).unwrap();
        let rep = coercivity_check(&c, &sys, 200, 1);
        assert!(!rep.coercive && rep.margin == -50.0);
        assert!(matches!(solve_bvp(&c, 16), Err(Error::NonCoercive(_))));
    }

    #[test]
    fn perturbation_refinement_consistency() {
        // a coarse hat is a combination of fine hats, so coarse entries follow by bilinearity
        let c = coef(ExponentFunction::linear(1.4, 0.2).unwrap(), 0.3);
        let coarse = assemble_perturbation(&c, 4).unwrap();
        let fine = assemble_perturbation(&c, 8).unwrap();
        // coarse hat k (node 2k+2 in fine numbering, 1-based) = ½φ_{2k+1} + φ_{2k+2} + ½φ_{2k+3}
        let emb = DMatrix::from_fn(7, 3, |fi, ck| {
            match (fi + 1) as isize - 2 * (ck as isize + 1) {
                0 => 1.0,
                -1 | 1 => 0.5,
                _ => 0.0,
            }
        });
        let restricted = emb.transpose() * &fine * &emb;
        assert!(
            (&restricted - &coarse).amax() < 1e-10,
            "{}",
            (&restricted - &coarse).amax()
        );
        let frac_c = assemble_frac_stiffness(&c, 4).unwrap();
        let frac_f = assemble_frac_stiffness(&c, 8).unwrap();
        assert!((emb.transpose() * frac_f * &emb - frac_c).amax() < 1e-12);
    }

    #[test]
    fn operator_of_constant_order_on_quadratic() {
        // u″ = 2 constant: ∫₀ˣ K(y)·2 dy = 2x^{2−α}/Γ(3−α)
        let c = coef(ExponentFunction::constant(1.5).unwrap(), 1.0 - 1e-9);
        let v = apply_operator(&c, &|_| 0.0, &|_| 0.0, &|_| 2.0, 0.3).unwrap();
        let ex = -2.0 * 0.3f64.powf(0.5) * rgamma(1.5) * (1.0 - 1e-9)
            - 1e-9 * 2.0 * 0.7f64.powf(0.5) * rgamma(1.5);
        assert!((v - ex).abs() < 1e-10, "{v} {ex}");
    }
}
