//! Quadrature rules: Gauss-Jacobi, graded composite rules for endpoint
//! singularities, and adaptive Gauss-Kronrod.

use crate::error::{Error, Result};
use crate::special::gamma;
use nalgebra::{DMatrix, SymmetricEigen};

/// A rule on [0, 1]. `comp[i]` holds `1 - nodes[i]` computed without cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub comp: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ wᵢ h(zᵢ, 1 − zᵢ).
    pub fn apply(&self, mut h: impl FnMut(f64, f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.comp)
            .zip(&self.weights)
            .map(|((&z, &zc), &w)| w * h(z, zc))
            .sum()
    }

    /// ∫ₐᵇ f for a rule without weight function.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        len * self.apply(|z, _| f(a + len * z))
    }
}

/// Gauss-Jacobi rule for ∫₀¹ h(z) (1−z)^a z^b dz by Golub-Welsch.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Rule {
    assert!(n >= 1 && a > -1.0 && b > -1.0);
    let ab = a + b;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        jac[(k, k)] = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        if k + 1 < n {
            let m = kf + 1.0;
            let s = 2.0 * m + ab;
            // (m+a+b)/(2m+a+b−1) is 1 at m = 1; cancelled to survive a+b = −1
            let beta = if k == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * m * (m + a) * (m + b) * (m + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            jac[(k, k + 1)] = beta.sqrt();
            jac[(k + 1, k)] = beta.sqrt();
        }
    }
    // mass of (1−x)^a (1+x)^b on [−1, 1]
    let mu0 = 2f64.powf(ab + 1.0) * gamma(a + 1.0) * gamma(b + 1.0) / gamma(ab + 2.0);
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let scale = 2f64.powf(-(ab + 1.0));
    Rule {
        nodes: pairs.iter().map(|p| 0.5 * (1.0 + p.0)).collect(),
        comp: pairs.iter().map(|p| 0.5 * (1.0 - p.0)).collect(),
        weights: pairs.iter().map(|p| p.1 * scale).collect(),
    }
}

pub fn gauss_legendre(n: usize) -> Rule {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Composite rule for ∫₀¹ h(z)(1−z)^a z^b dz with geometric refinement toward
/// either endpoint. The end panels carry the Jacobi weight exactly; interior
/// panels fold the weight into Gauss-Legendre nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grading {
    /// Geometric panels between the end panel at 0 and z = 1/2.
    pub left: usize,
    /// Same toward z = 1.
    pub right: usize,
    /// Ratio between consecutive panel lengths.
    pub ratio: f64,
    /// Nodes per panel.
    pub nodes: usize,
}

impl Default for Grading {
    fn default() -> Self {
        Self {
            left: 20,
            right: 0,
            ratio: 0.25,
            nodes: 16,
        }
    }
}

impl Grading {
    pub fn both(panels: usize) -> Self {
        Self {
            left: panels,
            right: panels,
            ..Self::default()
        }
    }
}

pub fn graded_jacobi(a: f64, b: f64, g: Grading) -> Rule {
    let gl = gauss_legendre(g.nodes);
    let mut out = Rule {
        nodes: vec![],
        comp: vec![],
        weights: vec![],
    };
    // Left half: distances from 0 are z itself.
    half(&mut out, &gl, b, a, g.left, g.ratio, g.nodes, false);
    half(&mut out, &gl, a, b, g.right, g.ratio, g.nodes, true);
    out
}

/// Fills [0, 1/2] measured from the endpoint at distance 0; `mirror` maps d ↦ 1 − d.
/// `e_near` is the exponent of the weight at this endpoint, `e_far` at the other.
#[allow(clippy::too_many_arguments)]
fn half(
    out: &mut Rule,
    gl: &Rule,
    e_near: f64,
    e_far: f64,
    panels: usize,
    ratio: f64,
    n: usize,
    mirror: bool,
) {
    let mut push = |d: f64, w: f64| {
        // d is the distance to the near endpoint
        let other = 1.0 - d;
        if mirror {
            out.nodes.push(other);
            out.comp.push(d);
        } else {
            out.nodes.push(d);
            out.comp.push(other);
        }
        out.weights.push(w);
    };
    let c0 = 0.5 * ratio.powi(panels as i32);
    // end panel [0, c0] with weight d^{e_near}
    let gj = gauss_jacobi(n, 0.0, e_near);
    let s = c0.powf(1.0 + e_near);
    for (&x, &w) in gj.nodes.iter().zip(&gj.weights) {
        let d = c0 * x;
        push(d, s * w * (1.0 - d).powf(e_far));
    }
    let mut lo = c0;
    for k in (0..panels).rev() {
        let hi = 0.5 * ratio.powi(k as i32);
        let len = hi - lo;
        for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
            let d = lo + len * x;
            push(d, len * w * d.powf(e_near) * (1.0 - d).powf(e_far));
        }
        lo = hi;
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod (7/15) on [a, b]. Never samples the endpoints.
pub fn adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    const MAX_INTERVALS: usize = 2000;
    let (v, e) = gk15(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target {
            return Ok(total);
        }
        if parts.len() >= MAX_INTERVALS || !err.is_finite() {
            return Err(Error::Quadrature {
                achieved: err,
                target,
            });
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|p, q| p.1 .3.total_cmp(&q.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature {
                achieved: err,
                target,
            });
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beta_fn(p: f64, q: f64) -> f64 {
        gamma(p) * gamma(q) / gamma(p + q)
    }

    #[test]
    fn gauss_jacobi_integrates_monomials_exactly() {
        for &(a, b) in &[
            (0.0, 0.0),
            (-0.6, -0.4),
            (-0.3, 0.0),
            (0.0, -0.7),
            (-0.5, -0.5),
        ] {
            let r = gauss_jacobi(8, a, b);
            for k in 0..15 {
                let exact = beta_fn(a + 1.0, b + 1.0 + k as f64);
                let got = r.apply(|z, _| z.powi(k));
                assert!(
                    (got - exact).abs() < 1e-12 * exact.max(1.0),
                    "a={a} b={b} k={k} {got} {exact}"
                );
            }
        }
    }

    #[test]
    fn gauss_jacobi_handles_a_plus_b_minus_one() {
        let r = gauss_jacobi(20, -0.4, -0.6);
        let got = r.apply(|z, _| z * z);
        assert!((got - beta_fn(0.6, 2.4)).abs() < 1e-13);
    }

    #[test]
    fn graded_rule_resolves_log_endpoint() {
        // ∫₀¹ z^{-0.4} ln z dz = −1/0.6²
        let r = graded_jacobi(
            0.0,
            -0.4,
            Grading {
                left: 40,
                ..Grading::default()
            },
        );
        let got = r.apply(|z, _| z.ln());
        assert!((got + 1.0 / 0.36).abs() < 1e-12, "{got}");
        // ∫₀¹ (1−z)^{-0.3} z^{-0.4} ln(1−z) dz, both ends graded
        let r = graded_jacobi(-0.3, -0.4, Grading::both(40));
        let got = r.apply(|_, zc| zc.ln());
        let exact = beta_fn(0.7, 0.6)
            * (statrs::function::gamma::digamma(0.7) - statrs::function::gamma::digamma(1.3));
        assert!((got - exact).abs() < 1e-12, "{got} vs {exact}");
    }

    #[test]
    fn complements_are_consistent() {
        let r = graded_jacobi(-0.2, -0.5, Grading::both(6));
        for (z, zc) in r.nodes.iter().zip(&r.comp) {
            assert!((z + zc - 1.0).abs() < 1e-15);
            assert!(*z > 0.0 && *zc > 0.0);
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let v = adaptive(|x| x.powf(-0.5), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
        let v = adaptive(|x| x.sin(), 0.0, 3.0, 1e-14, 1e-14).unwrap();
        assert!((v - (1.0 - 3f64.cos())).abs() < 1e-13);
    }

    #[test]
    fn adaptive_reports_failure() {
        let e = adaptive(|x| 1.0 / x, 0.0, 1.0, 1e-12, 0.0);
        assert!(matches!(e, Err(Error::Quadrature { .. })));
    }
}
