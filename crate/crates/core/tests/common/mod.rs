//! Reference computations for the integration tests. Nothing here calls the
//! solver paths under test: integrals use double-exponential quadrature,
//! finite element matrices come from stencils and solves are dense.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::{digamma, gamma};
use std::f64::consts::FRAC_PI_2;

/// ∫_a^b f by tanh-sinh; `f(x, x − a, b − x)` receives accurate endpoint distances.
pub fn tanh_sinh(f: impl Fn(f64, f64, f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let hw = 0.5 * (b - a);
    let eval = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = hw * FRAC_PI_2 * t.cosh() / (cu * cu);
        // distance to the nearer endpoint, free of cancellation
        let d = hw * (-u.abs()).exp() / cu;
        if d <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let (x, dl, dr) = if t >= 0.0 {
            (b - d, b - a - d, d)
        } else {
            (a + d, d, b - a - d)
        };
        w * f(x, dl, dr)
    };
    // nodes stop about 1e−137 from the endpoints, so y^{−p} stays finite for p < 2
    // and the truncated tail of a y^{−0.9} singularity is below 1e−12
    const T_MAX: f64 = 5.3;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut mass = sum.abs();
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        let (p, q) = (eval(k as f64 * h), eval(-(k as f64) * h));
        sum += p + q;
        mass += p.abs() + q.abs();
        k += 1;
    }
    let mut estimate = h * sum;
    for _ in 0..8 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            let (p, q) = (eval(k as f64 * h), eval(-(k as f64) * h));
            sum += p + q;
            mass += p.abs() + q.abs();
            k += 2;
        }
        let next = h * sum;
        // roundoff in the sum scales with the integral of |f|
        let floor = 64.0 * f64::EPSILON * h * mass;
        if (next - estimate).abs() <= (rel_tol * next.abs()).max(floor) {
            return next;
        }
        estimate = next;
    }
    estimate
}

pub fn rgamma(x: f64) -> f64 {
    1.0 / gamma(x)
}

/// β_μ(t) = t^{μ−1}/Γ(μ).
pub fn beta(mu: f64, t: f64) -> f64 {
    t.powf(mu - 1.0) * rgamma(mu)
}

/// Abel kernel t^{−α(t)}/Γ(1−α(t)).
pub fn abel_kernel(alpha: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    let a = alpha(t);
    t.powf(-a) * rgamma(1.0 - a)
}

/// g(t) = ∫₀ᵗ β_{α₀}(t−s) k(s) ds.
pub fn identity_g(alpha: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    let a0 = alpha(0.0);
    tanh_sinh(
        |_, dl, dr| beta(a0, dr) * abel_kernel(alpha, dl),
        0.0,
        t,
        1e-14,
    )
}

/// g̃ = k − β_{1−α₀}, evaluated without cancellation near 0.
pub fn g_tilde(alpha: &dyn Fn(f64) -> f64, s: f64) -> f64 {
    let a0 = alpha(0.0);
    let a = alpha(s);
    let x = -(a - a0) * s.ln();
    s.powf(-a0) * (x.exp_m1() * rgamma(1.0 - a) + (rgamma(1.0 - a) - rgamma(1.0 - a0)))
}

/// (β_{α₀} * g̃)(t).
pub fn beta_conv_g_tilde(alpha: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    let a0 = alpha(0.0);
    tanh_sinh(|_, dl, dr| beta(a0, dr) * g_tilde(alpha, dl), 0.0, t, 1e-13)
}

/// (1/τ)∫ e^{−λy}β_{α₀}(y) hₘ(y) dy for the hat hₘ centred at mτ (half hat for m = 0).
pub fn beta_cq_weight(alpha0: f64, lambda: f64, tau: f64, m: usize) -> f64 {
    let ker = |y: f64| (-lambda * y).exp() * beta(alpha0, y);
    let c = m as f64 * tau;
    let right = tanh_sinh(
        |y, dl, _| ker(if m == 0 { dl } else { y }) * (tau - (y - c)),
        c,
        c + tau,
        1e-14,
    );
    let left = if m == 0 {
        0.0
    } else {
        tanh_sinh(
            |y, dl, _| ker(if m == 1 { dl } else { y }) * (y - c + tau),
            c - tau,
            c,
            1e-14,
        )
    };
    (left + right) / tau
}

/// (k * u)(t) = ∫₀ᵗ k(y) u(t−y) dy.
pub fn abel_forward(alpha: &dyn Fn(f64) -> f64, u: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    tanh_sinh(|_, dl, dr| abel_kernel(alpha, dl) * u(dr), 0.0, t, 1e-13)
}

/// A space exponent on one side: α(y), α′(y) and the difference quotient (α(y) − α(0))/y,
/// the latter in closed form so that it keeps full relative accuracy as y → 0.
pub struct SideExponent<'a> {
    pub alpha: &'a dyn Fn(f64) -> f64,
    pub alpha_prime: &'a dyn Fn(f64) -> f64,
    pub quotient: &'a dyn Fn(f64) -> f64,
}

/// y^{1−α(y)}/Γ(2−α(y)) minus β_{2−α(0)}, and its derivative.
///
/// With B = β_{2−α₀} and K = B·R, g = B(R − 1) and g′ = B′(R − 1) + B R′.
pub fn sided_perturbation(e: &SideExponent, y: f64) -> (f64, f64) {
    let a0 = (e.alpha)(0.0);
    let a = (e.alpha)(y);
    let da = (e.alpha_prime)(y);
    let q = (e.quotient)(y);
    let ly = y.ln();
    // lnΓ(2−α₀) − lnΓ(2−α) as an integral of ψ; the direct difference loses α − α₀ to rounding.
    let (nodes, weights) = gauss_legendre_01(16);
    let d: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(t, w)| w * digamma(2.0 - a0 - q * y * t))
        .sum::<f64>()
        * q
        * y;
    let ln_r = -q * y * ly + d;
    let r_minus_1 = ln_r.exp_m1();
    let dln_r = -da * ly - q + da * digamma(2.0 - a);
    let b = y.powf(1.0 - a0) * rgamma(2.0 - a0);
    let db = (1.0 - a0) * y.powf(-a0) * rgamma(2.0 - a0);
    (
        b * r_minus_1,
        db * r_minus_1 + b * (1.0 + r_minus_1) * dln_r,
    )
}

/// max |a − b|, infinite when any entry is not finite.
pub fn max_abs_diff<'a>(
    a: impl IntoIterator<Item = &'a f64>,
    b: impl IntoIterator<Item = &'a f64>,
) -> f64 {
    a.into_iter().zip(b).fold(0.0, |m: f64, (x, y)| {
        let d = (x - y).abs();
        if d.is_finite() {
            m.max(d)
        } else {
            f64::INFINITY
        }
    })
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// P1 matrices on the uniform mesh of (0,1)² whose squares are cut along the
/// (i,j)–(i+1,j+1) diagonal, interior nodes numbered row by row.
pub struct StencilFem {
    pub m: usize,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
}

impl StencilFem {
    pub fn new(m: usize) -> Self {
        let w = m - 1;
        let n = w * w;
        let h2 = 1.0 / (m * m) as f64;
        let mut mass = DMatrix::zeros(n, n);
        let mut stiffness = DMatrix::zeros(n, n);
        for j in 0..w {
            for i in 0..w {
                let p = j * w + i;
                mass[(p, p)] = h2 / 2.0;
                stiffness[(p, p)] = 4.0;
                let neighbours: [(isize, isize, f64, f64); 6] = [
                    (1, 0, h2 / 12.0, -1.0),
                    (-1, 0, h2 / 12.0, -1.0),
                    (0, 1, h2 / 12.0, -1.0),
                    (0, -1, h2 / 12.0, -1.0),
                    (1, 1, h2 / 12.0, 0.0),
                    (-1, -1, h2 / 12.0, 0.0),
                ];
                for (di, dj, mv, av) in neighbours {
                    let (ii, jj) = (i as isize + di, j as isize + dj);
                    if ii < 0 || jj < 0 || ii >= w as isize || jj >= w as isize {
                        continue;
                    }
                    let q = jj as usize * w + ii as usize;
                    mass[(p, q)] = mv;
                    stiffness[(p, q)] = av;
                }
            }
        }
        Self { m, mass, stiffness }
    }

    pub fn dofs(&self) -> usize {
        (self.m - 1) * (self.m - 1)
    }

    pub fn node(&self, p: usize) -> (f64, f64) {
        let w = self.m - 1;
        let h = 1.0 / self.m as f64;
        (((p % w) + 1) as f64 * h, ((p / w) + 1) as f64 * h)
    }

    /// (q, φₚ) with a collapsed 6×6 Gauss product rule on each of the six triangles around node p.
    pub fn load(&self, q: &dyn Fn(f64, f64) -> f64) -> DVector<f64> {
        let (z, wz) = gauss_legendre_01(6);
        let h = 1.0 / self.m as f64;
        DVector::from_fn(self.dofs(), |p, _| {
            let (x0, y0) = self.node(p);
            // triangles sharing the node, as the two other vertices' offsets in units of h
            let tris: [[(f64, f64); 2]; 6] = [
                [(1.0, 0.0), (1.0, 1.0)],
                [(1.0, 1.0), (0.0, 1.0)],
                [(0.0, 1.0), (-1.0, 0.0)],
                [(-1.0, 0.0), (-1.0, -1.0)],
                [(-1.0, -1.0), (0.0, -1.0)],
                [(0.0, -1.0), (1.0, 0.0)],
            ];
            let mut acc = 0.0;
            for [e1, e2] in tris {
                // x = node + s·e1·h + t·e2·h with hat value 1 − s − t, Duffy: s = a, t = (1−a)b
                for (a, wa) in z.iter().zip(&wz) {
                    for (b, wb) in z.iter().zip(&wz) {
                        let s = *a;
                        let t = (1.0 - a) * b;
                        let x = x0 + (s * e1.0 + t * e2.0) * h;
                        let y = y0 + (s * e1.1 + t * e2.1) * h;
                        acc += wa * wb * (1.0 - a) * (1.0 - s - t) * q(x, y);
                    }
                }
            }
            // |det| of the map is h² for every triangle
            acc * h * h
        })
    }

    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        let x = DVector::from_column_slice(v);
        x.dot(&(&self.mass * &x)).sqrt()
    }
}

/// Gauss-Legendre nodes and weights on [0, 1] by Newton iteration on Pₙ.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// √(vᵀMv) with the P1 mass stencil, without forming M.
pub fn stencil_l2_norm(m: usize, v: &[f64]) -> f64 {
    let w = m - 1;
    let h2 = 1.0 / (m * m) as f64;
    let at = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= w as isize || j >= w as isize {
            0.0
        } else {
            v[j as usize * w + i as usize]
        }
    };
    let mut acc = 0.0;
    for j in 0..w as isize {
        for i in 0..w as isize {
            let mv = h2 / 2.0 * at(i, j)
                + h2 / 12.0
                    * (at(i + 1, j)
                        + at(i - 1, j)
                        + at(i, j + 1)
                        + at(i, j - 1)
                        + at(i + 1, j + 1)
                        + at(i - 1, j - 1));
            acc += mv * at(i, j);
        }
    }
    acc.sqrt()
}

/// Constant-order system from the first antiderivative of the fractional integral,
/// integrated against the test-hat derivatives by double-exponential quadrature.
pub fn constant_order_system(alpha: f64, r: f64, b: f64, c: f64, cells: usize) -> DMatrix<f64> {
    let nu = 2.0 - alpha;
    let h = 1.0 / cells as f64;
    let n = cells - 1;
    let gnu = rgamma(nu + 1.0);
    let pos = |y: f64| if y > 0.0 { y.powf(nu) } else { 0.0 };
    // φⱼ′ = 1/h on [(j)h, (j+1)h], −1/h on [(j+1)h, (j+2)h] (0-based interior j)
    let left = |j: usize, x: f64| {
        let (a, m, e) = (j as f64 * h, (j + 1) as f64 * h, (j + 2) as f64 * h);
        gnu / h * ((pos(x - a) - pos(x - m)) - (pos(x - m) - pos(x - e)))
    };
    let right = |j: usize, x: f64| {
        let (a, m, e) = (j as f64 * h, (j + 1) as f64 * h, (j + 2) as f64 * h);
        gnu / h * ((pos(m - x) - pos(a - x)) - (pos(e - x) - pos(m - x)))
    };
    DMatrix::from_fn(n, n, |i, j| {
        let mut v = 0.0;
        for (cell, sign) in [(i, 1.0), (i + 1, -1.0)] {
            let (lo, hi) = (cell as f64 * h, (cell + 1) as f64 * h);
            let inner = |x: f64| r * left(j, x) + (1.0 - r) * right(j, x);
            v += sign / h * tanh_sinh(|x, _, _| inner(x), lo, hi, 1e-14);
        }
        v += match i as isize - j as isize {
            0 => c * 2.0 * h / 3.0,
            -1 => b * 0.5 + c * h / 6.0,
            1 => -b * 0.5 + c * h / 6.0,
            _ => 0.0,
        };
        v
    })
}

/// ∫₀^len f(δ + u) du for f singular at 0 and δ ≥ 0; y = δeʷ resolves the scale δ.
fn from_singularity(f: &dyn Fn(f64) -> f64, delta: f64, len: f64) -> f64 {
    if len < 1e-60 {
        // the integrand is O(y^{1−α₀} ln y) with α₀ < 2
        return 0.0;
    }
    if delta <= 0.0 {
        return tanh_sinh(|_, dl, _| f(dl), 0.0, len, 1e-12);
    }
    tanh_sinh(
        |w, _, _| {
            let y = delta * w.exp();
            f(y) * y
        },
        0.0,
        (len / delta).ln_1p(),
        1e-12,
    )
}

/// Perturbation entries by nested double-exponential quadrature of g_l′ and g_r′.
pub fn perturbation_reference(
    left: &SideExponent,
    right: &SideExponent,
    r: f64,
    cells: usize,
) -> DMatrix<f64> {
    let h = 1.0 / cells as f64;
    let n = cells - 1;
    let hat = |i: usize, x: f64| (1.0 - (x / h - (i + 1) as f64).abs()).max(0.0);
    let dhat = |j: usize, s: f64| {
        let k = s / h - j as f64;
        if (0.0..1.0).contains(&k) {
            1.0 / h
        } else if (1.0..2.0).contains(&k) {
            -1.0 / h
        } else {
            0.0
        }
    };
    let breaks: Vec<f64> = (0..=cells).map(|k| k as f64 * h).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let outer = |x: f64| {
            // ∫₀ˣ g_l′(x−s)φⱼ′(s)ds and ∫ₓ¹ g_r′(s−x)φⱼ′(s)ds, split at the mesh points
            let mut l = 0.0;
            let mut rr = 0.0;
            for w in breaks.windows(2) {
                let (a, b) = (w[0], w[1]);
                let d = dhat(j, 0.5 * (a + b));
                if d == 0.0 {
                    continue;
                }
                if a < x {
                    let hi = b.min(x);
                    l += d * from_singularity(&|y| sided_perturbation(left, y).1, x - hi, hi - a);
                }
                if b > x {
                    let lo = a.max(x);
                    rr += d * from_singularity(&|y| sided_perturbation(right, y).1, lo - x, b - lo);
                }
            }
            -r * l + (1.0 - r) * rr
        };
        let mut v = 0.0;
        for cell in [i, i + 1] {
            let (lo, hi) = (cell as f64 * h, (cell + 1) as f64 * h);
            v += tanh_sinh(|x, _, _| hat(i, x) * outer(x), lo, hi, 1e-10);
        }
        v
    })
}
