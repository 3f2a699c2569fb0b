//! Convolution-quadrature weights for piecewise-linear interpolation on a
//! uniform grid, discrete convolution histories and product integration.

use crate::error::{Error, Result};
use crate::kernels::KernelTable;
use crate::rules::{gauss_legendre, graded_jacobi, Grading, Rule};
use crate::special::{gamma_p, rgamma};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
    pub tau: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Domain {
                what: "N",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain {
                what: "T",
                value: horizon,
                range: "(0, inf)",
            });
        }
        Ok(Self {
            horizon,
            steps,
            tau: horizon / steps as f64,
        })
    }

    /// tₙ = nτ; t_N is returned as T exactly.
    pub fn t(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.tau
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.t(n)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    GPrimeKernel,
    BetaKernel,
}

/// Weights indexed by m = n − i.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub kind: WeightKind,
    pub lambda: f64,
    pub weights: Vec<f64>,
    pub grid: TimeGrid,
}

/// κ̄ₘ = (1/τ)∫_{−τ}^0 ∫_{mτ+z}^{(m+1)τ+z} e^{−λy} g′(y) dy dz (lower limit 0 for m = 0).
///
/// With G(y) = ∫₀^y e^{−λs}g′(s)ds = e^{−λy}(g(y)−1) + λ∫₀^y e^{−λs}(g(s)−1)ds
/// and cell means Hⱼ of G over [(j−1)τ, jτ], κ̄₀ = H₁ and κ̄ₘ = H_{m+1} − Hₘ.
/// Only g enters, so the logarithmic singularity of g′ is never sampled.
pub fn weights_g_kernel(table: &KernelTable, lambda: f64, grid: TimeGrid) -> Result<WeightSet> {
    if grid.horizon > table.horizon * (1.0 + 1e-12) {
        return Err(Error::HorizonMismatch {
            table: table.horizon,
            grid: grid.horizon,
        });
    }
    check_lambda(lambda)?;
    let n = grid.steps;
    let tau = grid.tau;
    if table.exponent().is_constant() {
        return Ok(WeightSet {
            kind: WeightKind::GPrimeKernel,
            lambda,
            weights: vec![0.0; n],
            grid,
        });
    }
    let gl = gauss_legendre(8);
    let first = graded_jacobi(
        0.0,
        0.0,
        Grading {
            left: 20,
            right: 0,
            ratio: 0.25,
            nodes: 8,
        },
    );
    let g = |y: f64| table.g(y.min(table.horizon));
    // cell means of G, j = 1..=N+1
    let mut means = Vec::with_capacity(n + 1);
    let mut hat = 0.0; // ∫₀^{t_{j−1}} e^{−λs}(g−1)
    for j in 1..=n + 1 {
        let (a, b) = ((j - 1) as f64 * tau, j as f64 * tau);
        let rule: &Rule = if j == 1 { &first } else { &gl };
        let (mut i0, mut i1) = (0.0, 0.0);
        for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
            let y = a + tau * z;
            let v = (-lambda * y).exp() * (g(y)? - 1.0);
            i0 += w * v;
            i1 += w * (b - y) * v;
        }
        i0 *= tau;
        i1 *= tau;
        // ∫_cell G = ∫ e^{−λy}(g−1) + λ[τ·hat + ∫(b−s)e^{−λs}(g−1)ds]
        means.push((i0 + lambda * (tau * hat + i1)) / tau);
        hat += i0;
    }
    let mut weights = vec![means[0]];
    weights.extend((1..n).map(|m| means[m] - means[m - 1]));
    Ok(WeightSet {
        kind: WeightKind::GPrimeKernel,
        lambda,
        weights,
        grid,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "lambda",
            value: lambda,
            range: "[0, inf)",
        })
    }
}

/// Σ_{j≥jmin} C(p, j) xʲ for |x| ≤ 1/8.
fn binomial_tail(p: f64, x: f64, jmin: usize) -> f64 {
    let mut coef = 1.0;
    let mut pw = 1.0;
    for j in 0..jmin {
        coef *= (p - j as f64) / (j as f64 + 1.0);
        pw *= x;
    }
    let mut sum = 0.0;
    let mut j = jmin;
    loop {
        let term = coef * pw;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() || j > 60 {
            return sum;
        }
        coef *= (p - j as f64) / (j as f64 + 1.0);
        pw *= x;
        j += 1;
    }
}

/// (m+1)^p − 2m^p + (m−1)^p.
fn second_difference(p: f64, m: usize) -> f64 {
    let mf = m as f64;
    if m < 8 {
        return (mf + 1.0).powf(p) - 2.0 * mf.powf(p) + (mf - 1.0).powf(p);
    }
    let x = 1.0 / mf;
    mf.powf(p) * (binomial_tail(p, x, 2) + binomial_tail(p, -x, 2))
}

/// Weights of β_{α₀,λ}: κ̃̄ₘ = (1/τ)∫ β_{α₀,λ}(y)(τ − |y − mτ|)₊ dy, κ̃̄₀ over [0, τ].
pub fn weights_beta_kernel(alpha0: f64, lambda: f64, grid: TimeGrid) -> Result<WeightSet> {
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(Error::Domain {
            what: "alpha0",
            value: alpha0,
            range: "(0, 1)",
        });
    }
    check_lambda(lambda)?;
    let n = grid.steps;
    let tau = grid.tau;
    let c = tau.powf(alpha0) * rgamma(alpha0 + 2.0);
    let p = alpha0 + 1.0;
    let weights = if lambda == 0.0 {
        let mut w = vec![c];
        w.extend((1..n).map(|m| c * second_difference(p, m)));
        w
    } else {
        let lt = lambda * tau;
        // ∫₀^τ β and ∫₀^τ yβ through the regularized incomplete gamma
        let m0 = lambda.powf(-alpha0) * gamma_p(alpha0, lt);
        let m1 = alpha0 * lambda.powf(-alpha0 - 1.0) * gamma_p(alpha0 + 1.0, lt);
        let gl = gauss_legendre(16);
        let beta = |y: f64| (-lambda * y).exp() * y.powf(alpha0 - 1.0) * rgamma(alpha0);
        let mut w = vec![(tau * m0 - m1) / tau];
        for m in 1..n {
            let centre = m as f64 * tau;
            let left = if m == 1 {
                m1
            } else {
                gl.integrate(centre - tau, centre, |y| beta(y) * (y - centre + tau))
            };
            let right = gl.integrate(centre, centre + tau, |y| beta(y) * (centre + tau - y));
            w.push((left + right) / tau);
        }
        w
    };
    Ok(WeightSet {
        kind: WeightKind::BetaKernel,
        lambda,
        weights,
        grid,
    })
}

/// Σ_{i=1}^{n} κ̄_{n−i} Φᵢ with `values[i-1]` = Φᵢ.
pub fn conv_history(ws: &WeightSet, values: &[f64], n: usize) -> Result<f64> {
    check_history(ws, values.len(), n)?;
    Ok((1..=n).map(|i| ws.weights[n - i] * values[i - 1]).sum())
}

/// Componentwise version of [`conv_history`] for nodal vectors.
pub fn conv_history_nodal(ws: &WeightSet, values: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    check_history(ws, values.len(), n)?;
    let dim = values.first().map_or(0, Vec::len);
    let mut out = vec![0.0; dim];
    for i in 1..=n {
        let w = ws.weights[n - i];
        for (o, v) in out.iter_mut().zip(&values[i - 1]) {
            *o += w * v;
        }
    }
    Ok(out)
}

fn check_history(ws: &WeightSet, len: usize, n: usize) -> Result<()> {
    if n > len {
        return Err(Error::Index { index: n, len });
    }
    if n > ws.weights.len() {
        return Err(Error::Index {
            index: n,
            len: ws.weights.len(),
        });
    }
    Ok(())
}

/// Product-integration weights (R_k, L_k): (β_{α₀} * I h)(tₙ) = Σⱼ R_{n−j} hⱼ + L_{n−j} h_{j−1}.
pub fn product_weights(alpha0: f64, grid: TimeGrid) -> (Vec<f64>, Vec<f64>) {
    let c = grid.tau.powf(alpha0) * rgamma(alpha0 + 2.0);
    let p = alpha0 + 1.0;
    let mut r = Vec::with_capacity(grid.steps);
    let mut l = Vec::with_capacity(grid.steps);
    for k in 0..grid.steps {
        let kf = k as f64;
        let k1 = kf + 1.0;
        // R_k ∝ (k+1)^p − k^p − p k^{p−1},  L_k ∝ p(k+1)^{p−1} − (k+1)^p + k^p
        let (rk, lk) = if k < 8 {
            let kp1 = if k == 0 { 0.0 } else { p * kf.powf(p - 1.0) };
            (
                k1.powf(p) - kf.powf(p) - kp1,
                p * k1.powf(p - 1.0) - k1.powf(p) + kf.powf(p),
            )
        } else {
            (
                kf.powf(p) * binomial_tail(p, 1.0 / kf, 2),
                k1.powf(p) * binomial_tail(p, -1.0 / k1, 2),
            )
        };
        r.push(c * rk);
        l.push(c * lk);
    }
    (r, l)
}

/// (β_{α₀} * Iₜh)(tₙ), n = 1..N, for samples h(t₀..t_N) and their piecewise-linear interpolant.
pub fn product_integration_rhs(alpha0: f64, grid: TimeGrid, samples: &[f64]) -> Result<Vec<f64>> {
    if !(alpha0 > 0.0 && alpha0 <= 1.0) {
        return Err(Error::Domain {
            what: "alpha0",
            value: alpha0,
            range: "(0, 1]",
        });
    }
    if samples.len() != grid.steps + 1 {
        return Err(Error::Invalid(format!(
            "expected {} samples including t = 0, got {}",
            grid.steps + 1,
            samples.len()
        )));
    }
    let (r, l) = product_weights(alpha0, grid);
    Ok((1..=grid.steps)
        .map(|n| {
            (1..=n)
                .map(|j| r[n - j] * samples[j] + l[n - j] * samples[j - 1])
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    pub trials: usize,
    /// Smallest prefix sum Σ_{n≤n*} C̃ₙ(Φ)Φₙ over all trials and prefixes.
    pub min_prefix: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Randomized check of Σ_{n=1}^{n*} C̃ₙ(Φ)Φₙ ≥ −tol for every prefix n*.
pub fn check_weak_positivity(
    ws: &WeightSet,
    trials: usize,
    seed: u64,
    tolerance: f64,
) -> Result<PositivityReport> {
    if ws.kind != WeightKind::BetaKernel {
        return Err(Error::Invalid(
            "weak positivity applies to BetaKernel weights".into(),
        ));
    }
    let n = ws.weights.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_prefix = f64::INFINITY;
    let mut phi = vec![0.0; n];
    for _ in 0..trials {
        for p in phi.iter_mut() {
            *p = StandardNormal.sample(&mut rng);
        }
        min_prefix = min_prefix.min(min_prefix_sum(ws, &phi));
    }
    if trials == 0 {
        min_prefix = 0.0;
    }
    Ok(PositivityReport {
        trials,
        min_prefix,
        tolerance,
        passed: min_prefix >= -tolerance,
    })
}

/// min over n* of Σ_{n≤n*} C̃ₙ(Φ)Φₙ.
pub fn min_prefix_sum(ws: &WeightSet, phi: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut lowest = f64::INFINITY;
    for n in 1..=phi.len() {
        let c: f64 = (1..=n).map(|i| ws.weights[n - i] * phi[i - 1]).sum();
        acc += c * phi[n - 1];
        lowest = lowest.min(acc);
    }
    lowest
}
