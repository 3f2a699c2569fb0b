//! Variable-exponent subdiffusion ^c∂ₜ^{α(t)}u − Δu = f on (0,1)² × (0,T]
//! with homogeneous Dirichlet data.
//!
//! Convolving with β_{α₀} turns the model into
//! g*∂ₜu + u − β_{α₀}*Δu = u₀ + β_{α₀}*f, which after weighting by e^{−λt} is
//! discretized by piecewise-linear convolution quadrature in time and P1
//! elements in space. The unknown is Vₙ ≈ e^{−λtₙ}(u(tₙ) − u₀).

use crate::error::{Error, Result};
use crate::exponent::{ExponentFunction, Regime, Scalar};
use crate::fem2d::{assemble, dot, FemSystem};
use crate::kernels::{build_kernel_table, KernelTable};
use crate::quadrature::{
    product_integration_rhs, product_weights, weights_beta_kernel, weights_g_kernel, TimeGrid,
    WeightSet,
};
use crate::rules::{graded_jacobi, Grading, Rule};
use crate::special::{gamma, rgamma};
use crate::study::{Axis, ConvergenceRow, ConvergenceTable};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

pub type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceTime = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Source {
    Zero,
    General(SpaceTime),
    /// f(x, y, t) = w(x, y)·a(t). `convolved` is β_{α₀}*a when known in closed form.
    Separable {
        spatial: Field,
        temporal: Scalar,
        convolved: Option<Scalar>,
    },
}

#[derive(Clone)]
pub struct SubdiffusionProblem {
    pub exponent: ExponentFunction,
    pub u0: Field,
    /// Δu₀; without it the load of Δu₀ is taken as −(∇u₀, ∇φᵢ).
    pub laplacian_u0: Option<Field>,
    pub source: Source,
    pub horizon: f64,
    pub exact: Option<SpaceTime>,
}

impl SubdiffusionProblem {
    pub fn new(
        exponent: ExponentFunction,
        u0: Field,
        source: Source,
        horizon: f64,
    ) -> Result<Self> {
        match exponent.time_regime()? {
            Regime::Interior => {}
            r => return Err(Error::UnsupportedRegime(r)),
        }
        if !(horizon > 0.0) {
            return Err(Error::Domain {
                what: "T",
                value: horizon,
                range: "(0, inf)",
            });
        }
        Ok(Self {
            exponent,
            u0,
            laplacian_u0: None,
            source,
            horizon,
            exact: None,
        })
    }

    pub fn with_laplacian(mut self, lap: Field) -> Self {
        self.laplacian_u0 = Some(lap);
        self
    }

    pub fn with_exact(mut self, exact: SpaceTime) -> Self {
        self.exact = Some(exact);
        self
    }
}

pub fn sin_sin() -> Field {
    Arc::new(|x, y| (PI * x).sin() * (PI * y).sin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub m: usize,
    pub n: usize,
    /// Exponential weight; `None` selects 20/T.
    pub lambda: Option<f64>,
    pub cg_tol: f64,
    pub table_samples: usize,
    pub table_grading: f64,
    pub quadrature_nodes: usize,
}

impl SolverConfig {
    pub fn new(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            lambda: None,
            cg_tol: 1e-12,
            table_samples: 1024,
            table_grading: 2.0,
            quadrature_nodes: 16,
        }
    }

    pub fn lambda_for(&self, horizon: f64) -> f64 {
        self.lambda.unwrap_or(20.0 / horizon)
    }
}

#[derive(Debug, Clone)]
pub struct SolutionSeries {
    /// V₁..V_N.
    pub v: Vec<Vec<f64>>,
    /// U₀..U_N with U₀ = Π_h u₀.
    pub u: Vec<Vec<f64>>,
    pub ritz_u0: Vec<f64>,
    pub grid: TimeGrid,
    pub lambda: f64,
    pub fem: FemSystem,
}

impl SolutionSeries {
    /// Value of Uₙ at interior grid node (i, j).
    pub fn at(&self, n: usize, node: (usize, usize)) -> Option<f64> {
        self.fem.mesh.index(node.0, node.1).map(|k| self.u[n][k])
    }

    /// ‖I_h u − U‖_{l²(0,T;L²)} over n = 1..N.
    pub fn error_l2(&self, exact: &(dyn Fn(f64, f64, f64) -> f64 + Send + Sync)) -> f64 {
        let diffs: Vec<Vec<f64>> = (1..=self.grid.steps)
            .into_par_iter()
            .map(|n| {
                let t = self.grid.t(n);
                let ue = self.fem.interpolate(|x, y| exact(x, y, t));
                ue.iter().zip(&self.u[n]).map(|(a, b)| a - b).collect()
            })
            .collect();
        self.fem.l2_time_norm(&diffs, self.grid.tau)
    }
}

/// e^{−λtₙ}·(β_{α₀}*(Δu₀ + f))(tₙ) tested against φᵢ, for n = 1..N.
pub fn compute_rhs_series(
    problem: &SubdiffusionProblem,
    fem: &FemSystem,
    grid: TimeGrid,
    lambda: f64,
) -> Result<Vec<Vec<f64>>> {
    let a0 = problem.exponent.alpha0;
    let lap = match &problem.laplacian_u0 {
        Some(l) => fem.load(|x, y| l(x, y)),
        None => fem
            .ritz_load(|x, y| (problem.u0)(x, y))
            .into_iter()
            .map(|v| -v)
            .collect(),
    };
    let steps = grid.steps;
    let mut out: Vec<Vec<f64>> = (1..=steps)
        .map(|n| {
            let c = grid.t(n).powf(a0) * rgamma(a0 + 1.0);
            lap.iter().map(|v| c * v).collect()
        })
        .collect();
    match &problem.source {
        Source::Zero => {}
        Source::Separable {
            spatial,
            temporal,
            convolved,
        } => {
            let w = fem.load(|x, y| spatial(x, y));
            let factors: Vec<f64> = match convolved {
                Some(c) => (1..=steps).map(|n| c(grid.t(n))).collect(),
                None => {
                    let samples: Vec<f64> = grid.times().iter().map(|&t| temporal(t)).collect();
                    product_integration_rhs(a0, grid, &samples)?
                }
            };
            for (row, c) in out.iter_mut().zip(factors) {
                for (r, wi) in row.iter_mut().zip(&w) {
                    *r += c * wi;
                }
            }
        }
        Source::General(f) => {
            let loads: Vec<Vec<f64>> = grid
                .times()
                .par_iter()
                .map(|&t| fem.load(|x, y| f(x, y, t)))
                .collect();
            let (r, l) = product_weights(a0, grid);
            out.par_iter_mut().enumerate().for_each(|(k, row)| {
                let n = k + 1;
                for j in 1..=n {
                    let (wr, wl) = (r[n - j], l[n - j]);
                    for ((o, a), b) in row.iter_mut().zip(&loads[j]).zip(&loads[j - 1]) {
                        *o += wr * a + wl * b;
                    }
                }
            });
        }
    }
    for (n, row) in out.iter_mut().enumerate() {
        let e = (-lambda * grid.t(n + 1)).exp();
        row.iter_mut().for_each(|v| *v *= e);
    }
    Ok(out)
}

/// All weight sets and matrices of one run.
pub struct Discretization {
    pub fem: FemSystem,
    pub grid: TimeGrid,
    pub lambda: f64,
    pub g_weights: WeightSet,
    pub beta_weights: WeightSet,
    pub table: KernelTable,
}

impl Discretization {
    pub fn new(problem: &SubdiffusionProblem, cfg: &SolverConfig) -> Result<Self> {
        let grid = TimeGrid::new(problem.horizon, cfg.n)?;
        let lambda = cfg.lambda_for(problem.horizon);
        let table = build_kernel_table(
            &problem.exponent,
            problem.horizon,
            cfg.table_samples,
            cfg.table_grading,
            cfg.quadrature_nodes,
        )?;
        Ok(Self {
            fem: assemble(cfg.m)?,
            grid,
            lambda,
            g_weights: weights_g_kernel(&table, lambda, grid)?,
            beta_weights: weights_beta_kernel(problem.exponent.alpha0, lambda, grid)?,
            table,
        })
    }
}

/// ((1+κ̄₀)M + κ̃̄₀A)Vₙ = e^{−λtₙ}Fₙ − M Σ_{i<n} κ̄_{n−i}Vᵢ − A Σ_{i<n} κ̃̄_{n−i}Vᵢ,
/// Uₙ = e^{λtₙ}Vₙ + Π_h u₀.
pub fn step_scheme(problem: &SubdiffusionProblem, cfg: &SolverConfig) -> Result<SolutionSeries> {
    let d = Discretization::new(problem, cfg)?;
    step_with(problem, cfg, d)
}

pub fn step_with(
    problem: &SubdiffusionProblem,
    cfg: &SolverConfig,
    d: Discretization,
) -> Result<SolutionSeries> {
    let Discretization {
        fem,
        grid,
        lambda,
        g_weights,
        beta_weights,
        ..
    } = d;
    let rhs = compute_rhs_series(problem, &fem, grid, lambda)?;
    let ritz_u0 = fem.ritz_projection(|x, y| (problem.u0)(x, y), cfg.cg_tol)?;
    let kb = &g_weights.weights;
    let kt = &beta_weights.weights;
    let chol = fem.factor(1.0 + kb[0], kt[0]).map_err(|e| Error::Step {
        step: 1,
        source: Box::new(e),
    })?;
    let dofs = fem.dofs();
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(grid.steps);
    let mut h1 = vec![0.0; dofs];
    let mut h2 = vec![0.0; dofs];
    const CHUNK: usize = 512;
    for n in 1..=grid.steps {
        h1.par_chunks_mut(CHUNK)
            .zip(h2.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(c, (a, b))| {
                a.iter_mut().for_each(|x| *x = 0.0);
                b.iter_mut().for_each(|x| *x = 0.0);
                let off = c * CHUNK;
                for i in 1..n {
                    let (wa, wb) = (kb[n - i], kt[n - i]);
                    let vi = &v[i - 1][off..off + a.len()];
                    for k in 0..a.len() {
                        a[k] += wa * vi[k];
                        b[k] += wb * vi[k];
                    }
                }
            });
        let m1 = fem.mass.matvec(&h1);
        let a2 = fem.stiffness.matvec(&h2);
        let b: Vec<f64> = (0..dofs).map(|k| rhs[n - 1][k] - m1[k] - a2[k]).collect();
        let x = chol.solve(&b);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Step {
                step: n,
                source: Box::new(Error::Invalid("non-finite solution".into())),
            });
        }
        v.push(x);
    }
    let mut u = vec![ritz_u0.clone()];
    for (n, vn) in v.iter().enumerate() {
        let e = (lambda * grid.t(n + 1)).exp();
        u.push(vn.iter().zip(&ritz_u0).map(|(a, b)| e * a + b).collect());
    }
    Ok(SolutionSeries {
        v,
        u,
        ritz_u0,
        grid,
        lambda,
        fem,
    })
}

/// Time factors of the manufactured solution u = (1 + t^{α₀}) sin πx sin πy.
///
/// The source is f = a(t) sin πx sin πy with a = (k*∂ₜu)(t) + 2π²(1 + t^{α₀}).
#[derive(Clone)]
pub struct ManufacturedSource {
    exp: ExponentFunction,
    horizon: f64,
    caputo_rule: Rule,
    conv_rule: Rule,
    table: Arc<KernelTable>,
    cache: Vec<f64>,
    dt: f64,
}

impl ManufacturedSource {
    /// `dense` is the number of cache intervals for the interpolated source.
    pub fn new(exp: &ExponentFunction, horizon: f64, dense: usize) -> Result<Self> {
        match exp.time_regime()? {
            Regime::Interior => {}
            r => return Err(Error::UnsupportedRegime(r)),
        }
        let a0 = exp.alpha0;
        let grading = Grading {
            left: 0,
            right: 20,
            ..Grading::default()
        };
        let table = Arc::new(build_kernel_table(exp, horizon, 1024, 2.0, 16)?);
        let mut s = Self {
            exp: exp.clone(),
            horizon,
            caputo_rule: graded_jacobi(-a0, a0 - 1.0, grading),
            conv_rule: graded_jacobi(0.0, a0 - 1.0, grading),
            table,
            cache: vec![],
            dt: horizon / dense.max(1) as f64,
        };
        s.cache = (0..=dense.max(1))
            .into_par_iter()
            .map(|j| s.caputo(j as f64 * s.dt))
            .collect();
        Ok(s)
    }

    /// (k * ∂ₜ t^{α₀})(t) = α₀ ∫₀¹ ψ(t(1−w))(1−w)^{−α₀} w^{α₀−1} dw, ψ(y) = y^{α₀−α(y)}/Γ(1−α(y)).
    pub fn caputo(&self, t: f64) -> f64 {
        let a0 = self.exp.alpha0;
        let psi = |y: f64| {
            if y == 0.0 {
                return rgamma(1.0 - a0);
            }
            let shift = y * self.exp.shift_ratio(y);
            (-shift * y.ln()).exp() * rgamma(1.0 - self.exp.alpha(y))
        };
        a0 * self.caputo_rule.apply(|_, wc| psi(t * wc))
    }

    /// Cubic interpolation of [`Self::caputo`] on the cache grid.
    pub fn caputo_cached(&self, t: f64) -> f64 {
        let last = self.cache.len() - 1;
        let s = (t / self.dt).clamp(0.0, last as f64);
        let j = (s.floor() as usize).min(last.saturating_sub(1));
        if last < 3 {
            return self.caputo(t);
        }
        let j0 = j.saturating_sub(1).min(last - 3);
        let x = s - j0 as f64;
        let p = &self.cache[j0..j0 + 4];
        // Lagrange cubic through nodes 0..3
        let l0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
        let l1 = x * (x - 2.0) * (x - 3.0) / 2.0;
        let l2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
        let l3 = x * (x - 1.0) * (x - 2.0) / 6.0;
        l0 * p[0] + l1 * p[1] + l2 * p[2] + l3 * p[3]
    }

    pub fn time_factor(&self, t: f64) -> f64 {
        self.caputo_cached(t) + 2.0 * PI * PI * (1.0 + t.powf(self.exp.alpha0))
    }

    /// β_{α₀} * a, using β_{α₀}*k = g: (g*∂ₜt^{α₀})(t) + 2π²(β_{α₀}*(1+t^{α₀}))(t).
    pub fn convolved(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let a0 = self.exp.alpha0;
        let g = &self.table;
        let gconv = a0
            * t.powf(a0)
            * self
                .conv_rule
                .apply(|_, wc| g.g(t * wc).unwrap_or(f64::NAN));
        gconv
            + 2.0
                * PI
                * PI
                * (t.powf(a0) * rgamma(a0 + 1.0)
                    + gamma(a0 + 1.0) * t.powf(2.0 * a0) * rgamma(2.0 * a0 + 1.0))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// The manufactured problem u = (1 + t^{α₀}) sin πx sin πy.
pub fn manufactured_problem(
    exp: &ExponentFunction,
    horizon: f64,
    dense: usize,
) -> Result<SubdiffusionProblem> {
    let src = Arc::new(ManufacturedSource::new(exp, horizon, dense)?);
    let a0 = exp.alpha0;
    let w = sin_sin();
    let (s1, s2) = (src.clone(), src);
    let source = Source::Separable {
        spatial: w.clone(),
        temporal: Arc::new(move |t| s1.time_factor(t)),
        convolved: Some(Arc::new(move |t| s2.convolved(t))),
    };
    let w2 = w.clone();
    Ok(
        SubdiffusionProblem::new(exp.clone(), w.clone(), source, horizon)?
            .with_laplacian(Arc::new(move |x, y| -2.0 * PI * PI * w2(x, y)))
            .with_exact(Arc::new(move |x, y, t| (1.0 + t.powf(a0)) * w(x, y))),
    )
}

/// f(x, y, t) of the manufactured problem.
pub fn manufactured_source(
    exp: &ExponentFunction,
    horizon: f64,
    dense: usize,
) -> Result<SpaceTime> {
    let src = ManufacturedSource::new(exp, horizon, dense)?;
    let w = sin_sin();
    Ok(Arc::new(move |x, y, t| src.time_factor(t) * w(x, y)))
}

/// u₀ = sin πx sin πy and f = x(1−x)y(1−y), constant in time.
pub fn probe_problem(exp: &ExponentFunction, horizon: f64) -> Result<SubdiffusionProblem> {
    let w = sin_sin();
    let w2 = w.clone();
    let a0 = exp.alpha0;
    let source = Source::Separable {
        spatial: Arc::new(|x, y| x * (1.0 - x) * y * (1.0 - y)),
        temporal: Arc::new(|_| 1.0),
        convolved: Some(Arc::new(move |t| t.powf(a0) * rgamma(a0 + 1.0))),
    };
    Ok(SubdiffusionProblem::new(exp.clone(), w, source, horizon)?
        .with_laplacian(Arc::new(move |x, y| -2.0 * PI * PI * w2(x, y))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub node: (usize, usize),
    pub snapped: bool,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Slope p of log|Uₙ − Uₙ₋₁|/τ against log t_{n−1/2} over n = 1..=10.
    pub slope: f64,
}

pub const PROBE_WINDOW: usize = 10;

/// Uₙ at the grid node nearest (x₀, y₀) and the early-time slope of its difference quotients.
pub fn probe_singularity(
    problem: &SubdiffusionProblem,
    cfg: &SolverConfig,
    x0: (f64, f64),
) -> Result<ProbeResult> {
    let sol = step_scheme(problem, cfg)?;
    let mesh = sol.fem.mesh;
    let node = mesh.nearest(x0.0, x0.1);
    let snapped = ((node.0 as f64 * mesh.h - x0.0).abs() > 1e-12)
        || ((node.1 as f64 * mesh.h - x0.1).abs() > 1e-12);
    let values: Vec<f64> = (0..=sol.grid.steps)
        .map(|n| {
            sol.at(n, node)
                .ok_or_else(|| Error::Invalid("probe point lies on the boundary".into()))
        })
        .collect::<Result<_>>()?;
    let times = sol.grid.times();
    let slope = difference_slope(&values, sol.grid.tau, PROBE_WINDOW)?;
    Ok(ProbeResult {
        node,
        snapped,
        times,
        values,
        slope,
    })
}

/// Slope of log|Uₙ − Uₙ₋₁|/τ against log((n − 1/2)τ) for n = 1..=window.
pub fn difference_slope(values: &[f64], tau: f64, window: usize) -> Result<f64> {
    if values.len() <= window {
        return Err(Error::Invalid("series shorter than the fit window".into()));
    }
    let mut x = vec![];
    let mut y = vec![];
    for n in 1..=window {
        let d = ((values[n] - values[n - 1]) / tau).abs();
        if d == 0.0 {
            return Err(Error::IllConditioned("zero difference quotient".into()));
        }
        x.push(((n as f64 - 0.5) * tau).ln());
        y.push(d.ln());
    }
    Ok(slope(&x, &y))
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alpha0Estimate {
    pub estimate: f64,
    /// (t, r(t)) from the largest to the smallest sample time.
    pub samples: Vec<(f64, f64)>,
    /// Aitken-accelerated values; the last one is the estimate.
    pub accelerated: Vec<f64>,
}

/// α₀ ≈ lim_{t→0} t∂ₜu(x₀,t)/(u(x₀,t) − u₀(x₀)) for f ≡ 0.
///
/// r is sampled at t = T/2, T/4, ..., T/2^levels with centered differences and
/// the geometric sequence is accelerated by Aitken's Δ², which is exact for
/// r(t) = α₀ + c·t^p on a geometric sequence.
pub fn estimate_alpha0(
    problem: &SubdiffusionProblem,
    cfg: &SolverConfig,
    x0: (f64, f64),
    levels: usize,
) -> Result<Alpha0Estimate> {
    if !matches!(problem.source, Source::Zero) {
        return Err(Error::Invalid("the estimator needs f = 0".into()));
    }
    if levels < 3 {
        return Err(Error::Invalid("need at least three sample levels".into()));
    }
    if cfg.n % (1 << levels) != 0 || cfg.n >> levels < 2 {
        return Err(Error::Invalid(format!(
            "N must be a multiple of 2^{levels} with at least 2 steps below the smallest sample"
        )));
    }
    let sol = step_scheme(problem, cfg)?;
    let mesh = sol.fem.mesh;
    let node = mesh.nearest(x0.0, x0.1);
    let k = mesh
        .index(node.0, node.1)
        .ok_or_else(|| Error::Invalid("probe point on the boundary".into()))?;
    let (px, py) = mesh.coords(k);
    let lap = match &problem.laplacian_u0 {
        Some(l) => l(px, py),
        None => {
            let ld = sol.fem.stiffness.matvec(&sol.ritz_u0);
            -ld[k] / sol.fem.mass.matvec(&vec![1.0; sol.fem.dofs()])[k]
        }
    };
    if lap.abs() < 1e-12 {
        return Err(Error::IllConditioned(
            "laplacian of u0 vanishes at the probe point".into(),
        ));
    }
    let u = |n: usize| sol.u[n][k];
    let tau = sol.grid.tau;
    let mut samples = vec![];
    for j in 1..=levels {
        let n = cfg.n >> j;
        let dudt = (u(n + 1) - u(n - 1)) / (2.0 * tau);
        let den = u(n) - u(0);
        if den.abs() < 1e-12 * u(0).abs().max(1e-300) {
            return Err(Error::IllConditioned(format!(
                "u(t) - u0 = {den:e} at t = {}",
                sol.grid.t(n)
            )));
        }
        samples.push((sol.grid.t(n), sol.grid.t(n) * dudt / den));
    }
    let r: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let accelerated: Vec<f64> = r
        .windows(3)
        .map(|w| {
            let d = w[2] - 2.0 * w[1] + w[0];
            if d.abs() < 1e-14 {
                w[2]
            } else {
                w[2] - (w[2] - w[1]).powi(2) / d
            }
        })
        .collect();
    let estimate = *accelerated.last().expect("levels >= 3");
    Ok(Alpha0Estimate {
        estimate,
        samples,
        accelerated,
    })
}

/// Errors ‖u − U‖_{l²(0,T;L²)} for each (M, N) cell; cells run in parallel.
pub fn run_convergence_study(
    problem: &SubdiffusionProblem,
    base: &SolverConfig,
    cells: &[(usize, usize)],
    axis: Axis,
) -> Result<ConvergenceTable> {
    let exact = problem
        .exact
        .clone()
        .ok_or_else(|| Error::Invalid("study needs an exact solution".into()))?;
    let rows: Vec<ConvergenceRow> = cells
        .par_iter()
        .map(|&(m, n)| {
            let start = Instant::now();
            let cfg = SolverConfig {
                m,
                n,
                ..base.clone()
            };
            let sol = step_scheme(problem, &cfg)?;
            let error = sol.error_l2(&*exact);
            Ok(ConvergenceRow {
                alpha0: problem.exponent.alpha0,
                m,
                n,
                tau: problem.horizon / n as f64,
                h: 1.0 / m as f64,
                error,
                runtime_s: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<_>>()?;
    ConvergenceTable::new(axis, rows)
}

/// (x, y) node values of a series at an interior node, for output.
pub fn node_series(sol: &SolutionSeries, node: (usize, usize)) -> Option<Vec<f64>> {
    let k = sol.fem.mesh.index(node.0, node.1)?;
    Some(sol.u.iter().map(|u| u[k]).collect())
}

/// Σ_i wᵢ (M x)ᵢ, a helper for the reconstruction check.
pub fn mass_pairing(fem: &FemSystem, x: &[f64], y: &[f64]) -> f64 {
    dot(&fem.mass.matvec(x), y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(a0: f64) -> ExponentFunction {
        ExponentFunction::linear(a0, 0.1).unwrap()
    }

    #[test]
    fn rhs_for_eigenfunction_and_linear_source() {
        let e = lin(0.5);
        let fem = assemble(8).unwrap();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let w = sin_sin();
        let w2 = w.clone();
        let p = SubdiffusionProblem::new(e.clone(), w.clone(), Source::Zero, 1.0)
            .unwrap()
            .with_laplacian(Arc::new(move |x, y| -2.0 * PI * PI * w2(x, y)));
        let rhs = compute_rhs_series(&p, &fem, grid, 0.0).unwrap();
        let load = fem.load(|x, y| w(x, y));
        for n in 1..=8 {
            let c = -2.0 * PI * PI * grid.t(n).powf(0.5) * rgamma(1.5);
            for k in 0..fem.dofs() {
                assert!((rhs[n - 1][k] - c * load[k]).abs() < 1e-13);
            }
        }
        let zero: Field = Arc::new(|_, _| 0.0);
        let w3 = w.clone();
        let p = SubdiffusionProblem::new(
            e,
            zero.clone(),
            Source::General(Arc::new(move |x, y, t| t * w3(x, y))),
            1.0,
        )
        .unwrap()
        .with_laplacian(zero);
        let rhs = compute_rhs_series(&p, &fem, grid, 0.0).unwrap();
        for n in 1..=8 {
            let c = grid.t(n).powf(1.5) * rgamma(2.5);
            for k in 0..fem.dofs() {
                assert!((rhs[n - 1][k] - c * load[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn missing_laplacian_uses_ritz_load() {
        let e = lin(0.5);
        let fem = assemble(16).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let with = manufactured_problem(&e, 1.0, 40).unwrap();
        let mut without = with.clone();
        without.laplacian_u0 = None;
        let a = compute_rhs_series(&with, &fem, grid, 0.0).unwrap();
        let b = compute_rhs_series(&without, &fem, grid, 0.0).unwrap();
        let scale = a[3].iter().map(|v| v.abs()).fold(0.0, f64::max);
        let diff = a[3]
            .iter()
            .zip(&b[3])
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-3 * scale, "{diff} {scale}");
    }

    #[test]
    fn reconstruction_identity() {
        let p = manufactured_problem(&lin(0.6), 1.0, 80).unwrap();
        let cfg = SolverConfig::new(6, 8);
        let s = step_scheme(&p, &cfg).unwrap();
        for n in 1..=8 {
            let e = (s.lambda * s.grid.t(n)).exp();
            for k in 0..s.fem.dofs() {
                assert_eq!(s.u[n][k], e * s.v[n - 1][k] + s.ritz_u0[k]);
            }
        }
    }

    #[test]
    fn stationary_solution_is_preserved() {
        let e = lin(0.6);
        let w = sin_sin();
        let w2 = w.clone();
        let w3 = w.clone();
        // f = −Δu₀ makes u ≡ u₀
        let src = Source::Separable {
            spatial: Arc::new(move |x, y| 2.0 * PI * PI * w2(x, y)),
            temporal: Arc::new(|_| 1.0),
            convolved: None,
        };
        let p = SubdiffusionProblem::new(e, w.clone(), src, 1.0)
            .unwrap()
            .with_laplacian(Arc::new(move |x, y| -2.0 * PI * PI * w3(x, y)));
        let s = step_scheme(&p, &SolverConfig::new(16, 16)).unwrap();
        let scale = s.ritz_u0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for n in 1..=16 {
            let d = s.u[n]
                .iter()
                .zip(&s.ritz_u0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(d < 1e-3 * scale, "n={n} {d}");
        }
    }

    #[test]
    fn caputo_factor_for_constant_exponent() {
        let e = ExponentFunction::constant(0.6).unwrap();
        let s = ManufacturedSource::new(&e, 1.0, 20).unwrap();
        for &t in &[1e-6, 0.3, 1.0] {
            assert!((s.caputo(t) - gamma(1.6)).abs() < 1e-12);
        }
        assert!((s.caputo_cached(0.0) - gamma(1.6)).abs() < 1e-12);
    }

    #[test]
    fn probe_slope_of_pure_power() {
        let tau = 0.01;
        let v: Vec<f64> = (0..=20).map(|n| (n as f64 * tau).powf(0.5)).collect();
        let p = difference_slope(&v, tau, 10).unwrap();
        assert!((p + 0.5).abs() < 0.1, "{p}");
    }
}
