//! Convergence tables and least-squares order fits.

use crate::error::{Error, Result};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub alpha0: f64,
    pub m: usize,
    pub n: usize,
    pub tau: f64,
    pub h: f64,
    pub error: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    /// Slope of log(error) against log(step).
    pub order: f64,
    /// 95% confidence half-width of the slope; infinite for two points.
    pub half_width: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    /// Errors decrease strictly as the step shrinks.
    pub monotone: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Time,
    Space,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub axis: Axis,
    pub rows: Vec<ConvergenceRow>,
    pub fit: Option<OrderFit>,
}

impl ConvergenceTable {
    pub fn new(axis: Axis, rows: Vec<ConvergenceRow>) -> Result<Self> {
        if rows.iter().any(|r| !(r.error > 0.0)) {
            return Err(Error::Invalid("convergence errors must be positive".into()));
        }
        let fit = if rows.len() >= 3 {
            let x: Vec<f64> = rows.iter().map(|r| self::step(axis, r)).collect();
            let e: Vec<f64> = rows.iter().map(|r| r.error).collect();
            Some(fit_order(&x, &e)?)
        } else {
            None
        };
        Ok(Self { axis, rows, fit })
    }
}

fn step(axis: Axis, r: &ConvergenceRow) -> f64 {
    match axis {
        Axis::Time => r.tau,
        Axis::Space => r.h,
    }
}

/// Least-squares slope of log(err) against log(step).
pub fn fit_order(step: &[f64], err: &[f64]) -> Result<OrderFit> {
    if step.len() != err.len() || step.len() < 2 {
        return Err(Error::Invalid(
            "need at least two (step, error) pairs".into(),
        ));
    }
    if err.iter().chain(step).any(|v| !(*v > 0.0)) {
        return Err(Error::Invalid("steps and errors must be positive".into()));
    }
    let n = step.len() as f64;
    let x: Vec<f64> = step.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Invalid("steps must not all be equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let order = sxy / sxx;
    let icpt = my - order * mx;
    let sse: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - icpt - order * a).powi(2))
        .sum();
    let half_width = if step.len() > 2 {
        let dof = n - 2.0;
        let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Invalid(e.to_string()))?;
        t.inverse_cdf(0.975) * (sse / dof / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    let mut idx: Vec<usize> = (0..step.len()).collect();
    idx.sort_by(|&a, &b| step[b].total_cmp(&step[a]));
    let monotone = idx.windows(2).all(|w| err[w[1]] < err[w[0]]);
    Ok(OrderFit {
        order,
        half_width,
        residual: (sse / n).sqrt(),
        monotone,
    })
}
