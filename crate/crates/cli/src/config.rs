//! `key = value` experiment configuration with presets and overrides.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use varfrac::ExponentFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Kernel,
    Subdiffusion,
    Abel,
    Bvp,
    InvertAlpha0,
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Subdiffusion => "subdiffusion",
            Command::Abel => "abel",
            Command::Bvp => "bvp",
            Command::InvertAlpha0 => "invert-alpha0",
            Command::Convergence => "convergence",
        }
    }

    /// Keys accepted by this subcommand.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Command::Kernel => &["alpha0", "exponent", "amp", "T", "points"],
            Command::Subdiffusion => &[
                "alpha0", "exponent", "amp", "T", "M", "N", "lambda", "problem", "probe_x",
                "probe_y",
            ],
            Command::Abel => &[
                "alpha0",
                "exponent",
                "amp",
                "T",
                "N",
                "solution",
                "threshold",
            ],
            Command::Bvp => &["alpha0", "exponent", "amp", "r", "b", "c", "cells"],
            Command::InvertAlpha0 => &[
                "alpha0",
                "exponent",
                "amp",
                "T",
                "M",
                "N",
                "lambda",
                "levels",
                "tolerance",
            ],
            Command::Convergence => &[
                "alpha0",
                "exponent",
                "amp",
                "T",
                "M",
                "N",
                "lambda",
                "axis",
                "order_tolerance",
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentKind {
    /// α₀ + amp·sin 2πt
    Sine,
    /// α₀ + amp·t
    Linear,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// u = (1 + t^{α₀}) sin πx sin πy
    Manufactured,
    /// u₀ = sin πx sin πy, f = x(1−x)y(1−y)
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbelSolution {
    Quadratic,
    Exp,
    Cos,
    /// f ≡ 1, no exact solution
    UnitData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub alpha0: Vec<f64>,
    pub exponent: ExponentKind,
    pub amp: f64,
    pub horizon: f64,
    pub lambda: Option<f64>,
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub problem: ProblemKind,
    pub probe: (f64, f64),
    pub points: usize,
    pub solution: AbelSolution,
    pub threshold: f64,
    pub r: f64,
    pub b: f64,
    pub c: f64,
    pub cells: Vec<usize>,
    pub levels: usize,
    pub tolerance: f64,
    pub axis_space: bool,
    pub order_tolerance: f64,
    /// Raw key/value pairs as applied, echoed into CSV metadata.
    pub applied: BTreeMap<String, String>,
}

pub const PRESETS: &[&str] = &[
    "fig-left",
    "fig-right",
    "abel-roundtrip",
    "bvp-manufactured",
    "invert",
];

impl ExperimentConfig {
    /// Documented defaults of each subcommand.
    pub fn defaults(command: Command) -> Self {
        let mut c = Self {
            command,
            alpha0: vec![0.6],
            exponent: ExponentKind::Sine,
            amp: 0.1,
            horizon: 1.0,
            lambda: None,
            m: vec![64],
            n: vec![32, 64, 128, 256],
            problem: ProblemKind::Manufactured,
            probe: (0.5, 0.5),
            points: 50,
            solution: AbelSolution::Quadratic,
            threshold: 1e-3,
            r: 0.5,
            b: 1.0,
            c: 2.0,
            cells: vec![16, 32, 64, 128],
            levels: 6,
            tolerance: 0.05,
            axis_space: false,
            order_tolerance: 0.2,
            applied: BTreeMap::new(),
        };
        match command {
            Command::Abel => {
                c.exponent = ExponentKind::Linear;
                c.n = vec![64, 128, 256];
            }
            Command::Bvp => {
                c.alpha0 = vec![1.4];
                c.exponent = ExponentKind::Linear;
                c.amp = 0.2;
            }
            Command::InvertAlpha0 => {
                c.alpha0 = vec![0.4, 0.6, 0.8];
                c.exponent = ExponentKind::Linear;
                c.horizon = 1e-6;
                c.m = vec![16];
                c.n = vec![1024];
            }
            _ => {}
        }
        c
    }

    /// Applies a named preset on top of the defaults.
    pub fn preset(command: Command, name: &str) -> Result<Self> {
        let mut c = Self::defaults(command);
        let pairs: &[(&str, &str)] = match name {
            "fig-left" => &[
                ("alpha0", "0.4,0.6,0.8"),
                ("exponent", "linear"),
                ("amp", "0.1"),
                ("T", "0.1"),
                ("M", "64"),
                ("N", "300"),
                ("problem", "probe"),
            ],
            "fig-right" => &[
                ("alpha0", "0.4,0.6,0.8"),
                ("exponent", "sine"),
                ("M", "64"),
                ("N", "32,64,128,256"),
            ],
            "abel-roundtrip" => &[
                ("alpha0", "0.4"),
                ("exponent", "linear"),
                ("solution", "quadratic"),
                ("N", "64,128,256"),
            ],
            "bvp-manufactured" => &[
                ("alpha0", "1.4"),
                ("amp", "0.2"),
                ("r", "0.5"),
                ("b", "1"),
                ("c", "2"),
            ],
            "invert" => &[("alpha0", "0.4,0.6,0.8")],
            other => bail!(
                "unknown preset '{other}'; available: {}",
                PRESETS.join(", ")
            ),
        };
        for (k, v) in pairs {
            if command.keys().contains(k) {
                c.set(k, v)?;
            }
        }
        Ok(c)
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            self.set(k.trim(), v.trim())
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.apply_text(&text)
            .with_context(|| format!("in {}", path.display()))
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("override '{kv}' is not key=value"))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !self.command.keys().contains(&key) {
            bail!(
                "unknown key '{key}' for {}; accepted keys: {}",
                self.command.name(),
                self.command.keys().join(", ")
            );
        }
        match key {
            "alpha0" => self.alpha0 = list(key, value, |s| num(key, s))?,
            "exponent" => {
                self.exponent = match value {
                    "sine" => ExponentKind::Sine,
                    "linear" => ExponentKind::Linear,
                    "constant" => ExponentKind::Constant,
                    _ => bail!("exponent = '{value}': accepted values are sine, linear, constant"),
                }
            }
            "amp" => self.amp = num(key, value)?,
            "T" => self.horizon = positive(key, value)?,
            "lambda" => {
                let l = num(key, value)?;
                if !(l >= 0.0) {
                    bail!("lambda = {value}: accepted range is [0, inf)");
                }
                self.lambda = Some(l);
            }
            "M" => self.m = list(key, value, |s| count(key, s, 2))?,
            "N" => self.n = list(key, value, |s| count(key, s, 2))?,
            "cells" => self.cells = list(key, value, |s| count(key, s, 2))?,
            "problem" => {
                self.problem = match value {
                    "manufactured" => ProblemKind::Manufactured,
                    "probe" => ProblemKind::Probe,
                    _ => bail!("problem = '{value}': accepted values are manufactured, probe"),
                }
            }
            "probe_x" => self.probe.0 = unit(key, value)?,
            "probe_y" => self.probe.1 = unit(key, value)?,
            "points" => self.points = count(key, value, 1)?,
            "solution" => {
                self.solution = match value {
                    "quadratic" => AbelSolution::Quadratic,
                    "exp" => AbelSolution::Exp,
                    "cos" => AbelSolution::Cos,
                    "unit-data" => AbelSolution::UnitData,
                    _ => bail!(
                        "solution = '{value}': accepted values are quadratic, exp, cos, unit-data"
                    ),
                }
            }
            "threshold" => self.threshold = positive(key, value)?,
            "r" => {
                self.r = num(key, value)?;
                if !(self.r > 0.0 && self.r < 1.0) {
                    bail!("r = {value}: accepted range is (0, 1)");
                }
            }
            "b" => self.b = num(key, value)?,
            "c" => self.c = num(key, value)?,
            "levels" => self.levels = count(key, value, 3)?,
            "tolerance" => self.tolerance = positive(key, value)?,
            "axis" => {
                self.axis_space = match value {
                    "time" => false,
                    "space" => true,
                    _ => bail!("axis = '{value}': accepted values are time, space"),
                }
            }
            "order_tolerance" => self.order_tolerance = positive(key, value)?,
            _ => unreachable!("key list and match arms agree"),
        }
        self.applied.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Range checks that depend on several keys.
    pub fn validate(&self) -> Result<()> {
        for &a in &self.alpha0 {
            let ok = match self.command {
                Command::Bvp => a > 1.0 && a < 2.0,
                Command::Abel | Command::Kernel => (0.0..=1.0).contains(&a),
                _ => a > 0.0 && a < 1.0,
            };
            if !ok {
                let range = match self.command {
                    Command::Bvp => "(1, 2) for a space exponent",
                    Command::Abel | Command::Kernel => "[0, 1]",
                    _ => "(0, 1) (the Interior regime)",
                };
                bail!("alpha0 = {a}: accepted range is {range}");
            }
            self.exponent_for(a)
                .with_context(|| format!("exponent with alpha0 = {a}"))?;
        }
        if self.command == Command::InvertAlpha0 {
            let n = self.n[0];
            if n % (1 << self.levels) != 0 || n >> self.levels < 2 {
                bail!("N = {n}: must be a multiple of 2^levels with at least 2 steps per smallest sample");
            }
        }
        Ok(())
    }

    pub fn exponent_for(&self, a0: f64) -> varfrac::Result<ExponentFunction> {
        let horizon = self.horizon;
        let e = match self.exponent {
            ExponentKind::Sine => ExponentFunction::sine(a0, self.amp)?,
            ExponentKind::Linear => ExponentFunction::linear(a0, self.amp)?,
            ExponentKind::Constant => ExponentFunction::constant(a0)?,
        };
        if self.command == Command::Bvp || horizon == 1.0 {
            Ok(e)
        } else {
            e.with_horizon(horizon)
        }
    }
}

impl fmt::Display for ExperimentConfig {
    /// Echo of the effective configuration for CSV metadata.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "command={}", self.command.name())?;
        for (k, v) in &self.applied {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

fn num(key: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| anyhow!("{key} = '{s}': expected a real number"))?;
    if !v.is_finite() {
        bail!("{key} = '{s}': expected a finite number");
    }
    Ok(v)
}

fn positive(key: &str, s: &str) -> Result<f64> {
    let v = num(key, s)?;
    if !(v > 0.0) {
        bail!("{key} = {s}: accepted range is (0, inf)");
    }
    Ok(v)
}

fn unit(key: &str, s: &str) -> Result<f64> {
    let v = num(key, s)?;
    if !(v > 0.0 && v < 1.0) {
        bail!("{key} = {s}: accepted range is (0, 1)");
    }
    Ok(v)
}

fn count(key: &str, s: &str, min: usize) -> Result<usize> {
    let v: usize = s
        .parse()
        .map_err(|_| anyhow!("{key} = '{s}': expected an integer"))?;
    if v < min {
        bail!("{key} = {v}: accepted range is [{min}, inf)");
    }
    Ok(v)
}

fn list<T>(key: &str, s: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let out: Vec<T> = s
        .split(',')
        .map(|p| parse(p.trim()))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        bail!("{key}: list must be nonempty");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_subdiffusion_config_gives_defaults() {
        let mut c = ExperimentConfig::defaults(Command::Subdiffusion);
        c.apply_text("").unwrap();
        c.validate().unwrap();
        assert_eq!(c.alpha0, vec![0.6]);
        assert_eq!(c.exponent, ExponentKind::Sine);
        assert_eq!(c.amp, 0.1);
        assert_eq!(c.m, vec![64]);
        assert_eq!(c.n, vec![32, 64, 128, 256]);
        assert_eq!(c.lambda, None);
        assert_eq!(c.horizon, 1.0);
    }

    #[test]
    fn out_of_range_alpha0_names_the_key() {
        let mut c = ExperimentConfig::defaults(Command::Subdiffusion);
        c.apply_text("alpha0 = 1.5").unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("alpha0") && msg.contains("(0, 1)"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut c = ExperimentConfig::defaults(Command::Kernel);
        let msg = format!("{:#}", c.apply_text("# comment\nM = 4").unwrap_err());
        assert!(msg.contains("unknown key 'M'"), "{msg}");
        assert!(c.apply_override("bogus=1").is_err());
    }

    #[test]
    fn fig_left_preset() {
        let c = ExperimentConfig::preset(Command::Subdiffusion, "fig-left").unwrap();
        assert_eq!(c.horizon, 0.1);
        assert_eq!(c.m, vec![64]);
        assert_eq!(c.n, vec![300]);
        assert_eq!(c.problem, ProblemKind::Probe);
        assert_eq!(c.exponent, ExponentKind::Linear);
        assert_eq!(c.alpha0, vec![0.4, 0.6, 0.8]);
        c.validate().unwrap();
        assert!(ExperimentConfig::preset(Command::Subdiffusion, "nope").is_err());
    }

    #[test]
    fn malformed_values() {
        let mut c = ExperimentConfig::defaults(Command::Convergence);
        assert!(c.set("N", "32,abc").is_err());
        assert!(c.set("N", "1").is_err());
        assert!(c.set("lambda", "-1").is_err());
        assert!(c.set("axis", "diagonal").is_err());
    }
}
