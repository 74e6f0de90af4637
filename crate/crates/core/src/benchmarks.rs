//! Synthetic objectives, negated so that larger is better, and regret.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::{E, PI};

use crate::error::{Error, Result};
use crate::math::{cos, exp, sin, sqrt};
use crate::space::Bounds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Objective {
    Ackley,
    Rastrigin,
    Branin,
    Levy1d,
}

impl Objective {
    pub const ALL: [Objective; 4] = [Objective::Ackley, Objective::Rastrigin, Objective::Branin, Objective::Levy1d];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Ackley => "ackley",
            Objective::Rastrigin => "rastrigin",
            Objective::Branin => "branin",
            Objective::Levy1d => "levy1d",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == lower)
            .or(match lower.as_str() {
                "branin2d" => Some(Objective::Branin),
                "levy" => Some(Objective::Levy1d),
                _ => None,
            })
            .ok_or_else(|| Error::UnknownObjective(name.to_string()))
    }
}

/// A benchmark with its native box and, where known, optimum metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveFn {
    pub kind: Objective,
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub known_optimum_value: Option<f64>,
    pub known_optimizers: Vec<Vec<f64>>,
    /// Smallest value over the box, where known.
    pub known_minimum_value: Option<f64>,
}

impl ObjectiveFn {
    /// Looks up `name` in the registry. Branin is fixed at 2 dimensions and
    /// Levy1d at 1; the others accept any `dim ≥ 1`.
    pub fn by_name(name: &str, dim: usize) -> Result<Self> {
        Self::new(Objective::from_name(name)?, dim)
    }

    pub fn new(kind: Objective, dim: usize) -> Result<Self> {
        let fixed = match kind {
            Objective::Branin => Some(2),
            Objective::Levy1d => Some(1),
            _ => None,
        };
        if let Some(f) = fixed {
            if dim != f {
                return Err(Error::DimensionMismatch { expected: f, got: dim });
            }
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("objective dimension must be positive"));
        }
        Ok(match kind {
            Objective::Ackley => Self {
                kind,
                dim,
                lower: vec![-5.0; dim],
                upper: vec![10.0; dim],
                known_optimum_value: Some(0.0),
                known_optimizers: vec![vec![0.0; dim]],
                known_minimum_value: None,
            },
            Objective::Rastrigin => Self {
                kind,
                dim,
                lower: vec![-5.12; dim],
                upper: vec![5.12; dim],
                known_optimum_value: Some(0.0),
                known_optimizers: vec![vec![0.0; dim]],
                known_minimum_value: None,
            },
            Objective::Branin => Self {
                kind,
                dim,
                lower: vec![-5.0, 0.0],
                upper: vec![10.0, 15.0],
                known_optimum_value: Some(-0.397_887_357_729_738_3),
                known_optimizers: vec![vec![-PI, 12.275], vec![PI, 2.275], vec![3.0 * PI, 2.475]],
                known_minimum_value: Some(-308.129_096_011_606_6),
            },
            Objective::Levy1d => Self {
                kind,
                dim,
                lower: vec![-10.0],
                upper: vec![10.0],
                known_optimum_value: Some(0.0),
                known_optimizers: vec![vec![1.0]],
                known_minimum_value: Some(-15.625),
            },
        })
    }

    pub fn name(&self) -> String {
        self.kind.name().to_string()
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(self.lower.clone(), self.upper.clone()).expect("registry boxes are valid")
    }

    /// Spread between the best and worst value over the box, where known.
    pub fn value_range(&self) -> Option<f64> {
        Some(self.known_optimum_value? - self.known_minimum_value?)
    }

    /// Negated standard value at a native-domain point.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(match self.kind {
            Objective::Ackley => -ackley(x),
            Objective::Rastrigin => -rastrigin(x),
            Objective::Branin => -branin(x[0], x[1]),
            Objective::Levy1d => -levy1d(x[0]),
        })
    }
}

fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / d;
    let cs = x.iter().map(|v| cos(2.0 * PI * v)).sum::<f64>() / d;
    -20.0 * exp(-0.2 * sqrt(sq)) - exp(cs) + 20.0 + E
}

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * cos(2.0 * PI * v)).sum::<f64>()
}

fn branin(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    let u = x2 - b * x1 * x1 + c * x1 - 6.0;
    u * u + 10.0 * (1.0 - t) * cos(x1) + 10.0
}

fn levy1d(x: f64) -> f64 {
    let w = 1.0 + (x - 1.0) / 4.0;
    let s = sin(PI * w);
    let s2 = sin(2.0 * PI * w);
    s * s + (w - 1.0) * (w - 1.0) * (1.0 + s2 * s2)
}

/// Per-evaluation regret `r_t = f* − f(x_t)` and its running total.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretTrace {
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Regret of each evaluated value against `optimum`. Values that exceed the
/// optimum through rounding count as zero regret.
pub fn compute_regret(values: &[f64], optimum: Option<f64>) -> Result<RegretTrace> {
    let opt = optimum.ok_or(Error::UnknownOptimum)?;
    let instantaneous: Vec<f64> = values.iter().map(|v| (opt - v).max(0.0)).collect();
    let mut acc = 0.0;
    let cumulative = instantaneous
        .iter()
        .map(|r| {
            acc += r;
            acc
        })
        .collect();
    Ok(RegretTrace {
        instantaneous,
        cumulative,
    })
}
