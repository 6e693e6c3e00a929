//! Closed-form target functions with metadata and statistical self-checks.
//!
//! Two Lipschitz targets on the cube, scaled so their second moment on the
//! sampling cube is ≈ 1, plus the single-neuron target used by the
//! random-feature separation experiment. `norm-difference` and
//! `single-neuron` lie in the natural function space of two-layer ReLU
//! networks; `max-difference` does not.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::ActivationKind;
use crate::error::{Error, Result};
use crate::sampling::{RngSpec, SubStream};
use crate::sum::{pairwise_mean, pairwise_sum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    NormDifference,
    MaxDifference,
    SingleNeuron,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::NormDifference => "norm-difference",
            TargetKind::MaxDifference => "max-difference",
            TargetKind::SingleNeuron => "single-neuron",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm-difference" => Ok(TargetKind::NormDifference),
            "max-difference" => Ok(TargetKind::MaxDifference),
            "single-neuron" => Ok(TargetKind::SingleNeuron),
            other => Err(Error::UnknownTarget(other.to_string())),
        }
    }
}

/// A named closed-form target `f*` in dimension `d`.
#[derive(Clone, Debug)]
pub struct TargetFunction {
    kind: TargetKind,
    d: usize,
    /// Offset vector with entries `a_i = 2i/d − 1`, `i = 1..d`. Skews the
    /// difference targets away from the origin, where the initial particle
    /// distribution is symmetric.
    offset: Vec<f64>,
}

impl TargetFunction {
    pub fn new(kind: TargetKind, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("target dimension must be >= 1".into()));
        }
        let offset = (1..=d).map(|i| 2.0 * i as f64 / d as f64 - 1.0).collect();
        Ok(TargetFunction { kind, d, offset })
    }

    pub fn from_name(name: &str, d: usize) -> Result<Self> {
        TargetFunction::new(name.parse()?, d)
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// Whether `f*` lies in the two-layer ReLU function space.
    pub fn is_barron(&self) -> bool {
        match self.kind {
            TargetKind::NormDifference | TargetKind::SingleNeuron => true,
            TargetKind::MaxDifference => false,
        }
    }

    /// Evaluate `f*(x)`. Panics on dimension mismatch.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(
            x.len(),
            self.d,
            "eval_target: input has dimension {}, target has {}",
            x.len(),
            self.d
        );
        match self.kind {
            TargetKind::NormDifference => {
                // sqrt(3/2) * (|x − a| − |x + a|)
                let mut minus = 0.0;
                let mut plus = 0.0;
                for (xi, ai) in x.iter().zip(&self.offset) {
                    minus += (xi - ai) * (xi - ai);
                    plus += (xi + ai) * (xi + ai);
                }
                (1.5f64).sqrt() * (minus.sqrt() - plus.sqrt())
            }
            TargetKind::MaxDifference => {
                // sqrt(d/π) * (max_i(x_i − a_i) − max_i(−x_i − a_i))
                let mut m1 = f64::NEG_INFINITY;
                let mut m2 = f64::NEG_INFINITY;
                for (xi, ai) in x.iter().zip(&self.offset) {
                    m1 = m1.max(xi - ai);
                    m2 = m2.max(-xi - ai);
                }
                (self.d as f64 / std::f64::consts::PI).sqrt() * (m1 - m2)
            }
            TargetKind::SingleNeuron => ActivationKind::Relu.value(x[0]),
        }
    }

    /// Monte Carlo self-check over `n` uniform samples on
    /// `[−half_width, half_width]^d`.
    pub fn stats(&self, n: usize, seed: u64, half_width: f64) -> Result<TargetStats> {
        if n < 2 {
            return Err(Error::NotEnoughPoints { needed: 2, got: n });
        }
        if half_width <= 0.0 || half_width.is_nan() {
            return Err(Error::InvalidConfig("half_width must be positive".into()));
        }
        let mut rng = RngSpec::new(seed).stream(SubStream::TargetStats);
        let points = crate::sampling::sample_uniform_cube(n, self.d, half_width, &mut rng)?;
        let values: Vec<f64> = (0..n)
            .map(|j| self.eval(&points[j * self.d..(j + 1) * self.d]))
            .collect();

        let mean = pairwise_mean(&values);
        let centered_sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let variance = pairwise_sum(&centered_sq) / (n - 1) as f64;

        // Difference quotients over consecutive sample pairs; probes (from
        // below) the Lipschitz constant, which is bounded by sqrt(6d).
        let mut lipschitz_probe = 0.0f64;
        for j in 1..n {
            let x = &points[(j - 1) * self.d..j * self.d];
            let y = &points[j * self.d..(j + 1) * self.d];
            let dist_sq: f64 = x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum();
            if dist_sq > 0.0 {
                lipschitz_probe =
                    lipschitz_probe.max((values[j] - values[j - 1]).abs() / dist_sq.sqrt());
            }
        }

        Ok(TargetStats {
            mean,
            variance,
            lipschitz_probe,
        })
    }
}

/// Result of [`TargetFunction::stats`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TargetStats {
    pub mean: f64,
    pub variance: f64,
    pub lipschitz_probe: f64,
}

/// The a-priori Lipschitz bound `sqrt(6d)` shared by all three targets.
pub fn lipschitz_bound(d: usize) -> f64 {
    (6.0 * d as f64).sqrt()
}
