//! Particle representation of the parameter measure, network evaluation,
//! and the norm/moment functionals defined on it.
//!
//! A two-layer network under mean-field scaling is the *average* of neuron
//! features, `f(x) = (1/m) Σ a_i σ(w_i·x + b_i)`, so an ensemble of `m`
//! particles stands for the empirical measure `(1/m) Σ δ_{(a_i,w_i,b_i)}`.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activation nonlinearity applied to the pre-activation `w·x + b`.
///
/// `SmoothedRelu` exists only so gradient checks by central finite
/// differences stay away from the ReLU kink; production runs use `Relu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ActivationKind {
    Relu,
    SmoothedRelu { epsilon: f64 },
}

impl ActivationKind {
    pub fn smoothed(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(ActivationKind::SmoothedRelu { epsilon })
        } else {
            Err(Error::InvalidConfig(format!(
                "smoothed relu epsilon must be a positive finite number, got {epsilon}"
            )))
        }
    }

    /// σ(z). ReLU is `max(z, 0)`; the smoothed variant is
    /// `(z + sqrt(z² + ε²)) / 2`, which converges to ReLU pointwise with
    /// `|σ_ε(z) − relu(z)| ≤ ε/2`.
    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            ActivationKind::Relu => z.max(0.0),
            ActivationKind::SmoothedRelu { epsilon } => {
                0.5 * (z + (z * z + epsilon * epsilon).sqrt())
            }
        }
    }

    /// σ'(z). For ReLU the subgradient at the kink is fixed to 0 so runs
    /// are deterministic.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            ActivationKind::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::SmoothedRelu { epsilon } => {
                0.5 * (1.0 + z / (z * z + epsilon * epsilon).sqrt())
            }
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::Relu => write!(f, "relu"),
            ActivationKind::SmoothedRelu { epsilon } => write!(f, "smoothed-relu(eps={epsilon})"),
        }
    }
}

/// One neuron's parameter triple `(a, w, b)`: outer weight, inner weight
/// vector, bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub a: f64,
    pub w: Vec<f64>,
    pub b: f64,
}

impl Particle {
    pub fn new(a: f64, w: Vec<f64>, b: f64) -> Self {
        Particle { a, w, b }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `a² + |w|₂² + b²`, the squared Euclidean norm of the full triple.
    pub fn norm_sq(&self) -> f64 {
        self.a * self.a + self.w.iter().map(|v| v * v).sum::<f64>() + self.b * self.b
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.w.iter().all(|v| v.is_finite())
    }

    /// Multiply every entry by `lambda` (used by homogeneity checks).
    pub fn scaled(&self, lambda: f64) -> Particle {
        Particle {
            a: lambda * self.a,
            w: self.w.iter().map(|v| lambda * v).collect(),
            b: lambda * self.b,
        }
    }
}

/// Single-neuron feature `φ(θ, x) = a · σ(w·x + b)`.
///
/// Panics if `x` and `w` disagree in length.
#[inline]
pub fn feature(particle: &Particle, x: &[f64], kind: ActivationKind) -> f64 {
    assert_eq!(
        particle.w.len(),
        x.len(),
        "feature: input has dimension {}, particle has {}",
        x.len(),
        particle.w.len()
    );
    particle.a * kind.value(pre_activation(particle, x))
}

/// `w·x + b` without the activation.
#[inline]
pub(crate) fn pre_activation(particle: &Particle, x: &[f64]) -> f64 {
    let mut z = particle.b;
    for (wi, xi) in particle.w.iter().zip(x) {
        z += wi * xi;
    }
    z
}

/// Analytic per-parameter derivatives of `φ(θ, x)` at one particle:
/// `(∂φ/∂a, ∂φ/∂w, ∂φ/∂b)`.
pub fn feature_gradient(
    particle: &Particle,
    x: &[f64],
    kind: ActivationKind,
) -> (f64, Vec<f64>, f64) {
    assert_eq!(
        particle.w.len(),
        x.len(),
        "feature_gradient: dimension mismatch"
    );
    let z = pre_activation(particle, x);
    let sigma = kind.value(z);
    let coeff = particle.a * kind.derivative(z);
    (sigma, x.iter().map(|xi| coeff * xi).collect(), coeff)
}

/// `m` particles plus the evaluation conventions they share.
///
/// Immutable during evaluation; the dynamics module is the single writer
/// and mutates only between steps. `trainable_inner = false` puts the
/// ensemble in random-feature mode: `w` and `b` stay frozen at their
/// initial values and only the outer weights `a` move.
#[derive(Clone, Debug)]
pub struct ParticleEnsemble {
    particles: Vec<Particle>,
    d: usize,
    activation: ActivationKind,
    trainable_inner: bool,
}

impl ParticleEnsemble {
    pub fn new(
        particles: Vec<Particle>,
        activation: ActivationKind,
        trainable_inner: bool,
    ) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidConfig(
                "ensemble needs at least one particle".into(),
            ));
        }
        let d = particles[0].dim();
        for (i, p) in particles.iter().enumerate() {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.dim(),
                });
            }
            if !p.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("particle {i}"),
                });
            }
        }
        Ok(ParticleEnsemble {
            particles,
            d,
            activation,
            trainable_inner,
        })
    }

    /// Number of particles `m`.
    pub fn width(&self) -> usize {
        self.particles.len()
    }

    /// Input dimension `d`.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn trainable_inner(&self) -> bool {
        self.trainable_inner
    }

    pub fn set_trainable_inner(&mut self, trainable: bool) {
        self.trainable_inner = trainable;
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub(crate) fn particles_mut(&mut self) -> &mut [Particle] {
        &mut self.particles
    }

    /// Network output `f(x) = (1/m) Σ_i a_i σ(w_i·x + b_i)` — the
    /// mean-field average, not the sum.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(
            x.len(),
            self.d,
            "eval_network: input has dimension {}, ensemble has {}",
            x.len(),
            self.d
        );
        let mut acc = 0.0;
        for p in &self.particles {
            acc += p.a * self.activation.value(pre_activation(p, x));
        }
        acc / self.particles.len() as f64
    }

    /// Second moment `N(π) = (1/m) Σ_i (a_i² + |w_i|₂² + b_i²)`.
    pub fn second_moment(&self) -> f64 {
        let total: f64 = self.particles.iter().map(Particle::norm_sq).sum();
        total / self.particles.len() as f64
    }

    /// Path norm of the canonical discrete representation,
    /// `(1/m) Σ_i |a_i| (|w_i|₁ + |b_i|)`.
    ///
    /// The underlying function-space norm is an infimum over all measures
    /// representing the same function; that infimum is not computable from
    /// one ensemble, so this is an upper bound for it.
    pub fn path_norm(&self) -> f64 {
        let total: f64 = self
            .particles
            .iter()
            .map(|p| p.a.abs() * (p.w.iter().map(|v| v.abs()).sum::<f64>() + p.b.abs()))
            .sum();
        total / self.particles.len() as f64
    }

    /// Replace each particle by `k` identical copies. The represented
    /// measure (and thus the network function) is unchanged.
    pub fn duplicated(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig(
                "duplication factor must be >= 1".into(),
            ));
        }
        let mut particles = Vec::with_capacity(self.particles.len() * k);
        for p in &self.particles {
            for _ in 0..k {
                particles.push(p.clone());
            }
        }
        ParticleEnsemble::new(particles, self.activation, self.trainable_inner)
    }

    /// Snapshot as CSV with header `a,w_1,...,w_d,b`, one particle per row,
    /// 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        self.write_csv_to(&mut out)
            .map_err(|e| Error::io(path, e))?;
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        write!(out, "a")?;
        for k in 1..=self.d {
            write!(out, ",w_{k}")?;
        }
        writeln!(out, ",b")?;
        for p in &self.particles {
            write!(out, "{:.16e}", p.a)?;
            for v in &p.w {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out, ",{:.16e}", p.b)?;
        }
        Ok(())
    }
}

/// The constant `c_d = 6 + 4√d` bounding the path norm by the second
/// moment: `path_norm(π) ≤ c_d · N(π)` for every ensemble.
pub fn moment_bound_constant(d: usize) -> f64 {
    assert!(d >= 1, "moment_bound_constant requires d >= 1, got {d}");
    6.0 + 4.0 * (d as f64).sqrt()
}

/// Standard basis vector `e_k` (0-indexed) in dimension `d`. Test and
/// example helper.
pub fn basis_vector(d: usize, k: usize) -> Vec<f64> {
    assert!(k < d);
    let mut v = vec![0.0; d];
    v[k] = 1.0;
    v
}
