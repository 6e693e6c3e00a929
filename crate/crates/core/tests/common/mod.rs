//! Shared test helpers: the central-finite-difference gradient oracle and
//! random small instances. The oracle only ever touches `empirical_risk`,
//! so it stays independent of the analytic gradient path it checks.

use meanfield::ensemble::{ActivationKind, Particle, ParticleEnsemble};
use meanfield::risk::{empirical_risk, per_particle_gradient};
use meanfield::sampling::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `m·R_n` — the objective whose parameter gradient is the mean-field
/// velocity field.
fn scaled_risk(particles: &[Particle], kind: ActivationKind, data: &Dataset) -> f64 {
    let ens = ParticleEnsemble::new(particles.to_vec(), kind, true).unwrap();
    particles.len() as f64 * empirical_risk(&ens, data)
}

/// Central finite differences of `m·R_n` with the given step, flattened as
/// `(a, w_1..w_d, b)` per particle.
pub fn fd_gradient(ens: &ParticleEnsemble, data: &Dataset, step: f64) -> Vec<f64> {
    let kind = ens.activation();
    let base = ens.particles().to_vec();
    let d = ens.dim();
    let mut grad = Vec::with_capacity(base.len() * (d + 2));
    for i in 0..base.len() {
        let diff = |poke: &dyn Fn(&mut Particle, f64)| {
            let mut plus = base.clone();
            poke(&mut plus[i], step);
            let mut minus = base.clone();
            poke(&mut minus[i], -step);
            (scaled_risk(&plus, kind, data) - scaled_risk(&minus, kind, data)) / (2.0 * step)
        };
        grad.push(diff(&|p, eps| p.a += eps));
        for k in 0..d {
            grad.push(diff(&move |p, eps| p.w[k] += eps));
        }
        grad.push(diff(&|p, eps| p.b += eps));
    }
    grad
}

/// The analytic gradient field flattened in the same order as
/// [`fd_gradient`].
pub fn flat_analytic_gradient(ens: &ParticleEnsemble, data: &Dataset) -> Vec<f64> {
    let field = per_particle_gradient(ens, data);
    let mut flat = Vec::with_capacity(ens.width() * (ens.dim() + 2));
    for i in 0..ens.width() {
        flat.push(field.g_a(i));
        flat.extend_from_slice(field.g_w(i));
        flat.push(field.g_b(i));
    }
    flat
}

/// Norm-wise relative error `‖a − b‖ / max(‖b‖, floor)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

/// A random small instance (m ≤ 5, n ≤ 10, d ≤ 4) with smoothed-ReLU
/// activation, so finite differences stay away from the kink.
///
/// Instances whose gradient is numerically negligible on *both* routes
/// are redrawn: the relative-error metric is meaningless at zero
/// gradient, and a redraw can never mask a disagreement (any instance
/// where either route sees a gradient is kept).
pub fn random_instance(seed: u64) -> (ParticleEnsemble, Dataset) {
    let mut salt = 0u64;
    loop {
        let (ens, data) = raw_instance(seed, salt);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm(&flat_analytic_gradient(&ens, &data)) >= 1e-2
            || norm(&fd_gradient(&ens, &data, 1e-6)) >= 1e-2
        {
            return (ens, data);
        }
        salt += 1;
    }
}

fn raw_instance(seed: u64, salt: u64) -> (ParticleEnsemble, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let m = rng.random_range(1..=5);
    let n = rng.random_range(1..=10);
    let d = rng.random_range(1..=4);
    let particles = (0..m)
        .map(|_| {
            Particle::new(
                rng.random_range(-2.0..2.0),
                (0..d).map(|_| rng.random_range(-1.5..1.5)).collect(),
                rng.random_range(-0.5..0.5),
            )
        })
        .collect();
    let kind = ActivationKind::smoothed(1e-3).unwrap();
    let ens = ParticleEnsemble::new(particles, kind, true).unwrap();
    let points = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let data = Dataset::from_parts(d, points, labels).unwrap();
    (ens, data)
}
