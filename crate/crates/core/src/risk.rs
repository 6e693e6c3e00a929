//! Risk functionals, analytic per-particle gradients, and the
//! radial/angular force decomposition.
//!
//! Gradients are returned in mean-field velocity scaling: the field for
//! particle `i` is `G_i = m·∇_{θ_i} R_n = (1/n) Σ_j r_j ∇_θ φ(θ_i, x_j)`
//! with residual `r_j = f(x_j) − y_j`, so step sizes mean the same thing
//! at every width.
//!
//! Evaluations parallelize over data samples (risk) and over particles
//! (gradients); every reduction over data runs through a fixed-shape
//! pairwise tree, so results are bit-identical for any thread count.

use rayon::prelude::*;

use crate::ensemble::{pre_activation, Particle, ParticleEnsemble};
use crate::sampling::Dataset;
use crate::sum::{pairwise_sum, PAIRWISE_LEAF};

/// Mean-field gradient triples `(g_a, g_w, g_b)` for all `m` particles.
#[derive(Clone, Debug)]
pub struct GradientField {
    d: usize,
    g_a: Vec<f64>,
    g_w: Vec<f64>,
    g_b: Vec<f64>,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.g_a.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn g_a(&self, i: usize) -> f64 {
        self.g_a[i]
    }

    pub fn g_w(&self, i: usize) -> &[f64] {
        &self.g_w[i * self.d..(i + 1) * self.d]
    }

    pub fn g_b(&self, i: usize) -> f64 {
        self.g_b[i]
    }

    /// `‖G_i‖²` over all d+2 components of one particle's gradient.
    pub fn norm_sq(&self, i: usize) -> f64 {
        self.g_a[i] * self.g_a[i]
            + self.g_w(i).iter().map(|v| v * v).sum::<f64>()
            + self.g_b[i] * self.g_b[i]
    }

    /// `(1/m) Σ_i ‖G_i‖²`, the squared norm of the whole field.
    pub fn mean_norm_sq(&self) -> f64 {
        (0..self.width()).map(|i| self.norm_sq(i)).sum::<f64>() / self.width() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.g_a
            .iter()
            .chain(&self.g_w)
            .chain(&self.g_b)
            .all(|v| v.is_finite())
    }
}

/// Residuals `r_j = f(x_j) − y_j`, parallel over samples.
pub fn residuals(ens: &ParticleEnsemble, data: &Dataset) -> Vec<f64> {
    assert_eq!(
        ens.dim(),
        data.dim(),
        "residuals: ensemble/data dimension mismatch"
    );
    assert!(!data.is_empty(), "residuals: empty dataset");
    (0..data.len())
        .into_par_iter()
        .map(|j| ens.eval(data.point(j)) - data.label(j))
        .collect()
}

/// `R_n = (1/2n) Σ_j r_j²`.
pub fn empirical_risk(ens: &ParticleEnsemble, data: &Dataset) -> f64 {
    risk_from_residuals(&residuals(ens, data))
}

pub fn risk_from_residuals(res: &[f64]) -> f64 {
    let squares: Vec<f64> = res.iter().map(|r| r * r).collect();
    pairwise_sum(&squares) / (2.0 * res.len() as f64)
}

/// Population risk approximated on the frozen evaluation set; identical to
/// [`empirical_risk`] applied to that set.
pub fn population_risk_estimate(ens: &ParticleEnsemble, eval_set: &Dataset) -> f64 {
    empirical_risk(ens, eval_set)
}

/// Partial gradient sums for one particle over a block of samples.
struct PartialGrad {
    a: f64,
    w: Vec<f64>,
    b: f64,
}

/// Pairwise-tree accumulation of `Σ_j r_j ∇_θ φ(θ, x_j)` over `lo..hi`.
fn grad_range(
    p: &Particle,
    ens: &ParticleEnsemble,
    data: &Dataset,
    res: &[f64],
    lo: usize,
    hi: usize,
    inner: bool,
) -> PartialGrad {
    if hi - lo <= PAIRWISE_LEAF {
        let kind = ens.activation();
        let mut acc = PartialGrad {
            a: 0.0,
            w: vec![0.0; ens.dim()],
            b: 0.0,
        };
        for (j, &r) in res.iter().enumerate().skip(lo).take(hi - lo) {
            let x = data.point(j);
            let z = pre_activation(p, x);
            acc.a += r * kind.value(z);
            if inner {
                let coeff = r * p.a * kind.derivative(z);
                if coeff != 0.0 {
                    for (aw, xi) in acc.w.iter_mut().zip(x) {
                        *aw += coeff * xi;
                    }
                    acc.b += coeff;
                }
            }
        }
        acc
    } else {
        let mid = lo + (hi - lo) / 2;
        let mut left = grad_range(p, ens, data, res, lo, mid, inner);
        let right = grad_range(p, ens, data, res, mid, hi, inner);
        left.a += right.a;
        left.b += right.b;
        for (lw, rw) in left.w.iter_mut().zip(&right.w) {
            *lw += rw;
        }
        left
    }
}

/// The mean-field velocity field `G_i = (1/n) Σ_j r_j ∇_θ φ(θ_i, x_j)`.
///
/// In random-feature mode (`trainable_inner = false`) the inner
/// coordinates are frozen and `g_w`, `g_b` are identically zero.
pub fn per_particle_gradient(ens: &ParticleEnsemble, data: &Dataset) -> GradientField {
    let res = residuals(ens, data);
    gradient_from_residuals(ens, data, &res)
}

/// Same as [`per_particle_gradient`] but reusing precomputed residuals.
pub fn gradient_from_residuals(
    ens: &ParticleEnsemble,
    data: &Dataset,
    res: &[f64],
) -> GradientField {
    assert_eq!(
        res.len(),
        data.len(),
        "gradient: residual/data length mismatch"
    );
    let n = data.len() as f64;
    let d = ens.dim();
    let inner = ens.trainable_inner();

    let partials: Vec<PartialGrad> = ens
        .particles()
        .par_iter()
        .map(|p| grad_range(p, ens, data, res, 0, data.len(), inner))
        .collect();

    let m = partials.len();
    let mut g_a = Vec::with_capacity(m);
    let mut g_w = Vec::with_capacity(m * d);
    let mut g_b = Vec::with_capacity(m);
    for part in partials {
        g_a.push(part.a / n);
        g_w.extend(part.w.iter().map(|v| v / n));
        g_b.push(part.b / n);
    }
    GradientField { d, g_a, g_w, g_b }
}

/// Particles closer to the origin than this have no well-defined radial
/// direction; their radial component is reported as 0 and flagged.
pub const RADIAL_DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Decomposition of the gradient field into components along each particle
/// direction `θ_i/‖θ_i‖` and the orthogonal remainder.
#[derive(Clone, Debug)]
pub struct ForceSplit {
    /// `sqrt((1/m) Σ_i radial_i²)`.
    pub radial_norm: f64,
    /// `sqrt((1/m) Σ_i ‖G_i − radial_i·θ̂_i‖²)`.
    pub angular_norm: f64,
    pub per_particle_radial: Vec<f64>,
    /// Indices of particles with `‖θ‖ < 1e-12`.
    pub degenerate: Vec<usize>,
}

/// Split the gradient field into radial and angular parts,
/// `radial_i = (θ_i·G_i)/‖θ_i‖`.
pub fn force_split(ens: &ParticleEnsemble, grad: &GradientField) -> ForceSplit {
    assert_eq!(ens.width(), grad.width(), "force_split: width mismatch");
    assert_eq!(ens.dim(), grad.dim(), "force_split: dimension mismatch");
    let m = ens.width();
    let mut per_particle_radial = Vec::with_capacity(m);
    let mut degenerate = Vec::new();
    let mut radial_sq = 0.0;
    let mut angular_sq = 0.0;

    for (i, p) in ens.particles().iter().enumerate() {
        let norm = p.norm_sq().sqrt();
        let grad_sq = grad.norm_sq(i);
        if norm < RADIAL_DEGENERACY_THRESHOLD {
            per_particle_radial.push(0.0);
            degenerate.push(i);
            angular_sq += grad_sq;
            continue;
        }
        let mut dot = p.a * grad.g_a(i) + p.b * grad.g_b(i);
        for (wi, gi) in p.w.iter().zip(grad.g_w(i)) {
            dot += wi * gi;
        }
        let radial = dot / norm;
        per_particle_radial.push(radial);
        radial_sq += radial * radial;
        angular_sq += (grad_sq - radial * radial).max(0.0);
    }

    ForceSplit {
        radial_norm: (radial_sq / m as f64).sqrt(),
        angular_norm: (angular_sq / m as f64).sqrt(),
        per_particle_radial,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{basis_vector, ActivationKind, Particle, ParticleEnsemble};
    use crate::sampling::{init_ensemble, RngSpec, SubStream};
    use crate::targets::{TargetFunction, TargetKind};

    fn single_particle_instance() -> (ParticleEnsemble, Dataset) {
        // One particle (1, e1, 0), one data point x = e1, y = 0.
        let ens = ParticleEnsemble::new(
            vec![Particle::new(1.0, basis_vector(2, 0), 0.0)],
            ActivationKind::Relu,
            true,
        )
        .unwrap();
        let data = Dataset::from_parts(2, vec![1.0, 0.0], vec![0.0]).unwrap();
        (ens, data)
    }

    #[test]
    fn empirical_risk_single_residual() {
        let (ens, data) = single_particle_instance();
        assert_eq!(empirical_risk(&ens, &data), 0.5);
    }

    #[test]
    fn empirical_risk_zero_on_perfect_fit() {
        let (ens, _) = single_particle_instance();
        let data = Dataset::from_parts(2, vec![1.0, 0.0, 0.5, 0.2], vec![1.0, 0.5]).unwrap();
        assert_eq!(empirical_risk(&ens, &data), 0.0);
    }

    #[test]
    fn duplicating_data_preserves_risk() {
        let ens = init_ensemble(7, 3, RngSpec::new(13)).unwrap();
        let t = TargetFunction::new(TargetKind::NormDifference, 3).unwrap();
        let data = Dataset::sample(&t, 40, 1.0, RngSpec::new(14), SubStream::Dataset).unwrap();
        let mut pts = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..2 {
            for j in 0..data.len() {
                pts.extend_from_slice(data.point(j));
                ys.push(data.label(j));
            }
        }
        let doubled = Dataset::from_parts(3, pts, ys).unwrap();
        let a = empirical_risk(&ens, &data);
        let b = empirical_risk(&ens, &doubled);
        assert!((a - b).abs() <= 1e-14 * a.abs());
    }

    #[test]
    fn population_estimate_on_training_set_is_empirical_risk() {
        let ens = init_ensemble(5, 2, RngSpec::new(1)).unwrap();
        let t = TargetFunction::new(TargetKind::MaxDifference, 2).unwrap();
        let data = Dataset::sample(&t, 30, 1.0, RngSpec::new(2), SubStream::Dataset).unwrap();
        assert_eq!(
            empirical_risk(&ens, &data),
            population_risk_estimate(&ens, &data)
        );
    }

    #[test]
    fn population_estimate_of_zero_network_matches_quadrature() {
        // Zero network against the single-neuron target: the exact
        // population risk is (1/2) E[relu(x_1)²]. The integrand depends
        // only on x_1, so midpoint quadrature over [-1, 1] is the oracle;
        // analytically the value is 1/12.
        let cells = 100_000;
        let mut quad = 0.0;
        for k in 0..cells {
            let z = -1.0 + 2.0 * (k as f64 + 0.5) / cells as f64;
            quad += z.max(0.0).powi(2);
        }
        quad *= 2.0 / cells as f64; // cell width
        let expected = 0.5 * quad / 2.0; // (1/2) × mean over the interval
        assert!((expected - 1.0 / 12.0).abs() < 1e-9, "quadrature {expected}");

        let d = 8;
        let particles = (0..4)
            .map(|i| Particle::new(0.0, vec![0.1 * i as f64; d], 0.2))
            .collect();
        let ens = ParticleEnsemble::new(particles, ActivationKind::Relu, true).unwrap();
        let t = TargetFunction::new(TargetKind::SingleNeuron, d).unwrap();
        let eval_set =
            Dataset::sample(&t, 50_000, 1.0, RngSpec::new(6), SubStream::PopulationEval).unwrap();
        let got = population_risk_estimate(&ens, &eval_set);
        // Monte Carlo error at N = 50,000 is ~1.2e-3 (one sd).
        assert!((got - expected).abs() <= 5e-3, "estimate {got} vs {expected}");
    }

    #[test]
    fn gradient_hand_derived_example() {
        let (ens, data) = single_particle_instance();
        let g = per_particle_gradient(&ens, &data);
        assert_eq!(g.g_a(0), 1.0);
        assert_eq!(g.g_w(0), &[1.0, 0.0]);
        assert_eq!(g.g_b(0), 1.0);
    }

    #[test]
    fn zero_residuals_give_zero_gradient() {
        let (ens, _) = single_particle_instance();
        let data = Dataset::from_parts(2, vec![1.0, 0.0, 0.3, -0.4], vec![1.0, 0.3]).unwrap();
        let g = per_particle_gradient(&ens, &data);
        assert_eq!(g.g_a(0), 0.0);
        assert_eq!(g.g_w(0), &[0.0, 0.0]);
        assert_eq!(g.g_b(0), 0.0);
    }

    #[test]
    fn random_feature_mode_freezes_inner_gradient() {
        let mut ens = init_ensemble(6, 3, RngSpec::new(8)).unwrap();
        ens.set_trainable_inner(false);
        let t = TargetFunction::new(TargetKind::SingleNeuron, 3).unwrap();
        let data = Dataset::sample(&t, 25, 1.0, RngSpec::new(9), SubStream::Dataset).unwrap();
        let g = per_particle_gradient(&ens, &data);
        for i in 0..ens.width() {
            assert!(g.g_w(i).iter().all(|&v| v == 0.0));
            assert_eq!(g.g_b(i), 0.0);
            assert!(g.g_a(i).is_finite());
        }
    }

    #[test]
    fn force_split_single_particle() {
        let (ens, data) = single_particle_instance();
        let g = per_particle_gradient(&ens, &data);
        let split = force_split(&ens, &g);
        // θ·G = 2, ‖θ‖ = √2, so radial = √2.
        let expected = 2.0f64.sqrt();
        assert!((split.per_particle_radial[0] - expected).abs() < 1e-15);
        assert!((split.radial_norm - expected).abs() < 1e-15);
        assert!(split.degenerate.is_empty());
    }

    #[test]
    fn radial_matches_homogeneity_identity() {
        // For ReLU, θ·∇φ = 2φ away from the kink, so the radial component
        // equals (2/‖θ‖)(1/n) Σ r_j a σ(w·x_j + b).
        let ens = init_ensemble(9, 4, RngSpec::new(31)).unwrap();
        let t = TargetFunction::new(TargetKind::NormDifference, 4).unwrap();
        let data = Dataset::sample(&t, 64, 1.0, RngSpec::new(32), SubStream::Dataset).unwrap();
        let res = residuals(&ens, &data);
        let g = gradient_from_residuals(&ens, &data, &res);
        let split = force_split(&ens, &g);
        for (i, p) in ens.particles().iter().enumerate() {
            let mut acc = 0.0;
            for (j, &r) in res.iter().enumerate() {
                acc += r * p.a * ActivationKind::Relu.value(pre_activation(p, data.point(j)));
            }
            let expected = 2.0 / p.norm_sq().sqrt() * acc / data.len() as f64;
            let got = split.per_particle_radial[i];
            assert!(
                (got - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "particle {i}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn orthogonal_gradient_has_zero_radial() {
        let ens = ParticleEnsemble::new(
            vec![Particle::new(1.0, vec![0.0], 0.0)],
            ActivationKind::Relu,
            true,
        )
        .unwrap();
        // G orthogonal to θ = (1, 0, 0): any vector with g_a = 0.
        let g = GradientField {
            d: 1,
            g_a: vec![0.0],
            g_w: vec![3.0],
            g_b: vec![-2.0],
        };
        let split = force_split(&ens, &g);
        assert_eq!(split.per_particle_radial[0], 0.0);
        assert_eq!(split.radial_norm, 0.0);
        let total = g.mean_norm_sq();
        assert!((split.angular_norm.powi(2) - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn pythagoras_for_the_split() {
        let ens = init_ensemble(20, 3, RngSpec::new(77)).unwrap();
        let t = TargetFunction::new(TargetKind::MaxDifference, 3).unwrap();
        let data = Dataset::sample(&t, 128, 1.0, RngSpec::new(78), SubStream::Dataset).unwrap();
        let g = per_particle_gradient(&ens, &data);
        let split = force_split(&ens, &g);
        let lhs = split.radial_norm.powi(2) + split.angular_norm.powi(2);
        let rhs = g.mean_norm_sq();
        assert!(
            (lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300),
            "{lhs} vs {rhs}"
        );
    }

    #[test]
    fn degenerate_particle_is_flagged() {
        let ens = ParticleEnsemble::new(
            vec![
                Particle::new(0.0, vec![0.0], 0.0),
                Particle::new(1.0, vec![1.0], 0.0),
            ],
            ActivationKind::Relu,
            true,
        )
        .unwrap();
        let g = GradientField {
            d: 1,
            g_a: vec![1.0, 1.0],
            g_w: vec![1.0, 1.0],
            g_b: vec![1.0, 1.0],
        };
        let split = force_split(&ens, &g);
        assert_eq!(split.degenerate, vec![0]);
        assert_eq!(split.per_particle_radial[0], 0.0);
    }
}
