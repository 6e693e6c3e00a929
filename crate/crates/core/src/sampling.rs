//! Reproducible random number generation, dataset sampling, and parameter
//! initialization.
//!
//! One seed drives the whole experiment through ChaCha8 sub-streams, one
//! per purpose, so the training data, the initialization, and the
//! population-evaluation set are each independently reproducible. Same
//! seed, same bytes, on any platform and any thread count.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ensemble::{ActivationKind, Particle, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::targets::TargetFunction;

/// Identifier of the generator scheme recorded in run manifests.
pub const RNG_ALGORITHM_ID: &str = "chacha8:u64-seed:substreams-v1";

/// Purpose-keyed sub-stream of the run RNG.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubStream {
    Dataset = 1,
    Init = 2,
    PopulationEval = 3,
    TargetStats = 4,
}

/// Seed plus the fixed generator scheme. Same spec, bit-identical streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        RngSpec { seed }
    }

    /// Generator for one sub-stream. Streams with different purposes never
    /// overlap; the same purpose always replays the same sequence.
    pub fn stream(self, sub: SubStream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sub as u64);
        rng
    }
}

/// `n` i.i.d. uniform points on `[−half_width, half_width]^d`, returned as
/// a flat row-major `n × d` buffer.
pub fn sample_uniform_cube(
    n: usize,
    d: usize,
    half_width: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig(format!(
            "sample sizes must be positive, got n={n}, d={d}"
        )));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "half_width must be positive and finite, got {half_width}"
        )));
    }
    let mut points = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        let u: f64 = rng.random();
        points.push(half_width * (2.0 * u - 1.0));
    }
    Ok(points)
}

/// A fixed labelled sample of points in the cube, with provenance.
#[derive(Clone, Debug)]
pub struct Dataset {
    d: usize,
    points: Vec<f64>,
    labels: Vec<f64>,
    pub seed: u64,
    pub half_width: f64,
}

impl Dataset {
    /// Sample `n` points from the given sub-stream and label them with the
    /// target.
    pub fn sample(
        target: &TargetFunction,
        n: usize,
        half_width: f64,
        spec: RngSpec,
        sub: SubStream,
    ) -> Result<Self> {
        let d = target.dim();
        let mut rng = spec.stream(sub);
        let points = sample_uniform_cube(n, d, half_width, &mut rng)?;
        let labels = (0..n)
            .map(|j| target.eval(&points[j * d..(j + 1) * d]))
            .collect();
        Ok(Dataset {
            d,
            points,
            labels,
            seed: spec.seed,
            half_width,
        })
    }

    /// Build a dataset from explicit points and labels (tests, hand-made
    /// instances).
    pub fn from_parts(d: usize, points: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if d == 0 || labels.is_empty() || points.len() != labels.len() * d {
            return Err(Error::InvalidConfig(format!(
                "inconsistent dataset shape: {} coordinates, {} labels, d={d}",
                points.len(),
                labels.len()
            )));
        }
        if points.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "dataset".into(),
            });
        }
        Ok(Dataset {
            d,
            points,
            labels,
            seed: 0,
            half_width: f64::NAN,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.d..(j + 1) * self.d]
    }

    #[inline]
    pub fn label(&self, j: usize) -> f64 {
        self.labels[j]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// CSV export with header `x_1,...,x_d,y`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        self.write_csv_to(&mut out)
            .map_err(|e| Error::io(path, e))?;
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        for k in 1..=self.d {
            if k > 1 {
                write!(out, ",")?;
            }
            write!(out, "x_{k}")?;
        }
        writeln!(out, ",y")?;
        for j in 0..self.len() {
            for v in self.point(j) {
                write!(out, "{v:.16e},")?;
            }
            writeln!(out, "{:.16e}", self.labels[j])?;
        }
        Ok(())
    }
}

/// Gaussian initialization: `a_i ~ N(0, 1)`, `w_i ~ N(0, 2/(d+1)·I)`, and
/// constants `b_i = 1/(2(d+1))`.
///
/// Draw order per particle is `a`, then the `d` coordinates of `w`; `b` is
/// deterministic. The returned ensemble uses ReLU activation with
/// trainable inner parameters; callers switch to random-feature mode via
/// [`ParticleEnsemble::set_trainable_inner`].
pub fn init_ensemble(m: usize, d: usize, spec: RngSpec) -> Result<ParticleEnsemble> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidConfig(format!(
            "ensemble sizes must be positive, got m={m}, d={d}"
        )));
    }
    let mut rng = spec.stream(SubStream::Init);
    let outer = Normal::new(0.0, 1.0).expect("unit normal");
    let inner = Normal::new(0.0, (2.0 / (d as f64 + 1.0)).sqrt()).expect("inner normal");
    let bias = 1.0 / (2.0 * (d as f64 + 1.0));

    let particles = (0..m)
        .map(|_| {
            let a = outer.sample(&mut rng);
            let w = (0..d).map(|_| inner.sample(&mut rng)).collect();
            Particle::new(a, w, bias)
        })
        .collect();
    ParticleEnsemble::new(particles, ActivationKind::Relu, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sum::pairwise_mean;
    use crate::targets::TargetKind;

    #[test]
    fn same_seed_gives_identical_points() {
        let spec = RngSpec::new(42);
        let a = sample_uniform_cube(100, 3, 1.0, &mut spec.stream(SubStream::Dataset)).unwrap();
        let b = sample_uniform_cube(100, 3, 1.0, &mut spec.stream(SubStream::Dataset)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn substreams_differ() {
        let spec = RngSpec::new(42);
        let a = sample_uniform_cube(10, 2, 1.0, &mut spec.stream(SubStream::Dataset)).unwrap();
        let b =
            sample_uniform_cube(10, 2, 1.0, &mut spec.stream(SubStream::PopulationEval)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn half_width_bounds_coordinates() {
        let spec = RngSpec::new(7);
        let pts = sample_uniform_cube(500, 4, 0.5, &mut spec.stream(SubStream::Dataset)).unwrap();
        assert!(pts.iter().all(|v| (-0.5..=0.5).contains(v)));
    }

    #[test]
    fn per_coordinate_mean_is_small() {
        // CLT: sd of the mean is 1/sqrt(3)/sqrt(1000) ≈ 0.018; 0.1 is ~5.5σ.
        let spec = RngSpec::new(3);
        let (n, d) = (1000, 8);
        let pts = sample_uniform_cube(n, d, 1.0, &mut spec.stream(SubStream::Dataset)).unwrap();
        for k in 0..d {
            let col: Vec<f64> = (0..n).map(|j| pts[j * d + k]).collect();
            let mean = pairwise_mean(&col);
            assert!(mean.abs() <= 0.1, "coordinate {k} mean {mean}");
        }
    }

    #[test]
    fn rejects_degenerate_shapes() {
        let spec = RngSpec::new(0);
        assert!(sample_uniform_cube(0, 3, 1.0, &mut spec.stream(SubStream::Dataset)).is_err());
        assert!(sample_uniform_cube(3, 0, 1.0, &mut spec.stream(SubStream::Dataset)).is_err());
        assert!(sample_uniform_cube(3, 3, 0.0, &mut spec.stream(SubStream::Dataset)).is_err());
        assert!(sample_uniform_cube(3, 3, -1.0, &mut spec.stream(SubStream::Dataset)).is_err());
    }

    #[test]
    fn init_bias_is_constant() {
        let ens = init_ensemble(20, 3, RngSpec::new(11)).unwrap();
        assert!(ens.particles().iter().all(|p| p.b == 0.125));
    }

    #[test]
    fn init_variances_concentrate() {
        let (m, d) = (5000, 9);
        let ens = init_ensemble(m, d, RngSpec::new(5)).unwrap();

        let a: Vec<f64> = ens.particles().iter().map(|p| p.a).collect();
        let mean_a = pairwise_mean(&a);
        let var_a = a.iter().map(|v| (v - mean_a) * (v - mean_a)).sum::<f64>() / (m - 1) as f64;
        assert!((0.92..=1.08).contains(&var_a), "var(a) = {var_a}");

        // 2/(d+1) = 0.2 for d = 9.
        for k in 0..d {
            let col: Vec<f64> = ens.particles().iter().map(|p| p.w[k]).collect();
            let mean = pairwise_mean(&col);
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
            assert!((0.184..=0.216).contains(&var), "var(w_{k}) = {var}");
        }
    }

    #[test]
    fn initial_network_is_near_zero_by_symmetry() {
        // |mean prediction| over a fresh sample is O(m^{-1/2}).
        let m = 2000;
        let d = 6;
        let spec = RngSpec::new(21);
        let ens = init_ensemble(m, d, spec).unwrap();
        let pts =
            sample_uniform_cube(500, d, 1.0, &mut spec.stream(SubStream::PopulationEval)).unwrap();
        let preds: Vec<f64> = (0..500)
            .map(|j| ens.eval(&pts[j * d..(j + 1) * d]))
            .collect();
        let mean = pairwise_mean(&preds);
        assert!(
            mean.abs() <= 5.0 / (m as f64).sqrt(),
            "mean prediction {mean}"
        );
    }

    #[test]
    fn dataset_labels_match_target_exactly() {
        let t = TargetFunction::new(TargetKind::MaxDifference, 4).unwrap();
        let data = Dataset::sample(&t, 50, 1.0, RngSpec::new(9), SubStream::Dataset).unwrap();
        for j in 0..data.len() {
            assert_eq!(data.label(j), t.eval(data.point(j)));
        }
    }

    #[test]
    fn dataset_csv_header() {
        let t = TargetFunction::new(TargetKind::SingleNeuron, 2).unwrap();
        let data = Dataset::sample(&t, 3, 1.0, RngSpec::new(1), SubStream::Dataset).unwrap();
        let mut buf = Vec::new();
        data.write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x_1,x_2,y\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
