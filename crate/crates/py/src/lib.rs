//! Python bindings for the mean-field training simulator.
//!
//! Exposes the main types (ensembles, datasets, targets, the scalar-flow
//! oracle) and operations (risk, gradients, training, rate fits, preset
//! runs) as the `meanfield_py` extension module.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use meanfield::analysis::FitWindow;
use meanfield::dynamics::{Mode, TrainOn, TrainerConfig, TrajectoryRecord};
use meanfield::ensemble::{ActivationKind, Particle, ParticleEnsemble};
use meanfield::runner::{self, Preset, RunStatus};
use meanfield::sampling::{RngSpec, SubStream};
use meanfield::targets::TargetKind;

fn to_py_err(err: meanfield::Error) -> PyErr {
    match err {
        meanfield::Error::Io { .. } | meanfield::Error::Json { .. } => {
            PyRuntimeError::new_err(err.to_string())
        }
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    match mode {
        "mean_field_nn" => Ok(Mode::MeanFieldNn),
        "random_feature" => Ok(Mode::RandomFeature),
        other => Err(PyValueError::new_err(format!(
            "unknown mode `{other}` (expected mean_field_nn or random_feature)"
        ))),
    }
}

fn parse_train_on(train_on: &str) -> PyResult<TrainOn> {
    match train_on {
        "empirical" => Ok(TrainOn::Empirical),
        "population_estimate" => Ok(TrainOn::PopulationEstimate),
        other => Err(PyValueError::new_err(format!(
            "unknown train_on `{other}` (expected empirical or population_estimate)"
        ))),
    }
}

/// A closed-form target function.
#[pyclass(name = "TargetFunction")]
struct PyTargetFunction {
    inner: meanfield::TargetFunction,
}

#[pymethods]
impl PyTargetFunction {
    #[new]
    fn new(name: &str, d: usize) -> PyResult<Self> {
        Ok(PyTargetFunction {
            inner: meanfield::TargetFunction::from_name(name, d).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn is_barron(&self) -> bool {
        self.inner.is_barron()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "point has dimension {}, target has {}",
                x.len(),
                self.inner.dim()
            )));
        }
        Ok(self.inner.eval(&x))
    }

    /// Monte Carlo mean/variance/Lipschitz probe over `n` uniform samples.
    #[pyo3(signature = (n, seed, half_width = 1.0))]
    fn stats<'py>(
        &self,
        py: Python<'py>,
        n: usize,
        seed: u64,
        half_width: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let stats = self.inner.stats(n, seed, half_width).map_err(to_py_err)?;
        let dict = PyDict::new(py);
        dict.set_item("mean", stats.mean)?;
        dict.set_item("variance", stats.variance)?;
        dict.set_item("lipschitz_probe", stats.lipschitz_probe)?;
        Ok(dict)
    }

    fn __repr__(&self) -> String {
        format!(
            "TargetFunction(name='{}', d={}, is_barron={})",
            self.inner.kind().name(),
            self.inner.dim(),
            self.inner.is_barron()
        )
    }
}

/// A labelled sample of points in the cube.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: meanfield::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Sample `n` points from the dataset sub-stream of `seed` and label
    /// them with the target.
    #[staticmethod]
    #[pyo3(signature = (target, n, seed, half_width = 1.0))]
    fn sample(target: &PyTargetFunction, n: usize, seed: u64, half_width: f64) -> PyResult<Self> {
        let inner = meanfield::Dataset::sample(
            &target.inner,
            n,
            half_width,
            RngSpec::new(seed),
            SubStream::Dataset,
        )
        .map_err(to_py_err)?;
        Ok(PyDataset { inner })
    }

    /// Build a dataset from explicit points and labels.
    #[staticmethod]
    fn from_points(points: Vec<Vec<f64>>, labels: Vec<f64>) -> PyResult<Self> {
        let d = points.first().map(|p| p.len()).unwrap_or(0);
        if points.iter().any(|p| p.len() != d) {
            return Err(PyValueError::new_err("all points must share one dimension"));
        }
        let flat: Vec<f64> = points.into_iter().flatten().collect();
        let inner = meanfield::Dataset::from_parts(d, flat, labels).map_err(to_py_err)?;
        Ok(PyDataset { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn point(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.len() {
            return Err(PyValueError::new_err(format!("index {j} out of range")));
        }
        Ok(self.inner.point(j).to_vec())
    }

    fn label(&self, j: usize) -> PyResult<f64> {
        if j >= self.inner.len() {
            return Err(PyValueError::new_err(format!("index {j} out of range")));
        }
        Ok(self.inner.label(j))
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_csv(Path::new(&path)).map_err(to_py_err)
    }
}

/// A particle ensemble representing the network's parameter measure.
#[pyclass(name = "Ensemble")]
struct PyEnsemble {
    inner: ParticleEnsemble,
}

#[pymethods]
impl PyEnsemble {
    /// Gaussian initialization from the init sub-stream of `seed`.
    #[staticmethod]
    #[pyo3(signature = (m, d, seed, trainable_inner = true))]
    fn init(m: usize, d: usize, seed: u64, trainable_inner: bool) -> PyResult<Self> {
        let mut inner = meanfield::init_ensemble(m, d, RngSpec::new(seed)).map_err(to_py_err)?;
        inner.set_trainable_inner(trainable_inner);
        Ok(PyEnsemble { inner })
    }

    /// Build an ensemble from explicit `(a, w, b)` triples.
    #[staticmethod]
    #[pyo3(signature = (particles, trainable_inner = true))]
    fn from_particles(
        particles: Vec<(f64, Vec<f64>, f64)>,
        trainable_inner: bool,
    ) -> PyResult<Self> {
        let particles = particles
            .into_iter()
            .map(|(a, w, b)| Particle::new(a, w, b))
            .collect();
        let inner = ParticleEnsemble::new(particles, ActivationKind::Relu, trainable_inner)
            .map_err(to_py_err)?;
        Ok(PyEnsemble { inner })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn trainable_inner(&self) -> bool {
        self.inner.trainable_inner()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "point has dimension {}, ensemble has {}",
                x.len(),
                self.inner.dim()
            )));
        }
        Ok(self.inner.eval(&x))
    }

    fn second_moment(&self) -> f64 {
        self.inner.second_moment()
    }

    fn path_norm(&self) -> f64 {
        self.inner.path_norm()
    }

    fn particles(&self) -> Vec<(f64, Vec<f64>, f64)> {
        self.inner
            .particles()
            .iter()
            .map(|p| (p.a, p.w.clone(), p.b))
            .collect()
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_csv(Path::new(&path)).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Ensemble(m={}, d={}, trainable_inner={})",
            self.inner.width(),
            self.inner.dim(),
            self.inner.trainable_inner()
        )
    }
}

/// The closed-form scalar gradient-flow oracle.
#[pyclass(name = "ScalarFlow")]
struct PyScalarFlow {
    inner: meanfield::ScalarFlow,
}

#[pymethods]
impl PyScalarFlow {
    #[new]
    fn new(alpha: f64) -> PyResult<Self> {
        Ok(PyScalarFlow {
            inner: meanfield::ScalarFlow::unit(alpha).map_err(to_py_err)?,
        })
    }

    /// Exact `(x(t), energy(t))`.
    fn closed_form(&self, t: f64) -> PyResult<(f64, f64)> {
        self.inner.closed_form(t).map_err(to_py_err)
    }

    /// Forward-Euler trajectory as `(t, x, energy)` tuples.
    fn integrate(&self, h: f64, steps: usize) -> PyResult<Vec<(f64, f64, f64)>> {
        Ok(self
            .inner
            .integrate(h, steps)
            .map_err(to_py_err)?
            .into_iter()
            .map(|s| (s.t, s.x, s.energy))
            .collect())
    }
}

fn dimension_check(ens: &PyEnsemble, data: &PyDataset) -> PyResult<()> {
    if ens.inner.dim() != data.inner.dim() {
        return Err(PyValueError::new_err(format!(
            "ensemble dimension {} does not match dataset dimension {}",
            ens.inner.dim(),
            data.inner.dim()
        )));
    }
    Ok(())
}

#[pyfunction]
fn moment_bound_constant(d: usize) -> PyResult<f64> {
    if d == 0 {
        return Err(PyValueError::new_err("d must be >= 1"));
    }
    Ok(meanfield::moment_bound_constant(d))
}

#[pyfunction]
fn empirical_risk(ens: &PyEnsemble, data: &PyDataset) -> PyResult<f64> {
    dimension_check(ens, data)?;
    Ok(meanfield::empirical_risk(&ens.inner, &data.inner))
}

#[pyfunction]
fn population_risk_estimate(ens: &PyEnsemble, eval_set: &PyDataset) -> PyResult<f64> {
    dimension_check(ens, eval_set)?;
    Ok(meanfield::population_risk_estimate(
        &ens.inner,
        &eval_set.inner,
    ))
}

/// Mean-field gradient triples `(g_a, g_w, g_b)` for every particle.
#[pyfunction]
fn per_particle_gradient(
    ens: &PyEnsemble,
    data: &PyDataset,
) -> PyResult<Vec<(f64, Vec<f64>, f64)>> {
    dimension_check(ens, data)?;
    let field = meanfield::per_particle_gradient(&ens.inner, &data.inner);
    Ok((0..field.width())
        .map(|i| (field.g_a(i), field.g_w(i).to_vec(), field.g_b(i)))
        .collect())
}

fn record_to_dict<'py>(py: Python<'py>, r: &TrajectoryRecord) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("t", r.t)?;
    dict.set_item("risk_emp", r.risk_emp)?;
    dict.set_item("risk_pop", r.risk_pop)?;
    dict.set_item("path_norm", r.path_norm)?;
    dict.set_item("second_moment", r.second_moment)?;
    dict.set_item("gamma", r.gamma)?;
    dict.set_item("radial_norm", r.radial_norm)?;
    dict.set_item("angular_norm", r.angular_norm)?;
    Ok(dict)
}

/// Run Euler training and return `(records, final_ensemble)`. Records are
/// dicts mirroring the trajectory CSV columns.
#[pyfunction]
#[pyo3(signature = (ens, data, eval_set, h, steps, record_every = 1, train_on = "empirical", mode = "mean_field_nn"))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    ens: &PyEnsemble,
    data: &PyDataset,
    eval_set: &PyDataset,
    h: f64,
    steps: usize,
    record_every: usize,
    train_on: &str,
    mode: &str,
) -> PyResult<(Vec<Bound<'py, PyDict>>, PyEnsemble)> {
    dimension_check(ens, data)?;
    dimension_check(ens, eval_set)?;
    let config = TrainerConfig {
        step_size: h,
        total_steps: steps,
        record_every,
        train_on: parse_train_on(train_on)?,
        mode: parse_mode(mode)?,
    };
    let out = meanfield::train(ens.inner.clone(), &data.inner, &eval_set.inner, &config)
        .map_err(to_py_err)?;
    if let Some(info) = out.diverged_at {
        return Err(PyRuntimeError::new_err(format!(
            "training diverged at step {} (particle {})",
            info.step, info.particle
        )));
    }
    let records = out
        .records
        .iter()
        .map(|r| record_to_dict(py, r))
        .collect::<PyResult<_>>()?;
    Ok((
        records,
        PyEnsemble {
            inner: out.final_ensemble,
        },
    ))
}

/// `γ(t) = −ln(risk)/ln(t)`, or `None` for `t ≤ 1` or non-positive risk.
#[pyfunction]
fn decay_rate(t: f64, risk: f64) -> Option<f64> {
    meanfield::decay_rate(t, risk)
}

/// OLS power-law exponent of a `(t, risk)` series over `[t_lo, t_hi]`.
#[pyfunction]
fn fit_power_law(series: Vec<(f64, f64)>, t_lo: f64, t_hi: f64) -> PyResult<f64> {
    let window = FitWindow::new(t_lo, t_hi).map_err(to_py_err)?;
    meanfield::fit_power_law(&series, window).map_err(to_py_err)
}

#[pyfunction]
fn preset_names() -> Vec<String> {
    runner::presets()
        .iter()
        .map(|p| p.name().to_string())
        .collect()
}

/// Execute a shipped preset, writing artifacts under `output_root/<name>`.
/// Returns `(status, artifact_dir)`.
#[pyfunction]
fn run_preset(name: &str, output_root: PathBuf) -> PyResult<(String, PathBuf)> {
    let preset = runner::preset(name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown preset `{name}`")))?;
    let dir = output_root.join(name);
    match preset {
        Preset::Train(config) => {
            let report = runner::run(&config, &dir).map_err(to_py_err)?;
            let status = match report.status {
                RunStatus::Completed => "completed",
                RunStatus::Diverged => "diverged",
                RunStatus::AuditFailed => "audit_failed",
            };
            Ok((status.to_string(), report.dir))
        }
        Preset::Oracle(config) => {
            runner::run_oracle(&config, &dir).map_err(to_py_err)?;
            Ok(("completed".to_string(), dir))
        }
    }
}

#[pyfunction]
fn target_names() -> Vec<&'static str> {
    [
        TargetKind::NormDifference,
        TargetKind::MaxDifference,
        TargetKind::SingleNeuron,
    ]
    .iter()
    .map(|k| k.name())
    .collect()
}

#[pymodule]
fn meanfield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTargetFunction>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PyScalarFlow>()?;
    m.add_function(wrap_pyfunction!(moment_bound_constant, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_risk, m)?)?;
    m.add_function(wrap_pyfunction!(population_risk_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(per_particle_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(decay_rate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add_function(wrap_pyfunction!(target_names, m)?)?;
    Ok(())
}
