//! Explicit-Euler time integration of the particle gradient flow, with
//! checkpoint recording and random-feature mode.
//!
//! One step is a barrier: the gradient field is evaluated on the frozen
//! ensemble (internally parallel), then a single writer applies
//! `θ_i ← θ_i − h·G_i` to every particle simultaneously. Time is `t = k·h`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::decay_rate;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::risk::{
    empirical_risk, force_split, gradient_from_residuals, population_risk_estimate, residuals,
    risk_from_residuals, GradientField,
};
use crate::sampling::Dataset;

/// Which functional drives the gradient flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainOn {
    Empirical,
    PopulationEstimate,
}

/// Mean-field network (all parameters trainable) versus random-feature
/// model (inner weights and biases frozen at initialization).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    MeanFieldNn,
    RandomFeature,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub step_size: f64,
    pub total_steps: usize,
    pub record_every: usize,
    pub train_on: TrainOn,
    pub mode: Mode,
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step size must be positive and finite, got {}",
                self.step_size
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// One checkpoint row of the training time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRecord {
    /// Accumulated time `k·h`.
    pub t: f64,
    pub risk_emp: f64,
    pub risk_pop: f64,
    pub path_norm: f64,
    pub second_moment: f64,
    /// Empirical decay rate of the population risk estimate; absent for
    /// `t ≤ 1` or non-positive risk.
    pub gamma: Option<f64>,
    pub radial_norm: f64,
    pub angular_norm: f64,
}

pub const TRAJECTORY_CSV_HEADER: &str =
    "t,risk_emp,risk_pop,path_norm,second_moment,gamma,radial_norm,angular_norm";

pub fn write_trajectory_csv(records: &[TrajectoryRecord], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    write_trajectory_csv_to(records, &mut out).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_trajectory_csv_to(
    records: &[TrajectoryRecord],
    out: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
    for r in records {
        write!(
            out,
            "{},{},{},{},{},",
            r.t, r.risk_emp, r.risk_pop, r.path_norm, r.second_moment
        )?;
        if let Some(g) = r.gamma {
            write!(out, "{g}")?;
        }
        writeln!(out, ",{},{}", r.radial_norm, r.angular_norm)?;
    }
    Ok(())
}

/// Where and when a run blew up.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DivergenceInfo {
    /// Step index whose update produced the first non-finite parameter.
    pub step: usize,
    pub particle: usize,
}

/// Result of [`train`]: the recorded time series and the final ensemble.
/// If the integration diverged, `records` holds everything recorded up to
/// the abort and `final_ensemble` is the last finite state.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub records: Vec<TrajectoryRecord>,
    pub final_ensemble: ParticleEnsemble,
    pub diverged_at: Option<DivergenceInfo>,
}

/// `value ← value − h·gradient`. Returns whether the result is finite.
/// Both the particle stepper and the scalar flow oracle apply updates
/// through this single function.
#[inline]
pub(crate) fn euler_update_scalar(value: &mut f64, gradient: f64, h: f64) -> bool {
    *value -= h * gradient;
    value.is_finite()
}

/// Check-then-apply Euler update of the whole ensemble from one gradient
/// snapshot. On a non-finite candidate the ensemble is left untouched and
/// the offending particle index is returned.
fn apply_update(
    ens: &mut ParticleEnsemble,
    grad: &GradientField,
    h: f64,
) -> std::result::Result<(), usize> {
    let trainable_inner = ens.trainable_inner();
    for (i, p) in ens.particles().iter().enumerate() {
        let mut a = p.a;
        if !euler_update_scalar(&mut a, grad.g_a(i), h) {
            return Err(i);
        }
        if trainable_inner {
            let mut b = p.b;
            if !euler_update_scalar(&mut b, grad.g_b(i), h) {
                return Err(i);
            }
            for (w, g) in p.w.iter().zip(grad.g_w(i)) {
                let mut w = *w;
                if !euler_update_scalar(&mut w, *g, h) {
                    return Err(i);
                }
            }
        }
    }
    for (i, p) in ens.particles_mut().iter_mut().enumerate() {
        euler_update_scalar(&mut p.a, grad.g_a(i), h);
        if trainable_inner {
            euler_update_scalar(&mut p.b, grad.g_b(i), h);
            for (w, g) in p.w.iter_mut().zip(grad.g_w(i)) {
                euler_update_scalar(w, *g, h);
            }
        }
    }
    Ok(())
}

/// One forward-Euler step `θ_i ← θ_i − h·G_i` from the current gradient
/// snapshot. Frozen coordinates are untouched in random-feature mode.
pub fn euler_step(ens: &mut ParticleEnsemble, data: &Dataset, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "step size must be positive, got {h}"
        )));
    }
    let res = residuals(ens, data);
    let grad = gradient_from_residuals(ens, data, &res);
    apply_update(ens, &grad, h).map_err(|particle| Error::NonFiniteUpdate { particle })
}

/// Run `total_steps` Euler steps, recording a [`TrajectoryRecord`] at step
/// 0, every `record_every` steps, and at the final step.
///
/// `train_on` selects which dataset drives the gradient; both risks are
/// recorded at every checkpoint regardless. On divergence the run aborts
/// with all records up to that point preserved.
pub fn train(
    mut ens: ParticleEnsemble,
    data: &Dataset,
    eval_set: &Dataset,
    config: &TrainerConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    for set in [data, eval_set] {
        if set.dim() != ens.dim() {
            return Err(Error::DimensionMismatch {
                expected: ens.dim(),
                got: set.dim(),
            });
        }
    }
    ens.set_trainable_inner(matches!(config.mode, Mode::MeanFieldNn));
    let grad_data = match config.train_on {
        TrainOn::Empirical => data,
        TrainOn::PopulationEstimate => eval_set,
    };

    let h = config.step_size;
    let mut records = Vec::new();
    for k in 0..=config.total_steps {
        let res = residuals(&ens, grad_data);
        let grad = gradient_from_residuals(&ens, grad_data, &res);

        if k % config.record_every == 0 || k == config.total_steps {
            let t = k as f64 * h;
            let risk_here = risk_from_residuals(&res);
            let (risk_emp, risk_pop) = match config.train_on {
                TrainOn::Empirical => (risk_here, population_risk_estimate(&ens, eval_set)),
                TrainOn::PopulationEstimate => (empirical_risk(&ens, data), risk_here),
            };
            let split = force_split(&ens, &grad);
            records.push(TrajectoryRecord {
                t,
                risk_emp,
                risk_pop,
                path_norm: ens.path_norm(),
                second_moment: ens.second_moment(),
                gamma: decay_rate(t, risk_pop),
                radial_norm: split.radial_norm,
                angular_norm: split.angular_norm,
            });
        }

        if k == config.total_steps {
            break;
        }
        if let Err(particle) = apply_update(&mut ens, &grad, h) {
            return Ok(TrainOutput {
                records,
                final_ensemble: ens,
                diverged_at: Some(DivergenceInfo {
                    step: k + 1,
                    particle,
                }),
            });
        }
    }

    Ok(TrainOutput {
        records,
        final_ensemble: ens,
        diverged_at: None,
    })
}
