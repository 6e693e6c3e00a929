//! Post-hoc and in-loop diagnostics: empirical decay rates, power-law
//! fits, the second-moment growth audit, and the sublinear-growth trend.

use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};

/// Empirical decay rate `γ(t) = −ln R / ln t`, the exponent for which
/// `R = t^{−γ(t)}`. Natural logs; the ratio is base-invariant anyway.
///
/// `None` for `t ≤ 1` (the log-t singularity) or non-positive risk.
pub fn decay_rate(t: f64, risk: f64) -> Option<f64> {
    if t > 1.0 && risk > 0.0 {
        Some(-risk.ln() / t.ln())
    } else {
        None
    }
}

/// Time window `(t_lo, t_hi)` over which rates are fitted. Kept above
/// `t = 1` so `log t` stays positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_lo: f64,
    pub t_hi: f64,
}

impl FitWindow {
    pub fn new(t_lo: f64, t_hi: f64) -> Result<Self> {
        if !(t_lo > 1.0 && t_hi > t_lo) {
            return Err(Error::InvalidConfig(format!(
                "fit window needs 1 < t_lo < t_hi, got ({t_lo}, {t_hi})"
            )));
        }
        Ok(FitWindow { t_lo, t_hi })
    }

    pub fn contains(&self, t: f64) -> bool {
        (self.t_lo..=self.t_hi).contains(&t)
    }
}

/// Minimum number of in-window points for a power-law fit.
pub const MIN_FIT_POINTS: usize = 5;

/// Ordinary least-squares slope of `−log R` against `log t` over the
/// window: the fitted power-law exponent of `R(t) ~ t^{−γ}`.
///
/// Invariant under scaling all risks by a positive constant (a prefactor
/// only shifts the intercept).
pub fn fit_power_law(series: &[(f64, f64)], window: FitWindow) -> Result<f64> {
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| window.contains(*t))
        .map(|&(t, risk)| {
            if risk > 0.0 {
                Ok((t.ln(), -risk.ln()))
            } else {
                Err(Error::InvalidConfig(format!(
                    "power-law fit needs positive risks, got {risk} at t = {t}"
                )))
            }
        })
        .collect::<Result<_>>()?;
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::NotEnoughPoints {
            needed: MIN_FIT_POINTS,
            got: points.len(),
        });
    }

    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    Ok(sxy / sxx)
}

/// Decay-rate diagnostics over one trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateReport {
    /// `(t, γ(t))` at every checkpoint where γ is defined.
    pub gamma_at: Vec<(f64, f64)>,
    pub fitted_exponent: f64,
    pub window: FitWindow,
}

/// γ samples plus the windowed power-law fit for a `(t, risk)` series.
pub fn rate_report(series: &[(f64, f64)], window: FitWindow) -> Result<RateReport> {
    let gamma_at = series
        .iter()
        .filter_map(|&(t, risk)| decay_rate(t, risk).map(|g| (t, g)))
        .collect();
    Ok(RateReport {
        gamma_at,
        fitted_exponent: fit_power_law(series, window)?,
        window,
    })
}

/// Risk column selector for trajectory series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskColumn {
    Empirical,
    Population,
}

/// Extract a `(t, risk)` series from trajectory records.
pub fn risk_series(records: &[TrajectoryRecord], column: RiskColumn) -> Vec<(f64, f64)> {
    records
        .iter()
        .map(|r| {
            (
                r.t,
                match column {
                    RiskColumn::Empirical => r.risk_emp,
                    RiskColumn::Population => r.risk_pop,
                },
            )
        })
        .collect()
}

/// Outcome of the moment-growth inequality on one checkpoint interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IntervalAudit {
    pub t_lo: f64,
    pub t_hi: f64,
    /// `√N(t_hi) − √N(t_lo)`.
    pub lhs: f64,
    /// `√((t_hi − t_lo)·max(R(t_lo) − R(t_hi), 0)) + 10h`.
    pub rhs: f64,
    pub pass: bool,
}

impl IntervalAudit {
    /// Slack `rhs − lhs`; negative means the interval failed.
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Integrated form of the dissipation bound on second-moment growth:
/// along the flow, `d√N/dt ≤ |dR/dt|^{1/2}`, so by Cauchy–Schwarz in time
/// `√N(t₂) − √N(t₁) ≤ √((t₂−t₁)(R(t₁) − R(t₂)))`. The `10h` tolerance
/// absorbs the Euler discretization error.
///
/// `R` is the empirical-risk column — the functional the shipped presets
/// train on, whose dissipation the bound refers to. Reports failures
/// instead of erroring.
pub fn moment_audit(records: &[TrajectoryRecord], h: f64) -> Vec<IntervalAudit> {
    let tol = 10.0 * h;
    records
        .windows(2)
        .map(|pair| {
            let (r0, r1) = (&pair[0], &pair[1]);
            let lhs = r1.second_moment.sqrt() - r0.second_moment.sqrt();
            let dissipated = (r0.risk_emp - r1.risk_emp).max(0.0);
            let rhs = ((r1.t - r0.t) * dissipated).sqrt() + tol;
            IntervalAudit {
                t_lo: r0.t,
                t_hi: r1.t,
                lhs,
                rhs,
                pass: lhs <= rhs,
            }
        })
        .collect()
}

/// Trend of `N(t)/t`: the sublinear-growth diagnostic. The asymptotic
/// statement (`N(t)/t → 0`) is not decidable from a finite run, so this
/// only reports the sequence and the sign of its tail slope.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SublinearTrend {
    /// `(t, N(t)/t)` at checkpoints with `t > 1`.
    pub ratios: Vec<(f64, f64)>,
    /// OLS slope of `N(t)/t` over the last quartile of checkpoints.
    pub tail_slope: f64,
}

impl SublinearTrend {
    pub fn tail_slope_sign(&self) -> i8 {
        if self.tail_slope > 0.0 {
            1
        } else if self.tail_slope < 0.0 {
            -1
        } else {
            0
        }
    }
}

/// Compute the `N(t)/t` sequence and its last-quartile slope. `None` when
/// fewer than two checkpoints lie beyond `t = 1`.
pub fn sublinear_check(records: &[TrajectoryRecord]) -> Option<SublinearTrend> {
    let ratios: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.t > 1.0)
        .map(|r| (r.t, r.second_moment / r.t))
        .collect();
    if ratios.len() < 2 {
        return None;
    }
    let tail_start = (ratios.len() * 3) / 4;
    let tail = &ratios[tail_start.min(ratios.len() - 2)..];
    let n = tail.len() as f64;
    let mean_t = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_v = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let mut stt = 0.0;
    let mut stv = 0.0;
    for (t, v) in tail {
        stt += (t - mean_t) * (t - mean_t);
        stv += (t - mean_t) * (v - mean_v);
    }
    let tail_slope = if stt > 0.0 { stv / stt } else { 0.0 };
    Some(SublinearTrend { ratios, tail_slope })
}
