//! Closed-form scalar gradient flow used as a correctness oracle for the
//! Euler integrator and the rate-fitting pipeline.
//!
//! The flow `ẋ = −F'(x)` of `F(x) = x^{−α}` started at `x(0) = 1` has the
//! explicit solution `x(t) = (1 + α(α+2)t)^{1/(α+2)}`, whose energy decays
//! like `t^{−α/(α+2)}`: a convex one-dimensional problem with no minimizer
//! whose gradient flow is arbitrarily slow for small α.

use serde::{Deserialize, Serialize};

use crate::dynamics::euler_update_scalar;
use crate::error::{Error, Result};

/// The scalar flow `ẋ = −F_α'(x)`, `F_α(x) = x^{−α}`, from `x(0) = x0`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScalarFlow {
    alpha: f64,
    x0: f64,
}

/// One point of an integrated scalar trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarSample {
    pub t: f64,
    pub x: f64,
    pub energy: f64,
}

impl ScalarFlow {
    pub fn new(alpha: f64, x0: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "x0 must be positive, got {x0}"
            )));
        }
        Ok(ScalarFlow { alpha, x0 })
    }

    /// The flow started at `x0 = 1`, where the closed form applies.
    pub fn unit(alpha: f64) -> Result<Self> {
        ScalarFlow::new(alpha, 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn energy(&self, x: f64) -> f64 {
        x.powf(-self.alpha)
    }

    /// `F'(x) = −α x^{−(α+1)}`, the gradient the Euler stepper descends.
    fn energy_derivative(&self, x: f64) -> f64 {
        -self.alpha * x.powf(-(self.alpha + 1.0))
    }

    /// Exact solution `(x(t), F(x(t)))` with
    /// `x(t) = (1 + α(α+2)t)^{1/(α+2)}`. Only valid for `x0 = 1`.
    pub fn closed_form(&self, t: f64) -> Result<(f64, f64)> {
        if self.x0 != 1.0 {
            return Err(Error::InvalidConfig(format!(
                "closed form is derived for x0 = 1, flow has x0 = {}",
                self.x0
            )));
        }
        if t < 0.0 || t.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "time must be nonnegative, got {t}"
            )));
        }
        let x = (1.0 + self.alpha * (self.alpha + 2.0) * t).powf(1.0 / (self.alpha + 2.0));
        Ok((x, self.energy(x)))
    }

    /// Forward Euler with `total_steps` steps of size `h`, through the same
    /// update discipline as the particle stepper. The trajectory includes
    /// the initial state, so it has `total_steps + 1` samples.
    pub fn integrate(&self, h: f64, total_steps: usize) -> Result<Vec<ScalarSample>> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step size must be positive, got {h}"
            )));
        }
        let mut x = self.x0;
        let mut out = Vec::with_capacity(total_steps + 1);
        out.push(ScalarSample {
            t: 0.0,
            x,
            energy: self.energy(x),
        });
        for k in 1..=total_steps {
            let grad = self.energy_derivative(x);
            if !euler_update_scalar(&mut x, grad, h) {
                return Err(Error::NonFiniteUpdate { particle: 0 });
            }
            if x <= 0.0 {
                // Cannot happen from x0 > 0: the field pushes x upward.
                return Err(Error::NonFiniteUpdate { particle: 0 });
            }
            out.push(ScalarSample {
                t: k as f64 * h,
                x,
                energy: self.energy(x),
            });
        }
        Ok(out)
    }
}
