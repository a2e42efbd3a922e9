use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::FieldSet;

/// Fully resolved model constants for one stimulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EymolParams {
    /// Particle mass.
    pub m: f64,
    /// Elastic constant of the retina bound.
    pub k: f64,
    /// Curiosity weight.
    pub eta: f64,
    /// Brightness-invariance weight.
    pub lambda: f64,
    /// Top-down weight.
    pub gamma: f64,
    /// Local/peripheral modulation frequency, rad/s.
    pub omega: f64,
    /// Integration step, s.
    pub dt: f64,
    /// Run length, s.
    pub duration: f64,
    /// Std of the initial position around the image center, px.
    pub init_pos_sigma: f64,
    /// Std of the initial velocity, px/s.
    pub init_vel_sigma: f64,
    pub n_runs: usize,
    pub seed: u64,
}

impl Default for EymolParams {
    fn default() -> Self {
        Self {
            m: 1.0,
            k: 5.0,
            eta: 0.0,
            lambda: 0.0,
            gamma: 0.0,
            omega: 2.0 * PI,
            dt: 1e-3,
            duration: 1.0,
            init_pos_sigma: 5.0,
            init_vel_sigma: 50.0,
            n_runs: 199,
            seed: 0,
        }
    }
}

impl EymolParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.m > 0.0, "m > 0"),
            (self.k >= 0.0, "k >= 0"),
            (self.eta >= 0.0, "eta >= 0"),
            (self.lambda >= 0.0, "lambda >= 0"),
            (self.gamma >= 0.0, "gamma >= 0"),
            (self.omega > 0.0, "omega > 0"),
            (self.dt > 0.0, "dt > 0"),
            (self.duration >= self.dt, "duration >= dt"),
            (self.init_pos_sigma >= 0.0, "init_pos_sigma >= 0"),
            (self.init_vel_sigma >= 0.0, "init_vel_sigma >= 0"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::InvalidParams(format!("{what} violated: {self:?}")));
            }
        }
        let finite = [
            self.m,
            self.k,
            self.eta,
            self.lambda,
            self.gamma,
            self.omega,
            self.dt,
            self.duration,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite constant".into()));
        }
        Ok(())
    }

    /// Effective mass must stay positive: 4*lambda*max(g_b) <= 0.9*m.
    pub fn check_stability(&self, fields: &FieldSet) -> Result<()> {
        let lhs = 4.0 * self.lambda * fields.g_b().max();
        let rhs = 0.9 * self.m;
        if lhs > rhs {
            return Err(Error::Unstable { lhs, rhs });
        }
        Ok(())
    }

    /// Number of samples in a run, `floor(duration/dt) + 1`.
    pub fn sample_count(&self) -> usize {
        // tolerate representation error in duration/dt
        (self.duration / self.dt + 1e-9).floor() as usize + 1
    }
}

/// A coupling constant given explicitly or derived from the stimulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Auto,
    Fixed(f64),
}

/// Per-stimulus scaling targets for the automatic couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoScale {
    /// Target 99th-percentile acceleration magnitude, px/s^2.
    pub a_max: f64,
    /// Fraction of the largest stable lambda.
    pub lambda_frac: f64,
}

impl Default for AutoScale {
    fn default() -> Self {
        Self {
            a_max: 1e4,
            lambda_frac: 0.5,
        }
    }
}

/// Couplings before resolution against a specific field set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    pub eta: Coupling,
    pub lambda: Coupling,
    pub gamma: Coupling,
}

impl Default for Couplings {
    fn default() -> Self {
        Self {
            eta: Coupling::Auto,
            lambda: Coupling::Auto,
            gamma: Coupling::Auto,
        }
    }
}

/// 99th percentile (nearest rank) of a set of magnitudes.
fn percentile_99(mut mags: Vec<f64>) -> f64 {
    if mags.is_empty() {
        return 0.0;
    }
    mags.sort_by(f64::total_cmp);
    let rank = ((0.99 * mags.len() as f64).ceil() as usize).clamp(1, mags.len());
    mags[rank - 1]
}

/// Scale that maps the 99th-percentile gradient magnitude to `a_max`;
/// falls back to the maximum when the percentile is zero, and to 0 on a
/// field with no gradient at all.
fn scale_for(mags: Vec<f64>, a_max: f64) -> f64 {
    let max = mags.iter().copied().fold(0.0, f64::max);
    let p99 = percentile_99(mags);
    let reference = if p99 > 0.0 { p99 } else { max };
    if reference > 0.0 {
        a_max / reference
    } else {
        0.0
    }
}

/// Fills in `eta`, `lambda` and `gamma` on `base` from `couplings`.
pub fn resolve_couplings(
    base: &EymolParams,
    couplings: &Couplings,
    auto: &AutoScale,
    fields: &FieldSet,
) -> EymolParams {
    let mut p = *base;
    // curiosity at t = 0 is eta * grad(g_b)
    p.eta = match couplings.eta {
        Coupling::Fixed(v) => v,
        Coupling::Auto => scale_for(
            fields.grad_g_b().values().iter().map(|g| g.norm()).collect(),
            auto.a_max,
        ),
    };
    p.gamma = match (couplings.gamma, fields.grad_topdown()) {
        (Coupling::Fixed(v), _) => v,
        (Coupling::Auto, Some(grad)) => {
            scale_for(grad.values().iter().map(|g| g.norm()).collect(), auto.a_max)
        }
        (Coupling::Auto, None) => 0.0,
    };
    p.lambda = match couplings.lambda {
        Coupling::Fixed(v) => v,
        Coupling::Auto => {
            let g_max = fields.g_b().max();
            if g_max > 0.0 {
                auto.lambda_frac * 0.9 * p.m / (4.0 * g_max)
            } else {
                0.0
            }
        }
    };
    p
}
