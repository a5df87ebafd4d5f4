//! Expectation-propagation primitives shared by every equalizer backend.
//!
//! All Gaussians here are circular complex, `CN(u; μ, σ²) ∝ exp(−|u − μ|²/σ²)`,
//! with `σ²` the total variance `E|u − μ|²`.

use log::trace;

use crate::constellation::{moments, normalize_log_weights, Constellation, SymbolPmf};
use crate::{Error, Result, C64};

/// Mean and variance of a circular complex Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianScalar {
    pub mean: C64,
    pub variance: f64,
}

impl GaussianScalar {
    pub fn new(mean: C64, variance: f64) -> Self {
        Self { mean, variance }
    }

    pub fn real(mean: f64, variance: f64) -> Self {
        Self::new(C64::new(mean, 0.0), variance)
    }

    /// `self / den` as a Gaussian density quotient.
    ///
    /// The returned variance may be negative; callers decide what to do with it.
    pub fn divide(self, den: GaussianScalar) -> Result<GaussianScalar> {
        let diff = den.variance - self.variance;
        if diff == 0.0 {
            return Err(Error::DegenerateDivision(self.variance));
        }
        let variance = self.variance * den.variance / diff;
        let mean = (self.mean * den.variance - den.mean * self.variance) / diff;
        Ok(GaussianScalar { mean, variance })
    }

    /// Product of two Gaussian densities (normalized).
    pub fn multiply(self, other: GaussianScalar) -> GaussianScalar {
        let precision = self.variance.recip() + other.variance.recip();
        let variance = precision.recip();
        let mean = variance * (self.mean / self.variance + other.mean / other.variance);
        GaussianScalar { mean, variance }
    }
}

/// Free-function form of [`GaussianScalar::divide`].
pub fn gaussian_divide(num: GaussianScalar, den: GaussianScalar) -> Result<GaussianScalar> {
    num.divide(den)
}

/// What to do when a damped factor ends up with a negative variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum VarianceControl {
    /// Keep the previous factor (and fall back to the prior projection in the
    /// outer loop).
    KeepPrevious,
    /// Take the absolute value of the variance (BP-EP).
    AbsoluteValue,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpParams {
    /// Minimum allowed variance.
    pub epsilon: f64,
    /// Damping weight on the new factor.
    pub beta: f64,
    /// Number of inner EP sweeps.
    pub inner_iters: usize,
    pub variance_control: VarianceControl,
}

impl Default for EpParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            beta: 0.1,
            inner_iters: 3,
            variance_control: VarianceControl::KeepPrevious,
        }
    }
}

impl EpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        Ok(())
    }
}

/// The extrinsic handed to the decoder at the previous turbo iteration.
///
/// `Flat` stands for `q_E(u) = 1`, before any equalization has happened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extrinsic {
    Flat,
    Gaussian(GaussianScalar),
}

/// Moments of the discrete distribution `∝ CN(u; μ_E, σ_E²) · prior(u)`.
///
/// Falls back to the prior's own moments if every weight vanishes, which
/// only happens for a non-finite cavity.
pub fn tilted_moments(q_e: GaussianScalar, prior: &SymbolPmf, c: &Constellation) -> Result<GaussianScalar> {
    if !(q_e.variance > 0.0) {
        return Err(Error::Domain(format!("cavity variance {} is not positive", q_e.variance)));
    }
    let inv = q_e.variance.recip();
    let mut logw: Vec<f64> = c
        .points()
        .iter()
        .zip(prior.probs())
        .map(|(p, &w)| w.ln() - (p - q_e.mean).norm_sqr() * inv)
        .collect();
    if !normalize_log_weights(&mut logw) {
        trace!("tilted weights vanished; using prior moments");
        return Ok(c.pmf_moments(prior));
    }
    Ok(moments(c.points(), &logw))
}

/// Gaussian projection of the prior with the variance floored at `epsilon`.
pub fn project_prior(prior: &SymbolPmf, c: &Constellation, epsilon: f64) -> GaussianScalar {
    let mut g = c.pmf_moments(prior);
    g.variance = g.variance.max(epsilon);
    g
}

/// Which variance-control branch (if any) an update took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlEvent {
    None,
    /// Negative damped variance; previous factor kept.
    KeptPrevious,
    /// Negative damped variance; absolute value taken.
    AbsoluteValue,
    /// Moment matching hit an exact variance tie; previous factor kept.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorUpdate {
    pub factor: GaussianScalar,
    pub control: ControlEvent,
}

/// Undamped, uncontrolled site factor `Proj[q_E · prior] / q_E`, with the
/// tilted variance floored at `epsilon`. The variance may come out negative.
pub fn moment_match(q_e: GaussianScalar, prior: &SymbolPmf, c: &Constellation, epsilon: f64) -> Result<GaussianScalar> {
    let mut tilted = tilted_moments(q_e, prior, c)?;
    tilted.variance = tilted.variance.max(epsilon);
    tilted.divide(q_e)
}

/// One site update: moment matching against the tilted distribution, damping
/// in natural parameters, then negative-variance control.
pub fn moment_match_damp(
    q_e: GaussianScalar,
    t_old: GaussianScalar,
    prior: &SymbolPmf,
    params: &EpParams,
    c: &Constellation,
) -> Result<FactorUpdate> {
    let t_new = match moment_match(q_e, prior, c, params.epsilon) {
        Ok(t) => t,
        Err(Error::DegenerateDivision(_)) => {
            trace!("degenerate moment matching, keeping previous factor");
            return Ok(FactorUpdate {
                factor: t_old,
                control: ControlEvent::Degenerate,
            });
        }
        Err(e) => return Err(e),
    };

    let beta = params.beta;
    let precision = beta / t_new.variance + (1.0 - beta) / t_old.variance;
    let variance = precision.recip();
    let mean = variance * (beta * t_new.mean / t_new.variance + (1.0 - beta) * t_old.mean / t_old.variance);

    // A zero precision (infinite variance) is handled like a negative one.
    if variance > 0.0 && variance.is_finite() {
        return Ok(FactorUpdate {
            factor: GaussianScalar { mean, variance },
            control: ControlEvent::None,
        });
    }
    Ok(match params.variance_control {
        VarianceControl::AbsoluteValue if variance.is_finite() => FactorUpdate {
            factor: GaussianScalar {
                mean,
                variance: variance.abs(),
            },
            control: ControlEvent::AbsoluteValue,
        },
        _ => FactorUpdate {
            factor: t_old,
            control: ControlEvent::KeptPrevious,
        },
    })
}

/// Initial factor for the inner loop, built from the decoder's prior and the
/// extrinsic sent to the decoder at the previous turbo iteration.
///
/// Returns the factor and whether a fallback/absolute-value branch was taken.
pub fn outer_ep_init(
    prior: &SymbolPmf,
    q_e_prev: Extrinsic,
    c: &Constellation,
    params: &EpParams,
) -> Result<FactorUpdate> {
    let projection = || FactorUpdate {
        factor: project_prior(prior, c, params.epsilon),
        control: ControlEvent::KeptPrevious,
    };
    let q_e = match q_e_prev {
        Extrinsic::Flat => {
            return Ok(FactorUpdate {
                factor: project_prior(prior, c, params.epsilon),
                control: ControlEvent::None,
            })
        }
        Extrinsic::Gaussian(g) => g,
    };
    let mut tilted = tilted_moments(q_e, prior, c)?;
    tilted.variance = tilted.variance.max(params.epsilon);
    let t = match tilted.divide(q_e) {
        Ok(t) => t,
        Err(Error::DegenerateDivision(_)) => return Ok(projection()),
        Err(e) => return Err(e),
    };
    if t.variance > 0.0 && t.variance.is_finite() {
        return Ok(FactorUpdate {
            factor: t,
            control: ControlEvent::None,
        });
    }
    Ok(match params.variance_control {
        VarianceControl::AbsoluteValue if t.variance.is_finite() => FactorUpdate {
            factor: GaussianScalar {
                mean: t.mean,
                variance: t.variance.abs().max(params.epsilon),
            },
            control: ControlEvent::AbsoluteValue,
        },
        _ => projection(),
    })
}
