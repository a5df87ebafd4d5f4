//! Gaussian posterior marginals and extrinsics of the linear model
//! `y = H u + w` under independent Gaussian site factors `u_k ~ CN(μ_t,k, σ_t,k²)`,
//! and the inner EP loop that refines those factors.
//!
//! Three backends compute the same quantities:
//!
//! - [`Backend::Block`]: all `N+L−1` observations, through a banded `LDLᴴ`
//!   of `σ_w² I + H Σ_t Hᴴ` and the band of its inverse.
//! - [`Backend::Kalman`]: forward Kalman filter and backward smoother over a
//!   shift-register state. Exact, so it agrees with the block backend.
//! - [`Backend::Windowed`]: for each symbol only the `W` observations in its
//!   window; an approximation.

mod block;
mod kalman;
mod windowed;

pub use block::block_marginals;
pub use kalman::kalman_smoother_marginals;
pub use windowed::windowed_marginals;

use crate::channel::ChannelRealization;
use crate::constellation::{Constellation, SymbolPmf};
use crate::ep::{moment_match_damp, ControlEvent, EpParams, GaussianScalar};
use crate::{Error, Result, C64};

/// Per-symbol Gaussian site factors `t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpFactorState {
    factors: Vec<GaussianScalar>,
}

impl EpFactorState {
    pub fn new(factors: Vec<GaussianScalar>) -> Result<Self> {
        if let Some(k) = factors.iter().position(|f| !(f.variance > 0.0) || !f.variance.is_finite()) {
            return Err(Error::Domain(format!(
                "factor {k} has variance {}",
                factors[k].variance
            )));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[GaussianScalar] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

/// Observations, channel and site factors for one frame.
#[derive(Debug, Clone, Copy)]
pub struct EqualizerInput<'a> {
    observations: &'a [C64],
    channel: &'a ChannelRealization,
    factors: &'a EpFactorState,
}

impl<'a> EqualizerInput<'a> {
    pub fn new(observations: &'a [C64], channel: &'a ChannelRealization, factors: &'a EpFactorState) -> Result<Self> {
        let n = factors.len();
        if n == 0 {
            return Err(Error::Shape("empty frame".into()));
        }
        if observations.len() != channel.observation_len(n) {
            return Err(Error::Shape(format!(
                "{} observations for {n} symbols and {} taps",
                observations.len(),
                channel.len()
            )));
        }
        Ok(Self {
            observations,
            channel,
            factors,
        })
    }

    pub fn observations(&self) -> &'a [C64] {
        self.observations
    }

    pub fn channel(&self) -> &'a ChannelRealization {
        self.channel
    }

    pub fn factors(&self) -> &'a [GaussianScalar] {
        self.factors.factors()
    }

    pub fn frame_length(&self) -> usize {
        self.factors.len()
    }

    /// `y − H μ_t`.
    pub(crate) fn residual(&self) -> Vec<C64> {
        let means: Vec<C64> = self.factors().iter().map(|f| f.mean).collect();
        let hm = self.channel.convolve(&means);
        self.observations.iter().zip(hm).map(|(y, m)| y - m).collect()
    }
}

/// Posterior marginals `q(u_k)` and extrinsics `q(u_k)/t_k(u_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSet {
    pub posteriors: Vec<GaussianScalar>,
    pub extrinsics: Vec<GaussianScalar>,
}

/// Observation window used by the windowed backend.
///
/// Symbol `k`'s window covers observations
/// `[k − center_offset, k − center_offset + window_length)`, truncated at the
/// frame edges. Symbol `k` first appears in observation `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct WindowSpec {
    pub window_length: usize,
    pub center_offset: usize,
}

impl WindowSpec {
    pub fn new(window_length: usize, center_offset: usize) -> Result<Self> {
        if window_length == 0 || center_offset >= window_length {
            return Err(Error::Config(format!(
                "window {window_length} with offset {center_offset}"
            )));
        }
        Ok(Self {
            window_length,
            center_offset,
        })
    }

    /// `W = 3L`, symbol taps in the middle third.
    pub fn for_taps(l: usize) -> Self {
        Self {
            window_length: 3 * l,
            center_offset: l,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Backend {
    Block,
    Kalman,
    Windowed(WindowSpec),
}

impl Backend {
    pub fn marginals(&self, input: &EqualizerInput<'_>) -> Result<MarginalSet> {
        match self {
            Backend::Block => block_marginals(input),
            Backend::Kalman => kalman_smoother_marginals(input),
            Backend::Windowed(w) => windowed_marginals(input, *w),
        }
    }
}

/// Posterior and extrinsic of symbol `k` from `a = h_kᴴ C⁻¹ (y − H μ_t)` and
/// `g = h_kᴴ C⁻¹ h_k`.
pub(crate) fn site_marginals(k: usize, t: GaussianScalar, a: C64, g: f64) -> Result<(GaussianScalar, GaussianScalar)> {
    let v = t.variance;
    let posterior = GaussianScalar::new(t.mean + v * a, v - v * v * g);
    let ext_var = g.recip() - v;
    if !(ext_var > 0.0) || !ext_var.is_finite() || !(posterior.variance > 0.0) {
        return Err(Error::Domain(format!(
            "symbol {k}: posterior variance {} / extrinsic variance {ext_var} from factor variance {v}",
            posterior.variance
        )));
    }
    let extrinsic = GaussianScalar::new(t.mean + a / g, ext_var);
    Ok((posterior, extrinsic))
}

/// Counters from one call to [`equalize`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EqualizeStats {
    /// Extrinsic computations performed (`S + 1`).
    pub passes: usize,
    pub kept_previous: usize,
    pub absolute_value: usize,
    pub degenerate: usize,
}

/// Inner EP loop: `S` parallel sweeps of moment matching and damping over
/// all symbols, each preceded by a marginal computation, then one final
/// marginal/extrinsic computation with the refined factors.
///
/// `factors` is updated in place. With `S = 0` this is the LMMSE equalizer
/// under the given Gaussian factors.
pub fn equalize(
    observations: &[C64],
    channel: &ChannelRealization,
    factors: &mut EpFactorState,
    priors: &[SymbolPmf],
    constellation: &Constellation,
    params: &EpParams,
    backend: Backend,
) -> Result<(MarginalSet, EqualizeStats)> {
    params.validate()?;
    if priors.len() != factors.len() {
        return Err(Error::Shape(format!("{} priors for {} symbols", priors.len(), factors.len())));
    }
    let mut stats = EqualizeStats::default();
    for sweep in 0..params.inner_iters {
        let input = EqualizerInput::new(observations, channel, factors)?;
        let marg = backend.marginals(&input).map_err(|e| e.at_sweep(sweep))?;
        stats.passes += 1;
        let mut next = Vec::with_capacity(factors.len());
        for (k, (&q_e, &t_old)) in marg.extrinsics.iter().zip(factors.factors()).enumerate() {
            let up = moment_match_damp(q_e, t_old, &priors[k], params, constellation).map_err(|e| e.at_sweep(sweep))?;
            match up.control {
                ControlEvent::None => {}
                ControlEvent::KeptPrevious => stats.kept_previous += 1,
                ControlEvent::AbsoluteValue => stats.absolute_value += 1,
                ControlEvent::Degenerate => stats.degenerate += 1,
            }
            next.push(up.factor);
        }
        *factors = EpFactorState { factors: next };
    }
    let input = EqualizerInput::new(observations, channel, factors)?;
    let marg = backend
        .marginals(&input)
        .map_err(|e| e.at_sweep(params.inner_iters))?;
    stats.passes += 1;
    Ok((marg, stats))
}
