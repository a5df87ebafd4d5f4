//! The outer loop: equalize, demap to extrinsic bit LLRs, decode, and feed the
//! decoder's a-posteriori LLRs back as symbol priors.
//!
//! Every receiver in the crate is a [`TurboConfig`]. The named [`Scheme`]s
//! differ in the equalizer backend, the number of inner sweeps `S`, how the
//! inner loop's factors are initialized from the decoder output, and the
//! negative-variance control:
//!
//! | scheme | backend | `S` | init | control |
//! |---|---|---|---|---|
//! | LMMSE | block | 0 | projection | keep previous |
//! | BEP / FEP / KSEP | block / windowed / Kalman | 3 | projection | keep previous |
//! | D-BEP / D-FEP / D-KSEP | block / windowed / Kalman | 1 | outer EP | keep previous |
//! | BP-EP | Kalman | 0 | outer EP | absolute value |

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::constellation::{Constellation, SymbolPmf};
use crate::ep::{outer_ep_init, project_prior, ControlEvent, EpParams, Extrinsic, VarianceControl};
use crate::equalizer::{equalize, Backend, EpFactorState, WindowSpec};
use crate::ldpc::{LdpcCode, LlrFrame};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Lmmse,
    Bep,
    DBep,
    Fep,
    DFep,
    Ksep,
    DKsep,
    BpEp,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::Lmmse,
        Scheme::Bep,
        Scheme::DBep,
        Scheme::Fep,
        Scheme::DFep,
        Scheme::Ksep,
        Scheme::DKsep,
        Scheme::BpEp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Lmmse => "lmmse",
            Scheme::Bep => "bep",
            Scheme::DBep => "d-bep",
            Scheme::Fep => "fep",
            Scheme::DFep => "d-fep",
            Scheme::Ksep => "ksep",
            Scheme::DKsep => "d-ksep",
            Scheme::BpEp => "bp-ep",
        }
    }

    fn is_double(self) -> bool {
        matches!(self, Scheme::DBep | Scheme::DFep | Scheme::DKsep)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == key || sc.name().replace('-', "") == key)
            .ok_or_else(|| Error::Parse(format!("unknown scheme {s:?}")))
    }
}

/// How the inner loop's first factors are obtained from the decoder output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorInit {
    /// Gaussian projection of the decoder's symbol prior.
    Projection,
    /// Projection of the tilted distribution divided by the previous
    /// extrinsic, with a fallback to the projection.
    OuterEp,
}

/// Damping weight as a function of the turbo iteration `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaSchedule {
    Constant(f64),
    /// `min(start · e^{t / scale}, cap)`.
    Exponential { start: f64, scale: f64, cap: f64 },
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::Exponential {
            start: 0.1,
            scale: 1.5,
            cap: 0.7,
        }
    }
}

impl BetaSchedule {
    pub fn beta(&self, t: usize) -> f64 {
        match *self {
            BetaSchedule::Constant(b) => b,
            BetaSchedule::Exponential { start, scale, cap } => (start * (t as f64 / scale).exp()).min(cap),
        }
    }
}

/// Which equalizer implementation a receiver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EqualizerKind {
    Block,
    Kalman,
    /// Windowed; `None` picks [`WindowSpec::for_taps`] for the channel.
    Windowed(Option<WindowSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurboConfig {
    pub scheme: Scheme,
    /// `ep.beta` is ignored; each turbo iteration takes it from `beta_schedule`.
    pub ep: EpParams,
    /// `T`; the loop runs `T + 1` times.
    pub outer_iters: usize,
    /// Bound on the LLRs handed to the decoder.
    pub llr_clip: f64,
    pub equalizer: EqualizerKind,
    pub init: PriorInit,
    pub beta_schedule: BetaSchedule,
    pub decoder_iters: usize,
}

impl TurboConfig {
    /// Defaults for a scheme. BP-EP's iteration count depends on the
    /// constellation size: `T = 8` up to 64 points, `T = 11` beyond.
    pub fn for_scheme(scheme: Scheme, bits_per_symbol: usize) -> Self {
        let equalizer = match scheme {
            Scheme::Lmmse | Scheme::Bep | Scheme::DBep => EqualizerKind::Block,
            Scheme::Fep | Scheme::DFep => EqualizerKind::Windowed(None),
            Scheme::Ksep | Scheme::DKsep | Scheme::BpEp => EqualizerKind::Kalman,
        };
        let inner_iters = match scheme {
            Scheme::Lmmse | Scheme::BpEp => 0,
            s if s.is_double() => 1,
            _ => 3,
        };
        let variance_control = if scheme == Scheme::BpEp {
            VarianceControl::AbsoluteValue
        } else {
            VarianceControl::KeepPrevious
        };
        let init = if scheme.is_double() || scheme == Scheme::BpEp {
            PriorInit::OuterEp
        } else {
            PriorInit::Projection
        };
        let outer_iters = match scheme {
            Scheme::BpEp if bits_per_symbol >= 7 => 11,
            Scheme::BpEp => 8,
            _ => 5,
        };
        Self {
            scheme,
            ep: EpParams {
                inner_iters,
                variance_control,
                ..EpParams::default()
            },
            outer_iters,
            llr_clip: 5.0,
            equalizer,
            init,
            beta_schedule: BetaSchedule::default(),
            decoder_iters: 100,
        }
    }

    pub fn with_outer_iters(mut self, t: usize) -> Self {
        self.outer_iters = t;
        self
    }

    pub fn with_inner_iters(mut self, s: usize) -> Self {
        self.ep.inner_iters = s;
        self
    }

    /// Checks the numeric ranges and that the scheme's defining choices
    /// (init, variance control, and `S = 0` for LMMSE and BP-EP) are intact.
    pub fn validate(&self) -> Result<()> {
        self.ep.validate()?;
        if !(self.llr_clip > 0.0) {
            return Err(Error::Config(format!("LLR clip must be positive, got {}", self.llr_clip)));
        }
        for t in 0..=self.outer_iters {
            let b = self.beta_schedule.beta(t);
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::Config(format!("beta schedule gives {b} at t = {t}")));
            }
        }
        let reference = Self::for_scheme(self.scheme, 6);
        if self.init != reference.init || self.ep.variance_control != reference.ep.variance_control {
            return Err(Error::Config(format!(
                "{} requires {:?} init and {:?} control",
                self.scheme, reference.init, reference.ep.variance_control
            )));
        }
        if reference.ep.inner_iters == 0 && self.ep.inner_iters != 0 {
            return Err(Error::Config(format!("{} runs no inner sweeps", self.scheme)));
        }
        Ok(())
    }

    pub fn backend(&self, taps: usize) -> Backend {
        match self.equalizer {
            EqualizerKind::Block => Backend::Block,
            EqualizerKind::Kalman => Backend::Kalman,
            EqualizerKind::Windowed(w) => Backend::Windowed(w.unwrap_or_else(|| WindowSpec::for_taps(taps))),
        }
    }

    /// `(S + 1)(T + 1)`.
    pub fn extrinsic_passes(&self) -> usize {
        (self.ep.inner_iters + 1) * (self.outer_iters + 1)
    }
}

/// Per-frame record, serialized as one JSON line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub scheme: String,
    pub seed: Option<u64>,
    pub ebn0_db: Option<f64>,
    /// Info-bit errors after each turbo iteration's decoding, when the
    /// transmitted bits are known.
    pub bit_errors: Vec<usize>,
    pub decoder_converged: Vec<bool>,
    pub decoder_iterations: Vec<usize>,
    /// Extrinsic computations performed.
    pub passes: usize,
    /// Inner updates that kept the previous factor.
    pub kept_previous: usize,
    /// Inner updates that took the absolute variance.
    pub absolute_value: usize,
    pub degenerate: usize,
    /// Outer-loop initializations that fell back to the projection.
    pub outer_fallbacks: usize,
    pub outer_absolute_value: usize,
}

impl FrameDiagnostics {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub decoded_bits: Vec<u8>,
    /// Clipped extrinsic LLRs handed to the decoder, one entry per turbo iteration.
    pub llr_snapshots: Vec<Vec<f64>>,
    pub diagnostics: FrameDiagnostics,
}

/// One transmitted codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub codeword: Vec<u8>,
    pub symbols: Vec<C64>,
    pub observations: Vec<C64>,
}

/// Number of symbols carrying a length-`n` codeword; the last symbol is
/// padded with zero bits when `Q` does not divide `n`.
pub fn symbols_per_codeword(n: usize, bits_per_symbol: usize) -> usize {
    n.div_ceil(bits_per_symbol)
}

/// Encodes, modulates and sends one frame through the channel.
pub fn transmit_frame<R: Rng + ?Sized>(
    code: &LdpcCode,
    constellation: &Constellation,
    channel: &ChannelRealization,
    info_bits: &[u8],
    rng: &mut R,
) -> Result<Transmission> {
    let codeword = code.encode(info_bits)?;
    let q = constellation.bits_per_symbol();
    let mut padded = codeword.clone();
    padded.resize(symbols_per_codeword(codeword.len(), q) * q, 0);
    let symbols = constellation.modulate(&padded)?;
    let observations = channel.transmit(&symbols, rng)?;
    Ok(Transmission {
        codeword,
        symbols,
        observations,
    })
}

/// Encodes and transmits `info_bits`, then runs the receiver on the result.
pub fn run_frame<R: Rng + ?Sized>(
    config: &TurboConfig,
    code: &LdpcCode,
    constellation: &Constellation,
    channel: &ChannelRealization,
    info_bits: &[u8],
    rng: &mut R,
) -> Result<FrameOutput> {
    let tx = transmit_frame(code, constellation, channel, info_bits, rng)?;
    receive(config, code, constellation, channel, &tx.observations, Some(info_bits))
}

/// The turbo receiver on a received frame. `truth`, if given, is the
/// transmitted info bits and fills in the per-iteration error counts.
pub fn receive(
    config: &TurboConfig,
    code: &LdpcCode,
    constellation: &Constellation,
    channel: &ChannelRealization,
    observations: &[C64],
    truth: Option<&[u8]>,
) -> Result<FrameOutput> {
    config.validate()?;
    let q = constellation.bits_per_symbol();
    let n = code.len();
    let ns = symbols_per_codeword(n, q);
    if observations.len() != channel.observation_len(ns) {
        return Err(Error::Shape(format!(
            "{} observations, expected {} for {ns} symbols",
            observations.len(),
            channel.observation_len(ns)
        )));
    }
    if let Some(t) = truth {
        if t.len() != code.info_len() {
            return Err(Error::Shape(format!("{} reference bits for {} info bits", t.len(), code.info_len())));
        }
    }
    let backend = config.backend(channel.len());

    let mut diag = FrameDiagnostics {
        scheme: config.scheme.to_string(),
        ..Default::default()
    };
    let mut priors: Vec<SymbolPmf> = vec![constellation.uniform_pmf(); ns];
    let mut previous = vec![Extrinsic::Flat; ns];
    let mut llrs = vec![0.0; ns * q];
    let mut snapshots = Vec::with_capacity(config.outer_iters + 1);
    let mut decoded = Vec::new();

    for t in 0..=config.outer_iters {
        let located = |e: Error| e.at_turbo_iteration(t);
        let params = EpParams {
            beta: config.beta_schedule.beta(t),
            ..config.ep
        };
        let mut factors = Vec::with_capacity(ns);
        for (prior, &prev) in priors.iter().zip(&previous) {
            factors.push(match config.init {
                PriorInit::Projection => project_prior(prior, constellation, params.epsilon),
                PriorInit::OuterEp => {
                    let up = outer_ep_init(prior, prev, constellation, &params).map_err(located)?;
                    match up.control {
                        ControlEvent::None => {}
                        ControlEvent::AbsoluteValue => diag.outer_absolute_value += 1,
                        ControlEvent::KeptPrevious | ControlEvent::Degenerate => diag.outer_fallbacks += 1,
                    }
                    up.factor
                }
            });
        }
        let mut state = EpFactorState::new(factors).map_err(located)?;
        let (marg, stats) =
            equalize(observations, channel, &mut state, &priors, constellation, &params, backend).map_err(located)?;
        diag.passes += stats.passes;
        diag.kept_previous += stats.kept_previous;
        diag.absolute_value += stats.absolute_value;
        diag.degenerate += stats.degenerate;

        for (k, &q_e) in marg.extrinsics.iter().enumerate() {
            constellation
                .extrinsic_llrs_into(q_e, &mut llrs[k * q..(k + 1) * q])
                .map_err(located)?;
        }
        let clipped: Vec<f64> = llrs[..n].iter().map(|l| l.clamp(-config.llr_clip, config.llr_clip)).collect();
        let out = code
            .decode(&LlrFrame::new(clipped.clone()).map_err(located)?, config.decoder_iters)
            .map_err(located)?;
        snapshots.push(clipped);
        diag.decoder_converged.push(out.converged);
        diag.decoder_iterations.push(out.iterations);
        if let Some(truth) = truth {
            diag.bit_errors.push(out.info_bits.iter().zip(truth).filter(|(a, b)| a != b).count());
        }

        if t < config.outer_iters {
            let mut app = out.posterior.into_vec();
            // padding bits are left uninformative
            app.resize(ns * q, 0.0);
            priors = app
                .chunks_exact(q)
                .map(|c| constellation.prior_pmf_from_llrs(c))
                .collect::<Result<_>>()
                .map_err(located)?;
            previous = marg.extrinsics.into_iter().map(Extrinsic::Gaussian).collect();
        }
        decoded = out.info_bits;
    }

    Ok(FrameOutput {
        decoded_bits: decoded,
        llr_snapshots: snapshots,
        diagnostics: diag,
    })
}
