//! Monte Carlo BER/FER sweeps.
//!
//! A sweep draws `channels` random channels, and for every `E_b/N_0` point
//! and frame index sends one fresh codeword through each channel. Every
//! scheme decodes the same received frame, so scheme comparisons are paired.
//!
//! Random streams are addressed by position, not by draw order:
//!
//! - channel `c` taps: `stream(seed, [0, c])`
//! - info bits and noise of frame `f` on channel `c` at `E_b/N_0 = x`:
//!   `stream(seed, [1, c, f, x.to_bits()])`
//! - the LDPC code: `derive_seed(seed, [2])`
//!
//! so results do not depend on thread scheduling or on which other points
//! are in the grid.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{noise_variance_for_ebn0, random_taps, ChannelRealization, TapDistribution};
use crate::constellation::Constellation;
use crate::ldpc::{random_bits, LdpcCode};
use crate::rng::{derive_seed, stream};
use crate::turbo::{receive, symbols_per_codeword, transmit_frame, FrameDiagnostics, Scheme, TurboConfig};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub schemes: Vec<Scheme>,
    /// Constellation size `M`.
    pub modulation: usize,
    /// Channel length `L`.
    pub taps: usize,
    pub channels: usize,
    pub frames_per_channel: usize,
    pub ebn0_db: Vec<f64>,
    pub seed: u64,
    pub code_length: usize,
    pub tap_distribution: TapDistribution,
    /// Stop a point once every scheme has at least this many bit errors.
    pub early_stop_errors: Option<u64>,
    /// Replaces every scheme's default `T`.
    pub outer_iters: Option<usize>,
    pub output: Option<PathBuf>,
    /// JSON-lines file receiving one record per decoded frame.
    pub diagnostics: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            schemes: vec![Scheme::DKsep, Scheme::Lmmse],
            modulation: 64,
            taps: 7,
            channels: 10,
            frames_per_channel: 100,
            ebn0_db: vec![10.0, 12.0],
            seed: 0,
            code_length: 4096,
            tap_distribution: TapDistribution::ComplexGaussian,
            early_stop_errors: Some(200),
            outer_iters: None,
            output: None,
            diagnostics: None,
        }
    }
}

/// Parses `a:step:b` (inclusive, step may be negative) or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::Parse(format!("bad number {t:?} in grid {s:?}")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, step, b] => {
            let (a, step, b) = (num(a)?, num(step)?, num(b)?);
            if step == 0.0 || (b - a) * step < 0.0 {
                return Err(Error::Parse(format!("grid {s:?} never reaches its end")));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| a + i as f64 * step).collect())
        }
        [_] => s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect(),
        _ => Err(Error::Parse(format!("grid {s:?} is neither a:step:b nor a list"))),
    }
}

pub fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(Scheme::from_str).collect()
}

impl ExperimentSpec {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let count = || {
            v.parse::<usize>()
                .map_err(|_| Error::Parse(format!("{key}: {v:?} is not a count")))
        };
        match key.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "scheme" | "schemes" => self.schemes = parse_schemes(v)?,
            "mod" | "modulation" => self.modulation = count()?,
            "taps" => self.taps = count()?,
            "channels" => self.channels = count()?,
            "frames" | "frames_per_channel" => self.frames_per_channel = count()?,
            "ebn0" | "ebn0_db" => self.ebn0_db = parse_grid(v)?,
            "seed" => self.seed = v.parse().map_err(|_| Error::Parse(format!("seed: {v:?}")))?,
            "code_length" | "n" => self.code_length = count()?,
            "tap_distribution" => {
                self.tap_distribution = match v.to_ascii_lowercase().as_str() {
                    "complex" => TapDistribution::ComplexGaussian,
                    "real" => TapDistribution::RealGaussian,
                    _ => return Err(Error::Parse(format!("tap_distribution: {v:?} (complex|real)"))),
                }
            }
            "early_stop" | "early_stop_errors" => {
                self.early_stop_errors = match v {
                    "off" | "none" | "0" => None,
                    _ => Some(v.parse().map_err(|_| Error::Parse(format!("early_stop: {v:?}")))?),
                }
            }
            "outer_iters" | "turbo_iters" => self.outer_iters = Some(count()?),
            "out" | "output" => self.output = Some(PathBuf::from(v)),
            "diagnostics" => self.diagnostics = Some(PathBuf::from(v)),
            other => return Err(Error::Parse(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Flat `key = value` text (also `key: value`), `#` comments, applied
    /// on top of the defaults.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", i + 1)))?;
            spec.set(k, v).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        }
        Ok(spec)
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config_text(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("taps", self.taps),
            ("channels", self.channels),
            ("frames", self.frames_per_channel),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes".into()));
        }
        if self.ebn0_db.is_empty() {
            return Err(Error::Config("empty E_b/N_0 grid".into()));
        }
        if self.early_stop_errors == Some(0) {
            return Err(Error::Config("early stop threshold must be positive".into()));
        }
        Constellation::qam(self.modulation)?;
        for &s in &self.schemes {
            self.turbo_config(s).validate()?;
        }
        Ok(())
    }

    pub fn turbo_config(&self, scheme: Scheme) -> TurboConfig {
        let bits = (self.modulation.max(2) as f64).log2().round() as usize;
        let mut c = TurboConfig::for_scheme(scheme, bits);
        if let Some(t) = self.outer_iters {
            c.outer_iters = t;
        }
        c
    }

    pub fn code_seed(&self) -> u64 {
        derive_seed(self.seed, &[2])
    }

    /// Unit-energy taps of channel `c`.
    pub fn channel_taps(&self, c: usize) -> Result<Vec<C64>> {
        random_taps(self.taps, self.tap_distribution, &mut stream(self.seed, &[0, c as u64]))
    }
}

/// Counts for one scheme at one `E_b/N_0` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub scheme: Scheme,
    pub ebn0_db: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub frame_errors: u64,
    pub frames: u64,
    /// Frames dropped because the receiver returned an error.
    pub skipped: u64,
    pub wall_time_s: f64,
}

impl BerRecord {
    fn empty(scheme: Scheme, ebn0_db: f64) -> Self {
        Self {
            scheme,
            ebn0_db,
            bit_errors: 0,
            bits: 0,
            frame_errors: 0,
            frames: 0,
            skipped: 0,
            wall_time_s: 0.0,
        }
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 { 0.0 } else { self.bit_errors as f64 / self.bits as f64 }
    }

    pub fn fer(&self) -> f64 {
        if self.frames == 0 { 0.0 } else { self.frame_errors as f64 / self.frames as f64 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    /// Grouped by `E_b/N_0` point, schemes in spec order within a point.
    pub records: Vec<BerRecord>,
    pub diagnostics: Vec<FrameDiagnostics>,
}

impl SweepOutcome {
    pub fn record(&self, scheme: Scheme, ebn0_db: f64) -> Option<&BerRecord> {
        self.records.iter().find(|r| r.scheme == scheme && r.ebn0_db == ebn0_db)
    }
}

enum CellResult {
    Decoded { bit_errors: usize, diag: FrameDiagnostics },
    Failed(String),
}

/// Runs the sweep. Cells run in parallel in channel-sized batches and are
/// folded in (channel, frame) order, so the outcome does not depend on the
/// thread count.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let code = LdpcCode::build(spec.code_length, spec.code_seed())?;
    let constellation = Constellation::qam(spec.modulation)?;
    let q = constellation.bits_per_symbol();
    let configs: Vec<TurboConfig> = spec.schemes.iter().map(|&s| spec.turbo_config(s)).collect();
    let channels = (0..spec.channels).map(|c| spec.channel_taps(c)).collect::<Result<Vec<_>>>()?;
    let info_len = code.info_len() as u64;
    let keep_diag = spec.diagnostics.is_some();
    info!(
        "code n = {} (k = {}), {} symbols per frame",
        code.len(),
        code.info_len(),
        symbols_per_codeword(code.len(), q)
    );

    let mut outcome = SweepOutcome::default();
    for &ebn0 in &spec.ebn0_db {
        let start = Instant::now();
        let mut recs: Vec<BerRecord> = spec.schemes.iter().map(|&s| BerRecord::empty(s, ebn0)).collect();
        'point: for (c, taps) in channels.iter().enumerate() {
            let sigma2 = noise_variance_for_ebn0(
                constellation.mean_energy(),
                taps.iter().map(|t| t.norm_sqr()).sum(),
                q,
                code.rate(),
                ebn0,
            );
            let channel = ChannelRealization::new(taps.clone(), sigma2)?;
            let cells: Vec<Vec<CellResult>> = (0..spec.frames_per_channel)
                .into_par_iter()
                .map(|f| {
                    let path = [1, c as u64, f as u64, ebn0.to_bits()];
                    let mut rng = stream(spec.seed, &path);
                    let info_bits = random_bits(code.info_len(), &mut rng);
                    let tx = match transmit_frame(&code, &constellation, &channel, &info_bits, &mut rng) {
                        Ok(tx) => tx,
                        Err(e) => return configs.iter().map(|_| CellResult::Failed(e.to_string())).collect(),
                    };
                    configs
                        .iter()
                        .map(|cfg| match receive(cfg, &code, &constellation, &channel, &tx.observations, Some(&info_bits)) {
                            Ok(out) => {
                                let mut diag = out.diagnostics;
                                diag.seed = Some(derive_seed(spec.seed, &path));
                                diag.ebn0_db = Some(ebn0);
                                CellResult::Decoded {
                                    bit_errors: out.decoded_bits.iter().zip(&info_bits).filter(|(a, b)| a != b).count(),
                                    diag,
                                }
                            }
                            Err(e) => CellResult::Failed(e.to_string()),
                        })
                        .collect()
                })
                .collect();

            for frame in cells {
                for (rec, cell) in recs.iter_mut().zip(frame) {
                    match cell {
                        CellResult::Decoded { bit_errors, diag } => {
                            rec.bit_errors += bit_errors as u64;
                            rec.bits += info_len;
                            rec.frame_errors += u64::from(bit_errors > 0);
                            rec.frames += 1;
                            if keep_diag {
                                outcome.diagnostics.push(diag);
                            }
                        }
                        CellResult::Failed(msg) => {
                            warn!("{} at {ebn0} dB, channel {c}: frame skipped: {msg}", rec.scheme);
                            rec.skipped += 1;
                        }
                    }
                }
            }
            if let Some(limit) = spec.early_stop_errors {
                if recs.iter().all(|r| r.bit_errors >= limit) {
                    info!("{ebn0} dB: stopping after {} channels", c + 1);
                    break 'point;
                }
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        for mut r in recs {
            r.wall_time_s = elapsed;
            info!("{} {:.2} dB: BER {:.3e} FER {:.3e} ({} frames)", r.scheme, ebn0, r.ber(), r.fer(), r.frames);
            outcome.records.push(r);
        }
    }

    if let Some(path) = &spec.output {
        emit_csv(&outcome.records, path)?;
    }
    if let Some(path) = &spec.diagnostics {
        write_diagnostics(&outcome.diagnostics, path)?;
    }
    Ok(outcome)
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    scheme: String,
    ebn0_db: f64,
    ber: f64,
    fer: f64,
    bits: u64,
    frames: u64,
}

pub fn write_csv<W: Write>(records: &[BerRecord], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["scheme", "ebn0_db", "ber", "fer", "bits", "frames"])?;
    for r in records {
        out.serialize(CsvRow {
            scheme: r.scheme.to_string(),
            ebn0_db: r.ebn0_db,
            ber: r.ber(),
            fer: r.fer(),
            bits: r.bits,
            frames: r.frames,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `scheme,ebn0_db,ber,fer,bits,frames`, one row per record.
pub fn emit_csv(records: &[BerRecord], path: impl AsRef<Path>) -> Result<()> {
    write_csv(records, std::fs::File::create(path)?)
}

/// Reads a CSV written by [`emit_csv`]. Error counts are recovered from the
/// rates; skip counts and wall times are not stored and come back as zero.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BerRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            Ok(BerRecord {
                scheme: row.scheme.parse()?,
                ebn0_db: row.ebn0_db,
                bit_errors: (row.ber * row.bits as f64).round() as u64,
                bits: row.bits,
                frame_errors: (row.fer * row.frames as f64).round() as u64,
                frames: row.frames,
                skipped: 0,
                wall_time_s: 0.0,
            })
        })
        .collect()
}

pub fn write_diagnostics(diags: &[FrameDiagnostics], path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for d in diags {
        writeln!(f, "{}", d.to_json_line()?)?;
    }
    f.flush()?;
    Ok(())
}

/// Writes `channel_<c>.txt` for every channel of the spec into `dir`.
pub fn emit_channels(spec: &ExperimentSpec, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    (0..spec.channels)
        .map(|c| {
            let path = dir.join(format!("channel_{c:03}.txt"));
            ChannelRealization::new(spec.channel_taps(c)?, 1.0)?.write_taps(&path)?;
            Ok(path)
        })
        .collect()
}

/// Bit-error totals per scheme, summed over all points.
pub fn totals(records: &[BerRecord]) -> HashMap<Scheme, u64> {
    let mut m = HashMap::new();
    for r in records {
        *m.entry(r.scheme).or_default() += r.bit_errors;
    }
    m
}
