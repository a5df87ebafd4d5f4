//! Linear ISI channel `y = H u + w`.
//!
//! `H` is the `(N+L−1)×N` Toeplitz matrix whose `k`-th column holds the taps
//! `h_1..h_L` in rows `k..k+L−1` (0-based here). Noise is circular complex
//! Gaussian with total per-sample variance `σ_w²`.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    taps: Vec<C64>,
    noise_variance: f64,
}

impl ChannelRealization {
    pub fn new(taps: Vec<C64>, noise_variance: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Shape("channel needs at least one tap".into()));
        }
        if taps.iter().all(|t| t.norm_sqr() == 0.0) {
            return Err(Error::Domain("channel taps are all zero".into()));
        }
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::Domain(format!("noise variance {noise_variance} must be positive")));
        }
        Ok(Self { taps, noise_variance })
    }

    pub fn taps(&self) -> &[C64] {
        &self.taps
    }

    /// Number of taps `L`.
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Self::new(self.taps.clone(), noise_variance)
    }

    /// `‖h‖²`.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }

    /// Number of observations for a frame of `n` symbols.
    pub fn observation_len(&self, n: usize) -> usize {
        n + self.taps.len() - 1
    }

    /// `H u` without noise.
    pub fn convolve(&self, u: &[C64]) -> Vec<C64> {
        if u.is_empty() {
            return Vec::new();
        }
        let mut y = vec![C64::new(0.0, 0.0); self.observation_len(u.len())];
        for (k, &uk) in u.iter().enumerate() {
            for (a, &h) in self.taps.iter().enumerate() {
                y[k + a] += h * uk;
            }
        }
        y
    }

    /// `H u + w`.
    pub fn transmit<R: Rng + ?Sized>(&self, u: &[C64], rng: &mut R) -> Result<Vec<C64>> {
        if u.is_empty() {
            return Err(Error::Shape("empty symbol frame".into()));
        }
        let mut y = self.convolve(u);
        let sd = (self.noise_variance / 2.0).sqrt();
        for v in &mut y {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *v += C64::new(re * sd, im * sd);
        }
        Ok(y)
    }

    /// Column `k` (0-based) of `H` for a frame of `n` symbols.
    pub fn column(&self, k: usize, n: usize) -> Result<Vec<C64>> {
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, len: n });
        }
        let mut col = vec![C64::new(0.0, 0.0); self.observation_len(n)];
        col[k..k + self.taps.len()].copy_from_slice(&self.taps);
        Ok(col)
    }

    /// Taps as text, one `re im` pair per line. Round-trips bit-exactly.
    pub fn taps_to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.taps {
            let _ = writeln!(s, "{} {}", t.re, t.im);
        }
        s
    }

    pub fn write_taps(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.taps_to_text())?;
        Ok(())
    }
}

/// Parses the `re im`-per-line tap format. Blank lines and `#` comments are skipped.
pub fn taps_from_text(text: &str) -> Result<Vec<C64>> {
    let mut taps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| Error::Parse(format!("line {}: expected `re im`", lineno + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        let re = parse(it.next())?;
        let im = parse(it.next())?;
        if it.next().is_some() {
            return Err(Error::Parse(format!("line {}: trailing fields", lineno + 1)));
        }
        taps.push(C64::new(re, im));
    }
    if taps.is_empty() {
        return Err(Error::Parse("no taps found".into()));
    }
    Ok(taps)
}

pub fn read_taps(path: impl AsRef<Path>) -> Result<Vec<C64>> {
    taps_from_text(&std::fs::read_to_string(path)?)
}

/// Distribution of randomly drawn taps before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum TapDistribution {
    /// i.i.d. circular complex Gaussian.
    #[default]
    ComplexGaussian,
    /// i.i.d. real Gaussian (zero imaginary parts).
    RealGaussian,
}

/// Draws `l` i.i.d. zero-mean Gaussian taps normalized to `‖h‖² = 1`.
pub fn random_taps<R: Rng + ?Sized>(l: usize, dist: TapDistribution, rng: &mut R) -> Result<Vec<C64>> {
    if l == 0 {
        return Err(Error::Shape("tap count must be at least 1".into()));
    }
    loop {
        let taps: Vec<C64> = (0..l)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                match dist {
                    TapDistribution::ComplexGaussian => {
                        let im: f64 = StandardNormal.sample(rng);
                        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                    }
                    TapDistribution::RealGaussian => C64::new(re, 0.0),
                }
            })
            .collect();
        let energy: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
        if energy > 0.0 {
            let s = energy.sqrt().recip();
            return Ok(taps.into_iter().map(|t| t * s).collect());
        }
    }
}

/// Noise variance for a target `E_b/N_0` in dB:
/// `σ_w² = E_s ‖h‖² / (Q R 10^{E_b/N_0 / 10})`.
pub fn noise_variance_for_ebn0(
    symbol_energy: f64,
    channel_energy: f64,
    bits_per_symbol: usize,
    code_rate: f64,
    ebn0_db: f64,
) -> f64 {
    symbol_energy * channel_energy / (bits_per_symbol as f64 * code_rate * 10f64.powf(ebn0_db / 10.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn identity_and_hand_convolution() {
        let ch = ChannelRealization::new(vec![c(1.0)], 1.0).unwrap();
        let u = vec![c(1.0), C64::new(0.0, 1.0)];
        assert_eq!(ch.convolve(&u), u);
        let ch = ChannelRealization::new(vec![c(1.0), c(1.0)], 1.0).unwrap();
        assert_eq!(ch.convolve(&[c(1.0), c(-1.0)]), vec![c(1.0), c(0.0), c(-1.0)]);
    }

    #[test]
    fn columns() {
        let ch = ChannelRealization::new(vec![c(1.0), c(2.0)], 1.0).unwrap();
        assert_eq!(ch.column(0, 3).unwrap(), vec![c(1.0), c(2.0), c(0.0), c(0.0)]);
        assert_eq!(ch.column(2, 3).unwrap(), vec![c(0.0), c(0.0), c(1.0), c(2.0)]);
        assert!(matches!(ch.column(3, 3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn validation() {
        assert!(ChannelRealization::new(vec![], 1.0).is_err());
        assert!(ChannelRealization::new(vec![c(0.0)], 1.0).is_err());
        assert!(ChannelRealization::new(vec![c(1.0)], 0.0).is_err());
    }

    #[test]
    fn random_taps_deterministic_and_normalized() {
        let a = random_taps(7, TapDistribution::ComplexGaussian, &mut stream(9, &[1])).unwrap();
        let b = random_taps(7, TapDistribution::ComplexGaussian, &mut stream(9, &[1])).unwrap();
        assert_eq!(a, b);
        for seed in 0..50 {
            for dist in [TapDistribution::ComplexGaussian, TapDistribution::RealGaussian] {
                let t = random_taps(5, dist, &mut stream(seed, &[])).unwrap();
                let e: f64 = t.iter().map(|x| x.norm_sqr()).sum();
                assert!((e - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_taps_are_zero_mean() {
        let draws = 10_000;
        let l = 7;
        let mut rng = stream(2024, &[]);
        let mut sum = vec![C64::new(0.0, 0.0); l];
        let mut sq = vec![0.0; l];
        for _ in 0..draws {
            let t = random_taps(l, TapDistribution::ComplexGaussian, &mut rng).unwrap();
            for k in 0..l {
                sum[k] += t[k];
                sq[k] += t[k].norm_sqr();
            }
        }
        for k in 0..l {
            let mean = sum[k] / draws as f64;
            let std = (sq[k] / draws as f64).sqrt();
            assert!(mean.norm() < 4.0 * std / (draws as f64).sqrt(), "tap {k}: {mean}");
        }
    }

    #[test]
    fn noise_variance_is_calibrated() {
        let ch = ChannelRealization::new(vec![c(1.0)], 0.37).unwrap();
        let u = vec![c(0.0); 200_000];
        let y = ch.transmit(&u, &mut stream(5, &[])).unwrap();
        let var = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
        assert!((var / 0.37 - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn tap_text_round_trip() {
        let taps = random_taps(6, TapDistribution::ComplexGaussian, &mut stream(3, &[])).unwrap();
        let ch = ChannelRealization::new(taps.clone(), 1.0).unwrap();
        assert_eq!(taps_from_text(&ch.taps_to_text()).unwrap(), taps);
        assert!(taps_from_text("1.0\n").is_err());
        assert!(taps_from_text("# nothing\n\n").is_err());
    }

    #[test]
    fn ebn0_mapping() {
        // Q = 2, R = 1/2: Eb/N0 = Es/N0 at unit channel energy
        let v = noise_variance_for_ebn0(1.0, 1.0, 2, 0.5, 10.0);
        assert!((v - 0.1).abs() < 1e-15);
    }
}
