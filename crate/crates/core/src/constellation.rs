//! M-ary alphabets with Gray bit labels and the soft conversions between
//! symbol-level distributions and per-bit log-likelihood ratios.
//!
//! Labeling is fixed so that results are reproducible:
//!
//! - Square QAM uses an independent reflected Gray code per axis. The first
//!   `Q/2` bits of a symbol select the in-phase level, the last `Q/2` the
//!   quadrature level. Level index `i` maps to amplitude `(√M − 1) − 2i`, so
//!   an all-zero label sits in the upper-right corner.
//! - 2-point alphabets map bit 0 to `+1` and bit 1 to `−1`.
//! - 128-QAM is the 12×12 cross (corners removed). It is built from a 16×8
//!   Gray-labeled rectangle whose outer columns are folded into the top and
//!   bottom strips. Adjacent points differ in at most two label bits.
//!
//! LLRs are `log P(b = 0) / P(b = 1)`.

use crate::ep::GaussianScalar;
use crate::{Error, Result, C64};

/// A finite complex alphabet with one distinct bit label per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<C64>,
    labels: Vec<u32>,
    bits_per_symbol: usize,
    mean_energy: f64,
    // index of the point carrying each label
    by_label: Vec<usize>,
}

fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

impl Constellation {
    /// Builds an alphabet from explicit points and labels.
    pub fn from_points(points: Vec<C64>, labels: Vec<u32>) -> Result<Self> {
        let m = points.len();
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::Shape(format!("alphabet size {m} is not a power of two ≥ 2")));
        }
        if labels.len() != m {
            return Err(Error::Shape(format!("{} labels for {m} points", labels.len())));
        }
        let bits_per_symbol = m.trailing_zeros() as usize;
        let mut by_label = vec![usize::MAX; m];
        for (idx, &label) in labels.iter().enumerate() {
            let slot = by_label
                .get_mut(label as usize)
                .ok_or_else(|| Error::Shape(format!("label {label} needs more than {bits_per_symbol} bits")))?;
            if *slot != usize::MAX {
                return Err(Error::Shape(format!("label {label} used twice")));
            }
            *slot = idx;
        }
        let mean_energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
        if !(mean_energy > 0.0 && mean_energy.is_finite()) {
            return Err(Error::Domain("alphabet has zero or non-finite energy".into()));
        }
        Ok(Self {
            points,
            labels,
            bits_per_symbol,
            mean_energy,
            by_label,
        })
    }

    /// The unit-energy alphabet for `m` ∈ {2, 4, 16, 64, 128, 256}.
    pub fn qam(m: usize) -> Result<Self> {
        let (points, labels) = match m {
            2 => (vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)], vec![0, 1]),
            4 | 16 | 64 | 256 => square_qam(m),
            128 => cross_qam_128(),
            _ => return Err(Error::Config(format!("unsupported modulation order {m}"))),
        };
        Self::from_points(points, labels)?.normalized()
    }

    /// Rescales the points to unit mean energy.
    pub fn normalized(self) -> Result<Self> {
        let scale = self.mean_energy.sqrt().recip();
        let points = self.points.iter().map(|p| p * scale).collect();
        Self::from_points(points, self.labels)
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn mean_energy(&self) -> f64 {
        self.mean_energy
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Bit `j` (0 = first bit of the symbol's block) of point `m`'s label.
    #[inline]
    pub fn label_bit(&self, m: usize, j: usize) -> u8 {
        ((self.labels[m] >> (self.bits_per_symbol - 1 - j)) & 1) as u8
    }

    /// Maps each block of `Q` bits to the point carrying that label.
    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<C64>> {
        let q = self.bits_per_symbol;
        if bits.len() % q != 0 {
            return Err(Error::Shape(format!(
                "{} bits is not a multiple of {q} bits per symbol",
                bits.len()
            )));
        }
        Ok(bits
            .chunks_exact(q)
            .map(|block| {
                let label = block.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b & 1));
                self.points[self.by_label[label as usize]]
            })
            .collect())
    }

    /// Index of the point nearest to `y`.
    pub fn nearest(&self, y: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (m, p) in self.points.iter().enumerate() {
            let d = (p - y).norm_sqr();
            if d < best_d {
                best_d = d;
                best = m;
            }
        }
        best
    }

    /// Nearest-point hard decisions, returned as bits.
    pub fn hard_demap(&self, symbols: &[C64]) -> Vec<u8> {
        let q = self.bits_per_symbol;
        let mut bits = Vec::with_capacity(symbols.len() * q);
        for &y in symbols {
            let m = self.nearest(y);
            bits.extend((0..q).map(|j| self.label_bit(m, j)));
        }
        bits
    }

    /// Symbol prior induced by independent bit LLRs for one symbol.
    pub fn prior_pmf_from_llrs(&self, llrs: &[f64]) -> Result<SymbolPmf> {
        let q = self.bits_per_symbol;
        if llrs.len() != q {
            return Err(Error::Shape(format!("{} LLRs for a {q}-bit symbol", llrs.len())));
        }
        // log P(b=0) = -softplus(-llr), log P(b=1) = -softplus(llr)
        let log_p: Vec<[f64; 2]> = llrs.iter().map(|&l| [-softplus(-l), -softplus(l)]).collect();
        let mut logw: Vec<f64> = (0..self.order())
            .map(|m| (0..q).map(|j| log_p[j][self.label_bit(m, j) as usize]).sum())
            .collect();
        normalize_log_weights(&mut logw);
        Ok(SymbolPmf { probs: logw })
    }

    /// Per-bit extrinsic LLRs of a Gaussian symbol likelihood `CN(u; μ, σ²)`,
    /// written into `out` (length `Q`). Exact log-sum-exp, no clipping.
    pub fn extrinsic_llrs_into(&self, q_e: GaussianScalar, out: &mut [f64]) -> Result<()> {
        let q = self.bits_per_symbol;
        if out.len() != q {
            return Err(Error::Shape(format!("output of length {} for {q} bits", out.len())));
        }
        if !(q_e.variance > 0.0) {
            return Err(Error::Domain(format!("demapping needs positive variance, got {}", q_e.variance)));
        }
        let inv = q_e.variance.recip();
        let metric: Vec<f64> = self
            .points
            .iter()
            .map(|p| -(p - q_e.mean).norm_sqr() * inv)
            .collect();
        for (j, slot) in out.iter_mut().enumerate() {
            let mut lse = [LogSumExp::default(), LogSumExp::default()];
            for (m, &x) in metric.iter().enumerate() {
                lse[self.label_bit(m, j) as usize].push(x);
            }
            *slot = lse[0].value() - lse[1].value();
        }
        Ok(())
    }

    pub fn extrinsic_llrs(&self, q_e: GaussianScalar) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.bits_per_symbol];
        self.extrinsic_llrs_into(q_e, &mut out)?;
        Ok(out)
    }

    /// Mean and total variance `E|u − μ|²` of a pmf over this alphabet.
    pub fn pmf_moments(&self, p: &SymbolPmf) -> GaussianScalar {
        moments(&self.points, &p.probs)
    }

    pub fn uniform_pmf(&self) -> SymbolPmf {
        SymbolPmf::uniform(self.order())
    }
}

pub(crate) fn moments(points: &[C64], weights: &[f64]) -> GaussianScalar {
    let mean: C64 = points.iter().zip(weights).map(|(p, &w)| p * w).sum();
    let variance = points
        .iter()
        .zip(weights)
        .map(|(p, &w)| w * (p - mean).norm_sqr())
        .sum::<f64>();
    GaussianScalar::new(mean, variance)
}

/// Replaces log-weights by normalized probabilities.
pub(crate) fn normalize_log_weights(logw: &mut [f64]) -> bool {
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return false;
    }
    let mut sum = 0.0;
    for w in logw.iter_mut() {
        *w = (*w - max).exp();
        sum += *w;
    }
    for w in logw.iter_mut() {
        *w /= sum;
    }
    true
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Streaming log-sum-exp.
#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    #[inline]
    fn push(&mut self, x: f64) {
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

fn square_qam(m: usize) -> (Vec<C64>, Vec<u32>) {
    let side = (m as f64).sqrt() as u32;
    let half = m.trailing_zeros() / 2;
    let level = |i: u32| f64::from(side - 1) - 2.0 * f64::from(i);
    let mut points = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..side {
        for q in 0..side {
            points.push(C64::new(level(i), level(q)));
            labels.push((gray(i) << half) | gray(q));
        }
    }
    (points, labels)
}

fn cross_qam_128() -> (Vec<C64>, Vec<u32>) {
    let mut points = Vec::with_capacity(128);
    let mut labels = Vec::with_capacity(128);
    for i in 0..16u32 {
        for q in 0..8u32 {
            let re = 15.0 - 2.0 * f64::from(i);
            let im = 7.0 - 2.0 * f64::from(q);
            labels.push((gray(i) << 3) | gray(q));
            let (a, b) = (re.abs(), im.abs());
            if a <= 11.0 {
                points.push(C64::new(re, im));
                continue;
            }
            // Fold |I| ∈ {13, 15} into the strips |Q| ∈ {9, 11}; this slot
            // assignment keeps every neighbor pair within two label bits.
            let new_im: f64 = if b == 5.0 || b == 7.0 { 9.0 } else { 11.0 };
            let new_re: f64 = match (a as u32, b as u32) {
                (15, 5) | (15, 3) => 1.0,
                (13, 5) | (13, 3) => 3.0,
                (13, 7) | (13, 1) => 5.0,
                _ => 7.0,
            };
            points.push(C64::new(new_re.copysign(re), new_im.copysign(im)));
        }
    }
    (points, labels)
}

/// A probability mass function over the points of a constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPmf {
    probs: Vec<f64>,
}

impl SymbolPmf {
    /// Validates nonnegativity and unit sum (1e-12).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain("pmf entries must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("pmf sums to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            probs: vec![1.0 / m as f64; m],
        }
    }

    /// All mass on point `m` of an `order`-point alphabet.
    pub fn point_mass(order: usize, m: usize) -> Self {
        let mut probs = vec![0.0; order];
        probs[m] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bpsk() -> Constellation {
        Constellation::qam(2).unwrap()
    }

    #[test]
    fn modulate_bpsk() {
        let s = bpsk().modulate(&[0, 1]).unwrap();
        assert_eq!(s, vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
    }

    #[test]
    fn modulate_qpsk_canonical_label() {
        let c = Constellation::qam(4).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // enumerate all four labels of the per-axis Gray map
        let expect = [
            ([0, 0], C64::new(r, r)),
            ([0, 1], C64::new(r, -r)),
            ([1, 0], C64::new(-r, r)),
            ([1, 1], C64::new(-r, -r)),
        ];
        for (bits, p) in expect {
            let s = c.modulate(&bits).unwrap();
            assert!((s[0] - p).norm() < 1e-15, "{bits:?}");
        }
        let s = c.modulate(&[0, 0, 0, 0]).unwrap();
        assert_eq!(s[0], s[1]);
    }

    #[test]
    fn modulate_rejects_partial_block() {
        let c = Constellation::qam(16).unwrap();
        assert!(matches!(c.modulate(&[0, 1, 0]), Err(Error::Shape(_))));
    }

    #[test]
    fn invariants_for_all_orders() {
        for m in [2, 4, 16, 64, 128, 256] {
            let c = Constellation::qam(m).unwrap();
            assert_eq!(c.order(), m);
            assert!((c.mean_energy() - 1.0).abs() < 1e-12);
            let mut l = c.labels().to_vec();
            l.sort_unstable();
            l.dedup();
            assert_eq!(l.len(), m);
            // distinct points
            for a in 0..m {
                for b in a + 1..m {
                    assert!((c.points()[a] - c.points()[b]).norm() > 1e-6);
                }
            }
        }
    }

    fn neighbor_label_distances(c: &Constellation) -> Vec<u32> {
        let min_d = c
            .points()
            .iter()
            .enumerate()
            .flat_map(|(a, pa)| c.points()[a + 1..].iter().map(move |pb| (pa - pb).norm()))
            .fold(f64::INFINITY, f64::min);
        let mut out = Vec::new();
        for a in 0..c.order() {
            for b in a + 1..c.order() {
                if ((c.points()[a] - c.points()[b]).norm() - min_d).abs() < 1e-9 {
                    out.push((c.labels()[a] ^ c.labels()[b]).count_ones());
                }
            }
        }
        out
    }

    #[test]
    fn gray_property_square() {
        for m in [4, 16, 64, 256] {
            let c = Constellation::qam(m).unwrap();
            let d = neighbor_label_distances(&c);
            assert!(!d.is_empty());
            assert!(d.iter().all(|&x| x == 1), "M={m}");
        }
    }

    #[test]
    fn cross_128_is_quasi_gray() {
        let c = Constellation::qam(128).unwrap();
        let d = neighbor_label_distances(&c);
        // 12x12 grid has 264 neighbor pairs; each removed 2x2 corner takes 8
        assert_eq!(d.len(), 264 - 4 * 8);
        assert!(d.iter().all(|&x| x <= 2));
        assert!(d.iter().filter(|&&x| x == 2).count() > 0);
    }

    #[test]
    fn prior_from_llrs() {
        for m in [2, 4, 16, 64, 128] {
            let c = Constellation::qam(m).unwrap();
            let p = c.prior_pmf_from_llrs(&vec![0.0; c.bits_per_symbol()]).unwrap();
            assert!(p.probs().iter().all(|&x| (x - 1.0 / m as f64).abs() < 1e-15));
        }
        let p0 = 1.0 / (1.0 + (-5.0f64).exp());
        let p = bpsk().prior_pmf_from_llrs(&[5.0]).unwrap();
        assert!((p.probs()[0] - p0).abs() < 1e-15);
        assert!((p.probs()[0] - 0.9933).abs() < 1e-4);
        let q = Constellation::qam(4).unwrap();
        let p = q.prior_pmf_from_llrs(&[5.0, 5.0]).unwrap();
        let m00 = q.labels().iter().position(|&l| l == 0).unwrap();
        assert!((p.probs()[m00] - p0 * p0).abs() < 1e-15);
    }

    #[test]
    fn extrinsic_llr_closed_forms() {
        let c = bpsk();
        let l = c.extrinsic_llrs(GaussianScalar::new(C64::new(0.0, 0.0), 1.0)).unwrap();
        assert_eq!(l[0], 0.0);
        let l = c.extrinsic_llrs(GaussianScalar::new(C64::new(1.0, 0.0), 1.0)).unwrap();
        assert!((l[0] - 4.0).abs() < 1e-13);
        let q = Constellation::qam(4).unwrap();
        let l = q.extrinsic_llrs(GaussianScalar::new(q.points()[1], 1e9)).unwrap();
        assert!(l.iter().all(|x| x.abs() < 1e-8));
        assert!(c.extrinsic_llrs(GaussianScalar::new(C64::new(0.0, 0.0), 0.0)).is_err());
    }

    #[test]
    fn extrinsic_llr_reflection_antisymmetry() {
        for m in [4, 16] {
            let c = Constellation::qam(m).unwrap();
            let q = c.bits_per_symbol();
            for &(re, im, var) in &[(0.3, -0.2, 0.5), (0.9, 0.1, 0.05), (-0.4, 0.7, 2.0)] {
                let mu = C64::new(re, im);
                let base = c.extrinsic_llrs(GaussianScalar::new(mu, var)).unwrap();
                let flip_i = c.extrinsic_llrs(GaussianScalar::new(C64::new(-re, im), var)).unwrap();
                let flip_q = c.extrinsic_llrs(GaussianScalar::new(C64::new(re, -im), var)).unwrap();
                for j in 0..q {
                    let (si, sq) = if j == 0 {
                        (-1.0, 1.0)
                    } else if j == q / 2 {
                        (1.0, -1.0)
                    } else {
                        (1.0, 1.0)
                    };
                    assert!((flip_i[j] - si * base[j]).abs() < 1e-12, "M={m} j={j}");
                    assert!((flip_q[j] - sq * base[j]).abs() < 1e-12, "M={m} j={j}");
                }
            }
        }
    }

    #[test]
    fn moments_of_pmfs() {
        let g = bpsk().pmf_moments(&SymbolPmf::uniform(2));
        assert!(g.mean.norm() < 1e-15 && (g.variance - 1.0).abs() < 1e-15);
        let q = Constellation::qam(4).unwrap();
        let g = q.pmf_moments(&SymbolPmf::point_mass(4, 2));
        assert_eq!(g.mean, q.points()[2]);
        assert_eq!(g.variance, 0.0);
        for m in [4, 16, 64, 256] {
            let c = Constellation::qam(m).unwrap();
            let g = c.pmf_moments(&c.uniform_pmf());
            assert!(g.mean.norm() < 1e-12);
            assert!((g.variance - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pmf_validation() {
        assert!(SymbolPmf::new(vec![0.5, 0.5]).is_ok());
        assert!(SymbolPmf::new(vec![0.6, 0.5]).is_err());
        assert!(SymbolPmf::new(vec![1.5, -0.5]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn noiseless_round_trip(order_idx in 0usize..5, seed in any::<u64>()) {
                let m = [2, 4, 16, 64, 128][order_idx];
                let c = Constellation::qam(m).unwrap();
                let n = 7 * c.bits_per_symbol();
                let bits: Vec<u8> = (0..n).map(|i| ((seed >> (i % 64)) & 1) as u8 ^ (i as u8 & 1)).collect();
                let s = c.modulate(&bits).unwrap();
                prop_assert_eq!(c.hard_demap(&s), bits);
            }

            #[test]
            fn prior_is_a_pmf(llrs in proptest::collection::vec(-30.0f64..30.0, 6)) {
                let c = Constellation::qam(64).unwrap();
                let p = c.prior_pmf_from_llrs(&llrs).unwrap();
                prop_assert!(SymbolPmf::new(p.probs().to_vec()).is_ok());
            }
        }
    }
}
