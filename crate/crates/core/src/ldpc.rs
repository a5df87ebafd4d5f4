//! (3,6)-regular LDPC codes: progressive-edge-growth construction, systematic
//! encoding through a dense GF(2) parity generator, and flooding sum-product
//! decoding with the tanh rule.
//!
//! LLRs are `log P(b = 0) / P(b = 1)` throughout.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::rng::{derive_seed, SimRng};
use crate::{Error, Result};
use rand::SeedableRng;

const VAR_DEGREE: usize = 3;
const CHECK_DEGREE: usize = 6;
const MAX_ATTEMPTS: usize = 64;
/// Bound on `|tanh|` before `atanh`, keeps check messages finite (≈ ±38).
const TANH_GUARD: f64 = 1.0 - 1e-16;

/// A frame of finite log-likelihood ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrFrame {
    llrs: Vec<f64>,
}

impl LlrFrame {
    pub fn new(llrs: Vec<f64>) -> Result<Self> {
        if let Some(i) = llrs.iter().position(|l| !l.is_finite()) {
            return Err(Error::Domain(format!("LLR {i} is {}", llrs[i])));
        }
        Ok(Self { llrs })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.llrs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.llrs
    }

    pub fn len(&self) -> usize {
        self.llrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.llrs.is_empty()
    }

    /// Bit decisions, `1` where the LLR is negative.
    pub fn hard_decisions(&self) -> Vec<u8> {
        self.llrs.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub posterior: LlrFrame,
    pub info_bits: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
}

/// Dense GF(2) row.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BitRow(Vec<u64>);

impl BitRow {
    fn zeros(len: usize) -> Self {
        Self(vec![0; len.div_ceil(64)])
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn xor_assign(&mut self, other: &BitRow) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }
    fn dot(&self, other: &BitRow) -> u8 {
        let ones: u32 = self.0.iter().zip(&other.0).map(|(a, b)| (a & b).count_ones()).sum();
        (ones & 1) as u8
    }
}

/// A binary linear code given by a sparse parity-check matrix, with codeword
/// positions ordered so the information bits come first.
#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCode {
    n: usize,
    /// Variable indices of each check.
    checks: Vec<Vec<usize>>,
    /// Check indices of each variable.
    vars: Vec<Vec<usize>>,
    /// Row `i` gives parity bit `k + i` as a GF(2) combination of the info bits.
    parity_rows: Vec<BitRow>,
}

impl LdpcCode {
    /// Builds a (3,6)-regular code of length `n` by progressive edge growth.
    ///
    /// Attempts whose graph cannot be completed, whose parity rows are
    /// dependent, or (for `n ≥ 96`) that contain a 4-cycle are retried with
    /// seeds derived from `seed`.
    pub fn build(n: usize, seed: u64) -> Result<Self> {
        if n < 24 || n % 2 != 0 {
            return Err(Error::Config(format!("code length {n} must be even and at least 24")));
        }
        let m = n / 2;
        let mut last = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            let mut rng = SimRng::seed_from_u64(derive_seed(seed, &[attempt as u64]));
            let Some(checks) = peg_graph(n, m, &mut rng) else {
                last = "edge growth ran out of admissible checks".into();
                continue;
            };
            if n >= 96 && has_four_cycle(n, &checks) {
                last = "graph contains a 4-cycle".into();
                continue;
            }
            let code = Self::from_checks(n, checks)?;
            if code.info_len() != n - m {
                last = format!("parity rows have rank {}", n - code.info_len());
                continue;
            }
            return Ok(code);
        }
        Err(Error::Construction {
            attempts: MAX_ATTEMPTS,
            reason: last,
        })
    }

    /// Code from an arbitrary parity-check matrix given as the variable indices
    /// of each check. Columns are reordered, if needed, so that a set of
    /// independent columns (the parity positions) comes last.
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self> {
        for (i, row) in checks.iter().enumerate() {
            if let Some(&v) = row.iter().find(|&&v| v >= n) {
                return Err(Error::IndexOutOfRange { index: v, len: n });
            }
            let mut sorted = row.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != row.len() {
                return Err(Error::Shape(format!("check {i} lists a variable twice")));
            }
        }
        let m = checks.len();
        let mut dense: Vec<BitRow> = checks
            .iter()
            .map(|row| {
                let mut r = BitRow::zeros(n);
                row.iter().for_each(|&v| r.set(v));
                r
            })
            .collect();

        // Gauss-Jordan, scanning columns right to left.
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in (0..n).rev() {
            if rank == m {
                break;
            }
            let Some(p) = (rank..m).find(|&r| dense[r].get(col)) else {
                continue;
            };
            dense.swap(rank, p);
            let pivot = dense[rank].clone();
            for (r, row) in dense.iter_mut().enumerate() {
                if r != rank && row.get(col) {
                    row.xor_assign(&pivot);
                }
            }
            pivots.push(col);
            rank += 1;
        }
        // parity positions in increasing column order
        let mut order: Vec<(usize, usize)> = pivots.iter().enumerate().map(|(r, &c)| (c, r)).collect();
        order.sort_unstable();

        let is_pivot = {
            let mut v = vec![false; n];
            pivots.iter().for_each(|&c| v[c] = true);
            v
        };
        let info_cols: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let k = info_cols.len();
        // new position of each old column
        let mut perm = vec![0; n];
        for (new, &old) in info_cols.iter().enumerate() {
            perm[old] = new;
        }
        for (i, &(old, _)) in order.iter().enumerate() {
            perm[old] = k + i;
        }

        let parity_rows = order
            .iter()
            .map(|&(_, r)| {
                let mut row = BitRow::zeros(k);
                for (j, &c) in info_cols.iter().enumerate() {
                    if dense[r].get(c) {
                        row.set(j);
                    }
                }
                row
            })
            .collect();

        let checks: Vec<Vec<usize>> = checks
            .into_iter()
            .map(|row| {
                let mut r: Vec<usize> = row.into_iter().map(|v| perm[v]).collect();
                r.sort_unstable();
                r
            })
            .collect();
        let mut vars = vec![Vec::new(); n];
        for (c, row) in checks.iter().enumerate() {
            row.iter().for_each(|&v| vars[v].push(c));
        }
        Ok(Self {
            n,
            checks,
            vars,
            parity_rows,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn info_len(&self) -> usize {
        self.n - self.parity_rows.len()
    }

    pub fn rate(&self) -> f64 {
        self.info_len() as f64 / self.n as f64
    }

    /// Variable indices of each parity check.
    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    /// Check indices of each codeword position.
    pub fn variable_checks(&self) -> &[Vec<usize>] {
        &self.vars
    }

    /// `H c` over GF(2).
    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        self.checks
            .iter()
            .map(|row| row.iter().fold(0, |acc, &v| acc ^ (bits[v] & 1)))
            .collect()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.n && self.syndrome(bits).iter().all(|&s| s == 0)
    }

    /// Systematic encoding: the info bits followed by the parity bits.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        let k = self.info_len();
        if info.len() != k {
            return Err(Error::Shape(format!("{} info bits for a code with {k}", info.len())));
        }
        let mut s = BitRow::zeros(k);
        for (j, &b) in info.iter().enumerate() {
            if b > 1 {
                return Err(Error::Domain(format!("info bit {j} is {b}")));
            }
            if b == 1 {
                s.set(j);
            }
        }
        let mut out = info.to_vec();
        out.extend(self.parity_rows.iter().map(|row| row.dot(&s)));
        Ok(out)
    }

    /// Flooding sum-product decoding for at most `max_iters` iterations,
    /// stopping as soon as the hard decisions satisfy every check.
    ///
    /// A posterior LLR of exactly zero is an undecided bit, and the frame
    /// counts as converged only if there are none.
    pub fn decode(&self, channel: &LlrFrame, max_iters: usize) -> Result<DecodeOutput> {
        let llr = channel.as_slice();
        if llr.len() != self.n {
            return Err(Error::Shape(format!("{} LLRs for a length-{} code", llr.len(), self.n)));
        }
        // edges grouped by check
        let mut start = Vec::with_capacity(self.checks.len() + 1);
        let mut edge_var = Vec::new();
        start.push(0);
        for row in &self.checks {
            edge_var.extend_from_slice(row);
            start.push(edge_var.len());
        }
        let e = edge_var.len();
        let mut v2c: Vec<f64> = edge_var.iter().map(|&v| llr[v]).collect();
        let mut c2v = vec![0.0; e];
        let mut post = llr.to_vec();
        let mut tanhs = Vec::new();
        let mut suffix = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        let mut hard = vec![0u8; self.n];

        for _ in 0..max_iters {
            iterations += 1;
            for c in 0..self.checks.len() {
                let (a, b) = (start[c], start[c + 1]);
                tanhs.clear();
                tanhs.extend(v2c[a..b].iter().map(|&x| (0.5 * x).tanh()));
                // exclude-one products by prefix/suffix scans
                suffix.clear();
                suffix.resize(tanhs.len() + 1, 1.0);
                for i in (0..tanhs.len()).rev() {
                    suffix[i] = suffix[i + 1] * tanhs[i];
                }
                let mut prefix = 1.0;
                for i in 0..tanhs.len() {
                    let p = (prefix * suffix[i + 1]).clamp(-TANH_GUARD, TANH_GUARD);
                    // std's atanh is not exactly odd; keep the decoder sign-symmetric
                    c2v[a + i] = 2.0 * p.abs().atanh().copysign(p);
                    prefix *= tanhs[i];
                }
            }
            post.copy_from_slice(llr);
            for (ei, &v) in edge_var.iter().enumerate() {
                post[v] += c2v[ei];
            }
            for (ei, &v) in edge_var.iter().enumerate() {
                v2c[ei] = post[v] - c2v[ei];
            }
            for (h, &p) in hard.iter_mut().zip(&post) {
                *h = u8::from(p < 0.0);
            }
            if post.iter().all(|&p| p != 0.0) && self.syndrome(&hard).iter().all(|&s| s == 0) {
                converged = true;
                break;
            }
        }
        if iterations == 0 {
            for (h, &p) in hard.iter_mut().zip(&post) {
                *h = u8::from(p < 0.0);
            }
        }
        Ok(DecodeOutput {
            posterior: LlrFrame { llrs: post },
            info_bits: hard[..self.info_len()].to_vec(),
            converged,
            iterations,
        })
    }

    /// The parity-check matrix in alist format.
    pub fn to_alist(&self) -> String {
        let m = self.checks.len();
        let col_max = self.vars.iter().map(Vec::len).max().unwrap_or(0);
        let row_max = self.checks.iter().map(Vec::len).max().unwrap_or(0);
        let mut s = String::new();
        let join = |it: &mut dyn Iterator<Item = usize>| it.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "{} {}", self.n, m);
        let _ = writeln!(s, "{col_max} {row_max}");
        let _ = writeln!(s, "{}", join(&mut self.vars.iter().map(Vec::len)));
        let _ = writeln!(s, "{}", join(&mut self.checks.iter().map(Vec::len)));
        for (adj, width) in self.vars.iter().map(|a| (a, col_max)).chain(self.checks.iter().map(|a| (a, row_max))) {
            let mut entries: Vec<usize> = adj.iter().map(|&x| x + 1).collect();
            entries.resize(width, 0);
            let _ = writeln!(s, "{}", join(&mut entries.into_iter()));
        }
        s
    }

    /// Reads an alist file. Zero entries are padding.
    pub fn from_alist(text: &str) -> Result<Self> {
        let mut nums = text.split_whitespace().map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("alist token {t:?} is not a non-negative integer")))
        });
        let mut next = || nums.next().unwrap_or_else(|| Err(Error::Parse("alist ended early".into())));
        let (n, m) = (next()?, next()?);
        let (col_max, row_max) = (next()?, next()?);
        let col_deg = (0..n).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let row_deg = (0..m).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let mut col_lists = Vec::with_capacity(n);
        for &d in &col_deg {
            let entries = (0..col_max).map(|_| next()).collect::<Result<Vec<_>>>()?;
            col_lists.push(entries.into_iter().filter(|&x| x != 0).collect::<Vec<_>>());
            if col_lists.last().map(Vec::len) != Some(d) {
                return Err(Error::Parse(format!("column {} lists the wrong number of checks", col_lists.len() - 1)));
            }
        }
        let mut checks = Vec::with_capacity(m);
        for &d in &row_deg {
            let entries = (0..row_max).map(|_| next()).collect::<Result<Vec<_>>>()?;
            let row: Vec<usize> = entries.into_iter().filter(|&x| x != 0).map(|x| x - 1).collect();
            if row.len() != d {
                return Err(Error::Parse(format!("row {} lists the wrong number of variables", checks.len())));
            }
            checks.push(row);
        }
        // the column section must describe the same matrix
        for (v, list) in col_lists.iter().enumerate() {
            for &c in list {
                if c == 0 || c > m || !checks[c - 1].contains(&v) {
                    return Err(Error::Parse(format!("column {v} and row lists disagree")));
                }
            }
        }
        Self::from_checks(n, checks)
    }

    pub fn write_alist(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_alist())?;
        Ok(())
    }

    pub fn read_alist(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_alist(&std::fs::read_to_string(path)?)
    }
}

/// Progressive edge growth with check degrees capped at six. Each new edge of
/// a variable goes to the least-loaded check among those farthest from it in
/// the current graph. `None` if some variable has no admissible check left.
fn peg_graph(n: usize, m: usize, rng: &mut SimRng) -> Option<Vec<Vec<usize>>> {
    let mut checks: Vec<Vec<usize>> = vec![Vec::with_capacity(CHECK_DEGREE); m];
    let mut vars: Vec<Vec<usize>> = vec![Vec::with_capacity(VAR_DEGREE); n];
    let mut reached = vec![false; m];
    let mut seen_var = vec![false; n];

    for v in 0..n {
        for _ in 0..VAR_DEGREE {
            reached.iter_mut().for_each(|r| *r = false);
            vars[v].iter().for_each(|&c| reached[c] = true);
            let mut cand: Vec<usize> = (0..m).filter(|&c| !reached[c] && checks[c].len() < CHECK_DEGREE).collect();
            if cand.is_empty() {
                return None;
            }
            if !vars[v].is_empty() {
                seen_var.iter_mut().for_each(|s| *s = false);
                seen_var[v] = true;
                let mut frontier = vars[v].clone();
                loop {
                    let mut next = Vec::new();
                    for &c in &frontier {
                        for &u in &checks[c] {
                            if seen_var[u] {
                                continue;
                            }
                            seen_var[u] = true;
                            for &c2 in &vars[u] {
                                if !reached[c2] {
                                    reached[c2] = true;
                                    next.push(c2);
                                }
                            }
                        }
                    }
                    if next.is_empty() {
                        break;
                    }
                    let remaining: Vec<usize> = cand.iter().copied().filter(|&c| !reached[c]).collect();
                    if remaining.is_empty() {
                        break;
                    }
                    cand = remaining;
                    frontier = next;
                }
            }
            let min_deg = cand.iter().map(|&c| checks[c].len()).min()?;
            let lightest: Vec<usize> = cand.into_iter().filter(|&c| checks[c].len() == min_deg).collect();
            let &c = lightest.choose(rng)?;
            checks[c].push(v);
            vars[v].push(c);
        }
    }
    checks.iter().all(|r| r.len() == CHECK_DEGREE).then_some(checks)
}

/// Two variables sharing two checks.
fn has_four_cycle(n: usize, checks: &[Vec<usize>]) -> bool {
    let mut vars = vec![Vec::new(); n];
    for (c, row) in checks.iter().enumerate() {
        row.iter().for_each(|&v| vars[v].push(c));
    }
    let mut mark = vec![usize::MAX; n];
    for v in 0..n {
        for &c in &vars[v] {
            for &u in &checks[c] {
                if u == v {
                    continue;
                }
                if mark[u] == v {
                    return true;
                }
                mark[u] = v;
            }
        }
    }
    false
}

/// Uniformly random info bits.
pub fn random_bits<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<u8> {
    (0..len).map(|_| rng.random_range(0..2u8)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(code: &LdpcCode) -> (Vec<usize>, Vec<usize>) {
        (
            code.variable_checks().iter().map(Vec::len).collect(),
            code.checks().iter().map(Vec::len).collect(),
        )
    }

    #[test]
    fn small_code_is_regular() {
        let code = LdpcCode::build(24, 3).unwrap();
        let (cols, rows) = weights(&code);
        assert!(cols.iter().all(|&w| w == 3));
        assert!(rows.iter().all(|&w| w == 6));
        assert_eq!(rows.len(), 12);
    }

    #[test]
    fn full_length_code_has_rate_half() {
        let code = LdpcCode::build(4096, 1).unwrap();
        assert_eq!(code.info_len(), 2048);
        let (cols, rows) = weights(&code);
        assert!(cols.iter().all(|&w| w == 3) && rows.iter().all(|&w| w == 6));
    }

    #[test]
    fn build_is_deterministic() {
        assert_eq!(LdpcCode::build(96, 5).unwrap(), LdpcCode::build(96, 5).unwrap());
        assert!(LdpcCode::build(23, 0).is_err());
        assert!(LdpcCode::build(22, 0).is_err());
    }

    #[test]
    fn zero_info_encodes_to_zero() {
        let code = LdpcCode::build(48, 2).unwrap();
        let c = code.encode(&vec![0; code.info_len()]).unwrap();
        assert!(c.iter().all(|&b| b == 0));
        assert!(code.encode(&[0; 3]).is_err());
    }

    #[test]
    fn confident_frame_converges_in_one_iteration() {
        let code = LdpcCode::build(96, 4).unwrap();
        let out = code.decode(&LlrFrame::new(vec![30.0; 96]).unwrap(), 100).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert!(out.info_bits.iter().all(|&b| b == 0));
    }

    #[test]
    fn zero_llrs_carry_no_information() {
        let code = LdpcCode::build(48, 4).unwrap();
        let out = code.decode(&LlrFrame::new(vec![0.0; 48]).unwrap(), 20).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 20);
        assert!(out.posterior.as_slice().iter().all(|&l| l == 0.0));
    }

    #[test]
    fn llr_frame_rejects_non_finite() {
        assert!(LlrFrame::new(vec![0.0, f64::NAN]).is_err());
        assert!(LlrFrame::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn alist_round_trip() {
        let code = LdpcCode::build(48, 9).unwrap();
        let back = LdpcCode::from_alist(&code.to_alist()).unwrap();
        assert_eq!(back, code);
        assert!(LdpcCode::from_alist("4 2\n2 4\n").is_err());
    }
}
