//! Hermitian banded matrices: `LDLᴴ` factorization, solves, and the band of
//! the inverse (Takahashi's selected inversion), all in `O(n p²)` for
//! half-bandwidth `p`. A dense Hermitian matrix is the case `p = n − 1`.

use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Lower band of a Hermitian matrix: entries `(i, j)` with `i − p ≤ j ≤ i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedHermitian {
    n: usize,
    p: usize,
    data: Vec<C64>,
}

impl BandedHermitian {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            data: vec![ZERO; n * (p + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.p
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.p && i < self.n);
        i * (self.p + 1) + (i - j)
    }

    /// Entry `(i, j)` for any `i, j`; zero outside the band.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        if i >= j {
            if i - j > self.p {
                ZERO
            } else {
                self.data[self.idx(i, j)]
            }
        } else if j - i > self.p {
            ZERO
        } else {
            self.data[self.idx(j, i)].conj()
        }
    }

    /// Sets the lower entry `(i, j)`, `j ≤ i`; the upper mirror is implied.
    #[inline]
    pub fn set_lower(&mut self, i: usize, j: usize, v: C64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn add_lower(&mut self, i: usize, j: usize, v: C64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// `LDLᴴ` factorization. Fails on the first pivot that is not strictly
    /// positive.
    pub fn factor(&self) -> Result<BandedLdl> {
        let (n, p) = (self.n, self.p);
        let mut l = Self::zeros(n, p);
        let mut d = vec![0.0; n];
        // ld[k] = L_ik d_k for the current row
        let mut ld = vec![ZERO; p + 1];
        for i in 0..n {
            let lo = i.saturating_sub(p);
            for j in lo..i {
                let mut acc = self.get(i, j);
                for k in lo.max(j.saturating_sub(p))..j {
                    acc -= ld[k - lo] * l.get(j, k).conj();
                }
                ld[j - lo] = acc;
                l.set_lower(i, j, acc / d[j]);
            }
            let mut di = self.get(i, i).re;
            for j in lo..i {
                di -= (ld[j - lo] * l.get(i, j).conj()).re;
            }
            if !(di > 0.0) || !di.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: i });
            }
            d[i] = di;
            l.set_lower(i, i, C64::new(1.0, 0.0));
        }
        Ok(BandedLdl { l, d })
    }
}

/// Factors of `A = L D Lᴴ`, `L` unit lower banded.
#[derive(Debug, Clone)]
pub struct BandedLdl {
    l: BandedHermitian,
    d: Vec<f64>,
}

impl BandedLdl {
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [C64]) {
        let n = self.d.len();
        let p = self.l.p;
        assert_eq!(x.len(), n);
        for i in 0..n {
            let mut acc = x[i];
            for k in i.saturating_sub(p)..i {
                acc -= self.l.get(i, k) * x[k];
            }
            x[i] = acc;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in i + 1..(i + p + 1).min(n) {
                acc -= self.l.get(k, i).conj() * x[k];
            }
            x[i] = acc;
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// The entries of `A⁻¹` inside the band of `A`.
    pub fn selected_inverse(&self) -> BandedHermitian {
        let n = self.d.len();
        let p = self.l.p;
        let mut z = BandedHermitian::zeros(n, p);
        for i in (0..n).rev() {
            let hi = (i + p).min(n - 1);
            // upper entries Z_ij, j > i, stored as conj in Z_ji
            for j in (i + 1..=hi).rev() {
                let mut acc = ZERO;
                for k in i + 1..=hi {
                    acc -= self.l.get(k, i).conj() * z.get(k, j);
                }
                z.set_lower(j, i, acc.conj());
            }
            let mut zii = C64::new(self.d[i].recip(), 0.0);
            for k in i + 1..=hi {
                zii -= self.l.get(k, i).conj() * z.get(k, i);
            }
            z.set_lower(i, i, C64::new(zii.re, 0.0));
        }
        z
    }
}
