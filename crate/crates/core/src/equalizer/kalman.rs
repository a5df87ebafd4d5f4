//! Fixed-interval Kalman smoothing over the channel's shift register.
//!
//! State at observation time `k` is `x_k = [u_k, u_{k−1}, …, u_{k−L+1}]`, with
//! symbols outside `0..N` fixed at zero. The transition shifts the register
//! and injects `u_{k+1} ~ CN(μ_t, σ_t²)`; the observation is
//! `y_k = Σ_a h_a x_k[a] + w_k`.
//!
//! The backward pass is Rauch–Tung–Striebel specialized to the shift: the
//! first `L − 1` entries of `x_k` reappear in `x_{k+1}`, so the smoother gain
//! only inverts the filtered covariance of those entries, and only of the
//! ones that are real symbols (padding has exactly zero variance).

use super::{EqualizerInput, MarginalSet};
use crate::ep::GaussianScalar;
use crate::linalg::BandedHermitian;
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Row-major `d×d` complex matrix.
#[derive(Clone)]
struct Mat {
    d: usize,
    v: Vec<C64>,
}

impl Mat {
    fn zeros(d: usize) -> Self {
        Self { d, v: vec![ZERO; d * d] }
    }
    #[inline]
    fn at(&self, i: usize, j: usize) -> C64 {
        self.v[i * self.d + j]
    }
    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        &mut self.v[i * self.d + j]
    }
}

pub fn kalman_smoother_marginals(input: &EqualizerInput<'_>) -> Result<MarginalSet> {
    let taps = input.channel().taps();
    let l = taps.len();
    let n = input.frame_length();
    let factors = input.factors();
    let y = input.observations();
    let steps = y.len();
    let sigma2 = input.channel().noise_variance();

    let mut filt_m: Vec<Vec<C64>> = Vec::with_capacity(steps);
    let mut filt_p: Vec<Mat> = Vec::with_capacity(steps);

    let mut m = vec![ZERO; l];
    let mut p = Mat::zeros(l);
    let mut ph = vec![ZERO; l];
    for k in 0..steps {
        // predict: shift and inject
        let mut mp = vec![ZERO; l];
        let mut pp = Mat::zeros(l);
        if k < n {
            mp[0] = factors[k].mean;
            *pp.at_mut(0, 0) = C64::new(factors[k].variance, 0.0);
        }
        for i in 1..l {
            mp[i] = m[i - 1];
            for j in 1..l {
                *pp.at_mut(i, j) = p.at(i - 1, j - 1);
            }
        }
        // update with y_k
        let mut s = sigma2;
        let mut pred = ZERO;
        for a in 0..l {
            ph[a] = (0..l).map(|b| pp.at(a, b) * taps[b].conj()).sum();
            pred += taps[a] * mp[a];
        }
        for a in 0..l {
            s += (taps[a] * ph[a]).re;
        }
        let innov = (y[k] - pred) / s;
        for a in 0..l {
            mp[a] += ph[a] * innov;
            for b in 0..l {
                *pp.at_mut(a, b) -= ph[a] * ph[b].conj() / s;
            }
        }
        m = mp;
        p = pp;
        filt_m.push(m.clone());
        filt_p.push(p.clone());
    }

    let mut posteriors = vec![GaussianScalar::real(0.0, 0.0); n];
    let mut sm = filt_m[steps - 1].clone();
    let mut sp = filt_p[steps - 1].clone();
    if steps - 1 < n {
        posteriors[steps - 1] = GaussianScalar::new(sm[0], sp.at(0, 0).re);
    }
    for k in (0..steps - 1).rev() {
        let (fm, fp) = (&filt_m[k], &filt_p[k]);
        // entries of x_k carried into x_{k+1} that are real symbols
        let act: Vec<usize> = (0..l - 1).filter(|&i| k >= i && k - i < n).collect();
        let mut new_m = fm.clone();
        let mut new_p = fp.clone();
        if !act.is_empty() {
            let na = act.len();
            let mut paa = BandedHermitian::zeros(na, na - 1);
            for (r, &i) in act.iter().enumerate() {
                for (c, &j) in act.iter().enumerate().take(r + 1) {
                    paa.set_lower(r, c, fp.at(i, j));
                }
            }
            let ldl = paa.factor().map_err(|_| Error::NotPositiveDefinite { pivot: k })?;
            // gain G = P[:, act] P_aa⁻¹, built row by row from P_aa⁻¹ P[act, :]
            let mut gain = vec![vec![ZERO; na]; l];
            for row in 0..l {
                let rhs: Vec<C64> = act.iter().map(|&i| fp.at(i, row)).collect();
                let sol = ldl.solve(&rhs);
                for c in 0..na {
                    gain[row][c] = sol[c].conj();
                }
            }
            let dm: Vec<C64> = act.iter().map(|&i| sm[i + 1] - fm[i]).collect();
            let mut dp = vec![vec![ZERO; na]; na];
            for (r, &i) in act.iter().enumerate() {
                for (c, &j) in act.iter().enumerate() {
                    dp[r][c] = sp.at(i + 1, j + 1) - fp.at(i, j);
                }
            }
            for a in 0..l {
                new_m[a] += (0..na).map(|c| gain[a][c] * dm[c]).sum::<C64>();
            }
            // P_s = P + G ΔP Gᴴ
            let gdp: Vec<Vec<C64>> = (0..l)
                .map(|a| (0..na).map(|c| (0..na).map(|r| gain[a][r] * dp[r][c]).sum()).collect())
                .collect();
            for a in 0..l {
                for b in 0..l {
                    *new_p.at_mut(a, b) += (0..na).map(|c| gdp[a][c] * gain[b][c].conj()).sum::<C64>();
                }
            }
        }
        sm = new_m;
        sp = new_p;
        if k < n {
            posteriors[k] = GaussianScalar::new(sm[0], sp.at(0, 0).re);
        }
    }

    let mut extrinsics = Vec::with_capacity(n);
    for (k, (post, &t)) in posteriors.iter().zip(factors).enumerate() {
        let ext = match post.divide(t) {
            Ok(e) if e.variance > 0.0 && e.variance.is_finite() && post.variance > 0.0 => e,
            _ => {
                return Err(Error::Domain(format!(
                    "symbol {k}: smoothed variance {} against factor variance {}",
                    post.variance, t.variance
                )))
            }
        };
        extrinsics.push(ext);
    }
    Ok(MarginalSet {
        posteriors,
        extrinsics,
    })
}
