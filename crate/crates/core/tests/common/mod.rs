//! Test-only oracles, independent of the library's solution paths.
#![allow(dead_code)]

use ep_turbo::channel::ChannelRealization;
use ep_turbo::ep::GaussianScalar;
use ep_turbo::rng::SimRng;
use ep_turbo::C64;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Dense `(N+L−1)×N` convolution matrix.
pub fn dense_h(taps: &[C64], n: usize) -> DMatrix<C64> {
    let l = taps.len();
    let mut h = DMatrix::from_element(n + l - 1, n, C64::new(0.0, 0.0));
    for k in 0..n {
        for (a, &t) in taps.iter().enumerate() {
            h[(k + a, k)] = t;
        }
    }
    h
}

/// Posterior and extrinsic moments by dense inversion, using only the
/// observation rows `rows` (all rows for the block oracle).
pub fn dense_marginal(
    taps: &[C64],
    sigma2: f64,
    factors: &[GaussianScalar],
    y: &[C64],
    k: usize,
    rows: std::ops::Range<usize>,
) -> (GaussianScalar, GaussianScalar) {
    let n = factors.len();
    let h_full = dense_h(taps, n);
    let w = rows.len();
    let h = h_full.rows(rows.start, w).into_owned();
    let sigma_t = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        factors.iter().map(|f| C64::new(f.variance, 0.0)),
    ));
    let mu_t = DVector::from_iterator(n, factors.iter().map(|f| f.mean));
    let c = DMatrix::<C64>::identity(w, w) * C64::new(sigma2, 0.0) + &h * sigma_t * h.adjoint();
    let cinv = c.try_inverse().expect("C invertible");
    let yw = DVector::from_iterator(w, y[rows.clone()].iter().copied());
    let resid = yw - &h * mu_t;
    let hk = h.column(k).into_owned();
    let t = factors[k];
    let quad = (hk.adjoint() * &cinv * &hk)[(0, 0)].re;
    let lin = (hk.adjoint() * &cinv * resid)[(0, 0)];
    let post_mean = t.mean + lin * t.variance;
    let post_var = t.variance - t.variance * t.variance * quad;
    // extrinsic by the quotient formulas
    let d = t.variance - post_var;
    let ext_mean = (post_mean * t.variance - t.mean * post_var) / d;
    let ext_var = post_var * t.variance / d;
    (
        GaussianScalar::new(post_mean, post_var),
        GaussianScalar::new(ext_mean, ext_var),
    )
}

/// Window rows for symbol `k` under the windowed backend's convention.
pub fn window_rows(k: usize, w: usize, offset: usize, total: usize) -> std::ops::Range<usize> {
    let start = k as isize - offset as isize;
    start.max(0) as usize..((start + w as isize).min(total as isize)) as usize
}

pub fn rel_err(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// A random equalization instance: normalized complex taps, random factors
/// around QAM-like means, observations drawn from the model.
pub struct Instance {
    pub channel: ChannelRealization,
    pub factors: Vec<GaussianScalar>,
    pub y: Vec<C64>,
}

pub fn random_instance(rng: &mut SimRng, n: usize, l: usize) -> Instance {
    let taps = ep_turbo::channel::random_taps(l, Default::default(), rng).unwrap();
    let sigma2 = rng.random_range(0.01..1.0);
    let channel = ChannelRealization::new(taps, sigma2).unwrap();
    let factors: Vec<GaussianScalar> = (0..n)
        .map(|_| {
            GaussianScalar::new(
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                rng.random_range(0.05..1.5),
            )
        })
        .collect();
    let u: Vec<C64> = factors
        .iter()
        .map(|f| f.mean + C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
        .collect();
    let y = channel.transmit(&u, rng).unwrap();
    Instance { channel, factors, y }
}

/// Exact symbol-wise MAP decisions for a 2-point alphabet {+1, −1} with
/// uniform priors, by enumerating all 2^N sequences.
pub fn brute_force_map(taps: &[C64], sigma2: f64, y: &[C64], n: usize) -> Vec<f64> {
    let mut logp = Vec::with_capacity(1 << n);
    for seq in 0..(1u32 << n) {
        let u: Vec<C64> = (0..n)
            .map(|k| C64::new(if seq >> k & 1 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        let mut d = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for (a, &t) in taps.iter().enumerate() {
                if i >= a && i - a < n {
                    s += t * u[i - a];
                }
            }
            d += (yi - s).norm_sqr();
        }
        logp.push(-d / sigma2);
    }
    let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.iter().map(|x| (x - max).exp()).collect();
    (0..n)
        .map(|k| {
            let (mut plus, mut total) = (0.0, 0.0);
            for (seq, &wi) in w.iter().enumerate() {
                total += wi;
                if seq >> k & 1 == 0 {
                    plus += wi;
                }
            }
            if plus >= total - plus { 1.0 } else { -1.0 }
        })
        .collect()
}
