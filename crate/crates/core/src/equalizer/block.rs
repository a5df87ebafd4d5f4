use super::{site_marginals, EqualizerInput, MarginalSet};
use crate::linalg::BandedHermitian;
use crate::Result;

/// `σ_w² I + H Σ_t Hᴴ` restricted to observation rows `[r0, r1)`.
/// Half-bandwidth `L − 1`.
pub(crate) fn observation_covariance(input: &EqualizerInput<'_>, r0: usize, r1: usize) -> BandedHermitian {
    let taps = input.channel().taps();
    let l = taps.len();
    let factors = input.factors();
    let n = factors.len();
    let w = r1 - r0;
    let mut c = BandedHermitian::zeros(w, (l - 1).min(w.saturating_sub(1)));
    let p = c.half_bandwidth();
    let sigma2 = input.channel().noise_variance();
    for i in 0..w {
        let row = r0 + i;
        for j in i.saturating_sub(p)..=i {
            let col = r0 + j;
            // symbols k with taps on both rows: row − k and col − k in [0, L)
            let k_lo = row.saturating_sub(l - 1);
            let k_hi = col.min(n - 1);
            let mut acc = if i == j { crate::C64::new(sigma2, 0.0) } else { crate::C64::new(0.0, 0.0) };
            if k_lo <= k_hi {
                for k in k_lo..=k_hi {
                    acc += taps[row - k] * factors[k].variance * taps[col - k].conj();
                }
            }
            c.set_lower(i, j, acc);
        }
    }
    c
}

/// Exact Gaussian marginals using every observation.
///
/// One banded factorization gives `C⁻¹ (y − H μ_t)` by substitution, and the
/// band of `C⁻¹` is all that `h_kᴴ C⁻¹ h_k` touches, so the whole frame costs
/// `O(N L²)`.
pub fn block_marginals(input: &EqualizerInput<'_>) -> Result<MarginalSet> {
    let taps = input.channel().taps();
    let l = taps.len();
    let n = input.frame_length();
    let m = input.observations().len();

    let cov = observation_covariance(input, 0, m);
    let ldl = cov.factor()?;
    let mut z = input.residual();
    ldl.solve_in_place(&mut z);
    let zinv = ldl.selected_inverse();

    let mut posteriors = Vec::with_capacity(n);
    let mut extrinsics = Vec::with_capacity(n);
    for (k, &t) in input.factors().iter().enumerate() {
        let a: crate::C64 = (0..l).map(|i| taps[i].conj() * z[k + i]).sum();
        let mut g = 0.0;
        for i in 0..l {
            for j in 0..l {
                g += (taps[i].conj() * zinv.get(k + i, k + j) * taps[j]).re;
            }
        }
        let (post, ext) = site_marginals(k, t, a, g)?;
        posteriors.push(post);
        extrinsics.push(ext);
    }
    Ok(MarginalSet {
        posteriors,
        extrinsics,
    })
}
