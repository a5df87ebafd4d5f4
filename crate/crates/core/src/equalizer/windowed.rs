use super::block::observation_covariance;
use super::{site_marginals, EqualizerInput, MarginalSet, WindowSpec};
use crate::{Result, C64};

/// Marginals where symbol `k` sees only the observations in its window.
///
/// Symbols that reach into the window keep their factor moments in the
/// window's covariance; everything outside the window is ignored. Windows are
/// truncated at the frame edges. Each symbol costs one banded factorization
/// of size `W`, `O(W L²)`.
pub fn windowed_marginals(input: &EqualizerInput<'_>, win: WindowSpec) -> Result<MarginalSet> {
    let taps = input.channel().taps();
    let n = input.frame_length();
    let rows = input.observations().len() as isize;
    let residual = input.residual();

    let mut posteriors = Vec::with_capacity(n);
    let mut extrinsics = Vec::with_capacity(n);
    for (k, &t) in input.factors().iter().enumerate() {
        let start = k as isize - win.center_offset as isize;
        let r0 = start.max(0) as usize;
        let r1 = (start + win.window_length as isize).min(rows) as usize;

        let cov = observation_covariance(input, r0, r1);
        let ldl = cov.factor()?;
        let w = r1 - r0;

        let mut z = residual[r0..r1].to_vec();
        ldl.solve_in_place(&mut z);
        // h_k restricted to the window
        let mut hk = vec![C64::new(0.0, 0.0); w];
        for (a, &h) in taps.iter().enumerate() {
            let row = k + a;
            if (r0..r1).contains(&row) {
                hk[row - r0] = h;
            }
        }
        let x = ldl.solve(&hk);
        let a: C64 = hk.iter().zip(&z).map(|(h, z)| h.conj() * z).sum();
        let g: f64 = hk.iter().zip(&x).map(|(h, x)| (h.conj() * x).re).sum();
        let (post, ext) = site_marginals(k, t, a, g)?;
        posteriors.push(post);
        extrinsics.push(ext);
    }
    Ok(MarginalSet {
        posteriors,
        extrinsics,
    })
}
