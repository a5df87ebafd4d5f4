mod common;

use common::*;
use ep_turbo::equalizer::{Backend, EpFactorState, EqualizerInput, WindowSpec};
use ep_turbo::rng::stream;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn block_matches_dense_inverse(seed in any::<u64>(), n in 1usize..48, l in 1usize..8) {
        let mut rng = stream(seed, &[]);
        let inst = random_instance(&mut rng, n, l);
        let f = EpFactorState::new(inst.factors.clone()).unwrap();
        let input = EqualizerInput::new(&inst.y, &inst.channel, &f).unwrap();
        let got = Backend::Block.marginals(&input).unwrap();
        let rows = 0..inst.y.len();
        for k in 0..n {
            let (post, ext) = dense_marginal(inst.channel.taps(), inst.channel.noise_variance(), &inst.factors, &inst.y, k, rows.clone());
            prop_assert!(rel_err(got.posteriors[k].mean, post.mean) < 1e-9);
            prop_assert!((got.posteriors[k].variance - post.variance).abs() / post.variance < 1e-9);
            prop_assert!(rel_err(got.extrinsics[k].mean, ext.mean) < 1e-9);
            prop_assert!((got.extrinsics[k].variance - ext.variance).abs() / ext.variance < 1e-9);
        }
    }

    #[test]
    fn kalman_matches_block(seed in any::<u64>(), n in 1usize..48, l in 1usize..8) {
        let mut rng = stream(seed, &[1]);
        let inst = random_instance(&mut rng, n, l);
        let f = EpFactorState::new(inst.factors.clone()).unwrap();
        let input = EqualizerInput::new(&inst.y, &inst.channel, &f).unwrap();
        let b = Backend::Block.marginals(&input).unwrap();
        let kf = Backend::Kalman.marginals(&input).unwrap();
        for k in 0..n {
            prop_assert!(rel_err(kf.posteriors[k].mean, b.posteriors[k].mean) < 1e-6);
            prop_assert!(rel_err(kf.extrinsics[k].mean, b.extrinsics[k].mean) < 1e-6);
            prop_assert!((kf.extrinsics[k].variance - b.extrinsics[k].variance).abs() / b.extrinsics[k].variance < 1e-6);
        }
    }

    #[test]
    fn windowed_matches_dense_subsolve(seed in any::<u64>(), n in 1usize..48, l in 1usize..8, extra in 0usize..6) {
        let mut rng = stream(seed, &[2]);
        let inst = random_instance(&mut rng, n, l);
        let win = WindowSpec::new(l + extra, (l + extra) / 2).unwrap();
        let f = EpFactorState::new(inst.factors.clone()).unwrap();
        let input = EqualizerInput::new(&inst.y, &inst.channel, &f).unwrap();
        let got = Backend::Windowed(win).marginals(&input).unwrap();
        for k in 0..n {
            let rows = window_rows(k, win.window_length, win.center_offset, inst.y.len());
            let (post, ext) = dense_marginal(inst.channel.taps(), inst.channel.noise_variance(), &inst.factors, &inst.y, k, rows);
            prop_assert!(rel_err(got.posteriors[k].mean, post.mean) < 1e-9);
            prop_assert!(rel_err(got.extrinsics[k].mean, ext.mean) < 1e-9);
            prop_assert!((got.extrinsics[k].variance - ext.variance).abs() / ext.variance < 1e-9);
        }
    }

    #[test]
    fn posterior_variance_bounded_by_factor(seed in any::<u64>(), n in 1usize..32, l in 1usize..6) {
        let mut rng = stream(seed, &[3]);
        let inst = random_instance(&mut rng, n, l);
        let f = EpFactorState::new(inst.factors.clone()).unwrap();
        let input = EqualizerInput::new(&inst.y, &inst.channel, &f).unwrap();
        let m = Backend::Block.marginals(&input).unwrap();
        for k in 0..n {
            prop_assert!(m.posteriors[k].variance > 0.0);
            prop_assert!(m.posteriors[k].variance <= inst.factors[k].variance * (1.0 + 1e-12));
            // q_E · t reproduces the posterior
            let back = m.extrinsics[k].multiply(inst.factors[k]);
            prop_assert!(rel_err(back.mean, m.posteriors[k].mean) < 1e-8);
            prop_assert!((back.variance - m.posteriors[k].variance).abs() / m.posteriors[k].variance < 1e-8);
        }
    }
}

#[test]
fn full_window_equals_block() {
    let mut rng = stream(99, &[]);
    let (n, l) = (20, 4);
    let inst = random_instance(&mut rng, n, l);
    let f = EpFactorState::new(inst.factors.clone()).unwrap();
    let input = EqualizerInput::new(&inst.y, &inst.channel, &f).unwrap();
    let b = Backend::Block.marginals(&input).unwrap();
    // a window covering every observation for every symbol
    let win = WindowSpec::new(2 * (n + l), n + l).unwrap();
    let w = Backend::Windowed(win).marginals(&input).unwrap();
    for k in 0..n {
        assert!(rel_err(w.extrinsics[k].mean, b.extrinsics[k].mean) < 1e-10);
    }
}
