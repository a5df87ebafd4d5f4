//! Turbo equalization for intersymbol-interference channels with a double
//! expectation-propagation (EP) equalizer.
//!
//! The crate is organized bottom-up:
//!
//! - [`constellation`]: M-QAM alphabets, Gray labels, symbol/bit soft conversions.
//! - [`channel`]: the linear ISI channel `y = H u + w` and random channel draws.
//! - [`ep`]: Gaussian messages, tilted moments, the moment-matching/damping
//!   update and the outer-loop prior initialization.
//! - [`equalizer`]: block, Kalman-smoother and windowed backends computing the
//!   Gaussian posterior marginals and extrinsics, plus the inner EP loop.
//! - [`ldpc`]: (3,6)-regular LDPC construction, encoding and sum-product decoding.
//! - [`turbo`]: the equalizer/decoder outer loop and the named receiver schemes.
//! - [`harness`]: seeded Monte Carlo BER sweeps and CSV output.
//!
//! A complete noiseless round trip through the turbo receiver:
//!
//! ```
//! use ep_turbo::{channel::ChannelRealization, constellation::Constellation, ldpc::LdpcCode};
//! use ep_turbo::turbo::{run_frame, Scheme, TurboConfig};
//! use num_complex::Complex64;
//! use rand::SeedableRng;
//!
//! let code = LdpcCode::build(96, 7).unwrap();
//! let qam = Constellation::qam(16).unwrap();
//! let taps = vec![Complex64::new(0.8, 0.0), Complex64::new(0.6, 0.0)];
//! let channel = ChannelRealization::new(taps, 1e-6).unwrap();
//! let config = TurboConfig::for_scheme(Scheme::DBep, qam.bits_per_symbol());
//! let info = vec![1u8; code.info_len()];
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
//! let out = run_frame(&config, &code, &qam, &channel, &info, &mut rng).unwrap();
//! assert_eq!(out.decoded_bits, info);
//! ```

pub mod channel;
pub mod constellation;
pub mod ep;
pub mod equalizer;
pub mod error;
pub mod harness;
pub mod ldpc;
pub mod linalg;
pub mod rng;
pub mod turbo;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
