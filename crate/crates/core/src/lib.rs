//! Compressive-sensing time delay estimation.
//!
//! A known pulse `g(t)` arrives `K` times with unknown complex amplitudes and
//! continuous delays. The receiver sees only `y = Φ f`, a Random Demodulator
//! compression of the Nyquist-sampled record `f`. This crate recovers the
//! delays with:
//!
//! * band-excluded OMP on the circulant dictionary of delayed pulses
//!   ([`recovery::InterpolationKind::None`]),
//! * the same greedy loop with off-grid refinement by parabolic fitting of the
//!   correlation proxy or by polar (circle arc) interpolation of three adjacent
//!   atoms,
//! * ℓ1 reconstruction of the tap vector followed by MUSIC
//!   ([`baseline::tde_music`]), and a plain downsample + MUSIC control.
//!
//! The crate is `no_std` and only needs `alloc`; IO, experiment scheduling and
//! the command line live in the `tde` crate.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baseline;
pub mod dictionary;
mod error;
pub mod l1;
pub mod linalg;
pub mod metrics;
pub mod music;
pub mod recovery;
pub mod sensing;
pub mod signal;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};

pub use baseline::{downsample_music, music_config, tde_music, DownsampledDictionary};
pub use dictionary::{ArcModel, CompressedDictionary, Dictionary, PolarGeometry};
pub use l1::{l1_reconstruct, L1Mode, L1SolverConfig};
pub use metrics::tau_mse;
pub use music::{music_delays, MusicConfig, MusicEstimate, SpectralBand};
pub use recovery::{ibomp, ibomp_compressed, EstimationResult, Ibomp, IbompConfig, InterpolationKind};
pub use sensing::{add_noise, downsample, measure, random_demodulator, MeasurementMatrix, NoiseSpec};
pub use signal::{
    chirp_template, draw_scene, superpose, synthesize, Chirp, ChirpSpec, Pulse, SceneDrawSpec, SparseScene, Waveform,
};

pub use num_complex::Complex64;
