//! Reverberation-robust sound event classification.
//!
//! The crate covers the full experimental loop for studying how room
//! reverberation degrades a sound event classifier and how much of that
//! degradation can be bought back by conditioning the network on the room
//! impulse response (RIR):
//!
//! * [`signal`] — time-domain primitives: convolution, resampling,
//!   normalization, cropping and WAV I/O.
//! * [`rir`] — shoebox image-source RIR synthesis and persisted RIR banks.
//! * [`acoustics`] — Schroeder reverberation time, direct-to-reverberant
//!   ratio and DRR tercile grouping.
//! * [`features`] — the log-mel spectrogram frontend producing the
//!   (64, 100) network input.
//! * [`nn`] — from-scratch tensor layers with exact backpropagation, the
//!   three-embedding-block conditioned classifier and Adam.
//! * [`pipeline`] — dataset synthesis, the Base/Deconv/Aug/Cndt training
//!   strategies, evaluation protocols and report emission.
//!
//! Data-parallel inner loops (bank synthesis, batch feature extraction,
//! evaluation) run on rayon when the default `parallel` feature is enabled
//! and fall back to sequential iteration without it. Results are identical
//! either way: every parallel site either writes disjoint output regions or
//! reduces in a fixed order.

pub mod acoustics;
pub mod exec;
pub mod features;
pub mod nn;
pub mod pipeline;
pub mod rir;
pub mod signal;
pub mod util;
