//! Sensitivity-aware model-division multiple access (S-MDMA) for a two-user
//! satellite-ground broadcast link.
//!
//! The transmitter encodes two correlated images into semantic features,
//! splits them into a shared part and a thresholded difference, sorts and
//! crops both by reconstruction sensitivity, places them on orthogonal
//! Kronecker signatures and sends the power-normalized superposition through
//! a learned 1-D convolutional channel codec over a Shadowed-Rician link.
//!
//! ```text
//!  s1 ─ f_se ─┐                                   ┌─ f_cd ─ sep(u1) ─ unsort ─ f_sd ─ ŝ1
//!             ├─ fuse ─ sort/crop ─ ⊗u1,u2 ─ f_ce ─ SR ┤
//!  s2 ─ f_se ─┘                                   └─ f_cd ─ sep(u1,u2) ─ unsort ─ f_sd ─ ŝ2
//! ```
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`nnkit`] | dense / conv1d / relu layers, MSE, Adam, gradient checking, model files |
//! | [`media`] | PGM/PPM I/O, synthetic image pairs, PSNR and SSIM |
//! | [`codecs`] | toy semantic autoencoder and the convolutional channel codec |
//! | [`fusion`] | shared / difference feature split |
//! | [`ranking`] | sensitivity scoring, sorting, cropping and restoration |
//! | [`ortho`] | Kronecker orthogonal embedding and projection separation |
//! | [`channel`] | Shadowed-Rician fading, AWGN, special functions |
//! | [`pipeline`] | transmitter/receiver, multi-user loss, channel training, sweeps |

pub mod channel;
pub mod codecs;
pub mod config;
pub mod error;
pub mod frame;
pub mod fusion;
pub mod media;
pub mod nnkit;
pub mod ortho;
pub mod pipeline;
pub mod ranking;
pub mod rng;

pub use error::{Error, Result};
