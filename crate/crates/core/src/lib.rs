//! Noise-aware attention denoising autoencoder for panoramic radiographs.
//!
//! This crate is `no_std` (it needs `alloc`) and holds every numerical piece
//! of the pipeline:
//!
//! * [`tensor`] and [`ops`]: a dense `f64` tensor with reverse-mode
//!   differentiation and the layer primitives the network uses.
//! * [`noise`]: the five-stage radiographic noise synthesizer.
//! * [`noise_map`]: local-RMS noise estimation over feature maps.
//! * [`attention`]: standard and noise-aware multi-head self-attention.
//! * [`network`]: encoder, attention bottleneck and decoder.
//! * [`train`]: MSE loss, Adam and early stopping.
//! * [`patches`] and [`dataset`]: patch grids, reassembly, mirroring and splits.
//! * [`metrics`]: PSNR, SSIM and confidence-interval aggregation.
//! * [`checkpoint`]: the versioned binary parameter container.
//!
//! File and image IO live in the companion `naada` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attention;
pub mod checkpoint;
pub mod dataset;
mod error;
pub mod gradcheck;
pub mod image;
pub mod layers;
pub mod metrics;
pub mod network;
pub mod noise;
pub mod noise_map;
pub mod ops;
pub mod patches;
pub mod rng;
pub mod synthetic;
pub mod tensor;
pub mod train;

mod autodiff;

pub use autodiff::Gradients;
pub use error::{Error, Result, TensorError};
pub use image::{Domain, GrayImage};
pub use tensor::{Tensor, TensorId};
