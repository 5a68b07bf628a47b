//! Multispectral diffusion-weighted MR image classification.
//!
//! The crate provides the objective dialectical classifier ([`dialectics`]),
//! a suite of reference classifiers ([`classifiers`]), ADC maps ([`adc`]),
//! binary granulometry and similarity indices ([`morphology`]), evaluation
//! metrics ([`metrics`]), synthetic phantoms ([`phantom`]) and an end-to-end
//! pipeline ([`pipeline`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adc;
pub mod classifiers;
pub mod dataset;
pub mod dialectics;
pub mod error;
pub mod exec;
pub mod image;
pub mod metrics;
pub mod morphology;
pub mod pgm;
pub mod phantom;
pub mod pipeline;

pub use error::{Error, ErrorCategory, Result};
pub use exec::Execution;
pub use image::{Band, Grid, LabelMap, MultispectralImage, Volume};
