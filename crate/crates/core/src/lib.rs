//! Multiple description rate-distortion toolkit over finite alphabets.

pub mod error;
pub mod frl;
pub mod optim;
pub mod polymatroid;
pub mod regions;
pub mod scalable;
pub mod strategy;
pub mod suites;
pub mod prob;

pub use error::{Error, Result};
pub use prob::{Alphabet, Channel, Decoder, DistortionMeasure, ExactPmf, JointPmf, Rational};
