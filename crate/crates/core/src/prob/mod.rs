//! Finite-alphabet probability calculus.

pub mod alphabet;
pub mod channel;
pub mod distortion;
pub mod info;
pub mod json;
pub mod num;
pub mod pmf;

pub use alphabet::Alphabet;
pub use channel::Channel;
pub use distortion::{bayes_decoder, expected_distortion, Decoder, DistortionMeasure, DistortionSpec};
pub use info::{
    binary_entropy, conditional_entropy, entropy, entropy_of, is_independent, is_markov,
    mutual_information, InfoCalc, DEFAULT_INFO_TOL,
};
pub use json::PmfJson;
pub use num::{format_rational, parse_rational, snap_to_rational, Prob, Rational};
pub use pmf::{ExactPmf, JointPmf, SNAP_MAX_DENOMINATOR};
