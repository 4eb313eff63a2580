//! Scalable (successive refinement) coding quantities.

pub mod bss;
pub mod d2star;
pub mod rd;
pub mod total_rate;
pub mod weak;

pub use bss::{bss_d2_star_closed_form, bss_d2_star_structured, StructuredBss};
pub use d2star::{d2_star, D2Options, D2Residuals, D2Star, D2Witness};
pub use rd::{rd_function, rd_function_with, RdCurvePoint, RdOptions};
pub use total_rate::{min_total_rate, ScalableInstance, SearchOptions, TotalRate};
pub use weak::{
    weak_independence, weak_independence_by_output, weak_independence_by_output_exact,
    weak_independence_exact,
};
