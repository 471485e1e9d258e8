//! Sequential complexities, covers, combinatorial dimensions and the bounds
//! assembled from them. Everything here is exact at desk scale and guarded
//! against combinatorial blow-up.

pub mod bounds;
pub mod cover;
pub mod fat;
pub mod rademacher;
pub mod rates;

pub use bounds::{
    chained_offset_bound, dudley_bound, dudley_bound_steps, finite_class_linear_bound,
    finite_class_offset_bound, finite_class_offset_expectation, sparse_cover_bound, sparse_rate,
    ChainedBound,
};
pub use cover::{exact_set_cover, seq_cover_number, CoverReport, Norm};
pub use fat::{cover_fat_bound, fat_shattering, FatReport, ShatterCertificate};
pub use rademacher::{
    composed, khinchine_check, offset_rademacher, offset_rademacher_sup, offset_rademacher_sup_biased,
    path_estimate, path_expectation, seq_rademacher, seq_rademacher_estimate, tree_offset_rademacher,
    tree_rademacher, Estimate, MonteCarlo, OffsetSup, RNG_NAME,
};
pub use rates::{rate_lower, rate_upper, RateBound, RateBranch, RateConstants};
