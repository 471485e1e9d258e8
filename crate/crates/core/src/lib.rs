//! Online nonparametric regression: relaxation-based forecasters and a
//! desk-scale engine for sequential complexities, covers, combinatorial
//! dimensions and exact minimax values of small discretized games.
//!
//! The crate is organised bottom-up:
//!
//! - [`losses`]: loss models with curvature minorants/majorants and conjugates.
//! - [`comparators`]: benchmark classes and the comparator term of regret.
//! - [`trees`]: complete binary trees indexed by sign paths.
//! - [`complexity`]: sequential and offset Rademacher complexities, covers,
//!   fat-shattering dimension and the closed-form bounds built from them.
//! - [`minimax`]: backward induction on grid games and optimal adversaries.
//! - [`forecasters`]: admissible relaxations and the forecasters they induce.
//! - [`harness`]: experiment configs, sequence generators, artifacts and the
//!   verification suite used by the CLI.

pub mod comparators;
pub mod complexity;
pub mod error;
pub mod extended;
pub mod forecasters;
pub mod harness;
pub mod linalg;
pub mod losses;
pub mod minimax;
pub mod numeric;
pub mod trees;

pub use error::{Error, Result};
pub use extended::ExtReal;
