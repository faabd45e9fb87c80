//! Polar codes on the binary erasure channel.
//!
//! * [`erasure`]: synthetic-channel erasures in log domain.
//! * [`scaling`]: the eigenfunction criterion and the `g_n` iteration for
//!   the scaling exponent.
//! * [`frontier`]: the achievable `(β′, μ′)` region.
//! * [`construction`]: classical and multi-pocket channel selection.
//! * [`codec`]: encoding, SC decoding, simulation and exact block error.
//!
//! Data-parallel loops take an [`Exec`] policy. Results are identical under
//! both policies.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod construction;
pub mod entropy;
pub mod erasure;
pub mod error;
pub mod exec;
pub mod frontier;
pub mod numeric;
pub mod reference;
pub mod scaling;

pub use construction::{CodeSpec, ConstructionReport, MultiPocketParams, Target};
pub use erasure::{channel_erasure, level_erasures, ChannelPath, LevelTable, LogErasure, RootChannel};
pub use error::{Error, Result};
pub use exec::Exec;
