//! Search and analysis of bit-commitment based strong coin-flipping
//! protocols.

pub mod error;
pub mod probcore;
pub mod protocol;
pub mod reduce;
pub mod filter;
pub mod search;
pub mod symmetry;

pub use error::{Error, Result};
