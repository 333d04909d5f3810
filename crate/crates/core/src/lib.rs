//! Exact spectrum and eigenbasis of the simple random walk on complete
//! `d`-ary trees, a dense Jacobi oracle, and a Wilson-type lower bound for
//! the interchange process with a Monte Carlo cross-check.
//!
//! Nodes use breadth-first indexing: the root is `0`, the children of `i`
//! are `d*i + 1 ..= d*i + d`.

pub mod chains;
pub mod cli;
pub mod eigenbasis;
pub mod error;
pub mod mixing;
pub mod oracle;
pub mod simulator;
pub mod spectrum;
pub mod tree;

pub use error::{Error, Result};
pub use spectrum::{full_spectrum, Family, SpectralLine, SpectrumTable};
pub use tree::TreeGeometry;
