//! Opaque service virtualization.
//!
//! Learns executable service models from recorded request/response byte
//! traces without any protocol knowledge, then synthesizes responses for live
//! requests. The offline side clusters interactions, picks centroids and
//! distills consensus prototypes with entropy weights; the runtime side matches
//! an incoming request and rewrites a recorded response by symmetric-field
//! substitution.
//!
//! ```
//! use ghost_core::alignment::dissimilarity_ratio;
//! let d = dissimilarity_ratio(b"{id:75,op:S}", b"{id:75,op:S}").unwrap();
//! assert_eq!(d, 0.0);
//! ```

pub mod alignment;
pub mod clustering;
pub mod consensus;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod trace;
pub mod translation;

pub use error::{GhostError, Result};
