//! Stable matching of grid pixels to capacity-limited centers.
//!
//! An n x n grid of pixels is matched to k centers so that every center
//! receives an equal share of pixels (up to rounding) and no pixel-center
//! pair prefers each other over their assigned partners. Several matchers
//! produce the same unique greedy matching and cross-check each other:
//!
//! - [`oracle::greedy_oracle`]: brute-force reference, small grids only
//! - [`circle`]: simultaneous circle growing (integer and real centers)
//! - [`distsort`]: pair sort and pair heap endgames over pluggable
//!   nearest-neighbor backends
//! - [`nn_chain`]: stack-based mutual-nearest-neighbor matcher
//! - [`hybrid`]: circle growing with a cutoff handoff to an endgame
//!
//! On top of the matchers, [`kmeans`] runs Lloyd-style iterations whose
//! assignment step is a stable matching, [`bench`] sweeps configurations
//! into CSV, and [`render`] writes region maps as PPM images.

pub mod assignment;
pub mod bench;
pub mod circle;
pub mod distsort;
pub mod error;
pub mod hybrid;
pub mod instance;
pub mod kmeans;
pub mod metric;
pub mod nn_chain;
pub mod offsets;
pub mod oracle;
pub mod render;
pub mod state;

pub use assignment::{verify_quotas, verify_stability, Assignment, BlockingPair, StabilityReport};
pub use error::{Error, Result};
pub use hybrid::{run_hybrid, Endgame, HybridConfig, HybridRun, RunStats};
pub use instance::{compute_quotas, CenterKind, GridSpec, Instance};
pub use metric::{DistKey, Metric};
pub use offsets::SortedOffsets;
pub use state::{MatchState, RatioKind, StopRule};
