//! Link-level simulation of reconfigurable surfaces whose elements can move
//! between preset positions: geometry, spatially correlated channels, link
//! gain, position search, joint beamforming, and outage modelling.
//!
//! ```
//! use fris_core::geometry::{build_preset_grid, SurfaceConfig};
//!
//! let lambda = 0.125;
//! let cfg = SurfaceConfig::new(lambda, lambda / 3.0, lambda / 3.0, 4, 4, 4);
//! let grid = build_preset_grid(&cfg).unwrap();
//! assert_eq!(grid.len(), 16);
//! assert_eq!(grid.num_subareas(), 4);
//! ```

pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod joint;
pub mod link;
pub mod mixture;
pub mod position;
pub mod special;

pub use error::{Error, Result};
