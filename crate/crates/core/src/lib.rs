//! Sparse linear array toolkit.
//!
//! Builds semi-coprime, coprime (basic, extended, min-processing), nested,
//! minimum-redundancy and uniform linear arrays on a half-wavelength lattice,
//! evaluates their conventional beampatterns under min and product
//! processing, measures main-lobe width and peak sidelobe level, and runs
//! snapshot-based direction-of-arrival experiments.
//!
//! ```
//! use std::sync::Arc;
//! use arraylab::{beamforming, geometry, metrics};
//!
//! let sca = geometry::build_sca(3, 4, 2, 2).unwrap();
//! assert_eq!(sca.num_sensors(), 13);
//!
//! let grid = Arc::new(beamforming::ScanGrid::default());
//! let pattern = beamforming::composite_pattern(&sca, &grid, 0.0).unwrap();
//! assert!(metrics::grating_lobe_report(&pattern, -3.0).unwrap().is_empty());
//! ```

pub mod beamforming;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod simulation;

pub use error::{Error, Result};
