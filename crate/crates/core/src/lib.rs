//! Emergency landing-site selection for UAVs from aerial imagery.
//!
//! Stage 1 ([`raster`]) turns segmentation output into a binary suitability
//! grid. Stage 2 ([`proposal`], [`verifier`]) proposes footprints by
//! convolution and checks each one. Stage 3 ([`ranker`]) scores accepted
//! sites against points of interest, time of day and the buffer rule.
//! [`eval`] holds the offline metrics and [`pipeline`] wires it together.

pub mod eval;
pub mod pipeline;
pub mod proposal;
pub mod ranker;
pub mod raster;
pub mod verifier;
