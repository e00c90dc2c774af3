//! Oriented bounding box toolkit: angle conventions, exact rotated IoU and
//! NMS, Gaussian box distances, DOTA-style evaluation and huge-image
//! split/merge planning.

pub mod cli;
pub mod dota_io;
pub mod eval;
pub mod gaussian_metrics;
pub mod geometry;
pub mod overlap;
