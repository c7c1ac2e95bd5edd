//! Imaging of sparsely distributed moving targets in stripmap SAR data by
//! greedy sparse recovery over a discretised position/velocity space.
//!
//! The crate is organised bottom-up:
//!
//! * [`radar`]: system constants, targets and the 4-D target grid.
//! * [`echo`]: exact baseband echo synthesis and additive noise.
//! * [`dictionary`]: the matrix-free sensing operator over randomly selected samples.
//! * [`recovery`]: CoSaMP and the recovery error metric.
//! * [`baseline`]: matched-filter reference imager and sidelobe metrics.
//! * [`experiments`]: seeded Monte Carlo harness for recovery-probability curves.
//! * [`io`]: binary echo container, CSV and graymap writers.
//!
//! Data-parallel loops go through rayon when the `parallel` feature is on
//! (the default) and fall back to plain iterators otherwise. Results are
//! identical either way.

pub mod baseline;
pub mod dictionary;
pub mod echo;
mod error;
pub mod experiments;
pub mod io;
mod lsq;
mod par;
pub mod radar;
pub mod recovery;
pub mod reference;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64;
