//! Numerical upper bounds on device-independent QKD key rates.
//!
//! The crate covers CHSH-based devices (honest isotropic-state realisations,
//! explicit eavesdropper strategies, local/nonlocal decompositions) and
//! devices built on noisy qubit channels.

pub mod bounds;
pub mod devices;
pub mod error;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod optimize;
pub mod polytope;
pub mod simplex;
pub mod states;

pub use error::{Error, Result};
