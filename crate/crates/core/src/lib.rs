//! Time-lens bandwidth conversion of single-photon wavepackets and
//! Hong-Ou-Mandel interference between the converted photons.
//!
//! Everything works on baseband envelopes sampled on a [`sigspace::Grid`].
//! Elements in [`elements`] chirp, lens, delay and filter those envelopes;
//! [`hom`] interferes them and fits the resulting dips; [`optimizer`] searches
//! lens parameters for maximum visibility.

pub mod biphoton;
pub mod elements;
pub mod error;
pub mod hom;
pub mod optimizer;
pub mod sigspace;
pub mod spectrometer;

pub use error::{Error, Result};
pub use sigspace::{Domain, Grid, SpectralAmplitude};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
