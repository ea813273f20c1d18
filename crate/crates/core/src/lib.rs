//! Batch walkability-index engine over a regular 100 m cell lattice.
//!
//! The crate covers the full path from raw inputs to analysis outputs:
//! grid addressing ([`grid`]), file formats ([`io`]), the pedestrian
//! network with isochrones ([`graph`]), the raw component fields
//! ([`components`]), distance-decay smoothing / standardization /
//! composition / deciles ([`smooth`]) and spatial statistics ([`stats`]).

pub mod components;
pub mod error;
pub mod geom;
pub mod graph;
pub mod grid;
pub mod io;
pub mod raster;
pub mod smooth;
pub mod stats;

pub use error::{Error, Result};
