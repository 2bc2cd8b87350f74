//! Modeling, extraction and reporting toolkit for piezo-optomechanical
//! microwave-to-optical transducers.

pub mod cli;
pub mod consts;
pub mod device;
pub mod em_circuit;
pub mod error;
pub mod extraction;
pub mod io;
pub mod optomech;
pub mod piezo;
pub mod pulsed;

pub use error::{Error, Result};
