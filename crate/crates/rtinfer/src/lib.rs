//! File formats, experiment harness and timing helpers around
//! [`rtinfer_core`].

pub mod bench;
pub mod experiments;
pub mod io;

pub use rtinfer_core as core;
