//! Standard-library companion to `semsurf-core`: JSON scene files and the
//! demo scenes, OBJ/PLY mesh IO, PNG image output, job configuration and the
//! `semsurf` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod images;
pub mod mesh_io;
pub mod scene;
pub mod toys;

pub use error::{CliError, CliResult};
