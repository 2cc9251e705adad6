//! File formats, scenario handling and experiment orchestration for the
//! `trackeval` command-line tool.

pub mod experiment;
pub mod io;
pub mod scenario;
