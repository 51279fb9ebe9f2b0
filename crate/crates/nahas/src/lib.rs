//! File formats, parallel evaluation and the command-line front end over
//! `nahas-core`.

pub mod cli;
pub mod io;
pub mod manifest;
pub mod parallel;
