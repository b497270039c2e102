//! Library surface of the `webest` command-line front end: experiment
//! parsing, solver invocation, and the stable file formats.

pub mod commands;
pub mod formats;
