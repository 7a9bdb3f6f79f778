//! Command-line front end: subcommands, configuration loading, and CSV,
//! JSON and SVG output.

pub mod app;
pub mod svg;
