//! Configuration parsing, manifest emission, and plotting helpers for the
//! `driftlab` command line tool.

pub mod config;
pub mod manifest;
pub mod svg;
