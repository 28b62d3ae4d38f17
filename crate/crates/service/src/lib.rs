//! HTTP API and command-line front end for the Dejaboom! engine.

pub mod api;
pub mod cli;
pub mod config;
