//! Core of a staged natural-language-to-visualization engine.
//!
//! Everything here is pure computation over in-memory data and needs only
//! `alloc`: the VQL language, typed tables, the query executor, chart-spec
//! emission, the five-stage reasoning pipeline over a pluggable model
//! client, corpus construction, evaluation metrics and trace refinement.
//! File formats, HTTP backends, the service and the CLI live in the
//! `cotvis` crate.

#![no_std]

extern crate alloc;

pub mod chartspec;
pub mod corpus;
pub mod cot;
pub mod datastore;
pub mod executor;
pub mod metrics;
pub mod model;
pub mod refine;
mod scope;
pub mod text;
pub mod vql;
