//! File loaders, model backends, corpus building and the HTTP service
//! around `cotvis-core`.

pub mod backend;
pub mod build;
pub mod dataset;
pub mod load;
pub mod server;
