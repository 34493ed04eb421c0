//! Test-only support: fixture databases, the VQL suite, a brute-force
//! reference executor, random table/query generators, and scripted model
//! fixtures for the worked cases.

pub mod fixtures;
pub mod gen;
pub mod oracle;
pub mod scripts;

pub use fixtures::{data_dir, fixture_db, fixture_dbs, planted_corpus, vql_suite, SuiteEntry, FIXTURE_DB_IDS};
