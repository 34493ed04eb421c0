use std::path::PathBuf;

use cotvis_core::datastore::{table_from_text, Database};
use cotvis_core::corpus::RawSample;
use serde::Deserialize;

pub const FIXTURE_DB_IDS: &[&str] = &["allergy", "behavior_monitoring", "university", "wine"];

/// `(db, table, csv)` in load order.
const TABLES: &[(&str, &str, &str)] = &[
    ("allergy", "allergy_type", include_str!("../data/db/allergy/allergy_type.csv")),
    ("allergy", "has_allergy", include_str!("../data/db/allergy/has_allergy.csv")),
    ("allergy", "student", include_str!("../data/db/allergy/student.csv")),
    (
        "behavior_monitoring",
        "Assessment_Notes",
        include_str!("../data/db/behavior_monitoring/Assessment_Notes.csv"),
    ),
    ("university", "Faculty", include_str!("../data/db/university/Faculty.csv")),
    ("university", "department", include_str!("../data/db/university/department.csv")),
    ("university", "student", include_str!("../data/db/university/student.csv")),
    ("wine", "wine", include_str!("../data/db/wine/wine.csv")),
];

const SUITE: &str = include_str!("../data/vql_suite.jsonl");

/// Directory holding `db/<db_id>/<table>.csv` and `vql_suite.jsonl`.
pub fn data_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data"))
}

/// Loads a fixture database. The CSVs carry no quoting, so a plain split
/// is enough here.
pub fn fixture_db(db_id: &str) -> Database {
    let mut db = Database::new(db_id);
    for (_, table, csv) in TABLES.iter().filter(|(d, _, _)| *d == db_id) {
        let mut lines = csv.lines().filter(|l| !l.is_empty());
        let header: Vec<String> = lines
            .next()
            .expect("header")
            .split(',')
            .map(str::to_string)
            .collect();
        let records: Vec<Vec<String>> = lines
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        let t = table_from_text(table, &header, &records)
            .unwrap_or_else(|e| panic!("fixture {db_id}.{table}: {e}"));
        db.add_table(t).expect("unique table names");
    }
    assert!(!db.tables().is_empty(), "unknown fixture database {db_id}");
    db
}

pub fn fixture_dbs() -> Vec<Database> {
    FIXTURE_DB_IDS.iter().map(|id| fixture_db(id)).collect()
}

#[derive(Debug, Clone, Deserialize)]
pub struct SuiteEntry {
    pub id: String,
    pub db_id: String,
    pub vql: String,
    /// False for statements that parse but must be rejected before execution.
    pub executable: bool,
}

pub fn vql_suite() -> Vec<SuiteEntry> {
    SUITE
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("suite line"))
        .collect()
}

const PLANTED: &str = include_str!("../data/corpus/planted.jsonl");

/// Ten samples with one duplicate (p06), one illegal gold (p09) and one
/// empty gold (p10) planted.
pub fn planted_corpus() -> Vec<RawSample> {
    PLANTED
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("planted line"))
        .collect()
}
