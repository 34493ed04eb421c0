//! Database loading from CSV directories and SQLite files, and lookup of
//! databases by id under a data root.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use cotvis_core::datastore::{
    infer_column_type, parse_decimal, Cell, ColumnSchema, ColumnType, Database, DateValue,
    FormatError, Table, TableError, TableSchema,
};
use cotvis_core::datastore::table_from_text;
use rusqlite::types::ValueRef;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: FormatError },
    #[error("{}: {source}", path.display())]
    Sqlite { path: PathBuf, source: rusqlite::Error },
    #[error("{}: {source}", path.display())]
    Table { path: PathBuf, source: TableError },
    #[error("{}: not a CSV directory or SQLite file", .0.display())]
    Unrecognized(PathBuf),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> LoadError + '_ {
    move |source| LoadError::Io { path: path.to_path_buf(), source }
}

/// Reads one CSV file (UTF-8, comma separated, header row) as a table named
/// after the file stem.
pub fn load_csv_table(path: &Path) -> Result<Table, LoadError> {
    let csv_err = |source| LoadError::Csv { path: path.to_path_buf(), source };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_err)?;
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec.map_err(csv_err)?.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    table_from_text(name, &header, &records)
        .map_err(|source| LoadError::Format { path: path.to_path_buf(), source })
}

/// Every `*.csv` in `dir`, one table each, in file-name order.
pub fn load_csv_dir(dir: &Path, name: &str) -> Result<Database, LoadError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io(dir))?;
    files.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) && p.is_file());
    files.sort();
    let mut db = Database::new(name);
    for f in files {
        let t = load_csv_table(&f)?;
        db.add_table(t).map_err(|source| LoadError::Table { path: f.clone(), source })?;
    }
    Ok(db)
}

/// Column affinity from a declared SQLite type.
fn affinity(declared: &str) -> ColumnType {
    let d = declared.to_ascii_uppercase();
    if d.contains("CHAR") || d.contains("CLOB") || d.contains("TEXT") {
        ColumnType::Text
    } else if d.contains("DATE") || d.contains("TIME") {
        ColumnType::Date
    } else if d.is_empty() || d.contains("BLOB") {
        // No affinity: decided from the values.
        ColumnType::Text
    } else {
        ColumnType::Number
    }
}

fn value_text(v: ValueRef<'_>) -> Option<String> {
    match v {
        ValueRef::Null => None,
        ValueRef::Integer(i) => Some(i.to_string()),
        ValueRef::Real(f) => Some(f.to_string()),
        ValueRef::Text(t) | ValueRef::Blob(t) => Some(String::from_utf8_lossy(t).into_owned()),
    }
}

/// Picks the column type. Declared numeric columns stay numeric while
/// every value is numeric; text and untyped columns are promoted to date
/// when every value is an ISO date. Anything else falls back to text.
fn settle_type(declared: &str, values: &[Option<String>]) -> ColumnType {
    let present = || values.iter().flatten().map(|s| s.trim()).filter(|s| !s.is_empty());
    let aff = affinity(declared);
    if declared.trim().is_empty() {
        return infer_column_type(present());
    }
    if aff == ColumnType::Number && present().all(|s| parse_decimal(s).is_some()) {
        return ColumnType::Number;
    }
    if present().next().is_some() && present().all(|s| DateValue::parse(s).is_some()) {
        return ColumnType::Date;
    }
    if aff != ColumnType::Text {
        tracing::debug!(declared, "column values do not fit declared type; loading as text");
    }
    ColumnType::Text
}

/// Reads every user table of a SQLite file, in creation order.
pub fn load_sqlite(path: &Path, name: &str) -> Result<Database, LoadError> {
    let sql = |source| LoadError::Sqlite { path: path.to_path_buf(), source };
    let conn = rusqlite::Connection::open_with_flags(path, rusqlite::OpenFlags::SQLITE_OPEN_READ_ONLY)
        .map_err(sql)?;
    let mut stmt = conn
        .prepare("SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid")
        .map_err(sql)?;
    let names: Vec<String> = stmt.query_map([], |r| r.get(0)).map_err(sql)?.collect::<Result<_, _>>().map_err(sql)?;
    let mut db = Database::new(name);
    for table in names {
        let quoted = format!("\"{}\"", table.replace('"', "\"\""));
        let mut info = conn.prepare(&format!("PRAGMA table_info({quoted})")).map_err(sql)?;
        let cols: Vec<(String, String)> = info
            .query_map([], |r| Ok((r.get::<_, String>(1)?, r.get::<_, String>(2)?)))
            .map_err(sql)?
            .collect::<Result<_, _>>()
            .map_err(sql)?;
        let mut q = conn.prepare(&format!("SELECT * FROM {quoted}")).map_err(sql)?;
        let mut raw: Vec<Vec<Option<String>>> = Vec::new();
        let mut rows = q.query([]).map_err(sql)?;
        while let Some(r) = rows.next().map_err(sql)? {
            let mut rec = Vec::with_capacity(cols.len());
            for i in 0..cols.len() {
                rec.push(value_text(r.get_ref(i).map_err(sql)?));
            }
            raw.push(rec);
        }
        let mut columns = Vec::with_capacity(cols.len());
        for (i, (col, declared)) in cols.iter().enumerate() {
            let values: Vec<Option<String>> = raw.iter().map(|r| r[i].clone()).collect();
            columns.push(ColumnSchema { name: col.clone(), ty: settle_type(declared, &values) });
        }
        let mut typed = Vec::with_capacity(raw.len());
        for (ri, rec) in raw.iter().enumerate() {
            let mut row = Vec::with_capacity(rec.len());
            for (ci, v) in rec.iter().enumerate() {
                let cell = match v.as_deref().map(str::trim) {
                    None | Some("") => Cell::Null,
                    Some(s) => Cell::from_text(s, columns[ci].ty).ok_or_else(|| LoadError::Format {
                        path: path.to_path_buf(),
                        source: FormatError {
                            row: ri + 1,
                            column: columns[ci].name.clone(),
                            reason: format!("{s:?} is not a {}", columns[ci].ty.as_str()),
                        },
                    })?,
                };
                row.push(cell);
            }
            typed.push(row);
        }
        let schema = TableSchema { name: table.clone(), columns };
        let t = Table::new(schema, typed).map_err(|source| LoadError::Table { path: path.to_path_buf(), source })?;
        db.add_table(t).map_err(|source| LoadError::Table { path: path.to_path_buf(), source })?;
    }
    Ok(db)
}

fn is_sqlite(path: &Path) -> bool {
    let mut head = [0u8; 16];
    fs::File::open(path)
        .and_then(|mut f| std::io::Read::read_exact(&mut f, &mut head))
        .is_ok_and(|_| &head == b"SQLite format 3\0")
}

/// Loads a CSV directory or a SQLite file; the database is named after
/// the directory or the file stem.
pub fn load_database(path: &Path) -> Result<Database, LoadError> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("db").to_string();
    if path.is_dir() {
        load_csv_dir(path, &name)
    } else if is_sqlite(path) {
        load_sqlite(path, &name)
    } else if path.exists() {
        Err(LoadError::Unrecognized(path.to_path_buf()))
    } else {
        Err(LoadError::Io { path: path.to_path_buf(), source: std::io::ErrorKind::NotFound.into() })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DbRootError {
    #[error("unknown database {0}")]
    Unknown(String),
    #[error(transparent)]
    Load(#[from] LoadError),
}

/// Databases under a directory, loaded on first use and cached.
///
/// An id resolves to `<root>/<id>/<id>.sqlite` (the nvBench layout), a CSV
/// directory `<root>/<id>/`, or `<root>/<id>.sqlite` / `<root>/<id>.db`.
#[derive(Debug)]
pub struct DbRoot {
    root: PathBuf,
    cache: Mutex<HashMap<String, Arc<Database>>>,
}

impl DbRoot {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DbRoot { root: root.into(), cache: Mutex::new(HashMap::new()) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn locate(&self, id: &str) -> Option<PathBuf> {
        if id.is_empty() || id.starts_with('.') || id.contains(['/', '\\']) {
            return None;
        }
        let dir = self.root.join(id);
        let candidates = [
            dir.join(format!("{id}.sqlite")),
            dir.join(format!("{id}.db")),
            self.root.join(format!("{id}.sqlite")),
            self.root.join(format!("{id}.db")),
        ];
        if let Some(f) = candidates.into_iter().find(|p| p.is_file()) {
            return Some(f);
        }
        dir.is_dir().then_some(dir)
    }

    pub fn load(&self, id: &str) -> Result<Arc<Database>, DbRootError> {
        if let Some(db) = self.cache.lock().expect("cache lock").get(id) {
            return Ok(db.clone());
        }
        let path = self.locate(id).ok_or_else(|| DbRootError::Unknown(id.to_string()))?;
        let mut db = load_database(&path)?;
        db.name = id.to_string();
        let db = Arc::new(db);
        self.cache.lock().expect("cache lock").insert(id.to_string(), db.clone());
        Ok(db)
    }

    /// Ids that look loadable, sorted.
    pub fn list(&self) -> Vec<String> {
        let Ok(entries) = fs::read_dir(&self.root) else { return Vec::new() };
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let p = e.path();
                let stem = p.file_stem()?.to_str()?.to_string();
                let ok = p.is_dir() || p.extension().is_some_and(|x| x == "sqlite" || x == "db");
                ok.then_some(stem)
            })
            .filter(|id| self.locate(id).is_some())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Loads each distinct id. Ids that fail to load are logged and left out.
    pub fn preload<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, Arc<Database>> {
        let mut out = BTreeMap::new();
        for id in ids {
            if out.contains_key(id) {
                continue;
            }
            match self.load(id) {
                Ok(db) => {
                    out.insert(id.to_string(), db);
                }
                Err(e) => tracing::warn!(db = id, error = %e, "database not loaded"),
            }
        }
        out
    }
}
