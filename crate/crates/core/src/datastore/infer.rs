use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Cell, ColumnSchema, ColumnType, DateValue, Table, TableSchema};
use super::cell::parse_decimal;

/// A cell that could not be converted to its column's type. `row` is the
/// 1-based data row (the header is row 0).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("row {row}, column {column}: {reason}")]
pub struct FormatError {
    pub row: usize,
    pub column: String,
    pub reason: String,
}

/// Number if every non-empty cell is a decimal number, date if every
/// non-empty cell is an ISO date or datetime, otherwise text. A column with
/// no non-empty cells is text.
pub fn infer_column_type<'a>(cells: impl IntoIterator<Item = &'a str>) -> ColumnType {
    let mut number = true;
    let mut date = true;
    let mut any = false;
    for c in cells {
        let c = c.trim();
        if c.is_empty() {
            continue;
        }
        any = true;
        number = number && parse_decimal(c).is_some();
        date = date && DateValue::parse(c).is_some();
        if !number && !date {
            break;
        }
    }
    match (any, number, date) {
        (false, _, _) => ColumnType::Text,
        (true, true, _) => ColumnType::Number,
        (true, false, true) => ColumnType::Date,
        _ => ColumnType::Text,
    }
}

/// Builds a typed table from header and raw text records.
///
/// A header entry may carry an explicit type as `name:type`
/// (`facid:number`); such columns are enforced and a non-conforming cell is
/// a [`FormatError`]. Unannotated columns are inferred.
pub fn table_from_text(
    name: &str,
    header: &[String],
    records: &[Vec<String>],
) -> Result<Table, FormatError> {
    let mut columns = Vec::with_capacity(header.len());
    for (i, h) in header.iter().enumerate() {
        let (col_name, declared) = match h.rsplit_once(':') {
            Some((n, t)) if ColumnType::from_name(t).is_some() => {
                (n.trim().to_string(), ColumnType::from_name(t))
            }
            _ => (h.trim().to_string(), None),
        };
        if col_name.is_empty() {
            return Err(FormatError {
                row: 0,
                column: alloc::format!("#{}", i + 1),
                reason: "empty column name".into(),
            });
        }
        let ty = declared.unwrap_or_else(|| {
            infer_column_type(records.iter().map(|r| r.get(i).map_or("", String::as_str)))
        });
        columns.push(ColumnSchema { name: col_name, ty });
    }
    let schema = TableSchema {
        name: name.to_string(),
        columns,
    };
    let mut rows = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate() {
        if rec.len() != header.len() {
            return Err(FormatError {
                row: r + 1,
                column: String::new(),
                reason: alloc::format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let mut row = Vec::with_capacity(rec.len());
        for (raw, col) in rec.iter().zip(&schema.columns) {
            let cell = Cell::from_text(raw, col.ty).ok_or_else(|| FormatError {
                row: r + 1,
                column: col.name.clone(),
                reason: alloc::format!("{:?} is not a valid {}", raw, col.ty),
            })?;
            row.push(cell);
        }
        rows.push(row);
    }
    Table::new(schema, rows).map_err(|e| FormatError {
        row: 0,
        column: String::new(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn faculty_header_inference() {
        let header = s(&["facid", "fname", "rank"]);
        let rows = vec![s(&["1082", "Michael", "Prof"]), s(&["1121", "Alan", "AsstProf"])];
        let t = table_from_text("Faculty", &header, &rows).unwrap();
        let types: Vec<_> = t.schema().columns.iter().map(|c| c.ty).collect();
        assert_eq!(types, [ColumnType::Number, ColumnType::Text, ColumnType::Text]);
    }

    #[test]
    fn header_only_table() {
        let t = table_from_text("t", &s(&["a", "b"]), &[]).unwrap();
        assert_eq!(t.rows().len(), 0);
        assert_eq!(t.schema().columns.len(), 2);
    }

    #[test]
    fn declared_number_rejects_text() {
        let header = s(&["id:number", "name"]);
        let rows = vec![s(&["1", "a"]), s(&["abc", "b"])];
        let err = table_from_text("t", &header, &rows).unwrap_err();
        assert_eq!(err.row, 2);
        assert_eq!(err.column, "id");
    }

    #[test]
    fn mixed_column_falls_back_to_text() {
        let header = s(&["v"]);
        let rows = vec![s(&["1"]), s(&["abc"])];
        let t = table_from_text("t", &header, &rows).unwrap();
        assert_eq!(t.schema().columns[0].ty, ColumnType::Text);
    }

    #[test]
    fn dates_and_blanks() {
        let header = s(&["d", "n"]);
        let rows = vec![s(&["2024-03-15", ""]), s(&["", "2"]), s(&["2024-03-16 10:00:00", "3.5"])];
        let t = table_from_text("t", &header, &rows).unwrap();
        assert_eq!(t.schema().columns[0].ty, ColumnType::Date);
        assert_eq!(t.schema().columns[1].ty, ColumnType::Number);
        assert!(t.rows()[0][1].is_null());
    }
}
