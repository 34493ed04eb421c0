use alloc::string::{String, ToString};
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Logical type of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Number,
    Text,
    Date,
}

impl ColumnType {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnType::Number => "number",
            ColumnType::Text => "text",
            ColumnType::Date => "date",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "number" => Some(ColumnType::Number),
            "text" => Some(ColumnType::Text),
            "date" => Some(ColumnType::Date),
            _ => None,
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A calendar date with an optional time of day, proleptic Gregorian.
///
/// Accepted text forms are `YYYY-MM-DD` and `YYYY-MM-DD HH:MM:SS`; the form
/// is remembered so the value prints back exactly as it was read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DateValue {
    pub year: i32,
    pub month: u8,
    pub day: u8,
    pub time: Option<(u8, u8, u8)>,
}

const WEEKDAYS: [&str; 7] = [
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
    "Sunday",
];

impl DateValue {
    pub fn parse(s: &str) -> Option<Self> {
        let b = s.as_bytes();
        if b.len() != 10 && b.len() != 19 {
            return None;
        }
        let digits = |r: core::ops::Range<usize>| -> Option<u32> {
            let mut v = 0u32;
            for &c in &b[r] {
                if !c.is_ascii_digit() {
                    return None;
                }
                v = v * 10 + u32::from(c - b'0');
            }
            Some(v)
        };
        if b[4] != b'-' || b[7] != b'-' {
            return None;
        }
        let year = digits(0..4)? as i32;
        let month = digits(5..7)?;
        let day = digits(8..10)?;
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month as u8) as u32 {
            return None;
        }
        let time = if b.len() == 19 {
            if b[10] != b' ' || b[13] != b':' || b[16] != b':' {
                return None;
            }
            let (h, m, sec) = (digits(11..13)?, digits(14..16)?, digits(17..19)?);
            if h > 23 || m > 59 || sec > 59 {
                return None;
            }
            Some((h as u8, m as u8, sec as u8))
        } else {
            None
        };
        Some(DateValue {
            year,
            month: month as u8,
            day: day as u8,
            time,
        })
    }

    /// Days since 1970-01-01.
    pub fn days_from_epoch(&self) -> i64 {
        // Hinnant's days_from_civil.
        let y = i64::from(self.year) - i64::from(self.month <= 2);
        let era = if y >= 0 { y } else { y - 399 } / 400;
        let yoe = y - era * 400;
        let m = i64::from(self.month);
        let mp = if m > 2 { m - 3 } else { m + 9 };
        let doy = (153 * mp + 2) / 5 + i64::from(self.day) - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        era * 146_097 + doe - 719_468
    }

    /// English weekday name.
    pub fn weekday(&self) -> &'static str {
        // 1970-01-01 was a Thursday (index 3 from Monday).
        let idx = (self.days_from_epoch() + 3).rem_euclid(7);
        WEEKDAYS[idx as usize]
    }

    fn sort_key(&self) -> (i32, u8, u8, (u8, u8, u8), bool) {
        (
            self.year,
            self.month,
            self.day,
            self.time.unwrap_or((0, 0, 0)),
            self.time.is_some(),
        )
    }
}

impl PartialOrd for DateValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DateValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl fmt::Display for DateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)?;
        if let Some((h, m, s)) = self.time {
            write!(f, " {:02}:{:02}:{:02}", h, m, s)?;
        }
        Ok(())
    }
}

pub(crate) fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub(crate) fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 0,
    }
}

/// Parses a plain decimal number: optional sign, digits, optional fraction,
/// optional exponent. Rejects `inf`, `nan`, hex and empty strings.
pub fn parse_decimal(s: &str) -> Option<f64> {
    let t = s.trim();
    let body = t.strip_prefix(['-', '+']).unwrap_or(t);
    let mut saw_digit = false;
    let mut chars = body.char_indices().peekable();
    let mut mantissa_end = body.len();
    let mut seen_dot = false;
    while let Some(&(i, c)) = chars.peek() {
        match c {
            '0'..='9' => saw_digit = true,
            '.' if !seen_dot => seen_dot = true,
            'e' | 'E' => {
                mantissa_end = i;
                break;
            }
            _ => return None,
        }
        chars.next();
    }
    if !saw_digit {
        return None;
    }
    if mantissa_end < body.len() {
        let exp = &body[mantissa_end + 1..];
        let exp = exp.strip_prefix(['-', '+']).unwrap_or(exp);
        if exp.is_empty() || !exp.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// A single typed value.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Number(f64),
    Text(String),
    Date(DateValue),
}

impl Cell {
    pub fn is_null(&self) -> bool {
        matches!(self, Cell::Null)
    }

    pub fn column_type(&self) -> Option<ColumnType> {
        match self {
            Cell::Null => None,
            Cell::Number(_) => Some(ColumnType::Number),
            Cell::Text(_) => Some(ColumnType::Text),
            Cell::Date(_) => Some(ColumnType::Date),
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    /// Converts raw text to a cell of the given type. Empty text is null.
    pub fn from_text(raw: &str, ty: ColumnType) -> Option<Cell> {
        if raw.trim().is_empty() {
            return Some(Cell::Null);
        }
        match ty {
            ColumnType::Number => parse_decimal(raw).map(Cell::Number),
            ColumnType::Date => DateValue::parse(raw.trim()).map(Cell::Date),
            ColumnType::Text => Some(Cell::Text(raw.to_string())),
        }
    }

    /// Total order used for sorting: nulls first, then numbers, dates, text.
    /// Within a kind, numbers compare numerically, dates chronologically and
    /// text byte-wise.
    pub fn total_cmp(&self, other: &Cell) -> Ordering {
        fn rank(c: &Cell) -> u8 {
            match c {
                Cell::Null => 0,
                Cell::Number(_) => 1,
                Cell::Date(_) => 2,
                Cell::Text(_) => 3,
            }
        }
        match (self, other) {
            (Cell::Number(a), Cell::Number(b)) => a.partial_cmp(b).unwrap_or_else(|| a.total_cmp(b)),
            (Cell::Date(a), Cell::Date(b)) => a.cmp(b),
            (Cell::Text(a), Cell::Text(b)) => a.as_bytes().cmp(b.as_bytes()),
            _ => rank(self).cmp(&rank(other)),
        }
    }

    /// Equality used for grouping and join keys, consistent with
    /// [`Cell::total_cmp`]: null equals null and `-0.0` equals `0.0`.
    pub fn group_eq(&self, other: &Cell) -> bool {
        self.total_cmp(other) == Ordering::Equal
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Null => f.write_str("(null)"),
            Cell::Number(v) => write!(f, "{}", v),
            Cell::Text(s) => f.write_str(s),
            Cell::Date(d) => write!(f, "{}", d),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Null => s.serialize_none(),
            Cell::Number(v) => s.serialize_f64(*v),
            Cell::Text(t) => s.serialize_str(t),
            Cell::Date(d) => s.collect_str(d),
        }
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Null => Ok(Cell::Null),
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(Cell::Number)
                .ok_or_else(|| serde::de::Error::custom("number out of range")),
            serde_json::Value::String(s) => Ok(match DateValue::parse(&s) {
                Some(date) => Cell::Date(date),
                None => Cell::Text(s),
            }),
            other => Err(serde::de::Error::custom(alloc::format!(
                "unsupported cell value {}",
                other
            ))),
        }
    }
}
