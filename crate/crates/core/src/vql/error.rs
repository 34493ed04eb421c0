use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyInput,
    UnexpectedToken { found: String },
    UnknownChartType(String),
    UnknownBinUnit(String),
    UnknownFunction(String),
    SelectArity(usize),
    InvalidLimit(String),
    InvalidNumber(String),
    DuplicateClause(&'static str),
    UnterminatedString,
    InvalidCharacter(char),
}

/// A VQL syntax error with the byte offset where it was detected and the
/// set of tokens that would have been accepted there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
    pub expected: Vec<String>,
}

impl ParseError {
    pub(crate) fn new(offset: usize, kind: ParseErrorKind) -> Self {
        ParseError {
            offset,
            kind,
            expected: Vec::new(),
        }
    }

    pub(crate) fn expecting(mut self, expected: &[&str]) -> Self {
        self.expected = expected.iter().map(|s| String::from(*s)).collect();
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::EmptyInput => write!(f, "empty VQL")?,
            ParseErrorKind::UnexpectedToken { found } => write!(f, "unexpected {}", found)?,
            ParseErrorKind::UnknownChartType(t) => write!(f, "unknown chart type {}", t)?,
            ParseErrorKind::UnknownBinUnit(u) => write!(f, "unknown bin unit {}", u)?,
            ParseErrorKind::UnknownFunction(n) => write!(f, "unsupported function {}(...)", n)?,
            ParseErrorKind::SelectArity(n) => {
                write!(f, "SELECT must list exactly two items, found {}", n)?
            }
            ParseErrorKind::InvalidLimit(v) => write!(f, "LIMIT must be a positive integer, got {}", v)?,
            ParseErrorKind::InvalidNumber(v) => write!(f, "invalid number {}", v)?,
            ParseErrorKind::DuplicateClause(c) => write!(f, "{} clause given twice", c)?,
            ParseErrorKind::UnterminatedString => write!(f, "unterminated quoted text")?,
            ParseErrorKind::InvalidCharacter(c) => write!(f, "invalid character {:?}", c)?,
        }
        write!(f, " at byte {}", self.offset)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl core::error::Error for ParseError {}
