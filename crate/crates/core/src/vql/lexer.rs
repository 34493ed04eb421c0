use alloc::string::String;
use alloc::vec::Vec;

use super::error::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Word(String),
    QuotedIdent(String),
    Str(String),
    Number(String),
    Comma,
    LParen,
    RParen,
    Dot,
    Star,
    Minus,
    Op(&'static str),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        use alloc::format;
        match self {
            Tok::Word(w) => w.clone(),
            Tok::QuotedIdent(w) => format!("`{}`", w),
            Tok::Str(s) => format!("'{}'", s),
            Tok::Number(n) => n.clone(),
            Tok::Comma => ",".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Dot => ".".into(),
            Tok::Star => "*".into(),
            Tok::Minus => "-".into(),
            Tok::Op(o) => (*o).into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b',' => {
                out.push(Token { tok: Tok::Comma, offset: start });
                i += 1;
            }
            b'(' => {
                out.push(Token { tok: Tok::LParen, offset: start });
                i += 1;
            }
            b')' => {
                out.push(Token { tok: Tok::RParen, offset: start });
                i += 1;
            }
            b'.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                out.push(Token { tok: Tok::Dot, offset: start });
                i += 1;
            }
            b'*' => {
                out.push(Token { tok: Tok::Star, offset: start });
                i += 1;
            }
            b'-' => {
                out.push(Token { tok: Tok::Minus, offset: start });
                i += 1;
            }
            b'=' => {
                out.push(Token { tok: Tok::Op("="), offset: start });
                i += 1;
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                out.push(Token { tok: Tok::Op("!="), offset: start });
                i += 2;
            }
            b'<' => {
                let (op, len) = match bytes.get(i + 1) {
                    Some(b'=') => ("<=", 2),
                    Some(b'>') => ("!=", 2),
                    _ => ("<", 1),
                };
                out.push(Token { tok: Tok::Op(op), offset: start });
                i += len;
            }
            b'>' => {
                let (op, len) = if bytes.get(i + 1) == Some(&b'=') { (">=", 2) } else { (">", 1) };
                out.push(Token { tok: Tok::Op(op), offset: start });
                i += len;
            }
            b'\'' | b'"' | b'`' => {
                let quote = c;
                let mut text = String::new();
                i += 1;
                loop {
                    let Some(ch) = src[i..].chars().next() else {
                        return Err(ParseError::new(start, ParseErrorKind::UnterminatedString));
                    };
                    if ch as u32 == u32::from(quote) {
                        if bytes.get(i + 1) == Some(&quote) {
                            text.push(ch);
                            i += 2;
                            continue;
                        }
                        i += 1;
                        break;
                    }
                    text.push(ch);
                    i += ch.len_utf8();
                }
                let tok = if quote == b'`' { Tok::QuotedIdent(text) } else { Tok::Str(text) };
                out.push(Token { tok, offset: start });
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                // A number glued to letters (`1abc`) is not a literal.
                if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                    return Err(ParseError::new(
                        start,
                        ParseErrorKind::InvalidCharacter(bytes[i] as char),
                    ));
                }
                out.push(Token { tok: Tok::Number(src[start..i].into()), offset: start });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Word(src[start..i].into()), offset: start });
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::new(start, ParseErrorKind::InvalidCharacter(ch)));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, offset: src.len() });
    Ok(out)
}
