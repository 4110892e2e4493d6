//! Tokenizer shared by the polystore language and the engines' native
//! mini-languages.

use std::fmt;

use crate::error::{Error, Result, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(String),
    Real(String),
    /// Single-quoted string, unescaped.
    SqString(String),
    /// Double-quoted string, unescaped.
    DqString(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Star,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Plus,
    Minus,
    Slash,
    Colon,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Int(s) | TokenKind::Real(s) => write!(f, "number `{s}`"),
            TokenKind::SqString(s) => write!(f, "string '{s}'"),
            TokenKind::DqString(s) => write!(f, "string \"{s}\""),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::Comma => f.write_str("`,`"),
            TokenKind::Dot => f.write_str("`.`"),
            TokenKind::Star => f.write_str("`*`"),
            TokenKind::Eq => f.write_str("`=`"),
            TokenKind::NotEq => f.write_str("`!=`"),
            TokenKind::Lt => f.write_str("`<`"),
            TokenKind::LtEq => f.write_str("`<=`"),
            TokenKind::Gt => f.write_str("`>`"),
            TokenKind::GtEq => f.write_str("`>=`"),
            TokenKind::Plus => f.write_str("`+`"),
            TokenKind::Minus => f.write_str("`-`"),
            TokenKind::Slash => f.write_str("`/`"),
            TokenKind::Colon => f.write_str("`:`"),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            b'(' => {
                i += 1;
                TokenKind::LParen
            }
            b')' => {
                i += 1;
                TokenKind::RParen
            }
            b',' => {
                i += 1;
                TokenKind::Comma
            }
            b'.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                i += 1;
                TokenKind::Dot
            }
            b'*' => {
                i += 1;
                TokenKind::Star
            }
            b'=' => {
                i += 1;
                TokenKind::Eq
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 2;
                TokenKind::NotEq
            }
            b'<' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 2;
                    TokenKind::LtEq
                }
                Some(b'>') => {
                    i += 2;
                    TokenKind::NotEq
                }
                _ => {
                    i += 1;
                    TokenKind::Lt
                }
            },
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    TokenKind::GtEq
                } else {
                    i += 1;
                    TokenKind::Gt
                }
            }
            b'+' => {
                i += 1;
                TokenKind::Plus
            }
            b'-' => {
                i += 1;
                TokenKind::Minus
            }
            b'/' => {
                i += 1;
                TokenKind::Slash
            }
            b':' => {
                i += 1;
                TokenKind::Colon
            }
            b'\'' | b'"' => {
                let quote = c;
                i += 1;
                let mut s = String::new();
                loop {
                    let Some(rel) = src[i..].find(quote as char) else {
                        return Err(Error::syntax(
                            Span::new(start, src.len()),
                            "unterminated string literal",
                            vec![(quote as char).to_string()],
                        ));
                    };
                    s.push_str(&src[i..i + rel]);
                    i += rel + 1;
                    if bytes.get(i) == Some(&quote) {
                        s.push(quote as char);
                        i += 1;
                    } else {
                        break;
                    }
                }
                if quote == b'\'' {
                    TokenKind::SqString(s)
                } else {
                    TokenKind::DqString(s)
                }
            }
            b'0'..=b'9' | b'.' => {
                let mut real = false;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
                    real = true;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        real = true;
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = src[start..i].to_string();
                if real {
                    TokenKind::Real(text)
                } else {
                    TokenKind::Int(text)
                }
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                TokenKind::Ident(src[start..i].to_string())
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(Error::syntax(
                    Span::new(i, i + ch.len_utf8()),
                    format!("unexpected character `{ch}`"),
                    Vec::new(),
                ));
            }
        };
        out.push(Token {
            kind,
            span: Span::new(start, i),
        });
    }
    out.push(Token {
        kind: TokenKind::Eof,
        span: Span::new(src.len(), src.len()),
    });
    Ok(out)
}

/// Token cursor with keyword helpers. Keywords match case-insensitively;
/// identifiers keep their case.
#[derive(Debug, Clone)]
pub struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(src: &str) -> Result<Self> {
        Ok(Cursor {
            tokens: tokenize(src)?,
            pos: 0,
        })
    }

    pub fn from_tokens(tokens: Vec<Token>) -> Self {
        Cursor { tokens, pos: 0 }
    }

    pub fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    pub fn peek_at(&self, n: usize) -> &Token {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)]
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn reset(&mut self, pos: usize) {
        self.pos = pos;
    }

    pub fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    pub fn prev_span(&self) -> Span {
        if self.pos == 0 {
            Span::new(0, 0)
        } else {
            self.tokens[self.pos - 1].span
        }
    }

    pub fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    pub fn is_keyword_at(&self, n: usize, kw: &str) -> bool {
        matches!(&self.peek_at(n).kind, TokenKind::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<Span> {
        if self.is_keyword(kw) {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&[kw]))
        }
    }

    pub fn eat(&mut self, kind: &TokenKind) -> bool {
        if &self.peek().kind == kind {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, kind: TokenKind) -> Result<Span> {
        if self.peek().kind == kind {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&[&kind.to_string()]))
        }
    }

    pub fn expect_ident(&mut self) -> Result<(String, Span)> {
        match &self.peek().kind {
            TokenKind::Ident(s) => {
                let s = s.clone();
                Ok((s, self.advance().span))
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    pub fn expect_dq_string(&mut self) -> Result<String> {
        match &self.peek().kind {
            TokenKind::DqString(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.unexpected(&["double-quoted string"])),
        }
    }

    /// Optionally signed integer literal.
    pub fn expect_int(&mut self) -> Result<i64> {
        let neg = self.eat(&TokenKind::Minus);
        match &self.peek().kind {
            TokenKind::Int(s) => {
                let span = self.peek().span;
                let mag: i128 = s
                    .parse()
                    .map_err(|_| Error::syntax(span, "integer literal out of range", vec![]))?;
                let v = if neg { -mag } else { mag };
                let v = i64::try_from(v).map_err(|_| Error::syntax(span, "integer literal out of range", vec![]))?;
                self.advance();
                Ok(v)
            }
            _ => Err(self.unexpected(&["integer"])),
        }
    }

    pub fn unexpected(&self, expected: &[&str]) -> Error {
        let tok = self.peek();
        Error::syntax(
            tok.span,
            format!(
                "unexpected {}, expected {}",
                tok.kind,
                if expected.is_empty() {
                    "something else".to_string()
                } else {
                    expected.join(" or ")
                }
            ),
            expected.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn expect_eof(&mut self) -> Result<()> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.unexpected(&["end of input"]))
        }
    }
}
