//! Canonical table file format.
//!
//! ```text
//! #schema:id:int,age:int,name:text
//! 1,70,"Ada ""the"" patient"
//! 2,,"Bob"
//! ```
//!
//! Text is always double-quoted (`""` escapes a quote); an empty unquoted
//! field is null.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::value::{format_real, CanonicalTable, Column, Tag, Value};

pub fn write_string(table: &CanonicalTable) -> String {
    let mut out = String::from("#schema:");
    let header: Vec<String> = table.schema.iter().map(|c| format!("{}:{}", c.name, c.tag)).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in &table.rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            match v {
                Value::Null => {}
                Value::Int(x) => {
                    let _ = write!(out, "{x}");
                }
                Value::Real(x) => out.push_str(&format_real(*x)),
                Value::Text(s) => {
                    out.push('"');
                    out.push_str(&s.replace('"', "\"\""));
                    out.push('"');
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, table: &CanonicalTable) -> Result<()> {
    std::fs::write(path, write_string(table))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<CanonicalTable> {
    let text = std::fs::read_to_string(path)?;
    parse(&text)
}

fn cif_err(line: usize, message: impl Into<String>) -> Error {
    Error::Cif {
        line,
        message: message.into(),
    }
}

fn parse_header(line: &str) -> Result<Vec<Column>> {
    let rest = line
        .strip_prefix("#schema:")
        .ok_or_else(|| cif_err(1, "header must start with `#schema:`"))?;
    if rest.is_empty() {
        return Err(cif_err(1, "schema has no columns"));
    }
    let mut schema = Vec::new();
    for part in rest.split(',') {
        let (name, tag) = part
            .rsplit_once(':')
            .ok_or_else(|| cif_err(1, format!("column `{part}` lacks a `:<tag>`")))?;
        if name.is_empty() {
            return Err(cif_err(1, "empty column name"));
        }
        let tag = Tag::parse(tag).ok_or_else(|| cif_err(1, format!("unknown tag `{tag}`")))?;
        if schema.iter().any(|c: &Column| c.name == name) {
            return Err(cif_err(1, format!("duplicate column `{name}`")));
        }
        schema.push(Column::new(name, tag));
    }
    Ok(schema)
}

enum Field {
    Bare(String),
    Quoted(String),
}

pub fn parse(text: &str) -> Result<CanonicalTable> {
    let header_end = text.find('\n').unwrap_or(text.len());
    let schema = parse_header(text[..header_end].trim_end_matches('\r'))?;
    let body = text.get(header_end + 1..).unwrap_or("");

    let mut rows = Vec::new();
    let mut line = 2usize;
    let mut chars = body.chars().peekable();
    while chars.peek().is_some() {
        let row_line = line;
        let mut fields = Vec::new();
        loop {
            // one field
            let field = if chars.peek() == Some(&'"') {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err(cif_err(row_line, "unterminated quoted field")),
                        Some('"') => {
                            if chars.peek() == Some(&'"') {
                                chars.next();
                                s.push('"');
                            } else {
                                break;
                            }
                        }
                        Some(c) => {
                            if c == '\n' {
                                line += 1;
                            }
                            s.push(c)
                        }
                    }
                }
                Field::Quoted(s)
            } else {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c == ',' || c == '\n' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                Field::Bare(s.trim_end_matches('\r').to_string())
            };
            fields.push(field);
            match chars.next() {
                Some(',') => continue,
                Some('\n') | None => {
                    line += 1;
                    break;
                }
                Some(c) => return Err(cif_err(row_line, format!("unexpected `{c}` after quoted field"))),
            }
        }
        if fields.len() != schema.len() {
            return Err(cif_err(
                row_line,
                format!("expected {} fields, found {}", schema.len(), fields.len()),
            ));
        }
        let mut row = Vec::with_capacity(fields.len());
        for (field, col) in fields.into_iter().zip(&schema) {
            let v = match field {
                Field::Quoted(s) => {
                    if col.tag != Tag::Text {
                        return Err(cif_err(
                            row_line,
                            format!("quoted value in {} column `{}`", col.tag, col.name),
                        ));
                    }
                    Value::Text(s)
                }
                Field::Bare(s) if s.is_empty() => Value::Null,
                Field::Bare(s) => match col.tag {
                    Tag::Int => Value::Int(
                        s.parse()
                            .map_err(|_| cif_err(row_line, format!("`{s}` is not an int (column `{}`)", col.name)))?,
                    ),
                    Tag::Real => {
                        let r: f64 = s
                            .parse()
                            .map_err(|_| cif_err(row_line, format!("`{s}` is not a real (column `{}`)", col.name)))?;
                        if r.is_nan() {
                            return Err(cif_err(row_line, "NaN is not a legal real"));
                        }
                        Value::Real(r)
                    }
                    Tag::Text => return Err(cif_err(row_line, format!("unquoted text in column `{}`", col.name))),
                },
            };
            row.push(v);
        }
        rows.push(row);
    }
    Ok(CanonicalTable::new(schema, rows))
}
