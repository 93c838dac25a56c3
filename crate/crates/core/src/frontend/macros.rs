//! Object-like macro expansion.
//!
//! Directive lines are blanked rather than removed so that line numbers in
//! the expanded text still match the original file.

use std::collections::BTreeMap;

use super::FrontendError;

/// Replacement expansion depth beyond which a definition is treated as cyclic.
pub const MAX_EXPANSION_DEPTH: usize = 32;

/// Object-like macros, keyed by name. The replacement is kept as its token
/// spellings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MacroTable {
    entries: BTreeMap<String, Vec<String>>,
}

impl MacroTable {
    pub fn get(&self, name: &str) -> Option<&[String]> {
        self.entries.get(name).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    fn define(&mut self, name: String, replacement: Vec<String>) {
        self.entries.insert(name, replacement);
    }

    fn undefine(&mut self, name: &str) {
        self.entries.remove(name);
    }
}

/// Expands object-like macros in `source` and drops `#include` lines.
///
/// `#pragma` lines pass through untouched. Function-like macros and
/// conditional directives are rejected.
pub fn expand_macros(source: &str) -> Result<(String, MacroTable), FrontendError> {
    let mut table = MacroTable::default();
    let mut out = String::with_capacity(source.len());
    let mut in_block_comment = false;

    for (idx, line) in source.split_inclusive('\n').enumerate() {
        let line_no = idx + 1;
        let (body, newline) = match line.strip_suffix('\n') {
            Some(b) => (b, "\n"),
            None => (line, ""),
        };
        let trimmed = body.trim_start();
        if !in_block_comment && trimmed.starts_with('#') {
            let directive = trimmed[1..].trim_start();
            let (name, rest) = split_word(directive);
            match name {
                "define" => {
                    let (macro_name, replacement) = parse_define(rest, line_no)?;
                    table.define(macro_name, replacement);
                    out.push_str(newline);
                }
                "undef" => {
                    table.undefine(split_word(rest).0);
                    out.push_str(newline);
                }
                "include" => out.push_str(newline),
                "pragma" => {
                    out.push_str(body);
                    out.push_str(newline);
                }
                "" => out.push_str(newline),
                other => {
                    return Err(FrontendError::Unsupported {
                        line: line_no,
                        what: format!("preprocessor directive `#{other}`"),
                    })
                }
            }
            continue;
        }
        let expanded = expand_line(body, &table, line_no, &mut in_block_comment)?;
        out.push_str(&expanded);
        out.push_str(newline);
    }
    Ok((out, table))
}

fn split_word(s: &str) -> (&str, &str) {
    let end = s
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(s.len());
    (&s[..end], &s[end..])
}

fn parse_define(rest: &str, line: usize) -> Result<(String, Vec<String>), FrontendError> {
    let rest = rest.trim_start();
    let (name, after) = split_word(rest);
    if name.is_empty() || name.starts_with(|c: char| c.is_ascii_digit()) {
        return Err(FrontendError::Syntax {
            line,
            column: 1,
            message: "malformed #define".into(),
        });
    }
    if after.starts_with('(') {
        return Err(FrontendError::Unsupported {
            line,
            what: format!("function-like macro `{name}`"),
        });
    }
    let replacement = strip_comments(after);
    let tokens = super::lexer::tokenize(&replacement)
        .map_err(|e| e.at_line(line))?
        .into_iter()
        .map(|t| t.spelling())
        .collect();
    Ok((name.to_string(), tokens))
}

fn strip_comments(s: &str) -> String {
    let mut out = String::new();
    let mut rest = s;
    loop {
        let line_c = rest.find("//");
        let block_c = rest.find("/*");
        match (line_c, block_c) {
            (Some(l), b) if b.is_none_or(|b| l < b) => {
                out.push_str(&rest[..l]);
                return out;
            }
            (_, Some(b)) => {
                out.push_str(&rest[..b]);
                out.push(' ');
                match rest[b + 2..].find("*/") {
                    Some(end) => rest = &rest[b + 2 + end + 2..],
                    None => return out,
                }
            }
            _ => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

/// Replaces macro identifiers in one source line, skipping comments and
/// string/character literals.
fn expand_line(
    line: &str,
    table: &MacroTable,
    line_no: usize,
    in_block_comment: &mut bool,
) -> Result<String, FrontendError> {
    if table.is_empty() && !line.contains("/*") && !*in_block_comment {
        return Ok(line.to_string());
    }
    let bytes = line.as_bytes();
    let mut out = String::with_capacity(line.len());
    let mut i = 0;
    while i < bytes.len() {
        if *in_block_comment {
            match line[i..].find("*/") {
                Some(end) => {
                    out.push_str(&line[i..i + end + 2]);
                    i += end + 2;
                    *in_block_comment = false;
                }
                None => {
                    out.push_str(&line[i..]);
                    i = bytes.len();
                }
            }
            continue;
        }
        let c = bytes[i];
        if line[i..].starts_with("//") {
            out.push_str(&line[i..]);
            break;
        }
        if line[i..].starts_with("/*") {
            *in_block_comment = true;
            out.push_str("/*");
            i += 2;
            continue;
        }
        if c == b'"' || c == b'\'' {
            let end = literal_end(bytes, i);
            out.push_str(&line[i..end]);
            i = end;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &line[start..i];
            let mut active = Vec::new();
            out.push_str(&expand_word(word, table, line_no, &mut active)?);
            continue;
        }
        if c.is_ascii_digit() {
            // Numeric literals, including suffixes such as `10u`.
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                i += 1;
            }
            out.push_str(&line[start..i]);
            continue;
        }
        let ch = line[i..].chars().next().unwrap();
        out.push(ch);
        i += ch.len_utf8();
    }
    Ok(out)
}

fn literal_end(bytes: &[u8], start: usize) -> usize {
    let quote = bytes[start];
    let mut i = start + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b if b == quote => return i + 1,
            _ => i += 1,
        }
    }
    bytes.len()
}

fn expand_word(
    word: &str,
    table: &MacroTable,
    line: usize,
    active: &mut Vec<String>,
) -> Result<String, FrontendError> {
    let Some(replacement) = table.get(word) else {
        return Ok(word.to_string());
    };
    if active.len() >= MAX_EXPANSION_DEPTH || active.iter().any(|a| a == word) {
        return Err(FrontendError::MacroCycle {
            line,
            name: active.first().cloned().unwrap_or_else(|| word.to_string()),
        });
    }
    active.push(word.to_string());
    let mut pieces = Vec::with_capacity(replacement.len());
    for tok in replacement {
        let is_ident = tok
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
        if is_ident {
            pieces.push(expand_word(tok, table, line, active)?);
        } else {
            pieces.push(tok.clone());
        }
    }
    active.pop();
    Ok(join_tokens(&pieces))
}

/// Joins token spellings, inserting a space only where two word-like
/// tokens would otherwise fuse.
fn join_tokens(tokens: &[String]) -> String {
    let mut out = String::new();
    for tok in tokens {
        let fuse = |c: Option<char>| c.is_some_and(|c| c.is_ascii_alphanumeric() || c == '_');
        if fuse(out.chars().last()) && fuse(tok.chars().next()) {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}
