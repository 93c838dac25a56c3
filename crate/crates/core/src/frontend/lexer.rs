use super::FrontendError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    /// Floating literal, kept as written; never analyzable.
    Float(String),
    Str(String),
    Char(i64),
    Punct(&'static str),
    /// Text following `#pragma`, comments stripped.
    Pragma(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

impl Token {
    pub fn spelling(&self) -> String {
        match &self.kind {
            TokenKind::Ident(s) | TokenKind::Float(s) => s.clone(),
            TokenKind::Int(n) => n.to_string(),
            TokenKind::Str(s) => format!("\"{s}\""),
            TokenKind::Char(c) => c.to_string(),
            TokenKind::Punct(p) => (*p).to_string(),
            TokenKind::Pragma(p) => format!("#pragma {p}"),
        }
    }
}

const PUNCTS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<",
    ">>", "<=", ">=", "==", "!=", "&&", "||", "+", "-", "*", "/", "%", "<", ">", "=", "!", "&",
    "|", "^", "~", "?", ":", ";", ",", ".", "(", ")", "[", "]", "{", "}",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, FrontendError> {
    Lexer::new(src).run()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    line_start: usize,
    at_line_start: bool,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            pos: 0,
            line: 1,
            line_start: 0,
            at_line_start: true,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn column(&self) -> usize {
        self.pos - self.line_start + 1
    }

    fn error(&self, message: impl Into<String>) -> FrontendError {
        FrontendError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn bump(&mut self, n: usize) {
        for (i, c) in self.src[self.pos..self.pos + n].char_indices() {
            if c == '\n' {
                self.line += 1;
                self.line_start = self.pos + i + 1;
                self.at_line_start = true;
            }
        }
        self.pos += n;
    }

    fn run(mut self) -> Result<Vec<Token>, FrontendError> {
        let mut tokens = Vec::new();
        loop {
            self.skip_trivia()?;
            if self.pos >= self.src.len() {
                return Ok(tokens);
            }
            let (line, column) = (self.line, self.column());
            let starts_line = self.at_line_start;
            self.at_line_start = false;
            let kind = self.next_kind(starts_line)?;
            tokens.push(Token { kind, line, column });
        }
    }

    fn skip_trivia(&mut self) -> Result<(), FrontendError> {
        loop {
            let rest = self.rest();
            let Some(c) = rest.chars().next() else {
                return Ok(());
            };
            if c.is_whitespace() {
                self.bump(c.len_utf8());
            } else if rest.starts_with("//") {
                let end = rest.find('\n').unwrap_or(rest.len());
                self.bump(end);
            } else if let Some(body) = rest.strip_prefix("/*") {
                match body.find("*/") {
                    Some(end) => self.bump(end + 4),
                    None => return Err(self.error("unterminated block comment")),
                }
            } else if rest.starts_with("\\\n") {
                self.bump(2);
            } else {
                return Ok(());
            }
        }
    }

    fn next_kind(&mut self, starts_line: bool) -> Result<TokenKind, FrontendError> {
        let rest = self.rest();
        let c = rest.chars().next().unwrap();

        if c == '#' {
            if !starts_line {
                return Err(self.error("stray `#`"));
            }
            let end = rest.find('\n').unwrap_or(rest.len());
            let directive = rest[1..end].trim_start();
            let Some(text) = directive.strip_prefix("pragma") else {
                return Err(self.error(format!("unexpected directive `#{}`", directive.trim())));
            };
            let text = strip_line_comment(text).trim().to_string();
            self.bump(end);
            return Ok(TokenKind::Pragma(text));
        }

        if c.is_ascii_alphabetic() || c == '_' {
            let end = rest
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .unwrap_or(rest.len());
            let word = rest[..end].to_string();
            self.bump(end);
            return Ok(TokenKind::Ident(word));
        }

        if c.is_ascii_digit() || (c == '.' && rest[1..].starts_with(|d: char| d.is_ascii_digit())) {
            return self.number();
        }

        if c == '"' {
            let end = quoted_end(rest).ok_or_else(|| self.error("unterminated string literal"))?;
            let body = rest[1..end - 1].to_string();
            self.bump(end);
            return Ok(TokenKind::Str(body));
        }

        if c == '\'' {
            let end = quoted_end(rest).ok_or_else(|| self.error("unterminated character literal"))?;
            let body = &rest[1..end - 1];
            let value = match body {
                "\\n" => 10,
                "\\t" => 9,
                "\\0" => 0,
                "\\\\" => 92,
                "\\'" => 39,
                _ if body.chars().count() == 1 => body.chars().next().unwrap() as i64,
                _ => return Err(self.error(format!("unsupported character literal '{body}'"))),
            };
            self.bump(end);
            return Ok(TokenKind::Char(value));
        }

        for p in PUNCTS {
            if rest.starts_with(p) {
                self.bump(p.len());
                return Ok(TokenKind::Punct(p));
            }
        }
        Err(self.error(format!("unexpected character `{c}`")))
    }

    fn number(&mut self) -> Result<TokenKind, FrontendError> {
        let rest = self.rest();
        let end = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '.' || c == '_'))
            .unwrap_or(rest.len());
        let raw = &rest[..end];
        let lower = raw.to_ascii_lowercase();
        let is_hex = lower.starts_with("0x");
        let is_float = !is_hex && (lower.contains('.') || lower.contains('e') || lower.ends_with('f'));
        let kind = if is_float {
            TokenKind::Float(raw.to_string())
        } else {
            let digits = lower.trim_end_matches(['u', 'l']);
            let parsed = if let Some(hex) = digits.strip_prefix("0x") {
                i64::from_str_radix(hex, 16)
            } else if digits.len() > 1 && digits.starts_with('0') {
                i64::from_str_radix(&digits[1..], 8)
            } else {
                digits.parse::<i64>()
            };
            TokenKind::Int(parsed.map_err(|_| self.error(format!("invalid integer literal `{raw}`")))?)
        };
        self.bump(end);
        Ok(kind)
    }
}

fn strip_line_comment(s: &str) -> &str {
    let cut = [s.find("//"), s.find("/*")].into_iter().flatten().min();
    match cut {
        Some(i) => &s[..i],
        None => s,
    }
}

fn quoted_end(s: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    let quote = bytes[0];
    let mut i = 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'\n' => return None,
            b if b == quote => return Some(i + 1),
            _ => i += 1,
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn longest_punctuator_wins() {
        assert_eq!(
            kinds("a+=b++<=c"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Punct("+="),
                TokenKind::Ident("b".into()),
                TokenKind::Punct("++"),
                TokenKind::Punct("<="),
                TokenKind::Ident("c".into()),
            ]
        );
    }

    #[test]
    fn pragma_lines_become_single_tokens() {
        let toks = tokenize("x;\n  #pragma drs //needed for analysis\nfor").unwrap();
        assert_eq!(toks[2].kind, TokenKind::Pragma("drs".into()));
        assert_eq!(toks[2].line, 2);
        assert_eq!(toks[3].line, 3);
    }

    #[test]
    fn literals() {
        assert_eq!(
            kinds("0x1F 010 42u 1.5 'a'"),
            vec![
                TokenKind::Int(31),
                TokenKind::Int(8),
                TokenKind::Int(42),
                TokenKind::Float("1.5".into()),
                TokenKind::Char(97),
            ]
        );
    }

    #[test]
    fn errors_carry_positions() {
        let err = tokenize("int x;\n  int y = $;").unwrap_err();
        assert_eq!(
            err,
            FrontendError::Syntax {
                line: 2,
                column: 11,
                message: "unexpected character `$`".into()
            }
        );
    }
}
