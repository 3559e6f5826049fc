//! Shared lexer for the ASCII surface syntax of formulas, terms and `.lal` files.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{col}: {msg}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Nat(u64),
    Forall,
    Backslash,
    Dot,
    Star,
    Lolli,
    Bang,
    Dollar,
    BangDoor,
    ParDoor,
    LParen,
    RParen,
    Eq,
    Colon,
    Semi,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Nat(n) => write!(f, "number `{n}`"),
            Tok::Forall => f.write_str("`forall`"),
            Tok::Backslash => f.write_str("`\\`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Lolli => f.write_str("`-o`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Dollar => f.write_str("`$`"),
            Tok::BangDoor => f.write_str("`~!`"),
            Tok::ParDoor => f.write_str("`~$`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

/// Splits `src` into tokens. `#` starts a comment running to the end of the line.
pub fn lex(src: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let err = |msg: String| SyntaxError { line: l0, col: c0, msg };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tok, len) = match c {
            '\\' => (Tok::Backslash, 1),
            '.' => (Tok::Dot, 1),
            '*' => (Tok::Star, 1),
            '!' => (Tok::Bang, 1),
            '$' => (Tok::Dollar, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '=' => (Tok::Eq, 1),
            ':' => (Tok::Colon, 1),
            ';' => (Tok::Semi, 1),
            ',' => (Tok::Comma, 1),
            '-' if chars.get(i + 1) == Some(&'o') => (Tok::Lolli, 2),
            '~' => match chars.get(i + 1) {
                Some('!') => (Tok::BangDoor, 2),
                Some('$') => (Tok::ParDoor, 2),
                _ => return Err(err("`~` must be followed by `!` or `$`".into())),
            },
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let text: String = chars[i..j].iter().collect();
                let n = text.parse::<u64>().map_err(|_| err(format!("number `{text}` out of range")))?;
                (Tok::Nat(n), j - i)
            }
            c if is_ident_start(c) => {
                let mut j = i;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                let text: String = chars[i..j].iter().collect();
                let tok = if text == "forall" { Tok::Forall } else { Tok::Ident(text) };
                (tok, j - i)
            }
            other => return Err(err(format!("unexpected character `{other}`"))),
        };
        out.push(Spanned { tok, line: l0, col: c0 });
        i += len;
        col += len;
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Cursor over a token vector; parsers for formulas, terms and files share it.
pub struct Cursor {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Cursor {
    pub fn new(src: &str) -> Result<Self, SyntaxError> {
        Ok(Cursor { toks: lex(src)?, pos: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn error(&self, msg: impl Into<String>) -> SyntaxError {
        let s = &self.toks[self.pos];
        SyntaxError { line: s.line, col: s.col, msg: msg.into() }
    }

    pub fn expect(&mut self, want: &Tok) -> Result<(), SyntaxError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {want}, found {}", self.peek())))
        }
    }

    pub fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {other}"))),
        }
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub fn finish(&self) -> Result<(), SyntaxError> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", self.peek())))
        }
    }
}
