use crate::ast::Span;

use super::SurfaceError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Kw(k) => format!("`{k}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

pub const KEYWORDS: &[&str] = &[
    "let", "letrec", "val", "assume", "bound", "qualif", "uninterp", "forall", "in", "true", "false",
    "if", "then", "else", "not",
];

// Longest first so that maximal munch works with a linear scan.
const SYMBOLS: &[&str] = &[
    "<=>", "/\\", "::", "->", "=>", "<=", ">=", "==", "!=", "&&", "||", "@[", "@{", "(", ")", "{", "}", "[",
    "]", "<", ">", "=", ":", ",", "|", "+", "-", "*", "\\", ".", ";",
];

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$' || c == '\''
}

pub fn lex(src: &str) -> Result<Vec<Token>, SurfaceError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
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
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let span = Span::new(line, col);
        if ident_start(c) {
            let start = i;
            while i < chars.len() && ident_char(chars[i]) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word),
            };
            out.push(Token { tok, span });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let n = digits.parse::<i64>().map_err(|_| SurfaceError::Syntax {
                span,
                expected: vec!["integer literal within 64 bits".into()],
                found: digits.clone(),
            })?;
            out.push(Token { tok: Tok::Int(n), span });
            continue;
        }
        let rest = &chars[i..];
        let sym = SYMBOLS.iter().find(|s| {
            let sc: Vec<char> = s.chars().collect();
            rest.len() >= sc.len() && rest[..sc.len()] == sc[..]
        });
        match sym {
            Some(s) => {
                let n = s.chars().count();
                i += n;
                col += n as u32;
                out.push(Token { tok: Tok::Sym(s), span });
            }
            None => {
                return Err(SurfaceError::Syntax {
                    span,
                    expected: vec!["token".into()],
                    found: format!("character {c:?}"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(line, col) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_primes_and_dollars() {
        let toks = lex("x'1 $bf0 -- comment\n<=>").unwrap();
        let kinds: Vec<Tok> = toks.into_iter().map(|t| t.tok).collect();
        assert_eq!(
            kinds,
            vec![Tok::Ident("x'1".into()), Tok::Ident("$bf0".into()), Tok::Sym("<=>"), Tok::Eof]
        );
    }

    #[test]
    fn reports_position_of_bad_character() {
        match lex("let x =\n  #") {
            Err(SurfaceError::Syntax { span, .. }) => assert_eq!(span, Span::new(2, 3)),
            other => panic!("{other:?}"),
        }
    }
}
