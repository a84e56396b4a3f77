use super::ast::{NumBase, Span};
use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// `$display` and friends, without the dollar sign.
    SysIdent(String),
    Number {
        size: Option<u32>,
        base: Option<NumBase>,
        digits: String,
    },
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

// Longest first so that maximal munch works with a linear scan.
const PUNCTS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "<=", ">=", "==", "!=", "<<", ">>", "&&", "||", "~^", "^~", "~&", "~|", "(", ")", "[",
    "]", "{", "}", ";", ",", ":", ".", "#", "@", "=", "<", ">", "+", "-", "*", "/", "%", "&", "|", "^", "~", "!", "?",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            let start = i;
            match src[i + 2..].find("*/") {
                Some(end) => i = i + 2 + end + 2,
                None => {
                    return Err(ParseError::new(
                        "unterminated",
                        "unterminated block comment",
                        Span::new(start, src.len()),
                    ))
                }
            }
            continue;
        }
        if c == b'`' {
            let start = i;
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let name = &src[start + 1..i];
            match name {
                "timescale" | "default_nettype" | "resetall" => {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                    continue;
                }
                _ => {
                    return Err(ParseError::new(
                        "no-preprocessor",
                        format!("compiler directive `{name} is not in the supported subset"),
                        Span::new(start, i),
                    ))
                }
            }
        }
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            let start = i;
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                i += 1;
            }
            let text = &src[start..i];
            let tok = if let Some(sys) = text.strip_prefix('$') {
                Tok::SysIdent(sys.to_string())
            } else {
                Tok::Ident(text.to_string())
            };
            out.push(Token {
                tok,
                span: Span::new(start, i),
            });
            continue;
        }
        if c.is_ascii_digit() || c == b'\'' {
            let start = i;
            let (tok, end) = lex_number(src, i)?;
            i = end;
            out.push(Token {
                tok,
                span: Span::new(start, i),
            });
            continue;
        }
        if c == b'"' {
            return Err(ParseError::new(
                "syntax",
                "string literals are not in the supported subset",
                Span::new(i, i + 1),
            ));
        }
        match PUNCTS.iter().find(|p| src[i..].starts_with(**p)) {
            Some(p) => {
                out.push(Token {
                    tok: Tok::Punct(p),
                    span: Span::new(i, i + p.len()),
                });
                i += p.len();
            }
            None => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::new(
                    "syntax",
                    format!("unexpected character {ch:?}"),
                    Span::new(i, i + ch.len_utf8()),
                ));
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span::new(src.len(), src.len()),
    });
    Ok(out)
}

fn lex_number(src: &str, mut i: usize) -> Result<(Tok, usize), ParseError> {
    let bytes = src.as_bytes();
    let start = i;
    let mut size = None;
    if bytes[i].is_ascii_digit() {
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
            i += 1;
        }
        let digits: String = src[start..i].chars().filter(|c| *c != '_').collect();
        if i >= bytes.len() || bytes[i] != b'\'' {
            return Ok((
                Tok::Number {
                    size: None,
                    base: None,
                    digits,
                },
                i,
            ));
        }
        size = Some(
            digits
                .parse::<u32>()
                .map_err(|_| ParseError::new("syntax", "literal size too large", Span::new(start, i)))?,
        );
    }
    // at the apostrophe
    i += 1;
    if i < bytes.len() && (bytes[i] == b's' || bytes[i] == b'S') {
        return Err(ParseError::new(
            "syntax",
            "signed literals are not in the supported subset",
            Span::new(start, i + 1),
        ));
    }
    let base = match bytes.get(i).map(|b| b.to_ascii_lowercase()) {
        Some(b'b') => NumBase::Bin,
        Some(b'h') => NumBase::Hex,
        Some(b'o') => NumBase::Oct,
        Some(b'd') => NumBase::Dec,
        _ => {
            return Err(ParseError::new(
                "syntax",
                "expected base specifier after '",
                Span::new(start, i.min(src.len())),
            ))
        }
    };
    i += 1;
    let dstart = i;
    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'?') {
        i += 1;
    }
    let digits: String = src[dstart..i].chars().filter(|c| *c != '_').collect();
    if digits.is_empty() {
        return Err(ParseError::new(
            "syntax",
            "missing digits in literal",
            Span::new(start, i),
        ));
    }
    if digits
        .chars()
        .any(|c| matches!(c.to_ascii_lowercase(), 'x' | 'z' | '?'))
    {
        return Err(ParseError::new(
            "no-xz-literal",
            "x/z literals are not in the supported subset",
            Span::new(start, i),
        ));
    }
    Ok((
        Tok::Number {
            size,
            base: Some(base),
            digits,
        },
        i,
    ))
}
