use super::parser::{ParseError, ParseErrorKind};
use super::Span;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    /// Lowercase identifier or keyword.
    Ident(String),
    /// Capitalized identifier.
    Upper(String),
    /// `'a`
    LtVar(String),
    /// `^i`
    LtId(String),
    /// `%p`
    MultVar(String),
    /// `#a`
    TyVar(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Upper(s) => format!("`{s}`"),
            Tok::LtVar(s) => format!("`'{s}`"),
            Tok::LtId(s) => format!("`^{s}`"),
            Tok::MultVar(s) => format!("`%{s}`"),
            Tok::TyVar(s) => format!("`#{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn ends_operand(&self) -> bool {
        matches!(self, Tok::Ident(_) | Tok::Upper(_) | Tok::Int(_) | Tok::Sym(")") | Tok::Sym("}") | Tok::Sym("]"))
    }
}

// Longest symbols first.
const SYMBOLS: &[&str] = &[
    ">>=", "->", "-o", "<=", ">=", "==", "!=", "@", "\\", ".", "(", ")", "{", "}", "[", "]", ",", ";", ":", "=", "|",
    "+", "-", "*", "<", ">", "&", "_",
];

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out: Vec<(Tok, Span)> = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for k in 0..n {
            if chars[*i + k] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let span = Span { line, col };
        let word = |start: usize| {
            let mut j = start;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            (chars[start..j].iter().collect::<String>(), j - start)
        };
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) && !out.last().is_some_and(|(t, _)| t.ends_operand())) {
            let neg = c == '-';
            let start = if neg { i + 1 } else { i };
            let mut j = start;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let digits: String = chars[start..j].iter().collect();
            let n: i64 = digits.parse().map_err(|_| ParseError::new(ParseErrorKind::Syntax, span, format!("integer literal `{digits}` out of range")))?;
            out.push((Tok::Int(if neg { -n } else { n }), span));
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if c.is_ascii_alphabetic() || (c == '_' && chars.get(i + 1).is_some_and(|d| is_ident_char(*d))) {
            let (w, n) = word(i);
            let tok = if c.is_ascii_uppercase() { Tok::Upper(w) } else { Tok::Ident(w) };
            out.push((tok, span));
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if matches!(c, '\'' | '^' | '%' | '#') {
            let (w, n) = word(i + 1);
            if n == 0 || !chars[i + 1].is_ascii_alphabetic() {
                return Err(ParseError::new(ParseErrorKind::Syntax, span, format!("sigil `{c}` must be followed by a name")));
            }
            let tok = match c {
                '\'' => Tok::LtVar(w),
                '^' => Tok::LtId(w),
                '%' => Tok::MultVar(w),
                _ => Tok::TyVar(w),
            };
            out.push((tok, span));
            advance(&mut i, &mut line, &mut col, n + 1);
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let sym = SYMBOLS.iter().copied().find(|s| {
            rest.starts_with(s) && !(*s == "-o" && chars.get(i + 2).is_some_and(|d| is_ident_char(*d)))
        });
        match sym {
            Some(s) => {
                out.push((Tok::Sym(s), span));
                advance(&mut i, &mut line, &mut col, s.chars().count());
            }
            None => {
                let mut j = i;
                while j < chars.len() && !chars[j].is_whitespace() && !chars[j].is_ascii_alphanumeric() && !"()[]{},;".contains(chars[j]) {
                    j += 1;
                }
                let text: String = chars[i..j.max(i + 1)].iter().collect();
                return Err(ParseError::new(ParseErrorKind::UnknownOperator, span, format!("unknown operator `{text}`")));
            }
        }
    }
    out.push((Tok::Eof, Span { line, col }));
    Ok(out)
}
