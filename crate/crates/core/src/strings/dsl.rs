//! Expression language and evaluator.
//!
//! A nested expression is a chain of stages applied left to right: the first
//! stage sees the example input, each later stage sees its predecessor's
//! output. Match indices are 0-based with negative values counted from the end.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum EvalError {
    /// A regex or token match is absent or an index falls outside the matches.
    #[error("no match")]
    NoMatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenType {
    Number,
    Word,
    AlphaNum,
    Digit,
    Char,
    AllCaps,
    Proper,
    Lower,
}

impl TokenType {
    pub const ALL: [TokenType; 8] = [
        TokenType::Number,
        TokenType::Word,
        TokenType::AlphaNum,
        TokenType::Digit,
        TokenType::Char,
        TokenType::AllCaps,
        TokenType::Proper,
        TokenType::Lower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TokenType::Number => "Number",
            TokenType::Word => "Word",
            TokenType::AlphaNum => "AlphaNum",
            TokenType::Digit => "Digit",
            TokenType::Char => "Char",
            TokenType::AllCaps => "AllCaps",
            TokenType::Proper => "Proper",
            TokenType::Lower => "Lower",
        }
    }

    pub fn from_name(name: &str) -> Option<TokenType> {
        TokenType::ALL.into_iter().find(|t| t.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Case {
    AllCaps,
    Proper,
    Lower,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::AllCaps, Case::Proper, Case::Lower];

    pub fn name(self) -> &'static str {
        match self {
            Case::AllCaps => "AllCaps",
            Case::Proper => "Proper",
            Case::Lower => "Lower",
        }
    }

    pub fn from_name(name: &str) -> Option<Case> {
        match name {
            "PropCase" => Some(Case::Proper),
            _ => Case::ALL.into_iter().find(|c| c.name() == name),
        }
    }
}

/// Delimiter characters usable as regexes and in `Replace`.
pub const DELIMITERS: &[u8] = b"&,.?!@()[]- /:;";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regex {
    Type(TokenType),
    Delim(u8),
}

impl Regex {
    /// Types first, then delimiters.
    pub fn all() -> Vec<Regex> {
        TokenType::ALL
            .into_iter()
            .map(Regex::Type)
            .chain(DELIMITERS.iter().map(|&d| Regex::Delim(d)))
            .collect()
    }
}

impl fmt::Display for Regex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regex::Type(t) => f.write_str(t.name()),
            Regex::Delim(d) => write!(f, "{}", *d as char),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Boundary {
    Start,
    End,
}

impl Boundary {
    pub const ALL: [Boundary; 2] = [Boundary::Start, Boundary::End];

    pub fn name(self) -> &'static str {
        match self {
            Boundary::Start => "Start",
            Boundary::End => "End",
        }
    }
}

/// Match indices for `GetToken`, `GetFirst` and `Span`.
pub const INDEX_RANGE: std::ops::RangeInclusive<i8> = -5..=6;
/// Largest |k| accepted by `SubStr` positions (1-based, nonzero).
pub const MAX_POSITION: i8 = 36;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Nesting {
    GetToken(TokenType, i8),
    ToCase(Case),
    GetUpTo(Regex),
    GetFrom(Regex),
    GetAll(TokenType),
    GetFirst(TokenType, i8),
    Replace(u8, u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Substring {
    SubStr(i8, i8),
    Span(Regex, i8, Boundary, Regex, i8, Boundary),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Sub(Substring),
    Nest(Nesting),
}

/// One concatenated piece of a program.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EditExpr {
    Const(u8),
    /// Stages applied left to right; a substring stage may only come first.
    Chain(Vec<Stage>),
}

/// `concat(E, .., E)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct EditProgram {
    pub exprs: Vec<EditExpr>,
}

impl EditProgram {
    pub fn eval(&self, input: &[u8]) -> Result<Vec<u8>, EvalError> {
        let mut out = Vec::new();
        for expr in &self.exprs {
            out.extend(eval_expr(expr, input)?);
        }
        Ok(out)
    }
}

fn is_type_byte(t: TokenType, b: u8) -> bool {
    match t {
        TokenType::Number | TokenType::Digit => b.is_ascii_digit(),
        TokenType::Word => b.is_ascii_alphabetic(),
        TokenType::AlphaNum => b.is_ascii_alphanumeric(),
        TokenType::Char => b != b' ',
        TokenType::AllCaps => b.is_ascii_uppercase(),
        TokenType::Lower => b.is_ascii_lowercase(),
        TokenType::Proper => unreachable!("Proper is not a simple run class"),
    }
}

/// Non-overlapping leftmost-longest matches as `(start, end)` byte ranges.
pub fn find_matches(regex: Regex, s: &[u8]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    match regex {
        Regex::Delim(d) => {
            out.extend(s.iter().enumerate().filter(|(_, &b)| b == d).map(|(i, _)| (i, i + 1)));
        }
        Regex::Type(t @ (TokenType::Digit | TokenType::Char)) => {
            out.extend(
                s.iter()
                    .enumerate()
                    .filter(|(_, &b)| is_type_byte(t, b))
                    .map(|(i, _)| (i, i + 1)),
            );
        }
        Regex::Type(TokenType::Proper) => {
            let mut i = 0;
            while i < s.len() {
                if s[i].is_ascii_uppercase() {
                    let start = i;
                    i += 1;
                    while i < s.len() && s[i].is_ascii_lowercase() {
                        i += 1;
                    }
                    out.push((start, i));
                } else {
                    i += 1;
                }
            }
        }
        Regex::Type(t) => {
            let mut i = 0;
            while i < s.len() {
                if is_type_byte(t, s[i]) {
                    let start = i;
                    while i < s.len() && is_type_byte(t, s[i]) {
                        i += 1;
                    }
                    out.push((start, i));
                } else {
                    i += 1;
                }
            }
        }
    }
    out
}

/// Resolve a 0-based index (negative from the end) against `len` items.
fn resolve(len: usize, index: i8) -> Option<usize> {
    if index >= 0 {
        let i = index as usize;
        (i < len).then_some(i)
    } else {
        let back = index.unsigned_abs() as usize;
        (back <= len).then(|| len - back)
    }
}

/// Resolve a 1-based position (negative from the end) to a 0-based offset.
fn resolve_position(len: usize, k: i8) -> Option<usize> {
    match k {
        0 => None,
        k if k > 0 => {
            let i = k as usize - 1;
            (i < len).then_some(i)
        }
        k => {
            let back = k.unsigned_abs() as usize;
            (back <= len).then(|| len - back)
        }
    }
}

fn to_case(case: Case, s: &[u8]) -> Vec<u8> {
    match case {
        Case::AllCaps => s.to_ascii_uppercase(),
        Case::Lower => s.to_ascii_lowercase(),
        Case::Proper => {
            let mut out = Vec::with_capacity(s.len());
            let mut word_start = true;
            for &b in s {
                if b.is_ascii_alphabetic() {
                    out.push(if word_start { b.to_ascii_uppercase() } else { b.to_ascii_lowercase() });
                    word_start = false;
                } else {
                    out.push(b);
                    word_start = true;
                }
            }
            out
        }
    }
}

pub fn eval_nesting(n: &Nesting, s: &[u8]) -> Result<Vec<u8>, EvalError> {
    match *n {
        Nesting::GetToken(t, i) => {
            let m = find_matches(Regex::Type(t), s);
            let (a, b) = m[resolve(m.len(), i).ok_or(EvalError::NoMatch)?];
            Ok(s[a..b].to_vec())
        }
        Nesting::ToCase(case) => Ok(to_case(case, s)),
        Nesting::GetUpTo(r) => {
            let &(_, end) = find_matches(r, s).first().ok_or(EvalError::NoMatch)?;
            Ok(s[..end].to_vec())
        }
        Nesting::GetFrom(r) => {
            let &(_, end) = find_matches(r, s).last().ok_or(EvalError::NoMatch)?;
            Ok(s[end..].to_vec())
        }
        Nesting::GetAll(t) => {
            let m = find_matches(Regex::Type(t), s);
            if m.is_empty() {
                return Err(EvalError::NoMatch);
            }
            Ok(m.iter().map(|&(a, b)| &s[a..b]).collect::<Vec<_>>().join(&b' '))
        }
        Nesting::GetFirst(t, i) => {
            let m = find_matches(Regex::Type(t), s);
            if m.is_empty() {
                return Err(EvalError::NoMatch);
            }
            // matches up to and including index i; positive indices past the end take all
            let last = if i >= 0 {
                (i as usize).min(m.len() - 1)
            } else {
                resolve(m.len(), i).ok_or(EvalError::NoMatch)?
            };
            Ok(m[..=last].iter().flat_map(|&(a, b)| s[a..b].iter().copied()).collect())
        }
        Nesting::Replace(from, to) => Ok(s.iter().map(|&b| if b == from { to } else { b }).collect()),
    }
}

pub fn eval_substring(f: &Substring, s: &[u8]) -> Result<Vec<u8>, EvalError> {
    match *f {
        Substring::SubStr(k1, k2) => {
            let a = resolve_position(s.len(), k1).ok_or(EvalError::NoMatch)?;
            let b = resolve_position(s.len(), k2).ok_or(EvalError::NoMatch)?;
            if a > b {
                return Err(EvalError::NoMatch);
            }
            Ok(s[a..=b].to_vec())
        }
        Substring::Span(r1, i1, y1, r2, i2, y2) => {
            let boundary = |r: Regex, i: i8, y: Boundary| -> Result<usize, EvalError> {
                let m = find_matches(r, s);
                let (a, b) = m[resolve(m.len(), i).ok_or(EvalError::NoMatch)?];
                Ok(match y {
                    Boundary::Start => a,
                    Boundary::End => b,
                })
            };
            let (p1, p2) = (boundary(r1, i1, y1)?, boundary(r2, i2, y2)?);
            if p1 > p2 {
                return Err(EvalError::NoMatch);
            }
            Ok(s[p1..p2].to_vec())
        }
    }
}

pub fn eval_stage(stage: &Stage, s: &[u8]) -> Result<Vec<u8>, EvalError> {
    match stage {
        Stage::Sub(f) => eval_substring(f, s),
        Stage::Nest(n) => eval_nesting(n, s),
    }
}

/// Evaluate a stage chain on `input`.
pub fn eval_chain(stages: &[Stage], input: &[u8]) -> Result<Vec<u8>, EvalError> {
    let mut current = input.to_vec();
    for stage in stages {
        current = eval_stage(stage, &current)?;
    }
    Ok(current)
}

pub fn eval_expr(expr: &EditExpr, input: &[u8]) -> Result<Vec<u8>, EvalError> {
    match expr {
        EditExpr::Const(c) => Ok(vec![*c]),
        EditExpr::Chain(stages) => eval_chain(stages, input),
    }
}
