//! Action tokens and their concrete syntax, e.g.
//! `GetToken1(Number), GetToken2(1), Commit`.

use std::fmt;

use super::dsl::{
    Boundary, Case, EditExpr, EditProgram, Nesting, Regex, Stage, Substring, TokenType, DELIMITERS, INDEX_RANGE,
    MAX_POSITION,
};
use crate::mdp::{Action, Grammar, MdpError, Production};

/// One REPL action of the string domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Commit,
    Const(u8),
    GetToken1(TokenType),
    GetToken2(i8),
    ToCase(Case),
    GetUpTo(Regex),
    GetFrom(Regex),
    GetAll(TokenType),
    GetFirst1(TokenType),
    GetFirst2(i8),
    SubStr1(i8),
    SubStr2(i8),
    Span1(Regex),
    Span2(i8),
    Span3(Boundary),
    Span4(Regex),
    Span5(i8),
    Span6(Boundary),
    Replace1(u8),
    Replace2(u8),
}

/// Production ids, in grammar order.
pub mod ids {
    pub const COMMIT: u16 = 0;
    pub const CONST: u16 = 1;
    pub const GET_TOKEN1: u16 = 2;
    pub const GET_TOKEN2: u16 = 3;
    pub const TO_CASE: u16 = 4;
    pub const GET_UP_TO: u16 = 5;
    pub const GET_FROM: u16 = 6;
    pub const GET_ALL: u16 = 7;
    pub const GET_FIRST1: u16 = 8;
    pub const GET_FIRST2: u16 = 9;
    pub const SUB_STR1: u16 = 10;
    pub const SUB_STR2: u16 = 11;
    pub const SPAN1: u16 = 12;
    pub const SPAN6: u16 = 17;
    pub const REPLACE1: u16 = 18;
    pub const REPLACE2: u16 = 19;
}

const NAMES: [&str; 20] = [
    "Commit", "Const", "GetToken1", "GetToken2", "ToCase", "GetUpTo", "GetFrom", "GetAll", "GetFirst1",
    "GetFirst2", "SubStr1", "SubStr2", "Span1", "Span2", "Span3", "Span4", "Span5", "Span6", "Replace1",
    "Replace2",
];

/// Printable ASCII, the `Const` alphabet.
pub fn const_alphabet() -> Vec<u8> {
    (32u8..=126).collect()
}

pub fn indices() -> Vec<i8> {
    INDEX_RANGE.collect()
}

pub fn positions() -> Vec<i8> {
    (-MAX_POSITION..=MAX_POSITION).filter(|&k| k != 0).collect()
}

#[derive(Clone, Copy)]
enum ArgKind {
    None,
    Char,
    Type,
    Index,
    Case,
    Regex,
    Position,
    Boundary,
    Delim,
}

fn arg_kind(production: u16) -> ArgKind {
    match production {
        0 => ArgKind::None,
        1 => ArgKind::Char,
        2 | 7 | 8 => ArgKind::Type,
        3 | 9 | 13 | 16 => ArgKind::Index,
        4 => ArgKind::Case,
        5 | 6 | 12 | 15 => ArgKind::Regex,
        10 | 11 => ArgKind::Position,
        14 | 17 => ArgKind::Boundary,
        _ => ArgKind::Delim,
    }
}

fn kind_size(kind: ArgKind) -> usize {
    match kind {
        ArgKind::None => 0,
        ArgKind::Char => const_alphabet().len(),
        ArgKind::Type => TokenType::ALL.len(),
        ArgKind::Index => indices().len(),
        ArgKind::Case => Case::ALL.len(),
        ArgKind::Regex => Regex::all().len(),
        ArgKind::Position => positions().len(),
        ArgKind::Boundary => 2,
        ArgKind::Delim => DELIMITERS.len(),
    }
}

fn kind_slot_name(kind: ArgKind) -> &'static str {
    match kind {
        ArgKind::None => "",
        ArgKind::Char => "char",
        ArgKind::Type => "type",
        ArgKind::Index => "index",
        ArgKind::Case => "case",
        ArgKind::Regex => "regex",
        ArgKind::Position => "position",
        ArgKind::Boundary => "boundary",
        ArgKind::Delim => "delimiter",
    }
}

/// The string-editing action grammar: one production per token kind.
pub fn grammar() -> Grammar {
    let productions = NAMES
        .iter()
        .enumerate()
        .map(|(id, name)| {
            let kind = arg_kind(id as u16);
            match kind {
                ArgKind::None => Production::new(name, &[], 0),
                _ => Production::new(name, &[(kind_slot_name(kind), kind_size(kind))], 0),
            }
        })
        .collect();
    Grammar { name: "strings/robustfill-repl".into(), productions }
}

fn pos_of<T: PartialEq>(values: &[T], v: &T) -> u16 {
    values.iter().position(|x| x == v).expect("value in vocabulary") as u16
}

impl Token {
    pub fn production(&self) -> u16 {
        match self {
            Token::Commit => 0,
            Token::Const(_) => 1,
            Token::GetToken1(_) => 2,
            Token::GetToken2(_) => 3,
            Token::ToCase(_) => 4,
            Token::GetUpTo(_) => 5,
            Token::GetFrom(_) => 6,
            Token::GetAll(_) => 7,
            Token::GetFirst1(_) => 8,
            Token::GetFirst2(_) => 9,
            Token::SubStr1(_) => 10,
            Token::SubStr2(_) => 11,
            Token::Span1(_) => 12,
            Token::Span2(_) => 13,
            Token::Span3(_) => 14,
            Token::Span4(_) => 15,
            Token::Span5(_) => 16,
            Token::Span6(_) => 17,
            Token::Replace1(_) => 18,
            Token::Replace2(_) => 19,
        }
    }

    /// Index of the bound argument within its slot vocabulary.
    fn arg_index(&self) -> Option<u16> {
        Some(match *self {
            Token::Commit => return None,
            Token::Const(c) => pos_of(&const_alphabet(), &c),
            Token::GetToken1(t) | Token::GetAll(t) | Token::GetFirst1(t) => pos_of(&TokenType::ALL, &t),
            Token::GetToken2(i) | Token::GetFirst2(i) | Token::Span2(i) | Token::Span5(i) => pos_of(&indices(), &i),
            Token::ToCase(c) => pos_of(&Case::ALL, &c),
            Token::GetUpTo(r) | Token::GetFrom(r) | Token::Span1(r) | Token::Span4(r) => pos_of(&Regex::all(), &r),
            Token::SubStr1(k) | Token::SubStr2(k) => pos_of(&positions(), &k),
            Token::Span3(y) | Token::Span6(y) => pos_of(&Boundary::ALL, &y),
            Token::Replace1(d) | Token::Replace2(d) => pos_of(DELIMITERS, &d),
        })
    }

    pub fn to_action(&self) -> Action {
        match self.arg_index() {
            None => Action::terminal(self.production(), &[]),
            Some(arg) => Action::terminal(self.production(), &[arg]),
        }
    }

    pub fn from_action(action: &Action) -> Option<Token> {
        let p = action.production;
        if p == 0 {
            return action.params.is_empty().then_some(Token::Commit);
        }
        if p as usize >= NAMES.len() || action.params.len() != 1 {
            return None;
        }
        let a = action.params[0] as usize;
        Some(match p {
            1 => Token::Const(*const_alphabet().get(a)?),
            2 => Token::GetToken1(*TokenType::ALL.get(a)?),
            3 => Token::GetToken2(*indices().get(a)?),
            4 => Token::ToCase(*Case::ALL.get(a)?),
            5 => Token::GetUpTo(*Regex::all().get(a)?),
            6 => Token::GetFrom(*Regex::all().get(a)?),
            7 => Token::GetAll(*TokenType::ALL.get(a)?),
            8 => Token::GetFirst1(*TokenType::ALL.get(a)?),
            9 => Token::GetFirst2(*indices().get(a)?),
            10 => Token::SubStr1(*positions().get(a)?),
            11 => Token::SubStr2(*positions().get(a)?),
            12 => Token::Span1(*Regex::all().get(a)?),
            13 => Token::Span2(*indices().get(a)?),
            14 => Token::Span3(*Boundary::ALL.get(a)?),
            15 => Token::Span4(*Regex::all().get(a)?),
            16 => Token::Span5(*indices().get(a)?),
            17 => Token::Span6(*Boundary::ALL.get(a)?),
            18 => Token::Replace1(*DELIMITERS.get(a)?),
            _ => Token::Replace2(*DELIMITERS.get(a)?),
        })
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = NAMES[self.production() as usize];
        match *self {
            Token::Commit => f.write_str(name),
            Token::Const(c) | Token::Replace1(c) | Token::Replace2(c) => write!(f, "{name}({})", c as char),
            Token::GetToken1(t) | Token::GetAll(t) | Token::GetFirst1(t) => write!(f, "{name}({})", t.name()),
            Token::GetToken2(i) | Token::GetFirst2(i) | Token::Span2(i) | Token::Span5(i) => {
                write!(f, "{name}({i})")
            }
            Token::SubStr1(k) | Token::SubStr2(k) => write!(f, "{name}({k})"),
            Token::ToCase(c) => write!(f, "{name}({})", c.name()),
            Token::GetUpTo(r) | Token::GetFrom(r) | Token::Span1(r) | Token::Span4(r) => write!(f, "{name}({r})"),
            Token::Span3(y) | Token::Span6(y) => write!(f, "{name}({})", y.name()),
        }
    }
}

/// Parse a comma-separated token trace. Tolerates arbitrary whitespace
/// (including line breaks) between tokens.
pub fn parse_tokens(text: &str) -> Result<Vec<Token>, MdpError> {
    let src = text.as_bytes();
    let mut pos = 0;
    let mut out = Vec::new();
    let err = |pos: usize, msg: &str| MdpError::Parse(format!("{msg} at byte {pos}"));
    loop {
        while pos < src.len() && (src[pos].is_ascii_whitespace() || src[pos] == b',') {
            pos += 1;
        }
        if pos >= src.len() {
            return Ok(out);
        }
        let start = pos;
        while pos < src.len() && src[pos].is_ascii_alphanumeric() {
            pos += 1;
        }
        let name = std::str::from_utf8(&src[start..pos]).unwrap();
        let production = NAMES
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| err(start, &format!("unknown token {name:?}")))? as u16;
        let kind = arg_kind(production);
        if let ArgKind::None = kind {
            out.push(Token::Commit);
            continue;
        }
        if src.get(pos) != Some(&b'(') {
            return Err(err(pos, "expected '('"));
        }
        pos += 1;
        // named arguments end at the first ')'; character arguments are exactly one byte
        let word_end = src[pos..].iter().position(|&b| b == b')').map(|e| pos + e);
        let word = word_end.map(|e| std::str::from_utf8(&src[pos..e]).unwrap_or(""));
        let single = |pos: usize| -> Result<u8, MdpError> {
            match (src.get(pos), src.get(pos + 1)) {
                (Some(&c), Some(b')')) => Ok(c),
                _ => Err(err(pos, "expected a single character argument")),
            }
        };
        let (token, consumed) = match kind {
            ArgKind::Char | ArgKind::Delim => {
                let c = single(pos)?;
                if matches!(kind, ArgKind::Delim) && !DELIMITERS.contains(&c) {
                    return Err(err(pos, "not a delimiter"));
                }
                if !(32..=126).contains(&c) {
                    return Err(err(pos, "non-printable constant"));
                }
                let t = match production {
                    1 => Token::Const(c),
                    18 => Token::Replace1(c),
                    _ => Token::Replace2(c),
                };
                (t, 2)
            }
            ArgKind::Regex => {
                let named = word.and_then(TokenType::from_name);
                let (r, consumed) = match named {
                    Some(t) => (Regex::Type(t), word.unwrap().len() + 1),
                    None => {
                        let c = single(pos)?;
                        if !DELIMITERS.contains(&c) {
                            return Err(err(pos, "not a regex"));
                        }
                        (Regex::Delim(c), 2)
                    }
                };
                let t = match production {
                    5 => Token::GetUpTo(r),
                    6 => Token::GetFrom(r),
                    12 => Token::Span1(r),
                    _ => Token::Span4(r),
                };
                (t, consumed)
            }
            _ => {
                let word = word.ok_or_else(|| err(pos, "unclosed argument"))?;
                let bad = || err(pos, &format!("bad argument {word:?} for {name}"));
                let t = match kind {
                    ArgKind::Type => {
                        let t = TokenType::from_name(word).ok_or_else(bad)?;
                        match production {
                            2 => Token::GetToken1(t),
                            7 => Token::GetAll(t),
                            _ => Token::GetFirst1(t),
                        }
                    }
                    ArgKind::Case => Token::ToCase(Case::from_name(word).ok_or_else(bad)?),
                    ArgKind::Boundary => {
                        let y = Boundary::ALL.into_iter().find(|b| b.name() == word).ok_or_else(bad)?;
                        if production == 14 { Token::Span3(y) } else { Token::Span6(y) }
                    }
                    ArgKind::Index => {
                        let i: i8 = word.parse().map_err(|_| bad())?;
                        if !INDEX_RANGE.contains(&i) {
                            return Err(bad());
                        }
                        match production {
                            3 => Token::GetToken2(i),
                            9 => Token::GetFirst2(i),
                            13 => Token::Span2(i),
                            _ => Token::Span5(i),
                        }
                    }
                    _ => {
                        let k: i8 = word.parse().map_err(|_| bad())?;
                        if k == 0 || k.abs() > MAX_POSITION {
                            return Err(bad());
                        }
                        if production == 10 { Token::SubStr1(k) } else { Token::SubStr2(k) }
                    }
                };
                (t, word.len() + 1)
            }
        };
        out.push(token);
        pos += consumed;
    }
}

pub fn format_tokens(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
}

fn stage_tokens(stage: &Stage, out: &mut Vec<Token>) {
    match *stage {
        Stage::Nest(Nesting::GetToken(t, i)) => out.extend([Token::GetToken1(t), Token::GetToken2(i)]),
        Stage::Nest(Nesting::ToCase(c)) => out.push(Token::ToCase(c)),
        Stage::Nest(Nesting::GetUpTo(r)) => out.push(Token::GetUpTo(r)),
        Stage::Nest(Nesting::GetFrom(r)) => out.push(Token::GetFrom(r)),
        Stage::Nest(Nesting::GetAll(t)) => out.push(Token::GetAll(t)),
        Stage::Nest(Nesting::GetFirst(t, i)) => out.extend([Token::GetFirst1(t), Token::GetFirst2(i)]),
        Stage::Nest(Nesting::Replace(a, b)) => out.extend([Token::Replace1(a), Token::Replace2(b)]),
        Stage::Sub(Substring::SubStr(a, b)) => out.extend([Token::SubStr1(a), Token::SubStr2(b)]),
        Stage::Sub(Substring::Span(r1, i1, y1, r2, i2, y2)) => out.extend([
            Token::Span1(r1),
            Token::Span2(i1),
            Token::Span3(y1),
            Token::Span4(r2),
            Token::Span5(i2),
            Token::Span6(y2),
        ]),
    }
}

/// Canonical token sequence of a program: each expression's tokens followed by `Commit`.
pub fn program_tokens(program: &EditProgram) -> Vec<Token> {
    let mut out = Vec::new();
    for expr in &program.exprs {
        match expr {
            EditExpr::Const(c) => out.push(Token::Const(*c)),
            EditExpr::Chain(stages) => stages.iter().for_each(|s| stage_tokens(s, &mut out)),
        }
        out.push(Token::Commit);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_action_round_trips_through_text() {
        let g = grammar();
        for (id, p) in g.productions.iter().enumerate() {
            let sizes = p.params.first().map_or(1, |s| s.size);
            for arg in 0..sizes {
                let action = if p.params.is_empty() {
                    Action::terminal(id as u16, &[])
                } else {
                    Action::terminal(id as u16, &[arg as u16])
                };
                let token = Token::from_action(&action).unwrap();
                assert_eq!(token.to_action(), action);
                let text = token.to_string();
                assert_eq!(parse_tokens(&text).unwrap(), vec![token], "{text}");
            }
        }
    }

    #[test]
    fn parses_awkward_characters() {
        let text = "Const((), Commit, Const()), Commit, Const(,), Commit, GetFrom()), GetUpTo( ), Replace1(/), Replace2( )";
        let tokens = parse_tokens(text).unwrap();
        assert_eq!(
            tokens,
            vec![
                Token::Const(b'('),
                Token::Commit,
                Token::Const(b')'),
                Token::Commit,
                Token::Const(b','),
                Token::Commit,
                Token::GetFrom(Regex::Delim(b')')),
                Token::GetUpTo(Regex::Delim(b' ')),
                Token::Replace1(b'/'),
                Token::Replace2(b' '),
            ]
        );
        assert_eq!(format_tokens(&tokens), text);
    }

    #[test]
    fn rejects_malformed_tokens() {
        assert!(parse_tokens("GetToken2(9)").is_err());
        assert!(parse_tokens("SubStr1(0)").is_err());
        assert!(parse_tokens("Frobnicate(1)").is_err());
        assert!(parse_tokens("Replace1(x)").is_err());
        assert!(parse_tokens("ToCase(Upper)").is_err());
        assert!(parse_tokens("Const(ab)").is_err());
    }
}
