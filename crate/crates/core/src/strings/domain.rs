//! The string-editing REPL: committed strings, scratch strings and masks per
//! example, plus the pending expression being typed.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dsl::{eval_stage, EditExpr, EditProgram, Nesting, Stage, Substring};
use super::syntax::{self, ids, parse_tokens, Token};
use crate::mdp::{Action, Domain, ExampleView, Grammar, MdpError, ReplView, TextView};

/// Longest string the generator produces.
pub const MAX_STRING_LEN: usize = 36;
/// Most stages a single expression may chain in the REPL.
pub const MAX_STAGES: usize = 4;
/// Default episode horizon.
pub const DEFAULT_HORIZON: usize = 45;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub input: String,
    pub output: String,
}

impl Example {
    pub fn new(input: &str, output: &str) -> Self {
        Example { input: input.into(), output: output.into() }
    }
}

/// Input/output examples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StringSpec {
    pub examples: Vec<Example>,
}

impl StringSpec {
    /// Validate: at least one example, printable ASCII only.
    pub fn new(examples: Vec<Example>) -> Result<Self, MdpError> {
        if examples.is_empty() {
            return Err(MdpError::Parse("a string spec needs at least one example".into()));
        }
        for e in &examples {
            for s in [&e.input, &e.output] {
                if !s.bytes().all(|b| (32..=126).contains(&b)) {
                    return Err(MdpError::Parse(format!("non-printable character in {s:?}")));
                }
            }
        }
        Ok(StringSpec { examples })
    }

    pub fn from_pairs(pairs: &[(&str, &str)]) -> Result<Self, MdpError> {
        StringSpec::new(pairs.iter().map(|(i, o)| Example::new(i, o)).collect())
    }

    /// Whether every string respects the generation length cap.
    pub fn within_length_cap(&self) -> bool {
        self.examples
            .iter()
            .all(|e| e.input.len() <= MAX_STRING_LEN && e.output.len() <= MAX_STRING_LEN)
    }
}

/// The stage currently being typed: its tokens so far.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialStage {
    pub tokens: Vec<Token>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pending {
    /// No expression in flight.
    Idle,
    Const(u8),
    Chain { stages: Vec<Stage>, partial: Option<PartialStage> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StringScope {
    /// Expressions committed so far.
    pub program: Vec<EditExpr>,
    pub pending: Pending,
    pub committed: Vec<Vec<u8>>,
    pub scratch: Vec<Vec<u8>>,
    /// Set when the in-flight expression failed to evaluate on some example.
    pub error: bool,
}

/// Tokens a stage opened by `first` needs in total.
fn stage_len(first: &Token) -> usize {
    match first {
        Token::GetToken1(_) | Token::GetFirst1(_) | Token::Replace1(_) | Token::SubStr1(_) => 2,
        Token::Span1(_) => 6,
        _ => 1,
    }
}

fn build_stage(tokens: &[Token]) -> Option<Stage> {
    use Token::*;
    Some(match *tokens {
        [GetToken1(t), GetToken2(i)] => Stage::Nest(Nesting::GetToken(t, i)),
        [ToCase(c)] => Stage::Nest(Nesting::ToCase(c)),
        [GetUpTo(r)] => Stage::Nest(Nesting::GetUpTo(r)),
        [GetFrom(r)] => Stage::Nest(Nesting::GetFrom(r)),
        [GetAll(t)] => Stage::Nest(Nesting::GetAll(t)),
        [GetFirst1(t), GetFirst2(i)] => Stage::Nest(Nesting::GetFirst(t, i)),
        [Replace1(a), Replace2(b)] => Stage::Nest(Nesting::Replace(a, b)),
        [SubStr1(a), SubStr2(b)] => Stage::Sub(Substring::SubStr(a, b)),
        [Span1(r1), Span2(i1), Span3(y1), Span4(r2), Span5(i2), Span6(y2)] => {
            Stage::Sub(Substring::Span(r1, i1, y1, r2, i2, y2))
        }
        _ => return None,
    })
}

/// Production that continues a partial stage.
fn next_slot(partial: &PartialStage) -> u16 {
    partial.tokens.last().expect("partial stage is nonempty").production() + 1
}

const NESTING_OPENERS: [u16; 7] = [
    ids::GET_TOKEN1,
    ids::TO_CASE,
    ids::GET_UP_TO,
    ids::GET_FROM,
    ids::GET_ALL,
    ids::GET_FIRST1,
    ids::REPLACE1,
];

/// Edit distance with unit costs.
pub fn levenshtein(a: &str, b: &str) -> usize {
    levenshtein_bytes(a.as_bytes(), b.as_bytes())
}

pub fn levenshtein_bytes(a: &[u8], b: &[u8]) -> usize {
    strsim::generic_levenshtein(&a.to_vec(), &b.to_vec())
}

/// Committed output is a prefix of the target on every example.
pub fn prefix_consistent(spec: &StringSpec, scope: &StringScope) -> bool {
    spec.examples
        .iter()
        .zip(&scope.committed)
        .all(|(e, c)| e.output.as_bytes().starts_with(c))
}

/// Committed output equals the target on every example.
pub fn satisfies_string(spec: &StringSpec, scope: &StringScope) -> bool {
    spec.examples
        .iter()
        .zip(&scope.committed)
        .all(|(e, c)| e.output.as_bytes() == c.as_slice())
}

/// A whole program evaluated against the spec.
pub fn program_satisfies(spec: &StringSpec, program: &EditProgram) -> bool {
    spec.examples
        .iter()
        .all(|e| program.eval(e.input.as_bytes()).is_ok_and(|out| out == e.output.as_bytes()))
}

/// Positions at or after the end of the input region already copied into the
/// committed string: the leftmost occurrence of the longest committed suffix
/// found in the input.
pub fn consumed_mask(input: &[u8], committed: &[u8]) -> Vec<bool> {
    let mut end = 0;
    for start in 0..committed.len() {
        let suffix = &committed[start..];
        if let Some(pos) = find(input, suffix) {
            end = pos + suffix.len();
            break;
        }
    }
    (0..input.len()).map(|j| j >= end).collect()
}

/// Positions covered by the first occurrence of `scratch` in the input.
pub fn scratch_mask(input: &[u8], scratch: &[u8]) -> Vec<bool> {
    let mut mask = vec![false; input.len()];
    if !scratch.is_empty() {
        if let Some(pos) = find(input, scratch) {
            mask[pos..pos + scratch.len()].iter_mut().for_each(|m| *m = true);
        }
    }
    mask
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    if needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&i| &haystack[i..i + needle.len()] == needle)
}

#[derive(Clone, Debug)]
pub struct StringDomain {
    grammar: Grammar,
    horizon: usize,
}

impl Default for StringDomain {
    fn default() -> Self {
        StringDomain::new(DEFAULT_HORIZON)
    }
}

impl StringDomain {
    pub fn new(horizon: usize) -> Self {
        StringDomain { grammar: syntax::grammar(), horizon }
    }

    fn legal(&self, scope: &StringScope, production: u16) -> bool {
        if scope.error {
            return false;
        }
        match &scope.pending {
            Pending::Idle => {
                production == ids::CONST
                    || production == ids::SUB_STR1
                    || production == ids::SPAN1
                    || NESTING_OPENERS.contains(&production)
            }
            Pending::Const(_) => production == ids::COMMIT,
            Pending::Chain { partial: Some(p), .. } => production == next_slot(p),
            Pending::Chain { stages, partial: None } => {
                production == ids::COMMIT || (stages.len() < MAX_STAGES && NESTING_OPENERS.contains(&production))
            }
        }
    }

    /// Execute one token; `None` when the token does not fit the pending expression.
    pub fn step(&self, spec: &StringSpec, scope: &StringScope, token: Token) -> Option<StringScope> {
        if !self.legal(scope, token.production()) {
            return None;
        }
        let mut next = scope.clone();
        let inputs = spec.examples.iter().map(|e| e.input.as_bytes());
        match (token, &mut next.pending) {
            (Token::Commit, pending) => {
                let expr = match std::mem::replace(pending, Pending::Idle) {
                    Pending::Const(c) => EditExpr::Const(c),
                    Pending::Chain { stages, .. } => EditExpr::Chain(stages),
                    Pending::Idle => return None,
                };
                next.program.push(expr);
                for (c, s) in next.committed.iter_mut().zip(&mut next.scratch) {
                    c.append(s);
                }
            }
            (Token::Const(c), Pending::Idle) => {
                next.pending = Pending::Const(c);
                next.scratch.iter_mut().for_each(|s| *s = vec![c]);
            }
            (first, Pending::Idle) => {
                next.scratch = inputs.map(<[u8]>::to_vec).collect();
                next.pending = Pending::Chain { stages: Vec::new(), partial: None };
                return self.extend_chain(next, first);
            }
            (token, Pending::Chain { .. }) => return self.extend_chain(next, token),
            (_, Pending::Const(_)) => return None,
        }
        Some(next)
    }

    fn extend_chain(&self, mut next: StringScope, token: Token) -> Option<StringScope> {
        let Pending::Chain { stages, partial } = &mut next.pending else { return None };
        let part = partial.get_or_insert_with(|| PartialStage { tokens: Vec::new() });
        part.tokens.push(token);
        if part.tokens.len() < stage_len(&part.tokens[0]) {
            return Some(next);
        }
        let stage = build_stage(&part.tokens)?;
        *partial = None;
        stages.push(stage);
        for s in next.scratch.iter_mut() {
            match eval_stage(&stage, s) {
                Ok(v) => *s = v,
                Err(_) => {
                    next.error = true;
                    s.clear();
                }
            }
        }
        Some(next)
    }

    pub fn committed_program(&self, scope: &StringScope) -> EditProgram {
        EditProgram { exprs: scope.program.clone() }
    }
}

impl Domain for StringDomain {
    type Spec = StringSpec;
    type Scope = StringScope;

    fn name(&self) -> &str {
        "strings"
    }

    fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn empty_scope(&self, spec: &StringSpec) -> StringScope {
        let n = spec.examples.len();
        StringScope {
            program: Vec::new(),
            pending: Pending::Idle,
            committed: vec![Vec::new(); n],
            scratch: vec![Vec::new(); n],
            error: false,
        }
    }

    fn scope_len(&self, scope: &StringScope) -> usize {
        scope.program.len()
    }

    fn production_legal(&self, scope: &StringScope, production: u16) -> bool {
        self.legal(scope, production)
    }

    fn transition(&self, spec: &StringSpec, scope: &StringScope, action: &Action) -> Result<StringScope, MdpError> {
        let token = Token::from_action(action).ok_or(MdpError::UnknownProduction(action.production))?;
        self.step(spec, scope, token)
            .ok_or_else(|| MdpError::IllegalSlot(token.to_string()))
    }

    fn is_dead(&self, spec: &StringSpec, scope: &StringScope) -> bool {
        scope.error || !prefix_consistent(spec, scope)
    }

    fn satisfies(&self, spec: &StringSpec, scope: &StringScope) -> bool {
        satisfies_string(spec, scope)
    }

    fn is_complete(&self, scope: &StringScope) -> bool {
        scope.pending == Pending::Idle && !scope.program.is_empty()
    }

    fn quality(&self, spec: &StringSpec, scope: &StringScope) -> f64 {
        let total: usize = spec
            .examples
            .iter()
            .zip(&scope.committed)
            .map(|(e, c)| levenshtein_bytes(e.output.as_bytes(), c))
            .sum();
        -(total as f64)
    }

    fn max_quality(&self) -> f64 {
        0.0
    }

    fn view(&self, spec: &Arc<StringSpec>, scope: &StringScope, previous: Option<&Action>) -> ReplView {
        let examples = spec
            .examples
            .iter()
            .zip(scope.committed.iter().zip(&scope.scratch))
            .map(|(e, (committed, scratch))| {
                let input = e.input.as_bytes();
                ExampleView {
                    input: input.to_vec(),
                    output: e.output.as_bytes().to_vec(),
                    committed: committed.clone(),
                    scratch: scratch.clone(),
                    mask_consumed: consumed_mask(input, committed),
                    mask_scratch: scratch_mask(input, scratch),
                }
            })
            .collect();
        ReplView::Text(TextView {
            examples,
            previous: previous.cloned(),
            steps: scope.program.len(),
        })
    }

    fn format_action(&self, action: &Action) -> String {
        Token::from_action(action).map_or_else(|| format!("{action:?}"), |t| t.to_string())
    }

    fn parse_action(&self, text: &str) -> Result<Action, MdpError> {
        match parse_tokens(text)?.as_slice() {
            [t] => Ok(t.to_action()),
            other => Err(MdpError::Parse(format!("expected one action, found {}", other.len()))),
        }
    }

    fn program_text(&self, _spec: &StringSpec, scope: &StringScope) -> String {
        syntax::format_tokens(&syntax::program_tokens(&self.committed_program(scope)))
    }

    fn encode_spec(&self, spec: &StringSpec) -> String {
        serde_json::to_string(spec).expect("spec serializes")
    }

    fn decode_spec(&self, text: &str) -> Result<StringSpec, MdpError> {
        let spec: StringSpec = serde_json::from_str(text).map_err(|e| MdpError::Parse(e.to_string()))?;
        StringSpec::new(spec.examples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{apply_action, initial_state, legal_productions, reward, SynthState};

    fn run(domain: &StringDomain, spec: &StringSpec, tokens: &str) -> SynthState<StringDomain> {
        let mut state = initial_state(domain, Arc::new(spec.clone()));
        for t in parse_tokens(tokens).unwrap() {
            state = apply_action(domain, &state, &t.to_action()).unwrap();
        }
        state
    }

    #[test]
    fn commit_appends_scratch() {
        let d = StringDomain::default();
        let spec = StringSpec::from_pairs(&[("q", "ax")]).unwrap();
        let s = run(&d, &spec, "Const(a), Commit, Const(x)");
        assert_eq!(s.scope.committed[0], b"a");
        assert_eq!(s.scope.scratch[0], b"x");
        let s = run(&d, &spec, "Const(a), Commit, Const(x), Commit");
        assert_eq!(s.scope.committed[0], b"ax");
        assert!(s.scope.scratch[0].is_empty());
        assert_eq!(reward(&d, &s), 1);
    }

    #[test]
    fn partial_stage_shows_last_completed_value() {
        let d = StringDomain::default();
        let spec = StringSpec::from_pairs(&[("3/16/1997", "16")]).unwrap();
        let s = run(&d, &spec, "GetToken1(Number)");
        assert_eq!(s.scope.scratch[0], b"3/16/1997");
        let s = run(&d, &spec, "Replace1(/), Replace2( ), GetToken1(Number)");
        assert_eq!(s.scope.scratch[0], b"3 16 1997");
        let s = run(&d, &spec, "Replace1(/), Replace2( ), GetToken1(Number), GetToken2(1)");
        assert_eq!(s.scope.scratch[0], b"16");
    }

    #[test]
    fn fresh_expression_legality() {
        let d = StringDomain::default();
        let spec = StringSpec::from_pairs(&[("a", "b")]).unwrap();
        let s = initial_state(&d, Arc::new(spec.clone()));
        let names: Vec<&str> = legal_productions(&d, &s)
            .into_iter()
            .map(|p| d.grammar().productions[p as usize].name.as_str())
            .collect();
        assert_eq!(
            names,
            ["Const", "GetToken1", "ToCase", "GetUpTo", "GetFrom", "GetAll", "GetFirst1", "SubStr1", "Span1", "Replace1"]
        );
        let s = run(&d, &spec, "GetToken1(Word)");
        assert_eq!(legal_productions(&d, &s), vec![ids::GET_TOKEN2]);
        let s = run(&d, &spec, "Const(b)");
        assert_eq!(legal_productions(&d, &s), vec![ids::COMMIT]);
        let s = run(&d, &spec, "GetAll(Word)");
        assert!(!legal_productions(&d, &s).contains(&ids::SUB_STR1));
    }

    #[test]
    fn illegal_slot_is_rejected() {
        let d = StringDomain::default();
        let spec = Arc::new(StringSpec::from_pairs(&[("a", "b")]).unwrap());
        let s = initial_state(&d, spec);
        let err = apply_action(&d, &s, &Token::Commit.to_action()).unwrap_err();
        assert!(matches!(err, MdpError::IllegalSlot(_)));
        let err = apply_action(&d, &s, &Token::GetToken2(1).to_action()).unwrap_err();
        assert!(matches!(err, MdpError::IllegalSlot(_)));
    }

    #[test]
    fn evaluation_error_kills_branch() {
        let d = StringDomain::default();
        let spec = StringSpec::from_pairs(&[("abc", "x"), ("12", "y")]).unwrap();
        let s = run(&d, &spec, "GetToken1(Number), GetToken2(0)");
        assert!(s.scope.error);
        assert!(d.is_dead(&s.spec, &s.scope));
        assert!(legal_productions(&d, &s).is_empty());
    }

    #[test]
    fn prefix_violation() {
        let d = StringDomain::default();
        let spec = StringSpec::from_pairs(&[("12/8/2019", "date: 12 mo: 8")]).unwrap();
        let good = run(&d, &spec, "Const(d), Commit, Const(a), Commit");
        assert!(prefix_consistent(&spec, &good.scope));
        let bad = run(
            &d,
            &spec,
            "Const(d), Commit, Const(a), Commit, Const(t), Commit, Const(e), Commit, Const(:), Commit, GetToken1(Number), GetToken2(0), Commit",
        );
        assert_eq!(bad.scope.committed[0], b"date:12");
        assert!(!prefix_consistent(&spec, &bad.scope));
        assert!(d.is_dead(&bad.spec, &bad.scope));
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
    }

    #[test]
    fn masks_have_input_length() {
        assert_eq!(consumed_mask(b"3/16/1997", b"date: 16"), [false, false, false, false, true, true, true, true, true]);
        assert_eq!(consumed_mask(b"abc", b""), [true; 3]);
        assert_eq!(scratch_mask(b"3/16/1997", b"16"), [false, false, true, true, false, false, false, false, false]);
        assert_eq!(scratch_mask(b"abc", b"zz"), [false; 3]);
    }

    #[test]
    fn spec_validation() {
        assert!(StringSpec::new(vec![]).is_err());
        assert!(StringSpec::from_pairs(&[("a\n", "b")]).is_err());
        let d = StringDomain::default();
        let spec = StringSpec::from_pairs(&[("a b", "c")]).unwrap();
        assert_eq!(d.decode_spec(&d.encode_spec(&spec)).unwrap(), spec);
    }
}
