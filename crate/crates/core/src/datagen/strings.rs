//! Random string-editing programs over random structured inputs.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::mdp::{Action, Rng};
use crate::strings::{
    const_alphabet, eval_expr, program_tokens, Boundary, Case, EditExpr, EditProgram, Example, Nesting, Regex,
    Stage, StringSpec, Substring, DEFAULT_HORIZON, TokenType, DELIMITERS, INDEX_RANGE, MAX_POSITION,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StringGenConfig {
    pub max_expressions: usize,
    pub max_len: usize,
    pub examples: usize,
    /// Most stages in one sampled expression.
    pub max_stages: usize,
}

impl Default for StringGenConfig {
    fn default() -> Self {
        StringGenConfig { max_expressions: 6, max_len: 36, examples: 4, max_stages: 2 }
    }
}

impl StringGenConfig {
    /// Short programs for desk-scale experiments.
    pub fn micro() -> Self {
        StringGenConfig { max_expressions: 3, max_len: 24, examples: 4, max_stages: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Number,
    Proper,
    Lower,
    Caps,
}

/// Field layout shared by every example of one spec.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputFormat {
    fields: Vec<Field>,
    separators: Vec<Vec<u8>>,
    prefix: Vec<u8>,
    suffix: Vec<u8>,
}

fn random_letters(rng: &mut Rng, n: usize, base: u8) -> Vec<u8> {
    (0..n).map(|_| base + rng.gen_range(0..26)).collect()
}

pub fn sample_format(rng: &mut Rng) -> InputFormat {
    let all = [Field::Number, Field::Proper, Field::Lower, Field::Caps];
    let n = rng.gen_range(1..=4);
    let fields: Vec<Field> = (0..n).map(|_| *all.choose(rng).unwrap()).collect();
    let separator = |rng: &mut Rng| -> Vec<u8> {
        match rng.gen_range(0..4) {
            0 | 1 => vec![b' '],
            2 => vec![*DELIMITERS.choose(rng).unwrap()],
            _ => vec![*DELIMITERS.choose(rng).unwrap(), b' '],
        }
    };
    let separators = (1..n).map(|_| separator(rng)).collect();
    let (prefix, suffix) = match rng.gen_range(0..6) {
        0 => (b"(".to_vec(), b")".to_vec()),
        1 => (b"[".to_vec(), Vec::new()),
        2 => (Vec::new(), vec![*DELIMITERS.choose(rng).unwrap()]),
        _ => (Vec::new(), Vec::new()),
    };
    InputFormat { fields, separators, prefix, suffix }
}

pub fn sample_input(format: &InputFormat, rng: &mut Rng) -> Vec<u8> {
    let mut s = format.prefix.clone();
    for (k, field) in format.fields.iter().enumerate() {
        if k > 0 {
            s.extend(&format.separators[k - 1]);
        }
        match field {
            Field::Number => {
                let len = rng.gen_range(1..=4);
                s.extend((0..len).map(|_| b'0' + rng.gen_range(0..10)));
            }
            Field::Proper => {
                s.push(b'A' + rng.gen_range(0..26));
                let len = rng.gen_range(2..=6);
                s.extend(random_letters(rng, len, b'a'));
            }
            Field::Lower => {
                let len = rng.gen_range(2..=6);
                s.extend(random_letters(rng, len, b'a'));
            }
            Field::Caps => {
                let len = rng.gen_range(2..=4);
                s.extend(random_letters(rng, len, b'A'));
            }
        }
    }
    s.extend(&format.suffix);
    s
}

fn sample_regex(rng: &mut Rng) -> Regex {
    *Regex::all().choose(rng).unwrap()
}

fn sample_index(rng: &mut Rng) -> i8 {
    rng.gen_range(INDEX_RANGE)
}

fn sample_position(rng: &mut Rng, max: i8) -> i8 {
    loop {
        let k = rng.gen_range(-max..=max);
        if k != 0 {
            return k;
        }
    }
}

fn sample_nesting(rng: &mut Rng) -> Nesting {
    let t = *TokenType::ALL.choose(rng).unwrap();
    match rng.gen_range(0..7) {
        0 => Nesting::GetToken(t, sample_index(rng)),
        1 => Nesting::ToCase(*Case::ALL.choose(rng).unwrap()),
        2 => Nesting::GetUpTo(sample_regex(rng)),
        3 => Nesting::GetFrom(sample_regex(rng)),
        4 => Nesting::GetAll(t),
        5 => Nesting::GetFirst(t, sample_index(rng)),
        _ => Nesting::Replace(*DELIMITERS.choose(rng).unwrap(), *DELIMITERS.choose(rng).unwrap()),
    }
}

fn sample_substring(rng: &mut Rng, max_pos: i8) -> Substring {
    if rng.gen_bool(0.5) {
        Substring::SubStr(sample_position(rng, max_pos), sample_position(rng, max_pos))
    } else {
        let y = |rng: &mut Rng| *Boundary::ALL.choose(rng).unwrap();
        Substring::Span(
            sample_regex(rng),
            sample_index(rng),
            y(rng),
            sample_regex(rng),
            sample_index(rng),
            y(rng),
        )
    }
}

/// A random expression; not checked for evaluation errors.
pub fn sample_expr(config: &StringGenConfig, max_pos: i8, rng: &mut Rng) -> EditExpr {
    if rng.gen_bool(0.35) {
        return EditExpr::Const(*const_alphabet().choose(rng).unwrap());
    }
    let stages = rng.gen_range(1..=config.max_stages.max(1));
    let mut chain = Vec::with_capacity(stages);
    // a substring can only be the innermost stage
    if rng.gen_bool(2.0 / 9.0) {
        chain.push(Stage::Sub(sample_substring(rng, max_pos)));
    } else {
        chain.push(Stage::Nest(sample_nesting(rng)));
    }
    while chain.len() < stages {
        chain.push(Stage::Nest(sample_nesting(rng)));
    }
    EditExpr::Chain(chain)
}

/// A program with 1..=max_expressions expressions, each evaluating to a
/// nonempty string on every input, total output within the length cap.
/// `None` when no valid first expression was found.
pub fn sample_string_program(config: &StringGenConfig, inputs: &[Vec<u8>], rng: &mut Rng) -> Option<EditProgram> {
    let target = rng.gen_range(1..=config.max_expressions.max(1));
    let max_pos = inputs.iter().map(Vec::len).min().unwrap_or(1).clamp(1, MAX_POSITION as usize) as i8;
    let mut exprs = Vec::new();
    let mut outputs = vec![Vec::new(); inputs.len()];
    for _ in 0..target {
        let mut accepted = false;
        for _ in 0..100 {
            let expr = sample_expr(config, max_pos, rng);
            let pieces: Option<Vec<Vec<u8>>> = inputs
                .iter()
                .map(|i| eval_expr(&expr, i).ok().filter(|v| !v.is_empty()))
                .collect();
            let Some(pieces) = pieces else { continue };
            if outputs.iter().zip(&pieces).any(|(o, p)| o.len() + p.len() > config.max_len) {
                continue;
            }
            for (o, p) in outputs.iter_mut().zip(pieces) {
                o.extend(p);
            }
            exprs.push(expr);
            accepted = true;
            break;
        }
        if !accepted {
            break;
        }
    }
    (!exprs.is_empty()).then_some(EditProgram { exprs })
}

/// One training spec with its generating program and action sequence.
#[derive(Clone, Debug)]
pub struct StringSample {
    pub spec: StringSpec,
    pub program: EditProgram,
    pub actions: Vec<Action>,
}

pub fn sample_string_episode(config: &StringGenConfig, rng: &mut Rng) -> StringSample {
    loop {
        let format = sample_format(rng);
        let inputs: Vec<Vec<u8>> = (0..config.examples).map(|_| sample_input(&format, rng)).collect();
        if inputs.iter().any(|i| i.len() > config.max_len) {
            continue;
        }
        let Some(program) = sample_string_program(config, &inputs, rng) else { continue };
        let examples = inputs
            .iter()
            .map(|i| {
                let out = program.eval(i).expect("sampled program evaluates");
                Example {
                    input: String::from_utf8(i.clone()).expect("ascii"),
                    output: String::from_utf8(out).expect("ascii"),
                }
            })
            .collect();
        let spec = StringSpec::new(examples).expect("printable examples");
        let actions: Vec<Action> = program_tokens(&program).iter().map(|t| t.to_action()).collect();
        if actions.len() > DEFAULT_HORIZON {
            continue;
        }
        return StringSample { spec, program, actions };
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mdp::{replay, reward, rng_from_seed};
    use crate::strings::StringDomain;

    #[test]
    fn samples_replay_and_respect_caps() {
        let d = StringDomain::default();
        let config = StringGenConfig::default();
        let mut rng = rng_from_seed(5);
        for _ in 0..300 {
            let s = sample_string_episode(&config, &mut rng);
            assert!(s.program.exprs.len() <= 6);
            assert!(s.spec.within_length_cap());
            let states = replay(&d, Arc::new(s.spec.clone()), &s.actions).unwrap();
            assert_eq!(reward(&d, states.last().unwrap()), 1);
        }
    }

    #[test]
    fn formats_are_shared_across_examples() {
        let mut rng = rng_from_seed(6);
        let f = sample_format(&mut rng);
        let a = sample_input(&f, &mut rng);
        let b = sample_input(&f, &mut rng);
        let shape = |s: &[u8]| -> Vec<u8> {
            let mut v: Vec<u8> = s.iter().map(|c| if c.is_ascii_alphanumeric() { b'x' } else { *c }).collect();
            v.dedup();
            v
        };
        assert_eq!(shape(&a), shape(&b));
    }
}
