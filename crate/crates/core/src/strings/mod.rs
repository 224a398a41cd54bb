//! Modified RobustFill string-editing language and its REPL.

mod domain;
mod dsl;
mod syntax;
mod tasks;

pub use domain::{
    consumed_mask, levenshtein, levenshtein_bytes, prefix_consistent, program_satisfies, satisfies_string, scratch_mask, Example,
    PartialStage, Pending, StringDomain, StringScope, StringSpec, DEFAULT_HORIZON, MAX_STAGES, MAX_STRING_LEN,
};
pub use dsl::{
    eval_chain, eval_expr, eval_nesting, eval_stage, eval_substring, find_matches, Boundary, Case, EditExpr,
    EditProgram, EvalError, Nesting, Regex, Stage, Substring, TokenType, DELIMITERS, INDEX_RANGE, MAX_POSITION,
};
pub use syntax::{const_alphabet, format_tokens, grammar, ids, parse_tokens, program_tokens, Token};
pub use tasks::{StringTask, TaskFile};
