//! The MiniMap job language: grammar, parser, pretty-printer and typechecker.
//!
//! See `docs/grammar.md` for the EBNF.

mod ast;
pub mod builtins;
mod lexer;
mod parser;
mod printer;
mod typeck;

pub use ast::*;
pub use parser::{parse_expr, parse_job, parse_schemas};
pub use printer::{print_block, print_expr, print_job, print_literal, print_schema};
pub use typeck::{typecheck, typecheck_predicate, typecheck_with_tokens, TypedJob};

/// Parse and typecheck in one step.
pub fn load_job(src: &str) -> crate::Result<TypedJob> {
    Ok(typecheck(parse_job(src)?)?)
}
