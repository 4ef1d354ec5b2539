//! Whitelisted builtin functions.
//!
//! `pure` builtins are functions of their arguments alone. The `table_*`
//! builtins operate on a per-task hash table and are impure, as are the
//! reduce-side stream accessors.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArgKind {
    Int,
    Str,
    StrOrBlob,
    Stream,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RetKind {
    Int,
    Str,
    Bool,
    StreamElem,
}

#[derive(Clone, Copy, Debug)]
pub struct BuiltinSpec {
    pub name: &'static str,
    pub params: &'static [ArgKind],
    pub ret: RetKind,
    pub pure: bool,
    /// `f(a) == f(b)` exactly when `a == b`.
    pub equality_preserving: bool,
    pub reduce_only: bool,
}

const fn spec(
    name: &'static str,
    params: &'static [ArgKind],
    ret: RetKind,
    pure: bool,
    equality_preserving: bool,
) -> BuiltinSpec {
    BuiltinSpec { name, params, ret, pure, equality_preserving, reduce_only: false }
}

pub static BUILTINS: &[BuiltinSpec] = &[
    spec("len", &[ArgKind::StrOrBlob], RetKind::Int, true, false),
    spec("substr", &[ArgKind::Str, ArgKind::Int, ArgKind::Int], RetKind::Str, true, false),
    spec("contains", &[ArgKind::Str, ArgKind::Str], RetKind::Bool, true, false),
    spec("starts_with", &[ArgKind::Str, ArgKind::Str], RetKind::Bool, true, false),
    spec("to_lower", &[ArgKind::Str], RetKind::Str, true, false),
    spec("parse_i64", &[ArgKind::Str], RetKind::Int, true, false),
    spec("to_str", &[ArgKind::Int], RetKind::Str, true, true),
    spec("table_put", &[ArgKind::Str], RetKind::Bool, false, false),
    spec("table_get", &[ArgKind::Str], RetKind::Bool, false, false),
    BuiltinSpec {
        name: "has_next",
        params: &[ArgKind::Stream],
        ret: RetKind::Bool,
        pure: false,
        equality_preserving: false,
        reduce_only: true,
    },
    BuiltinSpec {
        name: "next",
        params: &[ArgKind::Stream],
        ret: RetKind::StreamElem,
        pure: false,
        equality_preserving: false,
        reduce_only: true,
    },
];

pub fn lookup(name: &str) -> Option<&'static BuiltinSpec> {
    BUILTINS.iter().find(|b| b.name == name)
}

pub fn is_pure(name: &str) -> bool {
    lookup(name).is_some_and(|b| b.pure)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitelist_purity() {
        for name in ["len", "substr", "contains", "starts_with", "to_lower", "parse_i64"] {
            assert!(is_pure(name), "{name}");
        }
        for name in ["table_put", "table_get", "next", "has_next"] {
            assert!(!is_pure(name), "{name}");
        }
        assert!(lookup("eval").is_none());
    }
}
