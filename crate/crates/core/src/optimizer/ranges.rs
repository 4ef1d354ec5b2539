//! Key ranges implied by a selection DNF on one field.

use std::cmp::Ordering;
use std::ops::Bound;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::ConditionDnf;
use crate::lang::{BinOp, Expr, ExprKind, Literal, ScalarType, Schema, UnOp};
use crate::storage::btree::ByteRange;
use crate::value::Value;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("condition does not constrain `{field}` on every branch")]
pub struct NotSargable {
    pub field: String,
}

/// One end of a string interval: the bound value and whether it is included.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrBound {
    pub value: String,
    pub inclusive: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrRange {
    pub lo: Option<StrBound>,
    pub hi: Option<StrBound>,
}

/// Normalized (sorted, disjoint) intervals over an index field's domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "lowercase")]
pub enum KeyRangeSet {
    /// Inclusive `[lo, hi]` pairs.
    Int { field: String, ty: ScalarType, ranges: Vec<(i64, i64)> },
    Str { field: String, ranges: Vec<StrRange> },
}

impl KeyRangeSet {
    pub fn field(&self) -> &str {
        match self {
            KeyRangeSet::Int { field, .. } | KeyRangeSet::Str { field, .. } => field,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            KeyRangeSet::Int { ranges, .. } => ranges.is_empty(),
            KeyRangeSet::Str { ranges, .. } => ranges.is_empty(),
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (KeyRangeSet::Int { ranges, .. }, v) => match v.as_int() {
                Some(x) => ranges.iter().any(|&(lo, hi)| lo <= x && x <= hi),
                None => false,
            },
            (KeyRangeSet::Str { ranges, .. }, Value::Str(s)) => ranges.iter().any(|r| str_contains(r, s)),
            _ => false,
        }
    }

    /// The same ranges over the B+Tree's key images.
    pub fn to_byte_ranges(&self) -> Vec<ByteRange> {
        match self {
            KeyRangeSet::Int { ty, ranges, .. } => ranges
                .iter()
                .map(|&(lo, hi)| {
                    let img = |x: i64| match ty {
                        ScalarType::I32 => Value::I32(x as i32).key_bytes(),
                        _ => Value::I64(x).key_bytes(),
                    };
                    ByteRange { lo: Bound::Included(img(lo)), hi: Bound::Included(img(hi)) }
                })
                .collect(),
            KeyRangeSet::Str { ranges, .. } => ranges
                .iter()
                .map(|r| {
                    let b = |x: &Option<StrBound>| match x {
                        None => Bound::Unbounded,
                        Some(StrBound { value, inclusive: true }) => Bound::Included(value.as_bytes().to_vec()),
                        Some(StrBound { value, inclusive: false }) => Bound::Excluded(value.as_bytes().to_vec()),
                    };
                    ByteRange { lo: b(&r.lo), hi: b(&r.hi) }
                })
                .collect(),
        }
    }
}

fn str_contains(r: &StrRange, s: &str) -> bool {
    let lo_ok = match &r.lo {
        None => true,
        Some(b) => match s.as_bytes().cmp(b.value.as_bytes()) {
            Ordering::Greater => true,
            Ordering::Equal => b.inclusive,
            Ordering::Less => false,
        },
    };
    let hi_ok = match &r.hi {
        None => true,
        Some(b) => match s.as_bytes().cmp(b.value.as_bytes()) {
            Ordering::Less => true,
            Ordering::Equal => b.inclusive,
            Ordering::Greater => false,
        },
    };
    lo_ok && hi_ok
}

/// `(op, constant)` when `atom` has the shape `v.field op constant` (or
/// mirrored), with `op` oriented as field-on-the-left.
fn field_constraint(pred: &Expr, positive: bool, field: &str) -> Option<(BinOp, Literal)> {
    let ExprKind::Binary { op, lhs, rhs } = &pred.kind else { return None };
    if !op.is_comparison() {
        return None;
    }
    let is_field = |e: &Expr| matches!(&e.kind, ExprKind::Field { base, field: f } if base == "v" && f == field);
    let (op, c) = if is_field(lhs) {
        (*op, constant(rhs)?)
    } else if is_field(rhs) {
        (op.mirrored(), constant(lhs)?)
    } else {
        return None;
    };
    let op = if positive { op } else { op.negated()? };
    Some((op, c))
}

fn constant(e: &Expr) -> Option<Literal> {
    match &e.kind {
        ExprKind::Lit(l @ (Literal::Int(_) | Literal::Str(_))) => Some(l.clone()),
        ExprKind::Unary { op: UnOp::Neg, expr } => match constant(expr)? {
            Literal::Int(v) => Some(Literal::Int(v.checked_neg()?)),
            _ => None,
        },
        _ => None,
    }
}

pub fn dnf_to_ranges(dnf: &ConditionDnf, field: &str, schema: &Schema) -> Result<KeyRangeSet, NotSargable> {
    let not = || NotSargable { field: field.to_string() };
    let ty = schema.field(field).ok_or_else(not)?.ty;
    match ty {
        ScalarType::I32 | ScalarType::I64 => {
            let (min, max) = if ty == ScalarType::I32 {
                (i32::MIN as i64, i32::MAX as i64)
            } else {
                (i64::MIN, i64::MAX)
            };
            let mut out = Vec::new();
            for conj in &dnf.disjuncts {
                let (mut lo, mut hi) = (min as i128, max as i128);
                let mut constrained = false;
                for a in conj {
                    let Some((op, Literal::Int(c))) = field_constraint(&a.pred, a.positive, field) else { continue };
                    let c = c as i128;
                    match op {
                        BinOp::Lt => hi = hi.min(c - 1),
                        BinOp::Le => hi = hi.min(c),
                        BinOp::Gt => lo = lo.max(c + 1),
                        BinOp::Ge => lo = lo.max(c),
                        BinOp::Eq => {
                            lo = lo.max(c);
                            hi = hi.min(c);
                        }
                        _ => continue,
                    }
                    constrained = true;
                }
                if !constrained {
                    return Err(not());
                }
                if lo <= hi {
                    out.push((lo as i64, hi as i64));
                }
            }
            out.sort_unstable();
            let mut merged: Vec<(i64, i64)> = Vec::new();
            for (lo, hi) in out {
                match merged.last_mut() {
                    Some(last) if (lo as i128) <= last.1 as i128 + 1 => last.1 = last.1.max(hi),
                    _ => merged.push((lo, hi)),
                }
            }
            Ok(KeyRangeSet::Int { field: field.to_string(), ty, ranges: merged })
        }
        ScalarType::Str => {
            let mut out: Vec<StrRange> = Vec::new();
            for conj in &dnf.disjuncts {
                let mut r = StrRange { lo: None, hi: None };
                let mut constrained = false;
                for a in conj {
                    let Some((op, Literal::Str(c))) = field_constraint(&a.pred, a.positive, field) else { continue };
                    let incl = |inclusive| Some(StrBound { value: c.clone(), inclusive });
                    match op {
                        BinOp::Lt => r.hi = tighter_hi(r.hi, incl(false)),
                        BinOp::Le => r.hi = tighter_hi(r.hi, incl(true)),
                        BinOp::Gt => r.lo = tighter_lo(r.lo, incl(false)),
                        BinOp::Ge => r.lo = tighter_lo(r.lo, incl(true)),
                        BinOp::Eq => {
                            r.lo = tighter_lo(r.lo, incl(true));
                            r.hi = tighter_hi(r.hi, incl(true));
                        }
                        _ => continue,
                    }
                    constrained = true;
                }
                if !constrained {
                    return Err(not());
                }
                if !str_empty(&r) {
                    out.push(r);
                }
            }
            Ok(KeyRangeSet::Str { field: field.to_string(), ranges: normalize_str(out) })
        }
        ScalarType::Blob => Err(not()),
    }
}

fn cmp_lo(a: &Option<StrBound>, b: &Option<StrBound>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, _) => Ordering::Less,
        (_, None) => Ordering::Greater,
        (Some(x), Some(y)) => x
            .value
            .as_bytes()
            .cmp(y.value.as_bytes())
            // an inclusive lower bound starts earlier
            .then(y.inclusive.cmp(&x.inclusive)),
    }
}

fn cmp_hi(a: &Option<StrBound>, b: &Option<StrBound>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, _) => Ordering::Greater,
        (_, None) => Ordering::Less,
        (Some(x), Some(y)) => x.value.as_bytes().cmp(y.value.as_bytes()).then(x.inclusive.cmp(&y.inclusive)),
    }
}

fn tighter_lo(a: Option<StrBound>, b: Option<StrBound>) -> Option<StrBound> {
    if cmp_lo(&a, &b) == Ordering::Less {
        b
    } else {
        a
    }
}

fn tighter_hi(a: Option<StrBound>, b: Option<StrBound>) -> Option<StrBound> {
    if cmp_hi(&a, &b) == Ordering::Greater {
        b
    } else {
        a
    }
}

fn str_empty(r: &StrRange) -> bool {
    match (&r.lo, &r.hi) {
        (Some(lo), Some(hi)) => match lo.value.as_bytes().cmp(hi.value.as_bytes()) {
            Ordering::Greater => true,
            Ordering::Equal => !(lo.inclusive && hi.inclusive),
            Ordering::Less => false,
        },
        _ => false,
    }
}

/// Does an interval ending at `hi` overlap or touch one starting at `lo`?
fn touches(hi: &Option<StrBound>, lo: &Option<StrBound>) -> bool {
    match (hi, lo) {
        (None, _) | (_, None) => true,
        (Some(h), Some(l)) => match h.value.as_bytes().cmp(l.value.as_bytes()) {
            Ordering::Greater => true,
            Ordering::Equal => h.inclusive || l.inclusive,
            Ordering::Less => false,
        },
    }
}

fn normalize_str(mut rs: Vec<StrRange>) -> Vec<StrRange> {
    rs.sort_by(|a, b| cmp_lo(&a.lo, &b.lo));
    let mut out: Vec<StrRange> = Vec::new();
    for r in rs {
        match out.last_mut() {
            Some(last) if touches(&last.hi, &r.lo) => {
                if cmp_hi(&r.hi, &last.hi) == Ordering::Greater {
                    last.hi = r.hi;
                }
            }
            _ => out.push(r),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_expr, typecheck_predicate};
    use std::sync::Arc;

    fn schema() -> Schema {
        Schema::new("W", &[("url", ScalarType::Str), ("rank", ScalarType::I32)])
    }

    fn dnf(src: &str) -> ConditionDnf {
        let mut e = parse_expr(src).unwrap();
        typecheck_predicate(&mut e, &schema()).unwrap();
        ConditionDnf::of_condition(&e, true).unwrap()
    }

    fn ints(src: &str) -> Result<Vec<(i64, i64)>, NotSargable> {
        match dnf_to_ranges(&dnf(src), "rank", &schema())? {
            KeyRangeSet::Int { ranges, .. } => Ok(ranges),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn integer_ranges() {
        assert_eq!(ints("v.rank > 1").unwrap(), [(2, i32::MAX as i64)]);
        assert_eq!(ints("(v.rank > 10 && v.rank < 20) || v.rank == 5").unwrap(), [(5, 5), (11, 19)]);
        assert_eq!(ints("1 < v.rank && !(v.rank >= 4)").unwrap(), [(2, 3)]);
        assert_eq!(ints("v.rank > 5 && v.rank < 3").unwrap(), []);
        assert_eq!(ints("v.rank > 5000000000").unwrap(), []);
        assert_eq!(ints("v.rank >= 1 && v.rank <= 3 || v.rank == 4").unwrap(), [(1, 4)]);
        assert!(ints("v.rank > 1 || v.url == \"x\"").is_err());
        assert_eq!(ints("v.rank != 3 && v.rank < 0").unwrap(), [(i32::MIN as i64, -1)]);
    }

    #[test]
    fn ranges_cover_every_satisfying_record() {
        let d = dnf("(v.rank > 10 && v.rank < 20) || v.rank == 5 || (v.rank <= -3 && len(v.url) > 2)");
        let set = dnf_to_ranges(&d, "rank", &schema()).unwrap();
        for r in -30..30 {
            let rec = Arc::new(vec![Value::Str("abcd".into()), Value::I32(r)]);
            if d.eval(&schema(), &rec).unwrap() {
                assert!(set.contains(&Value::I32(r)), "rank {r}");
            }
        }
    }

    #[test]
    fn string_ranges() {
        let d = dnf("(v.url >= \"b\" && v.url < \"d\") || v.url == \"a\" || v.url == \"c\"");
        let KeyRangeSet::Str { ranges, .. } = dnf_to_ranges(&d, "url", &schema()).unwrap() else { panic!() };
        assert_eq!(ranges.len(), 2);
        let set = dnf_to_ranges(&d, "url", &schema()).unwrap();
        for (s, want) in [("a", true), ("aa", false), ("b", true), ("cz", true), ("d", false)] {
            assert_eq!(set.contains(&Value::Str(s.into())), want, "{s}");
        }
        let br = set.to_byte_ranges();
        assert!(br[1].contains(b"c"));
        assert!(!br[1].contains(b"d"));
    }
}
