//! Disjunctive normal form over atomic record predicates.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::interp::eval_predicate;
use crate::error::JobError;
use crate::lang::{parse_expr, print_expr, typecheck_predicate, BinOp, Expr, ExprKind, Literal, Schema, UnOp};
use crate::value::Record;

/// Largest DNF (in disjuncts) the detectors will build.
pub const MAX_DISJUNCTS: usize = 4096;

/// A predicate over the record bound to `v`, with polarity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AtomRepr", into = "AtomRepr")]
pub struct Atom {
    pub pred: Expr,
    pub positive: bool,
}

#[derive(Serialize, Deserialize)]
struct AtomRepr {
    pred: String,
    positive: bool,
}

impl TryFrom<AtomRepr> for Atom {
    type Error = String;
    fn try_from(r: AtomRepr) -> Result<Self, String> {
        let pred = parse_expr(&r.pred).map_err(|e| format!("predicate `{}`: {e}", r.pred))?;
        Ok(Atom { pred, positive: r.positive })
    }
}

impl From<Atom> for AtomRepr {
    fn from(a: Atom) -> Self {
        AtomRepr { pred: print_expr(&a.pred), positive: a.positive }
    }
}

impl Atom {
    fn text(&self) -> String {
        print_expr(&self.pred)
    }

    /// Identity up to complementary comparisons: `a < b` and `!(a >= b)`
    /// share a key, so contradictions between them are visible.
    fn key(&self) -> (String, bool) {
        if let ExprKind::Binary { op: op @ (BinOp::Lt | BinOp::Le | BinOp::Ne), lhs, rhs } = &self.pred.kind {
            let flipped = Expr::typed(
                ExprKind::Binary { op: op.negated().expect("comparisons negate"), lhs: lhs.clone(), rhs: rhs.clone() },
                self.pred.ty.clone(),
            );
            return (print_expr(&flipped), !self.positive);
        }
        (self.text(), self.positive)
    }

    pub fn eval(&self, schema: &Schema, record: &Arc<Record>) -> Result<bool, JobError> {
        Ok(eval_predicate(schema, &self.pred, record.clone())? == self.positive)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.text())
        } else {
            write!(f, "!({})", self.text())
        }
    }
}

/// An OR of ANDs. `[]` is FALSE; `[[]]` is TRUE.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionDnf {
    pub disjuncts: Vec<Vec<Atom>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TooLarge;

impl ConditionDnf {
    pub fn truth() -> Self {
        ConditionDnf { disjuncts: vec![vec![]] }
    }

    pub fn falsity() -> Self {
        ConditionDnf { disjuncts: vec![] }
    }

    pub fn is_true(&self) -> bool {
        self.disjuncts.iter().any(Vec::is_empty)
    }

    pub fn is_false(&self) -> bool {
        self.disjuncts.is_empty()
    }

    pub fn eval(&self, schema: &Schema, record: &Arc<Record>) -> Result<bool, JobError> {
        for conj in &self.disjuncts {
            let mut all = true;
            for a in conj {
                if !a.eval(schema, record)? {
                    all = false;
                    break;
                }
            }
            if all {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// The DNF of `e` (or of its negation when `positive` is false).
    pub fn of_condition(e: &Expr, positive: bool) -> Result<Self, TooLarge> {
        let mut d = ConditionDnf { disjuncts: split(e, positive)? };
        d.simplify();
        Ok(d)
    }

    pub fn or(mut self, other: ConditionDnf) -> Result<Self, TooLarge> {
        self.disjuncts.extend(other.disjuncts);
        if self.disjuncts.len() > MAX_DISJUNCTS {
            return Err(TooLarge);
        }
        self.simplify();
        Ok(self)
    }

    pub fn and(self, other: &ConditionDnf) -> Result<Self, TooLarge> {
        let mut d = ConditionDnf { disjuncts: product(self.disjuncts, &other.disjuncts)? };
        d.simplify();
        Ok(d)
    }

    /// Fold constant atoms, drop contradictions, sort and deduplicate.
    pub fn simplify(&mut self) {
        let mut out: Vec<Vec<Atom>> = Vec::new();
        let mut seen = BTreeSet::new();
        'disj: for conj in std::mem::take(&mut self.disjuncts) {
            let mut keyed: Vec<(String, bool, Atom)> = Vec::new();
            for a in conj {
                if let Some(b) = const_value(&a.pred) {
                    if b == a.positive {
                        continue;
                    }
                    continue 'disj;
                }
                let (t, pol) = a.key();
                if let Some((_, other, _)) = keyed.iter().find(|(k, _, _)| *k == t) {
                    if *other != pol {
                        continue 'disj;
                    }
                    continue;
                }
                keyed.push((t, pol, a));
            }
            keyed.sort_by(|x, y| (&x.0, x.1).cmp(&(&y.0, y.1)));
            let sig: Vec<(String, bool)> = keyed.iter().map(|(k, p, _)| (k.clone(), *p)).collect();
            if sig.is_empty() {
                self.disjuncts = vec![vec![]];
                return;
            }
            if seen.insert(sig) {
                out.push(keyed.into_iter().map(|(_, _, a)| a).collect());
            }
        }
        self.disjuncts = out;
    }

    /// Fields referenced by any atom.
    pub fn fields(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in self.disjuncts.iter().flatten() {
            a.pred.visit(&mut |e| {
                if let ExprKind::Field { field, .. } = &e.kind {
                    out.insert(field.clone());
                }
            });
        }
        out
    }

    /// Parse-time check for descriptors from outside the analyzer: every
    /// atom must typecheck as a pure boolean predicate over `v`.
    pub fn validate(&mut self, schema: &Schema) -> Result<(), String> {
        for a in self.disjuncts.iter_mut().flatten() {
            let text = print_expr(&a.pred);
            typecheck_predicate(&mut a.pred, schema).map_err(|e| format!("predicate `{text}`: {}", e.message))?;
        }
        Ok(())
    }
}

impl fmt::Display for ConditionDnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_false() {
            return write!(f, "FALSE");
        }
        if self.is_true() {
            return write!(f, "TRUE");
        }
        for (i, conj) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                write!(f, " OR ")?;
            }
            write!(f, "(")?;
            for (j, a) in conj.iter().enumerate() {
                if j > 0 {
                    write!(f, " AND ")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

fn product(a: Vec<Vec<Atom>>, b: &[Vec<Atom>]) -> Result<Vec<Vec<Atom>>, TooLarge> {
    if a.len().saturating_mul(b.len()) > MAX_DISJUNCTS {
        return Err(TooLarge);
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in &a {
        for y in b {
            let mut c = x.clone();
            c.extend(y.iter().cloned());
            out.push(c);
        }
    }
    Ok(out)
}

fn split(e: &Expr, positive: bool) -> Result<Vec<Vec<Atom>>, TooLarge> {
    match &e.kind {
        ExprKind::Unary { op: UnOp::Not, expr } => split(expr, !positive),
        ExprKind::Lit(Literal::Bool(b)) => Ok(if *b == positive { vec![vec![]] } else { vec![] }),
        ExprKind::Binary { op: op @ (BinOp::And | BinOp::Or), lhs, rhs } => {
            let l = split(lhs, positive)?;
            let r = split(rhs, positive)?;
            // De Morgan: a negated AND distributes like an OR and vice versa
            if (*op == BinOp::And) == positive {
                product(l, &r)
            } else {
                let mut l = l;
                l.extend(r);
                if l.len() > MAX_DISJUNCTS {
                    return Err(TooLarge);
                }
                Ok(l)
            }
        }
        ExprKind::Binary { op, lhs, rhs } if !positive && op.is_comparison() => {
            let flipped = op.negated().expect("comparisons negate");
            let pred = Expr::typed(
                ExprKind::Binary { op: flipped, lhs: lhs.clone(), rhs: rhs.clone() },
                e.ty.clone(),
            );
            Ok(vec![vec![Atom { pred, positive: true }]])
        }
        _ => Ok(vec![vec![Atom { pred: e.clone(), positive }]]),
    }
}

/// Value of a predicate that mentions no variables, when it evaluates cleanly.
fn const_value(e: &Expr) -> Option<bool> {
    let mut impure = false;
    e.visit(&mut |x| {
        if let ExprKind::Call { name, .. } = &x.kind {
            impure |= !crate::lang::builtins::is_pure(name);
        }
    });
    if impure || !e.variables().is_empty() {
        return None;
    }
    let schema = Schema::new("Const", &[("k", crate::lang::ScalarType::I64)]);
    eval_predicate(&schema, e, Arc::new(vec![crate::value::Value::I64(0)])).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::ScalarType;
    use crate::value::Value;

    fn schema() -> Schema {
        Schema::new("W", &[("url", ScalarType::Str), ("rank", ScalarType::I32)])
    }

    fn cond(src: &str) -> Expr {
        let mut e = parse_expr(src).unwrap();
        typecheck_predicate(&mut e, &schema()).unwrap();
        e
    }

    fn rec(rank: i32) -> Arc<Record> {
        Arc::new(vec![Value::Str("u".into()), Value::I32(rank)])
    }

    #[test]
    fn negation_flips_comparisons() {
        let d = ConditionDnf::of_condition(&cond("v.rank > 1 && v.url == \"x\""), false).unwrap();
        assert_eq!(d.to_string(), "(v.rank <= 1) OR (v.url != \"x\")");
        let d = ConditionDnf::of_condition(&cond("!(v.rank > 1 || v.rank < 0)"), true).unwrap();
        assert_eq!(d.to_string(), "(v.rank <= 1 AND v.rank >= 0)");
    }

    #[test]
    fn constants_and_contradictions() {
        assert!(ConditionDnf::of_condition(&cond("1 < 2"), true).unwrap().is_true());
        assert!(ConditionDnf::of_condition(&cond("1 < 2"), false).unwrap().is_false());
        let a = ConditionDnf::of_condition(&cond("v.rank > 1"), true).unwrap();
        let b = ConditionDnf::of_condition(&cond("v.rank > 1"), false).unwrap();
        assert!(a.clone().and(&b).unwrap().is_false());
        assert!(a.or(b).unwrap().disjuncts.len() == 2);
    }

    #[test]
    fn eval_matches_truth_table() {
        let d = ConditionDnf::of_condition(&cond("v.rank > 1 || (v.rank < 0 && !(v.rank == -1))"), true).unwrap();
        for r in -3..4 {
            let want = r > 1 || (r < 0 && r != -1);
            assert_eq!(d.eval(&schema(), &rec(r)).unwrap(), want, "rank {r}");
        }
    }

    #[test]
    fn json_roundtrip() {
        let mut d = ConditionDnf::of_condition(&cond("v.rank > 1"), true).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"disjuncts":[[{"pred":"v.rank > 1","positive":true}]]}"#);
        let mut back: ConditionDnf = serde_json::from_str(&s).unwrap();
        back.validate(&schema()).unwrap();
        d.validate(&schema()).unwrap();
        assert_eq!(back, d);
        let mut bad: ConditionDnf =
            serde_json::from_str(r#"{"disjuncts":[[{"pred":"v.nope > 1","positive":true}]]}"#).unwrap();
        assert!(bad.validate(&schema()).is_err());
    }
}
