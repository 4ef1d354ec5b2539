//! Direct-operation detection: string fields the job only ever compares for
//! equality or passes through as the shuffle key, so dictionary tokens can
//! stand in for them.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::lang::{walk_stmts, BinOp, Expr, ExprKind, JobSpec, Literal, ScalarType, StmtKind};

#[derive(Default, Debug, Clone)]
struct Usage {
    ok_uses: usize,
    key_uses: usize,
    bad: bool,
}

/// Which field an expression is a plain reference to (`v.f`, `k`, or a
/// local alias of either), if any.
pub(crate) struct Refs<'j> {
    job: &'j JobSpec,
    aliases: HashMap<String, String>,
}

impl<'j> Refs<'j> {
    /// Collect aliases: locals bound to a plain field reference. The second
    /// value names locals that are ever reassigned.
    pub(crate) fn new(job: &'j JobSpec) -> (Self, BTreeSet<String>) {
        let mut refs = Refs { job, aliases: HashMap::new() };
        let mut assigned = BTreeSet::new();
        walk_stmts(&job.map.body, &mut |s| match &s.kind {
            StmtKind::Let { name, value } => {
                if let Some(f) = refs.field_of(value) {
                    refs.aliases.insert(name.clone(), f);
                }
            }
            StmtKind::Assign { name, .. } => {
                assigned.insert(name.clone());
            }
            _ => {}
        });
        (refs, assigned)
    }

    pub(crate) fn field_of(&self, e: &Expr) -> Option<String> {
        match &e.kind {
            ExprKind::Field { base, field } if *base == self.job.map.value_param => Some(field.clone()),
            ExprKind::Var(n) if *n == self.job.map.key_param => Some(self.job.schema.key_field().name.clone()),
            ExprKind::Var(n) => self.aliases.get(n).cloned(),
            _ => None,
        }
    }
}

pub fn find_direct_op(job: &JobSpec) -> BTreeSet<String> {
    let str_fields: BTreeSet<String> = job
        .schema
        .fields
        .iter()
        .filter(|f| f.ty == ScalarType::Str)
        .map(|f| f.name.clone())
        .collect();
    if str_fields.is_empty() {
        return BTreeSet::new();
    }

    // aliases must never be reassigned
    let (refs, assigned) = Refs::new(job);
    let mut whole_record = false;
    let mut usage: BTreeMap<String, Usage> = str_fields.iter().map(|f| (f.clone(), Usage::default())).collect();
    let disqualify = |f: &str, usage: &mut BTreeMap<String, Usage>| {
        if let Some(u) = usage.get_mut(f) {
            u.bad = true;
        }
    };
    for (alias, f) in &refs.aliases {
        if assigned.contains(alias) {
            disqualify(f, &mut usage);
        }
    }

    let mut emit_key_fields: Vec<Option<String>> = Vec::new();
    walk_stmts(&job.map.body, &mut |s| {
        match &s.kind {
            StmtKind::Let { value, .. } if refs.field_of(value).is_some() => {}
            StmtKind::Emit { key, value } => {
                let kf = refs.field_of(key);
                match &kf {
                    Some(f) => {
                        if let Some(u) = usage.get_mut(f) {
                            u.key_uses += 1;
                        }
                    }
                    None => scan(&refs, key, &mut usage, &mut whole_record),
                }
                emit_key_fields.push(kf);
                scan(&refs, value, &mut usage, &mut whole_record);
            }
            StmtKind::Log(e) => {
                if let Some(f) = refs.field_of(e) {
                    disqualify(&f, &mut usage);
                }
                scan(&refs, e, &mut usage, &mut whole_record);
            }
            _ => {
                for e in s.own_exprs() {
                    scan(&refs, e, &mut usage, &mut whole_record);
                }
            }
        }
    });
    if whole_record {
        return BTreeSet::new();
    }

    let reduce_ok = reduce_passes_key_through(job);
    usage
        .into_iter()
        .filter(|(f, u)| {
            if u.bad || u.ok_uses + u.key_uses == 0 {
                return false;
            }
            if u.key_uses > 0 {
                let all_keys_from_f = emit_key_fields.iter().all(|k| k.as_deref() == Some(f.as_str()));
                return !job.sorted && all_keys_from_f && reduce_ok;
            }
            true
        })
        .map(|(f, _)| f)
        .collect()
}

/// Walk an expression classifying every field reference it contains.
fn scan(refs: &Refs<'_>, e: &Expr, usage: &mut BTreeMap<String, Usage>, whole: &mut bool) {
    if let ExprKind::Binary { op: BinOp::Eq | BinOp::Ne, lhs, rhs } = &e.kind {
        let (l, r) = (refs.field_of(lhs), refs.field_of(rhs));
        let lit = |x: &Expr| matches!(x.kind, ExprKind::Lit(Literal::Str(_)));
        let pair = match (&l, &r) {
            (Some(a), Some(b)) if a == b => Some(a.clone()),
            (Some(a), None) if lit(rhs) => Some(a.clone()),
            (None, Some(b)) if lit(lhs) => Some(b.clone()),
            _ => None,
        };
        if let Some(f) = pair {
            if let Some(u) = usage.get_mut(&f) {
                u.ok_uses += 1;
                return;
            }
        }
    }
    if let Some(f) = refs.field_of(e) {
        if let Some(u) = usage.get_mut(&f) {
            u.bad = true;
        }
        return;
    }
    match &e.kind {
        ExprKind::Var(n) if *n == refs.job.map.value_param => *whole = true,
        ExprKind::Unary { expr, .. } => scan(refs, expr, usage, whole),
        ExprKind::Binary { lhs, rhs, .. } => {
            scan(refs, lhs, usage, whole);
            scan(refs, rhs, usage, whole);
        }
        ExprKind::Call { args, .. } => {
            for a in args {
                scan(refs, a, usage, whole);
            }
        }
        _ => {}
    }
}

/// Reduce uses its key only as the emitted key and keeps no state across
/// groups, so renaming keys cannot change what it computes per group.
fn reduce_passes_key_through(job: &JobSpec) -> bool {
    let k = &job.reduce.key_param;
    let mut ok = true;
    walk_stmts(&job.reduce.body, &mut |s| {
        let exprs: Vec<&Expr> = match &s.kind {
            StmtKind::Emit { key, value } if matches!(&key.kind, ExprKind::Var(n) if n == k) => vec![value],
            _ => s.own_exprs(),
        };
        if let Some(v) = s.defined_var() {
            if job.member(v).is_some() {
                ok = false;
            }
        }
        for e in exprs {
            e.visit(&mut |x| {
                if let ExprKind::Var(n) = &x.kind {
                    if n == k || job.member(n).is_some() {
                        ok = false;
                    }
                }
            });
        }
    });
    ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_job;

    fn direct(sorted: bool, map: &str, reduce: &str) -> Vec<String> {
        let src = format!(
            "schema UV {{ sourceIP: str; destURL: str; duration: i32; }}
             job J on UV {} {{ members {{ n: i64 = 0; }} map(k, v) {{ {map} }} reduce(k, vals) {{ {reduce} }} }}",
            if sorted { "sorted" } else { "" }
        );
        find_direct_op(&parse_job(&src).unwrap()).into_iter().collect()
    }

    const SUM: &str = "let s = 0; while (has_next(vals)) { s = s + next(vals); } emit(k, s);";

    #[test]
    fn emit_key_passthrough() {
        assert_eq!(direct(false, "emit(v.destURL, v.duration);", SUM), ["destURL"]);
        assert!(direct(true, "emit(v.destURL, v.duration);", SUM).is_empty());
        // reduce inspects the key
        assert!(direct(false, "emit(v.destURL, v.duration);", "if (k == \"x\") { emit(k, 1); }").is_empty());
        // reduce carries state across groups
        assert!(direct(false, "emit(v.destURL, v.duration);", "n = n + 1; emit(k, n);").is_empty());
    }

    #[test]
    fn equality_only() {
        assert_eq!(
            direct(false, "let u = v.destURL; if (u == \"a\" || v.sourceIP != \"b\") { emit(v.destURL, 1); }", SUM),
            ["destURL", "sourceIP"]
        );
        assert!(direct(false, "if (substr(v.destURL, 0, 2) == \"ab\") { emit(v.destURL, 1); }", SUM).is_empty());
        assert!(direct(false, "emit(v.destURL, v.destURL);", "").is_empty());
        // cross-field comparison would need a shared dictionary
        assert!(direct(false, "if (v.destURL == v.sourceIP) { emit(k, 1); }", SUM).is_empty());
    }

    #[test]
    fn disqualifiers() {
        assert!(direct(false, "log(v.destURL); emit(v.destURL, 1);", SUM).is_empty());
        assert!(direct(false, "let u = v.destURL; u = \"z\"; emit(v.destURL, 1);", SUM).is_empty());
        assert!(direct(false, "let w = v; emit(v.destURL, 1);", SUM).is_empty());
        // keys from two different sources
        assert!(direct(false, "if (v.duration > 3) { emit(v.destURL, 1); } else { emit(\"x\", 1); }", SUM).is_empty());
    }
}
