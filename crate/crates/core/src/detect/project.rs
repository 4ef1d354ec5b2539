//! Projection and delta-compression detection.

use std::collections::{BTreeSet, HashSet};

use crate::analysis::{MapAnalysis, UdNode};
use crate::lang::{walk_stmts, Expr, ExprKind, ScalarType, StmtId, StmtKind};

/// Fields the map body may read to produce its output, including
/// everything flowing through member state and the task table.
pub fn used_fields(a: &MapAnalysis<'_>, safe_mode: bool) -> BTreeSet<String> {
    let schema = a.job.schema();
    let all: BTreeSet<String> = schema.fields.iter().map(|f| f.name.clone()).collect();
    let body = &a.job.job.map.body;

    let mut seeds: Vec<StmtId> = Vec::new();
    for emit in a.emits() {
        match a.emit_paths(emit) {
            Ok(paths) => {
                seeds.push(emit);
                for p in paths {
                    seeds.extend(p.stmts_before(&a.cfg, emit));
                }
            }
            Err(_) => return referenced_anywhere(a),
        }
    }

    // statements defining members and writing the table, by name
    let mut member_defs: Vec<(String, StmtId)> = Vec::new();
    let mut table_puts: Vec<StmtId> = Vec::new();
    walk_stmts(body, &mut |s| {
        if let Some(v) = s.defined_var() {
            if a.job.job.member(v).is_some() {
                member_defs.push((v.to_string(), s.id));
            }
        }
        if s.own_exprs().iter().any(|e| calls(e, "table_put")) {
            table_puts.push(s.id);
        }
    });

    let mut used = BTreeSet::new();
    let mut done: HashSet<StmtId> = HashSet::new();
    let mut work = seeds;
    while let Some(id) = work.pop() {
        if !done.insert(id) {
            continue;
        }
        if !safe_mode && matches!(a.cfg.stmt(id).kind, StmtKind::Log(_)) {
            continue;
        }
        let dag = a.use_def(id);
        for n in &dag.nodes {
            match n {
                UdNode::Param { name, field } if *name == a.job.job.map.value_param => match field {
                    Some(f) => {
                        used.insert(f.clone());
                    }
                    None => return all,
                },
                UdNode::Param { .. } => {
                    used.insert(schema.key_field().name.clone());
                }
                UdNode::Member(m) => {
                    work.extend(member_defs.iter().filter(|(n, _)| n == m).map(|(_, s)| *s));
                }
                UdNode::Builtin { name, .. } if name == "table_get" => work.extend(&table_puts),
                _ => {}
            }
        }
    }
    used
}

fn calls(e: &Expr, builtin: &str) -> bool {
    let mut found = false;
    e.visit(&mut |x| {
        if let ExprKind::Call { name, .. } = &x.kind {
            found |= name == builtin;
        }
    });
    found
}

/// Conservative fallback: every field named anywhere in the map body.
fn referenced_anywhere(a: &MapAnalysis<'_>) -> BTreeSet<String> {
    let job = &a.job.job;
    let all: BTreeSet<String> = job.schema.fields.iter().map(|f| f.name.clone()).collect();
    let mut used = BTreeSet::new();
    let mut whole = false;
    walk_stmts(&job.map.body, &mut |s| {
        for e in s.own_exprs() {
            e.visit(&mut |x| match &x.kind {
                ExprKind::Field { field, .. } => {
                    used.insert(field.clone());
                }
                ExprKind::Var(n) if *n == job.map.value_param => whole = true,
                ExprKind::Var(n) if *n == job.map.key_param => {
                    used.insert(job.schema.key_field().name.clone());
                }
                _ => {}
            });
        }
    });
    // record aliases make field names ambiguous; give up on them too
    if whole {
        all
    } else {
        used
    }
}

/// Fields the map never needs. Empty for opaque (key + blob) schemas.
pub fn find_project(a: &MapAnalysis<'_>, safe_mode: bool) -> BTreeSet<String> {
    let schema = a.job.schema();
    if schema.is_opaque() {
        return BTreeSet::new();
    }
    let used = used_fields(a, safe_mode);
    schema.fields.iter().map(|f| f.name.clone()).filter(|f| !used.contains(f)).collect()
}

/// Numeric fields surviving projection.
pub fn find_delta(a: &MapAnalysis<'_>, dropped: &BTreeSet<String>) -> BTreeSet<String> {
    let schema = a.job.schema();
    if schema.is_opaque() {
        return BTreeSet::new();
    }
    schema
        .fields
        .iter()
        .filter(|f| matches!(f.ty, ScalarType::I32 | ScalarType::I64) && !dropped.contains(&f.name))
        .map(|f| f.name.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::load_job;

    fn project(body: &str) -> Vec<String> {
        let j = load_job(&format!(
            "schema WebPage {{ url: str; rank: i32; content: str; }}
             job J on WebPage {{ members {{ n: i64 = 0; }} map(k, v) {{ {body} }} reduce(k, vals) {{ }} }}"
        ))
        .unwrap();
        let a = MapAnalysis::new(&j);
        find_project(&a, false).into_iter().collect()
    }

    #[test]
    fn drops_unread_fields() {
        assert_eq!(project("if (v.rank > 1) { emit(k, 1); }"), ["content"]);
        assert_eq!(project("emit(v.url, v.rank);"), ["content"]);
        assert!(project("emit(k, v);").is_empty());
        assert!(project("let w = v; emit(k, w);").is_empty());
        assert_eq!(project("log(v.content); emit(k, 1);"), ["content", "rank"]);
    }

    #[test]
    fn member_and_table_flows_count() {
        // content reaches the condition only through the member
        assert_eq!(project("if (n > 3) { emit(k, 1); } n = n + len(v.content);"), ["rank"]);
        assert_eq!(
            project("if (table_get(v.url)) { emit(k, 1); } table_put(substr(v.content, 0, 3));"),
            ["rank"]
        );
    }

    #[test]
    fn loops_fall_back_to_all_referenced() {
        assert_eq!(project("let i = 0; while (i < v.rank) { i = i + 1; } emit(k, i);"), ["content"]);
    }

    #[test]
    fn opaque_schema_is_never_projected() {
        let j = load_job(
            "schema R { pageRank: i32; tuple: blob; } job J on R { map(k, v) { if (k > 3) { emit(k, 1); } } reduce(k, vals) { } }",
        )
        .unwrap();
        let a = MapAnalysis::new(&j);
        assert!(find_project(&a, false).is_empty());
        assert!(find_delta(&a, &BTreeSet::new()).is_empty());
    }
}
