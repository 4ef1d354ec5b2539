//! Direct-operation rewrite: string fields become dictionary tokens.

use std::collections::{BTreeMap, BTreeSet};

use crate::detect::{find_direct_op, DirectOpRefs};
use crate::error::JobError;
use crate::lang::{typecheck_with_tokens, BinOp, Expr, ExprKind, JobSpec, Literal, Stmt, StmtKind, Type, TypedJob};
use crate::storage::dict::Dictionary;

/// A job rewritten to run over tokens, plus the field whose tokens it emits
/// as shuffle keys (those must be translated back in the output).
pub struct Rewritten {
    pub job: TypedJob,
    pub key_field: Option<String>,
}

pub fn rewrite_for_directop(job: &TypedJob, dicts: &BTreeMap<String, Dictionary>) -> Result<Rewritten, JobError> {
    let spec = &job.job;
    if spec.sorted {
        return Err(JobError::Rewrite("job requires sorted output".into()));
    }
    let eligible = find_direct_op(spec);
    let fields: BTreeSet<String> = dicts.keys().cloned().collect();
    if let Some(f) = fields.iter().find(|f| !eligible.contains(*f)) {
        return Err(JobError::Rewrite(format!("field `{f}` has a use that is not an equality test")));
    }

    let (refs, _) = DirectOpRefs::new(spec);
    let mut out: JobSpec = spec.clone();
    let mut key_field = None;
    rewrite_block(&mut out.map.body, &|e: &Expr| refs.field_of(e), dicts, &mut key_field);
    let typed = typecheck_with_tokens(out, fields).map_err(|e| JobError::Rewrite(e.to_string()))?;
    let key_field = if typed.map_out_key == Type::Token { key_field } else { None };
    Ok(Rewritten { job: typed, key_field })
}

fn rewrite_block(
    body: &mut [Stmt],
    field_of: &dyn Fn(&Expr) -> Option<String>,
    dicts: &BTreeMap<String, Dictionary>,
    key_field: &mut Option<String>,
) {
    for s in body {
        match &mut s.kind {
            StmtKind::If { cond, then_body, else_body } => {
                rewrite_expr(cond, field_of, dicts);
                rewrite_block(then_body, field_of, dicts, key_field);
                rewrite_block(else_body, field_of, dicts, key_field);
            }
            StmtKind::While { cond, body } => {
                rewrite_expr(cond, field_of, dicts);
                rewrite_block(body, field_of, dicts, key_field);
            }
            StmtKind::Emit { key, value } => {
                if let Some(f) = field_of(key) {
                    if dicts.contains_key(&f) {
                        *key_field = Some(f);
                    }
                }
                rewrite_expr(key, field_of, dicts);
                rewrite_expr(value, field_of, dicts);
            }
            StmtKind::Let { value: e, .. } | StmtKind::Assign { value: e, .. } | StmtKind::Expr(e) | StmtKind::Log(e) => {
                rewrite_expr(e, field_of, dicts)
            }
        }
    }
}

/// Replace string constants compared against a token field by their token.
fn rewrite_expr(e: &mut Expr, field_of: &dyn Fn(&Expr) -> Option<String>, dicts: &BTreeMap<String, Dictionary>) {
    match &mut e.kind {
        ExprKind::Binary { op: BinOp::Eq | BinOp::Ne, lhs, rhs } => {
            let (lf, rf) = (field_of(lhs), field_of(rhs));
            let tokenize = |side: &mut Expr, f: Option<String>| {
                let Some(d) = f.and_then(|f| dicts.get(&f)) else { return };
                if let ExprKind::Lit(Literal::Str(s)) = &side.kind {
                    *side = Expr::typed(ExprKind::Token(d.encode(s)), Type::Token);
                }
            };
            tokenize(rhs, lf);
            tokenize(lhs, rf);
        }
        ExprKind::Binary { lhs, rhs, .. } => {
            rewrite_expr(lhs, field_of, dicts);
            rewrite_expr(rhs, field_of, dicts);
        }
        ExprKind::Unary { expr, .. } => rewrite_expr(expr, field_of, dicts),
        ExprKind::Call { args, .. } => {
            for a in args {
                rewrite_expr(a, field_of, dicts);
            }
        }
        _ => {}
    }
}
