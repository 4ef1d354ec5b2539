//! Selection detection: the condition under which map emits, as a DNF over
//! the input record.

use std::collections::HashMap;

use super::dnf::ConditionDnf;
use crate::analysis::MapAnalysis;
use crate::lang::{Expr, ExprKind, StmtId, StmtKind};

/// Substituted conditions larger than this (in nodes) are not analyzed.
pub const MAX_COND_SIZE: usize = 4096;

/// Why selection could not be established.
pub type Refusal = String;

pub fn find_select(a: &MapAnalysis<'_>, safe_mode: bool) -> Result<ConditionDnf, Refusal> {
    let mut dnf = ConditionDnf::falsity();
    let mut functional: HashMap<StmtId, bool> = HashMap::new();
    for emit in a.emits() {
        let paths = a.emit_paths(emit).map_err(|e| e.to_string())?;
        for path in paths {
            let polarity: HashMap<StmtId, bool> = path.conds.iter().copied().collect();
            let mut sub = Subst::new(a);
            let mut conj = ConditionDnf::truth();
            for id in path.stmts_before(&a.cfg, emit) {
                let s = a.cfg.stmt(id);
                match &s.kind {
                    StmtKind::Let { name, value } | StmtKind::Assign { name, value } => {
                        let v = sub.expr(value);
                        sub.env.insert(name.clone(), v);
                    }
                    StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => {
                        let ok = *functional.entry(id).or_insert_with(|| a.use_def(id).is_func());
                        if !ok {
                            return Err(format!("condition of statement {id} is not a function of the input"));
                        }
                        let Some(&pos) = polarity.get(&id) else { continue };
                        let c = sub.expr(cond);
                        if c.size() > MAX_COND_SIZE {
                            return Err(format!("condition of statement {id} is too large"));
                        }
                        let d = ConditionDnf::of_condition(&c, pos).map_err(|_| too_large())?;
                        conj = conj.and(&d).map_err(|_| too_large())?;
                    }
                    StmtKind::Log(_) if safe_mode => {
                        return Err(format!("safe mode: log statement {id} precedes an emit"));
                    }
                    _ => {}
                }
            }
            dnf = dnf.or(conj).map_err(|_| too_large())?;
        }
    }
    Ok(dnf)
}

fn too_large() -> Refusal {
    "emit condition is too large to normalize".into()
}

/// Symbolic state along one path: each local maps to an expression over the
/// record `v` and constants.
struct Subst<'a> {
    key_param: &'a str,
    value_param: &'a str,
    key_field: &'a str,
    env: HashMap<String, Expr>,
}

impl<'a> Subst<'a> {
    fn new(a: &'a MapAnalysis<'_>) -> Self {
        let job = &a.job.job;
        Subst {
            key_param: &job.map.key_param,
            value_param: &job.map.value_param,
            key_field: &job.schema.key_field().name,
            env: HashMap::new(),
        }
    }

    fn expr(&self, e: &Expr) -> Expr {
        let kind = match &e.kind {
            ExprKind::Var(n) => {
                if let Some(x) = self.env.get(n) {
                    return x.clone();
                }
                if n == self.key_param {
                    ExprKind::Field { base: "v".into(), field: self.key_field.to_string() }
                } else if n == self.value_param {
                    ExprKind::Var("v".into())
                } else {
                    ExprKind::Var(n.clone())
                }
            }
            ExprKind::Field { base, field } => {
                // every record-typed name is the input record or an alias of it
                let _ = base;
                ExprKind::Field { base: "v".into(), field: field.clone() }
            }
            ExprKind::Unary { op, expr } => ExprKind::Unary { op: *op, expr: Box::new(self.expr(expr)) },
            ExprKind::Binary { op, lhs, rhs } => {
                ExprKind::Binary { op: *op, lhs: Box::new(self.expr(lhs)), rhs: Box::new(self.expr(rhs)) }
            }
            ExprKind::Call { name, args } => {
                ExprKind::Call { name: name.clone(), args: args.iter().map(|x| self.expr(x)).collect() }
            }
            k @ (ExprKind::Lit(_) | ExprKind::Token(_)) => k.clone(),
        };
        Expr::typed(kind, e.ty.clone())
    }
}
