//! Typechecker: annotates every expression with its type and fixes the
//! map-output and reduce-output types.

use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::builtins::{self, ArgKind, RetKind};
use crate::error::TypeError;

/// A job whose expressions all carry their static types.
#[derive(Clone, Debug, PartialEq)]
pub struct TypedJob {
    pub job: JobSpec,
    pub map_out_key: Type,
    pub map_out_value: Type,
    pub out_key: Type,
    pub out_value: Type,
    /// Fields read as dictionary tokens (set only on direct-operation rewrites).
    pub token_fields: BTreeSet<String>,
}

impl TypedJob {
    pub fn schema(&self) -> &Schema {
        &self.job.schema
    }
}

pub fn typecheck(job: JobSpec) -> Result<TypedJob, TypeError> {
    typecheck_with_tokens(job, BTreeSet::new())
}

/// Typecheck with the named string fields retyped as dictionary tokens.
pub fn typecheck_with_tokens(
    mut job: JobSpec,
    token_fields: BTreeSet<String>,
) -> Result<TypedJob, TypeError> {
    let decl_err = |message: String| TypeError { stmt: None, message };
    for t in &token_fields {
        match job.schema.field(t) {
            Some(f) if f.ty == ScalarType::Str => {}
            _ => return Err(decl_err(format!("token field `{t}` is not a str field"))),
        }
    }
    let mut members = HashMap::new();
    for m in &job.members {
        let ok = match (&m.init, m.ty) {
            (Literal::Int(v), ScalarType::I32) => i32::try_from(*v).is_ok(),
            (Literal::Int(_), ScalarType::I64) => true,
            (Literal::Str(_), ScalarType::Str) => true,
            _ => false,
        };
        if !ok {
            return Err(decl_err(format!(
                "member `{}`: initializer does not fit type {}",
                m.name, m.ty
            )));
        }
        for p in [&job.map.key_param, &job.map.value_param, &job.reduce.key_param, &job.reduce.value_param] {
            if *p == m.name {
                return Err(decl_err(format!("member `{}` shadows a parameter", m.name)));
            }
        }
        members.insert(m.name.clone(), Type::from(m.ty));
    }
    if job.map.key_param == job.map.value_param || job.reduce.key_param == job.reduce.value_param {
        return Err(decl_err("parameter names must differ".into()));
    }

    let schema = job.schema.clone();
    let key_ty = if token_fields.contains(&schema.key_field().name) {
        Type::Token
    } else {
        Type::from(schema.key_type())
    };

    let mut map_cx = Checker {
        schema: &schema,
        token_fields: &token_fields,
        members: &members,
        params: vec![
            (job.map.key_param.clone(), key_ty),
            (job.map.value_param.clone(), Type::Record(schema.name.clone())),
        ],
        scopes: vec![HashMap::new()],
        emit: None,
        in_reduce: false,
    };
    map_cx.block(&mut job.map.body)?;
    let (map_out_key, map_out_value) = map_cx.emit.take().unwrap_or((Type::Str, Type::I64));

    let mut reduce_cx = Checker {
        schema: &schema,
        token_fields: &token_fields,
        members: &members,
        params: vec![
            (job.reduce.key_param.clone(), map_out_key.clone()),
            (job.reduce.value_param.clone(), Type::Stream(Box::new(map_out_value.clone()))),
        ],
        scopes: vec![HashMap::new()],
        emit: None,
        in_reduce: true,
    };
    reduce_cx.block(&mut job.reduce.body)?;
    let (out_key, out_value) = reduce_cx.emit.take().unwrap_or((map_out_key.clone(), Type::I64));

    Ok(TypedJob { job, map_out_key, map_out_value, out_key, out_value, token_fields })
}

/// Typecheck a closed boolean predicate over a record of `schema` bound to `v`.
pub fn typecheck_predicate(expr: &mut Expr, schema: &Schema) -> Result<(), TypeError> {
    let members = HashMap::new();
    let tokens = BTreeSet::new();
    let mut cx = Checker {
        schema,
        token_fields: &tokens,
        members: &members,
        params: vec![("v".into(), Type::Record(schema.name.clone()))],
        scopes: vec![HashMap::new()],
        emit: None,
        in_reduce: false,
    };
    let t = cx.expr(expr, 0)?;
    if t != Type::Bool {
        return Err(TypeError { stmt: None, message: format!("predicate has type {t}, expected bool") });
    }
    let mut impure = None;
    expr.visit(&mut |e| {
        if let ExprKind::Call { name, .. } = &e.kind {
            if !builtins::is_pure(name) {
                impure = Some(name.clone());
            }
        }
    });
    match impure {
        Some(n) => Err(TypeError { stmt: None, message: format!("predicate calls impure builtin `{n}`") }),
        None => Ok(()),
    }
}

struct Checker<'a> {
    schema: &'a Schema,
    token_fields: &'a BTreeSet<String>,
    members: &'a HashMap<String, Type>,
    params: Vec<(String, Type)>,
    scopes: Vec<HashMap<String, Type>>,
    emit: Option<(Type, Type)>,
    in_reduce: bool,
}

fn is_int_literal(e: &Expr) -> Option<i64> {
    match &e.kind {
        ExprKind::Lit(Literal::Int(v)) => Some(*v),
        ExprKind::Unary { op: UnOp::Neg, expr } => is_int_literal(expr).map(|v| v.wrapping_neg()),
        _ => None,
    }
}

/// Retype an integer literal expression to i32 when it fits.
fn narrow_literal(e: &mut Expr) -> bool {
    match is_int_literal(e) {
        Some(v) if i32::try_from(v).is_ok() => {
            retype(e, Type::I32);
            true
        }
        _ => false,
    }
}

fn retype(e: &mut Expr, ty: Type) {
    if let ExprKind::Unary { expr, .. } = &mut e.kind {
        retype(expr, ty.clone());
    }
    e.ty = ty;
}

impl Checker<'_> {
    fn lookup(&self, name: &str) -> Option<Type> {
        for scope in self.scopes.iter().rev() {
            if let Some(t) = scope.get(name) {
                return Some(t.clone());
            }
        }
        if let Some((_, t)) = self.params.iter().find(|(p, _)| p == name) {
            return Some(t.clone());
        }
        self.members.get(name).cloned()
    }

    fn is_param(&self, name: &str) -> bool {
        self.params.iter().any(|(p, _)| p == name)
    }

    fn block(&mut self, body: &mut [Stmt]) -> Result<(), TypeError> {
        for s in body {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn scoped(&mut self, body: &mut [Stmt]) -> Result<(), TypeError> {
        self.scopes.push(HashMap::new());
        let r = self.block(body);
        self.scopes.pop();
        r
    }

    fn stmt(&mut self, s: &mut Stmt) -> Result<(), TypeError> {
        let id = s.id;
        let err = |message: String| TypeError { stmt: Some(id), message };
        match &mut s.kind {
            StmtKind::Let { name, value } => {
                if self.lookup(name).is_some() {
                    return Err(err(format!("`{name}` is already declared")));
                }
                let t = self.expr(value, id)?;
                if matches!(t, Type::Stream(_) | Type::Unknown) {
                    return Err(err(format!("cannot bind a value of type {t}")));
                }
                self.scopes.last_mut().expect("scope").insert(name.clone(), t);
            }
            StmtKind::Assign { name, value } => {
                if self.is_param(name) {
                    return Err(err(format!("cannot assign to parameter `{name}`")));
                }
                let Some(target) = self.lookup(name) else {
                    return Err(err(format!("assignment to undeclared `{name}`")));
                };
                let mut t = self.expr(value, id)?;
                if target == Type::I32 && t == Type::I64 && narrow_literal(value) {
                    t = Type::I32;
                }
                if t != target {
                    return Err(err(format!("cannot assign {t} to `{name}` of type {target}")));
                }
            }
            StmtKind::If { cond, then_body, else_body } => {
                let t = self.expr(cond, id)?;
                if t != Type::Bool {
                    return Err(err(format!("condition has type {t}, expected bool")));
                }
                self.scoped(then_body)?;
                self.scoped(else_body)?;
            }
            StmtKind::While { cond, body } => {
                let t = self.expr(cond, id)?;
                if t != Type::Bool {
                    return Err(err(format!("condition has type {t}, expected bool")));
                }
                self.scoped(body)?;
            }
            StmtKind::Emit { key, value } => {
                let mut kt = self.expr(key, id)?;
                let mut vt = self.expr(value, id)?;
                match kt {
                    Type::I32 | Type::I64 | Type::Str | Type::Blob | Type::Token => {}
                    _ => return Err(err(format!("emit key of type {kt} is not allowed"))),
                }
                match vt {
                    Type::Bool | Type::Stream(_) | Type::Unknown => {
                        return Err(err(format!("emit value of type {vt} is not allowed")))
                    }
                    _ => {}
                }
                if let Some((ek, ev)) = &self.emit {
                    if *ek == Type::I32 && kt == Type::I64 && narrow_literal(key) {
                        kt = Type::I32;
                    }
                    if *ev == Type::I32 && vt == Type::I64 && narrow_literal(value) {
                        vt = Type::I32;
                    }
                    if *ek != kt || *ev != vt {
                        return Err(err(format!(
                            "emit({kt}, {vt}) is inconsistent with earlier emit({ek}, {ev})"
                        )));
                    }
                } else {
                    self.emit = Some((kt, vt));
                }
            }
            StmtKind::Expr(e) => {
                self.expr(e, id)?;
            }
            StmtKind::Log(e) => {
                let t = self.expr(e, id)?;
                if matches!(t, Type::Stream(_)) {
                    return Err(err("cannot log a stream".into()));
                }
            }
        }
        Ok(())
    }

    fn expr(&mut self, e: &mut Expr, stmt: StmtId) -> Result<Type, TypeError> {
        let err = |message: String| TypeError { stmt: Some(stmt), message };
        let ty = match &mut e.kind {
            ExprKind::Lit(Literal::Int(_)) => {
                // already narrowed by an enclosing coercion
                if e.ty == Type::I32 { Type::I32 } else { Type::I64 }
            }
            ExprKind::Lit(Literal::Str(_)) => Type::Str,
            ExprKind::Lit(Literal::Bool(_)) => Type::Bool,
            ExprKind::Token(_) => Type::Token,
            ExprKind::Var(name) => self
                .lookup(name)
                .ok_or_else(|| err(format!("unknown identifier `{name}`")))?,
            ExprKind::Field { base, field } => {
                let bt = self
                    .lookup(base)
                    .ok_or_else(|| err(format!("unknown identifier `{base}`")))?;
                let Type::Record(schema_name) = &bt else {
                    return Err(err(format!("field access on `{base}` of type {bt}")));
                };
                debug_assert_eq!(schema_name, &self.schema.name);
                let f = self
                    .schema
                    .field(field)
                    .ok_or_else(|| err(format!("schema {} has no field `{field}`", self.schema.name)))?;
                if self.token_fields.contains(&f.name) {
                    Type::Token
                } else {
                    Type::from(f.ty)
                }
            }
            ExprKind::Unary { op, expr } => {
                let t = self.expr(expr, stmt)?;
                match (*op, &t) {
                    (UnOp::Not, Type::Bool) => Type::Bool,
                    (UnOp::Neg, Type::I32 | Type::I64) => t.clone(),
                    _ => return Err(err(format!("operator {op:?} does not apply to {t}"))),
                }
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let mut lt = self.expr(lhs, stmt)?;
                let mut rt = self.expr(rhs, stmt)?;
                if lt == Type::I32 && rt == Type::I64 && narrow_literal(rhs) {
                    rt = Type::I32;
                } else if rt == Type::I32 && lt == Type::I64 && narrow_literal(lhs) {
                    lt = Type::I32;
                }
                let op = *op;
                let mismatch = || err(format!("operator `{}` does not apply to {lt} and {rt}", op.symbol()));
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
                        if !lt.is_int() || !rt.is_int() {
                            return Err(mismatch());
                        }
                        if lt == Type::I32 && rt == Type::I32 { Type::I32 } else { Type::I64 }
                    }
                    BinOp::Concat => {
                        if lt != Type::Str || rt != Type::Str {
                            return Err(mismatch());
                        }
                        Type::Str
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        let ok = (lt.is_int() && rt.is_int()) || (lt == Type::Str && rt == Type::Str);
                        if !ok {
                            return Err(mismatch());
                        }
                        Type::Bool
                    }
                    BinOp::Eq | BinOp::Ne => {
                        let ok = (lt.is_int() && rt.is_int())
                            || (lt == rt && matches!(lt, Type::Str | Type::Bool | Type::Token));
                        if !ok {
                            return Err(mismatch());
                        }
                        Type::Bool
                    }
                    BinOp::And | BinOp::Or => {
                        if lt != Type::Bool || rt != Type::Bool {
                            return Err(mismatch());
                        }
                        Type::Bool
                    }
                }
            }
            ExprKind::Call { name, args } => {
                let spec = builtins::lookup(name)
                    .ok_or_else(|| err(format!("unknown builtin `{name}`")))?;
                if spec.reduce_only && !self.in_reduce {
                    return Err(err(format!("`{name}` is only available in reduce")));
                }
                if args.len() != spec.params.len() {
                    return Err(err(format!(
                        "`{name}` takes {} arguments, got {}",
                        spec.params.len(),
                        args.len()
                    )));
                }
                let mut elem = Type::Unknown;
                for (a, kind) in args.iter_mut().zip(spec.params) {
                    let t = self.expr(a, stmt)?;
                    let ok = match kind {
                        ArgKind::Int => t.is_int(),
                        ArgKind::Str => t == Type::Str,
                        ArgKind::StrOrBlob => matches!(t, Type::Str | Type::Blob),
                        ArgKind::Stream => {
                            if let Type::Stream(inner) = &t {
                                elem = (**inner).clone();
                                matches!(a.kind, ExprKind::Var(_))
                            } else {
                                false
                            }
                        }
                    };
                    if !ok {
                        return Err(err(format!("bad argument of type {t} to `{name}`")));
                    }
                }
                match spec.ret {
                    RetKind::Int => Type::I64,
                    RetKind::Str => Type::Str,
                    RetKind::Bool => Type::Bool,
                    RetKind::StreamElem => elem,
                }
            }
        };
        e.ty = ty.clone();
        Ok(ty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_job;

    fn check(body: &str) -> Result<TypedJob, TypeError> {
        let src = format!(
            "schema WebPage {{ url: str; rank: i32; content: str; }}
             job J on WebPage {{ members {{ n: i64 = 0; }} map(k, v) {{ {body} }} reduce(k, vals) {{ }} }}"
        );
        typecheck(parse_job(&src).unwrap())
    }

    #[test]
    fn emit_literal_value_is_i64_under_str_key() {
        let t = check("if (v.rank > 1) { emit(k, 1); }").unwrap();
        assert_eq!(t.map_out_key, Type::Str);
        assert_eq!(t.map_out_value, Type::I64);
        // the literal compared to an i32 field is narrowed
        let StmtKind::If { cond, .. } = &t.job.map.body[0].kind else { panic!() };
        let ExprKind::Binary { rhs, .. } = &cond.kind else { panic!() };
        assert_eq!(rhs.ty, Type::I32);
    }

    #[test]
    fn inconsistent_emits_rejected() {
        let e = check("emit(k, v.rank); emit(k, v.url);").unwrap_err();
        assert_eq!(e.stmt, Some(1));
        assert!(e.message.contains("inconsistent"));
        // i32 field then literal: literal adopts i32
        assert!(check("emit(k, v.rank); emit(k, 3);").is_ok());
    }

    #[test]
    fn arithmetic_on_str_rejected() {
        let e = check("emit(k, v.content + 1);").unwrap_err();
        assert_eq!(e.stmt, Some(0));
    }

    #[test]
    fn scoping_rules() {
        assert!(check("if (true) { let x = 1; } let x = 2; emit(k, x);").is_ok());
        assert!(check("let x = 1; if (true) { let x = 2; }").is_err());
        assert!(check("if (true) { let x = 1; } emit(k, x);").is_err());
        assert!(check("k = \"a\";").is_err());
        assert!(check("n = n + 1; emit(k, n);").is_ok());
        assert!(check("let w = v; emit(w.url, w.rank);").is_ok());
        assert!(check("emit(k, has_next(vals));").is_err());
    }

    #[test]
    fn reduce_types_flow_from_map() {
        let src = "schema S { a: str; b: i32; }
            job J on S { map(k, v) { emit(k, v); }
              reduce(k, vals) { while (has_next(vals)) { let r = next(vals); emit(k, r.b); } } }";
        let t = typecheck(parse_job(src).unwrap()).unwrap();
        assert_eq!(t.map_out_value, Type::Record("S".into()));
        assert_eq!(t.out_value, Type::I32);
    }

    #[test]
    fn deterministic_annotations() {
        let a = check("let x = v.rank * 2; if (x > 3 && len(v.url) > 0) { emit(k, x); }").unwrap();
        let b = check("let x = v.rank * 2; if (x > 3 && len(v.url) > 0) { emit(k, x); }").unwrap();
        assert_eq!(a, b);
    }
}
