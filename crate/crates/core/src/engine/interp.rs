//! Reference interpreter for map and reduce bodies.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::error::JobError;
use crate::lang::{BinOp, Expr, ExprKind, JobSpec, Literal, Schema, Stmt, StmtId, StmtKind, Type, UnOp};
use crate::value::{Record, Value};

/// Iterations a single `while` may run within one invocation.
pub const LOOP_LIMIT: u64 = 1_000_000;

/// Token value standing for a string constant absent from a dictionary.
pub const ABSENT_TOKEN: u32 = u32::MAX;

/// Per-task mutable state: one copy of every member plus the task's table.
#[derive(Clone, Debug, Default)]
pub struct TaskState {
    pub members: HashMap<String, Value>,
    pub table: HashSet<String>,
    pub log: Vec<String>,
}

impl TaskState {
    pub fn new(job: &JobSpec) -> Self {
        let members = job
            .members
            .iter()
            .map(|m| {
                let v = match (&m.init, m.ty) {
                    (Literal::Int(v), crate::lang::ScalarType::I32) => Value::I32(*v as i32),
                    (Literal::Int(v), _) => Value::I64(*v),
                    (Literal::Str(s), _) => Value::Str(s.clone()),
                    (Literal::Bool(b), _) => Value::Bool(*b),
                };
                (m.name.clone(), v)
            })
            .collect();
        TaskState { members, table: HashSet::new(), log: Vec::new() }
    }
}

pub type Pair = (Value, Value);

struct Stream {
    name: String,
    values: Vec<Value>,
    pos: usize,
}

struct Interp<'s, 'j> {
    schema: &'j Schema,
    state: &'s mut TaskState,
    locals: Vec<(String, Value)>,
    stream: Option<Stream>,
    out: &'s mut Vec<Pair>,
}

fn rt(stmt: StmtId, message: impl Into<String>) -> JobError {
    JobError::Runtime { stmt, message: message.into() }
}

/// Run the map body on one record. The key parameter is bound to the
/// record's first field.
pub fn run_map(job: &JobSpec, record: Arc<Record>, state: &mut TaskState, out: &mut Vec<Pair>) -> Result<(), JobError> {
    let key = record[0].clone();
    let mut it = Interp {
        schema: &job.schema,
        state,
        locals: vec![(job.map.key_param.clone(), key), (job.map.value_param.clone(), Value::Record(record))],
        stream: None,
        out,
    };
    it.block(&job.map.body)
}

pub fn run_reduce(
    job: &JobSpec,
    key: Value,
    values: Vec<Value>,
    state: &mut TaskState,
    out: &mut Vec<Pair>,
) -> Result<(), JobError> {
    let mut it = Interp {
        schema: &job.schema,
        state,
        locals: vec![(job.reduce.key_param.clone(), key)],
        stream: Some(Stream { name: job.reduce.value_param.clone(), values, pos: 0 }),
        out,
    };
    it.block(&job.reduce.body)
}

/// Evaluate a closed expression with `v` bound to `record` (used for
/// selection predicates).
pub fn eval_predicate(schema: &Schema, pred: &Expr, record: Arc<Record>) -> Result<bool, JobError> {
    let mut state = TaskState::default();
    let mut out = Vec::new();
    let mut it = Interp {
        schema,
        state: &mut state,
        locals: vec![("v".into(), Value::Record(record))],
        stream: None,
        out: &mut out,
    };
    it.eval(pred, 0)?.as_bool().ok_or_else(|| rt(0, "predicate is not boolean"))
}

impl Interp<'_, '_> {
    fn lookup(&self, name: &str) -> Option<&Value> {
        self.locals
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .or_else(|| self.state.members.get(name))
    }

    fn block(&mut self, body: &[Stmt]) -> Result<(), JobError> {
        let mark = self.locals.len();
        for s in body {
            self.stmt(s)?;
        }
        self.locals.truncate(mark);
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), JobError> {
        match &s.kind {
            StmtKind::Let { name, value } => {
                let v = self.eval(value, s.id)?;
                self.locals.push((name.clone(), v));
            }
            StmtKind::Assign { name, value } => {
                let v = self.eval(value, s.id)?;
                if let Some(slot) = self.locals.iter_mut().rev().find(|(n, _)| n == name) {
                    slot.1 = v;
                } else if let Some(m) = self.state.members.get_mut(name) {
                    *m = v;
                } else {
                    return Err(rt(s.id, format!("assignment to unknown `{name}`")));
                }
            }
            StmtKind::If { cond, then_body, else_body } => {
                if self.cond(cond, s.id)? {
                    self.block(then_body)?;
                } else {
                    self.block(else_body)?;
                }
            }
            StmtKind::While { cond, body } => {
                let mut n = 0u64;
                while self.cond(cond, s.id)? {
                    n += 1;
                    if n > LOOP_LIMIT {
                        return Err(rt(s.id, "loop iteration limit exceeded"));
                    }
                    self.block(body)?;
                }
            }
            StmtKind::Emit { key, value } => {
                let k = self.eval(key, s.id)?;
                let v = self.eval(value, s.id)?;
                self.out.push((k, v));
            }
            StmtKind::Expr(e) => {
                self.eval(e, s.id)?;
            }
            StmtKind::Log(e) => {
                let v = self.eval(e, s.id)?;
                self.state.log.push(v.to_string());
            }
        }
        Ok(())
    }

    fn cond(&mut self, e: &Expr, id: StmtId) -> Result<bool, JobError> {
        self.eval(e, id)?.as_bool().ok_or_else(|| rt(id, "condition is not boolean"))
    }

    fn eval(&mut self, e: &Expr, id: StmtId) -> Result<Value, JobError> {
        Ok(match &e.kind {
            ExprKind::Lit(Literal::Int(v)) => {
                if e.ty == Type::I32 {
                    Value::I32(*v as i32)
                } else {
                    Value::I64(*v)
                }
            }
            ExprKind::Lit(Literal::Str(s)) => Value::Str(s.clone()),
            ExprKind::Lit(Literal::Bool(b)) => Value::Bool(*b),
            ExprKind::Token(t) => Value::Token(t.unwrap_or(ABSENT_TOKEN)),
            ExprKind::Var(name) => {
                self.lookup(name).cloned().ok_or_else(|| rt(id, format!("unbound `{name}`")))?
            }
            ExprKind::Field { base, field } => {
                let Some(Value::Record(r)) = self.lookup(base) else {
                    return Err(rt(id, format!("`{base}` is not a record")));
                };
                let i = self
                    .schema
                    .index_of(field)
                    .ok_or_else(|| rt(id, format!("no field `{field}`")))?;
                r[i].clone()
            }
            ExprKind::Unary { op, expr } => {
                let v = self.eval(expr, id)?;
                match (op, v) {
                    (UnOp::Not, Value::Bool(b)) => Value::Bool(!b),
                    (UnOp::Neg, Value::I32(x)) => Value::I32(x.wrapping_neg()),
                    (UnOp::Neg, Value::I64(x)) => Value::I64(x.wrapping_neg()),
                    (_, v) => return Err(rt(id, format!("bad operand {v} for {op:?}"))),
                }
            }
            ExprKind::Binary { op: BinOp::And, lhs, rhs } => {
                Value::Bool(self.cond(lhs, id)? && self.cond(rhs, id)?)
            }
            ExprKind::Binary { op: BinOp::Or, lhs, rhs } => {
                Value::Bool(self.cond(lhs, id)? || self.cond(rhs, id)?)
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs, id)?;
                let b = self.eval(rhs, id)?;
                binary(*op, &e.ty, a, b).map_err(|m| rt(id, m))?
            }
            ExprKind::Call { name, args } => self.call(name, args, id)?,
        })
    }

    fn call(&mut self, name: &str, args: &[Expr], id: StmtId) -> Result<Value, JobError> {
        if name == "has_next" || name == "next" {
            let stream = self.stream.as_mut().ok_or_else(|| rt(id, "no value stream"))?;
            if !matches!(&args[0].kind, ExprKind::Var(n) if *n == stream.name) {
                return Err(rt(id, "unknown stream"));
            }
            return if name == "has_next" {
                Ok(Value::Bool(stream.pos < stream.values.len()))
            } else {
                let v = stream.values.get(stream.pos).cloned().ok_or_else(|| rt(id, "next() past end of stream"))?;
                stream.pos += 1;
                Ok(v)
            };
        }
        let vals = args.iter().map(|a| self.eval(a, id)).collect::<Result<Vec<_>, _>>()?;
        let s = |i: usize| vals[i].as_str().unwrap_or("");
        let n = |i: usize| vals[i].as_int().unwrap_or(0);
        Ok(match name {
            "len" => Value::I64(match &vals[0] {
                Value::Blob(b) => b.len() as i64,
                Value::Str(x) => x.len() as i64,
                _ => 0,
            }),
            "substr" => {
                let start = n(1).max(0) as usize;
                let count = n(2).max(0) as usize;
                Value::Str(s(0).chars().skip(start).take(count).collect())
            }
            "contains" => Value::Bool(s(0).contains(s(1))),
            "starts_with" => Value::Bool(s(0).starts_with(s(1))),
            "to_lower" => Value::Str(s(0).to_lowercase()),
            "parse_i64" => Value::I64(s(0).parse().unwrap_or(0)),
            "to_str" => Value::Str(n(0).to_string()),
            "table_put" => Value::Bool(self.state.table.insert(s(0).to_string())),
            "table_get" => Value::Bool(self.state.table.contains(s(0))),
            other => return Err(rt(id, format!("unknown builtin `{other}`"))),
        })
    }
}

fn binary(op: BinOp, ty: &Type, a: Value, b: Value) -> Result<Value, String> {
    use std::cmp::Ordering;
    if matches!(op, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem) {
        let (Some(x), Some(y)) = (a.as_int(), b.as_int()) else {
            return Err(format!("arithmetic on {a} and {b}"));
        };
        if matches!(op, BinOp::Div | BinOp::Rem) && y == 0 {
            return Err("division by zero".into());
        }
        return Ok(if *ty == Type::I32 {
            let (x, y) = (x as i32, y as i32);
            Value::I32(match op {
                BinOp::Add => x.wrapping_add(y),
                BinOp::Sub => x.wrapping_sub(y),
                BinOp::Mul => x.wrapping_mul(y),
                BinOp::Div => x.wrapping_div(y),
                _ => x.wrapping_rem(y),
            })
        } else {
            Value::I64(match op {
                BinOp::Add => x.wrapping_add(y),
                BinOp::Sub => x.wrapping_sub(y),
                BinOp::Mul => x.wrapping_mul(y),
                BinOp::Div => x.wrapping_div(y),
                _ => x.wrapping_rem(y),
            })
        });
    }
    if op == BinOp::Concat {
        return match (a, b) {
            (Value::Str(x), Value::Str(y)) => Ok(Value::Str(x + &y)),
            (a, b) => Err(format!("concat of {a} and {b}")),
        };
    }
    // absent tokens equal nothing, themselves included
    if matches!(a, Value::Token(ABSENT_TOKEN)) || matches!(b, Value::Token(ABSENT_TOKEN)) {
        return match op {
            BinOp::Eq => Ok(Value::Bool(false)),
            BinOp::Ne => Ok(Value::Bool(true)),
            _ => Err("ordering comparison on dictionary tokens".into()),
        };
    }
    let ord: Ordering = match (&a, &b) {
        (Value::Str(x), Value::Str(y)) => x.as_bytes().cmp(y.as_bytes()),
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        (Value::Token(x), Value::Token(y)) => x.cmp(y),
        _ => match (a.as_int(), b.as_int()) {
            (Some(x), Some(y)) => x.cmp(&y),
            _ => return Err(format!("cannot compare {a} and {b}")),
        },
    };
    Ok(Value::Bool(match op {
        BinOp::Lt => ord.is_lt(),
        BinOp::Le => ord.is_le(),
        BinOp::Gt => ord.is_gt(),
        BinOp::Ge => ord.is_ge(),
        BinOp::Eq => ord.is_eq(),
        BinOp::Ne => ord.is_ne(),
        _ => unreachable!("logical operators are short-circuited"),
    }))
}
