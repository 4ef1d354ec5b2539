use std::fmt;

use serde::{Deserialize, Serialize};

/// Preorder statement number, unique across a job's map and reduce bodies.
pub type StmtId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarType {
    I32,
    I64,
    Str,
    Blob,
}

impl ScalarType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ScalarType::I32 | ScalarType::I64)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarType::I32 => "i32",
            ScalarType::I64 => "i64",
            ScalarType::Str => "str",
            ScalarType::Blob => "blob",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "i32" => ScalarType::I32,
            "i64" => ScalarType::I64,
            "str" => ScalarType::Str,
            "blob" => ScalarType::Blob,
            _ => return None,
        })
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ScalarType,
}

/// Record layout of an input file. The first field is the record key: the
/// map function's key parameter is bound to its value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub fields: Vec<Field>,
}

impl Schema {
    pub fn new(name: impl Into<String>, fields: &[(&str, ScalarType)]) -> Self {
        Schema {
            name: name.into(),
            fields: fields
                .iter()
                .map(|(n, t)| Field { name: n.to_string(), ty: *t })
                .collect(),
        }
    }

    pub fn key_field(&self) -> &Field {
        &self.fields[0]
    }

    pub fn key_type(&self) -> ScalarType {
        self.fields[0].ty
    }

    pub fn index_of(&self, field: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == field)
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// The value side carries no inner structure: a key plus one opaque blob.
    pub fn is_opaque(&self) -> bool {
        self.fields.len() == 2 && self.fields[1].ty == ScalarType::Blob
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Int(i64),
    Str(String),
    Bool(bool),
}

/// Static type of an expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Unknown,
    I32,
    I64,
    Str,
    Blob,
    Bool,
    Token,
    /// A record of the named schema.
    Record(String),
    Stream(Box<Type>),
}

impl Type {
    pub fn is_int(&self) -> bool {
        matches!(self, Type::I32 | Type::I64)
    }
}

impl From<ScalarType> for Type {
    fn from(t: ScalarType) -> Self {
        match t {
            ScalarType::I32 => Type::I32,
            ScalarType::I64 => Type::I64,
            ScalarType::Str => Type::Str,
            ScalarType::Blob => Type::Blob,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Unknown => f.write_str("?"),
            Type::I32 => f.write_str("i32"),
            Type::I64 => f.write_str("i64"),
            Type::Str => f.write_str("str"),
            Type::Blob => f.write_str("blob"),
            Type::Bool => f.write_str("bool"),
            Type::Token => f.write_str("token"),
            Type::Record(s) => write!(f, "{s}"),
            Type::Stream(t) => write!(f, "stream<{t}>"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Concat,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Concat => "++",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Concat => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 7,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    /// `a op b` ⇔ `b op' a`.
    pub fn mirrored(self) -> BinOp {
        match self {
            BinOp::Lt => BinOp::Gt,
            BinOp::Le => BinOp::Ge,
            BinOp::Gt => BinOp::Lt,
            BinOp::Ge => BinOp::Le,
            other => other,
        }
    }

    /// `!(a op b)` ⇔ `a op' b`, for comparisons over totally ordered domains.
    pub fn negated(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Lt => BinOp::Ge,
            BinOp::Le => BinOp::Gt,
            BinOp::Gt => BinOp::Le,
            BinOp::Ge => BinOp::Lt,
            BinOp::Eq => BinOp::Ne,
            BinOp::Ne => BinOp::Eq,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Expr {
    pub kind: ExprKind,
    /// Filled in by the typechecker.
    pub ty: Type,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExprKind {
    Lit(Literal),
    /// Dictionary token produced by the direct-operation rewrite; `None` is a
    /// constant absent from the dictionary, equal to nothing.
    Token(Option<u32>),
    Var(String),
    Field {
        base: String,
        field: String,
    },
    Unary {
        op: UnOp,
        expr: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { kind, ty: Type::Unknown }
    }

    pub fn typed(kind: ExprKind, ty: Type) -> Self {
        Expr { kind, ty }
    }

    pub fn int(v: i64) -> Self {
        Expr::new(ExprKind::Lit(Literal::Int(v)))
    }

    pub fn string(s: impl Into<String>) -> Self {
        Expr::new(ExprKind::Lit(Literal::Str(s.into())))
    }

    pub fn boolean(b: bool) -> Self {
        Expr::typed(ExprKind::Lit(Literal::Bool(b)), Type::Bool)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::new(ExprKind::Var(name.into()))
    }

    pub fn field(base: impl Into<String>, field: impl Into<String>) -> Self {
        Expr::new(ExprKind::Field { base: base.into(), field: field.into() })
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::new(ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) })
    }

    pub fn unary(op: UnOp, expr: Expr) -> Self {
        Expr::new(ExprKind::Unary { op, expr: Box::new(expr) })
    }

    pub fn call(name: impl Into<String>, args: Vec<Expr>) -> Self {
        Expr::new(ExprKind::Call { name: name.into(), args })
    }

    /// Pre-order walk.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Unary { expr, .. } => expr.visit(f),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.visit(f);
                rhs.visit(f);
            }
            ExprKind::Call { args, .. } => args.iter().for_each(|a| a.visit(f)),
            _ => {}
        }
    }

    /// Names read by this expression (variables and field-access bases).
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |e| match &e.kind {
            ExprKind::Var(v) => out.push(v.as_str()),
            ExprKind::Field { base, .. } => out.push(base.as_str()),
            _ => {}
        });
        out
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Structural equality ignoring type annotations.
    pub fn same_shape(&self, other: &Expr) -> bool {
        match (&self.kind, &other.kind) {
            (ExprKind::Unary { op: a, expr: x }, ExprKind::Unary { op: b, expr: y }) => {
                a == b && x.same_shape(y)
            }
            (
                ExprKind::Binary { op: a, lhs: l1, rhs: r1 },
                ExprKind::Binary { op: b, lhs: l2, rhs: r2 },
            ) => a == b && l1.same_shape(l2) && r1.same_shape(r2),
            (ExprKind::Call { name: a, args: x }, ExprKind::Call { name: b, args: y }) => {
                a == b && x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.same_shape(q))
            }
            (a, b) => a == b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub id: StmtId,
    pub kind: StmtKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Let { name: String, value: Expr },
    Assign { name: String, value: Expr },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Emit { key: Expr, value: Expr },
    Expr(Expr),
    Log(Expr),
}

impl Stmt {
    /// The variable this statement defines, if any.
    pub fn defined_var(&self) -> Option<&str> {
        match &self.kind {
            StmtKind::Let { name, .. } | StmtKind::Assign { name, .. } => Some(name),
            _ => None,
        }
    }

    /// Expressions evaluated by this statement itself (not by nested bodies).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Let { value, .. } | StmtKind::Assign { value, .. } => vec![value],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::Emit { key, value } => vec![key, value],
            StmtKind::Expr(e) | StmtKind::Log(e) => vec![e],
        }
    }

    pub fn is_emit(&self) -> bool {
        matches!(self.kind, StmtKind::Emit { .. })
    }
}

/// Pre-order walk over a statement list, including nested bodies.
pub fn walk_stmts<'a>(body: &'a [Stmt], f: &mut impl FnMut(&'a Stmt)) {
    for s in body {
        f(s);
        match &s.kind {
            StmtKind::If { then_body, else_body, .. } => {
                walk_stmts(then_body, f);
                walk_stmts(else_body, f);
            }
            StmtKind::While { body, .. } => walk_stmts(body, f),
            _ => {}
        }
    }
}

pub fn walk_stmts_mut(body: &mut [Stmt], f: &mut impl FnMut(&mut Stmt)) {
    for s in body {
        f(s);
        match &mut s.kind {
            StmtKind::If { then_body, else_body, .. } => {
                walk_stmts_mut(then_body, f);
                walk_stmts_mut(else_body, f);
            }
            StmtKind::While { body, .. } => walk_stmts_mut(body, f),
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Member {
    pub name: String,
    pub ty: ScalarType,
    pub init: Literal,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Function {
    pub key_param: String,
    pub value_param: String,
    pub body: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JobSpec {
    pub name: String,
    pub schema: Schema,
    pub members: Vec<Member>,
    /// The final output must be ordered by the user's key values.
    pub sorted: bool,
    pub map: Function,
    pub reduce: Function,
}

impl JobSpec {
    pub fn member(&self, name: &str) -> Option<&Member> {
        self.members.iter().find(|m| m.name == name)
    }

    /// Find a statement by id in either body.
    pub fn stmt(&self, id: StmtId) -> Option<&Stmt> {
        find_stmt(&self.map.body, id).or_else(|| find_stmt(&self.reduce.body, id))
    }
}

pub fn find_stmt(body: &[Stmt], id: StmtId) -> Option<&Stmt> {
    for s in body {
        if s.id == id {
            return Some(s);
        }
        let nested = match &s.kind {
            StmtKind::If { then_body, else_body, .. } => {
                find_stmt(then_body, id).or_else(|| find_stmt(else_body, id))
            }
            StmtKind::While { body, .. } => find_stmt(body, id),
            _ => None,
        };
        if nested.is_some() {
            return nested;
        }
    }
    None
}
