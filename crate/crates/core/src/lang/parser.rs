//! Recursive-descent parser for `.mm` job files.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::builtins;
use super::lexer::{tokenize, Tok, Token};
use crate::error::ParseError;

const KEYWORDS: &[&str] = &[
    "schema", "job", "on", "sorted", "members", "map", "reduce", "let", "if", "else", "while",
    "emit", "log", "true", "false",
];

/// Parse a source file holding schema declarations and exactly one job.
pub fn parse_job(src: &str) -> Result<JobSpec, ParseError> {
    let mut p = Parser::new(src)?;
    let mut schemas: HashMap<String, Schema> = HashMap::new();
    let mut job: Option<(JobHeader, Token)> = None;
    loop {
        let t = p.peek().clone();
        match &t.tok {
            Tok::Eof => break,
            Tok::Ident(k) if k == "schema" => {
                let s = p.schema()?;
                if schemas.contains_key(&s.name) {
                    return Err(p.err_at(&t, format!("duplicate schema `{}`", s.name)));
                }
                schemas.insert(s.name.clone(), s);
            }
            Tok::Ident(k) if k == "job" => {
                if job.is_some() {
                    return Err(p.err_at(&t, "more than one job in file".into()));
                }
                job = Some((p.job()?, t));
            }
            _ => return Err(p.err_at(&t, format!("expected `schema` or `job`, found {}", t.tok.describe()))),
        }
    }
    let Some((header, at)) = job else {
        return Err(p.err_at(p.peek(), "no job declared".into()));
    };
    let schema = schemas
        .remove(&header.schema)
        .ok_or_else(|| p.err_at(&at, format!("unknown schema `{}`", header.schema)))?;
    Ok(JobSpec {
        name: header.name,
        schema,
        members: header.members,
        sorted: header.sorted,
        map: header.map,
        reduce: header.reduce,
    })
}

/// Parse a file holding only schema declarations.
pub fn parse_schemas(src: &str) -> Result<Vec<Schema>, ParseError> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    while p.peek().tok != Tok::Eof {
        out.push(p.schema()?);
    }
    Ok(out)
}

/// Parse a standalone expression (descriptor predicates).
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect(&Tok::Eof)?;
    Ok(e)
}

struct JobHeader {
    name: String,
    schema: String,
    sorted: bool,
    members: Vec<Member>,
    map: Function,
    reduce: Function,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    next_id: StmtId,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: tokenize(src)?, pos: 0, next_id: 0 })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn advance(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err_at(&self, t: &Token, message: String) -> ParseError {
        ParseError { line: t.line, col: t.col, message }
    }

    fn expect(&mut self, tok: &Tok) -> Result<Token, ParseError> {
        let t = self.peek().clone();
        if &t.tok == tok {
            Ok(self.advance())
        } else {
            Err(self.err_at(&t, format!("expected {}, found {}", tok.describe(), t.tok.describe())))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.advance();
            Ok(())
        } else {
            let t = self.peek().clone();
            Err(self.err_at(&t, format!("expected `{kw}`, found {}", t.tok.describe())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.advance();
                Ok(s.clone())
            }
            _ => Err(self.err_at(&t, format!("expected identifier, found {}", t.tok.describe()))),
        }
    }

    fn scalar_type(&mut self) -> Result<ScalarType, ParseError> {
        let t = self.peek().clone();
        let name = self.ident()?;
        ScalarType::from_name(&name)
            .ok_or_else(|| self.err_at(&t, format!("unknown type `{name}`")))
    }

    fn schema(&mut self) -> Result<Schema, ParseError> {
        self.keyword("schema")?;
        let name = self.ident()?;
        self.expect(&Tok::LBrace)?;
        let mut fields = Vec::new();
        let mut seen = HashSet::new();
        while !self.eat(&Tok::RBrace) {
            let at = self.peek().clone();
            let fname = self.ident()?;
            self.expect(&Tok::Colon)?;
            let ty = self.scalar_type()?;
            self.expect(&Tok::Semi)?;
            if !seen.insert(fname.clone()) {
                return Err(self.err_at(&at, format!("duplicate field `{fname}` in schema `{name}`")));
            }
            fields.push(Field { name: fname, ty });
        }
        if fields.is_empty() {
            let t = self.toks[self.pos - 1].clone();
            return Err(self.err_at(&t, format!("schema `{name}` has no fields")));
        }
        Ok(Schema { name, fields })
    }

    fn job(&mut self) -> Result<JobHeader, ParseError> {
        self.keyword("job")?;
        let name = self.ident()?;
        self.keyword("on")?;
        let schema = self.ident()?;
        let sorted = if self.is_kw("sorted") {
            self.advance();
            true
        } else {
            false
        };
        self.expect(&Tok::LBrace)?;
        let mut members = Vec::new();
        if self.is_kw("members") {
            self.advance();
            self.expect(&Tok::LBrace)?;
            while !self.eat(&Tok::RBrace) {
                let at = self.peek().clone();
                let mname = self.ident()?;
                self.expect(&Tok::Colon)?;
                let ty = self.scalar_type()?;
                self.expect(&Tok::Assign)?;
                let init = self.literal()?;
                self.expect(&Tok::Semi)?;
                if members.iter().any(|m: &Member| m.name == mname) {
                    return Err(self.err_at(&at, format!("duplicate member `{mname}`")));
                }
                members.push(Member { name: mname, ty, init });
            }
        }
        self.keyword("map")?;
        let map = self.function()?;
        self.keyword("reduce")?;
        let reduce = self.function()?;
        self.expect(&Tok::RBrace)?;
        Ok(JobHeader { name, schema, sorted, members, map, reduce })
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let t = self.advance();
        match t.tok.clone() {
            Tok::Int(v) => Ok(Literal::Int(v)),
            Tok::Minus => match self.advance().tok {
                Tok::Int(v) => Ok(Literal::Int(-v)),
                _ => Err(self.err_at(&t, "expected integer after `-`".into())),
            },
            Tok::Str(s) => Ok(Literal::Str(s)),
            Tok::Ident(s) if s == "true" => Ok(Literal::Bool(true)),
            Tok::Ident(s) if s == "false" => Ok(Literal::Bool(false)),
            other => Err(self.err_at(&t, format!("expected literal, found {}", other.describe()))),
        }
    }

    fn function(&mut self) -> Result<Function, ParseError> {
        self.expect(&Tok::LParen)?;
        let key_param = self.ident()?;
        self.expect(&Tok::Comma)?;
        let value_param = self.ident()?;
        self.expect(&Tok::RParen)?;
        let body = self.block()?;
        Ok(Function { key_param, value_param, body })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(&Tok::LBrace)?;
        let mut out = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if self.peek().tok == Tok::Eof {
                let t = self.peek().clone();
                return Err(self.err_at(&t, "unclosed block".into()));
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn fresh_id(&mut self) -> StmtId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let id = self.fresh_id();
        let kind = if self.is_kw("let") {
            self.advance();
            let name = self.ident()?;
            self.expect(&Tok::Assign)?;
            let value = self.expr()?;
            self.expect(&Tok::Semi)?;
            StmtKind::Let { name, value }
        } else if self.is_kw("if") {
            self.advance();
            return self.if_rest(id);
        } else if self.is_kw("while") {
            self.advance();
            self.expect(&Tok::LParen)?;
            let cond = self.expr()?;
            self.expect(&Tok::RParen)?;
            let body = self.block()?;
            StmtKind::While { cond, body }
        } else if self.is_kw("emit") {
            self.advance();
            self.expect(&Tok::LParen)?;
            let key = self.expr()?;
            self.expect(&Tok::Comma)?;
            let value = self.expr()?;
            self.expect(&Tok::RParen)?;
            self.expect(&Tok::Semi)?;
            StmtKind::Emit { key, value }
        } else if self.is_kw("log") {
            self.advance();
            self.expect(&Tok::LParen)?;
            let e = self.expr()?;
            self.expect(&Tok::RParen)?;
            self.expect(&Tok::Semi)?;
            StmtKind::Log(e)
        } else if matches!(self.peek().tok, Tok::Ident(_)) && self.peek_at(1) == &Tok::Assign {
            let name = self.ident()?;
            self.expect(&Tok::Assign)?;
            let value = self.expr()?;
            self.expect(&Tok::Semi)?;
            StmtKind::Assign { name, value }
        } else {
            let e = self.expr()?;
            self.expect(&Tok::Semi)?;
            StmtKind::Expr(e)
        };
        Ok(Stmt { id, kind })
    }

    fn if_rest(&mut self, id: StmtId) -> Result<Stmt, ParseError> {
        self.expect(&Tok::LParen)?;
        let cond = self.expr()?;
        self.expect(&Tok::RParen)?;
        let then_body = self.block()?;
        let else_body = if self.is_kw("else") {
            self.advance();
            if self.is_kw("if") {
                self.advance();
                let nested = self.fresh_id();
                vec![self.if_rest(nested)?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt { id, kind: StmtKind::If { cond, then_body, else_body } })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek().tok {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::PlusPlus => BinOp::Concat,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().tok {
            Tok::Bang => {
                self.advance();
                Ok(Expr::unary(UnOp::Not, self.unary()?))
            }
            Tok::Minus => {
                self.advance();
                Ok(Expr::unary(UnOp::Neg, self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.advance();
        match t.tok.clone() {
            Tok::Int(v) => Ok(Expr::int(v)),
            Tok::Str(s) => Ok(Expr::string(s)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) if name == "true" || name == "false" => Ok(Expr::boolean(name == "true")),
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                if self.eat(&Tok::Dot) {
                    let field = self.ident()?;
                    Ok(Expr::field(name.clone(), field))
                } else if self.peek().tok == Tok::LParen {
                    if builtins::lookup(&name).is_none() {
                        return Err(self.err_at(&t, format!("unknown builtin `{name}`")));
                    }
                    self.advance();
                    let mut args = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(&Tok::RParen) {
                                break;
                            }
                            self.expect(&Tok::Comma)?;
                        }
                    }
                    Ok(Expr::call(name.clone(), args))
                } else {
                    Ok(Expr::var(name.clone()))
                }
            }
            other => Err(self.err_at(&t, format!("expected expression, found {}", other.describe()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const RANK_FILTER: &str = r#"
        schema WebPage { url: str; rank: i32; content: str; }
        job RankFilter on WebPage {
            map(k, v) {
                if (v.rank > 1) { emit(k, 1); }
            }
            reduce(k, vals) {
                let n = 0;
                while (has_next(vals)) { n = n + next(vals); }
                emit(k, n);
            }
        }
    "#;

    #[test]
    fn rank_filter_shape() {
        let job = parse_job(RANK_FILTER).unwrap();
        assert_eq!(job.map.body.len(), 1);
        let StmtKind::If { then_body, else_body, .. } = &job.map.body[0].kind else {
            panic!("expected if");
        };
        assert!(matches!(then_body[0].kind, StmtKind::Emit { .. }));
        assert!(else_body.is_empty());
        assert_eq!(job.schema.key_field().name, "url");
        // ids are preorder over map then reduce
        assert_eq!(job.map.body[0].id, 0);
        assert_eq!(then_body[0].id, 1);
        assert_eq!(job.reduce.body[0].id, 2);
    }

    #[test]
    fn empty_map_body() {
        let job = parse_job(
            "schema S { a: i32; } job J on S { map(k, v) { } reduce(k, vals) { } }",
        )
        .unwrap();
        assert!(job.map.body.is_empty());
    }

    #[test]
    fn dangling_operator_is_reported_where_it_dangles() {
        let src = "schema S { a: i32; }\njob J on S {\n map(k, v) {\n  emit(k, v.rank + );\n }\n reduce(k, vals) { }\n}";
        let e = parse_job(src).unwrap_err();
        assert_eq!((e.line, e.col), (4, 20));
        assert!(e.message.contains("expected expression"), "{e}");
    }

    #[test]
    fn unknown_builtin_and_duplicate_field() {
        let e = parse_job("schema S { a: i32; } job J on S { map(k, v) { emit(k, frob(1)); } reduce(k, vals) { } }")
            .unwrap_err();
        assert!(e.message.contains("unknown builtin `frob`"));
        let e = parse_job("schema S { a: i32; a: str; } job J on S { map(k, v) { } reduce(k, vals) { } }")
            .unwrap_err();
        assert!(e.message.contains("duplicate field"));
    }

    #[test]
    fn precedence() {
        let e = parse_expr("a + b * c > 3 && !x || y").unwrap();
        let ExprKind::Binary { op: BinOp::Or, lhs, .. } = e.kind else { panic!() };
        let ExprKind::Binary { op: BinOp::And, lhs: cmp, .. } = lhs.kind else { panic!() };
        let ExprKind::Binary { op: BinOp::Gt, lhs: sum, .. } = cmp.kind else { panic!() };
        assert!(matches!(sum.kind, ExprKind::Binary { op: BinOp::Add, .. }));
    }

    #[test]
    fn else_if_chain() {
        let job = parse_job(
            "schema S { a: i32; } job J on S { map(k, v) { if (v.a > 1) { emit(k, 1); } else if (v.a < 0) { emit(k, 2); } } reduce(k, vals) { } }",
        )
        .unwrap();
        let StmtKind::If { else_body, .. } = &job.map.body[0].kind else { panic!() };
        assert_eq!(else_body.len(), 1);
        assert_eq!(else_body[0].id, 2);
    }
}
