//! Canonical pretty-printer; its output reparses to an identical AST.

use std::fmt::Write;

use super::ast::*;

pub fn print_job(job: &JobSpec) -> String {
    let mut out = String::new();
    out.push_str(&print_schema(&job.schema));
    out.push('\n');
    let _ = write!(out, "job {} on {}", job.name, job.schema.name);
    if job.sorted {
        out.push_str(" sorted");
    }
    out.push_str(" {\n");
    if !job.members.is_empty() {
        out.push_str("    members {\n");
        for m in &job.members {
            let _ = writeln!(out, "        {}: {} = {};", m.name, m.ty, print_literal(&m.init));
        }
        out.push_str("    }\n");
    }
    print_function(&mut out, "map", &job.map);
    print_function(&mut out, "reduce", &job.reduce);
    out.push_str("}\n");
    out
}

pub fn print_schema(schema: &Schema) -> String {
    let mut out = format!("schema {} {{\n", schema.name);
    for f in &schema.fields {
        let _ = writeln!(out, "    {}: {};", f.name, f.ty);
    }
    out.push_str("}\n");
    out
}

fn print_function(out: &mut String, name: &str, f: &Function) {
    let _ = writeln!(out, "    {name}({}, {}) {{", f.key_param, f.value_param);
    print_block(out, &f.body, 2);
    out.push_str("    }\n");
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

pub fn print_block(out: &mut String, body: &[Stmt], depth: usize) {
    for s in body {
        indent(out, depth);
        print_stmt(out, s, depth);
        out.push('\n');
    }
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    match &s.kind {
        StmtKind::Let { name, value } => {
            let _ = write!(out, "let {name} = {};", print_expr(value));
        }
        StmtKind::Assign { name, value } => {
            let _ = write!(out, "{name} = {};", print_expr(value));
        }
        StmtKind::If { cond, then_body, else_body } => {
            let _ = writeln!(out, "if ({}) {{", print_expr(cond));
            print_block(out, then_body, depth + 1);
            indent(out, depth);
            out.push('}');
            match else_body.as_slice() {
                [] => {}
                [nested @ Stmt { kind: StmtKind::If { .. }, .. }] => {
                    out.push_str(" else ");
                    print_stmt(out, nested, depth);
                }
                _ => {
                    out.push_str(" else {\n");
                    print_block(out, else_body, depth + 1);
                    indent(out, depth);
                    out.push('}');
                }
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({}) {{", print_expr(cond));
            print_block(out, body, depth + 1);
            indent(out, depth);
            out.push('}');
        }
        StmtKind::Emit { key, value } => {
            let _ = write!(out, "emit({}, {});", print_expr(key), print_expr(value));
        }
        StmtKind::Expr(e) => {
            let _ = write!(out, "{};", print_expr(e));
        }
        StmtKind::Log(e) => {
            let _ = write!(out, "log({});", print_expr(e));
        }
    }
}

pub fn print_literal(l: &Literal) -> String {
    match l {
        Literal::Int(v) => v.to_string(),
        Literal::Bool(b) => b.to_string(),
        Literal::Str(s) => quote(s),
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\0' => out.push_str("\\0"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

const UNARY_PREC: u8 = 8;

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    match &e.kind {
        ExprKind::Lit(Literal::Int(v)) if *v < 0 => {
            // A negative literal only arises from folding; print it as a unary.
            let wrap = min_prec > UNARY_PREC;
            if wrap {
                out.push('(');
            }
            let _ = write!(out, "-{}", v.unsigned_abs());
            if wrap {
                out.push(')');
            }
        }
        ExprKind::Lit(l) => out.push_str(&print_literal(l)),
        ExprKind::Token(Some(t)) => {
            let _ = write!(out, "#{t}");
        }
        ExprKind::Token(None) => out.push_str("#absent"),
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Field { base, field } => {
            let _ = write!(out, "{base}.{field}");
        }
        ExprKind::Unary { op, expr } => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            write_expr(out, expr, UNARY_PREC + 1);
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let prec = op.precedence();
            let wrap = prec < min_prec;
            if wrap {
                out.push('(');
            }
            write_expr(out, lhs, prec);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, rhs, prec + 1);
            if wrap {
                out.push(')');
            }
        }
        ExprKind::Call { name, args } => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, 0);
            }
            out.push(')');
        }
    }
}
