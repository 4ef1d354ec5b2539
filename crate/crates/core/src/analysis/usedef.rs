//! Use-def DAGs: the transitive closure of definitions feeding a statement,
//! bottoming out at parameters, members, constants and builtin results.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use super::cfg::{stmt_summary, Cfg};
use super::reaching::{DefSite, ReachingDefs};
use crate::lang::{builtins, print_expr, Expr, ExprKind, StmtId, StmtKind};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum UdNode {
    /// The statement whose dependencies the DAG describes.
    Root(StmtId),
    /// A definition; `field` is set when only that field of a record-valued
    /// definition is read.
    Def { stmt: StmtId, var: String, field: Option<String> },
    Param { name: String, field: Option<String> },
    Member(String),
    Const(String),
    /// One builtin call site; `ordinal` distinguishes calls within a statement.
    Builtin { name: String, pure: bool, stmt: StmtId, ordinal: u32 },
}

#[derive(Clone, Debug)]
pub struct UseDefDag {
    pub nodes: Vec<UdNode>,
    pub edges: Vec<Vec<usize>>,
    pub root: usize,
}

impl UseDefDag {
    pub fn leaves(&self) -> impl Iterator<Item = &UdNode> {
        self.nodes.iter().enumerate().filter(|(i, _)| self.edges[*i].is_empty()).map(|(_, n)| n)
    }

    /// True iff every leaf is a parameter or constant and every builtin in
    /// the DAG is pure.
    pub fn is_func(&self) -> bool {
        let leaves_ok = self.leaves().all(|n| match n {
            UdNode::Param { .. } | UdNode::Const(_) => true,
            UdNode::Builtin { pure, .. } => *pure,
            _ => false,
        });
        leaves_ok
            && self.nodes.iter().all(|n| !matches!(n, UdNode::Builtin { pure: false, .. } | UdNode::Member(_)))
    }

    pub fn members(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().filter_map(|n| match n {
            UdNode::Member(m) => Some(m.as_str()),
            _ => None,
        })
    }

    pub fn params(&self) -> impl Iterator<Item = (&str, Option<&str>)> {
        self.nodes.iter().filter_map(|n| match n {
            UdNode::Param { name, field } => Some((name.as_str(), field.as_deref())),
            _ => None,
        })
    }

    pub fn builtins(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().filter_map(|n| match n {
            UdNode::Builtin { name, .. } => Some(name.as_str()),
            _ => None,
        })
    }

    /// Statements whose definitions appear in the DAG.
    pub fn def_stmts(&self) -> impl Iterator<Item = StmtId> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            UdNode::Def { stmt, .. } => Some(*stmt),
            _ => None,
        })
    }

    /// Indented rendering; shared nodes are expanded once and then marked.
    pub fn to_text(&self, cfg: &Cfg<'_>) -> String {
        let mut out = String::new();
        let mut seen = HashSet::new();
        self.write_node(cfg, self.root, 0, &mut seen, &mut out);
        out
    }

    fn write_node(&self, cfg: &Cfg<'_>, i: usize, depth: usize, seen: &mut HashSet<usize>, out: &mut String) {
        let label = match &self.nodes[i] {
            UdNode::Root(s) => format!("s{s}: {}", stmt_summary(cfg.stmt(*s))),
            UdNode::Def { stmt, field, .. } => {
                let f = field.as_ref().map(|f| format!(" [.{f}]")).unwrap_or_default();
                format!("def s{stmt}: {}{f}", stmt_summary(cfg.stmt(*stmt)))
            }
            UdNode::Param { name, field: Some(f) } => format!("param {name}.{f}"),
            UdNode::Param { name, field: None } => format!("param {name}"),
            UdNode::Member(m) => format!("member {m}"),
            UdNode::Const(c) => format!("const {c}"),
            UdNode::Builtin { name, pure, .. } => {
                format!("builtin {name}{}", if *pure { "" } else { " (impure)" })
            }
        };
        let _ = writeln!(out, "{}{label}{}", "  ".repeat(depth), if seen.contains(&i) { " ..." } else { "" });
        if !seen.insert(i) {
            return;
        }
        for &c in &self.edges[i] {
            self.write_node(cfg, c, depth + 1, seen, out);
        }
    }
}

pub(crate) struct Builder<'c, 'a> {
    pub cfg: &'c Cfg<'a>,
    pub rd: &'c ReachingDefs,
    pub key_param: &'c str,
    pub value_param: &'c str,
    nodes: Vec<UdNode>,
    edges: Vec<Vec<usize>>,
    index: HashMap<UdNode, usize>,
    on_stack: Vec<bool>,
    ordinals: HashMap<StmtId, u32>,
}

impl<'c, 'a> Builder<'c, 'a> {
    pub fn new(cfg: &'c Cfg<'a>, rd: &'c ReachingDefs, key_param: &'c str, value_param: &'c str) -> Self {
        Builder {
            cfg,
            rd,
            key_param,
            value_param,
            nodes: Vec::new(),
            edges: Vec::new(),
            index: HashMap::new(),
            on_stack: Vec::new(),
            ordinals: HashMap::new(),
        }
    }

    /// Returns the node index and whether it was newly created.
    fn node(&mut self, n: UdNode) -> (usize, bool) {
        if let Some(&i) = self.index.get(&n) {
            return (i, false);
        }
        let i = self.nodes.len();
        self.nodes.push(n.clone());
        self.edges.push(Vec::new());
        self.on_stack.push(false);
        self.index.insert(n, i);
        (i, true)
    }

    fn link(&mut self, parent: usize, child: usize) {
        // an edge into a node still being expanded would close a loop-carried cycle
        if !self.on_stack[child] && !self.edges[parent].contains(&child) {
            self.edges[parent].push(child);
        }
    }

    pub fn build(mut self, stmt: StmtId) -> UseDefDag {
        let (root, _) = self.node(UdNode::Root(stmt));
        self.on_stack[root] = true;
        let s = self.cfg.stmt(stmt);
        let exprs: Vec<&Expr> = match &s.kind {
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            _ => s.own_exprs(),
        };
        for e in exprs {
            self.expr(e, stmt, root, None);
        }
        UseDefDag { nodes: self.nodes, edges: self.edges, root }
    }

    fn expr(&mut self, e: &Expr, at: StmtId, parent: usize, field: Option<&str>) {
        match &e.kind {
            ExprKind::Lit(_) | ExprKind::Token(_) => {
                let (c, _) = self.node(UdNode::Const(print_expr(e)));
                self.link(parent, c);
            }
            ExprKind::Var(name) => self.var(name, at, parent, field),
            ExprKind::Field { base, field } => self.var(base, at, parent, Some(field)),
            ExprKind::Unary { expr, .. } => self.expr(expr, at, parent, None),
            ExprKind::Binary { lhs, rhs, .. } => {
                self.expr(lhs, at, parent, None);
                self.expr(rhs, at, parent, None);
            }
            ExprKind::Call { name, args } => {
                let ord = self.ordinals.entry(at).or_insert(0);
                let ordinal = *ord;
                *ord += 1;
                let pure = builtins::is_pure(name);
                let (b, _) = self.node(UdNode::Builtin { name: name.clone(), pure, stmt: at, ordinal });
                self.link(parent, b);
                self.on_stack[b] = true;
                for a in args {
                    self.expr(a, at, b, None);
                }
                self.on_stack[b] = false;
            }
        }
    }

    fn var(&mut self, name: &str, at: StmtId, parent: usize, field: Option<&str>) {
        let defs: Vec<DefSite> = self.rd.reaching(at, name).into_iter().map(|d| d.site.clone()).collect();
        for site in defs {
            match site {
                DefSite::Entry(n) => {
                    let leaf = if n == self.value_param {
                        UdNode::Param { name: n, field: field.map(str::to_owned) }
                    } else if n == self.key_param {
                        UdNode::Param { name: n, field: None }
                    } else {
                        UdNode::Member(n)
                    };
                    let (l, _) = self.node(leaf);
                    self.link(parent, l);
                }
                DefSite::Stmt(d) => {
                    let node = UdNode::Def { stmt: d, var: name.to_string(), field: field.map(str::to_owned) };
                    let (i, fresh) = self.node(node);
                    self.link(parent, i);
                    if fresh {
                        self.on_stack[i] = true;
                        if let StmtKind::Let { value, .. } | StmtKind::Assign { value, .. } = &self.cfg.stmt(d).kind {
                            self.expr(value, d, i, field);
                        }
                        self.on_stack[i] = false;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::MapAnalysis;
    use super::*;
    use crate::lang::load_job;

    fn job(body: &str) -> crate::lang::TypedJob {
        load_job(&format!(
            "schema WebPage {{ url: str; rank: i32; content: str; }}
             job J on WebPage {{ members {{ numMapsRun: i64 = 0; }} map(k, v) {{ {body} }} reduce(k, vals) {{ }} }}"
        ))
        .unwrap()
    }

    fn leaves(dag: &UseDefDag) -> Vec<String> {
        let mut out: Vec<String> = dag
            .leaves()
            .map(|n| match n {
                UdNode::Param { name, field: Some(f) } => format!("{name}.{f}"),
                UdNode::Param { name, field: None } => name.clone(),
                UdNode::Member(m) => format!("member {m}"),
                UdNode::Const(c) => c.clone(),
                other => format!("{other:?}"),
            })
            .collect();
        out.sort();
        out
    }

    #[test]
    fn rank_filter_emit() {
        let j = job("if (v.rank > 1) { emit(k, 1); }");
        let a = MapAnalysis::new(&j);
        let dag = a.use_def(1);
        assert_eq!(leaves(&dag), ["1", "k"]);
        assert!(dag.is_func());
        assert!(a.use_def(0).is_func());
    }

    #[test]
    fn member_counter_is_not_functional() {
        let j = job("numMapsRun = numMapsRun + 1; if (numMapsRun > 200) { emit(k, 1); }");
        let a = MapAnalysis::new(&j);
        let dag = a.use_def(1);
        assert!(leaves(&dag).contains(&"member numMapsRun".to_string()));
        assert!(!dag.is_func());
    }

    #[test]
    fn chain_through_locals_and_aliases() {
        let j = job("let a = v.rank; let b = a + 1; emit(k, b);");
        let a = MapAnalysis::new(&j);
        let dag = a.use_def(2);
        assert_eq!(leaves(&dag), ["1", "k", "v.rank"]);
        assert_eq!(dag.def_stmts().count(), 2);
        let text = dag.to_text(&a.cfg);
        assert!(text.contains("def s1: let b = a + 1"), "{text}");
        assert!(text.contains("      param v.rank"), "{text}");

        let j = job("let w = v; if (w.rank > 3) { emit(w.url, 1); }");
        let a = MapAnalysis::new(&j);
        assert_eq!(leaves(&a.use_def(1)), ["3", "v.rank"]);
    }

    #[test]
    fn impure_builtin_and_loops() {
        let j = job("if (table_get(v.url)) { emit(k, 1); }");
        let a = MapAnalysis::new(&j);
        assert!(!a.use_def(0).is_func());
        let j = job("let i = 0; while (i < v.rank) { i = i + 1; } emit(k, i);");
        let a = MapAnalysis::new(&j);
        let dag = a.use_def(3);
        assert!(dag.is_func());
        // the loop bound is a control dependence, not a data dependence
        assert_eq!(leaves(&dag), ["0", "1", "k"]);
    }
}
