//! Control-flow graphs over statement lists.
//!
//! Blocks hold maximal runs of simple statements. An `if` or `while`
//! statement is the terminator of the block that evaluates its condition;
//! a `while` always gets a fresh header block so the back edge has a target.

use std::collections::HashMap;
use std::fmt::Write;

use crate::lang::{print_expr, walk_stmts, Stmt, StmtId, StmtKind};

pub type BlockId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Uncond,
    True,
    False,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Block {
    pub stmts: Vec<StmtId>,
    /// The `if`/`while` whose condition ends this block.
    pub term: Option<StmtId>,
}

#[derive(Clone, Debug)]
pub struct Cfg<'a> {
    pub blocks: Vec<Block>,
    pub succs: Vec<Vec<(BlockId, EdgeKind)>>,
    pub preds: Vec<Vec<(BlockId, EdgeKind)>>,
    stmts: HashMap<StmtId, &'a Stmt>,
    location: HashMap<StmtId, BlockId>,
}

pub const ENTRY: BlockId = 0;
pub const EXIT: BlockId = 1;

struct Builder<'a> {
    cfg: Cfg<'a>,
    frontier: Vec<(BlockId, EdgeKind)>,
    /// A block that may still absorb straight-line statements.
    open: Option<BlockId>,
}

impl<'a> Builder<'a> {
    fn new_block(&mut self) -> BlockId {
        self.cfg.blocks.push(Block::default());
        self.cfg.succs.push(Vec::new());
        self.cfg.preds.push(Vec::new());
        self.cfg.blocks.len() - 1
    }

    fn edge(&mut self, from: BlockId, to: BlockId, kind: EdgeKind) {
        self.cfg.succs[from].push((to, kind));
        self.cfg.preds[to].push((from, kind));
    }

    fn connect_frontier(&mut self, to: BlockId) {
        for (from, kind) in std::mem::take(&mut self.frontier) {
            self.edge(from, to, kind);
        }
    }

    fn fresh_block(&mut self) -> BlockId {
        let b = self.new_block();
        self.connect_frontier(b);
        self.frontier = vec![(b, EdgeKind::Uncond)];
        b
    }

    fn body(&mut self, body: &'a [Stmt]) {
        for s in body {
            match &s.kind {
                StmtKind::If { then_body, else_body, .. } => {
                    let b = match self.open {
                        Some(b) => b,
                        None => self.fresh_block(),
                    };
                    self.cfg.blocks[b].term = Some(s.id);
                    self.cfg.location.insert(s.id, b);
                    self.open = None;
                    self.frontier = vec![(b, EdgeKind::True)];
                    self.body(then_body);
                    let mut after = std::mem::replace(&mut self.frontier, vec![(b, EdgeKind::False)]);
                    self.open = None;
                    self.body(else_body);
                    after.append(&mut self.frontier);
                    self.frontier = after;
                    self.open = None;
                }
                StmtKind::While { body, .. } => {
                    let h = self.fresh_block();
                    self.cfg.blocks[h].term = Some(s.id);
                    self.cfg.location.insert(s.id, h);
                    self.frontier = vec![(h, EdgeKind::True)];
                    self.open = None;
                    self.body(body);
                    if self.frontier.len() > 1 {
                        // join first so each loop has a single back edge
                        self.fresh_block();
                    }
                    self.connect_frontier(h);
                    self.frontier = vec![(h, EdgeKind::False)];
                    self.open = None;
                }
                _ => {
                    let b = match self.open {
                        Some(b) => b,
                        None => {
                            let b = self.fresh_block();
                            self.open = Some(b);
                            b
                        }
                    };
                    self.cfg.blocks[b].stmts.push(s.id);
                    self.cfg.location.insert(s.id, b);
                }
            }
        }
    }
}

impl<'a> Cfg<'a> {
    pub fn build(body: &'a [Stmt]) -> Self {
        let mut stmts = HashMap::new();
        walk_stmts(body, &mut |s| {
            stmts.insert(s.id, s);
        });
        let cfg = Cfg { blocks: Vec::new(), succs: Vec::new(), preds: Vec::new(), stmts, location: HashMap::new() };
        let mut b = Builder { cfg, frontier: Vec::new(), open: None };
        b.new_block();
        b.new_block();
        b.frontier = vec![(ENTRY, EdgeKind::Uncond)];
        b.body(body);
        b.connect_frontier(EXIT);
        b.cfg
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stmt(&self, id: StmtId) -> &'a Stmt {
        self.stmts[&id]
    }

    pub fn stmt_ids(&self) -> impl Iterator<Item = StmtId> + '_ {
        self.stmts.keys().copied()
    }

    /// Block containing `id` (for if/while: the block its condition ends).
    pub fn block_of(&self, id: StmtId) -> BlockId {
        self.location[&id]
    }

    /// Statement ids in block order: body statements, then the terminator.
    pub fn block_points(&self, b: BlockId) -> impl Iterator<Item = StmtId> + '_ {
        self.blocks[b].stmts.iter().copied().chain(self.blocks[b].term)
    }

    /// Edges `u -> v` where `v` is on the DFS stack when reached from `u`.
    pub fn back_edges(&self) -> Vec<(BlockId, BlockId)> {
        let mut state = vec![0u8; self.len()];
        let mut out = Vec::new();
        let mut stack = vec![(ENTRY, 0usize)];
        state[ENTRY] = 1;
        while let Some((u, i)) = stack.pop() {
            if let Some(&(v, _)) = self.succs[u].get(i) {
                stack.push((u, i + 1));
                match state[v] {
                    0 => {
                        state[v] = 1;
                        stack.push((v, 0));
                    }
                    1 => out.push((u, v)),
                    _ => {}
                }
            } else {
                state[u] = 2;
            }
        }
        out
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph cfg {\n  node [shape=box];\n");
        for (i, b) in self.blocks.iter().enumerate() {
            let label = match i {
                ENTRY => "entry".to_string(),
                EXIT => "exit".to_string(),
                _ => {
                    let mut l = String::new();
                    for id in &b.stmts {
                        let _ = write!(l, "s{id}: {}\\l", stmt_summary(self.stmt(*id)));
                    }
                    if let Some(t) = b.term {
                        let _ = write!(l, "s{t}: {}\\l", stmt_summary(self.stmt(t)));
                    }
                    l
                }
            };
            let _ = writeln!(out, "  b{i} [label=\"{}\"];", label.replace('"', "\\\""));
        }
        for (u, succ) in self.succs.iter().enumerate() {
            for (v, k) in succ {
                let attr = match k {
                    EdgeKind::Uncond => String::new(),
                    EdgeKind::True => " [label=\"T\"]".into(),
                    EdgeKind::False => " [label=\"F\"]".into(),
                };
                let _ = writeln!(out, "  b{u} -> b{v}{attr};");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// One-line rendering of a statement without its nested bodies.
pub fn stmt_summary(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Let { name, value } => format!("let {name} = {}", print_expr(value)),
        StmtKind::Assign { name, value } => format!("{name} = {}", print_expr(value)),
        StmtKind::If { cond, .. } => format!("if ({})", print_expr(cond)),
        StmtKind::While { cond, .. } => format!("while ({})", print_expr(cond)),
        StmtKind::Emit { key, value } => format!("emit({}, {})", print_expr(key), print_expr(value)),
        StmtKind::Expr(e) => print_expr(e),
        StmtKind::Log(e) => format!("log({})", print_expr(e)),
    }
}
