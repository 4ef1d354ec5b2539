//! Reaching definitions: the classic forward may-analysis over the CFG,
//! resolved down to individual statements.

use std::collections::HashMap;

use super::cfg::{BlockId, Cfg, ENTRY};
use crate::lang::StmtId;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DefSite {
    /// The value a name holds on entry: a parameter or member variable.
    Entry(String),
    Stmt(StmtId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Def {
    pub site: DefSite,
    pub var: String,
}

/// A fixed-size bit set over definition indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DefSet(Vec<u64>);

impl DefSet {
    fn new(n: usize) -> Self {
        DefSet(vec![0; n.div_ceil(64)])
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn remove(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }

    fn union_with(&mut self, o: &DefSet) -> bool {
        let mut changed = false;
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            let n = *a | b;
            changed |= n != *a;
            *a = n;
        }
        changed
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits & (1 << b) != 0).map(move |b| w * 64 + b)
        })
    }
}

pub struct ReachingDefs {
    pub defs: Vec<Def>,
    by_var: HashMap<String, Vec<usize>>,
    by_stmt: HashMap<StmtId, usize>,
    /// Definitions reaching the point just before each statement
    /// (for if/while: just before the condition is evaluated).
    before: HashMap<StmtId, DefSet>,
    /// Definitions reaching the end of each block.
    pub block_out: Vec<DefSet>,
}

impl ReachingDefs {
    /// `entry_names` are the parameters and members defined on entry.
    pub fn compute(cfg: &Cfg<'_>, entry_names: &[String]) -> Self {
        let mut defs: Vec<Def> = entry_names
            .iter()
            .map(|n| Def { site: DefSite::Entry(n.clone()), var: n.clone() })
            .collect();
        let mut ids: Vec<StmtId> = cfg.stmt_ids().collect();
        ids.sort_unstable();
        let mut by_stmt = HashMap::new();
        for id in ids {
            if let Some(v) = cfg.stmt(id).defined_var() {
                by_stmt.insert(id, defs.len());
                defs.push(Def { site: DefSite::Stmt(id), var: v.to_string() });
            }
        }
        let mut by_var: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, d) in defs.iter().enumerate() {
            by_var.entry(d.var.clone()).or_default().push(i);
        }
        let n = defs.len();

        let transfer = |b: BlockId, set: &mut DefSet| {
            for id in cfg.blocks[b].stmts.iter() {
                if let Some(&d) = by_stmt.get(id) {
                    for &k in &by_var[&defs[d].var] {
                        set.remove(k);
                    }
                    set.insert(d);
                }
            }
        };

        let mut entry_set = DefSet::new(n);
        for i in 0..entry_names.len() {
            entry_set.insert(i);
        }
        let mut block_in = vec![DefSet::new(n); cfg.len()];
        let mut block_out = vec![DefSet::new(n); cfg.len()];
        block_out[ENTRY] = entry_set;
        let mut changed = true;
        while changed {
            changed = false;
            for b in 0..cfg.len() {
                if b == ENTRY {
                    continue;
                }
                let mut inn = DefSet::new(n);
                for &(p, _) in &cfg.preds[b] {
                    inn.union_with(&block_out[p]);
                }
                let mut out = inn.clone();
                transfer(b, &mut out);
                block_in[b] = inn;
                if out != block_out[b] {
                    block_out[b] = out;
                    changed = true;
                }
            }
        }

        let mut before = HashMap::new();
        for b in 0..cfg.len() {
            let mut cur = block_in[b].clone();
            for id in cfg.block_points(b) {
                before.insert(id, cur.clone());
                if let Some(&d) = by_stmt.get(&id) {
                    for &k in &by_var[&defs[d].var] {
                        cur.remove(k);
                    }
                    cur.insert(d);
                }
            }
        }
        ReachingDefs { defs, by_var, by_stmt, before, block_out }
    }

    /// Definitions of `var` reaching the point before statement `at`.
    pub fn reaching(&self, at: StmtId, var: &str) -> Vec<&Def> {
        let Some(set) = self.before.get(&at) else { return Vec::new() };
        self.by_var
            .get(var)
            .into_iter()
            .flatten()
            .filter(|&&i| set.contains(i))
            .map(|&i| &self.defs[i])
            .collect()
    }

    pub fn def_of_stmt(&self, id: StmtId) -> Option<&Def> {
        self.by_stmt.get(&id).map(|&i| &self.defs[i])
    }

    /// Every definition site of `var` (statements and entry).
    pub fn defs_of(&self, var: &str) -> Vec<&Def> {
        self.by_var.get(var).into_iter().flatten().map(|&i| &self.defs[i]).collect()
    }
}
