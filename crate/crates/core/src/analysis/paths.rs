//! Enumeration of entry-to-statement paths with their branch conditions.

use thiserror::Error;

use super::cfg::{BlockId, Cfg, EdgeKind, ENTRY};
use crate::lang::StmtId;

/// Paths beyond this count are not enumerated; callers bail out.
pub const PATH_LIMIT: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("statement {0} is reachable through a loop")]
    Cyclic(StmtId),
    #[error("more than {PATH_LIMIT} paths reach statement {0}")]
    TooMany(StmtId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CfgPath {
    pub blocks: Vec<BlockId>,
    /// Governing conditions in path order: (if/while statement, branch taken).
    pub conds: Vec<(StmtId, bool)>,
}

impl CfgPath {
    /// Statements executed along the path before (and excluding) `target`,
    /// plus the condition statements.
    pub fn stmts_before(&self, cfg: &Cfg<'_>, target: StmtId) -> Vec<StmtId> {
        let mut out = Vec::new();
        for &b in &self.blocks {
            for id in cfg.block_points(b) {
                if id == target {
                    return out;
                }
                out.push(id);
            }
        }
        out
    }
}

/// All simple entry paths to the block holding `target`, in deterministic
/// (successor-order DFS) order.
pub fn enumerate_paths(cfg: &Cfg<'_>, target: StmtId) -> Result<Vec<CfgPath>, PathError> {
    let goal = cfg.block_of(target);

    // Blocks on some entry -> goal path.
    let mut fwd = vec![false; cfg.len()];
    let mut stack = vec![ENTRY];
    fwd[ENTRY] = true;
    while let Some(u) = stack.pop() {
        for &(v, _) in &cfg.succs[u] {
            if !fwd[v] {
                fwd[v] = true;
                stack.push(v);
            }
        }
    }
    let mut bwd = vec![false; cfg.len()];
    let mut stack = vec![goal];
    bwd[goal] = true;
    while let Some(u) = stack.pop() {
        for &(p, _) in &cfg.preds[u] {
            if !bwd[p] {
                bwd[p] = true;
                stack.push(p);
            }
        }
    }
    let relevant: Vec<bool> = (0..cfg.len()).map(|b| fwd[b] && bwd[b]).collect();

    // Any cycle among relevant blocks means some entry -> target path loops.
    let mut color = vec![0u8; cfg.len()];
    fn has_cycle(cfg: &Cfg<'_>, rel: &[bool], color: &mut [u8], u: BlockId) -> bool {
        color[u] = 1;
        for &(v, _) in &cfg.succs[u] {
            if !rel[v] {
                continue;
            }
            if color[v] == 1 || (color[v] == 0 && has_cycle(cfg, rel, color, v)) {
                return true;
            }
        }
        color[u] = 2;
        false
    }
    if relevant[ENTRY] && has_cycle(cfg, &relevant, &mut color, ENTRY) {
        return Err(PathError::Cyclic(target));
    }

    let mut out = Vec::new();
    let mut blocks = vec![ENTRY];
    let mut conds = Vec::new();
    walk(cfg, &relevant, goal, target, &mut blocks, &mut conds, &mut out)?;
    Ok(out)
}

fn walk(
    cfg: &Cfg<'_>,
    rel: &[bool],
    goal: BlockId,
    target: StmtId,
    blocks: &mut Vec<BlockId>,
    conds: &mut Vec<(StmtId, bool)>,
    out: &mut Vec<CfgPath>,
) -> Result<(), PathError> {
    let u = *blocks.last().unwrap();
    if u == goal {
        if out.len() >= PATH_LIMIT {
            return Err(PathError::TooMany(target));
        }
        out.push(CfgPath { blocks: blocks.clone(), conds: conds.clone() });
        return Ok(());
    }
    for &(v, kind) in &cfg.succs[u] {
        if !rel[v] {
            continue;
        }
        let cond = match kind {
            EdgeKind::Uncond => None,
            EdgeKind::True => Some((cfg.blocks[u].term.unwrap(), true)),
            EdgeKind::False => Some((cfg.blocks[u].term.unwrap(), false)),
        };
        if let Some(c) = cond {
            conds.push(c);
        }
        blocks.push(v);
        walk(cfg, rel, goal, target, blocks, conds, out)?;
        blocks.pop();
        if cond.is_some() {
            conds.pop();
        }
    }
    Ok(())
}
