//! Control-flow and dataflow analysis of map bodies.

pub mod cfg;
pub mod paths;
pub mod reaching;
pub mod usedef;

pub use cfg::{Block, BlockId, Cfg, EdgeKind, ENTRY, EXIT};
pub use paths::{enumerate_paths, CfgPath, PathError, PATH_LIMIT};
pub use reaching::{Def, DefSite, ReachingDefs};
pub use usedef::{UdNode, UseDefDag};

use crate::lang::{walk_stmts, StmtId, TypedJob};

/// CFG and reaching definitions for one job's map body.
pub struct MapAnalysis<'a> {
    pub job: &'a TypedJob,
    pub cfg: Cfg<'a>,
    pub rd: ReachingDefs,
}

impl<'a> MapAnalysis<'a> {
    pub fn new(job: &'a TypedJob) -> Self {
        let map = &job.job.map;
        let cfg = Cfg::build(&map.body);
        let mut entry = vec![map.key_param.clone(), map.value_param.clone()];
        entry.extend(job.job.members.iter().map(|m| m.name.clone()));
        let rd = ReachingDefs::compute(&cfg, &entry);
        MapAnalysis { job, cfg, rd }
    }

    pub fn use_def(&self, stmt: StmtId) -> UseDefDag {
        let map = &self.job.job.map;
        usedef::Builder::new(&self.cfg, &self.rd, &map.key_param, &map.value_param).build(stmt)
    }

    pub fn emit_paths(&self, stmt: StmtId) -> Result<Vec<CfgPath>, PathError> {
        enumerate_paths(&self.cfg, stmt)
    }

    /// Emit statements of the map body in source order.
    pub fn emits(&self) -> Vec<StmtId> {
        let mut out = Vec::new();
        walk_stmts(&self.job.job.map.body, &mut |s| {
            if s.is_emit() {
                out.push(s.id);
            }
        });
        out
    }

    /// All statements of the map body in source order.
    pub fn stmts(&self) -> Vec<StmtId> {
        let mut out = Vec::new();
        walk_stmts(&self.job.job.map.body, &mut |s| out.push(s.id));
        out
    }
}
