//! Optimization detectors and index-generation specs.

mod directop;
pub mod dnf;
mod project;
mod select;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use directop::find_direct_op;
pub(crate) use directop::Refs as DirectOpRefs;
pub use dnf::{Atom, ConditionDnf};
pub use project::{find_delta, find_project, used_fields};
pub use select::{find_select, MAX_COND_SIZE};

use crate::analysis::MapAnalysis;
use crate::error::PlanError;
use crate::lang::{ScalarType, Schema, StmtKind, TypedJob};
use crate::optimizer::dnf_to_ranges;
use crate::storage::layout::Codec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptKind {
    Select,
    Project,
    Delta,
    DirectOp,
}

impl OptKind {
    pub const ALL: [OptKind; 4] = [OptKind::Select, OptKind::Project, OptKind::Delta, OptKind::DirectOp];

    pub fn name(self) -> &'static str {
        match self {
            OptKind::Select => "select",
            OptKind::Project => "project",
            OptKind::Delta => "delta",
            OptKind::DirectOp => "directop",
        }
    }
}

impl std::fmt::Display for OptKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizationDescriptor {
    Select { dnf: ConditionDnf, candidates: Vec<String> },
    Project { dropped: Vec<String> },
    Delta { fields: Vec<String> },
    DirectOp { fields: Vec<String> },
}

impl OptimizationDescriptor {
    pub fn kind(&self) -> OptKind {
        match self {
            OptimizationDescriptor::Select { .. } => OptKind::Select,
            OptimizationDescriptor::Project { .. } => OptKind::Project,
            OptimizationDescriptor::Delta { .. } => OptKind::Delta,
            OptimizationDescriptor::DirectOp { .. } => OptKind::DirectOp,
        }
    }

    /// Schema well-formedness check applied to descriptors from any source.
    pub fn validate(&mut self, schema: &Schema) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::InvalidDescriptor(m));
        let field_ty = |f: &str| schema.field(f).map(|x| x.ty);
        match self {
            OptimizationDescriptor::Select { dnf, candidates } => {
                dnf.validate(schema).map_err(PlanError::InvalidDescriptor)?;
                for c in candidates.iter() {
                    if field_ty(c).is_none() {
                        return bad(format!("select candidate `{c}` is not a field of {}", schema.name));
                    }
                }
            }
            OptimizationDescriptor::Project { dropped } => {
                for f in dropped.iter() {
                    if field_ty(f).is_none() {
                        return bad(format!("projected field `{f}` is not a field of {}", schema.name));
                    }
                }
                if dropped.len() >= schema.fields.len() {
                    return bad("projection drops every field".into());
                }
            }
            OptimizationDescriptor::Delta { fields } => {
                for f in fields.iter() {
                    if !matches!(field_ty(f), Some(ScalarType::I32 | ScalarType::I64)) {
                        return bad(format!("delta field `{f}` is not a numeric field of {}", schema.name));
                    }
                }
            }
            OptimizationDescriptor::DirectOp { fields } => {
                for f in fields.iter() {
                    if field_ty(f) != Some(ScalarType::Str) {
                        return bad(format!("direct-op field `{f}` is not a str field of {}", schema.name));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parse and validate a descriptor list (the analyzer's JSON output format).
pub fn load_descriptors(json: &str, schema: &Schema) -> Result<Vec<OptimizationDescriptor>, PlanError> {
    let mut ds: Vec<OptimizationDescriptor> =
        serde_json::from_str(json).map_err(|e| PlanError::InvalidDescriptor(e.to_string()))?;
    for d in &mut ds {
        d.validate(schema)?;
    }
    Ok(ds)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexGenSpec {
    pub name: String,
    /// Retained fields in schema order.
    pub retained: Vec<String>,
    /// B+Tree key; `None` builds a column-group file in input order.
    pub index_field: Option<String>,
    pub codecs: BTreeMap<String, Codec>,
    pub flavors: BTreeSet<OptKind>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AnalyzeOptions {
    /// Treat logs as observable: they count as field uses and block selection.
    pub safe_mode: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub descriptors: Vec<OptimizationDescriptor>,
    pub index_specs: Vec<IndexGenSpec>,
    /// Why absent optimizations were not found.
    pub notes: Vec<String>,
}

impl Analysis {
    pub fn kinds(&self) -> BTreeSet<OptKind> {
        self.descriptors.iter().map(OptimizationDescriptor::kind).collect()
    }

    pub fn descriptor(&self, kind: OptKind) -> Option<&OptimizationDescriptor> {
        self.descriptors.iter().find(|d| d.kind() == kind)
    }

    pub fn spec(&self, name: &str) -> Option<&IndexGenSpec> {
        self.index_specs.iter().find(|s| s.name == name)
    }
}

/// Fields usable as a B+Tree key for `dnf`: every disjunct constrains them.
pub fn sargable_fields(dnf: &ConditionDnf, schema: &Schema) -> Vec<String> {
    schema
        .fields
        .iter()
        .filter(|f| f.ty != ScalarType::Blob && dnf_to_ranges(dnf, &f.name, schema).is_ok())
        .map(|f| f.name.clone())
        .collect()
}

pub fn analyze(job: &TypedJob, opts: AnalyzeOptions) -> Analysis {
    let a = MapAnalysis::new(job);
    let schema = job.schema();
    let mut out = Analysis::default();

    // A stateful map whose emits depend on members or impure builtins is
    // not a per-record function; every optimization changes which records it
    // sees or what they contain.
    let emits = a.emits();
    let mut governing = BTreeSet::new();
    for &e in &emits {
        match a.emit_paths(e) {
            Ok(paths) => governing.extend(paths.iter().flat_map(|p| p.conds.iter().map(|c| c.0))),
            // without paths, every branch in the map might govern the emit
            Err(_) => governing.extend(a.stmts().into_iter().filter(|&s| matches!(a.cfg.stmt(s).kind, StmtKind::If { .. } | StmtKind::While { .. }))),
        }
    }
    for s in emits.iter().copied().chain(governing) {
        if !a.use_def(s).is_func() {
            out.notes.push(format!("statement {s} on an emit path depends on state outside the record; nothing is optimized"));
            return out;
        }
    }

    let mut select = None;
    match find_select(&a, opts.safe_mode) {
        Ok(d) if d.is_true() => out.notes.push("select: map emits on every record".into()),
        Ok(d) if d.is_false() => out.notes.push("select: map never emits".into()),
        Ok(d) => {
            let candidates = sargable_fields(&d, schema);
            if candidates.is_empty() {
                out.notes.push(format!("select: condition {d} constrains no field on every branch"));
            }
            select = Some((d, candidates));
        }
        Err(why) => out.notes.push(format!("select: {why}")),
    }
    if let Some((dnf, candidates)) = &select {
        if !candidates.is_empty() {
            out.descriptors.push(OptimizationDescriptor::Select { dnf: dnf.clone(), candidates: candidates.clone() });
        }
    }

    let dropped = find_project(&a, opts.safe_mode);
    if schema.is_opaque() {
        out.notes.push("project/delta: record value is opaque".into());
    }
    if !dropped.is_empty() {
        out.descriptors.push(OptimizationDescriptor::Project { dropped: dropped.iter().cloned().collect() });
    }
    let delta = find_delta(&a, &dropped);
    if !delta.is_empty() {
        out.descriptors.push(OptimizationDescriptor::Delta { fields: delta.iter().cloned().collect() });
    }
    let direct = if opts.safe_mode { BTreeSet::new() } else { find_direct_op(&job.job) };
    let direct: BTreeSet<String> = direct.into_iter().filter(|f| !dropped.contains(f)).collect();
    if !direct.is_empty() {
        out.descriptors.push(OptimizationDescriptor::DirectOp { fields: direct.iter().cloned().collect() });
    }

    out.index_specs = index_specs(schema, &out.descriptors);
    out
}

/// The combined spec exploiting every compatible optimization, followed by
/// one spec per single optimization.
pub fn index_specs(schema: &Schema, descriptors: &[OptimizationDescriptor]) -> Vec<IndexGenSpec> {
    let mut dropped = BTreeSet::new();
    let mut delta = BTreeSet::new();
    let mut direct = BTreeSet::new();
    let mut index_field = None;
    for d in descriptors {
        match d {
            OptimizationDescriptor::Select { candidates, .. } => index_field = candidates.first().cloned(),
            OptimizationDescriptor::Project { dropped: f } => dropped.extend(f.iter().cloned()),
            OptimizationDescriptor::Delta { fields } => delta.extend(fields.iter().cloned()),
            OptimizationDescriptor::DirectOp { fields } => direct.extend(fields.iter().cloned()),
        }
    }
    let all: Vec<String> = schema.fields.iter().map(|f| f.name.clone()).collect();
    let retained_after: Vec<String> = all.iter().filter(|f| !dropped.contains(*f)).cloned().collect();
    let build = |name: &str,
                 retained: &[String],
                 index_field: Option<String>,
                 delta: &BTreeSet<String>,
                 direct: &BTreeSet<String>,
                 flavors: BTreeSet<OptKind>| {
        let codecs = retained
            .iter()
            .map(|f| {
                let c = if direct.contains(f) {
                    Codec::Dict
                } else if delta.contains(f) && index_field.is_none() {
                    Codec::Delta
                } else {
                    Codec::Plain
                };
                (f.clone(), c)
            })
            .collect();
        IndexGenSpec { name: name.into(), retained: retained.to_vec(), index_field, codecs, flavors }
    };
    let none = BTreeSet::new();
    let mut specs = Vec::new();
    if descriptors.is_empty() {
        return specs;
    }

    let mut flavors = BTreeSet::new();
    if index_field.is_some() {
        flavors.insert(OptKind::Select);
    } else if !delta.is_empty() {
        flavors.insert(OptKind::Delta);
    }
    if !dropped.is_empty() {
        flavors.insert(OptKind::Project);
    }
    if !direct.is_empty() {
        flavors.insert(OptKind::DirectOp);
    }
    specs.push(build("combined", &retained_after, index_field.clone(), &delta, &direct, flavors));

    if index_field.is_some() {
        specs.push(build("select", &all, index_field, &none, &none, [OptKind::Select].into()));
    }
    if !dropped.is_empty() {
        specs.push(build("project", &retained_after, None, &none, &none, [OptKind::Project].into()));
    }
    if !delta.is_empty() {
        specs.push(build("delta", &all, None, &delta, &none, [OptKind::Delta].into()));
    }
    if !direct.is_empty() {
        specs.push(build("directop", &all, None, &none, &direct, [OptKind::DirectOp].into()));
    }
    specs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::load_job;

    const WEB: &str = "schema WebPage { url: str; rank: i32; content: str; }";

    fn run(src: &str) -> Analysis {
        analyze(&load_job(src).unwrap(), AnalyzeOptions::default())
    }

    #[test]
    fn rank_filter_descriptors() {
        let a = run(&format!(
            "{WEB} job J on WebPage {{ map(k, v) {{ if (v.rank > 1) {{ emit(k, 1); }} }} reduce(k, vals) {{ }} }}"
        ));
        // `k` is the url and only ever the shuffle key
        assert_eq!(a.kinds(), [OptKind::Select, OptKind::Project, OptKind::Delta, OptKind::DirectOp].into());
        let json = serde_json::to_string(&a.descriptors[0]).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"select","dnf":{"disjuncts":[[{"pred":"v.rank > 1","positive":true}]]},"candidates":["rank"]}"#
        );
        let combined = a.spec("combined").unwrap();
        assert_eq!(combined.index_field.as_deref(), Some("rank"));
        assert_eq!(combined.retained, ["url", "rank"]);
        assert_eq!(combined.flavors, [OptKind::Select, OptKind::Project, OptKind::DirectOp].into());
        assert_eq!(combined.codecs["url"], Codec::Dict);
        assert_eq!(combined.codecs["rank"], Codec::Plain);
        let delta = a.spec("delta").unwrap();
        assert_eq!(delta.codecs["rank"], Codec::Delta);
    }

    #[test]
    fn stateful_map_gets_nothing() {
        let a = run(&format!(
            "{WEB} job J on WebPage {{ members {{ numMapsRun: i64 = 0; }}
               map(k, v) {{ numMapsRun = numMapsRun + 1; if (numMapsRun > 200 || v.rank > 1) {{ emit(k, 1); }} }}
               reduce(k, vals) {{ }} }}"
        ));
        assert!(a.descriptors.is_empty());
        assert!(a.index_specs.is_empty());
        let a = run(&format!(
            "{WEB} job J on WebPage {{ map(k, v) {{ if (!table_get(v.url)) {{ table_put(v.url); emit(k, 1); }} }}
               reduce(k, vals) {{ }} }}"
        ));
        assert!(a.descriptors.is_empty());
    }

    #[test]
    fn descriptor_validation() {
        let schema = Schema::new("W", &[("url", ScalarType::Str), ("rank", ScalarType::I32)]);
        let ds = load_descriptors(
            r#"[{"kind":"select","dnf":{"disjuncts":[[{"pred":"v.rank > 1","positive":true}]]},"candidates":["rank"]},
                {"kind":"delta","fields":["rank"]}]"#,
            &schema,
        )
        .unwrap();
        assert_eq!(ds.len(), 2);
        for bad in [
            r#"[{"kind":"delta","fields":["url"]}]"#,
            r#"[{"kind":"project","dropped":["nope"]}]"#,
            r#"[{"kind":"select","dnf":{"disjuncts":[[{"pred":"v.rank + 1","positive":true}]]},"candidates":[]}]"#,
            r#"[{"kind":"select","dnf":{"disjuncts":[[{"pred":"table_get(v.url)","positive":true}]]},"candidates":[]}]"#,
            r#"[{"kind":"teleport"}]"#,
        ] {
            assert!(load_descriptors(bad, &schema).is_err(), "{bad}");
        }
    }
}
