//! Matching descriptors against built indexes to pick an execution plan.

mod ranges;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use ranges::{dnf_to_ranges, KeyRangeSet, NotSargable, StrBound, StrRange};

use crate::detect::{OptKind, OptimizationDescriptor};
use crate::error::PlanError;
use crate::lang::Schema;
use crate::storage::catalog::{Catalog, CatalogEntry, IndexKind, InputId};
use crate::storage::layout::Codec;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum InputSource {
    Raw { path: PathBuf },
    Index { entry: Box<CatalogEntry> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionDescriptor {
    pub source: InputSource,
    /// Present only for B+Tree sources.
    pub ranges: Option<KeyRangeSet>,
    pub active: BTreeSet<OptKind>,
    pub direct_op_dictionaries: BTreeMap<String, PathBuf>,
    /// Index spec that would enable the optimizations left inactive.
    pub unlocked_by: Option<String>,
    pub notes: Vec<String>,
}

impl ExecutionDescriptor {
    pub fn raw(path: PathBuf) -> Self {
        ExecutionDescriptor {
            source: InputSource::Raw { path },
            ranges: None,
            active: BTreeSet::new(),
            direct_op_dictionaries: BTreeMap::new(),
            unlocked_by: None,
            notes: Vec::new(),
        }
    }

    pub fn entry(&self) -> Option<&CatalogEntry> {
        match &self.source {
            InputSource::Index { entry } => Some(entry),
            InputSource::Raw { .. } => None,
        }
    }
}

struct Wanted<'d> {
    select: Option<&'d OptimizationDescriptor>,
    dropped: BTreeSet<String>,
    delta: BTreeSet<String>,
    direct: BTreeSet<String>,
    kinds: BTreeSet<OptKind>,
}

impl<'d> Wanted<'d> {
    fn new(descriptors: &'d [OptimizationDescriptor]) -> Self {
        let mut w = Wanted {
            select: None,
            dropped: BTreeSet::new(),
            delta: BTreeSet::new(),
            direct: BTreeSet::new(),
            kinds: BTreeSet::new(),
        };
        for d in descriptors {
            w.kinds.insert(d.kind());
            match d {
                OptimizationDescriptor::Select { .. } => w.select = Some(d),
                OptimizationDescriptor::Project { dropped } => w.dropped.extend(dropped.iter().cloned()),
                OptimizationDescriptor::Delta { fields } => w.delta.extend(fields.iter().cloned()),
                OptimizationDescriptor::DirectOp { fields } => w.direct.extend(fields.iter().cloned()),
            }
        }
        w
    }
}

/// What `entry` would activate for this job, or why it cannot serve it.
fn activates(
    entry: &CatalogEntry,
    w: &Wanted<'_>,
    schema: &Schema,
) -> Result<(BTreeSet<OptKind>, Option<KeyRangeSet>), String> {
    let mut active = BTreeSet::new();
    let retained: BTreeSet<&str> = entry.retained_fields.iter().map(String::as_str).collect();
    for f in &schema.fields {
        if !retained.contains(f.name.as_str()) && !w.dropped.contains(&f.name) {
            return Err(format!("drops `{}`, which the job reads", f.name));
        }
    }
    if retained.len() < schema.fields.len() {
        active.insert(OptKind::Project);
    }
    for (f, c) in &entry.codecs {
        match c {
            Codec::Plain => {}
            Codec::Dict if w.direct.contains(f) => {
                active.insert(OptKind::DirectOp);
            }
            Codec::Delta if w.delta.contains(f) => {
                active.insert(OptKind::Delta);
            }
            c => return Err(format!("codes `{f}` as {c:?}, which the job does not allow")),
        }
    }
    let mut ranges = None;
    if entry.kind == IndexKind::BTree {
        let (Some(OptimizationDescriptor::Select { dnf, .. }), Some(field)) = (w.select, &entry.index_field) else {
            return Err("B+Tree index but no selection to drive it".into());
        };
        let r = dnf_to_ranges(dnf, field, schema).map_err(|e| e.to_string())?;
        ranges = Some(r);
        active.insert(OptKind::Select);
    }
    if entry.kind == IndexKind::ColGroup && active.is_empty() {
        return Err("column-group copy with no optimization".into());
    }
    Ok((active, ranges))
}

/// Ranking key: Select > Project > DirectOp > Delta, then count.
fn rank(active: &BTreeSet<OptKind>) -> (bool, bool, bool, bool, usize) {
    (
        active.contains(&OptKind::Select),
        active.contains(&OptKind::Project),
        active.contains(&OptKind::DirectOp),
        active.contains(&OptKind::Delta),
        active.len(),
    )
}

/// Choose the best index for `input` among catalog entries.
pub fn plan(
    descriptors: &[OptimizationDescriptor],
    catalog: &Catalog,
    input: &InputId,
    schema: &Schema,
) -> Result<ExecutionDescriptor, PlanError> {
    let w = Wanted::new(descriptors);
    let mut out = ExecutionDescriptor::raw(input.path.clone());
    if descriptors.is_empty() {
        out.notes.push("no optimization descriptors".into());
        return Ok(out);
    }

    let mut best: Option<(&CatalogEntry, BTreeSet<OptKind>, Option<KeyRangeSet>)> = None;
    let mut stale: Option<&CatalogEntry> = None;
    for entry in catalog.entries.iter().filter(|e| e.input.path == input.path) {
        let (active, ranges) = match activates(entry, &w, schema) {
            Ok(x) => x,
            Err(why) => {
                out.notes.push(format!("{}: {why}", entry.index_path.display()));
                continue;
            }
        };
        if !entry.index_path.exists() {
            out.notes.push(format!("{}: index file is missing", entry.index_path.display()));
            continue;
        }
        if entry.input.sha256 != input.sha256 {
            stale = stale.or(Some(entry));
            continue;
        }
        let better = match &best {
            None => true,
            Some((b, ba, _)) => {
                let (x, y) = (rank(&active), rank(ba));
                x > y || (x == y && entry.size_bytes < b.size_bytes)
            }
        };
        if better {
            best = Some((entry, active, ranges));
        }
    }

    let Some((entry, active, ranges)) = best else {
        if let Some(e) = stale {
            return Err(PlanError::StaleIndex { index: e.index_path.clone(), input: input.path.clone() });
        }
        out.unlocked_by = Some("combined".into());
        return Ok(out);
    };

    let missed: Vec<OptKind> = w
        .kinds
        .iter()
        .copied()
        .filter(|k| !active.contains(k))
        // selection and delta coding never combine in one index
        .filter(|k| !(*k == OptKind::Delta && active.contains(&OptKind::Select)))
        .collect();
    if !missed.is_empty() {
        out.unlocked_by = Some("combined".into());
        out.notes.push(format!("inactive: {}", missed.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")));
    }
    out.direct_op_dictionaries = if active.contains(&OptKind::DirectOp) {
        entry.dictionaries.clone()
    } else {
        BTreeMap::new()
    };
    out.source = InputSource::Index { entry: Box::new(entry.clone()) };
    out.ranges = ranges;
    out.active = active;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::ConditionDnf;
    use crate::lang::{parse_expr, typecheck_predicate, ScalarType};

    fn schema() -> Schema {
        Schema::new("W", &[("url", ScalarType::Str), ("rank", ScalarType::I32), ("content", ScalarType::Str)])
    }

    fn input() -> InputId {
        InputId { path: "/data/w.mmr".into(), sha256: "aa".into(), size: 1 }
    }

    fn select() -> OptimizationDescriptor {
        let mut e = parse_expr("v.rank > 1").unwrap();
        typecheck_predicate(&mut e, &schema()).unwrap();
        OptimizationDescriptor::Select {
            dnf: ConditionDnf::of_condition(&e, true).unwrap(),
            candidates: vec!["rank".into()],
        }
    }

    fn entry(kind: IndexKind, field: Option<&str>, retained: &[&str], codecs: &[(&str, Codec)], size: u64) -> CatalogEntry {
        let dir = std::env::temp_dir();
        CatalogEntry {
            input: input(),
            kind,
            flavors: BTreeSet::new(),
            index_field: field.map(String::from),
            retained_fields: retained.iter().map(|s| s.to_string()).collect(),
            codecs: retained
                .iter()
                .map(|f| {
                    let c = codecs.iter().find(|(n, _)| n == f).map_or(Codec::Plain, |x| x.1);
                    (f.to_string(), c)
                })
                .collect(),
            // any existing path will do; plan only checks existence
            index_path: dir,
            dictionaries: BTreeMap::new(),
            size_bytes: size,
            created_at: 0,
        }
    }

    fn catalog(entries: Vec<CatalogEntry>) -> Catalog {
        Catalog { path: "/nowhere".into(), entries, malformed: vec![] }
    }

    #[test]
    fn select_beats_delta() {
        let ds = vec![select(), OptimizationDescriptor::Delta { fields: vec!["rank".into()] }];
        let cat = catalog(vec![
            entry(IndexKind::ColGroup, None, &["url", "rank", "content"], &[("rank", Codec::Delta)], 10),
            entry(IndexKind::BTree, Some("rank"), &["url", "rank", "content"], &[], 100),
        ]);
        let p = plan(&ds, &cat, &input(), &schema()).unwrap();
        assert_eq!(p.active, [OptKind::Select].into());
        assert_eq!(p.ranges.unwrap().to_byte_ranges().len(), 1);
        assert_eq!(p.unlocked_by, None);
    }

    #[test]
    fn project_and_delta_combine() {
        let ds = vec![
            OptimizationDescriptor::Project { dropped: vec!["content".into()] },
            OptimizationDescriptor::Delta { fields: vec!["rank".into()] },
        ];
        let cat = catalog(vec![
            entry(IndexKind::ColGroup, None, &["url", "rank"], &[("rank", Codec::Delta)], 50),
            entry(IndexKind::ColGroup, None, &["url", "rank"], &[], 40),
        ]);
        let p = plan(&ds, &cat, &input(), &schema()).unwrap();
        assert_eq!(p.active, [OptKind::Project, OptKind::Delta].into());
        assert_eq!(p.entry().unwrap().size_bytes, 50);
    }

    #[test]
    fn fallbacks_and_staleness() {
        let p = plan(&[select()], &catalog(vec![]), &input(), &schema()).unwrap();
        assert!(p.active.is_empty());
        assert!(matches!(p.source, InputSource::Raw { .. }));
        assert_eq!(p.unlocked_by.as_deref(), Some("combined"));

        // an index that drops a field the job reads is never used
        let cat = catalog(vec![entry(IndexKind::ColGroup, None, &["url", "rank"], &[], 5)]);
        let p = plan(&[OptimizationDescriptor::Delta { fields: vec!["rank".into()] }], &cat, &input(), &schema())
            .unwrap();
        assert!(p.active.is_empty());

        let mut e = entry(IndexKind::BTree, Some("rank"), &["url", "rank", "content"], &[], 1);
        e.input.sha256 = "bb".into();
        let err = plan(&[select()], &catalog(vec![e]), &input(), &schema()).unwrap_err();
        assert!(matches!(err, PlanError::StaleIndex { .. }));
    }

    #[test]
    fn plan_is_pure() {
        let ds = vec![select()];
        let cat = catalog(vec![entry(IndexKind::BTree, Some("rank"), &["url", "rank", "content"], &[], 1)]);
        assert_eq!(plan(&ds, &cat, &input(), &schema()), plan(&ds, &cat, &input(), &schema()));
    }
}
