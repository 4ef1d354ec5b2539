//! The execution fabric: parallel map, hash-partitioned shuffle, reduce.

pub mod interp;
mod rewrite;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use interp::{run_map, run_reduce, TaskState, ABSENT_TOKEN, LOOP_LIMIT};
pub use rewrite::{rewrite_for_directop, Rewritten};

use crate::detect::{IndexGenSpec, OptKind};
use crate::error::{Error, JobError, PlanError, StorageError};
use crate::lang::{ScalarType, Schema, Type, TypedJob};
use crate::optimizer::{ExecutionDescriptor, InputSource};
use crate::storage::btree::{BTreeReader, BTreeWriter, ByteRange, DEFAULT_PAGE_SIZE};
use crate::storage::catalog::{canonical, now_secs, Catalog, CatalogEntry, IndexKind, InputId};
use crate::storage::colgroup::{ColumnGroupFile, ColumnGroupWriter, DEFAULT_GROUP_ROWS};
use crate::storage::dict::Dictionary;
use crate::storage::layout::{Codec, Layout};
use crate::storage::record::{RecordFile, RecordFileWriter};
use crate::value::{Record, Value};

/// A map task's input batch closes at this many encoded bytes or records.
pub const SPLIT_BYTES: u64 = 1 << 20;
pub const SPLIT_RECORDS: usize = 8192;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutionStats {
    pub bytes_read: u64,
    pub records_scanned: u64,
    pub map_invocations: u64,
    pub pairs_emitted: u64,
    pub shuffle_bytes: u64,
    pub reduce_groups: u64,
    pub wall_millis: u64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub output: PathBuf,
    pub stats: ExecutionStats,
    /// Log lines from all tasks, map tasks first, in task order.
    pub log: Vec<String>,
    pub pairs: Vec<(Value, Value)>,
}

/// One map task's worth of input.
type Batch = Vec<Arc<Record>>;

struct Scanned {
    batches: Vec<Batch>,
    bytes_read: u64,
}

fn scan_raw(path: &Path, schema: &Schema) -> Result<Scanned, Error> {
    let file = RecordFile::open(path)?;
    if file.schema != *schema {
        return Err(PlanError::PlanMismatch(format!(
            "input schema {} does not match job schema {}",
            file.schema.name, schema.name
        ))
        .into());
    }
    let splits = file.splits(SPLIT_BYTES);
    let batches = splits
        .into_par_iter()
        .flat_map_iter(|r| {
            let (start, end) = (r.start, r.end);
            (start..end).step_by(SPLIT_RECORDS).map(move |s| s..(s + SPLIT_RECORDS).min(end))
        })
        .map(|r| Ok(file.records(r)?.into_iter().map(Arc::new).collect()))
        .collect::<Result<Vec<Batch>, StorageError>>()?;
    Ok(Scanned { batches, bytes_read: file.file_len() })
}

fn check_layout(layout: &Layout, schema: &Schema) -> Result<(), PlanError> {
    if layout.schema != *schema {
        return Err(PlanError::PlanMismatch(format!(
            "index schema {} does not match job schema {}",
            layout.schema.name, schema.name
        )));
    }
    Ok(())
}

fn scan_btree(path: &Path, ranges: &[ByteRange], schema: &Schema) -> Result<Scanned, Error> {
    let mut reader = BTreeReader::open(path)?;
    let layout = reader.header.layout.clone();
    check_layout(&layout, schema)?;
    // one producer walks the leaves; rows decode in parallel per batch
    let mut raw: Vec<Vec<(Vec<u8>, u64)>> = vec![Vec::new()];
    let mut bytes = 0u64;
    let stats = reader.scan(ranges, |_, row, at| {
        let cur = raw.last_mut().expect("batch");
        cur.push((row.to_vec(), at));
        bytes += row.len() as u64;
        if cur.len() >= SPLIT_RECORDS || bytes >= SPLIT_BYTES {
            raw.push(Vec::new());
            bytes = 0;
        }
        Ok(())
    })?;
    let batches = raw
        .into_par_iter()
        .filter(|b| !b.is_empty())
        .map(|b| {
            b.into_iter().map(|(row, at)| layout.decode_row(&row, at).map(Arc::new)).collect::<Result<Batch, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Scanned { batches, bytes_read: stats.bytes_read })
}

fn scan_colgroup(path: &Path, schema: &Schema) -> Result<Scanned, Error> {
    let file = ColumnGroupFile::open(path)?;
    check_layout(&file.layout, schema)?;
    let batches = (0..file.group_count())
        .into_par_iter()
        .map(|g| Ok(file.read_group(g)?.into_iter().map(Arc::new).collect()))
        .collect::<Result<Vec<Batch>, StorageError>>()?;
    Ok(Scanned { batches, bytes_read: file.file_len() })
}

fn partition_of(key: &[u8], reducers: usize) -> usize {
    (crc32fast::hash(key) as usize) % reducers
}

fn output_type(t: &Type) -> ScalarType {
    match t {
        Type::I32 => ScalarType::I32,
        Type::I64 => ScalarType::I64,
        Type::Str | Type::Token => ScalarType::Str,
        _ => ScalarType::Blob,
    }
}

fn output_value(v: Value, ty: ScalarType) -> Value {
    match (v, ty) {
        (v @ (Value::I32(_) | Value::I64(_) | Value::Str(_) | Value::Blob(_)), _) => v,
        (other, _) => {
            let mut b = Vec::new();
            other.encode_tagged(&mut b);
            Value::Blob(b)
        }
    }
}

/// Canonical order of output pairs: key image, then tagged value bytes.
pub fn canonical_sort(pairs: &mut [(Value, Value)]) {
    pairs.sort_by_cached_key(|(k, v)| {
        let mut vb = Vec::new();
        v.encode_tagged(&mut vb);
        (k.key_bytes(), vb)
    });
}

/// Schema of job output files.
pub fn output_schema(job: &TypedJob) -> Schema {
    Schema::new("Output", &[("key", output_type(&job.out_key)), ("value", output_type(&job.out_value))])
}

/// Execute `job` as planned by `exec`, writing its canonical output to `output`.
pub fn run_job(job: &TypedJob, exec: &ExecutionDescriptor, output: &Path, reducers: usize) -> Result<RunOutput, Error> {
    let started = Instant::now();
    let schema = job.schema();
    let reducers = reducers.max(1);

    let mut dicts: BTreeMap<String, Dictionary> = BTreeMap::new();
    let (scanned, run_job) = match &exec.source {
        InputSource::Raw { path } => {
            if exec.ranges.is_some() || !exec.active.is_empty() {
                return Err(PlanError::PlanMismatch("raw input cannot carry optimizations".into()).into());
            }
            (scan_raw(path, schema)?, None)
        }
        InputSource::Index { entry } => {
            let scanned = match entry.kind {
                IndexKind::BTree => {
                    let ranges = exec
                        .ranges
                        .as_ref()
                        .ok_or_else(|| PlanError::PlanMismatch("B+Tree plan without key ranges".into()))?;
                    scan_btree(&entry.index_path, &ranges.to_byte_ranges(), schema)?
                }
                IndexKind::ColGroup => scan_colgroup(&entry.index_path, schema)?,
            };
            let has_dict = entry.codecs.values().any(|c| *c == Codec::Dict);
            if has_dict != exec.active.contains(&OptKind::DirectOp) {
                return Err(PlanError::PlanMismatch("dictionary-coded index requires direct operation".into()).into());
            }
            let rewritten = if has_dict {
                for (f, p) in &exec.direct_op_dictionaries {
                    dicts.insert(f.clone(), Dictionary::read(p)?);
                }
                Some(rewrite_for_directop(job, &dicts)?)
            } else {
                None
            };
            (scanned, rewritten)
        }
    };
    let (exec_job, key_dict) = match &run_job {
        Some(r) => (&r.job, r.key_field.as_ref().and_then(|f| dicts.get(f))),
        None => (job, None),
    };
    let spec = &exec_job.job;

    // map: one task per batch, each with its own member state
    let map_results: Vec<(Vec<(Value, Value)>, Vec<String>, u64)> = scanned
        .batches
        .par_iter()
        .map(|batch| {
            let mut state = TaskState::new(spec);
            let mut out = Vec::new();
            for rec in batch {
                run_map(spec, rec.clone(), &mut state, &mut out)?;
            }
            Ok((out, state.log, batch.len() as u64))
        })
        .collect::<Result<_, JobError>>()?;

    let mut stats = ExecutionStats { bytes_read: scanned.bytes_read, ..Default::default() };
    let mut log = Vec::new();
    let mut parts: Vec<Vec<(Vec<u8>, Vec<u8>, Value, Value)>> = vec![Vec::new(); reducers];
    for (pairs, l, n) in map_results {
        stats.records_scanned += n;
        stats.pairs_emitted += pairs.len() as u64;
        log.extend(l);
        for (k, v) in pairs {
            let kb = k.key_bytes();
            let mut vb = Vec::new();
            v.encode_tagged(&mut vb);
            stats.shuffle_bytes += (kb.len() + vb.len()) as u64;
            parts[partition_of(&kb, reducers)].push((kb, vb, k, v));
        }
    }
    stats.map_invocations = stats.records_scanned;

    // reduce: partitions in parallel, groups in key order within each
    let reduced: Vec<(Vec<(Value, Value)>, Vec<String>, u64)> = parts
        .into_par_iter()
        .map(|mut part| {
            part.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
            let mut state = TaskState::new(spec);
            let mut out = Vec::new();
            let mut groups = 0u64;
            let mut it = part.into_iter().peekable();
            while let Some((kb, _, k, v)) = it.next() {
                let mut vals = vec![v];
                while let Some(next) = it.next_if(|n| n.0 == kb) {
                    vals.push(next.3);
                }
                groups += 1;
                run_reduce(spec, k, vals, &mut state, &mut out)?;
            }
            Ok((out, state.log, groups))
        })
        .collect::<Result<_, JobError>>()?;

    let key_ty = output_type(&exec_job.out_key);
    let val_ty = output_type(&exec_job.out_value);
    let mut pairs = Vec::new();
    for (out, l, g) in reduced {
        stats.reduce_groups += g;
        log.extend(l);
        for (k, v) in out {
            let k = match (k, key_dict) {
                (Value::Token(t), Some(d)) => Value::Str(
                    d.lookup(t)
                        .ok_or_else(|| JobError::Rewrite(format!("token {t} is not in the dictionary")))?
                        .to_string(),
                ),
                (k, _) => k,
            };
            pairs.push((output_value(k, key_ty), output_value(v, val_ty)));
        }
    }
    canonical_sort(&mut pairs);
    let out_schema = Schema::new("Output", &[("key", key_ty), ("value", val_ty)]);
    let mut w = RecordFileWriter::create(output, &out_schema)?;
    for (k, v) in &pairs {
        w.push(&[k.clone(), v.clone()])?;
    }
    w.finish()?;
    stats.wall_millis = started.elapsed().as_millis() as u64;
    Ok(RunOutput { output: output.to_path_buf(), stats, log, pairs })
}

fn spec_layout(spec: &IndexGenSpec, schema: &Schema) -> Result<Layout, StorageError> {
    let bad = |m: String| StorageError::InvalidSpec(m);
    if spec.retained.is_empty() {
        return Err(bad("no retained fields".into()));
    }
    let mut retained = Vec::new();
    let mut codecs = Vec::new();
    for (i, f) in schema.fields.iter().enumerate() {
        if spec.retained.contains(&f.name) {
            retained.push(i);
            codecs.push(spec.codecs.get(&f.name).copied().unwrap_or(Codec::Plain));
        }
    }
    if retained.len() != spec.retained.len() {
        let unknown: Vec<&String> = spec.retained.iter().filter(|f| schema.field(f).is_none()).collect();
        return Err(bad(format!("retained fields {unknown:?} are not in {}", schema.name)));
    }
    if let Some(f) = spec.codecs.keys().find(|f| !spec.retained.contains(f)) {
        return Err(bad(format!("codec given for unretained field {f}")));
    }
    if let Some(f) = &spec.index_field {
        if !spec.retained.contains(f) {
            return Err(bad(format!("index field {f} is not retained")));
        }
        if codecs.contains(&Codec::Delta) {
            return Err(bad("delta coding is not available in a B+Tree".into()));
        }
    }
    Layout::new(schema.clone(), retained, codecs)
}

/// Build the index described by `spec` over the record file `input`, place
/// it in `index_dir`, and register it in `catalog`.
pub fn run_index_gen(
    spec: &IndexGenSpec,
    input: &Path,
    index_dir: &Path,
    catalog: &mut Catalog,
) -> Result<CatalogEntry, Error> {
    let file = RecordFile::open(input)?;
    let schema = file.schema.clone();
    let layout = spec_layout(spec, &schema)?;
    let id = InputId::of(input)?;
    std::fs::create_dir_all(index_dir).map_err(|e| StorageError::io(index_dir, e))?;
    let index_dir = canonical(index_dir)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
    let base = format!("{stem}.{}.{}", spec.name, &id.sha256[..12]);

    // map: decode every split in parallel
    let mut records: Vec<Record> = file
        .splits(SPLIT_BYTES)
        .into_par_iter()
        .map(|r| file.records(r))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut dictionaries = BTreeMap::new();
    let mut size = 0u64;
    for (&i, &c) in layout.retained.iter().zip(&layout.codecs) {
        if c != Codec::Dict {
            continue;
        }
        let name = &schema.fields[i].name;
        let dict = Dictionary::build(records.iter().filter_map(|r| r[i].as_str()))?;
        let path = index_dir.join(format!("{base}.{name}.dict"));
        size += dict.write(&path)?;
        dictionaries.insert(name.clone(), path);
        for r in records.iter_mut() {
            let t = r[i].as_str().and_then(|s| dict.encode(s)).expect("dictionary covers its own input");
            r[i] = Value::Token(t);
        }
    }

    let (kind, index_path) = match &spec.index_field {
        Some(f) => {
            let key_idx = schema.index_of(f).expect("validated");
            let mut keyed: Vec<(Vec<u8>, usize)> = Vec::with_capacity(records.len());
            // keys are taken from the original values so dictionary coding
            // never changes the index order
            let original = file.records(0..file.len())?;
            for (i, r) in original.iter().enumerate() {
                keyed.push((r[key_idx].key_bytes(), i));
            }
            // shuffle: sort by index key, ties in input order
            keyed.par_sort();
            let path = index_dir.join(format!("{base}.mmbt"));
            let mut w = BTreeWriter::create(&path, layout.clone(), key_idx, DEFAULT_PAGE_SIZE)?;
            let mut row = Vec::new();
            for (key, i) in keyed {
                row.clear();
                layout.encode_row(&records[i], &mut row)?;
                w.push(key, row.clone())?;
            }
            size += w.finish()?;
            (IndexKind::BTree, path)
        }
        None => {
            let path = index_dir.join(format!("{base}.mmcg"));
            let mut w = ColumnGroupWriter::new(layout.clone(), DEFAULT_GROUP_ROWS);
            for r in records {
                w.push(r)?;
            }
            size += w.finish(&path)?;
            (IndexKind::ColGroup, path)
        }
    };

    let entry = CatalogEntry {
        input: id,
        kind,
        flavors: spec.flavors.clone(),
        index_field: spec.index_field.clone(),
        retained_fields: layout.retained_names(),
        codecs: layout
            .retained
            .iter()
            .zip(&layout.codecs)
            .map(|(&i, &c)| (schema.fields[i].name.clone(), c))
            .collect(),
        index_path,
        dictionaries,
        size_bytes: size,
        created_at: now_secs(),
    };
    catalog.append(entry.clone())?;
    Ok(entry)
}
