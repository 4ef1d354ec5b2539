//! The benchmark harness: recall matrix, per-benchmark optimized vs full-scan
//! runs, and the plan-equivalence check shared with the test suites.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::gen::{
    gen_documents, gen_rankings, gen_rankings_blob, gen_uservisits, url_pool_from, RankingsGenSpec,
    UserVisitsGenSpec, WebPageGenSpec,
};
use super::models::{bench_models, BenchModel, Dataset, ModelParams};
use crate::detect::{analyze, AnalyzeOptions, OptKind};
use crate::engine::{run_index_gen, run_job, ExecutionStats};
use crate::error::{Error, WorkloadError};
use crate::lang::{load_job, TypedJob};
use crate::optimizer::{plan, ExecutionDescriptor};
use crate::storage::catalog::{Catalog, InputId};
use crate::storage::record::RecordFile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Detected,
    Undetected,
    NotPresent,
}

impl Cell {
    pub fn short(self) -> &'static str {
        match self {
            Cell::Detected => "D",
            Cell::Undetected => "U",
            Cell::NotPresent => "NP",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub bench: String,
    pub select: Cell,
    pub project: Cell,
    pub delta: Cell,
}

/// The detection pattern the four models are built to exhibit.
pub const EXPECTED_MATRIX: [(&str, [Cell; 3]); 4] = [
    ("B1", [Cell::Detected, Cell::Undetected, Cell::Undetected]),
    ("B2", [Cell::NotPresent, Cell::Detected, Cell::Detected]),
    ("B3", [Cell::Detected, Cell::NotPresent, Cell::Detected]),
    ("B4", [Cell::Undetected, Cell::NotPresent, Cell::NotPresent]),
];

/// A cell is Detected when the job's analysis yields the descriptor,
/// Undetected when only the sibling's does, Not Present otherwise.
pub fn recall_matrix(models: &[BenchModel]) -> Result<Vec<MatrixRow>, Error> {
    let mut rows = Vec::new();
    for m in models {
        let found = analyze(&load_job(&m.job)?, AnalyzeOptions::default()).kinds();
        let present = analyze(&load_job(&m.sibling)?, AnalyzeOptions::default()).kinds();
        let cell = |k: OptKind| match (found.contains(&k), present.contains(&k)) {
            (true, _) => Cell::Detected,
            (false, true) => Cell::Undetected,
            (false, false) => Cell::NotPresent,
        };
        rows.push(MatrixRow {
            bench: m.id.to_string(),
            select: cell(OptKind::Select),
            project: cell(OptKind::Project),
            delta: cell(OptKind::Delta),
        });
    }
    Ok(rows)
}

pub fn matrix_matches(rows: &[MatrixRow]) -> bool {
    rows.len() == EXPECTED_MATRIX.len()
        && rows
            .iter()
            .zip(EXPECTED_MATRIX.iter())
            .all(|(r, (id, cells))| r.bench == *id && [r.select, r.project, r.delta] == *cells)
}

/// Outcome of running a job under one analyzer-derived plan.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanCheck {
    /// Index spec the plan was built from; `none` for the empty catalog.
    pub spec: String,
    pub active: Vec<OptKind>,
    pub index_bytes: u64,
    pub stats: ExecutionStats,
    /// Output file byte-identical to the full-scan run.
    pub equal: bool,
}

#[derive(Clone, Debug)]
pub struct Verification {
    pub full_scan: ExecutionStats,
    pub output: PathBuf,
    pub checks: Vec<PlanCheck>,
}

/// Run `job` on a full scan, then once per index spec the analyzer proposes
/// (each in its own catalog), comparing outputs byte for byte.
pub fn verify_plans(job: &TypedJob, input: &Path, workdir: &Path, reducers: usize) -> Result<Verification, Error> {
    std::fs::create_dir_all(workdir).map_err(|e| crate::error::StorageError::io(workdir, e))?;
    let id = InputId::of(input)?;
    let raw_out = workdir.join("full.out");
    let raw = run_job(job, &ExecutionDescriptor::raw(id.path.clone()), &raw_out, reducers)?;
    let expect = std::fs::read(&raw_out).map_err(|e| crate::error::StorageError::io(&raw_out, e))?;
    let analysis = analyze(job, AnalyzeOptions::default());

    let mut checks = Vec::new();
    let mut candidates: Vec<Option<&crate::detect::IndexGenSpec>> = vec![None];
    candidates.extend(analysis.index_specs.iter().map(Some));
    for spec in candidates {
        let name = spec.map_or("none", |s| s.name.as_str());
        let dir = workdir.join(format!("plan-{name}"));
        std::fs::create_dir_all(&dir).map_err(|e| crate::error::StorageError::io(&dir, e))?;
        let mut catalog = Catalog::load(&dir.join("catalog.jsonl"))?;
        let index_bytes = match spec {
            Some(s) => run_index_gen(s, input, &dir, &mut catalog)?.size_bytes,
            None => 0,
        };
        let exec = plan(&analysis.descriptors, &catalog, &id, job.schema())?;
        let out = dir.join("plan.out");
        let run = run_job(job, &exec, &out, reducers)?;
        let got = std::fs::read(&out).map_err(|e| crate::error::StorageError::io(&out, e))?;
        checks.push(PlanCheck {
            spec: name.to_string(),
            active: exec.active.iter().copied().collect(),
            index_bytes,
            stats: run.stats,
            equal: got == expect,
        });
    }
    Ok(Verification { full_scan: raw.stats, output: raw_out, checks })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Tiny,
    Small,
}

impl FromStr for Scale {
    type Err = WorkloadError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tiny" => Ok(Scale::Tiny),
            "small" => Ok(Scale::Small),
            other => Err(WorkloadError::InvalidSpec(format!("unknown scale `{other}` (tiny|small)"))),
        }
    }
}

struct Sizes {
    rankings: u64,
    visits: u64,
    documents: u64,
}

impl Scale {
    fn sizes(self) -> Sizes {
        match self {
            Scale::Tiny => Sizes { rankings: 20_000, visits: 20_000, documents: 2_000 },
            Scale::Small => Sizes { rankings: 1_000_000, visits: 500_000, documents: 50_000 },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRow {
    pub bench: String,
    pub title: String,
    pub records: u64,
    pub input_bytes: u64,
    pub detected: Vec<OptKind>,
    pub active: Vec<OptKind>,
    pub index_bytes: u64,
    pub unoptimized: ExecutionStats,
    pub optimized: ExecutionStats,
    pub outputs_equal: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub scale: Scale,
    pub matrix: Vec<MatrixRow>,
    pub matrix_matches: bool,
    pub benchmarks: Vec<BenchRow>,
    pub wall_millis: u64,
}

/// A date window around the median holding at most `frac` of the visits
/// (but always at least one day).
pub fn date_window(dates: &[i64], frac: f64) -> (i64, i64) {
    if dates.is_empty() {
        return (0, 0);
    }
    let lo = dates[dates.len() / 2];
    let budget = (frac * dates.len() as f64).floor() as usize;
    let start = dates.partition_point(|&d| d < lo);
    let mut hi = lo;
    loop {
        let end = dates.partition_point(|&d| d <= hi + 1);
        if end - start > budget || end == dates.len() {
            break;
        }
        hi += 1;
    }
    (lo, hi)
}

fn run_model(m: &BenchModel, input: &Path, dir: &Path) -> Result<BenchRow, Error> {
    let job = load_job(&m.job)?;
    std::fs::create_dir_all(dir).map_err(|e| crate::error::StorageError::io(dir, e))?;
    let id = InputId::of(input)?;
    let analysis = analyze(&job, AnalyzeOptions::default());
    let raw_out = dir.join("unoptimized.out");
    let raw = run_job(&job, &ExecutionDescriptor::raw(id.path.clone()), &raw_out, 4)?;

    let mut catalog = Catalog::load(&dir.join("catalog.jsonl"))?;
    let mut index_bytes = 0;
    if let Some(spec) = analysis.spec("combined") {
        index_bytes = run_index_gen(spec, input, &dir.join("index"), &mut catalog)?.size_bytes;
    }
    let exec = plan(&analysis.descriptors, &catalog, &id, job.schema())?;
    let opt_out = dir.join("optimized.out");
    let opt = run_job(&job, &exec, &opt_out, 4)?;
    let read = |p: &Path| std::fs::read(p).map_err(|e| crate::error::StorageError::io(p, e));
    Ok(BenchRow {
        bench: m.id.into(),
        title: m.title.into(),
        records: raw.stats.records_scanned,
        input_bytes: id.size,
        detected: analysis.kinds().into_iter().collect(),
        active: exec.active.into_iter().collect(),
        index_bytes,
        unoptimized: raw.stats,
        optimized: opt.stats,
        outputs_equal: read(&raw_out)? == read(&opt_out)?,
        error: None,
    })
}

/// Generate the datasets, then analyze, index and run each benchmark.
/// A failing benchmark is reported in its row; the others still run.
pub fn bench_suite(scale: Scale, workdir: &Path) -> Result<BenchReport, Error> {
    let started = Instant::now();
    let sizes = scale.sizes();
    let data = workdir.join("data");
    std::fs::create_dir_all(&data).map_err(|e| crate::error::StorageError::io(&data, e))?;

    let docs = data.join("documents.mmr");
    gen_documents(&WebPageGenSpec { n: sizes.documents, seed: 11, ..Default::default() }, &docs)?;
    let pool = url_pool_from(&docs)?;
    let visits = data.join("uservisits.mmr");
    gen_uservisits(&UserVisitsGenSpec { n: sizes.visits, seed: 12, ..Default::default() }, &pool, &visits)?;
    let rspec = RankingsGenSpec { n: sizes.rankings, pool: pool.len() as u64, seed: 13, ..Default::default() };
    let rankings = data.join("rankings.mmr");
    let rankings_blob = data.join("rankings_blob.mmr");
    gen_rankings(&rspec, &rankings)?;
    gen_rankings_blob(&rspec, &rankings_blob)?;

    let dates: Vec<i64> = RecordFile::open(&visits)?
        .all()?
        .iter()
        .map(|r| r[2].as_int().expect("visitDate is numeric"))
        .collect();
    let (date_lo, date_hi) = date_window(&dates, 0.00095);
    let params = ModelParams { date_lo, date_hi, ..Default::default() };
    let models = bench_models(&params);
    let matrix = recall_matrix(&models)?;

    let mut benchmarks = Vec::new();
    for m in &models {
        let input = match m.dataset {
            Dataset::Rankings => &rankings,
            Dataset::RankingsBlob => &rankings_blob,
            Dataset::UserVisits => &visits,
            Dataset::Documents => &docs,
        };
        let row = run_model(m, input, &workdir.join(m.id)).unwrap_or_else(|e| BenchRow {
            bench: m.id.into(),
            title: m.title.into(),
            records: 0,
            input_bytes: 0,
            detected: vec![],
            active: vec![],
            index_bytes: 0,
            unoptimized: ExecutionStats::default(),
            optimized: ExecutionStats::default(),
            outputs_equal: false,
            error: Some(e.to_string()),
        });
        benchmarks.push(row);
    }
    Ok(BenchReport {
        scale,
        matrix_matches: matrix_matches(&matrix),
        matrix,
        benchmarks,
        wall_millis: started.elapsed().as_millis() as u64,
    })
}

fn kinds(ks: &[OptKind]) -> String {
    if ks.is_empty() {
        "-".into()
    } else {
        ks.iter().map(|k| k.name()).collect::<Vec<_>>().join(",")
    }
}

impl BenchReport {
    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "detection matrix ({:?} scale)", self.scale);
        let _ = writeln!(out, "{:<6} {:<8} {:<8} {:<8}", "bench", "select", "project", "delta");
        for r in &self.matrix {
            let _ = writeln!(out, "{:<6} {:<8} {:<8} {:<8}", r.bench, r.select.short(), r.project.short(), r.delta.short());
        }
        let _ = writeln!(out, "matches expected pattern: {}", if self.matrix_matches { "yes" } else { "NO" });
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<6} {:<16} {:<26} {:<16} {:>9} {:>9} {:>12} {:>12} {:>11} {:>8} {:>8} {:<5}",
            "bench", "title", "detected", "active", "records", "scanned", "bytes raw", "bytes opt", "index", "ms raw", "ms opt", "equal"
        );
        for b in &self.benchmarks {
            if let Some(e) = &b.error {
                let _ = writeln!(out, "{:<6} {:<16} error: {e}", b.bench, b.title);
                continue;
            }
            let _ = writeln!(
                out,
                "{:<6} {:<16} {:<26} {:<16} {:>9} {:>9} {:>12} {:>12} {:>11} {:>8} {:>8} {:<5}",
                b.bench,
                b.title,
                kinds(&b.detected),
                kinds(&b.active),
                b.records,
                b.optimized.records_scanned,
                b.unoptimized.bytes_read,
                b.optimized.bytes_read,
                b.index_bytes,
                b.unoptimized.wall_millis,
                b.optimized.wall_millis,
                b.outputs_equal
            );
        }
        let _ = writeln!(out, "total {} ms", self.wall_millis);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn models_reproduce_the_matrix() {
        let rows = recall_matrix(&bench_models(&ModelParams::default())).unwrap();
        assert!(matrix_matches(&rows), "{rows:?}");
    }

    #[test]
    fn date_window_respects_budget() {
        let dates: Vec<i64> = (0..10_000).map(|i| i / 10).collect();
        let (lo, hi) = date_window(&dates, 0.00095);
        assert_eq!((lo, hi), (500, 500));
        let (lo, hi) = date_window(&dates, 0.0035);
        assert_eq!((lo, hi), (500, 502));
        assert_eq!(date_window(&[], 0.5), (0, 0));
    }
}
