//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::ops::Bound;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use minimap_core::analysis::MapAnalysis;
use minimap_core::detect::find_select;
use minimap_core::engine::interp::{run_map, TaskState};
use minimap_core::lang::load_job;
use minimap_core::storage::btree::{BTreeReader, BTreeWriter, ByteRange, DEFAULT_PAGE_SIZE};
use minimap_core::storage::colgroup::ColumnGroupFile;
use minimap_core::storage::delta;
use minimap_core::storage::layout::{Codec, Layout};
use minimap_core::storage::record::{read_records, write_records, RecordFile};
use minimap_core::workload::{
    self, bench_models, date_window, gen_rankings_blob, gen_uservisits, gen_webpages, random_job, random_records,
    rand_schema, url_pool, verify_plans, Cell, ModelParams, RandJobOptions, RankingsGenSpec, Scale,
    UserVisitsGenSpec, WebPageGenSpec,
};
use minimap_core::{
    analyze, plan, run_index_gen, run_job, AnalyzeOptions, Catalog, ExecutionDescriptor, InputId, OptKind, Record,
    ScalarType, Schema, Value,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const BENCH_TINY_SECONDS: f64 = 10.0;
const SAFETY_RANDOM_PAIRS: u64 = 100;
const SAFETY_MAX_RECORDS: usize = 10_000;
const SAFETY_SECONDS: f64 = 300.0;
const DNF_BODIES: usize = 500;
const DNF_RECORDS: usize = 100;
const SCAN_FRACTION_TOL: f64 = 0.01;
const B1_MAX_SCAN_FRACTION: f64 = 0.0005;
const PROJECTION_RATIO: (f64, f64) = (0.004, 0.012);
const DELTA_MAX_RATIO: f64 = 0.60;
const DICT_MAX_RATIO: f64 = 0.70;
const BTREE_RECORDS: usize = 100_000;
const BTREE_RANGE_SETS: usize = 100;

type Res = Result<(bool, String), Box<dyn std::error::Error>>;

fn verdict(pass: bool, detail: impl Into<String>) -> Res {
    Ok((pass, detail.into()))
}

fn analysis(src: &str, safe_mode: bool) -> Result<(minimap_core::TypedJob, minimap_core::Analysis), Box<dyn std::error::Error>> {
    let job = load_job(src)?;
    let a = analyze(&job, AnalyzeOptions { safe_mode });
    Ok((job, a))
}

fn c1_recall_matrix(dir: &Path) -> Res {
    let started = Instant::now();
    let report = workload::bench_suite(Scale::Tiny, &dir.join("bench"))?;
    let secs = started.elapsed().as_secs_f64();
    let cells: Vec<Cell> = report.matrix.iter().flat_map(|r| [r.select, r.project, r.delta]).collect();
    let count = |c: Cell| cells.iter().filter(|&&x| x == c).count();
    let counts = (count(Cell::Detected), count(Cell::Undetected), count(Cell::NotPresent));
    let rows_ok = report.benchmarks.iter().all(|b| b.error.is_none() && b.outputs_equal);
    verdict(
        report.matrix_matches && counts == (5, 3, 4) && secs < BENCH_TINY_SECONDS && rows_ok,
        format!("D/U/NP = {}/{}/{}, pattern match {}, all runs equal {rows_ok}, {secs:.2}s", counts.0, counts.1, counts.2, report.matrix_matches),
    )
}

fn c2_safety(dir: &Path) -> Res {
    let started = Instant::now();
    let data = dir.join("safety");
    std::fs::create_dir_all(&data)?;

    // the four benchmark models on small instances of their datasets
    let docs = data.join("docs.mmr");
    workload::gen_documents(&WebPageGenSpec { n: 500, seed: 21, ..Default::default() }, &docs)?;
    let pool = workload::url_pool_from(&docs)?;
    let visits = data.join("visits.mmr");
    gen_uservisits(&UserVisitsGenSpec { n: 10_000, seed: 22, ..Default::default() }, &pool, &visits)?;
    let rspec = RankingsGenSpec { n: 10_000, rank_hi: 1000, pool: 500, seed: 23 };
    let rankings = data.join("rankings.mmr");
    let blob = data.join("rankings_blob.mmr");
    workload::gen_rankings(&rspec, &rankings)?;
    gen_rankings_blob(&rspec, &blob)?;
    let dates: Vec<i64> = RecordFile::open(&visits)?.all()?.iter().map(|r| r[2].as_int().unwrap()).collect();
    let (date_lo, date_hi) = date_window(&dates, 0.01);
    let params = ModelParams { rank_threshold: 990, date_lo, date_hi, url_bound: "http://www.example0100".into() };

    let mut plans = 0;
    let mut bad = Vec::new();
    for m in bench_models(&params) {
        for (tag, src) in [("job", &m.job), ("sibling", &m.sibling)] {
            let job = load_job(src)?;
            let input = match job.schema().name.as_str() {
                "Rankings" => &rankings,
                "RankingsBlob" => &blob,
                "UserVisits" => &visits,
                _ => &docs,
            };
            let v = verify_plans(&job, input, &data.join(format!("{}-{tag}", m.id)), 4)?;
            for c in v.checks {
                plans += 1;
                if !c.equal {
                    bad.push(format!("{} {tag} spec {}", m.id, c.spec));
                }
            }
        }
    }

    let mut pairs = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5afe);
    for seed in 0..SAFETY_RANDOM_PAIRS {
        let opts = match seed % 3 {
            0 => RandJobOptions::default(),
            1 => RandJobOptions { logs: true, ..Default::default() },
            _ => RandJobOptions::all(),
        };
        let job = load_job(&random_job(seed, opts))?;
        let n = rng.random_range(1..=SAFETY_MAX_RECORDS / 5);
        let input = data.join(format!("rand{seed}.mmr"));
        write_records(&input, &rand_schema(), &random_records(seed, n))?;
        let v = verify_plans(&job, &input, &data.join(format!("rand{seed}")), 3)?;
        pairs += 1;
        for c in v.checks {
            plans += 1;
            if !c.equal {
                bad.push(format!("random seed {seed} spec {}", c.spec));
            }
        }
        std::fs::remove_dir_all(data.join(format!("rand{seed}")))?;
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        bad.is_empty() && pairs >= SAFETY_RANDOM_PAIRS && secs < SAFETY_SECONDS,
        format!("4 models + siblings, {pairs} random pairs, {plans} plans, {} mismatches {bad:?}, {secs:.1}s", bad.len()),
    )
}

fn c3_dnf_oracle() -> Res {
    let schema = rand_schema();
    let (mut claimed, mut refused, mut checked) = (0usize, 0usize, 0usize);
    let mut failures = Vec::new();
    let mut seed = 10_000u64;
    while claimed < DNF_BODIES {
        seed += 1;
        let opts = match seed % 4 {
            0 => RandJobOptions { logs: true, ..Default::default() },
            1 => RandJobOptions { stateful: true, ..Default::default() },
            _ => RandJobOptions::default(),
        };
        let job = load_job(&random_job(seed, opts))?;
        let Ok(dnf) = find_select(&MapAnalysis::new(&job), false) else {
            refused += 1;
            continue;
        };
        claimed += 1;
        for rec in random_records(seed, DNF_RECORDS) {
            let rec = Arc::new(rec);
            let predicted = dnf.eval(&schema, &rec)?;
            let mut out = Vec::new();
            run_map(&job.job, rec.clone(), &mut TaskState::new(&job.job), &mut out)?;
            checked += 1;
            if predicted != !out.is_empty() && failures.len() < 3 {
                failures.push(format!("seed {seed}: dnf {predicted}, emitted {}", out.len()));
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!("{claimed} bodies with a DNF ({refused} refused), {checked} record checks, failures {failures:?}"),
    )
}

/// Build every index the analyzer proposes for `src` (or only `only`) into one catalog.
fn build(
    src: &str,
    input: &Path,
    dir: &Path,
    only: Option<&str>,
) -> Result<(minimap_core::TypedJob, minimap_core::Analysis, Catalog), Box<dyn std::error::Error>> {
    let (job, a) = analysis(src, false)?;
    let mut cat = Catalog::load(&dir.join("catalog.jsonl"))?;
    for spec in &a.index_specs {
        if only.is_none_or(|o| o == spec.name) {
            run_index_gen(spec, input, &dir.join("idx"), &mut cat)?;
        }
    }
    Ok((job, a, cat))
}

fn c4_selection_sweep(dir: &Path) -> Res {
    let dir = dir.join("sweep");
    std::fs::create_dir_all(&dir)?;
    let input = dir.join("webpages.mmr");
    let n = 20_000u64;
    gen_webpages(&WebPageGenSpec { n, content_size: 200, rank_lo: 1, rank_hi: 100, seed: 31, ..Default::default() }, &input)?;
    let ranks: Vec<i64> = RecordFile::open(&input)?.all()?.iter().map(|r| r[1].as_int().unwrap()).collect();
    let id = InputId::of(&input)?;

    let mut cat = None;
    let mut lines = Vec::new();
    let mut pass = true;
    let mut last_bytes = u64::MAX;
    for threshold in [40, 50, 60, 70, 80, 90] {
        let src = workload::rank_selection_job(threshold);
        let (job, a) = analysis(&src, false)?;
        let cat = match &mut cat {
            Some(c) => c,
            None => {
                let mut c = Catalog::load(&dir.join("catalog.jsonl"))?;
                run_index_gen(a.spec("combined").ok_or("no combined spec")?, &input, &dir.join("idx"), &mut c)?;
                cat.insert(c)
            }
        };
        let exec = plan(&a.descriptors, cat, &id, job.schema())?;
        let run = run_job(&job, &exec, &dir.join("out"), 4)?;
        let selectivity = ranks.iter().filter(|&&r| r > threshold as i64).count() as f64 / n as f64;
        let scanned = run.stats.records_scanned as f64 / n as f64;
        let ok = exec.active.contains(&OptKind::Select)
            && (scanned - selectivity).abs() <= SCAN_FRACTION_TOL
            && run.stats.bytes_read < last_bytes;
        pass &= ok;
        last_bytes = run.stats.bytes_read;
        lines.push(format!("{:.1}%:{:.4}/{}B", selectivity * 100.0, scanned, run.stats.bytes_read));
    }
    verdict(pass, format!("selectivity:scanned/bytesRead {}", lines.join(" ")))
}

fn c5_b1_selectivity(dir: &Path) -> Res {
    let dir = dir.join("b1");
    std::fs::create_dir_all(&dir)?;
    let input = dir.join("rankings_blob.mmr");
    let n = 100_000u64;
    gen_rankings_blob(&RankingsGenSpec { n, rank_hi: 10_000, pool: 1000, seed: 41 }, &input)?;
    let m = workload::b1_selection(&ModelParams::default());
    let (job, a, cat) = build(&m.job, &input, &dir, Some("combined"))?;
    let exec = plan(&a.descriptors, &cat, &InputId::of(&input)?, job.schema())?;
    let run = run_job(&job, &exec, &dir.join("out"), 4)?;
    let frac = run.stats.records_scanned as f64 / n as f64;
    verdict(
        exec.active.contains(&OptKind::Select) && frac <= B1_MAX_SCAN_FRACTION,
        format!("scanned {} of {n} = {frac:.5} (limit {B1_MAX_SCAN_FRACTION})", run.stats.records_scanned),
    )
}

fn c6_projection(dir: &Path) -> Res {
    let dir = dir.join("project");
    std::fs::create_dir_all(&dir)?;
    let input = dir.join("webpages.mmr");
    gen_webpages(&WebPageGenSpec { n: 1000, content_size: 10_240, seed: 51, ..Default::default() }, &input)?;
    let (job, a, cat) = build(&workload::rank_selection_job(50), &input, &dir, Some("project"))?;
    let original = std::fs::metadata(&input)?.len();
    let entry = &cat.entries[0];
    let ratio = entry.size_bytes as f64 / original as f64;
    let exec = plan(&a.descriptors, &cat, &InputId::of(&input)?, job.schema())?;
    run_job(&job, &exec, &dir.join("opt"), 4)?;
    run_job(&job, &ExecutionDescriptor::raw(input.clone()), &dir.join("raw"), 4)?;
    let equal = std::fs::read(dir.join("opt"))? == std::fs::read(dir.join("raw"))?;
    verdict(
        (PROJECTION_RATIO.0..=PROJECTION_RATIO.1).contains(&ratio) && exec.active.contains(&OptKind::Project) && equal,
        format!("index {} / input {original} = {ratio:.5}, outputs equal {equal}", entry.size_bytes),
    )
}

fn uservisits(dir: &Path) -> Result<std::path::PathBuf, Box<dyn std::error::Error>> {
    let input = dir.join("uservisits.mmr");
    if !input.exists() {
        gen_uservisits(&UserVisitsGenSpec { n: 50_000, seed: 61, ..Default::default() }, &url_pool(2000), &input)?;
    }
    Ok(input)
}

fn c7_delta(dir: &Path) -> Res {
    let dir = dir.join("delta");
    std::fs::create_dir_all(&dir)?;
    let input = uservisits(&dir)?;
    let (_, a, cat) = build(&workload::numeric_summary_job(), &input, &dir, Some("combined"))?;
    if !a.kinds().contains(&OptKind::Delta) {
        return verdict(false, "no delta descriptor for the numeric job");
    }
    let file = ColumnGroupFile::open(&cat.entries[0].index_path)?;
    let layout = &file.layout;
    let (mut coded, mut fixed) = (0u64, 0u64);
    for g in 0..file.group_count() {
        let sizes = file.segment_sizes(g)?;
        for (i, (&f, &codec)) in layout.retained.iter().zip(&layout.codecs).enumerate() {
            if codec == Codec::Delta {
                coded += sizes[i];
                fixed += match layout.schema.fields[f].ty {
                    ScalarType::I64 => 8,
                    _ => 4,
                } * (file.rows.min((g as u64 + 1) * file.group_rows as u64) - g as u64 * file.group_rows as u64);
            }
        }
    }
    let ratio = coded as f64 / fixed as f64;

    // roundtrip: every numeric column through the codec, and the index file against the input
    let (schema, records) = read_records(&input)?;
    let mut roundtrip = true;
    for (i, f) in schema.fields.iter().enumerate() {
        if matches!(f.ty, ScalarType::I32 | ScalarType::I64) {
            let col: Vec<i64> = records.iter().map(|r| r[i].as_int().unwrap()).collect();
            let mut buf = Vec::new();
            delta::encode(&col, &mut buf);
            roundtrip &= delta::decode(&buf, col.len())? == col;
        }
    }
    let mut decoded = Vec::new();
    for g in 0..file.group_count() {
        decoded.extend(file.read_group(g)?);
    }
    roundtrip &= decoded.len() == records.len()
        && decoded.iter().zip(&records).all(|(d, r)| layout.retained.iter().all(|&f| d[f] == r[f]));
    verdict(
        ratio <= DELTA_MAX_RATIO && roundtrip,
        format!("delta segments {coded}B / fixed {fixed}B = {ratio:.3}, roundtrip {roundtrip}"),
    )
}

fn c8_direct_op(dir: &Path) -> Res {
    let dir = dir.join("directop");
    std::fs::create_dir_all(&dir)?;
    let input = uservisits(&dir)?;
    let src = workload::duration_by_url_job();
    let (job, a, cat) = build(&src, &input, &dir, Some("combined"))?;
    let exec = plan(&a.descriptors, &cat, &InputId::of(&input)?, job.schema())?;
    if !exec.active.contains(&OptKind::DirectOp) {
        return verdict(false, format!("direct operation not planned: {:?}", exec.active));
    }
    run_job(&job, &exec, &dir.join("opt"), 4)?;
    run_job(&job, &ExecutionDescriptor::raw(input.clone()), &dir.join("raw"), 4)?;
    let sums = |p: &Path| -> Result<BTreeMap<String, i64>, Box<dyn std::error::Error>> {
        let (_, rows) = read_records(p)?;
        Ok(rows.into_iter().map(|r| (r[0].as_str().unwrap().to_string(), r[1].as_int().unwrap())).collect())
    };
    let equal = sums(&dir.join("opt"))? == sums(&dir.join("raw"))?;

    let entry = &cat.entries[0];
    let file = ColumnGroupFile::open(&entry.index_path)?;
    let schema = &file.layout.schema;
    let url = schema.index_of("destURL").ok_or("no destURL")?;
    let pos = file.layout.retained.iter().position(|&f| f == url).ok_or("destURL not retained")?;
    let mut token_bytes = 0;
    for g in 0..file.group_count() {
        token_bytes += file.segment_sizes(g)?[pos];
    }
    let dict_bytes = std::fs::metadata(&entry.dictionaries["destURL"])?.len();
    let (_, records) = read_records(&input)?;
    let raw: u64 = records.iter().map(|r| r[url].as_str().unwrap().len() as u64).sum();
    let ratio = (token_bytes + dict_bytes) as f64 / raw as f64;
    verdict(
        equal && ratio <= DICT_MAX_RATIO,
        format!(
            "sums equal {equal}; tokens {token_bytes}B + dictionary {dict_bytes}B / raw urls {raw}B = {ratio:.3}"
        ),
    )
}

fn c9_btree(dir: &Path) -> Res {
    let schema = Schema::new("K", &[("k", ScalarType::I64), ("p", ScalarType::I32)]);
    let layout = Layout::plain(schema.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let mut records: Vec<Record> = (0..BTREE_RECORDS)
        .map(|i| vec![Value::I64(rng.random_range(-50_000..50_000)), Value::I32(i as i32)])
        .collect();
    records.sort_by_key(|r| r[0].as_int().unwrap());
    let path = dir.join("oracle.mmbt");
    let mut w = BTreeWriter::create(&path, layout.clone(), 0, DEFAULT_PAGE_SIZE)?;
    for r in &records {
        let mut row = Vec::new();
        layout.encode_row(r, &mut row)?;
        w.push(r[0].key_bytes(), row)?;
    }
    w.finish()?;
    let mut reader = BTreeReader::open(&path)?;

    let mut scan = |ranges: &[ByteRange]| -> Result<Vec<(i64, i64)>, Box<dyn std::error::Error>> {
        let mut got = Vec::new();
        reader.scan(ranges, |_, row, at| {
            let r = layout.decode_row(row, at)?;
            got.push((r[0].as_int().unwrap(), r[1].as_int().unwrap()));
            Ok(())
        })?;
        got.sort();
        Ok(got)
    };
    let all: Vec<(i64, i64)> = {
        let mut v: Vec<_> = records.iter().map(|r| (r[0].as_int().unwrap(), r[1].as_int().unwrap())).collect();
        v.sort();
        v
    };
    let full_ok = scan(&[ByteRange::full()])? == all;

    let bound = |v: i64, inclusive: bool| {
        let k = Value::I64(v).key_bytes();
        if inclusive { Bound::Included(k) } else { Bound::Excluded(k) }
    };
    let mut failures = 0;
    for _ in 0..BTREE_RANGE_SETS {
        // 2m distinct increasing cut points pair up into disjoint intervals
        let m = rng.random_range(1..=5);
        let mut cuts: Vec<i64> = (0..2 * m).map(|_| rng.random_range(-60_000..60_000)).collect();
        cuts.sort();
        cuts.dedup();
        if cuts.len() % 2 == 1 {
            cuts.pop();
        }
        let mut ranges = Vec::new();
        let mut oracle: Vec<(Bound<i64>, Bound<i64>)> = Vec::new();
        for (j, pair) in cuts.chunks(2).enumerate() {
            let (li, hi_inc) = (rng.random_bool(0.5), rng.random_bool(0.5));
            let open_lo = j == 0 && rng.random_ratio(1, 5);
            let open_hi = j == cuts.len() / 2 - 1 && rng.random_ratio(1, 5);
            let lo = if open_lo { Bound::Unbounded } else { bound(pair[0], li) };
            let hi = if open_hi { Bound::Unbounded } else { bound(pair[1], hi_inc) };
            ranges.push(ByteRange { lo, hi });
            let lo = if open_lo { Bound::Unbounded } else if li { Bound::Included(pair[0]) } else { Bound::Excluded(pair[0]) };
            let hi = if open_hi { Bound::Unbounded } else if hi_inc { Bound::Included(pair[1]) } else { Bound::Excluded(pair[1]) };
            oracle.push((lo, hi));
        }
        let expect: Vec<(i64, i64)> = all
            .iter()
            .copied()
            .filter(|(k, _)| oracle.iter().any(|r| std::ops::RangeBounds::contains(r, k)))
            .collect();
        if scan(&ranges)? != expect {
            failures += 1;
        }
    }
    verdict(
        full_ok && failures == 0,
        format!("{BTREE_RECORDS} records, full scan multiset {full_ok}, {failures}/{BTREE_RANGE_SETS} range sets disagree"),
    )
}

fn c10_conflict(dir: &Path) -> Res {
    let mut details = Vec::new();
    let mut pass = true;
    let data = dir.join("conflict");
    std::fs::create_dir_all(&data)?;
    let pages = data.join("webpages.mmr");
    gen_webpages(&WebPageGenSpec { n: 2000, content_size: 100, seed: 101, ..Default::default() }, &pages)?;
    let visits = uservisits(&data)?;
    let b3 = workload::b3_join(&ModelParams { date_lo: 10_960, date_hi: 10_961, ..Default::default() }).job;
    for (name, src, input) in [("rank filter", workload::rank_selection_job(50), &pages), ("B3", b3, &visits)] {
        let dir = data.join(name.replace(' ', "_"));
        let (job, a, cat) = build(&src, input, &dir, None)?;
        let both = a.kinds().contains(&OptKind::Select) && a.kinds().contains(&OptKind::Delta);
        let exec = plan(&a.descriptors, &cat, &InputId::of(input)?, job.schema())?;
        let ok = both && exec.active.contains(&OptKind::Select) && !exec.active.contains(&OptKind::Delta);
        pass &= ok;
        details.push(format!("{name}: {} indexes, active {:?}", cat.entries.len(), exec.active));
    }
    verdict(pass, details.join("; "))
}

fn c11_refusal(dir: &Path) -> Res {
    let (_, fig) = analysis(&workload::counter_job(), false)?;
    let (_, table) = analysis(&workload::b4_udf(&ModelParams::default()).job, false)?;
    let (_, logged) = analysis(&workload::logging_filter_job(), false)?;
    let (job, safe) = analysis(&workload::logging_filter_job(), true)?;

    // even with a usable B+Tree on rank, safe mode must not plan a range scan
    let data = dir.join("safe");
    std::fs::create_dir_all(&data)?;
    let pages = data.join("webpages.mmr");
    gen_webpages(&WebPageGenSpec { n: 500, content_size: 50, seed: 111, ..Default::default() }, &pages)?;
    let mut cat = Catalog::load(&data.join("catalog.jsonl"))?;
    run_index_gen(logged.spec("select").ok_or("no select spec")?, &pages, &data.join("idx"), &mut cat)?;
    let exec = plan(&safe.descriptors, &cat, &InputId::of(&pages)?, job.schema())?;

    let pass = fig.descriptors.is_empty()
        && table.descriptors.is_empty()
        && logged.kinds().contains(&OptKind::Select)
        && !safe.kinds().contains(&OptKind::Select)
        && !exec.active.contains(&OptKind::Select);
    verdict(
        pass,
        format!(
            "counter job {} descriptors, table job {}, logged filter {:?} vs safe mode {:?}, safe plan {:?}",
            fig.descriptors.len(),
            table.descriptors.len(),
            logged.kinds(),
            safe.kinds(),
            exec.active
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path();
    type Check = fn(&Path) -> Res;
    let checks: [(&str, Check); 11] = [
        ("recall matrix", c1_recall_matrix),
        ("plan output equivalence", c2_safety),
        ("select DNF oracle", |_| c3_dnf_oracle()),
        ("selection scan fraction", c4_selection_sweep),
        ("0.02% selection scan", c5_b1_selectivity),
        ("projection size ratio", c6_projection),
        ("delta compression", c7_delta),
        ("direct operation", c8_direct_op),
        ("b+tree oracle", c9_btree),
        ("select over delta", c10_conflict),
        ("refusal and safe mode", c11_refusal),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(|| check(dir).map_err(|e| e.to_string()));
        let (pass, detail) = match outcome {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            started.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
