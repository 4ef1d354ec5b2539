use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Bound;

use minimap_core::analysis::{DefSite, MapAnalysis};
use minimap_core::detect::load_descriptors;
use minimap_core::lang::{load_job, Stmt, StmtId, StmtKind};
use minimap_core::storage::btree::{BTreeReader, BTreeWriter, ByteRange, DEFAULT_PAGE_SIZE};
use minimap_core::storage::delta;
use minimap_core::storage::dict::Dictionary;
use minimap_core::storage::layout::Layout;
use minimap_core::workload::{self, random_job, url_pool, ModelParams, RandJobOptions, Zipf};
use minimap_core::{analyze, plan, run_index_gen, run_job, AnalyzeOptions, Catalog, ExecutionDescriptor, InputId};
use minimap_core::{ScalarType, Schema, Value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type State = BTreeMap<String, DefSite>;

/// Push every path's state through `body`, recording the states seen just
/// before each statement.
fn walk(body: &[Stmt], mut states: BTreeSet<State>, seen: &mut HashMap<StmtId, BTreeSet<State>>) -> BTreeSet<State> {
    for s in body {
        seen.entry(s.id).or_default().extend(states.iter().cloned());
        match &s.kind {
            StmtKind::Let { name, .. } | StmtKind::Assign { name, .. } => {
                states = states
                    .into_iter()
                    .map(|mut st| {
                        st.insert(name.clone(), DefSite::Stmt(s.id));
                        st
                    })
                    .collect();
            }
            StmtKind::If { then_body, else_body, .. } => {
                let mut out = walk(then_body, states.clone(), seen);
                out.extend(walk(else_body, states, seen));
                states = out;
            }
            StmtKind::While { .. } => panic!("oracle handles acyclic bodies only"),
            _ => {}
        }
    }
    states
}

fn used_vars(s: &Stmt) -> BTreeSet<String> {
    s.own_exprs().into_iter().flat_map(|e| e.variables()).map(str::to_string).collect()
}

#[test]
fn reaching_definitions_match_path_oracle() {
    let opts = RandJobOptions { stateful: true, logs: true, loops: false };
    let mut merges = 0;
    for seed in 0..2000 {
        let job = load_job(&random_job(seed, opts)).unwrap();
        let a = MapAnalysis::new(&job);
        let map = &job.job.map;
        let mut entry = State::new();
        for name in [&map.key_param, &map.value_param].into_iter().chain(job.job.members.iter().map(|m| &m.name)) {
            entry.insert(name.clone(), DefSite::Entry(name.clone()));
        }
        let mut seen = HashMap::new();
        walk(&map.body, BTreeSet::from([entry]), &mut seen);
        for (id, states) in &seen {
            for var in used_vars(a.cfg.stmt(*id)) {
                let expect: BTreeSet<DefSite> = states.iter().filter_map(|st| st.get(&var).cloned()).collect();
                let got: BTreeSet<DefSite> = a.rd.reaching(*id, &var).into_iter().map(|d| d.site.clone()).collect();
                assert_eq!(got, expect, "seed {seed} stmt {id} var {var}");
                merges += usize::from(expect.len() > 1);
            }
        }
    }
    assert!(merges > 100, "only {merges} uses with several reaching definitions");
}

#[test]
fn selection_runs_scan_less_and_agree() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("wp.mmr");
    workload::gen_webpages(
        &workload::WebPageGenSpec { n: 4000, content_size: 64, rank_lo: 0, rank_hi: 3, seed: 7, ..Default::default() },
        &input,
    )
    .unwrap();
    let src = workload::rank_selection_job(1);
    let job = load_job(&src).unwrap();
    let v = workload::verify_plans(&job, &input, dir.path(), 4).unwrap();
    let select = v.checks.iter().find(|c| c.spec == "select").unwrap();
    assert!(select.equal);
    assert!(select.stats.records_scanned < v.full_scan.records_scanned);
    // only ranks 2 and 3 reach the reduce
    assert_eq!(select.stats.records_scanned, select.stats.pairs_emitted);
}

#[test]
fn udf_benchmark_runs_identically() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("docs.mmr");
    workload::gen_documents(&workload::WebPageGenSpec { n: 400, seed: 3, ..Default::default() }, &docs).unwrap();
    let job = load_job(&workload::b4_udf(&ModelParams::default()).job).unwrap();
    let a = analyze(&job, AnalyzeOptions::default());
    assert!(a.descriptors.is_empty() && a.index_specs.is_empty());
    let id = InputId::of(&docs).unwrap();
    let exec = plan(&a.descriptors, &Catalog::load(&dir.path().join("c.jsonl")).unwrap(), &id, job.schema()).unwrap();
    let raw = run_job(&job, &ExecutionDescriptor::raw(id.path.clone()), &dir.path().join("a"), 2).unwrap();
    let opt = run_job(&job, &exec, &dir.path().join("b"), 2).unwrap();
    assert_eq!(raw.stats.records_scanned, opt.stats.records_scanned);
    assert_eq!(raw.stats.bytes_read, opt.stats.bytes_read);
    assert_eq!(raw.stats.pairs_emitted, opt.stats.pairs_emitted);
}

#[test]
fn hand_written_select_descriptor_plans_like_the_analyzer() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("wp.mmr");
    workload::gen_webpages(&workload::WebPageGenSpec { n: 1000, content_size: 32, seed: 5, ..Default::default() }, &input)
        .unwrap();
    let job = load_job(&workload::rank_selection_job(70)).unwrap();
    let a = analyze(&job, AnalyzeOptions::default());
    let mut cat = Catalog::load(&dir.path().join("c.jsonl")).unwrap();
    run_index_gen(a.spec("select").unwrap(), &input, &dir.path().join("idx"), &mut cat).unwrap();
    let id = InputId::of(&input).unwrap();
    let derived = plan(&a.descriptors, &cat, &id, job.schema()).unwrap();
    let hand = load_descriptors(
        r#"[{"kind":"select","dnf":{"disjuncts":[[{"pred":"v.rank > 70","positive":true}]]},"candidates":["rank"]}]"#,
        job.schema(),
    )
    .unwrap();
    let injected = plan(&hand, &cat, &id, job.schema()).unwrap();
    assert_eq!(injected.source, derived.source);
    assert_eq!(injected.ranges, derived.ranges);
    assert_eq!(injected.active, derived.active);
}

#[test]
fn duplicate_keys_come_back_from_point_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let schema = Schema::new("U", &[("url", ScalarType::Str), ("i", ScalarType::I32)]);
    let layout = Layout::plain(schema);
    let pool = url_pool(300);
    let z = Zipf::new(pool.len() as u64, 0.99).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut urls: Vec<String> = (0..20_000).map(|_| pool[z.sample(&mut rng) as usize].clone()).collect();
    urls.sort();
    let path = dir.path().join("u.mmbt");
    let mut w = BTreeWriter::create(&path, layout.clone(), 0, DEFAULT_PAGE_SIZE).unwrap();
    for (i, u) in urls.iter().enumerate() {
        let mut row = Vec::new();
        layout.encode_row(&[Value::Str(u.clone()), Value::I32(i as i32)], &mut row).unwrap();
        w.push(Value::Str(u.clone()).key_bytes(), row).unwrap();
    }
    w.finish().unwrap();
    let mut r = BTreeReader::open(&path).unwrap();
    for probe in [&pool[0], &pool[1], &pool[150], &pool[299]] {
        let expect = urls.iter().filter(|u| *u == probe).count() as u64;
        let k = Value::Str(probe.clone()).key_bytes();
        let range = ByteRange { lo: Bound::Included(k.clone()), hi: Bound::Included(k) };
        let stats = r.scan(&[range], |_, _, _| Ok(())).unwrap();
        assert_eq!(stats.records, expect, "{probe}");
    }
    assert!(urls.iter().filter(|u| **u == pool[0]).count() > 1000);
}

/// Reference coder written from the format description, independent of the storage module.
fn reference_zigzag_varints(values: &[i64]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut prev = 0i64;
    for &v in values {
        let d = v.wrapping_sub(prev);
        prev = v;
        let mut z = ((d << 1) ^ (d >> 63)) as u64;
        loop {
            let b = (z & 0x7f) as u8;
            z >>= 7;
            if z == 0 {
                out.push(b);
                break;
            }
            out.push(b | 0x80);
        }
    }
    out
}

#[test]
fn delta_matches_reference_and_compresses_timestamps() {
    let mut buf = Vec::new();
    delta::encode(&[100, 101, 99, 99], &mut buf);
    assert_eq!(buf, reference_zigzag_varints(&[100, 101, 99, 99]));
    assert_eq!(buf, vec![200, 1, 2, 3, 0]);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut t = 1_300_000_000i64;
    let stamps: Vec<i64> = (0..50_000)
        .map(|_| {
            t += rand::Rng::random_range(&mut rng, 0..30);
            t
        })
        .collect();
    buf.clear();
    delta::encode(&stamps, &mut buf);
    assert_eq!(buf, reference_zigzag_varints(&stamps));
    assert!((buf.len() as f64) < 0.30 * (stamps.len() * 8) as f64, "{} bytes", buf.len());
    assert_eq!(delta::decode(&buf, stamps.len()).unwrap(), stamps);
}

#[test]
fn zipf_url_dictionary_is_compact() {
    let pool = url_pool(100_000);
    let z = Zipf::new(pool.len() as u64, 0.99).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let col: Vec<&str> = (0..1_000_000).map(|_| pool[z.sample(&mut rng) as usize].as_str()).collect();
    let d = Dictionary::build(col.iter().copied()).unwrap();
    let raw: usize = col.iter().map(|s| s.len()).sum();
    let encoded = col.len() * 4 + d.to_bytes().len();
    assert!(d.len() > 10_000);
    assert!((encoded as f64) <= 0.40 * raw as f64, "{encoded} of {raw}");
    for s in col.iter().take(1000) {
        assert_eq!(d.lookup(d.encode(s).unwrap()), Some(*s));
    }
}
