//! Shared fixtures for the criterion benchmarks in `benches/`.

use std::path::{Path, PathBuf};

use minimap_core::workload::{self, UserVisitsGenSpec, WebPageGenSpec};
use minimap_core::{analyze, run_index_gen, AnalyzeOptions, Catalog, TypedJob};

/// Generated inputs living in a temporary directory for the whole run.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub webpages: PathBuf,
    pub uservisits: PathBuf,
}

impl Fixture {
    pub fn new(pages: u64, visits: u64) -> Self {
        let dir = tempfile::tempdir().expect("temp dir");
        let webpages = dir.path().join("webpages.mmr");
        workload::gen_webpages(&WebPageGenSpec { n: pages, seed: 1, ..Default::default() }, &webpages)
            .expect("generate webpages");
        let uservisits = dir.path().join("uservisits.mmr");
        let pool = workload::url_pool_from(&webpages).expect("url pool");
        workload::gen_uservisits(&UserVisitsGenSpec { n: visits, seed: 2, ..Default::default() }, &pool, &uservisits)
            .expect("generate uservisits");
        Fixture { dir, webpages, uservisits }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// Build the analyzer's `spec` index for `job` over `input` into a fresh catalog under `dir`.
pub fn indexed(job: &TypedJob, spec: &str, input: &Path, dir: &Path) -> Catalog {
    let analysis = analyze(job, AnalyzeOptions::default());
    let spec = analysis.spec(spec).unwrap_or_else(|| panic!("no {spec} index proposed"));
    let mut catalog = Catalog::load(&dir.join("catalog.jsonl")).expect("catalog");
    run_index_gen(spec, input, &dir.join("idx"), &mut catalog).expect("index build");
    catalog
}
