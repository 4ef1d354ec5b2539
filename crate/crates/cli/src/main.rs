use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use minimap_core::analysis::MapAnalysis;
use minimap_core::detect::load_descriptors;
use minimap_core::error::{PlanError, WorkloadError};
use minimap_core::lang::load_job;
use minimap_core::storage::catalog::VerifyStatus;
use minimap_core::workload::{self, RankingsGenSpec, Scale, UserVisitsGenSpec, WebPageGenSpec};
use minimap_core::{analyze, plan, run_index_gen, run_job, AnalyzeOptions, Catalog, Error, ExecutionDescriptor, InputId};
use serde_json::json;

#[derive(Parser)]
#[command(name = "minimap", version, about = "Analyze, index and run MiniMap map-reduce jobs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CatalogArg {
    /// Index catalog (JSON lines).
    #[arg(long, env = "MINIMAP_CATALOG", default_value = "minimap-catalog.jsonl")]
    catalog: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print optimization descriptors and index specs for a job.
    Analyze {
        job: PathBuf,
        /// Input file; only checked for a matching schema.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Treat log output as observable, which blocks filters around logging code
        #[arg(long)]
        safe_mode: bool,
        /// Print the map's control-flow graph (Graphviz) instead.
        #[arg(long)]
        dump_cfg: bool,
        /// Print the use-def DAG of every map emit instead.
        #[arg(long)]
        dump_usedef: bool,
    },
    /// Build one of the indexes the analyzer proposes.
    Index {
        job: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        catalog: CatalogArg,
        /// Which proposed spec to build.
        #[arg(long, default_value = "combined")]
        spec: String,
        /// Where index files go; defaults to `indexes/` beside the catalog.
        #[arg(long)]
        index_dir: Option<PathBuf>,
        /// Treat log output as observable, which blocks filters around logging code
        #[arg(long)]
        safe_mode: bool,
    },
    /// Plan and execute a job.
    Run {
        job: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        catalog: CatalogArg,
        /// Output record file; defaults to `<job>.out` in the current directory.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Full scan, ignoring the catalog.
        #[arg(long, conflicts_with = "descriptors")]
        no_opt: bool,
        /// Use these descriptors instead of running the analyzer.
        #[arg(long)]
        descriptors: Option<PathBuf>,
        /// Treat log output as observable, which blocks filters around logging code
        #[arg(long)]
        safe_mode: bool,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=1024))]
        reducers: u32,
        /// Print execution statistics after the run.
        #[arg(long, value_enum)]
        stats: Option<StatsFormat>,
        /// Print the chosen plan and exit without running.
        #[arg(long)]
        explain: bool,
    },
    /// Generate a synthetic dataset.
    Gen {
        #[command(subcommand)]
        what: GenCmd,
    },
    /// Run the benchmark suite.
    Bench {
        #[arg(long, default_value = "tiny")]
        scale: String,
        #[arg(long)]
        workdir: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Inspect the index catalog.
    Catalog {
        #[arg(value_enum)]
        action: CatalogAction,
        /// Catalog file; falls back to $MINIMAP_CATALOG.
        catalog: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum CatalogAction {
    List,
    Verify,
}

#[derive(Subcommand)]
enum GenCmd {
    Webpages {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 510)]
        content_size: usize,
        #[arg(long, default_value_t = 1)]
        rank_lo: i32,
        #[arg(long, default_value_t = 100)]
        rank_hi: i32,
        #[arg(long, default_value_t = 0.99)]
        zipf: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    Uservisits {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        out: PathBuf,
        /// WebPages (or Documents) file whose urls are the destURL pool.
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, default_value_t = 0.99)]
        zipf: f64,
        #[arg(long, default_value_t = 2)]
        seed: u64,
    },
    Rankings {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write the single-blob variant of the schema.
        #[arg(long)]
        blob: bool,
        #[arg(long, default_value_t = 10_000)]
        rank_hi: i32,
        #[arg(long, default_value_t = 1000)]
        pool: u64,
        #[arg(long, default_value_t = 3)]
        seed: u64,
    },
    Documents {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 510)]
        content_size: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// A request that cannot be served as asked.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() || cause.is::<WorkloadError>() {
            return 1;
        }
        if cause.is::<PlanError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Parse(_) | Error::Type(_) | Error::Workload(_) => 1,
                Error::Plan(_) => 2,
                Error::Storage(_) | Error::Job(_) => 3,
            };
        }
    }
    3
}

fn read_job(path: &Path) -> anyhow::Result<minimap_core::TypedJob> {
    let src = std::fs::read_to_string(path).map_err(|e| Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(load_job(&src).with_context(|| format!("in {}", path.display()))?)
}

fn check_input_schema(job: &minimap_core::TypedJob, input: &Path) -> anyhow::Result<()> {
    let f = minimap_core::storage::record::RecordFile::open(input).map_err(Error::from)?;
    if f.schema != *job.schema() {
        return Err(Error::from(PlanError::PlanMismatch(format!(
            "{} holds {} records, the job reads {}",
            input.display(),
            f.schema.name,
            job.schema().name
        )))
        .into());
    }
    Ok(())
}

fn print_json(v: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn catalog_path(arg: Option<PathBuf>) -> anyhow::Result<PathBuf> {
    arg.or_else(|| std::env::var_os("MINIMAP_CATALOG").map(PathBuf::from))
        .ok_or_else(|| Usage("no catalog given and MINIMAP_CATALOG is unset".into()).into())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Analyze { job, input, safe_mode, dump_cfg, dump_usedef } => {
            let job = read_job(&job)?;
            if let Some(input) = &input {
                check_input_schema(&job, input)?;
            }
            if dump_cfg || dump_usedef {
                let a = MapAnalysis::new(&job);
                if dump_cfg {
                    print!("{}", a.cfg.to_dot());
                }
                if dump_usedef {
                    for e in a.emits() {
                        println!("emit {e}:");
                        print!("{}", a.use_def(e).to_text(&a.cfg));
                    }
                }
                return Ok(());
            }
            let analysis = analyze(&job, AnalyzeOptions { safe_mode });
            print_json(&analysis)
        }
        Cmd::Index { job, input, catalog, spec, index_dir, safe_mode } => {
            let job = read_job(&job)?;
            check_input_schema(&job, &input)?;
            let analysis = analyze(&job, AnalyzeOptions { safe_mode });
            let Some(chosen) = analysis.spec(&spec) else {
                let names: Vec<&str> = analysis.index_specs.iter().map(|s| s.name.as_str()).collect();
                bail!(Usage(format!(
                    "no `{spec}` index is proposed for this job (available: {})",
                    if names.is_empty() { "none".to_string() } else { names.join(", ") }
                )));
            };
            let dir = index_dir.unwrap_or_else(|| {
                catalog.catalog.parent().unwrap_or(Path::new(".")).join("indexes")
            });
            let mut cat = Catalog::load(&catalog.catalog).map_err(Error::from)?;
            let entry = run_index_gen(chosen, &input, &dir, &mut cat)?;
            print_json(&entry)
        }
        Cmd::Run { job: job_path, input, catalog, output, no_opt, descriptors, safe_mode, reducers, stats, explain } => {
            let job = read_job(&job_path)?;
            let id = InputId::of(&input).map_err(Error::from)?;
            let exec = if no_opt {
                ExecutionDescriptor::raw(id.path.clone())
            } else {
                let descs = match &descriptors {
                    Some(p) => {
                        let text = std::fs::read_to_string(p)
                            .map_err(|e| Usage(format!("cannot read {}: {e}", p.display())))?;
                        load_descriptors(&text, job.schema()).map_err(Error::from)?
                    }
                    None => analyze(&job, AnalyzeOptions { safe_mode }).descriptors,
                };
                let cat = Catalog::load(&catalog.catalog).map_err(Error::from)?;
                plan(&descs, &cat, &id, job.schema()).map_err(Error::from)?
            };
            if explain {
                return print_json(&exec);
            }
            let output = output.unwrap_or_else(|| {
                let stem = job_path.file_stem().and_then(|s| s.to_str()).unwrap_or("job");
                PathBuf::from(format!("{stem}.out"))
            });
            let run = run_job(&job, &exec, &output, reducers as usize)?;
            for line in &run.log {
                eprintln!("log: {line}");
            }
            match stats {
                Some(StatsFormat::Json) => print_json(&json!({
                    "output": run.output,
                    "active": exec.active,
                    "stats": run.stats,
                }))?,
                Some(StatsFormat::Text) => {
                    let s = &run.stats;
                    println!("output          {}", run.output.display());
                    println!("active          {:?}", exec.active);
                    println!("bytesRead       {}", s.bytes_read);
                    println!("recordsScanned  {}", s.records_scanned);
                    println!("mapInvocations  {}", s.map_invocations);
                    println!("pairsEmitted    {}", s.pairs_emitted);
                    println!("shuffleBytes    {}", s.shuffle_bytes);
                    println!("reduceGroups    {}", s.reduce_groups);
                    println!("wallMillis      {}", s.wall_millis);
                }
                None => {}
            }
            Ok(())
        }
        Cmd::Gen { what } => {
            let (path, bytes) = match what {
                GenCmd::Webpages { n, out, content_size, rank_lo, rank_hi, zipf, seed } => {
                    let spec = WebPageGenSpec { n, zipf_s: zipf, content_size, rank_lo, rank_hi, seed };
                    let b = workload::gen_webpages(&spec, &out)?;
                    (out, b)
                }
                GenCmd::Uservisits { n, out, pool, zipf, seed } => {
                    let urls = workload::url_pool_from(&pool)?;
                    let spec = UserVisitsGenSpec { n, zipf_s: zipf, seed, ..Default::default() };
                    let b = workload::gen_uservisits(&spec, &urls, &out)?;
                    (out, b)
                }
                GenCmd::Rankings { n, out, blob, rank_hi, pool, seed } => {
                    let spec = RankingsGenSpec { n, rank_hi, pool, seed };
                    let b = if blob {
                        workload::gen_rankings_blob(&spec, &out)?
                    } else {
                        workload::gen_rankings(&spec, &out)?
                    };
                    (out, b)
                }
                GenCmd::Documents { n, out, content_size, seed } => {
                    let spec = WebPageGenSpec { n, content_size, seed, ..Default::default() };
                    let b = workload::gen_documents(&spec, &out)?;
                    (out, b)
                }
            };
            println!("wrote {} ({bytes} bytes)", path.display());
            Ok(())
        }
        Cmd::Bench { scale, workdir, json } => {
            let scale: Scale = scale.parse().map_err(Error::from)?;
            let report = workload::bench_suite(scale, &workdir)?;
            if json {
                print_json(&report)
            } else {
                print!("{}", report.to_text());
                Ok(())
            }
        }
        Cmd::Catalog { action, catalog } => {
            let path = catalog_path(catalog)?;
            let cat = Catalog::load(&path).map_err(Error::from)?;
            for m in &cat.malformed {
                eprintln!("warning: {}:{}: {}", path.display(), m.line, m.message);
            }
            match action {
                CatalogAction::List => print_json(&cat.entries),
                CatalogAction::Verify => {
                    let mut bad = 0;
                    for e in &cat.entries {
                        let status = e.verify();
                        let text = match &status {
                            VerifyStatus::Ok => "ok".to_string(),
                            VerifyStatus::HashMismatch { expected, actual } => {
                                format!("stale: input hash {actual}, indexed {expected}")
                            }
                            VerifyStatus::Missing(p) => format!("missing: {}", p.display()),
                            VerifyStatus::HeaderMismatch(m) => format!("bad header: {m}"),
                        };
                        if status != VerifyStatus::Ok {
                            bad += 1;
                        }
                        println!("{}\t{text}", e.index_path.display());
                    }
                    if bad > 0 {
                        bail!(Error::from(minimap_core::error::StorageError::InvalidSpec(format!(
                            "{bad} of {} entries failed verification",
                            cat.entries.len()
                        ))));
                    }
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
