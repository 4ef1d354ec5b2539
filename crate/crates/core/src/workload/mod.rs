//! Synthetic datasets, the benchmark programs and the harness that runs them.

pub mod gen;
pub mod models;
pub mod randjob;
pub mod suite;
pub mod zipf;

pub use gen::{
    gen_documents, gen_rankings, gen_rankings_blob, gen_uservisits, gen_webpages, page_url, url_pool, url_pool_from,
    RankingsGenSpec, UserVisitsGenSpec, WebPageGenSpec,
};
pub use models::{
    b1_selection, b2_aggregation, b3_join, b4_udf, bench_models, counter_job, duration_by_url_job, logging_filter_job,
    numeric_summary_job, rank_selection_job, BenchModel, Dataset, ModelParams,
};
pub use randjob::{rand_schema, random_job, random_records, RandJobOptions};
pub use suite::{
    bench_suite, date_window, matrix_matches, recall_matrix, verify_plans, BenchReport, BenchRow, Cell, MatrixRow, PlanCheck, Scale,
    Verification, EXPECTED_MATRIX,
};
pub use zipf::Zipf;
