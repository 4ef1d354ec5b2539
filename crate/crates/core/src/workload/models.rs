//! The benchmark programs, their detectable siblings, and the single-
//! optimization experiment jobs.

use serde::{Deserialize, Serialize};

use super::gen::{documents_schema, rankings_blob_schema, rankings_schema, uservisits_schema, webpages_schema};
use crate::lang::print_schema;

/// Constants substituted into the benchmark programs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// B1 keeps `pageRank > rank_threshold`.
    pub rank_threshold: i32,
    /// B3 keeps visits with `date_lo <= visitDate <= date_hi`.
    pub date_lo: i64,
    pub date_hi: i64,
    /// B4 keeps documents whose url sorts before this bound.
    pub url_bound: String,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            rank_threshold: 9998,
            date_lo: 11_000,
            date_hi: 11_000,
            url_bound: "http://www.example0100".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Rankings,
    RankingsBlob,
    UserVisits,
    Documents,
}

#[derive(Clone, Debug)]
pub struct BenchModel {
    pub id: &'static str,
    pub title: &'static str,
    pub job: String,
    pub dataset: Dataset,
    /// The same computation written so every opportunity a careful reader
    /// would see is visible to the analyzer. An optimization found in the
    /// sibling but not in `job` counts as present yet undetected.
    pub sibling: String,
}

const SUM_REDUCE: &str = "reduce(k, vals) {
        let s = 0;
        while (has_next(vals)) { s = s + next(vals); }
        emit(k, s);
    }";

const PASS_REDUCE: &str = "reduce(k, vals) {
        while (has_next(vals)) { emit(k, next(vals)); }
    }";

fn job(schema: &crate::lang::Schema, header: &str, map: &str, reduce: &str) -> String {
    format!("{}job {header} {{\n    map(k, v) {{\n{map}\n    }}\n    {reduce}\n}}\n", print_schema(schema))
}

pub fn b1_selection(p: &ModelParams) -> BenchModel {
    let map = format!("        if (k > {}) {{ emit(k, v.tuple); }}", p.rank_threshold);
    let sibling_map = format!("        if (k > {}) {{ emit(k, v.pageURL); }}", p.rank_threshold);
    BenchModel {
        id: "B1",
        title: "selection",
        job: job(&rankings_blob_schema(), "Selection on RankingsBlob", &map, PASS_REDUCE),
        dataset: Dataset::RankingsBlob,
        sibling: job(&rankings_schema(), "Selection on Rankings", &sibling_map, PASS_REDUCE),
    }
}

pub fn b2_aggregation() -> BenchModel {
    let src = job(&uservisits_schema(), "Aggregation on UserVisits sorted", "        emit(k, v.adRevenue);", SUM_REDUCE);
    BenchModel { id: "B2", title: "aggregation", job: src.clone(), dataset: Dataset::UserVisits, sibling: src }
}

pub fn b3_join(p: &ModelParams) -> BenchModel {
    // the map side of a repartition join: filter by date, tag, ship by url
    let map = format!(
        "        if (v.visitDate >= {} && v.visitDate <= {}) {{
            let tagged = \"V|\" ++ k ++ \"|\" ++ to_str(v.visitDate) ++ \"|\" ++ to_str(v.adRevenue);
            tagged = tagged ++ \"|\" ++ v.userAgent ++ \"|\" ++ v.countryCode ++ \"|\" ++ v.languageCode;
            emit(v.destURL, tagged ++ \"|\" ++ v.searchWord ++ \"|\" ++ to_str(v.duration));
        }}",
        p.date_lo, p.date_hi
    );
    let reduce = "reduce(k, vals) {
        let n = 0;
        let bytes = 0;
        while (has_next(vals)) { let t = next(vals); n = n + 1; bytes = bytes + len(t); }
        emit(k, to_str(n) ++ \":\" ++ to_str(bytes));
    }";
    let src = job(&uservisits_schema(), "JoinTag on UserVisits sorted", &map, reduce);
    BenchModel { id: "B3", title: "join", job: src.clone(), dataset: Dataset::UserVisits, sibling: src }
}

pub fn b4_udf(p: &ModelParams) -> BenchModel {
    // membership in the table stands for the url test that filled it
    let map = format!(
        "        if (v.url < \"{}\") {{ table_put(v.url); }}
        if (table_get(v.url) && contains(v.content, \"http://\")) {{ emit(v.url, len(v.content)); }}",
        p.url_bound
    );
    let sibling_map = format!(
        "        if (v.url < \"{}\" && contains(v.content, \"http://\")) {{ emit(v.url, len(v.content)); }}",
        p.url_bound
    );
    BenchModel {
        id: "B4",
        title: "udf aggregation",
        job: job(&documents_schema(), "UdfAggregation on Documents", &map, SUM_REDUCE),
        dataset: Dataset::Documents,
        sibling: job(&documents_schema(), "UdfAggregation on Documents", &sibling_map, SUM_REDUCE),
    }
}

pub fn bench_models(p: &ModelParams) -> Vec<BenchModel> {
    vec![b1_selection(p), b2_aggregation(), b3_join(p), b4_udf(p)]
}

/// Pages above a rank threshold, keyed by url.
pub fn rank_selection_job(threshold: i32) -> String {
    job(
        &webpages_schema(),
        "RankFilter on WebPages",
        &format!("        if (v.rank > {threshold}) {{ emit(k, v.rank); }}"),
        PASS_REDUCE,
    )
}

/// Total visit duration per destination url.
pub fn duration_by_url_job() -> String {
    job(&uservisits_schema(), "DurationByUrl on UserVisits", "        emit(v.destURL, v.duration);", SUM_REDUCE)
}

/// Reads every numeric column of UserVisits and nothing else.
pub fn numeric_summary_job() -> String {
    job(
        &uservisits_schema(),
        "NumericSummary on UserVisits sorted",
        "        emit(k, v.visitDate + v.adRevenue + v.duration);",
        SUM_REDUCE,
    )
}

/// The map whose emits depend on a per-task counter.
pub fn counter_job() -> String {
    job(
        &webpages_schema(),
        "Counter on WebPages",
        "        numMapsRun = numMapsRun + 1;
        if (v.rank > 1 || numMapsRun > 200) { emit(k, 1); }",
        SUM_REDUCE,
    )
    .replacen("    map(k, v)", "    members { numMapsRun: i64 = 0; }\n    map(k, v)", 1)
}

/// A filter that logs every record it keeps.
pub fn logging_filter_job() -> String {
    job(
        &webpages_schema(),
        "LoggedFilter on WebPages",
        "        if (v.rank > 50) { log(k); emit(k, v.rank); }",
        PASS_REDUCE,
    )
}
