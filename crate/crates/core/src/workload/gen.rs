//! Deterministic synthetic data: web pages, user visits, rankings, documents.
//!
//! Every generator is a pure function of its spec. Files are written by a
//! single thread so identical specs give identical bytes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::zipf::Zipf;
use crate::error::{Error, WorkloadError};
use crate::lang::{ScalarType, Schema};
use crate::storage::record::{RecordFile, RecordFileWriter};
use crate::value::Value;

pub fn webpages_schema() -> Schema {
    Schema::new("WebPages", &[("url", ScalarType::Str), ("rank", ScalarType::I32), ("content", ScalarType::Str)])
}

pub fn uservisits_schema() -> Schema {
    Schema::new(
        "UserVisits",
        &[
            ("sourceIP", ScalarType::Str),
            ("destURL", ScalarType::Str),
            ("visitDate", ScalarType::I64),
            ("adRevenue", ScalarType::I32),
            ("userAgent", ScalarType::Str),
            ("countryCode", ScalarType::Str),
            ("languageCode", ScalarType::Str),
            ("searchWord", ScalarType::Str),
            ("duration", ScalarType::I32),
        ],
    )
}

pub fn rankings_schema() -> Schema {
    Schema::new(
        "Rankings",
        &[("pageRank", ScalarType::I32), ("pageURL", ScalarType::Str), ("avgDuration", ScalarType::I32)],
    )
}

/// Rankings with everything but the key packed into one self-describing blob.
pub fn rankings_blob_schema() -> Schema {
    Schema::new("RankingsBlob", &[("pageRank", ScalarType::I32), ("tuple", ScalarType::Blob)])
}

pub fn documents_schema() -> Schema {
    Schema::new("Documents", &[("url", ScalarType::Str), ("content", ScalarType::Str)])
}

/// The i-th generated page URL. Hosts cycle through 1000 names, so a prefix
/// bound on the host number selects a predictable fraction of pages.
pub fn page_url(i: u64) -> String {
    format!("http://www.example{:04}.com/pages/{:08}.html", i % 1000, i)
}

const WORDS: &[&str] = &[
    "data", "index", "query", "record", "stream", "cluster", "network", "storage", "lorem", "ipsum", "dolor", "amet",
    "river", "mountain", "signal", "vector", "market", "garden", "window", "engine", "pencil", "summer", "winter",
    "orange", "silver", "coffee", "planet", "rocket", "forest", "island", "bridge", "castle",
];
const AGENTS: &[&str] = &[
    "Mozilla/5.0 (X11; Linux x86_64)",
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64)",
    "Mozilla/5.0 (Macintosh; Intel Mac OS X 10_15_7)",
    "Opera/9.80 (Windows NT 6.1)",
    "curl/7.68.0",
    "Wget/1.20.3",
];
const COUNTRIES: &[&str] = &["USA", "DEU", "FRA", "BRA", "IND", "CHN", "JPN", "GBR", "CAN", "AUS", "ESP", "ITA"];
const LANGUAGES: &[&str] = &["en-US", "de-DE", "fr-FR", "pt-BR", "hi-IN", "zh-CN", "ja-JP", "en-GB", "es-ES", "it-IT"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WebPageGenSpec {
    pub n: u64,
    /// Exponent of the link-popularity distribution.
    pub zipf_s: f64,
    /// Mean content bytes.
    pub content_size: usize,
    /// Ranks are uniform over `rank_lo..=rank_hi`.
    pub rank_lo: i32,
    pub rank_hi: i32,
    pub seed: u64,
}

impl Default for WebPageGenSpec {
    fn default() -> Self {
        WebPageGenSpec { n: 1000, zipf_s: 0.99, content_size: 510, rank_lo: 1, rank_hi: 100, seed: 1 }
    }
}

impl WebPageGenSpec {
    fn validate(&self) -> Result<(), WorkloadError> {
        if self.rank_lo > self.rank_hi {
            return Err(WorkloadError::InvalidSpec(format!("rank range {}..={} is empty", self.rank_lo, self.rank_hi)));
        }
        Ok(())
    }
}

/// Page bodies: words with links to other pages drawn by popularity.
fn content(rng: &mut ChaCha8Rng, links: Option<&Zipf>, mean: usize) -> String {
    let target = if mean == 0 { 0 } else { mean / 2 + rng.random_range(0..=mean) };
    let mut s = String::with_capacity(target + 64);
    while s.len() < target {
        if !s.is_empty() {
            s.push(' ');
        }
        match links {
            Some(z) if rng.random_ratio(1, 16) => s.push_str(&page_url(z.sample(rng))),
            _ => s.push_str(WORDS[rng.random_range(0..WORDS.len())]),
        }
    }
    s.truncate(target);
    s
}

fn pages(spec: &WebPageGenSpec) -> Result<impl Iterator<Item = (String, i32, String)> + '_, WorkloadError> {
    spec.validate()?;
    let links = if spec.n > 0 { Some(Zipf::new(spec.n, spec.zipf_s)?) } else { None };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.n).map(move |i| {
        let rank = rng.random_range(spec.rank_lo..=spec.rank_hi);
        let body = content(&mut rng, links.as_ref(), spec.content_size);
        (page_url(i), rank, body)
    }))
}

/// WebPages(url, rank, content) with unique urls.
pub fn gen_webpages(spec: &WebPageGenSpec, path: &Path) -> Result<u64, Error> {
    let rows = pages(spec)?;
    let mut w = RecordFileWriter::create(path, &webpages_schema())?;
    for (url, rank, body) in rows {
        w.push(&[Value::Str(url), Value::I32(rank), Value::Str(body)])?;
    }
    Ok(w.finish()?)
}

/// Documents(url, content): the page corpus without ranks.
pub fn gen_documents(spec: &WebPageGenSpec, path: &Path) -> Result<u64, Error> {
    let rows = pages(spec)?;
    let mut w = RecordFileWriter::create(path, &documents_schema())?;
    for (url, _, body) in rows {
        w.push(&[Value::Str(url), Value::Str(body)])?;
    }
    Ok(w.finish()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserVisitsGenSpec {
    pub n: u64,
    /// Exponent of the destURL popularity distribution.
    pub zipf_s: f64,
    /// First visitDate, in days since the Unix epoch.
    pub date_start: i64,
    /// Chance that the clock advances one day between consecutive visits.
    pub date_step: f64,
    pub seed: u64,
}

impl Default for UserVisitsGenSpec {
    fn default() -> Self {
        UserVisitsGenSpec { n: 1000, zipf_s: 0.99, date_start: 10_957, date_step: 0.125, seed: 2 }
    }
}

/// UserVisits with destURL drawn from `pool` by Zipfian popularity and a
/// non-decreasing visitDate.
pub fn gen_uservisits(spec: &UserVisitsGenSpec, pool: &[String], path: &Path) -> Result<u64, Error> {
    if !(0.0..=1.0).contains(&spec.date_step) {
        return Err(WorkloadError::InvalidSpec(format!("date step {} is not a probability", spec.date_step)).into());
    }
    let urls = if spec.n > 0 { Some(Zipf::new(pool.len() as u64, spec.zipf_s)?) } else { None };
    let mut w = RecordFileWriter::create(path, &uservisits_schema())?;
    if let Some(urls) = urls {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let ips = (spec.n / 8).max(1);
        let mut date = spec.date_start;
        for _ in 0..spec.n {
            if rng.random_bool(spec.date_step) {
                date += 1;
            }
            // a fixed set of client addresses, each a scrambled index
            let ip = (rng.random_range(0..ips)).wrapping_mul(2_654_435_761) as u32;
            let [a, b, c, d] = ip.to_be_bytes();
            let row = [
                Value::Str(format!("{a}.{b}.{c}.{d}")),
                Value::Str(pool[urls.sample(&mut rng) as usize].clone()),
                Value::I64(date),
                Value::I32(rng.random_range(1..=1000)),
                Value::Str(AGENTS[rng.random_range(0..AGENTS.len())].to_string()),
                Value::Str(COUNTRIES[rng.random_range(0..COUNTRIES.len())].to_string()),
                Value::Str(LANGUAGES[rng.random_range(0..LANGUAGES.len())].to_string()),
                Value::Str(WORDS[rng.random_range(0..WORDS.len())].to_string()),
                Value::I32(rng.random_range(1..=100)),
            ];
            w.push(&row)?;
        }
    }
    Ok(w.finish()?)
}

/// The first `n` generated page urls.
pub fn url_pool(n: u64) -> Vec<String> {
    (0..n).map(page_url).collect()
}

/// The url column of a WebPages (or Documents) file.
pub fn url_pool_from(path: &Path) -> Result<Vec<String>, Error> {
    let f = RecordFile::open(path)?;
    if f.schema.fields.first().map(|x| x.ty) != Some(ScalarType::Str) {
        return Err(WorkloadError::InvalidSpec(format!("{} has no leading string column", path.display())).into());
    }
    let mut out = Vec::with_capacity(f.len());
    for r in f.all()? {
        if let Some(Value::Str(s)) = r.into_iter().next() {
            out.push(s);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingsGenSpec {
    pub n: u64,
    /// pageRank is uniform over `1..=rank_hi`.
    pub rank_hi: i32,
    pub pool: u64,
    pub seed: u64,
}

impl Default for RankingsGenSpec {
    fn default() -> Self {
        RankingsGenSpec { n: 1000, rank_hi: 10_000, pool: 1000, seed: 3 }
    }
}

fn rankings(spec: &RankingsGenSpec) -> Result<impl Iterator<Item = (i32, String, i32)> + '_, WorkloadError> {
    if spec.rank_hi < 1 || (spec.n > 0 && spec.pool == 0) {
        return Err(WorkloadError::InvalidSpec("rankings need rank_hi >= 1 and a nonempty pool".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.n).map(move |_| {
        let rank = rng.random_range(1..=spec.rank_hi);
        (rank, page_url(rng.random_range(0..spec.pool)), rng.random_range(1..=100))
    }))
}

pub fn gen_rankings(spec: &RankingsGenSpec, path: &Path) -> Result<u64, Error> {
    let rows = rankings(spec)?;
    let mut w = RecordFileWriter::create(path, &rankings_schema())?;
    for (rank, url, dur) in rows {
        w.push(&[Value::I32(rank), Value::Str(url), Value::I32(dur)])?;
    }
    Ok(w.finish()?)
}

/// Serialized tuple of the blob variant: `url 0x1f duration`.
pub fn pack_tuple(url: &str, dur: i32) -> Vec<u8> {
    let mut b = url.as_bytes().to_vec();
    b.push(0x1f);
    b.extend_from_slice(dur.to_string().as_bytes());
    b
}

/// Same rows as [`gen_rankings`] for the same spec, in the blob schema.
pub fn gen_rankings_blob(spec: &RankingsGenSpec, path: &Path) -> Result<u64, Error> {
    let rows = rankings(spec)?;
    let mut w = RecordFileWriter::create(path, &rankings_blob_schema())?;
    for (rank, url, dur) in rows {
        w.push(&[Value::I32(rank), Value::Blob(pack_tuple(&url, dur))])?;
    }
    Ok(w.finish()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::record::read_records;

    #[test]
    fn same_seed_same_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let spec = WebPageGenSpec { n: 200, ..Default::default() };
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        gen_webpages(&spec, &a).unwrap();
        gen_webpages(&spec, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        gen_webpages(&WebPageGenSpec { seed: 9, ..spec }, &b).unwrap();
        assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn empty_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w");
        gen_webpages(&WebPageGenSpec { n: 0, ..Default::default() }, &p).unwrap();
        assert!(read_records(&p).unwrap().1.is_empty());
        gen_uservisits(&UserVisitsGenSpec { n: 0, ..Default::default() }, &[], &p).unwrap();
        assert!(read_records(&p).unwrap().1.is_empty());
        let err = gen_uservisits(&UserVisitsGenSpec { n: 1, ..Default::default() }, &[], &p).unwrap_err();
        assert!(matches!(err, Error::Workload(WorkloadError::EmptyPool)));
    }

    #[test]
    fn uniform_rank_threshold_fraction() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w");
        gen_webpages(&WebPageGenSpec { n: 20_000, content_size: 8, ..Default::default() }, &p).unwrap();
        let (_, recs) = read_records(&p).unwrap();
        let hits = recs.iter().filter(|r| r[1].as_int().unwrap() > 90).count();
        let frac = hits as f64 / recs.len() as f64;
        assert!((frac - 0.10).abs() < 0.01, "{frac}");
    }

    #[test]
    fn uservisits_shape() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("uv");
        let pool = url_pool(1000);
        gen_uservisits(&UserVisitsGenSpec { n: 5000, ..Default::default() }, &pool, &p).unwrap();
        let (schema, recs) = read_records(&p).unwrap();
        assert_eq!(schema, uservisits_schema());
        let mut urls = std::collections::HashSet::new();
        let mut small_deltas = 0;
        for (i, r) in recs.iter().enumerate() {
            assert!(pool.contains(&r[1].as_str().unwrap().to_string()));
            urls.insert(r[1].clone());
            if i > 0 {
                let d = r[2].as_int().unwrap() - recs[i - 1][2].as_int().unwrap();
                assert!(d >= 0);
                // zigzag of d fits one varint byte
                small_deltas += usize::from(d < 64);
            }
        }
        assert!(urls.len() < recs.len() / 4, "{} distinct", urls.len());
        assert!(small_deltas as f64 >= 0.95 * (recs.len() - 1) as f64);
    }

    #[test]
    fn blob_variant_carries_the_same_rows() {
        let dir = tempfile::tempdir().unwrap();
        let spec = RankingsGenSpec { n: 100, ..Default::default() };
        gen_rankings(&spec, &dir.path().join("r")).unwrap();
        gen_rankings_blob(&spec, &dir.path().join("b")).unwrap();
        let (_, r) = read_records(&dir.path().join("r")).unwrap();
        let (_, b) = read_records(&dir.path().join("b")).unwrap();
        for (x, y) in r.iter().zip(&b) {
            assert_eq!(x[0], y[0]);
            let Value::Blob(t) = &y[1] else { panic!() };
            assert_eq!(*t, pack_tuple(x[1].as_str().unwrap(), x[2].as_int().unwrap() as i32));
        }
    }
}
