//! Evaluation harness: a fictional directory protocol with a validator and a
//! seeded trace generator, k-fold cross-validation, the five-way response
//! taxonomy, and cluster noise injection.

use std::fmt;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::dissimilarity_ratio;
use crate::clustering::ClusterSet;
use crate::engine::{analyze, analyze_with, build_model, cluster_library, respond, AnalyzeConfig, Matrices, Strategy};
use crate::error::{GhostError, Result};
use crate::trace::{Interaction, TraceLibrary};

/// A parsed `{id:<digits>,op:<OP>[,key:value]*}` message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirMessage {
    pub id: String,
    pub op: String,
    pub fields: Vec<(String, String)>,
}

impl DirMessage {
    pub fn field(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut s = format!("{{id:{},op:{}", self.id, self.op);
        for (k, v) in &self.fields {
            s.push(',');
            s.push_str(k);
            s.push(':');
            s.push_str(v);
        }
        s.push('}');
        s.into_bytes()
    }
}

/// Grammar and operation map of the directory protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectoryProtocolSpec {
    pub ops: Vec<(String, String)>,
}

impl Default for DirectoryProtocolSpec {
    fn default() -> Self {
        let ops = [("B", "BindRsp"), ("S", "SearchRsp"), ("A", "AddRsp"), ("U", "UnbindRsp")];
        Self { ops: ops.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect() }
    }
}

fn is_key(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric())
}

fn is_value(s: &str) -> bool {
    !s.is_empty() && !s.bytes().any(|b| matches!(b, b',' | b'{' | b'}'))
}

impl DirectoryProtocolSpec {
    /// Syntax only: braces, `id` digits first, `op` second, `key:value` pairs.
    pub fn parse(&self, msg: &[u8]) -> Option<DirMessage> {
        let s = std::str::from_utf8(msg).ok()?;
        let body = s.strip_prefix('{')?.strip_suffix('}')?;
        let mut parts = body.split(',');
        let id = parts.next()?.strip_prefix("id:")?;
        if id.is_empty() || !id.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let op = parts.next()?.strip_prefix("op:")?;
        if !is_key(op) {
            return None;
        }
        let mut fields = Vec::new();
        for p in parts {
            let (k, v) = p.split_once(':')?;
            if !is_key(k) || !is_value(v) {
                return None;
            }
            fields.push((k.to_string(), v.to_string()));
        }
        Some(DirMessage { id: id.to_string(), op: op.to_string(), fields })
    }

    pub fn parse_request(&self, msg: &[u8]) -> Option<DirMessage> {
        self.parse(msg).filter(|m| self.ops.iter().any(|(r, _)| *r == m.op))
    }

    /// A response must carry a known response op and a `result` field.
    pub fn parse_response(&self, msg: &[u8]) -> Option<DirMessage> {
        self.parse(msg).filter(|m| self.ops.iter().any(|(_, r)| *r == m.op) && m.field("result").is_some())
    }

    pub fn response_op(&self, request_op: &str) -> Option<&str> {
        self.ops.iter().find(|(r, _)| r == request_op).map(|(_, s)| s.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Identical,
    Consistent,
    ProtocolConformant,
    WellFormed,
    Malformed,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Identical,
        Category::Consistent,
        Category::ProtocolConformant,
        Category::WellFormed,
        Category::Malformed,
    ];

    pub fn is_accurate(self) -> bool {
        matches!(self, Category::Identical | Category::Consistent | Category::ProtocolConformant)
    }
}

/// Classifies a generated response. `None` stands for NO_RESPONSE.
///
/// Byte equality is identical. Otherwise the response must parse with a known
/// response op; if that op is the one the request calls for, copying the
/// request id makes it consistent and a different id makes it protocol
/// conformant. A parseable response with the wrong op is well formed.
pub fn categorize(
    expected: Option<&[u8]>,
    generated: Option<&[u8]>,
    request: &[u8],
    spec: &DirectoryProtocolSpec,
) -> Category {
    if expected == generated {
        return Category::Identical;
    }
    let Some(resp) = generated.and_then(|g| spec.parse_response(g)) else {
        return Category::Malformed;
    };
    let req = spec.parse_request(request);
    match req.as_ref().and_then(|r| spec.response_op(&r.op).map(|op| (r, op))) {
        Some((r, op)) if op == resp.op => {
            if resp.id == r.id {
                Category::Consistent
            } else {
                Category::ProtocolConformant
            }
        }
        _ => Category::WellFormed,
    }
}

/// Shape of a synthetic library.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub spec: DirectoryProtocolSpec,
    /// Relative weight of each request op, aligned with `spec.ops`.
    pub op_weights: Vec<f64>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { spec: DirectoryProtocolSpec::default(), op_weights: vec![0.15, 0.40, 0.30, 0.15] }
    }
}

const SURNAMES: &[&str] = &[
    "Du", "Versteeg", "Schneider", "Han", "Grundy", "Will", "Hine", "Lindsey", "Durand", "Miao", "Okafor", "Tanaka",
    "Novak", "Silva", "Kowalski", "Haddad", "Nguyen", "Ivanova", "Moreau", "Rossi", "Jensen", "Oduya", "Petrov",
    "Fitzgerald", "Abernathy", "Li", "Wu", "Castellanos", "Brandt", "Achterberg",
];
const GIVEN: &[&str] = &[
    "Jun", "Steve", "John", "Cam", "Vanessa", "Miao", "Ana", "Kenji", "Olga", "Luis", "Priya", "Tom", "Sofia",
    "Ahmed", "Mei", "Jonas", "Ines", "Kwame", "Elena", "Raj",
];
const UNITS: &[&str] = &["people", "staff", "admin", "sales", "research", "ops"];
const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

fn digits(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let len = rng.gen_range(min..=max);
    let mut s = String::with_capacity(len);
    s.push(char::from(b'1' + rng.gen_range(0..9)));
    for _ in 1..len {
        s.push(char::from(b'0' + rng.gen_range(0..10)));
    }
    s
}

fn token(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let len = rng.gen_range(min..=max);
    (0..len).map(|_| ALNUM[rng.gen_range(0..ALNUM.len())] as char).collect()
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

fn msg(id: &str, op: &str, fields: &[(&str, String)]) -> Vec<u8> {
    DirMessage {
        id: id.to_string(),
        op: op.to_string(),
        fields: fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
    }
    .serialize()
}

fn generate_interaction(rng: &mut ChaCha8Rng, spec: &DirectoryProtocolSpec, op: &str) -> Interaction {
    let id = digits(rng, 1, 5);
    let rsp = spec.response_op(op).unwrap_or("UnknownRsp");
    let ok = ("result", "Ok".to_string());
    match op {
        "B" => {
            let dn = format!("cn={}.{}", pick(rng, GIVEN), pick(rng, SURNAMES));
            let req = msg(&id, op, &[("dn", dn), ("ou", pick(rng, UNITS).to_string()), ("pw", token(rng, 6, 10))]);
            let res = msg(&id, rsp, &[ok, ("session", token(rng, 8, 8)), ("ttl", "3600".into()), ("version", "3".into())]);
            Interaction::new(req, res)
        }
        "S" => {
            let sn = pick(rng, SURNAMES).to_string();
            let gn = pick(rng, GIVEN).to_string();
            let mut fields = vec![("sn", sn.clone())];
            if rng.gen_bool(0.3) {
                fields.push(("gn", gn.clone()));
            }
            let req = msg(&id, op, &fields);
            let res = msg(
                &id,
                rsp,
                &[
                    ok,
                    ("objectClass", "inetOrgPerson".into()),
                    ("o", "example".into()),
                    ("ou", "people".into()),
                    ("gn", gn),
                    ("sn", sn),
                    ("mobile", digits(rng, 7, 8)),
                ],
            );
            Interaction::new(req, res)
        }
        "A" => {
            let mut fields =
                vec![("sn", pick(rng, SURNAMES).to_string()), ("gn", pick(rng, GIVEN).to_string())];
            if rng.gen_bool(0.5) {
                fields.push(("mobile", digits(rng, 6, 8)));
            }
            if rng.gen_bool(0.3) {
                fields.push(("postalCode", digits(rng, 5, 5)));
            }
            let req = msg(&id, op, &fields);
            let res = msg(&id, rsp, &[ok]);
            Interaction::new(req, res)
        }
        _ => {
            let req = msg(&id, op, &[]);
            let res = msg(&id, rsp, &[ok, ("closed", "session".into())]);
            Interaction::new(req, res)
        }
    }
}

/// Seeded synthetic library over the directory protocol.
pub fn generate_library(cfg: &GeneratorConfig, n: usize, seed: u64) -> Result<TraceLibrary> {
    if n < 10 {
        return Err(GhostError::Config(format!("library size must be at least 10, got {n}")));
    }
    if cfg.op_weights.len() != cfg.spec.ops.len() || cfg.op_weights.iter().any(|&w| w < 0.0) {
        return Err(GhostError::Config("one non-negative weight per op required".into()));
    }
    let total: f64 = cfg.op_weights.iter().sum();
    if total <= 0.0 {
        return Err(GhostError::Config("op weights sum to zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut interactions = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = rng.gen::<f64>() * total;
        let mut op = cfg.spec.ops.len() - 1;
        for (i, &w) in cfg.op_weights.iter().enumerate() {
            if x < w {
                op = i;
                break;
            }
            x -= w;
        }
        let name = cfg.spec.ops[op].0.clone();
        interactions.push(generate_interaction(&mut rng, &cfg.spec, &name));
    }
    let mut lib = TraceLibrary::new(interactions);
    lib.metadata.capture_id = Some(format!("synthetic-directory-n{n}-seed{seed}"));
    Ok(lib)
}

/// Swaps `ceil(ratio * size)` members of each cluster with members of other
/// clusters. Cluster sizes and the overall membership are preserved.
///
/// A swap moves one original member out of each of the two clusters involved
/// and counts toward both quotas; partners are drawn from clusters that still
/// have quota left, so each cluster loses close to its own quota rather than
/// its quota plus whatever other clusters push into it.
pub fn inject_noise(clusters: &ClusterSet, ratio: f64, seed: u64) -> Result<ClusterSet> {
    if !(0.0..0.5).contains(&ratio) {
        return Err(GhostError::Config(format!("noise ratio must be in [0, 0.5), got {ratio}")));
    }
    let mut out = clusters.clone();
    if ratio == 0.0 {
        return Ok(out);
    }
    let k = out.clusters.len();
    if k < 2 {
        return Err(GhostError::NowhereToSwap);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quota: Vec<usize> = out.clusters.iter().map(|c| (ratio * c.len() as f64).ceil() as usize).collect();
    let mut moved = vec![0usize; k];
    // Slots still holding an original member.
    let mut original: Vec<Vec<usize>> = out.clusters.iter().map(|c| (0..c.len()).collect()).collect();
    for c in 0..k {
        while moved[c] < quota[c] && !original[c].is_empty() {
            let open: Vec<usize> =
                (0..k).filter(|&o| o != c && moved[o] < quota[o] && !original[o].is_empty()).collect();
            let fallback: Vec<usize> = (0..k).filter(|&o| o != c && !original[o].is_empty()).collect();
            let pool = if open.is_empty() { fallback } else { open };
            if pool.is_empty() {
                break;
            }
            let o = pool[rng.gen_range(0..pool.len())];
            let pick_c = rng.gen_range(0..original[c].len());
            let cs = original[c].swap_remove(pick_c);
            let pick_o = rng.gen_range(0..original[o].len());
            let os = original[o].swap_remove(pick_o);
            let a = out.clusters[c][cs];
            out.clusters[c][cs] = std::mem::replace(&mut out.clusters[o][os], a);
            moved[c] += 1;
            moved[o] += 1;
        }
    }
    out.centroids = vec![None; k];
    Ok(out)
}

/// Noise applied to the clusters of every training fold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_us: f64,
    pub max_us: f64,
}

impl LatencyStats {
    fn from(ds: &[Duration]) -> Self {
        if ds.is_empty() {
            return Self::default();
        }
        let us: Vec<f64> = ds.iter().map(|d| d.as_secs_f64() * 1e6).collect();
        Self { mean_us: us.iter().sum::<f64>() / us.len() as f64, max_us: us.iter().copied().fold(0.0, f64::max) }
    }
}

/// Five-way counts and timing of an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub strategy: Strategy,
    pub folds: usize,
    pub total: usize,
    pub identical: usize,
    pub consistent: usize,
    pub protocol_conformant: usize,
    pub well_formed: usize,
    pub malformed: usize,
    pub accuracy_ratio: f64,
    pub mean_dissimilarity: f64,
    pub max_dissimilarity: f64,
    pub matching: LatencyStats,
    pub substitution: LatencyStats,
    pub mean_clusters: f64,
}

impl AccuracyReport {
    pub fn count(&self, c: Category) -> usize {
        match c {
            Category::Identical => self.identical,
            Category::Consistent => self.consistent,
            Category::ProtocolConformant => self.protocol_conformant,
            Category::WellFormed => self.well_formed,
            Category::Malformed => self.malformed,
        }
    }
}

impl fmt::Display for AccuracyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:>6} {:>9} {:>10} {:>10} {:>11} {:>9} {:>9} {:>8} {:>8} {:>12} {:>12}",
            "strategy", "total", "identical", "consistent", "conformant", "well_formed", "malformed", "accuracy",
            "mean_d", "max_d", "match_us", "subst_us"
        )?;
        write!(
            f,
            "{:<10} {:>6} {:>9} {:>10} {:>10} {:>11} {:>9} {:>9.4} {:>8.4} {:>8.4} {:>12.2} {:>12.2}",
            format!("{:?}", self.strategy).to_lowercase(),
            self.total,
            self.identical,
            self.consistent,
            self.protocol_conformant,
            self.well_formed,
            self.malformed,
            self.accuracy_ratio,
            self.mean_dissimilarity,
            self.max_dissimilarity,
            self.matching.mean_us,
            self.substitution.mean_us
        )
    }
}

struct Outcome {
    category: Category,
    dissimilarity: Option<f64>,
    match_time: Duration,
    substitution_time: Duration,
}

/// Seeded assignment of `n` indices to `k` folds; folds are sorted.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (p, i) in idx.into_iter().enumerate() {
        folds[p % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// k-fold cross-validation.
///
/// Each fold is held out once; the model is analyzed from the remaining
/// interactions and every held-out request is answered and categorized against
/// its recorded response. Matrices are computed once for the whole library and
/// sliced per fold, which gives the same values as recomputing them.
pub fn run_cross_validation(
    lib: &TraceLibrary,
    cfg: &AnalyzeConfig,
    spec: &DirectoryProtocolSpec,
    k: usize,
    seed: u64,
    noise: Option<NoiseConfig>,
) -> Result<AccuracyReport> {
    if k < 2 {
        return Err(GhostError::Folds(k));
    }
    if lib.len() < k {
        return Err(GhostError::Config(format!("library of {} is smaller than k = {k}", lib.len())));
    }
    let matrices = (cfg.strategy != Strategy::Whole).then(|| Matrices::build(lib));
    let folds = fold_assignment(lib.len(), k, seed);
    let per_fold: Vec<Result<(Vec<Outcome>, usize)>> = folds
        .par_iter()
        .enumerate()
        .map(|(fi, held)| {
            let mut is_held = vec![false; lib.len()];
            for &i in held {
                is_held[i] = true;
            }
            let train: Vec<usize> = (0..lib.len()).filter(|&i| !is_held[i]).collect();
            debug_assert!(held.iter().all(|h| train.binary_search(h).is_err()));
            let sub = lib.subset(&train);
            let m = matrices.as_ref().map(|m| m.select(&train));
            let model = match (&m, noise) {
                (None, _) => analyze(&sub, cfg)?,
                (Some(m), None) => analyze_with(&sub, cfg, m)?,
                (Some(m), Some(nc)) => {
                    let clusters = cluster_library(&m.response, cfg)?;
                    let noisy = if clusters.clusters.len() > 1 {
                        inject_noise(&clusters, nc.ratio, nc.seed.wrapping_add(fi as u64))?
                    } else {
                        clusters
                    };
                    build_model(&sub, &noisy, &m.request, cfg)?
                }
            };
            let mut out = Vec::with_capacity(held.len());
            for &h in held {
                let it = &lib.interactions[h];
                let g = respond(&model, &it.request)?;
                let expected = (!it.no_response).then_some(it.response.as_slice());
                let category = categorize(expected, g.response.as_deref(), &it.request, spec);
                let dissimilarity = match (category, expected, g.response.as_deref()) {
                    (Category::Identical, _, _) => None,
                    (_, Some(e), Some(r)) => dissimilarity_ratio(e, r).ok(),
                    _ => Some(1.0),
                };
                out.push(Outcome {
                    category,
                    dissimilarity,
                    match_time: g.match_time,
                    substitution_time: g.substitution_time,
                });
            }
            Ok((out, model.clusters.len()))
        })
        .collect();

    let mut outcomes = Vec::with_capacity(lib.len());
    let mut clusters_total = 0usize;
    for r in per_fold {
        let (o, c) = r?;
        outcomes.extend(o);
        clusters_total += c;
    }
    let count = |c: Category| outcomes.iter().filter(|o| o.category == c).count();
    let total = outcomes.len();
    let dis: Vec<f64> = outcomes.iter().filter_map(|o| o.dissimilarity).collect();
    let (identical, consistent, protocol_conformant) =
        (count(Category::Identical), count(Category::Consistent), count(Category::ProtocolConformant));
    Ok(AccuracyReport {
        strategy: cfg.strategy,
        folds: k,
        total,
        identical,
        consistent,
        protocol_conformant,
        well_formed: count(Category::WellFormed),
        malformed: count(Category::Malformed),
        accuracy_ratio: (identical + consistent + protocol_conformant) as f64 / total as f64,
        mean_dissimilarity: if dis.is_empty() { 0.0 } else { dis.iter().sum::<f64>() / dis.len() as f64 },
        max_dissimilarity: dis.iter().copied().fold(0.0, f64::max),
        matching: LatencyStats::from(&outcomes.iter().map(|o| o.match_time).collect::<Vec<_>>()),
        substitution: LatencyStats::from(&outcomes.iter().map(|o| o.substitution_time).collect::<Vec<_>>()),
        mean_clusters: clusters_total as f64 / k as f64,
    })
}
