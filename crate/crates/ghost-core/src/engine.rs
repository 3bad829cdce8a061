//! Offline analysis and runtime response generation for the three matching
//! strategies: whole library, cluster centroid and weighted consensus.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{dissimilarity_ratio, relative_distance, WeightedMatchConstants};
use crate::clustering::{
    bea_reorder, build_matrix_unchecked, partition, select_centroid, vat_reorder_prim, Basis, ClusterSet,
    DissimilarityMatrix, PartitionConfig, Reorder,
};
use crate::consensus::{build_prototype, ConsensusConfig, ConsensusPrototype};
use crate::error::{GhostError, Result};
use crate::trace::TraceLibrary;
use crate::translation::{translate, DEFAULT_MIN_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Every recorded interaction is its own cluster.
    Whole,
    /// Match against cluster centroid requests.
    Centroid,
    /// Match against entropy-weighted consensus prototypes.
    Consensus,
}

impl std::str::FromStr for Strategy {
    type Err = GhostError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" => Ok(Strategy::Whole),
            "centroid" => Ok(Strategy::Centroid),
            "consensus" => Ok(Strategy::Consensus),
            other => Err(GhostError::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Runtime constants persisted with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub f: f64,
    pub b: f64,
    pub c: f64,
    pub min_len: usize,
    pub constants: WeightedMatchConstants,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { f: 0.8, b: 1.0, c: 10.0, min_len: DEFAULT_MIN_LEN, constants: WeightedMatchConstants::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCluster {
    pub members: Vec<usize>,
    pub centroid: usize,
    pub prototype: Option<ConsensusPrototype>,
}

/// Output of offline analysis; immutable and shareable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceModel {
    pub strategy: Strategy,
    pub params: ModelParams,
    pub library: TraceLibrary,
    pub clusters: Vec<ModelCluster>,
}

impl ServiceModel {
    /// Checks that the artifacts the strategy needs are present and consistent.
    pub fn check(&self) -> Result<()> {
        if self.library.is_empty() {
            return Err(GhostError::EmptyLibrary);
        }
        let n = self.library.len();
        let mut seen = vec![false; n];
        for (ci, c) in self.clusters.iter().enumerate() {
            if c.members.is_empty() {
                return Err(GhostError::EmptyCluster(ci));
            }
            for &m in &c.members {
                if m >= n || std::mem::replace(&mut seen[m], true) {
                    return Err(GhostError::ModelParse(format!("cluster {ci}: bad or repeated member {m}")));
                }
            }
            if !c.members.contains(&c.centroid) {
                return Err(GhostError::ModelParse(format!("cluster {ci}: centroid {} is not a member", c.centroid)));
            }
            if let Some(p) = &c.prototype {
                if p.symbols.len() != p.weights.len() {
                    return Err(GhostError::ModelParse(format!("cluster {ci}: symbols and weights differ in length")));
                }
            }
        }
        match self.strategy {
            Strategy::Whole => Ok(()),
            _ if self.clusters.is_empty() => Err(GhostError::ModelParse("cluster strategy without clusters".into())),
            Strategy::Centroid => Ok(()),
            Strategy::Consensus => match self.clusters.iter().position(|c| c.prototype.is_none()) {
                Some(ci) => Err(GhostError::ModelParse(format!("cluster {ci}: missing prototype"))),
                None => Ok(()),
            },
        }
    }
}

/// Everything `analyze` needs.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeConfig {
    pub strategy: Strategy,
    pub reorder: Reorder,
    pub partition: PartitionConfig,
    pub consensus: ConsensusConfig,
    pub min_len: usize,
    pub constants: WeightedMatchConstants,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Consensus,
            reorder: Reorder::Prim,
            partition: PartitionConfig::Auto { tau: None },
            consensus: ConsensusConfig::default(),
            min_len: DEFAULT_MIN_LEN,
            constants: WeightedMatchConstants::default(),
        }
    }
}

impl AnalyzeConfig {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            f: self.consensus.f,
            b: self.consensus.b,
            c: self.consensus.c,
            min_len: self.min_len,
            constants: self.constants,
        }
    }

    fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        let c = &self.consensus;
        if !(c.f > 0.0 && c.f <= 1.0) {
            return Err(GhostError::Config(format!("f must be in (0, 1], got {}", c.f)));
        }
        if c.b <= 0.0 || c.c <= 0.0 {
            return Err(GhostError::Config("b and c must be positive".into()));
        }
        if self.min_len == 0 {
            return Err(GhostError::Config("minlen must be at least 1".into()));
        }
        Ok(())
    }
}

/// Request and response dissimilarity matrices of a library.
#[derive(Debug, Clone)]
pub struct Matrices {
    pub request: DissimilarityMatrix,
    pub response: DissimilarityMatrix,
}

impl Matrices {
    pub fn build(lib: &TraceLibrary) -> Self {
        Self {
            request: build_matrix_unchecked(&lib.interactions, Basis::Request),
            response: build_matrix_unchecked(&lib.interactions, Basis::Response),
        }
    }

    /// Matrices of the sub-library `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self { request: self.request.select(idx), response: self.response.select(idx) }
    }
}

/// Runs the offline pipeline.
pub fn analyze(lib: &TraceLibrary, cfg: &AnalyzeConfig) -> Result<ServiceModel> {
    cfg.validate()?;
    if lib.is_empty() {
        return Err(GhostError::EmptyLibrary);
    }
    if cfg.strategy == Strategy::Whole {
        return Ok(whole_model(lib, cfg));
    }
    analyze_with(lib, cfg, &Matrices::build(lib))
}

fn whole_model(lib: &TraceLibrary, cfg: &AnalyzeConfig) -> ServiceModel {
    ServiceModel { strategy: Strategy::Whole, params: cfg.params(), library: lib.clone(), clusters: Vec::new() }
}

/// Offline pipeline over precomputed matrices of `lib`.
pub fn analyze_with(lib: &TraceLibrary, cfg: &AnalyzeConfig, m: &Matrices) -> Result<ServiceModel> {
    cfg.validate()?;
    if lib.is_empty() {
        return Err(GhostError::EmptyLibrary);
    }
    if cfg.strategy == Strategy::Whole {
        return Ok(whole_model(lib, cfg));
    }
    let clusters = cluster_library(&m.response, cfg)?;
    build_model(lib, &clusters, &m.request, cfg)
}

/// Reorders the response matrix and cuts it into clusters.
pub fn cluster_library(response: &DissimilarityMatrix, cfg: &AnalyzeConfig) -> Result<ClusterSet> {
    if response.n() == 1 {
        return Ok(ClusterSet::new(vec![vec![0]]));
    }
    let perm = match cfg.reorder {
        Reorder::Prim => vat_reorder_prim(response),
        Reorder::Bea => bea_reorder(response),
    };
    partition(response, &perm, &cfg.partition)
}

/// Centroids and, for the consensus strategy, prototypes of given clusters.
pub fn build_model(
    lib: &TraceLibrary,
    clusters: &ClusterSet,
    request: &DissimilarityMatrix,
    cfg: &AnalyzeConfig,
) -> Result<ServiceModel> {
    if let Some(ci) = clusters.clusters.iter().position(Vec::is_empty) {
        return Err(GhostError::EmptyCluster(ci));
    }
    let built: Vec<Result<ModelCluster>> = clusters
        .clusters
        .par_iter()
        .enumerate()
        .map(|(ci, members)| {
            let centroid = select_centroid(members, request)?;
            let prototype = if cfg.strategy == Strategy::Consensus {
                let reqs: Vec<&[u8]> = members.iter().map(|&i| lib.interactions[i].request.as_slice()).collect();
                let dist = request.select(members).rows();
                Some(build_prototype(&reqs, &dist, &cfg.consensus, ci)?.0)
            } else {
                None
            };
            Ok(ModelCluster { members: members.clone(), centroid, prototype })
        })
        .collect();
    let clusters = built.into_iter().collect::<Result<Vec<_>>>()?;
    let model = ServiceModel { strategy: cfg.strategy, params: cfg.params(), library: lib.clone(), clusters };
    model.check()?;
    Ok(model)
}

/// Winner of a matching scan and the distances it was chosen from.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Cluster index, or interaction index for the whole-library strategy.
    pub chosen: usize,
    pub distance: f64,
    pub candidates: Vec<f64>,
}

fn argmin(candidates: Vec<f64>) -> MatchResult {
    let mut chosen = 0;
    for (i, &d) in candidates.iter().enumerate() {
        if d < candidates[chosen] {
            chosen = i;
        }
    }
    MatchResult { chosen, distance: candidates[chosen], candidates }
}

fn ratio(a: &[u8], b: &[u8]) -> f64 {
    dissimilarity_ratio(a, b).unwrap_or(0.0)
}

pub fn match_whole_library(model: &ServiceModel, incoming: &[u8]) -> MatchResult {
    argmin(model.library.requests().map(|r| ratio(r, incoming)).collect())
}

pub fn match_cluster_centroid(model: &ServiceModel, incoming: &[u8]) -> MatchResult {
    argmin(model.clusters.iter().map(|c| ratio(&model.library.interactions[c.centroid].request, incoming)).collect())
}

/// Relative distance to each prototype; an all-wildcard prototype scores 1.
pub fn match_consensus_weighted(model: &ServiceModel, incoming: &[u8]) -> MatchResult {
    let k = &model.params.constants;
    argmin(
        model
            .clusters
            .iter()
            .map(|c| match &c.prototype {
                Some(p) => relative_distance(p, incoming, k).unwrap_or(1.0),
                None => 1.0,
            })
            .collect(),
    )
}

pub fn match_request(model: &ServiceModel, incoming: &[u8]) -> MatchResult {
    match model.strategy {
        Strategy::Whole => match_whole_library(model, incoming),
        Strategy::Centroid => match_cluster_centroid(model, incoming),
        Strategy::Consensus => match_consensus_weighted(model, incoming),
    }
}

/// A synthesized response with matching diagnostics and timings.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    /// `None` means NO_RESPONSE: send nothing.
    pub response: Option<Vec<u8>>,
    pub matched: MatchResult,
    /// Interaction whose response was rewritten.
    pub interaction: usize,
    pub match_time: Duration,
    pub substitution_time: Duration,
}

/// Matches, picks the centroid interaction and rewrites its response.
pub fn respond(model: &ServiceModel, incoming: &[u8]) -> Result<Generated> {
    let t0 = Instant::now();
    let matched = match_request(model, incoming);
    let match_time = t0.elapsed();
    let interaction = match model.strategy {
        Strategy::Whole => matched.chosen,
        _ => model.clusters[matched.chosen].centroid,
    };
    let t1 = Instant::now();
    let it = &model.library.interactions[interaction];
    let response = if it.no_response {
        None
    } else {
        Some(translate(&it.request, &it.response, incoming, model.params.min_len)?)
    };
    Ok(Generated { response, matched, interaction, match_time, substitution_time: t1.elapsed() })
}

/// Response bytes for `incoming`, or `None` for NO_RESPONSE.
pub fn generate_response(model: &ServiceModel, incoming: &[u8]) -> Result<Option<Vec<u8>>> {
    Ok(respond(model, incoming)?.response)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Interaction;

    #[test]
    fn single_interaction_library() {
        let lib = TraceLibrary::new(vec![Interaction::new("{id:1,op:B}", "{id:1,op:BindRsp,result:Ok}")]);
        let m = analyze(&lib, &AnalyzeConfig::default()).unwrap();
        assert_eq!(m.clusters.len(), 1);
        let p = m.clusters[0].prototype.as_ref().unwrap();
        assert_eq!(p.render(), "{id:1,op:B}");
        assert!(p.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn sentinel_centroid_yields_no_response() {
        let lib = TraceLibrary::new(vec![Interaction::without_response("{id:1,op:U}")]);
        let m = analyze(&lib, &AnalyzeConfig { strategy: Strategy::Whole, ..Default::default() }).unwrap();
        assert_eq!(generate_response(&m, b"{id:2,op:U}").unwrap(), None);
    }

    #[test]
    fn empty_library_errors() {
        assert!(analyze(&TraceLibrary::default(), &AnalyzeConfig::default()).is_err());
    }
}
