//! Messages, interactions and trace libraries.
//!
//! A message is an opaque byte sequence. Raw captured events are normalized
//! into request/response interactions; the trace file format is JSON Lines
//! with base64 payloads, and analyzed service models persist as one JSON
//! document with the library inlined.

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::consensus::{ConsensusPrototype, ProtoSymbol};
use crate::engine::{ModelCluster, ModelParams, ServiceModel, Strategy};
use crate::error::{GhostError, Result};

/// Opaque message bytes. Equality is length plus positionwise octet equality.
pub type Message = Vec<u8>;

/// Current model file version.
pub const MODEL_VERSION: u64 = 1;

/// One request paired with exactly one response.
///
/// The NO_RESPONSE sentinel is carried out-of-band by `no_response`; its
/// `response` is always empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interaction {
    pub request: Message,
    pub response: Message,
    pub no_response: bool,
}

impl Interaction {
    pub fn new(request: impl Into<Message>, response: impl Into<Message>) -> Self {
        Self { request: request.into(), response: response.into(), no_response: false }
    }

    pub fn without_response(request: impl Into<Message>) -> Self {
        Self { request: request.into(), response: Vec::new(), no_response: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEvent {
    pub direction: Direction,
    pub payload: Message,
}

impl RawEvent {
    pub fn request(payload: impl Into<Message>) -> Self {
        Self { direction: Direction::ClientToServer, payload: payload.into() }
    }

    pub fn response(payload: impl Into<Message>) -> Self {
        Self { direction: Direction::ServerToClient, payload: payload.into() }
    }
}

/// Free-form provenance of a capture.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Ordered interactions; indices are stable identifiers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceLibrary {
    pub interactions: Vec<Interaction>,
    pub metadata: SourceMetadata,
}

impl TraceLibrary {
    pub fn new(interactions: Vec<Interaction>) -> Self {
        Self { interactions, metadata: SourceMetadata::default() }
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Interaction> {
        self.interactions.get(i)
    }

    pub fn requests(&self) -> impl Iterator<Item = &[u8]> {
        self.interactions.iter().map(|it| it.request.as_slice())
    }

    /// Library restricted to `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> TraceLibrary {
        TraceLibrary {
            interactions: indices.iter().map(|&i| self.interactions[i].clone()).collect(),
            metadata: self.metadata.clone(),
        }
    }
}

/// Groups raw events into interactions.
///
/// Each client payload opens an interaction; following server payloads are
/// concatenated in order into its response. A request with no server payload
/// before the next request (or the end of the stream) gets NO_RESPONSE.
pub fn normalize(events: &[RawEvent]) -> Result<Vec<Interaction>> {
    let mut out: Vec<Interaction> = Vec::new();
    let mut open: Option<(Message, Option<Message>)> = None;
    for (offset, ev) in events.iter().enumerate() {
        match ev.direction {
            Direction::ClientToServer => {
                if ev.payload.is_empty() {
                    return Err(GhostError::EmptyRequest(format!("event offset {offset}")));
                }
                if let Some(done) = open.take() {
                    out.push(close(done));
                }
                open = Some((ev.payload.clone(), None));
            }
            Direction::ServerToClient => match open.as_mut() {
                None => return Err(GhostError::OrphanResponse(offset)),
                Some((_, res)) => res.get_or_insert_with(Vec::new).extend_from_slice(&ev.payload),
            },
        }
    }
    if let Some(done) = open.take() {
        out.push(close(done));
    }
    Ok(out)
}

fn close((req, res): (Message, Option<Message>)) -> Interaction {
    match res {
        Some(res) => Interaction::new(req, res),
        None => Interaction::without_response(req),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<u64>,
    request: String,
    responses: Vec<String>,
}

impl TraceRecord {
    fn from_interaction(index: usize, it: &Interaction) -> Self {
        let responses = if it.no_response { Vec::new() } else { vec![B64.encode(&it.response)] };
        Self { index: Some(index as u64), request: B64.encode(&it.request), responses }
    }

    fn into_interaction(self, line: usize) -> Result<Interaction> {
        let request = decode(&self.request, line, "request")?;
        if request.is_empty() {
            return Err(GhostError::EmptyRequest(format!("line {line}")));
        }
        if self.responses.is_empty() {
            return Ok(Interaction::without_response(request));
        }
        let mut response = Vec::new();
        for (k, r) in self.responses.iter().enumerate() {
            response.extend(decode(r, line, &format!("responses[{k}]"))?);
        }
        Ok(Interaction::new(request, response))
    }
}

fn decode(s: &str, line: usize, field: &str) -> Result<Vec<u8>> {
    B64.decode(s).map_err(|_| GhostError::Base64 { line, field: field.to_string() })
}

/// Reads a JSONL trace file. Blank lines are skipped; line numbers are 1-based.
pub fn parse_trace_file<R: BufRead>(reader: R) -> Result<TraceLibrary> {
    let mut interactions = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(&line)
            .map_err(|e| GhostError::TraceLine { line: line_no, msg: e.to_string() })?;
        interactions.push(rec.into_interaction(line_no)?);
    }
    Ok(TraceLibrary::new(interactions))
}

/// Writes the normalized JSONL form: one line per interaction, indices
/// included, at most one response entry per line.
pub fn write_trace_file<W: Write>(lib: &TraceLibrary, mut w: W) -> Result<()> {
    for (i, it) in lib.interactions.iter().enumerate() {
        let line = serde_json::to_string(&TraceRecord::from_interaction(i, it))
            .map_err(|e| GhostError::Internal(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u64,
    strategy: Strategy,
    params: ModelParams,
    clusters: Vec<ClusterRecord>,
    library: LibraryRecord,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClusterRecord {
    members: Vec<usize>,
    centroid: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prototype: Option<PrototypeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PrototypeRecord {
    symbols: String,
    wildcard_mask: String,
    weights: Vec<f64>,
    f: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LibraryRecord {
    #[serde(flatten)]
    metadata: SourceMetadata,
    interactions: Vec<TraceRecord>,
}

impl PrototypeRecord {
    fn from_prototype(p: &ConsensusPrototype) -> Self {
        let bytes: Vec<u8> = p.symbols.iter().map(|s| s.byte().unwrap_or(0)).collect();
        let mask: String =
            p.symbols.iter().map(|s| if s.is_wildcard() { '1' } else { '0' }).collect();
        Self { symbols: B64.encode(bytes), wildcard_mask: mask, weights: p.weights.clone(), f: p.f_used }
    }

    fn into_prototype(self, cluster: usize) -> Result<ConsensusPrototype> {
        let bytes = B64
            .decode(&self.symbols)
            .map_err(|_| GhostError::ModelParse(format!("cluster {cluster}: invalid base64 in symbols")))?;
        if bytes.len() != self.wildcard_mask.len() || bytes.len() != self.weights.len() {
            return Err(GhostError::ModelParse(format!(
                "cluster {cluster}: symbols, mask and weights differ in length"
            )));
        }
        let mut symbols = Vec::with_capacity(bytes.len());
        for (b, m) in bytes.iter().zip(self.wildcard_mask.chars()) {
            symbols.push(match m {
                '0' => ProtoSymbol::Byte(*b),
                '1' => ProtoSymbol::Wildcard,
                other => {
                    return Err(GhostError::ModelParse(format!(
                        "cluster {cluster}: bad wildcard mask character {other:?}"
                    )))
                }
            });
        }
        Ok(ConsensusPrototype { symbols, weights: self.weights, f_used: self.f, cluster })
    }
}

/// Serializes a model as a single JSON document.
pub fn save_model<W: Write>(model: &ServiceModel, mut w: W) -> Result<()> {
    let file = ModelFile {
        version: MODEL_VERSION,
        strategy: model.strategy,
        params: model.params.clone(),
        clusters: model
            .clusters
            .iter()
            .map(|c| ClusterRecord {
                members: c.members.clone(),
                centroid: c.centroid,
                prototype: c.prototype.as_ref().map(PrototypeRecord::from_prototype),
            })
            .collect(),
        library: LibraryRecord {
            metadata: model.library.metadata.clone(),
            interactions: model
                .library
                .interactions
                .iter()
                .enumerate()
                .map(|(i, it)| TraceRecord::from_interaction(i, it))
                .collect(),
        },
    };
    serde_json::to_writer(&mut w, &file).map_err(|e| GhostError::Internal(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Loads a model written by [`save_model`].
pub fn load_model<R: std::io::Read>(r: R) -> Result<ServiceModel> {
    let value: serde_json::Value =
        serde_json::from_reader(r).map_err(|e| GhostError::ModelParse(e.to_string()))?;
    let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
    if found != MODEL_VERSION {
        return Err(GhostError::VersionMismatch { found, expected: MODEL_VERSION });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| GhostError::ModelParse(e.to_string()))?;
    let mut interactions = Vec::with_capacity(file.library.interactions.len());
    for (i, rec) in file.library.interactions.into_iter().enumerate() {
        interactions.push(rec.into_interaction(i + 1)?);
    }
    let library = TraceLibrary { interactions, metadata: file.library.metadata };
    let mut clusters = Vec::with_capacity(file.clusters.len());
    for (ci, c) in file.clusters.into_iter().enumerate() {
        let prototype = c.prototype.map(|p| p.into_prototype(ci)).transpose()?;
        clusters.push(ModelCluster { members: c.members, centroid: c.centroid, prototype });
    }
    let model = ServiceModel { strategy: file.strategy, params: file.params, library, clusters };
    model.check()?;
    Ok(model)
}
