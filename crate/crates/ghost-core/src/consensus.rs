//! Consensus prototypes: neighbor-joining guide tree, progressive multiple
//! alignment, per-column consensus with wildcards, and entropy weights.

use std::collections::BTreeMap;

use crate::alignment::{nw_path, AlignedSymbol, ScoringScheme};
use crate::error::{GhostError, Result};

/// A prototype position: a concrete byte or a wildcard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtoSymbol {
    Byte(u8),
    Wildcard,
}

impl ProtoSymbol {
    pub fn byte(self) -> Option<u8> {
        match self {
            ProtoSymbol::Byte(b) => Some(b),
            ProtoSymbol::Wildcard => None,
        }
    }

    pub fn is_wildcard(self) -> bool {
        matches!(self, ProtoSymbol::Wildcard)
    }
}

/// Stable bytes and wildcards of a cluster's requests, one weight per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusPrototype {
    pub symbols: Vec<ProtoSymbol>,
    pub weights: Vec<f64>,
    pub f_used: f64,
    pub cluster: usize,
}

impl ConsensusPrototype {
    /// Wildcards shown as `?`. Display only: a literal `?` byte looks the same.
    pub fn render(&self) -> String {
        self.symbols.iter().map(|s| s.byte().map_or('?', |b| b as char)).collect()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Binary guide tree over cluster positions `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuideTree {
    Leaf(usize),
    Join(Box<GuideTree>, Box<GuideTree>),
}

impl GuideTree {
    fn join(a: GuideTree, b: GuideTree) -> GuideTree {
        GuideTree::Join(Box::new(a), Box::new(b))
    }

    /// Leaves from left to right.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<usize>) {
        match self {
            GuideTree::Leaf(i) => out.push(*i),
            GuideTree::Join(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }
}

/// Neighbor joining on a symmetric `k x k` distance matrix.
///
/// Each step joins the pair minimizing `Q(i,j) = (n-2) d_ij - r_i - r_j`,
/// lowest pair first on ties. The new node is appended after the surviving
/// nodes; the last two nodes are joined as the root.
pub fn build_guide_tree(distances: &[Vec<f64>]) -> GuideTree {
    let k = distances.len();
    if k == 0 {
        return GuideTree::Leaf(0);
    }
    let mut nodes: Vec<GuideTree> = (0..k).map(GuideTree::Leaf).collect();
    let mut d: Vec<Vec<f64>> = distances.to_vec();
    while nodes.len() > 2 {
        let n = nodes.len();
        let r: Vec<f64> = d.iter().map(|row| row.iter().sum()).collect();
        let mut best = (f64::INFINITY, 0, 1);
        for i in 0..n {
            for j in i + 1..n {
                let q = (n as f64 - 2.0) * d[i][j] - r[i] - r[j];
                if q < best.0 - 1e-12 {
                    best = (q, i, j);
                }
            }
        }
        let (_, bi, bj) = best;
        let keep: Vec<usize> = (0..n).filter(|&x| x != bi && x != bj).collect();
        let new_d: Vec<f64> = keep.iter().map(|&x| (d[bi][x] + d[bj][x] - d[bi][bj]) / 2.0).collect();
        let mut next: Vec<Vec<f64>> = keep
            .iter()
            .enumerate()
            .map(|(a, &x)| {
                let mut row: Vec<f64> = keep.iter().map(|&y| d[x][y]).collect();
                row.push(new_d[a]);
                row
            })
            .collect();
        let mut last = new_d.clone();
        last.push(0.0);
        next.push(last);
        let mut old: Vec<Option<GuideTree>> = nodes.into_iter().map(Some).collect();
        let joined = GuideTree::join(old[bi].take().unwrap(), old[bj].take().unwrap());
        nodes = keep.iter().map(|&x| old[x].take().unwrap()).collect();
        nodes.push(joined);
        d = next;
    }
    let mut it = nodes.into_iter();
    let a = it.next().unwrap();
    match it.next() {
        Some(b) => GuideTree::join(a, b),
        None => a,
    }
}

/// Aligned rows; row `r` strips to cluster request `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MsaProfile {
    pub rows: Vec<Vec<AlignedSymbol>>,
}

impl MsaProfile {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn column(&self, i: usize) -> impl Iterator<Item = AlignedSymbol> + '_ {
        self.rows.iter().map(move |r| r[i])
    }

    pub fn column_stats(&self) -> Vec<ColumnStats> {
        (0..self.width()).map(|i| ColumnStats::from_column(self.column(i))).collect()
    }

    pub fn render(&self) -> Vec<String> {
        self.rows.iter().map(|r| crate::alignment::render(r)).collect()
    }
}

/// Symbol frequencies of one profile column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColumnStats {
    pub counts: BTreeMap<u8, usize>,
    pub gaps: usize,
}

impl ColumnStats {
    pub fn from_column(col: impl Iterator<Item = AlignedSymbol>) -> Self {
        let mut s = ColumnStats::default();
        for sym in col {
            match sym {
                Some(b) => *s.counts.entry(b).or_insert(0) += 1,
                None => s.gaps += 1,
            }
        }
        s
    }

    pub fn total(&self) -> usize {
        self.gaps + self.counts.values().sum::<usize>()
    }

    pub fn bytes(&self) -> usize {
        self.total() - self.gaps
    }

    /// Most frequent symbol; lowest byte on ties; a gap only wins outright.
    pub fn top(&self) -> (AlignedSymbol, usize) {
        let mut best: (AlignedSymbol, usize) = (None, 0);
        for (&b, &c) in &self.counts {
            if c > best.1 {
                best = (Some(b), c);
            }
        }
        if self.gaps > best.1 {
            best = (None, self.gaps);
        }
        best
    }

    /// Natural-log Shannon index with gaps counted as a symbol.
    pub fn entropy(&self) -> f64 {
        let k = self.total() as f64;
        if k == 0.0 {
            return 0.0;
        }
        self.counts
            .values()
            .copied()
            .chain(std::iter::once(self.gaps))
            .filter(|&c| c > 0)
            .map(|c| {
                let q = c as f64 / k;
                -q * q.ln()
            })
            .sum::<f64>()
            .max(0.0)
    }
}

/// Profile under construction with per-column counts for fast scoring.
struct Block {
    members: Vec<usize>,
    rows: Vec<Vec<AlignedSymbol>>,
}

struct Counted {
    bytes: Vec<(u8, u32)>,
    nbytes: u32,
    gaps: u32,
}

impl Block {
    fn counted(&self) -> Vec<Counted> {
        let width = self.rows[0].len();
        (0..width)
            .map(|i| {
                let st = ColumnStats::from_column(self.rows.iter().map(|r| r[i]));
                Counted {
                    bytes: st.counts.iter().map(|(&b, &c)| (b, c as u32)).collect(),
                    nbytes: st.bytes() as u32,
                    gaps: st.gaps as u32,
                }
            })
            .collect()
    }
}

/// Mean pairwise symbol score between two columns: bytes score `m`/`n`, a
/// byte against a gap scores `g`, gap against gap scores 0.
fn column_score(a: &Counted, b: &Counted, ka: u32, kb: u32, s: &ScoringScheme) -> f64 {
    let mut matches = 0u64;
    let (mut i, mut j) = (0, 0);
    while i < a.bytes.len() && j < b.bytes.len() {
        match a.bytes[i].0.cmp(&b.bytes[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                matches += a.bytes[i].1 as u64 * b.bytes[j].1 as u64;
                i += 1;
                j += 1;
            }
        }
    }
    let byte_pairs = a.nbytes as u64 * b.nbytes as u64;
    let byte_gap = a.nbytes as u64 * b.gaps as u64 + a.gaps as u64 * b.nbytes as u64;
    let total = s.m * matches as f64 + s.n * (byte_pairs - matches) as f64 + s.g * byte_gap as f64;
    total / (ka as f64 * kb as f64)
}

fn align_blocks(a: Block, b: Block, s: &ScoringScheme) -> Block {
    let ca = a.counted();
    let cb = b.counted();
    let (ka, kb) = (a.rows.len() as u32, b.rows.len() as u32);
    let (_, path) = nw_path(ca.len(), cb.len(), |i, j| column_score(&ca[i], &cb[j], ka, kb, s), |_| s.g, |_| s.g);
    let mut rows: Vec<Vec<AlignedSymbol>> = Vec::with_capacity(a.rows.len() + b.rows.len());
    for r in &a.rows {
        rows.push(path.iter().map(|&(i, _)| i.and_then(|i| r[i])).collect());
    }
    for r in &b.rows {
        rows.push(path.iter().map(|&(_, j)| j.and_then(|j| r[j])).collect());
    }
    let mut members = a.members;
    members.extend(b.members);
    Block { members, rows }
}

/// Progressive alignment from the leaves to the root of `tree`.
///
/// Every join aligns two profiles with NW: columns score as the mean pairwise
/// symbol score, and inserting a gap column into either profile costs `g`.
/// Gaps inserted into a profile go into all of its rows.
pub fn progressive_msa(requests: &[&[u8]], tree: &GuideTree, s: &ScoringScheme) -> MsaProfile {
    fn walk(t: &GuideTree, reqs: &[&[u8]], s: &ScoringScheme) -> Block {
        match t {
            GuideTree::Leaf(i) => Block { members: vec![*i], rows: vec![reqs[*i].iter().map(|&b| Some(b)).collect()] },
            GuideTree::Join(a, b) => align_blocks(walk(a, reqs, s), walk(b, reqs, s), s),
        }
    }
    if requests.is_empty() {
        return MsaProfile { rows: Vec::new() };
    }
    let block = walk(tree, requests, s);
    let mut rows = vec![Vec::new(); requests.len()];
    for (m, row) in block.members.into_iter().zip(block.rows) {
        rows[m] = row;
    }
    MsaProfile { rows }
}

/// Consensus symbols and the profile columns they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Consensus {
    pub symbols: Vec<ProtoSymbol>,
    pub columns: Vec<usize>,
}

/// Per-column consensus with frequency threshold `f`.
///
/// The top symbol is kept when its relative frequency reaches `f`; a column
/// whose top symbol is a gap with frequency at least one half is truncated
/// (removed); anything else becomes a wildcard.
pub fn derive_prototype(profile: &MsaProfile, f: f64) -> Result<Consensus> {
    if profile.rows.is_empty() || profile.width() == 0 {
        return Err(GhostError::EmptyProfile);
    }
    if !(f > 0.0 && f <= 1.0) {
        return Err(GhostError::Config(format!("f must be in (0, 1], got {f}")));
    }
    let k = profile.rows.len() as f64;
    let mut out = Consensus { symbols: Vec::new(), columns: Vec::new() };
    for (i, st) in profile.column_stats().iter().enumerate() {
        let (sym, count) = st.top();
        let q = count as f64 / k;
        match sym {
            Some(b) if q >= f => {
                out.symbols.push(ProtoSymbol::Byte(b));
                out.columns.push(i);
            }
            None if q >= 0.5 => {}
            _ => {
                out.symbols.push(ProtoSymbol::Wildcard);
                out.columns.push(i);
            }
        }
    }
    Ok(out)
}

pub fn column_entropies(profile: &MsaProfile) -> Vec<f64> {
    profile.column_stats().iter().map(ColumnStats::entropy).collect()
}

/// `w = 1 / (1 + b E)^c`.
pub fn entropy_weights(e: &[f64], b: f64, c: f64) -> Vec<f64> {
    e.iter().map(|&e| 1.0 / (1.0 + b * e).powf(c)).collect()
}

/// Parameters of prototype construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusConfig {
    pub f: f64,
    pub b: f64,
    pub c: f64,
    pub scheme: ScoringScheme,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self { f: 0.8, b: 1.0, c: 10.0, scheme: ScoringScheme::SUBSTITUTION }
    }
}

/// Guide tree, MSA, consensus and weights for one cluster.
///
/// `distances` is the `k x k` request dissimilarity matrix of the members.
pub fn build_prototype(
    requests: &[&[u8]],
    distances: &[Vec<f64>],
    cfg: &ConsensusConfig,
    cluster: usize,
) -> Result<(ConsensusPrototype, MsaProfile)> {
    if cfg.b <= 0.0 || cfg.c <= 0.0 {
        return Err(GhostError::Config("b and c must be positive".into()));
    }
    let tree = build_guide_tree(distances);
    let profile = progressive_msa(requests, &tree, &cfg.scheme);
    let cons = derive_prototype(&profile, cfg.f)?;
    let w_all = entropy_weights(&column_entropies(&profile), cfg.b, cfg.c);
    let weights = cons.columns.iter().map(|&i| w_all[i]).collect();
    Ok((ConsensusPrototype { symbols: cons.symbols, weights, f_used: cfg.f, cluster }, profile))
}
