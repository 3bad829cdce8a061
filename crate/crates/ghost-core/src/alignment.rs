//! Needleman-Wunsch global alignment, the dissimilarity ratio, and the
//! entropy-weighted wildcard variant used to match requests to prototypes.

use serde::{Deserialize, Serialize};

use crate::consensus::{ConsensusPrototype, ProtoSymbol};
use crate::error::{GhostError, Result};

/// Tolerance for comparing DP cells during traceback.
const EPS: f64 = 1e-9;

/// Linear scoring scheme: match `m`, mismatch `n`, gap `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringScheme {
    pub m: f64,
    pub n: f64,
    pub g: f64,
}

impl ScoringScheme {
    /// (1, -1, 0): used for message distances. Mismatches never pay off, so
    /// optimal alignments consist of matches and gaps only.
    pub const MATCHING: ScoringScheme = ScoringScheme { m: 1.0, n: -1.0, g: 0.0 };
    /// (1, -1, -1): used to line up requests for field substitution.
    pub const SUBSTITUTION: ScoringScheme = ScoringScheme { m: 1.0, n: -1.0, g: -1.0 };

    pub fn pair(&self, x: u8, y: u8) -> f64 {
        if x == y {
            self.m
        } else {
            self.n
        }
    }
}

/// An aligned byte or a gap.
pub type AlignedSymbol = Option<u8>;

/// Two equal-length rows over bytes and gaps (`None`).
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub a: Vec<AlignedSymbol>,
    pub b: Vec<AlignedSymbol>,
    pub score: f64,
}

impl Alignment {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        self.a.iter().chain(&self.b).filter(|s| s.is_none()).count()
    }

    /// Row `a` with gaps rendered as `-`; for display and tests.
    pub fn render_a(&self) -> String {
        render(&self.a)
    }

    pub fn render_b(&self) -> String {
        render(&self.b)
    }
}

pub fn render(row: &[AlignedSymbol]) -> String {
    row.iter().map(|s| s.map_or('-', |b| b as char)).collect()
}

/// Removes gaps from an aligned row.
pub fn strip(row: &[AlignedSymbol]) -> Vec<u8> {
    row.iter().flatten().copied().collect()
}

/// Traceback step preference.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Step {
    Diag,
    Up,
    Left,
}

/// One alignment column as (row index, column index); `None` is a gap.
pub(crate) type PathStep = (Option<usize>, Option<usize>);

/// Generic NW fill and traceback.
///
/// `sub(i, j)` scores row item `i` against column item `j`, `up(i)` scores row
/// item `i` against a gap, `left(j)` scores column item `j` against a gap.
/// Ties in traceback prefer diagonal, then up (row item against a gap), then
/// left. Returns the score and the column path.
pub(crate) fn nw_path<S, U, L>(rows: usize, cols: usize, sub: S, up: U, left: L) -> (f64, Vec<PathStep>)
where
    S: Fn(usize, usize) -> f64,
    U: Fn(usize) -> f64,
    L: Fn(usize) -> f64,
{
    let w = cols + 1;
    let mut f = vec![0.0f64; (rows + 1) * w];
    for j in 1..=cols {
        f[j] = f[j - 1] + left(j - 1);
    }
    for i in 1..=rows {
        f[i * w] = f[(i - 1) * w] + up(i - 1);
        let ug = up(i - 1);
        for j in 1..=cols {
            let d = f[(i - 1) * w + j - 1] + sub(i - 1, j - 1);
            let u = f[(i - 1) * w + j] + ug;
            let l = f[i * w + j - 1] + left(j - 1);
            f[i * w + j] = d.max(u).max(l);
        }
    }
    let score = f[rows * w + cols];
    let mut path = Vec::with_capacity(rows + cols);
    let (mut i, mut j) = (rows, cols);
    while i > 0 || j > 0 {
        let here = f[i * w + j];
        let step = if i > 0 && j > 0 && (here - (f[(i - 1) * w + j - 1] + sub(i - 1, j - 1))).abs() <= EPS {
            Step::Diag
        } else if i > 0 && (here - (f[(i - 1) * w + j] + up(i - 1))).abs() <= EPS {
            Step::Up
        } else {
            Step::Left
        };
        match step {
            Step::Diag => {
                i -= 1;
                j -= 1;
                path.push((Some(i), Some(j)));
            }
            Step::Up => {
                i -= 1;
                path.push((Some(i), None));
            }
            Step::Left => {
                j -= 1;
                path.push((None, Some(j)));
            }
        }
    }
    path.reverse();
    (score, path)
}

/// Global alignment of `a` against `b` under `s`.
pub fn nw_align(a: &[u8], b: &[u8], s: &ScoringScheme) -> Alignment {
    let (score, path) = nw_path(a.len(), b.len(), |i, j| s.pair(a[i], b[j]), |_| s.g, |_| s.g);
    let (ra, rb) = path.iter().map(|&(i, j)| (i.map(|i| a[i]), j.map(|j| b[j]))).unzip();
    Alignment { a: ra, b: rb, score }
}

/// Optimal score only, in linear memory.
pub fn nw_score(a: &[u8], b: &[u8], s: &ScoringScheme) -> f64 {
    let mut prev: Vec<f64> = (0..=b.len()).map(|j| j as f64 * s.g).collect();
    let mut cur = vec![0.0; b.len() + 1];
    for (i, &x) in a.iter().enumerate() {
        cur[0] = (i + 1) as f64 * s.g;
        for (j, &y) in b.iter().enumerate() {
            let d = prev[j] + s.pair(x, y);
            cur[j + 1] = d.max(prev[j + 1] + s.g).max(cur[j] + s.g);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Optimal (1, -1, 0) score in integer arithmetic and linear memory.
fn matching_score(a: &[u8], b: &[u8]) -> i64 {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut row = vec![0i64; b.len() + 1];
    for &x in a {
        let mut diag = 0i64;
        for (j, &y) in b.iter().enumerate() {
            let up = row[j + 1];
            let d = diag + if x == y { 1 } else { -1 };
            let v = d.max(up).max(row[j]);
            diag = up;
            row[j + 1] = v;
        }
    }
    row[b.len()]
}

/// Number of gap symbols in the optimal (1, -1, 0) alignment.
///
/// Any column with a mismatch can be split into two gap columns for a strict
/// gain, so the optimal alignment has only match and gap columns; its gap count
/// is therefore |a| + |b| - 2 * score for every optimal traceback.
pub fn matching_gap_count(a: &[u8], b: &[u8]) -> usize {
    let score = matching_score(a, b);
    a.len() + b.len() - 2 * score as usize
}

/// Gaps of the optimal (1, -1, 0) alignment over the summed lengths.
pub fn dissimilarity_ratio(a: &[u8], b: &[u8]) -> Result<f64> {
    let total = a.len() + b.len();
    if total == 0 {
        return Err(GhostError::UndefinedRatio);
    }
    Ok(matching_gap_count(a, b) as f64 / total as f64)
}

/// Constants of the weighted wildcard score.
///
/// A prototype column `i` facing a request byte scores `w_i * M` when equal,
/// `w_i * D` when different and `w_i * X` when the column is a wildcard. A
/// column facing a gap scores `w_i * D` (concrete) or `w_i * X` (wildcard); a
/// request byte facing a gap scores 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMatchConstants {
    pub m: f64,
    pub d: f64,
    pub x: f64,
}

impl Default for WeightedMatchConstants {
    fn default() -> Self {
        Self { m: 1.0, d: -1.0, x: 0.0 }
    }
}

impl WeightedMatchConstants {
    pub fn validate(&self) -> Result<()> {
        if self.d < self.x && self.x <= self.m {
            Ok(())
        } else {
            Err(GhostError::Config(format!("need D < X <= M, got D={} X={} M={}", self.d, self.x, self.m)))
        }
    }

    fn column(&self, sym: ProtoSymbol, w: f64, byte: u8) -> f64 {
        match sym {
            ProtoSymbol::Wildcard => w * self.x,
            ProtoSymbol::Byte(p) if p == byte => w * self.m,
            ProtoSymbol::Byte(_) => w * self.d,
        }
    }

    fn column_gap(&self, sym: ProtoSymbol, w: f64) -> f64 {
        match sym {
            ProtoSymbol::Wildcard => w * self.x,
            ProtoSymbol::Byte(_) => w * self.d,
        }
    }

    fn column_self(&self, sym: ProtoSymbol, w: f64) -> f64 {
        match sym {
            ProtoSymbol::Wildcard => w * self.x,
            ProtoSymbol::Byte(_) => w * self.m,
        }
    }
}

/// Optimal weighted alignment score of request `r` against prototype `p`.
pub fn weighted_prototype_score(p: &ConsensusPrototype, r: &[u8], k: &WeightedMatchConstants) -> f64 {
    let mut prev = vec![0.0f64; r.len() + 1];
    let mut cur = vec![0.0f64; r.len() + 1];
    for (&sym, &w) in p.symbols.iter().zip(&p.weights) {
        let gap = k.column_gap(sym, w);
        cur[0] = prev[0] + gap;
        for (j, &byte) in r.iter().enumerate() {
            let d = prev[j] + k.column(sym, w, byte);
            cur[j + 1] = d.max(prev[j + 1] + gap).max(cur[j]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[r.len()]
}

/// Score of an exact instantiation: every column at its self-score.
pub fn s_max(p: &ConsensusPrototype, k: &WeightedMatchConstants) -> f64 {
    p.symbols.iter().zip(&p.weights).map(|(&s, &w)| k.column_self(s, w)).sum()
}

/// Score with every prototype column gapped.
pub fn s_min(p: &ConsensusPrototype, k: &WeightedMatchConstants) -> f64 {
    p.symbols.iter().zip(&p.weights).map(|(&s, &w)| k.column_gap(s, w)).sum()
}

/// `1 - (s - s_min) / (s_max - s_min)`, clamped to [0, 1].
pub fn relative_distance(p: &ConsensusPrototype, r: &[u8], k: &WeightedMatchConstants) -> Result<f64> {
    let hi = s_max(p, k);
    let lo = s_min(p, k);
    let span = hi - lo;
    if !p.symbols.iter().any(|s| !s.is_wildcard()) || span <= 0.0 {
        return Err(GhostError::DegeneratePrototype);
    }
    let s = weighted_prototype_score(p, r, k);
    Ok((1.0 - (s - lo) / span).clamp(0.0, 1.0))
}
