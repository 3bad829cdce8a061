//! Dissimilarity matrices, VAT reordering (modified Prim and bond energy),
//! dissimilarity images, block partitioning and centroid selection.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::dissimilarity_ratio;
use crate::error::{GhostError, Result};
use crate::trace::{Interaction, TraceLibrary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Request,
    Response,
}

/// Symmetric `n x n` matrix of dissimilarity ratios with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    pub basis: Basis,
}

impl DissimilarityMatrix {
    /// Wraps explicit rows. Rows must form a square matrix.
    pub fn from_rows(rows: &[Vec<f64>], basis: Basis) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(GhostError::Config("matrix rows must be square".into()));
        }
        Ok(Self { n, values: rows.concat(), basis })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n.max(1)).take(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Submatrix over `idx`, in the given order.
    pub fn select(&self, idx: &[usize]) -> DissimilarityMatrix {
        let values = idx.iter().flat_map(|&i| idx.iter().map(move |&j| (i, j))).map(|(i, j)| self.get(i, j)).collect();
        DissimilarityMatrix { n: idx.len(), values, basis: self.basis }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_off_diagonal(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let total: f64 = (0..self.n).flat_map(|i| (0..self.n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| self.get(i, j)).sum();
        total / (self.n * (self.n - 1)) as f64
    }

    /// Matrix with rows and columns permuted by `perm`.
    pub fn permuted(&self, perm: &Permutation) -> DissimilarityMatrix {
        self.select(&perm.order)
    }
}

fn pair_distance(a: &Interaction, b: &Interaction, basis: Basis) -> f64 {
    let (x, y) = match basis {
        Basis::Response if !a.no_response && !b.no_response => (&a.response, &b.response),
        _ => (&a.request, &b.request),
    };
    // Requests are non-empty, so only two empty responses can fail; they are identical.
    dissimilarity_ratio(x, y).unwrap_or(0.0)
}

/// All pairwise dissimilarity ratios, each unordered pair computed once.
///
/// With the response basis, pairs where either side has no response fall back
/// to comparing requests. Rows are computed in parallel; the result is the same
/// as sequential evaluation.
pub fn build_matrix(lib: &TraceLibrary, basis: Basis) -> Result<DissimilarityMatrix> {
    let n = lib.len();
    if n < 2 {
        return Err(GhostError::MatrixTooSmall(n));
    }
    Ok(build_matrix_unchecked(&lib.interactions, basis))
}

pub(crate) fn build_matrix_unchecked(items: &[Interaction], basis: Basis) -> DissimilarityMatrix {
    let n = items.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| pair_distance(&items[i], &items[j], basis)).collect())
        .collect();
    let mut values = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &d) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DissimilarityMatrix { n, values, basis }
}

/// A bijection on `0..n`; `order[p]` is the original index at position `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    pub order: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { order: (0..n).collect() }
    }

    pub fn is_valid(&self) -> bool {
        let mut seen = vec![false; self.order.len()];
        self.order.iter().all(|&i| i < seen.len() && !std::mem::replace(&mut seen[i], true))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reorder {
    Prim,
    Bea,
}

/// Modified Prim ordering.
///
/// Starts from the row index of the largest entry (lowest row, then lowest
/// column on ties) and repeatedly appends the unplaced index nearest to any
/// placed index, lowest index on ties.
pub fn vat_reorder_prim(dm: &DissimilarityMatrix) -> Permutation {
    let n = dm.n();
    if n == 0 {
        return Permutation { order: Vec::new() };
    }
    let mut seed = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            if dm.get(i, j) > best {
                best = dm.get(i, j);
                seed = i;
            }
        }
    }
    let mut placed = vec![false; n];
    let mut near = vec![f64::INFINITY; n];
    let mut order = Vec::with_capacity(n);
    let mut last = seed;
    placed[seed] = true;
    order.push(seed);
    while order.len() < n {
        let mut pick = usize::MAX;
        for k in 0..n {
            if placed[k] {
                continue;
            }
            near[k] = near[k].min(dm.get(last, k));
            if pick == usize::MAX || near[k] < near[pick] {
                pick = k;
            }
        }
        placed[pick] = true;
        order.push(pick);
        last = pick;
    }
    Permutation { order }
}

/// `bond(x, y) = sum_z (1 - d_zx)(1 - d_zy)`.
pub fn bond(dm: &DissimilarityMatrix, x: usize, y: usize) -> f64 {
    (0..dm.n()).map(|z| (1.0 - dm.get(z, x)) * (1.0 - dm.get(z, y))).sum()
}

fn bond_opt(dm: &DissimilarityMatrix, x: Option<usize>, y: Option<usize>) -> f64 {
    match (x, y) {
        (Some(x), Some(y)) => bond(dm, x, y),
        _ => 0.0,
    }
}

/// Contribution of placing `k` between `i` and `j`; `None` is a boundary.
pub fn contribution(dm: &DissimilarityMatrix, i: Option<usize>, k: usize, j: Option<usize>) -> f64 {
    2.0 * bond_opt(dm, i, Some(k)) + 2.0 * bond_opt(dm, Some(k), j) - 2.0 * bond_opt(dm, i, j)
}

/// Bond energy ordering.
///
/// Columns 0 and 1 seed the order; each further column goes to the slot with
/// the largest contribution, leftmost on ties. Rows follow the columns.
pub fn bea_reorder(dm: &DissimilarityMatrix) -> Permutation {
    let n = dm.n();
    let mut order: Vec<usize> = (0..n.min(2)).collect();
    let bonds: Vec<Vec<f64>> = (0..n).map(|x| (0..n).map(|y| bond(dm, x, y)).collect()).collect();
    let b = |x: Option<usize>, y: Option<usize>| match (x, y) {
        (Some(x), Some(y)) => bonds[x][y],
        _ => 0.0,
    };
    for k in 2..n {
        let mut best = (f64::NEG_INFINITY, 0);
        for p in 0..=order.len() {
            let left = p.checked_sub(1).map(|q| order[q]);
            let right = order.get(p).copied();
            let c = 2.0 * b(left, Some(k)) + 2.0 * b(Some(k), right) - 2.0 * b(left, right);
            if c > best.0 + 1e-12 {
                best = (c, p);
            }
        }
        order.insert(best.1, k);
    }
    Permutation { order }
}

/// Bond energy global measure of the matrix in the given order.
pub fn global_measure(dm: &DissimilarityMatrix, perm: &Permutation) -> f64 {
    let n = dm.n();
    let d = |i: usize, j: isize| -> f64 {
        if j < 0 || j as usize >= n {
            0.0
        } else {
            dm.get(perm.order[i], perm.order[j as usize])
        }
    };
    let mut gm = 0.0;
    for i in 0..n {
        for j in 0..n {
            let ji = j as isize;
            let (l, r) = (if j == 0 { 0.0 } else { d(i, ji - 1) }, if j + 1 == n { 0.0 } else { d(i, ji + 1) });
            gm += (1.0 - d(i, ji)) * (2.0 - l - r);
        }
    }
    gm
}

/// Grayscale raster; one byte per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Binary PGM (P5).
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)?;
        Ok(())
    }
}

/// Intensity `round(255 d / d_max)` for each cell of the reordered matrix;
/// all black when every entry is zero.
pub fn render_image(dm: &DissimilarityMatrix, perm: &Permutation) -> GrayImage {
    let n = dm.n();
    let dmax = dm.max();
    let mut pixels = Vec::with_capacity(n * n);
    for &i in &perm.order {
        for &j in &perm.order {
            let v = if dmax > 0.0 { (255.0 * dm.get(i, j) / dmax).round() as u8 } else { 0 };
            pixels.push(v);
        }
    }
    GrayImage { width: n, height: n, pixels }
}

/// How reordered indices are cut into blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionConfig {
    /// Cut positions into the permuted order, strictly increasing in `1..n`.
    Boundaries(Vec<usize>),
    /// Grow a block while the next row's mean distance to it stays within
    /// `tau`; `None` means half the mean off-diagonal distance.
    Auto { tau: Option<f64> },
}

/// Disjoint clusters, optionally with centroids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<usize>>,
    pub centroids: Vec<Option<usize>>,
}

impl ClusterSet {
    pub fn new(clusters: Vec<Vec<usize>>) -> Self {
        let centroids = vec![None; clusters.len()];
        Self { clusters, centroids }
    }

    pub fn is_disjoint(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.clusters.iter().flatten().all(|i| seen.insert(*i))
    }
}

/// Splits the permuted order into contiguous blocks.
pub fn partition(dm: &DissimilarityMatrix, perm: &Permutation, cfg: &PartitionConfig) -> Result<ClusterSet> {
    let n = perm.order.len();
    let cuts: Vec<usize> = match cfg {
        PartitionConfig::Boundaries(b) => {
            let mut prev = 0;
            for &c in b {
                if c <= prev || c >= n {
                    return Err(GhostError::InvalidBoundaries(format!(
                        "{b:?} must be strictly increasing within 1..{n}"
                    )));
                }
                prev = c;
            }
            b.clone()
        }
        PartitionConfig::Auto { tau } => {
            let tau = tau.unwrap_or_else(|| 0.5 * dm.mean_off_diagonal());
            let mut cuts = Vec::new();
            let mut start = 0;
            for p in 1..n {
                let cand = perm.order[p];
                let mean = perm.order[start..p].iter().map(|&m| dm.get(cand, m)).sum::<f64>() / (p - start) as f64;
                if mean > tau {
                    cuts.push(p);
                    start = p;
                }
            }
            cuts
        }
    };
    let mut clusters = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0;
    for end in cuts.into_iter().chain(std::iter::once(n)) {
        if end > start {
            clusters.push(perm.order[start..end].to_vec());
        }
        start = end;
    }
    Ok(ClusterSet::new(clusters))
}

/// Summed request distance of each member to the others.
pub fn centroid_sums(cluster: &[usize], request_dm: &DissimilarityMatrix) -> Vec<f64> {
    cluster.iter().map(|&i| cluster.iter().map(|&k| request_dm.get(i, k)).sum()).collect()
}

/// Member with the lowest summed request distance; lowest index on ties.
pub fn select_centroid(cluster: &[usize], request_dm: &DissimilarityMatrix) -> Result<usize> {
    if cluster.is_empty() {
        return Err(GhostError::EmptyCluster(0));
    }
    let sums = centroid_sums(cluster, request_dm);
    let mut best = 0;
    for p in 1..cluster.len() {
        if sums[p] < sums[best] || (sums[p] == sums[best] && cluster[p] < cluster[best]) {
            best = p;
        }
    }
    Ok(cluster[best])
}
