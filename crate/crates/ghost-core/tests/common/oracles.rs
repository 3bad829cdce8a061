//! Exhaustive reference implementations used to check the fast paths.

use ghost_core::alignment::{ScoringScheme, WeightedMatchConstants};
use ghost_core::clustering::DissimilarityMatrix;
use ghost_core::consensus::{ConsensusPrototype, ProtoSymbol};

/// Best score over every alignment of an `n`-row and `m`-column sequence,
/// found by enumerating all paths without memoization.
pub fn best_path_score(n: usize, m: usize, col: &dyn Fn(Option<usize>, Option<usize>) -> f64) -> f64 {
    fn go(i: usize, j: usize, n: usize, m: usize, col: &dyn Fn(Option<usize>, Option<usize>) -> f64) -> f64 {
        if i == n && j == m {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        if i < n && j < m {
            best = best.max(col(Some(i), Some(j)) + go(i + 1, j + 1, n, m, col));
        }
        if i < n {
            best = best.max(col(Some(i), None) + go(i + 1, j, n, m, col));
        }
        if j < m {
            best = best.max(col(None, Some(j)) + go(i, j + 1, n, m, col));
        }
        best
    }
    go(0, 0, n, m, col)
}

pub fn brute_nw_score(a: &[u8], b: &[u8], s: &ScoringScheme) -> f64 {
    best_path_score(a.len(), b.len(), &|i, j| match (i, j) {
        (Some(i), Some(j)) => {
            if a[i] == b[j] {
                s.m
            } else {
                s.n
            }
        }
        _ => s.g,
    })
}

pub fn brute_weighted_score(p: &ConsensusPrototype, r: &[u8], k: &WeightedMatchConstants) -> f64 {
    best_path_score(p.symbols.len(), r.len(), &|i, j| match (i, j) {
        (Some(i), Some(j)) => {
            let w = p.weights[i];
            match p.symbols[i] {
                ProtoSymbol::Wildcard => w * k.x,
                ProtoSymbol::Byte(b) if b == r[j] => w * k.m,
                ProtoSymbol::Byte(_) => w * k.d,
            }
        }
        (Some(i), None) => {
            let w = p.weights[i];
            match p.symbols[i] {
                ProtoSymbol::Wildcard => w * k.x,
                ProtoSymbol::Byte(_) => w * k.d,
            }
        }
        _ => 0.0,
    })
}

/// Non-overlapping left-to-right occurrences.
fn occ(hay: &[u8], pat: &[u8]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + pat.len() <= hay.len() {
        if hay[i..].starts_with(pat) {
            out.push(i);
            i += pat.len();
        } else {
            i += 1;
        }
    }
    out
}

/// `(match, rqpos, rsppos)` triples chosen by a direct scan of every pair of
/// start positions.
pub fn naive_symmetric_fields(req: &[u8], res: &[u8], min_len: usize) -> Vec<(Vec<u8>, Vec<usize>, Vec<usize>)> {
    let mut strings: Vec<Vec<u8>> = Vec::new();
    for i in 0..req.len() {
        for j in 0..res.len() {
            if i > 0 && j > 0 && req[i - 1] == res[j - 1] {
                continue;
            }
            let mut l = 0;
            while i + l < req.len() && j + l < res.len() && req[i + l] == res[j + l] {
                l += 1;
            }
            if l >= min_len && !strings.contains(&req[i..i + l].to_vec()) {
                strings.push(req[i..i + l].to_vec());
            }
        }
    }
    let cands: Vec<(Vec<u8>, Vec<usize>, Vec<usize>)> =
        strings.into_iter().map(|s| (s.clone(), occ(req, &s), occ(res, &s))).collect();
    let inside = |p: usize, l: usize, spans: &[(usize, usize)]| spans.iter().any(|&(s, sl)| s <= p && p + l <= s + sl);
    let mut survivors: Vec<&(Vec<u8>, Vec<usize>, Vec<usize>)> = cands
        .iter()
        .filter(|(s, rq, rs)| {
            let l = s.len();
            let mut q = Vec::new();
            let mut r = Vec::new();
            for (t, tq, tr) in &cands {
                if t.len() > l {
                    q.extend(tq.iter().map(|&p| (p, t.len())));
                    r.extend(tr.iter().map(|&p| (p, t.len())));
                }
            }
            !(rq.iter().all(|&p| inside(p, l, &q)) && rs.iter().all(|&p| inside(p, l, &r)))
        })
        .collect();
    survivors.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1[0].cmp(&b.1[0])).then(a.0.cmp(&b.0)));
    let mut kept: Vec<(Vec<u8>, Vec<usize>, Vec<usize>)> = Vec::new();
    let clash = |p: usize, pl: usize, q: usize, ql: usize| p < q + ql && q < p + pl;
    for f in survivors {
        let l = f.0.len();
        let hit = kept.iter().any(|k| {
            let kl = k.0.len();
            f.1.iter().any(|&p| k.1.iter().any(|&q| clash(p, l, q, kl)))
                || f.2.iter().any(|&p| k.2.iter().any(|&q| clash(p, l, q, kl)))
        });
        if !hit {
            kept.push(f.clone());
        }
    }
    kept.sort_by_key(|f| f.1[0]);
    kept
}

/// Member minimizing the summed distance, lowest index among equal sums.
pub fn exhaustive_centroid(cluster: &[usize], dm: &DissimilarityMatrix) -> usize {
    let mut best: Option<(f64, usize)> = None;
    for &i in cluster {
        let mut s = 0.0;
        for &k in cluster {
            s += dm.get(i, k);
        }
        best = match best {
            Some((bs, bi)) if bs < s || (bs == s && bi < i) => Some((bs, bi)),
            _ => Some((s, i)),
        };
    }
    best.unwrap().1
}
