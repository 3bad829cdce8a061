//! Symmetric-field identification and substitution.
//!
//! A symmetric field is a byte string shared by a recorded request and its
//! response. To answer a live request, the recorded request is aligned to it,
//! each field is mapped onto the live bytes, and those bytes overwrite the
//! field's occurrences in the recorded response.

use std::collections::BTreeMap;

use crate::alignment::{nw_align, Alignment, ScoringScheme};
use crate::error::{GhostError, Result};

/// Default minimum field length.
pub const DEFAULT_MIN_LEN: usize = 4;

/// `(match, rqpos, rsppos, length)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricField {
    pub matched: Vec<u8>,
    pub rqpos: Vec<usize>,
    pub rsppos: Vec<usize>,
    pub length: usize,
}

/// Non-overlapping occurrences of `pat` in `hay`, left to right.
pub fn occurrences(hay: &[u8], pat: &[u8]) -> Vec<usize> {
    let mut out = Vec::new();
    if pat.is_empty() || pat.len() > hay.len() {
        return out;
    }
    let mut i = 0;
    while i + pat.len() <= hay.len() {
        if &hay[i..i + pat.len()] == pat {
            out.push(i);
            i += pat.len();
        } else {
            i += 1;
        }
    }
    out
}

fn overlaps(a: usize, alen: usize, b: usize, blen: usize) -> bool {
    a < b + blen && b < a + alen
}

fn covered(pos: usize, len: usize, spans: &[(usize, usize)]) -> bool {
    spans.iter().any(|&(s, l)| s <= pos && pos + len <= s + l)
}

/// Maximal common substrings of at least `min_len` bytes.
///
/// Candidates are occurrence pairs that cannot be extended left or right.
/// Each distinct string records all its non-overlapping occurrences in both
/// messages. A string whose every occurrence lies inside occurrences of a
/// longer field is suppressed; remaining overlaps keep the longer field, then
/// the one starting earlier in the request. Output is ordered by first
/// request position.
pub fn identify_symmetric_fields(req: &[u8], res: &[u8], min_len: usize) -> Vec<SymmetricField> {
    let min_len = min_len.max(1);
    let (n, m) = (req.len(), res.len());
    // ext[j] on row i: length of the common run starting at req[i], res[j].
    let mut next = vec![0usize; m + 1];
    let mut cur = vec![0usize; m + 1];
    let mut strings: BTreeMap<Vec<u8>, ()> = BTreeMap::new();
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            cur[j] = if req[i] == res[j] { next[j + 1] + 1 } else { 0 };
            let l = cur[j];
            if l >= min_len && (i == 0 || j == 0 || req[i - 1] != res[j - 1]) {
                strings.insert(req[i..i + l].to_vec(), ());
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let mut cands: Vec<SymmetricField> = strings
        .into_keys()
        .map(|s| SymmetricField {
            rqpos: occurrences(req, &s),
            rsppos: occurrences(res, &s),
            length: s.len(),
            matched: s,
        })
        .collect();
    cands.sort_by(|a, b| b.length.cmp(&a.length).then(a.rqpos[0].cmp(&b.rqpos[0])).then(a.matched.cmp(&b.matched)));

    let suppressed: Vec<bool> = cands
        .iter()
        .map(|f| {
            let longer: Vec<&SymmetricField> = cands.iter().filter(|g| g.length > f.length).collect();
            let rq: Vec<(usize, usize)> = longer.iter().flat_map(|g| g.rqpos.iter().map(move |&p| (p, g.length))).collect();
            let rs: Vec<(usize, usize)> = longer.iter().flat_map(|g| g.rsppos.iter().map(move |&p| (p, g.length))).collect();
            f.rqpos.iter().all(|&p| covered(p, f.length, &rq)) && f.rsppos.iter().all(|&p| covered(p, f.length, &rs))
        })
        .collect();

    let mut kept: Vec<SymmetricField> = Vec::new();
    for (f, sup) in cands.into_iter().zip(suppressed) {
        if sup {
            continue;
        }
        let clash = kept.iter().any(|k| {
            f.rqpos.iter().any(|&p| k.rqpos.iter().any(|&q| overlaps(p, f.length, q, k.length)))
                || f.rsppos.iter().any(|&p| k.rsppos.iter().any(|&q| overlaps(p, f.length, q, k.length)))
        });
        if !clash {
            kept.push(f);
        }
    }
    kept.sort_by_key(|f| f.rqpos[0]);
    kept
}

/// NW alignment of the recorded request (row `a`) against the live request
/// (row `b`) under the (1, -1, -1) scheme.
pub fn align_for_substitution(centroid_req: &[u8], incoming: &[u8]) -> Alignment {
    nw_align(centroid_req, incoming, &ScoringScheme::SUBSTITUTION)
}

/// A field re-expressed in terms of the live request.
///
/// `rqpos` is the alignment column where the mapped span starts.
/// `rsppos` holds the response positions after all earlier substitutions have
/// been applied, so writing in ascending order needs no further adjustment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdatedField {
    pub matched: Vec<u8>,
    pub rqpos: usize,
    pub rsppos: Vec<usize>,
    pub length: usize,
    pub original: SymmetricField,
}

/// Maps each field's request span through the alignment.
///
/// The span runs from the column of its first byte (column 0 when the field
/// starts the request) up to the column of the byte after it (the alignment
/// end when it closes the request). The live bytes in those columns become the
/// new value, so deleted bytes shrink it and inserted bytes grow it. Fields
/// whose span holds no live bytes are dropped.
pub fn update_fields(fields: &[SymmetricField], alignment: &Alignment) -> Vec<UpdatedField> {
    let cols = alignment.len();
    let mut col_of_a = Vec::new();
    for c in 0..cols {
        if alignment.a[c].is_some() {
            col_of_a.push(c);
        }
    }
    let a_len = col_of_a.len();

    let mut out: Vec<UpdatedField> = Vec::new();
    for f in fields {
        let p = f.rqpos[0];
        let start = if p == 0 { 0 } else { col_of_a[p] };
        let end = if p + f.length >= a_len { cols } else { col_of_a[p + f.length] };
        let matched: Vec<u8> = alignment.b[start..end].iter().flatten().copied().collect();
        if matched.is_empty() {
            continue;
        }
        out.push(UpdatedField {
            length: matched.len(),
            rqpos: start,
            rsppos: f.rsppos.clone(),
            matched,
            original: f.clone(),
        });
    }

    let mut occ: Vec<(usize, usize, usize)> = out
        .iter()
        .enumerate()
        .flat_map(|(k, u)| u.original.rsppos.iter().enumerate().map(move |(o, &p)| (p, k, o)))
        .collect();
    occ.sort_unstable();
    let mut shift: isize = 0;
    for (p, k, o) in occ {
        out[k].rsppos[o] = (p as isize + shift) as usize;
        shift += out[k].length as isize - out[k].original.length as isize;
    }
    out
}

/// Overwrites every field occurrence in the recorded response with the live
/// value, in ascending response order.
pub fn substitute(centroid_res: &[u8], fields: &[UpdatedField]) -> Result<Vec<u8>> {
    let mut occ: Vec<(usize, usize)> =
        fields.iter().enumerate().flat_map(|(k, u)| u.rsppos.iter().map(move |&p| (p, k))).collect();
    occ.sort_unstable();
    let mut out = centroid_res.to_vec();
    for (p, k) in occ {
        let f = &fields[k];
        let old = f.original.length;
        if p + old > out.len() {
            return Err(GhostError::Internal(format!("field at {p}+{old} exceeds response of {} bytes", out.len())));
        }
        out.splice(p..p + old, f.matched.iter().copied());
    }
    Ok(out)
}

/// Full translation of a recorded pair for a live request.
pub fn translate(centroid_req: &[u8], centroid_res: &[u8], incoming: &[u8], min_len: usize) -> Result<Vec<u8>> {
    let fields = identify_symmetric_fields(centroid_req, centroid_res, min_len);
    if fields.is_empty() {
        return Ok(centroid_res.to_vec());
    }
    let al = align_for_substitution(centroid_req, incoming);
    substitute(centroid_res, &update_fields(&fields, &al))
}
