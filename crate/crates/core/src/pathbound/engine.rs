//! Per-edge accumulation of `sum |gamma|_w pi(x) pi_A(y)` over the paths
//! that cross each edge.
//!
//! Both engines return, for a range of source states, one accumulator per
//! edge slot plus the number of pairs visited. Callers split sources into
//! fixed chunks and add the partial accumulators in chunk order, so results
//! do not depend on the thread count.

use std::ops::Range;

use super::paths::{PathSystem, TargetSet};
use crate::chain::GridChain;
use crate::{Error, Result};

pub(super) struct Inputs<'a> {
    pub chain: &'a GridChain,
    pub paths: &'a PathSystem,
    /// `1 / w(e)^2` by edge slot.
    pub inv_w2: &'a [f64],
    pub pi: &'a [f64],
    pub symmetric: bool,
}

/// Walks every path explicitly. Works for every rule and mode.
pub(super) fn direct(inp: &Inputs, sources: Range<usize>) -> Result<(Vec<f64>, u64)> {
    let g = inp.chain.grid();
    let n = g.len();
    let mut acc = vec![0.0; g.edge_slots()];
    let mut verts = Vec::new();
    let mut slots = Vec::new();
    let mut pairs = 0;
    let targets: Range<usize> = match inp.paths.mode() {
        TargetSet::Pairs => 0..n,
        TargetSet::ToPoint { state } => state..state + 1,
    };
    let to_point = inp.paths.mode() != TargetSet::Pairs;
    for x in sources {
        let px = inp.pi[x];
        for y in targets.clone() {
            if x == y || (inp.symmetric && px > inp.pi[y]) {
                continue;
            }
            inp.paths.path_into(x, y, &mut verts)?;
            slots.clear();
            let mut len = 0.0;
            for w in verts.windows(2) {
                let id = g
                    .edge_between(w[0], w[1])
                    .filter(|&id| inp.chain.conductance(id) > 0.0)
                    .ok_or_else(|| Error::InvalidPath {
                        from: x,
                        to: y,
                        reason: format!("step {} -> {} is not an edge of the chain", w[0], w[1]),
                    })?;
                len += inp.inv_w2[id];
                slots.push(id);
            }
            let c = len * px * if to_point { 1.0 } else { inp.pi[y] };
            for &id in &slots {
                acc[id] += c;
            }
            pairs += 1;
        }
    }
    Ok((acc, pairs))
}

/// Fast engine for pair systems whose paths run along two sides of the
/// bounding rectangle (segments in one dimension). For each source the
/// path lengths come from outward partial sums along lines, deposits are
/// binned by the end of each straight run, and suffix sums turn the bins
/// into per-edge totals. Cost is `O(|B|)` per source.
pub(super) fn corner(inp: &Inputs, sources: Range<usize>) -> (Vec<f64>, u64) {
    let g = inp.chain.grid();
    let n = g.len();
    let (n0, n1) = if g.dim() == 1 {
        (n, 1)
    } else {
        (g.extent(0), g.extent(1))
    };
    let inv = inp.inv_w2;
    let pi = inp.pi;
    // Axis-0 edge from (i, j) and axis-1 edge from (i, j).
    let e0 = |i: usize, j: usize| i * n1 + j;
    let e1 = |i: usize, j: usize| n + i * n1 + j;

    let mut acc = vec![0.0; g.edge_slots()];
    let mut h = vec![0.0; n0];
    let mut v = vec![0.0; n1];
    let mut col = vec![0.0; n];
    let mut row = vec![0.0; n];
    let mut first_h = vec![0.0; n0];
    let mut first_v = vec![0.0; n1];
    let mut second_h = vec![0.0; n];
    let mut second_v = vec![0.0; n];
    let mut pairs = 0;

    for x in sources {
        let (a, b) = (x / n1, x % n1);
        // Lengths from x along its own lines.
        h[a] = 0.0;
        for i in a + 1..n0 {
            h[i] = h[i - 1] + inv[e0(i - 1, b)];
        }
        for i in (0..a).rev() {
            h[i] = h[i + 1] + inv[e0(i, b)];
        }
        v[b] = 0.0;
        for j in b + 1..n1 {
            v[j] = v[j - 1] + inv[e1(a, j - 1)];
        }
        for j in (0..b).rev() {
            v[j] = v[j + 1] + inv[e1(a, j)];
        }
        // col[(i, j)]: along axis 1 from (i, b) to (i, j).
        // row[(i, j)]: along axis 0 from (a, j) to (i, j).
        for i in 0..n0 {
            let base = i * n1;
            col[base + b] = 0.0;
            for j in b + 1..n1 {
                col[base + j] = col[base + j - 1] + inv[e1(i, j - 1)];
            }
            for j in (0..b).rev() {
                col[base + j] = col[base + j + 1] + inv[e1(i, j)];
            }
        }
        row[a * n1..(a + 1) * n1].fill(0.0);
        for i in a + 1..n0 {
            for j in 0..n1 {
                row[i * n1 + j] = row[(i - 1) * n1 + j] + inv[e0(i - 1, j)];
            }
        }
        for i in (0..a).rev() {
            for j in 0..n1 {
                row[i * n1 + j] = row[(i + 1) * n1 + j] + inv[e0(i, j)];
            }
        }

        first_h.fill(0.0);
        first_v.fill(0.0);
        second_h.fill(0.0);
        second_v.fill(0.0);
        let px = pi[x];
        for y in 0..n {
            if y == x || (inp.symmetric && px > pi[y]) {
                continue;
            }
            let (c, d) = (y / n1, y % n1);
            if inp.paths.axis0_first(x, y) {
                let val = (h[c] + col[y]) * px * pi[y];
                first_h[c] += val;
                second_h[y] += val;
            } else {
                let val = (v[d] + row[y]) * px * pi[y];
                first_v[d] += val;
                second_v[y] += val;
            }
            pairs += 1;
        }

        // An edge on a run starting at x is crossed by every deposit whose
        // run ends beyond it.
        let mut s = 0.0;
        for p in (a..n0 - 1).rev() {
            s += first_h[p + 1];
            acc[e0(p, b)] += s;
        }
        s = 0.0;
        for p in 0..a {
            s += first_h[p];
            acc[e0(p, b)] += s;
        }
        s = 0.0;
        for q in (b..n1 - 1).rev() {
            s += first_v[q + 1];
            acc[e1(a, q)] += s;
        }
        s = 0.0;
        for q in 0..b {
            s += first_v[q];
            acc[e1(a, q)] += s;
        }
        for i in 0..n0 {
            let base = i * n1;
            s = 0.0;
            for q in (b..n1 - 1).rev() {
                s += second_h[base + q + 1];
                acc[e1(i, q)] += s;
            }
            s = 0.0;
            for q in 0..b {
                s += second_h[base + q];
                acc[e1(i, q)] += s;
            }
        }
        for j in 0..n1 {
            s = 0.0;
            for p in (a..n0 - 1).rev() {
                s += second_v[(p + 1) * n1 + j];
                acc[e0(p, j)] += s;
            }
            s = 0.0;
            for p in 0..a {
                s += second_v[p * n1 + j];
                acc[e0(p, j)] += s;
            }
        }
    }
    (acc, pairs)
}
