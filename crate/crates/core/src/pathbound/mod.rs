//! Weighted-path lower bounds on the spectral gap.
//!
//! For a path system `gamma` joining every `x` to every `y` in a target set
//! `A`, and positive edge weights `w`, set
//!
//! ```text
//! W(e) = w(e)^2 / Q(e) * sum over (x, y) whose path crosses e of |gamma_xy|_w pi(x) pi_A(y)
//! ```
//!
//! where `|gamma|_w = sum_{e in gamma} 1 / w(e)^2` and the sum runs over
//! ordered pairs crossing the unoriented edge `e` in either direction. Then
//! `lambda >= 2 / max W` when `A` is the whole box and `lambda >= 1 / max W`
//! when `A` is a single point.
//!
//! With symmetry reduction the sum keeps only pairs with `pi(x) <= pi(y)`
//! and the reported `W(e)` is twice that restricted sum, which still
//! dominates the full sum when paths are reversal-symmetric.

mod engine;
mod paths;
mod recipe;
mod weights;

pub use paths::{PathAudit, PathRule, PathSystem, TargetSet, ValleyClass, CORRIDOR};
pub use recipe::{certify, lem2_regime, recipe, Lem2Regime, Recipe};
pub use weights::{Anchor, Piece, PositionSchedule, WeightFunction};

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::GridChain;
use crate::numeric::pairwise_sum;
use crate::{Error, Result};

pub const DEFAULT_PAIR_CAP: u64 = 268_435_456;
/// Largest one-dimensional box accepted for exact enumeration.
pub const MAX_STATES_1D: usize = 8193;
/// Largest side of a two-dimensional box accepted for exact enumeration.
pub const MAX_SIDE_2D: usize = 128;
/// Largest box in three or more dimensions.
pub const MAX_STATES_ND: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Fast corner engine when the path rule allows it, else direct.
    #[default]
    Auto,
    /// Walk every path explicitly.
    Direct,
}

#[derive(Clone, Debug)]
pub struct BoundOptions {
    pub symmetry_reduction: bool,
    pub pair_cap: u64,
    pub engine: Engine,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            symmetry_reduction: false,
            pair_cap: DEFAULT_PAIR_CAP,
            engine: Engine::Auto,
        }
    }
}

/// Distribution of `W(e)` over the edges.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeSummary {
    pub edges: usize,
    pub min: f64,
    pub median: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    /// `max_e W(e)`.
    pub w: f64,
    pub argmax_lower: Vec<i64>,
    pub argmax_axis: usize,
    pub summary: EdgeSummary,
    /// `2 / W` for pairs, `1 / W` for a single target point.
    pub lower_bound: f64,
    pub mode: TargetSet,
    pub rule: String,
    pub weight: String,
    pub symmetry_reduction: bool,
    pub engine: String,
    pub pairs: u64,
    /// `W(e)` by edge slot; NaN where the slot holds no edge.
    #[serde(skip)]
    pub edge_values: Vec<f64>,
}

/// `sum_{e in path} 1 / w(e)^2`; zero for a single-vertex path.
pub fn w_length(chain: &GridChain, path: &[usize], weight: &WeightFunction) -> Result<f64> {
    let mut total = 0.0;
    for w in path.windows(2) {
        let we = weight.weight(chain, w[0], w[1])?;
        total += 1.0 / (we * we);
    }
    Ok(total)
}

fn check_caps(chain: &GridChain) -> Result<()> {
    let g = chain.grid();
    let ok = match g.dim() {
        1 => g.len() <= MAX_STATES_1D,
        2 => g.extent(0) <= MAX_SIDE_2D && g.extent(1) <= MAX_SIDE_2D,
        _ => g.len() <= MAX_STATES_ND,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::CapExceeded(format!(
            "exact path enumeration is limited to {MAX_STATES_1D} states in one dimension, \
             side {MAX_SIDE_2D} in two and {MAX_STATES_ND} states beyond; grid has extents {:?}",
            (0..g.dim()).map(|a| g.extent(a)).collect::<Vec<_>>()
        )))
    }
}

/// Exact `W` for a path system and weight function.
pub fn compute_w(
    chain: &GridChain,
    paths: &PathSystem,
    weight: &WeightFunction,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    let g = chain.grid();
    if paths.grid() != g {
        return Err(Error::BadGrid(
            "path system was built for a different grid".into(),
        ));
    }
    let n = g.len();
    if n < 2 {
        return Err(Error::BadGrid(
            "path bounds need at least two states".into(),
        ));
    }
    check_caps(chain)?;
    let mode = paths.mode();
    if opts.symmetry_reduction && mode != TargetSet::Pairs {
        return Err(Error::Unsupported {
            reason: "symmetry reduction needs paths between all pairs".into(),
            nearest: "symmetry_reduction = false".into(),
        });
    }
    let weights = weight.edge_weights(chain)?;
    let inv_w2: Vec<f64> = weights.iter().map(|w| 1.0 / (w * w)).collect();
    let per_source: u64 = match mode {
        TargetSet::Pairs => (n - 1) as u64,
        TargetSet::ToPoint { .. } => 1,
    };
    let required = n as u64 * per_source;
    let allowed = if required > opts.pair_cap {
        (opts.pair_cap / per_source) as usize
    } else {
        n
    };
    let all_edges_live = g
        .edges()
        .all(|e| chain.conductance(g.edge_id(e.lower, e.axis)) > 0.0);
    let use_corner = opts.engine == Engine::Auto && paths.is_corner_rule() && all_edges_live;
    let inputs = engine::Inputs {
        chain,
        paths,
        inv_w2: &inv_w2,
        pi: chain.pi(),
        symmetric: opts.symmetry_reduction,
    };
    let chunk = 32.max(n.div_ceil(64));
    let starts: Vec<usize> = (0..allowed).step_by(chunk).collect();
    let parts: Vec<Result<(Vec<f64>, u64)>> = starts
        .par_iter()
        .map(|&s| {
            let r = s..(s + chunk).min(allowed);
            if use_corner {
                Ok(engine::corner(&inputs, r))
            } else {
                engine::direct(&inputs, r)
            }
        })
        .collect();
    let mut acc = vec![0.0; g.edge_slots()];
    let mut pairs = 0;
    for part in parts {
        let (a, p) = part?;
        for (t, v) in acc.iter_mut().zip(a) {
            *t += v;
        }
        pairs += p;
    }

    let factor = if opts.symmetry_reduction { 2.0 } else { 1.0 };
    let mut values = vec![f64::NAN; g.edge_slots()];
    let mut live = Vec::with_capacity(g.edge_slots());
    let mut best = (f64::NEG_INFINITY, 0);
    for e in g.edges() {
        let id = g.edge_id(e.lower, e.axis);
        let q = chain.conductance(id);
        let val = if acc[id] == 0.0 {
            0.0
        } else {
            factor * acc[id] / (q * inv_w2[id])
        };
        values[id] = val;
        live.push(val);
        if val > best.0 {
            best = (val, id);
        }
    }
    if allowed < n {
        return Err(Error::PairBudgetExceeded {
            required,
            cap: opts.pair_cap,
            partial_max: best.0.max(0.0),
        });
    }
    let w = best.0;
    let arg = g.edge(best.1);
    let lower_bound = match mode {
        TargetSet::Pairs => 2.0 / w,
        TargetSet::ToPoint { .. } => 1.0 / w,
    };
    Ok(BoundReport {
        w,
        argmax_lower: g.coords(arg.lower),
        argmax_axis: arg.axis,
        summary: summarize(&live),
        lower_bound,
        mode,
        rule: paths.rule().tag().to_string(),
        weight: weight.tag().to_string(),
        symmetry_reduction: opts.symmetry_reduction,
        engine: if use_corner { "corner" } else { "direct" }.to_string(),
        pairs,
        edge_values: values,
    })
}

fn summarize(values: &[f64]) -> EdgeSummary {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
    EdgeSummary {
        edges: v.len(),
        min: v[0],
        median: q(0.5),
        p90: q(0.9),
        p99: q(0.99),
        max: v[v.len() - 1],
        mean: pairwise_sum(&v) / v.len() as f64,
    }
}

/// Per-edge `W(e)` as CSV: lower-endpoint coordinates, axis, value.
pub fn write_edge_csv<W: std::io::Write>(
    chain: &GridChain,
    report: &BoundReport,
    out: W,
) -> Result<()> {
    let g = chain.grid();
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..g.dim()).map(|a| format!("x{a}")).collect();
    header.push("axis".into());
    header.push("w_edge".into());
    wtr.write_record(&header)
        .map_err(|e| Error::Serde(e.to_string()))?;
    for e in g.edges() {
        let mut rec: Vec<String> = g.coords(e.lower).iter().map(|c| c.to_string()).collect();
        rec.push(e.axis.to_string());
        rec.push(format!(
            "{:.11e}",
            report.edge_values[g.edge_id(e.lower, e.axis)]
        ));
        wtr.write_record(&rec)
            .map_err(|e| Error::Serde(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
