//! Continuous-time semigroup `H_t = exp(-t (I - K))`, distances to `pi`
//! and mixing times.
//!
//! Rows of `H_t` come from uniformization: `H_t = sum_m Poisson(t)(m) K^m`
//! with the Poisson tail cut at `POISSON_TAIL`. All terms are nonnegative,
//! so entries keep their relative accuracy even where `pi` is tiny. Mixing
//! times take every start into account: a dense ladder `H_{tau 2^j}` built
//! by squaring locates the threshold crossing, and a bisection refines it
//! on the rows that are still above threshold.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::GridChain;
use crate::numeric::poisson_weights;
use crate::spectral::{spectral_gap, SolverMode};
use crate::{Error, Result};

pub const POISSON_TAIL: f64 = 1e-12;
/// Largest chain for which mixing times are computed over all starts.
pub const DEFAULT_MIX_CAP: usize = 2500;
/// Distance threshold defining the mixing times.
pub const THRESHOLD: f64 = 1.0 / std::f64::consts::E;

/// `sum_y |p(y) - pi(y)|`.
pub fn tv_distance(pi: &[f64], p: &[f64]) -> f64 {
    p.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

/// `max_y |p(y) / pi(y) - 1|`.
pub fn sup_distance(pi: &[f64], p: &[f64]) -> f64 {
    p.iter()
        .zip(pi)
        .map(|(a, b)| (a / b - 1.0).abs())
        .fold(0.0, f64::max)
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeTime(t))
    }
}

/// `p H_t` for a distribution `p`.
pub fn evolve(chain: &GridChain, p: &[f64], t: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    if p.len() != chain.len() {
        return Err(Error::DimensionMismatch {
            expected: chain.len(),
            got: p.len(),
        });
    }
    let (first, weights) = poisson_weights(t, POISSON_TAIL);
    let mut cur = p.to_vec();
    let mut next = vec![0.0; p.len()];
    for _ in 0..first {
        chain.propagate(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    let mut out = vec![0.0; p.len()];
    for (m, w) in weights.iter().enumerate() {
        if m > 0 {
            chain.propagate(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        for (o, c) in out.iter_mut().zip(&cur) {
            *o += w * c;
        }
    }
    Ok(out)
}

/// Row `x` of `H_t`.
pub fn heat_kernel_row(chain: &GridChain, x: usize, t: f64) -> Result<Vec<f64>> {
    if x >= chain.len() {
        return Err(Error::DimensionMismatch {
            expected: chain.len(),
            got: x,
        });
    }
    let mut p = vec![0.0; chain.len()];
    p[x] = 1.0;
    evolve(chain, &p, t)
}

#[derive(Clone, Debug)]
pub struct MixingOptions {
    pub dense_cap: usize,
    /// Bisection stops once the bracket is narrower than this fraction of
    /// its upper end.
    pub rel_tol: f64,
}

impl Default for MixingOptions {
    fn default() -> Self {
        MixingOptions {
            dense_cap: DEFAULT_MIX_CAP,
            rel_tol: 1e-10,
        }
    }
}

/// Worst distances over all starts at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub tv_worst: f64,
    pub sup_worst: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingReport {
    pub gap: f64,
    /// `1 / gap`.
    pub relaxation: f64,
    pub t_tv: f64,
    pub t_sup: f64,
    /// `(1 + log 1/pi_min) / gap`.
    pub upper_bound: f64,
    pub pi_min: f64,
    /// Start state attaining the total-variation mixing time.
    pub worst_start_tv: usize,
    pub worst_start_tv_coords: Vec<i64>,
    pub worst_start_sup: usize,
    pub worst_start_sup_coords: Vec<i64>,
    /// Upper end of the bisection bracket.
    pub bracket: f64,
    /// Distances on the dyadic evaluation grid used to locate the crossing.
    pub curve: Vec<CurvePoint>,
}

impl MixingReport {
    /// `1/gap <= t_tv <= t_sup <= upper_bound`, each with relative slack `tol`.
    pub fn sandwich_holds(&self, tol: f64) -> bool {
        let le = |a: f64, b: f64| a <= b * (1.0 + tol);
        le(self.relaxation, self.t_tv)
            && le(self.t_tv, self.t_sup)
            && le(self.t_sup, self.upper_bound)
    }
}

/// Mixing times with the exact gap computed here.
pub fn mixing_times(chain: &GridChain) -> Result<MixingReport> {
    let gap = spectral_gap(chain, SolverMode::Auto)?.gap;
    mixing_times_with(chain, gap, &MixingOptions::default())
}

#[derive(Clone, Copy)]
enum Metric {
    Tv,
    Sup,
}

impl Metric {
    fn eval(self, pi: &[f64], p: &[f64]) -> f64 {
        match self {
            Metric::Tv => tv_distance(pi, p),
            Metric::Sup => sup_distance(pi, p),
        }
    }
}

fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Dense `H_tau` by uniformization, one row per start.
fn dense_kernel(chain: &GridChain, tau: f64) -> Result<DMatrix<f64>> {
    let n = chain.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| heat_kernel_row(chain, x, tau))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

struct Crossing {
    time: f64,
    worst: usize,
}

/// First time the worst-start distance drops to the threshold, given the
/// ladder `ladder[j] = H_{tau 2^j}` and the distances of its rows.
fn crossing(
    chain: &GridChain,
    metric: Metric,
    ladder: &[DMatrix<f64>],
    dist: &[Vec<f64>],
    tau: f64,
    rel_tol: f64,
) -> Result<Crossing> {
    let n = chain.len();
    let pi = chain.pi();
    let top = ladder.len() - 1;
    let worst_top = dist[top].iter().copied().fold(0.0, f64::max);
    if worst_top > THRESHOLD {
        return Err(Error::BracketFailure {
            t_hi: tau * (1u64 << top) as f64,
            distance: worst_top,
        });
    }
    let above = |d: &[f64]| -> Vec<usize> { (0..d.len()).filter(|&x| d[x] > THRESHOLD).collect() };
    let last_above = (0..=top)
        .rev()
        .find(|&j| dist[j].iter().any(|&d| d > THRESHOLD));

    // Rows of H_{t_lo} for the starts still above threshold at t_lo.
    let (mut t_lo, mut t_hi, mut starts, mut rows, mut lo_dist) = match last_above {
        None => {
            let starts: Vec<usize> = (0..n)
                .filter(|&x| {
                    let mut p = vec![0.0; n];
                    p[x] = 1.0;
                    metric.eval(pi, &p) > THRESHOLD
                })
                .collect();
            let rows = DMatrix::from_fn(
                starts.len(),
                n,
                |i, j| if starts[i] == j { 1.0 } else { 0.0 },
            );
            let d = starts
                .iter()
                .map(|&x| {
                    let mut p = vec![0.0; n];
                    p[x] = 1.0;
                    metric.eval(pi, &p)
                })
                .collect();
            (0.0, tau, starts, rows, d)
        }
        Some(j) => {
            let starts = above(&dist[j]);
            let rows = ladder[j].select_rows(starts.iter());
            let d = starts.iter().map(|&x| dist[j][x]).collect();
            (
                tau * (1u64 << j) as f64,
                tau * (1u64 << (j + 1)) as f64,
                starts,
                rows,
                d,
            )
        }
    };
    if starts.is_empty() {
        return Ok(Crossing {
            time: 0.0,
            worst: 0,
        });
    }
    let keep = |t_mid: f64,
                mid: DMatrix<f64>,
                t_lo: &mut f64,
                t_hi: &mut f64,
                starts: &mut Vec<usize>,
                rows: &mut DMatrix<f64>,
                lo_dist: &mut Vec<f64>| {
        let d: Vec<f64> = (0..mid.nrows())
            .map(|i| metric.eval(pi, &row(&mid, i)))
            .collect();
        let idx = above(&d);
        if idx.is_empty() {
            *t_hi = t_mid;
        } else {
            *t_lo = t_mid;
            *starts = idx.iter().map(|&i| starts[i]).collect();
            *lo_dist = idx.iter().map(|&i| d[i]).collect();
            *rows = mid.select_rows(idx.iter());
        }
    };

    // Dyadic refinement on the ladder.
    if let Some(j) = last_above {
        for i in (0..j).rev() {
            let mid = &rows * &ladder[i];
            let t_mid = t_lo + tau * (1u64 << i) as f64;
            keep(
                t_mid,
                mid,
                &mut t_lo,
                &mut t_hi,
                &mut starts,
                &mut rows,
                &mut lo_dist,
            );
        }
    }
    // Below the ladder step, evolve the remaining rows directly.
    while t_hi - t_lo > rel_tol * t_hi {
        let s = 0.5 * (t_hi - t_lo);
        let evolved: Vec<Vec<f64>> = (0..rows.nrows())
            .into_par_iter()
            .map(|i| evolve(chain, &row(&rows, i), s))
            .collect::<Result<_>>()?;
        let mid = DMatrix::from_fn(evolved.len(), n, |i, j| evolved[i][j]);
        keep(
            t_lo + s,
            mid,
            &mut t_lo,
            &mut t_hi,
            &mut starts,
            &mut rows,
            &mut lo_dist,
        );
    }
    let best = (0..starts.len()).max_by(|&a, &b| {
        lo_dist[a]
            .total_cmp(&lo_dist[b])
            .then(starts[b].cmp(&starts[a]))
    });
    Ok(Crossing {
        time: t_hi,
        worst: best.map_or(0, |i| starts[i]),
    })
}

/// Mixing times over all starts. `gap` is the spectral gap of `chain`; it
/// sets the bisection bracket `[0, 4 (1 + log 1/pi_min) / gap]`.
pub fn mixing_times_with(
    chain: &GridChain,
    gap: f64,
    opts: &MixingOptions,
) -> Result<MixingReport> {
    let n = chain.len();
    if n > opts.dense_cap {
        return Err(Error::DenseCapExceeded {
            states: n,
            cap: opts.dense_cap,
        });
    }
    if n < 2 {
        return Err(Error::BadGrid(
            "mixing times need at least two states".into(),
        ));
    }
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::Disconnected(gap));
    }
    let log_inv = -chain.target().log_pi_min();
    let upper_bound = (1.0 + log_inv) / gap;
    let bracket = 4.0 * upper_bound;
    let levels = 12.max(bracket.log2().ceil() as i32) as usize;
    let tau = bracket / (1u64 << levels) as f64;

    let pi = chain.pi();
    let mut ladder = vec![dense_kernel(chain, tau)?];
    for j in 1..=levels {
        let prev = &ladder[j - 1];
        ladder.push(prev * prev);
    }
    let dists = |m: &DMatrix<f64>, metric: Metric| -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .map(|x| metric.eval(pi, &row(m, x)))
            .collect()
    };
    let tv: Vec<Vec<f64>> = ladder.iter().map(|m| dists(m, Metric::Tv)).collect();
    let sup: Vec<Vec<f64>> = ladder.iter().map(|m| dists(m, Metric::Sup)).collect();

    let worst = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let mut curve = vec![CurvePoint {
        t: 0.0,
        tv_worst: 2.0 * (1.0 - chain.target().pi_min()),
        sup_worst: 1.0 / chain.target().pi_min() - 1.0,
    }];
    for j in 0..=levels {
        curve.push(CurvePoint {
            t: tau * (1u64 << j) as f64,
            tv_worst: worst(&tv[j]),
            sup_worst: worst(&sup[j]),
        });
    }

    let a = crossing(chain, Metric::Tv, &ladder, &tv, tau, opts.rel_tol)?;
    let b = crossing(chain, Metric::Sup, &ladder, &sup, tau, opts.rel_tol)?;
    let g = chain.grid();
    Ok(MixingReport {
        gap,
        relaxation: 1.0 / gap,
        t_tv: a.time,
        t_sup: b.time,
        upper_bound,
        pi_min: chain.target().pi_min(),
        worst_start_tv: a.worst,
        worst_start_tv_coords: g.coords(a.worst),
        worst_start_sup: b.worst,
        worst_start_sup_coords: g.coords(b.worst),
        bracket,
        curve,
    })
}

/// Distances from a single start at the given times.
pub fn start_curve(chain: &GridChain, x: usize, times: &[f64]) -> Result<Vec<CurvePoint>> {
    times
        .iter()
        .map(|&t| {
            let p = heat_kernel_row(chain, x, t)?;
            Ok(CurvePoint {
                t,
                tv_worst: tv_distance(chain.pi(), &p),
                sup_worst: sup_distance(chain.pi(), &p),
            })
        })
        .collect()
}

/// Curve as CSV with header `t,tv_worst,sup_worst`.
pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", "tv_worst", "sup_worst"])
        .map_err(|e| Error::Serde(e.to_string()))?;
    for p in curve {
        wtr.write_record([
            format!("{:.11e}", p.t),
            format!("{:.11e}", p.tv_worst),
            format!("{:.11e}", p.sup_worst),
        ])
        .map_err(|e| Error::Serde(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
