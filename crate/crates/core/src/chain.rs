//! Boxes in `Z^n`, positive targets and the nearest-neighbour Metropolis
//! kernel.
//!
//! States are numbered row-major: the last axis has stride one. Every
//! unoriented edge is identified with its lower endpoint and its axis, so
//! per-edge data lives in flat arrays of length `dim * len` indexed by
//! [`Grid::edge_id`]. Slots for edges that leave the box stay zero.

use serde::{Deserialize, Serialize};

use crate::numeric::{log_sum_exp, pairwise_sum};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    lower: Vec<i64>,
    extent: Vec<usize>,
    stride: Vec<usize>,
    len: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GridSpec {
    ranges: Vec<(i64, i64)>,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;
    fn try_from(spec: GridSpec) -> Result<Self> {
        Grid::new(&spec.ranges)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec { ranges: g.ranges() }
    }
}

/// One unoriented edge `lower -- upper` along `axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub lower: usize,
    pub upper: usize,
    pub axis: usize,
}

impl Grid {
    /// Box with inclusive per-axis ranges `lo..=hi`.
    pub fn new(ranges: &[(i64, i64)]) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::BadGrid("no axes".into()));
        }
        let mut extent = Vec::with_capacity(ranges.len());
        for &(lo, hi) in ranges {
            if hi < lo {
                return Err(Error::BadGrid(format!("empty range {lo}..={hi}")));
            }
            extent.push((hi - lo + 1) as usize);
        }
        let mut stride = vec![1; ranges.len()];
        for a in (0..ranges.len() - 1).rev() {
            stride[a] = stride[a + 1] * extent[a + 1];
        }
        let len = stride[0] * extent[0];
        Ok(Grid {
            lower: ranges.iter().map(|r| r.0).collect(),
            extent,
            stride,
            len,
        })
    }

    /// `{1, ..., n}^dim`.
    pub fn cube(n: usize, dim: usize) -> Result<Self> {
        Grid::new(&vec![(1, n as i64); dim])
    }

    /// `{-n+1, ..., n}^dim`.
    pub fn centered(n: usize, dim: usize) -> Result<Self> {
        Grid::new(&vec![(1 - n as i64, n as i64); dim])
    }

    pub fn interval(lo: i64, hi: i64) -> Result<Self> {
        Grid::new(&[(lo, hi)])
    }

    pub fn ranges(&self) -> Vec<(i64, i64)> {
        self.lower
            .iter()
            .zip(&self.extent)
            .map(|(&lo, &e)| (lo, lo + e as i64 - 1))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.extent.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn extent(&self, axis: usize) -> usize {
        self.extent[axis]
    }

    pub fn lower(&self, axis: usize) -> i64 {
        self.lower[axis]
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.stride[axis]
    }

    /// Zero-based position of `state` along `axis`.
    #[inline]
    pub fn offset(&self, state: usize, axis: usize) -> usize {
        (state / self.stride[axis]) % self.extent[axis]
    }

    #[inline]
    pub fn coord(&self, state: usize, axis: usize) -> i64 {
        self.lower[axis] + self.offset(state, axis) as i64
    }

    pub fn coords(&self, state: usize) -> Vec<i64> {
        (0..self.dim()).map(|a| self.coord(state, a)).collect()
    }

    pub fn index(&self, coords: &[i64]) -> Option<usize> {
        if coords.len() != self.dim() {
            return None;
        }
        let mut s = 0;
        for (a, &c) in coords.iter().enumerate() {
            let off = c - self.lower[a];
            if off < 0 || off as usize >= self.extent[a] {
                return None;
            }
            s += off as usize * self.stride[a];
        }
        Some(s)
    }

    #[inline]
    pub fn has_up(&self, state: usize, axis: usize) -> bool {
        self.offset(state, axis) + 1 < self.extent[axis]
    }

    #[inline]
    pub fn has_down(&self, state: usize, axis: usize) -> bool {
        self.offset(state, axis) > 0
    }

    /// Neighbour one step along `axis`, upward if `up`.
    #[inline]
    pub fn neighbor(&self, state: usize, axis: usize, up: bool) -> Option<usize> {
        if up {
            self.has_up(state, axis).then(|| state + self.stride[axis])
        } else {
            self.has_down(state, axis)
                .then(|| state - self.stride[axis])
        }
    }

    /// Slot of the edge from `lower` one step up along `axis`.
    #[inline]
    pub fn edge_id(&self, lower: usize, axis: usize) -> usize {
        axis * self.len + lower
    }

    pub fn edge_slots(&self) -> usize {
        self.dim() * self.len
    }

    /// Slot of the edge joining two neighbours, if they are neighbours.
    pub fn edge_between(&self, x: usize, y: usize) -> Option<usize> {
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        (0..self.dim()).find_map(|a| {
            (hi - lo == self.stride[a] && self.has_up(lo, a)).then(|| self.edge_id(lo, a))
        })
    }

    pub fn edge(&self, id: usize) -> Edge {
        let axis = id / self.len;
        let lower = id % self.len;
        Edge {
            lower,
            upper: lower + self.stride[axis],
            axis,
        }
    }

    /// All unoriented edges, ordered by slot.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            (0..self.len)
                .filter(move |&s| self.has_up(s, axis))
                .map(move |lower| Edge {
                    lower,
                    upper: lower + self.stride[axis],
                    axis,
                })
        })
    }

    pub fn edge_count(&self) -> usize {
        (0..self.dim())
            .map(|a| (self.extent[a] - 1) * self.len / self.extent[a])
            .sum()
    }
}

/// Normalized target stored through its logarithm.
#[derive(Clone, Debug)]
pub struct TargetMeasure {
    log_f: Vec<f64>,
    log_pi: Vec<f64>,
    pi: Vec<f64>,
    log_norm: f64,
}

impl TargetMeasure {
    pub fn from_log_weights(log_f: Vec<f64>) -> Result<Self> {
        if log_f.is_empty() {
            return Err(Error::BadGrid("empty target".into()));
        }
        if let Some((state, &v)) = log_f.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonPositiveWeight {
                state,
                value: v.exp(),
            });
        }
        let log_norm = log_sum_exp(&log_f);
        let log_pi: Vec<f64> = log_f.iter().map(|&l| l - log_norm).collect();
        let pi = log_pi.iter().map(|l| l.exp()).collect();
        Ok(TargetMeasure {
            log_f,
            log_pi,
            pi,
            log_norm,
        })
    }

    pub fn from_weights(f: &[f64]) -> Result<Self> {
        if let Some((state, &value)) = f
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NonPositiveWeight { state, value });
        }
        Self::from_log_weights(f.iter().map(|v| v.ln()).collect())
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn log_pi(&self) -> &[f64] {
        &self.log_pi
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_f
    }

    /// `log Z` where `Z` is the sum of the unnormalized weights.
    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    pub fn pi_min(&self) -> f64 {
        self.pi.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn log_pi_min(&self) -> f64 {
        self.log_pi.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.log_pi.iter().enumerate() {
            if l < self.log_pi[best] {
                best = i;
            }
        }
        best
    }

    pub fn expectation(&self, u: &[f64]) -> f64 {
        let terms: Vec<f64> = self.pi.iter().zip(u).map(|(p, x)| p * x).collect();
        pairwise_sum(&terms)
    }
}

/// Reversible nearest-neighbour chain on a box.
#[derive(Clone, Debug)]
pub struct GridChain {
    grid: Grid,
    target: TargetMeasure,
    conductance: Vec<f64>,
    forward: Vec<f64>,
    backward: Vec<f64>,
    symmetric: Vec<f64>,
    out_rate: Vec<f64>,
    hold: Vec<f64>,
}

/// Metropolis chain for positive weights `f` on `grid`.
pub fn build_metropolis(grid: &Grid, f: &[f64]) -> Result<GridChain> {
    if f.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: f.len(),
        });
    }
    let target = TargetMeasure::from_weights(f)?;
    GridChain::metropolis(grid.clone(), target)
}

/// Metropolis chain for weights given through their logarithm.
pub fn build_metropolis_log(grid: &Grid, log_f: Vec<f64>) -> Result<GridChain> {
    if log_f.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: log_f.len(),
        });
    }
    let target = TargetMeasure::from_log_weights(log_f)?;
    GridChain::metropolis(grid.clone(), target)
}

impl GridChain {
    fn metropolis(grid: Grid, target: TargetMeasure) -> Result<Self> {
        let slots = grid.edge_slots();
        let p = 1.0 / (2 * grid.dim()) as f64;
        let mut conductance = vec![0.0; slots];
        let mut forward = vec![0.0; slots];
        let mut backward = vec![0.0; slots];
        let mut symmetric = vec![0.0; slots];
        let lf = target.log_weights();
        let lp = target.log_pi();
        for e in grid.edges() {
            let id = grid.edge_id(e.lower, e.axis);
            let (x, y) = (e.lower, e.upper);
            conductance[id] = p * lp[x].min(lp[y]).exp();
            forward[id] = p * (lf[y] - lf[x]).min(0.0).exp();
            backward[id] = p * (lf[x] - lf[y]).min(0.0).exp();
            symmetric[id] = p * (-0.5 * (lp[x] - lp[y]).abs()).exp();
        }
        Ok(Self::assemble(
            grid,
            target,
            conductance,
            forward,
            backward,
            symmetric,
        ))
    }

    /// General reversible nearest-neighbour chain from per-edge
    /// conductances `Q(e) = pi(x) K(x, y)`, indexed by edge slot.
    pub fn from_conductances(grid: &Grid, log_f: Vec<f64>, conductance: Vec<f64>) -> Result<Self> {
        if log_f.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: log_f.len(),
            });
        }
        if conductance.len() != grid.edge_slots() {
            return Err(Error::DimensionMismatch {
                expected: grid.edge_slots(),
                got: conductance.len(),
            });
        }
        let target = TargetMeasure::from_log_weights(log_f)?;
        let slots = grid.edge_slots();
        let mut forward = vec![0.0; slots];
        let mut backward = vec![0.0; slots];
        let mut symmetric = vec![0.0; slots];
        let mut q = vec![0.0; slots];
        for e in grid.edges() {
            let id = grid.edge_id(e.lower, e.axis);
            let c = conductance[id];
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidParameter {
                    family: "conductances".into(),
                    reason: format!("edge slot {id} has conductance {c}"),
                });
            }
            let (px, py) = (target.pi()[e.lower], target.pi()[e.upper]);
            q[id] = c;
            forward[id] = c / px;
            backward[id] = c / py;
            symmetric[id] = c / (px * py).sqrt();
        }
        let chain = Self::assemble(grid.clone(), target, q, forward, backward, symmetric);
        if let Some((state, &h)) = chain.hold.iter().enumerate().find(|(_, h)| **h < -1e-12) {
            return Err(Error::InvalidParameter {
                family: "conductances".into(),
                reason: format!("row {state} sums above one (holding {h})"),
            });
        }
        Ok(chain)
    }

    fn assemble(
        grid: Grid,
        target: TargetMeasure,
        conductance: Vec<f64>,
        forward: Vec<f64>,
        backward: Vec<f64>,
        symmetric: Vec<f64>,
    ) -> Self {
        let n = grid.len();
        let mut out_rate = vec![0.0; n];
        for x in 0..n {
            let mut r = 0.0;
            for a in 0..grid.dim() {
                if grid.has_up(x, a) {
                    r += forward[grid.edge_id(x, a)];
                }
                if grid.has_down(x, a) {
                    r += backward[grid.edge_id(x - grid.stride(a), a)];
                }
            }
            out_rate[x] = r;
        }
        let hold = out_rate.iter().map(|r| 1.0 - r).collect();
        GridChain {
            grid,
            target,
            conductance,
            forward,
            backward,
            symmetric,
            out_rate,
            hold,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn target(&self) -> &TargetMeasure {
        &self.target
    }

    pub fn pi(&self) -> &[f64] {
        self.target.pi()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Conductance per edge slot.
    pub fn conductances(&self) -> &[f64] {
        &self.conductance
    }

    pub fn conductance(&self, edge_id: usize) -> f64 {
        self.conductance[edge_id]
    }

    /// `K(lower, upper)` per edge slot.
    pub fn forward_rates(&self) -> &[f64] {
        &self.forward
    }

    /// `K(upper, lower)` per edge slot.
    pub fn backward_rates(&self) -> &[f64] {
        &self.backward
    }

    /// `Q(e) / sqrt(pi(x) pi(y))` per edge slot.
    pub fn symmetric_rates(&self) -> &[f64] {
        &self.symmetric
    }

    /// `1 - K(x, x)`, summed from the off-diagonal entries.
    pub fn out_rates(&self) -> &[f64] {
        &self.out_rate
    }

    pub fn holding(&self, x: usize) -> f64 {
        self.hold[x]
    }

    /// `K(x, y)`; zero unless `x == y` or they are neighbours.
    pub fn transition(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return self.hold[x];
        }
        match self.grid.edge_between(x, y) {
            Some(id) if x < y => self.forward[id],
            Some(id) => self.backward[id],
            None => 0.0,
        }
    }

    /// Off-diagonal moves out of `x` as `(y, K(x, y), edge slot)`.
    pub fn moves(&self, x: usize) -> impl Iterator<Item = (usize, f64, usize)> + '_ {
        let g = &self.grid;
        (0..g.dim()).flat_map(move |a| {
            let up = g.has_up(x, a).then(|| {
                let id = g.edge_id(x, a);
                (x + g.stride(a), self.forward[id], id)
            });
            let down = g.has_down(x, a).then(|| {
                let y = x - g.stride(a);
                let id = g.edge_id(y, a);
                (y, self.backward[id], id)
            });
            up.into_iter().chain(down)
        })
    }

    /// `(K u)(x) = sum_y K(x, y) u(y)`.
    pub fn apply_kernel(&self, u: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|x| {
                let mut s = self.hold[x] * u[x];
                for (y, k, _) in self.moves(x) {
                    s += k * u[y];
                }
                s
            })
            .collect()
    }

    /// One step of a distribution: `(p K)(y) = sum_x p(x) K(x, y)`.
    pub fn propagate(&self, p: &[f64], out: &mut [f64]) {
        for y in 0..self.len() {
            out[y] = self.hold[y] * p[y];
        }
        for e in self.grid.edges() {
            let id = self.grid.edge_id(e.lower, e.axis);
            out[e.upper] += p[e.lower] * self.forward[id];
            out[e.lower] += p[e.upper] * self.backward[id];
        }
    }

    /// `out = (I - S) v` where `S = D^{1/2} K D^{-1/2}` is the symmetrized
    /// kernel and `D = diag(pi)`.
    pub fn apply_symmetric_generator(&self, v: &[f64], out: &mut [f64]) {
        for x in 0..self.len() {
            out[x] = self.out_rate[x] * v[x];
        }
        for e in self.grid.edges() {
            let s = self.symmetric[self.grid.edge_id(e.lower, e.axis)];
            out[e.lower] -= s * v[e.upper];
            out[e.upper] -= s * v[e.lower];
        }
    }

    /// Dense `I - S` (for small chains).
    pub fn symmetric_generator_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for x in 0..n {
            m[(x, x)] = self.out_rate[x];
        }
        for e in self.grid.edges() {
            let s = self.symmetric[self.grid.edge_id(e.lower, e.axis)];
            m[(e.lower, e.upper)] = -s;
            m[(e.upper, e.lower)] = -s;
        }
        m
    }

    /// Dense transition matrix (for small chains).
    pub fn transition_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for x in 0..n {
            m[(x, x)] = self.hold[x];
            for (y, k, _) in self.moves(x) {
                m[(x, y)] = k;
            }
        }
        m
    }

    pub fn to_json(&self, include_edges: bool) -> ChainJson {
        let edges = include_edges.then(|| {
            self.grid
                .edges()
                .map(|e| EdgeRecord {
                    lower: self.grid.coords(e.lower),
                    axis: e.axis,
                    conductance: self.conductance[self.grid.edge_id(e.lower, e.axis)],
                })
                .collect()
        });
        ChainJson {
            grid: self.grid.clone(),
            log_weights: self.target.log_weights().to_vec(),
            edges,
        }
    }
}

/// Serialized chain: the box and log-weights, plus optionally the edge
/// conductances for inspection.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainJson {
    pub grid: Grid,
    pub log_weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<EdgeRecord>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub lower: Vec<i64>,
    pub axis: usize,
    pub conductance: f64,
}

impl ChainJson {
    /// Rebuild the Metropolis chain; stored conductances, if any, must agree.
    pub fn into_chain(self) -> Result<GridChain> {
        let chain = build_metropolis_log(&self.grid, self.log_weights)?;
        if let Some(edges) = self.edges {
            for rec in edges {
                let lower = chain
                    .grid
                    .index(&rec.lower)
                    .ok_or_else(|| Error::Serde(format!("edge outside box: {:?}", rec.lower)))?;
                let q = chain.conductance(chain.grid.edge_id(lower, rec.axis));
                if (q - rec.conductance).abs() > 1e-12 * q.max(1e-300) {
                    return Err(Error::Serde(format!(
                        "stored conductance {} disagrees with rebuilt {q}",
                        rec.conductance
                    )));
                }
            }
        }
        Ok(chain)
    }
}

fn check_function(chain: &GridChain, u: &[f64]) -> Result<()> {
    if u.len() != chain.len() {
        return Err(Error::DimensionMismatch {
            expected: chain.len(),
            got: u.len(),
        });
    }
    if let Some(i) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            family: "state function".into(),
            reason: format!("value at state {i} is not finite"),
        });
    }
    Ok(())
}

/// `E(u, v) = 1/2 sum_{x,y} (u(x) - u(y)) (v(x) - v(y)) pi(x) K(x, y)`,
/// i.e. one term per unoriented edge.
pub fn dirichlet_form(chain: &GridChain, u: &[f64], v: &[f64]) -> Result<f64> {
    check_function(chain, u)?;
    check_function(chain, v)?;
    let g = chain.grid();
    let terms: Vec<f64> = g
        .edges()
        .map(|e| {
            let q = chain.conductance(g.edge_id(e.lower, e.axis));
            (u[e.upper] - u[e.lower]) * (v[e.upper] - v[e.lower]) * q
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `Var_pi(u)`, evaluated as `pi((u - pi(u))^2)`.
pub fn variance(chain: &GridChain, u: &[f64]) -> Result<f64> {
    check_function(chain, u)?;
    let m = chain.target().expectation(u);
    let pi = chain.pi();
    let terms: Vec<f64> = u
        .iter()
        .zip(pi)
        .map(|(x, p)| p * (x - m) * (x - m))
        .collect();
    Ok(pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_uniform() {
        let g = Grid::interval(0, 1).unwrap();
        let c = build_metropolis(&g, &[1.0, 1.0]).unwrap();
        assert_eq!(c.transition(0, 1), 0.5);
        assert_eq!(c.transition(0, 0), 0.5);
        assert_eq!(c.conductance(0), 0.25);
        let u = [0.0, 1.0];
        assert!((dirichlet_form(&c, &u, &u).unwrap() - 0.25).abs() < 1e-15);
        assert!((variance(&c, &u).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn grid_indexing_round_trips() {
        let g = Grid::new(&[(-2, 3), (1, 4), (0, 1)]).unwrap();
        assert_eq!(g.len(), 48);
        for s in 0..g.len() {
            assert_eq!(g.index(&g.coords(s)), Some(s));
        }
        assert_eq!(g.edges().count(), g.edge_count());
        assert_eq!(g.edge_count(), 5 * 4 * 2 + 6 * 3 * 2 + 6 * 4);
    }

    #[test]
    fn rejects_bad_weights() {
        let g = Grid::interval(0, 2).unwrap();
        assert!(matches!(
            build_metropolis(&g, &[1.0, 0.0, 1.0]),
            Err(Error::NonPositiveWeight { state: 1, .. })
        ));
        assert!(matches!(
            build_metropolis(&g, &[1.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}

/// Largest deviations from the identities every Metropolis chain satisfies.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChainAudit {
    /// `max |pi(x) K(x, y) - pi(y) K(y, x)| / Q(x, y)` over edges.
    pub reversibility: f64,
    /// `max_x |sum_y K(x, y) - 1|`.
    pub row_sum: f64,
    /// Smallest entry of the kernel, holding included.
    pub min_entry: f64,
    /// `max |Q(e) - min(pi(x), pi(y)) / (2 d)| / Q(e)` over edges.
    pub metropolis_conductance: f64,
}

impl ChainAudit {
    pub fn passed(&self, tol: f64) -> bool {
        self.reversibility <= tol
            && self.row_sum <= tol
            && self.min_entry >= -tol
            && self.metropolis_conductance <= tol
    }
}

/// Check reversibility, row sums, nonnegativity and the Metropolis
/// conductance formula from the stored kernel.
pub fn audit(chain: &GridChain) -> ChainAudit {
    let g = chain.grid();
    let pi = chain.pi();
    let p = 1.0 / (2 * g.dim()) as f64;
    let mut a = ChainAudit {
        reversibility: 0.0,
        row_sum: 0.0,
        min_entry: f64::INFINITY,
        metropolis_conductance: 0.0,
    };
    for e in g.edges() {
        let q = chain.conductance(g.edge_id(e.lower, e.axis));
        let fwd = pi[e.lower] * chain.transition(e.lower, e.upper);
        let bwd = pi[e.upper] * chain.transition(e.upper, e.lower);
        a.reversibility = a.reversibility.max((fwd - bwd).abs() / q);
        let want = p * pi[e.lower].min(pi[e.upper]);
        a.metropolis_conductance = a.metropolis_conductance.max((q - want).abs() / q);
    }
    for x in 0..chain.len() {
        let mut row = vec![chain.holding(x)];
        a.min_entry = a.min_entry.min(chain.holding(x));
        for (_, k, _) in chain.moves(x) {
            row.push(k);
            a.min_entry = a.min_entry.min(k);
        }
        a.row_sum = a.row_sum.max((pairwise_sum(&row) - 1.0).abs());
    }
    a
}
