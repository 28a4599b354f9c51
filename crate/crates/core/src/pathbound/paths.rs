//! Deterministic path systems on lattice boxes.

use serde::{Deserialize, Serialize};

use crate::chain::{Grid, GridChain};
use crate::{Error, Result};

/// Which pairs need paths: every ordered pair, or every state to one point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSet {
    Pairs,
    ToPoint { state: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathRule {
    /// The unique path on an interval.
    OneDSegment,
    /// To the target point along axis 1 first, then along axis 0.
    CornerMonotone,
    /// Staircase that stays within `sqrt(2)` of the straight segment to the
    /// target point.
    StaircaseToPoint,
    /// Two consecutive sides of the bounding rectangle, through the corner
    /// with the larger weight (ties to the smaller state index).
    RectangleSides,
    /// Valley paths: same-side pairs use the sides farther from the line;
    /// crossing pairs leave the endpoint nearer the line along the side that
    /// crosses it, preferring the horizontal side.
    ValleyRule {
        #[serde(skip)]
        offsets: Vec<f64>,
    },
}

impl PathRule {
    pub fn tag(&self) -> &'static str {
        match self {
            PathRule::OneDSegment => "one_d_segment",
            PathRule::CornerMonotone => "corner_monotone",
            PathRule::StaircaseToPoint => "staircase_to_point",
            PathRule::RectangleSides => "rectangle_sides",
            PathRule::ValleyRule { .. } => "valley_rule",
        }
    }
}

/// Position of a valley pair relative to the line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValleyClass {
    SameSide,
    HorizontalCrossing,
    VerticalCrossing,
}

/// Largest distance from the corridor that staircase paths may reach.
pub const CORRIDOR: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Debug)]
pub struct PathSystem {
    grid: Grid,
    mode: TargetSet,
    rule: PathRule,
    log_pi: Vec<f64>,
}

fn sign(v: f64) -> i32 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

impl PathSystem {
    pub fn new(chain: &GridChain, mode: TargetSet, rule: PathRule) -> Result<Self> {
        let grid = chain.grid().clone();
        let unsupported = |reason: &str, nearest: &str| Error::Unsupported {
            reason: reason.into(),
            nearest: nearest.into(),
        };
        if let TargetSet::ToPoint { state } = mode {
            if state >= grid.len() {
                return Err(Error::InvalidPath {
                    from: state,
                    to: state,
                    reason: "target point is outside the grid".into(),
                });
            }
        }
        match &rule {
            PathRule::OneDSegment => {
                if grid.dim() != 1 {
                    return Err(unsupported(
                        "segment paths need a one-dimensional grid",
                        "rectangle_sides",
                    ));
                }
            }
            PathRule::CornerMonotone | PathRule::StaircaseToPoint => {
                if grid.dim() != 2 {
                    return Err(unsupported(
                        "to-point staircases are two-dimensional",
                        "one_d_segment",
                    ));
                }
                if mode == TargetSet::Pairs {
                    return Err(unsupported(
                        "this rule joins states to one point",
                        "rectangle_sides",
                    ));
                }
            }
            PathRule::RectangleSides | PathRule::ValleyRule { .. } => {
                if grid.dim() != 2 {
                    return Err(unsupported(
                        "rectangle paths are two-dimensional",
                        "one_d_segment",
                    ));
                }
                if mode != TargetSet::Pairs {
                    return Err(unsupported(
                        "rectangle paths join pairs",
                        "staircase_to_point",
                    ));
                }
            }
        }
        if let PathRule::ValleyRule { offsets } = &rule {
            if offsets.len() != grid.len() {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    got: offsets.len(),
                });
            }
        }
        Ok(PathSystem {
            grid,
            mode,
            rule,
            log_pi: chain.target().log_pi().to_vec(),
        })
    }

    pub fn mode(&self) -> TargetSet {
        self.mode
    }

    pub fn rule(&self) -> &PathRule {
        &self.rule
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Whether the rule draws every pair path through a rectangle corner,
    /// which the fast accumulation engine exploits.
    pub(crate) fn is_corner_rule(&self) -> bool {
        matches!(
            self.rule,
            PathRule::OneDSegment | PathRule::RectangleSides | PathRule::ValleyRule { .. }
        ) && self.mode == TargetSet::Pairs
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.grid.stride(0) + j
    }

    #[inline]
    fn ij(&self, s: usize) -> (usize, usize) {
        if self.grid.dim() == 1 {
            (s, 0)
        } else {
            (self.grid.offset(s, 0), self.grid.offset(s, 1))
        }
    }

    /// For corner rules: whether the path from `x` to `y` moves along
    /// axis 0 first.
    #[inline]
    pub(crate) fn axis0_first(&self, x: usize, y: usize) -> bool {
        match &self.rule {
            PathRule::RectangleSides => {
                let ((xi, xj), (yi, yj)) = (self.ij(x), self.ij(y));
                let (h, v) = (self.at(yi, xj), self.at(xi, yj));
                let (lh, lv) = (self.log_pi[h], self.log_pi[v]);
                lh > lv || (lh == lv && h <= v)
            }
            PathRule::ValleyRule { offsets } => {
                let ((_, xj), (yi, _)) = (self.ij(x), self.ij(y));
                let h = self.at(yi, xj);
                self.valley_corner(offsets, x, y).0 == h
            }
            _ => true,
        }
    }

    fn valley_corner(&self, o: &[f64], x: usize, y: usize) -> (usize, ValleyClass) {
        let ((xi, xj), (yi, yj)) = (self.ij(x), self.ij(y));
        let (h, v) = (self.at(yi, xj), self.at(xi, yj));
        let (sx, sy) = (sign(o[x]), sign(o[y]));
        if sx * sy >= 0 {
            let side = sign((sx + sy) as f64);
            let score = |c: usize| {
                if side != 0 {
                    side as f64 * o[c]
                } else {
                    o[c].abs()
                }
            };
            let (a, b) = (score(h), score(v));
            let c = if a > b || (a == b && h <= v) { h } else { v };
            return (c, ValleyClass::SameSide);
        }
        let x_nearer = o[x].abs() < o[y].abs() || (o[x].abs() == o[y].abs() && x < y);
        // Horizontal and vertical corners as seen from the endpoint nearer the line.
        let (hu, vu) = if x_nearer { (h, v) } else { (v, h) };
        let su = if x_nearer { sx } else { sy };
        if sign(o[hu]) * su <= 0 {
            (hu, ValleyClass::HorizontalCrossing)
        } else if sign(o[vu]) * su <= 0 {
            (vu, ValleyClass::VerticalCrossing)
        } else {
            (hu, ValleyClass::HorizontalCrossing)
        }
    }

    /// Class of a pair under the valley rule.
    pub fn valley_class(&self, x: usize, y: usize) -> Option<ValleyClass> {
        match &self.rule {
            PathRule::ValleyRule { offsets } => Some(self.valley_corner(offsets, x, y).1),
            _ => None,
        }
    }

    fn walk(&self, to: usize, out: &mut Vec<usize>) {
        let mut p = *out.last().unwrap();
        let (ti, tj) = self.ij(to);
        loop {
            let (pi, pj) = self.ij(p);
            p = if pi < ti {
                self.at(pi + 1, pj)
            } else if pi > ti {
                self.at(pi - 1, pj)
            } else if pj < tj {
                p + 1
            } else if pj > tj {
                p - 1
            } else {
                break;
            };
            out.push(p);
        }
    }

    fn staircase(&self, x: usize, t: usize, out: &mut Vec<usize>) {
        let (xi, xj) = self.ij(x);
        let (ti, tj) = self.ij(t);
        let (dx, dy) = (ti as f64 - xi as f64, tj as f64 - xj as f64);
        let norm = dx.hypot(dy);
        let off_line = |i: usize, j: usize| {
            ((i as f64 - xi as f64) * dy - (j as f64 - xj as f64) * dx).abs() / norm
        };
        let (mut i, mut j) = (xi, xj);
        while (i, j) != (ti, tj) {
            let ni = if i < ti { i + 1 } else { i.saturating_sub(1) };
            let nj = if j < tj { j + 1 } else { j.saturating_sub(1) };
            if i == ti {
                j = nj;
            } else if j == tj || off_line(ni, j) <= off_line(i, nj) {
                i = ni;
            } else {
                j = nj;
            }
            out.push(self.at(i, j));
        }
    }

    /// Vertex sequence of the path from `x` to `y`, both included.
    pub fn path(&self, x: usize, y: usize) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        self.path_into(x, y, &mut out)?;
        Ok(out)
    }

    pub(crate) fn path_into(&self, x: usize, y: usize, out: &mut Vec<usize>) -> Result<()> {
        out.clear();
        out.push(x);
        if x == y {
            return Ok(());
        }
        if let TargetSet::ToPoint { state } = self.mode {
            if y != state {
                return Err(Error::InvalidPath {
                    from: x,
                    to: y,
                    reason: "to-point system only joins states to its target".into(),
                });
            }
        }
        match &self.rule {
            PathRule::OneDSegment => self.walk(y, out),
            PathRule::CornerMonotone => {
                let ((xi, _), (_, yj)) = (self.ij(x), self.ij(y));
                self.walk(self.at(xi, yj), out);
                self.walk(y, out);
            }
            PathRule::StaircaseToPoint => self.staircase(x, y, out),
            PathRule::RectangleSides | PathRule::ValleyRule { .. } => {
                let ((xi, xj), (yi, yj)) = (self.ij(x), self.ij(y));
                let corner = if self.axis0_first(x, y) {
                    self.at(yi, xj)
                } else {
                    self.at(xi, yj)
                };
                self.walk(corner, out);
                self.walk(y, out);
            }
        }
        Ok(())
    }

    /// Largest distance from a path's vertices to the straight segment
    /// joining its endpoints, in lattice units.
    pub fn corridor_distance(&self, path: &[usize]) -> f64 {
        let (a, b) = (self.ij(path[0]), self.ij(*path.last().unwrap()));
        let (ax, ay, bx, by) = (a.0 as f64, a.1 as f64, b.0 as f64, b.1 as f64);
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        path.iter()
            .map(|&s| {
                let (px, py) = self.ij(s);
                let (px, py) = (px as f64, py as f64);
                let t = if len2 > 0.0 {
                    (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (px - ax - t * dx).hypot(py - ay - t * dy)
            })
            .fold(0.0, f64::max)
    }

    /// Exhaustive check of every required path: nearest-neighbour steps on
    /// edges with positive conductance, correct endpoints, reversal symmetry
    /// for pairs and the corridor for staircases.
    pub fn audit(&self, chain: &GridChain) -> Result<PathAudit> {
        let n = self.grid.len();
        let mut audit = PathAudit {
            paths: 0,
            max_corridor: None,
            failures: Vec::new(),
        };
        let mut buf = Vec::new();
        let mut rev = Vec::new();
        let targets: Vec<usize> = match self.mode {
            TargetSet::Pairs => (0..n).collect(),
            TargetSet::ToPoint { state } => vec![state],
        };
        for x in 0..n {
            for &y in &targets {
                if x == y {
                    continue;
                }
                self.path_into(x, y, &mut buf)?;
                audit.paths += 1;
                if buf[0] != x || *buf.last().unwrap() != y {
                    audit
                        .failures
                        .push(format!("path {x}->{y} has wrong endpoints"));
                }
                for w in buf.windows(2) {
                    match self.grid.edge_between(w[0], w[1]) {
                        Some(id) if chain.conductance(id) > 0.0 => {}
                        _ => audit.failures.push(format!(
                            "path {x}->{y} steps {}->{} off the chain",
                            w[0], w[1]
                        )),
                    }
                }
                if self.mode == TargetSet::Pairs && x < y {
                    self.path_into(y, x, &mut rev)?;
                    rev.reverse();
                    if rev != buf {
                        audit
                            .failures
                            .push(format!("path {y}->{x} is not the reverse of {x}->{y}"));
                    }
                }
                if self.rule == PathRule::StaircaseToPoint {
                    let d = self.corridor_distance(&buf);
                    audit.max_corridor = Some(audit.max_corridor.unwrap_or(0.0).max(d));
                    if d > CORRIDOR + 1e-12 {
                        audit
                            .failures
                            .push(format!("path {x}->{y} leaves the corridor ({d:.4})"));
                    }
                }
            }
        }
        Ok(audit)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PathAudit {
    pub paths: u64,
    pub max_corridor: Option<f64>,
    pub failures: Vec<String>,
}

impl PathAudit {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}
