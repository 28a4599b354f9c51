//! Edge weight functions.

use serde::{Deserialize, Serialize};

use crate::chain::{Edge, GridChain};
use crate::{Error, Result};

/// Which endpoint of a one-dimensional edge `(k, k + 1)` the schedule reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// The lower endpoint `k`.
    Lower,
    /// The endpoint farther from zero.
    Farthest,
}

/// `coef * (offset + |k|)^power` for anchor positions `k` in `[from, to]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub from: i64,
    pub to: i64,
    pub coef: f64,
    pub offset: f64,
    pub power: f64,
}

impl Piece {
    pub fn power_law(from: i64, to: i64, offset: f64, power: f64) -> Self {
        Piece {
            from,
            to,
            coef: 1.0,
            offset,
            power,
        }
    }

    pub fn constant(from: i64, to: i64, value: f64) -> Self {
        Piece {
            from,
            to,
            coef: value,
            offset: 1.0,
            power: 0.0,
        }
    }
}

/// Piecewise power schedule on a one-dimensional grid. With `mirror` set the
/// schedule is read at `-k`, which lets one schedule serve both orientations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionSchedule {
    pub anchor: Anchor,
    pub mirror: bool,
    pub pieces: Vec<Piece>,
}

impl PositionSchedule {
    pub fn at(&self, k: i64) -> Option<f64> {
        let k = if self.mirror { -k } else { k };
        self.pieces
            .iter()
            .find(|p| p.from <= k && k <= p.to)
            .map(|p| p.coef * (p.offset + k.unsigned_abs() as f64).powf(p.power))
    }

    fn anchor_of(&self, lower: i64) -> i64 {
        match self.anchor {
            Anchor::Lower => lower,
            Anchor::Farthest => {
                if lower >= 0 {
                    lower + 1
                } else {
                    lower
                }
            }
        }
    }
}

/// Positive, reversal-symmetric edge weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightFunction {
    Unit,
    PowerOfPosition(PositionSchedule),
    /// `Q(e)^exponent`.
    PowerOfQ {
        exponent: f64,
    },
    /// `(1 + max(|o(x)|, |o(y)|))^(exponent / 2)` for per-state offsets `o`
    /// from the valley line.
    ValleyDistance {
        exponent: f64,
        #[serde(skip)]
        offsets: Vec<f64>,
    },
}

impl WeightFunction {
    pub fn tag(&self) -> &'static str {
        match self {
            WeightFunction::Unit => "unit",
            WeightFunction::PowerOfPosition(_) => "power_of_position",
            WeightFunction::PowerOfQ { .. } => "power_of_q",
            WeightFunction::ValleyDistance { .. } => "valley_distance",
        }
    }

    fn check(&self, chain: &GridChain) -> Result<()> {
        let g = chain.grid();
        if let WeightFunction::PowerOfPosition(_) = self {
            if g.dim() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    got: g.dim(),
                });
            }
        }
        if let WeightFunction::ValleyDistance { offsets, .. } = self {
            if offsets.len() != g.len() {
                return Err(Error::DimensionMismatch {
                    expected: g.len(),
                    got: offsets.len(),
                });
            }
        }
        Ok(())
    }

    fn value(&self, chain: &GridChain, e: Edge) -> Result<f64> {
        let g = chain.grid();
        let w = match self {
            WeightFunction::Unit => 1.0,
            WeightFunction::PowerOfPosition(s) => {
                let k = g.coord(e.lower, 0);
                s.at(s.anchor_of(k)).ok_or_else(|| {
                    Error::invalid(
                        "weight schedule",
                        format!("no piece covers the edge at {k}"),
                    )
                })?
            }
            WeightFunction::PowerOfQ { exponent } => chain
                .conductance(g.edge_id(e.lower, e.axis))
                .powf(*exponent),
            WeightFunction::ValleyDistance { exponent, offsets } => {
                let d = offsets[e.lower].abs().max(offsets[e.upper].abs());
                (1.0 + d).powf(exponent / 2.0)
            }
        };
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::NonPositiveWeight {
                state: e.lower,
                value: w,
            });
        }
        Ok(w)
    }

    /// Weight of the edge joining neighbours `x` and `y`.
    pub fn weight(&self, chain: &GridChain, x: usize, y: usize) -> Result<f64> {
        self.check(chain)?;
        let g = chain.grid();
        let id = g.edge_between(x, y).ok_or_else(|| Error::InvalidPath {
            from: x,
            to: y,
            reason: "states are not neighbours".into(),
        })?;
        self.value(chain, g.edge(id))
    }

    /// Weight of every edge, by edge slot; slots without an edge hold NaN.
    pub fn edge_weights(&self, chain: &GridChain) -> Result<Vec<f64>> {
        self.check(chain)?;
        let g = chain.grid();
        let mut out = vec![f64::NAN; g.edge_slots()];
        for e in g.edges() {
            out[g.edge_id(e.lower, e.axis)] = self.value(chain, e)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn farthest_anchor_and_mirror() {
        let s = PositionSchedule {
            anchor: Anchor::Farthest,
            mirror: false,
            pieces: vec![Piece::power_law(-10, 10, 0.0, 1.0)],
        };
        assert_eq!(s.anchor_of(0), 1);
        assert_eq!(s.anchor_of(-1), -1);
        assert_eq!(s.at(-3), Some(3.0));
        let m = PositionSchedule {
            mirror: true,
            pieces: vec![Piece::power_law(1, 5, 0.0, 1.0)],
            ..s
        };
        assert_eq!(m.at(-4), Some(4.0));
        assert_eq!(m.at(4), None);
    }
}
