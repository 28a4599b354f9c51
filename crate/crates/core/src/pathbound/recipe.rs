//! Path systems and weights matched to each density family.

use serde::Serialize;

use super::paths::{PathRule, PathSystem, TargetSet};
use super::weights::{Anchor, Piece, PositionSchedule, WeightFunction};
use super::{compute_w, BoundOptions, BoundReport};
use crate::chain::GridChain;
use crate::families::{falloff_center, DensityFamily};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct Recipe {
    pub case: String,
    pub mode: TargetSet,
    pub rule: PathRule,
    pub weight: WeightFunction,
    pub symmetry_reduction: bool,
}

/// Regimes of the two-sided interval, by the pair of exponents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lem2Regime {
    /// Both exponents above one.
    BothSteep,
    /// The smaller exponent below one.
    OneShallow,
    /// Both exponents equal to one.
    BothCritical,
    /// One exponent equal to one, the other above.
    CriticalSteep,
}

impl Lem2Regime {
    pub fn label(self) -> &'static str {
        match self {
            Lem2Regime::BothSteep => "lem2:both_steep",
            Lem2Regime::OneShallow => "lem2:one_shallow",
            Lem2Regime::BothCritical => "lem2:both_critical",
            Lem2Regime::CriticalSteep => "lem2:critical_steep",
        }
    }
}

/// Classify exponents with exact comparisons.
pub fn lem2_regime(left_exponent: f64, right_exponent: f64) -> Lem2Regime {
    let (lo, hi) = (
        left_exponent.min(right_exponent),
        left_exponent.max(right_exponent),
    );
    if lo < 1.0 {
        Lem2Regime::OneShallow
    } else if lo == 1.0 && hi == 1.0 {
        Lem2Regime::BothCritical
    } else if lo == 1.0 {
        Lem2Regime::CriticalSteep
    } else {
        Lem2Regime::BothSteep
    }
}

fn guarded_ln(n: usize) -> f64 {
    (n.max(2) as f64).ln()
}

fn pow(n: usize, e: f64) -> f64 {
    (n as f64).powf(e)
}

/// Weight schedule for the two-sided interval, read at the endpoint of each
/// edge farther from zero. The schedule is written for the orientation the
/// regime singles out and mirrored when the family has the other one.
fn lem2_schedule(
    l_exp: f64,
    r_exp: f64,
    l_len: usize,
    r_len: usize,
) -> (Lem2Regime, PositionSchedule) {
    let regime = lem2_regime(l_exp, r_exp);
    let mirror = match regime {
        Lem2Regime::BothSteep => pow(l_len, 1.0 + l_exp) > pow(r_len, 1.0 + r_exp),
        Lem2Regime::OneShallow => l_exp > r_exp,
        Lem2Regime::BothCritical => l_len > r_len,
        Lem2Regime::CriticalSteep => l_exp > r_exp,
    };
    let (ll, rl, le, re) = if mirror {
        (r_len, l_len, r_exp, l_exp)
    } else {
        (l_len, r_len, l_exp, r_exp)
    };
    let (lo, hi) = (ll as i64, rl as i64);
    let pieces = match regime {
        Lem2Regime::BothSteep => {
            let eta = (1.0 + le.min(re)) / 2.0;
            vec![
                Piece::power_law(-lo, lo, 1.0, eta / 2.0),
                Piece::constant(lo + 1, i64::MAX, (rl as f64).sqrt()),
            ]
        }
        Lem2Regime::OneShallow => vec![Piece::power_law(i64::MIN, i64::MAX, 1.0, le / 2.0)],
        Lem2Regime::BothCritical => vec![
            Piece::power_law(-lo, lo, 0.0, 0.5),
            Piece::constant(lo + 1, i64::MAX, (rl as f64 / guarded_ln(ll)).sqrt()),
        ],
        Lem2Regime::CriticalSteep => {
            if pow(rl, 1.0 + re) >= pow(ll, 2.0) {
                let ln_l = guarded_ln(ll);
                let knee = pow(ll, 2.0 / (1.0 + re)).floor() as i64;
                vec![
                    Piece::power_law(i64::MIN, -1, 0.0, 0.5),
                    Piece {
                        from: 1,
                        to: knee,
                        coef: ln_l.powf(-0.5),
                        offset: 0.0,
                        power: re / 2.0,
                    },
                    Piece::constant(knee + 1, i64::MAX, (rl as f64 / ln_l).sqrt()),
                ]
            } else {
                let ln_r = guarded_ln(rl);
                vec![
                    Piece {
                        from: 1,
                        to: i64::MAX,
                        coef: ln_r.powf(-0.5),
                        offset: 0.0,
                        power: re / 2.0,
                    },
                    Piece::power_law(-hi, -1, 0.0, 0.5),
                    Piece::constant(i64::MIN, -hi - 1, (ll as f64 / ln_r).sqrt()),
                ]
            }
        }
    };
    (
        regime,
        PositionSchedule {
            anchor: Anchor::Farthest,
            mirror,
            pieces,
        },
    )
}

/// The path system and weights used to certify a gap lower bound for the
/// family. `case` is `"auto"` or the label of the configuration that
/// applies; asking for a configuration of another regime is an error.
pub fn recipe(family: &DensityFamily, case: &str) -> Result<Recipe> {
    family.validate()?;
    let grid = family.grid()?;
    let r = match *family {
        DensityFamily::OneDAsym1 {
            left_exponent, n, ..
        } => Recipe {
            case: "asymvalley".into(),
            mode: TargetSet::Pairs,
            rule: PathRule::OneDSegment,
            weight: WeightFunction::PowerOfPosition(PositionSchedule {
                anchor: Anchor::Lower,
                mirror: false,
                pieces: vec![Piece::power_law(
                    -(n as i64),
                    n as i64,
                    1.0,
                    left_exponent / 2.0,
                )],
            }),
            symmetry_reduction: false,
        },
        DensityFamily::OneDAsym2 {
            left_exponent,
            right_exponent,
            left_len,
            right_len,
        } => {
            let (regime, schedule) =
                lem2_schedule(left_exponent, right_exponent, left_len, right_len);
            Recipe {
                case: regime.label().into(),
                mode: TargetSet::Pairs,
                rule: PathRule::OneDSegment,
                weight: WeightFunction::PowerOfPosition(schedule),
                symmetry_reduction: false,
            }
        }
        DensityFamily::ExpLinear {
            slope_x,
            slope_y,
            n,
        } => {
            let pick = |s: f64| if s >= 0.0 { n as i64 } else { 1 };
            let state = grid.index(&[pick(slope_x), pick(slope_y)]).unwrap();
            Recipe {
                case: "exp_linear:corner".into(),
                mode: TargetSet::ToPoint { state },
                rule: PathRule::CornerMonotone,
                weight: WeightFunction::PowerOfQ { exponent: 0.25 },
                symmetry_reduction: false,
            }
        }
        DensityFamily::ExpFalloff { shape, n, .. } => {
            let c = falloff_center(shape);
            let near = |z: f64| ((n as f64 * z + 0.5).round() as i64).clamp(1, n as i64);
            let state = grid.index(&[near(c[0]), near(c[1])]).unwrap();
            Recipe {
                case: "exp_falloff:staircase".into(),
                mode: TargetSet::ToPoint { state },
                rule: PathRule::StaircaseToPoint,
                weight: WeightFunction::PowerOfQ { exponent: 0.25 },
                symmetry_reduction: false,
            }
        }
        DensityFamily::FlatClass { dim, .. } => {
            if dim != 2 {
                return Err(Error::Unsupported {
                    reason: format!("rectangle paths are defined in two dimensions, not {dim}"),
                    nearest: "flat_class with dim = 2".into(),
                });
            }
            Recipe {
                case: "flat:rectangle".into(),
                mode: TargetSet::Pairs,
                rule: PathRule::RectangleSides,
                weight: WeightFunction::Unit,
                symmetry_reduction: false,
            }
        }
        DensityFamily::Valley { exponent, .. } => {
            let offsets = family.valley_offsets(&grid);
            Recipe {
                case: "valley:paths".into(),
                mode: TargetSet::Pairs,
                rule: PathRule::ValleyRule {
                    offsets: offsets.clone(),
                },
                weight: WeightFunction::ValleyDistance { exponent, offsets },
                symmetry_reduction: true,
            }
        }
    };
    if case.is_empty() || case == "auto" || case == r.case {
        return Ok(r);
    }
    let known = [
        "asymvalley",
        "exp_linear:corner",
        "exp_falloff:staircase",
        "flat:rectangle",
        "valley:paths",
        Lem2Regime::BothSteep.label(),
        Lem2Regime::OneShallow.label(),
        Lem2Regime::BothCritical.label(),
        Lem2Regime::CriticalSteep.label(),
    ];
    if known.contains(&case) {
        Err(Error::Unsupported {
            reason: format!("configuration '{case}' does not apply to these parameters"),
            nearest: r.case,
        })
    } else {
        Err(Error::UnknownCase(case.to_string()))
    }
}

/// Build the recipe for `family` and evaluate its bound on `chain`, which
/// must be the family's chain. The recipe decides symmetry reduction.
pub fn certify(
    chain: &GridChain,
    family: &DensityFamily,
    case: &str,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    let r = recipe(family, case)?;
    let paths = PathSystem::new(chain, r.mode, r.rule)?;
    let opts = BoundOptions {
        symmetry_reduction: r.symmetry_reduction,
        ..opts.clone()
    };
    compute_w(chain, &paths, &r.weight, &opts)
}
