//! Explicit test functions for Rayleigh-quotient upper bounds.

use serde::Serialize;

use super::{normalize_line, DensityFamily, TwoSided, ValleyLine};
use crate::chain::{Grid, TargetMeasure};
use crate::numeric::pairwise_sum;
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct TestFunction {
    pub case: String,
    #[serde(skip)]
    pub values: Vec<f64>,
    /// Balancing constants, by name.
    pub constants: Vec<(String, f64)>,
}

/// Case labels that apply to this family in its current regime.
pub fn applicable_cases(family: &DensityFamily) -> Vec<&'static str> {
    match *family {
        DensityFamily::OneDAsym1 { left_exponent, .. } => {
            let mut v = vec!["asymvalley:step", "lem1:linear"];
            if left_exponent > 0.0 && left_exponent < 1.0 {
                v.push("asymvalley:a<1");
            } else if left_exponent == 1.0 {
                v.push("asymvalley:a=1");
            } else if left_exponent > 1.0 {
                v.push("asymvalley:a>1");
            }
            v
        }
        DensityFamily::OneDAsym2 {
            left_exponent: l,
            right_exponent: r,
            left_len,
            right_len,
        } => {
            let mut v = vec!["lem1:linear"];
            if left_len > 0 && right_len > 0 {
                v.push("lem1:step");
                v.push("lem1:piecewise");
                if l == 1.0 && r == 1.0 {
                    v.push("lem2:loglog");
                } else if l.min(r) == 1.0 && l.max(r) > 1.0 {
                    v.push("lem2:mixed");
                }
            }
            v
        }
        DensityFamily::Valley { .. } => vec!["valley:antisym", "linear"],
        _ => vec!["linear"],
    }
}

fn harmonic(k: u64) -> f64 {
    (1..=k).map(|m| 1.0 / m as f64).sum()
}

fn guarded_log(n: usize) -> f64 {
    (n.max(2) as f64).ln()
}

/// `left` on `k <= 0` plus `c * right` on `k > 0`, with `c` chosen so the
/// result has mean zero.
fn balance(
    pi: &[f64],
    grid: &Grid,
    left: impl Fn(i64) -> f64,
    right: impl Fn(i64) -> f64,
) -> Result<(Vec<f64>, f64)> {
    let mut lt = Vec::new();
    let mut rt = Vec::new();
    for s in 0..grid.len() {
        let k = grid.coord(s, 0);
        if k <= 0 {
            lt.push(pi[s] * left(k));
        } else {
            rt.push(pi[s] * right(k));
        }
    }
    let (sl, sr) = (pairwise_sum(&lt), pairwise_sum(&rt));
    if sr == 0.0 || !sr.is_finite() {
        return Err(Error::RegimeMismatch {
            case: "balanced".into(),
            reason: "right-hand part has zero mean; grid too small".into(),
        });
    }
    let c = -sl / sr;
    let values = (0..grid.len())
        .map(|s| {
            let k = grid.coord(s, 0);
            if k <= 0 {
                left(k)
            } else {
                c * right(k)
            }
        })
        .collect();
    Ok((values, c))
}

fn mismatch(case: &str, reason: &str) -> Error {
    Error::RegimeMismatch {
        case: case.into(),
        reason: reason.into(),
    }
}

fn centered(target: &TargetMeasure, mut v: Vec<f64>) -> Vec<f64> {
    let m = target.expectation(&v);
    for x in v.iter_mut() {
        *x -= m;
    }
    v
}

fn one_d(
    p: TwoSided,
    first_family: bool,
    grid: &Grid,
    target: &TargetMeasure,
    case: &str,
) -> Result<TestFunction> {
    let pi = target.pi();
    let (l, r) = (p.left_exp, p.right_exp);
    let (nl, nr) = (p.left_len, p.right_len);
    let mut constants = Vec::new();
    let step = |name: &str| -> Result<(Vec<f64>, Vec<(String, f64)>)> {
        if nl == 0 || nr == 0 {
            return Err(mismatch(name, "needs both sides of zero"));
        }
        let left: Vec<f64> = (0..grid.len())
            .filter(|&s| grid.coord(s, 0) <= 0)
            .map(|s| pi[s])
            .collect();
        let xi = pairwise_sum(&left);
        let v = (0..grid.len())
            .map(|s| if grid.coord(s, 0) <= 0 { 1.0 - xi } else { -xi })
            .collect();
        Ok((v, vec![("xi".to_string(), xi)]))
    };
    let values = match case {
        "asymvalley:step" | "asymvalley:a>1" | "lem1:step" => {
            if case.starts_with("asymvalley") && !first_family {
                return Err(mismatch(case, "applies to the symmetric-interval family"));
            }
            if case == "asymvalley:a>1" && l <= 1.0 {
                return Err(mismatch(case, "needs left exponent > 1"));
            }
            let (v, c) = step(case)?;
            constants = c;
            v
        }
        "asymvalley:a<1" => {
            if !first_family {
                return Err(mismatch(case, "applies to the symmetric-interval family"));
            }
            if !(l > 0.0 && l < 1.0) {
                return Err(mismatch(case, "needs left exponent in (0, 1)"));
            }
            let e = 1.0 + l - r;
            let (v, c) = balance(pi, grid, |k| k.abs() as f64, |k| (k as f64).powf(e))?;
            constants.push(("c_right".into(), c));
            v
        }
        "asymvalley:a=1" => {
            if !first_family {
                return Err(mismatch(case, "applies to the symmetric-interval family"));
            }
            if l != 1.0 {
                return Err(mismatch(case, "needs left exponent = 1"));
            }
            let (v, c) = balance(
                pi,
                grid,
                |k| harmonic(k.unsigned_abs()),
                |k| (k as f64).powf(1.0 - r) * (k as f64).ln(),
            )?;
            constants.push(("c_right".into(), c));
            v
        }
        "lem1:linear" | "linear" => centered(
            target,
            (0..grid.len()).map(|s| grid.coord(s, 0) as f64).collect(),
        ),
        "lem1:piecewise" => {
            if nl == 0 || nr == 0 {
                return Err(mismatch(case, "needs both sides of zero"));
            }
            let sl = (nr as f64).powf(1.0 + r);
            let sr = (nl as f64).powf(1.0 + l);
            let (v, c) = balance(pi, grid, |k| -sl * k as f64, |k| sr * k as f64)?;
            constants.push(("c".into(), c));
            v
        }
        "lem2:loglog" => {
            if !(l == 1.0 && r == 1.0) {
                return Err(mismatch(case, "needs both exponents = 1"));
            }
            let sl = (nr * nr) as f64 * guarded_log(nr);
            let sr = (nl * nl) as f64 * guarded_log(nl);
            let (v, c) = balance(
                pi,
                grid,
                |k| -sl * harmonic(k.unsigned_abs()),
                |k| sr * harmonic(k as u64),
            )?;
            constants.push(("c".into(), c));
            v
        }
        "lem2:mixed" => {
            if !(l.min(r) == 1.0 && l.max(r) > 1.0) {
                return Err(mismatch(case, "needs min exponent = 1 < max exponent"));
            }
            // The steep side plays the role of the right side; mirror otherwise.
            let mirrored = l > 1.0;
            let (steep_len, steep_exp, flat_len) = if mirrored { (nl, l, nr) } else { (nr, r, nl) };
            let s_flat = (steep_len as f64).powf(1.0 + steep_exp);
            let s_steep = (flat_len * flat_len) as f64;
            let (v, c) = balance(
                pi,
                grid,
                |k| {
                    let h = harmonic(k.unsigned_abs());
                    if mirrored {
                        s_steep * h
                    } else {
                        -s_flat * h
                    }
                },
                |k| {
                    let h = harmonic(k as u64);
                    if mirrored {
                        -s_flat * h
                    } else {
                        s_steep * h
                    }
                },
            )?;
            constants.push(("c".into(), c));
            v
        }
        other => return Err(Error::UnknownCase(other.to_string())),
    };
    Ok(TestFunction {
        case: case.to_string(),
        values,
        constants,
    })
}

fn valley_antisym(family: &DensityFamily, grid: &Grid) -> Vec<f64> {
    let DensityFamily::Valley { exponent, line, .. } = *family else {
        unreachable!()
    };
    match line {
        ValleyLine::Diagonal => {
            let span = 2 * grid.extent(0) + 2;
            let mut partial = vec![0.0; span];
            for m in 1..span {
                partial[m] = partial[m - 1] + (m as f64).powf(-exponent);
            }
            (0..grid.len())
                .map(|s| {
                    let j = grid.coord(s, 0) + grid.coord(s, 1) - 1;
                    if j == 0 {
                        0.0
                    } else {
                        j.signum() as f64 * partial[j.unsigned_abs() as usize]
                    }
                })
                .collect()
        }
        ValleyLine::Normal { .. } => {
            let integral = |t: f64| {
                if exponent == 1.0 {
                    t.ln_1p()
                } else {
                    ((1.0 + t).powf(1.0 - exponent) - 1.0) / (1.0 - exponent)
                }
            };
            family
                .valley_offsets(grid)
                .into_iter()
                .map(|o| o.signum() * integral(o.abs()))
                .collect()
        }
    }
}

/// Build the named test function for `family`, centered under its target.
pub fn test_function(family: &DensityFamily, case: &str) -> Result<TestFunction> {
    let (grid, lw) = family.discretize()?;
    let target = TargetMeasure::from_log_weights(lw)?;
    let tf = match family {
        DensityFamily::OneDAsym1 { .. } | DensityFamily::OneDAsym2 { .. } => one_d(
            family.two_sided().unwrap(),
            matches!(family, DensityFamily::OneDAsym1 { .. }),
            &grid,
            &target,
            case,
        )?,
        _ => {
            let values = match case {
                "valley:antisym" => {
                    if !matches!(family, DensityFamily::Valley { .. }) {
                        return Err(mismatch(case, "applies to valley densities only"));
                    }
                    if let DensityFamily::Valley {
                        line: ValleyLine::Normal { a, b },
                        ..
                    } = family
                    {
                        normalize_line(*a, *b)
                            .ok_or_else(|| mismatch(case, "degenerate line normal"))?;
                    }
                    valley_antisym(family, &grid)
                }
                "linear" => centered(
                    &target,
                    (0..grid.len())
                        .map(|s| (0..grid.dim()).map(|a| grid.coord(s, a) as f64).sum())
                        .collect(),
                ),
                other if other.contains(':') => {
                    return Err(mismatch(other, "case does not apply to this family"))
                }
                other => return Err(Error::UnknownCase(other.to_string())),
            };
            TestFunction {
                case: case.to_string(),
                values,
                constants: Vec::new(),
            }
        }
    };
    let mean = target.expectation(&tf.values);
    let sq: Vec<f64> = tf
        .values
        .iter()
        .zip(target.pi())
        .map(|(v, p)| p * v * v)
        .collect();
    let norm = pairwise_sum(&sq).sqrt();
    if mean.abs() > 1e-10 * norm {
        return Err(Error::NotCentered { mean });
    }
    Ok(tf)
}
