//! Catalog of target densities and their lattice discretizations.

mod checks;
mod testfn;

pub use checks::{check_falloff_class, check_flat_class, discretization_error, ClassReport};
pub use testfn::{applicable_cases, test_function, TestFunction};

use serde::{Deserialize, Serialize};

use crate::chain::{build_metropolis_log, Grid, GridChain};
use crate::{Error, Result};

/// Line through the origin of `[-1, 1]^2` along which a valley density is
/// minimal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValleyLine {
    /// `x + y = 0`, with the lattice profile `(1 + (scale/n)|x1 + x2 - 1|)^exponent`.
    Diagonal,
    /// Line with unit normal `(a, b)`; profile `(1 + scale * dist)^exponent`.
    Normal { a: f64, b: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FalloffShape {
    /// `g(z) = rate * |z - center|`.
    Cone { center: [f64; 2] },
    /// `g(z) = rate * min(u + v, 1)` where `(u, v)` is `z` after
    /// `quarter_turns` rotations of the unit square about its center.
    Wedge { quarter_turns: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlatShape {
    /// `(1 + scale * sum_i z_i)^power`, any dimension.
    Power { scale: f64, power: f64 },
    /// `(1 + (scale x)^2 + (scale y)^4)^(-power)`, two dimensions.
    Quartic { scale: f64, power: f64 },
}

fn default_eps() -> f64 {
    0.5
}

fn default_ratio_bound() -> f64 {
    2.0
}

fn default_dim() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensityFamily {
    /// `(1 + |k|)^left_exponent` for `k <= 0` and `(1 + |k|)^right_exponent`
    /// for `k > 0` on `{-n, ..., n}`.
    OneDAsym1 {
        left_exponent: f64,
        right_exponent: f64,
        n: usize,
    },
    /// Same profile on `{-left_len, ..., right_len}` with unordered exponents.
    OneDAsym2 {
        left_exponent: f64,
        right_exponent: f64,
        left_len: usize,
        right_len: usize,
    },
    /// `exp(slope_x x + slope_y y)` on the unit square.
    ExpLinear {
        slope_x: f64,
        slope_y: f64,
        n: usize,
    },
    /// `exp(-g)` with a Lipschitz `g` growing linearly away from its minimum.
    ExpFalloff {
        shape: FalloffShape,
        rate: f64,
        #[serde(default)]
        lipschitz: Option<f64>,
        #[serde(default = "default_ratio_bound")]
        ratio_bound: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        n: usize,
    },
    /// Members of the flat class: bounded log-gradient, weakly convex level
    /// sets and a mass bound.
    FlatClass {
        shape: FlatShape,
        #[serde(default = "default_dim")]
        dim: usize,
        n: usize,
        #[serde(default)]
        lipschitz: Option<f64>,
        #[serde(default)]
        segment_const: Option<f64>,
        #[serde(default)]
        mass_ratio: Option<f64>,
    },
    /// `(1 + scale * dist(z, line))^exponent` on `[-1, 1]^2`.
    Valley {
        exponent: f64,
        scale: f64,
        line: ValleyLine,
        #[serde(default = "default_eps")]
        eps: f64,
        n: usize,
    },
}

/// Two-sided power profile on an interval around zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct TwoSided {
    pub left_exp: f64,
    pub right_exp: f64,
    pub left_len: usize,
    pub right_len: usize,
}

impl TwoSided {
    pub fn exponent(&self, k: i64) -> f64 {
        if k <= 0 {
            self.left_exp
        } else {
            self.right_exp
        }
    }

    pub fn log_weight(&self, k: i64) -> f64 {
        self.exponent(k) * (1.0 + k.unsigned_abs() as f64).ln()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::interval(-(self.left_len as i64), self.right_len as i64)
    }
}

impl DensityFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            DensityFamily::OneDAsym1 { .. } => "one_d_asym1",
            DensityFamily::OneDAsym2 { .. } => "one_d_asym2",
            DensityFamily::ExpLinear { .. } => "exp_linear",
            DensityFamily::ExpFalloff { .. } => "exp_falloff",
            DensityFamily::FlatClass { .. } => "flat_class",
            DensityFamily::Valley { .. } => "valley",
        }
    }

    /// Grid resolution; for the uneven interval this is the right length.
    pub fn size(&self) -> usize {
        match *self {
            DensityFamily::OneDAsym1 { n, .. }
            | DensityFamily::ExpLinear { n, .. }
            | DensityFamily::ExpFalloff { n, .. }
            | DensityFamily::FlatClass { n, .. }
            | DensityFamily::Valley { n, .. } => n,
            DensityFamily::OneDAsym2 { right_len, .. } => right_len,
        }
    }

    pub(crate) fn two_sided(&self) -> Option<TwoSided> {
        match *self {
            DensityFamily::OneDAsym1 {
                left_exponent,
                right_exponent,
                n,
            } => Some(TwoSided {
                left_exp: left_exponent,
                right_exp: right_exponent,
                left_len: n,
                right_len: n,
            }),
            DensityFamily::OneDAsym2 {
                left_exponent,
                right_exponent,
                left_len,
                right_len,
            } => Some(TwoSided {
                left_exp: left_exponent,
                right_exp: right_exponent,
                left_len,
                right_len,
            }),
            _ => None,
        }
    }

    /// Check the family's standing assumptions.
    pub fn validate(&self) -> Result<()> {
        let tag = self.tag();
        let fail = |reason: &str| Err(Error::invalid(tag, reason));
        match *self {
            DensityFamily::OneDAsym1 {
                left_exponent: l,
                right_exponent: r,
                n,
            } => {
                if !(l.is_finite() && r.is_finite()) || l < 0.0 || l > r {
                    return fail("exponents must satisfy 0 <= left_exponent <= right_exponent");
                }
                if n == 0 {
                    return fail("n must be positive");
                }
            }
            DensityFamily::OneDAsym2 {
                left_exponent: l,
                right_exponent: r,
                left_len,
                right_len,
            } => {
                if !(l.is_finite() && r.is_finite()) || l < 0.0 || r < 0.0 {
                    return fail("exponents must be non-negative");
                }
                if left_len + right_len == 0 {
                    return fail("interval must contain an edge");
                }
            }
            DensityFamily::ExpLinear {
                slope_x,
                slope_y,
                n,
            } => {
                if n == 0 {
                    return fail("n must be positive");
                }
                if !(slope_x.is_finite() && slope_y.is_finite()) {
                    return fail("slopes must be finite");
                }
                if slope_x == 0.0 && slope_y == 0.0 {
                    return fail("at least one slope must be nonzero");
                }
                if slope_x.abs().max(slope_y.abs()) > n as f64 {
                    return fail("each slope must satisfy |slope| <= n");
                }
            }
            DensityFamily::ExpFalloff {
                shape,
                rate,
                ratio_bound,
                eps,
                n,
                ..
            } => {
                let lip = self.falloff_lipschitz().unwrap_or(rate);
                if !(rate > 0.0 && rate <= lip) {
                    return fail("need 0 < rate <= lipschitz");
                }
                if !(ratio_bound >= 1.0 && lip / rate <= ratio_bound * (1.0 + 1e-12)) {
                    return fail("need lipschitz / rate <= ratio_bound with ratio_bound >= 1");
                }
                if !(eps > 0.0 && eps <= 1.0) {
                    return fail("eps must lie in (0, 1]");
                }
                let nf = n as f64;
                if nf < eps * lip * (1.0 - 1e-12) || nf > rate / eps * (1.0 + 1e-12) {
                    return fail("need eps * lipschitz <= n <= rate / eps");
                }
                if let FalloffShape::Cone { center } = shape {
                    if center.iter().any(|c| !(0.0..=1.0).contains(c)) {
                        return fail("cone center must lie in the unit square");
                    }
                }
                if let FalloffShape::Wedge { quarter_turns } = shape {
                    if quarter_turns > 3 {
                        return fail("quarter_turns must be 0..=3");
                    }
                }
            }
            DensityFamily::FlatClass { shape, dim, n, .. } => {
                if dim == 0 {
                    return fail("dimension must be positive");
                }
                let (scale, power) = match shape {
                    FlatShape::Power { scale, power } | FlatShape::Quartic { scale, power } => {
                        (scale, power)
                    }
                };
                if !(scale > 0.0 && power > 0.0 && scale.is_finite() && power.is_finite()) {
                    return fail("scale and power must be positive");
                }
                if matches!(shape, FlatShape::Quartic { .. }) && dim != 2 {
                    return fail("the quartic shape is two-dimensional");
                }
                let lip = self.flat_constants().0;
                if (n as f64) < lip {
                    return fail("need n >= lipschitz constant");
                }
            }
            DensityFamily::Valley {
                exponent,
                scale,
                line,
                eps,
                n,
            } => {
                if !(exponent >= 0.0 && exponent.is_finite()) {
                    return fail("exponent must be non-negative");
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return fail("scale must be positive");
                }
                if !(eps > 0.0 && eps <= 1.0) {
                    return fail("eps must lie in (0, 1]");
                }
                let nf = n as f64;
                if nf < eps * scale * (1.0 - 1e-12) || nf > scale / eps * (1.0 + 1e-12) {
                    return fail("need eps * scale <= n <= scale / eps");
                }
                if let ValleyLine::Normal { a, b } = line {
                    let (a, b) = normalize_line(a, b).ok_or_else(|| {
                        Error::invalid(tag, "line normal must be a nonzero finite vector")
                    })?;
                    if a < b.abs() - 1e-12 {
                        return fail("line must be at least as vertical as horizontal (a >= |b|)");
                    }
                }
            }
        }
        Ok(())
    }

    fn falloff_lipschitz(&self) -> Option<f64> {
        match *self {
            DensityFamily::ExpFalloff {
                shape,
                rate,
                lipschitz,
                ..
            } => Some(lipschitz.unwrap_or(match shape {
                FalloffShape::Cone { .. } => rate,
                FalloffShape::Wedge { .. } => std::f64::consts::SQRT_2 * rate,
            })),
            _ => None,
        }
    }

    /// `(lipschitz, segment_const, mass_ratio)` of a flat-class member, with
    /// defaults derived from the shape.
    pub fn flat_constants(&self) -> (f64, f64, f64) {
        match *self {
            DensityFamily::FlatClass {
                shape,
                dim,
                lipschitz,
                segment_const,
                mass_ratio,
                ..
            } => {
                let natural = match shape {
                    FlatShape::Power { scale, power } => scale * power,
                    FlatShape::Quartic { scale, power } => 3f64.powf(0.75) * scale * power,
                };
                let lip = lipschitz.unwrap_or(natural.max(1.0));
                let seg = segment_const.unwrap_or(1.0);
                let mass = mass_ratio.unwrap_or_else(|| checks::flat_mass_ratio(shape, dim));
                (lip, seg, mass)
            }
            _ => (f64::NAN, f64::NAN, f64::NAN),
        }
    }

    /// Continuous log-density at a point of the family's domain.
    pub fn log_density(&self, z: &[f64]) -> f64 {
        match *self {
            DensityFamily::OneDAsym1 { .. } | DensityFamily::OneDAsym2 { .. } => {
                let p = self.two_sided().unwrap();
                let n = self.size().max(1) as f64;
                let u = z[0];
                let e = if u <= 0.0 { p.left_exp } else { p.right_exp };
                e * (1.0 + n * u.abs()).ln()
            }
            DensityFamily::ExpLinear {
                slope_x, slope_y, ..
            } => slope_x * z[0] + slope_y * z[1],
            DensityFamily::ExpFalloff { shape, rate, .. } => match shape {
                FalloffShape::Cone { center } => {
                    -rate * ((z[0] - center[0]).hypot(z[1] - center[1]))
                }
                FalloffShape::Wedge { quarter_turns } => {
                    let (u, v) = rotate_unit(z[0], z[1], quarter_turns);
                    -rate * (u + v).min(1.0)
                }
            },
            DensityFamily::FlatClass { shape, .. } => match shape {
                FlatShape::Power { scale, power } => {
                    power * (1.0 + scale * z.iter().sum::<f64>()).ln()
                }
                FlatShape::Quartic { scale, power } => {
                    let (x, y) = (scale * z[0], scale * z[1]);
                    -power * (1.0 + x * x + y.powi(4)).ln()
                }
            },
            DensityFamily::Valley {
                exponent,
                scale,
                line,
                ..
            } => {
                let d = match line {
                    ValleyLine::Diagonal => (z[0] + z[1]).abs(),
                    ValleyLine::Normal { a, b } => {
                        let (a, b) = normalize_line(a, b).unwrap();
                        (a * z[0] + b * z[1]).abs()
                    }
                };
                exponent * (1.0 + scale * d).ln()
            }
        }
    }

    /// Lattice box for this family.
    pub fn grid(&self) -> Result<Grid> {
        match *self {
            DensityFamily::OneDAsym1 { .. } | DensityFamily::OneDAsym2 { .. } => {
                self.two_sided().unwrap().grid()
            }
            DensityFamily::ExpLinear { n, .. } | DensityFamily::ExpFalloff { n, .. } => {
                Grid::cube(n, 2)
            }
            DensityFamily::FlatClass { n, dim, .. } => Grid::cube(n, dim),
            DensityFamily::Valley { n, .. } => Grid::centered(n, 2),
        }
    }

    /// Continuous point represented by lattice state coordinates.
    pub fn cell_center(&self, coords: &[i64]) -> Vec<f64> {
        let n = self.size().max(1) as f64;
        match self {
            DensityFamily::OneDAsym1 { .. } | DensityFamily::OneDAsym2 { .. } => {
                vec![coords[0] as f64 / n]
            }
            _ => coords.iter().map(|&c| (c as f64 - 0.5) / n).collect(),
        }
    }

    /// Log-weights on the lattice box; the one-dimensional and valley
    /// families use their exact lattice formulas.
    pub fn log_weights(&self, grid: &Grid) -> Vec<f64> {
        match *self {
            DensityFamily::OneDAsym1 { .. } | DensityFamily::OneDAsym2 { .. } => {
                let p = self.two_sided().unwrap();
                (0..grid.len())
                    .map(|s| p.log_weight(grid.coord(s, 0)))
                    .collect()
            }
            DensityFamily::ExpLinear {
                slope_x,
                slope_y,
                n,
            } => {
                let nf = n as f64;
                (0..grid.len())
                    .map(|s| {
                        let (x, y) = (grid.coord(s, 0) as f64, grid.coord(s, 1) as f64);
                        (slope_x * x + slope_y * y - (slope_x + slope_y) / 2.0) / nf
                    })
                    .collect()
            }
            DensityFamily::Valley { exponent, .. } => self
                .valley_offsets(grid)
                .into_iter()
                .map(|o| exponent * (1.0 + o.abs()).ln())
                .collect(),
            _ => (0..grid.len())
                .map(|s| self.log_density(&self.cell_center(&grid.coords(s))))
                .collect(),
        }
    }

    /// Signed distance of each valley state to the line, in the units of
    /// the profile, so that `F = (1 + |offset|)^exponent`.
    pub fn valley_offsets(&self, grid: &Grid) -> Vec<f64> {
        match *self {
            DensityFamily::Valley { scale, line, n, .. } => {
                let nf = n as f64;
                match line {
                    ValleyLine::Diagonal => {
                        let c = scale / nf;
                        (0..grid.len())
                            .map(|s| c * (grid.coord(s, 0) + grid.coord(s, 1) - 1) as f64)
                            .collect()
                    }
                    ValleyLine::Normal { a, b } => {
                        let (a, b) = normalize_line(a, b).unwrap();
                        (0..grid.len())
                            .map(|s| {
                                let p1 = (grid.coord(s, 0) as f64 - 0.5) / nf;
                                let p2 = (grid.coord(s, 1) as f64 - 0.5) / nf;
                                scale * (a * p1 + b * p2)
                            })
                            .collect()
                    }
                }
            }
            _ => Vec::new(),
        }
    }

    /// Validate, discretize and build the Metropolis chain.
    pub fn discretize(&self) -> Result<(Grid, Vec<f64>)> {
        self.validate()?;
        let grid = self.grid()?;
        let lw = self.log_weights(&grid);
        Ok((grid, lw))
    }

    pub fn build_chain(&self) -> Result<GridChain> {
        let (grid, lw) = self.discretize()?;
        build_metropolis_log(&grid, lw)
    }

    /// Parameters as a compact, stable `key=value;...` string.
    pub fn describe(&self) -> String {
        let v = serde_json::to_value(self).unwrap_or_default();
        let mut parts = Vec::new();
        flatten_json("", &v, &mut parts);
        parts.retain(|p| !p.starts_with("family="));
        parts.join(";")
    }
}

fn flatten_json(prefix: &str, v: &serde_json::Value, out: &mut Vec<String>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, val) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_json(&key, val, out);
            }
        }
        serde_json::Value::Array(items) => {
            let s: Vec<String> = items.iter().map(|i| i.to_string()).collect();
            out.push(format!("{prefix}=[{}]", s.join(" ")));
        }
        serde_json::Value::Null => {}
        serde_json::Value::String(s) => out.push(format!("{prefix}={s}")),
        other => out.push(format!("{prefix}={other}")),
    }
}

/// Unit normal with `a >= 0` (and `b > 0` when `a == 0`).
pub(crate) fn normalize_line(a: f64, b: f64) -> Option<(f64, f64)> {
    let r = a.hypot(b);
    if !(r.is_finite() && r > 0.0) {
        return None;
    }
    let (mut a, mut b) = (a / r, b / r);
    if a < 0.0 || (a == 0.0 && b < 0.0) {
        a = -a;
        b = -b;
    }
    Some((a, b))
}

fn rotate_unit(x: f64, y: f64, turns: u8) -> (f64, f64) {
    match turns % 4 {
        0 => (x, y),
        1 => (y, 1.0 - x),
        2 => (1.0 - x, 1.0 - y),
        _ => (1.0 - y, x),
    }
}

/// Minimizer of the fall-off exponent `g`, in continuum coordinates.
pub fn falloff_center(shape: FalloffShape) -> [f64; 2] {
    match shape {
        FalloffShape::Cone { center } => center,
        FalloffShape::Wedge { quarter_turns } => {
            let c = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
            c[(quarter_turns % 4) as usize]
        }
    }
}
