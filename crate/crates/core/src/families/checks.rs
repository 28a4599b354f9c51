//! Sampled class-membership checks and the discretization error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{falloff_center, DensityFamily, FlatShape};
use crate::numeric::gauss_legendre;
use crate::{Error, Result};

const PAIRS: usize = 200;
const POINTS_PER_PAIR: usize = 32;
const TOLERANCE: f64 = 0.05;
const SUBCELLS: usize = 4;

#[derive(Clone, Debug, Serialize)]
pub struct ClassReport {
    pub samples: usize,
    pub violations: Vec<String>,
}

impl ClassReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Cell of a lattice state in continuum coordinates, as `(lo, hi)` per axis.
fn cell(family: &DensityFamily, coords: &[i64]) -> Vec<(f64, f64)> {
    let n = family.size().max(1) as f64;
    match family {
        DensityFamily::OneDAsym1 { .. } | DensityFamily::OneDAsym2 { .. } => {
            let c = coords[0] as f64;
            vec![((c - 0.5) / n, (c + 0.5) / n)]
        }
        _ => coords
            .iter()
            .map(|&c| ((c as f64 - 1.0) / n, c as f64 / n))
            .collect(),
    }
}

/// Average of `exp(log_density)` over an axis-aligned box, by a composite
/// tensor Gauss rule with `q` nodes per axis on each of `SUBCELLS` pieces.
fn box_average(
    family: &DensityFamily,
    bounds: &[(f64, f64)],
    nodes: &[f64],
    weights: &[f64],
) -> f64 {
    let dim = bounds.len();
    let per_axis = nodes.len() * SUBCELLS;
    let total = per_axis.pow(dim as u32);
    let mut z = vec![0.0; dim];
    let mut acc = 0.0;
    for idx in 0..total {
        let mut rest = idx;
        let mut w = 1.0;
        for (a, &(lo, hi)) in bounds.iter().enumerate() {
            let i = rest % per_axis;
            rest /= per_axis;
            let (piece, node) = (i / nodes.len(), i % nodes.len());
            let h = (hi - lo) / SUBCELLS as f64;
            let left = lo + piece as f64 * h;
            z[a] = left + 0.5 * h * (nodes[node] + 1.0);
            w *= 0.5 * weights[node] / SUBCELLS as f64;
        }
        acc += w * family.log_density(&z).exp();
    }
    acc
}

/// Largest relative gap between the lattice weight and the cell average of
/// the continuous density.
pub fn discretization_error(
    family: &DensityFamily,
    quadrature_points_per_cell: usize,
) -> Result<f64> {
    if quadrature_points_per_cell < 2 {
        return Err(Error::QuadratureTooCoarse(quadrature_points_per_cell));
    }
    let (grid, lw) = family.discretize()?;
    let (nodes, weights) = gauss_legendre(quadrature_points_per_cell);
    let mut worst: f64 = 0.0;
    for s in 0..grid.len() {
        let bounds = cell(family, &grid.coords(s));
        let avg = box_average(family, &bounds, &nodes, &weights);
        let f = lw[s].exp();
        worst = worst.max((f - avg).abs() / f);
    }
    Ok(worst)
}

fn uniform_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

/// Sampled check of the Lipschitz bound and the radial growth bound of
/// `g = -log f`, plus the ratio bound between the two constants.
///
/// The growth bound is checked in the scale-aware form
/// `g(z) - g(z + t (center - z)) >= rate * t * |z - center|`.
pub fn check_falloff_class(family: &DensityFamily, seed: u64) -> Result<ClassReport> {
    let DensityFamily::ExpFalloff {
        shape,
        rate,
        ratio_bound,
        ..
    } = *family
    else {
        return Err(Error::invalid(family.tag(), "not a fall-off family"));
    };
    family.validate()?;
    let lip = family.falloff_lipschitz().unwrap();
    let g = |z: &[f64]| -family.log_density(z);
    let center = falloff_center(shape);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    if lip / rate > ratio_bound {
        violations.push(format!(
            "ratio lipschitz/rate = {} exceeds {}",
            lip / rate,
            ratio_bound
        ));
    }
    let mut samples = 0;
    for _ in 0..PAIRS {
        let z = uniform_point(&mut rng, 2);
        let w = uniform_point(&mut rng, 2);
        let dist = (z[0] - w[0]).hypot(z[1] - w[1]);
        let diff = (g(&z) - g(&w)).abs();
        samples += 1;
        if diff > lip * dist * (1.0 + TOLERANCE) + 1e-12 {
            violations.push(format!(
                "lipschitz: |g(z)-g(w)| = {diff:.6} > {lip} * {dist:.6} at z={z:?} w={w:?}"
            ));
        }
        let r = (z[0] - center[0]).hypot(z[1] - center[1]);
        for j in 1..=POINTS_PER_PAIR {
            let t = j as f64 / POINTS_PER_PAIR as f64;
            let p = [z[0] + t * (center[0] - z[0]), z[1] + t * (center[1] - z[1])];
            let drop = g(&z) - g(&p);
            samples += 1;
            if drop < rate * t * r * (1.0 - TOLERANCE) - 1e-12 {
                violations.push(format!(
                    "growth: g(z) - g(z + t(c - z)) = {drop:.6} < {rate} * {t} * {r:.6} at z={z:?}"
                ));
                break;
            }
        }
    }
    if g(&center).abs() > 1e-12 {
        violations.push("g does not vanish at its center".into());
    }
    Ok(ClassReport {
        samples,
        violations,
    })
}

/// `int f / sup f` over the unit cube, by composite Gauss quadrature.
pub(crate) fn flat_mass_ratio(shape: FlatShape, dim: usize) -> f64 {
    let probe = DensityFamily::FlatClass {
        shape,
        dim,
        n: 1,
        lipschitz: Some(f64::INFINITY),
        segment_const: Some(1.0),
        mass_ratio: Some(1.0),
    };
    let sup = match shape {
        FlatShape::Power { scale, power } => (1.0 + scale * dim as f64).powf(power),
        FlatShape::Quartic { .. } => 1.0,
    };
    let (nodes, weights) = gauss_legendre(8);
    let pieces: usize = if dim <= 2 { 8 } else { 2 };
    let mut total = 0.0;
    let cells = pieces.pow(dim as u32);
    for c in 0..cells {
        let mut rest = c;
        let bounds: Vec<(f64, f64)> = (0..dim)
            .map(|_| {
                let i = rest % pieces;
                rest /= pieces;
                (i as f64 / pieces as f64, (i + 1) as f64 / pieces as f64)
            })
            .collect();
        total += box_average(&probe, &bounds, &nodes, &weights) / cells as f64;
    }
    total / sup
}

/// Sampled check of the flat-class conditions: bounded log-gradient,
/// the segment condition with its constant, and the mass ratio.
pub fn check_flat_class(family: &DensityFamily, seed: u64) -> Result<ClassReport> {
    let DensityFamily::FlatClass { shape, dim, .. } = *family else {
        return Err(Error::invalid(family.tag(), "not a flat-class family"));
    };
    family.validate()?;
    let (lip, seg, mass) = family.flat_constants();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut samples = 0;
    let h = 1e-6;
    for _ in 0..PAIRS {
        let z = uniform_point(&mut rng, dim);
        for i in 0..dim {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] = (z[i] + h).min(1.0);
            zm[i] = (z[i] - h).max(0.0);
            let d = (family.log_density(&zp) - family.log_density(&zm)) / (zp[i] - zm[i]);
            samples += 1;
            if d.abs() > lip * (1.0 + TOLERANCE) {
                violations.push(format!(
                    "log-gradient {d:.6} exceeds {lip} along axis {i} at {z:?}"
                ));
            }
        }
        let w = uniform_point(&mut rng, dim);
        let floor = family.log_density(&z).min(family.log_density(&w));
        for j in 1..POINTS_PER_PAIR {
            let t = j as f64 / POINTS_PER_PAIR as f64;
            let p: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a + t * (b - a)).collect();
            samples += 1;
            if family.log_density(&p).exp() < seg * floor.exp() * (1.0 - TOLERANCE) {
                violations.push(format!("segment condition fails between {z:?} and {w:?}"));
                break;
            }
        }
    }
    let actual = flat_mass_ratio(shape, dim);
    if mass > actual * (1.0 + TOLERANCE) {
        violations.push(format!("mass ratio {mass} exceeds computed {actual:.6}"));
    }
    Ok(ClassReport {
        samples,
        violations,
    })
}
