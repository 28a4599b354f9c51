//! Spectral gap of a reversible chain through its symmetrized generator
//! `I - D^{1/2} K D^{-1/2}`, whose bottom eigenvector is `sqrt(pi)`.

mod hqr;
mod lanczos;
mod tridiag;

pub use tridiag::Tridiagonal;

use nalgebra::{DMatrix, Hessenberg, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::chain::{dirichlet_form, variance, GridChain};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    Dense,
    Iterative,
    #[default]
    Auto,
}

impl std::str::FromStr for SolverMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(SolverMode::Dense),
            "iterative" => Ok(SolverMode::Iterative),
            "auto" => Ok(SolverMode::Auto),
            other => Err(Error::Config(format!("unknown solver mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverUsed {
    Tridiagonal,
    Dense,
    Iterative,
}

#[derive(Clone, Debug)]
pub struct SpectralOptions {
    pub mode: SolverMode,
    pub dense_cap: usize,
    /// Largest size that `Auto` sends to the dense solver in two or more
    /// dimensions.
    pub auto_dense_below: usize,
    pub second_gap: bool,
    pub max_basis: usize,
    pub max_restarts: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            mode: SolverMode::Auto,
            dense_cap: 20_000,
            auto_dense_below: 500,
            second_gap: false,
            max_basis: 1200,
            max_restarts: 6,
        }
    }
}

pub const DENSE_TOL: f64 = 1e-10;
pub const ITERATIVE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub gap: f64,
    pub beta1: f64,
    pub beta_min: f64,
    pub beta2: Option<f64>,
    pub second_gap: Option<f64>,
    pub solver: SolverUsed,
    pub residual: f64,
    pub iterations: usize,
    /// Unit eigenvector of the symmetrized generator for `gap`.
    #[serde(skip)]
    pub eigenvector: Vec<f64>,
}

impl SpectralReport {
    /// The corresponding eigenfunction of the kernel, `psi / sqrt(pi)`.
    pub fn eigenfunction(&self, chain: &GridChain) -> Vec<f64> {
        self.eigenvector
            .iter()
            .zip(chain.target().log_pi())
            .map(|(v, lp)| v * (-0.5 * lp).exp())
            .collect()
    }
}

fn sqrt_pi(chain: &GridChain) -> Vec<f64> {
    chain
        .target()
        .log_pi()
        .iter()
        .map(|l| (0.5 * l).exp())
        .collect()
}

fn residual(chain: &GridChain, v: &[f64], value: f64) -> f64 {
    let mut lv = vec![0.0; v.len()];
    chain.apply_symmetric_generator(v, &mut lv);
    lv.iter()
        .zip(v)
        .map(|(a, b)| (a - value * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn is_connected(chain: &GridChain) -> bool {
    let g = chain.grid();
    let mut seen = vec![false; g.len()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(x) = stack.pop() {
        for (y, k, _) in chain.moves(x) {
            if k > 0.0 && !seen[y] {
                seen[y] = true;
                count += 1;
                stack.push(y);
            }
        }
    }
    count == g.len()
}

/// Spectral gap with default options and the given solver mode.
pub fn spectral_gap(chain: &GridChain, mode: SolverMode) -> Result<SpectralReport> {
    spectral_gap_with(
        chain,
        &SpectralOptions {
            mode,
            ..SpectralOptions::default()
        },
    )
}

pub fn spectral_gap_with(chain: &GridChain, opts: &SpectralOptions) -> Result<SpectralReport> {
    let n = chain.len();
    if n < 2 {
        return Err(Error::BadGrid(
            "a spectral gap needs at least two states".into(),
        ));
    }
    if !is_connected(chain) {
        return Err(Error::Disconnected(0.0));
    }
    let report = match opts.mode {
        SolverMode::Dense => {
            if n > opts.dense_cap {
                return Err(Error::DenseCapExceeded {
                    states: n,
                    cap: opts.dense_cap,
                });
            }
            dense(chain, opts.second_gap)
        }
        SolverMode::Iterative => lanczos::solve(chain, opts)?,
        SolverMode::Auto => {
            if chain.grid().dim() == 1 {
                tridiagonal(chain, opts.second_gap)
            } else if n <= opts.auto_dense_below.min(opts.dense_cap) {
                dense(chain, opts.second_gap)
            } else {
                lanczos::solve(chain, opts)?
            }
        }
    };
    if report.gap <= 0.0 {
        return Err(Error::Disconnected(report.gap));
    }
    Ok(report)
}

fn finish(
    chain: &GridChain,
    gap: f64,
    top: f64,
    third: Option<f64>,
    eigenvector: Vec<f64>,
    solver: SolverUsed,
    iterations: usize,
) -> SpectralReport {
    let residual = residual(chain, &eigenvector, gap);
    SpectralReport {
        gap,
        beta1: 1.0 - gap,
        beta_min: 1.0 - top,
        beta2: third.map(|t| 1.0 - t),
        second_gap: third,
        solver,
        residual,
        iterations,
        eigenvector,
    }
}

fn tridiagonal(chain: &GridChain, second: bool) -> SpectralReport {
    let g = chain.grid();
    let n = g.len();
    let sym = chain.symmetric_rates();
    let t = Tridiagonal {
        diag: chain.out_rates().to_vec(),
        off: (0..n - 1).map(|i| -sym[g.edge_id(i, 0)]).collect(),
    };
    let gap = t.eigenvalue(1);
    let top = t.eigenvalue(n - 1);
    let third = (second && n > 2).then(|| t.eigenvalue(2));
    let root = sqrt_pi(chain);
    let v = t.eigenvector(gap, &[&root]);
    finish(chain, gap, top, third, v, SolverUsed::Tridiagonal, 0)
}

fn dense(chain: &GridChain, second: bool) -> SpectralReport {
    let n = chain.len();
    let eig = SymmetricEigen::new(chain.symmetric_generator_dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let gap = eig.eigenvalues[order[1]];
    let top = eig.eigenvalues[order[n - 1]];
    let third = (second && n > 2).then(|| eig.eigenvalues[order[2]]);
    let v: Vec<f64> = eig.eigenvectors.column(order[1]).iter().cloned().collect();
    finish(chain, gap, top, third, v, SolverUsed::Dense, 0)
}

/// Diagonal similarity by powers of two that evens out row and column
/// norms, so the QR iteration sees a well-scaled matrix.
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let (mut c, mut r) = (0.0, 0.0);
            for j in (0..n).filter(|&j| j != i) {
                c += a[(j, i)].abs();
                r += a[(i, j)].abs();
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let total = c + r;
            let mut f = 1.0;
            while c < r / 2.0 {
                f *= 2.0;
                c *= 4.0;
            }
            while c > r * 2.0 {
                f /= 2.0;
                c /= 4.0;
            }
            if (c + r) / f < 0.95 * total {
                done = false;
                a.row_mut(i).scale_mut(1.0 / f);
                a.column_mut(i).scale_mut(f);
            }
        }
    }
}

/// Eigenvalues of the kernel itself, without symmetrization, in decreasing
/// order. A reference solve for small chains: the kernel is balanced,
/// reduced to Hessenberg form and deflated by shifted QR.
pub fn direct_eigenvalues(chain: &GridChain) -> Result<Vec<f64>> {
    let mut m = chain.transition_dense();
    balance(&mut m);
    let h = Hessenberg::new(m).h();
    let eig = hqr::hessenberg_eigenvalues(&h).ok_or(Error::NonConvergence {
        estimate: f64::NAN,
        residual: f64::NAN,
    })?;
    let imag = eig.iter().map(|z| z.1.abs()).fold(0.0, f64::max);
    if imag > 1e-8 {
        return Err(Error::NonConvergence {
            estimate: f64::NAN,
            residual: imag,
        });
    }
    let mut re: Vec<f64> = eig.into_iter().map(|z| z.0).collect();
    re.sort_by(|a, b| b.total_cmp(a));
    Ok(re)
}

/// `(E(f, f), Var(f), pi(f))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraticForms {
    pub energy: f64,
    pub variance: f64,
    pub mean: f64,
}

pub fn quadratic_forms(chain: &GridChain, f: &[f64]) -> Result<QuadraticForms> {
    Ok(QuadraticForms {
        energy: dirichlet_form(chain, f, f)?,
        variance: variance(chain, f)?,
        mean: chain.target().expectation(f),
    })
}

/// `E(f, f) / Var(f)` for a centered `f`; an upper bound on the gap.
pub fn rayleigh_upper_bound(chain: &GridChain, f: &[f64]) -> Result<f64> {
    let q = quadratic_forms(chain, f)?;
    if q.variance <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    if q.mean.abs() > 1e-10 * (q.variance + q.mean * q.mean).sqrt() {
        return Err(Error::NotCentered { mean: q.mean });
    }
    Ok(q.energy / q.variance)
}
