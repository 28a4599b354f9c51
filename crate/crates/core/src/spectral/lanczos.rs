//! Lanczos with full reorthogonalization on the complement of `sqrt(pi)`.

use super::ITERATIVE_TOL;
use super::{finish, residual, sqrt_pi, SolverUsed, SpectralOptions, SpectralReport, Tridiagonal};
use crate::chain::GridChain;
use crate::{Error, Result};

const TARGET: f64 = 1e-11;
const CHECK_EVERY: usize = 10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += c * b;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        for a in v.iter_mut() {
            *a /= n;
        }
    }
    n
}

fn orthogonalize(w: &mut [f64], root: &[f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        let c = dot(root, w);
        axpy(w, -c, root);
        for q in basis {
            let c = dot(q, w);
            axpy(w, -c, q);
        }
    }
}

/// Alternating signs plus a linear ramp in state order.
fn start_vector(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let alt = if i % 2 == 0 { 1.0 } else { -1.0 };
            alt + 2.0 * i as f64 / (n - 1).max(1) as f64 - 1.0
        })
        .collect()
}

pub(super) fn solve(chain: &GridChain, opts: &SpectralOptions) -> Result<SpectralReport> {
    let n = chain.len();
    let mut root = sqrt_pi(chain);
    normalize(&mut root);
    let cap = opts.max_basis.min(n - 1).max(1);
    let mut start = start_vector(n);
    let mut iterations = 0;
    let mut best: Option<(f64, f64, f64, Vec<f64>)> = None;

    for _ in 0..=opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cap);
        let mut alpha = Vec::with_capacity(cap);
        let mut beta: Vec<f64> = Vec::with_capacity(cap);
        let mut q = start.clone();
        orthogonalize(&mut q, &root, &[]);
        if normalize(&mut q) == 0.0 {
            q = start_vector(n)
                .iter()
                .enumerate()
                .map(|(i, v)| v * (i as f64 + 1.0))
                .collect();
            orthogonalize(&mut q, &root, &[]);
            normalize(&mut q);
        }
        basis.push(q);
        let mut w = vec![0.0; n];
        loop {
            let j = basis.len() - 1;
            chain.apply_symmetric_generator(&basis[j], &mut w);
            let a = dot(&basis[j], &w);
            axpy(&mut w, -a, &basis[j]);
            if j > 0 {
                axpy(&mut w, -beta[j - 1], &basis[j - 1]);
            }
            orthogonalize(&mut w, &root, &basis);
            let b = dot(&w, &w).sqrt();
            alpha.push(a);
            iterations += 1;
            let k = basis.len();
            let exhausted = b <= 1e-14 || k >= cap;
            if k % CHECK_EVERY == 0 || exhausted {
                let t = Tridiagonal {
                    diag: alpha.clone(),
                    off: beta.clone(),
                };
                let theta = t.eigenvalue(0);
                let s = t.eigenvector(theta, &[]);
                let estimate = (b * s[k - 1]).abs();
                if estimate <= TARGET || exhausted {
                    let mut y = vec![0.0; n];
                    for (si, qi) in s.iter().zip(&basis) {
                        axpy(&mut y, *si, qi);
                    }
                    orthogonalize(&mut y, &root, &[]);
                    normalize(&mut y);
                    let mut ly = vec![0.0; n];
                    chain.apply_symmetric_generator(&y, &mut ly);
                    let value = dot(&y, &ly);
                    let r = residual(chain, &y, value);
                    let top = t.eigenvalue(k - 1);
                    if best.as_ref().is_none_or(|bst| r < bst.1) {
                        best = Some((value, r, top, y.clone()));
                    }
                    if r <= TARGET {
                        break;
                    }
                    if exhausted {
                        start = y;
                        break;
                    }
                }
            }
            if exhausted {
                break;
            }
            beta.push(b);
            let mut next = w.clone();
            for v in next.iter_mut() {
                *v /= b;
            }
            basis.push(next);
        }
        if best.as_ref().is_some_and(|b| b.1 <= TARGET) {
            break;
        }
    }
    let (value, r, top, y) = best.expect("at least one Ritz pair");
    if r > ITERATIVE_TOL {
        return Err(Error::NonConvergence {
            estimate: value,
            residual: r,
        });
    }
    Ok(finish(
        chain,
        value,
        top,
        None,
        y,
        SolverUsed::Iterative,
        iterations,
    ))
}
