//! Symmetric tridiagonal eigenproblems by Sturm bisection and inverse
//! iteration.

#[derive(Clone, Debug)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let e2 = if i == 0 {
                0.0
            } else {
                self.off[i - 1] * self.off[i - 1]
            };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
            if q == 0.0 {
                q = -f64::MIN_POSITIVE;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (zero-based), to full precision.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) + f64::MIN_POSITIVE;
        lo -= pad;
        hi += pad;
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    /// Solve `(T - shift) x = b` by Gaussian elimination with partial
    /// pivoting; exactly singular pivots are nudged.
    fn solve_shifted(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        if n == 1 {
            let d = self.diag[0] - shift;
            return vec![b[0] / if d == 0.0 { f64::EPSILON } else { d }];
        }
        // Banded LU with one extra super-diagonal for pivoting.
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - shift).collect();
        let mut up: Vec<f64> = self.off.clone();
        let mut up2 = vec![0.0; n];
        let mut low = self.off.clone();
        let mut rhs = b.to_vec();
        let tiny = f64::EPSILON * self.gershgorin().1.abs().max(1.0);
        for i in 0..n - 1 {
            if low[i].abs() > d[i].abs() {
                // swap rows i and i + 1
                std::mem::swap(&mut d[i], &mut low[i]);
                let next_up = if i + 1 < n - 1 { up[i + 1] } else { 0.0 };
                let (a, bb) = (up[i], d[i + 1]);
                up[i] = bb;
                d[i + 1] = a;
                up2[i] = next_up;
                if i + 1 < n - 1 {
                    up[i + 1] = 0.0;
                }
                rhs.swap(i, i + 1);
            }
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let m = low[i] / d[i];
            d[i + 1] -= m * up[i];
            if i + 1 < n - 1 {
                up[i + 1] -= m * up2[i];
            }
            rhs[i + 1] -= m * rhs[i];
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= up[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= up2[i] * x[i + 2];
            }
            x[i] = s / d[i];
        }
        x
    }

    /// Unit eigenvector for the eigenvalue `value`, kept orthogonal to the
    /// given unit vectors.
    pub fn eigenvector(&self, value: f64, deflate: &[&[f64]]) -> Vec<f64> {
        let n = self.len();
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + (i as f64 + 1.0) / n as f64 * if i % 2 == 0 { 1.0 } else { 0.5 })
            .collect();
        let project = |v: &mut Vec<f64>| {
            for u in deflate {
                let c: f64 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
                for (a, b) in v.iter_mut().zip(u.iter()) {
                    *a -= c * b;
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            for a in v.iter_mut() {
                *a /= norm;
            }
        };
        project(&mut v);
        for _ in 0..4 {
            v = self.solve_shifted(value, &v);
            project(&mut v);
        }
        v
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_laplacian_spectrum() {
        let n = 10;
        let t = Tridiagonal {
            diag: vec![2.0; n],
            off: vec![-1.0; n - 1],
        };
        for k in 0..n {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((t.eigenvalue(k) - exact).abs() < 1e-14);
            let v = t.eigenvector(t.eigenvalue(k), &[]);
            let tv = t.apply(&v);
            let r: f64 = tv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - t.eigenvalue(k) * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(r < 1e-12, "k={k} residual {r}");
        }
    }
}
