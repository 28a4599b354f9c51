//! Small numerical helpers shared across modules.

use statrs::function::gamma::ln_gamma;

const PAIRWISE_BLOCK: usize = 32;

/// Pairwise (cascade) summation. The reduction order depends only on the
/// slice length, so results are reproducible bit for bit.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `log(sum(exp(xs)))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let shifted: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    m + pairwise_sum(&shifted).ln()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=q {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = qf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[q - 1 - i] = z;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    (nodes, weights)
}

/// Truncated Poisson(t) weights `(first_index, weights)`, normalized so the
/// discarded tail mass is below `tail`.
pub fn poisson_weights(t: f64, tail: f64) -> (usize, Vec<f64>) {
    if t == 0.0 {
        return (0, vec![1.0]);
    }
    let mode = t.floor() as usize;
    let log_mode = -t + mode as f64 * t.ln() - ln_gamma(mode as f64 + 1.0);
    let peak = log_mode.exp();
    let cut = tail * 1e-3 * peak;

    let mut right = vec![peak];
    let mut m = mode;
    loop {
        let next = right[right.len() - 1] * t / (m as f64 + 1.0);
        m += 1;
        right.push(next);
        if next < cut && (m as f64) > t {
            break;
        }
    }
    let mut left = Vec::new();
    let mut m = mode;
    let mut w = peak;
    while m > 0 {
        w *= m as f64 / t;
        m -= 1;
        left.push(w);
        if w < cut {
            break;
        }
    }
    let first = m;
    left.reverse();
    left.extend(right);
    let total = pairwise_sum(&left);
    for w in left.iter_mut() {
        *w /= total;
    }
    (first, left)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for q in 1..12 {
            let (x, w) = gauss_legendre(q);
            for deg in 0..(2 * q) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!(
                    (got - exact).abs() < 1e-13,
                    "q={q} deg={deg}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn poisson_weights_match_pmf() {
        for &t in &[0.3, 1.0, 7.5, 120.0, 2500.0] {
            let (first, w) = poisson_weights(t, 1e-12);
            let total: f64 = w.iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            for (i, wi) in w.iter().enumerate() {
                let k = (first + i) as f64;
                let pmf = (-t + k * t.ln() - ln_gamma(k + 1.0)).exp();
                assert!(
                    (wi - pmf).abs() <= 1e-11 * pmf.max(1e-300) + 1e-14,
                    "t={t} k={k}"
                );
            }
        }
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let xs: Vec<f64> = (0..100_000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let naive_ref: f64 = {
            let mut s = 0.0f64;
            let mut c = 0.0f64;
            for &x in &xs {
                let y = x - c;
                let t = s + y;
                c = (t - s) - y;
                s = t;
            }
            s
        };
        assert!((pairwise_sum(&xs) - naive_ref).abs() < 1e-13);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
    }
}
