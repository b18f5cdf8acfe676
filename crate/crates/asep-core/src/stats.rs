//! Small statistics helpers for the Monte Carlo harness and its tests.

/// Sample mean and standard error (sd / sqrt(n), unbiased variance).
pub fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    assert!(n >= 2, "need at least two samples");
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Standard error of a Bernoulli frequency estimate.
pub fn bernoulli_stderr(p_hat: f64, n: usize) -> f64 {
    (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

/// One-sample Kolmogorov-Smirnov distance against a reference CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n);
        d = d.max((i + 1) as f64 / n - f);
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(|u, v| u.total_cmp(v));
    ys.sort_unstable_by(|u, v| u.total_cmp(v));
    let (n, m) = (xs.len(), ys.len());
    assert!(n > 0 && m > 0);
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = xs[i];
        let y = ys[j];
        let t = x.min(y);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n as f64 * m as f64) / (n + m) as f64;
    (d, kolmogorov_q(n_eff.sqrt() * d))
}

/// Asymptotic Kolmogorov survival function
/// `Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)`.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut q = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * x * x).exp();
        if term < 1e-16 {
            break;
        }
        q += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
    }
    q.clamp(0.0, 1.0)
}

/// Best non-increasing fit in least squares via pool-adjacent-violators.
pub fn pava_non_increasing(values: &[f64]) -> Vec<f64> {
    // fit the non-decreasing problem on the negated sequence
    let mut blocks: Vec<(f64, f64)> = Vec::new(); // (sum, count)
    for &v in values {
        blocks.push((-v, 1.0));
        while blocks.len() >= 2 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s1 / c1 > s2 / c2 {
                blocks.pop();
                blocks.pop();
                blocks.push((s1 + s2, c1 + c2));
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (s, c) in blocks {
        let level = -(s / c);
        for _ in 0..c as usize {
            out.push(level);
        }
    }
    out
}
