//! Small numerical utilities shared across the crate: deterministic seed
//! derivation, Wilson confidence limits, least-squares line fits, adaptive
//! quadrature, and a two-sample Kolmogorov-Smirnov distance.

/// One-sided 0.999 normal quantile used for Wilson upper confidence limits.
pub const WILSON_Z_999: f64 = 3.090_232_306_167_813;

/// Derives a child seed from a master seed and a stream index.
///
/// Uses the splitmix64 finalizer on master + (i+1) * golden-ratio increment,
/// so distinct indices give statistically independent streams and the map is
/// stable across platforms.
pub fn mix64(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One-sided Wilson upper confidence limit for a binomial proportion.
///
/// With k successes in n trials the returned value u satisfies: if the true
/// proportion were above u, observing k or fewer successes would have
/// probability below the level encoded by z (z = 3.0902 gives 0.999).
pub fn wilson_upper(successes: u64, trials: u64, z: f64) -> f64 {
    assert!(trials > 0, "wilson_upper needs at least one trial");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let center = p + z2 / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center + half) / (1.0 + z2 / n)).min(1.0)
}

/// Ordinary least-squares line fit y = slope * x + intercept.
///
/// Returns (slope, intercept, slope standard error). The standard error uses
/// the unbiased residual variance and is 0 when fewer than three points are
/// supplied (no degrees of freedom to estimate noise).
pub fn ols_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 2, "line fit needs at least two points");
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        sxx += dx * dx;
        sxy += dx * (y[i] - my);
    }
    assert!(sxx > 0.0, "line fit needs non-constant x");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if n < 3 {
        return (slope, intercept, 0.0);
    }
    let mut ssr = 0.0;
    for i in 0..n {
        let r = y[i] - slope * x[i] - intercept;
        ssr += r * r;
    }
    let var = ssr / (nf - 2.0);
    (slope, intercept, (var / sxx).sqrt())
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 1);
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Two-sample Kolmogorov-Smirnov distance sup_t |F_a(t) - F_b(t)|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut sa: Vec<f64> = a.to_vec();
    let mut sb: Vec<f64> = b.to_vec();
    sa.sort_by(|u, v| u.total_cmp(v));
    sb.sort_by(|u, v| u.total_cmp(v));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut dmax: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let t = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= t {
            i += 1;
        }
        while j < sb.len() && sb[j] <= t {
            j += 1;
        }
        dmax = dmax.max((i as f64 / na - j as f64 / nb).abs());
    }
    dmax
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix64_is_deterministic_and_spreads() {
        assert_eq!(mix64(42, 0), mix64(42, 0));
        assert_ne!(mix64(42, 0), mix64(42, 1));
        assert_ne!(mix64(42, 0), mix64(43, 0));
        // low-weight inputs should not give low-weight outputs
        assert!(mix64(0, 0).count_ones() > 16);
    }

    #[test]
    fn wilson_upper_matches_closed_form_at_zero_successes() {
        let z = WILSON_Z_999;
        let n = 100_000u64;
        let expect = (z * z) / (n as f64 + z * z);
        assert!((wilson_upper(0, n, z) - expect).abs() < 1e-15);
    }

    #[test]
    fn wilson_upper_covers_point_estimate() {
        for &(k, n) in &[(3u64, 100u64), (50, 100), (97, 100), (0, 10)] {
            let u = wilson_upper(k, n, WILSON_Z_999);
            assert!(u >= k as f64 / n as f64);
            assert!(u <= 1.0);
        }
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.37 - 2.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| -1.75 * v + 0.4).collect();
        let (slope, intercept, se) = ols_line(&x, &y);
        assert!((slope + 1.75).abs() < 1e-12);
        assert!((intercept - 0.4).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn ols_stderr_shrinks_with_more_points() {
        // fixed symmetric residual pattern, so the noise level is identical
        // and only the sample size differs
        let make = |n: usize| {
            let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let y: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, &v)| 2.0 * v + if i % 2 == 0 { 0.1 } else { -0.1 })
                .collect();
            ols_line(&x, &y).2
        };
        assert!(make(200) < make(20));
    }

    #[test]
    fn simpson_integrates_polynomial_exactly() {
        let v = integrate(&|x: f64| x * x, 0.0, 1.0, 1e-12);
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_integrates_gaussian_density() {
        let inv = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let v = integrate(&|x: f64| inv * (-0.5 * x * x).exp(), -10.0, 10.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ks_extremes() {
        let a = [1.0, 2.0, 3.0];
        let b = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &b), 0.0);
        let c = [10.0, 11.0];
        assert_eq!(ks_two_sample(&a, &c), 1.0);
    }
}
