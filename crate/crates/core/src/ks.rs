//! Kolmogorov–Smirnov distances.

use crate::error::{Error, Result};

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup_x |F_n(x) − F(x)|` for the empirical CDF of `samples`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// `sup_x |F_n(x) − G_m(x)|` between two empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Critical value `c · √((n + m)/(n m))` of the two-sample statistic.
pub fn two_sample_threshold(c: f64, n: usize, m: usize) -> f64 {
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn uniform(x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }

    #[test]
    fn single_sample_at_median() {
        assert_eq!(ks_one_sample(&[0.5], uniform).unwrap(), 0.5);
    }

    #[test]
    fn empty_samples_error() {
        assert!(matches!(ks_one_sample(&[], uniform), Err(Error::EmptySample)));
        assert!(matches!(ks_two_sample(&[1.0], &[]), Err(Error::EmptySample)));
    }

    #[test]
    fn exact_samples_are_close() {
        let mut rng = rng_from_seed(77);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_one_sample(&xs, uniform).unwrap() < 0.01);
    }

    #[test]
    fn shifted_law_reports_the_cdf_gap() {
        // Uniform(0,1) samples against Uniform(0.2,1.2): sup gap is 0.2.
        let mut rng = rng_from_seed(5);
        let xs: Vec<f64> = (0..200_000).map(|_| rng.random::<f64>()).collect();
        let d = ks_one_sample(&xs, |x| (x - 0.2).clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.2).abs() < 0.01, "{d}");
        let ys: Vec<f64> = xs.iter().map(|x| x + 0.2).collect();
        let d2 = ks_two_sample(&xs, &ys).unwrap();
        assert!((d2 - 0.2).abs() < 0.01, "{d2}");
    }

    #[test]
    fn two_sample_on_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&a, &[4.0, 5.0]).unwrap(), 1.0);
        assert!((ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_quantiles() {
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!((two_sample_threshold(1.63, 10_000, 10_000) - 1.63 * (2e-4f64).sqrt()).abs() < 1e-15);
    }
}
