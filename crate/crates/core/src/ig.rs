//! Inverse-Gaussian subordinator and its per-time marginal law.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Subordinator with characteristic exponent `(γ − √(γ² − 2iu)) δ t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IgParams {
    pub delta: f64,
    pub gamma: f64,
}

impl IgParams {
    pub fn new(delta: f64, gamma: f64) -> Result<Self> {
        if !(delta > 0.0 && gamma > 0.0 && delta.is_finite() && gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "IG parameters must be positive, got delta={delta}, gamma={gamma}"
            )));
        }
        Ok(Self { delta, gamma })
    }

    /// Law of the subordinator at time `t`: mean `δt/γ`, shape `(δt)²`.
    pub fn law_at(&self, t: f64) -> Result<IgLaw> {
        IgLaw::new(self.delta * t / self.gamma, (self.delta * t).powi(2))
    }
}

/// Inverse-Gaussian law in (mean, shape) form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IgLaw {
    pub mean: f64,
    pub shape: f64,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Φ(−b)` for `b ≥ 0`, accurate in the far tail.
fn ln_upper_tail(b: f64) -> f64 {
    if b < 30.0 {
        return (0.5 * erfc(b / std::f64::consts::SQRT_2)).ln();
    }
    let b2 = b * b;
    let series = 1.0 - 1.0 / b2 + 3.0 / (b2 * b2) - 15.0 / (b2 * b2 * b2);
    -0.5 * b2 - b.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
}

impl IgLaw {
    pub fn new(mean: f64, shape: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite() && shape > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "IG law needs mean > 0 and shape > 0, got mean={mean}, shape={shape}"
            )));
        }
        Ok(Self { mean, shape })
    }

    pub fn variance(&self) -> f64 {
        self.mean.powi(3) / self.shape
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        let (m, l) = (self.mean, self.shape);
        (l / (2.0 * std::f64::consts::PI * x.powi(3))).sqrt() * (-l * (x - m).powi(2) / (2.0 * m * m * x)).exp()
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::DomainError(x));
        }
        if x == f64::INFINITY {
            return Ok(1.0);
        }
        let (m, l) = (self.mean, self.shape);
        let r = (l / x).sqrt();
        let first = std_normal_cdf(r * (x / m - 1.0));
        let second = (2.0 * l / m + ln_upper_tail(r * (x / m + 1.0))).exp();
        Ok((first + second).clamp(0.0, 1.0))
    }

    /// Michael–Schucany–Haas transformation sampler.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (m, l) = (self.mean, self.shape);
        let nu: f64 = rng.sample(StandardNormal);
        let y = nu * nu;
        let my = m * y;
        let x = m + m * my / (2.0 * l) - m / (2.0 * l) * (4.0 * m * l * y + my * my).sqrt();
        let u: f64 = rng.random();
        if u <= m / (m + x) {
            x
        } else {
            m * m / x
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ks::ks_one_sample;
    use crate::rng::rng_from_seed;
    use crate::stats;

    fn unit() -> IgLaw {
        IgParams::new(1.0, 1.0).unwrap().law_at(1.0).unwrap()
    }

    // Adaptive Simpson quadrature, used as an independent oracle for the CDF.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        fn rule(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (l, r) = (rule(f, a, m), rule(f, m, b));
            if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
                return l + r + (l + r - whole) / 15.0;
            }
            rec(f, a, m, l, tol / 2.0, depth - 1) + rec(f, m, b, r, tol / 2.0, depth - 1)
        }
        rec(f, a, b, rule(f, a, b), tol, depth)
    }

    #[test]
    fn parameter_mapping() {
        let law = IgParams::new(2.0, 2.0).unwrap().law_at(1.5).unwrap();
        assert_eq!(law.mean, 1.5);
        assert_eq!(law.shape, 9.0);
        assert!(IgParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn unit_law_moments_from_characteristic_exponent() {
        // Second-order expansion of (γ − √(γ² − 2iu))δt at u = 0: mean δt/γ,
        // variance δt/γ³; both 1 for δ = γ = t = 1.
        let law = unit();
        assert_eq!(law.mean, 1.0);
        assert_eq!(law.variance(), 1.0);
        // Same moments from numerical integration of the density.
        let m1 = simpson(&|x| x * law.pdf(x), 1e-12, 60.0, 1e-12, 50);
        let m2 = simpson(&|x| x * x * law.pdf(x), 1e-12, 80.0, 1e-12, 50);
        assert!((m1 - 1.0).abs() < 1e-8);
        assert!((m2 - m1 * m1 - 1.0).abs() < 1e-7);
    }

    #[test]
    fn cdf_matches_quadrature() {
        let law = unit();
        for &x in &[0.05, 0.3, 1.0, 2.0, 5.0] {
            let q = simpson(&|s| law.pdf(s), 1e-14, x, 1e-14, 60);
            assert!((law.cdf(x).unwrap() - q).abs() < 1e-10, "x={x}");
        }
        let sharp = IgLaw::new(1.0, 400.0).unwrap();
        for &x in &[0.9, 1.0, 1.1] {
            let q = simpson(&|s| sharp.pdf(s), 0.5, x, 1e-14, 60);
            assert!((sharp.cdf(x).unwrap() - q).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn cdf_limits_and_domain() {
        let law = unit();
        assert!(law.cdf(1e-6).unwrap() < 1e-100);
        assert!((law.cdf(1e6).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(law.cdf(f64::INFINITY).unwrap(), 1.0);
        assert!(matches!(law.cdf(0.0), Err(Error::DomainError(_))));
        assert!(law.cdf(-1.0).is_err());
        // Large shape exercises the log-space tail term.
        let sharp = IgLaw::new(1.0, 5e3).unwrap();
        let c = sharp.cdf(1.0).unwrap();
        assert!(c.is_finite() && c > 0.4 && c < 0.6);
    }

    #[test]
    fn sampler_mean_and_ks() {
        let law = unit();
        let mut rng = rng_from_seed(2024);
        let xs: Vec<f64> = (0..100_000).map(|_| law.sample(&mut rng)).collect();
        let n = xs.len() as f64;
        assert!((stats::mean(&xs) - 1.0).abs() < 3.0 * (1.0 / n).sqrt());
        let d = ks_one_sample(&xs, |x| law.cdf(x).unwrap()).unwrap();
        assert!(d < 1.36 / n.sqrt() * 1.2, "KS={d}");
    }

    #[test]
    fn sampler_concentrates_for_large_shape() {
        let law = IgLaw::new(2.0, 1e12).unwrap();
        let mut rng = rng_from_seed(1);
        let xs: Vec<f64> = (0..1000).map(|_| law.sample(&mut rng)).collect();
        assert!(stats::variance(&xs) < 1e-9);
        assert!((stats::mean(&xs) - 2.0).abs() < 1e-5);
    }
}
