//! Noise trajectories `ω` with lazy, value-preserving extension.
//!
//! Every generated path lives on the nodes `i * step`, so extending a stream
//! only appends nodes and never alters values that were already realized.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::csvio;
use crate::error::{Error, Result};
use crate::paths::{ContinuousPath, TailKind};
use crate::rng::{rng_from_seed, PathRng};

/// Node budget for incrementally generated kinds.
pub const MAX_NODES: usize = 1 << 22;
/// Node budget for fractional Brownian motion (quadratic cost).
pub const MAX_FBM_NODES: usize = 1 << 16;

pub const DEFAULT_KL_TERMS: usize = 64;
pub const DEFAULT_HURST: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    /// `ω(x) = -amplitude · sin(2π · frequency · x)`.
    Sine { amplitude: f64, frequency: f64 },
    /// `ω(x) = Σ_{k ≤ terms} ξ_k sin(kπx) / (kπ)` with i.i.d. standard normal `ξ`.
    KlBridge { terms: usize },
    Brownian,
    Fbm { hurst: f64 },
    Zero,
    Identity,
    Table(ContinuousPath),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
    pub step: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, seed: u64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidSpec(format!("step must be > 0, got {step}")));
        }
        match &kind {
            NoiseKind::Sine { amplitude, frequency } => {
                if !amplitude.is_finite() || !frequency.is_finite() {
                    return Err(Error::InvalidSpec("sine parameters must be finite".into()));
                }
            }
            NoiseKind::KlBridge { terms } => {
                if *terms < 1 {
                    return Err(Error::InvalidSpec("kl_bridge needs at least one term".into()));
                }
            }
            NoiseKind::Fbm { hurst } => {
                if !(*hurst > 0.0 && *hurst < 1.0) {
                    return Err(Error::InvalidSpec(format!("Hurst index must lie in (0,1), got {hurst}")));
                }
            }
            NoiseKind::Table(p) => {
                if p.values()[0] != 0.0 || p.len() < 2 {
                    return Err(Error::InvalidSpec("table must start with the row 0,0".into()));
                }
            }
            NoiseKind::Brownian | NoiseKind::Zero | NoiseKind::Identity => {}
        }
        Ok(Self { kind, seed, step })
    }

    pub fn sine(step: f64) -> Result<Self> {
        Self::new(
            NoiseKind::Sine {
                amplitude: 1.0 / 6.0,
                frequency: 3.0,
            },
            0,
            step,
        )
    }

    pub fn kl_bridge(seed: u64, step: f64) -> Result<Self> {
        Self::new(NoiseKind::KlBridge { terms: DEFAULT_KL_TERMS }, seed, step)
    }

    pub fn brownian(seed: u64, step: f64) -> Result<Self> {
        Self::new(NoiseKind::Brownian, seed, step)
    }

    pub fn fbm(hurst: f64, seed: u64, step: f64) -> Result<Self> {
        Self::new(NoiseKind::Fbm { hurst }, seed, step)
    }

    pub fn zero(step: f64) -> Result<Self> {
        Self::new(NoiseKind::Zero, 0, step)
    }

    pub fn identity(step: f64) -> Result<Self> {
        Self::new(NoiseKind::Identity, 0, step)
    }

    pub fn table(path: ContinuousPath) -> Result<Self> {
        let step = path.domain_end() / (path.len().max(2) - 1) as f64;
        Self::new(NoiseKind::Table(path), 0, step)
    }

    /// Parses `sine`, `kl[:K]`, `brownian`, `fbm[:H]`, `zero`/`constant`,
    /// `identity` or `table:PATH`.
    pub fn parse(text: &str, seed: u64, step: f64) -> Result<Self> {
        let (name, arg) = match text.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (text, None),
        };
        let float = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| Error::InvalidSpec(format!("`{a}` is not a number")))
        };
        match (name, arg) {
            ("sine", None) => Self::sine(step),
            ("kl" | "kl_bridge", None) => Self::kl_bridge(seed, step),
            ("kl" | "kl_bridge", Some(k)) => {
                let terms = k
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidSpec(format!("`{k}` is not a term count")))?;
                Self::new(NoiseKind::KlBridge { terms }, seed, step)
            }
            ("brownian", None) => Self::brownian(seed, step),
            ("fbm", None) => Self::fbm(DEFAULT_HURST, seed, step),
            ("fbm", Some(h)) => Self::fbm(float(h)?, seed, step),
            ("zero" | "constant", None) => Self::zero(step),
            ("identity", None) => Self::identity(step),
            ("table", Some(file)) => Self::table(csvio::read_continuous(Path::new(file)).map_err(|e| match e {
                Error::Io(io) => Error::InvalidSpec(format!("cannot read {file}: {io}")),
                other => other,
            })?),
            _ => Err(Error::InvalidSpec(format!("unknown noise `{text}`"))),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            NoiseKind::Sine { .. } => "sine".into(),
            NoiseKind::KlBridge { terms } => format!("kl:{terms}"),
            NoiseKind::Brownian => "brownian".into(),
            NoiseKind::Fbm { hurst } => format!("fbm:{hurst}"),
            NoiseKind::Zero => "zero".into(),
            NoiseKind::Identity => "identity".into(),
            NoiseKind::Table(_) => "table".into(),
        }
    }

    /// How levels beyond the realized domain of a limit computation are
    /// classified: only noise known in full can certify `+inf`.
    pub fn limit_tail(&self) -> TailKind {
        match self.kind {
            NoiseKind::Identity | NoiseKind::Table(_) => TailKind::Infinite,
            _ => TailKind::Unresolved,
        }
    }

    pub fn is_extendable(&self) -> bool {
        !matches!(self.kind, NoiseKind::Table(_))
    }
}

/// Exact sequential sampler of fractional Gaussian noise (unit spacing).
#[derive(Debug, Clone)]
struct DurbinLevinson {
    hurst: f64,
    gamma: Vec<f64>,
    coeffs: Vec<f64>,
    variance: f64,
    history: Vec<f64>,
}

impl DurbinLevinson {
    fn new(hurst: f64) -> Self {
        Self {
            hurst,
            gamma: vec![1.0],
            coeffs: Vec::new(),
            variance: 1.0,
            history: Vec::new(),
        }
    }

    fn gamma(&mut self, k: usize) -> f64 {
        while self.gamma.len() <= k {
            let j = self.gamma.len() as f64;
            let h2 = 2.0 * self.hurst;
            self.gamma
                .push(0.5 * ((j + 1.0).powf(h2) + (j - 1.0).abs().powf(h2) - 2.0 * j.powf(h2)));
        }
        self.gamma[k]
    }

    fn next(&mut self, z: f64) -> f64 {
        let n = self.history.len();
        if n > 0 {
            let mut acc = self.gamma(n);
            for j in 1..n {
                acc -= self.coeffs[j - 1] * self.gamma[n - j];
            }
            let reflection = acc / self.variance;
            let prev = self.coeffs.clone();
            for j in 1..n {
                self.coeffs[j - 1] = prev[j - 1] - reflection * prev[n - j - 1];
            }
            self.coeffs.push(reflection);
            self.variance *= 1.0 - reflection * reflection;
        }
        let mean: f64 = (1..=n).map(|j| self.coeffs[j - 1] * self.history[n - j]).sum();
        let x = mean + self.variance.max(0.0).sqrt() * z;
        self.history.push(x);
        x
    }
}

#[derive(Debug, Clone)]
enum Generator {
    Closed,
    Kl { xi: Vec<f64> },
    Brownian { rng: PathRng },
    Fbm { rng: PathRng, sampler: Box<DurbinLevinson> },
    Table,
}

/// A noise path realized on `[0, domain_end]` that can be extended further.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    spec: NoiseSpec,
    realized: ContinuousPath,
    generator: Generator,
}

impl NoiseStream {
    pub fn generate(spec: &NoiseSpec, to_x: f64) -> Result<Self> {
        if !(to_x > 0.0 && to_x.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise extent must be > 0, got {to_x}")));
        }
        let (realized, generator) = match &spec.kind {
            NoiseKind::Table(p) => (p.clone(), Generator::Table),
            kind => {
                let mut rng = rng_from_seed(spec.seed);
                let generator = match kind {
                    NoiseKind::KlBridge { terms } => Generator::Kl {
                        xi: (0..*terms).map(|_| rng.sample(StandardNormal)).collect(),
                    },
                    NoiseKind::Brownian => Generator::Brownian { rng },
                    NoiseKind::Fbm { hurst } => Generator::Fbm {
                        rng,
                        sampler: Box::new(DurbinLevinson::new(*hurst)),
                    },
                    _ => Generator::Closed,
                };
                (ContinuousPath::from_parts_unchecked(vec![0.0], vec![0.0]), generator)
            }
        };
        let mut stream = Self {
            spec: spec.clone(),
            realized,
            generator,
        };
        stream.extend_mut(to_x)?;
        Ok(stream)
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn path(&self) -> &ContinuousPath {
        &self.realized
    }

    pub fn domain_end(&self) -> f64 {
        self.realized.domain_end()
    }

    /// A copy realized at least up to `to_x`.
    pub fn extend(&self, to_x: f64) -> Result<Self> {
        let mut next = self.clone();
        next.extend_mut(to_x)?;
        Ok(next)
    }

    pub fn extend_mut(&mut self, to_x: f64) -> Result<()> {
        let available = self.domain_end();
        if to_x <= available {
            return Ok(());
        }
        let step = self.spec.step;
        let budget = match self.generator {
            Generator::Table => {
                if to_x <= available * (1.0 + 1e-12) {
                    return Ok(());
                }
                return Err(Error::NoiseExhausted {
                    requested: to_x,
                    available,
                });
            }
            Generator::Fbm { .. } => MAX_FBM_NODES,
            _ => MAX_NODES,
        };
        let ratio = to_x / step;
        let last = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        if last + 1 > budget {
            return Err(Error::NoiseExhausted {
                requested: to_x,
                available,
            });
        }
        let first = self.realized.len();
        for i in first..=last {
            let x = i as f64 * step;
            let prev = self.realized.values()[i - 1];
            let v = match (&self.spec.kind, &mut self.generator) {
                (NoiseKind::Sine { amplitude, frequency }, _) => {
                    -amplitude * (2.0 * PI * frequency * x).sin()
                }
                (NoiseKind::Zero, _) => 0.0,
                (NoiseKind::Identity, _) => x,
                (_, Generator::Kl { xi }) => kl_value(xi, x),
                (_, Generator::Brownian { rng }) => {
                    let z: f64 = rng.sample(StandardNormal);
                    prev + step.sqrt() * z
                }
                (NoiseKind::Fbm { hurst }, Generator::Fbm { rng, sampler }) => {
                    let z: f64 = rng.sample(StandardNormal);
                    prev + step.powf(*hurst) * sampler.next(z)
                }
                _ => unreachable!("generator matches its kind"),
            };
            self.realized.push(x, v);
        }
        Ok(())
    }
}

fn kl_value(xi: &[f64], x: f64) -> f64 {
    xi.iter()
        .enumerate()
        .map(|(k, &c)| {
            let kp = (k + 1) as f64 * PI;
            c * (kp * x).sin() / kp
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn increments(p: &ContinuousPath) -> Vec<f64> {
        p.values().windows(2).map(|w| w[1] - w[0]).collect()
    }

    #[test]
    fn sine_closed_form_nodes() {
        let s = NoiseStream::generate(&NoiseSpec::sine(1.0 / 1200.0).unwrap(), 1.0).unwrap();
        assert!((s.path().eval(1.0 / 12.0).unwrap() + 1.0 / 6.0).abs() < 1e-15);
        assert!((s.path().eval(0.25).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        let longer = s.extend(2.0).unwrap();
        assert!((longer.path().eval(13.0 / 12.0).unwrap() + 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn zero_and_identity() {
        let z = NoiseStream::generate(&NoiseSpec::zero(0.1).unwrap(), 1.0).unwrap();
        assert!(z.path().values().iter().all(|&v| v == 0.0));
        assert!(z.domain_end() >= 1.0);
        let e = NoiseStream::generate(&NoiseSpec::identity(0.25).unwrap(), 1.0).unwrap();
        assert_eq!(e.path().values(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn every_kind_starts_at_zero() {
        for text in ["sine", "kl", "brownian", "fbm:0.3", "zero", "identity"] {
            let s = NoiseStream::generate(&NoiseSpec::parse(text, 5, 0.01).unwrap(), 0.5).unwrap();
            assert_eq!(s.path().values()[0], 0.0, "{text}");
        }
    }

    #[test]
    fn brownian_increment_variance() {
        let h = 1e-3;
        let s = NoiseStream::generate(&NoiseSpec::brownian(11, h).unwrap(), 100.0).unwrap();
        let inc = increments(s.path());
        assert_eq!(inc.len(), 100_000);
        let var = stats::variance(&inc);
        assert!(((var - h) / h).abs() < 3.0 / (inc.len() as f64).sqrt(), "var={var}");
        assert!(stats::mean(&inc).abs() < 3.0 * (h / inc.len() as f64).sqrt());
    }

    #[test]
    fn extension_preserves_realized_values() {
        for spec in [
            NoiseSpec::brownian(3, 0.01).unwrap(),
            NoiseSpec::fbm(0.3, 3, 0.01).unwrap(),
            NoiseSpec::kl_bridge(3, 0.01).unwrap(),
        ] {
            let once = NoiseStream::generate(&spec, 3.0).unwrap();
            let twice = NoiseStream::generate(&spec, 1.234).unwrap().extend(3.0).unwrap();
            assert_eq!(once.path(), twice.path());
            let again = NoiseStream::generate(&spec, 3.0).unwrap();
            assert_eq!(once.path(), again.path());
        }
    }

    #[test]
    fn kl_bridge_is_pinned_at_one() {
        let s = NoiseStream::generate(&NoiseSpec::kl_bridge(2, 1.0 / 64.0).unwrap(), 1.0).unwrap();
        assert!(s.path().eval(1.0).unwrap().abs() < 1e-13);
        let other = NoiseStream::generate(&NoiseSpec::kl_bridge(3, 1.0 / 64.0).unwrap(), 1.0).unwrap();
        assert_ne!(s.path(), other.path());
    }

    #[test]
    fn kl_bridge_matches_direct_sum() {
        let spec = NoiseSpec::new(NoiseKind::KlBridge { terms: 4 }, 9, 0.125).unwrap();
        let s = NoiseStream::generate(&spec, 1.0).unwrap();
        let mut rng = rng_from_seed(9);
        let xi: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        for (x, v) in s.path().nodes() {
            let direct = xi[0] * (PI * x).sin() / PI
                + xi[1] * (2.0 * PI * x).sin() / (2.0 * PI)
                + xi[2] * (3.0 * PI * x).sin() / (3.0 * PI)
                + xi[3] * (4.0 * PI * x).sin() / (4.0 * PI);
            assert!((v - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn fbm_half_is_brownian_in_law() {
        let mut dl = DurbinLevinson::new(0.5);
        for z in [0.3, -1.2, 0.7, 2.0] {
            assert!((dl.next(z) - z).abs() < 1e-12);
        }
    }

    #[test]
    fn fbm_increment_autocovariance() {
        for hurst in [0.3, 0.75] {
            let h: f64 = 1.0 / 256.0;
            let (mut c0, mut c1, mut n0, mut n1) = (0.0, 0.0, 0.0, 0.0);
            for seed in 0..40 {
                let spec = NoiseSpec::fbm(hurst, seed, h).unwrap();
                let inc = increments(NoiseStream::generate(&spec, 4.0).unwrap().path());
                for w in inc.windows(2) {
                    c1 += w[0] * w[1];
                    n1 += 1.0;
                }
                for x in &inc {
                    c0 += x * x;
                    n0 += 1.0;
                }
            }
            let scale = h.powf(2.0 * hurst);
            let g1 = 0.5 * (2f64.powf(2.0 * hurst) - 2.0);
            let (c0, c1) = (c0 / n0 / scale, c1 / n1 / scale);
            // Roughly 40 000 increments; tolerance is several standard errors.
            assert!((c0 - 1.0).abs() < 0.04, "H={hurst} c0={c0}");
            assert!((c1 - g1).abs() < 0.04, "H={hurst} c1={c1} expected {g1}");
        }
    }

    #[test]
    fn table_noise_loads_and_refuses_to_extend() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("omega.csv");
        std::fs::write(&file, "# pathvol v1 omega\n0,0\n0.5,0.1\n1,-0.2\n").unwrap();
        let spec = NoiseSpec::parse(&format!("table:{}", file.display()), 0, 0.1).unwrap();
        let s = NoiseStream::generate(&spec, 1.0).unwrap();
        assert!((s.path().eval(0.75).unwrap() + 0.05).abs() < 1e-15);
        assert!(matches!(s.extend(2.0), Err(Error::NoiseExhausted { .. })));

        std::fs::write(&file, "# pathvol v1 omega\n0,0.5\n1,1\n").unwrap();
        assert!(NoiseSpec::parse(&format!("table:{}", file.display()), 0, 0.1).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(NoiseSpec::fbm(1.0, 0, 0.1).is_err());
        assert!(NoiseSpec::fbm(0.0, 0, 0.1).is_err());
        assert!(NoiseSpec::new(NoiseKind::KlBridge { terms: 0 }, 0, 0.1).is_err());
        assert!(NoiseSpec::zero(0.0).is_err());
        assert!(NoiseSpec::parse("wiggly", 0, 0.1).is_err());
        assert!(NoiseStream::generate(&NoiseSpec::zero(0.1).unwrap(), 0.0).is_err());
    }
}
