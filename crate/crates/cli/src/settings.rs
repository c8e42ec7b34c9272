//! Flag / config-file / default resolution.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::Args;
use pathvol::csvio::parse_report;
use pathvol::functionals::ExitBarrier;
use pathvol::ig::IgLaw;
use pathvol::noise::NoiseSpec;
use pathvol::{Error, Result};

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Noise path: sine, kl[:K], brownian, fbm[:H], zero, identity or table:PATH
    #[arg(long)]
    pub omega: Option<String>,
    /// Reversionary timescale
    #[arg(long)]
    pub eps: Option<f64>,
    /// Comma-separated list of timescales (solve only)
    #[arg(long = "eps-sweep")]
    pub eps_sweep: Option<String>,
    /// Euler step (default min(horizon/2^14, eps/4))
    #[arg(long)]
    pub step: Option<f64>,
    /// Grid spacing of the noise path
    #[arg(long = "noise-step")]
    pub noise_step: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Noise scale of the generalized barrier
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Barrier: identity or affine:a (theta(t) = a t)
    #[arg(long)]
    pub theta: Option<String>,
    /// Restrict the variance table to one regime (verify only)
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub npaths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit the timestamp comment line from written files
    #[arg(long = "no-timestamp")]
    pub no_timestamp: bool,
    /// key=value file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Resolved view over flags, then the config file, then defaults.
pub struct Settings {
    args: CommonArgs,
    file: HashMap<String, String>,
}

fn parse<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::InvalidConfig(format!("`{raw}` is not a valid value for {key}")))
}

impl Settings {
    pub fn load(args: CommonArgs) -> Result<Self> {
        let file = match &args.config {
            None => HashMap::new(),
            Some(path) => read_config(path)?,
        };
        Ok(Self { args, file })
    }

    fn pick<T: std::str::FromStr + Clone>(&self, flag: &Option<T>, key: &str) -> Result<Option<T>> {
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        self.file.get(key).map(|raw| parse(key, raw)).transpose()
    }

    pub fn eps(&self) -> Result<f64> {
        Ok(self.pick(&self.args.eps, "eps")?.unwrap_or(1.0 / 128.0))
    }

    pub fn eps_list(&self) -> Result<Vec<f64>> {
        match self.pick(&self.args.eps_sweep, "eps-sweep")? {
            None => Ok(vec![self.eps()?]),
            Some(list) => list
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse("eps-sweep", s.trim()))
                .collect(),
        }
    }

    pub fn is_sweep(&self) -> Result<bool> {
        Ok(self.pick(&self.args.eps_sweep, "eps-sweep")?.is_some())
    }

    pub fn horizon(&self) -> Result<f64> {
        Ok(self.pick(&self.args.horizon, "horizon")?.unwrap_or(1.0))
    }

    /// Euler step for `eps`: explicit value or `min(horizon/2^14, eps/4)`.
    pub fn step(&self, eps: f64) -> Result<f64> {
        match self.pick(&self.args.step, "step")? {
            Some(h) => Ok(h),
            None => Ok((self.horizon()? / 16_384.0).min(eps / 4.0)),
        }
    }

    pub fn noise_step(&self) -> Result<f64> {
        Ok(self.pick(&self.args.noise_step, "noise-step")?.unwrap_or(1.0 / 4096.0))
    }

    pub fn seed(&self) -> Result<u64> {
        Ok(self.pick(&self.args.seed, "seed")?.unwrap_or(42))
    }

    pub fn npaths(&self) -> Result<usize> {
        Ok(self.pick(&self.args.npaths, "npaths")?.unwrap_or(10_000))
    }

    pub fn threads(&self) -> Result<Option<usize>> {
        self.pick(&self.args.threads, "threads")
    }

    pub fn beta(&self) -> Result<Option<f64>> {
        self.pick(&self.args.beta, "beta")
    }

    pub fn out(&self) -> Result<PathBuf> {
        Ok(self.pick(&self.args.out, "out")?.unwrap_or_else(|| PathBuf::from("out")))
    }

    pub fn timestamp(&self) -> Result<bool> {
        if self.args.no_timestamp {
            return Ok(false);
        }
        let off: Option<bool> = self.file.get("no-timestamp").map(|raw| parse("no-timestamp", raw)).transpose()?;
        Ok(!off.unwrap_or(false))
    }

    pub fn omega_text(&self) -> Result<String> {
        Ok(self.pick(&self.args.omega, "omega")?.unwrap_or_else(|| "sine".into()))
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        NoiseSpec::parse(&self.omega_text()?, self.seed()?, self.noise_step()?)
    }

    pub fn sigma(&self) -> Result<f64> {
        Ok(self.pick(&self.args.sigma, "sigma")?.unwrap_or(1.0))
    }

    /// `None` for the default barrier `σ = 1`, `θ = e`.
    pub fn barrier(&self) -> Result<Option<ExitBarrier>> {
        let sigma = self.sigma()?;
        let theta = self.pick(&self.args.theta, "theta")?.unwrap_or_else(|| "identity".into());
        let rate = match theta.split_once(':') {
            None if theta == "identity" => 1.0,
            Some(("affine", a)) => parse("theta", a)?,
            _ => return Err(Error::InvalidConfig(format!("unknown theta `{theta}`"))),
        };
        if rate == 1.0 && sigma == 1.0 {
            return Ok(None);
        }
        ExitBarrier::linear(rate, sigma, self.horizon()?).map(Some)
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.file.get(key).map(|s| s.as_str())
    }
}

pub fn read_config(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
    Ok(parse_report(&text)?.into_iter().collect())
}

/// `mean,shape` for the IG law override.
pub fn parse_ig_law(text: &str) -> Result<IgLaw> {
    let (m, l) = text
        .split_once(',')
        .ok_or_else(|| Error::InvalidConfig(format!("IG law `{text}` must be mean,shape")))?;
    IgLaw::new(parse("ig-law", m.trim())?, parse("ig-law", l.trim())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "eps=0.05\nhorizon=2\n# comment\nomega=zero\n").unwrap();
        let args = CommonArgs {
            eps: Some(0.1),
            config: Some(cfg),
            ..CommonArgs::default()
        };
        let s = Settings::load(args).unwrap();
        assert_eq!(s.eps().unwrap(), 0.1);
        assert_eq!(s.horizon().unwrap(), 2.0);
        assert_eq!(s.omega_text().unwrap(), "zero");
        assert_eq!(s.seed().unwrap(), 42);
        assert_eq!(s.step(0.1).unwrap(), 2.0 / 16384.0);
    }

    #[test]
    fn sweep_and_barrier_parsing() {
        let s = Settings::load(CommonArgs {
            eps_sweep: Some("0.1, 0.05,0.01".into()),
            theta: Some("affine:2".into()),
            ..CommonArgs::default()
        })
        .unwrap();
        assert_eq!(s.eps_list().unwrap(), vec![0.1, 0.05, 0.01]);
        let b = s.barrier().unwrap().unwrap();
        assert_eq!(b.theta().values(), &[0.0, 2.0]);
        let bad = Settings::load(CommonArgs {
            theta: Some("cubic".into()),
            ..CommonArgs::default()
        })
        .unwrap();
        assert!(bad.barrier().is_err());
    }

    #[test]
    fn ig_law_override() {
        let law = parse_ig_law("2,0.5").unwrap();
        assert_eq!((law.mean, law.shape), (2.0, 0.5));
        assert!(parse_ig_law("2").is_err());
    }
}
