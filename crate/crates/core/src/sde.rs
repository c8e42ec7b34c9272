//! Euler–Maruyama ensembles of the CIR family
//! `dV = σ κ^β √V dW + κ(ϑ − V) dt` and of the OU family `ε dY = dW − Y dt`.
//!
//! Each path draws from its own generator seeded by `path_seed(master, i)`;
//! paths are simulated in parallel and collected in index order, so results
//! do not depend on the worker count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::first_exit;
use crate::paths::{uniform_grid, CadlagPath, ContinuousPath};
use crate::rng::{path_seed, rng_from_seed};
use crate::stats::Summary;

#[derive(Debug, Clone, PartialEq)]
pub struct SdeConfig {
    pub epsilon: f64,
    pub beta: f64,
    pub sigma: f64,
    pub vartheta: f64,
    pub v0: f64,
    pub step: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    /// Replace every Brownian increment by 0.
    pub zero_noise: bool,
}

impl SdeConfig {
    pub fn new(epsilon: f64, beta: f64, step: f64, horizon: f64, n_paths: usize, master_seed: u64) -> Result<Self> {
        let cfg = Self {
            epsilon,
            beta,
            sigma: 1.0,
            vartheta: 1.0,
            v0: 1.0,
            step,
            horizon,
            n_paths,
            master_seed,
            zero_noise: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kappa(&self) -> f64 {
        1.0 / self.epsilon
    }

    /// Effective diffusion coefficient `σ κ^β`.
    pub fn vol_of_vol(&self) -> f64 {
        self.sigma * self.kappa().powf(self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.step > 0.0) || self.step > self.epsilon / 4.0 * (1.0 + 1e-12) {
            return bad(format!("step must lie in (0, epsilon/4], got {}", self.step));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be > 0, got {}", self.horizon));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be >= 1".into());
        }
        if !self.beta.is_finite() || !self.sigma.is_finite() || !(self.sigma >= 0.0) {
            return bad("beta and sigma must be finite with sigma >= 0".into());
        }
        if !(self.v0 >= 0.0) || !self.vartheta.is_finite() {
            return bad("v0 must be >= 0 and vartheta finite".into());
        }
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        uniform_grid(self.step, self.horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirRecord {
    pub seed: u64,
    /// Terminal `V⁺`; the raw scheme state may be negative.
    pub v: f64,
    pub vbar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CirEnsemble {
    pub records: Vec<CirRecord>,
    pub v: Summary,
    pub vbar: Summary,
}

impl CirEnsemble {
    pub fn terminal_v(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.v).collect()
    }

    pub fn terminal_vbar(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.vbar).collect()
    }
}

/// One full-truncation path, returning `(V⁺, V̄)` on the time grid.
pub fn simulate_cir_path(cfg: &SdeConfig, index: u64) -> Result<(ContinuousPath, ContinuousPath)> {
    cfg.validate()?;
    let grid = cfg.grid();
    let mut v = Vec::with_capacity(grid.len());
    let mut vbar = Vec::with_capacity(grid.len());
    cir_walk(cfg, &grid, path_seed(cfg.master_seed, index), |vn, bn| {
        v.push(vn);
        vbar.push(bn);
    });
    Ok((
        ContinuousPath::new(grid.clone(), v)?,
        ContinuousPath::new(grid, vbar)?,
    ))
}

fn cir_walk(cfg: &SdeConfig, grid: &[f64], seed: u64, mut visit: impl FnMut(f64, f64)) -> (f64, f64) {
    let mut rng = rng_from_seed(seed);
    let kappa = cfg.kappa();
    let vol = cfg.vol_of_vol();
    let mut v = cfg.v0;
    let mut vbar = 0.0;
    visit(v.max(0.0), vbar);
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        let z: f64 = rng.sample(StandardNormal);
        let dw = if cfg.zero_noise { 0.0 } else { h.sqrt() * z };
        let vp = v.max(0.0);
        let next = v + vol * vp.sqrt() * dw + kappa * (cfg.vartheta - vp) * h;
        vbar += 0.5 * h * (vp + next.max(0.0));
        v = next;
        visit(v.max(0.0), vbar);
    }
    (v.max(0.0), vbar)
}

/// Runs `f` on a dedicated pool of `threads` workers (`None`: rayon default).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub fn simulate_cir(cfg: &SdeConfig) -> Result<CirEnsemble> {
    cfg.validate()?;
    let grid = cfg.grid();
    let records: Vec<CirRecord> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let seed = path_seed(cfg.master_seed, i);
            let (v, vbar) = cir_walk(cfg, &grid, seed, |_, _| {});
            CirRecord { seed, v, vbar }
        })
        .collect();
    let v: Vec<f64> = records.iter().map(|r| r.v).collect();
    let vbar: Vec<f64> = records.iter().map(|r| r.vbar).collect();
    Ok(CirEnsemble {
        v: Summary::of(&v),
        vbar: Summary::of(&vbar),
        records,
    })
}

/// `½ κ^{2β−1} (1 − e^{−2κt})` for `σ = 1`.
pub fn cir_variance(kappa: f64, beta: f64, t: f64) -> f64 {
    0.5 * kappa.powf(2.0 * beta - 1.0) * (1.0 - (-2.0 * kappa * t).exp())
}

/// Leading term `κ^{2β−2} t` of the variance of `V̄_t`.
pub fn cir_time_average_variance(kappa: f64, beta: f64, t: f64) -> f64 {
    kappa.powf(2.0 * beta - 2.0) * t
}

/// Exit-time process `V̂_t = inf{s > 0 : V̄_s > t}`.
pub fn exit_time_process(vbar: &ContinuousPath, up_to: f64) -> Result<CadlagPath> {
    first_exit(vbar, up_to)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuRecord {
    pub seed: u64,
    /// `max_n |Ȳ_{t_n} − W_{t_n}|`.
    pub sup_error: f64,
    pub y: f64,
    pub ybar: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuEnsemble {
    pub records: Vec<OuRecord>,
    pub sup_error: Summary,
}

impl OuEnsemble {
    pub fn sup_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.sup_error).collect()
    }
}

/// Exact joint transition of `(W, Y)` over one step; `Ȳ = W − εY`.
fn ou_walk(cfg: &SdeConfig, grid: &[f64], seed: u64) -> OuRecord {
    let mut rng = rng_from_seed(seed);
    let eps = cfg.epsilon;
    let (mut w, mut y, mut sup) = (0.0f64, 0.0f64, 0.0f64);
    for win in grid.windows(2) {
        let h = win[1] - win[0];
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let (z1, z2) = if cfg.zero_noise { (0.0, 0.0) } else { (z1, z2) };
        let decay = (-h / eps).exp();
        let var_i = 0.5 * eps * (1.0 - decay * decay);
        let cov = eps * (1.0 - decay);
        let dw = h.sqrt() * z1;
        let resid = (var_i - cov * cov / h).max(0.0);
        let integral = cov / h * dw + resid.sqrt() * z2;
        w += dw;
        y = decay * y + integral / eps;
        let ybar = w - eps * y;
        sup = sup.max((ybar - w).abs());
    }
    OuRecord {
        seed,
        sup_error: sup,
        y,
        ybar: w - eps * y,
        w,
    }
}

pub fn simulate_ou(cfg: &SdeConfig) -> Result<OuEnsemble> {
    cfg.validate()?;
    let grid = cfg.grid();
    let records: Vec<OuRecord> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| ou_walk(cfg, &grid, path_seed(cfg.master_seed, i)))
        .collect();
    let sup: Vec<f64> = records.iter().map(|r| r.sup_error).collect();
    Ok(OuEnsemble {
        sup_error: Summary::of(&sup),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn zero_noise_cir_is_the_fixed_point() {
        let mut cfg = SdeConfig::new(0.01, 1.0, 1.0 / 800.0, 1.0, 4, 1).unwrap();
        cfg.zero_noise = true;
        let ens = simulate_cir(&cfg).unwrap();
        for r in &ens.records {
            assert_eq!(r.v, 1.0);
            assert!((r.vbar - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_keeps_time_average_monotone() {
        let cfg = SdeConfig::new(0.01, 1.0, 1.0 / 800.0, 1.0, 4, 3).unwrap();
        for i in 0..4 {
            let (_, vbar) = simulate_cir_path(&cfg, i).unwrap();
            assert!(vbar.is_non_decreasing());
        }
    }

    #[test]
    fn ensemble_matches_single_path_replay() {
        let cfg = SdeConfig::new(0.05, 0.5, 1.0 / 160.0, 1.0, 8, 9).unwrap();
        let ens = simulate_cir(&cfg).unwrap();
        for (i, r) in ens.records.iter().enumerate() {
            let (v, vbar) = simulate_cir_path(&cfg, i as u64).unwrap();
            assert_eq!(*v.values().last().unwrap(), r.v);
            assert_eq!(*vbar.values().last().unwrap(), r.vbar);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = SdeConfig::new(0.05, 1.0, 1.0 / 160.0, 1.0, 64, 5).unwrap();
        let a = with_threads(Some(1), || simulate_cir(&cfg)).unwrap().unwrap();
        let b = with_threads(Some(4), || simulate_cir(&cfg)).unwrap().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn variance_formulas() {
        assert!((cir_variance(100.0, 1.0, 1.0) - 50.0).abs() < 1e-12);
        assert!((cir_variance(100.0, 0.5, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(cir_time_average_variance(100.0, 1.0, 1.0), 1.0);
        assert!((cir_time_average_variance(100.0, 0.0, 1.0) - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn ou_joint_step_moments() {
        // Var(Y_t) = (1 − e^{−2t/ε}) / (2ε) and Cov(W_t, Y_t) = 1 − e^{−t/ε}.
        let eps = 0.1;
        let cfg = SdeConfig::new(eps, 0.0, 0.025, 0.5, 20_000, 2).unwrap();
        let ens = simulate_ou(&cfg).unwrap();
        let y: Vec<f64> = ens.records.iter().map(|r| r.y).collect();
        let w: Vec<f64> = ens.records.iter().map(|r| r.w).collect();
        let var_y = stats::variance(&y);
        let expected = (1.0 - (-2.0 * 0.5 / eps).exp()) / (2.0 * eps);
        assert!((var_y / expected - 1.0).abs() < 0.04, "{var_y} vs {expected}");
        let cov: f64 = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / y.len() as f64;
        let expected_cov = 1.0 - (-0.5 / eps).exp();
        assert!((cov - expected_cov).abs() < 0.04, "{cov} vs {expected_cov}");
        assert!((stats::variance(&w) - 0.5).abs() < 0.03);
    }

    #[test]
    fn ou_zero_noise_is_identically_zero() {
        let mut cfg = SdeConfig::new(0.1, 0.0, 0.01, 1.0, 3, 1).unwrap();
        cfg.zero_noise = true;
        let ens = simulate_ou(&cfg).unwrap();
        assert!(ens.records.iter().all(|r| r.sup_error == 0.0 && r.ybar == 0.0));
    }

    #[test]
    fn exit_time_of_time_average() {
        let cfg = SdeConfig::new(0.05, 1.0, 1.0 / 160.0, 2.0, 1, 4).unwrap();
        let (_, vbar) = simulate_cir_path(&cfg, 0).unwrap();
        let hat = exit_time_process(&vbar, 2.0).unwrap();
        assert!(hat.is_non_decreasing());
        let top = vbar.max_value();
        for k in 1..20 {
            let level = top * k as f64 / 20.0;
            let s = hat.eval(level).unwrap().finite().unwrap();
            assert!((vbar.eval(s).unwrap() - level).abs() < 1e-9);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SdeConfig::new(0.01, 1.0, 0.01, 1.0, 10, 0).is_err());
        assert!(SdeConfig::new(0.01, 1.0, 0.0025, 1.0, 0, 0).is_err());
        assert!(SdeConfig::new(-1.0, 1.0, 0.0025, 1.0, 1, 0).is_err());
    }
}
