//! Monte Carlo verification suites shared by the CLI and the acceptance tests.

use rayon::prelude::*;

use crate::error::Result;
use crate::ig::{IgLaw, IgParams};
use crate::ivp::{solve, IvpConfig};
use crate::ks::{ks_one_sample, ks_two_sample, two_sample_threshold};
use crate::noise::{NoiseSpec, NoiseStream};
use crate::rng::path_seed;
use crate::sde::{cir_time_average_variance, cir_variance, simulate_cir, simulate_ou, with_threads, SdeConfig};
use crate::stats::{self, Summary};

/// Salt separating the IVP noise seeds from the SDE seeds.
const IVP_SEED_SALT: u64 = 0x5151_A11C_E000_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Vec<(String, String)>,
}

impl Check {
    fn new(name: &str, pass: bool, detail: Vec<(&str, f64)>) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail: detail.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn line(&self) -> String {
        let mut s = format!("{} {}", if self.pass { "PASS" } else { "FAIL" }, self.name);
        for (k, v) in &self.detail {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        self.checks.iter().map(|c| c.line() + "\n").collect()
    }
}

// ---------------------------------------------------------------- variance

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub beta: f64,
    pub kappa: f64,
    pub v: Summary,
    pub vbar: Summary,
    pub expected_v: f64,
    pub expected_vbar: f64,
}

/// `V[V_t]` and `V[V̄_t]` at `t = 1` with `h = ε/8`.
pub fn variance_row(beta: f64, kappa: f64, n_paths: usize, seed: u64) -> Result<VarianceRow> {
    let eps = 1.0 / kappa;
    let cfg = SdeConfig::new(eps, beta, eps / 8.0, 1.0, n_paths, seed)?;
    let ens = simulate_cir(&cfg)?;
    Ok(VarianceRow {
        beta,
        kappa,
        v: ens.v,
        vbar: ens.vbar,
        expected_v: cir_variance(kappa, beta, 1.0),
        expected_vbar: cir_time_average_variance(kappa, beta, 1.0),
    })
}

pub const VARIANCE_REL_TOL: f64 = 0.15;
pub const SMALL_REGIME_VBAR: f64 = 0.05;

pub fn variance_checks(rows: &[VarianceRow]) -> Vec<Check> {
    rows.iter()
        .map(|r| {
            let name = format!("variance_beta_{}", r.beta);
            if r.beta == 1.0 {
                let ok_v = (r.v.variance / r.expected_v - 1.0).abs() <= VARIANCE_REL_TOL;
                let ok_b = (r.vbar.variance / r.expected_vbar - 1.0).abs() <= VARIANCE_REL_TOL;
                Check::new(
                    &name,
                    ok_v && ok_b,
                    vec![
                        ("kappa", r.kappa),
                        ("var_v", r.v.variance),
                        ("expected_var_v", r.expected_v),
                        ("var_vbar", r.vbar.variance),
                        ("expected_var_vbar", r.expected_vbar),
                        ("rel_tol", VARIANCE_REL_TOL),
                    ],
                )
            } else {
                Check::new(
                    &name,
                    r.vbar.variance <= SMALL_REGIME_VBAR,
                    vec![
                        ("kappa", r.kappa),
                        ("var_v", r.v.variance),
                        ("var_vbar", r.vbar.variance),
                        ("max_var_vbar", SMALL_REGIME_VBAR),
                    ],
                )
            }
        })
        .collect()
}

// ------------------------------------------------------------ IG marginal

/// KS distance of the `V̄_1` ensemble (`β = 1`) to `law`, one per `ε`.
pub fn ig_marginal_ks(epsilons: &[f64], step: f64, n_paths: usize, seed: u64, law: &IgLaw) -> Result<Vec<f64>> {
    epsilons
        .iter()
        .map(|&eps| {
            let cfg = SdeConfig::new(eps, 1.0, step, 1.0, n_paths, seed)?;
            let ens = simulate_cir(&cfg)?;
            ks_one_sample(&ens.terminal_vbar(), |x| law.cdf(x).unwrap_or(0.0))
        })
        .collect()
}

pub const IG_EPSILONS: [f64; 3] = [0.1, 0.03, 0.01];
pub const IG_REFERENCE_EPSILON: f64 = 0.003;

pub fn unit_ig_law() -> IgLaw {
    IgParams::new(1.0, 1.0)
        .and_then(|p| p.law_at(1.0))
        .expect("unit IG parameters are valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct IgMarginal {
    pub epsilons: Vec<f64>,
    pub ks: Vec<f64>,
    pub reference_ks: f64,
    pub threshold: f64,
}

pub fn ig_marginal(n_paths: usize, seed: u64, law: &IgLaw) -> Result<IgMarginal> {
    let step = IG_REFERENCE_EPSILON / 8.0;
    let mut eps: Vec<f64> = IG_EPSILONS.to_vec();
    eps.push(IG_REFERENCE_EPSILON);
    let mut ks = ig_marginal_ks(&eps, step, n_paths, seed, law)?;
    let reference_ks = ks.pop().unwrap();
    eps.pop();
    let threshold = reference_ks + 1.36 / (n_paths as f64).sqrt() * 1.5;
    Ok(IgMarginal {
        epsilons: eps,
        ks,
        reference_ks,
        threshold,
    })
}

pub fn ig_check(m: &IgMarginal) -> Check {
    let monotone = m.ks.windows(2).all(|w| w[1] < w[0]);
    let last = *m.ks.last().unwrap();
    let mut detail: Vec<(String, f64)> = m
        .epsilons
        .iter()
        .zip(&m.ks)
        .map(|(e, k)| (format!("ks_eps_{e}"), *k))
        .collect();
    detail.push((format!("ks_eps_{}", IG_REFERENCE_EPSILON), m.reference_ks));
    detail.push(("threshold".into(), m.threshold));
    Check {
        name: "ig_marginal".into(),
        pass: monotone && last < m.threshold,
        detail: detail.into_iter().map(|(k, v)| (k, v.to_string())).collect(),
    }
}

// ------------------------------------------------------- weak equivalence

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceConfig {
    pub epsilon: f64,
    pub sde_step: f64,
    pub ivp_step: f64,
    pub noise_step: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl EquivalenceConfig {
    pub fn standard(n_paths: usize, seed: u64) -> Self {
        Self {
            epsilon: 0.05,
            sde_step: 0.05 / 64.0,
            ivp_step: 0.05 / 64.0,
            noise_step: 0.05 / 64.0,
            n_paths,
            seed,
        }
    }
}

/// `φ_ε(ω)(horizon)` for `n_paths` Brownian noise paths.
pub fn ivp_terminal_ensemble(
    epsilon: f64,
    step: f64,
    noise_step: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let cfg = IvpConfig::new(epsilon, step, horizon)?;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let spec = NoiseSpec::brownian(path_seed(seed, i), noise_step)?;
            let mut w = NoiseStream::generate(&spec, 2.0 * horizon)?;
            let sol = solve(&mut w, &cfg)?;
            Ok(*sol.phi.values().last().unwrap())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equivalence {
    pub sde: Summary,
    pub ivp: Summary,
    pub ks: f64,
    pub threshold: f64,
}

pub fn weak_equivalence(cfg: &EquivalenceConfig) -> Result<Equivalence> {
    let sde_cfg = SdeConfig::new(cfg.epsilon, 1.0, cfg.sde_step, 1.0, cfg.n_paths, cfg.seed)?;
    let sde = simulate_cir(&sde_cfg)?.terminal_vbar();
    let ivp = ivp_terminal_ensemble(
        cfg.epsilon,
        cfg.ivp_step,
        cfg.noise_step,
        1.0,
        cfg.n_paths,
        cfg.seed ^ IVP_SEED_SALT,
    )?;
    Ok(Equivalence {
        sde: Summary::of(&sde),
        ivp: Summary::of(&ivp),
        ks: ks_two_sample(&sde, &ivp)?,
        threshold: two_sample_threshold(1.63, cfg.n_paths, cfg.n_paths),
    })
}

pub fn equivalence_check(e: &Equivalence) -> Check {
    Check::new(
        "weak_equivalence",
        e.ks < e.threshold,
        vec![
            ("ks", e.ks),
            ("threshold", e.threshold),
            ("mean_sde", e.sde.mean),
            ("mean_ivp", e.ivp.mean),
            ("var_sde", e.sde.variance),
            ("var_ivp", e.ivp.variance),
        ],
    )
}

// ----------------------------------------------------------------- OU limit

#[derive(Debug, Clone, PartialEq)]
pub struct OuLimit {
    pub coarse_epsilon: f64,
    pub fine_epsilon: f64,
    pub coarse_median: f64,
    pub fine_median: f64,
}

/// Median of `sup_{t ≤ 1} |Ȳ_t − W_t|` at two timescales on common noise.
pub fn ou_limit(n_paths: usize, seed: u64) -> Result<OuLimit> {
    let (coarse, fine) = (0.1, 0.01);
    let step = fine / 4.0;
    let median = |eps: f64| -> Result<f64> {
        let ens = simulate_ou(&SdeConfig::new(eps, 0.0, step, 1.0, n_paths, seed)?)?;
        Ok(stats::median(&ens.sup_errors()))
    };
    Ok(OuLimit {
        coarse_epsilon: coarse,
        fine_epsilon: fine,
        coarse_median: median(coarse)?,
        fine_median: median(fine)?,
    })
}

pub fn ou_check(o: &OuLimit) -> Check {
    Check::new(
        "ou_limit",
        o.fine_median < o.coarse_median,
        vec![
            ("median_sup_eps_0.1", o.coarse_median),
            ("median_sup_eps_0.01", o.fine_median),
        ],
    )
}

// ---------------------------------------------------------------- the suite

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Restricts the variance table to one regime.
    pub beta: Option<f64>,
    /// Law the IG marginal is tested against (default: mean 1, shape 1).
    pub ig_law: Option<IgLaw>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            seed: 42,
            threads: None,
            beta: None,
            ig_law: None,
        }
    }
}

/// Summary statistics from every suite, used for the determinism check.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutput {
    pub variance: Vec<VarianceRow>,
    pub ig: IgMarginal,
    pub equivalence: Equivalence,
    pub ou: OuLimit,
}

pub fn run_suites(cfg: &VerifyConfig) -> Result<SuiteOutput> {
    let law = cfg.ig_law.unwrap_or_else(unit_ig_law);
    let betas: Vec<f64> = match cfg.beta {
        Some(b) => vec![b],
        None => vec![0.0, 0.5, 1.0],
    };
    with_threads(cfg.threads, || -> Result<SuiteOutput> {
        let variance = betas
            .iter()
            .map(|&b| variance_row(b, 100.0, cfg.n_paths, cfg.seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(SuiteOutput {
            variance,
            ig: ig_marginal(cfg.n_paths, cfg.seed, &law)?,
            equivalence: weak_equivalence(&EquivalenceConfig::standard(cfg.n_paths, cfg.seed))?,
            ou: ou_limit(100.min(cfg.n_paths.max(1)), cfg.seed)?,
        })
    })?
}

pub fn report(out: &SuiteOutput) -> Report {
    let mut checks = variance_checks(&out.variance);
    checks.push(ig_check(&out.ig));
    checks.push(equivalence_check(&out.equivalence));
    checks.push(ou_check(&out.ou));
    Report { checks }
}
