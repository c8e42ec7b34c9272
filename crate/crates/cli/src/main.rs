mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pathvol::csvio::{self, Header};
use pathvol::functionals::{limit_generalized, ExitBarrier};
use pathvol::ivp::{bound_check, composite_series, recover_noise, solve, IvpConfig, IvpSolution};
use pathvol::noise::{NoiseSpec, NoiseStream};
use pathvol::verify::{self, VerifyConfig};
use pathvol::{CadlagPath, ContinuousPath, Error, Result};

use settings::{parse_ig_law, CommonArgs, Settings};

#[derive(Debug, Parser)]
#[command(name = "pathvol", version, about = "Pathwise CIR solver, exit-time limits and Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the IVP; writes omega, phi, phihat, bounds, composites and phi0
    Solve(SolveArgs),
    /// Fast-reversion limit E(e - sigma omega) through theta; writes phi0.csv
    Limit(CommonArgs),
    /// Monte Carlo suites; writes report.txt and exits 1 on any FAIL
    Verify(VerifyArgs),
    /// Recover the noise of a prescribed solution and re-solve
    Roundtrip(RoundtripArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Second noise path for the log-Heston series (seed + 1)
    #[arg(long = "omega-bar")]
    omega_bar: Option<String>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Test the IG marginal against `mean,shape` instead of the limit law
    #[arg(long = "ig-law")]
    ig_law: Option<String>,
}

#[derive(Debug, Args)]
struct RoundtripArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// identity (t), parabola (t + t^2/(2 eps)) or quadratic (t + t^2)
    #[arg(long, default_value = "quadratic")]
    phi: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Limit(a) => cmd_limit(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Roundtrip(a) => cmd_roundtrip(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}

struct Writer {
    dir: PathBuf,
    timestamp: bool,
}

impl Writer {
    fn new(dir: PathBuf, timestamp: bool) -> Result<Self> {
        std::fs::create_dir_all(&dir)
            .map_err(|e| Error::InvalidConfig(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, timestamp })
    }

    fn same(&self) -> Self {
        Self {
            dir: self.dir.clone(),
            timestamp: self.timestamp,
        }
    }

    fn sub(&self, name: &str) -> Result<Self> {
        Self::new(self.dir.join(name), self.timestamp)
    }

    fn text(&self, name: &str, text: &str) -> Result<()> {
        csvio::write_text(&self.dir.join(name), text)
    }

    fn continuous(&self, name: &str, header: &Header, p: &ContinuousPath) -> Result<()> {
        self.text(name, &csvio::render_continuous(header, p, self.timestamp))
    }

    fn cadlag(&self, name: &str, header: &Header, p: &CadlagPath) -> Result<()> {
        self.text(name, &csvio::render_cadlag(header, p, self.timestamp))
    }

    fn columns(&self, name: &str, header: &Header, cols: &[&str], data: &[&[f64]]) -> Result<()> {
        self.text(name, &csvio::render_columns(header, cols, data, self.timestamp))
    }

    fn pairs(&self, name: &str, pairs: &[(String, String)]) -> Result<()> {
        self.text(name, &csvio::render_report(pairs))
    }
}

fn noise_header(kind: &str, spec: &NoiseSpec) -> Header {
    Header::new(kind)
        .with("omega", spec.label())
        .with("seed", spec.seed)
        .with("noise_step", spec.step)
}

fn theta_end(barrier: Option<&ExitBarrier>, horizon: f64) -> ExitBarrier {
    match barrier {
        Some(b) => b.clone(),
        None => ExitBarrier::linear(1.0, 1.0, horizon).expect("unit barrier is valid"),
    }
}

/// Limit path on the realized noise, extending it until the barrier range is
/// resolved when the kind allows it.
fn compute_limit(noise: &mut NoiseStream, barrier: &ExitBarrier) -> Result<CadlagPath> {
    let target = barrier.theta().max_value();
    let sigma = barrier.sigma();
    let cap = 8.0 * (target + 1.0);
    while noise.spec().is_extendable()
        && noise.domain_end() < cap
        && !noise.path().nodes().any(|(x, w)| x - sigma * w > target)
    {
        noise.extend_mut((2.0 * noise.domain_end()).min(cap))?;
    }
    let up_to = noise.domain_end();
    limit_generalized(noise.path(), barrier, up_to, noise.spec().limit_tail())
}

fn write_solution(w: &Writer, sol: &IvpSolution, noise: &NoiseStream, bar: Option<&NoiseStream>, default_barrier: bool) -> Result<()> {
    let eps = sol.epsilon;
    let spec = noise.spec();
    let head = |kind: &str| noise_header(kind, spec).with("eps", eps);
    w.columns(
        "phi.csv",
        &head("phi"),
        &["t", "phi", "phi_prime"],
        &[sol.phi.grid(), sol.phi.values(), sol.phi_prime.values()],
    )?;
    w.continuous("phihat.csv", &head("phihat"), &sol.phi_hat)?;

    let mut bounds = if default_barrier {
        bound_check(sol, noise.path(), eps, None)?.to_pairs()
    } else {
        vec![("epsilon".to_string(), eps.to_string())]
    };
    bounds.push(("applicable".into(), default_barrier.to_string()));
    bounds.push(("t_reached".into(), sol.t_reached.to_string()));
    bounds.push(("min_phi_prime".into(), sol.diagnostics.min_phi_prime.to_string()));
    bounds.push((
        "monotonicity_violations".into(),
        sol.diagnostics.monotonicity_violations.to_string(),
    ));
    bounds.push(("max_overshoot".into(), sol.diagnostics.max_overshoot.to_string()));
    w.pairs("bounds.txt", &bounds)?;

    let comp = composite_series(sol, noise.path(), bar.map(|b| b.path()), eps)?;
    let mut cols = vec!["t", "eps_phi_prime", "omega_circ_phi_plus_e"];
    let mut data: Vec<&[f64]> = vec![
        sol.phi.grid(),
        comp.eps_phi_prime.values(),
        comp.omega_circ_phi_plus_e.values(),
    ];
    if let Some(h) = &comp.log_heston {
        cols.push("log_heston");
        data.push(h.values());
    }
    w.columns("composites.csv", &head("composites"), &cols, &data)
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let s = Settings::load(args.common)?;
    let spec = s.noise()?;
    let horizon = s.horizon()?;
    let barrier = s.barrier()?;
    let writer = Writer::new(s.out()?, s.timestamp()?)?;
    let list = s.eps_list()?;
    let sweep = s.is_sweep()?;

    let mut noise = NoiseStream::generate(&spec, 2.0 * horizon)?;
    let mut bar = match &args.omega_bar {
        None => None,
        Some(text) => Some(NoiseStream::generate(
            &NoiseSpec::parse(text, s.seed()?.wrapping_add(1), s.noise_step()?)?,
            2.0 * horizon,
        )?),
    };

    let mut summary = Vec::new();
    for &eps in &list {
        let mut cfg = IvpConfig::new(eps, s.step(eps)?, horizon)?;
        if let Some(b) = &barrier {
            cfg = cfg.with_barrier(b.clone())?;
        }
        let sol = solve(&mut noise, &cfg)?;
        if let Some(b) = bar.as_mut() {
            b.extend_mut(sol.phi.max_value())?;
        }
        let target = if sweep { writer.sub(&format!("eps_{eps}"))? } else { writer.same() };
        write_solution(&target, &sol, &noise, bar.as_ref(), barrier.is_none())?;
        if barrier.is_none() {
            let r = bound_check(&sol, noise.path(), eps, None)?;
            summary.push((format!("uniform_gap_eps_{eps}"), r.uniform_gap.to_string()));
            summary.push((format!("gap_bound_eps_{eps}"), r.gap_bound().to_string()));
        }
    }
    let limit = compute_limit(&mut noise, &theta_end(barrier.as_ref(), horizon))?;
    writer.cadlag("phi0.csv", &noise_header("phi0", &spec), &limit)?;
    writer.continuous("omega.csv", &noise_header("omega", &spec), noise.path())?;
    if sweep {
        writer.pairs("sweep.txt", &summary)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_limit(args: CommonArgs) -> Result<ExitCode> {
    let s = Settings::load(args)?;
    let spec = s.noise()?;
    let horizon = s.horizon()?;
    let barrier = theta_end(s.barrier()?.as_ref(), horizon);
    let writer = Writer::new(s.out()?, s.timestamp()?)?;
    let mut noise = NoiseStream::generate(&spec, 2.0 * horizon)?;
    let limit = compute_limit(&mut noise, &barrier)?;
    let header = noise_header("phi0", &spec)
        .with("sigma", barrier.sigma())
        .with("theta_end", barrier.theta().max_value());
    writer.cadlag("phi0.csv", &header, &limit)?;
    writer.continuous("omega.csv", &noise_header("omega", &spec), noise.path())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let s = Settings::load(args.common)?;
    let ig_law = match args.ig_law.as_deref().or(s.get_raw("ig-law")) {
        None => None,
        Some(text) => Some(parse_ig_law(text)?),
    };
    let cfg = VerifyConfig {
        n_paths: s.npaths()?,
        seed: s.seed()?,
        threads: s.threads()?,
        beta: s.beta()?,
        ig_law,
    };
    if cfg.n_paths == 0 {
        return Err(Error::InvalidConfig("npaths must be >= 1".into()));
    }
    let writer = Writer::new(s.out()?, s.timestamp()?)?;
    let report = verify::report(&verify::run_suites(&cfg)?);
    let text = report.render();
    print!("{text}");
    writer.text("report.txt", &text)?;
    Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn prescribed_phi(name: &str, eps: f64) -> Result<Box<dyn Fn(f64) -> f64>> {
    match name {
        "identity" => Ok(Box::new(|t| t)),
        "parabola" => Ok(Box::new(move |t| t + t * t / (2.0 * eps))),
        "quadratic" => Ok(Box::new(|t| t + t * t)),
        other => Err(Error::InvalidConfig(format!("unknown prescribed phi `{other}`"))),
    }
}

fn cmd_roundtrip(args: RoundtripArgs) -> Result<ExitCode> {
    let s = Settings::load(args.common)?;
    let eps = s.eps()?;
    let horizon = s.horizon()?;
    let step = s.step(eps)?;
    let target = prescribed_phi(&args.phi, eps)?;
    let writer = Writer::new(s.out()?, s.timestamp()?)?;

    let phi = ContinuousPath::uniform(step, 1.1 * horizon, &target)?;
    let omega = recover_noise(&phi, eps)?;
    let mut noise = NoiseStream::generate(&NoiseSpec::table(omega.clone())?, omega.domain_end())?;
    let sol = solve(&mut noise, &IvpConfig::new(eps, step, horizon)?)?;
    let err = sol
        .phi
        .nodes()
        .map(|(t, x)| (x - target(t)).abs())
        .fold(0.0, f64::max);
    let header = Header::new("omega").with("phi", &args.phi).with("eps", eps);
    writer.continuous("omega_recovered.csv", &header, &omega)?;
    writer.columns(
        "phi.csv",
        &Header::new("phi").with("phi", &args.phi).with("eps", eps),
        &["t", "phi", "phi_prime"],
        &[sol.phi.grid(), sol.phi.values(), sol.phi_prime.values()],
    )?;
    let omega_sup = omega.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    writer.pairs(
        "roundtrip.txt",
        &[
            ("phi".into(), args.phi.clone()),
            ("epsilon".into(), eps.to_string()),
            ("step".into(), step.to_string()),
            ("uniform_error".into(), err.to_string()),
            ("max_abs_recovered_omega".into(), omega_sup.to_string()),
        ],
    )?;
    Ok(ExitCode::SUCCESS)
}
