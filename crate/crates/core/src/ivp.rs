//! Forward Euler solution of the pathwise CIR initial-value problem
//!
//! ```text
//! φ'(t) = ε⁻¹ (σ ω(φ(t)) + θ(t) − φ(t)) + v,   φ(0) = 0,
//! ```
//!
//! (`σ = 1`, `θ = e`, `v = 1` by default), together with the inverse `φ̂`,
//! the two-sided bound check against `S(e − ω)`, noise recovery from a
//! prescribed solution, and the composite series `εφ'`, `ω∘φ + e` and
//! `ω̄∘φ − ω∘φ − φ`.

use crate::error::{Error, Result};
use crate::functionals::{running_sup, ExitBarrier};
use crate::noise::NoiseStream;
use crate::paths::{uniform_grid, ContinuousPath};

/// Smallest accepted reversionary timescale.
pub const MIN_EPSILON: f64 = 1.0 / 1_048_576.0;

#[derive(Debug, Clone, PartialEq)]
pub struct IvpConfig {
    pub epsilon: f64,
    pub step: f64,
    pub horizon: f64,
    /// `σ` and `θ`; `None` means `σ = 1`, `θ(t) = t`.
    pub barrier: Option<ExitBarrier>,
    /// Constant drift `v`.
    pub drift: f64,
}

impl IvpConfig {
    pub fn new(epsilon: f64, step: f64, horizon: f64) -> Result<Self> {
        let cfg = Self {
            epsilon,
            step,
            horizon,
            barrier: None,
            drift: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default step `2⁻¹⁴ · horizon`, tightened to the stability guard.
    pub fn with_default_step(epsilon: f64, horizon: f64) -> Result<Self> {
        let step = (horizon / 16_384.0).min(epsilon / 4.0);
        Self::new(epsilon, step, horizon)
    }

    pub fn with_barrier(mut self, barrier: ExitBarrier) -> Result<Self> {
        self.barrier = Some(barrier);
        self.validate()?;
        Ok(self)
    }

    pub fn with_drift(mut self, drift: f64) -> Result<Self> {
        self.drift = drift;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.epsilon >= MIN_EPSILON && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be >= 2^-20, got {}", self.epsilon));
        }
        if !(self.step > 0.0) {
            return bad(format!("step must be > 0, got {}", self.step));
        }
        if self.step > self.epsilon / 4.0 * (1.0 + 1e-12) {
            return bad(format!(
                "step {} exceeds the stability guard epsilon/4 = {}",
                self.step,
                self.epsilon / 4.0
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be > 0, got {}", self.horizon));
        }
        if !(self.drift >= 0.0 && self.drift.is_finite()) {
            return bad(format!("drift level must be >= 0, got {}", self.drift));
        }
        if let Some(b) = &self.barrier {
            if b.theta().domain_end() < self.horizon * (1.0 - 1e-12) {
                return bad("theta does not cover the horizon".into());
            }
        }
        Ok(())
    }

    fn sigma(&self) -> f64 {
        self.barrier.as_ref().map_or(1.0, |b| b.sigma())
    }

    fn theta(&self, t: f64) -> f64 {
        match &self.barrier {
            None => t,
            Some(b) => {
                let th = b.theta();
                th.eval_unchecked(t.min(th.domain_end()))
            }
        }
    }

    /// Right-hand side `f(t, x)`; `ω` is read at `max(x, 0)`.
    pub fn rhs(&self, t: f64, x: f64, omega_x: f64) -> f64 {
        (self.sigma() * omega_x + self.theta(t) - x) / self.epsilon + self.drift
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub min_phi_prime: f64,
    /// Steps at which `φ` decreased.
    pub monotonicity_violations: usize,
    /// Largest single-step decrease of `φ`.
    pub max_overshoot: f64,
    /// Extent up to which the noise was realized.
    pub noise_extent: f64,
    /// Whether `x − σω(x) − ε` exceeded `θ(T)` on the realized noise.
    pub exit_resolved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvpSolution {
    pub phi: ContinuousPath,
    pub phi_prime: ContinuousPath,
    /// Space-indexed inverse of `φ` on its strictly increasing envelope.
    pub phi_hat: ContinuousPath,
    /// Time index of each `phi_hat` node.
    pub envelope: Vec<usize>,
    pub t_reached: f64,
    pub epsilon: f64,
    pub diagnostics: SolveDiagnostics,
}

fn machine_delta(x: f64) -> f64 {
    4.0 * f64::EPSILON * x.abs().max(1.0)
}

fn eval_noise(noise: &mut NoiseStream, x: f64) -> Result<f64> {
    let x = x.max(0.0);
    if x > noise.domain_end() {
        let target = (1.5 * noise.domain_end()).max(x);
        if noise.extend_mut(target).is_err() {
            noise.extend_mut(x)?;
        }
    }
    Ok(noise.path().eval_unchecked(x))
}

/// Euler iterates `x_{n+1} = x_n + h f(t_n, x_n)` on `t_n = n h`.
pub fn solve(noise: &mut NoiseStream, cfg: &IvpConfig) -> Result<IvpSolution> {
    cfg.validate()?;
    let grid = uniform_grid(cfg.step, cfg.horizon);
    let mut phi = Vec::with_capacity(grid.len());
    let mut slope = Vec::with_capacity(grid.len());
    let mut x = 0.0;
    let mut diagnostics = SolveDiagnostics {
        min_phi_prime: f64::INFINITY,
        monotonicity_violations: 0,
        max_overshoot: 0.0,
        noise_extent: 0.0,
        exit_resolved: false,
    };
    for (n, &t) in grid.iter().enumerate() {
        let w = eval_noise(noise, x)?;
        let f = cfg.rhs(t, x, w);
        if !f.is_finite() {
            return Err(Error::NonFiniteState { t });
        }
        phi.push(x);
        slope.push(f);
        diagnostics.min_phi_prime = diagnostics.min_phi_prime.min(f);
        if n + 1 < grid.len() {
            let dt = grid[n + 1] - t;
            let next = x + dt * f;
            if !next.is_finite() {
                return Err(Error::NonFiniteState { t: grid[n + 1] });
            }
            if next < x {
                diagnostics.monotonicity_violations += 1;
                diagnostics.max_overshoot = diagnostics.max_overshoot.max(x - next);
            }
            x = next;
        }
    }

    // Realize ω far enough that the level set {x − σω(x) − ε > θ(T)} is hit.
    let t_end = *grid.last().unwrap();
    let target = cfg.theta(t_end) + cfg.epsilon;
    let sigma = cfg.sigma();
    let cap = 4.0 * (phi.iter().fold(0.0f64, |a, &b| a.max(b)) + t_end) + 1.0;
    loop {
        let p = noise.path();
        let crossed = p.nodes().any(|(u, w)| u - sigma * w > target);
        if crossed || noise.domain_end() >= cap || !noise.spec().is_extendable() {
            diagnostics.exit_resolved = crossed;
            break;
        }
        let next = (2.0 * noise.domain_end()).min(cap);
        if noise.extend_mut(next).is_err() {
            break;
        }
    }
    diagnostics.noise_extent = noise.domain_end();

    let (phi_hat, envelope) = inverse_envelope(&grid, &phi);
    Ok(IvpSolution {
        phi: ContinuousPath::from_parts_unchecked(grid.clone(), phi),
        phi_prime: ContinuousPath::from_parts_unchecked(grid, slope),
        phi_hat,
        envelope,
        t_reached: t_end,
        epsilon: cfg.epsilon,
        diagnostics,
    })
}

/// Nodes where `x` reaches a new maximum by at least machine scale, as the
/// path `x ↦ t`.
fn inverse_envelope(t: &[f64], x: &[f64]) -> (ContinuousPath, Vec<usize>) {
    let mut xs = vec![x[0].max(0.0)];
    let mut ts = vec![t[0]];
    let mut idx = vec![0];
    for i in 1..x.len() {
        let last = *xs.last().unwrap();
        if x[i] > last + machine_delta(last) {
            xs.push(x[i]);
            ts.push(t[i]);
            idx.push(i);
        }
    }
    (ContinuousPath::from_parts_unchecked(xs, ts), idx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub epsilon: f64,
    /// Largest `S(e−ω)(x) − ε − φ̂(x)` (0 if the lower bound holds).
    pub max_lower_violation: f64,
    /// Largest `φ̂(x) − S(e−ω)(x) − 2√(xε)` (0 if the upper bound holds).
    pub max_upper_violation: f64,
    /// `max |φ̂(x) − S(e−ω)(x)|` over the checked range.
    pub uniform_gap: f64,
    pub x_max: f64,
}

impl BoundReport {
    /// `ε + 2√(x_max ε)`.
    pub fn gap_bound(&self) -> f64 {
        self.epsilon + 2.0 * (self.x_max * self.epsilon).sqrt()
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("epsilon".into(), self.epsilon.to_string()),
            ("max_lower_violation".into(), self.max_lower_violation.to_string()),
            ("max_upper_violation".into(), self.max_upper_violation.to_string()),
            ("uniform_gap".into(), self.uniform_gap.to_string()),
            ("gap_bound".into(), self.gap_bound().to_string()),
            ("x_max".into(), self.x_max.to_string()),
        ]
    }
}

/// Compares `φ̂` with `S(e−ω) − ε` and `S(e−ω) + 2√(xε)` on the union of both
/// grids, for `x ≤ x_limit` (and within both domains).
pub fn bound_check(
    sol: &IvpSolution,
    omega: &ContinuousPath,
    epsilon: f64,
    x_limit: Option<f64>,
) -> Result<BoundReport> {
    let x_max = sol
        .phi_hat
        .domain_end()
        .min(omega.domain_end())
        .min(x_limit.unwrap_or(f64::INFINITY));
    if !(x_max >= 0.0) {
        return Err(Error::InvalidConfig("empty bound-check range".into()));
    }
    let sup = running_sup(&omega.affine(-1.0, 0.0, true).restrict(x_max)?);
    let mut xs: Vec<f64> = sol
        .phi_hat
        .grid()
        .iter()
        .chain(sup.grid())
        .copied()
        .filter(|&x| x <= x_max)
        .collect();
    xs.push(x_max);
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut report = BoundReport {
        epsilon,
        max_lower_violation: 0.0,
        max_upper_violation: 0.0,
        uniform_gap: 0.0,
        x_max,
    };
    for x in xs {
        let s = sup.eval_unchecked(x);
        let ph = sol.phi_hat.eval_unchecked(x);
        report.max_lower_violation = report.max_lower_violation.max(s - epsilon - ph);
        report.max_upper_violation = report
            .max_upper_violation
            .max(ph - s - 2.0 * (x * epsilon).sqrt());
        report.uniform_gap = report.uniform_gap.max((ph - s).abs());
    }
    Ok(report)
}

/// Second-order finite-difference derivative on a non-uniform grid.
pub fn derivative(t: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let n = t.len();
    if n < 3 {
        return Err(Error::InvalidPath("need at least three nodes to differentiate".into()));
    }
    let mut d = Vec::with_capacity(n);
    {
        let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
        d.push(
            -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * x[0] + (h1 + h2) / (h1 * h2) * x[1]
                - h1 / (h2 * (h1 + h2)) * x[2],
        );
    }
    for i in 1..n - 1 {
        let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        d.push(
            -h2 / (h1 * (h1 + h2)) * x[i - 1]
                + (h2 - h1) / (h1 * h2) * x[i]
                + h1 / (h2 * (h1 + h2)) * x[i + 1],
        );
    }
    {
        let (h1, h2) = (t[n - 2] - t[n - 3], t[n - 1] - t[n - 2]);
        d.push(
            h2 / (h1 * (h1 + h2)) * x[n - 3] - (h1 + h2) / (h1 * h2) * x[n - 2]
                + (h1 + 2.0 * h2) / (h2 * (h1 + h2)) * x[n - 1],
        );
    }
    Ok(d)
}

fn check_bijective(phi: &ContinuousPath) -> Result<()> {
    if phi.values()[0] != 0.0 {
        return Err(Error::InvalidPath("solution must start at 0".into()));
    }
    for (i, w) in phi.values().windows(2).enumerate() {
        if !(w[1] - w[0] >= machine_delta(w[0])) {
            return Err(Error::NotBijective { index: i + 1 });
        }
    }
    Ok(())
}

/// The noise `ω(x) = x − φ̂(x) + ε(1/φ̂'(x) − 1)` that makes `phi` the
/// solution, on the space grid `x_i = φ(t_i)`. Uses `1/φ̂'(x_i) = φ'(t_i)`
/// with `φ'` from finite differences.
pub fn recover_noise(phi: &ContinuousPath, epsilon: f64) -> Result<ContinuousPath> {
    check_bijective(phi)?;
    let slope = derivative(phi.grid(), phi.values())?;
    recover_from_parts(phi, &slope, epsilon)
}

/// As [`recover_noise`] with a known derivative `φ'` on the same grid.
pub fn recover_noise_with_slope(
    phi: &ContinuousPath,
    phi_prime: &ContinuousPath,
    epsilon: f64,
) -> Result<ContinuousPath> {
    check_bijective(phi)?;
    if phi_prime.grid() != phi.grid() {
        return Err(Error::InvalidPath("phi and phi' must share a grid".into()));
    }
    recover_from_parts(phi, phi_prime.values(), epsilon)
}

fn recover_from_parts(phi: &ContinuousPath, slope: &[f64], epsilon: f64) -> Result<ContinuousPath> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {epsilon}")));
    }
    let xs = phi.values().to_vec();
    let omega = phi
        .nodes()
        .zip(slope)
        .map(|((t, x), &d)| x - t + epsilon * (d - 1.0))
        .collect();
    ContinuousPath::new(xs, omega)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composites {
    pub eps_phi_prime: ContinuousPath,
    pub omega_circ_phi_plus_e: ContinuousPath,
    pub log_heston: Option<ContinuousPath>,
}

/// `εφ'`, `ω∘φ + e` and, given `ω̄`, `ω̄∘φ − ω∘φ − φ` on the time grid.
pub fn composite_series(
    sol: &IvpSolution,
    omega: &ContinuousPath,
    omega_bar: Option<&ContinuousPath>,
    epsilon: f64,
) -> Result<Composites> {
    let eps_phi_prime = sol.phi_prime.affine(epsilon, 0.0, false);
    let omega_phi = omega.compose(&sol.phi)?;
    let omega_circ_phi_plus_e = omega_phi.affine(1.0, 0.0, true);
    let log_heston = match omega_bar {
        None => None,
        Some(bar) => {
            let bar_phi = bar.compose(&sol.phi)?;
            let values = bar_phi
                .values()
                .iter()
                .zip(omega_phi.values())
                .zip(sol.phi.values())
                .map(|((b, w), p)| b - w - p)
                .collect();
            Some(ContinuousPath::from_parts_unchecked(sol.phi.grid().to_vec(), values))
        }
    };
    Ok(Composites {
        eps_phi_prime,
        omega_circ_phi_plus_e,
        log_heston,
    })
}
