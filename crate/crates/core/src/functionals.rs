//! Running supremum `S` and first-exit time `E`, plus the fast-reversion
//! limits built from them.
//!
//! `S(p)(t) = sup{p(u) : u ∈ [0, t)}` and `E(p)(x) = inf{u > 0 : p(u) > x}`
//! with `inf ∅ = ∞`. Both act on the piecewise-linear interpolant of the
//! input, so `S` inserts the knots where the path re-crosses its running
//! maximum and `E` is computed as the inverse of `S(p)`. This makes
//! `E ∘ S = E` and `S ∘ S = S` hold exactly on a common grid.

use crate::error::{Error, Result};
use crate::paths::{CadlagPath, ContinuousPath, Tail, TailKind};

/// Time at which the segment `(t0, v0) -> (t1, v1)` reaches `level`.
fn crossing(t0: f64, t1: f64, v0: f64, v1: f64, level: f64) -> f64 {
    t0 + (level - v0) / (v1 - v0) * (t1 - t0)
}

/// Exact running maximum of the piecewise-linear path.
pub fn running_sup(p: &ContinuousPath) -> ContinuousPath {
    let (g, v) = (p.grid(), p.values());
    let mut grid = Vec::with_capacity(g.len() + 8);
    let mut values = Vec::with_capacity(g.len() + 8);
    grid.push(g[0]);
    values.push(v[0]);
    let mut max = v[0];
    for i in 1..g.len() {
        if v[i] > max {
            if v[i - 1] < max {
                let tc = crossing(g[i - 1], g[i], v[i - 1], v[i], max);
                if tc > g[i - 1] && tc < g[i] {
                    grid.push(tc);
                    values.push(max);
                }
            }
            max = v[i];
        }
        grid.push(g[i]);
        values.push(max);
    }
    ContinuousPath::from_parts_unchecked(grid, values)
}

/// Exit-time path of a non-decreasing piecewise-linear path `q`.
fn invert_non_decreasing(q: &ContinuousPath, kind: TailKind) -> CadlagPath {
    let (t, v) = (q.grid(), q.values());
    let top = *v.last().expect("non-empty path");
    if !(top > 0.0) {
        return CadlagPath::all_tail(kind);
    }

    let first_positive = v.iter().position(|&x| x > 0.0).expect("top > 0");
    let origin_exit = if first_positive == 0 {
        0.0
    } else {
        let j = first_positive;
        crossing(t[j - 1], t[j], v[j - 1], v[j], 0.0)
    };

    let mut breakpoints = vec![0.0];
    let mut left = vec![0.0];
    let mut right = vec![origin_exit];

    let mut k = first_positive;
    loop {
        let level = v[k];
        let first = k;
        while k + 1 < v.len() && v[k + 1] == level {
            k += 1;
        }
        if k + 1 == v.len() {
            let tail = Tail {
                from: level,
                left_limit: t[first],
                kind,
            };
            return CadlagPath::new(breakpoints, left, right, Some(tail))
                .expect("inverse of a non-decreasing path is a valid càdlàg path");
        }
        breakpoints.push(level);
        left.push(t[first]);
        right.push(t[k]);
        k += 1;
    }
}

/// `E(p)` over `[0, up_to]`, treating the restricted path as the whole
/// trajectory: levels it never exceeds map to `+inf`.
pub fn first_exit(p: &ContinuousPath, up_to: f64) -> Result<CadlagPath> {
    first_exit_with(p, up_to, TailKind::Infinite)
}

/// `E(p)` over `[0, up_to]` for a path known to continue beyond `up_to`:
/// levels not exceeded yet are marked unresolved.
pub fn first_exit_open(p: &ContinuousPath, up_to: f64) -> Result<CadlagPath> {
    first_exit_with(p, up_to, TailKind::Unresolved)
}

pub fn first_exit_with(p: &ContinuousPath, up_to: f64, tail: TailKind) -> Result<CadlagPath> {
    let restricted = p.restrict(up_to)?;
    Ok(invert_non_decreasing(&running_sup(&restricted), tail))
}

/// Fast-reversion limit `φ₀ = E(e − ω)`.
pub fn limit_phi0(omega: &ContinuousPath, up_to: f64) -> Result<CadlagPath> {
    first_exit(&omega.affine(-1.0, 0.0, true), up_to)
}

/// As [`limit_phi0`], but for a noise path that has only been realized up to
/// `up_to` and continues beyond it.
pub fn limit_phi0_open(omega: &ContinuousPath, up_to: f64) -> Result<CadlagPath> {
    first_exit_open(&omega.affine(-1.0, 0.0, true), up_to)
}

/// Time-like exit barrier `θ` together with the noise scale `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitBarrier {
    theta: ContinuousPath,
    sigma: f64,
}

impl ExitBarrier {
    pub fn new(theta: ContinuousPath, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be > 0, got {sigma}")));
        }
        if theta.values()[0] != 0.0 {
            return Err(Error::InvalidConfig("theta(0) must be 0".into()));
        }
        if !theta.is_strictly_increasing() {
            return Err(Error::InvalidConfig("theta must be strictly increasing".into()));
        }
        Ok(Self { theta, sigma })
    }

    /// `θ(t) = rate · t` on `[0, end]`.
    pub fn linear(rate: f64, sigma: f64, end: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::InvalidConfig(format!("theta rate must be > 0, got {rate}")));
        }
        let theta = ContinuousPath::new(vec![0.0, end], vec![0.0, rate * end])?;
        Self::new(theta, sigma)
    }

    pub fn theta(&self) -> &ContinuousPath {
        &self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `θ⁻¹(level)` for `level` in the range of `θ`.
    pub fn theta_inverse(&self, level: f64) -> Option<f64> {
        let (t, v) = (self.theta.grid(), self.theta.values());
        if !(level >= 0.0 && level <= *v.last().unwrap()) {
            return None;
        }
        let i = v.partition_point(|&x| x <= level);
        if i == 0 {
            return Some(t[0]);
        }
        let lo = i - 1;
        if v[lo] == level || lo + 1 == v.len() {
            return Some(t[lo]);
        }
        Some(crossing(t[lo], t[lo + 1], v[lo], v[lo + 1], level))
    }
}

/// `t ↦ inf{s > 0 : s − σ ω(s) > θ(t)}` over the time range of `θ`, using `ω`
/// on `[0, up_to]`.
pub fn limit_generalized(
    omega: &ContinuousPath,
    barrier: &ExitBarrier,
    up_to: f64,
    tail: TailKind,
) -> Result<CadlagPath> {
    let shifted = omega.affine(-barrier.sigma, 0.0, true);
    let by_level = first_exit_with(&shifted, up_to, tail)?;
    let theta = barrier.theta();
    let theta_top = theta.max_value();

    // (time, left, right, from_level_knot)
    let mut knots: Vec<(f64, f64, f64, bool)> = Vec::new();
    for ((&level, &l), &r) in by_level
        .breakpoints()
        .iter()
        .zip(by_level.left_values())
        .zip(by_level.right_values())
    {
        match barrier.theta_inverse(level) {
            Some(t) => knots.push((t, l, r, true)),
            None => break,
        }
    }
    let tail_time = by_level
        .tail()
        .filter(|tl| tl.from <= theta_top)
        .and_then(|tl| barrier.theta_inverse(tl.from).map(|t| (t, *tl)));

    for (t, level) in theta.nodes() {
        if let Some((tt, _)) = tail_time {
            if t >= tt {
                break;
            }
        }
        if let Some(v) = by_level.eval(level)?.finite() {
            knots.push((t, v, v, false));
        }
    }
    knots.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.3.cmp(&a.3)));
    knots.dedup_by(|later, earlier| later.0 == earlier.0);

    let mut breakpoints = Vec::with_capacity(knots.len());
    let mut left = Vec::with_capacity(knots.len());
    let mut right = Vec::with_capacity(knots.len());
    for (t, l, r, _) in knots {
        breakpoints.push(t);
        left.push(l);
        right.push(r);
    }
    let tail = tail_time.map(|(t, tl)| Tail {
        from: t,
        left_limit: tl.left_limit,
        kind: tl.kind,
    });
    if breakpoints.is_empty() && tail.is_none() {
        return Err(Error::InvalidConfig("barrier range does not reach any level".into()));
    }
    CadlagPath::new(breakpoints, left, right, tail)
}
