//! Grid-sampled trajectories.
//!
//! [`ContinuousPath`] is a continuous path on `[0, domain_end]` stored as
//! nodes plus piecewise-linear interpolation. [`CadlagPath`] is a
//! non-decreasing right-continuous path that is linear between breakpoints,
//! may jump at a breakpoint, and may become `+inf` (or unresolved) from a
//! sentinel level onwards. Exit-time functionals produce the latter.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Continuous trajectory with piecewise-linear evaluation between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPath {
    grid: Vec<f64>,
    values: Vec<f64>,
}

/// Uniform abscissae `i * step` for `i = 0..=n`, with `n` the smallest count
/// whose last node reaches `end` (up to rounding of `end / step`).
pub fn uniform_grid(step: f64, end: f64) -> Vec<f64> {
    let ratio = end / step;
    let rounded = ratio.round();
    let n = if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded as usize
    } else {
        ratio.ceil() as usize
    };
    (0..=n).map(|i| i as f64 * step).collect()
}

impl ContinuousPath {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidPath("empty grid".into()));
        }
        if grid.len() != values.len() {
            return Err(Error::InvalidPath(format!(
                "grid has {} nodes but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid[0] != 0.0 {
            return Err(Error::InvalidPath(format!("grid starts at {}, not 0", grid[0])));
        }
        if let Some(i) = grid.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath(format!(
                "grid not strictly increasing at node {}",
                i + 1
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPath(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    /// Samples `f` on `uniform_grid(step, end)`.
    pub fn uniform(step: f64, end: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(step > 0.0) || !(end > 0.0) {
            return Err(Error::InvalidPath(format!(
                "uniform grid needs step > 0 and end > 0 (got {step}, {end})"
            )));
        }
        Self::from_fn(uniform_grid(step, end), f)
    }

    /// The identity path `e(x) = x`.
    pub fn identity(step: f64, end: f64) -> Result<Self> {
        Self::uniform(step, end, |x| x)
    }

    pub fn zero(step: f64, end: f64) -> Result<Self> {
        Self::uniform(step, end, |_| 0.0)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn domain_end(&self) -> f64 {
        *self.grid.last().expect("path has at least one node")
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().copied().zip(self.values.iter().copied())
    }

    /// Piecewise-linear interpolant at `x`; bitwise exact at nodes.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let end = self.domain_end();
        if !(x >= 0.0 && x <= end) {
            return Err(Error::OutOfDomain { x, end });
        }
        Ok(self.eval_unchecked(x))
    }

    // Caller guarantees 0 <= x <= domain_end.
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        let i = self.grid.partition_point(|&g| g <= x);
        if i == 0 {
            return self.values[0];
        }
        let lo = i - 1;
        if self.grid[lo] == x || lo + 1 == self.grid.len() {
            return self.values[lo];
        }
        let (x0, x1) = (self.grid[lo], self.grid[lo + 1]);
        let (v0, v1) = (self.values[lo], self.values[lo + 1]);
        v0 + (v1 - v0) * ((x - x0) / (x1 - x0))
    }

    /// Pointwise `a * p(x) + b (+ x)` on this path's grid.
    pub fn affine(&self, a: f64, b: f64, add_identity: bool) -> Self {
        let values = self
            .nodes()
            .map(|(x, v)| {
                let y = a * v + b;
                if add_identity {
                    y + x
                } else {
                    y
                }
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// `self ∘ inner` on the grid of `inner`.
    pub fn compose(&self, inner: &ContinuousPath) -> Result<Self> {
        let end = self.domain_end();
        let mut values = Vec::with_capacity(inner.len());
        for &y in &inner.values {
            if !(y >= 0.0 && y <= end) {
                return Err(Error::RangeExceedsDomain { value: y, end });
            }
            values.push(self.eval_unchecked(y));
        }
        Ok(Self {
            grid: inner.grid.clone(),
            values,
        })
    }

    /// The path restricted to `[0, up_to]`, with an interpolated end node
    /// when `up_to` falls between grid nodes.
    pub fn restrict(&self, up_to: f64) -> Result<Self> {
        let end = self.domain_end();
        if !(up_to >= 0.0 && up_to <= end) {
            return Err(Error::OutOfDomain { x: up_to, end });
        }
        let keep = self.grid.partition_point(|&g| g <= up_to);
        let mut grid = self.grid[..keep].to_vec();
        let mut values = self.values[..keep].to_vec();
        if grid[keep - 1] < up_to {
            values.push(self.eval_unchecked(up_to));
            grid.push(up_to);
        }
        Ok(Self { grid, values })
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|self - other|` over the union of both grids within `[0, up_to]`.
    pub fn max_abs_diff(&self, other: &ContinuousPath, up_to: f64) -> Result<f64> {
        let limit = up_to.min(self.domain_end()).min(other.domain_end());
        let mut worst = 0.0_f64;
        for &x in self.grid.iter().chain(other.grid.iter()) {
            if x <= limit {
                worst = worst.max((self.eval_unchecked(x) - other.eval_unchecked(x)).abs());
            }
        }
        worst = worst.max((self.eval(limit)? - other.eval(limit)?).abs());
        Ok(worst)
    }

    pub(crate) fn from_parts_unchecked(grid: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert!(Self::new(grid.clone(), values.clone()).is_ok());
        Self { grid, values }
    }

    pub(crate) fn push(&mut self, x: f64, v: f64) {
        debug_assert!(x > self.domain_end());
        self.grid.push(x);
        self.values.push(v);
    }
}

/// What a [`CadlagPath`] equals from its sentinel level onwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    /// `inf ∅ = ∞`: the level is never exceeded.
    Infinite,
    /// The level is not exceeded on the realized domain; more data is needed.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tail {
    /// First level at which the path is no longer finite.
    pub from: f64,
    /// Left limit of the path at `from`.
    pub left_limit: f64,
    pub kind: TailKind,
}

/// Value of an exit-time path at a level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExitTime {
    Finite(f64),
    Infinite,
    Unresolved,
}

impl ExitTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExitTime::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExitTime::Infinite)
    }

    pub fn is_unresolved(self) -> bool {
        matches!(self, ExitTime::Unresolved)
    }
}

/// Infinite compares above every finite value; unresolved is incomparable
/// with everything except itself.
impl PartialOrd for ExitTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use ExitTime::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            (Finite(_), Infinite) => Some(Ordering::Less),
            (Infinite, Finite(_)) => Some(Ordering::Greater),
            (Infinite, Infinite) | (Unresolved, Unresolved) => Some(Ordering::Equal),
            _ => None,
        }
    }
}

/// Non-decreasing right-continuous path, linear between breakpoints.
///
/// At breakpoint `i` the path takes `right_values[i]`; its left limit there is
/// `left_values[i]`. Between breakpoints `i` and `i + 1` it interpolates from
/// `right_values[i]` to `left_values[i + 1]`. With a tail, the last segment
/// runs up to `tail.left_limit` and every level `>= tail.from` maps to the
/// tail kind.
#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    breakpoints: Vec<f64>,
    left_values: Vec<f64>,
    right_values: Vec<f64>,
    tail: Option<Tail>,
}

impl CadlagPath {
    pub fn new(
        breakpoints: Vec<f64>,
        left_values: Vec<f64>,
        right_values: Vec<f64>,
        tail: Option<Tail>,
    ) -> Result<Self> {
        let n = breakpoints.len();
        if left_values.len() != n || right_values.len() != n {
            return Err(Error::InvalidPath("breakpoint arrays differ in length".into()));
        }
        if n == 0 && tail.is_none() {
            return Err(Error::InvalidPath("càdlàg path needs breakpoints or a tail".into()));
        }
        if n > 0 && breakpoints[0] != 0.0 {
            return Err(Error::InvalidPath("first breakpoint must be 0".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath("breakpoints not strictly increasing".into()));
        }
        let all_finite = left_values
            .iter()
            .chain(right_values.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidPath("stored values must be finite".into()));
        }
        for i in 0..n {
            if right_values[i] < left_values[i] || (i + 1 < n && left_values[i + 1] < right_values[i]) {
                return Err(Error::InvalidPath(format!("path decreases near breakpoint {i}")));
            }
        }
        if let Some(t) = &tail {
            if !t.left_limit.is_finite() || !t.from.is_finite() {
                return Err(Error::InvalidPath("tail must have finite anchors".into()));
            }
            match breakpoints.last() {
                Some(&last) if !(t.from > last) => {
                    return Err(Error::InvalidPath("tail must start after the last breakpoint".into()))
                }
                None if t.from != 0.0 => {
                    return Err(Error::InvalidPath("tail without breakpoints must start at 0".into()))
                }
                _ => {}
            }
            if let Some(&r) = right_values.last() {
                if t.left_limit < r {
                    return Err(Error::InvalidPath("tail left limit below last value".into()));
                }
            }
        }
        Ok(Self {
            breakpoints,
            left_values,
            right_values,
            tail,
        })
    }

    /// The path that is infinite (or unresolved) at every level `>= 0`.
    pub fn all_tail(kind: TailKind) -> Self {
        Self {
            breakpoints: Vec::new(),
            left_values: Vec::new(),
            right_values: Vec::new(),
            tail: Some(Tail {
                from: 0.0,
                left_limit: 0.0,
                kind,
            }),
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn left_values(&self) -> &[f64] {
        &self.left_values
    }

    pub fn right_values(&self) -> &[f64] {
        &self.right_values
    }

    pub fn tail(&self) -> Option<&Tail> {
        self.tail.as_ref()
    }

    /// Value at level 0, the sentinel when the path is nowhere finite.
    pub fn initial_value(&self) -> ExitTime {
        match self.right_values.first() {
            Some(&v) => ExitTime::Finite(v),
            None => self.tail_value(),
        }
    }

    /// Supremum of the levels carrying finite values.
    pub fn finite_extent(&self) -> f64 {
        match (&self.tail, self.breakpoints.last()) {
            (Some(t), _) => t.from,
            (None, Some(&b)) => b,
            (None, None) => 0.0,
        }
    }

    /// Largest level the path is defined at (`+inf` when it has a tail).
    pub fn domain_end(&self) -> f64 {
        if self.tail.is_some() {
            f64::INFINITY
        } else {
            self.finite_extent()
        }
    }

    fn tail_value(&self) -> ExitTime {
        match self.tail.map(|t| t.kind) {
            Some(TailKind::Infinite) => ExitTime::Infinite,
            Some(TailKind::Unresolved) => ExitTime::Unresolved,
            None => unreachable!("tail_value called without a tail"),
        }
    }

    pub fn eval(&self, level: f64) -> Result<ExitTime> {
        if !(level >= 0.0) || level > self.domain_end() {
            return Err(Error::OutOfDomain {
                x: level,
                end: self.domain_end(),
            });
        }
        if let Some(t) = &self.tail {
            if level >= t.from {
                return Ok(self.tail_value());
            }
        }
        let i = self.breakpoints.partition_point(|&b| b <= level) - 1;
        if self.breakpoints[i] == level {
            return Ok(ExitTime::Finite(self.right_values[i]));
        }
        let (x1, v1) = if i + 1 < self.breakpoints.len() {
            (self.breakpoints[i + 1], self.left_values[i + 1])
        } else {
            let t = self.tail.expect("level inside domain implies a tail here");
            (t.from, t.left_limit)
        };
        let (x0, v0) = (self.breakpoints[i], self.right_values[i]);
        Ok(ExitTime::Finite(v0 + (v1 - v0) * ((level - x0) / (x1 - x0))))
    }

    /// Left limit at `level > 0` (the stored left value at breakpoints).
    pub fn left_limit(&self, level: f64) -> Result<f64> {
        if let Some(t) = &self.tail {
            if level == t.from {
                return Ok(t.left_limit);
            }
        }
        if let Ok(i) = self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&level).unwrap_or(Ordering::Less))
        {
            return Ok(self.left_values[i]);
        }
        match self.eval(level)? {
            ExitTime::Finite(v) => Ok(v),
            _ => Err(Error::OutOfDomain {
                x: level,
                end: self.finite_extent(),
            }),
        }
    }

    /// Jumps `(level, left, right)` larger than `min_size`, excluding the tail.
    pub fn jumps(&self, min_size: f64) -> Vec<(f64, f64, f64)> {
        self.breakpoints
            .iter()
            .zip(self.left_values.iter().zip(self.right_values.iter()))
            .filter(|(_, (l, r))| *r - *l > min_size)
            .map(|(&b, (&l, &r))| (b, l, r))
            .collect()
    }

    pub fn is_non_decreasing(&self) -> bool {
        let n = self.breakpoints.len();
        (0..n).all(|i| {
            self.left_values[i] <= self.right_values[i]
                && (i + 1 == n || self.right_values[i] <= self.left_values[i + 1])
        }) && match (&self.tail, self.right_values.last()) {
            (Some(t), Some(&r)) => t.left_limit >= r,
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_fig1(x: f64) -> f64 {
        -(6.0 * std::f64::consts::PI * x).sin() / 6.0
    }

    #[test]
    fn identity_eval_midpoint() {
        let e = ContinuousPath::identity(0.125, 1.0).unwrap();
        assert_eq!(e.eval(0.5).unwrap(), 0.5);
        assert!((e.eval(0.3).unwrap() - 0.3).abs() < 1e-16);
    }

    #[test]
    fn linear_interpolation_between_two_nodes() {
        let p = ContinuousPath::new(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(p.eval(0.25).unwrap(), 0.5);
    }

    #[test]
    fn sine_path_at_quarter_node() {
        let p = ContinuousPath::uniform(1.0 / 64.0, 1.0, sine_fig1).unwrap();
        let v = p.eval(0.25).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-15, "{v}");
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let p = ContinuousPath::identity(0.5, 1.0).unwrap();
        assert!(matches!(p.eval(-1e-9), Err(Error::OutOfDomain { .. })));
        assert!(matches!(p.eval(1.0 + 1e-9), Err(Error::OutOfDomain { .. })));
        assert!(p.eval(1.0).is_ok());
    }

    #[test]
    fn constructor_rejects_bad_grids() {
        assert!(ContinuousPath::new(vec![0.1, 1.0], vec![0.0, 0.0]).is_err());
        assert!(ContinuousPath::new(vec![0.0, 1.0, 1.0], vec![0.0; 3]).is_err());
        assert!(ContinuousPath::new(vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(ContinuousPath::new(vec![0.0, 1.0], vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn affine_builds_e_minus_omega() {
        let e = ContinuousPath::identity(0.25, 2.0).unwrap();
        let z = e.affine(-1.0, 0.0, true);
        assert!(z.values().iter().all(|&v| v == 0.0));

        let zero = ContinuousPath::zero(0.25, 2.0).unwrap();
        assert_eq!(zero.affine(-1.0, 0.0, true).values(), e.values());

        let omega = ContinuousPath::uniform(1.0 / 256.0, 1.0, sine_fig1).unwrap();
        let shifted = omega.affine(-1.0, -0.1, true);
        for (x, v) in shifted.nodes() {
            let expected = x + (6.0 * std::f64::consts::PI * x).sin() / 6.0 - 0.1;
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn compose_with_identity() {
        let e = ContinuousPath::identity(1.0 / 32.0, 2.0).unwrap();
        let phi = ContinuousPath::uniform(1.0 / 32.0, 1.0, |t| t + 0.5 * t * t).unwrap();
        let composed = e.compose(&phi).unwrap();
        assert_eq!(composed.grid(), phi.grid());
        for (u, v) in composed.values().iter().zip(phi.values()) {
            assert!((u - v).abs() <= 1e-15 * (1.0 + v.abs()));
        }
        let omega = ContinuousPath::uniform(1.0 / 32.0, 2.0, sine_fig1).unwrap();
        assert_eq!(omega.compose(&e).unwrap().values(), omega.values());
    }

    #[test]
    fn compose_range_check() {
        let short = ContinuousPath::identity(0.5, 1.0).unwrap();
        let long = ContinuousPath::uniform(0.5, 2.0, |t| 2.0 * t).unwrap();
        assert!(matches!(
            short.compose(&long),
            Err(Error::RangeExceedsDomain { .. })
        ));
    }

    #[test]
    fn restrict_inserts_end_node() {
        let p = ContinuousPath::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]).unwrap();
        let r = p.restrict(1.5).unwrap();
        assert_eq!(r.grid(), &[0.0, 1.0, 1.5]);
        assert_eq!(r.values(), &[0.0, 2.0, 1.0]);
        assert_eq!(p.restrict(1.0).unwrap().grid(), &[0.0, 1.0]);
    }

    #[test]
    fn cadlag_eval_jump_and_tail() {
        // E of x on [0,1], 1 on [1,2], x-1 on [2,3].
        let c = CadlagPath::new(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![0.0, 2.0],
            Some(Tail {
                from: 2.0,
                left_limit: 3.0,
                kind: TailKind::Infinite,
            }),
        )
        .unwrap();
        assert_eq!(c.eval(0.5).unwrap(), ExitTime::Finite(0.5));
        assert_eq!(c.eval(1.0).unwrap(), ExitTime::Finite(2.0));
        assert_eq!(c.left_limit(1.0).unwrap(), 1.0);
        assert_eq!(c.eval(1.5).unwrap(), ExitTime::Finite(2.5));
        assert_eq!(c.eval(2.0).unwrap(), ExitTime::Infinite);
        assert_eq!(c.eval(1e6).unwrap(), ExitTime::Infinite);
        assert_eq!(c.left_limit(2.0).unwrap(), 3.0);
        assert!(c.is_non_decreasing());
        assert_eq!(c.jumps(0.5), vec![(1.0, 1.0, 2.0)]);
    }

    #[test]
    fn cadlag_rejects_decreasing() {
        assert!(CadlagPath::new(vec![0.0, 1.0], vec![0.0, 2.0], vec![3.0, 2.5], None).is_err());
        assert!(CadlagPath::new(vec![0.0, 1.0], vec![0.0, 0.5], vec![1.0, 1.0], None).is_err());
    }

    #[test]
    fn exit_time_ordering() {
        assert!(ExitTime::Finite(1e300) < ExitTime::Infinite);
        assert!(ExitTime::Finite(1.0) < ExitTime::Finite(2.0));
        assert_eq!(ExitTime::Unresolved.partial_cmp(&ExitTime::Finite(0.0)), None);
    }

    #[test]
    fn all_tail_path() {
        let c = CadlagPath::all_tail(TailKind::Infinite);
        assert_eq!(c.eval(0.0).unwrap(), ExitTime::Infinite);
        assert_eq!(c.initial_value(), ExitTime::Infinite);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_path() -> impl Strategy<Value = ContinuousPath> {
            prop::collection::vec((0.01f64..1.0, -5.0f64..5.0), 1..40).prop_map(|steps| {
                let mut grid = vec![0.0];
                let mut values = vec![0.0];
                for (dx, v) in steps {
                    grid.push(grid.last().unwrap() + dx);
                    values.push(v);
                }
                ContinuousPath::new(grid, values).unwrap()
            })
        }

        proptest! {
            #[test]
            fn eval_exact_at_nodes(p in arb_path()) {
                for (x, v) in p.nodes() {
                    prop_assert_eq!(p.eval(x).unwrap().to_bits(), v.to_bits());
                }
            }

            #[test]
            fn affine_inverts(p in arb_path(), a in prop_oneof![-4.0f64..-0.25, 0.25f64..4.0], b in -3.0f64..3.0) {
                let back = p.affine(a, b, false).affine(1.0 / a, -b / a, false);
                for (u, v) in back.values().iter().zip(p.values()) {
                    prop_assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
                }
            }

            #[test]
            fn compose_identity_both_sides(p in arb_path()) {
                let end = p.domain_end();
                let e = ContinuousPath::identity(end / 50.0, end).unwrap();
                let left = e.restrict(e.domain_end().min(end)).unwrap();
                // p ∘ e on e's grid equals p there.
                let pe = p.compose(&left).unwrap();
                for (x, v) in pe.nodes() {
                    prop_assert_eq!(v, p.eval(x).unwrap());
                }
                // e ∘ p needs p's range inside e's domain.
                let shifted = p.affine(1.0, -p.min_value(), false);
                let big = ContinuousPath::identity(0.5, shifted.max_value() + 1.0).unwrap();
                let ep = big.compose(&shifted).unwrap();
                for (u, v) in ep.values().iter().zip(shifted.values()) {
                    prop_assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
                }
            }
        }
    }
}
