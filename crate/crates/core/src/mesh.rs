//! Space and time grids, interval-union observation sets, and the
//! telescoping time sequence anchored at a density point.
//!
//! Measurable sets are finite unions of intervals. Node membership in a
//! spatial interval uses the closed-open convention `[lo, hi)`, and only
//! interior nodes are ever observed (boundary values are the homogeneous
//! Dirichlet data).

use crate::error::{HeatError, Result};
use crate::scalar::{from_usize, lit, Real};

/// Uniform grid of `n` interior nodes on `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid<T> {
    pub a: T,
    pub b: T,
    pub n: usize,
    pub h: T,
}

impl<T: Real> SpaceGrid<T> {
    pub fn new(a: T, b: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(HeatError::InvalidGrid(format!(
                "need at least 2 interior nodes, got {n}"
            )));
        }
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(HeatError::InvalidGrid(format!(
                "right endpoint {b} must exceed left endpoint {a}"
            )));
        }
        Ok(Self {
            a,
            b,
            n,
            h: (b - a) / from_usize(n + 1),
        })
    }

    /// Coordinate of interior node `i` (0-based, so `node(0) = a + h`).
    #[inline]
    pub fn node(&self, i: usize) -> T {
        self.a + from_usize::<T>(i + 1) * self.h
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn length(&self) -> T {
        self.b - self.a
    }

    /// Discrete inner product `h Σ u_i v_i`.
    pub fn inner(&self, u: &[T], v: &[T]) -> T {
        self.h * crate::linalg::dot(u, v)
    }

    pub fn norm(&self, u: &[T]) -> T {
        self.inner(u, u).sqrt()
    }

    /// Samples `f` at the interior nodes.
    pub fn sample(&self, f: impl Fn(T) -> T) -> Vec<T> {
        (0..self.n).map(|i| f(self.node(i))).collect()
    }

    /// The `k`-th Dirichlet sine mode `sin(kπ(x − a)/(b − a))` at the nodes.
    pub fn sine_mode(&self, k: usize) -> Vec<T> {
        let kk: T = from_usize(k);
        self.sample(|x| (kk * T::PI() * (x - self.a) / self.length()).sin())
    }

    /// Eigenvalue of `−Δ_h` belonging to [`SpaceGrid::sine_mode`]`(k)`:
    /// `(2/h²)(1 − cos(kπh/(b − a)))`.
    pub fn sine_mode_eigenvalue(&self, k: usize) -> T {
        let two: T = lit(2.0);
        let theta = from_usize::<T>(k) * T::PI() * self.h / self.length();
        two / (self.h * self.h) * (T::one() - theta.cos())
    }
}

/// Uniform time grid with `steps` steps on `(0, t_final)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    pub t_final: T,
    pub steps: usize,
    pub dt: T,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t_final: T, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(HeatError::InvalidGrid("need at least one time step".into()));
        }
        if !(t_final > T::zero()) || !t_final.is_finite() {
            return Err(HeatError::InvalidGrid(format!(
                "time horizon must be positive, got {t_final}"
            )));
        }
        Ok(Self {
            t_final,
            steps,
            dt: t_final / from_usize(steps),
        })
    }

    /// Time of level `n`.
    #[inline]
    pub fn time(&self, n: usize) -> T {
        if n == self.steps {
            self.t_final
        } else {
            from_usize::<T>(n) * self.dt
        }
    }

    /// Time of the half-step between levels `n` and `n + 1`.
    #[inline]
    pub fn half_time(&self, n: usize) -> T {
        (from_usize::<T>(n) + lit(0.5)) * self.dt
    }
}

/// Validates, sorts and returns a disjoint interval list inside `[lo, hi]`.
fn normalize_intervals<T: Real>(intervals: &[(T, T)], lo: T, hi: T) -> Result<Vec<(T, T)>> {
    let mut out: Vec<(T, T)> = intervals.to_vec();
    for &(l, h) in &out {
        if !(h > l) || !l.is_finite() || !h.is_finite() {
            return Err(HeatError::InvalidIntervals(format!(
                "interval ({l}, {h}) is empty or reversed"
            )));
        }
        if l < lo || h > hi {
            return Err(HeatError::InvalidIntervals(format!(
                "interval ({l}, {h}) leaves the domain ({lo}, {hi})"
            )));
        }
    }
    out.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    for w in out.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(HeatError::InvalidIntervals(format!(
                "intervals ({}, {}) and ({}, {}) overlap",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    Ok(out)
}

fn overlap<T: Real>(a: (T, T), b: (T, T)) -> T {
    (a.1.min(b.1) - a.0.max(b.0)).max(T::zero())
}

/// Measure of `(lo, hi) ∩ ∪ intervals`.
fn union_overlap<T: Real>(intervals: &[(T, T)], lo: T, hi: T) -> T {
    intervals.iter().map(|&iv| overlap(iv, (lo, hi))).sum()
}

/// Spatial observation set ω as a union of intervals, with the interior
/// nodes it contains.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceMask<T> {
    pub intervals: Vec<(T, T)>,
    /// 0-based interior node indices inside the union.
    pub indices: Vec<usize>,
    pub measure: T,
    flags: Vec<bool>,
}

impl<T: Real> SpaceMask<T> {
    pub fn new(grid: &SpaceGrid<T>, intervals: &[(T, T)]) -> Result<Self> {
        let intervals = normalize_intervals(intervals, grid.a, grid.b)?;
        let flags: Vec<bool> = (0..grid.n)
            .map(|i| {
                let x = grid.node(i);
                intervals.iter().any(|&(l, h)| x >= l && x < h)
            })
            .collect();
        let indices = flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect();
        let measure = intervals.iter().map(|&(l, h)| h - l).sum();
        Ok(Self {
            intervals,
            indices,
            measure,
            flags,
        })
    }

    /// Mask covering the whole domain.
    pub fn full(grid: &SpaceGrid<T>) -> Self {
        Self::new(grid, &[(grid.a, grid.b)]).expect("full domain is a valid interval")
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.flags.get(i).copied().unwrap_or(false)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    /// Grid size the mask was built for.
    pub fn grid_len(&self) -> usize {
        self.flags.len()
    }

    /// `h · #indices`, the measure seen by the discrete quadrature.
    pub fn discrete_measure(&self, grid: &SpaceGrid<T>) -> T {
        grid.h * from_usize(self.indices.len())
    }

    /// Discrete `L²(ω)` norm of a node vector.
    pub fn norm(&self, grid: &SpaceGrid<T>, u: &[T]) -> T {
        let s: T = self.indices.iter().map(|&i| u[i] * u[i]).sum();
        (grid.h * s).sqrt()
    }

    /// Zeroes entries outside the mask.
    pub fn restrict(&self, u: &[T]) -> Vec<T> {
        u.iter()
            .zip(&self.flags)
            .map(|(&v, &f)| if f { v } else { T::zero() })
            .collect()
    }
}

/// Time observation set E as a union of intervals, with per-step overlap
/// weights `w_n = |[t_n, t_{n+1}] ∩ E|`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSet<T> {
    pub intervals: Vec<(T, T)>,
    pub weights: Vec<T>,
    pub measure: T,
    pub t_final: T,
}

impl<T: Real> TimeSet<T> {
    pub fn new(tg: &TimeGrid<T>, intervals: &[(T, T)]) -> Result<Self> {
        let intervals = normalize_intervals(intervals, T::zero(), tg.t_final)?;
        let measure: T = intervals.iter().map(|&(l, h)| h - l).sum();
        if intervals.is_empty() || !(measure > T::zero()) {
            return Err(HeatError::EmptyTimeSet);
        }
        let weights = (0..tg.steps)
            .map(|n| union_overlap(&intervals, tg.time(n), tg.time(n + 1)))
            .collect();
        Ok(Self {
            intervals,
            weights,
            measure,
            t_final: tg.t_final,
        })
    }

    /// `E = (0, T)`.
    pub fn full(tg: &TimeGrid<T>) -> Self {
        Self::new(tg, &[(T::zero(), tg.t_final)]).expect("full horizon is a valid interval")
    }

    /// `|E ∩ (lo, hi)|`.
    pub fn overlap(&self, lo: T, hi: T) -> T {
        union_overlap(&self.intervals, lo, hi)
    }
}

/// Telescoping sequence `k_{m+1} − k = γ^{−m}(k_1 − k)` together with the
/// per-term check `|E ∩ (k_{m+1}, k_m)| ≥ (k_m − k_{m+1})/3`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySequence<T> {
    pub k: T,
    pub gamma: T,
    pub k1: T,
    /// `terms[j]` is `k_{j+1}`; there are `m_max + 1` terms.
    pub terms: Vec<T>,
    /// `flags[j]` checks the gap `(k_{j+2}, k_{j+1})`.
    pub flags: Vec<bool>,
}

impl<T: Real> DensitySequence<T> {
    pub fn all_hold(&self) -> bool {
        self.flags.iter().all(|&f| f)
    }
}

pub fn density_sequence<T: Real>(
    e: &TimeSet<T>,
    k: T,
    gamma: T,
    k1: T,
    m_max: usize,
) -> Result<DensitySequence<T>> {
    if !(gamma > T::one()) {
        return Err(HeatError::InvalidParameter(format!(
            "gamma must exceed 1, got {gamma}"
        )));
    }
    if !(k < k1) || k1 > e.t_final {
        return Err(HeatError::InvalidParameter(format!(
            "need k < k1 <= T, got k = {k}, k1 = {k1}, T = {}",
            e.t_final
        )));
    }
    let terms: Vec<T> = (0..=m_max)
        .map(|m| k + gamma.powi(-(m as i32)) * (k1 - k))
        .collect();
    let third: T = lit(1.0 / 3.0);
    let flags = terms
        .windows(2)
        .map(|w| {
            let (upper, lower) = (w[0], w[1]);
            e.overlap(lower, upper)
                >= third * (upper - lower) * (T::one() - T::epsilon() * lit(8.0))
        })
        .collect();
    Ok(DensitySequence {
        k,
        gamma,
        k1,
        terms,
        flags,
    })
}

/// Searches `k_1` on the ladder `k + (T − k)·2^{−j}`, `j = 0..=20`, returning
/// the first candidate whose sequence passes every check up to `m_max`.
pub fn find_k1<T: Real>(
    e: &TimeSet<T>,
    k: T,
    gamma: T,
    m_max: usize,
) -> Result<Option<DensitySequence<T>>> {
    if !(k < e.t_final) {
        return Err(HeatError::InvalidParameter(format!(
            "anchor {k} must lie below T = {}",
            e.t_final
        )));
    }
    for j in 0..=20 {
        let k1 = k + (e.t_final - k) * lit::<T>(0.5).powi(j);
        let seq = density_sequence(e, k, gamma, k1, m_max)?;
        if seq.all_hold() {
            return Ok(Some(seq));
        }
    }
    Ok(None)
}
