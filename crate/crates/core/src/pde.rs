//! Trapezoidal time stepping for `y_t − Δy + V y = f` and its adjoint
//! `−q_t − Δq + V q = 0`, with the potential frozen at half-steps.
//!
//! One step of the forward scheme is
//!
//! ```text
//! (I + dt/2 A^{n+1/2}) y^{n+1} = (I − dt/2 A^{n+1/2}) y^n + dt f^{n+1/2},
//! A^{n+1/2} = −Δ_h + diag(V(x_i, t_{n+1/2})),
//! ```
//!
//! and the adjoint runs the same matrices backwards. The pair satisfies the
//! discrete duality identity
//! `⟨y^N, q^N⟩ − ⟨y^0, q^0⟩ = dt Σ_n ⟨f^{n+1/2}, (q^n + q^{n+1})/2⟩`
//! exactly, which is why observations are taken as midpoint averages.

use crate::error::{HeatError, Result};
use crate::linalg::{SymTridiagonal, TridiagonalFactor};
use crate::mesh::{SpaceGrid, TimeGrid};
use crate::observability::ObservationRegion;
use crate::potential::{evaluate_midstep, norms, Potential};
use crate::scalar::{from_usize, lit, Real};

/// Node values `levels[n][i]` at interior nodes for time levels `0..=steps`.
/// Boundary values are identically zero and not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField<T> {
    pub grid: SpaceGrid<T>,
    pub tg: TimeGrid<T>,
    pub levels: Vec<Vec<T>>,
}

impl<T: Real> SpaceTimeField<T> {
    pub fn zeros(grid: SpaceGrid<T>, tg: TimeGrid<T>) -> Self {
        Self {
            levels: vec![vec![T::zero(); grid.n]; tg.steps + 1],
            grid,
            tg,
        }
    }

    pub fn from_fn(grid: SpaceGrid<T>, tg: TimeGrid<T>, f: impl Fn(T, T) -> T) -> Self {
        let levels = (0..=tg.steps)
            .map(|n| {
                let t = tg.time(n);
                (0..grid.n).map(|i| f(grid.node(i), t)).collect()
            })
            .collect();
        Self { grid, tg, levels }
    }

    pub fn initial(&self) -> &[T] {
        &self.levels[0]
    }

    pub fn terminal(&self) -> &[T] {
        &self.levels[self.tg.steps]
    }

    /// `(u^n + u^{n+1})/2`
    pub fn midpoint(&self, n: usize) -> Vec<T> {
        let half: T = lit(0.5);
        self.levels[n]
            .iter()
            .zip(&self.levels[n + 1])
            .map(|(&a, &b)| half * (a + b))
            .collect()
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self {
            levels: self
                .levels
                .iter()
                .map(|l| l.iter().map(|&v| alpha * v).collect())
                .collect(),
            ..*self
        }
    }

    pub fn max_abs(&self) -> T {
        self.levels
            .iter()
            .flatten()
            .fold(T::zero(), |m, &v| m.max(v.abs()))
    }
}

/// Values `f_i^{n+1/2}` on interior nodes at the `steps` half-steps.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfStepSource<T> {
    pub values: Vec<Vec<T>>,
}

impl<T: Real> HalfStepSource<T> {
    pub fn zeros(n: usize, steps: usize) -> Self {
        Self {
            values: vec![vec![T::zero(); n]; steps],
        }
    }

    pub fn steps(&self) -> usize {
        self.values.len()
    }

    /// Discrete `L²(Q_T)` norm `(dt h Σ f²)^{1/2}`.
    pub fn l2_norm(&self, grid: &SpaceGrid<T>, tg: &TimeGrid<T>) -> T {
        let s: T = self.values.iter().flatten().map(|&v| v * v).sum();
        (tg.dt * grid.h * s).sqrt()
    }
}

/// Dirichlet second difference `Δ_h u` of an interior vector.
pub fn laplacian<T: Real>(u: &[T], h: T) -> Vec<T> {
    let n = u.len();
    let inv = (h * h).recip();
    let two: T = lit(2.0);
    (0..n)
        .map(|i| {
            let left = if i > 0 { u[i - 1] } else { T::zero() };
            let right = if i + 1 < n { u[i + 1] } else { T::zero() };
            (left - two * u[i] + right) * inv
        })
        .collect()
}

/// Centered first difference with zero Dirichlet closure.
pub fn centered_gradient<T: Real>(u: &[T], h: T) -> Vec<T> {
    let n = u.len();
    let inv = (h + h).recip();
    (0..n)
        .map(|i| {
            let left = if i > 0 { u[i - 1] } else { T::zero() };
            let right = if i + 1 < n { u[i + 1] } else { T::zero() };
            (right - left) * inv
        })
        .collect()
}

#[derive(Debug, Clone)]
struct StepOperator<T> {
    implicit: TridiagonalFactor<T>,
    explicit: SymTridiagonal<T>,
}

/// Precomputed step operators for one potential on one space-time grid.
#[derive(Debug, Clone)]
pub struct Propagator<T> {
    pub grid: SpaceGrid<T>,
    pub tg: TimeGrid<T>,
    /// `V(x_i, t_{n+1/2})`
    pub vmid: Vec<Vec<T>>,
    ops: Vec<StepOperator<T>>,
    time_independent: bool,
}

impl<T: Real> Propagator<T> {
    pub fn new(grid: SpaceGrid<T>, tg: TimeGrid<T>, v: &Potential<T>) -> Result<Self> {
        let vmid = evaluate_midstep(v, &grid, &tg);
        Self::from_midstep(grid, tg, vmid, v.is_time_independent())
    }

    /// Builds the propagator from half-step potential samples.
    pub fn from_midstep(
        grid: SpaceGrid<T>,
        tg: TimeGrid<T>,
        vmid: Vec<Vec<T>>,
        time_independent: bool,
    ) -> Result<Self> {
        if vmid.len() != tg.steps {
            return Err(HeatError::DimensionMismatch {
                expected: tg.steps,
                got: vmid.len(),
            });
        }
        let half_dt = tg.dt * lit(0.5);
        let inv_h2 = (grid.h * grid.h).recip();
        let two: T = lit(2.0);
        let build = |step: usize, row: &[T]| -> Result<StepOperator<T>> {
            if row.len() != grid.n {
                return Err(HeatError::DimensionMismatch {
                    expected: grid.n,
                    got: row.len(),
                });
            }
            let a_diag: Vec<T> = row.iter().map(|&v| two * inv_h2 + v).collect();
            let off = vec![-inv_h2 * half_dt; grid.n - 1];
            let lhs = SymTridiagonal::new(
                a_diag.iter().map(|&d| T::one() + half_dt * d).collect(),
                off.clone(),
            );
            let rhs = SymTridiagonal::new(
                a_diag.iter().map(|&d| T::one() - half_dt * d).collect(),
                off.iter().map(|&o| -o).collect(),
            );
            let implicit = lhs.factor().ok_or(HeatError::SingularStep { step })?;
            Ok(StepOperator {
                implicit,
                explicit: rhs,
            })
        };
        let ops = if time_independent {
            vec![build(0, &vmid[0])?]
        } else {
            vmid.iter()
                .enumerate()
                .map(|(n, row)| build(n, row))
                .collect::<Result<_>>()?
        };
        Ok(Self {
            grid,
            tg,
            vmid,
            ops,
            time_independent,
        })
    }

    fn op(&self, n: usize) -> &StepOperator<T> {
        if self.time_independent {
            &self.ops[0]
        } else {
            &self.ops[n]
        }
    }

    fn check_len(&self, v: &[T]) -> Result<()> {
        if v.len() != self.grid.n {
            return Err(HeatError::DimensionMismatch {
                expected: self.grid.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    fn step_forward(&self, n: usize, y: &[T], source: Option<&HalfStepSource<T>>) -> Vec<T> {
        let op = self.op(n);
        let mut next = op.explicit.apply(y);
        if let Some(f) = source {
            for (v, &fi) in next.iter_mut().zip(&f.values[n]) {
                *v += self.tg.dt * fi;
            }
        }
        op.implicit.solve_in_place(&mut next);
        next
    }

    fn check_source(&self, source: Option<&HalfStepSource<T>>) -> Result<()> {
        if let Some(f) = source {
            if f.steps() != self.tg.steps {
                return Err(HeatError::DimensionMismatch {
                    expected: self.tg.steps,
                    got: f.steps(),
                });
            }
        }
        Ok(())
    }

    /// `Π_n |r_n|` for the highest grid mode, with `V` frozen at its maximum
    /// over each half-step. Trapezoidal steps barely damp this mode when
    /// `dt·4/h²` is large; values that are not negligible mean observability
    /// and control quantities are dominated by it.
    pub fn stiff_damping(&self) -> T {
        let half: T = lit(0.5);
        let top = self.grid.sine_mode_eigenvalue(self.grid.n);
        self.vmid
            .iter()
            .map(|row| {
                let mu = top + row.iter().copied().fold(T::neg_infinity(), T::max);
                let a = half * self.tg.dt * mu;
                ((T::one() - a) / (T::one() + a)).abs()
            })
            .fold(T::one(), |acc, r| acc * r)
    }

    /// Forward solve from `y0` with an optional half-step source.
    pub fn forward(
        &self,
        y0: &[T],
        source: Option<&HalfStepSource<T>>,
    ) -> Result<SpaceTimeField<T>> {
        self.check_len(y0)?;
        self.check_source(source)?;
        let mut levels = Vec::with_capacity(self.tg.steps + 1);
        levels.push(y0.to_vec());
        for n in 0..self.tg.steps {
            let next = self.step_forward(n, &levels[n], source);
            levels.push(next);
        }
        Ok(SpaceTimeField {
            grid: self.grid,
            tg: self.tg,
            levels,
        })
    }

    /// Forward solve returning only `y^N`.
    pub fn forward_terminal(&self, y0: &[T], source: Option<&HalfStepSource<T>>) -> Result<Vec<T>> {
        self.check_len(y0)?;
        self.check_source(source)?;
        let mut y = y0.to_vec();
        for n in 0..self.tg.steps {
            y = self.step_forward(n, &y, source);
        }
        Ok(y)
    }

    /// Backward solve of the adjoint equation from `q^N = qT`.
    pub fn adjoint(&self, q_terminal: &[T]) -> Result<SpaceTimeField<T>> {
        self.check_len(q_terminal)?;
        let steps = self.tg.steps;
        let mut levels = vec![Vec::new(); steps + 1];
        levels[steps] = q_terminal.to_vec();
        for n in (0..steps).rev() {
            let op = self.op(n);
            let mut prev = op.explicit.apply(&levels[n + 1]);
            op.implicit.solve_in_place(&mut prev);
            levels[n] = prev;
        }
        Ok(SpaceTimeField {
            grid: self.grid,
            tg: self.tg,
            levels,
        })
    }

    /// Half-step residual `D_t y − Δ_h ȳ + V ȳ − f` of a field against this scheme.
    pub fn residual(
        &self,
        y: &SpaceTimeField<T>,
        source: Option<&HalfStepSource<T>>,
    ) -> HalfStepSource<T> {
        let values = (0..self.tg.steps)
            .map(|n| {
                let mid = y.midpoint(n);
                let lap = laplacian(&mid, self.grid.h);
                (0..self.grid.n)
                    .map(|i| {
                        let dt_y = (y.levels[n + 1][i] - y.levels[n][i]) / self.tg.dt;
                        let f = source.map_or(T::zero(), |s| s.values[n][i]);
                        dt_y - lap[i] + self.vmid[n][i] * mid[i] - f
                    })
                    .collect()
            })
            .collect();
        HalfStepSource { values }
    }
}

pub fn forward_solve<T: Real>(
    prop: &Propagator<T>,
    y0: &[T],
    source: Option<&HalfStepSource<T>>,
) -> Result<SpaceTimeField<T>> {
    prop.forward(y0, source)
}

pub fn adjoint_solve<T: Real>(prop: &Propagator<T>, q_terminal: &[T]) -> Result<SpaceTimeField<T>> {
    prop.adjoint(q_terminal)
}

fn scaled_trace<T: Real>(
    q: &SpaceTimeField<T>,
    region: &ObservationRegion<T>,
    factor: impl Fn(T) -> T,
) -> HalfStepSource<T> {
    let dt = q.tg.dt;
    let values = (0..q.tg.steps)
        .map(|n| {
            let s = factor(region.times.weights[n] / dt);
            let mid = q.midpoint(n);
            (0..q.grid.n)
                .map(|i| {
                    if region.mask.contains(i) && s != T::zero() {
                        s * mid[i]
                    } else {
                        T::zero()
                    }
                })
                .collect()
        })
        .collect();
    HalfStepSource { values }
}

/// Observation `O q`: masked midpoint averages scaled by `(w_n/dt)^{1/2}`, so
/// that `dt h Σ |O q|²` is the quadrature of `‖q‖²_{L²(ω×E)}`.
pub fn observation_trace<T: Real>(
    q: &SpaceTimeField<T>,
    region: &ObservationRegion<T>,
) -> HalfStepSource<T> {
    scaled_trace(q, region, |r| r.sqrt())
}

/// Source `Oᵀ O q`: masked midpoint averages scaled by `w_n/dt`. Feeding it to
/// the forward solver realizes the Gramian and the HUM control.
pub fn control_source<T: Real>(
    q: &SpaceTimeField<T>,
    region: &ObservationRegion<T>,
) -> HalfStepSource<T> {
    scaled_trace(q, region, |r| r)
}

/// The three terms of the duality identity and their residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityGap<T> {
    pub gap: T,
    /// Sum of the magnitudes of the three pairing terms.
    pub scale: T,
}

impl<T: Real> DualityGap<T> {
    pub fn relative(&self) -> T {
        if self.scale == T::zero() {
            T::zero()
        } else {
            self.gap.abs() / self.scale
        }
    }
}

/// `⟨y^N, q^N⟩ − ⟨y^0, q^0⟩ − dt Σ_n ⟨f^{n+1/2}, (q^n + q^{n+1})/2⟩`.
pub fn duality_gap<T: Real>(
    prop: &Propagator<T>,
    y0: &[T],
    q_terminal: &[T],
    source: Option<&HalfStepSource<T>>,
) -> Result<DualityGap<T>> {
    let y = prop.forward(y0, source)?;
    let q = prop.adjoint(q_terminal)?;
    let g = &prop.grid;
    let end = g.inner(y.terminal(), q.terminal());
    let start = g.inner(y.initial(), q.initial());
    let mut forcing = T::zero();
    if let Some(f) = source {
        for n in 0..prop.tg.steps {
            forcing += g.inner(&f.values[n], &q.midpoint(n));
        }
        forcing *= prop.tg.dt;
    }
    Ok(DualityGap {
        gap: end - start - forcing,
        scale: end.abs() + start.abs() + forcing.abs(),
    })
}

/// Backward-in-time energy growth of an adjoint solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipativityReport<T> {
    pub neg_sup: T,
    /// `max_{t₁<t₂} ln(‖q(t₁)‖/‖q(t₂)‖)/(t₂ − t₁)`, or `−∞` when undefined.
    pub max_growth_rate: T,
    /// Smallest `c ≥ 0` with `‖q(t₁)‖ ≤ e^{c(t₂−t₁)‖V₋‖∞}‖q(t₂)‖`;
    /// `None` when `‖V₋‖∞ = 0`.
    pub min_admissible_c: Option<T>,
    /// The estimate holds with `c = 0` (norms never grow backwards in time).
    pub holds_with_zero: bool,
    /// The estimate holds with the continuum constant `c = 1`.
    pub holds_with_one: bool,
}

pub fn dissipativity_check<T: Real>(
    q: &SpaceTimeField<T>,
    v: &Potential<T>,
) -> Result<DissipativityReport<T>> {
    let neg_sup = norms(v, &q.grid, &q.tg, 8)?.neg_sup;
    let logs: Vec<T> = q.levels.iter().map(|l| q.grid.norm(l).ln()).collect();
    let mut rate = T::neg_infinity();
    let mut worst_excess = T::neg_infinity();
    for n2 in 1..logs.len() {
        for n1 in 0..n2 {
            let (l1, l2) = (logs[n1], logs[n2]);
            if l1 == T::neg_infinity() {
                continue;
            }
            let span = q.tg.time(n2) - q.tg.time(n1);
            let r = if l2 == T::neg_infinity() {
                T::infinity()
            } else {
                (l1 - l2) / span
            };
            rate = rate.max(r);
            // allow rounding of a few ulps per step
            let slack = T::epsilon() * lit(64.0) * from_usize(n2 - n1 + 1);
            worst_excess = worst_excess.max(l1 - l2 - slack);
        }
    }
    let holds_with_zero = worst_excess <= T::zero();
    let min_admissible_c = if neg_sup > T::zero() {
        Some(rate.max(T::zero()) / neg_sup)
    } else {
        None
    };
    let holds_with_one = holds_with_zero || min_admissible_c.is_some_and(|c| c <= T::one());
    Ok(DissipativityReport {
        neg_sup,
        max_growth_rate: rate,
        min_admissible_c,
        holds_with_zero,
        holds_with_one,
    })
}

/// `max_n ‖y^n‖²_h` and `Σ_n dt ‖∇_h ȳ^{n+1/2}‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport<T> {
    pub max_l2_sq: T,
    pub gradient_energy: T,
}

/// Gradient energy uses forward differences over all `n + 1` gaps, including
/// the two boundary gaps, evaluated on half-step averages.
pub fn energy_report<T: Real>(y: &SpaceTimeField<T>) -> EnergyReport<T> {
    let g = &y.grid;
    let max_l2_sq = y
        .levels
        .iter()
        .map(|l| g.inner(l, l))
        .fold(T::zero(), T::max);
    let mut gradient_energy = T::zero();
    for n in 0..y.tg.steps {
        let mid = y.midpoint(n);
        let mut s = T::zero();
        for i in 0..=g.n {
            let left = if i > 0 { mid[i - 1] } else { T::zero() };
            let right = if i < g.n { mid[i] } else { T::zero() };
            let d = (right - left) / g.h;
            s += d * d;
        }
        gradient_energy += y.tg.dt * g.h * s;
    }
    EnergyReport {
        max_l2_sq,
        gradient_energy,
    }
}
