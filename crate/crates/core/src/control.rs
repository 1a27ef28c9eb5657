//! Null controls: penalized HUM on `ω × E`, and the smooth control built from
//! a HUM control on a smaller set by space and time cutoffs.

use crate::error::{HeatError, Result};
use crate::linalg::conjugate_gradient;
use crate::mesh::{SpaceGrid, SpaceMask, TimeGrid, TimeSet};
use crate::observability::{gramian_apply, ObservationRegion};
use crate::pde::{centered_gradient, control_source, HalfStepSource, Propagator, SpaceTimeField};
use crate::potential::PotentialNorms;
use crate::scalar::{from_usize, lit, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumOptions<T> {
    /// Penalization `ε ≥ 0` in `(Λ + εI) q = −y_free(T)`.
    pub eps: T,
    pub cg_tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for HumOptions<T> {
    fn default() -> Self {
        Self {
            eps: lit(1e-10),
            cg_tol: lit(1e-10),
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HumSolution<T> {
    pub q_terminal: Vec<T>,
    pub control: HalfStepSource<T>,
    /// Forward solve driven by `control`, computed independently of CG.
    pub trajectory: SpaceTimeField<T>,
    /// `‖y(T)‖ / ‖y0‖`; 0 for zero data.
    pub terminal_ratio: T,
    pub cg_iterations: usize,
    /// `‖(Λ + εI) q + y_free(T)‖ / ‖y_free(T)‖`.
    pub cg_residual: T,
    pub converged: bool,
    pub eps: T,
}

pub fn hum_solve<T: Real>(
    prop: &Propagator<T>,
    region: &ObservationRegion<T>,
    y0: &[T],
    opts: &HumOptions<T>,
) -> Result<HumSolution<T>> {
    if opts.eps < T::zero() || !(opts.cg_tol > T::zero()) {
        return Err(HeatError::InvalidParameter(
            "HUM needs eps >= 0 and cg_tol > 0".into(),
        ));
    }
    let free_end = prop.forward_terminal(y0, None)?;
    let rhs: Vec<T> = free_end.iter().map(|&v| -v).collect();
    let cg = conjugate_gradient(
        |q| {
            let mut y = gramian_apply(prop, region, q)?;
            for (yi, &qi) in y.iter_mut().zip(q) {
                *yi += opts.eps * qi;
            }
            Ok(y)
        },
        &rhs,
        None,
        opts.cg_tol,
        opts.max_iter,
    )?;
    let q = prop.adjoint(&cg.x)?;
    let control = control_source(&q, region);
    let trajectory = prop.forward(y0, Some(&control))?;
    let y0_norm = prop.grid.norm(y0);
    let terminal_ratio = if y0_norm > T::zero() {
        prop.grid.norm(trajectory.terminal()) / y0_norm
    } else {
        T::zero()
    };
    Ok(HumSolution {
        q_terminal: cg.x,
        control,
        trajectory,
        terminal_ratio,
        cg_iterations: cg.iterations,
        cg_residual: cg.relative_residual,
        converged: cg.converged,
        eps: opts.eps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport<T> {
    /// `‖h‖_{L²(ω×(0,T))}` by the half-step quadrature.
    pub cost_l2: T,
    /// `C (1 + 1/T + T‖V‖∞ + ⟦V⟧)`.
    pub log_bound: T,
    /// `ln(‖h‖/‖y0‖) − log_bound`; `None` when the cost vanishes.
    pub log_ratio: Option<T>,
}

pub fn cost_report<T: Real>(
    sol: &HumSolution<T>,
    norms: &PotentialNorms<T>,
    c: T,
) -> CostReport<T> {
    let g = &sol.trajectory.grid;
    let tg = &sol.trajectory.tg;
    let cost_l2 = sol.control.l2_norm(g, tg);
    let t = tg.t_final;
    let log_bound = c * (T::one() + t.recip() + t * norms.sup + norms.triple);
    let y0 = g.norm(sol.trajectory.initial());
    let log_ratio =
        (cost_l2 > T::zero() && y0 > T::zero()).then(|| (cost_l2 / y0).ln() - log_bound);
    CostReport {
        cost_l2,
        log_bound,
        log_ratio,
    }
}

/// `S(x) = 35x⁴ − 84x⁵ + 70x⁶ − 20x⁷` clamped to `[0, 1]`, with `S′` and `S″`.
/// Three derivatives vanish at both ends.
pub fn smoothstep<T: Real>(x: T) -> (T, T, T) {
    if x <= T::zero() {
        return (T::zero(), T::zero(), T::zero());
    }
    if x >= T::one() {
        return (T::one(), T::zero(), T::zero());
    }
    let c = |v: f64| -> T { lit(v) };
    let x2 = x * x;
    let x4 = x2 * x2;
    let s = x4 * (c(35.0) + x * (c(-84.0) + x * (c(70.0) + x * c(-20.0))));
    let omx = T::one() - x;
    let ds = c(140.0) * x2 * x * omx * omx * omx;
    let d2s = c(420.0) * x2 * omx * omx * (T::one() - c(2.0) * x);
    (s, ds, d2s)
}

/// `χ = 1` on `[0, rT]`, `χ = 0` on `[(1−r)T, T]`, smoothstep in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeCutoff<T> {
    pub t_final: T,
    pub ramp_fraction: T,
}

pub fn build_chi<T: Real>(t_final: T, ramp_fraction: T) -> Result<TimeCutoff<T>> {
    if !(ramp_fraction > T::zero() && ramp_fraction < lit(0.5)) {
        return Err(HeatError::InvalidParameter(format!(
            "ramp fraction must lie in (0, 1/2), got {ramp_fraction}"
        )));
    }
    if !(t_final > T::zero()) {
        return Err(HeatError::InvalidParameter(format!(
            "horizon must be positive, got {t_final}"
        )));
    }
    Ok(TimeCutoff {
        t_final,
        ramp_fraction,
    })
}

impl<T: Real> TimeCutoff<T> {
    fn ramp(&self) -> (T, T) {
        let start = self.ramp_fraction * self.t_final;
        let width = (T::one() - lit::<T>(2.0) * self.ramp_fraction) * self.t_final;
        (start, width)
    }

    pub fn value(&self, t: T) -> T {
        let (start, width) = self.ramp();
        T::one() - smoothstep((t - start) / width).0
    }

    pub fn derivative(&self, t: T) -> T {
        let (start, width) = self.ramp();
        -smoothstep((t - start) / width).1 / width
    }

    /// First time at which `χ` vanishes identically.
    pub fn off_time(&self) -> T {
        (T::one() - self.ramp_fraction) * self.t_final
    }
}

/// `φ = 1` on `ω₄ = (c, d)`, `φ = 0` outside `ω = (a, b)`, smoothstep collars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceCutoff<T> {
    pub inner: (T, T),
    pub outer: (T, T),
}

pub fn build_phi<T: Real>(
    grid: &SpaceGrid<T>,
    inner: (T, T),
    outer: (T, T),
) -> Result<SpaceCutoff<T>> {
    let (a, b) = outer;
    let (c, d) = inner;
    if !(grid.a <= a && a < c && c < d && d < b && b <= grid.b) {
        return Err(HeatError::Nesting(format!(
            "need ({c}, {d}) strictly inside ({a}, {b}) inside the domain"
        )));
    }
    Ok(SpaceCutoff { inner, outer })
}

impl<T: Real> SpaceCutoff<T> {
    /// `(φ, φ′, φ″)` at `x`.
    pub fn eval(&self, x: T) -> (T, T, T) {
        let (a, b) = self.outer;
        let (c, d) = self.inner;
        if x <= c {
            let w = c - a;
            let (s, ds, d2s) = smoothstep((x - a) / w);
            (s, ds / w, d2s / (w * w))
        } else if x >= d {
            let w = b - d;
            let (s, ds, d2s) = smoothstep((b - x) / w);
            (s, -ds / w, d2s / (w * w))
        } else {
            (T::one(), T::zero(), T::zero())
        }
    }
}

/// Nested single intervals `ω₂ ⋐ ω₃ ⋐ ω₄ ⋐ ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NestedIntervals<T> {
    pub omega: (T, T),
    pub omega4: (T, T),
    pub omega3: (T, T),
    pub omega2: (T, T),
}

impl<T: Real> NestedIntervals<T> {
    /// Concentric split of `ω` with four equal collars of width `|ω|/8`.
    pub fn concentric(omega: (T, T)) -> Self {
        let c = (omega.1 - omega.0) / lit(8.0);
        let shrink = |k: f64| (omega.0 + c * lit(k), omega.1 - c * lit(k));
        Self {
            omega,
            omega4: shrink(1.0),
            omega3: shrink(2.0),
            omega2: shrink(3.0),
        }
    }

    /// Strict nesting with at least two grid nodes in every collar.
    pub fn validate(&self, grid: &SpaceGrid<T>) -> Result<()> {
        let chain = [self.omega, self.omega4, self.omega3, self.omega2];
        for w in chain.windows(2) {
            let (outer, inner) = (w[0], w[1]);
            if !(outer.0 < inner.0 && inner.0 < inner.1 && inner.1 < outer.1) {
                return Err(HeatError::Nesting(format!(
                    "({}, {}) is not strictly inside ({}, {})",
                    inner.0, inner.1, outer.0, outer.1
                )));
            }
            for (lo, hi) in [(outer.0, inner.0), (inner.1, outer.1)] {
                let nodes = (0..grid.n).filter(|&i| {
                    let x = grid.node(i);
                    x > lo && x < hi
                });
                if nodes.count() < 2 {
                    return Err(HeatError::Nesting(format!(
                        "collar ({lo}, {hi}) holds fewer than 2 grid nodes"
                    )));
                }
            }
        }
        if !(grid.a <= self.omega.0 && self.omega.1 <= grid.b) {
            return Err(HeatError::Nesting("ω leaves the domain".into()));
        }
        Ok(())
    }
}

/// Discrete `C^{α,α/2}` norm: sup plus the localized Hölder seminorm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderNorm<T> {
    pub sup: T,
    /// Maximum over pairs within the locality radius; a lower bound for the
    /// full seminorm.
    pub seminorm: T,
    pub total: T,
}

/// Localized Hölder norm over pairs at most `radius.0` nodes and `radius.1`
/// levels apart, distance `|Δx| + |Δt|^{1/2}`.
pub fn holder_norm<T: Real>(
    field: &SpaceTimeField<T>,
    alpha: T,
    radius: (usize, usize),
) -> Result<HolderNorm<T>> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(HeatError::InvalidParameter(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let g = &field.grid;
    let tg = &field.tg;
    let (rx, rt) = radius;
    let sup = field.max_abs();
    let xdist: Vec<T> = (0..=rx).map(|k| from_usize::<T>(k) * g.h).collect();
    let tdist: Vec<T> = (0..=rt)
        .map(|k| (from_usize::<T>(k) * tg.dt).sqrt())
        .collect();
    let mut semi = T::zero();
    for n in 0..=tg.steps {
        for i in 0..g.n {
            let f = field.levels[n][i];
            for dn in 0..=rt.min(tg.steps - n) {
                let row = &field.levels[n + dn];
                let lo = if dn == 0 { i + 1 } else { i.saturating_sub(rx) };
                let hi = (i + rx).min(g.n - 1);
                for (j, &other) in row.iter().enumerate().take(hi + 1).skip(lo) {
                    let d = xdist[i.abs_diff(j)] + tdist[dn];
                    let q = (f - other).abs() / d.powf(alpha);
                    if q > semi {
                        semi = q;
                    }
                }
            }
        }
    }
    Ok(HolderNorm {
        sup,
        seminorm: semi,
        total: sup + semi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularControlOptions<T> {
    pub hum: HumOptions<T>,
    pub ramp_fraction: T,
    pub alpha: T,
    pub holder_radius: (usize, usize),
    /// Free evolution over the first `δT` before the construction starts.
    pub preroll: Option<T>,
}

impl<T: Real> Default for RegularControlOptions<T> {
    fn default() -> Self {
        Self {
            hum: HumOptions::default(),
            ramp_fraction: lit(0.25),
            alpha: lit(0.5),
            holder_radius: (8, 8),
            preroll: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegularControl<T> {
    /// Node-level control `h(x_i, t_n)`, supported in `ω`.
    pub h_reg: SpaceTimeField<T>,
    pub y: SpaceTimeField<T>,
    /// `‖D_t y − Δ_h ȳ + V ȳ − h̄‖` in the discrete `L²(Q_T)` norm.
    pub residual_norm: T,
    pub holder: HolderNorm<T>,
    pub cost_l2: T,
    /// `‖y(T)‖ / ‖y0‖`.
    pub terminal_ratio: T,
    pub hum_terminal_ratio: T,
    pub hum_cg_iterations: usize,
    pub masks: NestedIntervals<T>,
    pub chi: TimeCutoff<T>,
    pub phi: SpaceCutoff<T>,
    /// End of the horizon used for the inner HUM control.
    pub hum_horizon: T,
    pub preroll_levels: usize,
}

/// Smooth control on `ω` built from a HUM control on `ω₂`:
/// `ŷ = ỹ − χu`, `y = (1−φ)ŷ + χu`, `h = φχ′u + φ″ŷ + 2φ′∂ₓŷ`,
/// where `u` is the free solution and `(ỹ, h̃)` the HUM pair on `ω₂`.
///
/// The HUM pair is computed on the horizon `(1 − r/2)T` and continued by zero,
/// which makes `ŷ(T) = 0` exactly.
pub fn regular_control<T: Real>(
    prop: &Propagator<T>,
    y0: &[T],
    masks: &NestedIntervals<T>,
    opts: &RegularControlOptions<T>,
) -> Result<RegularControl<T>> {
    masks.validate(&prop.grid)?;
    let grid = prop.grid;
    let steps = prop.tg.steps;
    let dt = prop.tg.dt;

    let pre = match opts.preroll {
        None => 0,
        Some(d) if d > T::zero() && d < T::one() => (to_f64(d) * steps as f64).round() as usize,
        Some(d) => {
            return Err(HeatError::InvalidParameter(format!(
                "preroll must lie in (0,1), got {d}"
            )))
        }
    };
    let free = prop.forward(y0, None)?;
    let rest = steps - pre;
    if rest < 4 {
        return Err(HeatError::InvalidParameter(
            "too few steps after preroll".into(),
        ));
    }
    let tg = TimeGrid::new(from_usize::<T>(rest) * dt, rest)?;
    let sub = Propagator::from_midstep(grid, tg, prop.vmid[pre..].to_vec(), false)?;
    let start = free.levels[pre].clone();
    let u = SpaceTimeField {
        grid,
        tg,
        levels: free.levels[pre..].to_vec(),
    };

    let chi = build_chi(tg.t_final, opts.ramp_fraction)?;
    let phi = build_phi(&grid, masks.omega4, masks.omega)?;

    // HUM on ω₂ over a shortened horizon, continued by zero.
    let r = to_f64(opts.ramp_fraction);
    let off_level = ((1.0 - r) * rest as f64).ceil() as usize;
    let hum_steps =
        (((1.0 - 0.5 * r) * rest as f64).ceil() as usize).clamp(off_level.min(rest), rest);
    let hum_tg = TimeGrid::new(from_usize::<T>(hum_steps) * dt, hum_steps)?;
    let hum_prop = Propagator::from_midstep(grid, hum_tg, sub.vmid[..hum_steps].to_vec(), false)?;
    let region = ObservationRegion::new(
        SpaceMask::new(&grid, &[masks.omega2])?,
        TimeSet::full(&hum_tg),
    )?;
    let hum = hum_solve(&hum_prop, &region, &start, &opts.hum)?;
    let mut y_tilde = hum.trajectory.levels.clone();
    y_tilde.truncate(hum_steps);
    y_tilde.resize(rest + 1, vec![T::zero(); grid.n]);

    let cut: Vec<(T, T, T)> = (0..grid.n).map(|i| phi.eval(grid.node(i))).collect();
    let mut y_levels = Vec::with_capacity(rest + 1);
    let mut h_levels = Vec::with_capacity(rest + 1);
    for n in 0..=rest {
        let t = tg.time(n);
        let (c, dc) = (chi.value(t), chi.derivative(t));
        let un = &u.levels[n];
        let yhat: Vec<T> = y_tilde[n]
            .iter()
            .zip(un)
            .map(|(&a, &b)| a - c * b)
            .collect();
        let grad = centered_gradient(&yhat, grid.h);
        let two: T = lit(2.0);
        y_levels.push(
            (0..grid.n)
                .map(|i| (T::one() - cut[i].0) * yhat[i] + c * un[i])
                .collect::<Vec<T>>(),
        );
        h_levels.push(
            (0..grid.n)
                .map(|i| {
                    let (p, dp, d2p) = cut[i];
                    if p == T::zero() && dp == T::zero() && d2p == T::zero() {
                        T::zero()
                    } else {
                        p * dc * un[i] + d2p * yhat[i] + two * dp * grad[i]
                    }
                })
                .collect::<Vec<T>>(),
        );
    }
    // h(·,0) and h(·,T) vanish identically by construction; pin the rounding.
    for n in [0, rest] {
        h_levels[n].fill(T::zero());
    }
    let mut y = SpaceTimeField {
        grid,
        tg: prop.tg,
        levels: free.levels[..pre].to_vec(),
    };
    y.levels.extend(y_levels);
    let mut h_reg = SpaceTimeField {
        grid,
        tg: prop.tg,
        levels: vec![vec![T::zero(); grid.n]; pre],
    };
    h_reg.levels.extend(h_levels);

    let h_half = HalfStepSource {
        values: (0..steps).map(|n| h_reg.midpoint(n)).collect(),
    };
    let residual_norm = prop.residual(&y, Some(&h_half)).l2_norm(&grid, &prop.tg);
    let holder = holder_norm(&h_reg, opts.alpha, opts.holder_radius)?;
    let cost_l2 = h_half.l2_norm(&grid, &prop.tg);
    let y0_norm = grid.norm(y0);
    let terminal_ratio = if y0_norm > T::zero() {
        grid.norm(y.terminal()) / y0_norm
    } else {
        T::zero()
    };
    Ok(RegularControl {
        h_reg,
        y,
        residual_norm,
        holder,
        cost_l2,
        terminal_ratio,
        hum_terminal_ratio: hum.terminal_ratio,
        hum_cg_iterations: hum.cg_iterations,
        masks: *masks,
        chi,
        phi,
        hum_horizon: hum_tg.t_final + from_usize::<T>(pre) * dt,
        preroll_levels: pre,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    fn setup(n: usize, steps: usize, t: f64) -> Propagator<f64> {
        Propagator::new(
            SpaceGrid::new(0.0, 1.0, n).unwrap(),
            TimeGrid::new(t, steps).unwrap(),
            &Potential::constant(0.0),
        )
        .unwrap()
    }

    #[test]
    fn smoothstep_endpoints_and_integral() {
        assert_eq!(smoothstep(0.0), (0.0, 0.0, 0.0));
        assert_eq!(smoothstep(1.0), (1.0, 0.0, 0.0));
        let (s, _, d2) = smoothstep(0.5f64);
        assert!((s - 0.5).abs() < 1e-15 && d2.abs() < 1e-12);
        // finite-difference consistency of S′ and S″
        let x = 0.37f64;
        let e = 1e-5;
        let (sp, sm) = (smoothstep(x + e), smoothstep(x - e));
        let (_, d1, d2) = smoothstep(x);
        assert!(((sp.0 - sm.0) / (2.0 * e) - d1).abs() < 1e-8);
        assert!(((sp.1 - sm.1) / (2.0 * e) - d2).abs() < 1e-8);
    }

    #[test]
    fn chi_plateaus_and_total_drop() {
        let chi = build_chi(2.0f64, 0.2).unwrap();
        assert_eq!(chi.value(0.0), 1.0);
        assert_eq!(chi.value(2.0), 0.0);
        assert_eq!(chi.derivative(0.1), 0.0);
        assert_eq!(chi.derivative(1.9), 0.0);
        // composite Simpson on the exact polynomial ramp
        let m = 2000;
        let (a, b) = (0.4, 1.6);
        let hh = (b - a) / m as f64;
        let mut s = chi.derivative(a) + chi.derivative(b);
        for k in 1..m {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * chi.derivative(a + k as f64 * hh);
        }
        assert!((s * hh / 3.0 + 1.0).abs() < 1e-10);
        assert!(build_chi(1.0, 0.5).is_err());
    }

    #[test]
    fn phi_support_range_and_laplacian() {
        for n in [63usize, 127, 255] {
            let g = SpaceGrid::new(0.0, 1.0, n).unwrap();
            let phi = build_phi(&g, (0.4, 0.6), (0.2, 0.8)).unwrap();
            let vals: Vec<f64> = g.nodes().iter().map(|&x| phi.eval(x).0).collect();
            for (i, &v) in vals.iter().enumerate() {
                assert!((0.0..=1.0).contains(&v));
                let x = g.node(i);
                if !(0.2..0.8).contains(&x) {
                    assert_eq!(phi.eval(x), (0.0, 0.0, 0.0));
                }
            }
        }
        let err = |n: usize| {
            let g = SpaceGrid::new(0.0, 1.0, n).unwrap();
            let phi = build_phi(&g, (0.4, 0.6), (0.2, 0.8)).unwrap();
            let vals: Vec<f64> = g.nodes().iter().map(|&x| phi.eval(x).0).collect();
            let lap = crate::pde::laplacian(&vals, g.h);
            (0..n)
                .map(|i| (lap[i] - phi.eval(g.node(i)).2).abs())
                .fold(0.0, f64::max)
        };
        let slope = (err(255) / err(1023)).log2() / 2.0;
        assert!(slope > 1.8, "slope {slope}");
        let g = SpaceGrid::new(0.0, 1.0, 15).unwrap();
        assert!(build_phi(&g, (0.1, 0.9), (0.2, 0.8)).is_err());
    }

    #[test]
    fn holder_of_constant_and_linear_fields() {
        let g = SpaceGrid::new(0.0f64, 1.0, 20).unwrap();
        let tg = TimeGrid::new(1.0, 10).unwrap();
        let c = SpaceTimeField::from_fn(g, tg, |_, _| 3.0);
        let hn = holder_norm(&c, 0.5, (8, 8)).unwrap();
        assert_eq!((hn.sup, hn.seminorm), (3.0, 0.0));

        let lin = SpaceTimeField::from_fn(g, tg, |x, _| x);
        let hn = holder_norm(&lin, 0.5, (8, 8)).unwrap();
        assert!((hn.seminorm - (8.0 * g.h).sqrt()).abs() < 1e-14);
        assert!(holder_norm(&lin, 1.0, (8, 8)).is_err());
    }

    #[test]
    fn holder_brute_force_on_tiny_grid() {
        let g = SpaceGrid::new(0.0f64, 1.0, 5).unwrap();
        let tg = TimeGrid::new(0.5, 4).unwrap();
        let f = SpaceTimeField::from_fn(g, tg, |x, t| (3.0 * x).sin() * (-t).exp() + x * t);
        let alpha = 0.3;
        let mut expect = 0.0f64;
        for n1 in 0..=4 {
            for n2 in 0..=4 {
                for i in 0..5 {
                    for j in 0..5 {
                        if (n1, i) == (n2, j) {
                            continue;
                        }
                        let d = (g.node(i) - g.node(j)).abs()
                            + (tg.time(n1) - tg.time(n2)).abs().sqrt();
                        expect =
                            expect.max((f.levels[n1][i] - f.levels[n2][j]).abs() / d.powf(alpha));
                    }
                }
            }
        }
        let hn = holder_norm(&f, alpha, (10, 10)).unwrap();
        assert!((hn.seminorm - expect).abs() < 1e-13);
    }

    #[test]
    fn hum_zero_data() {
        let p = setup(16, 32, 0.5);
        let region = ObservationRegion::new(
            SpaceMask::new(&p.grid, &[(0.3, 0.7)]).unwrap(),
            TimeSet::full(&p.tg),
        )
        .unwrap();
        let sol = hum_solve(&p, &region, &[0.0; 16], &HumOptions::default()).unwrap();
        assert!(sol.q_terminal.iter().all(|&v| v == 0.0));
        assert_eq!(sol.trajectory.max_abs(), 0.0);
        assert_eq!(
            cost_report(&sol, &PotentialNorms::zero(), 1.0).log_ratio,
            None
        );
    }

    #[test]
    fn hum_drives_mode_to_rest_and_trace_is_reproducible() {
        let p = setup(32, 64, 0.5);
        let region = ObservationRegion::new(
            SpaceMask::new(&p.grid, &[(0.3, 0.7)]).unwrap(),
            TimeSet::full(&p.tg),
        )
        .unwrap();
        let y0 = p.grid.sine_mode(1);
        let sol = hum_solve(&p, &region, &y0, &HumOptions::default()).unwrap();
        assert!(sol.terminal_ratio < 1e-6, "ratio {}", sol.terminal_ratio);
        let again = control_source(&p.adjoint(&sol.q_terminal).unwrap(), &region);
        assert_eq!(again, sol.control);
        for row in &sol.control.values {
            for (i, &v) in row.iter().enumerate() {
                if !region.mask.contains(i) {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn regular_control_structure() {
        let p = setup(47, 96, 0.5);
        let masks = NestedIntervals::concentric((0.2, 0.8));
        let y0 = p.grid.sine_mode(1);
        let rc = regular_control(&p, &y0, &masks, &RegularControlOptions::default()).unwrap();
        assert!(rc.h_reg.levels[0].iter().all(|&v| v == 0.0));
        assert!(rc.h_reg.terminal().iter().all(|&v| v == 0.0));
        assert!(rc.y.terminal().iter().all(|&v| v == 0.0));
        for lvl in &rc.h_reg.levels {
            for (i, &v) in lvl.iter().enumerate() {
                let x = p.grid.node(i);
                if !(0.2..0.8).contains(&x) {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert!(rc.residual_norm.is_finite());

        let zero =
            regular_control(&p, &[0.0; 47], &masks, &RegularControlOptions::default()).unwrap();
        assert_eq!(zero.h_reg.max_abs(), 0.0);
        assert_eq!(zero.y.max_abs(), 0.0);
    }

    #[test]
    fn nesting_is_validated() {
        let g = SpaceGrid::new(0.0, 1.0, 15).unwrap();
        assert!(NestedIntervals::concentric((0.2, 0.8))
            .validate(&g)
            .is_err());
        let g = SpaceGrid::new(0.0, 1.0, 63).unwrap();
        assert!(NestedIntervals::concentric((0.2, 0.8)).validate(&g).is_ok());
    }
}
