//! Observability constants measured as generalized eigenvalues of the pair
//! (initial-energy operator, Gramian), and the predicted log-bounds they are
//! compared against.

use crate::error::{HeatError, Result};
use crate::linalg::{conjugate_gradient, dot, norm};
use crate::mesh::{SpaceMask, TimeSet};
use crate::pde::{control_source, Propagator};
use crate::potential::PotentialNorms;
use crate::random;
use crate::scalar::{from_usize, lit, Real};

/// Observation set `ω × E`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRegion<T> {
    pub mask: SpaceMask<T>,
    pub times: TimeSet<T>,
}

impl<T: Real> ObservationRegion<T> {
    pub fn new(mask: SpaceMask<T>, times: TimeSet<T>) -> Result<Self> {
        if mask.is_empty() {
            return Err(HeatError::EmptyMask);
        }
        let total: T = times.weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(HeatError::EmptyTimeSet);
        }
        Ok(Self { mask, times })
    }
}

/// `Λ q_T`: adjoint solve, masked trace re-injected as a source, forward solve
/// from rest. `⟨Λq, p⟩_h = Σ_n w_n h Σ_{i∈ω} q̄_i p̄_i`.
pub fn gramian_apply<T: Real>(
    prop: &Propagator<T>,
    region: &ObservationRegion<T>,
    q_terminal: &[T],
) -> Result<Vec<T>> {
    let q = prop.adjoint(q_terminal)?;
    let f = control_source(&q, region);
    prop.forward_terminal(&vec![T::zero(); prop.grid.n], Some(&f))
}

/// `S₀ᵀ S₀ q_T` where `S₀ q_T = q(0)`.
pub fn initial_energy_apply<T: Real>(prop: &Propagator<T>, q_terminal: &[T]) -> Result<Vec<T>> {
    let q0 = prop.adjoint(q_terminal)?.levels.swap_remove(0);
    prop.forward_terminal(&q0, None)
}

/// Result of a generalized power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilMax<T> {
    /// Largest generalized eigenvalue `ρ` of `(A, B + εI)`.
    pub value: T,
    pub vector: Vec<T>,
    pub iterations: usize,
    /// `‖A q − ρ D q‖ / (ρ ‖D q‖)` at the returned iterate.
    pub residual: T,
    pub eps: T,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PencilOptions<T> {
    /// Denominator shift; `None` picks `1e−12 · trace(B)/n` from 8 probes.
    pub eps: Option<T>,
    /// Relative change of successive Rayleigh quotients.
    pub tol: T,
    pub residual_tol: T,
    pub max_iter: usize,
    pub cg_max_iter: usize,
    pub seed: u64,
}

impl<T: Real> Default for PencilOptions<T> {
    fn default() -> Self {
        Self {
            eps: None,
            tol: lit(1e-10),
            residual_tol: lit(1e-6),
            max_iter: 200,
            cg_max_iter: 2000,
            seed: 0,
        }
    }
}

const PROBES: usize = 8;

/// Hutchinson estimate of `trace(B)` with Rademacher probes.
pub fn trace_estimate<T, F>(mut apply: F, n: usize, probes: usize, seed: u64) -> Result<T>
where
    T: Real,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    let mut rng = random::stream(seed, 1);
    let mut acc = T::zero();
    for _ in 0..probes {
        let z: Vec<T> = random::rademacher_vec(&mut rng, n);
        acc += dot(&z, &apply(&z)?);
    }
    Ok(acc / from_usize(probes.max(1)))
}

/// Largest generalized eigenvalue of `(A, B + εI)` for symmetric `A ⪰ 0`,
/// `B ⪰ 0`, by inverse iteration `q ← (B + εI)⁻¹ A q` with inner CG.
///
/// Inner solves run at 1e−3 relative until the quotient settles, then at
/// 1e−8; convergence is only declared after two tight steps.
pub fn pencil_max<T, FA, FB>(
    mut num: FA,
    mut den: FB,
    n: usize,
    opts: &PencilOptions<T>,
) -> Result<PencilMax<T>>
where
    T: Real,
    FA: FnMut(&[T]) -> Result<Vec<T>>,
    FB: FnMut(&[T]) -> Result<Vec<T>>,
{
    if !(opts.tol > T::zero()) || opts.max_iter == 0 {
        return Err(HeatError::InvalidParameter(
            "pencil iteration needs tol > 0 and max_iter > 0".into(),
        ));
    }
    let eps = match opts.eps {
        Some(e) if e < T::zero() => {
            return Err(HeatError::InvalidParameter(format!(
                "eps must be nonnegative, got {e}"
            )))
        }
        Some(e) => e,
        None => {
            let tr = trace_estimate(&mut den, n, PROBES, opts.seed)?;
            lit::<T>(1e-12) * tr / from_usize(n)
        }
    };
    let mut apply_d = |x: &[T]| -> Result<Vec<T>> {
        let mut y = den(x)?;
        for (yi, &xi) in y.iter_mut().zip(x) {
            *yi += eps * xi;
        }
        Ok(y)
    };

    let mut rng = random::stream(opts.seed, 0);
    let mut q: Vec<T> = random::normal_vec(&mut rng, n);
    normalize(&mut q);

    let loose: T = lit(1e-3);
    let tight: T = lit(1e-8);
    let mut tight_steps = 0;
    let mut prev = T::nan();
    let mut best = PencilMax {
        value: T::zero(),
        vector: q.clone(),
        iterations: 0,
        residual: T::infinity(),
        eps,
        converged: false,
    };
    for it in 1..=opts.max_iter {
        let aq = num(&q)?;
        let dq = apply_d(&q)?;
        let dqq = dot(&q, &dq);
        if !(dqq > T::zero()) {
            return Err(HeatError::InvalidParameter(
                "denominator form is not positive definite; use eps > 0".into(),
            ));
        }
        let rho = dot(&q, &aq) / dqq;
        let residual = if rho > T::zero() {
            let r: Vec<T> = aq.iter().zip(&dq).map(|(&a, &d)| a - rho * d).collect();
            norm(&r) / (rho * norm(&dq))
        } else {
            T::infinity()
        };
        let change = ((rho - prev) / rho).abs();
        best = PencilMax {
            value: rho,
            vector: q.clone(),
            iterations: it,
            residual,
            eps,
            converged: false,
        };
        if rho == T::zero() {
            // A q = 0 for the start vector of a PSD pencil: A vanishes on
            // everything reachable, so the maximum is 0.
            if norm(&aq) == T::zero() {
                best.converged = true;
                return Ok(best);
            }
        }
        if tight_steps >= 2 && change < opts.tol && residual < opts.residual_tol {
            best.converged = true;
            return Ok(best);
        }
        let use_tight = tight_steps > 0 || change < lit(1e-4) || it + 2 >= opts.max_iter;
        let tol = if use_tight { tight } else { loose };
        let guess: Vec<T> = q.iter().map(|&v| v * rho).collect();
        let cg = conjugate_gradient(&mut apply_d, &aq, Some(guess), tol, opts.cg_max_iter)?;
        if use_tight {
            tight_steps += 1;
        }
        q = cg.x;
        if !normalize(&mut q) {
            return Ok(best);
        }
        prev = rho;
    }
    Ok(best)
}

fn normalize<T: Real>(q: &mut [T]) -> bool {
    let nq = norm(q);
    if !(nq > T::zero()) || !nq.is_finite() {
        return false;
    }
    for v in q.iter_mut() {
        *v /= nq;
    }
    true
}

/// Measured constant `K` in `‖q(0)‖ ≤ K ‖q‖_{L²(ω×E)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservabilityEstimate<T> {
    pub c_obs: T,
    pub iterations: usize,
    pub pencil_residual: T,
    pub regularization_eps: T,
    pub converged: bool,
}

impl<T: Real> From<&PencilMax<T>> for ObservabilityEstimate<T> {
    fn from(p: &PencilMax<T>) -> Self {
        Self {
            c_obs: p.value.max(T::zero()).sqrt(),
            iterations: p.iterations,
            pencil_residual: p.residual,
            regularization_eps: p.eps,
            converged: p.converged,
        }
    }
}

pub fn cobs_estimate<T: Real>(
    prop: &Propagator<T>,
    region: &ObservationRegion<T>,
    opts: &PencilOptions<T>,
) -> Result<ObservabilityEstimate<T>> {
    let p = pencil_max(
        |q| initial_energy_apply(prop, q),
        |q| gramian_apply(prop, region, q),
        prop.grid.n,
        opts,
    )?;
    Ok((&p).into())
}

/// Constants of the two-stage route: `‖q(0)‖ ≤ K₁ ‖q‖_{L²(Ω×(T/3,2T/3))}` and
/// `‖q‖_{L²(Ω×(T/3,2T/3))} ≤ K₂ ‖q‖_{L²(ω×E)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStageEstimate<T> {
    pub interior: ObservabilityEstimate<T>,
    pub localization: ObservabilityEstimate<T>,
    pub product: T,
}

pub fn two_stage_estimate<T: Real>(
    prop: &Propagator<T>,
    region: &ObservationRegion<T>,
    opts: &PencilOptions<T>,
) -> Result<TwoStageEstimate<T>> {
    let t = prop.tg.t_final;
    let three: T = lit(3.0);
    let middle = ObservationRegion::new(
        SpaceMask::full(&prop.grid),
        TimeSet::new(&prop.tg, &[(t / three, t * lit(2.0) / three)])?,
    )?;
    let n = prop.grid.n;
    let interior: ObservabilityEstimate<T> = (&pencil_max(
        |q| initial_energy_apply(prop, q),
        |q| gramian_apply(prop, &middle, q),
        n,
        opts,
    )?)
        .into();
    let localization: ObservabilityEstimate<T> = (&pencil_max(
        |q| gramian_apply(prop, &middle, q),
        |q| gramian_apply(prop, region, q),
        n,
        opts,
    )?)
        .into();
    Ok(TwoStageEstimate {
        interior,
        localization,
        product: interior.c_obs * localization.c_obs,
    })
}

/// Predicted log-constant for Lipschitz potentials:
/// `C (1 + 1/T + T‖V‖∞ + ‖∇V‖∞^{1/2} + ‖∂ₜV‖∞^{1/3})`.
pub fn bound_new<T: Real>(t: T, n: &PotentialNorms<T>, c: T) -> T {
    c * (T::one() + t.recip() + t * n.sup + n.grad_sup.sqrt() + n.dt_sup.cbrt())
}

/// Classical log-constant `C (1 + 1/T + T‖V‖∞ + ‖V‖∞^{2/3})`.
pub fn bound_classical<T: Real>(t: T, n: &PotentialNorms<T>, c: T) -> T {
    c * (T::one() + t.recip() + t * n.sup + n.sup.powf(lit(2.0 / 3.0)))
}

/// Log-constant for a split `V = V₁ + V₂` with `V₁` Lipschitz and `V₂` merely
/// bounded. `sup_total` defaults to `‖V₁‖∞ + ‖V₂‖∞`.
pub fn bound_split<T: Real>(
    t: T,
    smooth: &PotentialNorms<T>,
    rough: &PotentialNorms<T>,
    sup_total: Option<T>,
    c: T,
) -> T {
    let sup = sup_total.unwrap_or(smooth.sup + rough.sup);
    c * (T::one()
        + t.recip()
        + t * sup
        + smooth.grad_sup.sqrt()
        + smooth.dt_sup.cbrt()
        + rough.sup.powf(lit(2.0 / 3.0)))
}

/// Log-constant for time-independent potentials and measurable `E`:
/// `C_E + T‖V₋‖∞ + C_Ω ‖V‖∞^{1/2}`.
pub fn bound_1d<T: Real>(t: T, n: &PotentialNorms<T>, c_e: T, c_domain: T) -> T {
    c_e + t * n.neg_sup + c_domain * n.sup.sqrt()
}

/// `E = (0, T)` form: `C_Ω (1/T + T‖V₋‖∞ + ‖V‖∞^{1/2})`.
pub fn bound_1d_full_time<T: Real>(t: T, n: &PotentialNorms<T>, c_domain: T) -> T {
    c_domain * (t.recip() + t * n.neg_sup + n.sup.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport<T> {
    pub log_bound_new: T,
    pub log_bound_classical: T,
    pub log_bound_split: Option<T>,
    pub log_bound_1d: Option<T>,
    pub chosen_c: T,
    /// `‖V‖∞ < 10`: outside the large-norm regime the bounds are stated for.
    pub small_norm: bool,
}

pub fn bound_report<T: Real>(
    t: T,
    n: &PotentialNorms<T>,
    c: T,
    split: Option<(&PotentialNorms<T>, &PotentialNorms<T>)>,
    one_d: Option<(T, T)>,
) -> BoundReport<T> {
    BoundReport {
        log_bound_new: bound_new(t, n, c),
        log_bound_classical: bound_classical(t, n, c),
        log_bound_split: split.map(|(s, r)| bound_split(t, s, r, Some(n.sup), c)),
        log_bound_1d: one_d.map(|(c_e, c_domain)| bound_1d(t, n, c_e, c_domain)),
        chosen_c: c,
        small_norm: n.below_large_norm_regime(),
    }
}

/// `‖y(t₂)‖ / (‖y(t)‖_ω^{1−δ} ‖y(t₁)‖^δ)` for `y` the free evolution of `f`,
/// with times given as level indices `l1 < l < l2`.
pub fn interpolation_check<T: Real>(
    prop: &Propagator<T>,
    f: &[T],
    levels: (usize, usize, usize),
    omega: &SpaceMask<T>,
    delta: T,
) -> Result<T> {
    let (l1, l, l2) = levels;
    if !(l1 < l && l < l2 && l2 <= prop.tg.steps) {
        return Err(HeatError::InvalidParameter(format!(
            "need t1 < t < t2 within the grid, got levels {l1}, {l}, {l2}"
        )));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return Err(HeatError::InvalidParameter(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    if prop.vmid.iter().flatten().any(|&v| v < T::zero()) {
        return Err(HeatError::InvalidParameter(
            "potential must be nonnegative".into(),
        ));
    }
    if f.iter().all(|&v| v == T::zero()) {
        return Err(HeatError::ZeroData("initial datum is zero".into()));
    }
    let y = prop.forward(f, None)?;
    let g = &prop.grid;
    let den =
        omega.norm(g, &y.levels[l]).powf(T::one() - delta) * g.norm(&y.levels[l1]).powf(delta);
    if den == T::zero() {
        return Err(HeatError::ZeroData("observed norm vanishes".into()));
    }
    Ok(g.norm(&y.levels[l2]) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{SpaceGrid, TimeGrid};
    use crate::potential::Potential;

    fn prop(n: usize, steps: usize, t: f64, v: f64) -> Propagator<f64> {
        Propagator::new(
            SpaceGrid::new(0.0, 1.0, n).unwrap(),
            TimeGrid::new(t, steps).unwrap(),
            &Potential::constant(v),
        )
        .unwrap()
    }

    fn region(
        p: &Propagator<f64>,
        omega: &[(f64, f64)],
        e: &[(f64, f64)],
    ) -> ObservationRegion<f64> {
        ObservationRegion::new(
            SpaceMask::new(&p.grid, omega).unwrap(),
            TimeSet::new(&p.tg, e).unwrap(),
        )
        .unwrap()
    }

    /// Per-mode values `(N_k, Λ_k)` of the scheme for a constant potential.
    fn mode_scalars(p: &Propagator<f64>, k: usize, v: f64) -> (f64, f64) {
        let mu = p.grid.sine_mode_eigenvalue(k) + v;
        let dt = p.tg.dt;
        let r = (1.0 - 0.5 * dt * mu) / (1.0 + 0.5 * dt * mu);
        let steps = p.tg.steps as i32;
        let lam: f64 = (0..steps)
            .map(|n| {
                let m = 0.5 * (r.powi(steps - n) + r.powi(steps - n - 1));
                dt * m * m
            })
            .sum();
        (r.powi(2 * steps), lam)
    }

    #[test]
    fn region_rejects_empty_mask() {
        let p = prop(7, 4, 1.0, 0.0);
        let err = ObservationRegion::new(
            SpaceMask::new(&p.grid, &[(0.9, 0.95)]).unwrap(),
            TimeSet::full(&p.tg),
        );
        assert_eq!(err.unwrap_err(), HeatError::EmptyMask);
    }

    #[test]
    fn gramian_single_mode_matches_scalar() {
        let p = prop(15, 24, 0.3, 4.0);
        let full = region(&p, &[(0.0, 1.0)], &[(0.0, 0.3)]);
        for k in [1, 3] {
            let phi = p.grid.sine_mode(k);
            let (nk, lk) = mode_scalars(&p, k, 4.0);
            let g = gramian_apply(&p, &full, &phi).unwrap();
            let e = initial_energy_apply(&p, &phi).unwrap();
            for i in 0..15 {
                assert!((g[i] - lk * phi[i]).abs() < 1e-13);
                assert!((e[i] - nk * phi[i]).abs() < 1e-13);
            }
        }
        assert!(gramian_apply(&p, &full, &[0.0; 15])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn gramian_symmetry() {
        let p = prop(20, 30, 0.5, -3.0);
        let reg = region(&p, &[(0.2, 0.5)], &[(0.1, 0.4)]);
        let a: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..20).map(|i| (i as f64 * 1.3).cos()).collect();
        let lhs = p.grid.inner(&gramian_apply(&p, &reg, &a).unwrap(), &b);
        let rhs = p.grid.inner(&gramian_apply(&p, &reg, &b).unwrap(), &a);
        assert!((lhs - rhs).abs() < 1e-13 * lhs.abs().max(1e-300));
    }

    #[test]
    fn full_region_matches_mode_oracle() {
        let p = prop(31, 256, 0.5, 10.0);
        let reg = region(&p, &[(0.0, 1.0)], &[(0.0, 0.5)]);
        let est = cobs_estimate(&p, &reg, &PencilOptions::default()).unwrap();
        assert!(est.converged);
        let eps = est.regularization_eps;
        let oracle = (1..=31)
            .map(|k| {
                let (nk, lk) = mode_scalars(&p, k, 10.0);
                nk / (lk + eps)
            })
            .fold(0.0, f64::max);
        let rel = (est.c_obs * est.c_obs - oracle).abs() / oracle;
        assert!(rel < 1e-6, "rel {rel}");
    }

    #[test]
    fn shrinking_the_time_set_raises_the_constant() {
        let p = prop(15, 64, 0.5, 0.0);
        let opts = PencilOptions {
            eps: Some(1e-12),
            ..Default::default()
        };
        let big = cobs_estimate(&p, &region(&p, &[(0.3, 0.7)], &[(0.0, 0.5)]), &opts).unwrap();
        let small = cobs_estimate(&p, &region(&p, &[(0.3, 0.7)], &[(0.1, 0.3)]), &opts).unwrap();
        assert!(big.converged && small.converged);
        assert!(small.c_obs >= big.c_obs);
    }

    #[test]
    fn two_stage_product_dominates_direct() {
        let p = prop(15, 96, 0.6, 0.0);
        let reg = region(&p, &[(0.3, 0.7)], &[(0.0, 0.6)]);
        let opts = PencilOptions {
            eps: Some(1e-12),
            ..Default::default()
        };
        let direct = cobs_estimate(&p, &reg, &opts).unwrap();
        let split = two_stage_estimate(&p, &reg, &opts).unwrap();
        assert!(split.product >= direct.c_obs * (1.0 - 1e-6));
    }

    #[test]
    fn bound_formulas() {
        let n = |sup: f64, grad: f64, dt: f64| PotentialNorms::new(sup, grad, dt, 0.0);
        assert_eq!(bound_new(1.0, &n(100.0, 0.0, 0.0), 1.0), 102.0);
        assert_eq!(bound_new(1.0, &n(0.0, 0.0, 0.0), 1.0), 2.0);
        assert!((bound_new(1.0, &n(0.0, 16.0, 27.0), 1.0) - 9.0).abs() < 1e-12);
        let cl = bound_classical(1.0, &n(100.0, 0.0, 0.0), 1.0);
        assert!((cl - (102.0 + 100f64.powf(2.0 / 3.0))).abs() < 1e-12);
        assert!((cl - 123.544).abs() < 1e-3);
        assert!(bound_new(1.0, &n(100.0, 0.0, 0.0), 1.0) < cl);

        let smooth = n(100.0, 0.0, 0.0);
        let rough = n(1.0, 0.0, 0.0);
        assert!((bound_split(1.0, &smooth, &rough, None, 1.0) - 104.0).abs() < 1e-12);
        let zero = PotentialNorms::zero();
        let v = n(7.0, 9.0, 8.0);
        assert_eq!(
            bound_split(0.5, &v, &zero, None, 2.0),
            bound_new(0.5, &v, 2.0)
        );
        assert!(
            (bound_split(0.5, &zero, &v, None, 2.0) - bound_classical(0.5, &n(7.0, 0.0, 0.0), 2.0))
                .abs()
                < 1e-12
        );

        assert_eq!(bound_1d_full_time(1.0, &n(100.0, 0.0, 0.0), 1.0), 11.0);
        let neg = PotentialNorms::new(4.0, 0.0, 0.0, 4.0);
        assert_eq!(bound_1d(2.0, &neg, 3.0, 1.0), 13.0);
    }

    #[test]
    fn interpolation_full_mask_is_at_most_one() {
        let p = prop(31, 40, 0.4, 3.0);
        let f: Vec<f64> = (0..31).map(|i| 1.0 + (i as f64 * 0.4).sin()).collect();
        let full = SpaceMask::full(&p.grid);
        for delta in [0.1, 0.5, 0.9] {
            let c = interpolation_check(&p, &f, (5, 20, 40), &full, delta).unwrap();
            assert!(c <= 1.0 + 1e-14);
        }
        assert!(matches!(
            interpolation_check(&p, &[0.0; 31], (0, 1, 2), &full, 0.5),
            Err(HeatError::ZeroData(_))
        ));
    }

    #[test]
    fn interpolation_single_mode_closed_form() {
        let p = prop(31, 40, 0.4, 0.0);
        let phi = p.grid.sine_mode(2);
        let omega = SpaceMask::new(&p.grid, &[(0.1, 0.45)]).unwrap();
        let (l1, l, l2) = (4, 16, 36);
        let delta = 0.3;
        let mu = p.grid.sine_mode_eigenvalue(2);
        let r: f64 = (1.0 - 0.5 * p.tg.dt * mu) / (1.0 + 0.5 * p.tg.dt * mu);
        let mass = p.grid.norm(&phi) / omega.norm(&p.grid, &phi);
        let expect =
            mass.powf(1.0 - delta) * r.powi((l2 - l) as i32) * r.powf(delta * (l - l1) as f64);
        let c = interpolation_check(&p, &phi, (l1, l, l2), &omega, delta).unwrap();
        assert!((c - expect).abs() < 1e-12 * expect);
    }
}
