//! Potential families `V(x, t)` and the norm bundle that enters every
//! observability and control bound.

use serde::{Deserialize, Serialize};

use crate::error::{HeatError, Result};
use crate::mesh::{SpaceGrid, TimeGrid};
use crate::scalar::{from_usize, lit, Real};

/// Spatial profile `V₀(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceProfile<T> {
    Constant {
        value: T,
    },
    /// `amplitude · sin(frequency · π · x)`
    Sin {
        amplitude: T,
        frequency: T,
    },
    /// `value` on `[lo, hi)`, zero elsewhere.
    Step {
        value: T,
        lo: T,
        hi: T,
    },
    /// Piecewise-linear interpolation of `values` at `x0 + j·dx`, held
    /// constant outside the sampled range.
    Samples {
        x0: T,
        dx: T,
        values: Vec<T>,
    },
}

/// Temporal profile `g(t)` of a separable potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile<T> {
    Constant {
        value: T,
    },
    /// `(1 + t)^beta`
    Poly1p {
        beta: T,
    },
    Samples {
        t0: T,
        dt: T,
        values: Vec<T>,
    },
}

/// Potential `V(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential<T> {
    Constant {
        value: T,
    },
    TimeIndependent {
        #[serde(rename = "V0")]
        profile: SpaceProfile<T>,
    },
    /// `V₀(x)·g(t)`
    Separable {
        #[serde(rename = "V0")]
        space: SpaceProfile<T>,
        g: TimeProfile<T>,
    },
    /// Bilinear interpolation of `values[j][i]` at `(x[i], t[j])`.
    Sampled {
        x: Vec<T>,
        t: Vec<T>,
        values: Vec<Vec<T>>,
    },
    Scaled {
        factor: T,
        base: Box<Potential<T>>,
    },
    Shifted {
        offset: T,
        base: Box<Potential<T>>,
    },
}

/// Range of a function together with the sup of its derivative when a
/// closed form is available.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bounds<T> {
    min: T,
    max: T,
    deriv_sup: Option<T>,
}

impl<T: Real> Bounds<T> {
    fn sup_abs(&self) -> T {
        self.min.abs().max(self.max.abs())
    }
}

/// Range of `sin` over `[lo, hi]`.
fn sin_range<T: Real>(lo: T, hi: T) -> (T, T) {
    let two_pi = T::PI() + T::PI();
    let hits = |target: T| {
        // smallest target + 2kπ ≥ lo
        let k = ((lo - target) / two_pi).ceil();
        target + k * two_pi <= hi
    };
    let (s0, s1) = (lo.sin(), hi.sin());
    let max = if hits(T::FRAC_PI_2()) {
        T::one()
    } else {
        s0.max(s1)
    };
    let min = if hits(-T::FRAC_PI_2()) {
        -T::one()
    } else {
        s0.min(s1)
    };
    (min, max)
}

fn scale_range<T: Real>(factor: T, (lo, hi): (T, T)) -> (T, T) {
    if factor >= T::zero() {
        (factor * lo, factor * hi)
    } else {
        (factor * hi, factor * lo)
    }
}

/// Locates `x` in sorted coordinates; returns `(j, w)` with the value
/// `(1 − w)·v[j] + w·v[j + 1]`. Exact hits return `w = 0`.
fn locate<T: Real>(coords: &[T], x: T) -> (usize, T) {
    let n = coords.len();
    if n == 1 || x <= coords[0] {
        return (0, T::zero());
    }
    if x >= coords[n - 1] {
        return (n - 1, T::zero());
    }
    let j = match coords.binary_search_by(|c| c.partial_cmp(&x).unwrap()) {
        Ok(j) => return (j, T::zero()),
        Err(j) => j - 1,
    };
    let span = coords[j + 1] - coords[j];
    let tol = T::epsilon() * lit(64.0) * (coords[j].abs() + coords[j + 1].abs() + T::one());
    if (x - coords[j]).abs() <= tol {
        return (j, T::zero());
    }
    if (coords[j + 1] - x).abs() <= tol {
        return (j + 1, T::zero());
    }
    (j, (x - coords[j]) / span)
}

fn interp<T: Real>(values: &[T], (j, w): (usize, T)) -> T {
    if w == T::zero() {
        values[j]
    } else {
        values[j] + w * (values[j + 1] - values[j])
    }
}

fn uniform_coords<T: Real>(x0: T, dx: T, n: usize) -> Vec<T> {
    (0..n).map(|j| x0 + from_usize::<T>(j) * dx).collect()
}

/// Range and derivative sup of a piecewise-linear table restricted to `[lo, hi]`.
fn piecewise_linear_bounds<T: Real>(coords: &[T], values: &[T], lo: T, hi: T) -> Bounds<T> {
    let mut min = T::infinity();
    let mut max = T::neg_infinity();
    let mut push = |v: T| {
        min = min.min(v);
        max = max.max(v);
    };
    push(interp(values, locate(coords, lo)));
    push(interp(values, locate(coords, hi)));
    let mut slope = T::zero();
    for j in 0..coords.len() {
        if coords[j] > lo && coords[j] < hi {
            push(values[j]);
        }
        if j + 1 < coords.len() && coords[j + 1] > lo && coords[j] < hi {
            slope = slope.max(((values[j + 1] - values[j]) / (coords[j + 1] - coords[j])).abs());
        }
    }
    Bounds {
        min,
        max,
        deriv_sup: Some(slope),
    }
}

impl<T: Real> SpaceProfile<T> {
    pub fn value(&self, x: T) -> T {
        match self {
            Self::Constant { value } => *value,
            Self::Sin {
                amplitude,
                frequency,
            } => *amplitude * (*frequency * T::PI() * x).sin(),
            Self::Step { value, lo, hi } => {
                if x >= *lo && x < *hi {
                    *value
                } else {
                    T::zero()
                }
            }
            Self::Samples { x0, dx, values } => {
                let coords = uniform_coords(*x0, *dx, values.len());
                interp(values, locate(&coords, x))
            }
        }
    }

    /// Derivative where it exists classically (zero on the flat parts of a step).
    pub fn derivative(&self, x: T) -> T {
        match self {
            Self::Constant { .. } | Self::Step { .. } => T::zero(),
            Self::Sin {
                amplitude,
                frequency,
            } => *amplitude * *frequency * T::PI() * (*frequency * T::PI() * x).cos(),
            Self::Samples { x0, dx, values } => {
                let n = values.len();
                if n < 2 {
                    return T::zero();
                }
                let s = (x - *x0) / *dx;
                if s < T::zero() || s > from_usize(n - 1) {
                    return T::zero();
                }
                let j = s.floor().to_usize().unwrap_or(0).min(n - 2);
                (values[j + 1] - values[j]) / *dx
            }
        }
    }

    fn bounds(&self, lo: T, hi: T) -> Bounds<T> {
        match self {
            Self::Constant { value } => Bounds {
                min: *value,
                max: *value,
                deriv_sup: Some(T::zero()),
            },
            Self::Sin {
                amplitude,
                frequency,
            } => {
                let w = *frequency * T::PI();
                let (t0, t1) = if w >= T::zero() {
                    (w * lo, w * hi)
                } else {
                    (w * hi, w * lo)
                };
                let (min, max) = scale_range(*amplitude, sin_range(t0, t1));
                let (cmin, cmax) = sin_range(t0 + T::FRAC_PI_2(), t1 + T::FRAC_PI_2());
                Bounds {
                    min,
                    max,
                    deriv_sup: Some((*amplitude * w).abs() * cmin.abs().max(cmax.abs())),
                }
            }
            Self::Step {
                value,
                lo: s0,
                hi: s1,
            } => {
                let inside = *s1 > lo && *s0 <= hi;
                let covers = *s0 <= lo && *s1 > hi;
                let (mut min, mut max) = (T::infinity(), T::neg_infinity());
                if inside {
                    min = min.min(*value);
                    max = max.max(*value);
                }
                if !covers {
                    min = min.min(T::zero());
                    max = max.max(T::zero());
                }
                let jumps = (*s0 > lo && *s0 < hi) || (*s1 > lo && *s1 < hi);
                Bounds {
                    min,
                    max,
                    deriv_sup: if jumps && *value != T::zero() {
                        None
                    } else {
                        Some(T::zero())
                    },
                }
            }
            Self::Samples { x0, dx, values } => {
                piecewise_linear_bounds(&uniform_coords(*x0, *dx, values.len()), values, lo, hi)
            }
        }
    }
}

impl<T: Real> TimeProfile<T> {
    pub fn value(&self, t: T) -> T {
        match self {
            Self::Constant { value } => *value,
            Self::Poly1p { beta } => (T::one() + t).powf(*beta),
            Self::Samples { t0, dt, values } => {
                let coords = uniform_coords(*t0, *dt, values.len());
                interp(values, locate(&coords, t))
            }
        }
    }

    pub fn derivative(&self, t: T) -> T {
        match self {
            Self::Constant { .. } => T::zero(),
            Self::Poly1p { beta } => *beta * (T::one() + t).powf(*beta - T::one()),
            Self::Samples { t0, dt, values } => {
                let n = values.len();
                if n < 2 {
                    return T::zero();
                }
                let s = (t - *t0) / *dt;
                if s < T::zero() || s > from_usize(n - 1) {
                    return T::zero();
                }
                let j = s.floor().to_usize().unwrap_or(0).min(n - 2);
                (values[j + 1] - values[j]) / *dt
            }
        }
    }

    fn bounds(&self, t_final: T) -> Bounds<T> {
        match self {
            Self::Constant { value } => Bounds {
                min: *value,
                max: *value,
                deriv_sup: Some(T::zero()),
            },
            Self::Poly1p { beta } => {
                let end = (T::one() + t_final).powf(*beta);
                let slope_end = (*beta * (T::one() + t_final).powf(*beta - T::one())).abs();
                Bounds {
                    min: end.min(T::one()),
                    max: end.max(T::one()),
                    deriv_sup: Some(beta.abs().max(slope_end)),
                }
            }
            Self::Samples { t0, dt, values } => piecewise_linear_bounds(
                &uniform_coords(*t0, *dt, values.len()),
                values,
                T::zero(),
                t_final,
            ),
        }
    }
}

/// Closed-form range of `V` over `Q̄_T` plus derivative sups when known.
#[derive(Debug, Clone, Copy)]
struct PotentialBounds<T> {
    min: T,
    max: T,
    grad_sup: Option<T>,
    dt_sup: Option<T>,
}

impl<T: Real> Potential<T> {
    pub fn constant(value: T) -> Self {
        Self::Constant { value }
    }

    pub fn time_independent(profile: SpaceProfile<T>) -> Self {
        Self::TimeIndependent { profile }
    }

    pub fn separable(space: SpaceProfile<T>, g: TimeProfile<T>) -> Self {
        Self::Separable { space, g }
    }

    pub fn scaled(self, factor: T) -> Self {
        Self::Scaled {
            factor,
            base: Box::new(self),
        }
    }

    pub fn shifted(self, offset: T) -> Self {
        Self::Shifted {
            offset,
            base: Box::new(self),
        }
    }

    pub fn value(&self, x: T, t: T) -> T {
        match self {
            Self::Constant { value } => *value,
            Self::TimeIndependent { profile } => profile.value(x),
            Self::Separable { space, g } => space.value(x) * g.value(t),
            Self::Sampled {
                x: xs,
                t: ts,
                values,
            } => {
                let (j, wt) = locate(ts, t);
                let (i, wx) = locate(xs, x);
                let row = interp(&values[j], (i, wx));
                if wt == T::zero() {
                    row
                } else {
                    let next = interp(&values[j + 1], (i, wx));
                    row + wt * (next - row)
                }
            }
            Self::Scaled { factor, base } => *factor * base.value(x, t),
            Self::Shifted { offset, base } => base.value(x, t) + *offset,
        }
    }

    /// Spatial derivative where the family provides one.
    pub fn dx(&self, x: T, t: T) -> T {
        match self {
            Self::Constant { .. } => T::zero(),
            Self::TimeIndependent { profile } => profile.derivative(x),
            Self::Separable { space, g } => space.derivative(x) * g.value(t),
            Self::Sampled { .. } => {
                let d = self.fd_step();
                (self.value(x + d, t) - self.value(x - d, t)) / (d + d)
            }
            Self::Scaled { factor, base } => *factor * base.dx(x, t),
            Self::Shifted { base, .. } => base.dx(x, t),
        }
    }

    /// Time derivative where the family provides one.
    pub fn dt(&self, x: T, t: T) -> T {
        match self {
            Self::Constant { .. } | Self::TimeIndependent { .. } => T::zero(),
            Self::Separable { space, g } => space.value(x) * g.derivative(t),
            Self::Sampled { .. } => {
                let d = self.fd_step();
                (self.value(x, t + d) - self.value(x, t - d)) / (d + d)
            }
            Self::Scaled { factor, base } => *factor * base.dt(x, t),
            Self::Shifted { base, .. } => base.dt(x, t),
        }
    }

    fn fd_step(&self) -> T {
        T::epsilon().sqrt()
    }

    pub fn is_time_independent(&self) -> bool {
        match self {
            Self::Constant { .. } | Self::TimeIndependent { .. } => true,
            Self::Separable { g, .. } => matches!(g, TimeProfile::Constant { .. }),
            Self::Sampled { t, .. } => t.len() <= 1,
            Self::Scaled { base, .. } | Self::Shifted { base, .. } => base.is_time_independent(),
        }
    }

    fn bounds(&self, lo: T, hi: T, t_final: T) -> PotentialBounds<T> {
        match self {
            Self::Constant { value } => PotentialBounds {
                min: *value,
                max: *value,
                grad_sup: Some(T::zero()),
                dt_sup: Some(T::zero()),
            },
            Self::TimeIndependent { profile } => {
                let b = profile.bounds(lo, hi);
                PotentialBounds {
                    min: b.min,
                    max: b.max,
                    grad_sup: b.deriv_sup,
                    dt_sup: Some(T::zero()),
                }
            }
            Self::Separable { space, g } => {
                let s = space.bounds(lo, hi);
                let tb = g.bounds(t_final);
                let corners = [
                    s.min * tb.min,
                    s.min * tb.max,
                    s.max * tb.min,
                    s.max * tb.max,
                ];
                let min = corners.iter().copied().fold(T::infinity(), T::min);
                let max = corners.iter().copied().fold(T::neg_infinity(), T::max);
                PotentialBounds {
                    min,
                    max,
                    grad_sup: s.deriv_sup.map(|d| d * tb.sup_abs()),
                    dt_sup: tb.deriv_sup.map(|d| d * s.sup_abs()),
                }
            }
            Self::Sampled { x, t, values } => {
                let mut min = T::infinity();
                let mut max = T::neg_infinity();
                let mut grad = T::zero();
                let mut dt = T::zero();
                for (j, row) in values.iter().enumerate() {
                    for (i, &v) in row.iter().enumerate() {
                        min = min.min(v);
                        max = max.max(v);
                        if i + 1 < row.len() {
                            grad = grad.max(((row[i + 1] - v) / (x[i + 1] - x[i])).abs());
                        }
                        if j + 1 < values.len() {
                            dt = dt.max(((values[j + 1][i] - v) / (t[j + 1] - t[j])).abs());
                        }
                    }
                }
                PotentialBounds {
                    min,
                    max,
                    grad_sup: Some(grad),
                    dt_sup: Some(dt),
                }
            }
            Self::Scaled { factor, base } => {
                let b = base.bounds(lo, hi, t_final);
                let (min, max) = scale_range(*factor, (b.min, b.max));
                PotentialBounds {
                    min,
                    max,
                    grad_sup: b.grad_sup.map(|g| g * factor.abs()),
                    dt_sup: b.dt_sup.map(|g| g * factor.abs()),
                }
            }
            Self::Shifted { offset, base } => {
                let b = base.bounds(lo, hi, t_final);
                PotentialBounds {
                    min: b.min + *offset,
                    max: b.max + *offset,
                    ..b
                }
            }
        }
    }
}

/// `‖V‖∞`, `‖∇V‖∞`, `‖∂ₜV‖∞`, `‖V₋‖∞` and the combined norm
/// `⟦V⟧ = ‖V‖∞^{1/2} + ‖∇V‖∞^{1/2} + ‖∂ₜV‖∞^{1/3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialNorms<T> {
    pub sup: T,
    pub grad_sup: T,
    pub dt_sup: T,
    pub neg_sup: T,
    pub triple: T,
    /// False when some component came from finite differences on a sampled grid.
    pub exact: bool,
}

impl<T: Real> PotentialNorms<T> {
    pub fn new(sup: T, grad_sup: T, dt_sup: T, neg_sup: T) -> Self {
        Self {
            sup,
            grad_sup,
            dt_sup,
            neg_sup,
            triple: combined_norm(sup, grad_sup, dt_sup),
            exact: true,
        }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    /// The bounds are stated for potentials with `‖V‖∞ ≥ 10`; smaller
    /// potentials are still computed but flagged in reports.
    pub fn below_large_norm_regime(&self) -> bool {
        self.sup < lit(10.0)
    }
}

pub fn combined_norm<T: Real>(sup: T, grad_sup: T, dt_sup: T) -> T {
    sup.sqrt() + grad_sup.sqrt() + dt_sup.cbrt()
}

/// Norm bundle of `V` on `Q̄_T`.
///
/// Closed forms are used when the family provides them; otherwise the
/// missing derivative sups are estimated by finite differences over a grid
/// refined `oversample` times, and the result is flagged as inexact.
pub fn norms<T: Real>(
    v: &Potential<T>,
    grid: &SpaceGrid<T>,
    tg: &TimeGrid<T>,
    oversample: usize,
) -> Result<PotentialNorms<T>> {
    if oversample == 0 {
        return Err(HeatError::InvalidParameter(
            "oversample must be at least 1".into(),
        ));
    }
    let b = v.bounds(grid.a, grid.b, tg.t_final);
    let sup = b.min.abs().max(b.max.abs());
    let neg_sup = (-b.min).max(T::zero());
    let mut exact = true;
    let nx = (grid.n + 1) * oversample;
    let nt = tg.steps * oversample;
    let dx = grid.length() / from_usize(nx);
    let dtt = tg.t_final / from_usize(nt);
    let xs: Vec<T> = (0..=nx).map(|i| grid.a + from_usize::<T>(i) * dx).collect();
    let ts: Vec<T> = (0..=nt).map(|j| from_usize::<T>(j) * dtt).collect();
    let grad_sup = match b.grad_sup {
        Some(g) => g,
        None => {
            exact = false;
            let mut g = T::zero();
            for &t in &ts {
                for w in xs.windows(2) {
                    g = g.max(((v.value(w[1], t) - v.value(w[0], t)) / dx).abs());
                }
            }
            g
        }
    };
    let dt_sup = match b.dt_sup {
        Some(d) => d,
        None => {
            exact = false;
            let mut d = T::zero();
            for &x in &xs {
                for w in ts.windows(2) {
                    d = d.max(((v.value(x, w[1]) - v.value(x, w[0])) / dtt).abs());
                }
            }
            d
        }
    };
    Ok(PotentialNorms {
        exact,
        ..PotentialNorms::new(sup, grad_sup, dt_sup, neg_sup)
    })
}

/// `V(x_i, t_{n+1/2})` as `steps` rows of `n` interior values.
pub fn evaluate_midstep<T: Real>(
    v: &Potential<T>,
    grid: &SpaceGrid<T>,
    tg: &TimeGrid<T>,
) -> Vec<Vec<T>> {
    let xs = grid.nodes();
    if v.is_time_independent() {
        let row: Vec<T> = xs.iter().map(|&x| v.value(x, T::zero())).collect();
        return vec![row; tg.steps];
    }
    (0..tg.steps)
        .map(|n| {
            let t = tg.half_time(n);
            xs.iter().map(|&x| v.value(x, t)).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit() -> (SpaceGrid<f64>, TimeGrid<f64>) {
        (
            SpaceGrid::new(0.0, 1.0, 31).unwrap(),
            TimeGrid::new(1.0, 16).unwrap(),
        )
    }

    #[test]
    fn constant_norms() {
        let (g, tg) = unit();
        let n = norms(&Potential::constant(100.0), &g, &tg, 8).unwrap();
        assert_eq!(
            (n.sup, n.grad_sup, n.dt_sup, n.neg_sup),
            (100.0, 0.0, 0.0, 0.0)
        );
        assert!((n.triple - 10.0).abs() < 1e-14);
        assert!(!n.below_large_norm_regime());

        let m = norms(&Potential::constant(-5.0), &g, &tg, 8).unwrap();
        assert_eq!(m.neg_sup, 5.0);
        assert!((m.triple - 5f64.sqrt()).abs() < 1e-14);
        assert!(m.below_large_norm_regime());
    }

    #[test]
    fn separable_sine_norms_match_analytic_and_sampled() {
        let (g, tg) = unit();
        let v = Potential::separable(
            SpaceProfile::Sin {
                amplitude: 4.0,
                frequency: 2.0,
            },
            TimeProfile::Poly1p { beta: 1.0 },
        );
        let n = norms(&v, &g, &tg, 8).unwrap();
        assert!(n.exact);
        assert!((n.sup - 8.0).abs() < 1e-12);
        assert!((n.grad_sup - 16.0 * PI).abs() < 1e-12);
        assert!((n.dt_sup - 4.0).abs() < 1e-12);
        assert!((n.neg_sup - 8.0).abs() < 1e-12);

        // Cross-check by brute-force maximum over a fine tensor grid.
        let (mut sup, mut grad, mut dt) = (0f64, 0f64, 0f64);
        for i in 0..=2000 {
            let x = i as f64 / 2000.0;
            for j in 0..=50 {
                let t = j as f64 / 50.0;
                sup = sup.max(v.value(x, t).abs());
                grad = grad.max(v.dx(x, t).abs());
                dt = dt.max(v.dt(x, t).abs());
            }
        }
        assert!((sup - 8.0).abs() < 1e-6);
        assert!((grad - 16.0 * PI).abs() < 1e-6);
        assert!((dt - 4.0).abs() < 1e-6);
    }

    #[test]
    fn sin_range_handles_partial_intervals() {
        let (lo, hi) = sin_range(0.1, 0.5);
        assert!((lo - 0.1f64.sin()).abs() < 1e-15 && (hi - 0.5f64.sin()).abs() < 1e-15);
        assert_eq!(sin_range(0.0, 2.0 * PI), (-1.0, 1.0));
        let (lo, hi) = sin_range(1.0, 2.0);
        assert_eq!(hi, 1.0);
        assert!((lo - 1f64.sin().min(2f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn step_profile_falls_back_to_sampling() {
        let (g, tg) = unit();
        let v = Potential::time_independent(SpaceProfile::Step {
            value: 3.0,
            lo: 0.25,
            hi: 0.75,
        });
        let n = norms(&v, &g, &tg, 4).unwrap();
        assert!(!n.exact);
        assert_eq!(n.sup, 3.0);
        assert_eq!(n.dt_sup, 0.0);
        assert!(n.grad_sup > 3.0 / g.h);
    }

    #[test]
    fn midstep_evaluation() {
        let (g, tg) = unit();
        let c = evaluate_midstep(&Potential::constant(2.5), &g, &tg);
        assert_eq!(c.len(), 16);
        assert!(c.iter().flatten().all(|&v| v == 2.5));

        let v = Potential::separable(
            SpaceProfile::Sin {
                amplitude: 1.0,
                frequency: 1.0,
            },
            TimeProfile::Poly1p { beta: 2.0 },
        );
        let m = evaluate_midstep(&v, &g, &tg);
        for n in 0..tg.steps {
            let gt = (1.0 + tg.half_time(n)).powi(2);
            for i in 0..g.n {
                let expect = (PI * g.node(i)).sin() * gt;
                assert!((m[n][i] - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn sampled_alignment_returns_stored_values() {
        let (g, tg) = unit();
        let xs = g.nodes();
        let ts: Vec<f64> = (0..tg.steps).map(|n| tg.half_time(n)).collect();
        let values: Vec<Vec<f64>> = (0..tg.steps)
            .map(|n| {
                (0..g.n)
                    .map(|i| (i * 7 + n * 3) as f64 * 0.37 - 4.0)
                    .collect()
            })
            .collect();
        let v = Potential::Sampled {
            x: xs,
            t: ts,
            values: values.clone(),
        };
        assert_eq!(evaluate_midstep(&v, &g, &tg), values);
    }

    #[test]
    fn json_fragments_parse() {
        let v: Potential<f64> = serde_json::from_str(
            r#"{"kind":"separable","V0":{"kind":"sin","amplitude":4.0,"frequency":2},"g":{"kind":"poly1p","beta":1.0}}"#,
        )
        .unwrap();
        assert_eq!(
            v,
            Potential::separable(
                SpaceProfile::Sin {
                    amplitude: 4.0,
                    frequency: 2.0
                },
                TimeProfile::Poly1p { beta: 1.0 }
            )
        );
        let c: Potential<f64> =
            serde_json::from_str(r#"{"kind":"constant","value":100.0}"#).unwrap();
        assert_eq!(c, Potential::constant(100.0));
        assert!(
            serde_json::from_str::<Potential<f64>>(r#"{"kind":"constant","value":1.0,"x":2}"#)
                .is_err()
        );
    }
}
