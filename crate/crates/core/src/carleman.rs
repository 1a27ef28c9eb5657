//! Carleman weights built from an explicit auxiliary function, the parameter
//! threshold, and a discrete evaluator for both sides of the weighted estimate
//!
//! ```text
//! ∫ e^{−2τβ}(τ³λ⁴η³|w|² + τλ²η|∇w|² + τ⁻¹η⁻¹(|Δw|² + |∂ₜw|²))
//!     ≤ C₁ ∫ e^{−2τβ}|∂ₜw + Δw + Vw|² + C₁ ∫_{ω×(0,T)} e^{−2τβ}τ³λ⁴η³|w|².
//! ```

use rand_chacha::ChaCha8Rng;

use crate::error::{HeatError, Result};
use crate::mesh::{SpaceGrid, SpaceMask, TimeGrid};
use crate::pde::{centered_gradient, laplacian, SpaceTimeField};
use crate::potential::{evaluate_midstep, Potential, PotentialNorms};
use crate::random;
use crate::scalar::{from_usize, lit, Real};

/// `ξ(x) = x̂(1 − x̂) e^{μ(x̂ − ĉ)}` with `x̂ = (x − a)/(b − a)` and
/// `μ = (2ĉ − 1)/(ĉ(1 − ĉ))`, so that `ξ′` vanishes exactly at `x̂ = ĉ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiFunction<T> {
    pub a: T,
    pub b: T,
    pub center: T,
    pub c_hat: T,
    pub mu: T,
}

pub fn build_xi<T: Real>(grid: &SpaceGrid<T>, center: T) -> Result<XiFunction<T>> {
    if !(center > grid.a && center < grid.b) {
        return Err(HeatError::InvalidParameter(format!(
            "center {center} must lie strictly inside ({}, {})",
            grid.a, grid.b
        )));
    }
    let c_hat = (center - grid.a) / grid.length();
    let mu = (lit::<T>(2.0) * c_hat - T::one()) / (c_hat * (T::one() - c_hat));
    Ok(XiFunction {
        a: grid.a,
        b: grid.b,
        center,
        c_hat,
        mu,
    })
}

/// Outcome of sampling `ξ` on a refined grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiReport<T> {
    pub positive_inside: bool,
    pub zero_at_ends: bool,
    /// Number of sign changes of `ξ′` over the sample (1 expected).
    pub critical_points: usize,
    /// `min |ξ′|` over samples farther than `radius` from the center.
    pub delta_xi: T,
}

impl<T: Real> XiFunction<T> {
    /// `(ξ, ξ′, ξ″)` at `x`.
    pub fn eval(&self, x: T) -> (T, T, T) {
        let l = self.b - self.a;
        let s = (x - self.a) / l;
        let e = (self.mu * (s - self.c_hat)).exp();
        let p = s * (T::one() - s);
        let dp = T::one() - lit::<T>(2.0) * s;
        let d2p: T = lit(-2.0);
        let mu = self.mu;
        (
            p * e,
            e * (dp + mu * p) / l,
            e * (d2p + lit::<T>(2.0) * mu * dp + mu * mu * p) / (l * l),
        )
    }

    /// `‖ξ‖∞ = ĉ(1 − ĉ)`, attained at the center.
    pub fn sup(&self) -> T {
        self.c_hat * (T::one() - self.c_hat)
    }

    /// The other zero of `ξ′` in normalized coordinates, `(1 − ĉ)/(1 − 2ĉ)`;
    /// `None` in the symmetric case. It never lies in `[0, 1]`.
    pub fn second_root(&self) -> Option<T> {
        let den = T::one() - lit::<T>(2.0) * self.c_hat;
        (den != T::zero()).then(|| (T::one() - self.c_hat) / den)
    }

    pub fn verify(&self, samples: usize, radius: T) -> XiReport<T> {
        let l = self.b - self.a;
        let mut positive_inside = true;
        let mut critical_points = 0;
        let mut delta_xi = T::infinity();
        let mut prev_sign = None;
        for k in 1..samples {
            let x = self.a + l * from_usize::<T>(k) / from_usize::<T>(samples);
            let (v, d, _) = self.eval(x);
            positive_inside &= v > T::zero();
            let sign = d > T::zero();
            if prev_sign.is_some_and(|p| p != sign) {
                critical_points += 1;
            }
            prev_sign = Some(sign);
            if (x - self.center).abs() >= radius {
                delta_xi = delta_xi.min(d.abs());
            }
        }
        let zero_at_ends =
            self.eval(self.a).0.abs() <= T::epsilon() && self.eval(self.b).0.abs() <= T::epsilon();
        XiReport {
            positive_inside,
            zero_at_ends,
            critical_points,
            delta_xi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanParams<T> {
    pub s: T,
    pub lambda: T,
    pub tau: T,
    pub c1: T,
}

impl<T: Real> CarlemanParams<T> {
    pub fn new(s: T, lambda: T, tau: T, c1: T) -> Result<Self> {
        if !(s >= T::one() && lambda > T::zero() && tau > T::zero() && c1 > T::zero()) {
            return Err(HeatError::InvalidParameter(format!(
                "need s >= 1 and positive lambda, tau, C1; got s={s}, lambda={lambda}, tau={tau}, C1={c1}"
            )));
        }
        Ok(Self { s, lambda, tau, c1 })
    }

    pub fn with_tau(self, tau: T) -> Self {
        Self { tau, ..self }
    }
}

/// Weight functions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointWeights<T> {
    pub beta: T,
    pub eta: T,
    pub log_eta: T,
    pub dt_beta: T,
    pub grad_beta: T,
    pub grad_eta: T,
    pub lap_beta: T,
}

fn point_weights<T: Real>(
    xi: &XiFunction<T>,
    s: T,
    lambda: T,
    t_final: T,
    x: T,
    t: T,
) -> PointWeights<T> {
    let k = xi.sup();
    let (v, dv, d2v) = xi.eval(x);
    let theta = t * (t_final - t);
    let log_eta = lambda * (s * k + v) - theta.ln();
    let eta = log_eta.exp();
    // e^{2λsK} − e^{λ(sK+ξ)} = e^{2λsK}(1 − e^{λ(ξ − sK)})
    let num = (lit::<T>(2.0) * lambda * s * k).exp() * -(lambda * (v - s * k)).exp_m1();
    let beta = num / theta;
    let dt_beta = -beta * (t_final - lit::<T>(2.0) * t) / theta;
    let grad_beta = -lambda * dv * (lambda * (s * k + v)).exp() / theta;
    PointWeights {
        beta,
        eta,
        log_eta,
        dt_beta,
        grad_beta,
        grad_eta: lambda * eta * dv,
        lap_beta: -lambda * lambda * eta * dv * dv - lambda * eta * d2v,
    }
}

/// Weights on interior nodes × half-steps, `[half-step][node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField<T> {
    pub beta: Vec<Vec<T>>,
    pub eta: Vec<Vec<T>>,
    pub dt_beta: Vec<Vec<T>>,
    pub grad_beta: Vec<Vec<T>>,
    pub grad_eta: Vec<Vec<T>>,
    pub lap_beta: Vec<Vec<T>>,
    /// `ξ′` at the nodes.
    pub grad_xi: Vec<T>,
}

pub fn weights<T: Real>(
    xi: &XiFunction<T>,
    params: &CarlemanParams<T>,
    grid: &SpaceGrid<T>,
    tg: &TimeGrid<T>,
) -> WeightField<T> {
    let mut out = WeightField {
        beta: Vec::with_capacity(tg.steps),
        eta: Vec::with_capacity(tg.steps),
        dt_beta: Vec::with_capacity(tg.steps),
        grad_beta: Vec::with_capacity(tg.steps),
        grad_eta: Vec::with_capacity(tg.steps),
        lap_beta: Vec::with_capacity(tg.steps),
        grad_xi: grid.nodes().iter().map(|&x| xi.eval(x).1).collect(),
    };
    for n in 0..tg.steps {
        let t = tg.half_time(n);
        let row: Vec<PointWeights<T>> = grid
            .nodes()
            .iter()
            .map(|&x| point_weights(xi, params.s, params.lambda, tg.t_final, x, t))
            .collect();
        out.beta.push(row.iter().map(|w| w.beta).collect());
        out.eta.push(row.iter().map(|w| w.eta).collect());
        out.dt_beta.push(row.iter().map(|w| w.dt_beta).collect());
        out.grad_beta
            .push(row.iter().map(|w| w.grad_beta).collect());
        out.grad_eta.push(row.iter().map(|w| w.grad_eta).collect());
        out.lap_beta.push(row.iter().map(|w| w.lap_beta).collect());
    }
    out
}

impl<T: Real> WeightField<T> {
    /// `max |∇β + λη∇ξ| / max |λη∇ξ|` over the lattice.
    pub fn gradient_identity_defect(&self, lambda: T) -> T {
        let mut num = T::zero();
        let mut den = T::zero();
        for (n, row) in self.grad_beta.iter().enumerate() {
            for (i, &gb) in row.iter().enumerate() {
                let r = lambda * self.eta[n][i] * self.grad_xi[i];
                num = num.max((gb + r).abs()).max((self.grad_eta[n][i] - r).abs());
                den = den.max(r.abs());
            }
        }
        if den == T::zero() {
            num
        } else {
            num / den
        }
    }

    /// Empirical constant in `|∂ₜβ| ≤ C T η²`.
    pub fn dt_beta_constant(&self, t_final: T) -> T {
        let mut c = T::zero();
        for (row_b, row_e) in self.dt_beta.iter().zip(&self.eta) {
            for (&db, &e) in row_b.iter().zip(row_e) {
                c = c.max(db.abs() / (t_final * e * e));
            }
        }
        c
    }
}

/// `C (T + T² + T²(‖V‖∞^{1/2} + ‖∇V‖∞^{1/2} + ‖∂ₜV‖∞^{1/3}))`.
pub fn tau0<T: Real>(t: T, norms: &PotentialNorms<T>, c: T) -> T {
    let t2 = t * t;
    c * (t + t2 + t2 * (norms.sup.sqrt() + norms.grad_sup.sqrt() + norms.dt_sup.cbrt()))
}

/// Both sides of the weighted estimate in units of `e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanSides<T> {
    pub lhs3: T,
    pub lhs1: T,
    pub lhs_neg1: T,
    pub rhs_f: T,
    pub rhs_local: T,
    /// Common logarithmic scale of the five sums.
    pub log_scale: T,
    pub c1: T,
    pub holds: bool,
    /// `(C₁·rhs − lhs) / max(C₁·rhs, lhs)`; positive when the estimate holds.
    pub slack: T,
}

impl<T: Real> CarlemanSides<T> {
    pub fn lhs(&self) -> T {
        self.lhs3 + self.lhs1 + self.lhs_neg1
    }

    pub fn rhs(&self) -> T {
        self.rhs_f + self.rhs_local
    }

    /// `lhs / rhs`, the smallest `C₁` for which the estimate holds.
    pub fn ratio(&self) -> T {
        self.lhs() / self.rhs()
    }

    /// The five sums in absolute units; overflows to infinity for huge weights.
    pub fn unscaled(&self) -> [T; 5] {
        let s = self.log_scale.exp();
        [
            self.lhs3,
            self.lhs1,
            self.lhs_neg1,
            self.rhs_f,
            self.rhs_local,
        ]
        .map(|v| v * s)
    }
}

/// Logsumexp accumulator.
#[derive(Default)]
struct LogSum<T> {
    terms: Vec<T>,
}

impl<T: Real> LogSum<T> {
    fn push(&mut self, log_weight: T, value_sq: T) {
        if value_sq > T::zero() {
            self.terms.push(log_weight + value_sq.ln());
        }
    }

    fn max(&self) -> T {
        self.terms.iter().copied().fold(T::neg_infinity(), T::max)
    }

    fn scaled(&self, shift: T) -> T {
        self.terms.iter().map(|&l| (l - shift).exp()).sum()
    }
}

/// Discrete evaluation of both sides for a field `w` vanishing on the boundary.
///
/// All sums live at half-steps with quadrature `h·dt`: `w̄` is the level
/// average, `∂ₜw = (w^{n+1} − w^n)/dt`, and `f = ∂ₜw + Δ_h w̄ + V w̄`. The
/// discrete adjoint of the forward scheme with potential `V` gives `f = 0`
/// exactly when evaluated with `−V`.
pub fn carleman_sides<T: Real>(
    w: &SpaceTimeField<T>,
    v: &Potential<T>,
    xi: &XiFunction<T>,
    params: &CarlemanParams<T>,
    omega: &SpaceMask<T>,
) -> CarlemanSides<T> {
    let vmid = evaluate_midstep(v, &w.grid, &w.tg);
    sides_with_midstep(w, &vmid, xi, params, omega)
}

fn sides_with_midstep<T: Real>(
    w: &SpaceTimeField<T>,
    vmid: &[Vec<T>],
    xi: &XiFunction<T>,
    params: &CarlemanParams<T>,
    omega: &SpaceMask<T>,
) -> CarlemanSides<T> {
    let g = &w.grid;
    let tg = &w.tg;
    let (s, lambda, tau) = (params.s, params.lambda, params.tau);
    let log_quad = (g.h * tg.dt).ln();
    let log_tau = tau.ln();
    let log_lambda = lambda.ln();
    let three: T = lit(3.0);
    let two: T = lit(2.0);
    let mut lhs3 = LogSum::default();
    let mut lhs1 = LogSum::default();
    let mut lhsm = LogSum::default();
    let mut rf = LogSum::default();
    let mut rl = LogSum::default();
    for n in 0..tg.steps {
        let t = tg.half_time(n);
        let mid = w.midpoint(n);
        let lap = laplacian(&mid, g.h);
        let grad = centered_gradient(&mid, g.h);
        for i in 0..g.n {
            let pw = point_weights(xi, s, lambda, tg.t_final, g.node(i), t);
            let base = log_quad - two * tau * pw.beta;
            let dtw = (w.levels[n + 1][i] - w.levels[n][i]) / tg.dt;
            let f = dtw + lap[i] + vmid[n][i] * mid[i];
            let w2 = mid[i] * mid[i];
            let l3 = base + three * log_tau + lit::<T>(4.0) * log_lambda + three * pw.log_eta;
            lhs3.push(l3, w2);
            lhs1.push(
                base + log_tau + two * log_lambda + pw.log_eta,
                grad[i] * grad[i],
            );
            lhsm.push(base - log_tau - pw.log_eta, lap[i] * lap[i] + dtw * dtw);
            rf.push(base, f * f);
            if omega.contains(i) {
                rl.push(l3, w2);
            }
        }
    }
    let shift = [&lhs3, &lhs1, &lhsm, &rf, &rl]
        .iter()
        .map(|l| l.max())
        .fold(T::neg_infinity(), T::max);
    let shift = if shift.is_finite() { shift } else { T::zero() };
    let (lhs3, lhs1, lhs_neg1, rhs_f, rhs_local) = (
        lhs3.scaled(shift),
        lhs1.scaled(shift),
        lhsm.scaled(shift),
        rf.scaled(shift),
        rl.scaled(shift),
    );
    let lhs = lhs3 + lhs1 + lhs_neg1;
    let rhs = params.c1 * (rhs_f + rhs_local);
    let top = lhs.max(rhs);
    CarlemanSides {
        lhs3,
        lhs1,
        lhs_neg1,
        rhs_f,
        rhs_local,
        log_scale: shift,
        c1: params.c1,
        holds: rhs >= lhs,
        slack: if top > T::zero() {
            (rhs - lhs) / top
        } else {
            T::zero()
        },
    }
}

/// Random smooth fields `Σ_{k≤8, j≤3} g_{kj} sin(kπx̂) cos(jπt/T) / (k²(1+j)²)`
/// with standard normal `g_{kj}`.
pub fn smooth_corpus<T: Real>(
    grid: &SpaceGrid<T>,
    tg: &TimeGrid<T>,
    count: usize,
    seed: u64,
) -> Vec<SpaceTimeField<T>> {
    let mut rng: ChaCha8Rng = random::stream(seed, 2);
    (0..count)
        .map(|_| {
            let coeffs: Vec<T> = random::normal_vec(&mut rng, 8 * 4);
            let modes: Vec<Vec<T>> = (1..=8).map(|k| grid.sine_mode(k)).collect();
            let mut f = SpaceTimeField::zeros(*grid, *tg);
            for (n, level) in f.levels.iter_mut().enumerate() {
                let t = tg.time(n);
                for j in 0..4 {
                    let ct = (from_usize::<T>(j) * T::PI() * t / tg.t_final).cos();
                    for (k, mode) in modes.iter().enumerate() {
                        let kk = from_usize::<T>(k + 1);
                        let jj = from_usize::<T>(j + 1);
                        let c = coeffs[k * 4 + j] * ct / (kk * kk * jj * jj);
                        for (y, &m) in level.iter_mut().zip(mode) {
                            *y += c * m;
                        }
                    }
                }
            }
            f
        })
        .collect()
}

/// `safety · max_w lhs/rhs` at `τ_ref`: the smallest `C₁` making every corpus
/// member hold there, inflated by `safety`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_c1<T: Real>(
    corpus: &[SpaceTimeField<T>],
    v: &Potential<T>,
    xi: &XiFunction<T>,
    s: T,
    lambda: T,
    tau_ref: T,
    omega: &SpaceMask<T>,
    safety: T,
) -> Result<T> {
    let params = CarlemanParams::new(s, lambda, tau_ref, T::one())?;
    let mut worst = T::zero();
    for w in corpus {
        let sides = carleman_sides(w, v, xi, &params, omega);
        if sides.rhs() > T::zero() {
            worst = worst.max(sides.ratio());
        } else if sides.lhs() > T::zero() {
            return Err(HeatError::InvalidParameter(
                "corpus member with vanishing right-hand side".into(),
            ));
        }
    }
    if !(worst > T::zero()) {
        return Err(HeatError::ZeroData(
            "calibration corpus is identically zero".into(),
        ));
    }
    Ok(safety * worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauSearch<T> {
    pub tau_star: T,
    pub holds_at_star: bool,
    /// `false` at `τ*/1.05` is the expected outcome.
    pub holds_below: bool,
    /// Every member already holds at the smallest probe.
    pub degenerate: bool,
    /// A ladder of probes found a `holds → fails` transition with growing τ.
    pub non_monotone: bool,
    /// Smallest slack over the corpus at `τ*`.
    pub min_slack: T,
}

/// Bisection in `log τ` over `[τ_hi·1e−12, τ_hi]` for the smallest `τ` at which
/// every corpus member satisfies the estimate.
pub fn min_tau_search<T: Real>(
    corpus: &[SpaceTimeField<T>],
    v: &Potential<T>,
    xi: &XiFunction<T>,
    params: &CarlemanParams<T>,
    omega: &SpaceMask<T>,
    tau_hi: T,
) -> Result<TauSearch<T>> {
    if !(tau_hi > T::zero()) {
        return Err(HeatError::InvalidParameter(format!(
            "tau_hi must be positive, got {tau_hi}"
        )));
    }
    let vmids: Vec<Vec<Vec<T>>> = corpus
        .iter()
        .map(|w| evaluate_midstep(v, &w.grid, &w.tg))
        .collect();
    let all_hold = |tau: T| -> (bool, T) {
        let p = params.with_tau(tau);
        let mut slack = T::infinity();
        for (w, vm) in corpus.iter().zip(&vmids) {
            let sides = sides_with_midstep(w, vm, xi, &p, omega);
            if !sides.holds {
                return (false, sides.slack);
            }
            slack = slack.min(sides.slack);
        }
        (true, slack)
    };
    if !all_hold(tau_hi).0 {
        return Err(HeatError::TauNotFound {
            tau_hi: crate::scalar::to_f64(tau_hi),
        });
    }
    let mut lo = tau_hi * lit(1e-12);
    let mut hi = tau_hi;
    let degenerate = all_hold(lo).0;
    if degenerate {
        hi = lo;
    } else {
        for _ in 0..40 {
            let mid = (lo * hi).sqrt();
            if all_hold(mid).0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let ladder: Vec<bool> = (0..=48)
        .map(|k| all_hold(tau_hi * lit::<T>(10f64.powf(-12.0 + 0.25 * k as f64))).0)
        .collect();
    let non_monotone = ladder.windows(2).any(|w| w[0] && !w[1]);
    let (holds_at_star, min_slack) = all_hold(hi);
    Ok(TauSearch {
        tau_star: hi,
        holds_at_star,
        holds_below: all_hold(hi / lit(1.05)).0,
        degenerate,
        non_monotone,
        min_slack,
    })
}
