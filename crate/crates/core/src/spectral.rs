//! Dirichlet eigenstructure of `−∂ₓₓ + V` and the quantities built on it:
//! worst-case mass ratios of finite eigenfunction sums, their growth in the
//! frequency cutoff, potential shifts and time gauges, the positive multiplier
//! and the harmonic extension to two dimensions.

use crate::error::{HeatError, Result};
use crate::fit::{linear_fit, FitResult};
use crate::linalg::{dot, jacobi_svd, sym_tridiagonal_eigen, SymTridiagonal};
use crate::mesh::{SpaceGrid, SpaceMask, TimeGrid};
use crate::pde::{Propagator, SpaceTimeField};
use crate::potential::{norms, Potential};
use crate::scalar::{from_usize, lit, Real};

/// Eigenpairs of the Dirichlet tridiagonal `2/h² + V(x_i)`, `−1/h²`, with
/// eigenvectors orthonormal in `⟨u, v⟩_h = h Σ uᵢvᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HillBasis<T> {
    pub grid: SpaceGrid<T>,
    pub potential: Vec<T>,
    /// Ascending.
    pub eigenvalues: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

fn hill_matrix<T: Real>(grid: &SpaceGrid<T>, potential: &[T]) -> SymTridiagonal<T> {
    let inv = (grid.h * grid.h).recip();
    SymTridiagonal::new(
        potential.iter().map(|&v| inv + inv + v).collect(),
        vec![-inv; grid.n - 1],
    )
}

pub fn hill_eigensolve<T: Real>(v: &Potential<T>, grid: &SpaceGrid<T>) -> Result<HillBasis<T>> {
    if !v.is_time_independent() {
        return Err(HeatError::TimeDependentPotential);
    }
    let potential = grid.sample(|x| v.value(x, T::zero()));
    Ok(hill_basis_from_samples(grid, potential))
}

/// Eigen-decomposition for node samples of a potential.
pub fn hill_basis_from_samples<T: Real>(grid: &SpaceGrid<T>, potential: Vec<T>) -> HillBasis<T> {
    let (eigenvalues, unit) = sym_tridiagonal_eigen(&hill_matrix(grid, &potential));
    let scale = grid.h.sqrt().recip();
    let vectors = unit
        .into_iter()
        .map(|mut u| {
            // sign convention: first entry of non-negligible size is positive
            let big = u.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
            let lead = u
                .iter()
                .copied()
                .find(|x| x.abs() > big * lit(1e-3))
                .unwrap_or(T::one());
            let s = if lead < T::zero() { -scale } else { scale };
            u.iter_mut().for_each(|x| *x *= s);
            u
        })
        .collect();
    HillBasis {
        grid: *grid,
        potential,
        eigenvalues,
        vectors,
    }
}

impl<T: Real> HillBasis<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `max_k ‖Hφ_k − λ_kφ_k‖_h / max(|λ_k|, 1)`.
    pub fn residual_defect(&self) -> T {
        let h = hill_matrix(&self.grid, &self.potential);
        self.eigenvalues
            .iter()
            .zip(&self.vectors)
            .map(|(&lam, phi)| {
                let hp = h.apply(phi);
                let r: Vec<T> = hp.iter().zip(phi).map(|(&a, &b)| a - lam * b).collect();
                self.grid.norm(&r) / lam.abs().max(T::one())
            })
            .fold(T::zero(), T::max)
    }

    /// `max_{j,k} |⟨φ_j, φ_k⟩_h − δ_jk|`.
    pub fn orthonormality_defect(&self) -> T {
        let mut worst = T::zero();
        for j in 0..self.len() {
            for k in 0..=j {
                let target = if j == k { T::one() } else { T::zero() };
                let g = self.grid.inner(&self.vectors[j], &self.vectors[k]);
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    pub fn window(&self, lambda_cut: T) -> SpectralWindow<T> {
        SpectralWindow {
            lambda_cut,
            indices: (0..self.len())
                .filter(|&k| self.eigenvalues[k] <= lambda_cut)
                .collect(),
        }
    }

    /// `Σ_k α_k φ_k` over the window.
    pub fn combine(&self, window: &SpectralWindow<T>, coefficients: &[T]) -> Result<Vec<T>> {
        if coefficients.len() != window.len() {
            return Err(HeatError::DimensionMismatch {
                expected: window.len(),
                got: coefficients.len(),
            });
        }
        let mut out = vec![T::zero(); self.grid.n];
        for (&k, &a) in window.indices.iter().zip(coefficients) {
            for (o, &p) in out.iter_mut().zip(&self.vectors[k]) {
                *o += a * p;
            }
        }
        Ok(out)
    }
}

/// Indices of eigenvalues at most `lambda_cut`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWindow<T> {
    pub lambda_cut: T,
    pub indices: Vec<usize>,
}

impl<T> SpectralWindow<T> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Restricted Gram matrix `(M_ω)_{jk} = h Σ_{i∈ω} φ_j(x_i) φ_k(x_i)`, row-major.
pub fn gram_matrix<T: Real>(
    basis: &HillBasis<T>,
    window: &SpectralWindow<T>,
    omega: &SpaceMask<T>,
) -> Vec<T> {
    let m = window.len();
    let cols: Vec<Vec<T>> = window
        .indices
        .iter()
        .map(|&k| omega.restrict(&basis.vectors[k]))
        .collect();
    let mut g = vec![T::zero(); m * m];
    for j in 0..m {
        for k in 0..m {
            g[j * m + k] = basis.grid.h * dot(&cols[j], &cols[k]);
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRatio<T> {
    /// `max ‖φ‖_{L²(Ω)} / ‖φ‖_{L²(ω)}` over the window span.
    pub max_ratio: T,
    /// Unit coefficient vector attaining the maximum.
    pub worst_coefficients: Vec<T>,
    /// `λ_min(M_ω) + reg`.
    pub lambda_min: T,
}

/// Worst-case ratio over the window: `λ_min(M_ω + reg·I)^{−1/2}`.
///
/// `λ_min(M_ω)` is obtained as the squared smallest singular value of the
/// masked basis `h^{1/2} [φ_k(x_i)]_{i∈ω}`, which keeps relative accuracy far
/// below the square root of machine precision.
pub fn spectral_ratio<T: Real>(
    basis: &HillBasis<T>,
    window: &SpectralWindow<T>,
    omega: &SpaceMask<T>,
    reg: T,
) -> Result<SpectralRatio<T>> {
    if window.is_empty() {
        return Err(HeatError::InvalidParameter(format!(
            "no eigenvalue below {}",
            window.lambda_cut
        )));
    }
    if omega.is_empty() {
        return Err(HeatError::EmptyMask);
    }
    if reg < T::zero() {
        return Err(HeatError::InvalidParameter(format!(
            "reg must be nonnegative, got {reg}"
        )));
    }
    let m = window.len();
    if omega.len() == basis.grid.n {
        // M_Ω is the identity by orthonormality.
        let mut e = vec![T::zero(); m];
        e[0] = T::one();
        let lambda_min = T::one() + reg;
        return Ok(SpectralRatio {
            max_ratio: lambda_min.sqrt().recip(),
            worst_coefficients: e,
            lambda_min,
        });
    }
    let sh = basis.grid.h.sqrt();
    let cols: Vec<Vec<T>> = window
        .indices
        .iter()
        .map(|&k| {
            omega
                .restrict(&basis.vectors[k])
                .iter()
                .map(|&v| v * sh)
                .collect()
        })
        .collect();
    let (sv, vecs) = jacobi_svd(&cols);
    let smin = sv[m - 1];
    let floor = T::epsilon() * from_usize::<T>(m) * sv[0];
    let lambda_min = smin * smin + reg;
    if m > omega.len() || (reg == T::zero() && smin <= floor) {
        let bound = floor.max(T::min_positive_value()).recip();
        return Err(HeatError::SingularGram {
            lower_bound: crate::scalar::to_f64(bound),
        });
    }
    Ok(SpectralRatio {
        max_ratio: lambda_min.sqrt().recip(),
        worst_coefficients: vecs[m - 1].clone(),
        lambda_min,
    })
}

/// `base · 2^j` for `j = 0..rungs`.
pub fn dyadic_ladder<T: Real>(base: T, rungs: usize) -> Vec<T> {
    (0..rungs)
        .map(|j| base * lit::<T>(2f64.powi(j as i32)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KRow<T> {
    pub lambda_cut: T,
    pub amplitude: T,
    pub omega_measure: T,
    pub max_ratio: T,
    /// `ln max_ratio`
    pub k: T,
    pub window_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantFit<T> {
    /// Rows ordered by amplitude, then rung.
    pub rows: Vec<KRow<T>>,
    /// Per amplitude: `K` against `√(λ_cut − min V)`.
    pub lambda_fits: Vec<(T, FitResult<T>)>,
    /// Per rung: `K` against `√M`; empty with fewer than two amplitudes.
    pub amplitude_fits: Vec<(usize, FitResult<T>)>,
}

impl<T: Real> ConstantFit<T> {
    pub fn k(&self, amplitude_index: usize, rung: usize, rungs: usize) -> T {
        self.rows[amplitude_index * rungs + rung].k
    }
}

/// `K(λ, M) = ln max_ratio` for `V = M·V₀` over a cutoff ladder measured from
/// the potential floor: `λ_cut = min_x V + offset`.
pub fn constant_fit<T: Real>(
    base: &Potential<T>,
    amplitudes: &[T],
    grid: &SpaceGrid<T>,
    offsets: &[T],
    omega: &SpaceMask<T>,
) -> Result<ConstantFit<T>> {
    if offsets.len() < 4 {
        return Err(HeatError::InvalidParameter(format!(
            "ladder needs at least 4 rungs, got {}",
            offsets.len()
        )));
    }
    if offsets.windows(2).any(|w| !(w[1] > w[0])) || !(offsets[0] > T::zero()) {
        return Err(HeatError::InvalidParameter(
            "ladder must be positive and increasing".into(),
        ));
    }
    let mut rows = Vec::with_capacity(amplitudes.len() * offsets.len());
    for &amp in amplitudes {
        let basis = hill_eigensolve(&base.clone().scaled(amp), grid)?;
        let floor = basis.potential.iter().copied().fold(T::infinity(), T::min);
        for &off in offsets {
            let window = basis.window(floor + off);
            let r = spectral_ratio(&basis, &window, omega, T::zero())?;
            rows.push(KRow {
                lambda_cut: floor + off,
                amplitude: amp,
                omega_measure: omega.measure,
                max_ratio: r.max_ratio,
                k: r.max_ratio.ln(),
                window_size: window.len(),
            });
        }
    }
    let rungs = offsets.len();
    let sqrt_off: Vec<T> = offsets.iter().map(|v| v.sqrt()).collect();
    let lambda_fits = amplitudes
        .iter()
        .enumerate()
        .map(|(a, &amp)| {
            let ks: Vec<T> = rows[a * rungs..(a + 1) * rungs]
                .iter()
                .map(|r| r.k)
                .collect();
            Ok((amp, linear_fit(&sqrt_off, &ks)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let amplitude_fits = if amplitudes.len() >= 2 {
        let sqrt_amp: Vec<T> = amplitudes.iter().map(|v| v.abs().sqrt()).collect();
        (0..rungs)
            .map(|j| {
                let ks: Vec<T> = (0..amplitudes.len())
                    .map(|a| rows[a * rungs + j].k)
                    .collect();
                Ok((j, linear_fit(&sqrt_amp, &ks)?))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(ConstantFit {
        rows,
        lambda_fits,
        amplitude_fits,
    })
}

/// `Ṽ = V + M` with `M = ‖V‖∞`, so that `Ṽ ≥ 0`; windows map as `λ ↦ λ + M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftReduced<T> {
    pub potential: Potential<T>,
    pub shift: T,
}

pub fn shift_reduce<T: Real>(v: &Potential<T>, grid: &SpaceGrid<T>) -> Result<ShiftReduced<T>> {
    if !v.is_time_independent() {
        return Err(HeatError::TimeDependentPotential);
    }
    let tg = TimeGrid::new(T::one(), 1)?;
    let shift = norms(v, grid, &tg, 8)?.sup;
    Ok(ShiftReduced {
        potential: v.clone().shifted(shift),
        shift,
    })
}

/// `ŷ(x, t) = e^{−ct} y(x, t)`.
pub fn gauge_time<T: Real>(y: &SpaceTimeField<T>, c: T) -> SpaceTimeField<T> {
    let levels = y
        .levels
        .iter()
        .enumerate()
        .map(|(n, l)| {
            let f = (-c * y.tg.time(n)).exp();
            l.iter().map(|&v| f * v).collect()
        })
        .collect();
    SpaceTimeField {
        grid: y.grid,
        tg: y.tg,
        levels,
    }
}

/// Residual of a gauged field against the scheme with potential `V + c`, in the
/// discrete `L²(Q_T)` norm. Second order in `dt`, not zero.
pub fn gauge_residual<T: Real>(yhat: &SpaceTimeField<T>, v: &Potential<T>, c: T) -> Result<T> {
    let prop = Propagator::new(yhat.grid, yhat.tg, &v.clone().shifted(c))?;
    Ok(prop.residual(yhat, None).l2_norm(&yhat.grid, &yhat.tg))
}

/// Positive solution of `−w″ + Vw = 0` with `w = e^{√M}` at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierReport<T> {
    pub grid: SpaceGrid<T>,
    pub w: Vec<T>,
    pub min: T,
    pub max: T,
    pub bounds_hold: bool,
    /// First node violating `e^{−√M} ≤ w ≤ e^{√M}`, with its value.
    pub violation: Option<(T, T)>,
}

pub fn multiplier_solve<T: Real>(
    v: &Potential<T>,
    grid: &SpaceGrid<T>,
    m: T,
) -> Result<MultiplierReport<T>> {
    if !v.is_time_independent() {
        return Err(HeatError::TimeDependentPotential);
    }
    if !(m >= T::zero()) {
        return Err(HeatError::InvalidParameter(format!(
            "M must be nonnegative, got {m}"
        )));
    }
    let samples = grid.sample(|x| v.value(x, T::zero()));
    let top = m.sqrt().exp();
    let inv = (grid.h * grid.h).recip();
    let mut rhs = vec![T::zero(); grid.n];
    rhs[0] += top * inv;
    rhs[grid.n - 1] += top * inv;
    hill_matrix(grid, &samples)
        .factor()
        .ok_or_else(|| HeatError::InvalidParameter("multiplier system is singular".into()))?
        .solve_in_place(&mut rhs);
    let w = rhs;
    let low = top.recip();
    // allow a few ulps at the boundary-adjacent nodes
    let tol = lit::<T>(64.0) * T::epsilon();
    let violation = w
        .iter()
        .enumerate()
        .find(|(_, &x)| x < low * (T::one() - tol) || x > top * (T::one() + tol))
        .map(|(i, &x)| (grid.node(i), x));
    Ok(MultiplierReport {
        grid: *grid,
        min: w.iter().copied().fold(T::infinity(), T::min),
        max: w.iter().copied().fold(T::neg_infinity(), T::max),
        bounds_hold: violation.is_none(),
        violation,
        w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionReport<T> {
    /// `‖−Δ_h u + Ṽu‖` over interior nodes of `(−L, L) × (−Y, Y)`.
    pub residual_norm: T,
    /// `residual_norm / ‖Ṽ‖`-free scale `‖u‖`.
    pub relative_residual: T,
    /// `max |u(x, h_y) − u(x, −h_y)| / (2h_y)`.
    pub neumann_defect: T,
    /// `max |u(x, 0) − Σ α_k φ_k(x)|`.
    pub trace_defect: T,
}

/// Builds `u(x, y) = Σ α_k cosh(√λ_k y) φ_k(x)` with `φ_k` oddly reflected from
/// `(0, L)` to `(−L, L)`, on a `y`-grid of `2·half_rows` cells over `(−Y, Y)`.
///
/// The `x`-direction uses the same difference operator as the basis, so the
/// residual measures the `y`-discretization alone.
pub fn extension_check<T: Real>(
    basis: &HillBasis<T>,
    window: &SpectralWindow<T>,
    coefficients: &[T],
    y_extent: T,
    half_rows: usize,
) -> Result<ExtensionReport<T>> {
    if window
        .indices
        .iter()
        .any(|&k| basis.eigenvalues[k] < T::zero())
    {
        return Err(HeatError::InvalidParameter(
            "window has negative eigenvalues; shift the potential first".into(),
        ));
    }
    if half_rows < 2 || !(y_extent > T::zero()) {
        return Err(HeatError::InvalidParameter(
            "need at least 2 half rows and Y > 0".into(),
        ));
    }
    let trace = basis.combine(window, coefficients)?;
    let n = basis.grid.n;
    let hx = basis.grid.h;
    let hy = y_extent / from_usize(half_rows);
    // x nodes: −x_n..−x_1, 0, x_1..x_n
    let nx = 2 * n + 1;
    let reflect = |u: &[T]| -> Vec<T> {
        let mut out: Vec<T> = u.iter().rev().map(|&v| -v).collect();
        out.push(T::zero());
        out.extend_from_slice(u);
        out
    };
    let pot = {
        let mut p: Vec<T> = basis.potential.iter().rev().copied().collect();
        p.push(basis.potential[0]);
        p.extend_from_slice(&basis.potential);
        p
    };
    let modes: Vec<(T, Vec<T>)> = window
        .indices
        .iter()
        .zip(coefficients)
        .map(|(&k, &a)| {
            (
                basis.eigenvalues[k].sqrt(),
                reflect(&basis.vectors[k]).iter().map(|&v| a * v).collect(),
            )
        })
        .collect();
    let rows = 2 * half_rows + 1;
    let ys: Vec<T> = (0..rows)
        .map(|m| {
            let off = m as i64 - half_rows as i64;
            if off < 0 {
                -(from_usize::<T>(off.unsigned_abs() as usize) * hy)
            } else {
                from_usize::<T>(off as usize) * hy
            }
        })
        .collect();
    let u: Vec<Vec<T>> = ys
        .iter()
        .map(|&y| {
            let mut row = vec![T::zero(); nx];
            for (s, shape) in &modes {
                let c = (*s * y).cosh();
                for (r, &p) in row.iter_mut().zip(shape) {
                    *r += c * p;
                }
            }
            row
        })
        .collect();
    let inv_x = (hx * hx).recip();
    let inv_y = (hy * hy).recip();
    let two: T = lit(2.0);
    let mut res_sq = T::zero();
    let mut u_sq = T::zero();
    for m in 1..rows - 1 {
        for i in 0..nx {
            let left = if i > 0 { u[m][i - 1] } else { T::zero() };
            let right = if i + 1 < nx { u[m][i + 1] } else { T::zero() };
            let lap_x = (left - two * u[m][i] + right) * inv_x;
            let lap_y = (u[m - 1][i] - two * u[m][i] + u[m + 1][i]) * inv_y;
            let r = -(lap_x + lap_y) + pot[i] * u[m][i];
            res_sq += r * r;
            u_sq += u[m][i] * u[m][i];
        }
    }
    let quad = hx * hy;
    let residual_norm = (quad * res_sq).sqrt();
    let u_norm = (quad * u_sq).sqrt();
    let mid = half_rows;
    let neumann_defect = (0..nx)
        .map(|i| ((u[mid + 1][i] - u[mid - 1][i]) / (two * hy)).abs())
        .fold(T::zero(), T::max);
    let trace_defect = (0..n)
        .map(|i| (u[mid][n + 1 + i] - trace[i]).abs())
        .fold(T::zero(), T::max);
    Ok(ExtensionReport {
        residual_norm,
        relative_residual: if u_norm > T::zero() {
            residual_norm / u_norm
        } else {
            T::zero()
        },
        neumann_defect,
        trace_defect,
    })
}
