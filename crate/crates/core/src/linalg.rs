//! Small dense and tridiagonal kernels used by the solvers.

use crate::error::{HeatError, Result};
use crate::scalar::{from_usize, lit, Real};

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale<T: Real>(alpha: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal<T> {
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

impl<T: Real> SymTridiagonal<T> {
    pub fn new(diag: Vec<T>, off: Vec<T>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1));
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.diag.len();
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    /// LU factorization without pivoting (Thomas algorithm).
    ///
    /// Returns `None` when a pivot vanishes relative to the local row scale.
    pub fn factor(&self) -> Option<TridiagonalFactor<T>> {
        let n = self.diag.len();
        let mut inv_pivot = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n.saturating_sub(1));
        let guard = T::epsilon() * lit(16.0);
        let mut prev_upper = T::zero();
        for i in 0..n {
            let coupling = if i > 0 { self.off[i - 1] } else { T::zero() };
            let pivot = self.diag[i] - coupling * prev_upper;
            let row_scale = self.diag[i].abs()
                + coupling.abs()
                + if i + 1 < n {
                    self.off[i].abs()
                } else {
                    T::zero()
                };
            if !pivot.is_finite() || pivot.abs() <= guard * row_scale {
                return None;
            }
            let ip = pivot.recip();
            inv_pivot.push(ip);
            if i + 1 < n {
                prev_upper = self.off[i] * ip;
                upper.push(prev_upper);
            }
        }
        Some(TridiagonalFactor {
            lower: self.off.clone(),
            inv_pivot,
            upper,
        })
    }
}

/// Precomputed Thomas factorization of a tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagonalFactor<T> {
    lower: Vec<T>,
    inv_pivot: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> TridiagonalFactor<T> {
    pub fn solve_in_place(&self, rhs: &mut [T]) {
        let n = self.inv_pivot.len();
        if n == 0 {
            return;
        }
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            let v = (rhs[i] - self.lower[i - 1] * rhs[i - 1]) * self.inv_pivot[i];
            rhs[i] = v;
        }
        for i in (0..n - 1).rev() {
            let v = rhs[i] - self.upper[i] * rhs[i + 1];
            rhs[i] = v;
        }
    }
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// True residual `‖b − A x‖ / ‖b‖` at exit.
    pub relative_residual: T,
    pub converged: bool,
}

/// Matrix-free conjugate gradient for symmetric positive (semi)definite operators.
///
/// Convergence is declared on the recomputed true residual; when the recursive
/// residual drifts away from it the iteration restarts from the current iterate.
pub fn conjugate_gradient<T, F>(
    mut apply: F,
    b: &[T],
    x0: Option<Vec<T>>,
    tol: T,
    max_iter: usize,
) -> Result<CgOutcome<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == T::zero() {
        return Ok(CgOutcome {
            x: vec![T::zero(); n],
            iterations: 0,
            relative_residual: T::zero(),
            converged: true,
        });
    }
    let mut x = x0.unwrap_or_else(|| vec![T::zero(); n]);
    if x.len() != n {
        return Err(HeatError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let target = tol * b_norm;
    let mut iterations = 0;

    let residual_of = |x: &[T], apply: &mut F| -> Result<Vec<T>> {
        let ax = apply(x)?;
        Ok(b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect())
    };

    let mut r = residual_of(&x, &mut apply)?;
    loop {
        let res = norm(&r);
        if res <= target || iterations >= max_iter {
            return Ok(CgOutcome {
                x,
                iterations,
                relative_residual: res / b_norm,
                converged: res <= target,
            });
        }
        let cycle_start = iterations;
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        while iterations < max_iter {
            let ap = apply(&p)?;
            let pap = dot(&p, &ap);
            if pap <= T::zero() || !pap.is_finite() {
                break;
            }
            let alpha = rr / pap;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            iterations += 1;
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= target {
                break;
            }
            let beta = rr_new / rr;
            for (pi, &ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            rr = rr_new;
        }
        // Restart from the true residual; the recursive one drifts on
        // ill-conditioned operators.
        r = residual_of(&x, &mut apply)?;
        if iterations == cycle_start {
            let res = norm(&r);
            return Ok(CgOutcome {
                x,
                iterations,
                relative_residual: res / b_norm,
                converged: res <= target,
            });
        }
    }
}

/// Full eigendecomposition of a symmetric tridiagonal matrix by implicit QL
/// with Wilkinson shifts.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// unit-norm (Euclidean) columns, one `Vec` per eigenvector.
pub fn sym_tridiagonal_eigen<T: Real>(matrix: &SymTridiagonal<T>) -> (Vec<T>, Vec<Vec<T>>) {
    let n = matrix.len();
    let mut d = matrix.diag.clone();
    let mut e = matrix.off.clone();
    e.push(T::zero());
    // z is row-major: z[k * n + j] is component k of eigenvector j.
    let mut z = vec![T::zero(); n * n];
    for i in 0..n {
        z[i * n + i] = T::one();
    }
    let two: T = lit(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 200, "implicit QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let signed_r = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + signed_r);
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zf = z[k * n + i + 1];
                    let zi = z[k * n + i];
                    z[k * n + i + 1] = s * zi + c * zf;
                    z[k * n + i] = c * zi - s * zf;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&j| d[j]).collect();
    let vectors = order
        .iter()
        .map(|&j| (0..n).map(|k| z[k * n + j]).collect())
        .collect();
    (values, vectors)
}

/// Dense lower Cholesky factor of a row-major SPD matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Returns `None` if the matrix is not numerically positive definite.
    pub fn new(a: &[T], n: usize) -> Option<Self> {
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut diag = a[j * n + j];
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return None;
            }
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in j + 1..n {
                let mut acc = a[i * n + j];
                for k in 0..j {
                    acc -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = acc / ljj;
            }
        }
        Some(Self { n, l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= self.l[i * n + k] * y[k];
            }
            y[i] = acc / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= self.l[k * n + i] * y[k];
            }
            y[i] = acc / self.l[i * n + i];
        }
        y
    }
}

/// Singular values of a tall matrix given by its columns, with the right
/// singular vectors, by one-sided (Hestenes) Jacobi rotations.
///
/// Small singular values are obtained to high relative accuracy when the
/// columns are well scaled, which forming `AᵀA` would destroy.
/// Returns `(σ, V)` with `σ` descending and `V[k]` the `k`-th right vector.
pub fn jacobi_svd<T: Real>(columns: &[Vec<T>]) -> (Vec<T>, Vec<Vec<T>>) {
    let m = columns.len();
    let mut a: Vec<Vec<T>> = columns.to_vec();
    let mut v: Vec<Vec<T>> = (0..m)
        .map(|k| {
            (0..m)
                .map(|j| if j == k { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    let tol = T::epsilon() * from_usize(a.first().map_or(1, Vec::len));
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = (T::one() + t * t).sqrt().recip();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    let (left, right) = mat.split_at_mut(q);
                    for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                        let (xp, yq) = (*x, *y);
                        *x = c * xp - s * yq;
                        *y = s * xp + c * yq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut pairs: Vec<(T, Vec<T>)> = a.iter().map(|col| norm(col)).zip(v).collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    pairs.into_iter().unzip()
}

/// Row-major dense matrix-vector product.
pub fn dense_apply<T: Real>(a: &[T], n: usize, x: &[T]) -> Vec<T> {
    (0..n).map(|i| dot(&a[i * n..(i + 1) * n], x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiagonal<f64> {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn thomas_solves_laplacian() {
        let a = laplacian(9);
        let x: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut b = a.apply(&x);
        a.factor().unwrap().solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_pivot_is_detected() {
        let a = SymTridiagonal::new(vec![1.0, 1.0], vec![1.0]);
        assert!(a.factor().is_none());
    }

    #[test]
    fn ql_matches_closed_form_laplacian_spectrum() {
        let n = 12;
        let (vals, vecs) = sym_tridiagonal_eigen(&laplacian(n));
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13, "{k}: {v} vs {exact}");
        }
        for j in 0..n {
            assert!((norm(&vecs[j]) - 1.0).abs() < 1e-13);
            for k in 0..j {
                assert!(dot(&vecs[j], &vecs[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = laplacian(20);
        let x: Vec<f64> = (0..20).map(|i| 1.0 + i as f64).collect();
        let b = a.apply(&x);
        let out = conjugate_gradient(|v| Ok(a.apply(v)), &b, None, 1e-12, 200).unwrap();
        assert!(out.converged);
        assert!(out.relative_residual <= 1e-12);
        for (u, v) in out.x.iter().zip(&x) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn jacobi_svd_matches_known_spectrum() {
        // columns of diag(3, 2, 1e-9) rotated by an orthogonal matrix
        let c = (0.3f64).cos();
        let s = (0.3f64).sin();
        let q = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        let d = [3.0, 2.0, 1e-9];
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|j| {
                (0..4)
                    .map(|i| if i < 3 { q[i][j] * d[j] } else { 0.0 })
                    .collect()
            })
            .collect();
        let mixed: Vec<Vec<f64>> = vec![
            cols[0].iter().zip(&cols[2]).map(|(a, b)| a + b).collect(),
            cols[1].clone(),
            cols[2].clone(),
        ];
        let (sv, vecs) = jacobi_svd(&mixed);
        assert_eq!(sv.len(), 3);
        let prod: f64 = sv.iter().product();
        assert!((prod - 6e-9).abs() < 1e-20);
        assert!(sv[2] > 0.0 && sv[2] < 1e-8);
        for j in 0..3 {
            assert!((norm(&vecs[j]) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cg_zero_rhs_returns_zero() {
        let a = laplacian(4);
        let out = conjugate_gradient(|v| Ok(a.apply(v)), &[0.0; 4], None, 1e-12, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cholesky_round_trip() {
        let a: Vec<f64> = vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let chol = Cholesky::new(&a, 3).unwrap();
        let x = vec![1.0, -2.0, 0.5];
        let b = dense_apply(&a, 3, &x);
        let y = chol.solve(&b);
        for (u, v) in y.iter().zip(&x) {
            assert!((u - v).abs() < 1e-14);
        }
        assert!(Cholesky::new(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }
}
