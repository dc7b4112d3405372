//! Krylov methods: preconditioned CG, preconditioned MINRES and a
//! Lanczos iteration for the largest eigenvalue of a symmetric pencil.
//!
//! All reductions are sequential left-to-right sums, so results do not
//! depend on the thread pool size.

use crate::error::{FeecError, Result};
use crate::linalg::dense::DenseMatrix;
use crate::linalg::sparse::SparseOperator;
use crate::scalar::{axpy, dot, norm2, Real};

pub trait LinearOperator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
}

impl<T: Real> LinearOperator<T> for SparseOperator<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        SparseOperator::apply(self, x, y)
    }
}

/// Adapter turning a closure into an operator.
pub struct FnOperator<F> {
    pub n: usize,
    pub f: F,
}

impl<T, F: Fn(&[T], &mut [T])> LinearOperator<T> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        (self.f)(x, y)
    }
}

/// Diagonal (Jacobi) preconditioner.
pub struct Jacobi<T> {
    inv_diag: Vec<T>,
}

impl<T: Real> Jacobi<T> {
    pub fn new(diag: &[T]) -> Self {
        let inv_diag = diag.iter().map(|&d| if d.abs() > T::zero() { T::one() / d.abs() } else { T::one() }).collect();
        Self { inv_diag }
    }

    pub fn from_operator(a: &SparseOperator<T>) -> Self {
        Self::new(&a.diagonal())
    }
}

impl<T: Real> LinearOperator<T> for Jacobi<T> {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.inv_diag) {
            *yi = *xi * *d;
        }
    }
}

#[derive(Clone, Debug)]
pub struct KrylovOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// True residual `‖b − A x‖ / ‖b‖` at exit.
    pub relative_residual: T,
    pub converged: bool,
}

impl<T: Real> KrylovOutcome<T> {
    /// Converts a non-converged outcome into an error.
    pub fn require(self, method: &'static str) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(FeecError::NonConvergence {
                method,
                iterations: self.iterations,
                residual: self.relative_residual.to_f64_lossy(),
            })
        }
    }
}

fn true_residual<T: Real>(a: &dyn LinearOperator<T>, b: &[T], x: &[T]) -> Vec<T> {
    let mut r = vec![T::zero(); b.len()];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = *bi - *ri;
    }
    r
}

/// Preconditioned conjugate gradients for SPD (or consistent semidefinite)
/// systems. Stops when the true residual drops below `tol * ‖b‖`.
pub fn pcg<T: Real>(
    a: &dyn LinearOperator<T>,
    b: &[T],
    x0: Option<&[T]>,
    precond: Option<&dyn LinearOperator<T>>,
    tol: T,
    max_iter: usize,
) -> KrylovOutcome<T> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![T::zero(); n], |v| v.to_vec());
    if bnorm == T::zero() {
        return KrylovOutcome { x: vec![T::zero(); n], iterations: 0, relative_residual: T::zero(), converged: true };
    }
    let precondition = |r: &[T], z: &mut [T]| match precond {
        Some(p) => p.apply(r, z),
        None => z.copy_from_slice(r),
    };
    let mut iterations = 0;
    let mut restarts = 0;
    loop {
        let mut r = true_residual(a, b, &x);
        let rel = norm2(&r) / bnorm;
        if rel <= tol || iterations >= max_iter || restarts > 8 {
            return KrylovOutcome { x, iterations, relative_residual: rel, converged: rel <= tol };
        }
        restarts += 1;
        let mut z = vec![T::zero(); n];
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![T::zero(); n];
        while iterations < max_iter {
            iterations += 1;
            a.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= T::zero() {
                break;
            }
            let alpha = rz / pap;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            if norm2(&r) <= tol * bnorm * T::lit(0.5) {
                break;
            }
            precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = *zi + beta * *pi;
            }
        }
    }
}

/// Preconditioned MINRES for symmetric (indefinite) systems; `precond`
/// must be symmetric positive definite.
pub fn minres<T: Real>(
    a: &dyn LinearOperator<T>,
    b: &[T],
    precond: Option<&dyn LinearOperator<T>>,
    tol: T,
    max_iter: usize,
) -> KrylovOutcome<T> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return KrylovOutcome { x, iterations: 0, relative_residual: T::zero(), converged: true };
    }
    let precondition = |r: &[T], z: &mut [T]| match precond {
        Some(p) => p.apply(r, z),
        None => z.copy_from_slice(r),
    };
    let mut iterations = 0;
    let mut restarts = 0;
    loop {
        let r0 = true_residual(a, b, &x);
        let rel = norm2(&r0) / bnorm;
        if rel <= tol || iterations >= max_iter || restarts > 8 {
            return KrylovOutcome { x, iterations, relative_residual: rel, converged: rel <= tol };
        }
        restarts += 1;
        let mut r1 = r0.clone();
        let mut r2 = r0;
        let mut y = vec![T::zero(); n];
        precondition(&r1, &mut y);
        let beta1 = dot(&r1, &y).sqrt();
        let mut oldb = T::zero();
        let mut beta = beta1;
        let mut dbar = T::zero();
        let mut epsln = T::zero();
        let mut phibar = beta1;
        let mut cs = -T::one();
        let mut sn = T::zero();
        let mut w = vec![T::zero(); n];
        let mut w2 = vec![T::zero(); n];
        let mut v = vec![T::zero(); n];
        let mut local = 0usize;
        while iterations < max_iter {
            iterations += 1;
            local += 1;
            let s = T::one() / beta;
            for (vi, yi) in v.iter_mut().zip(&y) {
                *vi = s * *yi;
            }
            a.apply(&v, &mut y);
            if local >= 2 {
                axpy(-beta / oldb, &r1, &mut y);
            }
            let alfa = dot(&v, &y);
            axpy(-alfa / beta, &r2, &mut y);
            std::mem::swap(&mut r1, &mut r2);
            r2.copy_from_slice(&y);
            precondition(&r2, &mut y);
            oldb = beta;
            let bb = dot(&r2, &y);
            if bb < T::zero() {
                break;
            }
            beta = bb.sqrt();
            let oldeps = epsln;
            let delta = cs * dbar + sn * alfa;
            let gbar = sn * dbar - cs * alfa;
            epsln = sn * beta;
            dbar = -cs * beta;
            let gamma = gbar.hypot(beta).max(T::EPS);
            cs = gbar / gamma;
            sn = beta / gamma;
            let phi = cs * phibar;
            phibar = sn * phibar;
            let denom = T::one() / gamma;
            for i in 0..n {
                let w1 = w2[i];
                w2[i] = w[i];
                w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
                x[i] = x[i] + phi * w[i];
            }
            if phibar <= tol * beta1 * T::lit(0.1) || beta == T::zero() {
                break;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosOutcome<T> {
    pub value: T,
    pub iterations: usize,
    /// Residual bound `‖K x − θ x‖` in the pencil norm at exit.
    pub residual: T,
}

fn start_vector<T: Real>(n: usize) -> Vec<T> {
    // splitmix64 stream: reproducible, no RNG state shared across calls
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            T::lit((z >> 11) as f64 / (1u64 << 53) as f64 + 0.5)
        })
        .collect()
}

/// Largest eigenvalue of the symmetric-definite pencil `S x = λ R x` by
/// Lanczos on `R⁻¹S` in the `R` inner product, with full
/// reorthogonalization and explicit restarts.
pub fn lanczos_largest<T: Real>(
    apply_s: &dyn Fn(&[T]) -> Vec<T>,
    apply_r: &dyn Fn(&[T]) -> Vec<T>,
    solve_r: &dyn Fn(&[T]) -> Result<Vec<T>>,
    n: usize,
    rel_tol: T,
    max_basis: usize,
    max_restarts: usize,
) -> Result<LanczosOutcome<T>> {
    let mut q = start_vector::<T>(n);
    let mut iterations = 0;
    let mut last = LanczosOutcome { value: T::zero(), iterations: 0, residual: T::infinity() };
    let m_max = max_basis.min(n).max(1);
    for _restart in 0..=max_restarts {
        let rq = apply_r(&q);
        let qn = dot(&q, &rq).sqrt();
        if qn == T::zero() {
            return Err(FeecError::InvalidArgument("Lanczos start vector has zero norm".into()));
        }
        let mut basis: Vec<Vec<T>> = vec![q.iter().map(|&v| v / qn).collect()];
        let mut rbasis: Vec<Vec<T>> = vec![rq.iter().map(|&v| v / qn).collect()];
        let mut alphas: Vec<T> = Vec::new();
        let mut betas: Vec<T> = Vec::new();
        for j in 0..m_max {
            iterations += 1;
            let s = apply_s(&basis[j]);
            let alpha = dot(&basis[j], &s);
            let mut w = solve_r(&s)?;
            alphas.push(alpha);
            // two passes of Gram-Schmidt in the R inner product
            for _ in 0..2 {
                for i in 0..=j {
                    let c = dot(&rbasis[i], &w);
                    axpy(-c, &basis[i], &mut w);
                }
            }
            let rw = apply_r(&w);
            let beta = dot(&w, &rw).max(T::zero()).sqrt();
            let size = j + 1;
            let check = size == m_max || size % 4 == 0 || beta <= T::EPS * alpha.abs();
            if check {
                let mut t = DenseMatrix::zeros(size, size);
                for i in 0..size {
                    t[(i, i)] = alphas[i];
                    if i + 1 < size {
                        t[(i, i + 1)] = betas[i];
                        t[(i + 1, i)] = betas[i];
                    }
                }
                let eig = t.sym_eigen(true);
                let y = eig.vectors.expect("vectors requested").column(size - 1);
                let theta = eig.values[size - 1];
                let res = (beta * y[size - 1]).abs();
                last = LanczosOutcome { value: theta, iterations, residual: res };
                if res <= rel_tol * theta.abs() || beta <= T::EPS * theta.abs() {
                    return Ok(last);
                }
                if size == m_max {
                    let mut ritz = vec![T::zero(); n];
                    for (i, yi) in y.iter().enumerate() {
                        axpy(*yi, &basis[i], &mut ritz);
                    }
                    q = ritz;
                    break;
                }
            }
            betas.push(beta);
            basis.push(w.iter().map(|&v| v / beta).collect());
            rbasis.push(rw.iter().map(|&v| v / beta).collect());
        }
    }
    Err(FeecError::NonConvergence {
        method: "lanczos",
        iterations: last.iterations,
        residual: (last.residual / last.value.abs().max(T::min_positive_value())).to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::CooBuilder;

    fn laplace_1d(n: usize, shift: f64) -> SparseOperator<f64> {
        let mut b = CooBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 2.0 + shift);
            if i > 0 {
                b.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.push(i, i + 1, -1.0);
            }
        }
        b.finalize().with_symmetric(true)
    }

    #[test]
    fn cg_solves_spd() {
        let a = laplace_1d(50, 0.1);
        let xs: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&xs);
        let pre = Jacobi::from_operator(&a);
        let out = pcg(&a, &b, None, Some(&pre), 1e-12, 500);
        assert!(out.converged);
        for (x, e) in out.x.iter().zip(&xs) {
            assert!((x - e).abs() < 1e-9);
        }
    }

    #[test]
    fn minres_solves_indefinite() {
        let a = laplace_1d(40, -1.3);
        let xs: Vec<f64> = (0..40).map(|i| (0.3 * i as f64).cos()).collect();
        let b = a.mul_vec(&xs);
        let out = minres(&a, &b, None, 1e-11, 2000);
        assert!(out.converged, "{:?}", out.relative_residual);
        for (x, e) in out.x.iter().zip(&xs) {
            assert!((x - e).abs() < 1e-7);
        }
    }

    #[test]
    fn lanczos_matches_dense_extreme() {
        let s = laplace_1d(30, 0.0);
        let r = SparseOperator::<f64>::identity(30);
        let dense = DenseMatrix::from_rows(&s.to_dense()).sym_eigen(false);
        let out = lanczos_largest(
            &|v| s.mul_vec(v),
            &|v| r.mul_vec(v),
            &|v| Ok(v.to_vec()),
            30,
            1e-10,
            30,
            4,
        )
        .unwrap();
        assert!((out.value - dense.values[29]).abs() < 1e-9);
    }
}
