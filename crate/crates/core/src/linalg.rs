//! Complex-matrix substrate shared by every module: aliases for dense
//! complex matrices plus the handful of Hermitian-matrix routines the
//! channel machinery is built on.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CScalar = Complex64;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Eigenvalues within this distance of zero are clamped to 0 before
/// square roots and logarithms.
pub const EIG_CLAMP: f64 = 1e-10;

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `‖A − A†‖_F`
pub fn hermiticity_residual(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// `tr(A·B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let n = a.nrows();
    let k = a.ncols();
    let mut acc = C_ZERO;
    for i in 0..n {
        for j in 0..k {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `Re tr(A†·B)`, the real Hilbert-Schmidt inner product.
pub fn hs_inner_re(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Cyclic-Jacobi diagonalization of a Hermitian matrix.
///
/// nalgebra's `symmetric_eigen` can emit NaN on spectra with large clusters
/// of (near-)zero eigenvalues — exactly the rank-deficient Choi matrices this
/// library is designed to produce — so eigenvalues are computed with the
/// unconditionally convergent Jacobi iteration instead. Cost is O(n³) per
/// sweep, which is irrelevant at the ≤64×64 sizes appearing here.
fn jacobi_hermitian(m: &CMat) -> (Vec<f64>, CMat) {
    const MAX_SWEEPS: usize = 50;
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = CMat::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= f64::EPSILON * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = a[(p, q)];
                let b = beta.norm();
                // Entries this small cannot lift the off-diagonal norm above
                // the stopping threshold, and rotating on them risks
                // subnormal-division artifacts.
                if b <= f64::EPSILON * scale * 1e-2 {
                    continue;
                }
                // Phase-align the pivot to the real case, then rotate by the
                // smaller-magnitude root of t² + 2τt − 1 = 0 (keeps |θ| ≤ π/4,
                // which is what guarantees cyclic convergence).
                let u = Complex64::new(beta.re / b, -beta.im / b);
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A ← J†AJ and V ← VJ with J = [[c, s], [−s·u, c·u]] on (p,q).
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = cr(c) * akp - cr(s) * u * akq;
                    a[(k, q)] = cr(s) * akp + cr(c) * u * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = cr(c) * apk - cr(s) * u.conj() * aqk;
                    a[(q, k)] = cr(s) * apk + cr(c) * u.conj() * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = cr(c) * vkp - cr(s) * u * vkq;
                    v[(k, q)] = cr(s) * vkp + cr(c) * u * vkq;
                }
                a[(p, q)] = C_ZERO;
                a[(q, p)] = C_ZERO;
                a[(p, p)] = cr(a[(p, p)].re);
                a[(q, q)] = cr(a[(q, q)].re);
            }
        }
    }
    let values: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    (values, v)
}

/// Hermitian eigendecomposition, eigenvalues sorted descending.
///
/// Returns `(values, vectors)` with vectors as columns matching the sorted
/// order. The input is assumed Hermitian; only numerical drift is tolerated.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let (raw, raw_vectors) = jacobi_hermitian(m);
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw[b].partial_cmp(&raw[a]).expect("finite eigenvalues"));
    let values: Vec<f64> = order.iter().map(|&i| raw[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &raw_vectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues only, sorted descending.
pub fn eigh_values(m: &CMat) -> Vec<f64> {
    let (mut v, _) = jacobi_hermitian(m);
    v.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    v
}

/// Eigendecomposition of a real symmetric matrix through the Hermitian
/// solver; same descending order and robustness guarantees as [`eigh`].
pub fn eigh_real(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let complex = CMat::from_fn(m.nrows(), m.ncols(), |i, j| cr(m[(i, j)]));
    let (values, vectors) = eigh(&complex);
    let real_vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| vectors[(i, j)].re);
    (values, real_vectors)
}

/// Principal square root of a Hermitian PSD matrix.
///
/// Negative eigenvalues (numerical drift) are clamped to zero.
pub fn sqrtm_psd(m: &CMat) -> CMat {
    let (values, vectors) = eigh(m);
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for (idx, &lambda) in values.iter().enumerate() {
        let s = if lambda > 0.0 { lambda.sqrt() } else { 0.0 };
        if s == 0.0 {
            continue;
        }
        let v = vectors.column(idx);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += cr(s) * v[i] * v[j].conj();
            }
        }
    }
    out
}

/// Thin QR with the column-phase fix: each column of Q is multiplied by the
/// conjugate phase of the corresponding diagonal entry of R (phase of 0 is
/// taken as 1), which makes QR-based sampling uniform over the manifold.
pub fn qr_phase_fixed(a: &CMat) -> CMat {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            (rjj / rjj.norm()).conj()
        } else {
            C_ONE
        };
        for i in 0..q.nrows() {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Partial trace over the first tensor factor of a `(d·d)×(d·d)` matrix.
pub fn partial_trace_first(m: &CMat, d: usize) -> Result<CMat> {
    if m.nrows() != d * d || m.ncols() != d * d {
        return Err(Error::DimensionMismatch(format!(
            "partial trace expects {0}x{0}, got {1}x{2}",
            d * d,
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = CMat::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            for bp in 0..d {
                out[(b, bp)] += m[(a * d + b, a * d + bp)];
            }
        }
    }
    Ok(out)
}

/// Partial trace over the second tensor factor of a `(d·d)×(d·d)` matrix.
pub fn partial_trace_second(m: &CMat, d: usize) -> Result<CMat> {
    if m.nrows() != d * d || m.ncols() != d * d {
        return Err(Error::DimensionMismatch(format!(
            "partial trace expects {0}x{0}, got {1}x{2}",
            d * d,
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = CMat::zeros(d, d);
    for a in 0..d {
        for ap in 0..d {
            for b in 0..d {
                out[(a, ap)] += m[(a * d + b, ap * d + b)];
            }
        }
    }
    Ok(out)
}
