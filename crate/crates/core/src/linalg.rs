//! Small dense helpers for Hermitian and real-symmetric matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Relative Hermitian asymmetry `‖M − M*‖_F / ‖M‖_F` (0 for the zero matrix).
pub fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let scale = m.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / scale
}

/// `(M + M*) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).unscale(2.0)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn symmetric_eigenvalues(m: &RMatrix) -> Vec<f64> {
    let sym = (m + m.transpose()).unscale(2.0);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Reciprocal condition estimate `λ_min / λ_max` of a Hermitian PSD matrix,
/// clamped to `[0, 1]`. Returns 0 when the largest eigenvalue is not positive.
pub fn rcond_hermitian(m: &CMatrix) -> f64 {
    rcond_from_sorted(&hermitian_eigenvalues(m))
}

pub fn rcond_symmetric(m: &RMatrix) -> f64 {
    rcond_from_sorted(&symmetric_eigenvalues(m))
}

fn rcond_from_sorted(ev: &[f64]) -> f64 {
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) if hi > 0.0 => (lo / hi).clamp(0.0, 1.0),
        _ => 0.0,
    }
}

/// Lower-triangular `L` with `L·L* = m` for a Hermitian positive definite
/// matrix (only the lower triangle of `m` is read). `None` as soon as a
/// pivot is not strictly positive.
pub fn cholesky_hpd(m: &CMatrix) -> Option<CMatrix> {
    let n = m.nrows();
    if !m.is_square() {
        return None;
    }
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)].re;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return None;
        }
        let d = pivot.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut acc = m[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / d;
        }
    }
    Some(l)
}

/// Solve `m·X = b` for Hermitian positive definite `m`.
pub fn solve_hpd(m: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    let l = cholesky_hpd(m)?;
    let y = l.solve_lower_triangular(b)?;
    l.adjoint().solve_upper_triangular(&y)
}

/// Log-determinant of a Hermitian positive definite matrix via Cholesky.
/// `None` if the factorization breaks down.
pub fn logdet_hpd(m: &CMatrix) -> Option<f64> {
    let l = cholesky_hpd(m)?;
    Some(2.0 * l.diagonal().iter().map(|d| d.re.ln()).sum::<f64>())
}

pub fn logdet_spd(m: &RMatrix) -> Option<f64> {
    logdet_hpd(&to_complex(m))
}

pub fn re_part(m: &CMatrix) -> RMatrix {
    m.map(|z| z.re)
}

pub fn im_part(m: &CMatrix) -> RMatrix {
    m.map(|z| z.im)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Smallest eigenvalue allowed before a Hermitian matrix counts as
/// indefinite: `-rel · max(tr/dim, 0)`.
pub fn psd_floor(m: &CMatrix, rel: f64) -> f64 {
    let dim = m.nrows().max(1) as f64;
    -rel * (trace_re(m) / dim).max(0.0)
}

/// Square root factor `L` with `L L* = m` for a Hermitian PSD matrix; tiny
/// negative eigenvalues from roundoff are clipped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let eig = hermitize(m).symmetric_eigen();
    let mut v = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    v
}

pub fn psd_sqrt_real(m: &RMatrix) -> RMatrix {
    let sym = (m + m.transpose()).unscale(2.0);
    let eig = sym.symmetric_eigen();
    let mut v = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        v.column_mut(j).scale_mut(lambda.max(0.0).sqrt());
    }
    v
}
