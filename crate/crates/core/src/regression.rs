//! Frequency-domain least squares of `Y` on `X`: unconstrained complex
//! coefficients versus real (zero-lag) coefficients, and the residual
//! covariances of both fits.

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_asymmetry, hermitian_eigenvalues, hermitize, psd_floor, rcond_hermitian, rcond_symmetric, re_part,
    solve_hpd, to_complex, trace_re, CMatrix, RMatrix,
};
use crate::spectra::CrossSpectra;

/// Reciprocal condition estimates below this make a fit fail.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Relative tolerance on Hermitian symmetry and on the PSD ordering.
pub const ORDER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FitOptions {
    /// Ridge loading `λ`: `Sxx → Sxx + λ·(tr Sxx / p)·I`. Off when `None`.
    pub ridge_lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditioning {
    pub rcond_sxx: f64,
    pub rcond_re_sxx: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    /// Unconstrained coefficients `Syx·Sxx⁻¹` (q×p, complex).
    pub a1: CMatrix,
    /// Real coefficients `Re Syx·(Re Sxx)⁻¹` (q×p).
    pub a0: RMatrix,
    pub s_eps: CMatrix,
    pub s_delta: CMatrix,
    pub conditioning: Conditioning,
}

/// Both fits on the same (possibly ridge-loaded) `Sxx`.
pub fn fit(cs: &CrossSpectra, opts: FitOptions) -> Result<RegressionFit> {
    let sxx = effective_sxx(cs, opts)?;
    if cs.n_epochs > 0 && cs.n_epochs < cs.p() + cs.q() {
        log::warn!(
            "{}: {} epochs for p = {}, q = {}; at least p + q epochs are recommended",
            cs.label,
            cs.n_epochs,
            cs.p(),
            cs.q()
        );
    }
    let (a1, s_eps, rcond_sxx) = unconstrained_with(cs, &sxx)?;
    let (a0, s_delta, rcond_re_sxx) = constrained_with(cs, &sxx)?;
    Ok(RegressionFit {
        a1,
        a0,
        s_eps,
        s_delta,
        conditioning: Conditioning {
            rcond_sxx,
            rcond_re_sxx,
        },
    })
}

/// `A1 = Syx·Sxx⁻¹` and `Sεε = Syy − Syx·Sxx⁻¹·Sxy`.
pub fn unconstrained_fit(cs: &CrossSpectra, opts: FitOptions) -> Result<(CMatrix, CMatrix)> {
    let sxx = effective_sxx(cs, opts)?;
    unconstrained_with(cs, &sxx).map(|(a, s, _)| (a, s))
}

/// `A0 = (Re Syx)(Re Sxx)⁻¹` and the residual covariance of that real fit.
pub fn constrained_fit(cs: &CrossSpectra, opts: FitOptions) -> Result<(RMatrix, CMatrix)> {
    let sxx = effective_sxx(cs, opts)?;
    constrained_with(cs, &sxx).map(|(a, s, _)| (a, s))
}

fn effective_sxx(cs: &CrossSpectra, opts: FitOptions) -> Result<CMatrix> {
    match opts.ridge_lambda {
        None => Ok(cs.sxx.clone()),
        Some(l) if l.is_finite() && l >= 0.0 => {
            let p = cs.p();
            let load = l * trace_re(&cs.sxx) / p as f64;
            Ok(&cs.sxx + CMatrix::identity(p, p).scale(load))
        }
        Some(l) => Err(Error::Config(format!("ridge lambda must be nonnegative, got {l}"))),
    }
}

fn unconstrained_with(cs: &CrossSpectra, sxx: &CMatrix) -> Result<(CMatrix, CMatrix, f64)> {
    let rcond = rcond_hermitian(sxx);
    if rcond.is_nan() || rcond < RCOND_THRESHOLD {
        return Err(Error::SingularCrossSpectrum { what: "Sxx", rcond });
    }
    // Sxx⁻¹·Sxy, then A1 = (Sxx⁻¹·Sxy)* because Sxx is Hermitian
    let solved = solve_hermitian(sxx, &cs.sxy)
        .ok_or(Error::SingularCrossSpectrum { what: "Sxx", rcond })?;
    let a1 = solved.adjoint();
    let s_eps = hermitize(&(&cs.syy - &a1 * &cs.sxy));
    Ok((a1, s_eps, rcond))
}

fn constrained_with(cs: &CrossSpectra, sxx: &CMatrix) -> Result<(RMatrix, CMatrix, f64)> {
    let re_sxx = re_part(sxx);
    let rcond = rcond_symmetric(&re_sxx);
    if rcond.is_nan() || rcond < RCOND_THRESHOLD {
        return Err(Error::SingularCrossSpectrum { what: "Re Sxx", rcond });
    }
    let re_sxy = re_part(&cs.sxy);
    let solved = match re_sxx.clone().cholesky() {
        Some(ch) => ch.solve(&re_sxy),
        None => re_sxx
            .lu()
            .solve(&re_sxy)
            .ok_or(Error::SingularCrossSpectrum { what: "Re Sxx", rcond })?,
    };
    let a0 = solved.transpose();
    let s_delta = residual_with(&cs.syy, sxx, &cs.sxy, &to_complex(&a0));
    Ok((a0, s_delta, rcond))
}

fn solve_hermitian(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    solve_hpd(a, b).or_else(|| a.clone().lu().solve(b))
}

// Syy + A·Sxx·A* − Syx·A* − A·Sxy, symmetrized
fn residual_with(syy: &CMatrix, sxx: &CMatrix, sxy: &CMatrix, a: &CMatrix) -> CMatrix {
    let a_adj = a.adjoint();
    let syx = sxy.adjoint();
    hermitize(&(syy + a * sxx * &a_adj - syx * &a_adj - a * sxy))
}

/// Residual covariance of an arbitrary complex coefficient matrix.
pub fn residual_covariance(cs: &CrossSpectra, a: &CMatrix) -> CMatrix {
    residual_with(&cs.syy, &cs.sxx, &cs.sxy, a)
}

/// Residual covariance of an arbitrary real coefficient matrix.
pub fn residual_covariance_real(cs: &CrossSpectra, a: &RMatrix) -> CMatrix {
    residual_covariance(cs, &to_complex(a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdOrder {
    /// `Sδδ − Sεε` is PSD within tolerance.
    pub ordered: bool,
    /// Ordered and at least one eigenvalue of the difference is positive
    /// beyond tolerance: lagged association is present.
    pub lagged: bool,
    /// Smallest eigenvalue of `Sδδ − Sεε`.
    pub margin: f64,
}

pub fn psd_order_check(s_eps: &CMatrix, s_delta: &CMatrix) -> Result<PsdOrder> {
    if s_eps.shape() != s_delta.shape() || !s_eps.is_square() {
        return Err(Error::InvalidMatrix(format!(
            "residual covariances have shapes {:?} and {:?}",
            s_eps.shape(),
            s_delta.shape()
        )));
    }
    for (name, m) in [("S_eps", s_eps), ("S_delta", s_delta)] {
        let asym = hermitian_asymmetry(m);
        if !(asym <= ORDER_TOLERANCE) {
            return Err(Error::InvalidMatrix(format!("{name} is not Hermitian (asymmetry {asym:e})")));
        }
    }
    let diff = s_delta - s_eps;
    let ev = hermitian_eigenvalues(&diff);
    let margin = ev[0];
    let floor = psd_floor(s_delta, ORDER_TOLERANCE);
    let ordered = margin >= floor;
    let lagged = ordered && ev.last().copied().unwrap_or(0.0) > -floor;
    Ok(PsdOrder {
        ordered,
        lagged,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use crate::spectra::SpectralLabel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_cs(sxx: f64, syy: f64, syx: Complex64) -> CrossSpectra {
        let one = |z: Complex64| CMatrix::from_element(1, 1, z);
        CrossSpectra::new(one(c(sxx, 0.0)), one(c(syy, 0.0)), one(syx.conj()), 10, SpectralLabel::Frequency { index: 1 })
            .unwrap()
    }

    fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    /// Epoch-level complex data with a lagged and instantaneous coupling.
    fn epoch_data(seed: u64, n: usize, p: usize, q: usize) -> (CMatrix, CMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = CMatrix::from_fn(n, p, |_, _| cgauss(&mut rng));
        let a = CMatrix::from_fn(q, p, |_, _| cgauss(&mut rng));
        let mut y = &x * a.transpose();
        for v in y.iter_mut() {
            *v += cgauss(&mut rng) * 0.5;
        }
        (x, y)
    }

    fn cs_from_epochs(x: &CMatrix, y: &CMatrix) -> CrossSpectra {
        let n = x.nrows() as f64;
        // rows are epochs: Sxx = (1/N) Σ x_e x_e* = Xᵀ·conj(X) / N
        let sxx = (x.transpose() * x.conjugate()).unscale(n);
        let syy = (y.transpose() * y.conjugate()).unscale(n);
        let sxy = (x.transpose() * y.conjugate()).unscale(n);
        CrossSpectra::new(sxx, syy, sxy, x.nrows(), SpectralLabel::Frequency { index: 1 }).unwrap()
    }

    #[test]
    fn scalar_imaginary_coupling() {
        let cs = scalar_cs(1.0, 1.0, c(0.0, 0.6));
        let (_, s_eps) = unconstrained_fit(&cs, FitOptions::default()).unwrap();
        let (a0, s_delta) = constrained_fit(&cs, FitOptions::default()).unwrap();
        assert!((s_eps[(0, 0)].re - 0.64).abs() < 1e-14);
        assert!((s_delta[(0, 0)].re - 1.0).abs() < 1e-14);
        assert_eq!(a0[(0, 0)], 0.0);
    }

    #[test]
    fn scalar_real_coupling_gives_equal_residuals() {
        let cs = scalar_cs(1.0, 1.0, c(0.5, 0.0));
        let f = fit(&cs, FitOptions::default()).unwrap();
        assert!((f.s_eps[(0, 0)].re - 0.75).abs() < 1e-14);
        assert!((f.s_delta[(0, 0)].re - 0.75).abs() < 1e-14);
    }

    #[test]
    fn no_coupling_leaves_syy() {
        let cs = scalar_cs(2.0, 3.0, c(0.0, 0.0));
        let (a1, s_eps) = unconstrained_fit(&cs, FitOptions::default()).unwrap();
        assert_eq!(a1[(0, 0)], c(0.0, 0.0));
        assert_eq!(s_eps, cs.syy);
    }

    #[test]
    fn s_eps_matches_epoch_residual_average() {
        let (x, y) = epoch_data(1, 50, 2, 2);
        let cs = cs_from_epochs(&x, &y);
        let (a1, s_eps) = unconstrained_fit(&cs, FitOptions::default()).unwrap();
        // residual r_e = y_e − A1 x_e, averaged outer product
        let mut direct = CMatrix::zeros(2, 2);
        for e in 0..50 {
            let xe = x.row(e).transpose();
            let ye = y.row(e).transpose();
            let r = ye - &a1 * xe;
            direct += &r * r.adjoint();
        }
        direct.unscale_mut(50.0);
        assert!((direct - &s_eps).norm() < 1e-12 * s_eps.norm());
    }

    /// Real least squares on stacked real/imaginary parts: each row of Y is
    /// regressed on X with a shared real coefficient.
    fn real_ls_oracle(x: &CMatrix, y: &CMatrix) -> RMatrix {
        let n = x.nrows();
        let p = x.ncols();
        let q = y.ncols();
        let design = RMatrix::from_fn(2 * n, p, |r, j| if r < n { x[(r, j)].re } else { x[(r - n, j)].im });
        let target = RMatrix::from_fn(2 * n, q, |r, j| if r < n { y[(r, j)].re } else { y[(r - n, j)].im });
        let normal = design.transpose() * &design;
        let rhs = design.transpose() * target;
        normal.lu().solve(&rhs).unwrap().transpose()
    }

    #[test]
    fn constrained_fit_matches_stacked_real_least_squares() {
        let (x, y) = epoch_data(2, 40, 2, 2);
        let cs = cs_from_epochs(&x, &y);
        let (a0, s_delta) = constrained_fit(&cs, FitOptions::default()).unwrap();
        let oracle = real_ls_oracle(&x, &y);
        assert!((&a0 - &oracle).norm() < 1e-10 * oracle.norm());
        let mut direct = CMatrix::zeros(2, 2);
        let a = to_complex(&oracle);
        for e in 0..40 {
            let r = y.row(e).transpose() - &a * x.row(e).transpose();
            direct += &r * r.adjoint();
        }
        direct.unscale_mut(40.0);
        assert!((direct - s_delta).norm() < 1e-10);
    }

    #[test]
    fn fits_are_stationary_points() {
        let (x, y) = epoch_data(3, 30, 3, 2);
        let cs = cs_from_epochs(&x, &y);
        let f = fit(&cs, FitOptions::default()).unwrap();
        let base_eps = trace_re(&residual_covariance(&cs, &f.a1));
        let base_delta = trace_re(&residual_covariance_real(&cs, &f.a0));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let mut dc = CMatrix::from_fn(2, 3, |_, _| cgauss(&mut rng));
            dc *= Complex64::new(1e-4 / dc.norm(), 0.0);
            let bumped = trace_re(&residual_covariance(&cs, &(&f.a1 + dc)));
            assert!(bumped - base_eps >= -1e-10);
            let mut dr = RMatrix::from_fn(2, 3, |_, _| rng.random::<f64>() - 0.5);
            dr *= 1e-4 / dr.norm();
            let bumped = trace_re(&residual_covariance_real(&cs, &(&f.a0 + dr)));
            assert!(bumped - base_delta >= -1e-10);
        }
    }

    #[test]
    fn real_spectra_make_fits_coincide() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = RMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
        let sxx = to_complex(&(&g * g.transpose() + RMatrix::identity(3, 3)));
        let sxy = to_complex(&RMatrix::from_fn(3, 2, |_, _| rng.random::<f64>() - 0.5));
        let syy = to_complex(&RMatrix::from_diagonal_element(2, 2, 5.0));
        let cs = CrossSpectra::new(sxx, syy, sxy, 10, SpectralLabel::Frequency { index: 1 }).unwrap();
        let f = fit(&cs, FitOptions::default()).unwrap();
        assert!((to_complex(&f.a0) - &f.a1).norm() < 1e-12);
        assert!((&f.s_delta - &f.s_eps).norm() < 1e-12);
    }

    #[test]
    fn singular_sxx_is_reported() {
        let sxx = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let cs = CrossSpectra::new(
            sxx,
            CMatrix::identity(1, 1),
            CMatrix::zeros(2, 1),
            1,
            SpectralLabel::Frequency { index: 1 },
        )
        .unwrap();
        let err = unconstrained_fit(&cs, FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SingularCrossSpectrum { what: "Sxx", .. }));
        assert!(err.to_string().contains("reciprocal condition"));
        // ridge loading rescues it
        let f = fit(&cs, FitOptions { ridge_lambda: Some(0.1) }).unwrap();
        assert!(psd_order_check(&f.s_eps, &f.s_delta).unwrap().ordered);
        assert!(fit(&cs, FitOptions { ridge_lambda: Some(-1.0) }).is_err());
    }

    #[test]
    fn order_check_cases() {
        let i2 = CMatrix::identity(2, 2);
        let o = psd_order_check(&i2, &i2).unwrap();
        assert!(o.ordered && !o.lagged);
        assert!(o.margin.abs() < 1e-15);
        let o = psd_order_check(&i2, &(i2.scale(2.0))).unwrap();
        assert!(o.ordered && o.lagged);
        assert!((o.margin - 1.0).abs() < 1e-12);
        let skew = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(matches!(psd_order_check(&skew, &i2), Err(Error::InvalidMatrix(_))));
    }
}
