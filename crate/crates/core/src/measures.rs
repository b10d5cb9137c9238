//! Lagged association measures computed from the pair of residual
//! covariances, plus the closed forms for univariate targets.
//!
//! * `lagA = ln det Sδδ − ln det Sεε`
//! * `lagC = 1 − det Sεε / det Sδδ = 1 − exp(−lagA)`
//! * `lagB = (1/q)·tr[(Sεε·Sδδ⁻¹ − I)²]`

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_hpd, hermitize, logdet_hpd, logdet_spd, rcond_hermitian, re_part, CMatrix, RMatrix,
};
use crate::regression::{fit, FitOptions, RCOND_THRESHOLD};
use crate::spectra::{CrossSpectra, SpectralLabel};

/// Negative lagA down to this value is roundoff and clamps to zero.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// Relative slack on `|c_xy| ≤ 1` and on `C² ≤ 1`.
pub const COHERENCE_TOLERANCE: f64 = 1e-10;

/// Residual covariances whose reciprocal condition falls below this are
/// treated as singular.
pub const RESIDUAL_RCOND: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaggedResult {
    #[serde(rename = "lagA")]
    pub lag_a: f64,
    #[serde(rename = "lagC")]
    pub lag_c: f64,
    #[serde(rename = "lagB")]
    pub lag_b: f64,
    pub p: usize,
    pub q: usize,
    pub label: Option<SpectralLabel>,
    /// Set for real-valued frequencies and when a small negative value was
    /// clamped to zero.
    pub degenerate: bool,
}

impl LaggedResult {
    pub fn zero(p: usize, q: usize, label: Option<SpectralLabel>) -> Self {
        LaggedResult {
            lag_a: 0.0,
            lag_c: 0.0,
            lag_b: 0.0,
            p,
            q,
            label,
            degenerate: true,
        }
    }

    fn from_lag_a(lag_a: f64, lag_b: f64, p: usize, q: usize) -> Result<Self> {
        let (lag_a, clamped) = clamp_lag(lag_a)?;
        Ok(LaggedResult {
            lag_a,
            lag_c: lag_c_from_a(lag_a),
            lag_b,
            p,
            q,
            label: None,
            degenerate: clamped,
        })
    }
}

/// `1 − exp(−lagA)` without cancellation near zero.
pub fn lag_c_from_a(lag_a: f64) -> f64 {
    -(-lag_a).exp_m1()
}

fn clamp_lag(lag_a: f64) -> Result<(f64, bool)> {
    if lag_a.is_nan() {
        return Err(Error::Internal("lagA evaluated to NaN".into()));
    }
    if lag_a >= 0.0 {
        Ok((lag_a, false))
    } else if lag_a > -CLAMP_TOLERANCE {
        Ok((0.0, true))
    } else {
        Err(Error::Internal(format!(
            "lagA = {lag_a:e} is negative beyond roundoff; the constrained fit beat the unconstrained one"
        )))
    }
}

fn checked_logdet(m: &CMatrix) -> Option<f64> {
    if rcond_hermitian(m) < RESIDUAL_RCOND {
        return None;
    }
    logdet_hpd(m)
}

/// Lagged measures from the unconstrained (`s_eps`) and real-constrained
/// (`s_delta`) residual covariances, both q×q.
pub fn lagged_measures(s_eps: &CMatrix, s_delta: &CMatrix, p: usize) -> Result<LaggedResult> {
    let q = s_eps.nrows();
    if s_delta.shape() != (q, q) || !s_eps.is_square() {
        return Err(Error::InvalidMatrix(format!(
            "residual covariances have shapes {:?} and {:?}",
            s_eps.shape(),
            s_delta.shape()
        )));
    }
    let ld_delta = checked_logdet(s_delta)
        .ok_or_else(|| Error::DegenerateResidual("constrained residual covariance is singular".into()))?;
    let ld_eps = checked_logdet(s_eps).ok_or(Error::PerfectLaggedFit)?;
    let lag_b = nagao(s_eps, s_delta)?;
    LaggedResult::from_lag_a(ld_delta - ld_eps, lag_b, p, q)
}

// With Sδδ = L L*, Sεε·Sδδ⁻¹ is similar to the Hermitian M = L⁻¹ Sεε L⁻*,
// so tr[(Sεε Sδδ⁻¹ − I)²] = ‖M − I‖_F².
fn nagao(s_eps: &CMatrix, s_delta: &CMatrix) -> Result<f64> {
    let q = s_eps.nrows();
    let l = cholesky_hpd(s_delta)
        .ok_or_else(|| Error::DegenerateResidual("constrained residual covariance is not positive definite".into()))?;
    let left = l
        .solve_lower_triangular(s_eps)
        .ok_or_else(|| Error::DegenerateResidual("triangular solve failed".into()))?;
    let m = l
        .solve_lower_triangular(&left.adjoint())
        .ok_or_else(|| Error::DegenerateResidual("triangular solve failed".into()))?;
    let m = hermitize(&m);
    let dev = m - CMatrix::identity(q, q);
    Ok(dev.norm_squared() / q as f64)
}

/// Full pipeline for one block of cross-spectra: both fits, then the
/// lagged measures.
pub fn measures_from_cross_spectra(cs: &CrossSpectra, opts: FitOptions) -> Result<LaggedResult> {
    let f = fit(cs, opts)?;
    let mut r = lagged_measures(&f.s_eps, &f.s_delta, cs.p())?;
    r.label = Some(cs.label.clone());
    Ok(r)
}

/// Complex coherency `s_xy / √(s_xx·s_yy)`.
pub fn coherency(sxx: f64, syy: f64, sxy: Complex64) -> Result<Complex64> {
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::InvalidCoherence(format!(
            "auto-spectra must be positive (sxx = {sxx}, syy = {syy})"
        )));
    }
    let c = sxy / (sxx * syy).sqrt();
    if c.norm_sqr() > 1.0 + COHERENCE_TOLERANCE {
        return Err(Error::InvalidCoherence(format!("|c_xy| = {} exceeds 1", c.norm())));
    }
    Ok(c)
}

/// Closed forms for univariate `x` and `y`.
pub fn bivariate_lagged(sxx: f64, syy: f64, sxy: Complex64) -> Result<LaggedResult> {
    let c = coherency(sxx, syy, sxy)?;
    bivariate_from_coherency(c)
}

pub fn bivariate_from_coherency(c: Complex64) -> Result<LaggedResult> {
    let re2 = c.re * c.re;
    let im2 = c.im * c.im;
    if re2 + im2 > 1.0 + COHERENCE_TOLERANCE {
        return Err(Error::InvalidCoherence(format!("|c_xy| = {} exceeds 1", c.norm())));
    }
    let instantaneous = 1.0 - re2;
    if instantaneous <= 0.0 {
        return Err(Error::DegenerateResidual("real coherency is ±1".into()));
    }
    let rest = instantaneous - im2;
    if rest <= 0.0 {
        return Err(Error::PerfectLaggedFit);
    }
    let lag_a = (im2 / rest).ln_1p();
    let lag_c = im2 / instantaneous;
    Ok(LaggedResult {
        lag_a,
        lag_c,
        // Sεε/Sδδ = 1 − lagC
        lag_b: lag_c * lag_c,
        p: 1,
        q: 1,
        label: None,
        degenerate: false,
    })
}

/// Squared multiple correlations of a univariate target, complex and
/// real-part versions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultipleCorrelations {
    pub c_sq: f64,
    pub r_sq: f64,
}

pub fn multiple_correlations(cs: &CrossSpectra) -> Result<MultipleCorrelations> {
    if cs.q() != 1 {
        return Err(Error::ShapeMismatch(format!("univariate target required, q = {}", cs.q())));
    }
    let syy = cs.syy[(0, 0)].re;
    if !(syy > 0.0) {
        return Err(Error::DegenerateResidual(format!("target auto-spectrum is {syy}")));
    }
    let rcond = rcond_hermitian(&cs.sxx);
    if rcond < RCOND_THRESHOLD {
        return Err(Error::SingularCrossSpectrum { what: "Sxx", rcond });
    }
    let quad = cs.syx() * hermitize(&cs.sxx).lu().solve(&cs.sxy).ok_or(Error::SingularCrossSpectrum { what: "Sxx", rcond })?;
    let re_sxx = re_part(&cs.sxx);
    let re_rcond = crate::linalg::rcond_symmetric(&re_sxx);
    if re_rcond < RCOND_THRESHOLD {
        return Err(Error::SingularCrossSpectrum {
            what: "Re Sxx",
            rcond: re_rcond,
        });
    }
    let re_sxy = re_part(&cs.sxy);
    let re_quad: RMatrix = re_sxy.transpose()
        * re_sxx.lu().solve(&re_sxy).ok_or(Error::SingularCrossSpectrum {
            what: "Re Sxx",
            rcond: re_rcond,
        })?;
    Ok(MultipleCorrelations {
        c_sq: quad[(0, 0)].re / syy,
        r_sq: re_quad[(0, 0)] / syy,
    })
}

/// Closed forms for a univariate target and a p-variate regressor, from the
/// squared multiple correlations.
pub fn univariate_multivariate_lagged(cs: &CrossSpectra) -> Result<LaggedResult> {
    let mc = multiple_correlations(cs)?;
    let mut r = lagged_from_correlations(mc, cs.p())?;
    r.label = Some(cs.label.clone());
    Ok(r)
}

pub fn lagged_from_correlations(mc: MultipleCorrelations, p: usize) -> Result<LaggedResult> {
    let MultipleCorrelations { c_sq, r_sq } = mc;
    if c_sq > 1.0 + COHERENCE_TOLERANCE || r_sq > 1.0 + COHERENCE_TOLERANCE {
        return Err(Error::InvalidCoherence(format!("C² = {c_sq}, R² = {r_sq} exceed 1")));
    }
    let unexplained = 1.0 - c_sq;
    if unexplained <= COHERENCE_TOLERANCE {
        return Err(Error::PerfectLaggedFit);
    }
    let instantaneous = 1.0 - r_sq;
    let lag_a = ((c_sq - r_sq) / unexplained).ln_1p();
    let lag_c = (c_sq - r_sq) / instantaneous;
    let (lag_a, clamped) = clamp_lag(lag_a)?;
    let lag_c = if clamped { 0.0 } else { lag_c };
    Ok(LaggedResult {
        lag_a,
        lag_c,
        lag_b: lag_c * lag_c,
        p,
        q: 1,
        label: None,
        degenerate: clamped,
    })
}

/// The earlier multivariate lagged coherence built from determinants of
/// the joint cross-spectral matrix and its real part:
///
/// `1 − det(S)·det(Re Sxx)·det(Re Syy) / (det(Sxx)·det(Syy)·det(Re S))`
/// with `S = [[Sxx, Sxy], [Syx, Syy]]`.
pub fn legacy_lag_c(cs: &CrossSpectra) -> Result<f64> {
    let p = cs.p();
    let q = cs.q();
    let mut joint = CMatrix::zeros(p + q, p + q);
    joint.view_mut((0, 0), (p, p)).copy_from(&cs.sxx);
    joint.view_mut((0, p), (p, q)).copy_from(&cs.sxy);
    joint.view_mut((p, 0), (q, p)).copy_from(&cs.syx());
    joint.view_mut((p, p), (q, q)).copy_from(&cs.syy);

    let singular = |what: &str| Error::DegenerateResidual(format!("{what} is singular"));
    let ld = |m: &CMatrix, what: &str| checked_logdet(m).ok_or_else(|| singular(what));
    let ld_re = |m: &RMatrix, what: &str| {
        if crate::linalg::rcond_symmetric(m) < RESIDUAL_RCOND {
            return Err(singular(what));
        }
        logdet_spd(m).ok_or_else(|| singular(what))
    };

    let log_ratio = ld(&joint, "joint cross-spectrum")? + ld_re(&re_part(&cs.sxx), "Re Sxx")?
        + ld_re(&re_part(&cs.syy), "Re Syy")?
        - ld(&cs.sxx, "Sxx")?
        - ld(&cs.syy, "Syy")?
        - ld_re(&re_part(&joint), "Re joint cross-spectrum")?;
    Ok(-log_ratio.exp_m1())
}
