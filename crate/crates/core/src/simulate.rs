//! Ground-truth data from the Granger-causal model
//!
//! ```text
//! Y(t) = B·X(t) + Σ_{k=1..m} D(k)·X(t−k) + ε(t)
//! ```
//!
//! and the population-level covariances it implies at each frequency.
//!
//! Random streams: every epoch `e` draws from ChaCha8 seeded with `seed`
//! on stream `e`, so output does not depend on how epochs are scheduled.
//! Within an epoch the time-domain generator draws all `X` samples (warm-up
//! first, row-major over channels) and then all noise samples. Complex
//! Gaussians are circularly symmetric: real and imaginary parts are
//! independent `N(0, 1/2)` before being mapped through a square root of the
//! target covariance, so `E[z z*]` equals the target exactly.

use ndarray::Array3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_asymmetry, hermitian_eigenvalues, hermitize, im_part, psd_floor, psd_sqrt, psd_sqrt_real, rcond_symmetric,
    re_part, to_complex, CMatrix, RMatrix,
};
use crate::regression::RCOND_THRESHOLD;
use crate::spectra::{CrossSpectra, EpochedTimeSeries, SpectralLabel, SpectralTensor};

/// How the `X` process is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum XSpec {
    /// White Gaussian in time with the given real p×p covariance.
    WhiteGaussian { cov: RMatrix },
    /// Fourier coefficients drawn directly at the listed frequencies.
    Spectral { components: Vec<SpectralComponent> },
}

/// Frequency-domain generation target at one frequency: `X(ω)` has
/// covariance `sxx` and the additive noise `ε(ω)` has covariance `s_eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralComponent {
    pub frequency: usize,
    pub sxx: CMatrix,
    pub s_eps: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    /// Instantaneous coupling, q×p.
    pub b: RMatrix,
    /// Lag coefficients `D(1)..D(m)`, each q×p.
    pub d_lags: Vec<RMatrix>,
    /// Time-domain noise covariance, q×q.
    pub noise_cov: RMatrix,
    pub x_spec: XSpec,
    /// Epoch length N_T.
    pub n_samples: usize,
}

impl GenerativeModel {
    pub fn new(b: RMatrix, d_lags: Vec<RMatrix>, noise_cov: RMatrix, x_spec: XSpec, n_samples: usize) -> Result<Self> {
        let model = GenerativeModel {
            b,
            d_lags,
            noise_cov,
            x_spec,
            n_samples,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn p(&self) -> usize {
        self.b.ncols()
    }

    pub fn q(&self) -> usize {
        self.b.nrows()
    }

    pub fn order(&self) -> usize {
        self.d_lags.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (q, p) = self.b.shape();
        if p == 0 || q == 0 {
            return Err(Error::ShapeMismatch("B must be at least 1×1".into()));
        }
        if self.n_samples < 2 {
            return Err(Error::ShapeMismatch(format!("epoch length must be ≥ 2, got {}", self.n_samples)));
        }
        for (k, d) in self.d_lags.iter().enumerate() {
            if d.shape() != (q, p) {
                return Err(Error::ShapeMismatch(format!(
                    "D({}) is {:?}, expected {:?}",
                    k + 1,
                    d.shape(),
                    (q, p)
                )));
            }
        }
        check_psd_real("noise covariance", &self.noise_cov, q)?;
        match &self.x_spec {
            XSpec::WhiteGaussian { cov } => check_psd_real("X covariance", cov, p)?,
            XSpec::Spectral { components } => {
                for c in components {
                    check_psd_complex(&format!("Sxx at frequency {}", c.frequency), &c.sxx, p)?;
                    check_psd_complex(&format!("S_eps at frequency {}", c.frequency), &c.s_eps, q)?;
                    if c.frequency > self.n_samples / 2 {
                        return Err(Error::ShapeMismatch(format!(
                            "frequency {} exceeds N_T/2 = {}",
                            c.frequency,
                            self.n_samples / 2
                        )));
                    }
                }
            }
        }
        if self.b.iter().chain(self.d_lags.iter().flat_map(|d| d.iter())).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("model coefficients must be finite".into()));
        }
        Ok(())
    }
}

fn check_psd_real(what: &str, m: &RMatrix, dim: usize) -> Result<()> {
    check_psd_complex(what, &to_complex(m), dim)
}

fn check_psd_complex(what: &str, m: &CMatrix, dim: usize) -> Result<()> {
    if m.shape() != (dim, dim) {
        return Err(Error::ShapeMismatch(format!("{what} is {:?}, expected {dim}×{dim}", m.shape())));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidData(format!("{what} has non-finite entries")));
    }
    if hermitian_asymmetry(m) > 1e-12 {
        return Err(Error::InvalidMatrix(format!("{what} is not symmetric/Hermitian")));
    }
    if hermitian_eigenvalues(m)[0] < psd_floor(m, 1e-10) {
        return Err(Error::InvalidMatrix(format!("{what} is not positive semidefinite")));
    }
    Ok(())
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// Time-domain simulation with white Gaussian `X`. Each epoch generates
/// `m` warm-up samples that are discarded, so every lag inside the epoch
/// refers to a generated sample.
pub fn generate_var(model: &GenerativeModel, n_epochs: usize, seed: u64) -> Result<(EpochedTimeSeries, EpochedTimeSeries)> {
    model.validate()?;
    let XSpec::WhiteGaussian { cov } = &model.x_spec else {
        return Err(Error::Config("time-domain simulation needs a white Gaussian X specification".into()));
    };
    if n_epochs < 1 {
        return Err(Error::Config("at least one epoch must be simulated".into()));
    }
    let (q, p) = model.b.shape();
    let m = model.order();
    let n_t = model.n_samples;
    let lx = psd_sqrt_real(cov);
    let le = psd_sqrt_real(&model.noise_cov);

    let epochs: Vec<(Vec<f64>, Vec<f64>)> = (0..n_epochs)
        .into_par_iter()
        .map(|e| {
            let mut rng = epoch_rng(seed, e);
            let total = n_t + m;
            let mut x = vec![0.0; total * p];
            let mut z = vec![0.0; p.max(q)];
            for t in 0..total {
                for v in z.iter_mut().take(p) {
                    *v = rng.sample(StandardNormal);
                }
                for i in 0..p {
                    x[t * p + i] = (0..p).map(|j| lx[(i, j)] * z[j]).sum();
                }
            }
            let mut y = vec![0.0; n_t * q];
            for t in 0..n_t {
                for v in z.iter_mut().take(q) {
                    *v = rng.sample(StandardNormal);
                }
                let now = t + m;
                for i in 0..q {
                    let mut acc: f64 = (0..q).map(|j| le[(i, j)] * z[j]).sum();
                    acc += (0..p).map(|j| model.b[(i, j)] * x[now * p + j]).sum::<f64>();
                    for (k, d) in model.d_lags.iter().enumerate() {
                        let lagged = now - (k + 1);
                        acc += (0..p).map(|j| d[(i, j)] * x[lagged * p + j]).sum::<f64>();
                    }
                    y[t * q + i] = acc;
                }
            }
            x.drain(..m * p);
            (x, y)
        })
        .collect();

    let mut xs = Vec::with_capacity(n_epochs * n_t * p);
    let mut ys = Vec::with_capacity(n_epochs * n_t * q);
    for (x, y) in epochs {
        xs.extend(x);
        ys.extend(y);
    }
    let x = Array3::from_shape_vec((n_epochs, n_t, p), xs).map_err(|e| Error::Internal(e.to_string()))?;
    let y = Array3::from_shape_vec((n_epochs, n_t, q), ys).map_err(|e| Error::Internal(e.to_string()))?;
    Ok((
        EpochedTimeSeries::new(x, (0..p).map(|i| format!("x{i}")).collect())?,
        EpochedTimeSeries::new(y, (0..q).map(|i| format!("y{i}")).collect())?,
    ))
}

fn circular_normal(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(n, 1, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Draw Fourier coefficients directly at the frequencies of a
/// [`XSpec::Spectral`] model: `X(ω) ~ CN(0, Sxx)`, `ε(ω) ~ CN(0, S_eps)`,
/// `Y(ω) = (B + C(ω))·X(ω) + ε(ω)`.
pub fn generate_spectral(model: &GenerativeModel, n_epochs: usize, seed: u64) -> Result<(SpectralTensor, SpectralTensor)> {
    model.validate()?;
    let XSpec::Spectral { components } = &model.x_spec else {
        return Err(Error::Config("frequency-domain simulation needs a spectral X specification".into()));
    };
    if n_epochs < 1 {
        return Err(Error::Config("at least one epoch must be simulated".into()));
    }
    let (q, p) = model.b.shape();
    let n_f = components.len();
    let prepared: Vec<(CMatrix, CMatrix, CMatrix)> = components
        .iter()
        .map(|c| {
            let a = to_complex(&model.b) + transfer_c(model, c.frequency);
            (psd_sqrt(&c.sxx), psd_sqrt(&c.s_eps), a)
        })
        .collect();

    let epochs: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..n_epochs)
        .into_par_iter()
        .map(|e| {
            let mut rng = epoch_rng(seed, e);
            let mut xo = Vec::with_capacity(n_f * p);
            let mut yo = Vec::with_capacity(n_f * q);
            for (lx, le, a) in &prepared {
                let x = lx * circular_normal(&mut rng, p);
                let y = a * &x + le * circular_normal(&mut rng, q);
                xo.extend(x.iter().copied());
                yo.extend(y.iter().copied());
            }
            (xo, yo)
        })
        .collect();

    let mut xs = Vec::with_capacity(n_epochs * n_f * p);
    let mut ys = Vec::with_capacity(n_epochs * n_f * q);
    for (x, y) in epochs {
        xs.extend(x);
        ys.extend(y);
    }
    let freqs: Vec<usize> = components.iter().map(|c| c.frequency).collect();
    let wrap = |v: Vec<Complex64>, ch: usize| -> Result<SpectralTensor> {
        Ok(SpectralTensor {
            coeffs: Array3::from_shape_vec((n_epochs, n_f, ch), v).map_err(|e| Error::Internal(e.to_string()))?,
            n_samples: model.n_samples,
            frequency_indices: freqs.clone(),
        })
    };
    Ok((wrap(xs, p)?, wrap(ys, q)?))
}

/// `C(ω) = Σ_k D(k)·exp(−i·2πωk/N_T)`.
pub fn transfer_c(model: &GenerativeModel, frequency: usize) -> CMatrix {
    let (q, p) = model.b.shape();
    let n_t = model.n_samples;
    let mut c = CMatrix::zeros(q, p);
    for (idx, d) in model.d_lags.iter().enumerate() {
        let k = idx + 1;
        let phase = ((frequency * k) % n_t) as f64 / n_t as f64;
        let w = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * phase);
        c += to_complex(d) * w;
    }
    c
}

/// Implied `(Syy, Syx)` for a given `Sxx` and noise spectrum:
/// `Syx = (B + C)·Sxx`, `Syy = (B + C)·Sxx·(B + C)* + S_eps`.
pub fn population_covariances(
    model: &GenerativeModel,
    sxx: &CMatrix,
    s_eps: &CMatrix,
    frequency: usize,
) -> Result<(CMatrix, CMatrix)> {
    let (q, p) = model.b.shape();
    check_psd_complex("Sxx", sxx, p)?;
    check_psd_complex("S_eps", s_eps, q)?;
    let a = to_complex(&model.b) + transfer_c(model, frequency);
    let syx = &a * sxx;
    let syy = hermitize(&(&syx * a.adjoint() + s_eps));
    Ok((syy, syx))
}

/// Closed-form constrained residual covariance and its real matrix
/// `D = Re C − (Im C)(Im Sxx)(Re Sxx)⁻¹`:
///
/// `Sδδ = S_eps + C·Sxx·C* + D·Sxx·Dᵀ − C·Sxx·Dᵀ − D·Sxx·C*`.
///
/// `B` does not appear.
pub fn population_sdd(model: &GenerativeModel, sxx: &CMatrix, s_eps: &CMatrix, frequency: usize) -> Result<(CMatrix, RMatrix)> {
    let (q, p) = model.b.shape();
    check_psd_complex("Sxx", sxx, p)?;
    check_psd_complex("S_eps", s_eps, q)?;
    let re_sxx = re_part(sxx);
    let rcond = rcond_symmetric(&re_sxx);
    if rcond < RCOND_THRESHOLD {
        return Err(Error::SingularCrossSpectrum { what: "Re Sxx", rcond });
    }
    let c = transfer_c(model, frequency);
    // (Im Sxx)(Re Sxx)⁻¹ = ((Re Sxx)⁻¹ (Im Sxx)ᵀ)ᵀ
    let inv_re = re_sxx
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularCrossSpectrum { what: "Re Sxx", rcond })?;
    let d = re_part(&c) - im_part(&c) * im_part(sxx) * inv_re;
    let dc = to_complex(&d);
    let dt = dc.transpose();
    let c_adj = c.adjoint();
    let s_delta = s_eps + &c * sxx * &c_adj + &dc * sxx * &dt - &c * sxx * &dt - &dc * sxx * &c_adj;
    Ok((hermitize(&s_delta), d))
}

/// Everything the model implies at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpectra {
    pub frequency: usize,
    pub sxx: CMatrix,
    pub c: CMatrix,
    pub syy: CMatrix,
    pub syx: CMatrix,
    pub s_eps: CMatrix,
    pub s_delta: CMatrix,
    pub d_real: RMatrix,
}

impl PopulationSpectra {
    pub fn compute(model: &GenerativeModel, sxx: &CMatrix, s_eps: &CMatrix, frequency: usize) -> Result<Self> {
        let (syy, syx) = population_covariances(model, sxx, s_eps, frequency)?;
        let (s_delta, d_real) = population_sdd(model, sxx, s_eps, frequency)?;
        Ok(PopulationSpectra {
            frequency,
            sxx: sxx.clone(),
            c: transfer_c(model, frequency),
            syy,
            syx,
            s_eps: s_eps.clone(),
            s_delta,
            d_real,
        })
    }

    /// Population blocks in the layout the estimators consume.
    pub fn cross_spectra(&self) -> CrossSpectra {
        CrossSpectra {
            sxx: self.sxx.clone(),
            syy: self.syy.clone(),
            sxy: self.syx.adjoint(),
            n_epochs: 0,
            label: SpectralLabel::Frequency { index: self.frequency },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingMode {
    Random,
    Identity,
}

/// Smallest acceptable reciprocal condition number of a mixing matrix.
pub const MIXING_RCOND: f64 = 1e-6;

/// Real nonsingular `dim×dim` matrix with standard normal entries,
/// redrawn until its singular-value ratio is at least [`MIXING_RCOND`].
pub fn random_mixing(dim: usize, seed: u64, mode: MixingMode) -> Result<RMatrix> {
    if dim < 1 {
        return Err(Error::Config("mixing dimension must be at least 1".into()));
    }
    if mode == MixingMode::Identity {
        return Ok(RMatrix::identity(dim, dim));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let m = RMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sv = m.singular_values();
        let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        if hi > 0.0 && lo / hi >= MIXING_RCOND {
            return Ok(m);
        }
    }
}
