//! Fourier coefficients of epoched recordings and their cross-spectral
//! covariance blocks.

use std::collections::BTreeSet;
use std::fmt;

use ndarray::{Array3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Moduli at or below this are treated as zero by [`normalize_to_phase`].
pub const PHASE_ZERO_THRESHOLD: f64 = 1e-300;

/// Real multichannel recording cut into equal-length epochs, indexed
/// `[epoch][sample][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochedTimeSeries {
    data: Array3<f64>,
    channel_labels: Vec<String>,
    sampling_rate: Option<f64>,
}

impl EpochedTimeSeries {
    pub fn new(data: Array3<f64>, channel_labels: Vec<String>) -> Result<Self> {
        let (n_epochs, n_samples, n_channels) = data.dim();
        if n_epochs < 1 {
            return Err(Error::InvalidData("at least one epoch is required".into()));
        }
        if n_samples < 2 {
            return Err(Error::InvalidData(format!(
                "epochs need at least 2 samples, got {n_samples}"
            )));
        }
        if n_channels < 1 {
            return Err(Error::InvalidData("at least one channel is required".into()));
        }
        if channel_labels.len() != n_channels {
            return Err(Error::ShapeMismatch(format!(
                "{} channel labels for {} channels",
                channel_labels.len(),
                n_channels
            )));
        }
        if let Some(((e, t, c), v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value {v} at epoch {e}, sample {t}, channel {c}"
            )));
        }
        Ok(Self {
            data,
            channel_labels,
            sampling_rate: None,
        })
    }

    /// Same as [`EpochedTimeSeries::new`] with labels `ch0, ch1, ...`.
    pub fn from_array(data: Array3<f64>) -> Result<Self> {
        let labels = (0..data.dim().2).map(|c| format!("ch{c}")).collect();
        Self::new(data, labels)
    }

    /// Build from a flat `[epoch][sample][channel]` buffer.
    pub fn from_flat(values: Vec<f64>, shape: (usize, usize, usize)) -> Result<Self> {
        let data = Array3::from_shape_vec(shape, values)
            .map_err(|e| Error::ShapeMismatch(format!("buffer does not match shape {shape:?}: {e}")))?;
        Self::from_array(data)
    }

    pub fn with_sampling_rate(mut self, hz: Option<f64>) -> Result<Self> {
        if let Some(r) = hz {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Config(format!("sampling rate must be positive, got {r}")));
            }
        }
        self.sampling_rate = hz;
        Ok(self)
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn n_epochs(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_samples(&self) -> usize {
        self.data.dim().1
    }

    pub fn n_channels(&self) -> usize {
        self.data.dim().2
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn sampling_rate(&self) -> Option<f64> {
        self.sampling_rate
    }

    /// Stack two recordings with the same epoch layout channel-wise.
    pub fn concat_channels(&self, other: &EpochedTimeSeries) -> Result<EpochedTimeSeries> {
        if self.n_epochs() != other.n_epochs() || self.n_samples() != other.n_samples() {
            return Err(Error::ShapeMismatch(format!(
                "cannot stack {}x{} epochs with {}x{}",
                self.n_epochs(),
                self.n_samples(),
                other.n_epochs(),
                other.n_samples()
            )));
        }
        let data = ndarray::concatenate(Axis(2), &[self.data.view(), other.data.view()])
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let mut labels = self.channel_labels.clone();
        labels.extend(other.channel_labels.iter().cloned());
        EpochedTimeSeries::new(data, labels)
    }
}

/// Complex Fourier coefficients indexed `[epoch][frequency slot][channel]`;
/// slot `k` holds frequency `frequency_indices[k]` (cycles per epoch).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTensor {
    pub coeffs: Array3<Complex64>,
    pub n_samples: usize,
    pub frequency_indices: Vec<usize>,
}

impl SpectralTensor {
    pub fn n_epochs(&self) -> usize {
        self.coeffs.dim().0
    }

    pub fn n_channels(&self) -> usize {
        self.coeffs.dim().2
    }

    pub fn slot_of(&self, frequency: usize) -> Option<usize> {
        self.frequency_indices.iter().position(|&f| f == frequency)
    }

    pub fn select_channels(&self, channels: &[usize]) -> Result<SpectralTensor> {
        if let Some(&bad) = channels.iter().find(|&&c| c >= self.n_channels()) {
            return Err(Error::ShapeMismatch(format!(
                "channel {bad} out of range for {} channels",
                self.n_channels()
            )));
        }
        Ok(SpectralTensor {
            coeffs: self.coeffs.select(Axis(2), channels),
            n_samples: self.n_samples,
            frequency_indices: self.frequency_indices.clone(),
        })
    }
}

/// Highest stored frequency index for epochs of `n_samples` samples.
pub fn max_frequency(n_samples: usize) -> usize {
    n_samples / 2
}

/// DC and (for even epoch lengths) Nyquist, where every Fourier coefficient
/// of real data is real.
pub fn is_real_frequency(frequency: usize, n_samples: usize) -> bool {
    frequency == 0 || (n_samples % 2 == 0 && frequency == n_samples / 2)
}

/// Unnormalized DFT of every epoch and channel over the half spectrum
/// `ω = 0..=N_T/2`, optionally removing each epoch's channel mean first.
pub fn dft_epochs(ts: &EpochedTimeSeries, demean: bool) -> Result<SpectralTensor> {
    let (n_epochs, n_samples, n_channels) = ts.data.dim();
    let n_freq = max_frequency(n_samples) + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_samples);

    let per_epoch: Vec<Vec<Complex64>> = (0..n_epochs)
        .into_par_iter()
        .map(|e| {
            let epoch = ts.data.index_axis(Axis(0), e);
            let mut out = vec![Complex64::default(); n_freq * n_channels];
            let mut buf = vec![Complex64::default(); n_samples];
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            for c in 0..n_channels {
                let col = epoch.index_axis(Axis(1), c);
                let mean = if demean { col.sum() / n_samples as f64 } else { 0.0 };
                for (b, &v) in buf.iter_mut().zip(col.iter()) {
                    *b = Complex64::new(v - mean, 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for w in 0..n_freq {
                    out[w * n_channels + c] = buf[w];
                }
            }
            pin_real_bins(&mut out, n_samples, n_channels);
            out
        })
        .collect();

    let flat: Vec<Complex64> = per_epoch.into_iter().flatten().collect();
    let coeffs = Array3::from_shape_vec((n_epochs, n_freq, n_channels), flat)
        .map_err(|e| Error::Internal(e.to_string()))?;
    Ok(SpectralTensor {
        coeffs,
        n_samples,
        frequency_indices: (0..n_freq).collect(),
    })
}

// Real data has exactly real DC and Nyquist coefficients; drop FFT roundoff.
fn pin_real_bins(out: &mut [Complex64], n_samples: usize, n_channels: usize) {
    for c in 0..n_channels {
        out[c].im = 0.0;
        if n_samples % 2 == 0 {
            out[(n_samples / 2) * n_channels + c].im = 0.0;
        }
    }
}

/// Direct O(N_T²) evaluation of the same transform as [`dft_epochs`].
pub fn dft_direct(ts: &EpochedTimeSeries, demean: bool) -> SpectralTensor {
    let (n_epochs, n_samples, n_channels) = ts.data.dim();
    let n_freq = max_frequency(n_samples) + 1;
    let mut coeffs = Array3::<Complex64>::zeros((n_epochs, n_freq, n_channels));
    for e in 0..n_epochs {
        for c in 0..n_channels {
            let mean = if demean {
                (0..n_samples).map(|t| ts.data[[e, t, c]]).sum::<f64>() / n_samples as f64
            } else {
                0.0
            };
            for w in 0..n_freq {
                let mut acc = Complex64::default();
                for t in 0..n_samples {
                    // reduce w·t mod N_T before scaling to keep the angle small
                    let k = (w * t) % n_samples;
                    let angle = -2.0 * std::f64::consts::PI * k as f64 / n_samples as f64;
                    acc += Complex64::from_polar(ts.data[[e, t, c]] - mean, angle);
                }
                coeffs[[e, w, c]] = acc;
            }
        }
    }
    SpectralTensor {
        coeffs,
        n_samples,
        frequency_indices: (0..n_freq).collect(),
    }
}

/// What a cross-spectral block was computed over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralLabel {
    Frequency { index: usize },
    Band { name: String, frequencies: Vec<usize> },
}

impl SpectralLabel {
    pub fn frequencies(&self) -> Vec<usize> {
        match self {
            SpectralLabel::Frequency { index } => vec![*index],
            SpectralLabel::Band { frequencies, .. } => frequencies.clone(),
        }
    }
}

impl fmt::Display for SpectralLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralLabel::Frequency { index } => write!(f, "f{index}"),
            SpectralLabel::Band { name, .. } => f.write_str(name),
        }
    }
}

/// Cross-spectral covariance blocks at one frequency or band. `Syx` is the
/// conjugate transpose of `Sxy` and is never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectra {
    pub sxx: CMatrix,
    pub syy: CMatrix,
    pub sxy: CMatrix,
    /// Number of epochs averaged; 0 for population-level blocks.
    pub n_epochs: usize,
    pub label: SpectralLabel,
}

impl CrossSpectra {
    pub fn new(sxx: CMatrix, syy: CMatrix, sxy: CMatrix, n_epochs: usize, label: SpectralLabel) -> Result<Self> {
        let p = sxx.nrows();
        let q = syy.nrows();
        if !sxx.is_square() || !syy.is_square() || sxy.shape() != (p, q) || p == 0 || q == 0 {
            return Err(Error::ShapeMismatch(format!(
                "blocks Sxx {:?}, Syy {:?}, Sxy {:?} are inconsistent",
                sxx.shape(),
                syy.shape(),
                sxy.shape()
            )));
        }
        Ok(Self {
            sxx,
            syy,
            sxy,
            n_epochs,
            label,
        })
    }

    pub fn p(&self) -> usize {
        self.sxx.nrows()
    }

    pub fn q(&self) -> usize {
        self.syy.nrows()
    }

    pub fn syx(&self) -> CMatrix {
        self.sxy.adjoint()
    }

    /// Blocks of the transformed data `(Mx·X, My·Y)` for real `Mx`, `My`.
    pub fn transformed(&self, mx: &crate::linalg::RMatrix, my: &crate::linalg::RMatrix) -> CrossSpectra {
        let mx = crate::linalg::to_complex(mx);
        let my = crate::linalg::to_complex(my);
        CrossSpectra {
            sxx: &mx * &self.sxx * mx.transpose(),
            syy: &my * &self.syy * my.transpose(),
            sxy: &mx * &self.sxy * my.transpose(),
            n_epochs: self.n_epochs,
            label: self.label.clone(),
        }
    }
}

/// Epoch-averaged outer products `(1/N_E)·Σ X X*`, `Y Y*`, `X Y*` for each
/// requested frequency.
pub fn cross_spectra(xs: &SpectralTensor, ys: &SpectralTensor, frequencies: &[usize]) -> Result<Vec<CrossSpectra>> {
    if xs.n_epochs() != ys.n_epochs() {
        return Err(Error::ShapeMismatch(format!(
            "x side has {} epochs, y side has {}",
            xs.n_epochs(),
            ys.n_epochs()
        )));
    }
    if xs.n_epochs() == 0 {
        return Err(Error::InvalidData("no epochs".into()));
    }
    frequencies
        .par_iter()
        .map(|&w| {
            let sx = xs.slot_of(w).ok_or(Error::BandMismatch(w))?;
            let sy = ys.slot_of(w).ok_or(Error::BandMismatch(w))?;
            let x = xs.coeffs.index_axis(Axis(1), sx);
            let y = ys.coeffs.index_axis(Axis(1), sy);
            Ok(CrossSpectra {
                sxx: outer_mean(&x, &x),
                syy: outer_mean(&y, &y),
                sxy: outer_mean(&x, &y),
                n_epochs: xs.n_epochs(),
                label: SpectralLabel::Frequency { index: w },
            })
        })
        .collect()
}

// (1/N) Σ_e a_e b_e*  for rows a_e, b_e of [epoch][channel] views
fn outer_mean(a: &ndarray::ArrayView2<Complex64>, b: &ndarray::ArrayView2<Complex64>) -> CMatrix {
    let (n, pa) = a.dim();
    let pb = b.dim().1;
    let mut m = CMatrix::zeros(pa, pb);
    for e in 0..n {
        for i in 0..pa {
            let ai = a[[e, i]];
            for j in 0..pb {
                m[(i, j)] += ai * b[[e, j]].conj();
            }
        }
    }
    m.unscale(n as f64)
}

/// Sum the blocks over the band members. Each member must be present in
/// `spectra` as a single-frequency block; repeated members count once.
pub fn band_aggregate(spectra: &[CrossSpectra], name: &str, band: &[usize]) -> Result<CrossSpectra> {
    let members: BTreeSet<usize> = band.iter().copied().collect();
    let mut acc: Option<CrossSpectra> = None;
    for &w in &members {
        let block = spectra
            .iter()
            .find(|s| s.label == SpectralLabel::Frequency { index: w })
            .ok_or(Error::BandMismatch(w))?;
        match acc.as_mut() {
            None => acc = Some(block.clone()),
            Some(a) => {
                if a.sxy.shape() != block.sxy.shape() || a.n_epochs != block.n_epochs {
                    return Err(Error::ShapeMismatch(format!(
                        "frequency {w} has a different block layout"
                    )));
                }
                a.sxx += &block.sxx;
                a.syy += &block.syy;
                a.sxy += &block.sxy;
            }
        }
    }
    let mut out = acc.ok_or_else(|| Error::Config(format!("band '{name}' is empty")))?;
    out.label = SpectralLabel::Band {
        name: name.to_string(),
        frequencies: members.into_iter().collect(),
    };
    Ok(out)
}

/// Replace each coefficient by `z/|z|`. Coefficients with modulus at or
/// below [`PHASE_ZERO_THRESHOLD`] become 0 and are counted in the tally.
pub fn normalize_to_phase(spec: &SpectralTensor) -> (SpectralTensor, usize) {
    let mut zeros = 0usize;
    let coeffs = spec.coeffs.mapv(|z| {
        let r = z.norm();
        if r > PHASE_ZERO_THRESHOLD {
            z / r
        } else {
            zeros += 1;
            Complex64::default()
        }
    });
    (
        SpectralTensor {
            coeffs,
            n_samples: spec.n_samples,
            frequency_indices: spec.frequency_indices.clone(),
        },
        zeros,
    )
}
