//! JSON documents: the analysis configuration and the generative model.

use std::collections::BTreeSet;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, RMatrix};
use crate::simulate::{GenerativeModel, SpectralComponent, XSpec};
use crate::spectra::{max_frequency, EpochedTimeSeries};

/// A channel picked by position or by header label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelRef {
    Index(usize),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    pub name: String,
    pub frequencies: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    A,
    C,
    #[serde(rename = "B_nagao")]
    BNagao,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestChoice {
    Lrt,
    FBivariate,
}

fn default_measures() -> Vec<Measure> {
    vec![Measure::A, Measure::C, Measure::BNagao]
}

fn default_true() -> bool {
    true
}

/// What to compute. When neither `frequencies` nor `bands` is given, every
/// frequency `0..=N_T/2` is analysed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub x_channels: Vec<ChannelRef>,
    pub y_channels: Vec<ChannelRef>,
    #[serde(default)]
    pub frequencies: Option<Vec<usize>>,
    #[serde(default)]
    pub bands: Vec<BandSpec>,
    #[serde(default = "default_measures")]
    pub measures: Vec<Measure>,
    #[serde(default)]
    pub tests: Vec<TestChoice>,
    #[serde(default)]
    pub phase_only: bool,
    #[serde(default = "default_true")]
    pub demean: bool,
    #[serde(default)]
    pub ridge_lambda: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl AnalysisConfig {
    pub fn new(x_channels: Vec<ChannelRef>, y_channels: Vec<ChannelRef>) -> Self {
        AnalysisConfig {
            x_channels,
            y_channels,
            frequencies: None,
            bands: Vec::new(),
            measures: default_measures(),
            tests: Vec::new(),
            phase_only: false,
            demean: true,
            ridge_lambda: None,
            seed: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.with_context(path.display().to_string()))
    }

    /// Check the configuration against the data it will run on.
    pub fn resolve(&self, ts: &EpochedTimeSeries) -> Result<ResolvedConfig> {
        let x = resolve_channels(&self.x_channels, ts, "x_channels")?;
        let y = resolve_channels(&self.y_channels, ts, "y_channels")?;
        if let Some(c) = x.iter().find(|c| y.contains(c)) {
            return Err(Error::Config(format!(
                "channel '{}' is in both x_channels and y_channels",
                ts.channel_labels()[*c]
            )));
        }
        let tests: BTreeSet<TestChoice> = self.tests.iter().copied().collect();
        if tests.contains(&TestChoice::FBivariate) && (x.len() != 1 || y.len() != 1) {
            return Err(Error::Config(format!(
                "the bivariate F test needs p = q = 1, got p = {}, q = {}",
                x.len(),
                y.len()
            )));
        }
        if self.measures.is_empty() {
            return Err(Error::Config("no measures requested".into()));
        }
        if let Some(l) = self.ridge_lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config(format!("ridge_lambda must be nonnegative, got {l}")));
            }
        }

        let top = max_frequency(ts.n_samples());
        let check_freq = |w: usize, ctx: &str| {
            if w > top {
                Err(Error::Config(format!("{ctx}: frequency {w} exceeds N_T/2 = {top}")))
            } else {
                Ok(())
            }
        };
        let frequencies = match (&self.frequencies, self.bands.is_empty()) {
            (Some(list), _) => {
                let mut seen = BTreeSet::new();
                for &w in list {
                    check_freq(w, "frequencies")?;
                    if !seen.insert(w) {
                        return Err(Error::Config(format!("frequency {w} is listed twice")));
                    }
                }
                list.clone()
            }
            (None, true) => (0..=top).collect(),
            (None, false) => Vec::new(),
        };
        let mut names = BTreeSet::new();
        let mut bands = Vec::with_capacity(self.bands.len());
        for b in &self.bands {
            let clashes = frequencies.iter().any(|w| b.name == format!("f{w}"));
            if b.name.is_empty() || clashes || !names.insert(b.name.clone()) {
                return Err(Error::Config(format!("band name '{}' is empty, repeated or shadows a frequency label", b.name)));
            }
            let members: BTreeSet<usize> = b.frequencies.iter().copied().collect();
            if members.is_empty() {
                return Err(Error::Config(format!("band '{}' has no frequencies", b.name)));
            }
            if members.len() != b.frequencies.len() {
                return Err(Error::Config(format!("band '{}' repeats a frequency", b.name)));
            }
            for &w in &members {
                check_freq(w, &format!("band '{}'", b.name))?;
            }
            bands.push((b.name.clone(), members.into_iter().collect()));
        }
        Ok(ResolvedConfig {
            x_channels: x,
            y_channels: y,
            frequencies,
            bands,
            measures: self.measures.iter().copied().collect(),
            tests,
        })
    }
}

fn resolve_channels(refs: &[ChannelRef], ts: &EpochedTimeSeries, what: &str) -> Result<Vec<usize>> {
    if refs.is_empty() {
        return Err(Error::Config(format!("{what} is empty")));
    }
    let mut out = Vec::with_capacity(refs.len());
    for r in refs {
        let idx = match r {
            ChannelRef::Index(i) if *i < ts.n_channels() => *i,
            ChannelRef::Index(i) => {
                return Err(Error::Config(format!(
                    "{what}: channel index {i} out of range ({} channels)",
                    ts.n_channels()
                )))
            }
            ChannelRef::Label(l) => ts
                .channel_labels()
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::Config(format!("{what}: no channel labelled '{l}'")))?,
        };
        if out.contains(&idx) {
            return Err(Error::Config(format!("{what}: channel {idx} listed twice")));
        }
        out.push(idx);
    }
    Ok(out)
}

/// Configuration with channels and frequencies turned into indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub x_channels: Vec<usize>,
    pub y_channels: Vec<usize>,
    pub frequencies: Vec<usize>,
    pub bands: Vec<(String, Vec<usize>)>,
    pub measures: BTreeSet<Measure>,
    pub tests: BTreeSet<TestChoice>,
}

/// Complex matrix as separate real and imaginary row-major arrays; `im`
/// may be omitted for real matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexMatrixDoc {
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralComponentDoc {
    pub frequency: usize,
    pub sxx: ComplexMatrixDoc,
    pub s_eps: ComplexMatrixDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum XSpecDoc {
    WhiteGaussian { cov: Vec<Vec<f64>> },
    Spectral { components: Vec<SpectralComponentDoc> },
}

/// JSON form of [`GenerativeModel`]. `x` defaults to white Gaussian noise
/// with identity covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub b: Vec<Vec<f64>>,
    #[serde(default)]
    pub d_lags: Vec<Vec<Vec<f64>>>,
    pub noise_cov: Vec<Vec<f64>>,
    #[serde(default)]
    pub x: Option<XSpecDoc>,
    pub n_samples: usize,
}

impl ModelDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.with_context(path.display().to_string()))
    }

    pub fn to_model(&self) -> Result<GenerativeModel> {
        let b = real_matrix(&self.b, "b")?;
        let d_lags = self
            .d_lags
            .iter()
            .enumerate()
            .map(|(k, d)| real_matrix(d, &format!("d_lags[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        let noise_cov = real_matrix(&self.noise_cov, "noise_cov")?;
        let x_spec = match &self.x {
            None => XSpec::WhiteGaussian {
                cov: RMatrix::identity(b.ncols(), b.ncols()),
            },
            Some(XSpecDoc::WhiteGaussian { cov }) => XSpec::WhiteGaussian {
                cov: real_matrix(cov, "x.cov")?,
            },
            Some(XSpecDoc::Spectral { components }) => XSpec::Spectral {
                components: components
                    .iter()
                    .map(|c| {
                        Ok(SpectralComponent {
                            frequency: c.frequency,
                            sxx: complex_matrix(&c.sxx, "sxx")?,
                            s_eps: complex_matrix(&c.s_eps, "s_eps")?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            },
        };
        GenerativeModel::new(b, d_lags, noise_cov, x_spec, self.n_samples)
            .map_err(|e| Error::Config(format!("invalid model: {e}")))
    }
}

fn real_matrix(rows: &[Vec<f64>], what: &str) -> Result<RMatrix> {
    let n_rows = rows.len();
    let n_cols = rows.first().map(Vec::len).unwrap_or(0);
    if n_rows == 0 || n_cols == 0 || rows.iter().any(|r| r.len() != n_cols) {
        return Err(Error::Config(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(RMatrix::from_fn(n_rows, n_cols, |i, j| rows[i][j]))
}

fn complex_matrix(doc: &ComplexMatrixDoc, what: &str) -> Result<CMatrix> {
    let re = real_matrix(&doc.re, &format!("{what}.re"))?;
    let im = match &doc.im {
        Some(im) => real_matrix(im, &format!("{what}.im"))?,
        None => RMatrix::zeros(re.nrows(), re.ncols()),
    };
    if im.shape() != re.shape() {
        return Err(Error::Config(format!("{what}: re and im shapes differ")));
    }
    Ok(CMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)])))
}
