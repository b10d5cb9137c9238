//! End-to-end analysis of one epoched recording.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AnalysisConfig, Measure, ResolvedConfig, TestChoice};
use crate::error::Result;
use crate::inference::{f_test_bivariate, lrt_chi_square, null_report, TestKind, TestReport};
use crate::measures::{coherency, lagged_measures, LaggedResult};
use crate::regression::{fit, FitOptions};
use crate::spectra::{band_aggregate, cross_spectra, dft_epochs, is_real_frequency, normalize_to_phase, CrossSpectra,
    EpochedTimeSeries, SpectralLabel};

pub const TOOL_NAME: &str = "lagcoh";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub n_epochs: usize,
    pub n_samples: usize,
    pub p: usize,
    pub q: usize,
    pub x_channels: Vec<String>,
    pub y_channels: Vec<String>,
    pub sampling_rate: Option<f64>,
    /// Fourier coefficients zeroed by phase normalization.
    pub phase_zero_count: usize,
    /// Labels whose frequencies are all DC or Nyquist.
    pub degenerate: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub label: String,
    pub kind: String,
    pub frequencies: Vec<usize>,
    /// Frequencies in Hz, when the sampling rate is known.
    pub hz: Option<Vec<f64>>,
    #[serde(rename = "lagA")]
    pub lag_a: Option<f64>,
    #[serde(rename = "lagC")]
    pub lag_c: Option<f64>,
    #[serde(rename = "lagB")]
    pub lag_b: Option<f64>,
    pub degenerate: bool,
    pub tests: Vec<TestReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub tool: String,
    pub version: String,
    pub metadata: Metadata,
    pub config: AnalysisConfig,
    pub results: Vec<ResultEntry>,
}

impl ResultDocument {
    pub fn empty(metadata: Metadata, config: AnalysisConfig) -> Self {
        ResultDocument {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            metadata,
            config,
            results: Vec::new(),
        }
    }

    pub fn entry(&self, label: &str) -> Option<&ResultEntry> {
        self.results.iter().find(|r| r.label == label)
    }
}

pub fn run_pipeline(ts: &EpochedTimeSeries, cfg: &AnalysisConfig) -> Result<ResultDocument> {
    let resolved = cfg.resolve(ts)?;
    let n_t = ts.n_samples();

    let mut spec = dft_epochs(ts, cfg.demean)?;
    let mut phase_zero_count = 0;
    if cfg.phase_only {
        let (normalized, zeros) = normalize_to_phase(&spec);
        spec = normalized;
        phase_zero_count = zeros;
        if zeros > 0 {
            log::warn!("{zeros} Fourier coefficients are zero and were left at zero by phase normalization");
        }
    }
    let xs = spec.select_channels(&resolved.x_channels)?;
    let ys = spec.select_channels(&resolved.y_channels)?;

    let needed: BTreeSet<usize> = resolved
        .frequencies
        .iter()
        .chain(resolved.bands.iter().flat_map(|(_, b)| b.iter()))
        .copied()
        .collect();
    let needed: Vec<usize> = needed.into_iter().collect();
    let per_freq = cross_spectra(&xs, &ys, &needed)?;

    let mut blocks = Vec::with_capacity(resolved.frequencies.len() + resolved.bands.len());
    for &w in &resolved.frequencies {
        let i = needed.binary_search(&w).expect("frequency was requested");
        blocks.push(per_freq[i].clone());
    }
    for (name, band) in &resolved.bands {
        blocks.push(band_aggregate(&per_freq, name, band).map_err(|e| e.with_context(format!("band '{name}'")))?);
    }

    let opts = FitOptions {
        ridge_lambda: cfg.ridge_lambda,
    };
    let hz = ts.sampling_rate();
    let results: Vec<Result<ResultEntry>> = blocks
        .par_iter()
        .map(|cs| analyse_block(cs, &resolved, opts, n_t, hz).map_err(|e| e.with_context(context_of(&cs.label))))
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let labels = |idx: &[usize]| idx.iter().map(|&c| ts.channel_labels()[c].clone()).collect();
    let metadata = Metadata {
        n_epochs: ts.n_epochs(),
        n_samples: n_t,
        p: resolved.x_channels.len(),
        q: resolved.y_channels.len(),
        x_channels: labels(&resolved.x_channels),
        y_channels: labels(&resolved.y_channels),
        sampling_rate: hz,
        phase_zero_count,
        degenerate: results.iter().filter(|r| r.degenerate).map(|r| r.label.clone()).collect(),
    };
    let mut doc = ResultDocument::empty(metadata, cfg.clone());
    doc.results = results;
    Ok(doc)
}

fn context_of(label: &SpectralLabel) -> String {
    match label {
        SpectralLabel::Frequency { index } => format!("frequency {index}"),
        SpectralLabel::Band { name, .. } => format!("band '{name}'"),
    }
}

fn analyse_block(
    cs: &CrossSpectra,
    cfg: &ResolvedConfig,
    opts: FitOptions,
    n_t: usize,
    hz: Option<f64>,
) -> Result<ResultEntry> {
    let frequencies = cs.label.frequencies();
    let (p, q) = (cs.p(), cs.q());
    let real_only = frequencies.iter().all(|&w| is_real_frequency(w, n_t));

    let (measures, tests) = if real_only {
        let tests = cfg
            .tests
            .iter()
            .map(|t| null_report(test_kind(*t), cs.n_epochs, p, q))
            .collect();
        (LaggedResult::zero(p, q, Some(cs.label.clone())), tests)
    } else {
        let f = fit(cs, opts)?;
        let mut r = lagged_measures(&f.s_eps, &f.s_delta, p)?;
        r.label = Some(cs.label.clone());
        let mut tests = Vec::with_capacity(cfg.tests.len());
        for t in &cfg.tests {
            tests.push(match t {
                TestChoice::Lrt => lrt_chi_square(r.lag_a, cs.n_epochs, p, q)?,
                TestChoice::FBivariate => {
                    let c = coherency(cs.sxx[(0, 0)].re, cs.syy[(0, 0)].re, cs.sxy[(0, 0)])?;
                    f_test_bivariate(c, cs.n_epochs)?
                }
            });
        }
        (r, tests)
    };

    let pick = |m: Measure, v: f64| cfg.measures.contains(&m).then_some(v);
    Ok(ResultEntry {
        label: cs.label.to_string(),
        kind: match cs.label {
            SpectralLabel::Frequency { .. } => "frequency".into(),
            SpectralLabel::Band { .. } => "band".into(),
        },
        hz: hz.map(|fs| frequencies.iter().map(|&w| w as f64 * fs / n_t as f64).collect()),
        frequencies,
        lag_a: pick(Measure::A, measures.lag_a),
        lag_c: pick(Measure::C, measures.lag_c),
        lag_b: pick(Measure::BNagao, measures.lag_b),
        degenerate: real_only || measures.degenerate,
        tests,
    })
}

fn test_kind(t: TestChoice) -> TestKind {
    match t {
        TestChoice::Lrt => TestKind::ChiSquareLrt,
        TestChoice::FBivariate => TestKind::FTest,
    }
}

/// Fixed-width table with rounded values for reading at a terminal.
pub fn summary_table(doc: &ResultDocument) -> String {
    let mut out = format!(
        "N_E = {}, N_T = {}, p = {}, q = {}\n{:<12} {:>10} {:>10} {:>10} {:>12}\n",
        doc.metadata.n_epochs, doc.metadata.n_samples, doc.metadata.p, doc.metadata.q, "label", "lagA", "lagC", "lagB",
        "p_value"
    );
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    for r in &doc.results {
        let p_value = r.tests.first().map(|t| format!("{:.4e}", t.p_value)).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<12} {:>10} {:>10} {:>10} {:>12}{}\n",
            r.label,
            cell(r.lag_a),
            cell(r.lag_c),
            cell(r.lag_b),
            p_value,
            if r.degenerate { "  (degenerate)" } else { "" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli_io::config::{BandSpec, ChannelRef};
    use crate::linalg::RMatrix;
    use crate::simulate::{generate_var, GenerativeModel, XSpec};

    fn recording(lagged: bool) -> EpochedTimeSeries {
        let d = if lagged { vec![RMatrix::from_element(1, 1, 0.8)] } else { Vec::new() };
        let model = GenerativeModel::new(
            RMatrix::from_element(1, 1, 1.0),
            d,
            RMatrix::from_element(1, 1, 0.5),
            XSpec::WhiteGaussian {
                cov: RMatrix::identity(1, 1),
            },
            16,
        )
        .unwrap();
        let (x, y) = generate_var(&model, 60, 9).unwrap();
        x.concat_channels(&y).unwrap()
    }

    fn config() -> AnalysisConfig {
        let mut cfg = AnalysisConfig::new(vec![ChannelRef::Index(0)], vec![ChannelRef::Index(1)]);
        cfg.tests = vec![TestChoice::Lrt, TestChoice::FBivariate];
        cfg
    }

    #[test]
    fn every_frequency_once_and_edges_degenerate() {
        let doc = run_pipeline(&recording(true), &config()).unwrap();
        let labels: Vec<_> = doc.results.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["f0", "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8"]);
        assert_eq!(doc.metadata.degenerate, ["f0", "f8"]);
        let f0 = doc.entry("f0").unwrap();
        assert_eq!((f0.lag_a, f0.lag_c), (Some(0.0), Some(0.0)));
        assert!(f0.tests.iter().all(|t| t.p_value == 1.0));
        assert!(doc.entry("f2").unwrap().lag_c.unwrap() > 0.1);
    }

    #[test]
    fn singleton_band_equals_frequency() {
        let mut cfg = config();
        cfg.frequencies = Some(vec![3]);
        cfg.bands = vec![BandSpec {
            name: "b3".into(),
            frequencies: vec![3],
        }];
        let doc = run_pipeline(&recording(true), &cfg).unwrap();
        let (f, b) = (doc.entry("f3").unwrap(), doc.entry("b3").unwrap());
        assert_eq!((f.lag_a, f.lag_c, f.lag_b), (b.lag_a, b.lag_c, b.lag_b));
        assert_eq!(f.tests, b.tests);
    }

    #[test]
    fn deterministic_and_measure_selection() {
        let mut cfg = config();
        cfg.measures = vec![Measure::C];
        let ts = recording(false);
        let a = run_pipeline(&ts, &cfg).unwrap();
        assert_eq!(a, run_pipeline(&ts, &cfg).unwrap());
        assert!(a.results.iter().all(|r| r.lag_a.is_none() && r.lag_b.is_none() && r.lag_c.is_some()));
    }

    #[test]
    fn hz_labels_and_phase_only() {
        let ts = recording(true).with_sampling_rate(Some(128.0)).unwrap();
        let mut cfg = config();
        cfg.phase_only = true;
        cfg.demean = false;
        cfg.frequencies = Some(vec![2]);
        let doc = run_pipeline(&ts, &cfg).unwrap();
        assert_eq!(doc.results[0].hz, Some(vec![16.0]));
        assert_eq!(doc.metadata.phase_zero_count, 0);
    }

    #[test]
    fn errors_carry_label_context() {
        // y is an exact copy of x: S_eps vanishes at every frequency
        let x = recording(false);
        let mut data = x.data().clone();
        let col = data.index_axis(ndarray::Axis(2), 0).to_owned();
        data.index_axis_mut(ndarray::Axis(2), 1).assign(&col);
        let ts = EpochedTimeSeries::from_array(data).unwrap();
        let mut cfg = config();
        cfg.tests.clear();
        cfg.frequencies = Some(vec![2]);
        let err = run_pipeline(&ts, &cfg).unwrap_err();
        assert!(err.to_string().contains("frequency 2"), "{err}");
    }
}
