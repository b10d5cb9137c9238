//! Tests of the null hypothesis that all association between the blocks is
//! instantaneous (real regression coefficients).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::COHERENCE_TOLERANCE;
use crate::special::{chi_square_sf, f_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    ChiSquareLrt,
    FTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: TestKind,
    pub statistic: f64,
    pub df1: usize,
    pub df2: Option<usize>,
    pub p_value: f64,
}

/// Likelihood-ratio statistic `N_E·lagA`, referred to χ² with `q·p`
/// degrees of freedom.
pub fn lrt_chi_square(lag_a: f64, n_epochs: usize, p: usize, q: usize) -> Result<TestReport> {
    if n_epochs < 1 {
        return Err(Error::Config("the likelihood-ratio test needs at least one epoch".into()));
    }
    if !(lag_a >= 0.0) {
        return Err(Error::InvalidData(format!("lagA must be nonnegative, got {lag_a}")));
    }
    if p == 0 || q == 0 {
        return Err(Error::ShapeMismatch("block dimensions must be positive".into()));
    }
    let statistic = n_epochs as f64 * lag_a;
    let df1 = q * p;
    Ok(TestReport {
        kind: TestKind::ChiSquareLrt,
        statistic,
        df1,
        df2: None,
        p_value: chi_square_sf(statistic, df1 as f64).clamp(0.0, 1.0),
    })
}

/// F test on the complex coherency of two univariate signals:
/// `(N_E − 3)·(Im c)² / (1 − (Re c)² − (Im c)²)` on `(1, N_E − 3)` df.
pub fn f_test_bivariate(c: Complex64, n_epochs: usize) -> Result<TestReport> {
    if n_epochs < 4 {
        return Err(Error::Config(format!("the F test needs at least 4 epochs, got {n_epochs}")));
    }
    let im2 = c.im * c.im;
    let denom = 1.0 - c.re * c.re - im2;
    if denom <= 0.0 {
        if denom < -COHERENCE_TOLERANCE {
            return Err(Error::InvalidCoherence(format!("|c_xy| = {} exceeds 1", c.norm())));
        }
        return Err(Error::InvalidCoherence("|c_xy| = 1 leaves no residual".into()));
    }
    let df2 = n_epochs - 3;
    let statistic = df2 as f64 * im2 / denom;
    Ok(TestReport {
        kind: TestKind::FTest,
        statistic,
        df1: 1,
        df2: Some(df2),
        p_value: f_sf(statistic, 1.0, df2 as f64).clamp(0.0, 1.0),
    })
}

/// The report every test gives when the lagged part is analytically zero.
pub fn null_report(kind: TestKind, n_epochs: usize, p: usize, q: usize) -> TestReport {
    TestReport {
        kind,
        statistic: 0.0,
        df1: match kind {
            TestKind::ChiSquareLrt => q * p,
            TestKind::FTest => 1,
        },
        df2: match kind {
            TestKind::ChiSquareLrt => None,
            TestKind::FTest => Some(n_epochs.saturating_sub(3)),
        },
        p_value: 1.0,
    }
}
