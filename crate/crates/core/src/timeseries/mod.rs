//! Holt double exponential smoothing: level/trend recursion, forecasts and
//! MAD-based prediction limits.
//!
//! ```text
//! L_t = α·y_t + (1 − α)(L_{t−1} + T_{t−1})
//! T_t = γ(L_t − L_{t−1}) + (1 − γ)T_{t−1}
//! ŷ_{t+h} = L_t + h·T_t
//! ```

mod estimate;

pub use estimate::{
    estimate_params_arima, estimate_params_arima_with, estimate_params_direct, fit_series, Backend, Estimate, Presample,
};

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Shortest series that supports double differencing plus an MA(2) fit.
pub const MIN_SERIES_LEN: usize = 4;

/// Ratio between the residual standard deviation and MAD under normality.
pub const MAD_TO_SIGMA: f64 = 1.25;

/// One country's yearly death counts over contiguous years.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnualSeries {
    country_code: String,
    start_year: i32,
    values: Vec<f64>,
}

impl AnnualSeries {
    pub fn new(country_code: impl Into<String>, start_year: i32, values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_SERIES_LEN {
            return Err(Error::SeriesTooShort {
                len: values.len(),
                min: MIN_SERIES_LEN,
            });
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidSeries(format!(
                "value {v} at year {} is not a non-negative number",
                start_year + i as i32
            )));
        }
        Ok(Self {
            country_code: country_code.into(),
            start_year,
            values,
        })
    }

    pub fn country_code(&self) -> &str {
        &self.country_code
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.values.len() as i32 - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Smoothing constants plus the state consumed before the first observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoltParams {
    pub alpha: f64,
    pub gamma: f64,
    pub l0: f64,
    pub t0: f64,
}

impl HoltParams {
    pub fn new(alpha: f64, gamma: f64, l0: f64, t0: f64) -> Result<Self> {
        let p = Self { alpha, gamma, l0, t0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParams(format!(
                "alpha = {}, gamma = {} must both lie in [0, 1]",
                self.alpha, self.gamma
            )));
        }
        if !self.l0.is_finite() || !self.t0.is_finite() {
            return Err(Error::InvalidParams("initial state must be finite".into()));
        }
        Ok(())
    }
}

/// Which residuals enter the MAD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MadWindow {
    #[default]
    All,
    SkipFirst,
}

impl std::str::FromStr for MadWindow {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "all" => Ok(Self::All),
            "skip-first" => Ok(Self::SkipFirst),
            other => Err(format!("unknown MAD window '{other}' (expected all|skip-first)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoltFit {
    pub params: HoltParams,
    pub final_level: f64,
    pub final_trend: f64,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub mad: f64,
    pub mad_window: MadWindow,
    /// Estimation backend, `None` when the parameters were supplied directly.
    pub method: Option<Backend>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForecastInterval {
    pub horizon: usize,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub coverage: f64,
    /// Zero-width limits caused by a zero MAD.
    pub degenerate: bool,
}

impl ForecastInterval {
    pub fn half_width(&self) -> f64 {
        self.upper - self.point
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// One step of the level/trend recursion.
pub fn holt_update(level_prev: f64, trend_prev: f64, y: f64, alpha: f64, gamma: f64) -> (f64, f64) {
    let level = alpha * y + (1.0 - alpha) * (level_prev + trend_prev);
    let trend = gamma * (level - level_prev) + (1.0 - gamma) * trend_prev;
    (level, trend)
}

/// Runs the recursion over `values`, returning one-step fitted values and the
/// final state.
pub(crate) fn smooth(values: &[f64], alpha: f64, gamma: f64, l0: f64, t0: f64) -> (Vec<f64>, f64, f64) {
    let mut fitted = Vec::with_capacity(values.len());
    let (mut level, mut trend) = (l0, t0);
    for &y in values {
        fitted.push(level + trend);
        (level, trend) = holt_update(level, trend, y, alpha, gamma);
    }
    (fitted, level, trend)
}

pub(crate) fn sse(values: &[f64], alpha: f64, gamma: f64, l0: f64, t0: f64) -> f64 {
    let (mut level, mut trend) = (l0, t0);
    let mut total = 0.0;
    for &y in values {
        let e = y - (level + trend);
        total += e * e;
        (level, trend) = holt_update(level, trend, y, alpha, gamma);
    }
    total
}

fn mean_abs(residuals: &[f64], window: MadWindow) -> f64 {
    let used = match window {
        MadWindow::All => residuals,
        MadWindow::SkipFirst => &residuals[1.min(residuals.len())..],
    };
    if used.is_empty() {
        return 0.0;
    }
    used.iter().map(|r| r.abs()).sum::<f64>() / used.len() as f64
}

pub fn run_smoother(series: &AnnualSeries, params: HoltParams) -> Result<HoltFit> {
    run_smoother_with(series, params, MadWindow::All)
}

pub fn run_smoother_with(series: &AnnualSeries, params: HoltParams, window: MadWindow) -> Result<HoltFit> {
    params.validate()?;
    let values = series.values();
    let (fitted, final_level, final_trend) = smooth(values, params.alpha, params.gamma, params.l0, params.t0);
    let residuals: Vec<f64> = values.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let mad = mean_abs(&residuals, window);
    Ok(HoltFit {
        params,
        final_level,
        final_trend,
        fitted,
        residuals,
        mad,
        mad_window: window,
        method: None,
    })
}

/// Point forecast `h` steps past the end of the fitted sample.
pub fn forecast(fit: &HoltFit, horizon: usize) -> Result<f64> {
    if horizon < 1 {
        return Err(Error::InvalidHorizon(horizon));
    }
    Ok(fit.final_level + horizon as f64 * fit.final_trend)
}

/// Multiplier on the one-step error variance for an `h`-step forecast.
pub fn variance_factor(alpha: f64, gamma: f64, horizon: usize) -> f64 {
    1.0 + (1..horizon)
        .map(|j| (alpha * (1.0 + j as f64 * gamma)).powi(2))
        .sum::<f64>()
}

/// Two-sided standard normal quantile for `coverage`.
pub fn normal_quantile(coverage: f64) -> Result<f64> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::InvalidCoverage(coverage));
    }
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    Ok(std.inverse_cdf(0.5 + coverage / 2.0))
}

/// Symmetric limits with half-width `z · 1.25 · MAD · sqrt(c_h)`.
pub fn prediction_interval(fit: &HoltFit, horizon: usize, coverage: f64) -> Result<ForecastInterval> {
    let point = forecast(fit, horizon)?;
    let z = normal_quantile(coverage)?;
    let c = variance_factor(fit.params.alpha, fit.params.gamma, horizon);
    let half = z * MAD_TO_SIGMA * fit.mad * c.sqrt();
    Ok(ForecastInterval {
        horizon,
        point,
        lower: point - half,
        upper: point + half,
        coverage,
        degenerate: half == 0.0,
    })
}
