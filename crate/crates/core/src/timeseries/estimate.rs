//! Parameter estimation for the Holt smoother.
//!
//! Two backends:
//!
//! * `arima-init`: conditional least squares fit of an MA(2) to the twice
//!   differenced series, mapped onto `(alpha, gamma)` through the
//!   ARIMA(0,2,2) equivalence, then `(l0, t0)` by exact linear least squares.
//! * `direct-sse`: minimizes the one-step in-sample SSE over all four
//!   parameters. `(l0, t0)` enter the fitted values affinely, so they are
//!   solved in closed form for every `(alpha, gamma)` the simplex visits.

use log::warn;
use serde::Serialize;

use super::{run_smoother_with, sse, AnnualSeries, HoltFit, HoltParams, MadWindow};
use crate::error::{Error, Result};
use crate::optim::{minimize, Minimum, SimplexConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    ArimaInit,
    DirectSse,
}

impl Backend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::ArimaInit => "arima-init",
            Backend::DirectSse => "direct-sse",
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "arima-init" => Ok(Backend::ArimaInit),
            "direct-sse" => Ok(Backend::DirectSse),
            other => Err(format!("unknown backend '{other}' (expected arima-init|direct-sse)")),
        }
    }
}

/// How the MA recursion is started before the first differenced value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Presample {
    /// Back-forecast the two pre-sample differences from the reversed
    /// recursion and include their innovations in the sum of squares.
    #[default]
    Backcast,
    /// Pre-sample innovations fixed at zero.
    Zero,
}

/// Estimated parameters plus optimizer diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub params: HoltParams,
    pub backend: Backend,
    /// Minimized objective (MA innovation SS or smoother SSE).
    pub objective: f64,
    pub converged: bool,
    pub iters: usize,
    pub warnings: Vec<String>,
}

const START_GRID: [f64; 3] = [0.2, 0.5, 0.8];

/// MA(2) coefficients `(θ1, θ2)` for polynomial `1 − θ1·B − θ2·B²` equivalent
/// to Holt's method with the given constants.
pub(crate) fn holt_to_ma(alpha: f64, gamma: f64) -> (f64, f64) {
    (2.0 - alpha - alpha * gamma, alpha - 1.0)
}

/// Inverse of [`holt_to_ma`], clamped into `[0, 1]²`.
pub(crate) fn ma_to_holt(theta1: f64, theta2: f64) -> (f64, f64) {
    let alpha = (1.0 + theta2).clamp(0.0, 1.0);
    let gamma = if alpha > 0.0 {
        ((2.0 - alpha - theta1) / alpha).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (alpha, gamma)
}

fn invertible(theta1: f64, theta2: f64) -> bool {
    theta1 + theta2 < 1.0 && theta2 - theta1 < 1.0 && theta2.abs() < 1.0
}

fn second_differences(values: &[f64]) -> Vec<f64> {
    values.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect()
}

/// Sum of squared MA(2) innovations for the differenced series `w`.
pub(crate) fn ma2_css(w: &[f64], theta1: f64, theta2: f64, presample: Presample) -> f64 {
    let mut series: Vec<f64> = Vec::with_capacity(w.len() + 2);
    if presample == Presample::Backcast {
        // reversed recursion: a_t = w_t + θ1·a_{t+1} + θ2·a_{t+2}, a beyond the end = 0
        let (mut a1, mut a2) = (0.0, 0.0);
        for &wt in w.iter().rev() {
            let at = wt + theta1 * a1 + theta2 * a2;
            a2 = a1;
            a1 = at;
        }
        // a1 = a_1, a2 = a_2 (first two backward innovations)
        series.push(-theta2 * a1);
        series.push(-theta1 * a1 - theta2 * a2);
    }
    series.extend_from_slice(w);

    let (mut e1, mut e2) = (0.0, 0.0);
    let mut total = 0.0;
    for &wt in &series {
        let e = wt + theta1 * e1 + theta2 * e2;
        total += e * e;
        e2 = e1;
        e1 = e;
    }
    total
}

/// `(l0, t0)` minimizing the smoother SSE for fixed constants.
pub(crate) fn initial_state(values: &[f64], alpha: f64, gamma: f64) -> (f64, f64) {
    // fitted = base + l0·u + t0·v, with u, v the responses to unit initial states
    let (base, _, _) = super::smooth(values, alpha, gamma, 0.0, 0.0);
    let (with_l, _, _) = super::smooth(values, alpha, gamma, 1.0, 0.0);
    let (with_t, _, _) = super::smooth(values, alpha, gamma, 0.0, 1.0);

    let (mut suu, mut suv, mut svv, mut sur, mut svr) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..values.len() {
        let u = with_l[i] - base[i];
        let v = with_t[i] - base[i];
        let r = values[i] - base[i];
        suu += u * u;
        suv += u * v;
        svv += v * v;
        sur += u * r;
        svr += v * r;
    }
    let det = suu * svv - suv * suv;
    if det.abs() <= 1e-12 * (suu * svv).max(f64::MIN_POSITIVE) {
        let t0 = values[1] - values[0];
        return (values[0] - t0, t0);
    }
    ((svv * sur - suv * svr) / det, (suu * svr - suv * sur) / det)
}

fn check_len(series: &AnnualSeries) -> Result<()> {
    if series.len() < super::MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: super::MIN_SERIES_LEN,
        });
    }
    Ok(())
}

fn is_degenerate(values: &[f64], w: &[f64]) -> bool {
    let scale = values.iter().map(|v| v.abs()).fold(1.0, f64::max);
    w.iter().all(|d| d.abs() <= 1e-12 * scale)
}

fn degenerate_estimate(series: &AnnualSeries, backend: Backend) -> Estimate {
    let values = series.values();
    let (l0, t0) = initial_state(values, 0.0, 0.0);
    let msg = format!(
        "{}: twice-differenced series is identically zero, using linear extrapolation",
        series.country_code()
    );
    warn!("{msg}");
    Estimate {
        params: HoltParams {
            alpha: 0.0,
            gamma: 0.0,
            l0,
            t0,
        },
        backend,
        objective: sse(values, 0.0, 0.0, l0, t0),
        converged: true,
        iters: 0,
        warnings: vec![msg],
    }
}

fn best_of(runs: impl Iterator<Item = Result<Minimum>>) -> Result<Minimum> {
    let mut best: Option<Minimum> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.fmin < b.fmin) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one start"))
}

/// ARIMA(0,2,2)-based estimate with backcast pre-sample values.
pub fn estimate_params_arima(series: &AnnualSeries) -> Result<Estimate> {
    estimate_params_arima_with(series, Presample::Backcast)
}

pub fn estimate_params_arima_with(series: &AnnualSeries, presample: Presample) -> Result<Estimate> {
    check_len(series)?;
    let values = series.values();
    let w = second_differences(values);
    if is_degenerate(values, &w) {
        return Ok(degenerate_estimate(series, Backend::ArimaInit));
    }

    let objective = |th: &[f64]| {
        if invertible(th[0], th[1]) {
            ma2_css(&w, th[0], th[1], presample)
        } else {
            f64::INFINITY
        }
    };
    let config = SimplexConfig::default().with_bounds(vec![(-2.0, 2.0), (-1.0, 1.0)]);
    let starts = START_GRID
        .iter()
        .flat_map(|&a| START_GRID.iter().map(move |&g| holt_to_ma(a, g)));
    let best = best_of(starts.map(|(t1, t2)| minimize(objective, &[t1, t2], &config)))?;
    if !best.fmin.is_finite() {
        return Err(Error::Estimation {
            country: series.country_code().to_string(),
            reason: "MA(2) objective is not finite at the optimum".into(),
        });
    }

    let mut warnings = Vec::new();
    if !best.converged {
        let msg = format!(
            "{}: MA(2) simplex hit the iteration cap after {} iterations (SS = {:.6e})",
            series.country_code(),
            best.iters,
            best.fmin
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let (theta1, theta2) = (best.argmin[0], best.argmin[1]);
    let raw_alpha = 1.0 + theta2;
    let raw_gamma = (2.0 - raw_alpha - theta1) / raw_alpha;
    let (alpha, gamma) = ma_to_holt(theta1, theta2);
    if alpha != raw_alpha || gamma != raw_gamma {
        let msg = format!(
            "{}: MA(2) estimate maps to alpha = {raw_alpha:.4}, gamma = {raw_gamma:.4}; clamped to [0, 1]",
            series.country_code()
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let (l0, t0) = initial_state(values, alpha, gamma);
    Ok(Estimate {
        params: HoltParams { alpha, gamma, l0, t0 },
        backend: Backend::ArimaInit,
        objective: best.fmin,
        converged: best.converged,
        iters: best.iters,
        warnings,
    })
}

/// Direct minimization of the smoother's one-step SSE.
pub fn estimate_params_direct(series: &AnnualSeries) -> Result<Estimate> {
    check_len(series)?;
    let values = series.values();
    let w = second_differences(values);
    if is_degenerate(values, &w) {
        return Ok(degenerate_estimate(series, Backend::DirectSse));
    }

    let profiled = |p: &[f64]| {
        let (l0, t0) = initial_state(values, p[0], p[1]);
        sse(values, p[0], p[1], l0, t0)
    };
    let config = SimplexConfig::default().with_bounds(vec![(0.0, 1.0), (0.0, 1.0)]);
    let starts = START_GRID.iter().flat_map(|&a| START_GRID.iter().map(move |&g| [a, g]));
    let best = best_of(starts.map(|x0| minimize(profiled, &x0, &config)))?;

    let mut warnings = Vec::new();
    if !best.converged {
        let msg = format!(
            "{}: SSE simplex hit the iteration cap after {} iterations",
            series.country_code(),
            best.iters
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let (alpha, gamma) = (best.argmin[0], best.argmin[1]);
    let (l0, t0) = initial_state(values, alpha, gamma);
    Ok(Estimate {
        params: HoltParams { alpha, gamma, l0, t0 },
        backend: Backend::DirectSse,
        objective: best.fmin,
        converged: best.converged,
        iters: best.iters,
        warnings,
    })
}

/// Estimates parameters with `backend` and runs the smoother.
pub fn fit_series(series: &AnnualSeries, backend: Backend, window: MadWindow) -> Result<(HoltFit, Estimate)> {
    let est = match backend {
        Backend::ArimaInit => estimate_params_arima(series)?,
        Backend::DirectSse => estimate_params_direct(series)?,
    };
    let mut fit = run_smoother_with(series, est.params, window)?;
    fit.method = Some(backend);
    Ok((fit, est))
}
