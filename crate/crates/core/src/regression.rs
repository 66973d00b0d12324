//! Simple linear regression of declared covid deaths on a single predictor,
//! in log10–log10 space or on the natural scale, with the one-way ANOVA
//! decomposition and the dual prediction of covid deaths per country.

use log::warn;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Log10,
    Natural,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub country_code: String,
    pub x: f64,
    pub y: f64,
}

impl Observation {
    pub fn new(country_code: impl Into<String>, x: f64, y: f64) -> Self {
        Self {
            country_code: country_code.into(),
            x,
            y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub country_code: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anova {
    pub ss_regression: f64,
    pub ss_error: f64,
    pub ss_total: f64,
    pub df_regression: usize,
    pub df_error: usize,
    /// Undefined (`None`) when the error term has no degrees of freedom or
    /// vanishes.
    pub f_stat: Option<f64>,
    pub p_value: Option<f64>,
}

impl Anova {
    pub fn ms_regression(&self) -> f64 {
        self.ss_regression / self.df_regression as f64
    }

    pub fn ms_error(&self) -> Option<f64> {
        (self.df_error > 0).then(|| self.ss_error / self.df_error as f64)
    }

    pub fn r_squared(&self) -> f64 {
        self.ss_regression / self.ss_total
    }
}

/// Fitted line `y = intercept + slope·x`, where on the log10 scale both sides
/// are log10-transformed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogLogFit {
    pub intercept: f64,
    pub slope: f64,
    pub n: usize,
    pub excluded: Vec<Exclusion>,
    pub anova: Anova,
    pub scale: Scale,
}

/// Fewest usable points that identify a line.
pub const MIN_POINTS: usize = 2;

fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, Anova)> {
    let n = xs.len();
    if n < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: n,
        });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= f64::EPSILON * xs.iter().map(|x| x * x).sum::<f64>() || sxx == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    let ss_error: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_regression = slope * sxy;
    let df_error = n - 2;
    let (f_stat, p_value) = if df_error > 0 && ss_error > 0.0 {
        let f = ss_regression / (ss_error / df_error as f64);
        let dist = FisherSnedecor::new(1.0, df_error as f64).expect("positive degrees of freedom");
        (Some(f), Some(dist.sf(f)))
    } else {
        (None, None)
    };
    Ok((
        intercept,
        slope,
        Anova {
            ss_regression,
            ss_error,
            ss_total: syy,
            df_regression: 1,
            df_error,
            f_stat,
            p_value,
        },
    ))
}

/// OLS of `log10(y)` on `log10(x)`. Points with a non-positive coordinate are
/// excluded and listed.
pub fn fit_loglog(points: &[Observation]) -> Result<LogLogFit> {
    let mut excluded = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for p in points {
        if p.x > 0.0 && p.y > 0.0 {
            xs.push(p.x.log10());
            ys.push(p.y.log10());
        } else {
            let reason = if p.x <= 0.0 {
                format!("non-positive predictor {} has no logarithm", p.x)
            } else {
                format!("non-positive response {} has no logarithm", p.y)
            };
            excluded.push(Exclusion {
                country_code: p.country_code.clone(),
                reason,
            });
        }
    }
    let (intercept, slope, anova) = ols(&xs, &ys)?;
    Ok(LogLogFit {
        intercept,
        slope,
        n: xs.len(),
        excluded,
        anova,
        scale: Scale::Log10,
    })
}

/// OLS of `y` on `x` in natural units.
pub fn fit_natural(points: &[Observation]) -> Result<LogLogFit> {
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let (intercept, slope, anova) = ols(&xs, &ys)?;
    Ok(LogLogFit {
        intercept,
        slope,
        n: xs.len(),
        excluded: Vec::new(),
        anova,
        scale: Scale::Natural,
    })
}

pub fn predict(fit: &LogLogFit, x: f64) -> Result<f64> {
    match fit.scale {
        Scale::Log10 => {
            if !(x > 0.0) {
                return Err(Error::NonPositivePredictor(x));
            }
            Ok(10f64.powf(fit.intercept + fit.slope * x.log10()))
        }
        Scale::Natural => Ok(fit.intercept + fit.slope * x),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmMethod {
    Loglog,
    Natural,
}

/// Per-country inputs for the dual prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryInputs {
    pub country_code: String,
    pub covid_cases: f64,
    pub excess: f64,
    pub declared_dc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcPrediction {
    pub country_code: String,
    pub year: i32,
    pub dc_by_cc: f64,
    pub dc_by_em: f64,
    pub dc_by_em_method: EmMethod,
    pub declared_dc: f64,
    pub within_band: bool,
    /// A negative natural-scale prediction was raised to zero.
    pub clamped: bool,
}

impl DcPrediction {
    pub fn min_predicted(&self) -> f64 {
        self.dc_by_cc.min(self.dc_by_em)
    }

    pub fn max_predicted(&self) -> f64 {
        self.dc_by_cc.max(self.dc_by_em)
    }
}

/// Regressions and predictions for one year.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearRegressions {
    pub year: i32,
    pub by_cc: LogLogFit,
    pub by_em: LogLogFit,
    /// Natural-scale DC-on-EM fit over every country, present only when some
    /// country has non-positive excess.
    pub by_em_natural: Option<LogLogFit>,
    pub predictions: Vec<DcPrediction>,
}

pub fn build_dc_predictions(year: i32, inputs: &[CountryInputs]) -> Result<YearRegressions> {
    let cc_points: Vec<Observation> = inputs
        .iter()
        .map(|c| Observation::new(&c.country_code, c.covid_cases, c.declared_dc))
        .collect();
    let em_points: Vec<Observation> = inputs
        .iter()
        .map(|c| Observation::new(&c.country_code, c.excess, c.declared_dc))
        .collect();
    let by_cc = fit_loglog(&cc_points)?;
    let by_em = fit_loglog(&em_points)?;
    let by_em_natural = if inputs.iter().any(|c| c.excess <= 0.0) {
        Some(fit_natural(&em_points)?)
    } else {
        None
    };

    let mut predictions = Vec::with_capacity(inputs.len());
    for c in inputs {
        let dc_by_cc = predict(&by_cc, c.covid_cases)?;
        let (mut dc_by_em, method) = match &by_em_natural {
            Some(nat) if c.excess <= 0.0 => (predict(nat, c.excess)?, EmMethod::Natural),
            _ => (predict(&by_em, c.excess)?, EmMethod::Loglog),
        };
        let clamped = dc_by_em < 0.0;
        if clamped {
            warn!(
                "{}/{year}: natural-scale prediction {dc_by_em:.1} is negative, clamped to 0",
                c.country_code
            );
            dc_by_em = 0.0;
        }
        let (lo, hi) = (dc_by_cc.min(dc_by_em), dc_by_cc.max(dc_by_em));
        predictions.push(DcPrediction {
            country_code: c.country_code.clone(),
            year,
            dc_by_cc,
            dc_by_em,
            dc_by_em_method: method,
            declared_dc: c.declared_dc,
            within_band: lo <= c.declared_dc && c.declared_dc <= hi,
            clamped,
        });
    }
    Ok(YearRegressions {
        year,
        by_cc,
        by_em,
        by_em_natural,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn obs(pts: &[(f64, f64)]) -> Vec<Observation> {
        pts.iter()
            .enumerate()
            .map(|(i, &(x, y))| Observation::new(format!("C{i}"), x, y))
            .collect()
    }

    #[test]
    fn two_point_identity_line() {
        let fit = fit_loglog(&obs(&[(10.0, 10.0), (1000.0, 1000.0)])).unwrap();
        assert_relative_eq!(fit.slope, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 0.0, epsilon = 1e-12);
        assert_eq!(fit.anova.ss_error, 0.0);
        assert_eq!(fit.anova.df_error, 0);
        assert_eq!(fit.anova.f_stat, None);
    }

    #[test]
    fn exact_natural_line() {
        let fit = fit_natural(&obs(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0), (-3.0, -5.0)])).unwrap();
        assert_relative_eq!(fit.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 1.0, epsilon = 1e-12);
        assert!(fit.anova.ss_error < 1e-20);
        assert_eq!(fit.scale, Scale::Natural);
    }

    #[test]
    fn repeated_x_is_zero_variance() {
        let err = fit_natural(&obs(&[(2.0, 1.0), (2.0, 3.0), (2.0, 5.0)])).unwrap_err();
        assert!(matches!(err, Error::ZeroVariance));
        assert!(matches!(
            fit_loglog(&obs(&[(7.0, 1.0), (7.0, 3.0), (7.0, 5.0)])),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn non_positive_points_excluded() {
        let pts = obs(&[(1.0, 2.0), (10.0, 20.0), (-5.0, 3.0), (100.0, 190.0), (4.0, 0.0)]);
        let fit = fit_loglog(&pts).unwrap();
        assert_eq!(fit.n, 3);
        let codes: Vec<_> = fit.excluded.iter().map(|e| e.country_code.as_str()).collect();
        assert_eq!(codes, ["C2", "C4"]);
        assert_eq!(fit.n + fit.excluded.len(), pts.len());
    }

    #[test]
    fn too_few_usable_points() {
        let err = fit_loglog(&obs(&[(1.0, 2.0), (-1.0, 2.0), (0.0, 5.0)])).unwrap_err();
        assert!(matches!(err, Error::TooFewPoints { got: 1, .. }));
    }

    #[test]
    fn predict_scales() {
        let fit = fit_loglog(&obs(&[(10.0, 10.0), (1000.0, 1000.0), (100.0, 100.0)])).unwrap();
        assert_relative_eq!(predict(&fit, 777.0).unwrap(), 777.0, max_relative = 1e-12);
        assert!(matches!(predict(&fit, 0.0), Err(Error::NonPositivePredictor(_))));
        let nat = fit_natural(&obs(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)])).unwrap();
        assert_relative_eq!(predict(&nat, -4.0).unwrap(), -7.0, epsilon = 1e-12);
    }

    #[test]
    fn p_value_matches_f_tail() {
        let fit = fit_natural(&obs(&[(1.0, 1.2), (2.0, 1.9), (3.0, 3.3), (4.0, 3.8), (5.0, 5.1)])).unwrap();
        let f = fit.anova.f_stat.unwrap();
        let p = fit.anova.p_value.unwrap();
        assert!(f > 0.0 && (0.0..1.0).contains(&p));
        // F(1, 3) tail at the observed statistic equals the two-sided t test p-value
        let t = f.sqrt();
        let tdist = statrs::distribution::StudentsT::new(0.0, 1.0, 3.0).unwrap();
        assert_relative_eq!(p, 2.0 * tdist.sf(t), max_relative = 1e-8);
    }

    #[test]
    fn dual_prediction_band_and_fallback() {
        let inputs = vec![
            CountryInputs {
                country_code: "AA".into(),
                covid_cases: 1000.0,
                excess: 100.0,
                declared_dc: 10.0,
            },
            CountryInputs {
                country_code: "BB".into(),
                covid_cases: 10000.0,
                excess: 1000.0,
                declared_dc: 100.0,
            },
            CountryInputs {
                country_code: "CC".into(),
                covid_cases: 100000.0,
                excess: 10000.0,
                declared_dc: 1000.0,
            },
            CountryInputs {
                country_code: "DD".into(),
                covid_cases: 5000.0,
                excess: -50.0,
                declared_dc: 50.0,
            },
        ];
        let yr = build_dc_predictions(2020, &inputs).unwrap();
        assert_eq!(yr.by_em.n, 3);
        assert_eq!(yr.by_em.excluded[0].country_code, "DD");
        let nat = yr.by_em_natural.as_ref().unwrap();
        assert_eq!(nat.n, 4);
        let dd = &yr.predictions[3];
        assert_eq!(dd.dc_by_em_method, EmMethod::Natural);
        let raw = predict(nat, -50.0).unwrap();
        assert_eq!(dd.dc_by_em, raw.max(0.0));
        assert_eq!(dd.clamped, raw < 0.0);
        // perfectly consistent country: both predictions equal declared
        let aa = &yr.predictions[0];
        assert_relative_eq!(aa.dc_by_cc, 10.0, max_relative = 1e-9);
        assert_relative_eq!(aa.dc_by_em, 10.0, max_relative = 1e-9);
        assert!(aa.within_band || (aa.dc_by_cc - aa.declared_dc).abs() < 1e-9);
    }

    #[test]
    fn no_fallback_without_negative_excess() {
        let inputs: Vec<_> = [(1.0, 2.0, 3.0), (10.0, 30.0, 20.0), (100.0, 250.0, 350.0)]
            .iter()
            .enumerate()
            .map(|(i, &(cc, em, dc))| CountryInputs {
                country_code: format!("C{i}"),
                covid_cases: cc,
                excess: em,
                declared_dc: dc,
            })
            .collect();
        let yr = build_dc_predictions(2021, &inputs).unwrap();
        assert!(yr.by_em_natural.is_none());
        assert!(yr.predictions.iter().all(|p| p.dc_by_em_method == EmMethod::Loglog));
    }
}
