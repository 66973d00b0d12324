//! Expected deaths and excess mortality per country-year.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::timeseries::{prediction_interval, HoltFit};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcessRecord {
    pub country_code: String,
    pub year: i32,
    pub actual_deaths: f64,
    pub expected_deaths: f64,
    pub lower: f64,
    pub upper: f64,
    /// `actual − expected`; negative values are kept.
    pub excess: f64,
    pub outside_interval: bool,
}

pub fn excess_mortality(actual: f64, expected: f64) -> f64 {
    actual - expected
}

/// One record per country and target year, ordered by country code then year.
///
/// `fits` are baselines estimated on a window ending at `fit_end`; target year
/// `y` is forecast `y − fit_end` steps ahead.
pub fn build_excess_table(
    fits: &BTreeMap<String, HoltFit>,
    fit_end: i32,
    actuals: &BTreeMap<(String, i32), f64>,
    target_years: &[i32],
    coverage: f64,
) -> Result<Vec<ExcessRecord>> {
    let mut out = Vec::with_capacity(fits.len() * target_years.len());
    for (country, fit) in fits {
        for &year in target_years {
            if year <= fit_end {
                return Err(Error::InvalidConfig(format!(
                    "target year {year} is not after the fit window end {fit_end}"
                )));
            }
            let actual = *actuals
                .get(&(country.clone(), year))
                .ok_or_else(|| Error::MissingValue {
                    country: country.clone(),
                    year,
                    what: "actual deaths",
                })?;
            let iv = prediction_interval(fit, (year - fit_end) as usize, coverage)?;
            out.push(ExcessRecord {
                country_code: country.clone(),
                year,
                actual_deaths: actual,
                expected_deaths: iv.point,
                lower: iv.lower,
                upper: iv.upper,
                excess: excess_mortality(actual, iv.point),
                outside_interval: actual < iv.lower || actual > iv.upper,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{run_smoother, AnnualSeries, HoltParams};

    #[test]
    fn published_differences() {
        assert_eq!(excess_mortality(91599.0, 85153.0), 6446.0);
        assert_eq!(excess_mortality(54645.0, 55835.0), -1190.0);
        assert_eq!(excess_mortality(112331.0, 111455.0), 876.0);
        assert_eq!(excess_mortality(746146.0, 648310.0), 97836.0);
        assert_eq!(excess_mortality(5.0, 5.0), 0.0);
    }

    fn linear_fit() -> HoltFit {
        let s = AnnualSeries::new("ZZ", 2010, vec![100.0, 110.0, 120.0, 130.0]).unwrap();
        run_smoother(&s, HoltParams::new(0.5, 0.5, 90.0, 10.0).unwrap()).unwrap()
    }

    #[test]
    fn table_maps_horizons_and_flags() {
        let mut fits = BTreeMap::new();
        fits.insert("ZZ".to_string(), linear_fit());
        let mut actuals = BTreeMap::new();
        actuals.insert(("ZZ".to_string(), 2014), 140.0);
        actuals.insert(("ZZ".to_string(), 2015), 175.0);
        let t = build_excess_table(&fits, 2013, &actuals, &[2014, 2015], 0.95).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(
            (t[0].expected_deaths, t[0].excess, t[0].outside_interval),
            (140.0, 0.0, false)
        );
        assert_eq!(
            (t[1].expected_deaths, t[1].excess, t[1].outside_interval),
            (150.0, 25.0, true)
        );
    }

    #[test]
    fn missing_actual_is_reported() {
        let mut fits = BTreeMap::new();
        fits.insert("ZZ".to_string(), linear_fit());
        let err = build_excess_table(&fits, 2013, &BTreeMap::new(), &[2014], 0.95).unwrap_err();
        assert!(matches!(err, Error::MissingValue { year: 2014, .. }));
    }
}
