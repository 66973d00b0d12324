//! Pipeline orchestration and output emission (CSV, JSON, SVG).

pub mod svg;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::excess::{build_excess_table, ExcessRecord};
use crate::indexes::{build_index_table, rank_countries, IndexRow, RankKey, Registry, DEFAULT_STD_UNIT};
use crate::ingest::{
    load_covid_csv, load_deaths_csv, load_registry_csv, validate_bundle, DatasetBundle, FitWindow, ValidationReport,
};
use crate::regression::{build_dc_predictions, CountryInputs, LogLogFit, YearRegressions};
use crate::timeseries::{fit_series, prediction_interval, Backend, Estimate, ForecastInterval, HoltFit, MadWindow};

pub const FORECASTS_HEADER: &str = "country_code,year,expected,lower,upper,alpha,gamma,mad,method";
pub const EXCESS_HEADER: &str = "country_code,year,actual,expected,excess,outside_interval";
pub const INDEXES_HEADER: &str = "country_code,year,dc_by_cc,dc_by_em,declared_dc,dc_bar,d1,d2,d3,i_d,i_f,i_f_prime,rank_i_d,rank_i_f,rank_i_f_prime";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub deaths: PathBuf,
    pub covid: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub fit_window: FitWindow,
    pub target_years: Vec<i32>,
    pub backend: Backend,
    pub coverage: f64,
    pub std_unit: f64,
    pub mad_window: MadWindow,
    pub area_overrides: Vec<(String, f64)>,
    pub out_dir: PathBuf,
    pub tables: bool,
    pub charts: bool,
    pub exclude: BTreeSet<String>,
    pub allow_partial: bool,
}

impl RunConfig {
    pub fn new(deaths: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            deaths: deaths.into(),
            covid: None,
            registry: None,
            fit_window: FitWindow { start: 2010, end: 2019 },
            target_years: vec![2020, 2021],
            backend: Backend::ArimaInit,
            coverage: 0.95,
            std_unit: DEFAULT_STD_UNIT,
            mad_window: MadWindow::All,
            area_overrides: Vec::new(),
            out_dir: out_dir.into(),
            tables: true,
            charts: false,
            exclude: BTreeSet::new(),
            allow_partial: false,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.coverage > 0.0 && self.coverage < 1.0) {
            return Err(Error::InvalidCoverage(self.coverage));
        }
        if !(self.std_unit > 0.0) {
            return Err(Error::InvalidConfig("standardization unit must be > 0".into()));
        }
        Ok(())
    }
}

/// Loads and validates inputs. Invalid bundles are rejected unless
/// `allow_partial` is set, in which case offending countries are dropped.
pub fn load_bundle(config: &RunConfig, need_covid: bool) -> Result<(DatasetBundle, ValidationReport)> {
    config.check()?;
    let deaths = load_deaths_csv(&config.deaths)?;
    let covid = if need_covid {
        let path = config
            .covid
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("--covid is required for this command".into()))?;
        Some(load_covid_csv(path)?)
    } else {
        None
    };
    let mut registry = match &config.registry {
        Some(p) => load_registry_csv(p)?,
        None => Registry::eu27(),
    };
    for (code, area) in &config.area_overrides {
        registry.set_area_override(code, *area)?;
    }
    let present: BTreeSet<&str> = deaths.deaths.keys().map(|(c, _)| c.as_str()).collect();
    if config.registry.is_none() {
        // the embedded registry is a superset; keep the countries that have data
        let keep: BTreeSet<String> = present.iter().map(|s| s.to_string()).collect();
        registry.retain(|c| keep.contains(c));
    }
    for code in &present {
        if registry.get(code).is_none() {
            warn!("{code} has deaths data but no registry entry; ignored");
        }
    }

    let mut bundle = DatasetBundle::new(deaths, covid, registry, config.fit_window, config.target_years.clone());
    let report = validate_bundle(&bundle);
    if !report.is_valid() {
        for v in &report.violations {
            warn!("validation: {v}");
        }
        let global = report.violations.iter().any(|v| v.country_code.is_none());
        if !config.allow_partial || global {
            return Err(Error::Validation(report.violations.len()));
        }
        let dropped = bundle.drop_offending(&report);
        warn!("dropping {} countr(ies): {:?}", dropped.len(), dropped);
        if bundle.registry.is_empty() {
            return Err(Error::Validation(report.violations.len()));
        }
    }
    Ok((bundle, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryForecast {
    pub country_code: String,
    pub fit: HoltFit,
    pub estimate: Estimate,
    pub intervals: Vec<(i32, ForecastInterval)>,
}

/// Fits every country in parallel; results are ordered by country code.
pub fn run_forecasts(bundle: &DatasetBundle, config: &RunConfig) -> Result<Vec<CountryForecast>> {
    let codes: Vec<String> = bundle.registry.codes().map(str::to_string).collect();
    let results: Vec<(String, Result<CountryForecast>)> = codes
        .par_iter()
        .map(|code| {
            let res = (|| {
                let series = bundle.series(code)?;
                let (fit, estimate) = fit_series(&series, config.backend, config.mad_window)?;
                let intervals = bundle
                    .target_years
                    .iter()
                    .map(|&y| {
                        let h = (y - bundle.fit_window.end) as usize;
                        Ok((y, prediction_interval(&fit, h, config.coverage)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(CountryForecast {
                    country_code: code.clone(),
                    fit,
                    estimate,
                    intervals,
                })
            })();
            (code.clone(), res)
        })
        .collect();

    let mut out = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (code, res) in results {
        match res {
            Ok(f) => out.push(f),
            Err(e) => {
                warn!("{code}: estimation failed: {e}");
                failures.push(format!("{code}: {e}"));
            }
        }
    }
    if !failures.is_empty() && (!config.allow_partial || out.is_empty()) {
        return Err(Error::Estimation {
            country: failures.len().to_string() + " countries",
            reason: failures.join("; "),
        });
    }
    out.sort_by(|a, b| a.country_code.cmp(&b.country_code));
    Ok(out)
}

pub fn run_excess(
    bundle: &DatasetBundle,
    forecasts: &[CountryForecast],
    config: &RunConfig,
) -> Result<Vec<ExcessRecord>> {
    let fits: BTreeMap<String, HoltFit> = forecasts
        .iter()
        .map(|f| (f.country_code.clone(), f.fit.clone()))
        .collect();
    build_excess_table(
        &fits,
        bundle.fit_window.end,
        &bundle.deaths,
        &bundle.target_years,
        config.coverage,
    )
}

pub fn run_regressions(bundle: &DatasetBundle, excess: &[ExcessRecord]) -> Result<Vec<YearRegressions>> {
    bundle
        .target_years
        .iter()
        .map(|&year| {
            let inputs = excess
                .iter()
                .filter(|r| r.year == year)
                .map(|r| {
                    let key = (r.country_code.clone(), year);
                    let get = |map: &crate::ingest::YearMap, what| {
                        map.get(&key).copied().ok_or_else(|| Error::MissingValue {
                            country: r.country_code.clone(),
                            year,
                            what,
                        })
                    };
                    Ok(CountryInputs {
                        country_code: r.country_code.clone(),
                        covid_cases: get(&bundle.covid_cases, "covid cases")?,
                        excess: r.excess,
                        declared_dc: get(&bundle.covid_deaths_declared, "declared covid deaths")?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            build_dc_predictions(year, &inputs)
        })
        .collect()
}

pub fn run_indexes(
    bundle: &DatasetBundle,
    regressions: &[YearRegressions],
    config: &RunConfig,
) -> Result<Vec<IndexRow>> {
    let mut rows = Vec::new();
    for yr in regressions {
        rows.extend(build_index_table(
            &yr.predictions,
            &bundle.registry,
            config.std_unit,
            &config.exclude,
        )?);
    }
    Ok(rows)
}

/// Everything one full run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub bundle: DatasetBundle,
    pub forecasts: Vec<CountryForecast>,
    pub excess: Vec<ExcessRecord>,
    pub regressions: Vec<YearRegressions>,
    pub indexes: Vec<IndexRow>,
}

pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutput> {
    let (bundle, _) = load_bundle(config, true)?;
    let forecasts = run_forecasts(&bundle, config)?;
    let excess = run_excess(&bundle, &forecasts, config)?;
    let regressions = run_regressions(&bundle, &excess)?;
    let indexes = run_indexes(&bundle, &regressions, config)?;
    Ok(PipelineOutput {
        bundle,
        forecasts,
        excess,
        regressions,
        indexes,
    })
}

// ---- formatting ----------------------------------------------------------

/// Shortest round-trip representation.
fn num(v: f64) -> String {
    format!("{v}")
}

fn opt_rank(r: Option<usize>) -> String {
    r.map_or(String::new(), |v| v.to_string())
}

pub fn forecasts_csv(forecasts: &[CountryForecast]) -> String {
    let mut s = String::from(FORECASTS_HEADER);
    s.push('\n');
    for f in forecasts {
        let method = f.fit.method.map_or("manual", |m| m.as_str());
        for (year, iv) in &f.intervals {
            s.push_str(
                &[
                    f.country_code.clone(),
                    year.to_string(),
                    num(iv.point),
                    num(iv.lower),
                    num(iv.upper),
                    num(f.fit.params.alpha),
                    num(f.fit.params.gamma),
                    num(f.fit.mad),
                    method.to_string(),
                ]
                .join(","),
            );
            s.push('\n');
        }
    }
    s
}

pub fn excess_csv(records: &[ExcessRecord]) -> String {
    let mut s = String::from(EXCESS_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.country_code,
            r.year,
            num(r.actual_deaths),
            num(r.expected_deaths),
            num(r.excess),
            r.outside_interval
        ));
    }
    s
}

pub fn indexes_csv(rows: &[IndexRow]) -> String {
    let mut s = String::from(INDEXES_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(
            &[
                r.country_code.clone(),
                r.year.to_string(),
                num(r.dc_by_cc),
                num(r.dc_by_em),
                num(r.declared_dc),
                num(r.dc_bar),
                num(r.triple.d1),
                num(r.triple.d2),
                num(r.triple.d3),
                num(r.i_d),
                num(r.i_f),
                num(r.i_f_prime),
                opt_rank(r.ranks.by_i_d),
                opt_rank(r.ranks.by_i_f),
                opt_rank(r.ranks.by_i_f_prime),
            ]
            .join(","),
        );
        s.push('\n');
    }
    s
}

#[derive(Debug, Serialize)]
struct AnovaJson {
    df_regression: usize,
    df_error: usize,
    df_total: usize,
    ss_regression: f64,
    ss_error: f64,
    ss_total: f64,
    ms_regression: f64,
    ms_error: Option<f64>,
    f_stat: Option<f64>,
    p_value: Option<f64>,
    /// Rounded to three decimals.
    p_display: Option<String>,
    r_squared: f64,
}

#[derive(Debug, Serialize)]
struct RegressionJson<'a> {
    year: i32,
    predictor: &'a str,
    response: &'a str,
    scale: crate::regression::Scale,
    equation: String,
    intercept: f64,
    slope: f64,
    n: usize,
    excluded: &'a [crate::regression::Exclusion],
    anova: AnovaJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

fn regression_json<'a>(year: i32, predictor: &'a str, fit: &'a LogLogFit, note: Option<&'a str>) -> RegressionJson<'a> {
    let a = &fit.anova;
    let equation = match fit.scale {
        crate::regression::Scale::Log10 => format!(
            "Log10(DC{year}) = {:.4} + {:.4} Log10({}{year})",
            fit.intercept,
            fit.slope,
            predictor.to_uppercase()
        ),
        crate::regression::Scale::Natural => format!(
            "DC{year} = {:.4} + {:.4} {}{year}",
            fit.intercept,
            fit.slope,
            predictor.to_uppercase()
        ),
    };
    RegressionJson {
        year,
        predictor,
        response: "dc",
        scale: fit.scale,
        equation,
        intercept: fit.intercept,
        slope: fit.slope,
        n: fit.n,
        excluded: &fit.excluded,
        anova: AnovaJson {
            df_regression: a.df_regression,
            df_error: a.df_error,
            df_total: a.df_regression + a.df_error,
            ss_regression: a.ss_regression,
            ss_error: a.ss_error,
            ss_total: a.ss_total,
            ms_regression: a.ms_regression(),
            ms_error: a.ms_error(),
            f_stat: a.f_stat,
            p_value: a.p_value,
            p_display: a.p_value.map(|p| format!("{p:.3}")),
            r_squared: a.r_squared(),
        },
        note,
    }
}

const NATURAL_NOTE: &str =
    "natural-scale fallback fitted on all countries, including those with non-positive excess; used only for those countries";

pub fn regressions_json(regressions: &[YearRegressions]) -> Result<String> {
    let mut entries = Vec::new();
    for yr in regressions {
        entries.push(regression_json(yr.year, "cc", &yr.by_cc, None));
        entries.push(regression_json(yr.year, "em", &yr.by_em, None));
        if let Some(nat) = &yr.by_em_natural {
            entries.push(regression_json(yr.year, "em", nat, Some(NATURAL_NOTE)));
        }
    }
    let mut s = serde_json::to_string_pretty(&entries).map_err(|e| Error::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearSummary {
    pub year: i32,
    pub countries: usize,
    pub dc_bar_total: f64,
    pub declared_dc_total: f64,
    pub excess_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub backend: Backend,
    pub fit_window: FitWindow,
    pub coverage: f64,
    pub years: Vec<YearSummary>,
}

pub fn summarize(out: &PipelineOutput, config: &RunConfig) -> Summary {
    let years = out
        .bundle
        .target_years
        .iter()
        .map(|&year| {
            let rows: Vec<&IndexRow> = out.indexes.iter().filter(|r| r.year == year).collect();
            YearSummary {
                year,
                countries: rows.len(),
                dc_bar_total: rows.iter().map(|r| r.dc_bar).sum(),
                declared_dc_total: rows.iter().map(|r| r.declared_dc).sum(),
                excess_total: out.excess.iter().filter(|r| r.year == year).map(|r| r.excess).sum(),
            }
        })
        .collect();
    Summary {
        backend: config.backend,
        fit_window: out.bundle.fit_window,
        coverage: config.coverage,
        years,
    }
}

pub fn summary_json(summary: &Summary) -> Result<String> {
    let mut s = serde_json::to_string_pretty(summary).map_err(|e| Error::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

// ---- charts --------------------------------------------------------------

pub fn index_charts(rows: &[IndexRow], exclude: &BTreeSet<String>) -> Result<Vec<(String, String)>> {
    let years: BTreeSet<i32> = rows.iter().map(|r| r.year).collect();
    let mut out = Vec::new();
    for year in years {
        let year_rows: Vec<IndexRow> = rows.iter().filter(|r| r.year == year).cloned().collect();
        for key in RankKey::ALL {
            let ranked = rank_countries(&year_rows, key, exclude)?;
            let bars: Vec<(String, f64)> = ranked.iter().map(|r| (r.country_code.clone(), key.value(r))).collect();
            let title = format!("{} {year}", key.as_str());
            out.push((format!("{}_{year}.svg", key.as_str()), svg::bar_chart(&title, &bars)));
        }
    }
    Ok(out)
}

pub fn trend_charts(bundle: &DatasetBundle, forecasts: &[CountryForecast]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for f in forecasts {
        let code = &f.country_code;
        let observed: Vec<(i32, f64)> = bundle
            .deaths
            .range((code.clone(), i32::MIN)..=(code.clone(), i32::MAX))
            .map(|((_, y), v)| (*y, *v))
            .collect();
        let smoothed: Vec<(i32, f64)> = f
            .fit
            .fitted
            .iter()
            .enumerate()
            .map(|(i, v)| (bundle.fit_window.start + i as i32, *v))
            .collect();
        let mut forecast_line = vec![(bundle.fit_window.end, f.fit.final_level)];
        forecast_line.extend(f.intervals.iter().map(|(y, iv)| (*y, iv.point)));
        let whiskers: Vec<svg::Whisker> = f
            .intervals
            .iter()
            .map(|(y, iv)| svg::Whisker {
                year: *y,
                lower: iv.lower,
                upper: iv.upper,
            })
            .collect();
        let lines = [
            svg::Line {
                label: "actual",
                color: "black",
                dashed: false,
                points: observed,
            },
            svg::Line {
                label: "one-step fitted",
                color: "#55a868",
                dashed: true,
                points: smoothed,
            },
            svg::Line {
                label: "forecast",
                color: "#c44e52",
                dashed: false,
                points: forecast_line,
            },
        ];
        let title = format!("{code}: all-cause deaths");
        out.push((format!("trends_{code}.svg"), svg::line_chart(&title, &lines, &whiskers)));
    }
    out
}

// ---- writing -------------------------------------------------------------

pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    info!("wrote {}", path.display());
    Ok(path)
}

pub fn cmd_forecast(config: &RunConfig) -> Result<Vec<CountryForecast>> {
    let (bundle, _) = load_bundle(config, false)?;
    let forecasts = run_forecasts(&bundle, config)?;
    if config.tables {
        write_output(&config.out_dir, "forecasts.csv", &forecasts_csv(&forecasts))?;
    }
    if config.charts {
        for (name, body) in trend_charts(&bundle, &forecasts) {
            write_output(&config.out_dir, &name, &body)?;
        }
    }
    Ok(forecasts)
}

pub fn cmd_excess(config: &RunConfig) -> Result<Vec<ExcessRecord>> {
    let (bundle, _) = load_bundle(config, false)?;
    let forecasts = run_forecasts(&bundle, config)?;
    let excess = run_excess(&bundle, &forecasts, config)?;
    if config.tables {
        write_output(&config.out_dir, "excess.csv", &excess_csv(&excess))?;
    }
    Ok(excess)
}

pub fn cmd_regress(config: &RunConfig) -> Result<Vec<YearRegressions>> {
    let (bundle, _) = load_bundle(config, true)?;
    let forecasts = run_forecasts(&bundle, config)?;
    let excess = run_excess(&bundle, &forecasts, config)?;
    let regressions = run_regressions(&bundle, &excess)?;
    if config.tables {
        write_output(&config.out_dir, "regressions.json", &regressions_json(&regressions)?)?;
    }
    Ok(regressions)
}

pub fn cmd_indexes(config: &RunConfig) -> Result<Vec<IndexRow>> {
    let out = run_pipeline(config)?;
    if config.tables {
        write_output(&config.out_dir, "indexes.csv", &indexes_csv(&out.indexes))?;
    }
    if config.charts {
        for (name, body) in index_charts(&out.indexes, &config.exclude)? {
            write_output(&config.out_dir, &name, &body)?;
        }
        for (name, body) in trend_charts(&out.bundle, &out.forecasts) {
            write_output(&config.out_dir, &name, &body)?;
        }
    }
    Ok(out.indexes)
}

pub fn cmd_pipeline(config: &RunConfig) -> Result<Summary> {
    let out = run_pipeline(config)?;
    let summary = summarize(&out, config);
    if config.tables {
        let dir = &config.out_dir;
        write_output(dir, "forecasts.csv", &forecasts_csv(&out.forecasts))?;
        write_output(dir, "excess.csv", &excess_csv(&out.excess))?;
        write_output(dir, "regressions.json", &regressions_json(&out.regressions)?)?;
        write_output(dir, "indexes.csv", &indexes_csv(&out.indexes))?;
        write_output(dir, "summary.json", &summary_json(&summary)?)?;
    }
    if config.charts {
        for (name, body) in index_charts(&out.indexes, &config.exclude)? {
            write_output(&config.out_dir, &name, &body)?;
        }
        for (name, body) in trend_charts(&out.bundle, &out.forecasts) {
            write_output(&config.out_dir, &name, &body)?;
        }
    }
    Ok(summary)
}
