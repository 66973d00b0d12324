//! Loading and validation of the canonical long-format input CSVs.
//!
//! ```text
//! deaths:   country_code,year,deaths
//! covid:    country_code,year,cases,deaths
//! registry: country_code,name,numeric_id,population,land_area_km2,area_override_km2
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::indexes::{CountryRecord, Registry};
use crate::timeseries::AnnualSeries;

pub const DEATHS_HEADER: &str = "country_code,year,deaths";
pub const COVID_HEADER: &str = "country_code,year,cases,deaths";
pub const REGISTRY_HEADER: &str = "country_code,name,numeric_id,population,land_area_km2,area_override_km2";

pub type YearMap = BTreeMap<(String, i32), f64>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeathsTable {
    pub deaths: YearMap,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CovidTable {
    pub cases: YearMap,
    pub deaths: YearMap,
    pub warnings: Vec<String>,
}

struct Rows {
    label: PathBuf,
    records: Vec<(usize, Vec<String>)>,
}

fn read_rows<R: Read>(reader: R, label: &Path, header: &str) -> Result<Rows> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: label.to_path_buf(),
        line,
        msg,
    };
    let expected: Vec<&str> = header.split(',').collect();
    let mut records = Vec::new();
    let mut saw_header = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if !saw_header {
            let got: Vec<&str> = fields.iter().map(|f| f.trim_start_matches('\u{feff}')).collect();
            if got != expected {
                return Err(parse_err(
                    line,
                    format!("expected header '{header}', found '{}'", got.join(",")),
                ));
            }
            saw_header = true;
            continue;
        }
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if fields.len() != expected.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", expected.len(), fields.len()),
            ));
        }
        records.push((line, fields));
    }
    if !saw_header {
        return Err(parse_err(1, format!("missing header '{header}'")));
    }
    Ok(Rows {
        label: label.to_path_buf(),
        records,
    })
}

impl Rows {
    fn err(&self, line: usize, msg: String) -> Error {
        Error::Parse {
            path: self.label.clone(),
            line,
            msg,
        }
    }

    fn code(&self, line: usize, s: &str) -> Result<String> {
        if s.len() == 2 && s.chars().all(|c| c.is_ascii_uppercase()) {
            Ok(s.to_string())
        } else {
            Err(self.err(line, format!("'{s}' is not an ISO-2 country code")))
        }
    }

    fn year(&self, line: usize, s: &str) -> Result<i32> {
        s.parse().map_err(|_| self.err(line, format!("'{s}' is not a year")))
    }

    fn count(&self, line: usize, column: &str, s: &str) -> Result<f64> {
        let v: f64 = s
            .parse()
            .map_err(|_| self.err(line, format!("{column}: '{s}' is not a number")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(self.err(line, format!("{column}: {s} must be a non-negative number")));
        }
        Ok(v)
    }

    fn positive(&self, line: usize, column: &str, s: &str) -> Result<f64> {
        let v = self.count(line, column, s)?;
        if v == 0.0 {
            return Err(self.err(line, format!("{column} must be > 0")));
        }
        Ok(v)
    }
}

fn insert_unique(map: &mut YearMap, rows: &Rows, line: usize, key: (String, i32), v: f64) -> Result<()> {
    if map.contains_key(&key) {
        return Err(rows.err(line, format!("duplicate entry for {}/{}", key.0, key.1)));
    }
    map.insert(key, v);
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn parse_deaths<R: Read>(reader: R, label: impl AsRef<Path>) -> Result<DeathsTable> {
    let rows = read_rows(reader, label.as_ref(), DEATHS_HEADER)?;
    let mut table = DeathsTable::default();
    for (line, f) in &rows.records {
        let key = (rows.code(*line, &f[0])?, rows.year(*line, &f[1])?);
        let v = rows.count(*line, "deaths", &f[2])?;
        insert_unique(&mut table.deaths, &rows, *line, key, v)?;
    }
    if table.deaths.is_empty() {
        let msg = format!("{}: no data rows", rows.label.display());
        warn!("{msg}");
        table.warnings.push(msg);
    }
    Ok(table)
}

pub fn load_deaths_csv(path: impl AsRef<Path>) -> Result<DeathsTable> {
    let path = path.as_ref();
    parse_deaths(open(path)?, path)
}

pub fn parse_covid<R: Read>(reader: R, label: impl AsRef<Path>) -> Result<CovidTable> {
    let rows = read_rows(reader, label.as_ref(), COVID_HEADER)?;
    let mut table = CovidTable::default();
    for (line, f) in &rows.records {
        let key = (rows.code(*line, &f[0])?, rows.year(*line, &f[1])?);
        let cases = rows.count(*line, "cases", &f[2])?;
        let deaths = rows.count(*line, "deaths", &f[3])?;
        if cases == 0.0 && deaths > 0.0 {
            let msg = format!(
                "{}:{line}: {}/{} reports {deaths} covid deaths with zero cases",
                rows.label.display(),
                key.0,
                key.1
            );
            warn!("{msg}");
            table.warnings.push(msg);
        }
        insert_unique(&mut table.cases, &rows, *line, key.clone(), cases)?;
        table.deaths.insert(key, deaths);
    }
    if table.cases.is_empty() {
        let msg = format!("{}: no data rows", rows.label.display());
        warn!("{msg}");
        table.warnings.push(msg);
    }
    Ok(table)
}

pub fn load_covid_csv(path: impl AsRef<Path>) -> Result<CovidTable> {
    let path = path.as_ref();
    parse_covid(open(path)?, path)
}

pub fn parse_registry<R: Read>(reader: R, label: impl AsRef<Path>) -> Result<Vec<CountryRecord>> {
    let rows = read_rows(reader, label.as_ref(), REGISTRY_HEADER)?;
    let mut out = Vec::with_capacity(rows.records.len());
    for (line, f) in &rows.records {
        let numeric_id = f[2]
            .parse()
            .map_err(|_| rows.err(*line, format!("numeric_id: '{}' is not an integer", f[2])))?;
        let area_override = if f[5].is_empty() {
            None
        } else {
            Some(rows.positive(*line, "area_override_km2", &f[5])?)
        };
        out.push(CountryRecord {
            country_code: rows.code(*line, &f[0])?,
            name: f[1].clone(),
            numeric_id,
            population: rows.positive(*line, "population", &f[3])?,
            land_area: rows.positive(*line, "land_area_km2", &f[4])?,
            area_override,
        });
    }
    Ok(out)
}

pub fn load_registry_csv(path: impl AsRef<Path>) -> Result<Registry> {
    let path = path.as_ref();
    Registry::new(parse_registry(open(path)?, path)?)
}

/// Year range `[start, end]`, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FitWindow {
    pub start: i32,
    pub end: i32,
}

impl FitWindow {
    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start..=self.end
    }
}

impl std::str::FromStr for FitWindow {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("'{s}' is not START:END"))?;
        let start = a.trim().parse().map_err(|_| format!("'{a}' is not a year"))?;
        let end = b.trim().parse().map_err(|_| format!("'{b}' is not a year"))?;
        if start > end {
            return Err(format!("window {start}:{end} is reversed"));
        }
        Ok(Self { start, end })
    }
}

/// Everything the pipeline consumes, keyed by country and year.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub deaths: YearMap,
    pub covid_cases: YearMap,
    pub covid_deaths_declared: YearMap,
    pub registry: Registry,
    pub fit_window: FitWindow,
    pub target_years: Vec<i32>,
    /// Whether covid inputs are part of this bundle and must be complete.
    pub covid_required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub country_code: Option<String>,
    pub year: Option<i32>,
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.country_code, self.year) {
            (Some(c), Some(y)) => write!(f, "{c}/{y}/{}: {}", self.field, self.message),
            (Some(c), None) => write!(f, "{c}/{}: {}", self.field, self.message),
            _ => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn offending_countries(&self) -> BTreeSet<String> {
        self.violations.iter().filter_map(|v| v.country_code.clone()).collect()
    }
}

/// Longest supported forecast horizon past the fit window.
pub const MAX_HORIZON: i32 = 2;

impl DatasetBundle {
    pub fn new(
        deaths: DeathsTable,
        covid: Option<CovidTable>,
        registry: Registry,
        fit_window: FitWindow,
        mut target_years: Vec<i32>,
    ) -> Self {
        target_years.sort_unstable();
        target_years.dedup();
        let covid_required = covid.is_some();
        let covid = covid.unwrap_or_default();
        Self {
            deaths: deaths.deaths,
            covid_cases: covid.cases,
            covid_deaths_declared: covid.deaths,
            registry,
            fit_window,
            target_years,
            covid_required,
        }
    }

    /// Drops every country named in `report`.
    pub fn drop_offending(&mut self, report: &ValidationReport) -> BTreeSet<String> {
        let bad = report.offending_countries();
        self.registry.retain(|c| !bad.contains(c));
        for map in [&mut self.deaths, &mut self.covid_cases, &mut self.covid_deaths_declared] {
            map.retain(|(c, _), _| !bad.contains(c));
        }
        bad
    }

    /// The fit-window series for `country`.
    pub fn series(&self, country: &str) -> Result<AnnualSeries> {
        let values = self
            .fit_window
            .years()
            .map(|y| {
                self.deaths
                    .get(&(country.to_string(), y))
                    .copied()
                    .ok_or_else(|| Error::MissingValue {
                        country: country.to_string(),
                        year: y,
                        what: "deaths",
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        AnnualSeries::new(country, self.fit_window.start, values)
    }

    pub fn write_deaths_csv<W: Write>(&self, w: W) -> Result<()> {
        write_long(
            w,
            DEATHS_HEADER,
            self.deaths
                .iter()
                .map(|((c, y), v)| vec![c.clone(), y.to_string(), v.to_string()]),
        )
    }

    pub fn write_covid_csv<W: Write>(&self, w: W) -> Result<()> {
        let rows = self.covid_cases.iter().map(|((c, y), cases)| {
            let deaths = self
                .covid_deaths_declared
                .get(&(c.clone(), *y))
                .map_or(String::new(), f64::to_string);
            vec![c.clone(), y.to_string(), cases.to_string(), deaths]
        });
        write_long(w, COVID_HEADER, rows)
    }

    pub fn write_registry_csv<W: Write>(&self, w: W) -> Result<()> {
        let rows = self.registry.records().map(|r| {
            vec![
                r.country_code.clone(),
                r.name.clone(),
                r.numeric_id.to_string(),
                r.population.to_string(),
                r.land_area.to_string(),
                r.area_override.map_or(String::new(), |a| a.to_string()),
            ]
        });
        write_long(w, REGISTRY_HEADER, rows)
    }
}

fn write_long<W: Write>(mut w: W, header: &str, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let io = |e| Error::io("<writer>", e);
    writeln!(w, "{header}").map_err(io)?;
    for r in rows {
        writeln!(w, "{}", r.join(",")).map_err(io)?;
    }
    Ok(())
}

/// Checks every bundle invariant, collecting all violations.
pub fn validate_bundle(bundle: &DatasetBundle) -> ValidationReport {
    let max_horizon = MAX_HORIZON;
    let mut violations = Vec::new();
    let mut global = |field, message: String| {
        violations.push(Violation {
            country_code: None,
            year: None,
            field,
            message,
        })
    };

    let targets = &bundle.target_years;
    let end = bundle.fit_window.end;
    if targets.is_empty() {
        global("target_years", "no target years".into());
    }
    if let (Some(&first), Some(&last)) = (targets.first(), targets.last()) {
        if first <= end {
            global(
                "target_years",
                format!("target {first} is not after the fit window end {end}"),
            );
        }
        if last - end > max_horizon {
            global(
                "target_years",
                format!(
                    "target {last} is {} years past the window, at most {max_horizon} supported",
                    last - end
                ),
            );
        }
        if targets.windows(2).any(|w| w[1] != w[0] + 1) {
            global("target_years", "target years are not consecutive".into());
        }
    }
    let window_len = (bundle.fit_window.end - bundle.fit_window.start + 1) as usize;
    if window_len < crate::timeseries::MIN_SERIES_LEN {
        global(
            "fit_window",
            format!(
                "window has {window_len} years, at least {} required",
                crate::timeseries::MIN_SERIES_LEN
            ),
        );
    }
    if bundle.registry.is_empty() {
        global("registry", "registry is empty".into());
    }

    for code in bundle.registry.codes() {
        let mut missing = |year: i32, field: &'static str, map: &YearMap| {
            if !map.contains_key(&(code.to_string(), year)) {
                violations.push(Violation {
                    country_code: Some(code.to_string()),
                    year: Some(year),
                    field,
                    message: "missing".into(),
                });
            }
        };
        for y in bundle.fit_window.years().chain(targets.iter().copied()) {
            missing(y, "deaths", &bundle.deaths);
        }
        for &y in targets.iter().filter(|_| bundle.covid_required) {
            missing(y, "cases", &bundle.covid_cases);
            missing(y, "declared_dc", &bundle.covid_deaths_declared);
        }
    }
    ValidationReport { violations }
}
