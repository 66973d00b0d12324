//! Discrepancy and fatal-impact indexes and country rankings.
//!
//! With `d1 ≤ d2` the standardized min/max predicted covid deaths and `d3`
//! the standardized declared count:
//!
//! ```text
//! I_D  = (d2 − d1) + |d3 − (d1 + d2)/2|
//! I_F  = DC̄ / (P · A)
//! I'_F = DC̄ / P
//! ```
//!
//! where `DC̄` is the mean of the two predicted counts, `P` the population and
//! `A` the land area (or its override).

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::regression::DcPrediction;

/// Default standardization unit: deaths per 100,000 persons.
pub const DEFAULT_STD_UNIT: f64 = 100_000.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryRecord {
    pub country_code: String,
    pub name: String,
    pub numeric_id: u32,
    pub population: f64,
    pub land_area: f64,
    pub area_override: Option<f64>,
}

impl CountryRecord {
    pub fn effective_area(&self) -> f64 {
        self.area_override.unwrap_or(self.land_area)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.population > 0.0) {
            return Err(Error::NonPositivePopulation(self.population));
        }
        if !(self.land_area > 0.0) || self.area_override.is_some_and(|a| !(a > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "{}: land area and override must be > 0",
                self.country_code
            )));
        }
        Ok(())
    }
}

/// Country registry keyed by ISO-2 code.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Registry {
    records: BTreeMap<String, CountryRecord>,
}

const EU27_CSV: &str = include_str!("../data/registry_eu27.csv");

impl Registry {
    pub fn new(records: Vec<CountryRecord>) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut ids = BTreeSet::new();
        for r in records {
            r.validate()?;
            if !ids.insert(r.numeric_id) {
                return Err(Error::InvalidConfig(format!("duplicate numeric id {}", r.numeric_id)));
            }
            if map.contains_key(&r.country_code) {
                return Err(Error::InvalidConfig(format!("duplicate country {}", r.country_code)));
            }
            map.insert(r.country_code.clone(), r);
        }
        Ok(Self { records: map })
    }

    /// The 27 EU member states with 2019 populations and land areas.
    pub fn eu27() -> Self {
        let records = crate::ingest::parse_registry(EU27_CSV.as_bytes(), "<embedded registry>")
            .expect("embedded registry parses");
        Self::new(records).expect("embedded registry is valid")
    }

    pub fn get(&self, code: &str) -> Option<&CountryRecord> {
        self.records.get(code)
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    pub fn records(&self) -> impl Iterator<Item = &CountryRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn set_area_override(&mut self, code: &str, area: f64) -> Result<()> {
        let rec = self
            .records
            .get_mut(code)
            .ok_or_else(|| Error::UnknownCountry(code.to_string()))?;
        if !(area > 0.0) {
            return Err(Error::InvalidConfig(format!("{code}: area override must be > 0")));
        }
        rec.area_override = Some(area);
        Ok(())
    }

    pub fn retain(&mut self, keep: impl Fn(&str) -> bool) {
        self.records.retain(|k, _| keep(k));
    }
}

pub fn standardize(dc: f64, population: f64, unit: f64) -> Result<f64> {
    if !(population > 0.0) {
        return Err(Error::NonPositivePopulation(population));
    }
    if !(unit > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "standardization unit must be > 0, got {unit}"
        )));
    }
    Ok(dc * unit / population)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DcTriple {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl DcTriple {
    /// Orders the two predictions so that `d1 ≤ d2`.
    pub fn from_predictions(a: f64, b: f64, declared: f64) -> Self {
        Self {
            d1: a.min(b),
            d2: a.max(b),
            d3: declared,
        }
    }
}

pub fn discrepancy_index(t: DcTriple) -> Result<f64> {
    if t.d1 > t.d2 {
        return Err(Error::UnorderedTriple { d1: t.d1, d2: t.d2 });
    }
    Ok((t.d2 - t.d1) + (t.d3 - 0.5 * (t.d1 + t.d2)).abs())
}

pub fn mean_predicted_dc(dc_by_cc: f64, dc_by_em: f64) -> f64 {
    0.5 * (dc_by_cc + dc_by_em)
}

pub fn fatal_impact(dc_bar: f64, record: &CountryRecord) -> f64 {
    dc_bar / (record.population * record.effective_area())
}

pub fn fatality_rate(dc_bar: f64, record: &CountryRecord) -> f64 {
    dc_bar / record.population
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKey {
    ID,
    IF,
    IFPrime,
}

impl RankKey {
    pub const ALL: [RankKey; 3] = [RankKey::ID, RankKey::IF, RankKey::IFPrime];

    pub fn as_str(&self) -> &'static str {
        match self {
            RankKey::ID => "i_d",
            RankKey::IF => "i_f",
            RankKey::IFPrime => "i_f_prime",
        }
    }

    pub fn value(&self, row: &IndexRow) -> f64 {
        match self {
            RankKey::ID => row.i_d,
            RankKey::IF => row.i_f,
            RankKey::IFPrime => row.i_f_prime,
        }
    }
}

impl std::str::FromStr for RankKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i_d" => Ok(RankKey::ID),
            "i_f" => Ok(RankKey::IF),
            "i_f_prime" => Ok(RankKey::IFPrime),
            other => Err(Error::InvalidConfig(format!("unknown ranking key '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Ranks {
    pub by_i_d: Option<usize>,
    pub by_i_f: Option<usize>,
    pub by_i_f_prime: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexRow {
    pub country_code: String,
    pub year: i32,
    pub dc_by_cc: f64,
    pub dc_by_em: f64,
    pub declared_dc: f64,
    pub dc_bar: f64,
    pub triple: DcTriple,
    pub i_d: f64,
    pub i_f: f64,
    pub i_f_prime: f64,
    /// Ranks over the non-excluded rows; `None` for excluded countries.
    pub ranks: Ranks,
}

/// Rows ordered from highest to lowest `key`, ties broken by country code.
pub fn rank_countries<'a>(rows: &'a [IndexRow], key: RankKey, exclude: &BTreeSet<String>) -> Result<Vec<&'a IndexRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("nothing to rank".into()));
    }
    let mut kept: Vec<&IndexRow> = rows.iter().filter(|r| !exclude.contains(&r.country_code)).collect();
    kept.sort_by(|a, b| {
        key.value(b)
            .total_cmp(&key.value(a))
            .then_with(|| a.country_code.cmp(&b.country_code))
    });
    Ok(kept)
}

/// Builds the index table for one year from the dual predictions.
pub fn build_index_table(
    predictions: &[DcPrediction],
    registry: &Registry,
    std_unit: f64,
    exclude: &BTreeSet<String>,
) -> Result<Vec<IndexRow>> {
    let mut rows = Vec::with_capacity(predictions.len());
    for p in predictions {
        let rec = registry
            .get(&p.country_code)
            .ok_or_else(|| Error::UnknownCountry(p.country_code.clone()))?;
        let s = |v: f64| standardize(v, rec.population, std_unit);
        let triple = DcTriple::from_predictions(s(p.dc_by_cc)?, s(p.dc_by_em)?, s(p.declared_dc)?);
        let dc_bar = mean_predicted_dc(p.dc_by_cc, p.dc_by_em);
        rows.push(IndexRow {
            country_code: p.country_code.clone(),
            year: p.year,
            dc_by_cc: p.dc_by_cc,
            dc_by_em: p.dc_by_em,
            declared_dc: p.declared_dc,
            dc_bar,
            triple,
            i_d: discrepancy_index(triple)?,
            i_f: fatal_impact(dc_bar, rec),
            i_f_prime: fatality_rate(dc_bar, rec),
            ranks: Ranks::default(),
        });
    }
    if rows.is_empty() {
        return Ok(rows);
    }
    let mut ranks: BTreeMap<(String, RankKey), usize> = BTreeMap::new();
    for key in RankKey::ALL {
        for (i, r) in rank_countries(&rows, key, exclude)?.into_iter().enumerate() {
            ranks.insert((r.country_code.clone(), key), i + 1);
        }
    }
    for row in &mut rows {
        let get = |k| ranks.get(&(row.country_code.clone(), k)).copied();
        row.ranks = Ranks {
            by_i_d: get(RankKey::ID),
            by_i_f: get(RankKey::IF),
            by_i_f_prime: get(RankKey::IFPrime),
        };
    }
    rows.sort_by(|a, b| a.country_code.cmp(&b.country_code));
    Ok(rows)
}
