//! Daily demand/temperature series: CSV ingestion, validation and the
//! yearly train/validation/test split.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calendar::{CivilDate, DateRange};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 3] = ["date", "temperature_c", "demand_mscm"];
pub const MIN_TEMPERATURE: f64 = -30.0;
pub const MAX_TEMPERATURE: f64 = 50.0;

/// Demand component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeriesKind {
    #[serde(rename = "RGD")]
    Residential,
    #[serde(rename = "IGD")]
    Industrial,
    #[serde(rename = "TGD")]
    Thermoelectric,
}

impl SeriesKind {
    pub const ALL: [SeriesKind; 3] = [
        SeriesKind::Residential,
        SeriesKind::Industrial,
        SeriesKind::Thermoelectric,
    ];

    pub fn code(self) -> &'static str {
        match self {
            SeriesKind::Residential => "RGD",
            SeriesKind::Industrial => "IGD",
            SeriesKind::Thermoelectric => "TGD",
        }
    }
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SeriesKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RGD" => Ok(SeriesKind::Residential),
            "IGD" => Ok(SeriesKind::Industrial),
            "TGD" => Ok(SeriesKind::Thermoelectric),
            other => Err(Error::InvalidParameter(format!("unknown series kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub date: CivilDate,
    pub temperature_c: f64,
    pub demand_mscm: f64,
}

/// Validated, gap-free daily series.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    kind: SeriesKind,
    records: Vec<DailyRecord>,
}

impl DailySeries {
    /// Sorts and validates `records`.
    pub fn new(kind: SeriesKind, mut records: Vec<DailyRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptySeries);
        }
        records.sort_by_key(|r| r.date);
        for r in &records {
            validate_values(r).map_err(|message| Error::InvalidParameter(format!("{}: {message}", r.date)))?;
        }
        for pair in records.windows(2) {
            let (a, b) = (pair[0].date, pair[1].date);
            if a == b {
                return Err(Error::DuplicateDate(a));
            }
            if b.days_since(a) != 1 {
                return Err(Error::Gap { after: a, before: b });
            }
        }
        Ok(DailySeries { kind, records })
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn records(&self) -> &[DailyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn start(&self) -> CivilDate {
        self.records[0].date
    }

    pub fn end(&self) -> CivilDate {
        self.records[self.records.len() - 1].date
    }

    pub fn range(&self) -> DateRange {
        DateRange { start: self.start(), end: self.end() }
    }

    pub fn get(&self, date: CivilDate) -> Option<&DailyRecord> {
        let offset = date.days_since(self.start());
        if offset < 0 {
            return None;
        }
        self.records.get(offset as usize)
    }

    pub fn demand(&self, date: CivilDate) -> Option<f64> {
        self.get(date).map(|r| r.demand_mscm)
    }

    pub fn temperature(&self, date: CivilDate) -> Option<f64> {
        self.get(date).map(|r| r.temperature_c)
    }

    /// Records within `range`, clipped to the series coverage.
    pub fn slice(&self, range: DateRange) -> &[DailyRecord] {
        let lo = range.start.days_since(self.start()).max(0) as usize;
        let hi = (range.end.days_since(self.start()) + 1).max(0) as usize;
        let lo = lo.min(self.records.len());
        let hi = hi.min(self.records.len());
        &self.records[lo..hi.max(lo)]
    }
}

fn validate_values(r: &DailyRecord) -> std::result::Result<(), String> {
    if !r.temperature_c.is_finite() || !r.demand_mscm.is_finite() {
        return Err("non-finite value".into());
    }
    if r.demand_mscm < 0.0 {
        return Err(format!("negative demand {}", r.demand_mscm));
    }
    if !(MIN_TEMPERATURE..=MAX_TEMPERATURE).contains(&r.temperature_c) {
        return Err(format!("temperature {} outside [-30, 50]", r.temperature_c));
    }
    Ok(())
}

/// Parses a `date,temperature_c,demand_mscm` CSV.
pub fn load_series<R: Read>(source: R, kind: SeriesKind) -> Result<DailySeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!("expected header `{}`, found `{}`", CSV_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::MalformedRow { line, message: e.to_string() }
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |message: String| Error::MalformedRow { line, message };
        if row.len() != 3 {
            return Err(malformed(format!("expected 3 fields, found {}", row.len())));
        }
        let date: CivilDate = row[0].parse().map_err(|_| malformed(format!("invalid date `{}`", &row[0])))?;
        let parse = |field: &str, name: &str| -> Result<f64> {
            let v: f64 = field
                .parse()
                .map_err(|_| malformed(format!("invalid {name} `{field}`")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name} at line {line}")));
            }
            Ok(v)
        };
        let record = DailyRecord {
            date,
            temperature_c: parse(&row[1], "temperature_c")?,
            demand_mscm: parse(&row[2], "demand_mscm")?,
        };
        validate_values(&record).map_err(malformed)?;
        records.push(record);
    }
    DailySeries::new(kind, records)
}

pub fn write_series<W: Write>(series: &DailySeries, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_HEADER)?;
    for r in series.records() {
        w.write_record([r.date.to_string(), r.temperature_c.to_string(), r.demand_mscm.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Train/validation/test ranges for one test year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test_year: i32,
    pub train: DateRange,
    pub validation: DateRange,
    pub test: DateRange,
}

/// Test = `test_year`, validation = the year before, training = all
/// earlier data. The series must cover at least three full years ending
/// with the test year.
pub fn make_split(series: &DailySeries, test_year: i32) -> Result<SplitPlan> {
    let test = DateRange::year(test_year)?;
    let validation = DateRange::year(test_year - 1)?;
    let earliest_start = CivilDate::year_start(test_year - 2)?;
    if series.start() > earliest_start || series.end() < test.end {
        return Err(Error::InsufficientHistory(format!(
            "test year {test_year} needs coverage {}..{}, series covers {}",
            earliest_start,
            test.end,
            series.range()
        )));
    }
    let train = DateRange::new(series.start(), validation.start.pred())?;
    Ok(SplitPlan { test_year, train, validation, test })
}

/// Training and validation ranges joined, used to refit base models.
pub fn merge_train_validation(plan: &SplitPlan) -> DateRange {
    DateRange { start: plan.train.start, end: plan.validation.end }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(start: CivilDate, days: usize) -> DailySeries {
        let records = (0..days)
            .map(|k| DailyRecord {
                date: start.add_days(k as i64),
                temperature_c: 10.0,
                demand_mscm: 100.0 + k as f64,
            })
            .collect();
        DailySeries::new(SeriesKind::Industrial, records).unwrap()
    }

    #[test]
    fn loads_three_rows() {
        let csv = "date,temperature_c,demand_mscm\n2017-01-01,3.5,120.0\n2017-01-02,4,118.25\n2017-01-03,-1.0,130\n";
        let s = load_series(csv.as_bytes(), SeriesKind::Industrial).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.demand(CivilDate::ymd(2017, 1, 2)), Some(118.25));
    }

    #[test]
    fn duplicate_date_is_named() {
        let csv = "date,temperature_c,demand_mscm\n2017-01-01,3.5,120.0\n2017-01-01,4,118\n";
        match load_series(csv.as_bytes(), SeriesKind::Industrial) {
            Err(Error::DuplicateDate(d)) => assert_eq!(d, CivilDate::ymd(2017, 1, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gap_is_named() {
        let csv = "date,temperature_c,demand_mscm\n2017-02-28,3.5,120.0\n2017-03-02,4,118\n";
        match load_series(csv.as_bytes(), SeriesKind::Industrial) {
            Err(Error::Gap { after, before }) => {
                assert_eq!(after, CivilDate::ymd(2017, 2, 28));
                assert_eq!(before, CivilDate::ymd(2017, 3, 2));
                assert!(Error::Gap { after, before }.to_string().contains("2017-02-28"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "date,temperature_c,demand_mscm\n2017-01-01,3.5,120.0\n2017-01-02,abc,118\n";
        match load_series(csv.as_bytes(), SeriesKind::Industrial) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad_header = "day,temp,demand\n2017-01-01,3.5,120.0\n";
        assert!(matches!(
            load_series(bad_header.as_bytes(), SeriesKind::Industrial),
            Err(Error::MalformedRow { line: 1, .. })
        ));
        let nan = "date,temperature_c,demand_mscm\n2017-01-01,NaN,120.0\n";
        assert!(matches!(load_series(nan.as_bytes(), SeriesKind::Industrial), Err(Error::NonFinite(_))));
        let negative = "date,temperature_c,demand_mscm\n2017-01-01,3,-1\n";
        assert!(load_series(negative.as_bytes(), SeriesKind::Industrial).is_err());
    }

    #[test]
    fn split_rules() {
        let start = CivilDate::ymd(2007, 1, 1);
        let days = DateRange::new(start, CivilDate::ymd(2018, 12, 31)).unwrap().len();
        let s = synthetic(start, days);
        let p = make_split(&s, 2017).unwrap();
        assert_eq!(p.train, DateRange::new(start, CivilDate::ymd(2015, 12, 31)).unwrap());
        assert_eq!(p.validation, DateRange::year(2016).unwrap());
        assert_eq!(p.test, DateRange::year(2017).unwrap());
        let p14 = make_split(&s, 2014).unwrap();
        assert_eq!(p14.validation, DateRange::year(2013).unwrap());
        assert_eq!(p14.train.end, CivilDate::ymd(2012, 12, 31));
        assert!(make_split(&s, 2008).is_err());
        assert!(make_split(&s, 2019).is_err());

        let merged = merge_train_validation(&p);
        assert_eq!(merged, DateRange::new(start, CivilDate::ymd(2016, 12, 31)).unwrap());
        assert_eq!(merged.len(), p.train.len() + p.validation.len());
        assert_eq!(merge_train_validation(&p14).end, CivilDate::ymd(2013, 12, 31));
    }

    #[test]
    fn slice_clips() {
        let s = synthetic(CivilDate::ymd(2017, 1, 1), 10);
        let r = DateRange::new(CivilDate::ymd(2016, 12, 1), CivilDate::ymd(2017, 1, 3)).unwrap();
        assert_eq!(s.slice(r).len(), 3);
        let r = DateRange::new(CivilDate::ymd(2018, 1, 1), CivilDate::ymd(2018, 1, 3)).unwrap();
        assert!(s.slice(r).is_empty());
    }
}
