//! Design-matrix construction: autoregressive demand lags, temperature and
//! degree-day terms, weekday dummies and calendar indicators.

use std::io::Write;

use chrono::Weekday;
use nalgebra::{DMatrix, DVector};

use crate::calendar::{classify_day, similar_day, CivilDate, DateRange, DayClass};
use crate::dataset::{DailySeries, SeriesKind};
use crate::error::{Error, Result};

pub const HDD_THRESHOLD_C: f64 = 18.0;
pub const HCDD_THRESHOLD_C: f64 = 16.0;

/// Heating degree days, `max(18 - T, 0)`.
pub fn hdd(temperature_c: f64) -> f64 {
    (HDD_THRESHOLD_C - temperature_c).max(0.0)
}

/// Heating and cooling degree days, `|16 - T|`.
pub fn hcdd(temperature_c: f64) -> f64 {
    (HCDD_THRESHOLD_C - temperature_c).abs()
}

/// Degree-day transform used for a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeatherIndex {
    Hdd,
    Hcdd,
}

impl WeatherIndex {
    pub fn for_kind(kind: SeriesKind) -> Self {
        match kind {
            SeriesKind::Residential | SeriesKind::Industrial => WeatherIndex::Hdd,
            SeriesKind::Thermoelectric => WeatherIndex::Hcdd,
        }
    }

    pub fn apply(self, temperature_c: f64) -> f64 {
        match self {
            WeatherIndex::Hdd => hdd(temperature_c),
            WeatherIndex::Hcdd => hcdd(temperature_c),
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            WeatherIndex::Hdd => "hdd",
            WeatherIndex::Hcdd => "hcdd",
        }
    }
}

/// Whether a column is standardized before model fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ColumnKind {
    Continuous,
    Indicator,
}

pub const N_CONTINUOUS: usize = 12;
pub const N_COLUMNS: usize = 21;

const WEEKDAY_DUMMIES: [(Weekday, &str); 6] = [
    (Weekday::Tue, "tue"),
    (Weekday::Wed, "wed"),
    (Weekday::Thu, "thu"),
    (Weekday::Fri, "fri"),
    (Weekday::Sat, "sat"),
    (Weekday::Sun, "sun"),
];

pub fn column_names(kind: SeriesKind) -> Vec<String> {
    let w = WeatherIndex::for_kind(kind).prefix();
    let mut names: Vec<String> = ["demand_t-1", "demand_t-7", "demand_sim", "demand_sim_t-1", "temp_t", "temp_t-1", "temp_t-7", "temp_sim"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for suffix in ["t", "t-1", "t-7", "sim"] {
        names.push(format!("{w}_{suffix}"));
    }
    names.extend(WEEKDAY_DUMMIES.iter().map(|(_, n)| n.to_string()));
    names.extend(["holiday", "day_after_holiday", "bridge"].map(String::from));
    names
}

pub fn column_kinds() -> Vec<ColumnKind> {
    (0..N_COLUMNS)
        .map(|j| if j < N_CONTINUOUS { ColumnKind::Continuous } else { ColumnKind::Indicator })
        .collect()
}

/// Dates a feature row for `t` reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagDates {
    pub lag1: CivilDate,
    pub lag7: CivilDate,
    pub sim: CivilDate,
    pub sim_lag1: CivilDate,
}

impl LagDates {
    pub fn of(t: CivilDate) -> Result<Self> {
        let lag1 = t.pred();
        Ok(LagDates {
            lag1,
            lag7: t.add_days(-7),
            sim: similar_day(t)?,
            sim_lag1: similar_day(lag1)?,
        })
    }

    pub fn earliest(&self) -> CivilDate {
        self.lag1.min(self.lag7).min(self.sim).min(self.sim_lag1)
    }
}

/// Feature row for target date `t`. Demand at `t` itself is not read, so
/// this works for a day whose demand is still unknown.
pub fn feature_row(series: &DailySeries, t: CivilDate) -> Result<Vec<f64>> {
    let lags = LagDates::of(t)?;
    let weather = WeatherIndex::for_kind(series.kind());
    let demand = |d: CivilDate| series.demand(d).ok_or(Error::MissingHistory { date: t, needed: d });
    let temp = |d: CivilDate| series.temperature(d).ok_or(Error::MissingHistory { date: t, needed: d });

    let mut row = Vec::with_capacity(N_COLUMNS);
    for d in [lags.lag1, lags.lag7, lags.sim, lags.sim_lag1] {
        row.push(demand(d)?);
    }
    let temps = [temp(t)?, temp(lags.lag1)?, temp(lags.lag7)?, temp(lags.sim)?];
    row.extend_from_slice(&temps);
    row.extend(temps.iter().map(|&x| weather.apply(x)));
    let wd = t.weekday();
    row.extend(WEEKDAY_DUMMIES.iter().map(|(w, _)| if *w == wd { 1.0 } else { 0.0 }));
    let class = classify_day(t);
    for c in [DayClass::Holiday, DayClass::DayAfterHoliday, DayClass::Bridge] {
        row.push(if class == c { 1.0 } else { 0.0 });
    }
    Ok(row)
}

/// First date of the series for which every lag is available.
pub fn first_feature_date(series: &DailySeries) -> Result<CivilDate> {
    let mut t = series.start().succ();
    while t <= series.end() {
        if let Ok(lags) = LagDates::of(t) {
            if lags.earliest() >= series.start() {
                return Ok(t);
            }
        }
        t = t.succ();
    }
    Err(Error::InsufficientHistory(format!(
        "series {} has no date with a full year of lag history",
        series.range()
    )))
}

/// Design matrix with aligned dates and target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub dates: Vec<CivilDate>,
    pub column_names: Vec<String>,
    pub column_kinds: Vec<ColumnKind>,
    pub values: DMatrix<f64>,
    pub target: DVector<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn scale_mask(&self) -> Vec<bool> {
        self.column_kinds.iter().map(|k| *k == ColumnKind::Continuous).collect()
    }

    /// Rows whose date falls in `range`.
    pub fn rows_in(&self, range: DateRange) -> FeatureMatrix {
        let idx: Vec<usize> = self
            .dates
            .iter()
            .enumerate()
            .filter(|(_, d)| range.contains(**d))
            .map(|(i, _)| i)
            .collect();
        self.select_rows(&idx)
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            column_names: self.column_names.clone(),
            column_kinds: self.column_kinds.clone(),
            values: self.values.select_rows(idx),
            target: self.target.select_rows(idx),
        }
    }

    /// CSV dump: `date,<columns...>,target`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["date".to_string()];
        header.extend(self.column_names.iter().cloned());
        header.push("target".into());
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.to_string()];
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            rec.push(self.target[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One row per date of `range`; every lag must lie inside the series.
pub fn build_matrix(series: &DailySeries, range: DateRange) -> Result<FeatureMatrix> {
    if range.end > series.end() {
        return Err(Error::MissingHistory { date: range.end, needed: range.end });
    }
    let n = range.len();
    let mut data = Vec::with_capacity(n * N_COLUMNS);
    let mut dates = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for t in range.days() {
        let row = feature_row(series, t)?;
        data.extend_from_slice(&row);
        dates.push(t);
        target.push(series.demand(t).ok_or(Error::MissingHistory { date: t, needed: t })?);
    }
    Ok(FeatureMatrix {
        dates,
        column_names: column_names(series.kind()),
        column_kinds: column_kinds(),
        values: DMatrix::from_row_slice(n, N_COLUMNS, &data),
        target: DVector::from_vec(target),
    })
}

/// Matrix over every date with full lag history.
pub fn build_full_matrix(series: &DailySeries) -> Result<FeatureMatrix> {
    let start = first_feature_date(series)?;
    build_matrix(series, DateRange::new(start, series.end())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DailyRecord;

    #[test]
    fn degree_days() {
        assert_eq!(hdd(18.0), 0.0);
        assert_eq!(hdd(10.0), 8.0);
        assert_eq!(hdd(25.0), 0.0);
        assert_eq!(hcdd(16.0), 0.0);
        assert_eq!(hcdd(6.0), 10.0);
        assert_eq!(hcdd(26.0), 10.0);
    }

    fn series(kind: SeriesKind, temp: impl Fn(usize) -> f64) -> DailySeries {
        let start = CivilDate::ymd(2015, 1, 1);
        let records = (0..3 * 365)
            .map(|k| DailyRecord {
                date: start.add_days(k as i64),
                temperature_c: temp(k),
                demand_mscm: 50.0 + (k % 13) as f64,
            })
            .collect();
        DailySeries::new(kind, records).unwrap()
    }

    #[test]
    fn igd_has_21_columns() {
        let names = column_names(SeriesKind::Industrial);
        assert_eq!(names.len(), 4 + 4 + 4 + 6 + 3);
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        assert!(column_names(SeriesKind::Thermoelectric).contains(&"hcdd_sim".to_string()));
    }

    #[test]
    fn hcdd_zero_at_16() {
        let s = series(SeriesKind::Thermoelectric, |_| 16.0);
        let m = build_full_matrix(&s).unwrap();
        for i in 0..m.n_rows() {
            for j in 8..12 {
                assert_eq!(m.values[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn monday_holiday_encoding() {
        let s = series(SeriesKind::Industrial, |k| (k % 30) as f64);
        // 2017-04-17 is Easter Monday.
        let row = feature_row(&s, CivilDate::ymd(2017, 4, 17)).unwrap();
        assert!(row[12..18].iter().all(|&v| v == 0.0));
        assert_eq!(&row[18..21], &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_history_errors() {
        let s = series(SeriesKind::Industrial, |_| 10.0);
        let r = DateRange::new(CivilDate::ymd(2015, 3, 1), CivilDate::ymd(2015, 3, 10)).unwrap();
        assert!(matches!(build_matrix(&s, r), Err(Error::MissingHistory { .. })));
        let first = first_feature_date(&s).unwrap();
        assert!(first.days_since(s.start()) >= 365);
        assert!(feature_row(&s, first.pred()).is_err());
    }
}
