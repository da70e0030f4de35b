//! Italian national calendar: public holidays, Easter, working-day
//! classification and the similar-day mapping used for the yearly lags.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Proleptic Gregorian calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CivilDate(NaiveDate);

impl CivilDate {
    pub fn new(year: i32, month: u32, day: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .map(CivilDate)
            .ok_or_else(|| Error::InvalidDate(format!("{year:04}-{month:02}-{day:02}")))
    }

    /// Infallible constructor for literals known to be valid.
    ///
    /// Panics on an invalid date.
    pub fn ymd(year: i32, month: u32, day: u32) -> Self {
        Self::new(year, month, day).expect("valid calendar date")
    }

    pub fn from_naive(date: NaiveDate) -> Self {
        CivilDate(date)
    }

    pub fn naive(self) -> NaiveDate {
        self.0
    }

    pub fn year(self) -> i32 {
        self.0.year()
    }

    pub fn month(self) -> u32 {
        self.0.month()
    }

    pub fn day(self) -> u32 {
        self.0.day()
    }

    pub fn weekday(self) -> Weekday {
        self.0.weekday()
    }

    /// Day number within the year, January 1 being 1.
    pub fn yearday(self) -> u32 {
        self.0.ordinal()
    }

    pub fn add_days(self, days: i64) -> Self {
        CivilDate(self.0 + chrono::Duration::days(days))
    }

    pub fn succ(self) -> Self {
        self.add_days(1)
    }

    pub fn pred(self) -> Self {
        self.add_days(-1)
    }

    /// Signed number of days from `other` to `self`.
    pub fn days_since(self, other: CivilDate) -> i64 {
        (self.0 - other.0).num_days()
    }

    pub fn is_weekend(self) -> bool {
        matches!(self.weekday(), Weekday::Sat | Weekday::Sun)
    }

    pub fn year_start(year: i32) -> Result<Self> {
        Self::new(year, 1, 1)
    }

    pub fn year_end(year: i32) -> Result<Self> {
        Self::new(year, 12, 31)
    }
}

impl fmt::Display for CivilDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl FromStr for CivilDate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        // chrono accepts some non-padded forms; the interchange format does not.
        let bytes = s.as_bytes();
        if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
            return Err(Error::InvalidDate(s.to_string()));
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map(CivilDate)
            .map_err(|_| Error::InvalidDate(s.to_string()))
    }
}

/// Inclusive date interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: CivilDate,
    pub end: CivilDate,
}

impl DateRange {
    pub fn new(start: CivilDate, end: CivilDate) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidRange { start, end });
        }
        Ok(DateRange { start, end })
    }

    pub fn year(year: i32) -> Result<Self> {
        DateRange::new(CivilDate::year_start(year)?, CivilDate::year_end(year)?)
    }

    pub fn contains(&self, d: CivilDate) -> bool {
        self.start <= d && d <= self.end
    }

    /// Number of days in the interval.
    pub fn len(&self) -> usize {
        (self.end.days_since(self.start) + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn days(&self) -> impl Iterator<Item = CivilDate> {
        let start = self.start;
        (0..self.len() as i64).map(move |k| start.add_days(k))
    }
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Named national holidays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Holiday {
    NewYear,
    Epiphany,
    Liberation,
    Labour,
    Republic,
    Assumption,
    AllSaints,
    ImmaculateConception,
    Christmas,
    StStephen,
    Easter,
    EasterMonday,
}

const FIXED_HOLIDAYS: [(u32, u32, Holiday); 10] = [
    (1, 1, Holiday::NewYear),
    (1, 6, Holiday::Epiphany),
    (4, 25, Holiday::Liberation),
    (5, 1, Holiday::Labour),
    (6, 2, Holiday::Republic),
    (8, 15, Holiday::Assumption),
    (11, 1, Holiday::AllSaints),
    (12, 8, Holiday::ImmaculateConception),
    (12, 25, Holiday::Christmas),
    (12, 26, Holiday::StStephen),
];

impl Holiday {
    /// Date of this holiday in `year`.
    pub fn date_in(self, year: i32) -> Result<CivilDate> {
        match self {
            Holiday::Easter => easter_date(year),
            Holiday::EasterMonday => Ok(easter_date(year)?.succ()),
            fixed => {
                let (m, d, _) = FIXED_HOLIDAYS
                    .iter()
                    .find(|(_, _, h)| *h == fixed)
                    .copied()
                    .expect("fixed holiday table is exhaustive");
                CivilDate::new(year, m, d)
            }
        }
    }
}

/// Day classes used as calendar indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DayClass {
    Ordinary,
    Holiday,
    Bridge,
    DayAfterHoliday,
    Weekend,
}

pub const EASTER_MIN_YEAR: i32 = 1583;
pub const EASTER_MAX_YEAR: i32 = 4099;

/// Gregorian Easter Sunday (anonymous Gregorian algorithm).
pub fn easter_date(year: i32) -> Result<CivilDate> {
    if !(EASTER_MIN_YEAR..=EASTER_MAX_YEAR).contains(&year) {
        return Err(Error::YearOutOfRange(year));
    }
    let a = year % 19;
    let b = year / 100;
    let c = year % 100;
    let d = b / 4;
    let e = b % 4;
    let f = (b + 8) / 25;
    let g = (b - f + 1) / 3;
    let h = (19 * a + b - d - g + 15) % 30;
    let i = c / 4;
    let k = c % 4;
    let l = (32 + 2 * e + 2 * i - h - k) % 7;
    let m = (a + 11 * h + 22 * l) / 451;
    let month = (h + l - 7 * m + 114) / 31;
    let day = (h + l - 7 * m + 114) % 31 + 1;
    CivilDate::new(year, month as u32, day as u32)
}

/// The holiday falling on `d`, if any.
///
/// When a movable feast coincides with a fixed one (Easter Monday on
/// April 25) the movable feast is reported.
pub fn holiday_on(d: CivilDate) -> Option<Holiday> {
    if let Ok(easter) = easter_date(d.year()) {
        if d == easter {
            return Some(Holiday::Easter);
        }
        if d == easter.succ() {
            return Some(Holiday::EasterMonday);
        }
    }
    FIXED_HOLIDAYS
        .iter()
        .find(|(m, day, _)| d.month() == *m && d.day() == *day)
        .map(|(_, _, h)| *h)
}

pub fn is_holiday(d: CivilDate) -> bool {
    holiday_on(d).is_some()
}

/// Saturday, Sunday or holiday.
pub fn is_non_working(d: CivilDate) -> bool {
    d.is_weekend() || is_holiday(d)
}

pub fn classify_day(d: CivilDate) -> DayClass {
    if is_holiday(d) {
        return DayClass::Holiday;
    }
    if d.is_weekend() {
        return DayClass::Weekend;
    }
    let prev = d.pred();
    if is_non_working(prev) && is_non_working(d.succ()) {
        DayClass::Bridge
    } else if is_holiday(prev) {
        DayClass::DayAfterHoliday
    } else {
        DayClass::Ordinary
    }
}

fn days_in_year(year: i32) -> u32 {
    if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    }
}

/// Similar day of `t` in the previous year.
///
/// A holiday maps to the same holiday one year earlier. Any other day maps
/// to the non-holiday of the previous year with the same weekday whose
/// day-of-year is closest to that of `t`; of two equidistant candidates the
/// earlier wins.
pub fn similar_day(t: CivilDate) -> Result<CivilDate> {
    let prev_year = t.year() - 1;
    if let Some(h) = holiday_on(t) {
        return h.date_in(prev_year);
    }
    let target = t.yearday() as i64;
    let len = days_in_year(prev_year) as i64;
    let jan1 = CivilDate::year_start(prev_year)?;
    let weekday = t.weekday();
    for offset in 0..=len {
        for yd in [target - offset, target + offset] {
            if yd < 1 || yd > len {
                continue;
            }
            let cand = jan1.add_days(yd - 1);
            if cand.weekday() == weekday && !is_holiday(cand) {
                return Ok(cand);
            }
            if offset == 0 {
                break;
            }
        }
    }
    Err(Error::NoSimilarDay(t))
}
