//! Synthetic daily series with weekly and yearly cycles, holiday drops and
//! a degree-day weather response, plus the noise-free mean that generated
//! them.
//!
//! Randomness comes from SplitMix64 seeded with `spec.seed`. Each draw
//! advances the state by `0x9E3779B97F4A7C15` and returns the finalized
//! value `z`; a uniform is `(z >> 11) * 2^-53`. A standard normal uses two
//! uniforms `u1, u2` as `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)` (the sine
//! branch is discarded). Days are visited in date order, drawing the
//! temperature normal first and the demand normal second.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::calendar::{is_holiday, CivilDate, DateRange};
use crate::dataset::{DailyRecord, DailySeries, SeriesKind, MAX_TEMPERATURE, MIN_TEMPERATURE};
use crate::error::{Error, Result};
use crate::features::WeatherIndex;

pub const YEAR_DAYS: f64 = 365.25;
pub const MIN_YEARS: usize = 3;

/// Seasonal temperature around `mean`, coldest on `coldest_yearday`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureSpec {
    pub mean: f64,
    pub amplitude: f64,
    pub noise_std: f64,
    pub coldest_yearday: f64,
}

impl Default for TemperatureSpec {
    fn default() -> Self {
        TemperatureSpec { mean: 14.0, amplitude: 9.0, noise_std: 2.0, coldest_yearday: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: SeriesKind,
    /// MSCM
    pub base_level: f64,
    /// Monday first.
    pub weekly_multipliers: [f64; 7],
    /// Relative winter swing of the base level.
    pub yearly_amplitude: f64,
    /// Relative twice-yearly swing, peaking in winter and summer.
    #[serde(default)]
    pub summer_amplitude: f64,
    /// MSCM per degree day (HDD, or HCDD for thermoelectric).
    pub weather_gain: f64,
    pub holiday_multiplier: f64,
    pub noise_std: f64,
    pub seed: u64,
    #[serde(default)]
    pub temperature: TemperatureSpec,
}

impl SynthSpec {
    /// Reference parameters for each series kind.
    pub fn preset(kind: SeriesKind, seed: u64) -> Self {
        let temperature = TemperatureSpec::default();
        match kind {
            SeriesKind::Residential => SynthSpec {
                kind,
                base_level: 40.0,
                weekly_multipliers: [1.0, 1.0, 1.0, 1.0, 0.98, 0.93, 0.9],
                yearly_amplitude: 0.3,
                summer_amplitude: 0.0,
                weather_gain: 6.0,
                holiday_multiplier: 0.9,
                noise_std: 3.0,
                seed,
                temperature,
            },
            SeriesKind::Industrial => SynthSpec {
                kind,
                base_level: 60.0,
                weekly_multipliers: [1.0, 1.02, 1.02, 1.02, 0.98, 0.78, 0.68],
                yearly_amplitude: 0.1,
                summer_amplitude: 0.0,
                weather_gain: 0.6,
                holiday_multiplier: 0.6,
                noise_std: 1.5,
                seed,
                temperature,
            },
            SeriesKind::Thermoelectric => SynthSpec {
                kind,
                base_level: 60.0,
                weekly_multipliers: [1.0, 1.02, 1.02, 1.02, 1.0, 0.85, 0.78],
                yearly_amplitude: 0.05,
                summer_amplitude: 0.12,
                weather_gain: 1.5,
                holiday_multiplier: 0.8,
                noise_std: 3.5,
                seed,
                temperature,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("synth spec: {m}")));
        if !(self.base_level > 0.0) {
            return bad("base_level must be positive");
        }
        if self.weekly_multipliers.iter().any(|m| !(*m > 0.0)) {
            return bad("weekly multipliers must be positive");
        }
        if !(self.holiday_multiplier > 0.0 && self.holiday_multiplier <= 1.0) {
            return bad("holiday_multiplier must lie in (0, 1]");
        }
        if !(self.noise_std >= 0.0) || !(self.temperature.noise_std >= 0.0) {
            return bad("noise standard deviations must be non-negative");
        }
        let fields = [self.yearly_amplitude, self.summer_amplitude, self.weather_gain, self.temperature.mean, self.temperature.amplitude, self.temperature.coldest_yearday];
        if fields.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        Ok(())
    }
}

/// SplitMix64 stream with Box-Muller normals.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

struct Day {
    date: CivilDate,
    temperature: f64,
    mean: f64,
    demand: f64,
}

fn phase(spec: &SynthSpec, d: CivilDate) -> f64 {
    2.0 * PI * (d.yearday() as f64 - spec.temperature.coldest_yearday) / YEAR_DAYS
}

fn simulate(spec: &SynthSpec, range: DateRange) -> Result<Vec<Day>> {
    spec.validate()?;
    if range.len() < MIN_YEARS * 365 {
        return Err(Error::InvalidParameter(format!("synthetic range {range} is shorter than {MIN_YEARS} years")));
    }
    let index = WeatherIndex::for_kind(spec.kind);
    let t = &spec.temperature;
    let mut rng = SplitMix64::new(spec.seed);
    let mut out = Vec::with_capacity(range.len());
    for date in range.days() {
        let w = phase(spec, date);
        let temperature = (t.mean - t.amplitude * w.cos() + t.noise_std * rng.next_normal()).clamp(MIN_TEMPERATURE, MAX_TEMPERATURE);
        let seasonal = 1.0 + spec.yearly_amplitude * w.cos() + spec.summer_amplitude * (2.0 * w).cos();
        let weekday = spec.weekly_multipliers[date.weekday().num_days_from_monday() as usize];
        let holiday = if is_holiday(date) { spec.holiday_multiplier } else { 1.0 };
        let mean = spec.base_level * weekday * seasonal * holiday + spec.weather_gain * index.apply(temperature);
        let demand = (mean + spec.noise_std * rng.next_normal()).max(0.0);
        out.push(Day { date, temperature, mean, demand });
    }
    Ok(out)
}

/// Daily series over `range` (at least three years).
pub fn generate(spec: &SynthSpec, range: DateRange) -> Result<DailySeries> {
    let records = simulate(spec, range)?
        .into_iter()
        .map(|d| DailyRecord { date: d.date, temperature_c: d.temperature, demand_mscm: d.demand })
        .collect();
    DailySeries::new(spec.kind, records)
}

/// Noise-free demand given the generated temperatures.
pub fn oracle_forecast(spec: &SynthSpec, range: DateRange) -> Result<Vec<f64>> {
    Ok(simulate(spec, range)?.into_iter().map(|d| d.mean).collect())
}
