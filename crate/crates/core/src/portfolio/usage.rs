use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::fmt_f64;
use crate::error::{Error, Result};

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
pub const HOURS_PER_DAY: usize = 24;

/// Per-slot energy usage of every participant over a run of days, in kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageRecords {
    participants: usize,
    hours_per_day: usize,
    dates: Vec<NaiveDate>,
    // usage[day][slot][participant]
    usage: Vec<Vec<Vec<f64>>>,
}

impl UsageRecords {
    pub fn new(dates: Vec<NaiveDate>, usage: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if dates.len() != usage.len() {
            return Err(Error::LengthMismatch {
                expected: dates.len(),
                got: usage.len(),
            });
        }
        let participants = usage
            .first()
            .and_then(|d| d.first())
            .map(Vec::len)
            .unwrap_or(0);
        let hours_per_day = usage.first().map(Vec::len).unwrap_or(HOURS_PER_DAY);
        for (d, day) in usage.iter().enumerate() {
            if day.len() != hours_per_day {
                return Err(Error::Data(format!(
                    "day {d} has {} slots, expected {hours_per_day}",
                    day.len()
                )));
            }
            for (t, slot) in day.iter().enumerate() {
                if slot.len() != participants {
                    return Err(Error::Data(format!(
                        "day {d} slot {t} has {} participants, expected {participants}",
                        slot.len()
                    )));
                }
                if let Some(l) = slot.iter().position(|&u| !(u >= 0.0) || !u.is_finite()) {
                    return Err(Error::Data(format!(
                        "day {d} slot {t} participant {}: invalid usage {}",
                        l + 1,
                        slot[l]
                    )));
                }
            }
        }
        Ok(Self {
            participants,
            hours_per_day,
            dates,
            usage,
        })
    }

    pub fn participants(&self) -> usize {
        self.participants
    }

    pub fn days(&self) -> usize {
        self.usage.len()
    }

    pub fn hours_per_day(&self) -> usize {
        self.hours_per_day
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn usage(&self, day: usize, slot: usize, participant: usize) -> f64 {
        self.usage[day][slot][participant]
    }

    pub fn day(&self, day: usize) -> &[Vec<f64>] {
        &self.usage[day]
    }
}

/// Reads a `datetime,p1,...,pL` file with one row per (day, hour).
pub fn ingest_usage_csv(path: impl AsRef<Path>) -> Result<UsageRecords> {
    let file = std::fs::File::open(path.as_ref())?;
    read_usage(file)
}

pub fn read_usage(reader: impl std::io::Read) -> Result<UsageRecords> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("datetime") || header.len() < 2 {
        return Err(Error::Data(
            "header must be `datetime,p1,...,pL`".to_string(),
        ));
    }
    let participants = header.len() - 1;
    let mut days: BTreeMap<NaiveDate, Vec<Option<Vec<f64>>>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // data rows start on line 2
        let row = i + 2;
        if rec.len() != header.len() {
            let col = rec.len().min(header.len() - 1);
            return Err(Error::Data(format!(
                "row {row}: expected {} fields, found {} (first missing column `{}`)",
                header.len(),
                rec.len(),
                header.get(col).unwrap_or("?")
            )));
        }
        let stamp = NaiveDateTime::parse_from_str(&rec[0], TIMESTAMP_FORMAT).map_err(|e| {
            Error::Data(format!("row {row}, column datetime: `{}`: {e}", &rec[0]))
        })?;
        let mut values = Vec::with_capacity(participants);
        for (c, field) in rec.iter().enumerate().skip(1) {
            let name = &header[c];
            if field.is_empty() {
                return Err(Error::Data(format!("row {row}, column {name}: missing value")));
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::Data(format!("row {row}, column {name}: cannot parse `{field}`"))
            })?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {row}, column {name}: usage must be non-negative, got {v}"
                )));
            }
            values.push(v);
        }
        let slots = days
            .entry(stamp.date())
            .or_insert_with(|| vec![None; HOURS_PER_DAY]);
        let hour = stamp.hour() as usize;
        if slots[hour].is_some() {
            return Err(Error::Data(format!(
                "row {row}: duplicate timestamp {}",
                &rec[0]
            )));
        }
        slots[hour] = Some(values);
    }
    let mut dates = Vec::with_capacity(days.len());
    let mut usage = Vec::with_capacity(days.len());
    for (date, slots) in days {
        let mut day = Vec::with_capacity(HOURS_PER_DAY);
        for (hour, slot) in slots.into_iter().enumerate() {
            day.push(slot.ok_or_else(|| {
                Error::Data(format!("{date}: no row for hour {hour:02}"))
            })?);
        }
        dates.push(date);
        usage.push(day);
    }
    UsageRecords::new(dates, usage)
}

pub fn write_usage_csv(records: &UsageRecords, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    write_usage(records, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn write_usage(records: &UsageRecords, out: &mut impl Write) -> Result<()> {
    write!(out, "datetime")?;
    for l in 1..=records.participants() {
        write!(out, ",p{l}")?;
    }
    writeln!(out)?;
    for (date, day) in records.dates.iter().zip(&records.usage) {
        for (hour, slot) in day.iter().enumerate() {
            let stamp = date
                .and_hms_opt(hour as u32, 0, 0)
                .expect("hour below 24");
            write!(out, "{}", stamp.format(TIMESTAMP_FORMAT))?;
            for &u in slot {
                write!(out, ",{}", fmt_f64(u))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Shape of the synthetic residential usage profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthProfile {
    /// Overnight base load (kWh).
    pub base: f64,
    /// Extra load while the household is awake, from `wake_hour` on.
    pub day_level: f64,
    pub wake_hour: usize,
    pub morning_amp: f64,
    pub morning_hour: f64,
    pub morning_width: f64,
    pub evening_amp: f64,
    pub evening_hour: f64,
    pub evening_width: f64,
    /// Multiplies every noise source; 0 gives identical days.
    pub noise: f64,
    /// Idiosyncratic noise scale at all hours.
    pub idio_sigma: f64,
    /// Additional idiosyncratic noise under the evening peak.
    pub idio_evening_sigma: f64,
    /// Shared day-to-day factor loading under the morning and evening peaks.
    pub common_morning_sigma: f64,
    pub common_evening_sigma: f64,
    /// Participant scales are drawn uniformly from this range.
    pub scale_min: f64,
    pub scale_max: f64,
    pub start_date: NaiveDate,
}

impl Default for SynthProfile {
    fn default() -> Self {
        Self {
            base: 0.12,
            day_level: 0.30,
            wake_hour: 6,
            morning_amp: 0.30,
            morning_hour: 7.5,
            morning_width: 1.2,
            evening_amp: 0.60,
            evening_hour: 19.5,
            evening_width: 2.0,
            noise: 1.0,
            idio_sigma: 0.03,
            idio_evening_sigma: 0.12,
            common_morning_sigma: 0.05,
            common_evening_sigma: 0.15,
            scale_min: 0.6,
            scale_max: 1.4,
            start_date: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
        }
    }
}

impl SynthProfile {
    fn bump(t: f64, centre: f64, width: f64) -> f64 {
        (-(t - centre).powi(2) / (2.0 * width * width)).exp()
    }

    /// Expected load of a unit-scale participant at hour `t`.
    pub fn shape(&self, t: usize) -> f64 {
        let tf = t as f64;
        let awake = if t >= self.wake_hour { self.day_level } else { 0.0 };
        self.base
            + awake
            + self.morning_amp * Self::bump(tf, self.morning_hour, self.morning_width)
            + self.evening_amp * Self::bump(tf, self.evening_hour, self.evening_width)
    }
}

/// Seeded synthetic usage: scaled daily profile plus idiosyncratic and shared
/// day-level noise, clipped at zero. Evening slots carry the largest variance.
pub fn synth_usage(
    seed: u64,
    participants: usize,
    days: usize,
    profile: &SynthProfile,
) -> Result<UsageRecords> {
    if participants == 0 {
        return Err(Error::InvalidParams("participants must be positive".into()));
    }
    if days < 2 {
        return Err(Error::InvalidParams(format!(
            "need at least 2 days, got {days}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<f64> = (0..participants)
        .map(|_| rng.random_range(profile.scale_min..=profile.scale_max))
        .collect();
    let loadings: Vec<f64> = (0..participants)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let mut dates = Vec::with_capacity(days);
    let mut usage = Vec::with_capacity(days);
    for d in 0..days {
        dates.push(profile.start_date + chrono::Days::new(d as u64));
        let morning: f64 = rng.sample(StandardNormal);
        let evening: f64 = rng.sample(StandardNormal);
        let day = (0..HOURS_PER_DAY)
            .map(|t| {
                let tf = t as f64;
                let m = SynthProfile::bump(tf, profile.morning_hour, profile.morning_width);
                let e = SynthProfile::bump(tf, profile.evening_hour, profile.evening_width);
                let idio = profile.idio_sigma + profile.idio_evening_sigma * e;
                let common = profile.common_morning_sigma * m * morning
                    + profile.common_evening_sigma * e * evening;
                let shape = profile.shape(t);
                (0..participants)
                    .map(|l| {
                        let eps: f64 = rng.sample(StandardNormal);
                        let u = scales[l] * shape
                            + profile.noise * (idio * eps + loadings[l] * common);
                        u.max(0.0)
                    })
                    .collect()
            })
            .collect();
        usage.push(day);
    }
    UsageRecords::new(dates, usage)
}
