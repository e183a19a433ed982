//! UTC instants with millisecond resolution.
//!
//! Every timestamp in the system is an [`Epoch`]. Leap seconds are ignored;
//! the Julian-date helpers treat UTC as a uniform 86 400 s day.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, SecondsFormat, TimeZone, Timelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const MS_PER_DAY: i64 = 86_400_000;
/// Julian date of the Unix epoch (1970-01-01T00:00:00Z).
const JD_UNIX_EPOCH: f64 = 2_440_587.5;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TimeError {
    #[error("invalid calendar date {0}")]
    InvalidDate(String),
    #[error("cannot parse timestamp `{0}`")]
    Parse(String),
    #[error("instant outside the representable range")]
    OutOfRange,
}

/// A UTC instant, stored as integer milliseconds since 1970-01-01T00:00:00Z.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Epoch(i64);

impl Epoch {
    pub const fn from_unix_millis(ms: i64) -> Self {
        Epoch(ms)
    }

    pub const fn unix_millis(self) -> i64 {
        self.0
    }

    pub fn from_calendar(
        year: i32,
        month: u32,
        day: u32,
        hour: u32,
        minute: u32,
        second: u32,
        milli: u32,
    ) -> Result<Self, TimeError> {
        let date = NaiveDate::from_ymd_opt(year, month, day)
            .and_then(|d| d.and_hms_milli_opt(hour, minute, second, milli))
            .ok_or_else(|| {
                TimeError::InvalidDate(format!(
                    "{year:04}-{month:02}-{day:02} {hour:02}:{minute:02}:{second:02}.{milli:03}"
                ))
            })?;
        Ok(Epoch(date.and_utc().timestamp_millis()))
    }

    /// Convenience constructor for whole-second instants; panics on an invalid date.
    pub fn ymd_hms(year: i32, month: u32, day: u32, hour: u32, minute: u32, second: u32) -> Self {
        Self::from_calendar(year, month, day, hour, minute, second, 0).expect("valid calendar date")
    }

    pub fn now() -> Self {
        Epoch(Utc::now().timestamp_millis())
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        Utc.timestamp_millis_opt(self.0)
            .single()
            .expect("epoch within chrono range")
    }

    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Epoch(dt.timestamp_millis())
    }

    pub fn julian_date(self) -> f64 {
        // Split into whole days and remainder to keep the fraction exact.
        let days = self.0.div_euclid(MS_PER_DAY);
        let rem = self.0.rem_euclid(MS_PER_DAY);
        JD_UNIX_EPOCH + days as f64 + rem as f64 / MS_PER_DAY as f64
    }

    pub fn from_julian_date(jd: f64) -> Self {
        let whole = (jd - JD_UNIX_EPOCH).floor();
        let frac = (jd - JD_UNIX_EPOCH) - whole;
        Epoch(whole as i64 * MS_PER_DAY + (frac * MS_PER_DAY as f64).round() as i64)
    }

    /// Julian centuries of UT since J2000.0.
    pub fn centuries_since_j2000(self) -> f64 {
        (self.julian_date() - 2_451_545.0) / 36_525.0
    }

    /// Days since J2000.0 (2000-01-01T12:00:00Z).
    pub fn days_since_j2000(self) -> f64 {
        (self.0 - 946_728_000_000) as f64 / MS_PER_DAY as f64
    }

    pub fn year(self) -> i32 {
        self.to_datetime().year()
    }

    /// Fractional day of year, 1.0 at January 1st 00:00.
    pub fn day_of_year(self) -> f64 {
        let dt = self.to_datetime();
        let start = Epoch::ymd_hms(dt.year(), 1, 1, 0, 0, 0);
        1.0 + (self.0 - start.0) as f64 / MS_PER_DAY as f64
    }

    /// Inverse of [`Epoch::day_of_year`]; rounds to the nearest millisecond.
    pub fn from_year_and_day(year: i32, day: f64) -> Result<Self, TimeError> {
        let start = Epoch::from_calendar(year, 1, 1, 0, 0, 0, 0)?;
        if !(day.is_finite()) || day < 1.0 || day >= 367.0 {
            return Err(TimeError::OutOfRange);
        }
        Ok(Epoch(start.0 + ((day - 1.0) * MS_PER_DAY as f64).round() as i64))
    }

    /// Hours since midnight UTC, in [0, 24).
    pub fn utc_hours(self) -> f64 {
        self.0.rem_euclid(MS_PER_DAY) as f64 / 3_600_000.0
    }

    pub fn add_seconds(self, seconds: f64) -> Self {
        Epoch(self.0 + (seconds * 1000.0).round() as i64)
    }

    pub fn add_millis(self, ms: i64) -> Self {
        Epoch(self.0 + ms)
    }

    /// Signed seconds from `earlier` to `self`.
    pub fn seconds_since(self, earlier: Epoch) -> f64 {
        (self.0 - earlier.0) as f64 / 1000.0
    }

    pub fn millis_since(self, earlier: Epoch) -> i64 {
        self.0 - earlier.0
    }

    pub fn round_to_second(self) -> Self {
        Epoch((self.0 as f64 / 1000.0).round() as i64 * 1000)
    }

    pub fn start_of_utc_day(self) -> Self {
        Epoch(self.0 - self.0.rem_euclid(MS_PER_DAY))
    }

    pub fn start_of_utc_hour(self) -> Self {
        Epoch(self.0 - self.0.rem_euclid(3_600_000))
    }

    /// `YYYY-MM-DDThh:mm:ssZ`, truncated to whole seconds.
    pub fn iso_seconds(self) -> String {
        self.to_datetime().to_rfc3339_opts(SecondsFormat::Secs, true)
    }

    /// `YYYY-MM-DDThh:mm:ss.sssZ`.
    pub fn iso_millis(self) -> String {
        self.to_datetime().to_rfc3339_opts(SecondsFormat::Millis, true)
    }

    /// `YYYY/MM/DD hh:mm:ss`, the session-list export format.
    pub fn slash_format(self) -> String {
        let dt = self.to_datetime();
        format!(
            "{:04}/{:02}/{:02} {:02}:{:02}:{:02}",
            dt.year(),
            dt.month(),
            dt.day(),
            dt.hour(),
            dt.minute(),
            dt.second()
        )
    }

    /// Parses RFC 3339 / ISO-8601 timestamps. A missing offset is read as UTC.
    pub fn parse(text: &str) -> Result<Self, TimeError> {
        let text = text.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
            return Ok(Epoch(dt.with_timezone(&Utc).timestamp_millis()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y/%m/%d %H:%M:%S"] {
            if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(text, fmt) {
                return Ok(Epoch(naive.and_utc().timestamp_millis()));
            }
        }
        if let Ok(date) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
            return Ok(Epoch(
                date.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp_millis(),
            ));
        }
        Err(TimeError::Parse(text.to_string()))
    }
}

impl fmt::Debug for Epoch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Epoch({})", self.iso_millis())
    }
}

impl fmt::Display for Epoch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.iso_millis())
    }
}

impl FromStr for Epoch {
    type Err = TimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Epoch::parse(s)
    }
}

impl Serialize for Epoch {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.iso_millis())
    }
}

impl<'de> Deserialize<'de> for Epoch {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Epoch::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Parses durations such as `7d`, `12h`, `30m`, `45s` or a bare number of seconds.
pub fn parse_duration_seconds(text: &str) -> Option<f64> {
    let text = text.trim();
    let (number, unit) = match text.char_indices().last()? {
        (i, c) if c.is_ascii_alphabetic() => (&text[..i], c),
        _ => (text, 's'),
    };
    let value: f64 = number.trim().parse().ok()?;
    let scale = match unit {
        's' => 1.0,
        'm' => 60.0,
        'h' => 3600.0,
        'd' => 86_400.0,
        _ => return None,
    };
    Some(value * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn j2000_julian_date() {
        let t = Epoch::ymd_hms(2000, 1, 1, 12, 0, 0);
        assert_eq!(t.julian_date(), 2_451_545.0);
        assert_eq!(t.days_since_j2000(), 0.0);
    }

    #[test]
    fn day_of_year_forms() {
        let t = Epoch::from_calendar(2021, 3, 1, 6, 0, 0, 0).unwrap();
        assert!((t.day_of_year() - 60.25).abs() < 1e-12);
        assert_eq!(Epoch::from_year_and_day(2021, 60.25).unwrap(), t);
    }

    #[test]
    fn formats() {
        let t = Epoch::from_calendar(2021, 5, 11, 4, 15, 45, 250).unwrap();
        assert_eq!(t.iso_seconds(), "2021-05-11T04:15:45Z");
        assert_eq!(t.iso_millis(), "2021-05-11T04:15:45.250Z");
        assert_eq!(t.slash_format(), "2021/05/11 04:15:45");
        assert_eq!(Epoch::parse("2021-05-11T04:15:45.250Z").unwrap(), t);
        assert_eq!(Epoch::parse("2021/05/11 04:15:45").unwrap(), t.add_millis(-250));
    }

    #[test]
    fn durations() {
        assert_eq!(parse_duration_seconds("7d"), Some(604_800.0));
        assert_eq!(parse_duration_seconds("90"), Some(90.0));
        assert_eq!(parse_duration_seconds("2h"), Some(7200.0));
        assert_eq!(parse_duration_seconds("x"), None);
    }

    proptest! {
        #[test]
        fn julian_round_trip_within_a_millisecond(ms in -2_000_000_000_000i64..4_000_000_000_000i64) {
            let t = Epoch::from_unix_millis(ms);
            let back = Epoch::from_julian_date(t.julian_date());
            prop_assert!((back.unix_millis() - ms).abs() <= 1);
        }

        #[test]
        fn ordering_matches_millis(a in any::<i32>(), b in any::<i32>()) {
            let (ta, tb) = (Epoch::from_unix_millis(a as i64), Epoch::from_unix_millis(b as i64));
            prop_assert_eq!(ta.cmp(&tb), a.cmp(&b));
        }
    }
}
