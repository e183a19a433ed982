//! Two-line element set parsing and serialization.
//!
//! Column positions follow the standard NORAD layout. Fields are kept in
//! the units the format carries (degrees, revolutions per day) so that
//! `parse -> to_lines -> parse` reproduces every field exactly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::time::Epoch;

pub const TLE_LINE_LEN: usize = 69;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TleError {
    #[error("line {line}: checksum mismatch (expected {expected}, found {found})")]
    ChecksumMismatch { line: u8, expected: u8, found: char },
    #[error("line {line}, columns {start}-{end}: malformed {field} `{text}`")]
    MalformedField {
        line: u8,
        start: usize,
        end: usize,
        field: &'static str,
        text: String,
    },
    #[error("expected two element lines (optionally preceded by a name line), found {found} line(s)")]
    LineCountError { found: usize },
    #[error("{field} = {value} is outside its valid range")]
    OutOfRange { field: &'static str, value: f64 },
}

/// Mean orbital elements from one TLE record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    /// Name line when present, otherwise the catalogue number.
    pub satellite_id: String,
    pub norad_id: u32,
    pub classification: char,
    pub international_designator: String,
    /// Epoch as carried by the record: four-digit year plus fractional day of year.
    pub epoch_year: i32,
    pub epoch_day: f64,
    /// Epoch rounded to the millisecond.
    pub epoch: Epoch,
    /// First derivative of mean motion divided by two, rev/day^2.
    pub mean_motion_dot: f64,
    /// Second derivative of mean motion divided by six, rev/day^3.
    pub mean_motion_ddot: f64,
    /// Drag term, 1/earth radii.
    pub bstar: f64,
    pub ephemeris_type: u8,
    pub element_set_no: u32,
    pub inclination: f64,
    pub raan: f64,
    pub eccentricity: f64,
    pub arg_perigee: f64,
    pub mean_anomaly: f64,
    /// Revolutions per day.
    pub mean_motion: f64,
    pub rev_number: u32,
}

impl OrbitalElements {
    /// Orbital period in seconds.
    pub fn period_seconds(&self) -> f64 {
        86_400.0 / self.mean_motion
    }

    /// Semi-major axis implied by the mean motion (two-body, km).
    pub fn semi_major_axis_km(&self) -> f64 {
        let n = self.mean_motion * std::f64::consts::TAU / 86_400.0;
        (crate::astro::MU_EARTH / (n * n)).cbrt()
    }

    /// Seconds from the exact (sub-millisecond) element epoch to `t`.
    pub fn seconds_since_epoch(&self, t: Epoch) -> f64 {
        let year_start = Epoch::ymd_hms(self.epoch_year, 1, 1, 0, 0, 0);
        let offset_ms = (self.epoch_day - 1.0) * 86_400_000.0;
        ((t.unix_millis() - year_start.unix_millis()) as f64 - offset_ms) / 1000.0
    }

    pub fn validate(&self) -> Result<(), TleError> {
        for (field, value) in [
            ("inclination", self.inclination),
            ("raan", self.raan),
            ("arg_perigee", self.arg_perigee),
            ("mean_anomaly", self.mean_anomaly),
        ] {
            if !(0.0..360.0).contains(&value) {
                return Err(TleError::OutOfRange { field, value });
            }
        }
        if !(0.0..1.0).contains(&self.eccentricity) {
            return Err(TleError::OutOfRange {
                field: "eccentricity",
                value: self.eccentricity,
            });
        }
        if !(self.mean_motion > 0.0 && self.mean_motion < 20.0) {
            return Err(TleError::OutOfRange {
                field: "mean_motion",
                value: self.mean_motion,
            });
        }
        Ok(())
    }

    /// Renders the two element lines, checksums included.
    pub fn to_lines(&self) -> (String, String) {
        let yy = self.epoch_year.rem_euclid(100);
        let mut l1 = format!(
            "1 {:05}{} {:<8} {:02}{:012.8} {} {} {} {} {:>4}",
            self.norad_id,
            self.classification,
            self.international_designator,
            yy,
            self.epoch_day,
            format_first_derivative(self.mean_motion_dot),
            format_assumed_decimal(self.mean_motion_ddot),
            format_assumed_decimal(self.bstar),
            self.ephemeris_type,
            self.element_set_no % 10_000,
        );
        l1.push(char::from(b'0' + checksum(&l1)));
        let ecc = format!("{:07}", (self.eccentricity * 1e7).round() as u64);
        let mut l2 = format!(
            "2 {:05} {:8.4} {:8.4} {} {:8.4} {:8.4} {:11.8}{:5}",
            self.norad_id,
            self.inclination,
            self.raan,
            ecc,
            self.arg_perigee,
            self.mean_anomaly,
            self.mean_motion,
            self.rev_number % 100_000,
        );
        l2.push(char::from(b'0' + checksum(&l2)));
        (l1, l2)
    }
}

impl fmt::Display for OrbitalElements {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (l1, l2) = self.to_lines();
        if self.satellite_id != self.norad_id.to_string() {
            writeln!(f, "{}", self.satellite_id)?;
        }
        writeln!(f, "{l1}")?;
        write!(f, "{l2}")
    }
}

/// Modulo-10 checksum over the first 68 columns: digits count their value, `-` counts one.
pub fn checksum(line: &str) -> u8 {
    let sum: u32 = line
        .bytes()
        .take(TLE_LINE_LEN - 1)
        .map(|b| match b {
            b'0'..=b'9' => u32::from(b - b'0'),
            b'-' => 1,
            _ => 0,
        })
        .sum();
    (sum % 10) as u8
}

/// Parses a single element set: two lines, or three with a leading name line.
pub fn parse_tle(text: &str) -> Result<OrbitalElements, TleError> {
    let lines: Vec<&str> = clean_lines(text).collect();
    match lines.as_slice() {
        [l1, l2] => parse_lines(None, l1, l2),
        [name, l1, l2] => parse_lines(Some(name), l1, l2),
        other => Err(TleError::LineCountError { found: other.len() }),
    }
}

/// Parses every element set in a file. Each entry is one record's result, in file order.
pub fn parse_tle_file(text: &str) -> Vec<Result<OrbitalElements, TleError>> {
    let lines: Vec<&str> = clean_lines(text).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let is_l1 = |s: &str| s.starts_with("1 ");
        let is_l2 = |s: &str| s.starts_with("2 ");
        if is_l1(lines[i]) && i + 1 < lines.len() && is_l2(lines[i + 1]) {
            out.push(parse_lines(None, lines[i], lines[i + 1]));
            i += 2;
        } else if !is_l1(lines[i])
            && !is_l2(lines[i])
            && i + 2 < lines.len()
            && is_l1(lines[i + 1])
            && is_l2(lines[i + 2])
        {
            out.push(parse_lines(Some(lines[i]), lines[i + 1], lines[i + 2]));
            i += 3;
        } else {
            out.push(Err(TleError::LineCountError { found: 1 }));
            i += 1;
        }
    }
    out
}

fn clean_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.trim_end_matches(['\r', ' ', '\t']))
        .filter(|l| !l.trim().is_empty())
}

fn parse_lines(name: Option<&str>, l1: &str, l2: &str) -> Result<OrbitalElements, TleError> {
    check_line(1, l1)?;
    check_line(2, l2)?;

    let norad_id: u32 = parse_num(1, l1, 3, 7, "satellite number")?;
    let norad_2: u32 = parse_num(2, l2, 3, 7, "satellite number")?;
    if norad_id != norad_2 {
        return Err(malformed(2, l2, 3, 7, "satellite number"));
    }
    let classification = l1.as_bytes()[7] as char;
    let international_designator = field(l1, 10, 17).trim().to_string();
    let yy: i32 = parse_num(1, l1, 19, 20, "epoch year")?;
    let epoch_year = if yy < 57 { 2000 + yy } else { 1900 + yy };
    let epoch_day: f64 = parse_num(1, l1, 21, 32, "epoch day")?;
    let epoch = Epoch::from_year_and_day(epoch_year, epoch_day)
        .map_err(|_| malformed(1, l1, 21, 32, "epoch day"))?;
    let mean_motion_dot: f64 = parse_num(1, l1, 34, 43, "mean motion derivative")?;
    let mean_motion_ddot = parse_assumed_decimal(1, l1, 45, 52, "mean motion second derivative")?;
    let bstar = parse_assumed_decimal(1, l1, 54, 61, "bstar")?;
    let ephemeris_type: u8 = match field(l1, 63, 63).trim() {
        "" => 0,
        s => s.parse().map_err(|_| malformed(1, l1, 63, 63, "ephemeris type"))?,
    };
    let element_set_no: u32 = parse_num(1, l1, 65, 68, "element set number")?;

    let inclination: f64 = parse_num(2, l2, 9, 16, "inclination")?;
    let raan: f64 = parse_num(2, l2, 18, 25, "right ascension of the ascending node")?;
    let ecc_text = field(l2, 27, 33);
    if ecc_text.trim().is_empty() || !ecc_text.trim().bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(2, l2, 27, 33, "eccentricity"));
    }
    let eccentricity: f64 = format!("0.{}", ecc_text.trim())
        .parse()
        .map_err(|_| malformed(2, l2, 27, 33, "eccentricity"))?;
    let arg_perigee: f64 = parse_num(2, l2, 35, 42, "argument of perigee")?;
    let mean_anomaly: f64 = parse_num(2, l2, 44, 51, "mean anomaly")?;
    let mean_motion: f64 = parse_num(2, l2, 53, 63, "mean motion")?;
    let rev_number: u32 = match field(l2, 64, 68).trim() {
        "" => 0,
        s => s.parse().map_err(|_| malformed(2, l2, 64, 68, "revolution number"))?,
    };

    let satellite_id = name
        .map(|n| n.trim().trim_start_matches("0 ").trim().to_string())
        .filter(|n| !n.is_empty())
        .unwrap_or_else(|| norad_id.to_string());

    let elements = OrbitalElements {
        satellite_id,
        norad_id,
        classification,
        international_designator,
        epoch_year,
        epoch_day,
        epoch,
        mean_motion_dot,
        mean_motion_ddot,
        bstar,
        ephemeris_type,
        element_set_no,
        inclination,
        raan,
        eccentricity,
        arg_perigee,
        mean_anomaly,
        mean_motion,
        rev_number,
    };
    elements.validate()?;
    Ok(elements)
}

fn check_line(number: u8, line: &str) -> Result<(), TleError> {
    if !line.is_ascii() || line.len() != TLE_LINE_LEN {
        return Err(TleError::MalformedField {
            line: number,
            start: 1,
            end: TLE_LINE_LEN,
            field: "line length",
            text: format!("{} characters", line.chars().count()),
        });
    }
    if line.as_bytes()[0] != b'0' + number || line.as_bytes()[1] != b' ' {
        return Err(malformed(number, line, 1, 2, "line number"));
    }
    let found = line.as_bytes()[TLE_LINE_LEN - 1] as char;
    let expected = checksum(line);
    if found.to_digit(10) != Some(u32::from(expected)) {
        return Err(TleError::ChecksumMismatch {
            line: number,
            expected,
            found,
        });
    }
    Ok(())
}

/// 1-based inclusive column range.
fn field(line: &str, start: usize, end: usize) -> &str {
    &line[start - 1..end]
}

fn malformed(line_no: u8, line: &str, start: usize, end: usize, name: &'static str) -> TleError {
    TleError::MalformedField {
        line: line_no,
        start,
        end,
        field: name,
        text: field(line, start, end).to_string(),
    }
}

fn parse_num<T: std::str::FromStr>(
    line_no: u8,
    line: &str,
    start: usize,
    end: usize,
    name: &'static str,
) -> Result<T, TleError> {
    field(line, start, end)
        .trim()
        .parse()
        .map_err(|_| malformed(line_no, line, start, end, name))
}

/// Fields like ` 28098-4` meaning 0.28098e-4.
fn parse_assumed_decimal(
    line_no: u8,
    line: &str,
    start: usize,
    end: usize,
    name: &'static str,
) -> Result<f64, TleError> {
    let raw = field(line, start, end);
    let err = || malformed(line_no, line, start, end, name);
    let (sign, rest) = match raw.as_bytes()[0] {
        b'-' => ("-", &raw[1..]),
        b'+' | b' ' => ("", &raw[1..]),
        _ => ("", raw),
    };
    let rest = rest.trim_start();
    if rest.len() < 2 {
        return Err(err());
    }
    let (mantissa, exponent) = rest.split_at(rest.len() - 2);
    if mantissa.is_empty() || !mantissa.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let exp_sign = match exponent.as_bytes()[0] {
        b'-' => "-",
        b'+' | b' ' => "",
        _ => return Err(err()),
    };
    let exp_digit = exponent.as_bytes()[1];
    if !exp_digit.is_ascii_digit() {
        return Err(err());
    }
    format!("{sign}0.{mantissa}e{exp_sign}{}", exp_digit as char)
        .parse()
        .map_err(|_| err())
}

fn format_assumed_decimal(value: f64) -> String {
    if value == 0.0 {
        return " 00000-0".to_string();
    }
    let sign = if value < 0.0 { '-' } else { ' ' };
    let sci = format!("{:.4e}", value.abs());
    let (digits, exp) = sci.split_once('e').expect("scientific notation");
    let digits: String = digits.chars().filter(|c| c.is_ascii_digit()).collect();
    let exp: i32 = exp.parse::<i32>().expect("exponent") + 1;
    if exp > 9 {
        return " 00000-0".to_string();
    }
    if exp < -9 {
        // Leading zeros in the mantissa reach below the smallest exponent.
        let mantissa = (value.abs() * 1e14).round() as u64;
        return format!("{sign}{mantissa:05}-9");
    }
    let exp_sign = if exp < 0 { '-' } else { '+' };
    format!("{sign}{digits}{exp_sign}{}", exp.abs())
}

fn format_first_derivative(value: f64) -> String {
    let sign = if value < 0.0 { '-' } else { ' ' };
    let body = format!("{:.8}", value.abs());
    format!("{sign}{}", body.trim_start_matches('0'))
}
