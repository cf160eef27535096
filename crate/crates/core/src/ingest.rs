//! Dated event records with optional planar coordinates, read from
//! delimited text with a header row.

use std::fmt;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{CdpError, Result};

/// Gap substituted for same-day events, in days.
pub const ZERO_GAP_DAYS: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventDate {
    Calendar(NaiveDate),
    /// Whole days from an arbitrary origin.
    Offset(i64),
}

impl EventDate {
    /// Day number on a common scale.
    pub fn day(&self) -> i64 {
        match self {
            Self::Calendar(d) => d.num_days_from_ce() as i64,
            Self::Offset(k) => *k,
        }
    }

    fn parse(raw: &str) -> std::result::Result<Self, String> {
        let s = raw.trim();
        if s.is_empty() {
            return Err("missing date".into());
        }
        if let Ok(k) = s.parse::<i64>() {
            return Ok(Self::Offset(k));
        }
        if s.contains(['T', ':']) || s.contains(' ') {
            return Err(format!("'{s}' has a time of day; only whole-day dates are supported"));
        }
        if s.parse::<f64>().is_ok() {
            return Err(format!("'{s}' is a fractional day offset; only whole days are supported"));
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map(Self::Calendar)
            .map_err(|_| format!("'{s}' is neither an ISO date (YYYY-MM-DD) nor an integer day offset"))
    }
}

impl fmt::Display for EventDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Calendar(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Self::Offset(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub date: EventDate,
    /// Coordinates, present or absent together.
    pub location: Option<(f64, f64)>,
    pub id: Option<String>,
}

/// A row that was rejected, numbered from 1 after the header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowDiagnostic {
    pub row: usize,
    pub message: String,
}

impl fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub events: Vec<Event>,
    pub source: String,
    /// Data rows in the source, rejected ones included.
    pub rows: usize,
    pub rejected: Vec<RowDiagnostic>,
}

impl Dataset {
    pub fn spatial_points(&self) -> Vec<Vec<f64>> {
        self.events
            .iter()
            .filter_map(|e| e.location.map(|(x, y)| vec![x, y]))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadOptions {
    pub date_col: String,
    pub x_col: String,
    pub y_col: String,
    /// Optional identifier column; ignored when absent from the header.
    pub id_col: String,
    pub delimiter: u8,
    /// Exclude malformed rows (listed in [`Dataset::rejected`]) instead of failing.
    pub skip_invalid: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        Self {
            date_col: "date".into(),
            x_col: "x".into(),
            y_col: "y".into(),
            id_col: "id".into(),
            delimiter: b',',
            skip_invalid: false,
        }
    }
}

fn missing(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn coordinate(name: &str, raw: &str) -> std::result::Result<f64, String> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("{name} value '{}' is not a number", raw.trim()))?;
    if !v.is_finite() {
        return Err(format!("{name} value '{}' is not finite", raw.trim()));
    }
    Ok(v)
}

pub fn read_events(path: &Path, options: &ReadOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_events_from(file, &path.display().to_string(), options)
}

pub fn read_events_from<R: std::io::Read>(reader: R, source: &str, options: &ReadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CdpError::Data(format!("{source}: cannot read header: {e}")))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(CdpError::Data(format!("{source}: file is empty")));
    }
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let date_at = find(&options.date_col).ok_or_else(|| {
        CdpError::Data(format!("{source}: no '{}' column in the header", options.date_col))
    })?;
    let x_at = find(&options.x_col);
    let y_at = find(&options.y_col);
    if x_at.is_some() != y_at.is_some() {
        return Err(CdpError::Data(format!(
            "{source}: coordinate columns '{}' and '{}' must both be present or both absent",
            options.x_col, options.y_col
        )));
    }
    let id_at = find(&options.id_col);

    let mut events = Vec::new();
    let mut rejected = Vec::new();
    let mut rows = 0usize;
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        rows = row;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RowDiagnostic {
                    row,
                    message: format!("unreadable: {e}"),
                });
                continue;
            }
        };
        if rec.len() != headers.len() {
            rejected.push(RowDiagnostic {
                row,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
            continue;
        }
        let parsed = (|| -> std::result::Result<Event, String> {
            let date = EventDate::parse(&rec[date_at])?;
            let location = match (x_at, y_at) {
                (Some(xi), Some(yi)) => match (missing(&rec[xi]), missing(&rec[yi])) {
                    (true, true) => None,
                    (false, false) => Some((coordinate("x", &rec[xi])?, coordinate("y", &rec[yi])?)),
                    (false, true) => return Err("x is present but y is missing".into()),
                    (true, false) => return Err("y is present but x is missing".into()),
                },
                _ => None,
            };
            let id = id_at.map(|i| rec[i].trim().to_string()).filter(|s| !s.is_empty());
            Ok(Event { date, location, id })
        })();
        match parsed {
            Ok(e) => events.push(e),
            Err(message) => rejected.push(RowDiagnostic { row, message }),
        }
    }
    if rows == 0 {
        return Err(CdpError::Data(format!("{source}: no data rows")));
    }
    if !rejected.is_empty() && !options.skip_invalid {
        let listed: Vec<String> = rejected.iter().map(|d| d.to_string()).collect();
        return Err(CdpError::Data(format!("{source}: {}", listed.join("; "))));
    }
    let calendar = events.iter().filter(|e| matches!(e.date, EventDate::Calendar(_))).count();
    if calendar != 0 && calendar != events.len() {
        return Err(CdpError::Data(format!(
            "{source}: calendar dates and integer day offsets are mixed"
        )));
    }
    if events.is_empty() {
        return Err(CdpError::Data(format!("{source}: every row was rejected")));
    }
    Ok(Dataset {
        events,
        source: source.to_string(),
        rows,
        rejected,
    })
}

/// Writes the events in the format [`read_events`] reads with default options.
pub fn write_events(ds: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_events_to(ds, file)
}

pub fn write_events_to<W: std::io::Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| CdpError::Io(std::io::Error::other(e));
    w.write_record(["date", "x", "y", "id"]).map_err(io)?;
    for e in &ds.events {
        let (x, y) = match e.location {
            Some((x, y)) => (x.to_string(), y.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            e.date.to_string(),
            x,
            y,
            e.id.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interarrivals {
    pub days: Vec<f64>,
    /// Same-day gaps replaced by [`ZERO_GAP_DAYS`].
    pub zero_gaps_adjusted: usize,
}

/// Successive gaps between the sorted event dates, with zero gaps replaced
/// by half a day so every interarrival is positive.
pub fn interarrivals(ds: &Dataset) -> Result<Interarrivals> {
    if ds.events.len() < 2 {
        return Err(CdpError::Data(format!(
            "interarrival times need at least 2 events, got {}",
            ds.events.len()
        )));
    }
    let mut days: Vec<i64> = ds.events.iter().map(|e| e.date.day()).collect();
    days.sort_unstable();
    let mut zero = 0;
    let gaps = days
        .windows(2)
        .map(|w| {
            let g = (w[1] - w[0]) as f64;
            if g == 0.0 {
                zero += 1;
                ZERO_GAP_DAYS
            } else {
                g
            }
        })
        .collect();
    if zero > 0 {
        log::warn!("{zero} same-day interarrival(s) replaced by {ZERO_GAP_DAYS} day");
    }
    Ok(Interarrivals {
        days: gaps,
        zero_gaps_adjusted: zero,
    })
}
