//! Timestamps with second precision and a single canonical rendering.
//!
//! All persisted artifacts render timestamps as RFC 3339 UTC with a `Z`
//! suffix and no sub-second component, e.g. `2026-03-01T12:00:00Z`. Parsing
//! accepts any RFC 3339 offset and normalizes to UTC, truncating fractional
//! seconds, so equal instants always serialize to equal bytes.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};

/// A UTC instant with second precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

/// Error produced when a timestamp string is not valid RFC 3339.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid timestamp {input:?}: expected RFC 3339 such as 2026-03-01T12:00:00Z")]
pub struct TimestampError {
    /// The rejected input.
    pub input: String,
}

impl Timestamp {
    /// Parse an RFC 3339 timestamp, normalizing to UTC seconds.
    pub fn parse(s: &str) -> Result<Self, TimestampError> {
        let parsed = DateTime::parse_from_rfc3339(s).map_err(|_| TimestampError { input: s.to_string() })?;
        Ok(Self::from_datetime(parsed.with_timezone(&Utc)))
    }

    /// The current wall-clock time, truncated to seconds.
    pub fn now() -> Self {
        Self::from_datetime(Utc::now())
    }

    /// Build from UNIX seconds. Panics only on values far outside the
    /// representable calendar range, which no caller produces.
    pub fn from_unix_seconds(secs: i64) -> Self {
        Self(Utc.timestamp_opt(secs, 0).single().expect("timestamp in representable range"))
    }

    /// Seconds since the UNIX epoch.
    pub fn unix_seconds(&self) -> i64 {
        self.0.timestamp()
    }

    /// Number of whole days from `self` to `later` (saturating at zero when
    /// `later` precedes `self`).
    pub fn days_until(&self, later: Timestamp) -> i64 {
        (later.unix_seconds() - self.unix_seconds()).max(0) / 86_400
    }

    fn from_datetime(dt: DateTime<Utc>) -> Self {
        Self(Utc.timestamp_opt(dt.timestamp(), 0).single().expect("second truncation in range"))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_rfc3339_opts(SecondsFormat::Secs, true))
    }
}

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}
