//! Timestamp parsing and Monday-based week arithmetic.
//!
//! Timestamps are stored as UTC epoch seconds. Week boundaries depend on local
//! midnight, so all week math takes a fixed UTC offset describing the local
//! timezone of the observation area.

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SECONDS_PER_WEEK: i64 = 7 * SECONDS_PER_DAY;

/// Parses a timestamp given either as integer epoch seconds or as an ISO-8601
/// datetime. Naive datetimes (no zone designator) are interpreted in the
/// configured fixed offset.
pub fn parse_timestamp(text: &str, utc_offset_secs: i64) -> Result<i64> {
    let text = text.trim();
    if let Ok(epoch) = text.parse::<i64>() {
        return Ok(epoch);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(text, fmt) {
            return Ok(naive.and_utc().timestamp() - utc_offset_secs);
        }
    }
    Err(Error::Data(format!("unparseable timestamp {text:?}")))
}

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

/// Day index where Monday maps to 0 (epoch day 0 was a Thursday).
fn weekday_monday0(day: i64) -> i64 {
    (day + 3).rem_euclid(7)
}

/// Largest Monday 00:00 (local) not after `t`, returned as a UTC instant.
pub fn week_floor(t: i64, utc_offset_secs: i64) -> i64 {
    let local = t + utc_offset_secs;
    let day = floor_div(local, SECONDS_PER_DAY);
    let monday = day - weekday_monday0(day);
    monday * SECONDS_PER_DAY - utc_offset_secs
}

/// Smallest Monday 00:00 (local) not before `t`, returned as a UTC instant.
pub fn week_ceil(t: i64, utc_offset_secs: i64) -> i64 {
    let floored = week_floor(t, utc_offset_secs);
    if floored == t {
        t
    } else {
        floored + SECONDS_PER_WEEK
    }
}

/// An observation period trimmed to an exact number of Monday-to-Sunday weeks,
/// shared by all users so week indices are comparable across trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct WeekCalendar {
    /// First instant of week 1 (a local Monday 00:00), UTC epoch seconds.
    pub start: i64,
    /// Number of whole weeks covered.
    pub weeks: u32,
    pub utc_offset_secs: i64,
}

impl WeekCalendar {
    /// Trims `[period_start, period_end]` to whole weeks: data before the first
    /// local Monday 00:00 and after the last local Sunday 24:00 falls outside.
    pub fn trim(period_start: i64, period_end: i64, utc_offset_secs: i64) -> Result<Self> {
        let start = week_ceil(period_start, utc_offset_secs);
        let end = week_floor(period_end, utc_offset_secs);
        if end <= start {
            return Err(Error::Data(format!(
                "observation period [{period_start}, {period_end}] does not cover a whole week"
            )));
        }
        let weeks = ((end - start) / SECONDS_PER_WEEK) as u32;
        Ok(WeekCalendar {
            start,
            weeks,
            utc_offset_secs,
        })
    }

    /// End of the trimmed period (exclusive): the Monday 00:00 after week `weeks`.
    pub fn end(&self) -> i64 {
        self.start + i64::from(self.weeks) * SECONDS_PER_WEEK
    }

    /// 1-based week index of an instant, or `None` when outside the trimmed period.
    pub fn week_of(&self, t: i64) -> Option<u32> {
        if t < self.start || t >= self.end() {
            return None;
        }
        Some(1 + ((t - self.start) / SECONDS_PER_WEEK) as u32)
    }
}
