use std::fmt;

use chrono::{Datelike, NaiveDate, Weekday};

use crate::{Error, Result};

/// An Avazu `YYMMDDHH` hour stamp. Years are 20YY.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    date: NaiveDate,
    hour: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeFeatures {
    pub hour: u8,
    /// Monday = 0 … Sunday = 6.
    pub weekday: u8,
    pub is_weekend: bool,
}

impl Timestamp {
    pub fn new(date: NaiveDate, hour: u8) -> Result<Self> {
        if hour > 23 {
            return Err(parse_err(format!("hour {hour} out of range")));
        }
        Ok(Self { date, hour })
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(parse_err(format!("timestamp {s:?} is not YYMMDDHH")));
        }
        let num = |r: std::ops::Range<usize>| s[r].parse::<u32>().unwrap();
        let date = NaiveDate::from_ymd_opt(2000 + num(0..2) as i32, num(2..4), num(4..6))
            .ok_or_else(|| parse_err(format!("timestamp {s:?} is not a calendar date")))?;
        let hour = num(6..8);
        if hour > 23 {
            return Err(parse_err(format!("timestamp {s:?} has hour {hour}")));
        }
        Ok(Self {
            date,
            hour: hour as u8,
        })
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn hour(&self) -> u8 {
        self.hour
    }

    pub fn features(&self) -> TimeFeatures {
        let wd = self.date.weekday();
        TimeFeatures {
            hour: self.hour,
            weekday: wd.num_days_from_monday() as u8,
            is_weekend: matches!(wd, Weekday::Sat | Weekday::Sun),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:02}", self.date.format("%y%m%d"), self.hour)
    }
}

fn parse_err(message: String) -> Error {
    Error::Parse { line: 0, message }
}

/// Hour of day, weekday and weekend flag from a `YYMMDDHH` stamp.
pub fn derive_time_features(timestamp: &str) -> Result<TimeFeatures> {
    Ok(Timestamp::parse(timestamp)?.features())
}
