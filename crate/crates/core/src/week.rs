use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domain::{start_of_day, Timestamp};

/// An ISO-8601 week (Monday start), written `1997-W12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IsoWeek {
    year: i32,
    week: u32,
}

impl IsoWeek {
    pub fn new(year: i32, week: u32) -> Option<Self> {
        NaiveDate::from_isoywd_opt(year, week, Weekday::Mon).map(|_| IsoWeek { year, week })
    }

    pub fn of_date(date: NaiveDate) -> Self {
        let w = date.iso_week();
        IsoWeek {
            year: w.year(),
            week: w.week(),
        }
    }

    pub fn of(t: Timestamp) -> Self {
        Self::of_date(t.date_naive())
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn week(self) -> u32 {
        self.week
    }

    pub fn monday(self) -> NaiveDate {
        // Construction guarantees the week exists.
        NaiveDate::from_isoywd_opt(self.year, self.week, Weekday::Mon).unwrap_or_default()
    }

    pub fn start(self) -> Timestamp {
        start_of_day(self.monday())
    }

    /// First instant after the week (next Monday 00:00 UTC).
    pub fn end(self) -> Timestamp {
        start_of_day(self.monday() + Duration::days(7))
    }

    pub fn succ(self) -> Self {
        Self::of_date(self.monday() + Duration::days(7))
    }

    pub fn pred(self) -> Self {
        Self::of_date(self.monday() - Duration::days(7))
    }

    /// Weeks from `self` to `other` (negative if `other` is earlier).
    pub fn weeks_until(self, other: IsoWeek) -> i64 {
        (other.monday() - self.monday()).num_days() / 7
    }

    /// Inclusive range of weeks.
    pub fn range(from: IsoWeek, to: IsoWeek) -> impl Iterator<Item = IsoWeek> {
        let mut next = Some(from).filter(|f| *f <= to);
        std::iter::from_fn(move || {
            let cur = next?;
            next = Some(cur.succ()).filter(|n| *n <= to);
            Some(cur)
        })
    }
}

impl fmt::Display for IsoWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-W{:02}", self.year, self.week)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad ISO week {0:?}, expected YYYY-Www")]
pub struct BadWeek(pub String);

impl FromStr for IsoWeek {
    type Err = BadWeek;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadWeek(s.to_string());
        let (year, week) = s.split_once("-W").ok_or_else(bad)?;
        if year.len() != 4 || week.len() != 2 {
            return Err(bad());
        }
        let year: i32 = year.parse().map_err(|_| bad())?;
        let week: u32 = week.parse().map_err(|_| bad())?;
        IsoWeek::new(year, week).ok_or_else(bad)
    }
}

impl Serialize for IsoWeek {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IsoWeek {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let w: IsoWeek = "1997-W12".parse().unwrap();
        assert_eq!((w.year(), w.week()), (1997, 12));
        assert_eq!(w.to_string(), "1997-W12");
        assert_eq!(w.monday(), NaiveDate::from_ymd_opt(1997, 3, 17).unwrap());
        assert!("1997-W54".parse::<IsoWeek>().is_err());
        assert!("1997-12".parse::<IsoWeek>().is_err());
        assert!("1997-W1".parse::<IsoWeek>().is_err());
        // 1998 has 53 ISO weeks, 1997 does not
        assert!("1998-W53".parse::<IsoWeek>().is_ok());
        assert!("1997-W53".parse::<IsoWeek>().is_err());
    }

    #[test]
    fn year_boundary() {
        // 1997-12-29 (Mon) belongs to 1998-W01
        let d = NaiveDate::from_ymd_opt(1997, 12, 29).unwrap();
        assert_eq!(IsoWeek::of_date(d).to_string(), "1998-W01");
        let last: IsoWeek = "1998-W53".parse().unwrap();
        assert_eq!(last.succ().to_string(), "1999-W01");
        assert_eq!(last.succ().pred(), last);
    }

    #[test]
    fn ranges() {
        let a: IsoWeek = "1997-W50".parse().unwrap();
        let b: IsoWeek = "1998-W03".parse().unwrap();
        let weeks: Vec<String> = IsoWeek::range(a, b).map(|w| w.to_string()).collect();
        assert_eq!(weeks, ["1997-W50", "1997-W51", "1997-W52", "1998-W01", "1998-W02", "1998-W03"]);
        assert_eq!(a.weeks_until(b), 5);
        assert_eq!(IsoWeek::range(b, a).count(), 0);
    }
}
