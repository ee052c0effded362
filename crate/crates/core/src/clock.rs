//! Game time: whole minutes since the simulation epoch, plus calendar rendering.

use std::fmt;
use std::ops::{Add, Sub};

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

pub const MINUTES_PER_HOUR: i64 = 60;
pub const MINUTES_PER_DAY: i64 = 24 * 60;

/// Minutes since the simulation epoch.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct GameTime(pub i64);

impl GameTime {
    pub const ZERO: GameTime = GameTime(0);

    pub fn minutes(self) -> i64 {
        self.0
    }

    /// Fractional hours elapsed since `earlier`.
    pub fn hours_since(self, earlier: GameTime) -> f64 {
        (self.0 - earlier.0) as f64 / MINUTES_PER_HOUR as f64
    }

    /// Index of the game day containing this instant (day 0 starts at the epoch).
    pub fn day_index(self) -> i64 {
        self.0.div_euclid(MINUTES_PER_DAY)
    }

    pub fn day_start(self) -> GameTime {
        GameTime(self.day_index() * MINUTES_PER_DAY)
    }

    pub fn minute_of_day(self) -> i64 {
        self.0.rem_euclid(MINUTES_PER_DAY)
    }
}

impl Add<i64> for GameTime {
    type Output = GameTime;
    fn add(self, rhs: i64) -> GameTime {
        GameTime(self.0 + rhs)
    }
}

impl Sub<i64> for GameTime {
    type Output = GameTime;
    fn sub(self, rhs: i64) -> GameTime {
        GameTime(self.0 - rhs)
    }
}

impl Sub for GameTime {
    type Output = i64;
    fn sub(self, rhs: GameTime) -> i64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for GameTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t+{}m", self.0)
    }
}

/// Maps game time onto a wall calendar anchored at the scenario epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub epoch: NaiveDateTime,
}

impl Calendar {
    pub fn new(epoch: NaiveDateTime) -> Self {
        Self { epoch }
    }

    pub fn datetime(&self, t: GameTime) -> NaiveDateTime {
        self.epoch + Duration::minutes(t.0)
    }

    pub fn date(&self, t: GameTime) -> NaiveDate {
        self.datetime(t).date()
    }

    /// `GameTime` of a wall-clock instant.
    pub fn at(&self, when: NaiveDateTime) -> GameTime {
        GameTime((when - self.epoch).num_minutes())
    }

    /// "4:56 pm"
    pub fn clock_time(&self, t: GameTime) -> String {
        format_clock(self.datetime(t).hour(), self.datetime(t).minute())
    }

    /// "Monday February 13"
    pub fn day_label(&self, t: GameTime) -> String {
        let d = self.datetime(t);
        format!("{} {} {}", d.format("%A"), d.format("%B"), d.day())
    }

    /// "February 13, 2023, 4:56 pm"
    pub fn long_datetime(&self, t: GameTime) -> String {
        let d = self.datetime(t);
        format!(
            "{} {}, {}, {}",
            d.format("%B"),
            d.day(),
            d.year(),
            self.clock_time(t)
        )
    }
}

pub fn format_clock(hour: u32, minute: u32) -> String {
    let (h12, suffix) = match hour {
        0 => (12, "am"),
        1..=11 => (hour, "am"),
        12 => (12, "pm"),
        _ => (hour - 12, "pm"),
    };
    format!("{h12}:{minute:02} {suffix}")
}

/// Minute-of-day for a 12-hour clock reading; `None` if out of range.
pub fn minute_of_day(hour12: u32, minute: u32, pm: bool) -> Option<i64> {
    if !(1..=12).contains(&hour12) || minute > 59 {
        return None;
    }
    let hour24 = match (hour12, pm) {
        (12, false) => 0,
        (12, true) => 12,
        (h, false) => h,
        (h, true) => h + 12,
    };
    Some(i64::from(hour24) * MINUTES_PER_HOUR + i64::from(minute))
}
