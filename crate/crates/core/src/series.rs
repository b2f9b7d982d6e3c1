//! Month-indexed count series, epoch splitting and the backward-difference
//! slope series.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("series must contain at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series value at index {0} is not finite")]
    NonFinite(usize),
    #[error("invalid month `{0}` (expected YYYY-MM)")]
    BadMonth(String),
    #[error("window end {end} precedes start {start}")]
    EmptyWindow { start: YearMonth, end: YearMonth },
    #[error("epoch boundary {0} is not strictly inside the series span")]
    BoundaryOutOfSpan(YearMonth),
    #[error("epoch boundaries must be strictly increasing")]
    UnorderedBoundaries,
    #[error("month {month} is not contiguous with the previous row")]
    Gap { month: YearMonth },
    #[error("csv: {0}")]
    Csv(String),
}

/// Calendar month. Ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    /// 1..=12
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month out of range: {month}");
        Self { year, month }
    }

    /// Months elapsed since January of year 0. Used as a linear index.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ord: i64) -> Self {
        let year = ord.div_euclid(12) as i32;
        let month = ord.rem_euclid(12) as u32 + 1;
        Self { year, month }
    }

    pub fn add_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: YearMonth) -> i64 {
        other.ordinal() - self.ordinal()
    }

    /// Month containing a fractional offset, rounding to the nearest month.
    pub fn offset_rounded(self, offset: f64) -> Self {
        self.add_months(offset.round() as i64)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SeriesError::BadMonth(s.to_string());
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(Self { year, month })
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive month range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthWindow {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl MonthWindow {
    pub fn new(start: YearMonth, end: YearMonth) -> Result<Self, SeriesError> {
        if end < start {
            return Err(SeriesError::EmptyWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        (self.start.months_until(self.end) + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, m: YearMonth) -> bool {
        self.start <= m && m <= self.end
    }

    /// Index of `m` within the window, if inside.
    pub fn index_of(&self, m: YearMonth) -> Option<usize> {
        self.contains(m)
            .then(|| self.start.months_until(m) as usize)
    }
}

/// Consecutive monthly values without gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    pub label: String,
    pub start: YearMonth,
    values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(
        label: impl Into<String>,
        start: YearMonth,
        values: Vec<f64>,
    ) -> Result<Self, SeriesError> {
        if values.is_empty() {
            return Err(SeriesError::TooShort { needed: 1, got: 0 });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite(i));
        }
        Ok(Self {
            label: label.into(),
            start,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.values.len() as i64 - 1)
    }

    pub fn month_at(&self, i: usize) -> YearMonth {
        self.start.add_months(i as i64)
    }

    pub fn index_of(&self, m: YearMonth) -> Option<usize> {
        let i = self.start.months_until(m);
        (0..self.values.len() as i64).contains(&i).then_some(i as usize)
    }

    pub fn window(&self) -> MonthWindow {
        MonthWindow {
            start: self.start,
            end: self.end(),
        }
    }

    /// Same span and label with new values; used for decomposition outputs.
    pub fn with_values(&self, label: impl Into<String>, values: Vec<f64>) -> Result<Self, SeriesError> {
        assert_eq!(values.len(), self.values.len(), "length mismatch");
        Self::new(label, self.start, values)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Joins consecutive pieces back into one series.
    pub fn concat(label: impl Into<String>, parts: &[MonthlySeries]) -> Result<Self, SeriesError> {
        let first = parts.first().ok_or(SeriesError::TooShort { needed: 1, got: 0 })?;
        let mut values = Vec::new();
        let mut expected = first.start;
        for p in parts {
            if p.start != expected {
                return Err(SeriesError::Gap { month: p.start });
            }
            values.extend_from_slice(&p.values);
            expected = p.end().add_months(1);
        }
        Self::new(label, first.start, values)
    }

    /// Writes `month,value` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SeriesError> {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| SeriesError::Csv(e.to_string());
        wtr.write_record(["month", "value"]).map_err(err)?;
        for (i, v) in self.values.iter().enumerate() {
            wtr.write_record([self.month_at(i).to_string(), v.to_string()])
                .map_err(err)?;
        }
        wtr.flush().map_err(|e| SeriesError::Csv(e.to_string()))
    }

    /// Reads `month,value` rows; months must be contiguous.
    pub fn read_csv<R: Read>(label: impl Into<String>, r: R) -> Result<Self, SeriesError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut start = None;
        let mut values = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| SeriesError::Csv(e.to_string()))?;
            let month: YearMonth = row.get(0).unwrap_or_default().parse()?;
            let value: f64 = row
                .get(1)
                .unwrap_or_default()
                .trim()
                .parse()
                .map_err(|_| SeriesError::Csv(format!("bad value for {month}")))?;
            match start {
                None => start = Some(month),
                Some(s) => {
                    if s.add_months(values.len() as i64) != month {
                        return Err(SeriesError::Gap { month });
                    }
                }
            }
            values.push(value);
        }
        let start = start.ok_or(SeriesError::TooShort { needed: 1, got: 0 })?;
        Self::new(label, start, values)
    }
}

/// Backward differences `M(t_i) = T(t_i) - T(t_{i-1})`, labelled by the later month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSeries {
    pub start: YearMonth,
    pub values: Vec<f64>,
}

impl SlopeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn month_at(&self, i: usize) -> YearMonth {
        self.start.add_months(i as i64)
    }
}

pub fn slope(series: &MonthlySeries) -> Result<SlopeSeries, SeriesError> {
    if series.len() < 2 {
        return Err(SeriesError::TooShort {
            needed: 2,
            got: series.len(),
        });
    }
    let values = series.values.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(SlopeSeries {
        start: series.start.add_months(1),
        values,
    })
}

/// Which side of a cut the boundary month itself falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryOwner {
    /// The cut month opens the later epoch.
    Later,
    /// The cut month closes the earlier epoch.
    Earlier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochCut {
    pub month: YearMonth,
    pub owner: BoundaryOwner,
}

impl EpochCut {
    pub fn later(month: YearMonth) -> Self {
        Self {
            month,
            owner: BoundaryOwner::Later,
        }
    }

    pub fn earlier(month: YearMonth) -> Self {
        Self {
            month,
            owner: BoundaryOwner::Earlier,
        }
    }

    /// First month of the epoch following this cut.
    pub fn first_after(&self) -> YearMonth {
        match self.owner {
            BoundaryOwner::Later => self.month,
            BoundaryOwner::Earlier => self.month.add_months(1),
        }
    }
}

/// Ordered cut months splitting a series into consecutive epochs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSplit {
    pub cuts: Vec<EpochCut>,
}

impl EpochSplit {
    pub fn new(cuts: Vec<EpochCut>) -> Self {
        Self { cuts }
    }

    /// Cut used for the November 2014 policy change: the month goes to "after".
    pub fn policy_cut() -> EpochCut {
        EpochCut::later(YearMonth::new(2014, 11))
    }

    /// Cut used for the May 2016 rail opening: the month goes to "before".
    pub fn rail_cut() -> EpochCut {
        EpochCut::earlier(YearMonth::new(2016, 5))
    }
}

pub fn split(series: &MonthlySeries, epochs: &EpochSplit) -> Result<Vec<MonthlySeries>, SeriesError> {
    let mut starts = Vec::with_capacity(epochs.cuts.len());
    for cut in &epochs.cuts {
        let first = cut.first_after();
        if first <= series.start || first > series.end() {
            return Err(SeriesError::BoundaryOutOfSpan(cut.month));
        }
        if starts.last().is_some_and(|&prev| first <= prev) {
            return Err(SeriesError::UnorderedBoundaries);
        }
        starts.push(first);
    }
    let mut out = Vec::with_capacity(starts.len() + 1);
    let mut lo = 0usize;
    for first in starts.iter().copied().chain(std::iter::once(series.end().add_months(1))) {
        let hi = series.start.months_until(first) as usize;
        out.push(MonthlySeries {
            label: series.label.clone(),
            start: series.month_at(lo),
            values: series.values[lo..hi].to_vec(),
        });
        lo = hi;
    }
    Ok(out)
}

/// Mean, sample standard deviation (n - 1 denominator) and count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Result<Summary, SeriesError> {
    let n = values.len();
    if n < 2 {
        return Err(SeriesError::TooShort { needed: 2, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(Summary {
        mean,
        sd: (ss / (n as f64 - 1.0)).sqrt(),
        n,
    })
}
