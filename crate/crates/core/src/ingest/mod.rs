//! Incident CSV ingestion: parsing, category collapse, the minimum-count
//! threshold, classification and monthly aggregation.

mod category_map;
mod dates;

pub use category_map::{
    classify, collapse_category, CategoryMap, Classification, CollapseRule, DEFAULT_MIN_COUNT, FORMAT_VERSION, UNMAPPED,
};
pub use dates::{parse_date, DateCell};

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoPoint, Located};
use crate::series::{MonthWindow, MonthlySeries, SeriesError, YearMonth};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{0}")]
    Config(String),
    #[error("input has no column `{0}` (check the schema mapping)")]
    MissingColumn(String),
    #[error("row {row}: unsupported or ambiguous date `{value}` (expected YYYY-MM-DD or MM/DD/YYYY)")]
    UnsupportedDate { row: u64, value: String },
    #[error("invalid date window: {0}")]
    Window(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

impl IngestError {
    /// True for problems with the configuration rather than the data.
    pub fn is_config(&self) -> bool {
        matches!(self, IngestError::Config(_) | IngestError::MissingColumn(_) | IngestError::Window(_))
    }
}

/// Input column names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub date: String,
    pub code: String,
    pub description: String,
    pub lat: String,
    pub lon: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            date: "date".into(),
            code: "ucr_code".into(),
            description: "description".into(),
            lat: "latitude".into(),
            lon: "longitude".into(),
        }
    }
}

/// Inclusive calendar-date window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub first: NaiveDate,
    pub last: NaiveDate,
}

impl DateRange {
    pub fn new(first: NaiveDate, last: NaiveDate) -> Result<Self, IngestError> {
        if last < first {
            return Err(IngestError::Window(format!("{last} precedes {first}")));
        }
        Ok(Self { first, last })
    }

    /// 2006-01-01 through 2019-12-31.
    pub fn study_period() -> Self {
        Self {
            first: NaiveDate::from_ymd_opt(2006, 1, 1).unwrap(),
            last: NaiveDate::from_ymd_opt(2019, 12, 31).unwrap(),
        }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.first <= d && d <= self.last
    }

    /// Calendar months touched by the window.
    pub fn months(&self) -> MonthWindow {
        MonthWindow::new(month_of(self.first), month_of(self.last)).expect("ordered by construction")
    }
}

impl Default for DateRange {
    fn default() -> Self {
        Self::study_period()
    }
}

pub fn month_of(d: NaiveDate) -> YearMonth {
    YearMonth::new(d.year(), d.month())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub occurred_on: NaiveDate,
    pub ucr_code: String,
    pub raw_category: String,
    pub category: String,
    pub class: Classification,
    pub lat: f64,
    pub lon: f64,
}

impl Located for IncidentRecord {
    fn location(&self) -> Option<GeoPoint> {
        GeoPoint::new(self.lat, self.lon).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTally {
    pub category: String,
    pub class: Classification,
    pub count: u64,
}

/// Row accounting. `accepted + rejected_corrupt + dropped_out_of_window`
/// plus both drop lists always equals `rows_read`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: u64,
    pub accepted: u64,
    pub rejected_corrupt: u64,
    pub dropped_out_of_window: u64,
    pub min_count_threshold: u64,
    pub dropped_below_threshold: Vec<CategoryCount>,
    pub dropped_excluded: Vec<CategoryCount>,
    pub accepted_by_category: Vec<CategoryTally>,
}

impl IngestReport {
    fn tally(rows_read: u64, rejected_corrupt: u64, dropped_out_of_window: u64, records: &[IncidentRecord], below: Vec<CategoryCount>, min_count_threshold: u64) -> Self {
        let mut kept: BTreeMap<(&str, Classification), u64> = BTreeMap::new();
        let mut excluded: BTreeMap<&str, u64> = BTreeMap::new();
        for r in records {
            if r.class == Classification::Excluded {
                *excluded.entry(&r.category).or_default() += 1;
            } else {
                *kept.entry((&r.category, r.class)).or_default() += 1;
            }
        }
        for b in &below {
            let n = excluded.remove(b.category.as_str()).unwrap_or(0);
            debug_assert_eq!(n, b.count);
        }
        let accepted_by_category: Vec<CategoryTally> = kept
            .into_iter()
            .map(|((category, class), count)| CategoryTally { category: category.to_string(), class, count })
            .collect();
        Self {
            rows_read,
            accepted: accepted_by_category.iter().map(|c| c.count).sum(),
            rejected_corrupt,
            dropped_out_of_window,
            min_count_threshold,
            dropped_below_threshold: below,
            dropped_excluded: excluded
                .into_iter()
                .map(|(category, count)| CategoryCount { category: category.to_string(), count })
                .collect(),
            accepted_by_category,
        }
    }

    pub fn dropped_total(&self) -> u64 {
        self.dropped_out_of_window
            + self.dropped_below_threshold.iter().map(|c| c.count).sum::<u64>()
            + self.dropped_excluded.iter().map(|c| c.count).sum::<u64>()
    }

    pub fn class_total(&self, class: Classification) -> u64 {
        self.accepted_by_category.iter().filter(|c| c.class == class).map(|c| c.count).sum()
    }

    pub fn write_json<W: Write>(&self, w: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(w, self)
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name.trim()))
        .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
}

enum Row {
    Record(IncidentRecord),
    Corrupt,
    OutOfWindow,
}

/// Parses rows into records with their static class (no count threshold
/// yet). Corrupt or incomplete rows are counted and skipped; an unsupported
/// date layout aborts the whole parse.
pub fn parse_csv<R: Read>(reader: R, schema: &Schema, map: &CategoryMap, window: &DateRange) -> Result<(Vec<IncidentRecord>, IngestReport), IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = [
        column(&headers, &schema.date)?,
        column(&headers, &schema.code)?,
        column(&headers, &schema.description)?,
        column(&headers, &schema.lat)?,
        column(&headers, &schema.lon)?,
    ];
    let (mut rows_read, mut corrupt, mut outside) = (0u64, 0u64, 0u64);
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        rows_read += 1;
        // data rows are numbered from 1 after the header
        let row_no = i as u64 + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(e.into()),
            Err(_) => {
                corrupt += 1;
                continue;
            }
        };
        match parse_row(&row, idx, row_no, map, window)? {
            Row::Record(r) => records.push(r),
            Row::Corrupt => corrupt += 1,
            Row::OutOfWindow => outside += 1,
        }
    }
    let report = IngestReport::tally(rows_read, corrupt, outside, &records, Vec::new(), map.min_count_threshold);
    Ok((records, report))
}

fn parse_row(row: &csv::StringRecord, idx: [usize; 5], row_no: u64, map: &CategoryMap, window: &DateRange) -> Result<Row, IngestError> {
    let cell = |k: usize| row.get(idx[k]).map(str::trim).filter(|s| !s.is_empty());
    let (Some(date), Some(desc), Some(lat), Some(lon)) = (cell(0), cell(2), cell(3), cell(4)) else {
        return Ok(Row::Corrupt);
    };
    let occurred_on = match parse_date(date) {
        DateCell::Valid(d) => d,
        DateCell::Invalid => return Ok(Row::Corrupt),
        DateCell::Unsupported => return Err(IngestError::UnsupportedDate { row: row_no, value: date.to_string() }),
    };
    let (Ok(lat), Ok(lon)) = (lat.parse::<f64>(), lon.parse::<f64>()) else {
        return Ok(Row::Corrupt);
    };
    if GeoPoint::new(lat, lon).is_err() {
        return Ok(Row::Corrupt);
    }
    if !window.contains(occurred_on) {
        return Ok(Row::OutOfWindow);
    }
    let category = map.collapse_category(desc).to_string();
    let class = map.classify(&category);
    Ok(Row::Record(IncidentRecord {
        occurred_on,
        ucr_code: cell(1).unwrap_or("").to_string(),
        raw_category: desc.to_string(),
        category,
        class,
        lat,
        lon,
    }))
}

/// Re-labels every category whose in-window count (among non-excluded
/// records) is strictly below the map's threshold as excluded.
pub fn apply_threshold(mut records: Vec<IncidentRecord>, map: &CategoryMap) -> (Vec<IncidentRecord>, Vec<CategoryCount>) {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.class != Classification::Excluded) {
        *counts.entry(r.category.clone()).or_default() += 1;
    }
    let dropped: Vec<CategoryCount> = counts
        .into_iter()
        .filter(|(_, n)| *n < map.min_count_threshold)
        .map(|(category, count)| CategoryCount { category, count })
        .collect();
    for r in records.iter_mut() {
        if dropped.iter().any(|d| d.category == r.category) {
            r.class = Classification::Excluded;
        }
    }
    (records, dropped)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    /// Every in-window, well-formed record, each with its final class.
    pub records: Vec<IncidentRecord>,
    pub report: IngestReport,
}

impl Ingested {
    pub fn accepted(&self) -> impl Iterator<Item = &IncidentRecord> {
        self.records.iter().filter(|r| r.class != Classification::Excluded)
    }
}

/// Parse, then apply the threshold.
pub fn ingest<R: Read>(reader: R, schema: &Schema, map: &CategoryMap, window: &DateRange) -> Result<Ingested, IngestError> {
    let (records, parsed) = parse_csv(reader, schema, map, window)?;
    let (records, below) = apply_threshold(records, map);
    let report = IngestReport::tally(parsed.rows_read, parsed.rejected_corrupt, parsed.dropped_out_of_window, &records, below, map.min_count_threshold);
    Ok(Ingested { records, report })
}

pub fn ingest_file(path: &Path, schema: &Schema, map: &CategoryMap, window: &DateRange) -> Result<Ingested, IngestError> {
    ingest(std::fs::File::open(path)?, schema, map, window)
}

/// Which records feed a monthly series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassFilter {
    /// Reclassified and non-reclassified together.
    All,
    Reclassified,
    NonReclassified,
}

impl ClassFilter {
    pub const EACH: [ClassFilter; 3] = [ClassFilter::All, ClassFilter::Reclassified, ClassFilter::NonReclassified];

    pub fn matches(self, class: Classification) -> bool {
        match self {
            ClassFilter::All => class != Classification::Excluded,
            ClassFilter::Reclassified => class == Classification::Reclassified,
            ClassFilter::NonReclassified => class == Classification::NonReclassified,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassFilter::All => "all",
            ClassFilter::Reclassified => "reclassified",
            ClassFilter::NonReclassified => "non-reclassified",
        }
    }
}

/// Zero-filled monthly counts of matching records inside `window`.
pub fn aggregate_monthly<'a, I>(records: I, filter: ClassFilter, window: MonthWindow, label: impl Into<String>) -> Result<MonthlySeries, SeriesError>
where
    I: IntoIterator<Item = &'a IncidentRecord>,
{
    let mut counts = vec![0.0; window.len()];
    for r in records {
        if filter.matches(r.class) {
            if let Some(i) = window.index_of(month_of(r.occurred_on)) {
                counts[i] += 1.0;
            }
        }
    }
    MonthlySeries::new(label, window.start, counts)
}

/// Normalized record file: one row per record, header included.
pub fn write_records<W: Write>(records: &[IncidentRecord], w: W) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<IncidentRecord>, IngestError> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAP: &str = "version = 1\n[threshold]\nmin_count = 2\n[collapse]\ntheft = larceny\nassault = assault\narson = arson\n[classes]\nlarceny = reclassified\nassault = non-reclassified\n";

    fn map() -> CategoryMap {
        CategoryMap::parse(MAP).unwrap()
    }

    fn run(csv: &str) -> Result<Ingested, IngestError> {
        ingest(csv.as_bytes(), &Schema::default(), &map(), &DateRange::study_period())
    }

    #[test]
    fn four_rows_one_missing_lat() {
        let csv = "date,ucr_code,description,latitude,longitude\n\
                   2010-01-02,600,Petty Theft,34.01,-118.49\n\
                   2010-01-03,600,Grand Theft,,-118.49\n\
                   2010-02-03,400,Simple Assault,34.02,-118.48\n\
                   2010-02-04,400,Aggravated assault,34.02,-118.48\n";
        let (records, report) = parse_csv(csv.as_bytes(), &Schema::default(), &map(), &DateRange::study_period()).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(report.rejected_corrupt, 1);
        assert_eq!(report.rows_read, 4);
    }

    #[test]
    fn window_and_threshold_accounting() {
        let csv = "date,ucr_code,description,latitude,longitude\n\
                   2005-12-31,600,theft,34.0,-118.4\n\
                   2006-01-01,600,theft,34.0,-118.4\n\
                   2019-12-31,600,theft,34.0,-118.4\n\
                   2020-01-01,600,theft,34.0,-118.4\n\
                   2012-05-05,400,assault,34.0,-118.4\n\
                   2012-05-05,200,arson,34.0,-118.4\n\
                   2012-05-05,999,zzz-unknown,34.0,-118.4\n\
                   2012-05-05,999,theft,95.0,-118.4\n\
                   2012-02-30,999,theft,34.0,-118.4\n";
        let out = run(csv).unwrap();
        let r = &out.report;
        assert_eq!(r.rows_read, 9);
        assert_eq!(r.dropped_out_of_window, 2);
        assert_eq!(r.rejected_corrupt, 2);
        assert_eq!(r.accepted, 2);
        assert_eq!(r.dropped_below_threshold, vec![CategoryCount { category: "assault".into(), count: 1 }]);
        assert_eq!(
            r.dropped_excluded,
            vec![CategoryCount { category: "Unmapped".into(), count: 1 }, CategoryCount { category: "arson".into(), count: 1 }]
        );
        assert_eq!(r.accepted + r.rejected_corrupt + r.dropped_total(), r.rows_read);
        assert_eq!(out.records.len(), 5);
    }

    #[test]
    fn unsupported_date_is_fatal_and_missing_column_is_config() {
        let csv = "date,ucr_code,description,latitude,longitude\n2012/05/05,1,theft,34,-118\n";
        assert!(matches!(run(csv), Err(IngestError::UnsupportedDate { row: 1, .. })));
        let csv = "when,ucr_code,description,latitude,longitude\n2012-05-05,1,theft,34,-118\n";
        let err = run(csv).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(ref c) if c == "date"));
        assert!(err.is_config());
    }

    #[test]
    fn short_rows_are_corrupt() {
        let csv = "date,ucr_code,description,latitude,longitude\n2012-05-05,1,theft\n2012-05-05,1,theft,34,-118\n2012-05-06,1,theft,34,-118\n";
        let out = run(csv).unwrap();
        assert_eq!(out.report.rejected_corrupt, 1);
        assert_eq!(out.report.accepted, 2);
    }

    #[test]
    fn monthly_aggregation_zero_fills() {
        let w = MonthWindow::new(YearMonth::new(2006, 1), YearMonth::new(2006, 3)).unwrap();
        let empty: Vec<IncidentRecord> = Vec::new();
        assert_eq!(aggregate_monthly(&empty, ClassFilter::All, w, "x").unwrap().values(), &[0.0, 0.0, 0.0]);
        let csv = "date,ucr_code,description,latitude,longitude\n2006-01-02,1,theft,34,-118\n2006-01-30,1,theft,34,-118\n";
        let out = run(csv).unwrap();
        let w = MonthWindow::new(YearMonth::new(2006, 1), YearMonth::new(2006, 2)).unwrap();
        let s = aggregate_monthly(&out.records, ClassFilter::Reclassified, w, "p").unwrap();
        assert_eq!(s.values(), &[2.0, 0.0]);
        let s = aggregate_monthly(&out.records, ClassFilter::NonReclassified, w, "n").unwrap();
        assert_eq!(s.values(), &[0.0, 0.0]);
    }

    #[test]
    fn records_round_trip() {
        let csv = "date,ucr_code,description,latitude,longitude\n2006-01-02,1,\"Theft, petty\",34.0123456789,-118.4\n";
        let out = run(csv).unwrap();
        let mut buf = Vec::new();
        write_records(&out.records, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("occurred_on,ucr_code,raw_category,category,class,lat,lon\n"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), out.records);
    }
}
