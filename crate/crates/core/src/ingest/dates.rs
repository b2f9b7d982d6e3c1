//! Date cells: ISO `YYYY-MM-DD` or US `MM/DD/YYYY`, each optionally followed
//! by a time of day which is ignored.

use chrono::NaiveDate;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DateCell {
    Valid(NaiveDate),
    /// Recognized layout but no such calendar day (e.g. `2019-02-30`).
    Invalid,
    /// Layout we refuse to guess at (two-digit years, `YYYY/MM/DD`, month names, ...).
    Unsupported,
}

fn digits(s: &str, min: usize, max: usize) -> Option<u32> {
    (s.len() >= min && s.len() <= max && s.bytes().all(|b| b.is_ascii_digit())).then(|| s.parse().ok()).flatten()
}

fn from_parts(y: Option<u32>, m: Option<u32>, d: Option<u32>) -> DateCell {
    match (y, m, d) {
        (Some(y), Some(m), Some(d)) => match NaiveDate::from_ymd_opt(y as i32, m, d) {
            Some(date) => DateCell::Valid(date),
            None => DateCell::Invalid,
        },
        _ => DateCell::Unsupported,
    }
}

pub fn parse_date(cell: &str) -> DateCell {
    let cell = cell.trim();
    // the date part ends at a `T` (ISO) or the first space
    let date = cell.split([' ', 'T']).next().unwrap_or("");
    let parts: Vec<&str> = date.split('-').collect();
    if parts.len() == 3 && parts[0].len() == 4 {
        return from_parts(digits(parts[0], 4, 4), digits(parts[1], 2, 2), digits(parts[2], 2, 2));
    }
    let parts: Vec<&str> = date.split('/').collect();
    if parts.len() == 3 && parts[2].len() == 4 {
        return from_parts(digits(parts[2], 4, 4), digits(parts[0], 1, 2), digits(parts[1], 1, 2));
    }
    DateCell::Unsupported
}
