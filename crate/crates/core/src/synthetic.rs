//! Seeded synthetic incident exports shaped like the Santa Monica data:
//! raw descriptions, US-style dates, a few corrupt and out-of-window rows,
//! and known trend changes. Used by the examples, the CLI demo and tests.
//!
//! Monthly means per class are continuous piecewise-linear with kinks at
//! [`KINKS`], plus a 12-month sinusoid. Reclassified incidents turn upward at
//! the first kink; non-reclassified ones keep declining. Locations mix a
//! uniform city-wide background with a downtown cluster (denser after the
//! policy month) and clusters around two rail stations (denser after the
//! rail month).

use std::f64::consts::PI;
use std::io::Write;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::geo::GeoPoint;
use crate::ingest::Schema;
use crate::series::YearMonth;

pub const START: YearMonth = YearMonth { year: 2006, month: 1 };
pub const MONTHS: usize = 168;
/// Month indices (from January 2006) of the trend kinks: Sep 2014, Nov 2016.
pub const KINKS: [usize; 2] = [104, 130];

/// City bounding box: (south, north, west, east).
const BBOX: (f64, f64, f64, f64) = (34.0, 34.05, -118.517, -118.443);
const DOWNTOWN: (f64, f64, f64) = (34.0165, -118.4955, 700.0);
const STATIONS: [(f64, f64); 2] = [(34.01405, -118.49134), (34.02797, -118.46968)];
const STATION_RADIUS_M: f64 = 400.0;

struct Category {
    descriptions: &'static [&'static str],
    code: &'static str,
    /// `None` for rare or excluded categories, which use a flat rate.
    reclassified: Option<bool>,
    /// Fraction of the class mean, or incidents per month when unclassed.
    share: f64,
}

const CATEGORIES: &[Category] = &[
    Category { descriptions: &["Larceny - Shoplifting", "Petty Theft", "Grand Theft - From Building", "Theft from Vehicle"], code: "600", reclassified: Some(true), share: 0.745 },
    Category { descriptions: &["Fraud", "Identity Theft", "Bad Check"], code: "1100", reclassified: Some(true), share: 0.143 },
    Category { descriptions: &["Narcotics Possession - Controlled Substance"], code: "1800", reclassified: Some(true), share: 0.071 },
    Category { descriptions: &["Forgery", "Counterfeit Currency"], code: "1000", reclassified: Some(true), share: 0.029 },
    Category { descriptions: &["Receiving Stolen Property"], code: "1300", reclassified: Some(true), share: 0.012 },
    Category { descriptions: &["Simple Assault", "Aggravated Assault with Hands", "Aggravated Assault with Knife", "Battery"], code: "800", reclassified: Some(false), share: 0.224 },
    Category { descriptions: &["Public Intoxication", "Drunk in Public"], code: "2200", reclassified: Some(false), share: 0.209 },
    Category { descriptions: &["Vandalism", "Malicious Mischief"], code: "1400", reclassified: Some(false), share: 0.157 },
    Category { descriptions: &["Burglary - Residential", "Burglary - Commercial"], code: "500", reclassified: Some(false), share: 0.141 },
    Category { descriptions: &["Grand Theft Auto", "Stolen Vehicle"], code: "700", reclassified: Some(false), share: 0.078 },
    Category { descriptions: &["Contempt of Court"], code: "2600", reclassified: Some(false), share: 0.069 },
    Category { descriptions: &["Driving Under the Influence", "DUI - Alcohol"], code: "2100", reclassified: Some(false), share: 0.060 },
    Category { descriptions: &["Robbery - Street", "Robbery - Commercial"], code: "300", reclassified: Some(false), share: 0.037 },
    Category { descriptions: &["Sex Offense - Other", "Indecent Exposure"], code: "1700", reclassified: Some(false), share: 0.018 },
    Category { descriptions: &["Narcotic Sale - Controlled Substance"], code: "1850", reclassified: Some(false), share: 0.0074 },
    Category { descriptions: &["Arson"], code: "200", reclassified: None, share: 0.5 },
    Category { descriptions: &["Homicide"], code: "100", reclassified: None, share: 0.05 },
    Category { descriptions: &["Embezzlement"], code: "1200", reclassified: None, share: 0.3 },
    Category { descriptions: &["Blackmail / Extortion"], code: "2700", reclassified: None, share: 0.1 },
    Category { descriptions: &["Lost Property Report"], code: "9999", reclassified: None, share: 1.5 },
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticCity {
    pub seed: u64,
    /// Multiplies every rate; 1.0 gives roughly 110k incidents over 14 years.
    pub scale: f64,
    /// Fraction of rows written with a blank latitude.
    pub corrupt_fraction: f64,
    /// Incidents per month written for December 2005 and January 2020.
    pub out_of_window_per_month: f64,
}

impl Default for SyntheticCity {
    fn default() -> Self {
        Self { seed: 0, scale: 1.0, corrupt_fraction: 0.002, out_of_window_per_month: 600.0 }
    }
}

/// One raw CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawIncident {
    pub date: NaiveDate,
    pub code: &'static str,
    pub description: &'static str,
    pub location: Option<GeoPoint>,
}

fn piecewise(t: f64, level: f64, slopes: [f64; 3]) -> f64 {
    let (k1, k2) = (KINKS[0] as f64, KINKS[1] as f64);
    level + slopes[0] * t + (slopes[1] - slopes[0]) * (t - k1).max(0.0) + (slopes[2] - slopes[1]) * (t - k2).max(0.0)
}

/// Expected monthly count of a class at month index `t` (unit scale).
pub fn expected_count(reclassified: bool, t: usize) -> f64 {
    let t = t as f64;
    let season = (2.0 * PI * t / 12.0).sin();
    if reclassified {
        piecewise(t, 300.0, [-0.3, 2.5, -0.1]) + 12.0 * season
    } else {
        piecewise(t, 420.0, [-0.1, -2.0, 0.0]) + 15.0 * season
    }
}

impl SyntheticCity {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    /// Incidents in date order.
    pub fn generate(&self) -> Vec<RawIncident> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::new();
        let policy = START.months_until(YearMonth::new(2014, 11)) as usize;
        let rail = START.months_until(YearMonth::new(2016, 6)) as usize;
        for t in 0..MONTHS {
            let month = START.add_months(t as i64);
            for c in CATEGORIES {
                let mean = self.scale * c.share * c.reclassified.map_or(1.0, |r| expected_count(r, t));
                let downtown = if c.reclassified == Some(true) && t >= policy { 0.26 } else { 0.18 };
                let station = if t >= rail { 0.05 } else { 0.03 };
                for _ in 0..draw(&mut rng, mean) {
                    let location = self.place(&mut rng, downtown, station);
                    out.push(self.incident(&mut rng, month, c.code, c.descriptions, location));
                }
            }
            // recorded only from 2010
            if month.year >= 2010 {
                for _ in 0..draw(&mut rng, self.scale * 4.0) {
                    let location = self.place(&mut rng, 0.18, 0.03);
                    out.push(self.incident(&mut rng, month, "2800", &["Misappropriation of Property"], location));
                }
            }
        }
        for month in [START.add_months(-1), START.add_months(MONTHS as i64)] {
            for _ in 0..draw(&mut rng, self.scale * self.out_of_window_per_month) {
                let c = &CATEGORIES[rng.gen_range(0..CATEGORIES.len())];
                let location = self.place(&mut rng, 0.18, 0.03);
                out.push(self.incident(&mut rng, month, c.code, c.descriptions, location));
            }
        }
        out.sort_by_key(|r| r.date);
        out
    }

    fn incident(&self, rng: &mut ChaCha8Rng, month: YearMonth, code: &'static str, descriptions: &[&'static str], location: GeoPoint) -> RawIncident {
        let first = NaiveDate::from_ymd_opt(month.year, month.month, 1).unwrap();
        let next = month.add_months(1);
        let days = (NaiveDate::from_ymd_opt(next.year, next.month, 1).unwrap() - first).num_days() as u64;
        let date = first + chrono::Days::new(rng.gen_range(0..days));
        let description = descriptions[rng.gen_range(0..descriptions.len())];
        let location = (!rng.gen_bool(self.corrupt_fraction)).then_some(location);
        RawIncident { date, code, description, location }
    }

    fn place(&self, rng: &mut ChaCha8Rng, downtown: f64, station: f64) -> GeoPoint {
        let u: f64 = rng.gen();
        let (lat, lon, radius) = if u < downtown {
            DOWNTOWN
        } else if u < downtown + 2.0 * station {
            let (lat, lon) = STATIONS[usize::from(u >= downtown + station)];
            (lat, lon, STATION_RADIUS_M)
        } else {
            let (s, n, w, e) = BBOX;
            return GeoPoint { lat: rng.gen_range(s..n), lon: rng.gen_range(w..e) };
        };
        // uniform in the disk
        let r = radius * rng.gen::<f64>().sqrt();
        GeoPoint { lat, lon }.destination(rng.gen_range(0.0..360.0), r)
    }

    /// Writes the export in the default [`Schema`] layout with `MM/DD/YYYY` dates.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let schema = Schema::default();
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([&schema.date, &schema.code, &schema.description, &schema.lat, &schema.lon])?;
        for r in self.generate() {
            let date = r.date.format("%m/%d/%Y 12:00:00 AM").to_string();
            let (lat, lon) = match r.location {
                Some(p) => (format!("{:.6}", p.lat), format!("{:.6}", p.lon)),
                None => (String::new(), String::new()),
            };
            wtr.write_record([date.as_str(), r.code, r.description, &lat, &lon])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}
