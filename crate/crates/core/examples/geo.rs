//! Station radius filters and neighborhood assignment using the shipped
//! configuration files.
//!
//! Run with `cargo run --example geo`.

use std::path::Path;

use trendlens::geo::{haversine_m, load_stations, within_radius, NeighborhoodSet};
use trendlens::ingest::{ingest, CategoryMap, DateRange, Schema};
use trendlens::synthetic::SyntheticCity;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("config");
    let stations = load_stations(&config.join("stations.csv"))?;
    let hoods = NeighborhoodSet::load(&config.join("neighborhoods_demo.geojson"))?;
    let map = CategoryMap::load(&config.join("category_map.txt"))?;

    let mut csv = Vec::new();
    SyntheticCity { scale: 0.25, ..SyntheticCity::with_seed(3) }.write_csv(&mut csv)?;
    let data = ingest(csv.as_slice(), &Schema::default(), &map, &DateRange::study_period())?;
    let records: Vec<_> = data.accepted().cloned().collect();

    for s in &stations {
        println!("{:<24} {:>4.0} m  {:>6} incidents", s.name, s.radius_m, within_radius(&records, s).len());
    }
    if let [a, b, ..] = stations.as_slice() {
        println!("{} to {}: {:.0} m", a.name, b.name, haversine_m(a.center, b.center));
    }

    let mut counts: Vec<(String, usize)> = hoods.names().iter().map(|n| (n.to_string(), 0)).collect();
    let mut outside = 0;
    for r in &records {
        match hoods.assign(r) {
            Some(name) => counts.iter_mut().find(|(n, _)| n == name).expect("known name").1 += 1,
            None => outside += 1,
        }
    }
    for (name, n) in counts {
        println!("{name:<24} {n:>6}");
    }
    println!("{:<24} {outside:>6}", "(outside all polygons)");
    Ok(())
}
