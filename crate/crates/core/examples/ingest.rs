//! Ingests a raw incident export and prints the row accounting.
//!
//! Run with `cargo run --example ingest [path.csv]`; without a path a
//! synthetic export is generated in memory.

use std::path::Path;

use trendlens::ingest::{aggregate_monthly, ingest, ingest_file, CategoryMap, ClassFilter, Classification, DateRange, Schema};
use trendlens::synthetic::SyntheticCity;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let map = CategoryMap::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("config/category_map.txt"))?;
    let window = DateRange::study_period();
    let data = match std::env::args().nth(1) {
        Some(path) => ingest_file(Path::new(&path), &Schema::default(), &map, &window)?,
        None => {
            let mut csv = Vec::new();
            SyntheticCity::with_seed(1).write_csv(&mut csv)?;
            ingest(csv.as_slice(), &Schema::default(), &map, &window)?
        }
    };
    let r = &data.report;
    println!("rows {}  accepted {}  corrupt {}  out of window {}", r.rows_read, r.accepted, r.rejected_corrupt, r.dropped_out_of_window);
    for c in &r.dropped_below_threshold {
        println!("below {} threshold: {} ({})", r.min_count_threshold, c.category, c.count);
    }
    for c in &r.dropped_excluded {
        println!("excluded: {} ({})", c.category, c.count);
    }
    for class in [Classification::Reclassified, Classification::NonReclassified] {
        println!("{class}: {}", r.class_total(class));
    }
    for filter in ClassFilter::EACH {
        let s = aggregate_monthly(data.accepted(), filter, window.months(), filter.as_str())?;
        println!("{:<16} {} months, {:.0} incidents", filter.as_str(), s.len(), s.sum());
    }
    Ok(())
}
