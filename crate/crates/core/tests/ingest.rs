use std::collections::BTreeSet;
use std::path::Path;

use proptest::prelude::*;
use trendlens::ingest::*;

fn shipped_map() -> CategoryMap {
    CategoryMap::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("config/category_map.txt")).unwrap()
}

#[test]
fn shipped_map_reproduces_the_category_table() {
    let m = shipped_map();
    assert_eq!(m.min_count_threshold, 450);
    let reclassified = ["larceny", "fraud", "narcotics possession", "forgery", "receiving/possessing stolen property"];
    let other = [
        "assault",
        "public intoxication",
        "vandalism",
        "burglary",
        "grand theft auto",
        "contempt of court",
        "DUI",
        "robbery",
        "sex offenses",
        "narcotic sale",
    ];
    for c in reclassified {
        assert_eq!(m.classify(c), Classification::Reclassified, "{c}");
    }
    for c in other {
        assert_eq!(m.classify(c), Classification::NonReclassified, "{c}");
    }
    let classified: BTreeSet<&str> = m
        .classification
        .iter()
        .filter(|(_, c)| **c != Classification::Excluded)
        .map(|(k, _)| k.as_str())
        .collect();
    assert_eq!(classified, reclassified.iter().chain(&other).copied().collect());
    for c in ["arson", "embezzlement", "blackmail", "homicide", "misappropriation", UNMAPPED] {
        assert_eq!(m.classify(c), Classification::Excluded, "{c}");
    }
}

#[test]
fn shipped_map_collapses_representative_descriptions() {
    let m = shipped_map();
    let cases = [
        ("aggravated assault with knife", "assault"),
        ("Aggravated Assault with a Firearm", "assault"),
        ("general aggravated assault", "assault"),
        ("aggravated assault with hands", "assault"),
        ("aggravated assault with other weapon", "assault"),
        ("larceny", "larceny"),
        ("Grand Theft Auto", "grand theft auto"),
        ("Grand Theft - from building", "larceny"),
        ("Narcotic Sale - cocaine", "narcotic sale"),
        ("Narcotics Possession - heroin", "narcotics possession"),
        ("Receiving Stolen Property", "receiving/possessing stolen property"),
        ("Identity theft", "fraud"),
        ("Misappropriation of property", "misappropriation"),
        ("zzz-unknown", UNMAPPED),
    ];
    for (raw, want) in cases {
        assert_eq!(collapse_category(raw, &m), want, "{raw}");
    }
}

#[test]
fn threshold_boundary_is_strict() {
    let m = CategoryMap::parse("version = 1\n[collapse]\ntheft = larceny\nsale = narcotic sale\n[classes]\nlarceny = reclassified\nnarcotic sale = non-reclassified\n").unwrap();
    let mut csv = String::from("date,ucr_code,description,latitude,longitude\n");
    for i in 0..449 {
        csv.push_str(&format!("2010-01-{:02},1,theft,34,-118\n", i % 28 + 1));
    }
    for i in 0..450 {
        csv.push_str(&format!("2011-03-{:02},2,sale,34,-118\n", i % 28 + 1));
    }
    let out = ingest(csv.as_bytes(), &Schema::default(), &m, &DateRange::study_period()).unwrap();
    assert_eq!(out.report.dropped_below_threshold, vec![CategoryCount { category: "larceny".into(), count: 449 }]);
    assert_eq!(out.report.class_total(Classification::NonReclassified), 450);
    assert_eq!(out.report.accepted, 450);
}

#[test]
fn report_is_deterministic() {
    let m = shipped_map();
    let csv = "date,ucr_code,description,latitude,longitude\n\
               01/05/2014 12:00:00 AM,600,Petty Theft,34.01,-118.49\n\
               2014-01-06,100,Arson,34.01,-118.49\n\
               2014-01-07,400,Assault,34.01,-118.49\n";
    let json = || {
        let out = ingest(csv.as_bytes(), &Schema::default(), &m, &DateRange::study_period()).unwrap();
        serde_json::to_string(&out.report).unwrap()
    };
    assert_eq!(json(), json());
}

fn arb_rows() -> impl Strategy<Value = Vec<(u32, u32, usize, bool)>> {
    // (year offset, day of year, description index, corrupt?)
    prop::collection::vec((0u32..16, 1u32..365, 0usize..6, prop::bool::weighted(0.1)), 0..200)
}

const DESCRIPTIONS: [&str; 6] = ["petty theft", "assault", "arson", "narcotic sale", "forgery", "qqq"];

fn rows_to_csv(rows: &[(u32, u32, usize, bool)]) -> String {
    let mut s = String::from("date,ucr_code,description,latitude,longitude\n");
    for &(y, doy, d, corrupt) in rows {
        let date = chrono::NaiveDate::from_yo_opt(2005 + y as i32, doy).unwrap();
        let lat = if corrupt { "" } else { "34.02" };
        s.push_str(&format!("{date},1,{},{lat},-118.48\n", DESCRIPTIONS[d]));
    }
    s
}

proptest! {
    #[test]
    fn classes_partition_records_and_rows_are_accounted(rows in arb_rows(), threshold in 0u64..30) {
        let m = shipped_map().with_threshold(threshold);
        let out = ingest(rows_to_csv(&rows).as_bytes(), &Schema::default(), &m, &DateRange::study_period()).unwrap();
        let r = &out.report;
        prop_assert_eq!(r.rows_read, rows.len() as u64);
        prop_assert_eq!(r.accepted + r.rejected_corrupt + r.dropped_total(), r.rows_read);
        let by_class = |c| out.records.iter().filter(|x| x.class == c).count() as u64;
        prop_assert_eq!(
            by_class(Classification::Reclassified) + by_class(Classification::NonReclassified) + by_class(Classification::Excluded),
            out.records.len() as u64
        );
        prop_assert_eq!(by_class(Classification::Reclassified) + by_class(Classification::NonReclassified), r.accepted);
    }

    #[test]
    fn raising_threshold_never_grows_accepted_set(rows in arb_rows(), lo in 0u64..30, extra in 0u64..30) {
        let csv = rows_to_csv(&rows);
        let run = |t| ingest(csv.as_bytes(), &Schema::default(), &shipped_map().with_threshold(t), &DateRange::study_period()).unwrap();
        let (a, b) = (run(lo), run(lo + extra));
        for (x, y) in a.records.iter().zip(&b.records) {
            if y.class != Classification::Excluded {
                prop_assert_eq!(x.class, y.class);
            }
        }
        prop_assert!(b.report.accepted <= a.report.accepted);
    }
}
