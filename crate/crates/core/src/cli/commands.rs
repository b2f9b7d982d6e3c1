//! Subcommand implementations. Each writes its artifacts under the output
//! directory; numerical failures in one class do not stop the others.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{hex, AnalysisConfig};
use super::output::Output;
use super::svg::{self, Bars, Line, Marker, Panel};
use super::CliError;
use crate::changepoint::detect;
use crate::geo::{load_stations, within_radius, NeighborhoodSet};
use crate::ingest::{aggregate_monthly, ingest_file, read_records, write_records, CategoryMap, ClassFilter, IncidentRecord, IngestError};
use crate::inference::{welch_test, Tail, WelchResult, WelchSummary};
use crate::segreg::{breakpoint_months, fit_segmented, stability_probe};
use crate::series::{slope, split, summarize, MonthlySeries, SeriesError, Summary};
use crate::stl::{stl_decompose, Decomposition};

/// Monthly means below this in both epochs make a station row "N/A".
pub const MIN_STATION_MEAN: f64 = 1.5;
pub const HISTOGRAM_BIN: f64 = 10.0;

const RECORDS: &str = "records.csv";
const RECORDS_KEY: &str = "records.key";
const ANALYSED: [ClassFilter; 2] = [ClassFilter::Reclassified, ClassFilter::NonReclassified];

pub struct Context {
    pub cfg: AnalysisConfig,
    pub out: Output,
    /// Failures that did not stop the run; any entry means exit code 4.
    pub numerical_failures: Vec<String>,
}

impl Context {
    pub fn new(cfg: AnalysisConfig) -> Result<Self, CliError> {
        let out = Output::new(&cfg.out)?;
        Ok(Self { cfg, out, numerical_failures: Vec::new() })
    }

    fn fail(&mut self, what: String) {
        self.numerical_failures.push(what);
    }

    fn series(&self, records: &[&IncidentRecord], filter: ClassFilter, label: &str) -> Result<MonthlySeries, CliError> {
        aggregate_monthly(records.iter().copied(), filter, self.cfg.window.months(), label).map_err(data)
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn ingest_err(e: IngestError) -> CliError {
    if e.is_config() {
        CliError::Config(e.to_string())
    } else {
        CliError::Data(e.to_string())
    }
}

fn slug(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' }).collect();
    s.split('-').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("-")
}

fn series_csv(s: &MonthlySeries) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    s.write_csv(&mut buf).map_err(data)?;
    Ok(buf)
}

/// Identifies the inputs the cached record file was built from.
fn records_key(cfg: &AnalysisConfig, input: &Path, map: &Path) -> Result<String, CliError> {
    let mut h = Sha256::new();
    for p in [input, map] {
        h.update(std::fs::read(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?);
        h.update([0u8]);
    }
    h.update(serde_json::to_vec(&(&cfg.schema, &cfg.window)).expect("serializable"));
    Ok(hex(&h.finalize()))
}

pub fn cmd_ingest(ctx: &mut Context) -> Result<Vec<IncidentRecord>, CliError> {
    let cfg = &ctx.cfg;
    let input = cfg.require_input()?;
    let map_path = cfg.require_category_map()?;
    let map = CategoryMap::load(map_path).map_err(ingest_err)?;
    let ingested = ingest_file(input, &cfg.schema, &map, &cfg.window).map_err(ingest_err)?;
    let out = &ctx.out;
    out.write_json("ingest_report.json", &ingested.report)?;
    let mut buf = Vec::new();
    write_records(&ingested.records, &mut buf).map_err(ingest_err)?;
    out.write(RECORDS, &buf)?;
    out.write(RECORDS_KEY, format!("{}\n", records_key(cfg, input, map_path)?).as_bytes())?;
    let refs: Vec<&IncidentRecord> = ingested.records.iter().collect();
    for filter in ClassFilter::EACH {
        let s = ctx.series(&refs, filter, filter.as_str())?;
        out.write(&format!("series/{}.csv", filter.as_str()), &series_csv(&s)?)?;
    }
    let r = &ingested.report;
    println!(
        "ingest: {} rows, {} accepted, {} corrupt, {} dropped",
        r.rows_read,
        r.accepted,
        r.rejected_corrupt,
        r.dropped_total()
    );
    Ok(ingested.records)
}

/// Records from the cached normalized file when it matches the current
/// inputs, otherwise a fresh ingest.
pub fn load_records(ctx: &mut Context) -> Result<Vec<IncidentRecord>, CliError> {
    let input = ctx.cfg.require_input()?;
    let map = ctx.cfg.require_category_map()?;
    let key = records_key(&ctx.cfg, input, map)?;
    let cached = std::fs::read_to_string(ctx.out.path(RECORDS_KEY)).ok();
    if cached.as_deref().map(str::trim) == Some(key.as_str()) {
        if let Ok(f) = std::fs::File::open(ctx.out.path(RECORDS)) {
            if let Ok(records) = read_records(f) {
                return Ok(records);
            }
        }
    }
    cmd_ingest(ctx)
}

fn accepted(records: &[IncidentRecord]) -> Vec<&IncidentRecord> {
    records.iter().filter(|r| ClassFilter::All.matches(r.class)).collect()
}

#[derive(Debug, Clone)]
struct WelchRow {
    scope: String,
    class: ClassFilter,
    comparison: &'static str,
    before: Option<Summary>,
    after: Option<Summary>,
    result: Option<WelchResult>,
    note: String,
}

const WELCH_HEADER: [&str; 16] = [
    "scope",
    "class",
    "comparison",
    "n_before",
    "mean_before",
    "sd_before",
    "n_after",
    "mean_after",
    "sd_after",
    "t",
    "t_critical",
    "dof",
    "direction",
    "significant",
    "percent_change",
    "note",
];

impl WelchRow {
    fn csv(&self) -> Vec<String> {
        let f2 = |v: Option<f64>| v.map(|v| format!("{v:.2}")).unwrap_or_default();
        let r = self.result.as_ref();
        let na = !self.note.is_empty();
        vec![
            self.scope.clone(),
            self.class.as_str().to_string(),
            self.comparison.to_string(),
            self.before.map(|s| s.n.to_string()).unwrap_or_default(),
            f2(self.before.map(|s| s.mean)),
            f2(self.before.map(|s| s.sd)),
            self.after.map(|s| s.n.to_string()).unwrap_or_default(),
            f2(self.after.map(|s| s.mean)),
            f2(self.after.map(|s| s.sd)),
            f2(r.map(|r| r.t_statistic.abs())),
            f2(r.map(|r| r.critical)),
            r.map(|r| format!("{:.1}", r.dof)).unwrap_or_default(),
            r.map(|r| if r.tail == Tail::Greater { "up" } else { "down" }.to_string()).unwrap_or_default(),
            if na { "N/A" } else if r.is_some_and(|r| r.significant) { "yes" } else { "no" }.to_string(),
            r.and_then(|r| r.percent_change).map(|p| format!("{p:+.1}")).unwrap_or_default(),
            self.note.clone(),
        ]
    }
}

/// One-sided Welch test in the observed direction. With `sparse_rule`, rows
/// whose epoch means are both below [`MIN_STATION_MEAN`] are reported N/A.
fn compare(scope: &str, class: ClassFilter, comparison: &'static str, before: &[f64], after: &[f64], alpha: f64, sparse_rule: bool) -> WelchRow {
    let (b, a) = (summarize(before).ok(), summarize(after).ok());
    let mut row = WelchRow { scope: scope.to_string(), class, comparison, before: b, after: a, result: None, note: String::new() };
    let (Some(b), Some(a)) = (b, a) else {
        row.note = "N/A: fewer than two months in an epoch".into();
        return row;
    };
    let (Ok(wb), Ok(wa)) = (WelchSummary::try_from(b), WelchSummary::try_from(a)) else {
        row.note = "N/A: invalid summary".into();
        return row;
    };
    match welch_test(&wb, &wa, alpha, Tail::observed(&wb, &wa)) {
        Ok(r) => row.result = Some(r),
        Err(_) => {
            row.note = "N/A: no variation".into();
            return row;
        }
    }
    if sparse_rule && b.mean < MIN_STATION_MEAN && a.mean < MIN_STATION_MEAN {
        row.note = "N/A: insufficient data".into();
    }
    row
}

fn write_welch(out: &Output, rel: &str, rows: &[WelchRow]) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = rows.iter().map(WelchRow::csv).collect();
    out.write_csv(rel, &WELCH_HEADER, &rows)
}

/// Bins of width [`HISTOGRAM_BIN`] aligned to multiples of it: (lower edge, count).
pub fn histogram(values: &[f64]) -> Vec<(f64, u64)> {
    let Some(lo) = values.iter().copied().reduce(f64::min) else { return Vec::new() };
    let hi = values.iter().copied().fold(lo, f64::max);
    let first = (lo / HISTOGRAM_BIN).floor() as i64;
    let last = (hi / HISTOGRAM_BIN).floor() as i64;
    let mut counts = vec![0u64; (last - first + 1) as usize];
    for v in values {
        counts[((v / HISTOGRAM_BIN).floor() as i64 - first) as usize] += 1;
    }
    counts.into_iter().enumerate().map(|(i, c)| ((first + i as i64) as f64 * HISTOGRAM_BIN, c)).collect()
}

fn series_panel(title: &str, s: &MonthlySeries, markers: Vec<Marker>) -> Panel {
    let mut p = Panel::new(title);
    p.lines.push(Line::indexed("monthly count", s.values().iter().map(|&v| Some(v)), 0.0, svg::BLUE));
    p.vlines = markers;
    p.x_ticks = svg::year_ticks(s.start, s.len(), 2);
    p
}

fn month_marker(s: &MonthlySeries, month: crate::series::YearMonth, label: &str, color: &'static str) -> Option<Marker> {
    s.index_of(month).map(|i| Marker { at: i as f64, label: label.to_string(), color })
}

pub fn cmd_citywide(ctx: &mut Context, records: &[IncidentRecord]) -> Result<(), CliError> {
    let refs = accepted(records);
    let mut rows = Vec::new();
    let mut hist_rows = Vec::new();
    for filter in ClassFilter::EACH {
        let s = ctx.series(&refs, filter, filter.as_str())?;
        let parts = split(&s, &ctx.cfg.policy_split()).map_err(|e| CliError::Config(e.to_string()))?;
        rows.push(compare("citywide", filter, "policy", parts[0].values(), parts[1].values(), ctx.cfg.welch_alpha, false));
        let mut panel = Panel::new(format!("{} incidents per month, before and after the policy change", filter.as_str()));
        for (epoch, part, color) in [("before", &parts[0], svg::GRAY), ("after", &parts[1], svg::RED)] {
            let h = histogram(part.values());
            for &(lo, n) in &h {
                hist_rows.push(vec![filter.as_str().into(), epoch.into(), format!("{lo:.0}"), format!("{:.0}", lo + HISTOGRAM_BIN), n.to_string()]);
            }
            panel.bars.push(Bars { label: epoch.into(), bins: h.iter().map(|&(lo, n)| (lo, n as f64)).collect(), width: HISTOGRAM_BIN, color });
        }
        ctx.out.write(&format!("citywide/histogram_{}.svg", filter.as_str()), svg::render(&[panel]).as_bytes())?;
        let marker = month_marker(&s, ctx.cfg.epochs.policy, "policy", svg::RED).into_iter().collect();
        let title = format!("{} incidents per month", filter.as_str());
        ctx.out.write(&format!("citywide/series_{}.svg", filter.as_str()), svg::render(&[series_panel(&title, &s, marker)]).as_bytes())?;
    }
    ctx.out.write_csv("citywide/histograms.csv", &["class", "epoch", "bin_lo", "bin_hi", "count"], &hist_rows)?;
    write_welch(&ctx.out, "citywide/welch.csv", &rows)?;
    for r in &rows {
        println!("citywide {:<16} {}", r.class.as_str(), r.csv()[9..15].join(" "));
    }
    Ok(())
}

fn stl_panels(title: &str, d: &Decomposition, observed: &MonthlySeries) -> Vec<Panel> {
    let ticks = svg::year_ticks(observed.start, observed.len(), 2);
    [("observed", observed), ("trend", &d.trend), ("seasonal", &d.seasonal), ("remainder", &d.remainder)]
        .into_iter()
        .enumerate()
        .map(|(i, (name, s))| {
            let mut p = Panel::new(if i == 0 { format!("{title}: {name}") } else { name.to_string() });
            p.lines.push(Line::indexed("", s.values().iter().map(|&v| Some(v)), 0.0, svg::BLUE));
            p.x_ticks = ticks.clone();
            p
        })
        .collect()
}

fn write_stl(out: &Output, stem: &str, title: &str, d: &Decomposition, observed: &MonthlySeries) -> Result<(), CliError> {
    let mut buf = Vec::new();
    d.write_csv(&mut buf).map_err(data)?;
    out.write(&format!("{stem}.csv"), &buf)?;
    out.write(&format!("{stem}.svg"), svg::render(&stl_panels(title, d, observed)).as_bytes())
}

pub fn cmd_neighborhoods(ctx: &mut Context, records: &[IncidentRecord]) -> Result<(), CliError> {
    let path = ctx.cfg.geometry.clone().ok_or_else(|| CliError::Config("--geometry is required for neighborhoods".into()))?;
    let hoods = NeighborhoodSet::load(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let refs = accepted(records);
    let mut groups: Vec<Vec<&IncidentRecord>> = vec![Vec::new(); hoods.len()];
    let mut unassigned = 0u64;
    let names = hoods.names();
    for r in &refs {
        match hoods.assign(*r).and_then(|n| names.iter().position(|m| *m == n)) {
            Some(i) => groups[i].push(r),
            None => unassigned += 1,
        }
    }
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for (name, group) in names.iter().zip(&groups) {
        counts.push(vec![name.to_string(), group.len().to_string()]);
        for filter in ClassFilter::EACH {
            let s = ctx.series(group, filter, filter.as_str())?;
            let parts = split(&s, &ctx.cfg.policy_split()).map_err(|e| CliError::Config(e.to_string()))?;
            let mut row = compare(name, filter, "policy", parts[0].values(), parts[1].values(), ctx.cfg.welch_alpha, false);
            if group.is_empty() {
                row.note = "N/A: no records".into();
            }
            rows.push(row);
            if filter == ClassFilter::All {
                continue;
            }
            match stl_decompose(&s, &ctx.cfg.stl) {
                Ok(d) => write_stl(&ctx.out, &format!("neighborhoods/{}/stl_{}", slug(name), filter.as_str()), &format!("{name}, {}", filter.as_str()), &d, &s)?,
                Err(e) => ctx.fail(format!("neighborhood {name} {}: stl: {e}", filter.as_str())),
            }
        }
    }
    counts.push(vec!["(unassigned)".into(), unassigned.to_string()]);
    ctx.out.write_csv("neighborhoods/record_counts.csv", &["neighborhood", "records"], &counts)?;
    write_welch(&ctx.out, "neighborhoods/welch.csv", &rows)?;
    println!("neighborhoods: {} areas, {} records unassigned", hoods.len(), unassigned);
    Ok(())
}

pub fn cmd_stations(ctx: &mut Context, records: &[IncidentRecord]) -> Result<(), CliError> {
    let path = ctx.cfg.stations.clone().ok_or_else(|| CliError::Config("--stations is required for stations".into()))?;
    let stations = load_stations(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let accepted: Vec<IncidentRecord> = records.iter().filter(|r| ClassFilter::All.matches(r.class)).cloned().collect();
    let alpha = ctx.cfg.welch_alpha;
    let mut rows = Vec::new();
    for st in &stations {
        let near = within_radius(&accepted, st);
        let mut panels = Vec::new();
        for filter in ClassFilter::EACH {
            let s = ctx.series(&near, filter, filter.as_str())?;
            let e = split(&s, &ctx.cfg.three_epochs()).map_err(|e| CliError::Config(e.to_string()))?;
            let before_rail: Vec<f64> = e[0].values().iter().chain(e[1].values()).copied().collect();
            rows.push(compare(&st.name, filter, "rail", &before_rail, e[2].values(), alpha, true));
            rows.push(compare(&st.name, filter, "policy-pre-rail", e[0].values(), e[1].values(), alpha, true));
            rows.push(compare(&st.name, filter, "rail-post-policy", e[1].values(), e[2].values(), alpha, true));
            ctx.out.write(&format!("stations/{}/{}.csv", slug(&st.name), filter.as_str()), &series_csv(&s)?)?;
            let markers = [
                month_marker(&s, ctx.cfg.epochs.policy, "policy", svg::RED),
                month_marker(&s, ctx.cfg.epochs.rail, "rail", svg::BLACK),
            ];
            panels.push(series_panel(&format!("{}, {}", st.name, filter.as_str()), &s, markers.into_iter().flatten().collect()));
        }
        ctx.out.write(&format!("stations/{}/series.svg", slug(&st.name)), svg::render(&panels).as_bytes())?;
    }
    write_welch(&ctx.out, "stations/welch.csv", &rows)?;
    println!("stations: {} stations, {} rows", stations.len(), rows.len());
    Ok(())
}

#[derive(Serialize)]
struct ChangePointOutput<'a> {
    class: &'a str,
    trend_window: usize,
    report: &'a crate::changepoint::ChangePointReport,
}

pub fn cmd_changepoint(ctx: &mut Context, records: &[IncidentRecord]) -> Result<(), CliError> {
    let refs = accepted(records);
    let trend_window = ctx.cfg.stl.trend_window().map_err(|e| CliError::Config(e.to_string()))?;
    for filter in ANALYSED {
        let name = filter.as_str();
        let s = ctx.series(&refs, filter, name)?;
        let d = match stl_decompose(&s, &ctx.cfg.stl) {
            Ok(d) => d,
            Err(e) => {
                ctx.fail(format!("changepoint {name}: stl: {e}"));
                continue;
            }
        };
        write_stl(&ctx.out, &format!("stl/citywide_{name}"), &format!("citywide {name}"), &d, &s)?;
        let m = slope(&d.trend).map_err(|e: SeriesError| data(e))?;
        let report = match detect(&m, &ctx.cfg.mosum) {
            Ok(r) => r,
            Err(e) => {
                ctx.fail(format!("changepoint {name}: mosum: {e}"));
                continue;
            }
        };
        ctx.out.write_json(&format!("changepoint/{name}.json"), &ChangePointOutput { class: name, trend_window, report: &report })?;
        let trace = report.trace_values();
        let csv_rows: Vec<Vec<String>> = (0..m.len())
            .map(|i| {
                let stat = match trace[i] {
                    Some(v) if v.is_finite() => format!("{v:.6}"),
                    Some(_) => "inf".into(),
                    None => String::new(),
                };
                vec![m.month_at(i).to_string(), format!("{:.6}", m.values[i]), stat]
            })
            .collect();
        ctx.out.write_csv(&format!("changepoint/{name}_trace.csv"), &["month", "slope", "mosum"], &csv_rows)?;

        let ticks = svg::year_ticks(m.start, m.len(), 2);
        let cps: Vec<Marker> = report
            .change_points
            .iter()
            .map(|c| Marker { at: c.index as f64, label: format!("change {}", c.month), color: svg::RED })
            .collect();
        let mut top = Panel::new(format!("{name}: trend slope M(t), trend window {trend_window}"));
        top.lines.push(Line::indexed("slope", m.values.iter().map(|&v| Some(v)), 0.0, svg::BLUE));
        top.vlines = cps.clone();
        top.x_ticks = ticks.clone();
        let mut bottom = Panel::new(format!("MOSUM statistic, G = {}", ctx.cfg.mosum.bandwidth));
        bottom.lines.push(Line::indexed("statistic", trace.iter().copied(), 0.0, svg::BLUE));
        bottom.hlines.push(Marker { at: report.threshold, label: "threshold".into(), color: svg::BLACK });
        bottom.vlines = cps;
        bottom.x_ticks = ticks;
        ctx.out.write(&format!("changepoint/{name}.svg"), svg::render(&[top, bottom]).as_bytes())?;
        let months: Vec<String> = report.change_points.iter().map(|c| format!("{} [{}, {}]", c.month, c.interval_months.0, c.interval_months.1)).collect();
        println!("changepoint {name:<16} {}", if months.is_empty() { "none".into() } else { months.join(", ") });
    }
    Ok(())
}

#[derive(Serialize)]
struct SegregOutput<'a> {
    class: &'a str,
    target: &'a str,
    fit: &'a crate::segreg::SegmentedFit,
    breakpoints: Vec<crate::segreg::MonthlyBreakpoint>,
    segment_slopes: Vec<f64>,
    stability: Option<crate::segreg::StabilityReport>,
}

pub fn cmd_segreg(ctx: &mut Context, records: &[IncidentRecord]) -> Result<(), CliError> {
    let refs = accepted(records);
    for filter in ANALYSED {
        let name = filter.as_str();
        let observed = ctx.series(&refs, filter, name)?;
        let trend = match stl_decompose(&observed, &ctx.cfg.stl) {
            Ok(d) => Some(d.trend),
            Err(e) => {
                ctx.fail(format!("segreg {name}: stl: {e}"));
                None
            }
        };
        let targets = [("observed", Some(observed.clone())), ("trend", trend)];
        for (target, series) in targets {
            let Some(series) = series else { continue };
            let rel = format!("segreg/{name}_{target}");
            let fit = match fit_segmented(&series, &ctx.cfg.segreg) {
                Ok(f) => f,
                Err(e) => {
                    ctx.out.write_json(&format!("{rel}.json"), &serde_json::json!({ "class": name, "target": target, "error": e.to_string() }))?;
                    ctx.fail(format!("segreg {name} {target}: {e}"));
                    continue;
                }
            };
            let stability = stability_probe(&series, &ctx.cfg.segreg, ctx.cfg.stability_runs).ok();
            let breakpoints = breakpoint_months(&fit, series.start);
            let output = SegregOutput { class: name, target, fit: &fit, breakpoints: breakpoints.clone(), segment_slopes: fit.segment_slopes(), stability };
            ctx.out.write_json(&format!("{rel}.json"), &output)?;

            let mut p = Panel::new(format!("{name} ({target}) with segmented fit"));
            p.lines.push(Line::indexed(target, series.values().iter().map(|&v| Some(v)), 0.0, svg::GRAY));
            let fitted: Vec<Option<f64>> = (0..series.len()).map(|i| Some(fit.predict(i as f64))).collect();
            p.lines.push(Line::indexed("fit", fitted, 0.0, svg::BLUE));
            p.vlines = breakpoints
                .iter()
                .map(|b| Marker { at: b.position, label: format!("breakpoint {}", b.month), color: svg::RED })
                .collect();
            p.x_ticks = svg::year_ticks(series.start, series.len(), 2);
            ctx.out.write(&format!("{rel}.svg"), svg::render(&[p]).as_bytes())?;
            let months: Vec<String> = breakpoints.iter().map(|b| b.month.to_string()).collect();
            println!("segreg {name:<16} {target:<8} breakpoints {}", months.join(", "));
        }
    }
    Ok(())
}
