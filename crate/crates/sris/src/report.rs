//! CSV results table, run manifest and native SVG charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sris_core::scenario::{RecordStatus, SweepRecord};
use sris_core::sdr::TIGHTNESS_THRESHOLD;

use crate::error::Result;
use crate::io::write_atomic;

pub const CSV_HEADER: &str = "config,alpha_deg,eta,brcs_dbsm,tightness,p_t_min_w,iterations,status,seed";

fn num(v: f64, f: impl Fn(f64) -> String) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        f(v)
    }
}

/// One row per record. Efficiencies and powers carry seven significant digits, BRCS three
/// decimals; a zero efficiency renders the BRCS as `-inf`.
pub fn csv(records: &[SweepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let brcs = if r.eta == 0.0 { f64::NEG_INFINITY } else { r.brcs_dbsm };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.config,
            r.alpha_deg,
            num(r.eta, |v| format!("{v:.6e}")),
            num(brcs, |v| format!("{v:.3}")),
            num(r.tightness, |v| format!("{v:.2e}")),
            num(r.p_t_min, |v| format!("{v:.6e}")),
            r.iterations,
            r.status.as_str(),
            r.seed
        )
        .unwrap();
    }
    out
}

pub fn status_counts(records: &[SweepRecord]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry(r.status.as_str().to_string()).or_insert(0) += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub spec_path: String,
    pub spec_sha256: String,
    pub started_utc: String,
    pub finished_utc: String,
    pub records: usize,
    pub status_counts: BTreeMap<String, usize>,
    pub non_tight: usize,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn count_non_tight(records: &[SweepRecord]) -> usize {
    records
        .iter()
        .filter(|r| r.status == RecordStatus::Optimal && !(r.tightness <= TIGHTNESS_THRESHOLD))
        .count()
}

pub fn now_utc() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default()
}

pub fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = manifest_path(out);
    write_atomic(&path, manifest.to_json().as_bytes())?;
    Ok(path)
}

/// `<stem>_tightness.svg` next to the BRCS chart.
pub fn tightness_chart_path(svg: &Path) -> PathBuf {
    let stem = svg.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    svg.with_file_name(format!("{stem}_tightness.svg"))
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22",
];
const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart with one polyline per series; points with non-finite `y` break nothing and are
/// simply omitted. `y_label` of tick values is produced by `tick_label`.
fn line_chart(
    title: &str,
    y_title: &str,
    series: &[(String, Vec<(f64, f64)>)],
    axes: Axes,
    y_ticks: &[f64],
    tick_label: impl Fn(f64) -> String,
    guide: Option<(f64, &str)>,
) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, escape(title)).unwrap();
    let (x0, x1) = (axes.px(axes.x.0), axes.px(axes.x.1));
    let (y0, y1) = (axes.py(axes.y.0), axes.py(axes.y.1));
    writeln!(s, r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1).unwrap();
    for &t in y_ticks {
        let y = axes.py(t);
        writeln!(s, r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#dddddd"/>"##).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, tick_label(t)).unwrap();
    }
    let mut xs: Vec<f64> = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for &t in &xs {
        let x = axes.px(t);
        writeln!(s, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0).unwrap();
        writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#, y0 + 20.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">receiver angle α (deg)</text>"#, (x0 + x1) / 2.0, HEIGHT - 14.0).unwrap();
    writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_title)
    )
    .unwrap();
    if let Some((g, label)) = guide {
        let y = axes.py(g);
        writeln!(s, r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="black" stroke-dasharray="6 4"/>"#).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x1 - 4.0, y - 4.0, escape(label)).unwrap();
    }
    for (k, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y.clamp(axes.y.0, axes.y.1))))
            .collect();
        writeln!(
            s,
            r#"<polyline data-config="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            escape(name),
            pts.join(" ")
        )
        .unwrap();
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = WIDTH - RIGHT + 16.0;
        writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 24.0).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 30.0, ly + 4.0, escape(name)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn series(records: &[SweepRecord], labels: &[String], value: impl Fn(&SweepRecord) -> Option<f64>) -> Vec<(String, Vec<(f64, f64)>)> {
    labels
        .iter()
        .map(|l| {
            let pts = records
                .iter()
                .filter(|r| &r.config == l)
                .filter_map(|r| value(r).map(|v| (r.alpha_deg, v)))
                .collect();
            (l.clone(), pts)
        })
        .collect()
}

fn x_range(records: &[SweepRecord]) -> (f64, f64) {
    let lo = records.iter().map(|r| r.alpha_deg).fold(f64::INFINITY, f64::min);
    let hi = records.iter().map(|r| r.alpha_deg).fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) }
}

/// BRCS (dBsm) against receiver angle, one polyline per configuration.
pub fn brcs_svg(records: &[SweepRecord], labels: &[String]) -> String {
    let data = series(records, labels, |r| Some(r.brcs_dbsm));
    let finite = data.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)).filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |m, v| (m.0.min(v), m.1.max(v)));
    let (lo, hi) = if lo.is_finite() {
        ((lo / 5.0).floor() * 5.0, ((hi / 5.0).ceil() * 5.0).max((lo / 5.0).floor() * 5.0 + 5.0))
    } else {
        (0.0, 5.0)
    };
    let ticks: Vec<f64> = (0..=((hi - lo) / 5.0) as usize).map(|k| lo + 5.0 * k as f64).collect();
    line_chart(
        "Bistatic radar cross section",
        "BRCS (dBsm)",
        &data,
        Axes { x: x_range(records), y: (lo, hi) },
        &ticks,
        |t| format!("{t}"),
        None,
    )
}

/// Tightness error on a log axis for records that went through the relaxation, with the
/// tightness threshold as a dashed guide.
pub fn tightness_svg(records: &[SweepRecord], labels: &[String]) -> String {
    let floor = -16.0;
    let relaxed: Vec<String> = labels
        .iter()
        .filter(|l| records.iter().any(|r| &r.config == *l && r.status != RecordStatus::Linear))
        .cloned()
        .collect();
    let data = series(records, &relaxed, |r| {
        (r.status != RecordStatus::Linear && r.tightness.is_finite()).then(|| r.tightness.max(1e-16).log10())
    });
    let top = data
        .iter()
        .flat_map(|(_, p)| p.iter().map(|q| q.1))
        .fold(0.0f64, f64::max)
        .ceil()
        .max(0.0);
    let ticks: Vec<f64> = (0..=((top - floor) / 2.0) as usize).map(|k| floor + 2.0 * k as f64).collect();
    line_chart(
        "Relaxation tightness",
        "tightness error ε",
        &data,
        Axes { x: x_range(records), y: (floor, top) },
        &ticks,
        |t| format!("1e{t}"),
        Some((TIGHTNESS_THRESHOLD.log10(), "threshold")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(config: &str, alpha: f64, eta: f64, status: RecordStatus) -> SweepRecord {
        SweepRecord {
            config: config.into(),
            alpha_deg: alpha,
            eta,
            brcs_dbsm: if eta > 0.0 { 10.0 * eta.log10() + 60.0 } else { f64::NEG_INFINITY },
            tightness: 3.2e-11,
            p_t_min: 1.0 / eta,
            iterations: 21,
            status,
            reactances: vec![],
            eta_round_trip: eta,
            seed: 7,
            message: None,
        }
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            rec("full", 10.0, 1.2345678e-5, RecordStatus::Optimal),
            rec("reference_open", 12.5, 0.0, RecordStatus::Linear),
            SweepRecord {
                eta: f64::NAN,
                brcs_dbsm: f64::NAN,
                tightness: f64::NAN,
                p_t_min: f64::NAN,
                ..rec("x", 0.0, 1.0, RecordStatus::NumericalFailure)
            },
        ];
        let text = csv(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "full,10,1.234568e-5,10.915,3.20e-11,8.100001e4,21,optimal,7");
        assert_eq!(lines[2], "reference_open,12.5,0.000000e0,-inf,3.20e-11,inf,21,linear,7");
        assert_eq!(lines[3], "x,0,nan,nan,nan,nan,21,numerical_failure,7");
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn charts_have_one_polyline_per_config() {
        let labels: Vec<String> = ["full", "clusters_2x2", "reference_open"].iter().map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (k, l) in labels.iter().enumerate() {
            for a in [0.0, 10.0, 20.0] {
                let status = if l == "reference_open" { RecordStatus::Linear } else { RecordStatus::Optimal };
                rows.push(rec(l, a, 1e-5 * (k + 1) as f64, status));
            }
        }
        let svg = brcs_svg(&rows, &labels);
        assert_eq!(svg.matches("<polyline").count(), 3);
        for l in &labels {
            assert!(svg.contains(&format!("data-config=\"{l}\"")));
        }
        let t = tightness_svg(&rows, &labels);
        assert_eq!(t.matches("<polyline").count(), 2);
        assert!(!t.contains("reference_open"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn derived_paths() {
        assert_eq!(manifest_path(Path::new("out/r.csv")), PathBuf::from("out/r.csv.manifest.json"));
        assert_eq!(tightness_chart_path(Path::new("out/b.svg")), PathBuf::from("out/b_tightness.svg"));
    }
}
