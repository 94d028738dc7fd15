//! Report files. Trade-off CSV columns:
//! `knob_name,knob_value,defender_acc,clone_acc,attack,strategy,seed` (an
//! empty seed marks a mean over seeds). CDF CSV columns:
//! `value,cum_fraction,label`. Charts are SVG with a fixed 640x480 viewbox.
//! Every writer is byte-deterministic for identical inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CdfSeries, TradeoffPoint};
use crate::error::{Error, Result};

pub const TRADEOFF_HEADER: &str = "knob_name,knob_value,defender_acc,clone_acc,attack,strategy,seed";
pub const CDF_HEADER: &str = "value,cum_fraction,label";

pub fn tradeoff_csv(points: &[TradeoffPoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if points.is_empty() {
        w.write_record(TRADEOFF_HEADER.split(','))?;
    }
    for p in points {
        w.serialize(p)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn parse_tradeoff_csv(bytes: &[u8]) -> Result<Vec<TradeoffPoint>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != TRADEOFF_HEADER {
        return Err(Error::Format { offset: 0, message: format!("unexpected trade-off header {header:?}") });
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Serialize, Deserialize)]
struct CdfRow {
    value: f64,
    cum_fraction: f64,
    label: String,
}

pub fn cdf_csv(series: &[CdfSeries]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if series.is_empty() {
        w.write_record(CDF_HEADER.split(','))?;
    }
    for s in series {
        for (&value, &cum_fraction) in s.values.iter().zip(&s.fractions) {
            w.serialize(CdfRow { value, cum_fraction, label: s.label.clone() })?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Series in first-appearance order of their labels.
pub fn parse_cdf_csv(bytes: &[u8]) -> Result<Vec<CdfSeries>> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut out: Vec<CdfSeries> = Vec::new();
    for row in r.deserialize::<CdfRow>() {
        let row = row?;
        match out.iter_mut().find(|s| s.label == row.label) {
            Some(s) => {
                s.values.push(row.value);
                s.fractions.push(row.cum_fraction);
            }
            None => {
                out.push(CdfSeries { label: row.label, values: vec![row.value], fractions: vec![row.cum_fraction] })
            }
        }
    }
    Ok(out)
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// Line chart on the unit square with one polyline per series.
fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const L: f64 = 70.0;
    const R: f64 = 170.0;
    const T: f64 = 40.0;
    const B: f64 = 60.0;
    let px = |x: f64| L + x.clamp(0.0, 1.0) * (W - L - R);
    let py = |y: f64| H - B - y.clamp(0.0, 1.0) * (H - T - B);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" width="{W}" height="{H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#ddd"/>"##,
            px(0.0),
            py(v),
            px(1.0),
            py(v)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{v:.1}</text>"#,
            L - 6.0,
            py(v) + 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{v:.1}</text>"#,
            px(v),
            H - B + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        px(0.0),
        py(1.0),
        px(1.0) - px(0.0),
        py(0.0) - py(1.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
        px(0.5),
        H - 20.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        py(0.5),
        py(0.5),
        escape(y_label)
    );
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ =
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" "));
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = T + 20.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            W - R + 12.0,
            W - R + 32.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, W - R + 38.0, ly + 4.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Defender accuracy (x) against clone accuracy (y), one line per knob,
/// attack and strategy, each in knob order.
pub fn tradeoff_svg(title: &str, points: &[TradeoffPoint]) -> String {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for p in points {
        let label = format!("{} {} {}", p.knob_name.as_str(), p.attack.as_str(), p.strategy.as_str());
        let xy = (p.defender_accuracy, p.clone_accuracy);
        match series.iter_mut().find(|(l, _)| *l == label) {
            Some((_, v)) => v.push(xy),
            None => series.push((label, vec![xy])),
        }
    }
    line_chart(title, "defender accuracy", "clone accuracy", &series)
}

pub fn cdf_svg(title: &str, x_label: &str, series: &[CdfSeries]) -> String {
    let lines: Vec<(String, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            // a step function: flat until each sample, then a jump
            let mut pts = vec![(0.0, 0.0)];
            let mut prev = 0.0;
            for (&v, &f) in s.values.iter().zip(&s.fractions) {
                pts.push((v, prev));
                pts.push((v, f));
                prev = f;
            }
            pts.push((1.0, prev));
            (s.label.clone(), pts)
        })
        .collect();
    line_chart(title, x_label, "cumulative fraction", &lines)
}

fn write(path: PathBuf, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, bytes)?;
    written.push(path);
    Ok(())
}

/// Writes `<name>.csv` and `<name>.svg` for the trade-off points and, when
/// given, `<name>_cdf.csv` and `<name>_cdf.svg`. Returns the written paths.
pub fn emit_report(name: &str, points: &[TradeoffPoint], cdfs: &[CdfSeries], dir: &Path) -> Result<Vec<PathBuf>> {
    if points.is_empty() && cdfs.is_empty() {
        return Err(Error::config("nothing to report"));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if !points.is_empty() {
        write(dir.join(format!("{name}.csv")), &tradeoff_csv(points)?, &mut written)?;
        write(dir.join(format!("{name}.svg")), tradeoff_svg(name, points).as_bytes(), &mut written)?;
    }
    if !cdfs.is_empty() {
        write(dir.join(format!("{name}_cdf.csv")), &cdf_csv(cdfs)?, &mut written)?;
        write(dir.join(format!("{name}_cdf.svg")), cdf_svg(name, "value", cdfs).as_bytes(), &mut written)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{AttackKind, LabelStrategy};
    use crate::eval::Knob;

    fn points() -> Vec<TradeoffPoint> {
        vec![
            TradeoffPoint {
                knob_name: Knob::Tau,
                knob_value: 0.3,
                defender_accuracy: 0.998,
                clone_accuracy: 0.1,
                attack: AttackKind::Knockoff,
                strategy: LabelStrategy::Soft,
                seed: Some(7),
            },
            TradeoffPoint {
                knob_name: Knob::AlphaPp,
                knob_value: 0.1 + 0.2,
                defender_accuracy: 1.0 / 3.0,
                clone_accuracy: 0.0,
                attack: AttackKind::Jbda,
                strategy: LabelStrategy::Argmax,
                seed: None,
            },
        ]
    }

    #[test]
    fn tradeoff_csv_round_trips_exactly() {
        let bytes = tradeoff_csv(&points()).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), TRADEOFF_HEADER);
        assert!(text.contains("tau,0.3,0.998,0.1,knockoff,soft,7"));
        assert!(text.contains(",jbda,argmax,\n"));
        assert_eq!(parse_tradeoff_csv(&bytes).unwrap(), points());
    }

    #[test]
    fn cdf_csv_round_trips() {
        let s = vec![
            CdfSeries::from_samples("benign", vec![0.9, 0.5, 0.7]).unwrap(),
            CdfSeries::from_samples("surrogate", vec![0.2]).unwrap(),
        ];
        let bytes = cdf_csv(&s).unwrap();
        assert!(bytes.starts_with(format!("{CDF_HEADER}\n").as_bytes()));
        assert_eq!(parse_cdf_csv(&bytes).unwrap(), s);
    }

    #[test]
    fn emit_is_deterministic_and_guards_empty_input() {
        let dir = tempfile::tempdir().unwrap();
        let cdf = [CdfSeries::from_samples("x", vec![0.1, 0.4]).unwrap()];
        let a = emit_report("r", &points(), &cdf, &dir.path().join("a")).unwrap();
        let b = emit_report("r", &points(), &cdf, &dir.path().join("b")).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        assert!(fs::read_to_string(&a[1]).unwrap().contains(r#"viewBox="0 0 640 480""#));
        assert!(matches!(emit_report("r", &[], &[], dir.path()), Err(Error::Config(_))));
    }
}
