use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{estoi, si_snr, spectrogram_ssim};
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Rates at which spectrogram SSIM is reported.
pub const SSIM_RATES: [u32; 4] = [16_000, 24_000, 44_100, 48_000];

/// One evaluated item at one refinement iteration. Metrics that cannot be
/// computed (clip too short) are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub item_id: String,
    pub iteration: usize,
    pub estoi: Option<f64>,
    pub ssim_16k: Option<f64>,
    pub ssim_24k: Option<f64>,
    pub ssim_44k: Option<f64>,
    pub ssim_48k: Option<f64>,
    pub si_snr_db: Option<f64>,
    pub external_mos: Option<f64>,
}

impl MetricRow {
    pub fn empty(item_id: impl Into<String>, iteration: usize) -> Self {
        Self {
            item_id: item_id.into(),
            iteration,
            estoi: None,
            ssim_16k: None,
            ssim_24k: None,
            ssim_44k: None,
            ssim_48k: None,
            si_snr_db: None,
            external_mos: None,
        }
    }

    /// Named metric values in CSV column order.
    pub fn metrics(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("estoi", self.estoi),
            ("ssim_16k", self.ssim_16k),
            ("ssim_24k", self.ssim_24k),
            ("ssim_44k", self.ssim_44k),
            ("ssim_48k", self.ssim_48k),
            ("si_snr_db", self.si_snr_db),
        ]
    }
}

fn optional(r: Result<f64>, what: &str) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::TooShort(msg)) => {
            log::debug!("{what} skipped: {msg}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Computes every metric of `processed` against `reference`. eSTOI is
/// clamped to `[0, 1]` for reporting.
pub fn evaluate_pair(
    reference: &AudioBuffer,
    processed: &AudioBuffer,
    item_id: &str,
    iteration: usize,
) -> Result<MetricRow> {
    let ssim = |rate| optional(spectrogram_ssim(reference, processed, rate), "ssim");
    Ok(MetricRow {
        item_id: item_id.to_string(),
        iteration,
        estoi: optional(estoi(reference, processed), "estoi")?.map(|v| v.clamp(0.0, 1.0)),
        ssim_16k: ssim(SSIM_RATES[0])?,
        ssim_24k: ssim(SSIM_RATES[1])?,
        ssim_44k: ssim(SSIM_RATES[2])?,
        ssim_48k: ssim(SSIM_RATES[3])?,
        si_snr_db: Some(si_snr(reference, processed)?),
        external_mos: None,
    })
}

pub fn write_rows<W: Write>(rows: &[MetricRow], w: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    if rows.is_empty() {
        writer.write_record([
            "item_id", "iteration", "estoi", "ssim_16k", "ssim_24k", "ssim_44k", "ssim_48k",
            "si_snr_db", "external_mos",
        ])?;
    }
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush().map_err(|e| Error::io("csv output", e))
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<MetricRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(Error::from)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

fn stat(values: &[f64]) -> Option<Stat> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(Stat { mean, std: var.sqrt(), count: values.len() })
}

/// Least-squares slope of `y` against `x`; zero for fewer than two points.
fn slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub metrics: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub iterations: Vec<IterationSummary>,
    /// Per-metric slope of the iteration means against iteration index.
    pub slopes: BTreeMap<String, f64>,
}

pub fn summarize(rows: &[MetricRow]) -> Result<TrendSummary> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no metric rows".into()));
    }
    let mut by_iter: BTreeMap<usize, Vec<&MetricRow>> = BTreeMap::new();
    for r in rows {
        by_iter.entry(r.iteration).or_default().push(r);
    }
    let names = rows[0].metrics().map(|(n, _)| n);
    let iterations: Vec<IterationSummary> = by_iter
        .iter()
        .map(|(&iteration, rs)| {
            let metrics = names
                .iter()
                .enumerate()
                .filter_map(|(k, name)| {
                    let vals: Vec<f64> = rs.iter().filter_map(|r| r.metrics()[k].1).collect();
                    stat(&vals).map(|s| (name.to_string(), s))
                })
                .collect();
            IterationSummary { iteration, metrics }
        })
        .collect();
    let slopes = names
        .iter()
        .map(|name| {
            let pts: Vec<(f64, f64)> = iterations
                .iter()
                .filter_map(|it| it.metrics.get(*name).map(|s| (it.iteration as f64, s.mean)))
                .collect();
            (name.to_string(), slope(&pts))
        })
        .collect();
    Ok(TrendSummary { iterations, slopes })
}

fn write_summary_csv(summary: &TrendSummary, path: &Path) -> Result<()> {
    let names = MetricRow::empty("", 0).metrics().map(|(n, _)| n);
    let mut header = vec!["iteration".to_string(), "items".to_string()];
    for n in names {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_std"));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for it in &summary.iterations {
        let items = it.metrics.values().map(|s| s.count).max().unwrap_or(0);
        let mut rec = vec![it.iteration.to_string(), items.to_string()];
        for n in names {
            match it.metrics.get(n) {
                Some(s) => {
                    rec.push(s.mean.to_string());
                    rec.push(s.std.to_string());
                }
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Line plot of each metric's per-iteration mean, each scaled to its own range.
pub fn trend_svg(summary: &TrendSummary) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const PAD: f64 = 40.0;
    const COLOURS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];
    let iters: Vec<usize> = summary.iterations.iter().map(|i| i.iteration).collect();
    let (first, last) = (*iters.first().unwrap_or(&0) as f64, *iters.last().unwrap_or(&0) as f64);
    let x_of = |i: f64| PAD + if last > first { (i - first) / (last - first) } else { 0.5 } * (W - 2.0 * PAD);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
        y = H - PAD,
        x2 = W - PAD
    );
    for &i in &iters {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{i}</text>"#,
            x_of(i as f64),
            H - PAD + 16.0
        );
    }
    let names = MetricRow::empty("", 0).metrics().map(|(n, _)| n);
    for (k, name) in names.iter().enumerate() {
        let pts: Vec<(f64, f64)> = summary
            .iterations
            .iter()
            .filter_map(|it| it.metrics.get(*name).map(|s| (it.iteration as f64, s.mean)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let y_of = |v: f64| {
            let u = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            H - PAD - u * (H - 2.0 * PAD)
        };
        let coords: Vec<String> =
            pts.iter().map(|&(i, v)| format!("{:.1},{:.1}", x_of(i), y_of(v))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{p}"/>"#,
            c = COLOURS[k],
            p = coords.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="11" fill="{c}">{name} [{lo:.3}, {hi:.3}]</text>"#,
            x = PAD,
            y = 14.0 + 13.0 * k as f64,
            c = COLOURS[k]
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub metrics_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub trend_json: PathBuf,
    pub svg: Option<PathBuf>,
}

/// Writes `metrics.csv`, `summary.csv`, `trend.json` and optionally `trend.svg` into `dir`.
pub fn refinement_report(rows: &[MetricRow], dir: &Path, with_svg: bool) -> Result<ReportFiles> {
    let summary = summarize(rows)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let metrics_csv = dir.join("metrics.csv");
    let f = fs::File::create(&metrics_csv).map_err(|e| Error::io(&metrics_csv, e))?;
    write_rows(rows, f)?;
    let summary_csv = dir.join("summary.csv");
    write_summary_csv(&summary, &summary_csv)?;
    let trend_json = dir.join("trend.json");
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(&trend_json, text).map_err(|e| Error::io(&trend_json, e))?;
    let svg = if with_svg {
        let p = dir.join("trend.svg");
        fs::write(&p, trend_svg(&summary)).map_err(|e| Error::io(&p, e))?;
        Some(p)
    } else {
        None
    };
    Ok(ReportFiles { metrics_csv, summary_csv, trend_json, svg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{white_noise, HarmonicSpeech};
    use crate::degrade::mix_at_snr;

    fn row(item: &str, iteration: usize, v: f64) -> MetricRow {
        MetricRow {
            estoi: Some(v),
            ssim_16k: Some(v / 2.0),
            ssim_24k: None,
            ssim_44k: Some(-0.1),
            ssim_48k: Some(1.0 / 3.0),
            si_snr_db: Some(12.345_678_901_234),
            external_mos: if iteration == 0 { Some(4.2) } else { None },
            ..MetricRow::empty(item, iteration)
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows: Vec<MetricRow> = (0..5)
            .flat_map(|i| ["a", "b,c", "d"].map(|id| row(id, i, 0.1 * i as f64 + 0.01)))
            .collect();
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "item_id,iteration,estoi,ssim_16k,ssim_24k,ssim_44k,ssim_48k,si_snr_db,external_mos\n"
        ));
        assert_eq!(read_rows(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn report_shape_and_zero_slope() {
        let rows: Vec<MetricRow> =
            (0..5).flat_map(|i| ["a", "b", "c"].map(|id| row(id, i, 0.5))).collect();
        let dir = tempfile::tempdir().unwrap();
        let files = refinement_report(&rows, dir.path(), true).unwrap();
        let metrics = fs::read_to_string(&files.metrics_csv).unwrap();
        assert_eq!(metrics.lines().count(), 1 + 15);
        let summary = fs::read_to_string(&files.summary_csv).unwrap();
        assert_eq!(summary.lines().count(), 1 + 5);
        let s = summarize(&rows).unwrap();
        assert!(s.slopes.values().all(|&v| v == 0.0));
        assert!(s.iterations[0].metrics["estoi"].std == 0.0);
        assert!(!s.iterations[0].metrics.contains_key("ssim_24k"));
        assert!(fs::read_to_string(files.svg.unwrap()).unwrap().contains("<polyline"));
    }

    #[test]
    fn slope_of_linear_series() {
        let rows: Vec<MetricRow> = (0..5).map(|i| row("a", i, 0.2 * i as f64)).collect();
        let s = summarize(&rows).unwrap();
        assert!((s.slopes["estoi"] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn empty_rows_are_rejected() {
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn evaluate_identical_pair() {
        let x = HarmonicSpeech::default().render(2.0, 16_000);
        let r = evaluate_pair(&x, &x, "x", 0).unwrap();
        assert!((r.estoi.unwrap() - 1.0).abs() < 1e-6);
        for (_, v) in &r.metrics()[1..5] {
            assert!((v.unwrap() - 1.0).abs() < 1e-9);
        }
        let n = white_noise(0.1, 2.0, 16_000, 1);
        let y = mix_at_snr(&x, &n, 0.0, 0).unwrap();
        let r = evaluate_pair(&x, &y, "y", 1).unwrap();
        assert!(r.estoi.unwrap() < 1.0 && r.si_snr_db.unwrap() < 1.0);
    }

    #[test]
    fn short_clips_leave_gaps() {
        let x = HarmonicSpeech::default().render(0.2, 16_000);
        let r = evaluate_pair(&x, &x, "short", 0).unwrap();
        assert!(r.estoi.is_none());
        assert!(r.si_snr_db.is_some());
    }
}
