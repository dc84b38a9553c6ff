//! RMSE breakdowns, kernel density curves and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{MetricKind, Prediction};

pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("rmse over no samples"));
    }
    let sse: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Indoor,
    Outdoor,
    Overall,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::Indoor => "indoor",
            Setting::Outdoor => "outdoor",
            Setting::Overall => "overall",
        }
    }
}

/// One evaluated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub region: String,
    pub indoor: bool,
    pub target: f64,
    pub prediction: f64,
    pub estimate: Option<f64>,
}

/// RMSE of one region/setting partition; `None` RMSEs mean no samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub region: String,
    pub setting: Setting,
    pub count: usize,
    pub prediction_rmse: Option<f64>,
    pub estimate_rmse: Option<f64>,
}

/// Per-region indoor/outdoor/overall rows, regions in sorted order.
pub fn rmse_breakdown(samples: &[EvalSample]) -> Vec<RmseRow> {
    let mut regions: BTreeMap<&str, Vec<&EvalSample>> = BTreeMap::new();
    for s in samples {
        regions.entry(&s.region).or_default().push(s);
    }
    let mut rows = Vec::new();
    for (region, members) in regions {
        for setting in [Setting::Indoor, Setting::Outdoor, Setting::Overall] {
            let part: Vec<&&EvalSample> = members
                .iter()
                .filter(|s| match setting {
                    Setting::Indoor => s.indoor,
                    Setting::Outdoor => !s.indoor,
                    Setting::Overall => true,
                })
                .collect();
            let targets: Vec<f64> = part.iter().map(|s| s.target).collect();
            let preds: Vec<f64> = part.iter().map(|s| s.prediction).collect();
            let est: Option<Vec<f64>> = part.iter().map(|s| s.estimate).collect();
            rows.push(RmseRow {
                region: region.to_string(),
                setting,
                count: part.len(),
                prediction_rmse: rmse(&preds, &targets).ok(),
                estimate_rmse: est.and_then(|e| rmse(&e, &targets).ok()),
            });
        }
    }
    rows
}

/// `1.06 * sd * n^(-1/5)` with the sample standard deviation.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Empty("bandwidth needs at least 2 values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let h = 1.06 * var.sqrt() * n.powf(-0.2);
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(Error::InvalidInput("zero-variance input; supply a bandwidth".into()))
    }
}

/// Gaussian kernel density of `values` on `grid`; `bandwidth` defaults to
/// Silverman's rule.
pub fn kde(values: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::Empty("kde needs at least 2 values"));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::InvalidInput(format!("bandwidth must be > 0, got {h}"))),
        None => silverman_bandwidth(values)?,
    };
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&g| {
            values
                .iter()
                .map(|&v| {
                    let u = (g - v) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect())
}

pub const KDE_GRID_POINTS: usize = 256;
/// Used when a series is constant and Silverman's rule gives zero.
pub const FALLBACK_BANDWIDTH_DB: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurves {
    pub region: String,
    pub grid: Vec<f64>,
    pub measured: Vec<f64>,
    pub predicted: Vec<f64>,
    /// Absent for RSRQ.
    pub estimate: Option<Vec<f64>>,
}

fn auto_kde(values: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(values).unwrap_or(FALLBACK_BANDWIDTH_DB);
    kde(values, grid, Some(h))
}

/// Density curves for one region on a shared grid spanning all series.
pub fn kde_curves(region: &str, measured: &[f64], predicted: &[f64], estimate: Option<&[f64]>) -> Result<KdeCurves> {
    let all = measured.iter().chain(predicted).chain(estimate.into_iter().flatten());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Empty("kde curves need finite values"));
    }
    let pad = [measured, predicted]
        .into_iter()
        .chain(estimate)
        .map(|v| silverman_bandwidth(v).unwrap_or(FALLBACK_BANDWIDTH_DB))
        .fold(0.0f64, f64::max)
        * 4.0;
    let (lo, hi) = (lo - pad, hi + pad);
    let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|i| lo + i as f64 * step).collect();
    Ok(KdeCurves {
        region: region.to_string(),
        measured: auto_kde(measured, &grid)?,
        predicted: auto_kde(predicted, &grid)?,
        estimate: estimate.map(|e| auto_kde(e, &grid)).transpose()?,
        grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metric: MetricKind,
    pub rows: Vec<RmseRow>,
    pub curves: Vec<KdeCurves>,
}

/// Builds a report from predictions; `region_of` labels each record id.
/// Records without a measured target are ignored.
pub fn evaluate(metric: MetricKind, predictions: &[Prediction], region_of: impl Fn(u64) -> String) -> Result<EvaluationReport> {
    let with_estimate = metric != MetricKind::Rsrq;
    let samples: Vec<EvalSample> = predictions
        .iter()
        .filter_map(|p| {
            p.target.map(|t| EvalSample {
                region: region_of(p.record_id),
                indoor: p.indoor,
                target: t,
                prediction: p.prediction,
                estimate: with_estimate.then_some(p.beta_dbm),
            })
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::Empty("no records with measured targets"));
    }
    let rows = rmse_breakdown(&samples);
    let mut by_region: BTreeMap<&str, Vec<&EvalSample>> = BTreeMap::new();
    for s in &samples {
        by_region.entry(&s.region).or_default().push(s);
    }
    let mut curves = Vec::new();
    for (region, members) in by_region {
        if members.len() < 2 {
            continue;
        }
        let m: Vec<f64> = members.iter().map(|s| s.target).collect();
        let p: Vec<f64> = members.iter().map(|s| s.prediction).collect();
        let e: Option<Vec<f64>> = members.iter().map(|s| s.estimate).collect();
        curves.push(kde_curves(region, &m, &p, e.as_deref())?);
    }
    Ok(EvaluationReport { metric, rows, curves })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn rmse_csv(report: &EvaluationReport) -> String {
    let mut s = String::from("region,setting,count,prediction_rmse_db,estimate_rmse_db\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.region,
            r.setting.name(),
            r.count,
            fmt_opt(r.prediction_rmse),
            fmt_opt(r.estimate_rmse)
        );
    }
    s
}

pub fn kde_csv(c: &KdeCurves) -> String {
    let mut s = String::from("value,measured,predicted");
    if c.estimate.is_some() {
        s.push_str(",estimate");
    }
    s.push('\n');
    for i in 0..c.grid.len() {
        let _ = write!(s, "{:.6},{:.9},{:.9}", c.grid[i], c.measured[i], c.predicted[i]);
        if let Some(e) = &c.estimate {
            let _ = write!(s, ",{:.9}", e[i]);
        }
        s.push('\n');
    }
    s
}

/// Series colors: measured blue, predicted orange, estimate green.
pub const SERIES: [(&str, &str); 3] = [
    ("measured", "#1f77b4"),
    ("predicted", "#ff7f0e"),
    ("estimate", "#2ca02c"),
];

pub fn kde_svg(c: &KdeCurves, metric: MetricKind) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let (x0, x1) = (c.grid[0], *c.grid.last().expect("non-empty grid"));
    let ymax = c
        .measured
        .iter()
        .chain(&c.predicted)
        .chain(c.estimate.iter().flatten())
        .fold(0.0f64, |a, &b| a.max(b))
        .max(1e-12);
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - y / ymax * (h - 2.0 * m);
    let unit = if metric == MetricKind::Rsrq { "dB" } else { "dBm" };

    let mut s = String::new();
    let _ = writeln!(s, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">");
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<line x1=\"{m}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        h - m,
        w - m,
        h - m
    );
    let _ = writeln!(s, "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{}\" stroke=\"black\"/>", h - m);
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{} ({unit}), region {}</text>",
        w / 2.0,
        h - 12.0,
        format!("{metric:?}").to_uppercase(),
        c.region
    );
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" font-size=\"11\">{x0:.1}</text>", m, h - m + 15.0);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\">{x1:.1}</text>", w - m, h - m + 15.0);
    let series = [Some(&c.measured), Some(&c.predicted), c.estimate.as_ref()];
    let mut legend_y = m;
    for ((name, color), ys) in SERIES.iter().zip(series) {
        let Some(ys) = ys else { continue };
        let pts: Vec<String> = c
            .grid
            .iter()
            .zip(ys)
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>", pts.join(" "));
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{legend_y}\" x2=\"{}\" y2=\"{legend_y}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{}\" y=\"{}\" font-size=\"12\">{name}</text>",
            w - m - 110.0,
            w - m - 85.0,
            w - m - 80.0,
            legend_y + 4.0
        );
        legend_y += 18.0;
    }
    s.push_str("</svg>\n");
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `rmse_summary.csv`, `report.json`, and per-region `kde_<region>.csv`
/// and `kde_<region>.svg` into `dir`.
pub fn emit_report(report: &EvaluationReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("rmse_summary.csv"), &rmse_csv(report))?;
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    write(&dir.join("report.json"), &json)?;
    for c in &report.curves {
        let safe: String = c
            .region
            .chars()
            .map(|ch| if ch.is_ascii_alphanumeric() || ch == '-' || ch == '_' { ch } else { '_' })
            .collect();
        write(&dir.join(format!("kde_{safe}.csv")), &kde_csv(c))?;
        write(&dir.join(format!("kde_{safe}.svg")), &kde_svg(c, report.metric))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(region: &str, indoor: bool, err: f64) -> EvalSample {
        EvalSample {
            region: region.into(),
            indoor,
            target: 0.0,
            prediction: err,
            estimate: Some(2.0 * err),
        }
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((rmse(&[5.5, 2.5], &[3.0, 0.0]).unwrap() - 2.5).abs() < 1e-12);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[]).is_err());
    }

    #[test]
    fn breakdown_pools_partitions() {
        let s = vec![sample("a", true, 3.0), sample("a", false, 4.0)];
        let rows = rmse_breakdown(&s);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].prediction_rmse, Some(3.0));
        assert_eq!(rows[1].prediction_rmse, Some(4.0));
        assert!((rows[2].prediction_rmse.unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(rows[2].count, 2);
    }

    #[test]
    fn absent_partition_is_none() {
        let rows = rmse_breakdown(&[sample("b", false, 1.0), sample("b", false, -1.0)]);
        assert_eq!(rows[0].setting, Setting::Indoor);
        assert_eq!(rows[0].count, 0);
        assert_eq!(rows[0].prediction_rmse, None);
        assert_eq!(rows[2].prediction_rmse, Some(1.0));
        assert!(rmse_csv(&EvaluationReport {
            metric: MetricKind::Rsrp,
            rows,
            curves: vec![]
        })
        .contains("b,indoor,0,,\n"));
    }

    #[test]
    fn kde_examples() {
        let d = kde(&[-1.0, 1.0], &[0.0], Some(1.0)).unwrap()[0];
        assert!((d - 0.24197072451914337).abs() < 1e-12);
        let g = kde(&[2.0, 2.0, 2.0], &[2.0, 3.0], Some(0.5)).unwrap();
        let phi = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt() / 0.5;
        assert!((g[0] - phi(0.0)).abs() < 1e-12);
        assert!((g[1] - phi(2.0)).abs() < 1e-12);
        assert!(kde(&[2.0, 2.0], &[0.0], None).is_err());
        assert!(kde(&[1.0], &[0.0], Some(1.0)).is_err());
        assert!(kde(&[1.0, 2.0], &[0.0], Some(0.0)).is_err());
    }

    #[test]
    fn kde_integrates_to_one() {
        let v: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64).sin() * 10.0 - 90.0).collect();
        let h = silverman_bandwidth(&v).unwrap();
        let (lo, hi) = (-100.0 - 6.0 * h, -80.0 + 6.0 * h);
        let n = 4001;
        let step = (hi - lo) / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
        let d = kde(&v, &grid, None).unwrap();
        let integral: f64 = d.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum();
        assert!((integral - 1.0).abs() < 1e-3, "{integral}");
    }

    #[test]
    fn report_files_are_stable() {
        let preds: Vec<Prediction> = (0..50)
            .map(|i| Prediction {
                record_id: i,
                target: Some(-90.0 + (i % 7) as f64),
                prediction: -91.0 + (i % 5) as f64,
                alpha_db: 100.0,
                beta_dbm: -95.0 + (i % 3) as f64,
                indoor: i % 2 == 0,
                los: crate::geo_scene::LosClass::Los,
            })
            .collect();
        let report = evaluate(MetricKind::Rsrp, &preds, |id| if id < 25 { "x".into() } else { "y".into() }).unwrap();
        assert_eq!(report.rows.len(), 6);
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report, dir.path()).unwrap();
        let first = std::fs::read(dir.path().join("kde_x.svg")).unwrap();
        let csv1 = std::fs::read_to_string(dir.path().join("rmse_summary.csv")).unwrap();
        assert_eq!(csv1.lines().count(), 1 + 6);
        emit_report(&report, dir.path()).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("kde_x.svg")).unwrap());
        let svg = String::from_utf8(first).unwrap();
        for (name, color) in SERIES {
            assert!(svg.contains(name) && svg.contains(color));
        }

        let rsrq = evaluate(MetricKind::Rsrq, &preds, |_| "x".into()).unwrap();
        assert!(rsrq.curves[0].estimate.is_none());
        assert!(rsrq.rows.iter().all(|r| r.estimate_rmse.is_none()));
        assert!(!kde_svg(&rsrq.curves[0], MetricKind::Rsrq).contains("estimate"));
    }

    proptest! {
        #[test]
        fn pooling_identity(errs in prop::collection::vec((-20.0..20.0f64, any::<bool>()), 2..60)) {
            let s: Vec<EvalSample> = errs.iter().map(|&(e, indoor)| sample("r", indoor, e)).collect();
            let rows = rmse_breakdown(&s);
            let mse = |r: &RmseRow| r.prediction_rmse.map_or(0.0, |v| v * v) * r.count as f64;
            let pooled = (mse(&rows[0]) + mse(&rows[1])) / rows[2].count as f64;
            let overall = rows[2].prediction_rmse.unwrap().powi(2);
            prop_assert!((pooled - overall).abs() <= 1e-9 * (1.0 + overall));
            prop_assert_eq!(rows[0].count + rows[1].count, rows[2].count);
        }

        #[test]
        fn kde_nonnegative_and_permutation_invariant(mut v in prop::collection::vec(-50.0..50.0f64, 2..40), x in -80.0..80.0f64) {
            let a = kde(&v, &[x], Some(2.0)).unwrap()[0];
            v.reverse();
            let b = kde(&v, &[x], Some(2.0)).unwrap()[0];
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }
    }
}
