//! Learning curves: per-bucket mean of the learner objective in each
//! metrics file, then mean and standard error across files.

use std::collections::BTreeMap;

use anyhow::Context;
use ptp_core::train::{read_metrics, MetricsRow};
use serde::Serialize;

use crate::{out_path, PlotArgs, UsageError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub variant: String,
    /// First episode id of the bucket.
    pub bucket: u64,
    pub mean: f64,
    pub stderr: f64,
    pub runs: usize,
}

/// Mean learner objective per `(variant, bucket)` within one run.
fn bucket_means(rows: &[MetricsRow], bucket: u64) -> BTreeMap<(String, u64), f64> {
    let mut acc: BTreeMap<(String, u64), (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.kind == "episode") {
        if let Some(obj) = r.learner_objective {
            let e = acc.entry((r.variant.clone(), r.id / bucket * bucket)).or_default();
            e.0 += obj;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Sample mean and standard error (`sd / √k`, zero for a single run).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

pub fn aggregate(runs: &[Vec<MetricsRow>], bucket: u64) -> Vec<CurvePoint> {
    let mut per_key: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for rows in runs {
        for (k, m) in bucket_means(rows, bucket) {
            per_key.entry(k).or_default().push(m);
        }
    }
    per_key
        .into_iter()
        .map(|((variant, bucket), xs)| {
            let (mean, stderr) = mean_stderr(&xs);
            CurvePoint { variant, bucket, mean, stderr, runs: xs.len() }
        })
        .collect()
}

pub fn run(a: &PlotArgs) -> anyhow::Result<()> {
    if a.bucket == 0 {
        anyhow::bail!(UsageError("--bucket must be at least 1".into()));
    }
    let runs = a
        .metrics
        .iter()
        .map(|p| read_metrics(p).with_context(|| format!("reading {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let points = aggregate(&runs, a.bucket);
    let out = out_path(&a.out);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(&out).with_context(|| format!("writing {}", out.display()))?;
    for p in &points {
        w.serialize(p)?;
    }
    w.flush()?;
    println!("{} points from {} runs written to {}", points.len(), runs.len(), out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_with(values: &[f64]) -> Vec<MetricsRow> {
        values.iter().enumerate().map(|(i, v)| MetricsRow::episode(i as u64, "ptp_gt", -v, None, None, 0, *v)).collect()
    }

    #[test]
    fn single_run_has_zero_stderr() {
        let pts = aggregate(&[run_with(&[1.0, 2.0, 3.0, 4.0])], 2);
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[0].mean, pts[0].stderr), (1.5, 0.0));
        assert_eq!((pts[1].bucket, pts[1].mean), (2, 3.5));
    }

    #[test]
    fn identical_runs_have_zero_stderr() {
        let r = run_with(&[2.0, 4.0]);
        let pts = aggregate(&[r.clone(), r.clone(), r.clone(), r], 1);
        assert!(pts.iter().all(|p| p.stderr == 0.0 && p.runs == 4));
        assert_eq!(pts[1].mean, 4.0);
    }

    #[test]
    fn two_runs_one_and_three() {
        let pts = aggregate(&[run_with(&[1.0]), run_with(&[3.0])], 10);
        assert_eq!((pts[0].mean, pts[0].stderr), (2.0, 1.0));
    }
}
