use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainError;

/// Column names of the metrics CSV, in order.
pub const METRICS_HEADER: [&str; 11] = [
    "kind",
    "id",
    "variant",
    "learner_return",
    "greedy_return",
    "z",
    "simulations",
    "learner_objective",
    "policy_loss",
    "value_loss",
    "grad_norm",
];

/// One line of the metrics file. Episode rows (`kind = "episode"`) fill the
/// return columns, step rows (`kind = "step"`) the loss columns.
///
/// `z` is the outcome from the learner's perspective; `greedy_return` and
/// `z` are empty for variants without a greedy actor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub kind: String,
    pub id: u64,
    pub variant: String,
    pub learner_return: Option<f64>,
    pub greedy_return: Option<f64>,
    pub z: Option<f64>,
    pub simulations: Option<usize>,
    pub learner_objective: Option<f64>,
    pub policy_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub grad_norm: Option<f64>,
}

impl MetricsRow {
    fn blank(kind: &str, id: u64, variant: &str) -> Self {
        Self {
            kind: kind.into(),
            id,
            variant: variant.into(),
            learner_return: None,
            greedy_return: None,
            z: None,
            simulations: None,
            learner_objective: None,
            policy_loss: None,
            value_loss: None,
            grad_norm: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn episode(
        id: u64,
        variant: &str,
        learner_return: f64,
        greedy_return: Option<f64>,
        z: Option<f64>,
        simulations: usize,
        learner_objective: f64,
    ) -> Self {
        Self {
            learner_return: Some(learner_return),
            greedy_return,
            z,
            simulations: Some(simulations),
            learner_objective: Some(learner_objective),
            ..Self::blank("episode", id, variant)
        }
    }

    pub fn step(id: u64, variant: &str, policy_loss: f64, value_loss: f64, grad_norm: f64) -> Self {
        Self {
            policy_loss: Some(policy_loss),
            value_loss: Some(value_loss),
            grad_norm: Some(grad_norm),
            ..Self::blank("step", id, variant)
        }
    }
}

/// Append-only CSV writer; the header is written once on creation.
pub struct MetricsWriter {
    w: csv::Writer<BufWriter<File>>,
    rows: usize,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self, TrainError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(File::create(path)?));
        w.write_record(METRICS_HEADER)?;
        w.flush()?;
        Ok(Self { w, rows: 0 })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<(), TrainError> {
        self.w.serialize(row)?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn flush(&mut self) -> Result<(), TrainError> {
        self.w.flush()?;
        Ok(())
    }
}

/// Reads a metrics file, rejecting any header other than [`METRICS_HEADER`].
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, TrainError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_HEADER {
        return Err(TrainError::Config(vec![format!(
            "{}: unexpected metrics header {:?}",
            path.display(),
            header.join(",")
        )]));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_single_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![
            MetricsRow::episode(0, "ptp_gt", -0.5, Some(-0.6), Some(1.0), 25, 7.07),
            MetricsRow::step(0, "ptp_gt", 1.25, 0.5, 3.0),
            MetricsRow::episode(1, "single_vanilla", -0.4, None, None, 50, 5.6),
        ];
        let mut w = MetricsWriter::create(&path).unwrap();
        for r in &rows {
            w.write(r).unwrap();
        }
        w.flush().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("kind,id").count(), 1);
        assert_eq!(text.lines().count(), 1 + rows.len());
        assert_eq!(read_metrics(&path).unwrap(), rows);
    }

    #[test]
    fn foreign_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_metrics(&path).is_err());
    }
}
