//! Append-only CSV metrics.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header of `metrics.csv`, in column order.
pub const METRICS_HEADER: [&str; 10] = [
    "run_id",
    "phase",
    "iteration",
    "samples_collected",
    "model_meta_loss",
    "critic_loss",
    "actor_loss",
    "mean_return",
    "synthetic_transitions_used",
    "wall_seconds",
];

/// One record. Absent values are written as empty fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub phase: String,
    pub iteration: usize,
    pub samples_collected: usize,
    pub model_meta_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub mean_return: Option<f64>,
    pub synthetic_transitions_used: usize,
    pub wall_seconds: Option<f64>,
}

/// Writes rows to a CSV file and enforces that iterations never go
/// backwards within a phase.
pub struct MetricsWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
    last: Vec<(String, usize)>,
    started: Option<Instant>,
}

impl MetricsWriter {
    /// Create (truncating) the file. With `wall_clock` the writer fills
    /// `wall_seconds` with time since creation.
    pub fn create(path: &Path, wall_clock: bool) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(format!("create {}", path.display()), e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer: csv::Writer::from_writer(file),
            last: Vec::new(),
            started: wall_clock.then(Instant::now),
        })
    }

    /// Rewrite the file keeping existing rows of phases not in `phases`, so
    /// later stages of a run can share one metrics file and rerunning a
    /// stage replaces its own rows. A missing file starts empty.
    pub fn replace_phases(path: &Path, wall_clock: bool, phases: &[&str]) -> Result<Self> {
        let kept: Vec<MetricsRow> = if path.exists() {
            read_metrics(path)?
                .into_iter()
                .filter(|r| !phases.contains(&r.phase.as_str()))
                .collect()
        } else {
            Vec::new()
        };
        let mut w = Self::create(path, wall_clock)?;
        let started = w.started.take();
        for row in kept {
            w.write(row)?;
        }
        w.started = started;
        Ok(w)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, mut row: MetricsRow) -> Result<()> {
        match self.last.iter_mut().find(|(p, _)| *p == row.phase) {
            Some((_, it)) if row.iteration < *it => {
                return Err(Error::Usage(format!(
                    "metrics iteration went backwards in phase {}: {} after {}",
                    row.phase, row.iteration, it
                )));
            }
            Some((_, it)) => *it = row.iteration,
            None => self.last.push((row.phase.clone(), row.iteration)),
        }
        if let Some(t0) = self.started {
            row.wall_seconds = Some(t0.elapsed().as_secs_f64());
        }
        self.writer.serialize(row)?;
        self.writer
            .flush()
            .map_err(|e| Error::io(format!("write {}", self.path.display()), e))
    }
}

/// Read a metrics file back.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_HEADER {
        return Err(Error::Format(format!("unexpected metrics header {header:?}")));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(phase: &str, iteration: usize) -> MetricsRow {
        MetricsRow {
            run_id: "r".into(),
            phase: phase.into(),
            iteration,
            mean_return: Some(-1.25),
            ..Default::default()
        }
    }

    #[test]
    fn header_and_empty_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::create(&path, false).unwrap();
        w.write(row("meta_train", 1)).unwrap();
        drop(w);
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), METRICS_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "r,meta_train,1,0,,,,-1.25,0,");
        assert_eq!(read_metrics(&path).unwrap(), vec![row("meta_train", 1)]);
    }

    #[test]
    fn iterations_are_monotone_per_phase() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = MetricsWriter::create(&dir.path().join("m.csv"), false).unwrap();
        w.write(row("a", 2)).unwrap();
        w.write(row("b", 0)).unwrap();
        w.write(row("a", 2)).unwrap();
        assert!(w.write(row("a", 1)).is_err());
    }

    #[test]
    fn wall_clock_fills_seconds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::create(&path, true).unwrap();
        w.write(row("a", 0)).unwrap();
        assert!(read_metrics(&path).unwrap()[0].wall_seconds.unwrap() >= 0.0);
    }

    #[test]
    fn replacing_phases_keeps_the_others() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::create(&path, false).unwrap();
        w.write(row("train", 1)).unwrap();
        w.write(row("eval", 0)).unwrap();
        drop(w);
        let mut w = MetricsWriter::replace_phases(&path, false, &["eval"]).unwrap();
        w.write(row("eval", 0)).unwrap();
        drop(w);
        let first = std::fs::read(&path).unwrap();
        let rows = read_metrics(&path).unwrap();
        assert_eq!(rows, vec![row("train", 1), row("eval", 0)]);
        let mut w = MetricsWriter::replace_phases(&path, false, &["eval"]).unwrap();
        w.write(row("eval", 0)).unwrap();
        drop(w);
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn foreign_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_metrics(&path), Err(Error::Format(_))));
    }
}
