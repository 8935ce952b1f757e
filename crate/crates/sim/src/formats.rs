//! CSV artifacts: dataset export, corruption log, metrics stream and
//! per-client state snapshots.
//!
//! Reals other than metrics fractions are written with the shortest
//! representation that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use flr_core::data::{ClientShard, Example};
use flr_core::metrics::{Fractions, MemorizationBreakdown, RoundMetrics};
use flr_core::noise::CorruptionLog;
use flr_core::state::{PseudoLabel, PseudoLabelStore};
use flr_core::ProbVector;

use crate::error::{Result, SimError};

/// Header of the metrics stream.
pub const METRICS_HEADER: [&str; 10] = [
    "round",
    "phase",
    "scope",
    "clean_correct",
    "clean_wrong",
    "noisy_correct",
    "noisy_wrong",
    "noisy_memorized",
    "test_acc",
    "train_loss",
];

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .flexible(false)
        .from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> SimError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SimError::io(path, io),
        other => SimError::format(path, format!("{other:?}")),
    }
}

fn finish(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w
        .into_inner()
        .map_err(|e| SimError::io(path, std::io::Error::other(e.to_string())))?;
    inner.flush().map_err(|e| SimError::io(path, e))
}

fn example_row(e: &Example, client: Option<usize>) -> Vec<String> {
    let mut row = Vec::with_capacity(e.features.len() + 4);
    row.push(e.id.to_string());
    row.push(client.map(|c| c.to_string()).unwrap_or_default());
    row.extend(e.features.iter().map(|f| f.to_string()));
    row.push(e.given_label.class.to_string());
    row.push(e.true_label.class.to_string());
    row
}

fn example_header(dim: usize) -> Vec<String> {
    let mut h = vec!["example_id".to_string(), "client_id".to_string()];
    h.extend((0..dim).map(|i| format!("f_{i}")));
    h.push("given_label".into());
    h.push("true_label".into());
    h
}

/// Writes the training set, client by client, in example-id order.
pub fn write_train(path: &Path, shards: &[ClientShard], dim: usize) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(example_header(dim)).map_err(|e| csv_err(path, e))?;
    for shard in shards {
        for e in &shard.examples {
            w.write_record(example_row(e, Some(shard.client_id)))
                .map_err(|e| csv_err(path, e))?;
        }
    }
    finish(path, w)
}

/// Writes the test set with an empty `client_id` column.
pub fn write_test(path: &Path, test: &[Example], dim: usize) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(example_header(dim)).map_err(|e| csv_err(path, e))?;
    for e in test {
        w.write_record(example_row(e, None)).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Writes one row per corrupted example.
pub fn write_corruption(path: &Path, log: &CorruptionLog) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["example_id", "client_id", "old_class", "new_class"])
        .map_err(|e| csv_err(path, e))?;
    for c in &log.entries {
        w.write_record([
            c.example_id.to_string(),
            c.client_id.to_string(),
            c.old_class.to_string(),
            c.new_class.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

fn breakdown_row(m: &RoundMetrics, b: &MemorizationBreakdown) -> [String; 10] {
    let f = &b.fractions;
    [
        m.round.to_string(),
        m.phase.as_str().to_string(),
        b.scope.as_str().to_string(),
        format!("{:.6}", f.clean_correct),
        format!("{:.6}", f.clean_wrong),
        format!("{:.6}", f.noisy_correct),
        format!("{:.6}", f.noisy_wrong),
        format!("{:.6}", f.noisy_memorized),
        format!("{:.6}", m.test_accuracy),
        format!("{:.6}", m.train_loss),
    ]
}

/// Streams metrics rows to a file, flushing after every round.
pub struct MetricsWriter {
    path: std::path::PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl MetricsWriter {
    /// Creates the file and writes the header.
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = writer(path)?;
        inner.write_record(METRICS_HEADER).map_err(|e| csv_err(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    /// Opens an existing stream for appending; no header is written.
    pub fn append(path: &Path) -> Result<Self> {
        let file = std::fs::OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| SimError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner: csv::Writer::from_writer(BufWriter::new(file)),
        })
    }

    /// Appends the global row and, when present, the local row of a round.
    pub fn push(&mut self, m: &RoundMetrics) -> Result<()> {
        let path = &self.path;
        self.inner
            .write_record(breakdown_row(m, &m.global))
            .map_err(|e| csv_err(path, e))?;
        if let Some(local) = &m.local {
            self.inner
                .write_record(breakdown_row(m, local))
                .map_err(|e| csv_err(path, e))?;
        }
        self.inner.flush().map_err(|e| SimError::io(path, e))
    }

    /// Flushes and closes the file.
    pub fn finish(self) -> Result<()> {
        finish(&self.path, self.inner)
    }
}

/// Writes a full metrics stream.
pub fn write_metrics(path: &Path, stream: &[RoundMetrics]) -> Result<()> {
    let mut w = MetricsWriter::create(path)?;
    for m in stream {
        w.push(m)?;
    }
    w.finish()
}

/// One parsed metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    /// Round index.
    pub round: usize,
    /// `warmup` or `flr`.
    pub phase: String,
    /// `global` or `local`.
    pub scope: String,
    /// Memorization fractions as printed.
    pub fractions: Fractions,
    /// Test accuracy of the round's server model.
    pub test_acc: f64,
    /// Training loss of the round.
    pub train_loss: f64,
}

/// Reads a metrics stream written by [`write_metrics`].
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let file = File::open(path).map_err(|e| SimError::io(path, e))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(METRICS_HEADER) {
        return Err(SimError::format(path, "unexpected metrics header"));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |what: &str| SimError::format(path, format!("row {}: bad {what}", i + 1));
        let num = |j: usize| -> Result<f64> { rec[j].parse().map_err(|_| bad(METRICS_HEADER[j])) };
        rows.push(MetricsRow {
            round: rec[0].parse().map_err(|_| bad("round"))?,
            phase: rec[1].to_string(),
            scope: rec[2].to_string(),
            fractions: Fractions {
                clean_correct: num(3)?,
                clean_wrong: num(4)?,
                noisy_correct: num(5)?,
                noisy_wrong: num(6)?,
                noisy_memorized: num(7)?,
            },
            test_acc: num(8)?,
            train_loss: num(9)?,
        });
    }
    Ok(rows)
}

/// Writes a client's pseudo-label store as `example_id, s_*, m_*`; an
/// uninitialized vector is written as empty fields.
pub fn write_state(path: &Path, store: &PseudoLabelStore, classes: usize) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["example_id".to_string()];
    header.extend((0..classes).map(|c| format!("s_{c}")));
    header.extend((0..classes).map(|c| format!("m_{c}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let cells = |v: &Option<ProbVector>| -> Vec<String> {
        match v {
            Some(v) => v.as_slice().iter().map(|x| x.to_string()).collect(),
            None => vec![String::new(); classes],
        }
    };
    for (id, state) in store.iter() {
        let mut row = vec![id.to_string()];
        row.extend(cells(&state.s));
        row.extend(cells(&state.m));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Reads a snapshot written by [`write_state`].
pub fn read_state(path: &Path, classes: usize) -> Result<PseudoLabelStore> {
    let file = File::open(path).map_err(|e| SimError::io(path, e))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    let mut store = PseudoLabelStore::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |what: &str| SimError::format(path, format!("row {}: {what}", i + 1));
        if rec.len() != 1 + 2 * classes {
            return Err(bad("wrong number of columns"));
        }
        let id: u64 = rec[0].parse().map_err(|_| bad("bad example_id"))?;
        let vector = |from: usize| -> Result<Option<ProbVector>> {
            let fields: Vec<&str> = (from..from + classes).map(|j| &rec[j]).collect();
            if fields.iter().all(|f| f.is_empty()) {
                return Ok(None);
            }
            let values = fields
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("bad probability"))?;
            ProbVector::new(values).map(Some).map_err(|e| bad(&e.to_string()))
        };
        store.insert(
            id,
            PseudoLabel {
                s: vector(1)?,
                m: vector(1 + classes)?,
            },
        );
    }
    Ok(store)
}
