//! Dataset and results files, and the on-disk layout of a run directory.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use coreset_core::{Coreset, Dataset, Matrix, MetricsRecord, Method};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Column order of the results CSV.
pub const RESULT_COLUMNS: [&str; 10] = [
    "method",
    "edpe",
    "ssi",
    "epochs",
    "seed",
    "train_time_s",
    "selection_time_s",
    "total_time_s",
    "accuracy",
    "kappa",
];

fn csv_error(path: &Path, err: csv::Error) -> BenchError {
    let line = err.position().map_or(0, csv::Position::line);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => BenchError::io(path, source),
        other => BenchError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| BenchError::io(path, e))
}

/// Writes `ds` as `label[,combo],f0,...` with round-trip exact reals.
pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["label".to_string()];
    if ds.combo_keys().is_some() {
        header.push("combo".into());
    }
    header.extend((0..ds.dim()).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    let mut row = Vec::with_capacity(header.len());
    for (i, features) in ds.features().iter_rows().enumerate() {
        row.clear();
        row.push(ds.labels()[i].to_string());
        if let Some(keys) = ds.combo_keys() {
            row.push(keys[i].clone());
        }
        // `{:?}` is the shortest representation that parses back exactly
        row.extend(features.iter().map(|v| format!("{v:?}")));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

/// Reads a dataset CSV. The class count is one past the largest label.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let has_combo = header.get(1) == Some("combo");
    let first_feature = if has_combo { 2 } else { 1 };
    let dim = header.len().saturating_sub(first_feature);
    let names_ok = header.get(0) == Some("label")
        && header
            .iter()
            .skip(first_feature)
            .enumerate()
            .all(|(j, name)| name == format!("f{j}"));
    if !names_ok || dim == 0 {
        return Err(BenchError::Header {
            path: path.to_path_buf(),
            expected: "label[,combo],f0,f1,...".into(),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut labels = Vec::new();
    let mut keys = Vec::new();
    let mut values = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, csv::Position::line);
        let parse_err = |message: String| BenchError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let got = record.len().saturating_sub(first_feature);
        if got != dim {
            return Err(BenchError::DimensionMismatch {
                path: path.to_path_buf(),
                line,
                expected: dim,
                got,
            });
        }
        let label = &record[0];
        labels.push(
            label
                .trim()
                .parse::<usize>()
                .map_err(|_| parse_err(format!("label `{label}` is not a non-negative integer")))?,
        );
        if has_combo {
            keys.push(record[1].to_string());
        }
        for (j, cell) in record.iter().skip(first_feature).enumerate() {
            values.push(
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(format!("feature f{j} `{cell}` is not a number")))?,
            );
        }
    }
    let n = labels.len();
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let features = Matrix::from_vec(n, dim, values)?;
    Ok(Dataset::new(features, labels, has_combo.then_some(keys), classes)?)
}

/// On-disk format of a results file, chosen by extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Csv,
    Json,
}

impl ResultFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ResultFormat::Json,
            _ => ResultFormat::Csv,
        }
    }
}

fn record_cells(r: &MetricsRecord) -> [String; 10] {
    [
        r.method.as_str().to_string(),
        format!("{:?}", r.edpe),
        r.ssi.to_string(),
        r.epochs.to_string(),
        r.seed.to_string(),
        format!("{:?}", r.training_time_s),
        format!("{:?}", r.selection_time_s),
        format!("{:?}", r.total_time_s),
        format!("{:?}", r.accuracy),
        r.kappa.map(|k| format!("{k:?}")).unwrap_or_default(),
    ]
}

/// Writes `records`, replacing any existing file.
pub fn write_results(records: &[MetricsRecord], path: &Path, format: ResultFormat) -> Result<()> {
    match format {
        ResultFormat::Json => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, records).map_err(|e| BenchError::Json {
                path: path.to_path_buf(),
                source: e,
            })?;
            writeln!(w).and_then(|_| w.flush()).map_err(|e| BenchError::io(path, e))
        }
        ResultFormat::Csv => {
            let mut w = csv::Writer::from_writer(create(path)?);
            w.write_record(RESULT_COLUMNS).map_err(|e| csv_error(path, e))?;
            for r in records {
                w.write_record(record_cells(r)).map_err(|e| csv_error(path, e))?;
            }
            w.flush().map_err(|e| BenchError::io(path, e))
        }
    }
}

/// Adds `records` after the existing rows of `path`, creating it if needed.
/// An existing file's header is validated first.
pub fn append_results(records: &[MetricsRecord], path: &Path) -> Result<()> {
    let format = ResultFormat::from_path(path);
    let exists = fs::metadata(path).map(|m| m.len() > 0).unwrap_or(false);
    if !exists {
        return write_results(records, path, format);
    }
    match format {
        ResultFormat::Json => {
            let mut all = read_results(path)?;
            all.extend_from_slice(records);
            write_results(&all, path, format)
        }
        ResultFormat::Csv => {
            read_results(path)?;
            let file = OpenOptions::new()
                .append(true)
                .open(path)
                .map_err(|e| BenchError::io(path, e))?;
            let mut w = csv::Writer::from_writer(BufWriter::new(file));
            for r in records {
                w.write_record(record_cells(r)).map_err(|e| csv_error(path, e))?;
            }
            w.flush().map_err(|e| BenchError::io(path, e))
        }
    }
}

/// Reads a results file written by [`write_results`].
pub fn read_results(path: &Path) -> Result<Vec<MetricsRecord>> {
    match ResultFormat::from_path(path) {
        ResultFormat::Json => {
            let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| BenchError::Json {
                path: path.to_path_buf(),
                source: e,
            })
        }
        ResultFormat::Csv => {
            let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
            let mut r = csv::Reader::from_reader(file);
            let header = r.headers().map_err(|e| csv_error(path, e))?;
            if !header.iter().eq(RESULT_COLUMNS) {
                return Err(BenchError::Header {
                    path: path.to_path_buf(),
                    expected: RESULT_COLUMNS.join(","),
                    found: header.iter().collect::<Vec<_>>().join(","),
                });
            }
            let mut out = Vec::new();
            for record in r.records() {
                let record = record.map_err(|e| csv_error(path, e))?;
                let line = record.position().map_or(0, csv::Position::line);
                out.push(parse_record(&record).map_err(|message| BenchError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message,
                })?);
            }
            Ok(out)
        }
    }
}

fn parse_record(record: &csv::StringRecord) -> std::result::Result<MetricsRecord, String> {
    fn cell<T: std::str::FromStr>(record: &csv::StringRecord, i: usize) -> std::result::Result<T, String> {
        let raw = &record[i];
        raw.trim()
            .parse()
            .map_err(|_| format!("column {} has unparsable value `{raw}`", RESULT_COLUMNS[i]))
    }
    let kappa = match record[9].trim() {
        "" => None,
        _ => Some(cell(record, 9)?),
    };
    Ok(MetricsRecord {
        method: cell::<Method>(record, 0)?,
        edpe: cell(record, 1)?,
        ssi: cell(record, 2)?,
        epochs: cell(record, 3)?,
        seed: cell(record, 4)?,
        training_time_s: cell(record, 5)?,
        selection_time_s: cell(record, 6)?,
        total_time_s: cell(record, 7)?,
        accuracy: cell(record, 8)?,
        kappa,
    })
}

/// Coreset history of one run, stored next to the training split it indexes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredHistory {
    /// Rows of the source dataset that form the training split.
    pub train_indices: Vec<usize>,
    pub coresets: Vec<Coreset>,
}

pub const RUN_TRAIN_FILE: &str = "train.csv";
pub const RUN_CORESETS_FILE: &str = "coresets.json";

/// Stores the training split and coreset history under `dir`.
pub fn save_run_dir(dir: &Path, train: &Dataset, history: &StoredHistory) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    save_csv(train, &dir.join(RUN_TRAIN_FILE))?;
    let path = dir.join(RUN_CORESETS_FILE);
    let mut w = create(&path)?;
    serde_json::to_writer(&mut w, history).map_err(|e| BenchError::Json {
        path: path.clone(),
        source: e,
    })?;
    w.flush().map_err(|e| BenchError::io(&path, e))
}

pub fn load_run_dir(dir: &Path) -> Result<(Dataset, StoredHistory)> {
    let train = load_csv(&dir.join(RUN_TRAIN_FILE))?;
    let path = dir.join(RUN_CORESETS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| BenchError::io(&path, e))?;
    let history = serde_json::from_str(&text).map_err(|e| BenchError::Json { path, source: e })?;
    Ok((train, history))
}
