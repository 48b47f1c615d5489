use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::SurvivalDataset;
use crate::error::{Error, Result};

/// Names of the id, time and event columns. Every other column is a feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub id_column: String,
    pub time_column: String,
    pub event_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            id_column: "sample_id".into(),
            time_column: "time".into(),
            event_column: "event".into(),
        }
    }
}

fn parse_event(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Load a dataset. Rows are numbered from 1 (the first line after the
/// header) in error messages. Fails on the first bad cell; nothing is
/// silently dropped.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();

    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let id_col = find(&schema.id_column)?;
    let time_col = find(&schema.time_column)?;
    let event_col = find(&schema.event_column)?;
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|c| ![id_col, time_col, event_col].contains(c))
        .collect();
    let feature_names: Vec<String> = feature_cols
        .iter()
        .map(|&c| headers[c].to_string())
        .collect();

    let mut ids = Vec::new();
    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let err = |message: String| Error::Row { row, message };

        ids.push(record[id_col].to_string());

        let raw_time = &record[time_col];
        let time: f64 = raw_time
            .parse()
            .map_err(|_| err(format!("time `{raw_time}` is not a number")))?;
        if !(time.is_finite() && time > 0.0) {
            return Err(err(format!(
                "time {time} must be strictly positive and finite"
            )));
        }
        times.push(time);

        let raw_event = &record[event_col];
        events.push(parse_event(raw_event).ok_or_else(|| {
            err(format!(
                "event `{raw_event}` must be one of 0, 1, false, true"
            ))
        })?);

        for (&c, name) in feature_cols.iter().zip(&feature_names) {
            let cell = &record[c];
            if cell.is_empty() {
                return Err(err(format!("missing value for feature `{name}`")));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| err(format!("feature `{name}` value `{cell}` is not numeric")))?;
            if !v.is_finite() {
                return Err(err(format!(
                    "feature `{name}` value `{cell}` is not finite"
                )));
            }
            values.push(v);
        }
    }

    let features = Array2::from_shape_vec((ids.len(), feature_names.len()), values)
        .expect("row-major buffer matches shape");
    SurvivalDataset::new(ids, features, feature_names, times, events)
}

/// Shortest round-tripping decimal representation, switching to exponent
/// form for very small or very large magnitudes.
pub(crate) fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn write_csv(path: impl AsRef<Path>, ds: &SurvivalDataset, schema: &CsvSchema) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let mut header = vec![
        schema.id_column.as_str(),
        schema.time_column.as_str(),
        schema.event_column.as_str(),
    ];
    header.extend(ds.feature_names().iter().map(String::as_str));
    writer.write_record(&header)?;
    for i in 0..ds.n_samples() {
        let mut rec = vec![
            ds.sample_ids()[i].clone(),
            fmt_f64(ds.times()[i]),
            if ds.events()[i] {
                "1".into()
            } else {
                "0".into()
            },
        ];
        rec.extend(ds.features().row(i).iter().map(|&v| fmt_f64(v)));
        writer.write_record(&rec)?;
    }
    let mut file = writer
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    file.flush().map_err(|e| Error::io(path, e))
}
