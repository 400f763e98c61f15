use std::collections::HashSet;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Cohort, Diagnosis, Gender, Race, Record};
use crate::error::{Error, Result};

/// Maps cohort fields onto CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsvSchema {
    pub id: String,
    /// ROI columns in order. `None` takes every column not mapped elsewhere.
    pub features: Option<Vec<String>>,
    pub total_brain_volume: String,
    pub gender: String,
    pub race: String,
    pub age: String,
    pub label: String,
    /// Drop rows whose race is neither white nor black instead of failing.
    pub race_filter: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            id: "id".into(),
            features: None,
            total_brain_volume: "total_brain_volume".into(),
            gender: "gender".into(),
            race: "race".into(),
            age: "age".into(),
            label: "diagnosis".into(),
            race_filter: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCohort {
    pub cohort: Cohort,
    /// Rows removed by the race filter.
    pub dropped_rows: usize,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_num(row: usize, column: &str, cell: &str) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            row,
            column: column.to_string(),
            value: cell.to_string(),
        })
}

fn parse_gender(s: &str) -> Option<Gender> {
    match s.trim().to_ascii_lowercase().as_str() {
        "male" | "m" => Some(Gender::Male),
        "female" | "f" => Some(Gender::Female),
        _ => None,
    }
}

fn parse_race(s: &str) -> Option<Race> {
    match s.trim().to_ascii_lowercase().as_str() {
        "white" => Some(Race::White),
        "black" => Some(Race::Black),
        _ => None,
    }
}

/// Reads a cohort table. Rows are numbered from 1 (first data row) in errors.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedCohort> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();

    let id_col = column(&headers, &schema.id)?;
    let tbv_col = column(&headers, &schema.total_brain_volume)?;
    let gender_col = column(&headers, &schema.gender)?;
    let race_col = column(&headers, &schema.race)?;
    let age_col = column(&headers, &schema.age)?;
    let label_col = column(&headers, &schema.label)?;
    let mapped: HashSet<usize> = [id_col, tbv_col, gender_col, race_col, age_col, label_col]
        .into_iter()
        .collect();

    let (feature_cols, feature_names): (Vec<usize>, Vec<String>) = match &schema.features {
        Some(names) => {
            let cols = names
                .iter()
                .map(|n| column(&headers, n))
                .collect::<Result<Vec<_>>>()?;
            (cols, names.clone())
        }
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| !mapped.contains(i))
            .map(|(i, h)| (i, h.trim().to_string()))
            .unzip(),
    };

    let mut records = Vec::new();
    let mut dropped = 0usize;
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let cell = |c: usize| row.get(c).unwrap_or("");
        let invalid = |reason: String| Error::InvalidRecord { row: row_no, reason };

        let race = match parse_race(cell(race_col)) {
            Some(r) => r,
            None if schema.race_filter => {
                dropped += 1;
                continue;
            }
            None => return Err(invalid(format!("unsupported race `{}`", cell(race_col)))),
        };
        let features = feature_cols
            .iter()
            .zip(&feature_names)
            .map(|(&c, name)| parse_num(row_no, name, cell(c)))
            .collect::<Result<Vec<_>>>()?;
        let gender = parse_gender(cell(gender_col))
            .ok_or_else(|| invalid(format!("unsupported gender `{}`", cell(gender_col))))?;
        let label = Diagnosis::parse(cell(label_col))
            .ok_or_else(|| invalid(format!("unsupported diagnosis `{}`", cell(label_col))))?;
        records.push(Record {
            id: cell(id_col).trim().to_string(),
            features,
            total_brain_volume: parse_num(row_no, &schema.total_brain_volume, cell(tbv_col))?,
            gender,
            race,
            age: parse_num(row_no, &schema.age, cell(age_col))?,
            label,
        });
    }
    if dropped > 0 {
        warn!("{}: dropped {dropped} row(s) with race outside {{white, black}}", path.display());
    }
    Ok(LoadedCohort {
        cohort: Cohort::new(feature_names, records)?,
        dropped_rows: dropped,
    })
}

/// Writes a cohort using the default schema's column names.
pub fn write_csv(cohort: &Cohort, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let schema = CsvSchema::default();
    let mut header = vec![schema.id.clone()];
    header.extend(cohort.feature_names().iter().cloned());
    header.extend([
        schema.total_brain_volume,
        schema.gender,
        schema.race,
        schema.age,
        schema.label,
    ]);
    w.write_record(&header)?;
    for r in cohort.records() {
        let mut row = vec![r.id.clone()];
        row.extend(r.features.iter().map(|v| v.to_string()));
        row.push(r.total_brain_volume.to_string());
        row.push(match r.gender {
            Gender::Male => "male".into(),
            Gender::Female => "female".into(),
        });
        row.push(match r.race {
            Race::White => "white".into(),
            Race::Black => "black".into(),
        });
        row.push(r.age.to_string());
        row.push(r.label.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
