//! Feature tables, clinical records and their CSV forms.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::combat::Covariates;
use crate::error::{Error, Result};
use crate::survival::SurvivalRecord;

/// Provenance written next to every CSV as `<file>.meta.json` and embedded
/// in every JSON artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl ArtifactMeta {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn sidecar_path(csv: &Path) -> PathBuf {
        let mut name = csv.as_os_str().to_owned();
        name.push(".meta.json");
        PathBuf::from(name)
    }

    pub fn write_sidecar(&self, csv: &Path) -> Result<()> {
        let path = Self::sidecar_path(csv);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Patients × named features; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureTable {
    pub patient_ids: Vec<String>,
    pub names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

fn parse_cell(cell: &str) -> Result<Option<f64>> {
    let c = cell.trim();
    if c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    c.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Schema(format!("not a number: {c:?}")))
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patient_ids.is_empty()
    }

    pub fn push_row(&mut self, patient_id: impl Into<String>, row: Vec<Option<f64>>) -> Result<()> {
        let id = patient_id.into();
        if row.len() != self.names.len() {
            return Err(Error::Schema(format!(
                "{id}: {} values for {} columns",
                row.len(),
                self.names.len()
            )));
        }
        if self.patient_ids.contains(&id) {
            return Err(Error::Schema(format!("duplicate patient {id}")));
        }
        self.patient_ids.push(id);
        self.values.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn row_index(&self, patient_id: &str) -> Option<usize> {
        self.patient_ids.iter().position(|p| p == patient_id)
    }

    pub fn column(&self, j: usize) -> Vec<Option<f64>> {
        self.values.iter().map(|r| r[j]).collect()
    }

    /// Columns `names`, in that order.
    pub fn select(&self, names: &[String]) -> Result<FeatureTable> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::Schema(format!("feature {n} is missing")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            patient_ids: self.patient_ids.clone(),
            names: names.to_vec(),
            values: self
                .values
                .iter()
                .map(|r| idx.iter().map(|&j| r[j]).collect())
                .collect(),
        })
    }

    /// Rows for `ids`, in that order.
    pub fn rows_for(&self, ids: &[String]) -> Result<FeatureTable> {
        let lookup: HashMap<&str, usize> = self
            .patient_ids
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_str(), i))
            .collect();
        let mut out = FeatureTable::new(self.names.clone());
        for id in ids {
            let &i = lookup
                .get(id.as_str())
                .ok_or_else(|| Error::Schema(format!("patient {id} has no feature row")))?;
            out.patient_ids.push(id.clone());
            out.values.push(self.values[i].clone());
        }
        Ok(out)
    }

    /// Column-wise join on patient id; rows follow `self`. Patients missing
    /// from `other` get missing values.
    pub fn join(&self, other: &FeatureTable) -> Result<FeatureTable> {
        if let Some(n) = other.names.iter().find(|n| self.names.contains(n)) {
            return Err(Error::Schema(format!("feature {n} appears in both tables")));
        }
        let mut out = FeatureTable::new(self.names.iter().chain(&other.names).cloned().collect());
        for (id, row) in self.patient_ids.iter().zip(&self.values) {
            let mut r = row.clone();
            match other.row_index(id) {
                Some(k) => r.extend(other.values[k].iter().copied()),
                None => r.extend(std::iter::repeat_n(None, other.names.len())),
            }
            out.push_row(id.clone(), r)?;
        }
        Ok(out)
    }

    pub fn read_csv(path: &Path) -> Result<FeatureTable> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
        let headers = rdr.headers()?.clone();
        if headers.get(0).map(str::trim) != Some("patient_id") {
            return Err(Error::Schema(format!(
                "{}: first column must be patient_id",
                path.display()
            )));
        }
        let mut table = FeatureTable::new(headers.iter().skip(1).map(String::from).collect());
        for rec in rdr.records() {
            let rec = rec?;
            let id = rec.get(0).unwrap_or_default().trim().to_string();
            let row = rec
                .iter()
                .skip(1)
                .map(parse_cell)
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Schema(format!("{}: patient {id}: {e}", path.display())))?;
            table.push_row(id, row)?;
        }
        Ok(table)
    }

    /// Writes the CSV and, when `meta` is given, its sidecar.
    pub fn write_csv(&self, path: &Path, meta: Option<&ArtifactMeta>) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(std::iter::once("patient_id").chain(self.names.iter().map(String::as_str)))?;
        for (id, row) in self.patient_ids.iter().zip(&self.values) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.map_or_else(String::new, |x| format!("{x}"))));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        if let Some(m) = meta {
            m.write_sidecar(path)?;
        }
        Ok(())
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("{}: {other:?}", path.display())),
    }
}

/// One row of the clinical table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub patient_id: String,
    pub center: String,
    pub covariates: Covariates,
    /// Absent for patients without outcome (e.g. test patients).
    pub survival: Option<SurvivalRecord>,
}

pub const CLINICAL_COLUMNS: [&str; 7] = [
    "patient_id",
    "center",
    "gender",
    "age",
    "weight",
    "rfs_time",
    "rfs_event",
];

fn parse_event(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(Error::Schema(format!("rfs_event must be 0/1, got {other:?}"))),
    }
}

/// Reads `patient_id, center, gender, age, weight[, rfs_time, rfs_event]`.
/// Extra columns are ignored with a warning; empty survival cells mean no
/// outcome.
pub fn read_clinical(path: &Path) -> Result<Vec<ClinicalRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut idx = HashMap::new();
    for name in CLINICAL_COLUMNS {
        match col(name) {
            Some(i) => {
                idx.insert(name, i);
            }
            None if name.starts_with("rfs_") => {}
            None => {
                return Err(Error::Schema(format!("{}: missing column {name}", path.display())));
            }
        }
    }
    for h in headers.iter().filter(|h| !CLINICAL_COLUMNS.contains(&h.trim())) {
        log::warn!("{}: ignoring column {h}", path.display());
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |name: &str| idx.get(name).and_then(|&i| rec.get(i)).map(str::trim).unwrap_or("");
        let id = get("patient_id").to_string();
        let ctx = |e: Error| Error::Schema(format!("{}: patient {id}: {e}", path.display()));
        let num = |name: &str| -> Result<f64> {
            get(name)
                .parse::<f64>()
                .map_err(|_| Error::Schema(format!("{name} is not a number: {:?}", get(name))))
        };
        let gender = match get("gender") {
            "0" => 0,
            "1" => 1,
            g => return Err(ctx(Error::Schema(format!("gender must be 0 or 1, got {g:?}")))),
        };
        let covariates = Covariates {
            gender,
            age: num("age").map_err(ctx)?,
            weight: num("weight").map_err(ctx)?,
        };
        let survival = if get("rfs_time").is_empty() {
            None
        } else {
            let t = num("rfs_time").map_err(ctx)?;
            let e = parse_event(get("rfs_event")).map_err(ctx)?;
            Some(SurvivalRecord::new(t, e).map_err(ctx)?)
        };
        if !seen.insert(id.clone()) {
            return Err(Error::Schema(format!("{}: duplicate patient {id}", path.display())));
        }
        out.push(ClinicalRecord {
            patient_id: id,
            center: get("center").to_string(),
            covariates,
            survival,
        });
    }
    Ok(out)
}

pub fn write_clinical(path: &Path, records: &[ClinicalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(CLINICAL_COLUMNS)?;
    for r in records {
        let (t, e) = r.survival.map_or((String::new(), String::new()), |s| {
            (format!("{}", s.time), u8::from(s.event).to_string())
        });
        w.write_record([
            r.patient_id.clone(),
            r.center.clone(),
            r.covariates.gender.to_string(),
            format!("{}", r.covariates.age),
            format!("{}", r.covariates.weight),
            t,
            e,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `patient_id,risk` rows.
pub fn write_risks(path: &Path, risks: &[(String, f64)], meta: Option<&ArtifactMeta>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["patient_id", "risk"])?;
    for (id, r) in risks {
        w.write_record([id.clone(), format!("{r}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    if let Some(m) = meta {
        m.write_sidecar(path)?;
    }
    Ok(())
}

pub fn read_risks(path: &Path) -> Result<Vec<(String, f64)>> {
    let t = FeatureTable::read_csv(path)?;
    let j = t
        .column_index("risk")
        .ok_or_else(|| Error::Schema(format!("{}: no risk column", path.display())))?;
    t.patient_ids
        .iter()
        .zip(&t.values)
        .map(|(id, r)| {
            r[j].map(|v| (id.clone(), v))
                .ok_or_else(|| Error::Schema(format!("{id}: missing risk")))
        })
        .collect()
}
