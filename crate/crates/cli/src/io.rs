//! On-disk formats: cost specs, subject CSVs, decision lists and reports.

use std::fs;
use std::path::Path;

use costregime::{
    Dataset, DecisionList, FeatureDescriptor, FeatureKind, FeatureSpace, Operator, Pattern,
    Predicate, Rule, SubjectRecord, TreatmentSpace, Value,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const TREATMENT_COLUMN: &str = "__treatment";
pub const OUTCOME_COLUMN: &str = "__outcome";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureCost {
    pub kind: FeatureKind,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreatmentCost {
    cost: f64,
}

/// Feature kinds, value domains and costs, in column order.
#[derive(Clone, Debug, PartialEq)]
pub struct CostSpec {
    pub features: Vec<(String, FeatureCost)>,
    pub treatments: Vec<(String, f64)>,
}

impl CostSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::config(format!("cost spec: {e}")))?;
        let obj = doc.as_object().ok_or_else(|| CliError::config("cost spec must be a JSON object"))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "version" | "features" | "treatments") {
                return Err(CliError::config(format!("cost spec: unknown key '{key}'")));
            }
        }
        match obj.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => return Err(CliError::config(format!("cost spec: unsupported version {v}"))),
            None => return Err(CliError::config("cost spec: missing integer 'version'")),
        }
        let section = |name: &str| {
            obj.get(name)
                .and_then(|v| v.as_object())
                .ok_or_else(|| CliError::config(format!("cost spec: '{name}' must be an object")))
        };
        let mut features = Vec::new();
        for (name, entry) in section("features")? {
            let fc: FeatureCost = serde_json::from_value(entry.clone())
                .map_err(|e| CliError::config(format!("cost spec: feature '{name}': {e}")))?;
            features.push((name.clone(), fc));
        }
        let mut treatments = Vec::new();
        for (name, entry) in section("treatments")? {
            let tc: TreatmentCost = serde_json::from_value(entry.clone())
                .map_err(|e| CliError::config(format!("cost spec: treatment '{name}': {e}")))?;
            treatments.push((name.clone(), tc.cost));
        }
        let spec = CostSpec { features, treatments };
        spec.spaces()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<(Self, Artifact)> {
        let bytes = read(path)?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::config(format!("{}: not UTF-8", path.display())))?;
        Ok((Self::parse(&text)?, Artifact::of(path, &bytes)))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let features: serde_json::Map<_, _> = self
            .features
            .iter()
            .map(|(n, f)| (n.clone(), serde_json::to_value(f).unwrap()))
            .collect();
        let treatments: serde_json::Map<_, _> =
            self.treatments.iter().map(|(n, c)| (n.clone(), json!({ "cost": c }))).collect();
        json!({ "version": FORMAT_VERSION, "features": features, "treatments": treatments })
    }

    pub fn from_spaces(features: &FeatureSpace<f64>, treatments: &TreatmentSpace<f64>) -> Self {
        let features = features
            .descriptors()
            .iter()
            .zip(features.costs())
            .map(|(d, &cost)| {
                let values = (d.kind != FeatureKind::Numeric).then(|| d.levels.clone());
                (d.name.clone(), FeatureCost { kind: d.kind, cost, values })
            })
            .collect();
        let treatments = treatments.names().iter().cloned().zip(treatments.costs().iter().copied()).collect();
        CostSpec { features, treatments }
    }

    pub fn spaces(&self) -> Result<(FeatureSpace<f64>, TreatmentSpace<f64>)> {
        let mut descs = Vec::with_capacity(self.features.len());
        for (name, f) in &self.features {
            let d = match (f.kind, &f.values) {
                (FeatureKind::Binary, None) => FeatureDescriptor::binary(name.clone()),
                (FeatureKind::Binary, Some(v)) if v.len() == 2 => FeatureDescriptor {
                    name: name.clone(),
                    kind: FeatureKind::Binary,
                    levels: v.clone(),
                },
                (FeatureKind::Binary, Some(_)) => {
                    return Err(CliError::config(format!("feature '{name}': binary features take exactly two values")))
                }
                (FeatureKind::Categorical, Some(v)) => FeatureDescriptor::categorical(name.clone(), v.clone()),
                (FeatureKind::Categorical, None) => {
                    return Err(CliError::config(format!("feature '{name}': categorical features need 'values'")))
                }
                (FeatureKind::Numeric, None) => FeatureDescriptor::numeric(name.clone()),
                (FeatureKind::Numeric, Some(_)) => {
                    return Err(CliError::config(format!("feature '{name}': numeric features take no 'values'")))
                }
            };
            descs.push(d);
        }
        let fs = FeatureSpace::new(descs, self.features.iter().map(|(_, f)| f.cost).collect())?;
        let ts = TreatmentSpace::new(
            self.treatments.iter().map(|(n, _)| n.clone()).collect(),
            self.treatments.iter().map(|(_, c)| *c).collect(),
        )?;
        Ok((fs, ts))
    }
}

/// A file read or written by a command, with its SHA-256.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

impl Artifact {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        Artifact { path: path.display().to_string(), sha256: sha256_hex(bytes) }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<Artifact> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(Artifact::of(path, bytes))
}

pub fn to_json_bytes<S: Serialize>(value: &S) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("reports serialize");
    out.push(b'\n');
    out
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<Artifact> {
    write(path, &to_json_bytes(value))
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<(D, Artifact)> {
    let bytes = read(path)?;
    let value = serde_json::from_slice(&bytes).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok((value, Artifact::of(path, &bytes)))
}

fn ingest(path: &Path, row: usize, column: &str, reason: impl Into<String>) -> CliError {
    CliError::Ingest { path: path.to_path_buf(), row, column: column.to_string(), reason: reason.into() }
}

fn parse_value(desc: &FeatureDescriptor, field: &str) -> std::result::Result<Value, String> {
    match desc.kind {
        FeatureKind::Numeric => match field.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Value::Number(v)),
            _ => Err(format!("'{field}' is not a finite number")),
        },
        _ => desc
            .level_index(field)
            .map(Value::Level)
            .ok_or_else(|| format!("'{field}' is not one of {:?}", desc.levels)),
    }
}

/// Reads a subject table. Rows are numbered from 1 after the header, which
/// is row 0.
pub fn read_dataset(path: &Path, spec: &CostSpec) -> Result<(Dataset<f64>, Artifact)> {
    let bytes = read(path)?;
    let artifact = Artifact::of(path, &bytes);
    let (fs, ts) = spec.spaces()?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| ingest(path, 0, "", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut column_of = vec![None; fs.len()];
    let (mut t_col, mut y_col) = (None, None);
    for (c, name) in header.iter().enumerate() {
        let slot = match name.as_str() {
            TREATMENT_COLUMN => &mut t_col,
            OUTCOME_COLUMN => &mut y_col,
            _ => match fs.index_of(name) {
                Some(f) => &mut column_of[f],
                None => return Err(ingest(path, 0, name, "column is not a feature of the cost spec")),
            },
        };
        if slot.replace(c).is_some() {
            return Err(ingest(path, 0, name, "duplicate column"));
        }
    }
    for (f, c) in column_of.iter().enumerate() {
        if c.is_none() {
            return Err(ingest(path, 0, &fs.descriptor(f).name, "column is missing"));
        }
    }
    let t_col = t_col.ok_or_else(|| ingest(path, 0, TREATMENT_COLUMN, "column is missing"))?;
    let y_col = y_col.ok_or_else(|| ingest(path, 0, OUTCOME_COLUMN, "column is missing"))?;

    let mut records = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let row_no = k + 1;
        let row = row.map_err(|e| ingest(path, row_no, "", e.to_string()))?;
        let field = |c: usize| -> Result<&str> {
            match row.get(c) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(ingest(path, row_no, &header[c], "missing value")),
            }
        };
        let mut x = Vec::with_capacity(fs.len());
        for (f, c) in column_of.iter().enumerate() {
            let c = c.unwrap();
            let v = parse_value(fs.descriptor(f), field(c)?).map_err(|r| ingest(path, row_no, &header[c], r))?;
            x.push(v);
        }
        let t_name = field(t_col)?;
        let treatment =
            ts.id_of(t_name).ok_or_else(|| ingest(path, row_no, TREATMENT_COLUMN, format!("unknown treatment '{t_name}'")))?;
        let outcome = match field(y_col)?.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => return Err(ingest(path, row_no, OUTCOME_COLUMN, "outcome is not a finite number")),
        };
        records.push(SubjectRecord { x, treatment, outcome });
    }
    if records.is_empty() {
        return Err(ingest(path, 1, "", "no data rows"));
    }
    Ok((Dataset::new(fs, ts, records)?, artifact))
}

fn format_value(desc: &FeatureDescriptor, v: Value) -> String {
    match v {
        Value::Level(l) => desc.levels[l as usize].clone(),
        Value::Number(x) => x.to_string(),
    }
}

pub fn dataset_csv(data: &Dataset<f64>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fs = data.features();
    let mut header: Vec<&str> = fs.descriptors().iter().map(|d| d.name.as_str()).collect();
    header.extend([TREATMENT_COLUMN, OUTCOME_COLUMN]);
    w.write_record(&header).unwrap();
    for r in data.records() {
        let mut row: Vec<String> = r.x.iter().enumerate().map(|(f, &v)| format_value(fs.descriptor(f), v)).collect();
        row.push(data.treatments().name(r.treatment).to_string());
        row.push(r.outcome.to_string());
        w.write_record(&row).unwrap();
    }
    w.into_inner().expect("in-memory writer")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateDoc {
    pub feature: String,
    pub op: String,
    pub value: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDoc {
    #[serde(rename = "if")]
    pub condition: Vec<PredicateDoc>,
    #[serde(rename = "then")]
    pub treatment: String,
}

/// Machine form of a decision list, naming features, levels and treatments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListDoc {
    pub version: u32,
    pub rules: Vec<RuleDoc>,
    #[serde(rename = "else")]
    pub default: String,
}

pub fn pattern_doc(pattern: &Pattern, fs: &FeatureSpace<f64>) -> Vec<PredicateDoc> {
    pattern
        .predicates()
        .iter()
        .map(|p| {
            let desc = fs.descriptor(p.feature);
            let value = match p.value {
                Value::Level(l) => json!(desc.levels[l as usize]),
                Value::Number(v) => json!(v),
            };
            PredicateDoc { feature: desc.name.clone(), op: p.op.symbol().to_string(), value }
        })
        .collect()
}

impl ListDoc {
    pub fn from_list(list: &DecisionList, fs: &FeatureSpace<f64>, ts: &TreatmentSpace<f64>) -> Self {
        ListDoc {
            version: FORMAT_VERSION,
            rules: list
                .rules
                .iter()
                .map(|r| RuleDoc { condition: pattern_doc(&r.condition, fs), treatment: ts.name(r.treatment).to_string() })
                .collect(),
            default: ts.name(list.default).to_string(),
        }
    }

    pub fn to_list(&self, fs: &FeatureSpace<f64>, ts: &TreatmentSpace<f64>) -> Result<DecisionList> {
        if self.version != FORMAT_VERSION {
            return Err(CliError::config(format!("decision list: unsupported version {}", self.version)));
        }
        let treatment = |name: &str| {
            ts.id_of(name).ok_or_else(|| CliError::config(format!("decision list: unknown treatment '{name}'")))
        };
        let mut rules = Vec::with_capacity(self.rules.len());
        for (j, r) in self.rules.iter().enumerate() {
            let mut preds = Vec::with_capacity(r.condition.len());
            for p in &r.condition {
                let bad = |why: &str| CliError::config(format!("decision list: rule {}: {why}", j + 1));
                let f = fs.index_of(&p.feature).ok_or_else(|| bad(&format!("unknown feature '{}'", p.feature)))?;
                let op = Operator::parse(&p.op).ok_or_else(|| bad(&format!("unknown operator '{}'", p.op)))?;
                let desc = fs.descriptor(f);
                let value = match (&desc.kind, &p.value) {
                    (FeatureKind::Numeric, serde_json::Value::Number(v)) => Value::Number(v.as_f64().unwrap()),
                    (FeatureKind::Numeric, _) => return Err(bad(&format!("'{}' needs a number", p.feature))),
                    (_, serde_json::Value::String(s)) => Value::Level(
                        desc.level_index(s).ok_or_else(|| bad(&format!("'{s}' is not a value of '{}'", p.feature)))?,
                    ),
                    _ => return Err(bad(&format!("'{}' needs a level name", p.feature))),
                };
                preds.push(Predicate::new(f, op, value));
            }
            let pattern = Pattern::new(preds, fs)?;
            rules.push(Rule::new(pattern, treatment(&r.treatment)?));
        }
        let list = DecisionList::new(rules, treatment(&self.default)?);
        list.validate(fs, ts, None)?;
        Ok(list)
    }
}

pub fn list_text(list: &DecisionList, fs: &FeatureSpace<f64>, ts: &TreatmentSpace<f64>) -> String {
    list.display(fs, ts).to_string()
}

pub fn read_list(path: &Path, fs: &FeatureSpace<f64>, ts: &TreatmentSpace<f64>) -> Result<(DecisionList, Artifact)> {
    let (doc, artifact): (ListDoc, _) = read_json(path)?;
    Ok((doc.to_list(fs, ts)?, artifact))
}

/// Writes `list.json` and `list.txt` under `dir`.
pub fn write_list(
    dir: &Path,
    list: &DecisionList,
    fs: &FeatureSpace<f64>,
    ts: &TreatmentSpace<f64>,
) -> Result<(Artifact, Artifact)> {
    let json = write_json(&dir.join("list.json"), &ListDoc::from_list(list, fs, ts))?;
    let text = write(&dir.join("list.txt"), list_text(list, fs, ts).as_bytes())?;
    Ok((json, text))
}
