//! Schemas, records and delimited-text I/O for part-level sensor data.
//!
//! One [`Record`] is one produced part. The label column ("Efficiency") is
//! 1 for a normal part and 0 for a defective one; every probability in this
//! crate is the probability of the part being *normal*.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{detect_outliers, OutlierMethod};
use crate::seeded_rng;

/// Binary part class. `Normal` is the positive class throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Class {
    Defective = 0,
    Normal = 1,
}

impl Class {
    pub fn from_value(v: f64) -> Option<Class> {
        if v == 0.0 {
            Some(Class::Defective)
        } else if v == 1.0 {
            Some(Class::Normal)
        } else {
            None
        }
    }

    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_normal(self) -> bool {
        self == Class::Normal
    }
}

impl From<Class> for u8 {
    fn from(c: Class) -> u8 {
        c as u8
    }
}

impl TryFrom<u8> for Class {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(Class::Defective),
            1 => Ok(Class::Normal),
            other => Err(format!("class must be 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Class::Normal => f.write_str("normal"),
            Class::Defective => f.write_str("defective"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Range,
    Set,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Predictor,
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<f64>,
    pub role: Role,
}

impl FieldSpec {
    pub fn range(name: &str, min: f64, max: f64) -> Self {
        FieldSpec {
            name: name.to_string(),
            kind: FieldKind::Range,
            min: Some(min),
            max: Some(max),
            levels: Vec::new(),
            role: Role::Predictor,
        }
    }

    pub fn set(name: &str, levels: Vec<f64>) -> Self {
        FieldSpec {
            name: name.to_string(),
            kind: FieldKind::Set,
            min: None,
            max: None,
            levels,
            role: Role::Predictor,
        }
    }

    pub fn label(name: &str) -> Self {
        FieldSpec {
            role: Role::Label,
            ..FieldSpec::set(name, vec![0.0, 1.0])
        }
    }

    pub fn is_range(&self) -> bool {
        self.kind == FieldKind::Range
    }

    pub fn level_index(&self, v: f64) -> Option<usize> {
        self.levels.iter().position(|&l| l == v)
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            FieldKind::Range => {
                let (Some(min), Some(max)) = (self.min, self.max) else {
                    return Err(Error::Schema(format!(
                        "range field \"{}\" needs min and max",
                        self.name
                    )));
                };
                if !(min < max) {
                    return Err(Error::Schema(format!(
                        "range field \"{}\" needs min < max",
                        self.name
                    )));
                }
                if !self.levels.is_empty() {
                    return Err(Error::Schema(format!(
                        "range field \"{}\" cannot have levels",
                        self.name
                    )));
                }
            }
            FieldKind::Set => {
                if self.levels.is_empty() {
                    return Err(Error::Schema(format!(
                        "set field \"{}\" needs at least one level",
                        self.name
                    )));
                }
                if self.min.is_some() || self.max.is_some() {
                    return Err(Error::Schema(format!(
                        "set field \"{}\" cannot have min/max",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Ordered list of fields. Exactly one field is the binary label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct Schema {
    pub name: String,
    pub fields: Vec<FieldSpec>,
    #[serde(skip)]
    label_pos: usize,
}

#[derive(Deserialize)]
struct RawSchema {
    #[serde(default)]
    name: String,
    fields: Vec<FieldSpec>,
}

impl TryFrom<RawSchema> for Schema {
    type Error = Error;
    fn try_from(raw: RawSchema) -> Result<Self> {
        Schema::new(raw.name, raw.fields)
    }
}

pub const MOLD_TEMPERATURE: &str = "Mold temprature";
pub const MELTING_TEMPERATURE: &str = "Melting temprature";
pub const HARDNESS: &str = "Hardness";
pub const MACHINING: &str = "Machining";
pub const BLACK_PIECES: &str = "Prevet the black pieces";
pub const DISTANCE: &str = "Distance between sensitive points and umbilical";
pub const PREVENTING_DAMAGE: &str = "Preventing damage";
pub const EFFICIENCY: &str = "Efficiency";

impl Schema {
    pub fn new(name: impl Into<String>, fields: Vec<FieldSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &fields {
            f.validate()?;
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate field \"{}\"", f.name)));
            }
        }
        let labels: Vec<usize> = fields
            .iter()
            .enumerate()
            .filter(|(_, f)| f.role == Role::Label)
            .map(|(i, _)| i)
            .collect();
        if labels.len() != 1 {
            return Err(Error::Schema(format!(
                "exactly one label field required, found {}",
                labels.len()
            )));
        }
        let label = &fields[labels[0]];
        let mut lv = label.levels.clone();
        lv.sort_by(f64::total_cmp);
        if label.kind != FieldKind::Set || lv != [0.0, 1.0] {
            return Err(Error::Schema(format!(
                "label \"{}\" must be a set field with levels {{0, 1}}",
                label.name
            )));
        }
        Ok(Schema {
            name: name.into(),
            fields,
            label_pos: labels[0],
        })
    }

    /// Seven predictors and the Efficiency label, with the reference bounds.
    /// Names keep the original sensor-sheet spellings ("temprature").
    pub fn reference() -> Self {
        Schema::new(
            "engine-bracket",
            vec![
                FieldSpec::range(MOLD_TEMPERATURE, 54.0, 5343.0),
                FieldSpec::range(MELTING_TEMPERATURE, 65.0, 2000.0),
                FieldSpec::range(HARDNESS, 5.0, 700.0),
                FieldSpec::range(MACHINING, 0.01, 756.0),
                FieldSpec::set(BLACK_PIECES, vec![0.0, 1.0]),
                FieldSpec::range(DISTANCE, 2.0, 200.0),
                FieldSpec::range(PREVENTING_DAMAGE, 0.0, 1.0),
                FieldSpec::label(EFFICIENCY),
            ],
        )
        .expect("reference schema is valid")
    }

    pub fn label(&self) -> &FieldSpec {
        &self.fields[self.label_pos]
    }

    pub fn label_position(&self) -> usize {
        self.label_pos
    }

    pub fn predictors(&self) -> impl Iterator<Item = &FieldSpec> {
        self.fields.iter().filter(|f| f.role == Role::Predictor)
    }

    pub fn predictor_count(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn predictor(&self, index: usize) -> &FieldSpec {
        self.predictors().nth(index).expect("predictor index in range")
    }

    pub fn predictor_names(&self) -> Vec<String> {
        self.predictors().map(|f| f.name.clone()).collect()
    }

    /// Position of a predictor among predictors (not among all fields).
    pub fn predictor_index(&self, name: &str) -> Option<usize> {
        self.predictors().position(|f| f.name == name)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// Same schema with some predictors removed.
    pub fn without_predictors(&self, names: &[String]) -> Schema {
        let fields = self
            .fields
            .iter()
            .filter(|f| f.role == Role::Label || !names.contains(&f.name))
            .cloned()
            .collect();
        Schema::new(self.name.clone(), fields).expect("subset of a valid schema is valid")
    }

    /// Same schema with one predictor's spec replaced.
    pub fn with_predictor(&self, index: usize, spec: FieldSpec) -> Schema {
        let mut fields = self.fields.clone();
        let pos = self
            .fields
            .iter()
            .enumerate()
            .filter(|(_, f)| f.role == Role::Predictor)
            .nth(index)
            .map(|(i, _)| i)
            .expect("predictor index in range");
        fields[pos] = spec;
        Schema::new(self.name.clone(), fields).expect("replacement keeps schema valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub values: Vec<Option<f64>>,
    pub label: Option<Class>,
}

impl Record {
    pub fn new(values: Vec<Option<f64>>, label: Option<Class>) -> Self {
        Record { values, label }
    }

    pub fn complete(values: &[f64], label: Class) -> Self {
        Record {
            values: values.iter().copied().map(Some).collect(),
            label: Some(label),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }
}

/// A schema plus conforming records. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    records: Vec<Record>,
}

impl Dataset {
    pub fn new(schema: Schema, records: Vec<Record>) -> Result<Self> {
        let p = schema.predictor_count();
        for (row, r) in records.iter().enumerate() {
            if r.values.len() != p {
                return Err(Error::Conformance {
                    row,
                    reason: format!("expected {p} predictor values, got {}", r.values.len()),
                });
            }
            for (spec, v) in schema.predictors().zip(&r.values) {
                if let Some(v) = v {
                    if !v.is_finite() {
                        return Err(Error::Conformance {
                            row,
                            reason: format!("non-finite value in \"{}\"", spec.name),
                        });
                    }
                    if spec.kind == FieldKind::Set && spec.level_index(*v).is_none() {
                        return Err(Error::Conformance {
                            row,
                            reason: format!("{v} is not a level of \"{}\"", spec.name),
                        });
                    }
                }
            }
        }
        Ok(Dataset { schema, records })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_parts(self) -> (Schema, Vec<Record>) {
        (self.schema, self.records)
    }

    pub fn column(&self, index: usize) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.values[index]).collect()
    }

    pub fn labels(&self) -> Vec<Option<Class>> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Count of (defective, normal) labels; unlabeled records are ignored.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0, 0];
        for r in &self.records {
            if let Some(l) = r.label {
                c[l.index()] += 1;
            }
        }
        c
    }

    /// Majority label, ties going to normal.
    pub fn majority_class(&self) -> Class {
        let [d, n] = self.class_counts();
        if n >= d {
            Class::Normal
        } else {
            Class::Defective
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    pub fn with_records(&self, records: Vec<Record>) -> Result<Dataset> {
        Dataset::new(self.schema.clone(), records)
    }

    /// Drops records with no label.
    pub fn labeled(&self) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: self
                .records
                .iter()
                .filter(|r| r.label.is_some())
                .cloned()
                .collect(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        write_delimited(self, &mut buf, &LoadOptions::default()).expect("in-memory write");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub missing_token: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: b',',
            missing_token: String::new(),
        }
    }
}

pub fn load_delimited(path: &Path, schema: &Schema, options: &LoadOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_delimited(file, schema, options)
}

pub fn read_delimited<R: Read>(reader: R, schema: &Schema, options: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    for (pos, spec) in schema.fields.iter().enumerate() {
        match header.get(pos) {
            Some(h) if h == spec.name => {}
            other => {
                return Err(Error::HeaderMismatch {
                    position: pos,
                    expected: spec.name.clone(),
                    found: other.unwrap_or("").to_string(),
                })
            }
        }
    }
    if header.len() != schema.fields.len() {
        return Err(Error::HeaderMismatch {
            position: schema.fields.len(),
            expected: String::new(),
            found: header.get(schema.fields.len()).unwrap_or("").to_string(),
        });
    }

    let label_pos = schema.label_position();
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let mut values = Vec::with_capacity(schema.predictor_count());
        let mut label = None;
        for (pos, spec) in schema.fields.iter().enumerate() {
            let cell = row.get(pos).unwrap_or("");
            let value = if cell == options.missing_token {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| Error::Parse {
                    row: row_no,
                    column: spec.name.clone(),
                    value: cell.to_string(),
                })?)
            };
            if pos == label_pos {
                label = match value {
                    None => None,
                    Some(v) => Some(Class::from_value(v).ok_or_else(|| Error::Parse {
                        row: row_no,
                        column: spec.name.clone(),
                        value: cell.to_string(),
                    })?),
                };
            } else {
                values.push(value);
            }
        }
        records.push(Record { values, label });
    }
    Dataset::new(schema.clone(), records)
}

pub fn save_delimited(dataset: &Dataset, path: &Path, options: &LoadOptions) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_delimited(dataset, file, options)
}

pub fn write_delimited<W: Write>(dataset: &Dataset, writer: W, options: &LoadOptions) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(options.delimiter)
        .from_writer(writer);
    let schema = dataset.schema();
    w.write_record(schema.fields.iter().map(|f| f.name.as_str()))?;
    let label_pos = schema.label_position();
    let fmt = |v: Option<f64>| match v {
        Some(v) => format!("{v}"),
        None => options.missing_token.clone(),
    };
    for r in dataset.records() {
        let mut preds = r.values.iter();
        let row: Vec<String> = (0..schema.fields.len())
            .map(|pos| {
                if pos == label_pos {
                    fmt(r.label.map(Class::as_f64))
                } else {
                    fmt(*preds.next().expect("record width matches schema"))
                }
            })
            .collect();
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldProfile {
    pub name: String,
    pub kind: FieldKind,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// `None` for set fields, rendered as "--".
    pub outlier_count: Option<usize>,
    pub null_count: usize,
}

/// Per-field min/max, outlier and null counts, label column included.
///
/// Range fields with too few values for the outlier method report 0 outliers.
pub fn profile(dataset: &Dataset, method: &OutlierMethod) -> Result<Vec<FieldProfile>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let schema = dataset.schema();
    let mut out = Vec::with_capacity(schema.fields.len());
    let mut pred = 0;
    for (pos, spec) in schema.fields.iter().enumerate() {
        let column: Vec<Option<f64>> = if pos == schema.label_position() {
            dataset
                .records()
                .iter()
                .map(|r| r.label.map(Class::as_f64))
                .collect()
        } else {
            let c = dataset.column(pred);
            pred += 1;
            c
        };
        let present: Vec<f64> = column.iter().flatten().copied().collect();
        let min = present.iter().copied().reduce(f64::min);
        let max = present.iter().copied().reduce(f64::max);
        let outlier_count = match spec.kind {
            FieldKind::Set => None,
            FieldKind::Range => Some(match detect_outliers(&column, method) {
                Ok(idx) => idx.len(),
                Err(Error::TooFewValues { .. }) => 0,
                Err(e) => return Err(e),
            }),
        };
        out.push(FieldProfile {
            name: spec.name.clone(),
            kind: spec.kind,
            min,
            max,
            outlier_count,
            null_count: column.len() - present.len(),
        });
    }
    Ok(out)
}

/// Aligned text table in the shape of the field summary sheet.
pub fn render_profile(profiles: &[FieldProfile]) -> String {
    let header = ["#", "Field", "Type", "Min", "Max", "Outliers", "Null values"];
    let num = |v: Option<f64>| v.map_or_else(|| "--".to_string(), |v| format!("{v:.3}"));
    let rows: Vec<[String; 7]> = profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            [
                (i + 1).to_string(),
                p.name.clone(),
                match p.kind {
                    FieldKind::Range => "range".into(),
                    FieldKind::Set => "set".into(),
                },
                num(p.min),
                num(p.max),
                p.outlier_count.map_or_else(|| "--".into(), |c| c.to_string()),
                match p.kind {
                    FieldKind::Set => "--".into(),
                    FieldKind::Range => p.null_count.to_string(),
                },
            ]
        })
        .collect();
    render_table(&header, &rows)
}

pub(crate) fn render_table<const N: usize>(header: &[&str; N], rows: &[[String; N]]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(cell);
            if i + 1 < N {
                s.extend(std::iter::repeat_n(' ', w - cell.chars().count()));
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

/// Thresholds of the two reference defect rules; the generator labels by them.
pub mod reference_rules {
    pub const MOLD_SPLIT: f64 = 325.5;
    pub const HARDNESS_SPLIT: f64 = 82.0;
    /// Distance bound of the normal rule.
    pub const NORMAL_DISTANCE_MAX: f64 = 23.95;
    /// Distance bound of the defective rule.
    pub const DEFECT_DISTANCE_MAX: f64 = 23.2;

    pub fn is_normal(mold: f64, hardness: f64, distance: f64) -> bool {
        mold <= MOLD_SPLIT && hardness <= HARDNESS_SPLIT && distance <= NORMAL_DISTANCE_MAX
    }

    pub fn is_rule_defect(mold: f64, hardness: f64, distance: f64) -> bool {
        mold > MOLD_SPLIT && hardness > HARDNESS_SPLIT && distance <= DEFECT_DISTANCE_MAX
    }
}

/// Missing cells per range field, as a fraction of n (at least one).
pub const REFERENCE_MISSING_RATE: f64 = 0.005;
/// Fraction of records carrying a far-tail value in each non-rule range field.
pub const REFERENCE_TAIL_RATE: f64 = 0.01;
/// Fraction of out-of-threshold defect values drawn from the far tail.
pub const REFERENCE_DEFECT_TAIL_RATE: f64 = 0.05;

/// Region a generated defective record is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DefectRegion {
    /// High mold temperature, high hardness, short distance.
    RuleDefect,
    HighMold,
    HighHardness,
    LongDistance,
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Draws for the three rule-bearing fields. Values just past a threshold are
/// more likely than far ones, so learned thresholds land close to the rules.
pub(crate) struct RuleFieldSampler;

impl RuleFieldSampler {
    const MOLD_HIGH_BULK: f64 = 650.0;
    const HARDNESS_HIGH_BULK: f64 = 160.0;
    const DISTANCE_HIGH_BULK: f64 = 45.0;

    fn above(rng: &mut ChaCha8Rng, threshold: f64, bulk_max: f64, hard_max: f64) -> f64 {
        let v = if rng.random::<f64>() < REFERENCE_DEFECT_TAIL_RATE {
            rng.random_range(bulk_max..=hard_max)
        } else {
            let u: f64 = rng.random();
            threshold + (bulk_max - threshold) * u * u
        };
        round3(v).max(threshold + 0.001).min(hard_max)
    }

    fn at_most(rng: &mut ChaCha8Rng, lo: f64, threshold: f64) -> f64 {
        round3(rng.random_range(lo..=threshold)).min(threshold)
    }

    pub(crate) fn mold_normal(rng: &mut ChaCha8Rng) -> f64 {
        Self::at_most(rng, 54.0, reference_rules::MOLD_SPLIT)
    }

    pub(crate) fn mold_high(rng: &mut ChaCha8Rng) -> f64 {
        Self::above(rng, reference_rules::MOLD_SPLIT, Self::MOLD_HIGH_BULK, 5343.0)
    }

    pub(crate) fn hardness_normal(rng: &mut ChaCha8Rng) -> f64 {
        Self::at_most(rng, 5.0, reference_rules::HARDNESS_SPLIT)
    }

    pub(crate) fn hardness_high(rng: &mut ChaCha8Rng) -> f64 {
        Self::above(rng, reference_rules::HARDNESS_SPLIT, Self::HARDNESS_HIGH_BULK, 700.0)
    }

    pub(crate) fn distance_normal(rng: &mut ChaCha8Rng) -> f64 {
        Self::at_most(rng, 2.0, reference_rules::NORMAL_DISTANCE_MAX)
    }

    pub(crate) fn distance_defect(rng: &mut ChaCha8Rng) -> f64 {
        Self::at_most(rng, 2.0, reference_rules::DEFECT_DISTANCE_MAX)
    }

    pub(crate) fn distance_long(rng: &mut ChaCha8Rng) -> f64 {
        Self::above(
            rng,
            reference_rules::NORMAL_DISTANCE_MAX,
            Self::DISTANCE_HIGH_BULK,
            200.0,
        )
    }

    /// (mold, hardness, distance) for a record of the given region.
    pub(crate) fn defect(rng: &mut ChaCha8Rng, region: DefectRegion) -> (f64, f64, f64) {
        match region {
            DefectRegion::RuleDefect => (
                Self::mold_high(rng),
                Self::hardness_high(rng),
                Self::distance_defect(rng),
            ),
            DefectRegion::HighMold => (
                Self::mold_high(rng),
                Self::hardness_normal(rng),
                Self::distance_defect(rng),
            ),
            DefectRegion::HighHardness => (
                Self::mold_normal(rng),
                Self::hardness_high(rng),
                Self::distance_defect(rng),
            ),
            DefectRegion::LongDistance => (
                Self::mold_normal(rng),
                Self::hardness_normal(rng),
                Self::distance_long(rng),
            ),
        }
    }
}

fn clamp_draw(rng: &mut ChaCha8Rng, dist: &Normal<f64>, lo: f64, hi: f64) -> f64 {
    round3(dist.sample(rng)).clamp(lo, hi)
}

/// Reference generator: `n` parts over the reference schema, `round(n·f)` of
/// them defective.
///
/// Normal parts satisfy the normal rule (mold ≤ 325.5, hardness ≤ 82,
/// distance ≤ 23.95). Half of the defective parts fall in the defective-rule
/// region; the rest each violate exactly one of the normal rule's conditions,
/// so the label is `normal iff normal rule holds`. Non-rule fields follow
/// class-independent distributions with a 1% far tail.
///
/// Each range field gets `max(1, round(0.005·n))` missing cells. Schema
/// bounds are planted as exact values where the class mix allows (e.g. the
/// 5343 mold value needs a high-mold defect).
pub fn generate_reference(n: usize, defect_fraction: f64, seed: u64) -> Result<Dataset> {
    if n < 10 {
        return Err(Error::invalid(format!("n must be at least 10, got {n}")));
    }
    if !(0.0..=1.0).contains(&defect_fraction) {
        return Err(Error::invalid(format!(
            "defect fraction must be in [0, 1], got {defect_fraction}"
        )));
    }
    let n_defect = (defect_fraction * n as f64).round() as usize;
    if (defect_fraction > 0.0 && n_defect == 0) || (defect_fraction < 1.0 && n_defect == n) {
        return Err(Error::invalid(format!(
            "n = {n} is too small to realize defect fraction {defect_fraction}"
        )));
    }

    let schema = Schema::reference();
    let mut rng = seeded_rng(seed);
    let melting = Normal::new(680.0, 60.0).expect("valid normal");
    let machining = Normal::new(60.0, 15.0).expect("valid normal");
    let damage = Normal::new(0.5, 0.08).expect("valid normal");

    // Region of each defective record: half rule-region, then the three
    // single-violation regions in turn.
    let n_rule = n_defect.div_ceil(2);
    let regions: Vec<DefectRegion> = (0..n_defect)
        .map(|i| {
            if i < n_rule {
                DefectRegion::RuleDefect
            } else {
                [
                    DefectRegion::HighMold,
                    DefectRegion::HighHardness,
                    DefectRegion::LongDistance,
                ][(i - n_rule) % 3]
            }
        })
        .collect();

    let mut records = Vec::with_capacity(n);
    let mut record_regions: Vec<Option<DefectRegion>> = Vec::with_capacity(n);
    for i in 0..n {
        let region = if i < n_defect { Some(regions[i]) } else { None };
        let (mold, hardness, distance) = match region {
            Some(r) => RuleFieldSampler::defect(&mut rng, r),
            None => (
                RuleFieldSampler::mold_normal(&mut rng),
                RuleFieldSampler::hardness_normal(&mut rng),
                RuleFieldSampler::distance_normal(&mut rng),
            ),
        };
        let tail = |rng: &mut ChaCha8Rng, bulk: &Normal<f64>, lo: f64, hi: f64, low_tail: (f64, f64), high_tail: (f64, f64)| {
            if rng.random::<f64>() < REFERENCE_TAIL_RATE {
                let (a, b) = if rng.random::<bool>() { high_tail } else { low_tail };
                round3(rng.random_range(a..=b))
            } else {
                clamp_draw(rng, bulk, lo, hi)
            }
        };
        let melt = tail(&mut rng, &melting, 65.0, 2000.0, (65.0, 350.0), (1000.0, 2000.0));
        let mach = tail(&mut rng, &machining, 0.01, 756.0, (0.01, 5.0), (150.0, 756.0));
        let dmg = tail(&mut rng, &damage, 0.0, 1.0, (0.0, 0.1), (0.9, 1.0));
        let black = if rng.random::<bool>() { 1.0 } else { 0.0 };
        let label = if region.is_some() {
            Class::Defective
        } else {
            Class::Normal
        };
        debug_assert_eq!(
            label.is_normal(),
            reference_rules::is_normal(mold, hardness, distance)
        );
        records.push(Record::new(
            vec![
                Some(mold),
                Some(melt),
                Some(hardness),
                Some(mach),
                Some(black),
                Some(distance),
                Some(dmg),
            ],
            Some(label),
        ));
        record_regions.push(region);
    }

    // Plant the schema bounds exactly: (predictor, value, eligible region).
    type Eligible = fn(Option<DefectRegion>) -> bool;
    let any: Eligible = |_| true;
    let normal: Eligible = |r| r.is_none();
    let high_mold: Eligible = |r| matches!(r, Some(DefectRegion::RuleDefect | DefectRegion::HighMold));
    let high_hard: Eligible =
        |r| matches!(r, Some(DefectRegion::RuleDefect | DefectRegion::HighHardness));
    let long_dist: Eligible = |r| r == Some(DefectRegion::LongDistance);
    let plants: [(usize, f64, Eligible); 12] = [
        (0, 54.0, normal),
        (0, 5343.0, high_mold),
        (1, 65.0, any),
        (1, 2000.0, any),
        (2, 5.0, normal),
        (2, 700.0, high_hard),
        (3, 0.01, any),
        (3, 756.0, any),
        (5, 2.0, normal),
        (5, 200.0, long_dist),
        (6, 0.0, any),
        (6, 1.0, any),
    ];
    let mut planted: HashSet<(usize, usize)> = HashSet::new();
    let mut used_rows: HashSet<usize> = HashSet::new();
    for (field, value, eligible) in plants {
        let candidates: Vec<usize> = (0..n)
            .filter(|&i| eligible(record_regions[i]) && !used_rows.contains(&i))
            .collect();
        if let Some(&row) = candidates.choose(&mut rng) {
            records[row].values[field] = Some(value);
            planted.insert((row, field));
            used_rows.insert(row);
        }
    }

    let n_missing = ((REFERENCE_MISSING_RATE * n as f64).round() as usize).max(1);
    for (field, spec) in schema.predictors().enumerate() {
        if spec.kind != FieldKind::Range {
            continue;
        }
        let candidates: Vec<usize> = (0..n).filter(|&i| !planted.contains(&(i, field))).collect();
        for &row in candidates.choose_multiple(&mut rng, n_missing) {
            records[row].values[field] = None;
        }
    }

    records.shuffle(&mut rng);
    Dataset::new(schema, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_row_csv() -> String {
        let schema = Schema::reference();
        let header = schema
            .fields
            .iter()
            .map(|f| f.name.as_str())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "{header}\n\
             100,700,50,60,1,10,0.5,1\n\
             200,,60,61,0,11,0.4,1\n\
             400,690,90,59,1,12,0.6,0\n"
        )
    }

    #[test]
    fn loads_rows_with_missing_cell() {
        let ds = read_delimited(
            three_row_csv().as_bytes(),
            &Schema::reference(),
            &LoadOptions::default(),
        )
        .unwrap();
        assert_eq!(ds.len(), 3);
        let prof = profile(&ds, &OutlierMethod::default()).unwrap();
        assert_eq!(prof[1].name, MELTING_TEMPERATURE);
        assert_eq!(prof[1].null_count, 1);
        assert!(prof.iter().enumerate().all(|(i, p)| i == 1 || p.null_count == 0));
        assert_eq!(ds.records()[2].label, Some(Class::Defective));
    }

    #[test]
    fn header_mismatch_names_column() {
        let text = three_row_csv().replace("Hardness", "Hardnes");
        let err = read_delimited(text.as_bytes(), &Schema::reference(), &LoadOptions::default())
            .unwrap_err();
        match err {
            Error::HeaderMismatch { expected, .. } => assert_eq!(expected, HARDNESS),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_string(text).contains("Hardness"));
    }

    fn err_string(text: String) -> String {
        read_delimited(text.as_bytes(), &Schema::reference(), &LoadOptions::default())
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn unparseable_cell_reports_row_and_column() {
        let text = three_row_csv().replace("59", "abc");
        match read_delimited(text.as_bytes(), &Schema::reference(), &LoadOptions::default()) {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!(row, 3);
                assert_eq!(column, MACHINING);
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn set_level_violation_rejected() {
        let text = three_row_csv().replace("100,700,50,60,1", "100,700,50,60,2");
        assert!(matches!(
            read_delimited(text.as_bytes(), &Schema::reference(), &LoadOptions::default()),
            Err(Error::Conformance { .. })
        ));
    }

    #[test]
    fn schema_invariants() {
        let s = Schema::reference();
        assert_eq!(s.fields.len(), 8);
        assert_eq!(s.predictor_count(), 7);
        assert_eq!(s.label().name, EFFICIENCY);
        let dup = Schema::new(
            "x",
            vec![
                FieldSpec::range("a", 0.0, 1.0),
                FieldSpec::range("a", 0.0, 2.0),
                FieldSpec::label("y"),
            ],
        );
        assert!(matches!(dup, Err(Error::Schema(_))));
        let bad_range = Schema::new(
            "x",
            vec![FieldSpec::range("a", 1.0, 1.0), FieldSpec::label("y")],
        );
        assert!(bad_range.is_err());
        let no_label = Schema::new("x", vec![FieldSpec::range("a", 0.0, 1.0)]);
        assert!(no_label.is_err());
    }

    #[test]
    fn schema_json_round_trip() {
        let s = Schema::reference();
        let text = s.to_json();
        assert!(text.contains("\"kind\": \"range\""));
        assert!(text.contains("\"role\": \"label\""));
        assert_eq!(Schema::from_json(&text).unwrap(), s);
        let invalid = r#"{"name":"x","fields":[{"name":"a","kind":"set","role":"predictor"},
            {"name":"y","kind":"set","levels":[0,1],"role":"label"}]}"#;
        assert!(Schema::from_json(invalid).is_err());
    }

    #[test]
    fn reference_profile_matches_bounds() {
        let ds = generate_reference(1000, 0.10, 7).unwrap();
        let prof = profile(&ds, &OutlierMethod::default()).unwrap();
        let mold = &prof[0];
        assert_eq!(mold.name, MOLD_TEMPERATURE);
        assert_eq!(mold.min, Some(54.0));
        assert_eq!(mold.max, Some(5343.0));
        for (p, spec) in prof.iter().zip(&ds.schema().fields) {
            if spec.is_range() {
                assert_eq!(p.min, spec.min, "{}", p.name);
                assert_eq!(p.max, spec.max, "{}", p.name);
                assert!(p.null_count > 0);
                assert!(p.outlier_count.unwrap() > 0, "{}", p.name);
            } else {
                assert_eq!(p.outlier_count, None);
            }
        }
        let table = render_profile(&prof);
        assert!(table.contains("54.000"));
        assert!(table.contains("5343.000"));
    }

    #[test]
    fn reference_defect_count_and_oracle() {
        let ds = generate_reference(1000, 0.10, 7).unwrap();
        assert_eq!(ds.class_counts(), [100, 900]);
        for r in ds.records() {
            if let (Some(m), Some(h), Some(d)) = (r.values[0], r.values[2], r.values[5]) {
                assert_eq!(
                    r.label.unwrap().is_normal(),
                    reference_rules::is_normal(m, h, d)
                );
            }
        }
    }

    #[test]
    fn zero_fraction_all_normal() {
        let ds = generate_reference(200, 0.0, 1).unwrap();
        assert_eq!(ds.class_counts(), [0, 200]);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_reference(300, 0.1, 42).unwrap().to_csv_string();
        let b = generate_reference(300, 0.1, 42).unwrap().to_csv_string();
        assert_eq!(a, b);
        let c = generate_reference(300, 0.1, 43).unwrap().to_csv_string();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_rejects_bad_arguments() {
        assert!(generate_reference(9, 0.1, 0).is_err());
        assert!(generate_reference(100, 1.5, 0).is_err());
        assert!(generate_reference(10, 0.01, 0).is_err());
        assert!(generate_reference(10, 0.99, 0).is_err());
    }

    #[test]
    fn profile_rejects_empty() {
        let ds = Dataset::new(Schema::reference(), vec![]).unwrap();
        assert!(matches!(
            profile(&ds, &OutlierMethod::default()),
            Err(Error::EmptyDataset)
        ));
    }
}
