//! Cleaning and per-model transforms.
//!
//! Quartiles use linear interpolation between closest ranks: for sorted
//! `x[0..n]` the p-quantile is `x[h] + (h - floor h)(x[h+1] - x[h])` with
//! `h = p (n - 1)`. Every statistic is fit on a training split and stored in a
//! [`FittedTransform`]; applying to other data never refits.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FieldKind, FieldSpec, Record, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierKind {
    Iqr,
    Zscore,
}

/// Outlier rule: Tukey fences `[Q1 - k·IQR, Q3 + k·IQR]` or `|z| > k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOutlierMethod")]
pub struct OutlierMethod {
    #[serde(rename = "method")]
    pub kind: OutlierKind,
    pub k: f64,
}

#[derive(Deserialize)]
struct RawOutlierMethod {
    #[serde(default = "default_outlier_kind")]
    method: OutlierKind,
    k: Option<f64>,
}

fn default_outlier_kind() -> OutlierKind {
    OutlierKind::Iqr
}

impl TryFrom<RawOutlierMethod> for OutlierMethod {
    type Error = Error;
    fn try_from(raw: RawOutlierMethod) -> Result<Self> {
        let k = raw.k.unwrap_or(match raw.method {
            OutlierKind::Iqr => 1.5,
            OutlierKind::Zscore => 3.0,
        });
        OutlierMethod::new(raw.method, k)
    }
}

impl Default for OutlierMethod {
    fn default() -> Self {
        OutlierMethod::iqr(1.5)
    }
}

impl OutlierMethod {
    pub fn new(kind: OutlierKind, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::invalid(format!("outlier k must be positive, got {k}")));
        }
        Ok(OutlierMethod { kind, k })
    }

    pub fn iqr(k: f64) -> Self {
        OutlierMethod {
            kind: OutlierKind::Iqr,
            k,
        }
    }

    pub fn zscore(k: f64) -> Self {
        OutlierMethod {
            kind: OutlierKind::Zscore,
            k,
        }
    }

    /// Fewest non-missing values the fences are defined for.
    pub fn min_values(&self) -> usize {
        match self.kind {
            OutlierKind::Iqr => 4,
            OutlierKind::Zscore => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierAction {
    DropRecord,
    #[default]
    ClipToFence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    /// Range fields by mean, set fields by mode.
    #[default]
    Mean,
    /// Every field by its most frequent value.
    Mode,
    DropRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OutlierPlan {
    #[serde(flatten)]
    pub method: OutlierMethod,
    #[serde(default)]
    pub action: OutlierAction,
}

pub const DEFAULT_BINS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessPlan {
    pub outlier: OutlierPlan,
    pub impute: Imputation,
    pub drop_constant: bool,
    pub bins: usize,
}

impl Default for PreprocessPlan {
    fn default() -> Self {
        PreprocessPlan {
            outlier: OutlierPlan::default(),
            impute: Imputation::default(),
            drop_constant: true,
            bins: DEFAULT_BINS,
        }
    }
}

/// Linear-interpolation quantile of an already sorted, nonempty slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn present_sorted(values: &[Option<f64>]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().flatten().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Lower and upper fence of the method over the non-missing values.
pub fn fences(values: &[Option<f64>], method: &OutlierMethod) -> Result<(f64, f64)> {
    let sorted = present_sorted(values);
    if sorted.len() < method.min_values() {
        return Err(Error::TooFewValues {
            needed: method.min_values(),
            got: sorted.len(),
        });
    }
    Ok(match method.kind {
        OutlierKind::Iqr => {
            let q1 = quantile_sorted(&sorted, 0.25);
            let q3 = quantile_sorted(&sorted, 0.75);
            let iqr = q3 - q1;
            (q1 - method.k * iqr, q3 + method.k * iqr)
        }
        OutlierKind::Zscore => {
            let (mean, sd) = mean_sd(&sorted);
            (mean - method.k * sd, mean + method.k * sd)
        }
    })
}

/// Indices of non-missing values outside the fences (iqr) or with `|z| > k`.
pub fn detect_outliers(values: &[Option<f64>], method: &OutlierMethod) -> Result<BTreeSet<usize>> {
    let (lo, hi) = fences(values, method)?;
    let flagged = match method.kind {
        OutlierKind::Iqr => values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.filter(|&v| v < lo || v > hi).map(|_| i))
            .collect(),
        OutlierKind::Zscore => {
            let (mean, sd) = mean_sd(&present_sorted(values));
            if sd == 0.0 {
                return Ok(BTreeSet::new());
            }
            values
                .iter()
                .enumerate()
                .filter_map(|(i, v)| v.filter(|&v| ((v - mean) / sd).abs() > method.k).map(|_| i))
                .collect()
        }
    };
    Ok(flagged)
}

/// Removes predictors whose non-missing values are all equal (or absent).
pub fn remove_constant_fields(dataset: &Dataset) -> (Dataset, Vec<String>) {
    let schema = dataset.schema();
    let removed: Vec<String> = schema
        .predictors()
        .enumerate()
        .filter(|(j, _)| {
            let mut present = dataset.records().iter().filter_map(|r| r.values[*j]);
            match present.next() {
                None => true,
                Some(first) => present.all(|v| v == first),
            }
        })
        .map(|(_, f)| f.name.clone())
        .collect();
    (drop_fields(dataset, &removed), removed)
}

/// Projects a dataset onto the predictors not named in `names`.
pub fn drop_fields(dataset: &Dataset, names: &[String]) -> Dataset {
    if names.is_empty() {
        return dataset.clone();
    }
    let schema = dataset.schema();
    let keep: Vec<usize> = schema
        .predictors()
        .enumerate()
        .filter(|(_, f)| !names.contains(&f.name))
        .map(|(j, _)| j)
        .collect();
    let records = dataset
        .records()
        .iter()
        .map(|r| Record::new(keep.iter().map(|&j| r.values[j]).collect(), r.label))
        .collect();
    Dataset::new(schema.without_predictors(names), records).expect("projection conforms")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FillStep {
    /// Per-predictor fill value.
    Values(Vec<f64>),
    DropIncomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FenceStep {
    pub action: OutlierAction,
    /// Per-predictor fences; `None` for set fields and fields with too few values.
    pub fences: Vec<Option<(f64, f64)>>,
}

/// Statistics learned on a training split, one optional section per step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FittedTransform {
    /// Predictor names of the data this transform was fit on, after dropping.
    pub fields: Vec<String>,
    #[serde(default)]
    pub dropped: Vec<String>,
    #[serde(default)]
    pub outliers: Option<FenceStep>,
    #[serde(default)]
    pub fill: Option<FillStep>,
    /// Per-predictor (mean, sd); `None` for set fields.
    #[serde(default)]
    pub scaling: Option<Vec<Option<(f64, f64)>>>,
    /// Per-predictor interior bin edges; `None` for set fields.
    #[serde(default)]
    pub bins: Option<Vec<Option<Vec<f64>>>>,
}

impl FittedTransform {
    fn for_dataset(dataset: &Dataset) -> Self {
        FittedTransform {
            fields: dataset.schema().predictor_names(),
            ..Default::default()
        }
    }

    fn check_fields(&self, dataset: &Dataset) -> Result<()> {
        let names = dataset.schema().predictor_names();
        if names != self.fields {
            return Err(Error::Precondition(format!(
                "transform fit on fields {:?}, data has {:?}",
                self.fields, names
            )));
        }
        Ok(())
    }

    /// Applies every fitted step, in pipeline order, to unseen data.
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        let mut ds = drop_fields(dataset, &self.dropped);
        self.check_fields(&ds)?;
        if let Some(step) = &self.outliers {
            ds = apply_fences(&ds, step);
        }
        if let Some(fill) = &self.fill {
            ds = apply_fill(&ds, fill);
        }
        if let Some(scaling) = &self.scaling {
            ds = apply_scaling(&ds, scaling)?;
        }
        if let Some(bins) = &self.bins {
            ds = apply_bins(&ds, bins)?;
        }
        Ok(ds)
    }
}

fn apply_fences(dataset: &Dataset, step: &FenceStep) -> Dataset {
    let outside = |j: usize, v: f64| {
        step.fences[j].is_some_and(|(lo, hi)| v < lo || v > hi)
    };
    let records = match step.action {
        OutlierAction::DropRecord => dataset
            .records()
            .iter()
            .filter(|r| {
                !r.values
                    .iter()
                    .enumerate()
                    .any(|(j, v)| v.is_some_and(|v| outside(j, v)))
            })
            .cloned()
            .collect(),
        OutlierAction::ClipToFence => dataset
            .records()
            .iter()
            .map(|r| {
                let values = r
                    .values
                    .iter()
                    .zip(&step.fences)
                    .map(|(v, f)| match (v, f) {
                        (Some(v), Some((lo, hi))) => Some(v.clamp(*lo, *hi)),
                        _ => *v,
                    })
                    .collect();
                Record::new(values, r.label)
            })
            .collect(),
    };
    dataset.with_records(records).expect("fencing keeps conformance")
}

/// Fits fences on range predictors and clips or drops outlying records.
pub fn handle_outliers(
    dataset: &Dataset,
    plan: &PreprocessPlan,
    fitted: Option<&FittedTransform>,
) -> Result<(Dataset, FittedTransform)> {
    let mut out = match fitted {
        Some(f) => {
            f.check_fields(dataset)?;
            f.clone()
        }
        None => FittedTransform::for_dataset(dataset),
    };
    if out.outliers.is_none() {
        let fences = dataset
            .schema()
            .predictors()
            .enumerate()
            .map(|(j, spec)| {
                if spec.kind != FieldKind::Range {
                    return Ok(None);
                }
                match fences(&dataset.column(j), &plan.outlier.method) {
                    Ok(f) => Ok(Some(f)),
                    Err(Error::TooFewValues { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        out.outliers = Some(FenceStep {
            action: plan.outlier.action,
            fences,
        });
    }
    let ds = apply_fences(dataset, out.outliers.as_ref().expect("set above"));
    Ok((ds, out))
}

fn mode(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = sorted[0];
    let mut best_run = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best_run {
            best_run = j - i;
            best = sorted[i];
        }
        i = j;
    }
    best
}

fn apply_fill(dataset: &Dataset, fill: &FillStep) -> Dataset {
    let records = match fill {
        FillStep::DropIncomplete => dataset
            .records()
            .iter()
            .filter(|r| r.is_complete())
            .cloned()
            .collect(),
        FillStep::Values(values) => dataset
            .records()
            .iter()
            .map(|r| {
                Record::new(
                    r.values
                        .iter()
                        .zip(values)
                        .map(|(v, f)| Some(v.unwrap_or(*f)))
                        .collect(),
                    r.label,
                )
            })
            .collect(),
    };
    dataset.with_records(records).expect("imputation keeps conformance")
}

/// Fills missing predictors with training statistics, or drops incomplete rows.
pub fn impute(
    dataset: &Dataset,
    plan: &PreprocessPlan,
    fitted: Option<&FittedTransform>,
) -> Result<(Dataset, FittedTransform)> {
    let mut out = match fitted {
        Some(f) => {
            f.check_fields(dataset)?;
            f.clone()
        }
        None => FittedTransform::for_dataset(dataset),
    };
    if out.fill.is_none() {
        out.fill = Some(match plan.impute {
            Imputation::DropRecord => FillStep::DropIncomplete,
            Imputation::Mean | Imputation::Mode => FillStep::Values(
                dataset
                    .schema()
                    .predictors()
                    .enumerate()
                    .map(|(j, spec)| {
                        let present: Vec<f64> = dataset.column(j).into_iter().flatten().collect();
                        if present.is_empty() {
                            return Err(Error::Degenerate(format!(
                                "field \"{}\" has no values to impute from",
                                spec.name
                            )));
                        }
                        Ok(match (plan.impute, spec.kind) {
                            (Imputation::Mean, FieldKind::Range) => mean_sd(&present).0,
                            _ => mode(&present),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        });
    }
    let ds = apply_fill(dataset, out.fill.as_ref().expect("set above"));
    Ok((ds, out))
}

fn apply_scaling(dataset: &Dataset, scaling: &[Option<(f64, f64)>]) -> Result<Dataset> {
    let records = dataset
        .records()
        .iter()
        .map(|r| {
            let values = r
                .values
                .iter()
                .zip(scaling)
                .map(|(v, s)| match (v, s) {
                    (None, _) => Err(Error::Precondition(
                        "standardize requires imputed data".into(),
                    )),
                    (Some(v), Some((mean, sd))) => Ok(Some((v - mean) / sd)),
                    (Some(v), None) => Ok(Some(*v)),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Record::new(values, r.label))
        })
        .collect::<Result<Vec<_>>>()?;
    dataset.with_records(records)
}

/// Maps each range predictor to `(x - mean) / sd` with training statistics.
pub fn standardize(
    dataset: &Dataset,
    fitted: Option<&FittedTransform>,
) -> Result<(Dataset, FittedTransform)> {
    let mut out = match fitted {
        Some(f) => {
            f.check_fields(dataset)?;
            f.clone()
        }
        None => FittedTransform::for_dataset(dataset),
    };
    if out.scaling.is_none() {
        let mut scaling = Vec::new();
        for (j, spec) in dataset.schema().predictors().enumerate() {
            if spec.kind != FieldKind::Range {
                scaling.push(None);
                continue;
            }
            let col = dataset.column(j);
            if col.iter().any(Option::is_none) {
                return Err(Error::Precondition(format!(
                    "field \"{}\" has missing values; impute first",
                    spec.name
                )));
            }
            let present: Vec<f64> = col.into_iter().flatten().collect();
            if present.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let (mean, sd) = mean_sd(&present);
            if !(sd > 0.0) {
                return Err(Error::Degenerate(format!(
                    "field \"{}\" has zero standard deviation",
                    spec.name
                )));
            }
            scaling.push(Some((mean, sd)));
        }
        out.scaling = Some(scaling);
    }
    let ds = apply_scaling(dataset, out.scaling.as_ref().expect("set above"))?;
    Ok((ds, out))
}

fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e < v)
}

/// Equal-frequency binning. Returns interior edges and per-value bin indices;
/// a value `v` falls in bin `#{edges e : e < v}` (ties go to the lower bin).
///
/// Edges are the `j/bins` quantiles. Duplicate edges and edges that would
/// leave a bin empty are dropped, so heavily tied data yields fewer bins.
pub fn discretize(values: &[f64], bins: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if bins < 2 {
        return Err(Error::invalid(format!("bins must be at least 2, got {bins}")));
    }
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = Vec::with_capacity(bins - 1);
    let mut lower = f64::NEG_INFINITY;
    for j in 1..bins {
        let e = quantile_sorted(&sorted, j as f64 / bins as f64);
        // Keep the edge only if (lower, e] holds data and something lies above e.
        let occupied = sorted.iter().any(|&v| v > lower && v <= e);
        if e > lower && occupied && *sorted.last().unwrap() > e {
            edges.push(e);
            lower = e;
        }
    }
    let assignments = values.iter().map(|&v| bin_of(&edges, v)).collect();
    Ok((edges, assignments))
}

fn apply_bins(dataset: &Dataset, bins: &[Option<Vec<f64>>]) -> Result<Dataset> {
    let mut schema: Schema = dataset.schema().clone();
    for (j, edges) in bins.iter().enumerate() {
        if let Some(edges) = edges {
            let name = schema.predictor(j).name.clone();
            let levels = (0..=edges.len()).map(|b| b as f64).collect();
            schema = schema.with_predictor(j, FieldSpec::set(&name, levels));
        }
    }
    let records = dataset
        .records()
        .iter()
        .map(|r| {
            let values = r
                .values
                .iter()
                .zip(bins)
                .map(|(v, b)| match (v, b) {
                    (None, _) => Err(Error::Precondition(
                        "discretize requires imputed data".into(),
                    )),
                    (Some(v), Some(edges)) => Ok(Some(bin_of(edges, *v) as f64)),
                    (Some(v), None) => Ok(Some(*v)),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Record::new(values, r.label))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(schema, records)
}

/// Replaces each range predictor by its equal-frequency bin index; the
/// resulting fields are set-kind with levels `0..bins`.
pub fn discretize_dataset(
    dataset: &Dataset,
    bins: usize,
    fitted: Option<&FittedTransform>,
) -> Result<(Dataset, FittedTransform)> {
    let mut out = match fitted {
        Some(f) => {
            f.check_fields(dataset)?;
            f.clone()
        }
        None => FittedTransform::for_dataset(dataset),
    };
    if out.bins.is_none() {
        let mut edges = Vec::new();
        for (j, spec) in dataset.schema().predictors().enumerate() {
            if spec.kind != FieldKind::Range {
                edges.push(None);
                continue;
            }
            let col = dataset.column(j);
            if col.iter().any(Option::is_none) {
                return Err(Error::Precondition(format!(
                    "field \"{}\" has missing values; impute first",
                    spec.name
                )));
            }
            let present: Vec<f64> = col.into_iter().flatten().collect();
            edges.push(Some(discretize(&present, bins)?.0));
        }
        out.bins = Some(edges);
    }
    let ds = apply_bins(dataset, out.bins.as_ref().expect("set above"))?;
    Ok((ds, out))
}

/// Final representation a model family expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Cleaned values in original units (threshold trees).
    Raw,
    Standardized,
    Discretized,
}

/// Fits the full cleaning pipeline on `train`: constant drop, outlier
/// handling, imputation, then the representation step.
pub fn fit_pipeline(
    train: &Dataset,
    plan: &PreprocessPlan,
    representation: Representation,
) -> Result<(Dataset, FittedTransform)> {
    let (ds, dropped) = if plan.drop_constant {
        remove_constant_fields(train)
    } else {
        (train.clone(), Vec::new())
    };
    let (ds, fitted) = handle_outliers(&ds, plan, None)?;
    let (ds, fitted) = impute(&ds, plan, Some(&fitted))?;
    let (ds, mut fitted) = match representation {
        Representation::Raw => (ds, fitted),
        Representation::Standardized => standardize(&ds, Some(&fitted))?,
        Representation::Discretized => discretize_dataset(&ds, plan.bins, Some(&fitted))?,
    };
    fitted.dropped = dropped;
    Ok((ds, fitted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Class, FieldSpec};

    fn some(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().copied().map(Some).collect()
    }

    fn tiny(columns: &[Vec<Option<f64>>]) -> Dataset {
        let mut fields: Vec<FieldSpec> = (0..columns.len())
            .map(|j| FieldSpec::range(&format!("f{j}"), -1e9, 1e9))
            .collect();
        fields.push(FieldSpec::label("y"));
        let schema = Schema::new("t", fields).unwrap();
        let n = columns[0].len();
        let records = (0..n)
            .map(|i| {
                Record::new(
                    columns.iter().map(|c| c[i]).collect(),
                    Some(if i % 2 == 0 { Class::Normal } else { Class::Defective }),
                )
            })
            .collect();
        Dataset::new(schema, records).unwrap()
    }

    #[test]
    fn iqr_fences_by_hand() {
        // Q1 = 11, Q3 = 13, fences [8, 16].
        let v = some(&[10.0, 11.0, 12.0, 13.0, 5000.0]);
        assert_eq!(fences(&v, &OutlierMethod::iqr(1.5)).unwrap(), (8.0, 16.0));
        assert_eq!(
            detect_outliers(&v, &OutlierMethod::iqr(1.5)).unwrap(),
            BTreeSet::from([4])
        );
        // Q1 = 2, Q3 = 4, fences [-1, 7].
        let v = some(&[1.0, 2.0, 3.0, 4.0, 100.0]);
        assert_eq!(fences(&v, &OutlierMethod::iqr(1.5)).unwrap(), (-1.0, 7.0));
        assert_eq!(detect_outliers(&v, &OutlierMethod::iqr(1.5)).unwrap().len(), 1);
    }

    #[test]
    fn identical_values_have_no_outliers() {
        let v = some(&[3.0; 10]);
        assert!(detect_outliers(&v, &OutlierMethod::iqr(1.5)).unwrap().is_empty());
        assert!(detect_outliers(&v, &OutlierMethod::zscore(3.0)).unwrap().is_empty());
    }

    #[test]
    fn missing_values_never_flagged() {
        let v = vec![Some(1.0), None, Some(2.0), Some(3.0), Some(4.0), None, Some(100.0)];
        assert_eq!(
            detect_outliers(&v, &OutlierMethod::iqr(1.5)).unwrap(),
            BTreeSet::from([6])
        );
    }

    #[test]
    fn too_few_values() {
        let v = vec![Some(1.0), Some(2.0), None, Some(3.0)];
        assert!(matches!(
            detect_outliers(&v, &OutlierMethod::iqr(1.5)),
            Err(Error::TooFewValues { needed: 4, got: 3 })
        ));
        assert!(detect_outliers(&[Some(1.0)], &OutlierMethod::zscore(3.0)).is_err());
    }

    #[test]
    fn zscore_flags_planted_point() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::seeded_rng(11);
        let mut v: Vec<Option<f64>> = (0..99)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                Some(x.clamp(-2.5, 2.5))
            })
            .collect();
        v.insert(37, Some(-10.0));
        assert_eq!(
            detect_outliers(&v, &OutlierMethod::zscore(3.0)).unwrap(),
            BTreeSet::from([37])
        );
    }

    #[test]
    fn constant_fields() {
        let ds = tiny(&[
            some(&[7.0, 7.0, 7.0, 7.0]),
            vec![Some(7.0), None, Some(7.0), Some(7.0)],
            some(&[1.0, 2.0, 3.0, 4.0]),
        ]);
        let (out, removed) = remove_constant_fields(&ds);
        assert_eq!(removed, vec!["f0".to_string(), "f1".to_string()]);
        assert_eq!(out.schema().predictor_names(), vec!["f2".to_string()]);
        assert_eq!(out.schema().label().name, "y");
        let (again, none) = remove_constant_fields(&out);
        assert!(none.is_empty());
        assert_eq!(again, out);
    }

    #[test]
    fn mean_imputation() {
        let ds = tiny(&[vec![Some(1.0), None, Some(3.0)]]);
        let (out, fitted) = impute(&ds, &PreprocessPlan::default(), None).unwrap();
        assert_eq!(out.column(0), some(&[1.0, 2.0, 3.0]));
        assert_eq!(fitted.fill, Some(FillStep::Values(vec![2.0])));
    }

    #[test]
    fn drop_record_imputation() {
        let mut col = some(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
        col[2] = None;
        col[7] = None;
        let ds = tiny(&[col]);
        let plan = PreprocessPlan {
            impute: Imputation::DropRecord,
            ..Default::default()
        };
        assert_eq!(impute(&ds, &plan, None).unwrap().0.len(), 8);
    }

    #[test]
    fn test_split_uses_train_mean() {
        let train = tiny(&[some(&[1.0, 2.0, 3.0])]);
        let test = tiny(&[vec![Some(100.0), None, Some(300.0)]]);
        let (_, fitted) = impute(&train, &PreprocessPlan::default(), None).unwrap();
        let (out, _) = impute(&test, &PreprocessPlan::default(), Some(&fitted)).unwrap();
        assert_eq!(out.column(0)[1], Some(2.0));
    }

    #[test]
    fn all_missing_field_cannot_be_imputed() {
        let ds = tiny(&[vec![None, None], some(&[1.0, 2.0])]);
        assert!(matches!(
            impute(&ds, &PreprocessPlan::default(), None),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn standardize_by_hand() {
        let ds = tiny(&[some(&[2.0, 4.0, 6.0])]);
        let (out, fitted) = standardize(&ds, None).unwrap();
        assert_eq!(fitted.scaling, Some(vec![Some((4.0, 2.0))]));
        assert_eq!(out.column(0), some(&[-1.0, 0.0, 1.0]));
    }

    #[test]
    fn standardize_rejects_constant() {
        let ds = tiny(&[some(&[5.0, 5.0, 5.0])]);
        assert!(matches!(standardize(&ds, None), Err(Error::Degenerate(_))));
    }

    #[test]
    fn restandardizing_is_identity_statistic() {
        let ds = tiny(&[some(&[1.0, 5.0, 2.0, 9.0, 3.5])]);
        let (once, _) = standardize(&ds, None).unwrap();
        let (_, fitted) = standardize(&once, None).unwrap();
        let (m, s) = fitted.scaling.unwrap()[0].unwrap();
        assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equal_frequency_bins() {
        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        let (edges, a) = discretize(&v, 4).unwrap();
        assert_eq!(edges, vec![2.75, 4.5, 6.25]);
        assert_eq!(a, vec![0, 0, 1, 1, 2, 2, 3, 3]);
        let (_, a) = discretize(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(a, vec![0, 0, 1, 1]);
        let (edges, a) = discretize(&[4.0; 6], 4).unwrap();
        assert!(edges.is_empty());
        assert!(a.iter().all(|&b| b == 0));
    }

    #[test]
    fn heavy_ties_collapse_bins() {
        let (edges, a) = discretize(&[1.0, 1.0, 1.0, 10.0], 4).unwrap();
        assert_eq!(edges, vec![1.0]);
        assert_eq!(a, vec![0, 0, 0, 1]);
        assert!(discretize(&[1.0], 1).is_err());
        assert!(discretize(&[], 3).is_err());
    }

    #[test]
    fn plan_json_keys() {
        let plan: PreprocessPlan = serde_json::from_str(
            r#"{"outlier": {"method": "zscore", "action": "drop_record"},
                "impute": "mode", "drop_constant": false, "bins": 7}"#,
        )
        .unwrap();
        assert_eq!(plan.outlier.method, OutlierMethod::zscore(3.0));
        assert_eq!(plan.outlier.action, OutlierAction::DropRecord);
        assert_eq!(plan.impute, Imputation::Mode);
        assert!(!plan.drop_constant);
        assert_eq!(plan.bins, 7);
        let text = serde_json::to_string(&plan).unwrap();
        assert_eq!(serde_json::from_str::<PreprocessPlan>(&text).unwrap(), plan);
        let defaults: PreprocessPlan = serde_json::from_str("{}").unwrap();
        assert_eq!(defaults, PreprocessPlan::default());
        assert!(serde_json::from_str::<PreprocessPlan>(r#"{"outlier":{"k":-1}}"#).is_err());
    }

    #[test]
    fn pipeline_applies_train_statistics() {
        let train = crate::dataset::generate_reference(300, 0.1, 3).unwrap();
        let test = crate::dataset::generate_reference(100, 0.1, 4).unwrap();
        for rep in [
            Representation::Raw,
            Representation::Standardized,
            Representation::Discretized,
        ] {
            let (tr, fitted) = fit_pipeline(&train, &PreprocessPlan::default(), rep).unwrap();
            assert!(tr.records().iter().all(Record::is_complete));
            let te = fitted.apply(&test).unwrap();
            assert_eq!(te.schema(), tr.schema());
            assert_eq!(te.len(), 100);
            assert_eq!(fitted.apply(&train).unwrap(), tr);
        }
    }
}
