//! Validation splits, metrics, and the algorithm comparison report.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classifiers::{label_for, predict_proba, train, ModelKind, TrainConfig};
use crate::dataset::{render_table, Class, Dataset};
use crate::error::{Error, Result};
use crate::preprocess::{fit_pipeline, PreprocessPlan};
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    #[default]
    Holdout,
    Kfold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub test_fraction: f64,
    pub k: usize,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            kind: SplitKind::Holdout,
            test_fraction: 0.3,
            k: 5,
            seed: 0,
        }
    }
}

impl SplitPlan {
    pub fn holdout(test_fraction: f64, seed: u64) -> Self {
        SplitPlan {
            kind: SplitKind::Holdout,
            test_fraction,
            seed,
            ..Default::default()
        }
    }

    pub fn kfold(k: usize, seed: u64) -> Self {
        SplitPlan {
            kind: SplitKind::Kfold,
            k,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SplitKind::Holdout if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) => Err(
                Error::invalid(format!("test fraction must be in (0, 1), got {}", self.test_fraction)),
            ),
            SplitKind::Kfold if self.k < 2 => {
                Err(Error::invalid(format!("k must be at least 2, got {}", self.k)))
            }
            _ => Ok(()),
        }
    }
}

/// Stratified (train, test) index pairs, each sorted ascending.
pub fn split_indices(dataset: &Dataset, plan: &SplitPlan) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    plan.validate()?;
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, r) in dataset.records().iter().enumerate() {
        let c = r
            .label
            .ok_or_else(|| Error::Precondition(format!("row {i} has no label")))?;
        by_class[c.index()].push(i);
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::Degenerate("splitting needs both classes present".into()));
    }
    let mut rng = seeded_rng(plan.seed);
    for members in &mut by_class {
        members.shuffle(&mut rng);
    }
    let pairs = match plan.kind {
        SplitKind::Holdout => {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for members in &by_class {
                let t = (plan.test_fraction * members.len() as f64).round() as usize;
                test.extend_from_slice(&members[..t]);
                train.extend_from_slice(&members[t..]);
            }
            if train.is_empty() || test.is_empty() {
                return Err(Error::Degenerate(format!(
                    "test fraction {} leaves an empty split of {} records",
                    plan.test_fraction,
                    dataset.len()
                )));
            }
            vec![(train, test)]
        }
        SplitKind::Kfold => {
            let k = plan.k;
            if let Some(m) = by_class.iter().find(|m| m.len() < k) {
                return Err(Error::Degenerate(format!(
                    "a class has {} records, fewer than k = {k} folds",
                    m.len()
                )));
            }
            // Round-robin across both classes keeps fold sizes within one.
            let mut fold_of = vec![0usize; dataset.len()];
            for (pos, &i) in by_class.iter().flatten().enumerate() {
                fold_of[i] = pos % k;
            }
            (0..k)
                .map(|f| {
                    let (test, train): (Vec<usize>, Vec<usize>) =
                        (0..dataset.len()).partition(|&i| fold_of[i] == f);
                    (train, test)
                })
                .collect()
        }
    };
    Ok(pairs
        .into_iter()
        .map(|(mut a, mut b)| {
            a.sort_unstable();
            b.sort_unstable();
            (a, b)
        })
        .collect())
}

/// Stratified (train, test) dataset pairs.
pub fn split(dataset: &Dataset, plan: &SplitPlan) -> Result<Vec<(Dataset, Dataset)>> {
    Ok(split_indices(dataset, plan)?
        .into_iter()
        .map(|(a, b)| (dataset.subset(&a), dataset.subset(&b)))
        .collect())
}

/// Trapezoidal area under the ROC curve with normal as the positive class.
///
/// Tied scores are stepped through together, so the result equals
/// `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`.
pub fn roc_auc(scores: &[f64], labels: &[Class]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let pos = labels.iter().filter(|c| c.is_normal()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let (tp0, fp0) = (tp, fp);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]].is_normal() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
    }
    Ok(area / (pos as f64 * neg as f64))
}

/// Counts indexed `[actual][predicted]` by class index (0 defective, 1 normal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion(pub [[usize; 2]; 2]);

impl Confusion {
    pub fn add(&mut self, actual: Class, predicted: Class) {
        self.0[actual.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &Confusion) {
        for a in 0..2 {
            for p in 0..2 {
                self.0[a][p] += other.0[a][p];
            }
        }
    }

    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        (self.0[0][0] + self.0[1][1]) as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub kind: ModelKind,
    pub accuracy: f64,
    pub auc: f64,
    /// Summed wall-clock training time over folds.
    pub train_seconds: f64,
    pub unused_fields: usize,
    pub unused_field_names: Vec<String>,
    pub confusion: Confusion,
    pub folds: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Fits preprocessing and the model on each training split, scores each test
/// split, and pools the results.
///
/// Accuracy comes from the summed confusion matrix; AUC is the mean of the
/// per-fold AUCs; a field is unused when no fold's model used it.
pub fn evaluate_model(
    kind: ModelKind,
    dataset: &Dataset,
    preprocess: &PreprocessPlan,
    config: &TrainConfig,
    plan: &SplitPlan,
) -> Result<EvalResult> {
    let folds = split(dataset, plan)?;
    let mut confusion = Confusion::default();
    let mut aucs = Vec::with_capacity(folds.len());
    let mut seconds = 0.0;
    let mut used = BTreeSet::new();
    let mut warnings = Vec::new();
    for (train_ds, test_ds) in &folds {
        let (prepared, fitted) = fit_pipeline(train_ds, preprocess, kind.representation())?;
        let model = train(kind, &prepared, config)?;
        seconds += model.train_seconds;
        used.extend(model.used_fields.iter().cloned());
        warnings.extend(model.warning.clone());
        let test = fitted.apply(test_ds)?;
        let mut scores = Vec::with_capacity(test.len());
        let mut labels = Vec::with_capacity(test.len());
        for r in test.records() {
            let p = predict_proba(&model, r)?;
            let actual = r.label.expect("split data is labeled");
            confusion.add(actual, label_for(p, 0.5));
            scores.push(p);
            labels.push(actual);
        }
        aucs.push(roc_auc(&scores, &labels)?);
    }
    let unused_field_names: Vec<String> = dataset
        .schema()
        .predictor_names()
        .into_iter()
        .filter(|n| !used.contains(n))
        .collect();
    log::info!("{kind}: accuracy {:.4}, {:.3}s", confusion.accuracy(), seconds);
    Ok(EvalResult {
        kind,
        accuracy: confusion.accuracy(),
        auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
        train_seconds: seconds,
        unused_fields: unused_field_names.len(),
        unused_field_names,
        confusion,
        folds: folds.len(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    /// Requested order.
    #[default]
    Input,
    Accuracy,
    Time,
    Auc,
}

impl std::str::FromStr for SortKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input" => Ok(SortKey::Input),
            "accuracy" => Ok(SortKey::Accuracy),
            "time" => Ok(SortKey::Time),
            "auc" => Ok(SortKey::Auc),
            _ => Err(Error::invalid(format!("unknown sort key \"{s}\""))),
        }
    }
}

/// Upper bounds, in seconds, of the processing-time bands.
const TIME_BANDS: [f64; 3] = [60.0, 600.0, 3600.0];

/// Coarse processing-time band such as `"< 60 s"`. Exact timings vary run
/// to run, so reports carry only the band; bands are wide enough that
/// repeated runs land in the same one.
pub fn time_band(seconds: f64) -> String {
    match TIME_BANDS.iter().find(|&&b| seconds < b) {
        Some(b) => format!("< {b} s"),
        None => format!(">= {} s", TIME_BANDS[TIME_BANDS.len() - 1]),
    }
}

fn band_rank(seconds: f64) -> usize {
    TIME_BANDS.iter().take_while(|&&b| seconds >= b).count()
}

pub const REPORT_COLUMNS: [&str; 5] = [
    "Algorithm",
    "Processing time",
    "Accuracy (%)",
    "Unused fields",
    "Area Under Curve",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub results: Vec<EvalResult>,
    /// SHA-256 of the evaluated dataset's CSV text.
    pub dataset_fingerprint: String,
    /// SHA-256 of the configuration that produced the report.
    pub config_fingerprint: String,
    /// Creation time in Unix seconds.
    pub timestamp: u64,
}

/// Serialized form: everything deterministic, timings as bands.
#[derive(Serialize)]
struct ReportRow<'a> {
    algorithm: &'a str,
    kind: ModelKind,
    processing_time: String,
    accuracy_percent: f64,
    unused_fields: usize,
    unused_field_names: &'a [String],
    auc: f64,
    confusion: Confusion,
    folds: usize,
}

#[derive(Serialize)]
struct ReportView<'a> {
    columns: [&'static str; 5],
    rows: Vec<ReportRow<'a>>,
    dataset_fingerprint: &'a str,
    config_fingerprint: &'a str,
}

impl ComparisonReport {
    pub fn sorted(&self, key: SortKey) -> ComparisonReport {
        let mut results = self.results.clone();
        let desc = |a: f64, b: f64| b.total_cmp(&a);
        match key {
            SortKey::Input => {}
            SortKey::Accuracy => results.sort_by(|a, b| desc(a.accuracy, b.accuracy)),
            SortKey::Auc => results.sort_by(|a, b| desc(a.auc, b.auc)),
            SortKey::Time => results.sort_by_key(|r| band_rank(r.train_seconds)),
        }
        ComparisonReport {
            results,
            ..self.clone()
        }
    }

    fn cells(r: &EvalResult) -> [String; 4] {
        [
            time_band(r.train_seconds),
            format!("{:.2}", 100.0 * r.accuracy),
            r.unused_fields.to_string(),
            format!("{:.3}", r.auc),
        ]
    }

    fn footer(&self) -> String {
        format!(
            "dataset sha256: {}\nconfig sha256: {}\n",
            self.dataset_fingerprint, self.config_fingerprint
        )
    }

    /// Aligned text table with a fingerprint footer.
    pub fn render_text(&self) -> String {
        let rows: Vec<[String; 5]> = self
            .results
            .iter()
            .map(|r| {
                let [a, b, c, d] = Self::cells(r);
                [r.kind.display_name().to_string(), a, b, c, d]
            })
            .collect();
        let mut out = render_table(&REPORT_COLUMNS, &rows);
        out.push('\n');
        out.push_str(&self.footer());
        out
    }

    /// Comma-delimited table; fingerprints follow as `#` comment lines.
    pub fn render_delimited(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_COLUMNS).expect("write to memory");
        for r in &self.results {
            let [a, b, c, d] = Self::cells(r);
            w.write_record([r.kind.display_name(), &a, &b, &c, &d])
                .expect("write to memory");
        }
        let mut out = String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8");
        for line in self.footer().lines() {
            writeln!(out, "# {line}").unwrap();
        }
        out
    }

    pub fn render_json(&self) -> String {
        let view = ReportView {
            columns: REPORT_COLUMNS,
            rows: self
                .results
                .iter()
                .map(|r| ReportRow {
                    algorithm: r.kind.display_name(),
                    kind: r.kind,
                    processing_time: time_band(r.train_seconds),
                    accuracy_percent: 100.0 * r.accuracy,
                    unused_fields: r.unused_fields,
                    unused_field_names: &r.unused_field_names,
                    auc: r.auc,
                    confusion: r.confusion,
                    folds: r.folds,
                })
                .collect(),
            dataset_fingerprint: &self.dataset_fingerprint,
            config_fingerprint: &self.config_fingerprint,
        };
        serde_json::to_string_pretty(&view).expect("report serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
}

#[derive(Serialize)]
struct CompareSettings<'a> {
    kinds: &'a [ModelKind],
    preprocess: &'a PreprocessPlan,
    train: &'a TrainConfig,
    split: &'a SplitPlan,
}

/// Evaluates each kind in order on the same splits.
pub fn compare(
    kinds: &[ModelKind],
    dataset: &Dataset,
    preprocess: &PreprocessPlan,
    config: &TrainConfig,
    plan: &SplitPlan,
) -> Result<ComparisonReport> {
    if kinds.is_empty() {
        return Err(Error::invalid("compare needs at least one algorithm"));
    }
    let results = kinds
        .iter()
        .map(|&k| evaluate_model(k, dataset, preprocess, config, plan))
        .collect::<Result<Vec<_>>>()?;
    let settings = CompareSettings {
        kinds,
        preprocess,
        train: config,
        split: plan,
    };
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    Ok(ComparisonReport {
        results,
        dataset_fingerprint: sha256_hex(dataset.to_csv_string().as_bytes()),
        config_fingerprint: sha256_hex(
            serde_json::to_string(&settings).expect("settings serialize").as_bytes(),
        ),
        timestamp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_reference, FieldSpec, Record, Schema};

    fn classes(bits: &[u8]) -> Vec<Class> {
        bits.iter().map(|&b| Class::try_from(b).unwrap()).collect()
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1], &classes(&[1, 1, 0])).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 4], &classes(&[1, 0, 1, 0])).unwrap(), 0.5);
        let got = roc_auc(&[0.9, 0.2, 0.4, 0.3], &classes(&[1, 1, 0, 0])).unwrap();
        assert_eq!(got, 0.5);
        assert!(roc_auc(&[0.1, 0.2], &classes(&[1, 1])).is_err());
    }

    fn ninety_ten() -> Dataset {
        let schema = Schema::new("t", vec![FieldSpec::range("x", 0.0, 100.0), FieldSpec::label("y")]).unwrap();
        let records = (0..100)
            .map(|i| Record::complete(&[i as f64], if i < 10 { Class::Defective } else { Class::Normal }))
            .collect();
        Dataset::new(schema, records).unwrap()
    }

    #[test]
    fn stratified_holdout() {
        let ds = ninety_ten();
        let pairs = split_indices(&ds, &SplitPlan::holdout(0.3, 4)).unwrap();
        let (train, test) = &pairs[0];
        assert_eq!(test.len(), 30);
        assert_eq!(test.iter().filter(|&&i| i < 10).count(), 3);
        assert_eq!(train.len() + test.len(), 100);
        assert_eq!(pairs, split_indices(&ds, &SplitPlan::holdout(0.3, 4)).unwrap());
    }

    #[test]
    fn kfold_partitions() {
        let ds = ninety_ten();
        let pairs = split_indices(&ds, &SplitPlan::kfold(5, 9)).unwrap();
        let mut seen = BTreeSet::new();
        for (train, test) in &pairs {
            assert_eq!(test.len(), 20);
            assert_eq!(train.len(), 80);
            assert_eq!(test.iter().filter(|&&i| i < 10).count(), 2);
            for i in test {
                assert!(seen.insert(*i), "folds overlap");
            }
        }
        assert_eq!(seen.len(), 100);
        assert!(split_indices(&ds, &SplitPlan::kfold(11, 0)).is_err());
        assert!(split_indices(&ds, &SplitPlan::kfold(1, 0)).is_err());
    }

    #[test]
    fn constant_model_on_balanced_data() {
        let mut c = Confusion::default();
        let labels = classes(&[0, 1, 0, 1]);
        for &a in &labels {
            c.add(a, Class::Normal);
        }
        assert_eq!(c.accuracy(), 0.5);
        assert_eq!(roc_auc(&[0.7; 4], &labels).unwrap(), 0.5);
    }

    #[test]
    fn time_bands() {
        assert_eq!(time_band(0.2), "< 60 s");
        assert_eq!(time_band(61.0), "< 600 s");
        assert_eq!(time_band(7200.0), ">= 3600 s");
    }

    #[test]
    fn c5_on_reference_is_accurate() {
        let ds = generate_reference(1000, 0.1, 7).unwrap();
        let r = evaluate_model(
            ModelKind::C5,
            &ds,
            &PreprocessPlan::default(),
            &TrainConfig::default(),
            &SplitPlan::holdout(0.3, 7),
        )
        .unwrap();
        assert!(r.accuracy >= 0.95, "{}", r.accuracy);
        assert_eq!(r.confusion.total(), 300);
    }

    #[test]
    fn empty_kind_list_rejected() {
        let ds = ninety_ten();
        let err = compare(&[], &ds, &PreprocessPlan::default(), &TrainConfig::default(), &SplitPlan::default());
        assert!(err.is_err());
    }
}
