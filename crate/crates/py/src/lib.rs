//! Python bindings: datasets, fault injection, training, rule extraction and
//! the comparison report.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use faultbench::dataset::{profile as profile_fields, read_delimited, render_profile, LoadOptions};
use faultbench::preprocess::{fit_pipeline, FittedTransform, OutlierMethod};
use faultbench::{
    ComparisonReport, Dataset, Error, InjectionMode, InjectionSpec, ModelKind, PreprocessPlan, Record, RuleSet,
    Schema, SplitPlan, TrainConfig, TrainedModel,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Training(_) | Error::Precondition(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_kind(name: &str) -> PyResult<ModelKind> {
    name.parse().map_err(py_err)
}

fn train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..TrainConfig::default()
    }
}

/// A table of part records with a schema.
#[pyclass(name = "Dataset", module = "faultbench_py", frozen)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// Synthetic reference data labeled by the two reference defect rules.
    #[staticmethod]
    #[pyo3(signature = (n=1000, defect_fraction=0.10, seed=7))]
    fn generate(n: usize, defect_fraction: f64, seed: u64) -> PyResult<Self> {
        let inner = faultbench::generate_reference(n, defect_fraction, seed).map_err(py_err)?;
        Ok(PyDataset { inner })
    }

    /// Parses delimited text; the reference schema when `schema_json` is None.
    #[staticmethod]
    #[pyo3(signature = (text, schema_json=None, delimiter=",", missing_token=""))]
    fn from_csv(text: &str, schema_json: Option<&str>, delimiter: &str, missing_token: &str) -> PyResult<Self> {
        let schema = match schema_json {
            Some(s) => Schema::from_json(s).map_err(py_err)?,
            None => Schema::reference(),
        };
        let &[delimiter] = delimiter.as_bytes() else {
            return Err(PyValueError::new_err("delimiter must be a single byte"));
        };
        let options = LoadOptions {
            delimiter,
            missing_token: missing_token.to_string(),
        };
        let inner = read_delimited(text.as_bytes(), &schema, &options).map_err(py_err)?;
        Ok(PyDataset { inner })
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    fn schema_json(&self) -> String {
        self.inner.schema().to_json()
    }

    /// Predictor names in column order.
    #[getter]
    fn fields(&self) -> Vec<String> {
        self.inner.schema().predictor_names()
    }

    /// Predictor values per record; None marks a missing cell.
    fn rows(&self) -> Vec<Vec<Option<f64>>> {
        self.inner.records().iter().map(|r| r.values.clone()).collect()
    }

    /// 1 for normal, 0 for defective, None when unlabeled.
    fn labels(&self) -> Vec<Option<u8>> {
        self.inner.labels().into_iter().map(|l| l.map(|c| c.index() as u8)).collect()
    }

    /// (defective, normal) counts.
    fn class_counts(&self) -> (usize, usize) {
        let [d, n] = self.inner.class_counts();
        (d, n)
    }

    #[pyo3(signature = (method="iqr", k=1.5))]
    fn profile(&self, method: &str, k: f64) -> PyResult<String> {
        let method = match method {
            "iqr" => OutlierMethod::iqr(k),
            "zscore" => OutlierMethod::zscore(k),
            other => return Err(PyValueError::new_err(format!("unknown outlier method {other:?}"))),
        };
        Ok(render_profile(&profile_fields(&self.inner, &method).map_err(py_err)?))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let [d, n] = self.inner.class_counts();
        format!("Dataset({} records, {d} defective, {n} normal)", self.inner.len())
    }
}

/// Replaces `round(fraction * n)` records with defective ones.
///
/// Returns the new dataset and the sorted indices that were replaced.
#[pyfunction]
#[pyo3(signature = (dataset, fraction, seed=7, mode="rule_region"))]
fn inject(dataset: &PyDataset, fraction: f64, seed: u64, mode: &str) -> PyResult<(PyDataset, Vec<usize>)> {
    let mode = match mode {
        "rule_region" => InjectionMode::RuleRegion,
        "field_distortion" => InjectionMode::FieldDistortion,
        other => return Err(PyValueError::new_err(format!("unknown injection mode {other:?}"))),
    };
    let (inner, idx) = faultbench::inject_faults(&dataset.inner, &InjectionSpec::new(fraction, seed, mode))
        .map_err(py_err)?;
    Ok((PyDataset { inner }, idx))
}

/// A trained model together with the preprocessing fit alongside it.
#[pyclass(name = "Model", module = "faultbench_py", frozen)]
struct PyModel {
    model: TrainedModel,
    transform: FittedTransform,
    schema: Schema,
}

impl PyModel {
    fn prepare(&self, rows: Vec<Vec<Option<f64>>>) -> PyResult<Dataset> {
        let records: Vec<Record> = rows.into_iter().map(|v| Record::new(v, None)).collect();
        let n = records.len();
        let raw = Dataset::new(self.schema.clone(), records).map_err(py_err)?;
        let ready = self.transform.apply(&raw).map_err(py_err)?;
        if ready.len() != n {
            return Err(PyValueError::new_err("preprocessing dropped records; fill missing values first"));
        }
        Ok(ready)
    }
}

#[pymethods]
impl PyModel {
    #[getter]
    fn kind(&self) -> &'static str {
        self.model.kind.id()
    }

    #[getter]
    fn used_fields(&self) -> Vec<String> {
        self.model.used_fields.iter().cloned().collect()
    }

    #[getter]
    fn warning(&self) -> Option<String> {
        self.model.warning.clone()
    }

    /// P(normal) per row of raw predictor values.
    fn predict_proba(&self, rows: Vec<Vec<Option<f64>>>) -> PyResult<Vec<f64>> {
        let ds = self.prepare(rows)?;
        ds.records()
            .iter()
            .map(|r| faultbench::predict_proba(&self.model, r).map_err(py_err))
            .collect()
    }

    /// 1 (normal) when P(normal) >= threshold, else 0.
    #[pyo3(signature = (rows, threshold=0.5))]
    fn predict(&self, rows: Vec<Vec<Option<f64>>>, threshold: f64) -> PyResult<Vec<u8>> {
        let ds = self.prepare(rows)?;
        ds.records()
            .iter()
            .map(|r| {
                faultbench::predict_label(&self.model, r, threshold)
                    .map(|c| c.index() as u8)
                    .map_err(py_err)
            })
            .collect()
    }

    /// Simplified rules of a tree model, with supports counted on `dataset`.
    fn rules(&self, dataset: &PyDataset) -> PyResult<PyRuleSet> {
        let ds = self.transform.apply(&dataset.inner).map_err(py_err)?;
        let raw = faultbench::extract_rules(&self.model, &ds).map_err(py_err)?;
        Ok(PyRuleSet {
            inner: faultbench::simplify(&raw),
            transform: self.transform.clone(),
            schema: self.schema.clone(),
        })
    }

    fn render_tree(&self) -> Option<String> {
        self.model.render_tree()
    }

    fn to_json(&self) -> String {
        self.model.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.model.kind.display_name())
    }
}

/// Fits preprocessing for the kind's representation, then trains on all of `dataset`.
#[pyfunction]
#[pyo3(signature = (kind, dataset, seed=7))]
fn train(kind: &str, dataset: &PyDataset, seed: u64) -> PyResult<PyModel> {
    let kind = parse_kind(kind)?;
    let (prepared, transform) =
        fit_pipeline(&dataset.inner, &PreprocessPlan::default(), kind.representation()).map_err(py_err)?;
    let model = faultbench::train(kind, &prepared, &train_config(seed)).map_err(py_err)?;
    Ok(PyModel {
        model,
        transform,
        schema: dataset.inner.schema().clone(),
    })
}

#[pyclass(name = "RuleSet", module = "faultbench_py", frozen)]
struct PyRuleSet {
    inner: RuleSet,
    transform: FittedTransform,
    schema: Schema,
}

#[pymethods]
impl PyRuleSet {
    fn to_prose(&self) -> String {
        self.inner.to_prose()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __len__(&self) -> usize {
        self.inner.rules.len()
    }

    /// Class (1 normal, 0 defective) each row falls into.
    fn apply(&self, rows: Vec<Vec<Option<f64>>>) -> PyResult<Vec<u8>> {
        let records = rows.into_iter().map(|v| Record::new(v, None)).collect();
        let raw = Dataset::new(self.schema.clone(), records).map_err(py_err)?;
        let ds = self.transform.apply(&raw).map_err(py_err)?;
        ds.records()
            .iter()
            .map(|r| faultbench::apply_rules(&self.inner, r).map(|(c, _)| c.index() as u8).map_err(py_err))
            .collect()
    }
}

#[pyclass(name = "Report", module = "faultbench_py", frozen)]
struct PyReport {
    inner: ComparisonReport,
}

#[pymethods]
impl PyReport {
    fn render_text(&self) -> String {
        self.inner.render_text()
    }

    fn render_csv(&self) -> String {
        self.inner.render_delimited()
    }

    fn to_json(&self) -> String {
        self.inner.render_json()
    }

    /// kind id -> held-out accuracy.
    fn accuracies(&self) -> Vec<(String, f64)> {
        self.inner.results.iter().map(|r| (r.kind.id().to_string(), r.accuracy)).collect()
    }

    /// kind id -> mean held-out AUC.
    fn aucs(&self) -> Vec<(String, f64)> {
        self.inner.results.iter().map(|r| (r.kind.id().to_string(), r.auc)).collect()
    }
}

/// Evaluates each kind on a stratified holdout (or k folds when `k` is given).
#[pyfunction]
#[pyo3(signature = (dataset, algorithms=None, seed=7, test_fraction=0.3, k=None))]
fn compare(
    dataset: &PyDataset,
    algorithms: Option<Vec<String>>,
    seed: u64,
    test_fraction: f64,
    k: Option<usize>,
) -> PyResult<PyReport> {
    let kinds = match algorithms {
        Some(names) => names.iter().map(|n| parse_kind(n)).collect::<PyResult<Vec<_>>>()?,
        None => ModelKind::COMPARISON.to_vec(),
    };
    let split = match k {
        Some(k) => SplitPlan::kfold(k, seed),
        None => SplitPlan::holdout(test_fraction, seed),
    };
    let inner = faultbench::compare(&kinds, &dataset.inner, &PreprocessPlan::default(), &train_config(seed), &split)
        .map_err(py_err)?;
    Ok(PyReport { inner })
}

/// Area under the ROC curve with normal (1) as the positive class.
#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    let labels = labels
        .into_iter()
        .map(|l| {
            faultbench::Class::from_value(l as f64).ok_or_else(|| PyValueError::new_err(format!("label {l} is not 0 or 1")))
        })
        .collect::<PyResult<Vec<_>>>()?;
    faultbench::roc_auc(&scores, &labels).map_err(py_err)
}

#[pymodule]
fn faultbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyRuleSet>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(inject, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add("ALGORITHMS", ModelKind::ALL.iter().map(|k| k.id()).collect::<Vec<_>>())?;
    Ok(())
}
