//! Fault injection: replace a controlled fraction of records with defective
//! ones to build a labeled benchmark.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    Class, Dataset, DefectRegion, RuleFieldSampler, DISTANCE, HARDNESS, MOLD_TEMPERATURE,
};
use crate::error::{Error, Result};
use crate::preprocess::mean_sd;
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionMode {
    /// Redraw the rule-bearing fields inside the defective-rule region.
    #[default]
    RuleRegion,
    /// Shift range fields by `distortion_scale` standard deviations.
    FieldDistortion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionSpec {
    pub fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: InjectionMode,
    #[serde(default = "default_scale")]
    pub distortion_scale: f64,
    /// Fields to distort; empty means every range predictor.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<String>,
}

fn default_scale() -> f64 {
    3.0
}

impl InjectionSpec {
    pub fn new(fraction: f64, seed: u64, mode: InjectionMode) -> Self {
        InjectionSpec {
            fraction,
            seed,
            mode,
            distortion_scale: default_scale(),
            fields: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::invalid(format!(
                "injection fraction must be in [0, 1], got {}",
                self.fraction
            )));
        }
        if !(self.distortion_scale > 0.0) {
            return Err(Error::invalid(format!(
                "distortion scale must be positive, got {}",
                self.distortion_scale
            )));
        }
        Ok(())
    }
}

/// Replaces exactly `round(fraction·n)` records with defective ones labeled 0.
///
/// Returns the new dataset and the sorted indices of the replaced records;
/// every other record is left untouched.
pub fn inject_faults(dataset: &Dataset, spec: &InjectionSpec) -> Result<(Dataset, Vec<usize>)> {
    spec.validate()?;
    let n = dataset.len();
    let count = (spec.fraction * n as f64).round() as usize;
    if count > n {
        return Err(Error::invalid(format!(
            "fraction {} asks for {count} injections but there are {n} records",
            spec.fraction
        )));
    }
    if let Some(row) = dataset.records().iter().position(|r| r.label.is_none()) {
        return Err(Error::Precondition(format!(
            "injection needs a labeled dataset; row {row} has no label"
        )));
    }
    let mut rng = seeded_rng(spec.seed);
    let mut chosen = index::sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();

    let mut records = dataset.records().to_vec();
    match spec.mode {
        InjectionMode::RuleRegion => {
            let schema = dataset.schema();
            let position = |name: &str| {
                schema
                    .predictor_index(name)
                    .filter(|&j| schema.predictor(j).is_range())
                    .ok_or_else(|| {
                        Error::Precondition(format!(
                            "rule_region injection needs range field \"{name}\""
                        ))
                    })
            };
            let (mold, hardness, distance) = (
                position(MOLD_TEMPERATURE)?,
                position(HARDNESS)?,
                position(DISTANCE)?,
            );
            for &i in &chosen {
                let (m, h, d) = RuleFieldSampler::defect(&mut rng, DefectRegion::RuleDefect);
                let r = &mut records[i];
                r.values[mold] = Some(m);
                r.values[hardness] = Some(h);
                r.values[distance] = Some(d);
                r.label = Some(Class::Defective);
            }
        }
        InjectionMode::FieldDistortion => {
            for (j, sd) in distortion_fields(dataset, &spec.fields)? {
                let spec_j = dataset.schema().predictor(j);
                for &i in &chosen {
                    if let Some(v) = records[i].values[j] {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        let shifted = v + sign * spec.distortion_scale * sd;
                        records[i].values[j] = Some(shifted.clamp(
                            spec_j.min.unwrap_or(f64::NEG_INFINITY),
                            spec_j.max.unwrap_or(f64::INFINITY),
                        ));
                    }
                }
            }
            for &i in &chosen {
                records[i].label = Some(Class::Defective);
            }
        }
    }
    log::info!("injected {count} defective records ({:?})", spec.mode);
    Ok((dataset.with_records(records)?, chosen))
}

/// (predictor index, sd) of each field to distort, in predictor order.
fn distortion_fields(dataset: &Dataset, names: &[String]) -> Result<Vec<(usize, f64)>> {
    let schema = dataset.schema();
    let indices: Vec<usize> = if names.is_empty() {
        (0..schema.predictor_count())
            .filter(|&j| schema.predictor(j).is_range())
            .collect()
    } else {
        let mut v = names
            .iter()
            .map(|name| {
                schema
                    .predictor_index(name)
                    .filter(|&j| schema.predictor(j).is_range())
                    .ok_or_else(|| Error::invalid(format!("\"{name}\" is not a range predictor")))
            })
            .collect::<Result<Vec<_>>>()?;
        v.sort_unstable();
        v.dedup();
        v
    };
    indices
        .into_iter()
        .map(|j| {
            let present: Vec<f64> = dataset.column(j).into_iter().flatten().collect();
            if present.len() < 2 {
                return Err(Error::TooFewValues {
                    needed: 2,
                    got: present.len(),
                });
            }
            Ok((j, mean_sd(&present).1))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_reference, reference_rules, Record, Schema};

    fn all_injected<F: Fn(&Record) -> bool>(ds: &Dataset, injected: &[usize], pred: F) -> bool {
        injected.iter().all(|&i| pred(&ds.records()[i]))
    }

    fn all_normal(n: usize) -> Dataset {
        let ds = generate_reference(n, 0.0, 3).unwrap();
        assert_eq!(ds.class_counts()[0], 0);
        ds
    }

    #[test]
    fn hundred_of_thousand() {
        let ds = all_normal(1000);
        let (out, idx) = inject_faults(&ds, &InjectionSpec::new(0.10, 11, InjectionMode::RuleRegion)).unwrap();
        assert_eq!(idx.len(), 100);
        assert_eq!(out.class_counts(), [100, 900]);
        let s = Schema::reference();
        let (m, h, d) = (
            s.predictor_index(MOLD_TEMPERATURE).unwrap(),
            s.predictor_index(HARDNESS).unwrap(),
            s.predictor_index(DISTANCE).unwrap(),
        );
        assert!(all_injected(&out, &idx, |r| {
            reference_rules::is_rule_defect(
                r.values[m].unwrap(),
                r.values[h].unwrap(),
                r.values[d].unwrap(),
            )
        }));
        for i in (0..1000).filter(|i| idx.binary_search(i).is_err()) {
            assert_eq!(out.records()[i], ds.records()[i]);
        }
    }

    #[test]
    fn zero_fraction_is_identity() {
        let ds = all_normal(200);
        let (out, idx) = inject_faults(&ds, &InjectionSpec::new(0.0, 1, InjectionMode::RuleRegion)).unwrap();
        assert!(idx.is_empty());
        assert_eq!(out, ds);
    }

    #[test]
    fn distortion_stays_in_bounds() {
        let ds = all_normal(300);
        let mut spec = InjectionSpec::new(0.2, 5, InjectionMode::FieldDistortion);
        spec.distortion_scale = 50.0;
        let (out, idx) = inject_faults(&ds, &spec).unwrap();
        assert_eq!(idx.len(), 60);
        assert_eq!(out.class_counts()[0], 60);
        let a = inject_faults(&ds, &spec).unwrap();
        assert_eq!(a.0, out);
    }

    #[test]
    fn bad_specs_rejected() {
        let ds = all_normal(50);
        assert!(inject_faults(&ds, &InjectionSpec::new(1.5, 0, InjectionMode::RuleRegion)).is_err());
        let mut spec = InjectionSpec::new(0.1, 0, InjectionMode::FieldDistortion);
        spec.distortion_scale = 0.0;
        assert!(inject_faults(&ds, &spec).is_err());
        spec.distortion_scale = 1.0;
        spec.fields = vec!["Prevet the black pieces".into()];
        assert!(inject_faults(&ds, &spec).is_err());
    }
}
