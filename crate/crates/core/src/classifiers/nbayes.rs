//! Naive Bayes over categorical predictors with add-one smoothing.

use serde::{Deserialize, Serialize};

use crate::dataset::{Class, FieldSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    /// ln P(class), indexed by class.
    pub log_prior: [f64; 2],
    /// `log_likelihood[field][class][level]` = ln P(level | class).
    pub log_likelihood: Vec<[Vec<f64>; 2]>,
}

impl NaiveBayes {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[Class], fields: &[FieldSpec]) -> Self {
        let mut class_n = [0usize; 2];
        for c in y {
            class_n[c.index()] += 1;
        }
        let n = y.len() as f64;
        let log_prior = [
            (class_n[0] as f64 / n).ln(),
            (class_n[1] as f64 / n).ln(),
        ];
        let log_likelihood = fields
            .iter()
            .enumerate()
            .map(|(j, spec)| {
                let levels = spec.levels.len();
                let mut counts = [vec![0usize; levels], vec![0usize; levels]];
                for (row, c) in x.iter().zip(y) {
                    let l = spec.level_index(row[j]).expect("conforming data");
                    counts[c.index()][l] += 1;
                }
                let table = |c: usize| {
                    counts[c]
                        .iter()
                        .map(|&k| ((k + 1) as f64 / (class_n[c] + levels) as f64).ln())
                        .collect::<Vec<f64>>()
                };
                [table(0), table(1)]
            })
            .collect();
        NaiveBayes {
            log_prior,
            log_likelihood,
        }
    }

    /// Posterior probability of the normal class.
    pub fn proba(&self, values: &[f64], fields: &[FieldSpec]) -> Result<f64> {
        let mut score = self.log_prior;
        for (j, (v, spec)) in values.iter().zip(fields).enumerate() {
            let l = spec
                .level_index(*v)
                .ok_or_else(|| Error::invalid(format!("{v} is not a level of \"{}\"", spec.name)))?;
            score[0] += self.log_likelihood[j][0][l];
            score[1] += self.log_likelihood[j][1][l];
        }
        Ok(1.0 / (1.0 + (score[0] - score[1]).exp()))
    }

    /// Largest absolute log-likelihood ratio over a field's levels.
    pub fn importance(&self) -> Vec<f64> {
        self.log_likelihood
            .iter()
            .map(|[d, n]| {
                d.iter()
                    .zip(n)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}
