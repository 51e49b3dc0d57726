//! Conjunctive if-then rules distilled from tree models.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifiers::tree::{Split, TreeNode};
use crate::classifiers::{label_for, TrainedModel};
use crate::dataset::{Class, Dataset, Record};
use crate::error::{Error, Result};

/// The test a condition applies to one field's value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value")]
pub enum Test {
    #[serde(rename = "<=")]
    Le(f64),
    #[serde(rename = ">")]
    Gt(f64),
    /// Single level of a set field.
    #[serde(rename = "=")]
    Eq(f64),
    /// Any of several levels of a set field (multiway partitions).
    #[serde(rename = "in")]
    In(Vec<f64>),
}

impl Test {
    pub fn holds(&self, v: f64) -> bool {
        match self {
            Test::Le(t) => v <= *t,
            Test::Gt(t) => v > *t,
            Test::Eq(l) => v == *l,
            Test::In(ls) => ls.contains(&v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    /// Predictor position in the data the rule set was extracted from.
    pub index: usize,
    pub field: String,
    #[serde(flatten)]
    pub test: Test,
}

impl Condition {
    fn text(&self) -> String {
        let levels = |ls: &[f64]| ls.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        match &self.test {
            Test::Le(t) => format!("{} <= {t:.3}", self.field),
            Test::Gt(t) => format!("{} > {t:.3}", self.field),
            Test::Eq(l) => format!("{} = {l}", self.field),
            Test::In(ls) => format!("{} in {{{}}}", self.field, levels(ls)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub outcome: Class,
    pub support: usize,
    pub confidence: f64,
}

impl Rule {
    /// `None` when a referenced value is missing.
    fn matches(&self, values: &[Option<f64>]) -> Option<bool> {
        for c in &self.conditions {
            if !c.test.holds(values[c.index]?) {
                return Some(false);
            }
        }
        Some(true)
    }

    pub fn prose(&self) -> String {
        let body = self
            .conditions
            .iter()
            .map(Condition::text)
            .collect::<Vec<_>>()
            .join(" and ");
        let head = if body.is_empty() { "always".to_string() } else { body };
        format!("{head} then the part is {}", self.outcome)
    }
}

/// Which rule classified a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fired {
    Rule(usize),
    Default,
}

/// Ordered rules, evaluated first match wins, with a fallback class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    /// Predictor names, in order, of the data the rules index into.
    pub fields: Vec<String>,
    pub rules: Vec<Rule>,
    pub default_class: Class,
}

impl RuleSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rule set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rs: RuleSet = serde_json::from_str(text)?;
        for (k, r) in rs.rules.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.confidence) {
                return Err(Error::invalid(format!("rule {k}: confidence {} outside [0, 1]", r.confidence)));
            }
            for c in &r.conditions {
                if rs.fields.get(c.index) != Some(&c.field) {
                    return Err(Error::invalid(format!(
                        "rule {k}: field \"{}\" is not predictor {}",
                        c.field, c.index
                    )));
                }
            }
        }
        Ok(rs)
    }

    /// One rule per line, then the fallback.
    pub fn to_prose(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.rules.iter().enumerate() {
            writeln!(
                out,
                "Rule {}: {} (support {}, confidence {:.3})",
                i + 1,
                r.prose(),
                r.support,
                r.confidence
            )
            .unwrap();
        }
        writeln!(out, "Otherwise the part is {}", self.default_class).unwrap();
        out
    }

    fn check_width(&self, record: &Record) -> Result<()> {
        if record.values.len() != self.fields.len() {
            return Err(Error::Schema(format!(
                "record has {} predictor values, rules expect {}",
                record.values.len(),
                self.fields.len()
            )));
        }
        Ok(())
    }
}

/// Classifies a record by the first rule whose conditions all hold.
///
/// A missing value in a field that an evaluated condition reads is an error.
pub fn apply_rules(ruleset: &RuleSet, record: &Record) -> Result<(Class, Fired)> {
    ruleset.check_width(record)?;
    for (i, rule) in ruleset.rules.iter().enumerate() {
        match rule.matches(&record.values) {
            Some(true) => return Ok((rule.outcome, Fired::Rule(i))),
            Some(false) => {}
            None => {
                let c = rule
                    .conditions
                    .iter()
                    .find(|c| record.values[c.index].is_none())
                    .expect("a referenced value is missing");
                return Err(Error::MissingValue(c.field.clone()));
            }
        }
    }
    Ok((ruleset.default_class, Fired::Default))
}

fn condition_for(split: &Split, child: usize, model: &TrainedModel) -> Condition {
    let index = split.field();
    let test = match split {
        Split::Threshold { threshold, .. } => {
            if child == 0 {
                Test::Le(*threshold)
            } else {
                Test::Gt(*threshold)
            }
        }
        Split::Partition { groups, .. } => match groups[child].as_slice() {
            [one] => Test::Eq(*one),
            many => Test::In(many.to_vec()),
        },
    };
    Condition {
        index,
        field: model.fields[index].name.clone(),
        test,
    }
}

fn walk(
    node: &TreeNode,
    model: &TrainedModel,
    path: &mut Vec<Condition>,
    inherited: f64,
    out: &mut Vec<(Vec<Condition>, Class)>,
) {
    let proba = node.normal_fraction().unwrap_or(inherited);
    match &node.split {
        None => out.push((path.clone(), label_for(proba, 0.5))),
        Some(split) => {
            for (i, child) in node.children.iter().enumerate() {
                path.push(condition_for(split, i, model));
                walk(child, model, path, proba, out);
                path.pop();
            }
        }
    }
}

fn score(rule: &mut Rule, dataset: &Dataset) {
    let mut support = 0;
    let mut hits = 0;
    for r in dataset.records() {
        if rule.matches(&r.values) == Some(true) {
            support += 1;
            if r.label == Some(rule.outcome) {
                hits += 1;
            }
        }
    }
    rule.support = support;
    rule.confidence = if support == 0 { 0.0 } else { hits as f64 / support as f64 };
}

/// One rule per leaf of a tree model, scored on `dataset`.
///
/// `dataset` must be in the representation the tree was trained on. Rule
/// outcomes match the tree's own `predict_label` at threshold 0.5.
pub fn extract_rules(model: &TrainedModel, dataset: &Dataset) -> Result<RuleSet> {
    let tree = model
        .tree()
        .ok_or_else(|| Error::invalid(format!("{} is not a tree model", model.kind)))?;
    let names = dataset.schema().predictor_names();
    let expected: Vec<String> = model.fields.iter().map(|f| f.name.clone()).collect();
    if names != expected {
        return Err(Error::Schema(format!(
            "model fields {expected:?} do not match dataset fields {names:?}"
        )));
    }
    let mut leaves = Vec::new();
    walk(&tree.root, model, &mut Vec::new(), 0.5, &mut leaves);
    let rules = leaves
        .into_iter()
        .map(|(conditions, outcome)| {
            let mut rule = Rule {
                conditions,
                outcome,
                support: 0,
                confidence: 0.0,
            };
            score(&mut rule, dataset);
            rule
        })
        .collect();
    Ok(RuleSet {
        fields: names,
        rules,
        default_class: dataset.majority_class(),
    })
}

/// Collapses repeated tests on a field to the tightest one and drops rules
/// with zero support.
pub fn simplify(ruleset: &RuleSet) -> RuleSet {
    let rules = ruleset
        .rules
        .iter()
        .filter(|r| r.support > 0)
        .map(|r| Rule {
            conditions: tighten(&r.conditions),
            ..r.clone()
        })
        .collect();
    RuleSet {
        rules,
        ..ruleset.clone()
    }
}

fn tighten(conditions: &[Condition]) -> Vec<Condition> {
    let mut out: Vec<Condition> = Vec::new();
    for c in conditions {
        let same = out.iter_mut().find(|o| {
            o.index == c.index && std::mem::discriminant(&o.test) == std::mem::discriminant(&c.test)
        });
        let Some(o) = same else {
            out.push(c.clone());
            continue;
        };
        o.test = match (&o.test, &c.test) {
            (Test::Le(a), Test::Le(b)) => Test::Le(a.min(*b)),
            (Test::Gt(a), Test::Gt(b)) => Test::Gt(a.max(*b)),
            (Test::In(a), Test::In(b)) => Test::In(a.iter().copied().filter(|v| b.contains(v)).collect()),
            // Two different equalities can never both hold; keep both so
            // the contradiction stays visible.
            (Test::Eq(a), Test::Eq(b)) if a != b => {
                out.push(c.clone());
                continue;
            }
            (t, _) => t.clone(),
        };
    }
    out
}
