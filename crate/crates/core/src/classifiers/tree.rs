//! Tree structure shared by the four tree learners.

use serde::{Deserialize, Serialize};

use crate::dataset::{Class, FieldKind, FieldSpec};
use crate::error::{Error, Result};

/// How a node routes records to its children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Split {
    /// `value <= threshold` goes to child 0, `value > threshold` to child 1.
    Threshold { field: usize, threshold: f64 },
    /// Child `i` receives the levels in `groups[i]`. Groups cover every
    /// level of the field.
    Partition { field: usize, groups: Vec<Vec<f64>> },
}

impl Split {
    pub fn field(&self) -> usize {
        match self {
            Split::Threshold { field, .. } | Split::Partition { field, .. } => *field,
        }
    }

    pub fn child_for(&self, value: f64) -> Option<usize> {
        match self {
            Split::Threshold { threshold, .. } => Some(if value <= *threshold { 0 } else { 1 }),
            Split::Partition { groups, .. } => groups.iter().position(|g| g.contains(&value)),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Split::Threshold { .. } => 2,
            Split::Partition { groups, .. } => groups.len(),
        }
    }
}

/// `counts` are (defective, normal) training records routed here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub counts: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    pub fn leaf(counts: [usize; 2]) -> Self {
        TreeNode {
            counts,
            split: None,
            children: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn total(&self) -> usize {
        self.counts[0] + self.counts[1]
    }

    pub fn majority(&self) -> Class {
        if self.counts[1] >= self.counts[0] {
            Class::Normal
        } else {
            Class::Defective
        }
    }

    pub fn normal_fraction(&self) -> Option<f64> {
        (self.total() > 0).then(|| self.counts[1] as f64 / self.total() as f64)
    }

    pub fn leaves(&self) -> Vec<&TreeNode> {
        if self.is_leaf() {
            vec![self]
        } else {
            self.children.iter().flat_map(|c| c.leaves()).collect()
        }
    }

    pub fn depth(&self) -> usize {
        self.children.iter().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }

    fn collect_fields(&self, out: &mut Vec<usize>) {
        if let Some(s) = &self.split {
            out.push(s.field());
        }
        for c in &self.children {
            c.collect_fields(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub root: TreeNode,
}

impl Tree {
    /// Nodes from the root to the leaf a record reaches.
    pub fn path(&self, values: &[Option<f64>], fields: &[FieldSpec]) -> Result<Vec<&TreeNode>> {
        let mut node = &self.root;
        let mut path = vec![node];
        while let Some(split) = &node.split {
            let f = split.field();
            let v = values[f].ok_or_else(|| Error::MissingValue(fields[f].name.clone()))?;
            let child = split.child_for(v).ok_or_else(|| {
                Error::invalid(format!("{v} is not a level of \"{}\"", fields[f].name))
            })?;
            node = &node.children[child];
            path.push(node);
        }
        Ok(path)
    }

    /// Normal fraction of the reached leaf. Empty leaves defer to the nearest
    /// ancestor that saw training records.
    pub fn proba(&self, values: &[Option<f64>], fields: &[FieldSpec]) -> Result<f64> {
        let path = self.path(values, fields)?;
        Ok(path
            .iter()
            .rev()
            .find_map(|n| n.normal_fraction())
            .unwrap_or(0.5))
    }

    pub fn used_fields(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.root.collect_fields(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Indented text rendering, one line per branch.
    pub fn render(&self, fields: &[FieldSpec]) -> String {
        let mut out = String::new();
        if self.root.is_leaf() {
            out.push_str(&leaf_text(&self.root, None));
            out.push('\n');
        } else {
            render_node(&self.root, fields, 0, None, &mut out);
        }
        out
    }
}

fn leaf_text(node: &TreeNode, fallback: Option<Class>) -> String {
    let class = if node.total() == 0 {
        fallback.unwrap_or(Class::Normal)
    } else {
        node.majority()
    };
    format!(
        "{class} (n={}, defective={})",
        node.total(),
        node.counts[0]
    )
}

/// Display name of child `i`'s branch condition.
pub fn branch_text(split: &Split, i: usize, fields: &[FieldSpec]) -> String {
    let name = &fields[split.field()].name;
    match split {
        Split::Threshold { threshold, .. } => {
            let op = if i == 0 { "<=" } else { ">" };
            format!("{name} {op} {threshold:.3}")
        }
        Split::Partition { groups, .. } => {
            let g = &groups[i];
            if g.len() == 1 {
                format!("{name} = {}", g[0])
            } else {
                let items: Vec<String> = g.iter().map(|v| v.to_string()).collect();
                format!("{name} in {{{}}}", items.join(", "))
            }
        }
    }
}

fn render_node(node: &TreeNode, fields: &[FieldSpec], depth: usize, parent: Option<Class>, out: &mut String) {
    let split = node.split.as_ref().expect("internal node");
    let here = if node.total() > 0 { Some(node.majority()) } else { parent };
    for (i, child) in node.children.iter().enumerate() {
        out.push_str(&"|   ".repeat(depth));
        out.push_str(&branch_text(split, i, fields));
        if child.is_leaf() {
            out.push_str(": ");
            out.push_str(&leaf_text(child, here));
            out.push('\n');
        } else {
            out.push_str(":\n");
            render_node(child, fields, depth + 1, here, out);
        }
    }
}

/// Training rows at a node plus the shared column storage.
pub(crate) struct NodeData<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [Class],
    pub fields: &'a [FieldSpec],
}

impl NodeData<'_> {
    pub fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let mut c = [0, 0];
        for &i in idx {
            c[self.y[i].index()] += 1;
        }
        c
    }

    /// Per-level class counts of a set field over `idx`, in schema level order.
    pub fn level_counts(&self, idx: &[usize], field: usize) -> Vec<[usize; 2]> {
        let spec = &self.fields[field];
        let mut out = vec![[0, 0]; spec.levels.len()];
        for &i in idx {
            let l = spec
                .level_index(self.x[i][field])
                .expect("training data conforms to schema");
            out[l][self.y[i].index()] += 1;
        }
        out
    }

    pub fn partition(&self, idx: &[usize], split: &Split) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); split.arity()];
        for &i in idx {
            let c = split
                .child_for(self.x[i][split.field()])
                .expect("split covers training values");
            parts[c].push(i);
        }
        parts
    }
}

/// Best threshold on a range field: sweeps midpoints between consecutive
/// distinct values, keeping both sides at least `min_leaf`. `score` maps
/// (left counts, right counts) to a value to maximize; ties keep the lowest
/// threshold.
pub(crate) fn best_threshold(
    data: &NodeData<'_>,
    idx: &[usize],
    field: usize,
    min_leaf: usize,
    mut score: impl FnMut([usize; 2], [usize; 2]) -> f64,
) -> Option<(f64, f64)> {
    let mut order: Vec<usize> = idx.to_vec();
    order.sort_by(|&a, &b| data.x[a][field].total_cmp(&data.x[b][field]));
    let total = data.counts(idx);
    let mut left = [0usize, 0];
    let mut best: Option<(f64, f64)> = None;
    for w in 0..order.len().saturating_sub(1) {
        left[data.y[order[w]].index()] += 1;
        let (a, b) = (data.x[order[w]][field], data.x[order[w + 1]][field]);
        if a == b {
            continue;
        }
        let nl = w + 1;
        if nl < min_leaf || order.len() - nl < min_leaf {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let s = score(left, right);
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((a + (b - a) / 2.0, s));
        }
    }
    best
}

pub(crate) fn is_set(spec: &FieldSpec) -> bool {
    spec.kind == FieldKind::Set
}

/// Binary partition of a set field's levels by normal proportion; levels
/// unseen at the node join the larger group. Returns `None` when every
/// seen level falls on one side.
pub(crate) fn proportion_partition(
    spec: &FieldSpec,
    level_counts: &[[usize; 2]],
    node_counts: [usize; 2],
) -> Option<Vec<Vec<f64>>> {
    let node_p = node_counts[1] as f64 / (node_counts[0] + node_counts[1]) as f64;
    let mut low = Vec::new();
    let mut high = Vec::new();
    let mut unseen = Vec::new();
    for (l, c) in level_counts.iter().enumerate() {
        let n = c[0] + c[1];
        if n == 0 {
            unseen.push(spec.levels[l]);
        } else if (c[1] as f64 / n as f64) < node_p {
            low.push(spec.levels[l]);
        } else {
            high.push(spec.levels[l]);
        }
    }
    if low.is_empty() || high.is_empty() {
        return None;
    }
    let n_of = |g: &Vec<f64>| -> usize {
        g.iter()
            .map(|v| {
                let c = level_counts[spec.level_index(*v).unwrap()];
                c[0] + c[1]
            })
            .sum()
    };
    if n_of(&low) >= n_of(&high) {
        low.extend(unseen);
    } else {
        high.extend(unseen);
    }
    low.sort_by(f64::total_cmp);
    high.sort_by(f64::total_cmp);
    Some(vec![low, high])
}
