//! QUEST: split-variable selection by significance test, then split point by
//! quadratic discriminant.
//!
//! Range fields are scored with a one-way ANOVA F-test of the field against
//! the class, set fields with a Pearson chi-square test; the smallest p-value
//! wins and must be below `quest_alpha`. With two classes the two-means
//! grouping is the classes themselves, so the split point is the root of
//! `p₀ φ(x; μ₀, σ₀) = p₁ φ(x; μ₁, σ₁)` lying between the class means (or
//! nearest their midpoint). Degenerate variances fall back to the midpoint.

use super::criteria::{anova_p_value, table_p_value};
use super::tree::{is_set, proportion_partition, NodeData, Split, Tree, TreeNode};
use super::TreeConfig;

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, var)
}

/// Quadratic-discriminant boundary between two normal classes.
pub fn qda_split_point(defective: &[f64], normal: &[f64]) -> f64 {
    let (m0, v0) = moments(defective);
    let (m1, v1) = moments(normal);
    let mid = 0.5 * (m0 + m1);
    let scale = (m0.abs() + m1.abs()).max(1.0);
    if v0 <= 1e-12 * scale * scale || v1 <= 1e-12 * scale * scale {
        return mid;
    }
    let n = (defective.len() + normal.len()) as f64;
    let (p0, p1) = (defective.len() as f64 / n, normal.len() as f64 / n);
    let a = 1.0 / (2.0 * v1) - 1.0 / (2.0 * v0);
    let b = m0 / v0 - m1 / v1;
    let c = m1 * m1 / (2.0 * v1) - m0 * m0 / (2.0 * v0) + (p0 * v1.sqrt() / (p1 * v0.sqrt())).ln();
    let roots: Vec<f64> = if a.abs() < 1e-12 * (1.0 / v0 + 1.0 / v1) {
        if b == 0.0 {
            vec![]
        } else {
            vec![-c / b]
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            vec![]
        } else {
            let s = disc.sqrt();
            // Numerically stable pair of roots.
            let q = -0.5 * (b + b.signum() * s);
            let mut r = vec![q / a];
            if q != 0.0 {
                r.push(c / q);
            }
            r
        }
    };
    let (lo, hi) = (m0.min(m1), m0.max(m1));
    roots
        .iter()
        .copied()
        .filter(|r| r.is_finite())
        .min_by(|x, y| {
            let dx = if (lo..=hi).contains(x) { 0.0 } else { (x - mid).abs() };
            let dy = if (lo..=hi).contains(y) { 0.0 } else { (y - mid).abs() };
            dx.total_cmp(&dy).then((x - mid).abs().total_cmp(&(y - mid).abs()))
        })
        .unwrap_or(mid)
}

fn field_p_value(data: &NodeData<'_>, idx: &[usize], field: usize) -> f64 {
    if is_set(&data.fields[field]) {
        table_p_value(&data.level_counts(idx, field)).0
    } else {
        let (d, n) = class_values(data, idx, field);
        anova_p_value(&[&d, &n])
    }
}

fn class_values(data: &NodeData<'_>, idx: &[usize], field: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = Vec::new();
    let mut n = Vec::new();
    for &i in idx {
        if data.y[i].is_normal() {
            n.push(data.x[i][field]);
        } else {
            d.push(data.x[i][field]);
        }
    }
    (d, n)
}

fn split_for(data: &NodeData<'_>, idx: &[usize], field: usize, counts: [usize; 2], min_leaf: usize) -> Option<Split> {
    let spec = &data.fields[field];
    let split = if is_set(spec) {
        Split::Partition {
            field,
            groups: proportion_partition(spec, &data.level_counts(idx, field), counts)?,
        }
    } else {
        let (d, n) = class_values(data, idx, field);
        let (md, mn) = (moments(&d).0, moments(&n).0);
        let candidates = [qda_split_point(&d, &n), 0.5 * (md + mn)];
        return candidates.into_iter().find_map(|threshold| {
            let s = Split::Threshold { field, threshold };
            let sizes = data.partition(idx, &s);
            sizes.iter().all(|p| p.len() >= min_leaf).then_some(s)
        });
    };
    let parts = data.partition(idx, &split);
    parts.iter().all(|p| p.len() >= min_leaf).then_some(split)
}

fn grow(data: &NodeData<'_>, idx: &[usize], depth: usize, cfg: &TreeConfig) -> TreeNode {
    let counts = data.counts(idx);
    let mut node = TreeNode::leaf(counts);
    if depth >= cfg.max_depth || counts[0] == 0 || counts[1] == 0 || idx.len() < 2 * cfg.min_leaf {
        return node;
    }
    let mut ranked: Vec<(usize, f64)> = (0..data.fields.len())
        .map(|f| (f, field_p_value(data, idx, f)))
        .filter(|(_, p)| *p < cfg.quest_alpha)
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    // Most significant field whose split point respects min_leaf.
    let Some(split) = ranked
        .iter()
        .find_map(|&(f, _)| split_for(data, idx, f, counts, cfg.min_leaf))
    else {
        return node;
    };
    node.children = data
        .partition(idx, &split)
        .iter()
        .map(|part| grow(data, part, depth + 1, cfg))
        .collect();
    node.split = Some(split);
    node
}

pub(crate) fn fit(data: &NodeData<'_>, cfg: &TreeConfig) -> Tree {
    let idx: Vec<usize> = (0..data.x.len()).collect();
    Tree {
        root: grow(data, &idx, 0, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_variance_equal_prior_splits_at_midpoint() {
        let d = [0.0, 1.0, 2.0];
        let n = [10.0, 11.0, 12.0];
        assert!((qda_split_point(&d, &n) - 6.0).abs() < 1e-9);
    }

    #[test]
    fn root_lies_between_means() {
        let d = [5.0, 7.0, 9.0, 6.0, 8.0];
        let n = [0.0, 1.0, 1.5, 2.0, 0.5, 1.0, 0.8, 1.2];
        let t = qda_split_point(&d, &n);
        assert!(t > 1.0 && t < 7.0, "{t}");
        // Density equality at the root.
        let (m0, v0) = moments(&d);
        let (m1, v1) = moments(&n);
        let dens = |x: f64, m: f64, v: f64, p: f64| {
            p * (-(x - m).powi(2) / (2.0 * v)).exp() / v.sqrt()
        };
        let lhs = dens(t, m0, v0, 5.0 / 13.0);
        let rhs = dens(t, m1, v1, 8.0 / 13.0);
        assert!((lhs - rhs).abs() / lhs.max(rhs) < 1e-9);
    }

    #[test]
    fn zero_variance_falls_back_to_midpoint() {
        assert_eq!(qda_split_point(&[0.0, 0.0], &[10.0, 10.0]), 5.0);
    }
}
