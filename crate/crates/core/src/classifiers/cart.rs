//! Classification and regression tree (classification only): greedy binary
//! splits by gini decrease, grown to `max_depth` / `min_leaf`. No
//! cost-complexity pruning yet.

use super::criteria::gini2;
use super::tree::{best_threshold, is_set, NodeData, Split, Tree, TreeNode};
use super::TreeConfig;

/// Smallest gini decrease that counts as an improvement.
pub(crate) const MIN_DECREASE: f64 = 1e-12;

fn decrease(parent: [usize; 2], left: [usize; 2], right: [usize; 2]) -> f64 {
    let n = (parent[0] + parent[1]) as f64;
    let nl = (left[0] + left[1]) as f64;
    let nr = (right[0] + right[1]) as f64;
    gini2(parent) - nl / n * gini2(left) - nr / n * gini2(right)
}

/// Best binary level partition of a set field: levels ordered by normal
/// proportion, every cut tried.
fn best_partition(
    data: &NodeData<'_>,
    idx: &[usize],
    field: usize,
    min_leaf: usize,
    parent: [usize; 2],
) -> Option<(Split, f64)> {
    let spec = &data.fields[field];
    let counts = data.level_counts(idx, field);
    let mut seen: Vec<usize> = (0..counts.len()).filter(|&l| counts[l][0] + counts[l][1] > 0).collect();
    let unseen: Vec<usize> = (0..counts.len()).filter(|l| !seen.contains(l)).collect();
    let prop = |l: usize| counts[l][1] as f64 / (counts[l][0] + counts[l][1]) as f64;
    seen.sort_by(|&a, &b| prop(a).total_cmp(&prop(b)).then(a.cmp(&b)));
    let mut best: Option<(usize, f64)> = None;
    let mut left = [0, 0];
    for cut in 1..seen.len() {
        let c = counts[seen[cut - 1]];
        left = [left[0] + c[0], left[1] + c[1]];
        let right = [parent[0] - left[0], parent[1] - left[1]];
        if left[0] + left[1] < min_leaf || right[0] + right[1] < min_leaf {
            continue;
        }
        let d = decrease(parent, left, right);
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((cut, d));
        }
    }
    let (cut, d) = best?;
    let mut lo: Vec<usize> = seen[..cut].to_vec();
    let mut hi: Vec<usize> = seen[cut..].to_vec();
    let n_of = |g: &[usize]| g.iter().map(|&l| counts[l][0] + counts[l][1]).sum::<usize>();
    if n_of(&lo) >= n_of(&hi) {
        lo.extend(&unseen);
    } else {
        hi.extend(&unseen);
    }
    let levels = |g: Vec<usize>| {
        let mut v: Vec<f64> = g.into_iter().map(|l| spec.levels[l]).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    Some((
        Split::Partition {
            field,
            groups: vec![levels(lo), levels(hi)],
        },
        d,
    ))
}

fn grow(data: &NodeData<'_>, idx: &[usize], depth: usize, cfg: &TreeConfig) -> TreeNode {
    let counts = data.counts(idx);
    let mut node = TreeNode::leaf(counts);
    if depth >= cfg.max_depth || counts[0] == 0 || counts[1] == 0 || idx.len() < 2 * cfg.min_leaf {
        return node;
    }
    let mut best: Option<(Split, f64)> = None;
    for field in 0..data.fields.len() {
        let candidate = if is_set(&data.fields[field]) {
            best_partition(data, idx, field, cfg.min_leaf, counts)
        } else {
            best_threshold(data, idx, field, cfg.min_leaf, |l, r| decrease(counts, l, r))
                .map(|(threshold, d)| (Split::Threshold { field, threshold }, d))
        };
        if let Some((split, d)) = candidate {
            if best.as_ref().is_none_or(|(_, bd)| d > *bd) {
                best = Some((split, d));
            }
        }
    }
    let Some((split, d)) = best else { return node };
    if d <= MIN_DECREASE {
        return node;
    }
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
