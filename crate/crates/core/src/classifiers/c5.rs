//! Entropy tree in the C4.5/C5 family.
//!
//! Range fields split on the threshold of highest information gain; set
//! fields split one branch per level. Among candidate fields whose gain is at
//! least the average positive gain, the highest gain ratio wins. The grown
//! tree is then pruned bottom-up by pessimistic error: a subtree collapses to
//! a leaf when the leaf's upper-confidence error estimate is no worse than
//! the subtree's (plus 0.1, as in C4.5).

use statrs::distribution::{Binomial, DiscreteCDF};

use super::criteria::entropy2;
use super::tree::{best_threshold, is_set, NodeData, Split, Tree, TreeNode};
use super::TreeConfig;

const MIN_GAIN: f64 = 1e-12;

fn split_entropy(parts: &[[usize; 2]]) -> (f64, f64) {
    // (weighted child entropy, split information)
    let n: usize = parts.iter().map(|c| c[0] + c[1]).sum();
    let mut child = 0.0;
    let mut info = 0.0;
    for c in parts {
        let k = c[0] + c[1];
        if k == 0 {
            continue;
        }
        let w = k as f64 / n as f64;
        child += w * entropy2(*c);
        info -= w * w.log2();
    }
    (child, info)
}

struct Candidate {
    split: Split,
    gain: f64,
    ratio: f64,
}

fn candidate(data: &NodeData<'_>, idx: &[usize], field: usize, cfg: &TreeConfig, parent: [usize; 2]) -> Option<Candidate> {
    let base = entropy2(parent);
    if is_set(&data.fields[field]) {
        let counts = data.level_counts(idx, field);
        let big = counts.iter().filter(|c| c[0] + c[1] >= cfg.min_leaf).count();
        if big < 2 {
            return None;
        }
        let (child, info) = split_entropy(&counts);
        let gain = base - child;
        if gain <= MIN_GAIN || info <= 0.0 {
            return None;
        }
        let groups = data.fields[field].levels.iter().map(|&l| vec![l]).collect();
        Some(Candidate {
            split: Split::Partition { field, groups },
            gain,
            ratio: gain / info,
        })
    } else {
        let (threshold, gain) = best_threshold(data, idx, field, cfg.min_leaf, |l, r| {
            base - split_entropy(&[l, r]).0
        })?;
        if gain <= MIN_GAIN {
            return None;
        }
        // Like C4.5, cut at an observed value rather than the midpoint.
        let threshold = idx
            .iter()
            .map(|&i| data.x[i][field])
            .filter(|&v| v <= threshold)
            .fold(f64::NEG_INFINITY, f64::max);
        let split = Split::Threshold { field, threshold };
        let parts = data.partition(idx, &split);
        let (_, info) = split_entropy(&[data.counts(&parts[0]), data.counts(&parts[1])]);
        Some(Candidate {
            split,
            gain,
            ratio: gain / info,
        })
    }
}

fn grow(data: &NodeData<'_>, idx: &[usize], depth: usize, cfg: &TreeConfig) -> TreeNode {
    let counts = data.counts(idx);
    let mut node = TreeNode::leaf(counts);
    if depth >= cfg.max_depth || counts[0] == 0 || counts[1] == 0 || idx.len() < 2 * cfg.min_leaf {
        return node;
    }
    let cands: Vec<Candidate> = (0..data.fields.len())
        .filter_map(|f| candidate(data, idx, f, cfg, counts))
        .collect();
    if cands.is_empty() {
        return node;
    }
    let avg_gain = cands.iter().map(|c| c.gain).sum::<f64>() / cands.len() as f64;
    let mut best: Option<&Candidate> = None;
    for c in cands.iter().filter(|c| c.gain >= avg_gain - 1e-12) {
        if best.is_none_or(|b| c.ratio > b.ratio) {
            best = Some(c);
        }
    }
    let split = best.expect("at least one candidate reaches the average").split.clone();
    node.children = data
        .partition(idx, &split)
        .iter()
        .map(|part| grow(data, part, depth + 1, cfg))
        .collect();
    node.split = Some(split);
    node
}

/// Upper limit of the binomial error rate: the `p` at which observing at
/// most `errors` in `n` trials has probability `cf`.
pub fn upper_error_rate(errors: usize, n: usize, cf: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if errors >= n {
        return 1.0;
    }
    if errors == 0 {
        return 1.0 - cf.powf(1.0 / n as f64);
    }
    let cdf = |p: f64| {
        Binomial::new(p, n as u64)
            .map(|b| b.cdf(errors as u64))
            .unwrap_or(0.0)
    };
    let (mut lo, mut hi) = (errors as f64 / n as f64, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) > cf {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn leaf_errors(node: &TreeNode, cf: f64) -> f64 {
    let n = node.total();
    let e = n - node.counts[node.majority().index()];
    n as f64 * upper_error_rate(e, n, cf)
}

/// Prunes in place; returns the estimated errors of the (pruned) subtree.
fn prune(node: &mut TreeNode, cf: f64) -> f64 {
    if node.is_leaf() {
        return leaf_errors(node, cf);
    }
    let subtree: f64 = node.children.iter_mut().map(|c| prune(c, cf)).sum();
    let as_leaf = leaf_errors(node, cf);
    if as_leaf <= subtree + 0.1 {
        node.split = None;
        node.children.clear();
        as_leaf
    } else {
        subtree
    }
}

pub(crate) fn fit(data: &NodeData<'_>, cfg: &TreeConfig) -> Tree {
    let idx: Vec<usize> = (0..data.x.len()).collect();
    let mut root = grow(data, &idx, 0, cfg);
    prune(&mut root, cfg.confidence);
    Tree { root }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_error_rate_matches_closed_form_and_cdf() {
        let u = upper_error_rate(0, 6, 0.25);
        assert!((u - (1.0 - 0.25f64.powf(1.0 / 6.0))).abs() < 1e-12);
        let u = upper_error_rate(3, 20, 0.25);
        let cdf = Binomial::new(u, 20).unwrap().cdf(3);
        assert!((cdf - 0.25).abs() < 1e-9);
        assert!(u > 0.15);
        assert_eq!(upper_error_rate(5, 5, 0.25), 1.0);
    }
}
