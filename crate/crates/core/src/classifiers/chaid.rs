//! Chi-squared automatic interaction detection over categorical predictors.
//!
//! At each node every predictor's categories are merged pairwise while the
//! most similar pair (largest chi-square p-value against the class) stays
//! above `alpha`; groups smaller than `min_leaf` are then folded into their
//! most similar neighbour. The predictor with the smallest
//! Bonferroni-adjusted p-value splits the node multiway when that p-value is
//! below `alpha`. Predictors are treated as nominal.

use super::criteria::{nominal_bonferroni, table_p_value};
use super::tree::{NodeData, Split, Tree, TreeNode};
use super::TreeConfig;

struct Grouping {
    /// Level indices per group.
    groups: Vec<Vec<usize>>,
    counts: Vec<[usize; 2]>,
}

impl Grouping {
    fn merge(&mut self, a: usize, b: usize) {
        let (a, b) = (a.min(b), a.max(b));
        let g = self.groups.remove(b);
        let c = self.counts.remove(b);
        self.groups[a].extend(g);
        self.groups[a].sort_unstable();
        self.counts[a] = [self.counts[a][0] + c[0], self.counts[a][1] + c[1]];
    }

    /// Most similar pair, optionally restricted to pairs containing `with`.
    fn most_similar(&self, with: Option<usize>) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..self.groups.len() {
            for b in (a + 1)..self.groups.len() {
                if with.is_some_and(|w| w != a && w != b) {
                    continue;
                }
                let (p, _) = table_p_value(&[self.counts[a], self.counts[b]]);
                if best.is_none_or(|(_, _, bp)| p > bp) {
                    best = Some((a, b, p));
                }
            }
        }
        best
    }
}

fn group_field(level_counts: &[[usize; 2]], cfg: &TreeConfig) -> Grouping {
    let seen: Vec<usize> = (0..level_counts.len())
        .filter(|&l| level_counts[l][0] + level_counts[l][1] > 0)
        .collect();
    let mut g = Grouping {
        groups: seen.iter().map(|&l| vec![l]).collect(),
        counts: seen.iter().map(|&l| level_counts[l]).collect(),
    };
    while g.groups.len() > 1 {
        let (a, b, p) = g.most_similar(None).expect("two or more groups");
        if p > cfg.chaid_alpha {
            g.merge(a, b);
        } else {
            break;
        }
    }
    while g.groups.len() > 1 {
        let small = (0..g.groups.len())
            .filter(|&i| g.counts[i][0] + g.counts[i][1] < cfg.min_leaf)
            .min_by_key(|&i| g.counts[i][0] + g.counts[i][1]);
        let Some(small) = small else { break };
        let (a, b, _) = g.most_similar(Some(small)).expect("two or more groups");
        g.merge(a, b);
    }
    g
}

fn grow(data: &NodeData<'_>, idx: &[usize], depth: usize, cfg: &TreeConfig) -> TreeNode {
    let counts = data.counts(idx);
    let mut node = TreeNode::leaf(counts);
    if depth >= cfg.max_depth || counts[0] == 0 || counts[1] == 0 || idx.len() < 2 * cfg.min_leaf {
        return node;
    }
    let mut best: Option<(usize, Grouping, f64)> = None;
    for field in 0..data.fields.len() {
        let level_counts = data.level_counts(idx, field);
        let n_seen = level_counts.iter().filter(|c| c[0] + c[1] > 0).count();
        let g = group_field(&level_counts, cfg);
        if g.groups.len() < 2 {
            continue;
        }
        let (p, _) = table_p_value(&g.counts);
        let adjusted = (p * nominal_bonferroni(n_seen, g.groups.len())).min(1.0);
        if best.as_ref().is_none_or(|(_, _, bp)| adjusted < *bp) {
            best = Some((field, g, adjusted));
        }
    }
    let Some((field, mut g, p)) = best else { return node };
    if p >= cfg.chaid_alpha {
        return node;
    }
    // Levels unseen here follow the largest group.
    let spec = &data.fields[field];
    let largest = (0..g.groups.len())
        .max_by_key(|&i| (g.counts[i][0] + g.counts[i][1], std::cmp::Reverse(i)))
        .expect("nonempty");
    for l in 0..spec.levels.len() {
        if !g.groups.iter().any(|grp| grp.contains(&l)) {
            g.groups[largest].push(l);
        }
    }
    let groups = g
        .groups
        .iter()
        .map(|grp| {
            let mut v: Vec<f64> = grp.iter().map(|&l| spec.levels[l]).collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let split = Split::Partition { field, groups };
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
