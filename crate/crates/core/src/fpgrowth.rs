//! FP-growth over condition-index transactions, with per-class counts kept
//! on every tree node so one pass yields support for both label classes.

use std::collections::HashMap;

/// A frequent itemset with its `[negative, positive]` row counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Itemset {
    pub items: Vec<usize>,
    pub counts: [usize; 2],
}

impl Itemset {
    pub fn total(&self) -> usize {
        self.counts[0] + self.counts[1]
    }
}

const ROOT: usize = 0;

struct Node {
    item: usize,
    counts: [usize; 2],
    parent: usize,
    children: Vec<usize>,
}

struct FpTree {
    nodes: Vec<Node>,
    /// Frequent items in descending-frequency order, with the nodes holding each.
    header: Vec<(usize, Vec<usize>)>,
}

impl FpTree {
    fn build(transactions: &[(Vec<usize>, [usize; 2])], min_count: usize) -> Self {
        let mut totals: HashMap<usize, usize> = HashMap::new();
        for (items, counts) in transactions {
            for &item in items {
                *totals.entry(item).or_default() += counts[0] + counts[1];
            }
        }
        let mut frequent: Vec<(usize, usize)> = totals.into_iter().filter(|&(_, c)| c >= min_count).collect();
        frequent.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let rank: HashMap<usize, usize> = frequent.iter().enumerate().map(|(r, &(item, _))| (item, r)).collect();

        let mut tree = FpTree {
            nodes: vec![Node {
                item: usize::MAX,
                counts: [0, 0],
                parent: ROOT,
                children: Vec::new(),
            }],
            header: frequent.iter().map(|&(item, _)| (item, Vec::new())).collect(),
        };
        let mut path = Vec::new();
        for (items, counts) in transactions {
            path.clear();
            path.extend(items.iter().copied().filter(|i| rank.contains_key(i)));
            path.sort_by_key(|i| rank[i]);
            let mut at = ROOT;
            for &item in &path {
                let found = tree.nodes[at]
                    .children
                    .iter()
                    .copied()
                    .find(|&c| tree.nodes[c].item == item);
                at = match found {
                    Some(c) => c,
                    None => {
                        let id = tree.nodes.len();
                        tree.nodes.push(Node {
                            item,
                            counts: [0, 0],
                            parent: at,
                            children: Vec::new(),
                        });
                        tree.nodes[at].children.push(id);
                        tree.header[rank[&item]].1.push(id);
                        id
                    }
                };
                tree.nodes[at].counts[0] += counts[0];
                tree.nodes[at].counts[1] += counts[1];
            }
        }
        tree
    }

    fn prefix_path(&self, mut node: usize) -> Vec<usize> {
        let mut path = Vec::new();
        node = self.nodes[node].parent;
        while node != ROOT {
            path.push(self.nodes[node].item);
            node = self.nodes[node].parent;
        }
        path
    }
}

fn grow(tree: &FpTree, prefix: &mut Vec<usize>, min_count: usize, max_len: usize, out: &mut Vec<Itemset>) {
    for (item, nodes) in tree.header.iter().rev() {
        let mut counts = [0usize; 2];
        for &n in nodes {
            counts[0] += tree.nodes[n].counts[0];
            counts[1] += tree.nodes[n].counts[1];
        }
        if counts[0] + counts[1] < min_count {
            continue;
        }
        prefix.push(*item);
        let mut items = prefix.clone();
        items.sort_unstable();
        out.push(Itemset { items, counts });
        if prefix.len() < max_len {
            let base: Vec<(Vec<usize>, [usize; 2])> = nodes
                .iter()
                .map(|&n| (tree.prefix_path(n), tree.nodes[n].counts))
                .filter(|(path, _)| !path.is_empty())
                .collect();
            if !base.is_empty() {
                let conditional = FpTree::build(&base, min_count);
                if !conditional.header.is_empty() {
                    grow(&conditional, prefix, min_count, max_len, out);
                }
            }
        }
        prefix.pop();
    }
}

/// All itemsets of length `1..=max_len` whose total count reaches
/// `min_count` (at least 1), sorted lexicographically by item indices.
pub(crate) fn frequent_itemsets(
    transactions: &[(Vec<usize>, [usize; 2])],
    min_count: usize,
    max_len: usize,
) -> Vec<Itemset> {
    let min_count = min_count.max(1);
    if max_len == 0 {
        return Vec::new();
    }
    let tree = FpTree::build(transactions, min_count);
    let mut out = Vec::new();
    grow(&tree, &mut Vec::new(), min_count, max_len, &mut out);
    out.sort_by(|a, b| a.items.cmp(&b.items));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(transactions: &[(Vec<usize>, [usize; 2])], min_count: usize, max_len: usize) -> Vec<Itemset> {
        let universe: usize = transactions
            .iter()
            .flat_map(|(t, _)| t.iter().copied())
            .max()
            .map_or(0, |m| m + 1);
        let mut out = Vec::new();
        for mask in 1u32..(1 << universe) {
            let items: Vec<usize> = (0..universe).filter(|&i| mask & (1 << i) != 0).collect();
            if items.len() > max_len {
                continue;
            }
            let mut counts = [0, 0];
            for (t, c) in transactions {
                if items.iter().all(|i| t.contains(i)) {
                    counts[0] += c[0];
                    counts[1] += c[1];
                }
            }
            if counts[0] + counts[1] >= min_count.max(1) {
                out.push(Itemset { items, counts });
            }
        }
        out.sort_by(|a, b| a.items.cmp(&b.items));
        out
    }

    #[test]
    fn matches_enumeration_on_small_table() {
        let tx = vec![
            (vec![0, 1, 2], [1, 0]),
            (vec![0, 2], [0, 1]),
            (vec![1, 2, 3], [0, 1]),
            (vec![0, 1, 2, 3], [1, 0]),
            (vec![3], [0, 1]),
        ];
        for min_count in 1..=4 {
            for max_len in 1..=4 {
                assert_eq!(
                    frequent_itemsets(&tx, min_count, max_len),
                    brute(&tx, min_count, max_len),
                    "min_count={min_count} max_len={max_len}"
                );
            }
        }
    }

    #[test]
    fn empty_transactions() {
        assert!(frequent_itemsets(&[], 1, 3).is_empty());
        assert!(frequent_itemsets(&[(vec![], [1, 0])], 1, 3).is_empty());
    }
}
