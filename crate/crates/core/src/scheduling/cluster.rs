//! Pairing-cost matrix and average-linkage agglomerative clustering.

use crate::error::{domain, Result};
use crate::power::{solve_pair, solve_single, VirtualUser};

/// Symmetric table of pairing powers.
///
/// Off-diagonal entries hold the optimal pair power, the diagonal the power of
/// a user served alone. `groups[i]` is the real user behind virtual user `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    size: usize,
    costs: Vec<f64>,
    groups: Vec<usize>,
}

impl CostMatrix {
    /// Builds a matrix from raw entries. `costs` is row-major `size x size`.
    pub fn from_raw(costs: Vec<f64>, groups: Vec<usize>) -> Result<Self> {
        let size = groups.len();
        if costs.len() != size * size {
            return Err(domain(format!("expected {} entries, got {}", size * size, costs.len())));
        }
        for i in 0..size {
            for j in 0..size {
                let c = costs[i * size + j];
                if !(c >= 0.0) || c != costs[j * size + i] {
                    return Err(domain(format!("entry ({i}, {j}) breaks symmetry or sign")));
                }
            }
        }
        Ok(Self { size, costs, groups })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.size + j]
    }

    pub fn group(&self, i: usize) -> usize {
        self.groups[i]
    }

    /// Dissimilarity used by the clustering. Replicas of one real user are
    /// co-located, so they sit at distance zero from each other.
    pub fn linkage_distance(&self, i: usize, j: usize) -> f64 {
        if i != j && self.groups[i] == self.groups[j] {
            0.0
        } else {
            self.get(i, j)
        }
    }
}

/// Pair powers for every pair of virtual users, single powers on the diagonal.
pub fn build_cost_matrix(users: &[VirtualUser]) -> Result<CostMatrix> {
    if users.len() < 2 {
        return Err(domain("cost matrix needs at least two users"));
    }
    let n = users.len();
    let mut costs = vec![0.0; n * n];
    for i in 0..n {
        costs[i * n + i] = solve_single(&users[i])?;
        for j in i + 1..n {
            let c = solve_pair(&users[i], &users[j])?.total;
            costs[i * n + j] = c;
            costs[j * n + i] = c;
        }
    }
    Ok(CostMatrix { size: n, costs, groups: users.iter().map(|u| u.user_id).collect() })
}

/// One agglomeration step. Leaves are clusters `0..n`; step `k` creates
/// cluster `n + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Merge tree together with the planar leaf order used for pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
    /// `swapped[k]` puts the right child of merge `k` first in the leaf order.
    pub swapped: Vec<bool>,
    pub leaf_order: Vec<usize>,
}

impl Dendrogram {
    /// Leaf indices covered by cluster `id`, in leaf order.
    pub fn members(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(c) = stack.pop() {
            if c < self.leaves {
                out.push(c);
            } else {
                let k = c - self.leaves;
                let m = &self.merges[k];
                let (first, second) = if self.swapped[k] { (m.right, m.left) } else { (m.left, m.right) };
                stack.push(second);
                stack.push(first);
            }
        }
        out
    }

    /// Leaf order under another choice of child orientations.
    pub fn order_with(&self, swapped: &[bool]) -> Vec<usize> {
        ordered_leaves(self.leaves, &self.merges, swapped)
    }
}

/// Average-linkage (UPGMA) clustering of the cost matrix.
///
/// The distance between two clusters is the mean linkage distance over all
/// cross pairs. Among equal minimal distances the pair of lowest slot indices
/// merges first, which makes the result a pure function of the matrix.
pub fn agglomerative_cluster(costs: &CostMatrix) -> Dendrogram {
    let n = costs.size();
    let mut dist: Vec<f64> = (0..n * n)
        .map(|k| costs.linkage_distance(k / n, k % n))
        .collect();
    // slot -> (cluster id, size); merged slots become None.
    let mut slots: Vec<Option<(usize, usize)>> = (0..n).map(|i| Some((i, 1))).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut pick: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if slots[i].is_none() {
                continue;
            }
            for j in i + 1..n {
                if slots[j].is_none() {
                    continue;
                }
                let d = dist[i * n + j];
                if pick.is_none_or(|(_, _, best)| d < best) {
                    pick = Some((i, j, d));
                }
            }
        }
        let (i, j, height) = pick.expect("at least two active clusters");
        let (id_i, size_i) = slots[i].expect("active");
        let (id_j, size_j) = slots[j].expect("active");
        let size = size_i + size_j;
        for k in 0..n {
            if k == i || k == j || slots[k].is_none() {
                continue;
            }
            let d = (size_i as f64 * dist[i * n + k] + size_j as f64 * dist[j * n + k]) / size as f64;
            dist[i * n + k] = d;
            dist[k * n + i] = d;
        }
        slots[i] = Some((n + step, size));
        slots[j] = None;
        merges.push(Merge { left: id_i, right: id_j, height, size });
    }

    let swapped = orientation(n, &merges);
    let leaf_order = ordered_leaves(n, &merges, &swapped);
    Dendrogram { leaves: n, merges, swapped, leaf_order }
}

/// Planar leaf order of a merge tree.
///
/// At every internal node the child that started merging earlier (the smaller
/// lowest merge height inside it; a bare leaf counts with its parent's height)
/// goes left. Ties go to the child holding the smallest leaf index. Points
/// that cluster tightly therefore end up on the left and isolated points on
/// the right.
pub fn leaf_order(leaves: usize, merges: &[Merge]) -> Vec<usize> {
    ordered_leaves(leaves, merges, &orientation(leaves, merges))
}

/// Child orientation of every merge under the rule of [`leaf_order`].
pub fn orientation(leaves: usize, merges: &[Merge]) -> Vec<bool> {
    let total = leaves + merges.len();
    let mut lowest = vec![f64::INFINITY; total];
    let mut min_leaf: Vec<usize> = (0..total).collect();
    for (k, m) in merges.iter().enumerate() {
        let id = leaves + k;
        lowest[id] = m.height.min(lowest[m.left]).min(lowest[m.right]);
        min_leaf[id] = min_leaf[m.left].min(min_leaf[m.right]);
    }
    let key = |child: usize, parent_height: f64| {
        let h = if child < leaves { parent_height } else { lowest[child] };
        (h, min_leaf[child])
    };
    merges
        .iter()
        .map(|m| {
            let (kl, kr) = (key(m.left, m.height), key(m.right, m.height));
            !(kl.0 < kr.0 || (kl.0 == kr.0 && kl.1 <= kr.1))
        })
        .collect()
}

/// Depth-first leaf order with the given child orientations.
pub fn ordered_leaves(leaves: usize, merges: &[Merge], swapped: &[bool]) -> Vec<usize> {
    if leaves == 0 {
        return Vec::new();
    }
    let mut order = Vec::with_capacity(leaves);
    let mut stack = vec![leaves + merges.len() - 1];
    while let Some(c) = stack.pop() {
        if c < leaves {
            order.push(c);
            continue;
        }
        let k = c - leaves;
        let m = &merges[k];
        let (first, second) = if swapped[k] { (m.right, m.left) } else { (m.left, m.right) };
        stack.push(second);
        stack.push(first);
    }
    order
}
